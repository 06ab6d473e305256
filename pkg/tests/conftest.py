import re

import pytest

from pshuffle.corpus import Vocabulary, encode

LETTERS = "A B C D E F G H I J K L".split()

_acceptance: dict[str, str] = {}
_notes: dict[str, str] = {}


@pytest.fixture
def al_vocab():
    return Vocabulary.from_tokens(LETTERS + ["<eos>"])


@pytest.fixture
def al_seq(al_vocab):
    """The twelve-letter corpus A..L with no eos, ids 0..11."""
    return encode(LETTERS, al_vocab)


@pytest.fixture
def note(request):
    """Attach a one-line measurement to this acceptance criterion's summary."""
    marker = request.node.get_closest_marker("acceptance")
    label = marker.args[0] if marker and marker.args else request.node.name

    def record(text):
        _notes[label] = text
        print(f"[{label}] {text}")

    return record


def letters(grid, vocab):
    return [[vocab.id_to_token[int(i)] for i in row] for row in grid]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    label = marker.args[0] if marker.args else item.name
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        # parametrized criteria share a label; any failing case fails it
        if _acceptance.get(label) != "FAIL":
            _acceptance[label] = status


def _criterion_key(label):
    m = re.match(r"C(\d+)(\w*)", label)
    return (int(m.group(1)), m.group(2)) if m else (10**6, label)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_acceptance, key=_criterion_key):
        extra = f"  ({_notes[label]})" if label in _notes else ""
        terminalreporter.write_line(f"{_acceptance[label]}  {label}{extra}")
