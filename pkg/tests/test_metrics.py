import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

import pshuffle.batching as batching
from pshuffle.batching import (BatchConfig, BatchLayout, partial_shuffle, rotate_rows, rowify,
                               sentence_shuffle)
from pshuffle.corpus import TokenSequence
from pshuffle.metrics import (ShuffleReport, adjacency_stats, batch_diversity,
                              sentence_adjacency_stats, shuffle_report)


def test_diversity_none_is_one(al_seq):
    assert batch_diversity(al_seq, BatchConfig(3, 2, "none"), 0, 5) == 1.0


def test_diversity_al_example_vs_unrotated(al_seq, monkeypatch):
    plans = {0: (2, 5), 1: (0, 0)}
    monkeypatch.setattr(batching, "draw_rotations", lambda s, L, epoch, seed: plans[epoch])
    # epoch 0: [C D E][F A B] / [L G H][I J K]; epoch 1: [A B C][D E F] / [G H I][J K L]
    assert batch_diversity(al_seq, BatchConfig(3, 2, "partial"), 0, 1) == 0.0


def test_diversity_same_epoch_is_one(al_seq):
    assert batch_diversity(al_seq, BatchConfig(3, 2, "partial", seed=4), 3, 3) == 1.0


def test_diversity_large_rows_near_zero():
    seq = TokenSequence.from_ids(np.arange(1, 24001) % 5000 + 1, eos_id=0)
    fracs = [batch_diversity(seq, BatchConfig(70, 4, "partial", seed=seed), 0, 1)
             for seed in range(100)]
    assert np.mean(fracs) < 0.05


def test_adjacency_zero_rotation(al_seq):
    layout = rowify(al_seq, 2)
    broken, preserved = adjacency_stats(layout, layout, (0, 0))
    assert broken == [0, 0] and preserved == 1.0


def test_adjacency_single_row_k2():
    row = BatchLayout(np.array([[0, 1, 2, 3, 4, 5]], dtype=np.uint32))
    shifted = rotate_rows(row, (2,))
    broken, preserved = adjacency_stats(row, shifted, (2,))
    # of (A,B) (B,C) (C,D) (D,E) (E,F) only (B,C) is split
    assert broken == [1]
    assert preserved == pytest.approx(4 / 5)


def test_adjacency_handles_repeated_tokens():
    row = BatchLayout(np.array([[7, 7, 7, 7]], dtype=np.uint32))
    broken, _ = adjacency_stats(row, rotate_rows(row, (1,)), (1,))
    assert broken == [1]


def test_adjacency_shape_mismatch(al_seq):
    with pytest.raises(ValueError):
        adjacency_stats(rowify(al_seq, 2), rowify(al_seq, 3), (0, 0))


def test_adjacency_wrong_plan(al_seq):
    layout = rowify(al_seq, 2)
    with pytest.raises(ValueError):
        adjacency_stats(layout, rotate_rows(layout, (1, 1)), (2, 1))


@given(st.integers(1, 40), st.data())
def test_one_break_per_rotated_row(L, data):
    k = data.draw(st.integers(0, L - 1))
    tokens = data.draw(st.lists(st.integers(0, 3), min_size=L, max_size=L))
    row = BatchLayout(np.array([tokens], dtype=np.uint32))
    broken, _ = adjacency_stats(row, rotate_rows(row, (k,)), (k,))
    assert broken == [0 if k == 0 or L == 1 else 1]


def _seq(sentences):
    return TokenSequence.from_ids([t for s in sentences for t in s + [0]], eos_id=0)


def test_sentence_adjacency_identity():
    seq = _seq([[1], [2, 3], [4]])
    assert sentence_adjacency_stats(seq, seq) == 1.0


def test_sentence_adjacency_reversal():
    assert sentence_adjacency_stats(_seq([[1], [2], [3]]), _seq([[3], [2], [1]])) == 0.0


def test_sentence_adjacency_multiset_mismatch():
    with pytest.raises(ValueError):
        sentence_adjacency_stats(_seq([[1], [2]]), _seq([[1], [3]]))


def test_sentence_adjacency_random_shuffles():
    n = 100
    seq = _seq([[i] for i in range(1, n + 1)])
    fracs = [sentence_adjacency_stats(seq, sentence_shuffle(seq, e, 17)) for e in range(1000)]
    # exact expectation is 1/n; 1/(n-1) is within the same tolerance
    assert abs(np.mean(fracs) - 1 / (n - 1)) < 0.01


@given(st.lists(st.lists(st.integers(1, 4), min_size=1, max_size=5), min_size=1, max_size=20),
       st.integers(0, 1000))
def test_sentence_shuffle_keeps_inner_pairs(sentences, epoch):
    seq = _seq(sentences)
    out = sentence_shuffle(seq, epoch, 3)
    spans = out.sentence_spans()
    got = sorted(tuple(out.tokens[a:b].tolist()) for a, b in spans)
    assert got == sorted(tuple(s + [0]) for s in sentences)


@pytest.fixture
def corpus_500():
    rng = np.random.default_rng(3)
    ids = rng.integers(1, 30, 500)
    ids[::9] = 0
    ids[-1] = 0
    return TokenSequence.from_ids(ids, eos_id=0)


def test_report_none(corpus_500):
    r = shuffle_report(corpus_500, BatchConfig(10, 4, "none"), epochs=3)
    assert r == ShuffleReport("none", 3, 1.0, 0.0, 1.0)


def test_report_partial(corpus_500):
    cfg = BatchConfig(10, 4, "partial", seed=1)
    r = shuffle_report(corpus_500, cfg, epochs=4)
    ks = [partial_shuffle(rowify(corpus_500, 4), e, 1)[1].rotation_indices for e in range(4)]
    expected_broken = np.mean([np.mean([k != 0 for k in plan]) for plan in ks])
    assert r.broken_adjacency_per_row == pytest.approx(expected_broken)
    assert 0 <= r.broken_adjacency_per_row <= 1
    assert r.preserved_adjacency_fraction == pytest.approx(1 - expected_broken / (125 - 1))
    assert r.identical_segment_fraction < 1.0


def test_report_sentence(corpus_500):
    r = shuffle_report(corpus_500, BatchConfig(10, 4, "sentence", seed=1), epochs=2)
    assert 0 <= r.preserved_adjacency_fraction < 1
    assert r.broken_adjacency_per_row > 1


def test_report_serialization(corpus_500):
    r = shuffle_report(corpus_500, BatchConfig(10, 4, "partial"), epochs=2)
    assert json.loads(r.to_json())["mode"] == "partial"
    header, row = r.to_csv().splitlines()
    assert header.split(",") == ["mode", "epochs_compared", "identical_segment_fraction",
                                 "broken_adjacency_per_row", "preserved_adjacency_fraction"]
    assert row.startswith("partial,2,")


def test_report_needs_two_epochs(corpus_500):
    with pytest.raises(ValueError):
        shuffle_report(corpus_500, BatchConfig(10, 4), epochs=1)
