"""Corpus ingestion: tokenizing, vocabularies, encoding, synthetic corpora."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .rng import RngStream, derive_stream

EOS = "<eos>"
TOKEN_DTYPE = np.uint32


class UnknownToken(KeyError):
    """Raised by :func:`encode` for a token missing from the vocabulary."""

    def __init__(self, token: str, position: int):
        super().__init__(token, position)
        self.token = token
        self.position = position

    def __str__(self) -> str:
        return f"unknown token {self.token!r} at position {self.position}"


@dataclass(frozen=True)
class Vocabulary:
    id_to_token: tuple[str, ...]
    token_to_id: dict[str, int] = field(repr=False, compare=False)

    def __post_init__(self):
        if EOS not in self.token_to_id:
            raise ValueError(f"vocabulary must contain {EOS!r}")
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate tokens in vocabulary")
        for i, tok in enumerate(self.id_to_token):
            if self.token_to_id[tok] != i:
                raise ValueError(f"token_to_id and id_to_token disagree at id {i}")

    @classmethod
    def from_tokens(cls, id_to_token: Iterable[str]) -> Vocabulary:
        itos = tuple(id_to_token)
        return cls(itos, {t: i for i, t in enumerate(itos)})

    @property
    def eos_id(self) -> int:
        return self.token_to_id[EOS]

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def save(self, path: str | Path) -> None:
        """One token per line; the line number is the id."""
        Path(path).write_text("".join(t + "\n" for t in self.id_to_token), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Vocabulary:
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls.from_tokens(lines)


@dataclass(frozen=True)
class TokenSequence:
    """A concatenated corpus as token ids plus sentence boundaries.

    ``sentence_ends[i]`` is the position right after the i-th eos.
    """

    tokens: np.ndarray
    sentence_ends: np.ndarray
    eos_id: int

    def __post_init__(self):
        self.tokens.setflags(write=False)
        self.sentence_ends.setflags(write=False)

    @classmethod
    def from_ids(cls, ids: Sequence[int] | np.ndarray, eos_id: int) -> TokenSequence:
        tokens = np.array(ids, dtype=TOKEN_DTYPE).reshape(-1)
        ends = np.flatnonzero(tokens == eos_id).astype(np.int64) + 1
        return cls(tokens, ends, int(eos_id))

    def __len__(self) -> int:
        return int(self.tokens.shape[0])

    @property
    def num_sentences(self) -> int:
        return int(self.sentence_ends.shape[0])

    def sentence_spans(self) -> list[tuple[int, int]]:
        """Half-open spans of each sentence; a trailing eos-less tail is its own span."""
        spans = []
        start = 0
        for end in self.sentence_ends.tolist():
            spans.append((start, end))
            start = end
        if start < len(self):
            spans.append((start, len(self)))
        return spans


def tokenize_lines(text: str) -> list[str]:
    """Whitespace-split every line and append ``<eos>`` after each one.

    >>> tokenize_lines("a b\\nc")
    ['a', 'b', '<eos>', 'c', '<eos>']
    """
    if not text:
        return []
    lines = text.split("\n")
    # a final newline terminates the last line rather than opening an empty one
    if lines[-1] == "":
        lines.pop()
    out: list[str] = []
    for line in lines:
        out.extend(line.split())
        out.append(EOS)
    return out


def build_vocab(tokens: Sequence[str]) -> Vocabulary:
    """Ids in first-occurrence order; ``<eos>`` appended if never seen."""
    if len(tokens) == 0:
        raise ValueError("cannot build a vocabulary from an empty token list")
    itos = list(dict.fromkeys(tokens))
    if EOS not in itos:
        itos.append(EOS)
    return Vocabulary.from_tokens(itos)


def encode(tokens: Sequence[str], vocab: Vocabulary) -> TokenSequence:
    stoi = vocab.token_to_id
    ids = np.empty(len(tokens), dtype=TOKEN_DTYPE)
    for pos, tok in enumerate(tokens):
        try:
            ids[pos] = stoi[tok]
        except KeyError:
            raise UnknownToken(tok, pos) from None
    return TokenSequence.from_ids(ids, vocab.eos_id)


def decode(seq: TokenSequence | Sequence[int], vocab: Vocabulary) -> list[str]:
    ids = seq.tokens if isinstance(seq, TokenSequence) else seq
    itos = vocab.id_to_token
    return [itos[int(i)] for i in ids]


def to_lines(tokens: Sequence[str]) -> str:
    """Inverse of :func:`tokenize_lines` up to whitespace normalization."""
    lines, cur = [], []
    for tok in tokens:
        if tok == EOS:
            lines.append(" ".join(cur))
            cur = []
        else:
            cur.append(tok)
    if cur:
        lines.append(" ".join(cur))
    return "".join(line + "\n" for line in lines)


def load_corpus(path: str | Path, vocab: Vocabulary | None = None) -> tuple[Vocabulary, TokenSequence]:
    toks = tokenize_lines(Path(path).read_text(encoding="utf-8"))
    if vocab is None:
        vocab = build_vocab(toks)
    return vocab, encode(toks, vocab)


# --- synthetic corpora -------------------------------------------------------


def topic_trace(num_sentences: int, num_topics: int, topic_stay_prob: float,
                rng: RngStream) -> list[int]:
    """Hidden topic per sentence from a sticky Markov chain.

    The first topic is uniform. Afterwards the topic is kept with probability
    ``topic_stay_prob`` and otherwise switches uniformly to one of the others.
    """
    topics = [rng.next_bounded(num_topics)]
    for _ in range(num_sentences - 1):
        cur = topics[-1]
        if num_topics > 1 and rng.next_float() >= topic_stay_prob:
            nxt = rng.next_bounded(num_topics - 1)
            cur = nxt + (nxt >= cur)
        topics.append(cur)
    return topics


def synthetic_vocab(num_topics: int, vocab_per_topic: int) -> Vocabulary:
    words = [f"t{t}w{j}" for t in range(num_topics) for j in range(vocab_per_topic)]
    return Vocabulary.from_tokens(words + [EOS])


def _zipf_cdf(n: int) -> list[float]:
    w = [1.0 / (rank + 1) for rank in range(n)]
    total = sum(w)
    acc, cdf = 0.0, []
    for x in w:
        acc += x
        cdf.append(acc / total)
    cdf[-1] = 1.0
    return cdf


def gen_synthetic_corpus(num_sentences: int, sentence_len: int, num_topics: int,
                         topic_stay_prob: float, vocab_per_topic: int,
                         seed: int) -> tuple[Vocabulary, TokenSequence]:
    """Topic-Markov corpus with measurable dependency between sentences.

    Each topic owns a disjoint slice of ``vocab_per_topic`` words, sampled with
    Zipf weights 1/rank. Token ``t{k}w{j}`` has id ``k * vocab_per_topic + j``
    and ``<eos>`` is the last id.
    """
    for name, val in (("num_sentences", num_sentences), ("sentence_len", sentence_len),
                      ("num_topics", num_topics), ("vocab_per_topic", vocab_per_topic)):
        if val < 1:
            raise ValueError(f"{name} must be >= 1, got {val}")
    if not 0.0 <= topic_stay_prob <= 1.0:
        raise ValueError(f"topic_stay_prob must lie in [0, 1], got {topic_stay_prob}")

    vocab = synthetic_vocab(num_topics, vocab_per_topic)
    eos_id = vocab.eos_id
    rng = derive_stream(seed, 0)
    topics = topic_trace(num_sentences, num_topics, topic_stay_prob, rng)
    cdf = _zipf_cdf(vocab_per_topic)

    ids = np.empty(num_sentences * (sentence_len + 1), dtype=TOKEN_DTYPE)
    pos = 0
    for topic in topics:
        base = topic * vocab_per_topic
        for _ in range(sentence_len):
            ids[pos] = base + bisect.bisect_right(cdf, rng.next_float())
            pos += 1
        ids[pos] = eos_id
        pos += 1
    return vocab, TokenSequence.from_ids(ids, eos_id)


def synthetic_topics(num_sentences: int, num_topics: int, topic_stay_prob: float,
                     seed: int) -> list[int]:
    """The hidden topic trace :func:`gen_synthetic_corpus` uses for ``seed``."""
    return topic_trace(num_sentences, num_topics, topic_stay_prob, derive_stream(seed, 0))
