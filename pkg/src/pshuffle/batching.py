"""Row layout, epoch shuffles, and BPTT segmentation.

The corpus is cut into ``s`` equal rows. Between epochs each row may be
rotated by a random offset (partial shuffle), or the whole corpus may have
its sentences permuted before rowifying (sentence shuffle). Rows are then
sliced column-wise into segments of at most ``b`` tokens.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .corpus import TOKEN_DTYPE, TokenSequence
from .rng import derive_stream


class ShuffleMode(str, enum.Enum):
    NONE = "none"
    PARTIAL = "partial"
    SENTENCE = "sentence"


@dataclass(frozen=True)
class BatchConfig:
    b: int
    s: int
    mode: ShuffleMode = ShuffleMode.PARTIAL
    seed: int = 42

    def __post_init__(self):
        if self.b < 1 or self.s < 1:
            raise ValueError(f"b and s must be >= 1, got b={self.b}, s={self.s}")
        object.__setattr__(self, "mode", ShuffleMode(self.mode))


@dataclass(frozen=True)
class BatchLayout:
    """``s`` rows of ``L`` tokens each, stored as a read-only (s, L) array."""

    rows: np.ndarray

    def __post_init__(self):
        if self.rows.ndim != 2:
            raise ValueError(f"rows must be 2-D, got shape {self.rows.shape}")
        self.rows.setflags(write=False)

    @property
    def s(self) -> int:
        return int(self.rows.shape[0])

    @property
    def L(self) -> int:
        return int(self.rows.shape[1])


@dataclass(frozen=True)
class ShufflePlan:
    epoch: int
    seed: int
    rotation_indices: tuple[int, ...]


@dataclass(frozen=True)
class SegmentBatch:
    step: int
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if self.inputs.shape != self.targets.shape:
            raise ValueError("inputs and targets must have the same shape")

    @property
    def length(self) -> int:
        return int(self.inputs.shape[1])


def rowify(seq: TokenSequence | np.ndarray, s: int) -> BatchLayout:
    """Split into ``s`` rows of ``floor(T / s)``; the remainder is dropped.

    Rows view the sequence's (read-only) buffer when possible.
    """
    tokens = seq.tokens if isinstance(seq, TokenSequence) else np.asarray(seq)
    T = int(tokens.shape[0])
    if s < 1:
        raise ValueError(f"s must be >= 1, got {s}")
    if T < s:
        raise ValueError(f"corpus has {T} tokens, fewer than the {s} rows requested")
    L = T // s
    rows = tokens[: s * L].reshape(s, L)
    if rows.dtype != TOKEN_DTYPE or rows.flags.writeable:
        # only a read-only source may be shared without copying
        rows = rows.astype(TOKEN_DTYPE, copy=True)
    return BatchLayout(rows)


def draw_rotations(s: int, L: int, epoch: int, seed: int) -> tuple[int, ...]:
    """Rotation offset for each row: the r-th draw of the (seed, epoch) stream, bound L."""
    rng = derive_stream(seed, epoch)
    return tuple(rng.next_bounded(L) for _ in range(s))


def rotate_rows(layout: BatchLayout, indices: Sequence[int],
                out: np.ndarray | None = None) -> BatchLayout:
    """Move the first ``k_r`` tokens of row ``r`` to its end.

    ``out`` may be a preallocated (s, L) buffer distinct from ``layout.rows``;
    it is then filled and wrapped without further allocation.
    """
    src = layout.rows
    s, L = src.shape
    if len(indices) != s:
        raise ValueError(f"need {s} rotation indices, got {len(indices)}")
    if out is None:
        out = np.empty_like(src)
    elif out.shape != src.shape or out.dtype != src.dtype:
        raise ValueError("out buffer must match the layout's shape and dtype")
    else:
        out.setflags(write=True)
    for r, k in enumerate(indices):
        if not 0 <= k < L:
            raise ValueError(f"rotation index {k} for row {r} outside [0, {L})")
        out[r, : L - k] = src[r, k:]
        out[r, L - k:] = src[r, :k]
    return BatchLayout(out)


def partial_shuffle(layout: BatchLayout, epoch: int, seed: int,
                    out: np.ndarray | None = None) -> tuple[BatchLayout, ShufflePlan]:
    """Rotate every row by an offset drawn uniformly from ``[0, L)``."""
    if layout.L < 1:
        raise ValueError("cannot shuffle empty rows")
    ks = draw_rotations(layout.s, layout.L, epoch, seed)
    return rotate_rows(layout, ks, out=out), ShufflePlan(epoch, seed, ks)


def sentence_permutation(n: int, epoch: int, seed: int) -> list[int]:
    """Fisher-Yates permutation of ``range(n)``; entry i is the sentence placed i-th."""
    rng = derive_stream(seed, epoch)
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.next_bounded(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def sentence_shuffle(seq: TokenSequence, epoch: int, seed: int) -> TokenSequence:
    """Permute eos-delimited sentences and re-concatenate them."""
    if seq.num_sentences == 0:
        raise ValueError("sentence shuffle needs at least one eos-terminated sentence")
    spans = seq.sentence_spans()
    perm = sentence_permutation(len(spans), epoch, seed)
    parts = [seq.tokens[a:b] for a, b in (spans[p] for p in perm)]
    return TokenSequence.from_ids(np.concatenate(parts), seq.eos_id)


def segment_iter(layout: BatchLayout, b: int, eos_id: int) -> Iterator[SegmentBatch]:
    """Yield ``ceil(L / b)`` column slices with next-token targets.

    Targets are the row shifted left by one; the last target of every row
    is ``eos_id``. Inputs and targets are read-only views where possible.
    """
    if b < 1:
        raise ValueError(f"b must be >= 1, got {b}")
    rows = layout.rows
    s, L = rows.shape
    for step, start in enumerate(range(0, L, b)):
        end = min(start + b, L)
        inputs = rows[:, start:end]
        if end < L:
            targets = rows[:, start + 1:end + 1]
        else:
            targets = np.empty((s, end - start), dtype=rows.dtype)
            targets[:, :-1] = rows[:, start + 1:end]
            targets[:, -1] = eos_id
            targets.setflags(write=False)
        yield SegmentBatch(step, inputs, targets)


def num_segments(L: int, b: int) -> int:
    return -(-L // b)


def epoch_layout(seq: TokenSequence, cfg: BatchConfig, epoch: int) -> BatchLayout:
    """The (possibly shuffled) row layout for one epoch, before segmentation."""
    if cfg.mode is ShuffleMode.SENTENCE:
        return rowify(sentence_shuffle(seq, epoch, cfg.seed), cfg.s)
    layout = rowify(seq, cfg.s)
    if cfg.mode is ShuffleMode.PARTIAL:
        layout, _ = partial_shuffle(layout, epoch, cfg.seed)
    return layout


def epoch_batches(seq: TokenSequence, cfg: BatchConfig, epoch: int) -> Iterator[SegmentBatch]:
    return segment_iter(epoch_layout(seq, cfg, epoch), cfg.b, seq.eos_id)
