"""How random are the batches, and how much ordering survives a shuffle."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .batching import (BatchConfig, BatchLayout, ShuffleMode, ShufflePlan, epoch_batches,
                       partial_shuffle, rowify, sentence_permutation)
from .corpus import TokenSequence


@dataclass(frozen=True)
class ShuffleReport:
    mode: str
    epochs_compared: int
    identical_segment_fraction: float
    broken_adjacency_per_row: float
    preserved_adjacency_fraction: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(asdict(self)), lineterminator="\n")
        w.writeheader()
        w.writerow(asdict(self))
        return buf.getvalue()


def batch_diversity(seq: TokenSequence, cfg: BatchConfig, epoch_a: int, epoch_b: int) -> float:
    """Fraction of steps whose input grids are identical in the two epochs."""
    same = total = 0
    for x, y in zip(epoch_batches(seq, cfg, epoch_a), epoch_batches(seq, cfg, epoch_b)):
        total += 1
        same += bool(np.array_equal(x.inputs, y.inputs))
    return same / total if total else 1.0


def _rotation_breaks(L: int, k: int) -> int:
    # original pair (j, j+1) lands at ((j-k) mod L, (j+1-k) mod L); it stays
    # adjacent unless j-k wraps to the last column, i.e. j = k-1 with k > 0
    if L < 2:
        return 0
    j = np.arange(L - 1)
    pos = (j - k) % L
    return int(np.count_nonzero((j + 1 - k) % L != pos + 1))


def adjacency_stats(original: BatchLayout, shuffled: BatchLayout,
                    plan: ShufflePlan | Sequence[int]) -> tuple[list[int], float]:
    """Broken adjacent pairs per row and the overall preserved fraction.

    Pairs are tracked by position through the known rotation, so repeated
    tokens cannot be mismatched. ``shuffled`` must be exactly the rotation of
    ``original`` described by ``plan``.
    """
    if original.rows.shape != shuffled.rows.shape:
        raise ValueError(f"shape mismatch: {original.rows.shape} vs {shuffled.rows.shape}")
    ks = plan.rotation_indices if isinstance(plan, ShufflePlan) else tuple(plan)
    s, L = original.rows.shape
    if len(ks) != s:
        raise ValueError(f"plan has {len(ks)} indices for {s} rows")
    broken = []
    for r, k in enumerate(ks):
        if not np.array_equal(np.roll(original.rows[r], -k), shuffled.rows[r]):
            raise ValueError(f"row {r} is not the rotation of the original by {k}")
        broken.append(_rotation_breaks(L, k))
    pairs = s * (L - 1)
    return broken, (1.0 - sum(broken) / pairs) if pairs else 1.0


def _sentences(seq: TokenSequence) -> list[tuple[int, ...]]:
    return [tuple(seq.tokens[a:b].tolist()) for a, b in seq.sentence_spans()]


def sentence_adjacency_stats(seq: TokenSequence, shuffled: TokenSequence) -> float:
    """Fraction of consecutive sentence pairs of ``seq`` still consecutive in ``shuffled``.

    Sentences are compared by content; identical sentences are counted as a
    multiset so duplicates cannot be matched twice.
    """
    orig, new = _sentences(seq), _sentences(shuffled)
    if Counter(orig) != Counter(new):
        raise ValueError("sequences do not contain the same multiset of sentences")
    if len(orig) < 2:
        return 1.0
    before = Counter(zip(orig, orig[1:]))
    after = Counter(zip(new, new[1:]))
    return sum((before & after).values()) / (len(orig) - 1)


def _sentence_token_breaks(seq: TokenSequence, perm: list[int]) -> int:
    # within-sentence pairs always survive; the boundary pair (i, i+1) survives
    # only if sentence i+1 is placed right after sentence i
    where = {p: pos for pos, p in enumerate(perm)}
    return sum(where[i + 1] != where[i] + 1 for i in range(len(perm) - 1))


def shuffle_report(seq: TokenSequence, cfg: BatchConfig, epochs: int = 2) -> ShuffleReport:
    """Averages over epochs ``0..epochs-1``; diversity compares consecutive epochs.

    Adjacency is measured on the pre-segmentation stream: rows for the
    partial shuffle, the whole token stream for the sentence shuffle.
    """
    if epochs < 2:
        raise ValueError("need at least two epochs to compare")
    div = float(np.mean([batch_diversity(seq, cfg, e, e + 1) for e in range(epochs - 1)]))
    base = rowify(seq, cfg.s)
    if cfg.mode is ShuffleMode.NONE:
        broken_per_row, preserved = 0.0, 1.0
    elif cfg.mode is ShuffleMode.PARTIAL:
        per_row, pres = [], []
        for e in range(epochs):
            shuffled, plan = partial_shuffle(base, e, cfg.seed)
            broken, frac = adjacency_stats(base, shuffled, plan)
            per_row.append(np.mean(broken))
            pres.append(frac)
        broken_per_row, preserved = float(np.mean(per_row)), float(np.mean(pres))
    else:
        n_pairs = max(len(seq) - 1, 1)
        n_spans = len(seq.sentence_spans())
        brk = [_sentence_token_breaks(seq, sentence_permutation(n_spans, e, cfg.seed))
               for e in range(epochs)]
        broken_per_row = float(np.mean(brk)) / cfg.s
        preserved = 1.0 - float(np.mean(brk)) / n_pairs
    return ShuffleReport(cfg.mode.value, epochs, div, broken_per_row, preserved)
