"""Wall-clock benchmarks for the epoch shuffle and the full batch pipeline."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from .batching import BatchConfig, ShuffleMode, epoch_batches, partial_shuffle, rowify
from .corpus import TOKEN_DTYPE, TokenSequence

WARMUP = 3
# size of the standard preprocessed PTB training split (ptb.train.txt incl. <eos>)
PTB_TRAIN_TOKENS = 929_589
PTB_VOCAB = 10_000


@dataclass(frozen=True)
class BenchResult:
    corpus_tokens: int
    s: int
    b: int
    repetitions: int
    median_shuffle_ms: float
    p95_shuffle_ms: float
    tokens_per_second: float
    median_pipeline_ms: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


def _summary(samples_s: list[float]) -> tuple[float, float]:
    ms = np.asarray(samples_s) * 1e3
    return float(np.median(ms)), float(np.percentile(ms, 95))


def bench_shuffle(seq: TokenSequence, cfg: BatchConfig, repetitions: int = 100) -> BenchResult:
    """Time ``partial_shuffle`` alone on a prebuilt layout.

    Each repetition uses a fresh epoch and writes into one preallocated
    buffer; the first WARMUP calls are not recorded.
    """
    if repetitions < 10:
        raise ValueError(f"repetitions must be >= 10, got {repetitions}")
    layout = rowify(seq, cfg.s)
    buf = np.empty_like(layout.rows)
    samples = []
    clock = time.perf_counter
    for rep in range(WARMUP + repetitions):
        t0 = clock()
        partial_shuffle(layout, rep, cfg.seed, out=buf)
        dt = clock() - t0
        if rep >= WARMUP:
            samples.append(dt)
    med, p95 = _summary(samples)
    n = layout.s * layout.L
    return BenchResult(len(seq), cfg.s, cfg.b, repetitions, med, p95, n / (med / 1e3))


def _materialize(seq: TokenSequence, cfg: BatchConfig, epoch: int) -> int:
    n = 0
    for seg in epoch_batches(seq, cfg, epoch):
        np.ascontiguousarray(seg.targets)
        n += np.ascontiguousarray(seg.inputs).size
    return n


def bench_pipeline(seq: TokenSequence, cfg: BatchConfig, repetitions: int = 5) -> BenchResult:
    """Time full epoch materialization (shuffle, rowify, segment, copy out).

    ``tokens_per_second`` counts input tokens emitted per second at the
    median; the shuffle fields hold the per-epoch pipeline timings.
    """
    if repetitions < 3:
        raise ValueError(f"repetitions must be >= 3, got {repetitions}")
    samples = []
    n = 0
    clock = time.perf_counter
    for rep in range(WARMUP + repetitions):
        t0 = clock()
        n = _materialize(seq, cfg, rep)
        dt = clock() - t0
        if rep >= WARMUP:
            samples.append(dt)
    med, p95 = _summary(samples)
    return BenchResult(len(seq), cfg.s, cfg.b, repetitions, med, p95, n / (med / 1e3), med)


def ptb_scale_corpus(num_tokens: int = PTB_TRAIN_TOKENS, vocab_size: int = PTB_VOCAB,
                     mean_sentence_len: int = 21, seed: int = 0) -> TokenSequence:
    """Zipf-distributed ids with PTB's token count, vocabulary size and
    average sentence length. Shuffle cost depends only on the array size."""
    rng = np.random.default_rng(seed)
    eos = vocab_size - 1
    ranks = np.arange(1, vocab_size, dtype=np.float64)
    p = 1.0 / ranks
    p /= p.sum()
    ids = rng.choice(vocab_size - 1, size=num_tokens, p=p).astype(TOKEN_DTYPE)
    ids[mean_sentence_len - 1::mean_sentence_len] = eos
    ids[-1] = eos
    return TokenSequence.from_ids(ids, eos)


def compare_modes(seq: TokenSequence, cfg: BatchConfig, repetitions: int = 5) -> dict[str, float]:
    """Median pipeline ms per shuffle mode, plus the shuffle-only median."""
    out = {m.value: bench_pipeline(seq, replace(cfg, mode=m), repetitions).median_shuffle_ms
           for m in (ShuffleMode.NONE, ShuffleMode.PARTIAL)}
    out["shuffle_only"] = bench_shuffle(seq, cfg, max(10, 10 * repetitions)).median_shuffle_ms
    return out
