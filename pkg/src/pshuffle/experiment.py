"""Desk-scale comparison of the three shuffle modes on a topic-Markov corpus.

Sentence shuffling destroys the topic carry-over between sentences, so a
model trained that way should do worse on held-out text that keeps it.
Partial shuffling keeps nearly all of it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .batching import BatchConfig, ShuffleMode
from .corpus import gen_synthetic_corpus
from .toylm import EpochRecord, TrainConfig, fit


@dataclass(frozen=True)
class ComparisonConfig:
    train_sentences: int = 2000
    valid_sentences: int = 1000
    sentence_len: int = 5
    num_topics: int = 2
    topic_stay_prob: float = 0.95
    vocab_per_topic: int = 20
    seed: int = 42
    b: int = 20
    s: int = 4
    eval_s: int = 1
    train: TrainConfig = field(default_factory=lambda: TrainConfig(d=16, h=32, lr=0.2, clip=0.25,
                                                                   epochs=20, seed=42))


@dataclass
class ModeResult:
    mode: str
    history: list[EpochRecord]
    seconds: float

    @property
    def final_ppl(self) -> float:
        return self.history[-1].valid_ppl


def run_comparison(cfg: ComparisonConfig = ComparisonConfig(),
                   modes=("none", "partial", "sentence"), log=None) -> dict[str, ModeResult]:
    """Train one model per mode from identical initial weights."""
    vocab, train = gen_synthetic_corpus(cfg.train_sentences, cfg.sentence_len, cfg.num_topics,
                                        cfg.topic_stay_prob, cfg.vocab_per_topic, cfg.seed)
    _, valid = gen_synthetic_corpus(cfg.valid_sentences, cfg.sentence_len, cfg.num_topics,
                                    cfg.topic_stay_prob, cfg.vocab_per_topic, cfg.seed + 1000)
    eval_cfg = BatchConfig(cfg.b, cfg.eval_s, ShuffleMode.NONE, cfg.seed)
    results = {}
    for mode in modes:
        t0 = time.perf_counter()
        bcfg = BatchConfig(cfg.b, cfg.s, mode, cfg.seed)
        _, history = fit(train, valid, len(vocab), bcfg, cfg.train, eval_bcfg=eval_cfg)
        results[mode] = ModeResult(mode, history, time.perf_counter() - t0)
        if log:
            log(f"{mode:>8}: valid ppl {results[mode].final_ppl:.4f} "
                f"({results[mode].seconds:.1f} s)")
    return results
