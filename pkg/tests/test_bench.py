import json
import tracemalloc

import numpy as np
import pytest

from pshuffle.batching import BatchConfig, partial_shuffle, rowify
from pshuffle.bench import (PTB_TRAIN_TOKENS, bench_pipeline, bench_shuffle,
                            compare_modes, ptb_scale_corpus)
from pshuffle.corpus import TokenSequence


@pytest.fixture(scope="module")
def ptb_sized():
    return ptb_scale_corpus()


def test_ptb_scale_corpus_shape(ptb_sized):
    assert len(ptb_sized) == PTB_TRAIN_TOKENS
    assert ptb_sized.tokens.max() == ptb_sized.eos_id == 9999
    assert 40_000 < ptb_sized.num_sentences < 50_000


def test_repetition_floors(ptb_sized):
    with pytest.raises(ValueError):
        bench_shuffle(ptb_sized, BatchConfig(70, 12), repetitions=9)
    with pytest.raises(ValueError):
        bench_pipeline(ptb_sized, BatchConfig(70, 12), repetitions=2)


def test_result_invariants(ptb_sized):
    r = bench_shuffle(ptb_sized, BatchConfig(70, 12), repetitions=20)
    assert 0 < r.median_shuffle_ms <= r.p95_shuffle_ms
    assert r.tokens_per_second > 0
    assert json.loads(r.to_json())["corpus_tokens"] == PTB_TRAIN_TOKENS


def test_small_corpus_sanity_bound():
    seq = TokenSequence.from_ids(np.arange(1000) % 50, eos_id=0)
    assert bench_shuffle(seq, BatchConfig(70, 12), repetitions=100).median_shuffle_ms < 0.1


@pytest.mark.slow
def test_runtime_flat_across_row_counts(ptb_sized):
    medians = [bench_shuffle(ptb_sized, BatchConfig(70, s), repetitions=100).median_shuffle_ms
               for s in (4, 12, 40)]
    assert max(medians) < 2 * min(medians)


@pytest.mark.slow
def test_pipeline_throughput(ptb_sized):
    r = bench_pipeline(ptb_sized, BatchConfig(70, 12, "partial"), repetitions=5)
    assert r.tokens_per_second >= 10e6


@pytest.mark.slow
def test_partial_pipeline_costs_one_shuffle(ptb_sized):
    t = compare_modes(ptb_sized, BatchConfig(70, 12), repetitions=15)
    delta = t["partial"] - t["none"]
    # noise floor: 1.5 ms or a quarter of the unshuffled epoch
    assert abs(delta - t["shuffle_only"]) <= max(1.5, 0.25 * t["none"])


def test_shuffle_into_buffer_does_not_allocate_per_token(ptb_sized):
    layout = rowify(ptb_sized, 12)
    buf = np.empty_like(layout.rows)
    partial_shuffle(layout, 0, 1, out=buf)
    tracemalloc.start()
    try:
        partial_shuffle(layout, 1, 1, out=buf)
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    # the layout itself is ~3.7 MB
    assert peak < 16 * 1024
