"""Partial-shuffle batching for truncated-BPTT language-model training."""

from .batching import (BatchConfig, BatchLayout, SegmentBatch, ShuffleMode, ShufflePlan,
                       epoch_batches, partial_shuffle, rotate_rows, rowify, segment_iter,
                       sentence_shuffle)
from .corpus import (EOS, TokenSequence, UnknownToken, Vocabulary, build_vocab, decode, encode,
                     gen_synthetic_corpus, load_corpus, tokenize_lines)
from .rng import RngStream, derive_stream

__version__ = "0.1.0"
