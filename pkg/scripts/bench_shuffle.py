#!/usr/bin/env python3
"""Per-epoch partial-shuffle cost at PTB scale, across batch sizes.

Uses data/ptb.train.txt when present, otherwise a synthetic corpus of the
same size. Prints one JSON object per batch size.
"""

import argparse
import json
from pathlib import Path

from pshuffle.batching import BatchConfig
from pshuffle.bench import bench_pipeline, bench_shuffle, ptb_scale_corpus
from pshuffle.corpus import load_corpus

DEFAULT_PTB = Path(__file__).resolve().parents[1] / "data" / "ptb.train.txt"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--corpus", type=Path, default=DEFAULT_PTB)
    ap.add_argument("--bptt", type=int, default=70)
    ap.add_argument("--batch-sizes", type=int, nargs="+", default=[4, 12, 40])
    ap.add_argument("--repetitions", type=int, default=100)
    args = ap.parse_args(argv)

    if args.corpus.exists():
        _, seq = load_corpus(args.corpus)
        source = str(args.corpus)
    else:
        seq = ptb_scale_corpus()
        source = "ptb-scale-synthetic"

    for s in args.batch_sizes:
        cfg = BatchConfig(args.bptt, s)
        shuf = bench_shuffle(seq, cfg, args.repetitions)
        pipe = bench_pipeline(seq, cfg, 5)
        print(json.dumps({"source": source, "s": s, "b": args.bptt,
                          "median_shuffle_ms": round(shuf.median_shuffle_ms, 4),
                          "p95_shuffle_ms": round(shuf.p95_shuffle_ms, 4),
                          "pipeline_ms": round(pipe.median_shuffle_ms, 3),
                          "pipeline_tokens_per_s": round(pipe.tokens_per_second)}))


if __name__ == "__main__":
    main()
