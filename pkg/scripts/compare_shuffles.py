#!/usr/bin/env python3
"""Train the toy LM under each shuffle mode and report held-out perplexity.

    python scripts/compare_shuffles.py --epochs 20 --csv results.csv
"""

import argparse
import csv
import sys
from dataclasses import replace

from pshuffle.experiment import ComparisonConfig, run_comparison


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--sentence-len", type=int, default=5)
    ap.add_argument("--vocab-per-topic", type=int, default=20)
    ap.add_argument("--cell", choices=["rnn", "lstm"], default="rnn")
    ap.add_argument("--csv", help="write per-epoch history here")
    args = ap.parse_args(argv)

    base = ComparisonConfig()
    cfg = replace(base, seed=args.seed, sentence_len=args.sentence_len,
                  vocab_per_topic=args.vocab_per_topic,
                  train=replace(base.train, epochs=args.epochs, seed=args.seed, cell=args.cell))
    res = run_comparison(cfg, log=lambda line: print(line, file=sys.stderr))

    none = res["none"].final_ppl
    print(f"{'mode':>10} {'valid ppl':>10} {'vs none':>9}")
    for mode, r in res.items():
        print(f"{mode:>10} {r.final_ppl:10.4f} {r.final_ppl / none - 1:+9.2%}")

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mode", "epoch", "train_loss", "valid_ppl", "wall_ms"])
            for mode, r in res.items():
                for rec in r.history:
                    w.writerow([mode, rec.epoch, f"{rec.train_loss:.6f}", f"{rec.valid_ppl:.6f}",
                                f"{rec.wall_ms:.1f}"])


if __name__ == "__main__":
    main()
