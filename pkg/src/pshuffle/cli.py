"""Command-line entry point: ``pshuffle <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Sequence

from . import bench, corpus, formats, metrics, toylm
from .batching import BatchConfig, ShuffleMode, epoch_layout, segment_iter

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _positive_int(text: str) -> int:
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if val < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {val}")
    return val


def _nonneg_int(text: str) -> int:
    val = int(text)
    if val < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {val}")
    return val


def _probability(text: str) -> float:
    val = float(text)
    if not 0.0 <= val <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {val}")
    return val


def _positive_float(text: str) -> float:
    val = float(text)
    if not val > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {val}")
    return val


def _batch_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bptt", type=_positive_int, default=70, help="segment length b")
    p.add_argument("--batch-size", type=_positive_int, default=12, help="number of rows s")
    p.add_argument("--shuffle", choices=[m.value for m in ShuffleMode], default="partial")
    p.add_argument("--seed", type=int, default=42)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pshuffle", description="Partial-shuffle batching for recurrent LMs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic topic-Markov corpus")
    p.add_argument("--output", "-o", type=Path, required=True)
    p.add_argument("--num-sentences", type=_positive_int, default=2000)
    p.add_argument("--sentence-len", type=_positive_int, default=5)
    p.add_argument("--num-topics", type=_positive_int, default=2)
    p.add_argument("--stay-prob", type=_probability, default=0.95)
    p.add_argument("--vocab-per-topic", type=_positive_int, default=20)
    p.add_argument("--vocab-output", type=Path, help="also write the full synthetic vocabulary")
    p.add_argument("--seed", type=int, default=42)

    p = sub.add_parser("vocab", help="build a vocabulary file from a corpus")
    p.add_argument("input", type=Path)
    p.add_argument("--output", "-o", type=Path, required=True)

    p = sub.add_parser("batchify", help="dump one epoch of batches")
    p.add_argument("input", type=Path)
    p.add_argument("--output", "-o", type=Path, required=True)
    p.add_argument("--vocab", type=Path, help="vocabulary file (default: built from input)")
    p.add_argument("--format", choices=["binary", "text"], default="binary")
    p.add_argument("--epoch", type=_nonneg_int, default=0)
    _batch_flags(p)

    p = sub.add_parser("stats", help="shuffle randomization/ordering report")
    p.add_argument("input", type=Path)
    p.add_argument("--epochs", type=_positive_int, default=2)
    p.add_argument("--report-format", choices=["json", "csv"], default="json")
    p.add_argument("--output", "-o", type=Path)
    _batch_flags(p)

    p = sub.add_parser("train", help="train the toy LM and log per-epoch metrics as CSV")
    p.add_argument("--train", type=Path, required=True)
    p.add_argument("--valid", type=Path, required=True)
    p.add_argument("--vocab", type=Path, help="vocabulary file (default: built from --train)")
    p.add_argument("--epochs", type=_positive_int, default=20)
    p.add_argument("--d", type=_positive_int, default=16, help="embedding size")
    p.add_argument("--h", type=_positive_int, default=32, help="hidden size")
    p.add_argument("--lr", type=_positive_float, default=0.2)
    p.add_argument("--clip", type=_positive_float, default=0.25)
    p.add_argument("--cell", choices=[c.value for c in toylm.Cell], default="rnn")
    p.add_argument("--init-scale", type=_positive_float, default=0.1)
    p.add_argument("--eval-batch-size", type=_positive_int, default=1)
    p.add_argument("--output", "-o", type=Path, help="CSV path (default: stdout)")
    p.add_argument("--checkpoint", type=Path, help="write final PSLM checkpoint here")
    p.add_argument("--no-wall-clock", action="store_true",
                   help="write wall_ms as 0 so reruns are byte-identical")
    _batch_flags(p)

    p = sub.add_parser("bench", help="time the partial shuffle; JSON to stdout")
    p.add_argument("input", type=Path, nargs="?",
                   help="corpus (default: PTB-sized synthetic stand-in)")
    p.add_argument("--repetitions", type=_positive_int, default=100)
    p.add_argument("--pipeline-repetitions", type=_positive_int, default=5)
    _batch_flags(p)
    return parser


def _load(path: Path, vocab: corpus.Vocabulary | None = None):
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not valid UTF-8 at byte {exc.start}") from None
    toks = corpus.tokenize_lines(text)
    if not toks:
        raise DataError(f"{path}: empty corpus")
    if vocab is None:
        vocab = corpus.build_vocab(toks)
    try:
        seq = corpus.encode(toks, vocab)
    except corpus.UnknownToken as exc:
        line = toks[: exc.position].count(corpus.EOS) + 1
        raise DataError(f"{path}: line {line}, token {exc.position}: unknown token {exc.token!r}") from None
    return vocab, seq


def _batch_cfg(args) -> BatchConfig:
    return BatchConfig(args.bptt, args.batch_size, ShuffleMode(args.shuffle), args.seed)


def _check_size(path: Path, seq: corpus.TokenSequence, s: int) -> None:
    if len(seq) < s:
        raise DataError(f"{path}: {len(seq)} tokens is fewer than --batch-size {s}")


def cmd_synth(args, out) -> None:
    vocab, seq = corpus.gen_synthetic_corpus(args.num_sentences, args.sentence_len, args.num_topics,
                                             args.stay_prob, args.vocab_per_topic, args.seed)
    args.output.write_text(corpus.to_lines(corpus.decode(seq, vocab)), encoding="utf-8")
    if args.vocab_output:
        vocab.save(args.vocab_output)


def cmd_vocab(args, out) -> None:
    vocab, _ = _load(args.input)
    vocab.save(args.output)


def _load_vocab(path: Path | None) -> corpus.Vocabulary | None:
    if path is None:
        return None
    try:
        return corpus.Vocabulary.load(path)
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None


def cmd_batchify(args, out) -> None:
    vocab, seq = _load(args.input, _load_vocab(args.vocab))
    cfg = _batch_cfg(args)
    _check_size(args.input, seq, cfg.s)
    layout = epoch_layout(seq, cfg, args.epoch)
    steps = segment_iter(layout, cfg.b, seq.eos_id)
    header = (layout.s, cfg.b, layout.L, len(vocab), steps)
    if args.format == "binary":
        with open(args.output, "wb") as fh:
            formats.write_psb(fh, *header)
    else:
        with open(args.output, "w", encoding="utf-8") as fh:
            formats.write_psb_text(fh, *header)


def cmd_stats(args, out) -> None:
    _, seq = _load(args.input)
    cfg = _batch_cfg(args)
    _check_size(args.input, seq, cfg.s)
    if args.epochs < 2:
        raise UsageError("stats needs --epochs >= 2")
    report = metrics.shuffle_report(seq, cfg, args.epochs)
    text = report.to_json() if args.report_format == "json" else report.to_csv()
    if args.output:
        args.output.write_text(text, encoding="utf-8")
    else:
        out.write(text)


def cmd_train(args, out) -> None:
    vocab, train = _load(args.train, _load_vocab(args.vocab))
    _, valid = _load(args.valid, vocab)
    cfg = _batch_cfg(args)
    _check_size(args.train, train, cfg.s)
    _check_size(args.valid, valid, args.eval_batch_size)
    tcfg = toylm.TrainConfig(d=args.d, h=args.h, lr=args.lr, epochs=args.epochs, clip=args.clip,
                             cell=args.cell, init_scale=args.init_scale, seed=args.seed)
    eval_cfg = BatchConfig(cfg.b, args.eval_batch_size, ShuffleMode.NONE, cfg.seed)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "train_loss", "valid_ppl", "wall_ms"])
    try:
        params, history = toylm.fit(train, valid, len(vocab), cfg, tcfg, eval_bcfg=eval_cfg)
    except toylm.DivergenceError as exc:
        raise DataError(f"training diverged: {exc}") from None
    for rec in history:
        wall = 0.0 if args.no_wall_clock else rec.wall_ms
        writer.writerow([rec.epoch, f"{rec.train_loss:.6f}", f"{rec.valid_ppl:.6f}", f"{wall:.1f}"])
    if args.output:
        args.output.write_text(buf.getvalue(), encoding="utf-8")
    else:
        out.write(buf.getvalue())
    if args.checkpoint:
        toylm.save_checkpoint(args.checkpoint, params)


def cmd_bench(args, out) -> None:
    if args.input is None:
        seq = bench.ptb_scale_corpus(seed=args.seed)
        source = "ptb-scale-synthetic"
    else:
        _, seq = _load(args.input)
        source = str(args.input)
    cfg = _batch_cfg(args)
    _check_size(args.input or Path("<synthetic>"), seq, cfg.s)
    if args.repetitions < 10:
        raise UsageError("bench needs --repetitions >= 10")
    if args.pipeline_repetitions < 3:
        raise UsageError("bench needs --pipeline-repetitions >= 3")
    shuf = bench.bench_shuffle(seq, cfg, args.repetitions)
    pipe = bench.bench_pipeline(seq, cfg, args.pipeline_repetitions)
    result = {
        "source": source,
        "shuffle": json.loads(shuf.to_json()),
        "pipeline": json.loads(pipe.to_json()),
        "claim_under_10ms": shuf.median_shuffle_ms < 10.0,
    }
    out.write(json.dumps(result, indent=2) + "\n")


COMMANDS = {
    "synth": cmd_synth,
    "vocab": cmd_vocab,
    "batchify": cmd_batchify,
    "stats": cmd_stats,
    "train": cmd_train,
    "bench": cmd_bench,
}


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        err.write(f"{exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        err.write(f"pshuffle {args.command}: {exc}\n")
        return EXIT_USAGE
    except DataError as exc:
        err.write(f"pshuffle {args.command}: {exc}\n")
        return EXIT_DATA
    except formats.FormatError as exc:
        err.write(f"pshuffle {args.command}: {exc}\n")
        return EXIT_DATA
    except OSError as exc:
        err.write(f"pshuffle {args.command}: {exc.filename}: {exc.strerror}\n")
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
