"""On-disk formats: PSB1 batch dumps (binary and text).

PSB1 layout, little-endian throughout::

    magic "PSB1" | u16 version=1 | u16 reserved=0
    u32 s | u32 b | u32 L | u32 vocab_size | u32 num_steps
    num_steps x ( u32 seg_len | inputs s*seg_len u32 | targets s*seg_len u32 )

Inputs and targets are row-major.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, TextIO

import numpy as np

from .batching import SegmentBatch, num_segments

PSB_MAGIC = b"PSB1"
PSB_VERSION = 1
_HEADER = struct.Struct("<4sHH5I")
_U32 = struct.Struct("<I")
_LE_U32 = np.dtype("<u4")


class FormatError(ValueError):
    pass


@dataclass
class BatchDump:
    s: int
    b: int
    L: int
    vocab_size: int
    steps: list[SegmentBatch] = field(default_factory=list)

    def __eq__(self, other):
        if not isinstance(other, BatchDump):
            return NotImplemented
        return ((self.s, self.b, self.L, self.vocab_size) == (other.s, other.b, other.L, other.vocab_size)
                and len(self.steps) == len(other.steps)
                and all(np.array_equal(x.inputs, y.inputs) and np.array_equal(x.targets, y.targets)
                        for x, y in zip(self.steps, other.steps)))


def write_psb(fh: BinaryIO, s: int, b: int, L: int, vocab_size: int,
              steps: Iterable[SegmentBatch], num_steps: int | None = None) -> int:
    """Stream segments to ``fh``; returns the number of steps written.

    ``num_steps`` defaults to ``ceil(L / b)``, the count segment_iter yields.
    """
    if num_steps is None:
        num_steps = num_segments(L, b)
    fh.write(_HEADER.pack(PSB_MAGIC, PSB_VERSION, 0, s, b, L, vocab_size, num_steps))
    n = 0
    for seg in steps:
        if seg.inputs.shape[0] != s:
            raise FormatError(f"segment {seg.step} has {seg.inputs.shape[0]} rows, expected {s}")
        fh.write(_U32.pack(seg.length))
        fh.write(np.ascontiguousarray(seg.inputs, dtype=_LE_U32).tobytes())
        fh.write(np.ascontiguousarray(seg.targets, dtype=_LE_U32).tobytes())
        n += 1
    if n != num_steps:
        raise FormatError(f"header announced {num_steps} steps but {n} were written")
    return n


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated PSB1 stream: wanted {n} bytes, got {len(buf)}")
    return buf


def read_psb(fh: BinaryIO) -> BatchDump:
    magic, version, _reserved, s, b, L, vocab_size, num_steps = _HEADER.unpack(
        _read_exact(fh, _HEADER.size))
    if magic != PSB_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {PSB_MAGIC!r}")
    if version != PSB_VERSION:
        raise FormatError(f"unsupported PSB1 version {version}")
    dump = BatchDump(s, b, L, vocab_size)
    for step in range(num_steps):
        (seg_len,) = _U32.unpack(_read_exact(fh, 4))
        n = s * seg_len
        inputs = np.frombuffer(_read_exact(fh, 4 * n), dtype=_LE_U32).reshape(s, seg_len)
        targets = np.frombuffer(_read_exact(fh, 4 * n), dtype=_LE_U32).reshape(s, seg_len)
        dump.steps.append(SegmentBatch(step, inputs.astype(np.uint32), targets.astype(np.uint32)))
    if fh.read(1):
        raise FormatError("trailing bytes after the last PSB1 step")
    return dump


def dump_to_bytes(dump: BatchDump) -> bytes:
    buf = io.BytesIO()
    write_psb(buf, dump.s, dump.b, dump.L, dump.vocab_size, dump.steps, len(dump.steps))
    return buf.getvalue()


def dump_from_bytes(data: bytes) -> BatchDump:
    return read_psb(io.BytesIO(data))


def save_psb(path: str | Path, dump: BatchDump) -> None:
    Path(path).write_bytes(dump_to_bytes(dump))


def load_psb(path: str | Path) -> BatchDump:
    with open(path, "rb") as fh:
        return read_psb(fh)


# --- text form ---------------------------------------------------------------
#
#   # PSB1-text s=2 b=3 L=6 vocab_size=12 num_steps=2
#   # step 0 seg_len 3
#   in 2 3 4
#   in 11 6 7
#   tg 3 4 5
#   tg 6 7 8


def write_psb_text(fh: TextIO, s: int, b: int, L: int, vocab_size: int,
                   steps: Iterable[SegmentBatch], num_steps: int | None = None) -> int:
    if num_steps is None:
        num_steps = num_segments(L, b)
    fh.write(f"# PSB1-text s={s} b={b} L={L} vocab_size={vocab_size} num_steps={num_steps}\n")
    n = 0
    for seg in steps:
        fh.write(f"# step {n} seg_len {seg.length}\n")
        for tag, grid in (("in", seg.inputs), ("tg", seg.targets)):
            for row in grid.tolist():
                fh.write(tag + "".join(f" {v}" for v in row) + "\n")
        n += 1
    if n != num_steps:
        raise FormatError(f"header announced {num_steps} steps but {n} were written")
    return n


def read_psb_text(fh: TextIO) -> BatchDump:
    lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith("# PSB1-text "):
        raise FormatError("missing '# PSB1-text' header")
    try:
        hdr = dict(kv.split("=") for kv in lines[0].split()[2:])
        s, b, L, vocab_size, num_steps = (int(hdr[k]) for k in ("s", "b", "L", "vocab_size", "num_steps"))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"malformed header: {lines[0]!r}") from exc
    dump = BatchDump(s, b, L, vocab_size)
    pos = 1
    for step in range(num_steps):
        parts = lines[pos].split() if pos < len(lines) else []
        if parts[:2] != ["#", "step"] or len(parts) != 5:
            raise FormatError(f"line {pos + 1}: expected step header")
        seg_len = int(parts[4])
        block = lines[pos + 1: pos + 1 + 2 * s]
        if len(block) != 2 * s:
            raise FormatError(f"step {step}: truncated block")
        grids = {}
        for tag, rows in (("in", block[:s]), ("tg", block[s:])):
            vals = []
            for ln in rows:
                toks = ln.split()
                if toks[0] != tag or len(toks) != seg_len + 1:
                    raise FormatError(f"step {step}: malformed row {ln!r}")
                vals.append([int(t) for t in toks[1:]])
            grids[tag] = np.array(vals, dtype=np.uint32).reshape(s, seg_len)
        dump.steps.append(SegmentBatch(step, grids["in"], grids["tg"]))
        pos += 1 + 2 * s
    if any(ln.strip() for ln in lines[pos:]):
        raise FormatError("trailing content after the last step")
    return dump
