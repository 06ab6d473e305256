"""Desk-scale recurrent language model with hand-written BPTT.

A single recurrent layer (tanh RNN or LSTM) between an embedding table and
a softmax output layer, in float64. Each call to :func:`loss_and_grads`
backpropagates through one segment only; the incoming hidden state is a
constant, so no gradient reaches earlier segments.
"""

from __future__ import annotations

import enum
import math
import struct
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from .batching import BatchConfig, SegmentBatch, ShuffleMode, epoch_batches
from .corpus import TokenSequence
from .rng import derive_stream


class Cell(str, enum.Enum):
    RNN = "rnn"
    LSTM = "lstm"

    @property
    def gates(self) -> int:
        return 4 if self is Cell.LSTM else 1


class DivergenceError(FloatingPointError):
    pass


@dataclass
class ToyLmParams:
    """Parameter blocks. For the LSTM the recurrent blocks stack the four
    gates (input, forget, output, candidate) along the last axis."""

    embed: np.ndarray  # (V, d)
    w_xh: np.ndarray  # (d, G*h)
    w_hh: np.ndarray  # (h, G*h)
    b_h: np.ndarray  # (G*h,)
    w_out: np.ndarray  # (h, V)
    b_out: np.ndarray  # (V,)
    cell: Cell = Cell.RNN

    def __post_init__(self):
        self.cell = Cell(self.cell)
        V, d = self.embed.shape
        h = self.w_hh.shape[0]
        gh = self.cell.gates * h
        expected = {"w_xh": (d, gh), "w_hh": (h, gh), "b_h": (gh,), "w_out": (h, V), "b_out": (V,)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def V(self) -> int:
        return self.embed.shape[0]

    @property
    def d(self) -> int:
        return self.embed.shape[1]

    @property
    def h(self) -> int:
        return self.w_hh.shape[0]

    def blocks(self) -> Iterator[tuple[str, np.ndarray]]:
        for f in fields(self):
            if f.name != "cell":
                yield f.name, getattr(self, f.name)

    def copy(self) -> ToyLmParams:
        return replace(self, **{k: v.copy() for k, v in self.blocks()})

    def zeros_like(self) -> ToyLmParams:
        return replace(self, **{k: np.zeros_like(v) for k, v in self.blocks()})

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for _, v in self.blocks())

    @classmethod
    def zeros(cls, V: int, d: int, h: int, cell: Cell | str = Cell.RNN) -> ToyLmParams:
        g = Cell(cell).gates
        return cls(np.zeros((V, d)), np.zeros((d, g * h)), np.zeros((h, g * h)),
                   np.zeros(g * h), np.zeros((h, V)), np.zeros(V), Cell(cell))


@dataclass
class HiddenState:
    h: np.ndarray  # (s, h)
    c: np.ndarray | None = None  # (s, h), LSTM only

    @classmethod
    def zeros(cls, s: int, params: ToyLmParams) -> HiddenState:
        c = np.zeros((s, params.h)) if params.cell is Cell.LSTM else None
        return cls(np.zeros((s, params.h)), c)


@dataclass(frozen=True)
class TrainConfig:
    d: int = 16
    h: int = 32
    lr: float = 0.2
    epochs: int = 20
    clip: float = 0.25
    cell: Cell = Cell.RNN
    init_scale: float = 0.1
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "cell", Cell(self.cell))
        if self.d < 1 or self.h < 1:
            raise ValueError("d and h must be >= 1")
        if not self.lr >= 0:
            raise ValueError(f"lr must be non-negative, got {self.lr}")
        if not self.clip > 0:
            raise ValueError(f"clip must be positive, got {self.clip}")


def init_params(V: int, cfg: TrainConfig) -> ToyLmParams:
    """Uniform(-init_scale, init_scale) for every block, biases included."""
    p = ToyLmParams.zeros(V, cfg.d, cfg.h, cfg.cell)
    rng = derive_stream(cfg.seed, 0x1417)
    for _, arr in p.blocks():
        arr[...] = (2.0 * rng.uniform(arr.size) - 1.0).reshape(arr.shape) * cfg.init_scale
    return p


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def forward(params: ToyLmParams, inputs: np.ndarray, h0: HiddenState):
    """Unroll over the columns of ``inputs`` (s, n).

    Returns ``(logits (s, n, V), h_final, cache)``.
    """
    inputs = np.asarray(inputs)
    s, n = inputs.shape
    if n and int(inputs.max()) >= params.V:
        raise ValueError(f"token id {int(inputs.max())} outside vocabulary of size {params.V}")
    H = params.h
    lstm = params.cell is Cell.LSTM
    xs = params.embed[inputs]  # (s, n, d)
    hs = np.empty((n + 1, s, H))
    hs[0] = h0.h
    if lstm:
        cs = np.empty((n + 1, s, H))
        cs[0] = h0.c
        acts = np.empty((n, s, 4 * H))
    else:
        cs = acts = None
    pre_x = xs @ params.w_xh + params.b_h  # (s, n, G*H)
    for t in range(n):
        a = pre_x[:, t] + hs[t] @ params.w_hh
        if lstm:
            ifo = _sigmoid(a[:, : 3 * H])
            g = np.tanh(a[:, 3 * H:])
            acts[t, :, : 3 * H] = ifo
            acts[t, :, 3 * H:] = g
            cs[t + 1] = ifo[:, H: 2 * H] * cs[t] + ifo[:, :H] * g
            hs[t + 1] = ifo[:, 2 * H:] * np.tanh(cs[t + 1])
        else:
            hs[t + 1] = np.tanh(a)
    logits = np.einsum("tsh,hv->stv", hs[1:], params.w_out) + params.b_out
    if not np.isfinite(logits).all():
        raise DivergenceError("non-finite activations in forward pass")
    h_final = HiddenState(hs[n].copy(), cs[n].copy() if lstm else None)
    cache = {"inputs": inputs, "xs": xs, "hs": hs, "cs": cs, "acts": acts}
    return logits, h_final, cache


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def segment_loss(params: ToyLmParams, batch: SegmentBatch, h0: HiddenState) -> tuple[float, HiddenState]:
    """Mean cross-entropy of one segment, without gradients."""
    logits, h_final, _ = forward(params, batch.inputs, h0)
    if batch.length == 0:
        return 0.0, h_final
    logp = _log_softmax(logits)
    tgt = np.asarray(batch.targets, dtype=np.intp)
    nll = -np.take_along_axis(logp, tgt[..., None], axis=-1)
    return float(nll.mean()), h_final


def loss_and_grads(params: ToyLmParams, batch: SegmentBatch,
                   h0: HiddenState) -> tuple[float, ToyLmParams, HiddenState]:
    """Mean cross-entropy over the segment and its exact gradient.

    ``h0`` is treated as a constant.
    """
    logits, h_final, cache = forward(params, batch.inputs, h0)
    grads = params.zeros_like()
    s, n = batch.inputs.shape
    if n == 0:
        return 0.0, grads, h_final
    N = s * n
    logp = _log_softmax(logits)
    tgt = np.asarray(batch.targets, dtype=np.intp)
    loss = float(-np.take_along_axis(logp, tgt[..., None], axis=-1).sum() / N)
    if not math.isfinite(loss):
        raise DivergenceError(f"non-finite loss {loss}")

    dlogits = np.exp(logp)
    np.put_along_axis(dlogits, tgt[..., None],
                      np.take_along_axis(dlogits, tgt[..., None], axis=-1) - 1.0, axis=-1)
    dlogits /= N  # (s, n, V)

    hs, cs, acts, xs = cache["hs"], cache["cs"], cache["acts"], cache["xs"]
    grads.w_out[...] = np.einsum("tsh,stv->hv", hs[1:], dlogits)
    grads.b_out[...] = dlogits.sum(axis=(0, 1))
    dh_out = np.einsum("stv,hv->tsh", dlogits, params.w_out)  # (n, s, H)

    H = params.h
    lstm = params.cell is Cell.LSTM
    da_all = np.empty((n, s, params.cell.gates * H))
    dh_next = np.zeros((s, H))
    dc_next = np.zeros((s, H)) if lstm else None
    for t in range(n - 1, -1, -1):
        dh = dh_out[t] + dh_next
        if lstm:
            a = acts[t]
            i, f, o, g = a[:, :H], a[:, H:2 * H], a[:, 2 * H:3 * H], a[:, 3 * H:]
            tc = np.tanh(cs[t + 1])
            dc = dh * o * (1.0 - tc * tc) + dc_next
            da = da_all[t]
            da[:, :H] = dc * g * i * (1.0 - i)
            da[:, H:2 * H] = dc * cs[t] * f * (1.0 - f)
            da[:, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
            da[:, 3 * H:] = dc * i * (1.0 - g * g)
            dc_next = dc * f
        else:
            da = da_all[t]
            da[...] = dh * (1.0 - hs[t + 1] ** 2)
        dh_next = da @ params.w_hh.T
    grads.w_hh[...] = np.einsum("tsh,tsg->hg", hs[:-1], da_all)
    grads.b_h[...] = da_all.sum(axis=(0, 1))
    grads.w_xh[...] = np.einsum("std,tsg->dg", xs, da_all)
    dx = np.einsum("tsg,dg->std", da_all, params.w_xh)
    np.add.at(grads.embed, np.asarray(batch.inputs, dtype=np.intp).reshape(-1), dx.reshape(-1, params.d))
    return loss, grads, h_final


def clip_global_norm(grads: ToyLmParams, max_norm: float) -> float:
    """Scale ``grads`` in place to L2 norm at most ``max_norm``; returns the pre-clip norm."""
    norm = math.sqrt(sum(float(np.vdot(g, g)) for _, g in grads.blocks()))
    if norm > max_norm:
        scale = max_norm / norm
        for _, g in grads.blocks():
            g *= scale
    return norm


def sgd_step(params: ToyLmParams, grads: ToyLmParams, lr: float) -> None:
    for (_, p), (_, g) in zip(params.blocks(), grads.blocks()):
        p -= lr * g


def train_epoch(params: ToyLmParams, seq: TokenSequence, bcfg: BatchConfig,
                tcfg: TrainConfig, epoch: int) -> tuple[ToyLmParams, float]:
    """One pass over ``epoch_batches``; returns new params and the token-weighted mean loss.

    The hidden state starts at zero and is carried across segments.
    """
    params = params.copy()
    state = HiddenState.zeros(bcfg.s, params)
    total, count = 0.0, 0
    for batch in epoch_batches(seq, bcfg, epoch):
        loss, grads, state = loss_and_grads(params, batch, state)
        clip_global_norm(grads, tcfg.clip)
        sgd_step(params, grads, tcfg.lr)
        if not params.all_finite():
            raise DivergenceError(f"parameters diverged at epoch {epoch}, step {batch.step}")
        n = batch.inputs.size
        total += loss * n
        count += n
    return params, total / count


def evaluate_loss(params: ToyLmParams, seq: TokenSequence, bcfg: BatchConfig) -> float:
    """Token-weighted mean cross-entropy over unshuffled batches."""
    cfg = replace(bcfg, mode=ShuffleMode.NONE)
    state = HiddenState.zeros(cfg.s, params)
    total, count = 0.0, 0
    for batch in epoch_batches(seq, cfg, 0):
        loss, state = segment_loss(params, batch, state)
        total += loss * batch.inputs.size
        count += batch.inputs.size
    return total / count


def evaluate_ppl(params: ToyLmParams, seq: TokenSequence, bcfg: BatchConfig) -> float:
    return math.exp(evaluate_loss(params, seq, bcfg))


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_ppl: float
    wall_ms: float


def fit(train: TokenSequence, valid: TokenSequence, V: int, bcfg: BatchConfig,
        tcfg: TrainConfig, eval_bcfg: BatchConfig | None = None,
        params: ToyLmParams | None = None) -> tuple[ToyLmParams, list[EpochRecord]]:
    """Train for ``tcfg.epochs`` epochs, evaluating on ``valid`` after each."""
    if params is None:
        params = init_params(V, tcfg)
    eval_bcfg = eval_bcfg or bcfg
    history = []
    for epoch in range(tcfg.epochs):
        t0 = time.perf_counter()
        params, train_loss = train_epoch(params, train, bcfg, tcfg, epoch)
        wall_ms = (time.perf_counter() - t0) * 1e3
        history.append(EpochRecord(epoch, train_loss, evaluate_ppl(params, valid, eval_bcfg), wall_ms))
    return params, history


# --- checkpoints -------------------------------------------------------------
#
# "PSLM" | u16 version=1 | u16 reserved=0 | u32 V | u32 d | u32 h | u32 cell tag
# then embed, w_xh, w_hh, b_h, w_out, b_out as row-major little-endian float64.

PSLM_MAGIC = b"PSLM"
PSLM_VERSION = 1
_PSLM_HEADER = struct.Struct("<4sHH4I")
_CELL_TAGS = {Cell.RNN: 0, Cell.LSTM: 1}


def checkpoint_bytes(params: ToyLmParams) -> bytes:
    out = [_PSLM_HEADER.pack(PSLM_MAGIC, PSLM_VERSION, 0, params.V, params.d, params.h,
                             _CELL_TAGS[params.cell])]
    out.extend(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in params.blocks())
    return b"".join(out)


def params_from_bytes(data: bytes) -> ToyLmParams:
    if len(data) < _PSLM_HEADER.size:
        raise ValueError("truncated PSLM checkpoint")
    magic, version, _, V, d, h, tag = _PSLM_HEADER.unpack_from(data)
    if magic != PSLM_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {PSLM_MAGIC!r}")
    if version != PSLM_VERSION:
        raise ValueError(f"unsupported PSLM version {version}")
    cells = {v: k for k, v in _CELL_TAGS.items()}
    if tag not in cells:
        raise ValueError(f"unknown cell tag {tag}")
    params = ToyLmParams.zeros(V, d, h, cells[tag])
    offset = _PSLM_HEADER.size
    for _, arr in params.blocks():
        nbytes = arr.size * 8
        chunk = data[offset: offset + nbytes]
        if len(chunk) != nbytes:
            raise ValueError("truncated PSLM checkpoint")
        arr[...] = np.frombuffer(chunk, dtype="<f8").reshape(arr.shape)
        offset += nbytes
    if offset != len(data):
        raise ValueError("trailing bytes in PSLM checkpoint")
    return params


def save_checkpoint(path: str | Path, params: ToyLmParams) -> None:
    Path(path).write_bytes(checkpoint_bytes(params))


def load_checkpoint(path: str | Path) -> ToyLmParams:
    return params_from_bytes(Path(path).read_bytes())
