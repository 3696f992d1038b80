"""Minibatch denoiser training on (x_t, x_0) pairs drawn on the fly.

Each epoch visits (segment, t) pairs in a freshly shuffled order. A pair is
materialized only when its turn comes: the noisy roll is drawn with the jump
kernel directly from the clean segment, so resident pair storage stays
proportional to one minibatch no matter how many epochs, segments, or steps
the run covers. The objective is plain mean-squared error between the
network's sigmoid output and the clean roll.
"""

from __future__ import annotations

import io
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .diffusion import NoiseSchedule, forward_jump, make_schedule
from .fsio import atomic_write_bytes
from .pianoroll import PianoRoll, ones_ratio
from .rng import as_rng, make_rng
from .tensor import AdamState, Tape, Tensor, adam_step, backward, mse_loss
from .unet import UNetConfig, UNetParams, conv_layout, forward, init_params

T_MODES = ("uniform", "sweep")

# rng stream tags, so shuffling and pair noise never share a stream
_STREAM_ORDER = 1
_STREAM_PAIR = 2

CHECKPOINT_MAGIC = b"BINROLL1"
_META_CONFIG = "meta.config"
_META_SCHEDULE = "meta.schedule"


@dataclass(frozen=True)
class TrainConfig:
    """Everything a run needs besides the segments themselves."""

    unet: UNetConfig = field(default_factory=UNetConfig)
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 1e-4
    seed: int = 0
    T: int = 100
    manifest: str | None = None
    t_mode: str = "uniform"
    checkpoint_every: int = 0  # epochs between interim checkpoints; 0 = final only
    checkpoint_path: str | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        if self.t_mode not in T_MODES:
            raise ValueError(f"t_mode must be one of {T_MODES}, got {self.t_mode!r}")
        if self.checkpoint_every < 0:
            raise ValueError(f"checkpoint_every must be >= 0, got {self.checkpoint_every}")


@dataclass
class TrainReport:
    """Per-epoch mean losses plus run-level bookkeeping.

    wall_seconds is informational only and deliberately kept out of to_csv so
    that identical runs serialize identically.
    """

    epoch_losses: list[float]
    pair_count: int
    wall_seconds: float

    def to_csv(self) -> str:
        lines = ["epoch,pairs,mean_loss"]
        for i, loss in enumerate(self.epoch_losses, start=1):
            lines.append(f"{i},{self.pair_count},{loss!r}")
        return "\n".join(lines) + "\n"


def make_pair(x0: PianoRoll, t: int, s: NoiseSchedule, rng) -> tuple[Tensor, Tensor]:
    """(noisy input, clean target) as float 1-channel tensors.

    The noisy roll comes straight from the jump kernel; x_1..x_{t-1} are
    never built.
    """
    noisy = forward_jump(x0, t, s, rng)
    return (
        Tensor(noisy.bits.astype(np.float32)[None]),
        Tensor(x0.bits.astype(np.float32)[None]),
    )


def pairs_per_epoch(n_segments: int, T: int, t_mode: str) -> int:
    if t_mode == "sweep":
        return n_segments * T
    if t_mode == "uniform":
        return n_segments
    raise ValueError(f"t_mode must be one of {T_MODES}, got {t_mode!r}")


def epoch_pairs(n_segments: int, T: int, t_mode: str, rng) -> list[tuple[int, int]]:
    """The epoch's (segment index, t) visit order, shuffled.

    sweep mode lists every (segment, t) combination exactly once; uniform
    mode draws one random t per segment.
    """
    rng = as_rng(rng)
    if t_mode == "sweep":
        pairs = [(i, t) for i in range(n_segments) for t in range(1, T + 1)]
    elif t_mode == "uniform":
        pairs = [(i, int(rng.integers(1, T + 1))) for i in range(n_segments)]
    else:
        raise ValueError(f"t_mode must be one of {T_MODES}, got {t_mode!r}")
    return [pairs[k] for k in rng.permutation(len(pairs))]


def train(config: TrainConfig, segments: list[PianoRoll],
          log=None) -> tuple[UNetParams, TrainReport]:
    """Run the configured number of epochs and return final params + report.

    The schedule's prior probability is the corpus ones ratio (clamped away
    from exact 0/1 so degenerate toy corpora still yield a valid schedule).
    log, if given, is called as log(epoch, mean_loss) after every epoch.
    """
    if not segments:
        raise ValueError("training needs at least one segment")
    expected = (config.unet.rows, config.unet.cols)
    for k, seg in enumerate(segments):
        if seg.bits.shape != expected:
            raise ValueError(f"segment {k} has shape {seg.bits.shape}, expected {expected}")

    p_prior = min(max(ones_ratio(segments), 1e-6), 1.0 - 1e-6)
    s = make_schedule(config.T, p_prior)
    params = init_params(config.unet, config.seed)
    state = AdamState()
    n_pairs = pairs_per_epoch(len(segments), config.T, config.t_mode)
    losses: list[float] = []
    started = time.perf_counter()
    step = 0

    for epoch in range(1, config.epochs + 1):
        order_rng = make_rng(config.seed, _STREAM_ORDER, epoch)
        pairs = epoch_pairs(len(segments), config.T, config.t_mode, order_rng)
        total = 0.0
        for start in range(0, len(pairs), config.batch_size):
            chunk = pairs[start : start + config.batch_size]
            for p in params.tensors.values():
                p.grad = None
            step += 1
            for j, (seg_idx, t) in enumerate(chunk):
                pair_rng = make_rng(config.seed, _STREAM_PAIR, epoch, start + j)
                x, target = make_pair(segments[seg_idx], t, s, pair_rng)
                with Tape():
                    loss = mse_loss(forward(params, x), target)
                backward(loss)
                value = float(loss.data)
                if not np.isfinite(value):
                    raise FloatingPointError(f"non-finite loss at optimizer step {step}")
                total += value
            scale = 1.0 / len(chunk)
            for p in params.tensors.values():
                if p.grad is not None:
                    p.grad *= scale
            adam_step(params.tensors, state, config.learning_rate)
        losses.append(total / len(pairs))
        if log is not None:
            log(epoch, losses[-1])
        if (config.checkpoint_path and config.checkpoint_every
                and epoch % config.checkpoint_every == 0 and epoch < config.epochs):
            save_checkpoint(params, f"{config.checkpoint_path}.epoch{epoch:04d}", s)

    if config.checkpoint_path:
        save_checkpoint(params, config.checkpoint_path, s)
    report = TrainReport(losses, n_pairs, time.perf_counter() - started)
    return params, report


# ---------------------------------------------------------------------------
# checkpoints
#
# Layout: magic "BINROLL1", then entries of
#   u64 name length, UTF-8 name, u64 rank, u64 x rank dims, float32 values
# (all integers little-endian). The first entry is meta.config with the
# network dimensions; an optional meta.schedule entry carries [T, p_prior];
# the conv parameters follow in layer order, weight before bias.


def _write_entry(fh, name: str, values: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    fh.write(struct.pack("<Q", len(encoded)))
    fh.write(encoded)
    fh.write(struct.pack("<Q", values.ndim))
    fh.write(struct.pack(f"<{values.ndim}Q", *values.shape))
    fh.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def save_checkpoint(params: UNetParams, path, schedule: NoiseSchedule | None = None) -> None:
    cfg = params.config
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    meta = [cfg.rows, cfg.cols, cfg.levels, cfg.base_channels, cfg.convs_per_level]
    _write_entry(buf, _META_CONFIG, np.asarray(meta, dtype=np.float32))
    if schedule is not None:
        _write_entry(buf, _META_SCHEDULE,
                     np.asarray([schedule.T, schedule.p_prior], dtype=np.float32))
    for name, tensor in params.items():
        _write_entry(buf, name, tensor.data)
    atomic_write_bytes(path, buf.getvalue())


class _Reader:
    def __init__(self, raw: bytes, path):
        self.raw = raw
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise ValueError(f"truncated checkpoint: {self.path}")
        chunk = self.raw[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def load_checkpoint(path, config: UNetConfig | None = None
                    ) -> tuple[UNetParams, NoiseSchedule | None]:
    """Read a checkpoint back; returns the params and the stored schedule.

    When config is given it must match the stored dimensions; otherwise the
    stored dimensions define the network. Unknown, missing, or misshapen
    parameters are format errors.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError(f"bad checkpoint magic in {path}")
    r = _Reader(raw, path)
    r.take(len(CHECKPOINT_MAGIC))
    entries: dict[str, np.ndarray] = {}
    while r.pos < len(raw):
        name = r.take(r.u64()).decode("utf-8")
        rank = r.u64()
        if rank > 8:
            raise ValueError(f"implausible rank {rank} in {path}")
        shape = tuple(r.u64() for _ in range(rank))
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        values = np.frombuffer(r.take(4 * count), dtype="<f4").reshape(shape)
        if name in entries:
            raise ValueError(f"duplicate checkpoint entry {name!r} in {path}")
        entries[name] = values

    meta = entries.pop(_META_CONFIG, None)
    if meta is None or meta.shape != (5,):
        raise ValueError(f"checkpoint {path} lacks a valid {_META_CONFIG} entry")
    stored = UNetConfig(*(int(v) for v in meta))
    if config is None:
        config = stored
    elif config != stored:
        raise ValueError(f"checkpoint config {stored} does not match requested {config}")

    schedule = None
    sched_meta = entries.pop(_META_SCHEDULE, None)
    if sched_meta is not None:
        if sched_meta.shape != (2,):
            raise ValueError(f"checkpoint {path} has a malformed {_META_SCHEDULE} entry")
        schedule = make_schedule(int(sched_meta[0]), float(sched_meta[1]))

    expected_shapes: dict[str, tuple[int, ...]] = {}
    for name, c_in, c_out in conv_layout(config):
        expected_shapes[f"{name}.weight"] = (c_out, c_in, 3, 3)
        expected_shapes[f"{name}.bias"] = (c_out,)
    unknown = sorted(set(entries) - set(expected_shapes))
    if unknown:
        raise ValueError(f"unknown parameters {unknown} for config {config}")

    params = UNetParams(config)
    for name, want in expected_shapes.items():  # canonical layer order
        values = entries.get(name)
        if values is None:
            raise ValueError(f"checkpoint {path} is missing parameter {name!r}")
        if values.shape != want:
            raise ValueError(f"parameter {name!r} has shape {values.shape}, expected {want}")
        params.tensors[name] = Tensor(np.ascontiguousarray(values, dtype=np.float32))
    return params, schedule
