"""Hourglass convolutional denoiser with same-scale skip connections.

Geometry for the default config: a 1x56x384 roll goes through three
stride-2 reductions (56x384 -> 28x192 -> 14x96 -> 7x48) and back up via
nearest-neighbor upsampling. Skip depths run 32/64/128 with 256-deep
feature maps at the bottom; the last conv of the bottom stack and of each
up stack steps the depth down so that stacking a skip always exactly
doubles the depth arriving from below. A single-filter conv plus sigmoid
produces the per-cell denoised estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pianoroll import PianoRoll, ROWS, SEGMENT_COLS
from .rng import make_rng
from .tensor import Tensor, concat_channels, conv2d, relu, sigmoid, upsample_nn2x


@dataclass(frozen=True)
class UNetConfig:
    rows: int = ROWS
    cols: int = SEGMENT_COLS
    levels: int = 3
    base_channels: int = 32
    convs_per_level: int = 2

    def __post_init__(self):
        if self.levels < 1 or self.base_channels < 1 or self.convs_per_level < 1:
            raise ValueError(f"invalid config {self}")
        div = 1 << self.levels
        if self.rows % div or self.cols % div:
            raise ValueError(f"{self.rows}x{self.cols} not divisible by 2^{self.levels}")


def conv_layout(config: UNetConfig) -> list[tuple[str, int, int]]:
    """(name, in_channels, out_channels) for every conv, in execution order.

    This single table drives initialization, the forward pass, checkpoint
    ordering, and layer addressing for inspection.
    """
    skip = [config.base_channels << level for level in range(config.levels)]
    bottom = config.base_channels << config.levels
    layout: list[tuple[str, int, int]] = []

    for level in range(config.levels):
        c_in = 1 if level == 0 else skip[level]
        for i in range(config.convs_per_level):
            layout.append((f"down.{level}.{i}", c_in, skip[level]))
            c_in = skip[level]
        c_next = skip[level + 1] if level + 1 < config.levels else bottom
        layout.append((f"reduce.{level}", skip[level], c_next))

    c_in = bottom
    for i in range(config.convs_per_level):
        last = i == config.convs_per_level - 1
        c_out = skip[-1] if last else bottom
        layout.append((f"bottom.{i}", c_in, c_out))
        c_in = c_out

    incoming = c_in  # depth arriving from below at each up level
    for level in reversed(range(config.levels)):
        # build-time bookkeeping: stacking the skip must double the incoming depth
        assert incoming == skip[level], f"level {level}: incoming {incoming} != skip {skip[level]}"
        c_in = 2 * skip[level]
        for i in range(config.convs_per_level):
            last = i == config.convs_per_level - 1
            c_out = (skip[level - 1] if level > 0 else skip[0]) if last else skip[level]
            layout.append((f"up.{level}.{i}", c_in, c_out))
            c_in = c_out
        incoming = c_in

    layout.append(("final", skip[0], 1))
    return layout


@dataclass
class UNetParams:
    """Named filter/bias tensors in the fixed checkpoint order."""

    config: UNetConfig
    tensors: dict[str, Tensor] = field(default_factory=dict)

    def items(self):
        return self.tensors.items()

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def parameter_count(self) -> int:
        return sum(t.size for t in self.tensors.values())


def init_params(config: UNetConfig, seed: int, dtype=np.float32) -> UNetParams:
    """Uniform(-1,1)/sqrt(fan-in) filters, zero biases, fixed draw order."""
    rng = make_rng(seed)
    params = UNetParams(config)
    for name, c_in, c_out in conv_layout(config):
        bound = 1.0 / np.sqrt(c_in * 9)
        w = rng.uniform(-bound, bound, size=(c_out, c_in, 3, 3))
        params.tensors[f"{name}.weight"] = Tensor(w.astype(dtype))
        params.tensors[f"{name}.bias"] = Tensor(np.zeros(c_out, dtype=dtype))
    return params


def _conv(params: UNetParams, name: str, x: Tensor, stride: int = 1) -> Tensor:
    return conv2d(x, params[f"{name}.weight"], params[f"{name}.bias"], stride=stride)


def _walk(params: UNetParams, x: Tensor, stop_layer: str | None = None):
    """Run the network; if stop_layer is set, return that conv's raw output."""
    cfg = params.config

    def step(name: str, h: Tensor, stride: int = 1, activation=relu):
        out = _conv(params, name, h, stride)
        if name == stop_layer:
            return out, True
        return activation(out), False

    skips: list[Tensor] = []
    h = x
    for level in range(cfg.levels):
        for i in range(cfg.convs_per_level):
            h, done = step(f"down.{level}.{i}", h)
            if done:
                return h
        skips.append(h)
        h, done = step(f"reduce.{level}", h, stride=2)
        if done:
            return h

    for i in range(cfg.convs_per_level):
        h, done = step(f"bottom.{i}", h)
        if done:
            return h

    for level in reversed(range(cfg.levels)):
        up = upsample_nn2x(h)
        skip = skips[level]
        # stacking the copied map must exactly double the incoming depth
        assert skip.shape[0] == up.shape[0], (
            f"skip depth {skip.shape[0]} != incoming depth {up.shape[0]} at level {level}"
        )
        h = concat_channels(up, skip)
        for i in range(cfg.convs_per_level):
            h, done = step(f"up.{level}.{i}", h)
            if done:
                return h

    h, done = step("final", h, activation=sigmoid)
    return h


def forward(params: UNetParams, x: Tensor) -> Tensor:
    """Denoised estimate in (0,1), same 1xHxW shape as the input."""
    expected = (1, params.config.rows, params.config.cols)
    if x.shape != expected:
        raise ValueError(f"input shape {x.shape} != {expected}")
    return _walk(params, x)


def forward_to(params: UNetParams, x: Tensor, layer: str) -> Tensor:
    """Pre-activation output of one named conv layer (e.g. "bottom.1")."""
    if not any(name == layer for name, _, _ in conv_layout(params.config)):
        raise ValueError(f"no conv layer named '{layer}'")
    return _walk(params, x, stop_layer=layer)


def predict_binary(params: UNetParams, roll: PianoRoll) -> PianoRoll:
    """Threshold the denoised estimate at 0.5; exact ties become 0."""
    x = Tensor(roll.bits.astype(np.float32)[None])
    y = forward(params, x)
    return roll.with_bits((y.data[0] > 0.5).astype(np.uint8))
