"""Filter visualization by gradient ascent on the network input.

Start from binomial noise, repeatedly push the input in the direction that
raises one convolution filter's mean pre-activation response, and watch what
pattern the input converges to. The recorded activation series brackets every
update: entry 0 is the initial input's value, entry k the value after k
updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import make_rng
from .tensor import Tape, Tensor, backward, channel_mean
from .unet import UNetConfig, UNetParams, conv_layout, forward_to


@dataclass(frozen=True)
class AMConfig:
    """One ascent run: which filter, how long, how hard, and from what noise."""

    layer: str | None = None  # None picks the deepest conv stack's last layer
    filter_index: int = 0
    iterations: int = 200
    step_size: float = 0.1
    seed: int = 0
    p_prior: float = 0.5
    snapshot_iters: tuple[int, ...] = ()

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.step_size <= 0.0:
            raise ValueError(f"step_size must be > 0, got {self.step_size}")
        if not 0.0 < self.p_prior < 1.0:
            raise ValueError(f"p_prior must be in (0,1), got {self.p_prior}")


@dataclass
class AMResult:
    final_input: np.ndarray  # rows x cols, real-valued
    activations: list[float]  # iterations + 1 entries
    snapshots: dict[int, np.ndarray]


def default_layer(config: UNetConfig) -> str:
    """The last convolution at the network's lowest resolution."""
    return f"bottom.{config.convs_per_level - 1}"


def _objective(params: UNetParams, x: np.ndarray, layer: str, index: int
               ) -> tuple[Tensor, Tensor]:
    leaf = Tensor(x.copy())
    with Tape():
        value = channel_mean(forward_to(params, leaf, layer), index)
    return leaf, value


def activation_maximization(params: UNetParams, cfg: AMConfig) -> AMResult:
    """Ascend a Bernoulli(p_prior) input toward one filter's preferred pattern."""
    layer = cfg.layer or default_layer(params.config)
    channels = {name: c_out for name, _, c_out in conv_layout(params.config)}
    if layer not in channels:
        raise ValueError(f"no conv layer named '{layer}'")
    if not 0 <= cfg.filter_index < channels[layer]:
        raise ValueError(
            f"filter {cfg.filter_index} out of range for layer '{layer}' "
            f"with {channels[layer]} filters")

    rng = make_rng(cfg.seed)
    shape = (1, params.config.rows, params.config.cols)
    x = (rng.random(shape) < cfg.p_prior).astype(np.float32)
    wanted = set(cfg.snapshot_iters)
    activations: list[float] = []
    snapshots: dict[int, np.ndarray] = {}

    for k in range(cfg.iterations):
        if k in wanted:
            snapshots[k] = x[0].copy()
        leaf, value = _objective(params, x, layer, cfg.filter_index)
        backward(value)
        activations.append(float(value.data))
        x = x + cfg.step_size * leaf.grad

    _, value = _objective(params, x, layer, cfg.filter_index)
    activations.append(float(value.data))
    if cfg.iterations in wanted:
        snapshots[cfg.iterations] = x[0].copy()
    return AMResult(x[0], activations, snapshots)
