"""Binomial diffusion: schedules, forward kernels, and the XOR-mask sampler.

The forward chain corrupts a binary roll cell-by-cell: at step t a cell
stays with probability 1-beta_t and is redrawn from the Bernoulli prior
with probability beta_t, so the per-cell success probability is

    step:  x_prev * (1 - beta_t) + p_prior * beta_t
    jump:  abar_t * x0 + (1 - abar_t) * p_prior      (abar_t = prod alpha_s)

The two agree in distribution (the recursion telescopes), which lets
training pairs be drawn at any t directly from x0. Sampling runs the
reverse loop: denoise, XOR against the original noise, and re-admit noise
on a Bernoulli(beta_t) subset of the disagreement cells, so the retained
noise shrinks with t while never introducing bits foreign to x_T or the
current estimate.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .pianoroll import PianoRoll
from .rng import as_rng
from .unet import UNetParams, predict_binary


@dataclass(frozen=True)
class NoiseSchedule:
    """Diffusion rates indexed 1..T (index 0 holds the identity step).

    beta[t] in (0,1], alpha[t] = 1-beta[t], alpha_bar[t] = prod alpha[1..t];
    p_prior is the Bernoulli parameter of the fully-noised distribution.
    """

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    p_prior: float

    def __post_init__(self):
        for arr in (self.beta, self.alpha, self.alpha_bar):
            arr.setflags(write=False)

    def check_t(self, t: int) -> None:
        if not 1 <= t <= self.T:
            raise ValueError(f"step {t} outside 1..{self.T}")


def make_schedule(T: int, p_prior: float) -> NoiseSchedule:
    """The telescoping schedule beta_t = 1/(T-t+1), so abar_t = (T-t)/T."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if not 0.0 < p_prior < 1.0:
        raise ValueError(f"p_prior must be in (0,1), got {p_prior}")
    t = np.arange(T + 1, dtype=np.float64)
    beta = np.zeros(T + 1)
    beta[1:] = 1.0 / (T - t[1:] + 1.0)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    if np.any(np.diff(alpha_bar) > 0):
        raise AssertionError("alpha_bar must be non-increasing")
    if alpha_bar[T] > 1e-2 * alpha_bar[1]:
        raise AssertionError("alpha_bar[T] must be ~0 for a full-noise endpoint")
    return NoiseSchedule(T, beta, alpha, alpha_bar, float(p_prior))


# ---------------------------------------------------------------------------
# forward (noising) kernels


def step_success_probs(x_prev: np.ndarray, t: int, s: NoiseSchedule) -> np.ndarray:
    """Per-cell success probability of the one-step kernel at step t."""
    s.check_t(t)
    return x_prev * (1.0 - s.beta[t]) + s.p_prior * s.beta[t]


def forward_step(x_prev: PianoRoll, t: int, s: NoiseSchedule, rng) -> PianoRoll:
    """One corruption step x_{t-1} -> x_t."""
    rng = as_rng(rng)
    p = step_success_probs(x_prev.bits.astype(np.float64), t, s)
    return x_prev.with_bits(rng.random(p.shape) < p)


def jump_success_prob(x0_bit: int, t: int, s: NoiseSchedule) -> float:
    """Closed-form success probability of q(x_t | x_0) for one cell."""
    s.check_t(t)
    return s.alpha_bar[t] * x0_bit + (1.0 - s.alpha_bar[t]) * s.p_prior


def jump_success_probs(x0: np.ndarray, t: int, s: NoiseSchedule) -> np.ndarray:
    """Vectorized jump_success_prob over a whole roll."""
    s.check_t(t)
    return s.alpha_bar[t] * x0 + (1.0 - s.alpha_bar[t]) * s.p_prior


def forward_jump(x0: PianoRoll, t: int, s: NoiseSchedule, rng) -> PianoRoll:
    """Draw x_t directly from x_0; no intermediate steps are materialized."""
    rng = as_rng(rng)
    p = jump_success_probs(x0.bits.astype(np.float64), t, s)
    return x0.with_bits(rng.random(p.shape) < p)


# ---------------------------------------------------------------------------
# conditioning


@dataclass(frozen=True)
class ConditionSpec:
    """Cells to re-impose after every sampler iteration, with their values."""

    mask: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        mask = np.ascontiguousarray(self.mask, dtype=bool)
        values = np.ascontiguousarray(self.values, dtype=np.uint8)
        if mask.shape != values.shape:
            raise ValueError(f"mask shape {mask.shape} != values shape {values.shape}")
        if values.size and values.max() > 1:
            raise ValueError("condition values must be binary")
        mask.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "values", values)

    def clamp(self, bits: np.ndarray) -> np.ndarray:
        return np.where(self.mask, self.values, bits)

    @classmethod
    def from_bands(cls, prompt: PianoRoll, rows: list[tuple[int, int]] = (),
                   cols: list[tuple[int, int]] = ()) -> ConditionSpec:
        """Clamp region = union of inclusive row bands and column bands."""
        mask = np.zeros(prompt.bits.shape, dtype=bool)
        for a, b in rows:
            _check_band(a, b, prompt.rows, "rows")
            mask[a : b + 1, :] = True
        for a, b in cols:
            _check_band(a, b, prompt.cols, "cols")
            mask[:, a : b + 1] = True
        return cls(mask, prompt.bits)

    @classmethod
    def from_directives(cls, text: str, prompt: PianoRoll) -> ConditionSpec:
        """Parse repeatable `rows a..b` / `cols a..b` directives (inclusive)."""
        rows, cols = [], []
        for directive in re.split(r"[;,\n]+", text):
            directive = directive.strip()
            if not directive:
                continue
            m = re.fullmatch(r"(rows|cols)\s+(\d+)\s*\.\.\s*(\d+)", directive)
            if m is None:
                raise ValueError(f"bad condition directive {directive!r} (want 'rows a..b' or 'cols a..b')")
            (rows if m.group(1) == "rows" else cols).append((int(m.group(2)), int(m.group(3))))
        if not rows and not cols:
            raise ValueError("condition text contains no directives")
        return cls.from_bands(prompt, rows=rows, cols=cols)


def _check_band(a: int, b: int, limit: int, kind: str) -> None:
    if not (0 <= a <= b < limit):
        raise ValueError(f"{kind} band {a}..{b} out of range 0..{limit - 1}")


# ---------------------------------------------------------------------------
# sampling


class StepRecord(NamedTuple):
    t: int
    delta_count: int
    mask_count: int
    changed_count: int


@dataclass
class SamplerTrace:
    """Per-step counters plus optional state snapshots at requested steps."""

    records: list[StepRecord] = field(default_factory=list)
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)

    def to_lines(self) -> str:
        header = "t,delta_count,mask_count,changed_count\n"
        return header + "".join(f"{r.t},{r.delta_count},{r.mask_count},{r.changed_count}\n"
                                for r in self.records)


Denoiser = Callable[[PianoRoll], PianoRoll]


def _as_denoiser(model) -> tuple[Denoiser, tuple[int, int] | None]:
    if isinstance(model, UNetParams):
        return (lambda roll: predict_binary(model, roll)), (model.config.rows, model.config.cols)
    if callable(model):
        return model, None
    raise TypeError(f"model must be UNetParams or a roll->roll callable, got {type(model)}")


def _reverse_loop(denoise: Denoiser, s: NoiseSchedule, x_ref: PianoRoll, t_start: int,
                  rng: np.random.Generator, condition: ConditionSpec | None,
                  trace_steps, validate: bool) -> tuple[PianoRoll, SamplerTrace]:
    """Shared reverse loop; x_ref is the fixed noise the XOR mask draws from."""
    wanted = set(trace_steps or ())
    trace = SamplerTrace()
    ref = x_ref.bits
    x = ref.copy()
    for t in range(t_start, 0, -1):
        if t in wanted:
            trace.snapshots[t] = x.copy()
        x_hat = denoise(x_ref.with_bits(x)).bits
        delta = ref ^ x_hat
        mask = rng.random(ref.shape) < delta * s.beta[t]
        new = np.where(mask, ref, x_hat)
        if condition is not None:
            new = condition.clamp(new)
        if validate:
            if np.any(mask & ~delta.astype(bool)):
                raise AssertionError(f"mask escaped delta at step {t}")
            ancestry = (new == x_hat) | (new == ref)
            if condition is not None:
                ancestry |= condition.mask
            if not np.all(ancestry):
                raise AssertionError(f"cell not traceable to x_hat or x_T at step {t}")
        trace.records.append(StepRecord(t, int(delta.sum()), int(mask.sum()),
                                        int((new != x).sum())))
        x = new
    return x_ref.with_bits(x), trace


def sample(model, s: NoiseSchedule, rng, trace_steps=None, *,
           shape: tuple[int, int] | None = None, validate: bool = False
           ) -> tuple[PianoRoll, SamplerTrace]:
    """Unconditional generation from pure Bernoulli(p_prior) noise.

    model is UNetParams or a PianoRoll->PianoRoll denoiser (callables need
    an explicit shape). trace_steps requests snapshots of x_t at those
    steps; validate asserts the mask-subset and noise-ancestry invariants
    every iteration.
    """
    rng = as_rng(rng)
    denoise, model_shape = _as_denoiser(model)
    shape = shape or model_shape
    if shape is None:
        raise ValueError("a callable denoiser needs an explicit shape")
    noise = (rng.random(shape) < s.p_prior).astype(np.uint8)
    x_ref = PianoRoll(noise)
    return _reverse_loop(denoise, s, x_ref, s.T, rng, None, trace_steps, validate)


def sample_conditional(model, s: NoiseSchedule, condition: ConditionSpec, rng, *,
                       validate: bool = False) -> PianoRoll:
    """Generation with prompt cells re-imposed on x_T and after every step."""
    rng = as_rng(rng)
    denoise, model_shape = _as_denoiser(model)
    shape = condition.mask.shape
    if model_shape is not None and model_shape != shape:
        raise ValueError(f"condition shape {shape} != model shape {model_shape}")
    noise = (rng.random(shape) < s.p_prior).astype(np.uint8)
    x_ref = PianoRoll(condition.clamp(noise))
    roll, _ = _reverse_loop(denoise, s, x_ref, s.T, rng, condition, None, validate)
    return roll


def sample_variation(model, s: NoiseSchedule, x0: PianoRoll, t_start: int, rng, *,
                     validate: bool = False) -> PianoRoll:
    """Re-noise x0 to step t_start with the jump kernel, then denoise."""
    s.check_t(t_start)
    rng = as_rng(rng)
    denoise, model_shape = _as_denoiser(model)
    if model_shape is not None and model_shape != x0.bits.shape:
        raise ValueError(f"source shape {x0.bits.shape} != model shape {model_shape}")
    x_ref = forward_jump(x0, t_start, s, rng)
    roll, _ = _reverse_loop(denoise, s, x_ref, t_start, rng, None, None, validate)
    return roll
