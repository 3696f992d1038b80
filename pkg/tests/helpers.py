"""Shared builders and numeric helpers for the test suite."""

from __future__ import annotations

import numpy as np

import binroll as br


def music_like_segment(rng: np.random.Generator, rows: int = 56, cols: int = 384) -> br.PianoRoll:
    """Random chord progression on a tick grid; ones ratio around 4%."""
    bits = np.zeros((rows, cols), dtype=np.uint8)
    t = 0
    while t < cols:
        dur = int(rng.integers(6, 25))
        width = int(rng.integers(1, 5))
        pitches = rng.choice(rows, size=width, replace=False)
        if rng.random() > 0.15:  # occasional rest column
            bits[pitches, t : t + dur] = 1
        t += dur
    return br.PianoRoll(bits)


def overfit_segments(n: int = 4) -> list[br.PianoRoll]:
    rng = br.make_rng(20260825)
    return [music_like_segment(rng) for _ in range(n)]


def zero_params(config) -> br.UNetParams:
    """All-zero weights and biases: every sigmoid output is exactly 0.5."""
    from binroll import unet

    params = br.UNetParams(config)
    for name, c_in, c_out in unet.conv_layout(config):
        params.tensors[f"{name}.weight"] = br.Tensor(
            np.zeros((c_out, c_in, 3, 3), dtype=np.float32))
        params.tensors[f"{name}.bias"] = br.Tensor(np.zeros(c_out, dtype=np.float32))
    return params


def fd_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of the scalar f() with respect to x.

    x is perturbed in place, so f must read the same array object.
    """
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = f()
        flat[i] = orig - h
        lo = f()
        flat[i] = orig
        gf[i] = (hi - lo) / (2.0 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), floor)))
