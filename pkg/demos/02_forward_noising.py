"""Watching the forward corruption eat a piano roll.

The forward process flips bits toward an independent Bernoulli prior:
one small step at a time with rate beta_t, or in a single jump whose
survival probability alpha_bar_t falls linearly from 1 to 0. This demo
noises one roll at several depths, compares the observed bit statistics
with the closed-form mixture, and renders the decay as PGM images.
"""

from pathlib import Path

import numpy as np

import binroll as br

OUT = Path(__file__).parent / "out"
T = 100


def demo_roll(rng: np.random.Generator) -> br.PianoRoll:
    bits = np.zeros((56, 384), dtype=np.uint8)
    t = 0
    while t < 384:
        dur = int(rng.integers(8, 25))
        for pitch in rng.choice(56, size=int(rng.integers(1, 4)), replace=False):
            bits[pitch, t : t + dur] = 1
        t += dur
    return br.PianoRoll(bits)


def main() -> None:
    OUT.mkdir(exist_ok=True)
    rng = br.make_rng(2)
    x0 = demo_roll(rng)
    p_prior = float(x0.bits.mean())
    s = br.make_schedule(T, p_prior)
    print(f"source density {p_prior:.4f}, schedule T={T}")
    print(f"alpha_bar at t=1,25,50,75,100: "
          + ", ".join(f"{s.alpha_bar[t]:.2f}" for t in (1, 25, 50, 75, 100)))

    ones = x0.bits == 1
    print(f"\n{'t':>4} {'survive':>8} {'P(1|was 1)':>11} {'observed':>9} "
          f"{'P(1|was 0)':>11} {'observed':>9}")
    for t in (1, 25, 50, 75, 100):
        noisy = br.forward_jump(x0, t, s, rng)
        keep = float(s.alpha_bar[t])
        p_on = keep + (1 - keep) * p_prior
        p_off = (1 - keep) * p_prior
        obs_on = float(noisy.bits[ones].mean())
        obs_off = float(noisy.bits[~ones].mean())
        print(f"{t:>4} {keep:>8.2f} {p_on:>11.4f} {obs_on:>9.4f} "
              f"{p_off:>11.4f} {obs_off:>9.4f}")
        (OUT / f"noised_t{t:03d}.pgm").write_bytes(br.render_raster(noisy))

    # the same endpoint reached stepwise: statistics match the jump
    roll = x0
    for t in range(1, T + 1):
        roll = br.forward_step(roll, t, s, rng)
    print(f"\nafter {T} single steps: density {float(roll.bits.mean()):.4f} "
          f"(prior {p_prior:.4f}); correlation with source gone: "
          f"{float(roll.bits[ones].mean()):.4f} on vs "
          f"{float(roll.bits[~ones].mean()):.4f} off")
    (OUT / "noised_stepwise.pgm").write_bytes(br.render_raster(roll))
    print(f"rasters written to {OUT}/noised_*.pgm")


if __name__ == "__main__":
    main()
