"""What does a convolution filter want to see?

Gradient ascent on the mean activation of a chosen filter, starting
from a binary noise roll. First on a hand-built filter whose preferred
input is known (a plus-shaped blur responds to everything bright), then
on a randomly initialized network where the climb discovers the
filter's preferred stripe texture on its own. The optimized inputs are
rendered to demos/out/.
"""

from pathlib import Path

import numpy as np

import binroll as br
from binroll import unet

OUT = Path(__file__).parent / "out"


def plus_probe(config: br.UNetConfig) -> br.UNetParams:
    params = br.UNetParams(config)
    for name, c_in, c_out in unet.conv_layout(config):
        params.tensors[f"{name}.weight"] = br.Tensor(
            np.zeros((c_out, c_in, 3, 3), dtype=np.float32))
        params.tensors[f"{name}.bias"] = br.Tensor(np.zeros(c_out, dtype=np.float32))
    params["down.0.0.weight"].data[0, 0] = np.array(
        [[0.0, 0.5, 0.0], [0.5, 1.0, 0.5], [0.0, 0.5, 0.0]], dtype=np.float32)
    return params


def main() -> None:
    OUT.mkdir(exist_ok=True)
    config = br.UNetConfig(rows=8, cols=16, levels=1, base_channels=2,
                           convs_per_level=1)

    print("hand-built plus filter: the objective is linear, so the climb is steady")
    result = br.activation_maximization(
        plus_probe(config),
        br.AMConfig(layer="down.0.0", filter_index=0, iterations=60,
                    step_size=0.2, seed=5, p_prior=0.25,
                    snapshot_iters=(0, 30)))
    series = result.activations
    print(f"  activation {series[0]:.3f} -> {series[-1]:.3f} over "
          f"{len(series) - 1} iterations "
          f"(every step upward: {all(b >= a for a, b in zip(series, series[1:]))})")

    print("\nrandomly initialized network, second encoder convolution")
    print("(raw-gradient ascent; deeper stacks have smaller gradients and need"
          " proportionally larger steps)")
    config = br.UNetConfig(rows=8, cols=16, base_channels=4)
    params = br.init_params(config, 8)
    layer = "down.0.1"
    for index in (0, 1):
        cfg = br.AMConfig(layer=layer, filter_index=index, iterations=200,
                          step_size=2.0, seed=5)
        result = br.activation_maximization(params, cfg)
        series = result.activations
        ups = float(np.mean(np.diff(series) >= 0))
        print(f"  {layer} filter {index}: activation {series[0]:+.4f} -> "
              f"{series[-1]:+.4f}, {ups:.0%} of steps upward")
        raster = br.render_raster(result.final_input)
        (OUT / f"ascent_{layer.replace('.', '-')}_{index:03d}.pgm").write_bytes(raster)
    print(f"optimized inputs rendered to {OUT}/ascent_*.pgm")


if __name__ == "__main__":
    main()
