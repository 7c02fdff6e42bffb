"""Benchmark the reverse-chain kernel: compiled extension vs numpy fallback.

Runs the same packed workload through both backends and reports per-call
times and the speedup.  Usage:

    python3 benchmarks/bench_chain.py [--items N] [--chains B] [--steps S]
"""

import argparse
import time

import numpy as np

from cludi._kernels import _pack_params, _step_constants, backend_name, fallback
from cludi.denoiser import init_denoiser, time_embedding
from cludi.diffusion import build_sqrt_schedule, make_time_grid


def _workload(items: int, chains: int, steps: int):
    rng = np.random.default_rng(0)
    embed, feat, tdim, hidden = 32, 32, 64, (128, 128)
    horizon = 1000
    params = init_denoiser(embed, feat, tdim, hidden, horizon, rng)
    schedule = build_sqrt_schedule(horizon, 1e-4, 1e-5)
    grid = make_time_grid(horizon, steps)
    m = items * chains
    x = np.ascontiguousarray(np.repeat(rng.normal(size=(items, feat)),
                                       chains, axis=0))
    z = np.ascontiguousarray(5.0 * rng.standard_normal((m, embed)))
    noise = np.ascontiguousarray(
        rng.standard_normal((grid.size - 1, m, embed))
    )
    temb = np.ascontiguousarray(time_embedding(grid[:-1], tdim, horizon))
    const = _step_constants(grid, schedule, 5.0, False)
    packed = _pack_params(params)
    return packed, x, temb, const, z, noise


def _time(fn, packed, x, temb, const, z, noise, repeats: int):
    best = float("inf")
    out = None
    for _ in range(repeats):
        z_run = z.copy()
        start = time.perf_counter()
        out = fn(*packed, x, temb, const, z_run, noise)
        best = min(best, time.perf_counter() - start)
    return best, out


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--items", type=int, default=200)
    ap.add_argument("--chains", type=int, default=8)
    ap.add_argument("--steps", type=int, default=25)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    packed, x, temb, const, z, noise = _workload(args.items, args.chains,
                                                 args.steps)
    rows = x.shape[0]
    jumps = const.shape[0]
    print(f"workload: {rows} chains x {jumps} jumps "
          f"(hidden 128x128, embed 32, features 32)")
    print(f"active backend: {backend_name()}")

    t_np, out_np = _time(fallback.chain_batch, packed, x, temb, const, z,
                         noise, args.repeats)
    print(f"numpy fallback : {t_np * 1e3:9.2f} ms/call")

    try:
        from cludi._kernels import _chain
    except ImportError:
        print("compiled kernel: not built (pip install -e . to build)")
        return 0
    t_cy, out_cy = _time(_chain.chain_batch, packed, x, temb, const, z,
                         noise, args.repeats)
    print(f"compiled kernel: {t_cy * 1e3:9.2f} ms/call")
    print(f"speedup        : {t_np / t_cy:9.2f}x")
    err = float(np.max(np.abs(out_np - out_cy)))
    print(f"max |diff|     : {err:9.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
