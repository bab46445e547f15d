#!/usr/bin/env python3
"""Throughput comparison of the compiled and pure execution backends.

Times the unit-simplex projection and full solver runs on generated games,
confirms the two backends agree bit for bit on the work they just did, and
prints a speedup table.  Usage:

    python benchmarks/backend_bench.py [--dims 50,200,500] [--iters 20000]
"""

import argparse
import time

import numpy as np

import vibench as vb


def time_projection(backend: str, dim: int, repeats: int) -> float:
    rng = np.random.default_rng(0)
    vecs = [rng.standard_normal(dim) for _ in range(64)]
    out = [vb.project_simplex(v, backend=backend) for v in vecs]  # warm up
    t0 = time.perf_counter()
    for r in range(repeats):
        vb.project_simplex(vecs[r % 64], backend=backend)
    elapsed = time.perf_counter() - t0
    del out
    return repeats / elapsed


def time_solver(backend: str, game, iters: int, batch: int):
    lip = game.lipschitz
    params = vb.tune_params(lip.l_full, lip.l_bar, batch,
                            num_components=game.num_components,
                            oracle_optimal=True, constant_mode="empirical",
                            max_iters=iters, seed=1)
    t0 = time.perf_counter()
    trace = vb.run_ommb(game.problem(), params, cadence=max(iters // 10, 1),
                        backend=backend)
    elapsed = time.perf_counter() - t0
    return iters / elapsed, trace


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", default="50,200", help="comma-separated dims")
    ap.add_argument("--iters", type=int, default=20_000,
                    help="solver iterations per timed run")
    ap.add_argument("--proj-repeats", type=int, default=20_000)
    args = ap.parse_args()

    backends = vb.available_backends()
    print(f"available backends: {', '.join(backends)}")
    if "compiled" not in backends:
        print("compiled extension not built; timing the pure backend only")

    dims = [int(d) for d in args.dims.split(",")]
    print(f"\n{'kernel':<24} {'dim':>5} " +
          " ".join(f"{b + ' (rate)':>18}" for b in backends) +
          ("   speedup" if len(backends) > 1 else ""))
    for dim in dims:
        rates = {b: time_projection(b, dim, args.proj_repeats) for b in backends}
        line = f"{'simplex projection':<24} {dim:>5} " + " ".join(
            f"{rates[b]:>13.0f}/s    " for b in backends)
        if len(backends) > 1:
            line += f" {rates['compiled'] / rates['pure']:>8.1f}x"
        print(line)

    for dim in dims:
        game = vb.make_game(vb.GeneratorSpec("policeman_burglar", dim=dim, seed=0))
        for batch in (1, 8):
            rates = {}
            traces = {}
            for b in backends:
                rates[b], traces[b] = time_solver(b, game, args.iters, batch)
            if len(backends) > 1:
                same = all(np.array_equal(traces["compiled"].x_avg,
                                          traces["pure"].x_avg)
                           for _ in [0])
                agree = "bit-identical" if same else "MISMATCH!"
            else:
                agree = ""
            line = (f"{'ommb steps (b=%d)' % batch:<24} {dim:>5} " +
                    " ".join(f"{rates[b]:>13.0f}/s    " for b in backends))
            if len(backends) > 1:
                line += f" {rates['compiled'] / rates['pure']:>8.1f}x  {agree}"
            print(line)


if __name__ == "__main__":
    main()
