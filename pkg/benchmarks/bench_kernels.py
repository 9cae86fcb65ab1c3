"""Benchmark the numba kernels against their pure-numpy fallbacks.

Covers the two hot kernels (one-to-all Dijkstra, blockwise simplex
projection) in-process, then times one full primal-dual solve per
backend in subprocesses (the backend is chosen at import time via the
``MUE_PURE_NUMPY`` env var, so a fresh interpreter is needed).

Run:  python benchmarks/bench_kernels.py [--repeats N] [--skip-e2e]
"""

from __future__ import annotations

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from mueflow import _kernels, fixtures, split_demand
from mueflow.equilibrium import _Problem, SolverOptions


def _time(fn, repeats: int) -> float:
    best = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best.append(time.perf_counter() - t0)
    return statistics.median(best)


def bench_dijkstra(repeats: int):
    net, od = fixtures.grid10x10()
    cfg = fixtures.grid10x10_config()
    prob = _Problem(net, split_demand(od, 0.5), cfg, SolverOptions())
    cost = prob.times(np.zeros(prob.n_links))
    sources = prob.origin_nodes

    def run(kernel):
        for s in sources:
            kernel(prob.indptr, prob.heads, prob.slots, cost, s)

    rows = []
    if _kernels.dijkstra_numba is not None:
        run(_kernels.dijkstra_numba)  # compile before timing
        rows.append(("dijkstra[numba]",
                     _time(lambda: run(_kernels.dijkstra_numba), repeats)))
    rows.append(("dijkstra[numpy]",
                 _time(lambda: run(_kernels.dijkstra_python), repeats)))
    return rows


def bench_projection(repeats: int):
    rng = np.random.default_rng(3)
    sizes = rng.integers(2, 40, size=200)
    offsets = np.zeros(sizes.size + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(sizes)
    values = rng.normal(0.0, 50.0, size=int(offsets[-1]))
    totals = rng.uniform(0.5, 400.0, size=sizes.size)

    rows = []
    if _kernels.project_blocks_numba is not None:
        _kernels.project_blocks_numba(values, offsets, totals)  # compile
        rows.append(("project_blocks[numba]", _time(
            lambda: _kernels.project_blocks_numba(values, offsets, totals),
            repeats,
        )))
    rows.append(("project_blocks[numpy]", _time(
        lambda: _kernels.project_blocks_python(values, offsets, totals),
        repeats,
    )))
    return rows


_E2E_SNIPPET = """
import time
from mueflow import fixtures, split_demand, solve
net, od = fixtures.grid10x10()
cfg = fixtures.grid10x10_config()
dem = split_demand(od, 0.5)
solve(net, dem, cfg, "pd")  # warm up JIT / caches
t0 = time.perf_counter()
sol = solve(net, dem, cfg, "pd")
print(time.perf_counter() - t0, sol.converged)
"""


def bench_end_to_end():
    rows = []
    for label, pure in (("solve pd[numba]", "0"), ("solve pd[numpy]", "1")):
        env = dict(os.environ, MUE_PURE_NUMPY=pure)
        out = subprocess.run(
            [sys.executable, "-c", _E2E_SNIPPET], env=env,
            capture_output=True, text=True, check=True,
        ).stdout.split()
        rows.append((label, float(out[0])))
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--skip-e2e", action="store_true",
                        help="skip the subprocess end-to-end solves")
    args = parser.parse_args(argv)

    rows = bench_dijkstra(args.repeats) + bench_projection(args.repeats)
    if not args.skip_e2e:
        rows += bench_end_to_end()
    width = max(len(name) for name, _ in rows)
    for name, seconds in rows:
        print(f"{name:<{width}}  {seconds * 1e3:10.3f} ms")
    if _kernels.dijkstra_numba is None:
        print("note: numba unavailable or disabled; numpy rows only")
    return 0


if __name__ == "__main__":
    sys.exit(main())
