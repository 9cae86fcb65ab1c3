"""Shortest-path kernels shared by the assignment solvers.

The hot loop of every solver is one-to-all Dijkstra over the network's
CSR adjacency, run once per (vehicle class, origin) per iteration.  Two
interchangeable implementations are provided:

* a numba ``@njit`` kernel (compiled once, cached on disk, ``nogil`` so
  batched runs can use real threads), and
* a pure Python/numpy fallback built on :mod:`heapq`.

Both walk the CSR arrays in the same order and break heap ties on
(distance, node index), so they produce bitwise-identical distance and
predecessor arrays.  Selection is automatic: the numba kernel is used
when numba imports cleanly and the environment variable
``MUE_PURE_NUMPY`` is unset/0; setting ``MUE_PURE_NUMPY=1`` forces the
fallback.  ``MUE_THREADS`` caps the worker count used for batched runs
(0 or unset means one worker per CPU).
"""

from __future__ import annotations

import heapq
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

__all__ = [
    "NUMBA_ENABLED",
    "dijkstra",
    "dijkstra_numba",
    "dijkstra_python",
    "batch_dijkstra",
    "project_blocks",
    "project_blocks_numba",
    "project_blocks_python",
    "resolve_workers",
]


def _pure_numpy_requested() -> bool:
    raw = os.environ.get("MUE_PURE_NUMPY", "0").strip()
    return raw not in ("", "0", "false", "False")


def dijkstra_python(indptr, heads, links, cost, source):
    """One-to-all Dijkstra, pure Python/numpy reference implementation.

    Parameters
    ----------
    indptr : int64[n_nodes + 1]
        CSR row pointers: outgoing arc slots of node ``u`` are
        ``indptr[u]:indptr[u + 1]``.
    heads : int64[n_arcs]
        Head node of each arc slot.
    links : int64[n_arcs]
        Link index of each arc slot (indexes into ``cost``).
    cost : float64[n_links]
        Nonnegative cost per link.
    source : int
        Origin node index.

    Returns
    -------
    dist : float64[n_nodes]
        Cost of the cheapest path from ``source`` (inf if unreachable).
    pred : int64[n_nodes]
        Arc slot used to reach each node, -1 for source/unreached.
    """
    n = indptr.shape[0] - 1
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    dist[source] = 0.0
    heap = [(0.0, int(source))]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for pos in range(indptr[u], indptr[u + 1]):
            v = heads[pos]
            nd = d + cost[links[pos]]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = pos
                heapq.heappush(heap, (nd, int(v)))
    return dist, pred


def project_blocks_python(values, offsets, totals):
    """Blockwise Euclidean projection onto {x >= 0, sum x = total}.

    Block ``b`` is ``values[offsets[b]:offsets[b + 1]]`` with budget
    ``totals[b]``; blocks whose budget is zero project to zero.  Each
    block uses the sort-and-threshold rule: sorted descending, the
    active set is a prefix, and one cumulative-sum pass finds the shift
    that lands the prefix on the budget.  Pure numpy reference
    implementation.
    """
    out = np.zeros_like(values)
    for b in range(offsets.shape[0] - 1):
        lo, hi = int(offsets[b]), int(offsets[b + 1])
        total = totals[b]
        if hi <= lo or total <= 0.0:
            continue
        v = values[lo:hi]
        u = np.sort(v)[::-1]
        cumulative = np.cumsum(u) - total
        ranks = np.arange(1, u.shape[0] + 1)
        mask = u - cumulative / ranks > 0.0
        rho = int(ranks[mask][-1])
        theta = cumulative[rho - 1] / rho
        out[lo:hi] = np.maximum(v - theta, 0.0)
    return out


try:  # pragma: no cover - exercised indirectly via the dispatch below
    if _pure_numpy_requested():
        raise ImportError("MUE_PURE_NUMPY set; skipping numba")
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover
    njit = None
    NUMBA_ENABLED = False


if njit is not None:

    @njit(cache=True, nogil=True)
    def _dijkstra_nb(indptr, heads, links, cost, source):  # pragma: no cover
        n = indptr.shape[0] - 1
        m = heads.shape[0]
        dist = np.full(n, np.inf)
        pred = np.full(n, -1, dtype=np.int64)
        done = np.zeros(n, dtype=np.bool_)
        # binary min-heap of (dist, node), ties broken on node index so
        # the pop order matches heapq's tuple comparison exactly
        hk = np.empty(m + 1, dtype=np.float64)
        hn = np.empty(m + 1, dtype=np.int64)
        hk[0] = 0.0
        hn[0] = source
        size = 1
        dist[source] = 0.0
        while size > 0:
            d = hk[0]
            u = hn[0]
            size -= 1
            hk[0] = hk[size]
            hn[0] = hn[size]
            i = 0
            while True:
                left = 2 * i + 1
                if left >= size:
                    break
                best = left
                right = left + 1
                if right < size and (
                    hk[right] < hk[left]
                    or (hk[right] == hk[left] and hn[right] < hn[left])
                ):
                    best = right
                if hk[best] < hk[i] or (hk[best] == hk[i] and hn[best] < hn[i]):
                    hk[i], hk[best] = hk[best], hk[i]
                    hn[i], hn[best] = hn[best], hn[i]
                    i = best
                else:
                    break
            if done[u]:
                continue
            done[u] = True
            for pos in range(indptr[u], indptr[u + 1]):
                v = heads[pos]
                nd = d + cost[links[pos]]
                if nd < dist[v]:
                    dist[v] = nd
                    pred[v] = pos
                    j = size
                    hk[j] = nd
                    hn[j] = v
                    size += 1
                    while j > 0:
                        parent = (j - 1) // 2
                        if hk[j] < hk[parent] or (
                            hk[j] == hk[parent] and hn[j] < hn[parent]
                        ):
                            hk[j], hk[parent] = hk[parent], hk[j]
                            hn[j], hn[parent] = hn[parent], hn[j]
                            j = parent
                        else:
                            break
        return dist, pred

    def dijkstra_numba(indptr, heads, links, cost, source):
        """One-to-all Dijkstra via the compiled numba kernel."""
        return _dijkstra_nb(indptr, heads, links, cost, np.int64(source))

    @njit(cache=True, nogil=True)
    def _project_blocks_nb(values, offsets, totals):  # pragma: no cover
        out = np.zeros_like(values)
        for b in range(offsets.shape[0] - 1):
            lo = offsets[b]
            hi = offsets[b + 1]
            total = totals[b]
            if hi <= lo or total <= 0.0:
                continue
            n = hi - lo
            u = np.sort(values[lo:hi])
            # descending traversal, accumulating in the same order as the
            # reference's cumsum so results match bitwise
            run = 0.0
            theta = 0.0
            for j in range(1, n + 1):
                uj = u[n - j]
                run += uj
                c = run - total
                if uj - c / j > 0.0:
                    theta = c / j
            for k in range(lo, hi):
                val = values[k] - theta
                out[k] = val if val > 0.0 else 0.0
        return out

    def project_blocks_numba(values, offsets, totals):
        """Blockwise simplex projection via the compiled numba kernel."""
        return _project_blocks_nb(values, offsets, totals)

else:
    dijkstra_numba = None
    project_blocks_numba = None


if NUMBA_ENABLED and not _pure_numpy_requested():
    dijkstra = dijkstra_numba
    project_blocks = project_blocks_numba
else:
    dijkstra = dijkstra_python
    project_blocks = project_blocks_python


def resolve_workers(n_tasks):
    """Worker count for a batch of ``n_tasks`` independent runs.

    ``MUE_THREADS`` caps the count; 0/unset means one per CPU.  The
    result never exceeds the task count and is at least 1.
    """
    raw = os.environ.get("MUE_THREADS", "0").strip()
    try:
        cap = int(raw) if raw else 0
    except ValueError:
        cap = 0
    if cap <= 0:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def batch_dijkstra(indptr, heads, links, cost, sources, workers=None):
    """Run Dijkstra from every node in ``sources``.

    Returns (dists, preds) stacked in source order.  Worker threads only
    pay off with the nogil numba kernel, but results are identical (and
    bitwise reproducible) for any worker count because each source is
    independent and outputs are collected in submission order.
    """
    sources = list(sources)
    if workers is None:
        workers = resolve_workers(len(sources))
    n = indptr.shape[0] - 1
    dists = np.empty((len(sources), n))
    preds = np.empty((len(sources), n), dtype=np.int64)
    if workers <= 1 or len(sources) <= 1:
        for i, s in enumerate(sources):
            dists[i], preds[i] = dijkstra(indptr, heads, links, cost, s)
        return dists, preds
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = pool.map(
            lambda s: dijkstra(indptr, heads, links, cost, s), sources
        )
        for i, (d, p) in enumerate(results):
            dists[i] = d
            preds[i] = p
    return dists, preds
