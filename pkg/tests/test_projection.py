"""Simplex projection against independent convex-QP oracles.

Three oracles of increasing independence back the projection:

* exhaustive active-set search — for small dimensions, solve the
  equality-constrained QP on every nonempty support set and keep the
  KKT-feasible minimizer (true brute force over the combinatorics);
* bisection on the KKT shift — the scalar dual of the QP is found by
  interval halving, no sorting involved;
* SLSQP — an off-the-shelf constrained QP solve.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from mueflow.equilibrium import project_simplex


def qp_bisection_oracle(v: np.ndarray, total: float) -> np.ndarray:
    """Projection via bisection on the KKT shift theta.

    x(theta) = max(v - theta, 0) spends a continuous, nonincreasing
    budget in theta; halving the bracket to fixed point solves the QP
    without assuming anything about active-set structure.
    """
    lo = float(v.min()) - total / v.size - 1.0  # overspends the budget
    hi = float(v.max())  # spends zero
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.maximum(v - mid, 0.0).sum() >= total:
            lo = mid
        else:
            hi = mid
    return np.maximum(v - 0.5 * (lo + hi), 0.0)


def qp_active_set_oracle(v: np.ndarray, total: float) -> np.ndarray:
    """Exhaustive support enumeration; exponential, for small dims only.

    On support S the equality-constrained minimizer is
    x_S = v_S + (total - sum v_S)/|S|; it solves the QP iff it is
    nonnegative on S and the shift clears every off-support coordinate.
    """
    n = v.size
    best, best_val = None, np.inf
    for size in range(1, n + 1):
        for support in itertools.combinations(range(n), size):
            idx = list(support)
            shift = (v[idx].sum() - total) / size
            x = np.zeros(n)
            x[idx] = v[idx] - shift
            if (x[idx] < -1e-12).any():
                continue
            off = np.setdiff1d(np.arange(n), idx)
            if off.size and (v[off] - shift > 1e-12).any():
                continue  # KKT: excluded coordinates must not want in
            val = float(((x - v) ** 2).sum())
            if val < best_val:
                best, best_val = x, val
    return best


def qp_slsqp_oracle(v: np.ndarray, total: float) -> np.ndarray:
    # Positive homogeneity: solve a unit-scale copy, then scale back.
    scale = max(1.0, float(np.abs(v).max()), total)
    w, budget = v / scale, total / scale
    res = minimize(
        lambda x: 0.5 * float(((x - w) ** 2).sum()),
        x0=np.full(w.size, budget / w.size),
        jac=lambda x: x - w,
        bounds=[(0.0, None)] * w.size,
        constraints=[{"type": "eq", "fun": lambda x: x.sum() - budget}],
        method="SLSQP",
        options={"ftol": 1e-14, "maxiter": 500},
    )
    assert res.success, res.message
    return res.x * scale


def random_instances(count: int, dim_range=(2, 20), seed: int = 20260819):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(dim_range[0], dim_range[1] + 1))
        total = float(rng.uniform(0.1, 1000.0))
        scale = float(10.0 ** rng.uniform(-2.0, 3.0))
        v = rng.normal(0.0, scale, size=n) + rng.uniform(-scale, scale)
        yield v, total


class TestAgainstOracles:
    def test_thousand_random_vectors_match_bisection_oracle(self):
        for v, total in random_instances(1000):
            got = project_simplex(v, total)
            want = qp_bisection_oracle(v, total)
            np.testing.assert_allclose(got, want, atol=1e-8, rtol=0.0)

    def test_small_dims_match_exhaustive_active_set_oracle(self):
        for v, total in random_instances(200, dim_range=(2, 6), seed=7):
            got = project_simplex(v, total)
            want = qp_active_set_oracle(v, total)
            np.testing.assert_allclose(got, want, atol=1e-8, rtol=0.0)

    def test_spot_check_against_slsqp(self):
        for v, total in random_instances(60, seed=11):
            got = project_simplex(v, total)
            want = qp_slsqp_oracle(v, total)
            scale = max(1.0, float(np.abs(v).max()), total)
            np.testing.assert_allclose(got, want, atol=5e-7 * scale, rtol=0.0)


class TestKnownValues:
    def test_interior_point_is_shifted(self):
        # all coordinates stay active: uniform shift by mean excess
        got = project_simplex(np.array([0.4, 0.6]), 1.0)
        np.testing.assert_allclose(got, [0.4, 0.6], atol=1e-15)
        got = project_simplex(np.array([1.0, 2.0]), 1.0)
        np.testing.assert_allclose(got, [0.0, 1.0], atol=1e-15)

    def test_negative_entries_clip_to_zero(self):
        got = project_simplex(np.array([-5.0, 0.5, 0.7]), 1.0)
        np.testing.assert_allclose(got, [0.0, 0.4, 0.6], atol=1e-12)

    def test_zero_total_returns_origin(self):
        got = project_simplex(np.array([3.0, -1.0]), 0.0)
        np.testing.assert_allclose(got, [0.0, 0.0])


class TestContract:
    def test_rejects_empty_and_multidim(self):
        with pytest.raises(ValueError):
            project_simplex(np.array([]), 1.0)
        with pytest.raises(ValueError):
            project_simplex(np.zeros((2, 2)), 1.0)

    def test_rejects_negative_total(self):
        with pytest.raises(ValueError):
            project_simplex(np.array([1.0]), -0.5)


vectors = st.lists(
    st.floats(min_value=-1e4, max_value=1e4, allow_nan=False),
    min_size=1, max_size=24,
).map(np.array)
totals = st.floats(min_value=1e-3, max_value=1e4, allow_nan=False)


class TestProperties:
    @given(vectors, totals)
    def test_feasibility(self, v, total):
        x = project_simplex(v, total)
        assert (x >= 0.0).all()
        # each kept coordinate is v_i - theta, so conservation holds to
        # n rounding errors at the magnitude of v, not of the total
        slack = 8.0 * v.size * np.finfo(float).eps \
            * max(1.0, float(np.abs(v).max()), total)
        assert x.sum() == pytest.approx(total, abs=slack)

    @given(vectors, totals)
    def test_idempotent(self, v, total):
        x = project_simplex(v, total)
        again = project_simplex(x, total)
        np.testing.assert_allclose(again, x, atol=1e-9 * max(1.0, total))

    @given(vectors, totals)
    def test_order_preserving(self, v, total):
        x = project_simplex(v, total)
        order = np.argsort(v, kind="stable")
        assert (np.diff(x[order]) >= -1e-12 * max(1.0, total)).all()

    @given(vectors, totals, st.floats(min_value=-1e4, max_value=1e4))
    def test_shift_invariant(self, v, total, shift):
        base = project_simplex(v, total)
        moved = project_simplex(v + shift, total)
        np.testing.assert_allclose(moved, base, atol=1e-8 * max(1.0, total))
