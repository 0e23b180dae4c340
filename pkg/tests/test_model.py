import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dosefind.model import (
    EstimateVector,
    NoDataError,
    ToxScenario,
    TrialState,
    fhat,
    monotonize,
    mtd_index,
)


def state_from_counts(n, tox, current=1):
    history = []
    for u, (cnt, t) in enumerate(zip(n, tox), start=1):
        history += [(u, 1)] * t + [(u, 0)] * (cnt - t)
    return TrialState(m=len(n), n=tuple(n), tox=tuple(tox), current=current, history=tuple(history))


class TestToxScenario:
    def test_valid(self):
        sc = ToxScenario(f=(0.1, 0.2, 0.3), p=0.25)
        assert sc.m == 3

    def test_rejects_non_increasing(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            ToxScenario(f=(0.3, 0.3, 0.5), p=0.25)

    def test_rejects_boundary_rates(self):
        with pytest.raises(ValueError):
            ToxScenario(f=(0.0, 0.5), p=0.3)
        with pytest.raises(ValueError):
            ToxScenario(f=(0.5, 1.0), p=0.3)

    def test_rejects_single_level(self):
        with pytest.raises(ValueError):
            ToxScenario(f=(0.3,), p=0.3)


class TestTrialState:
    def test_history_reconstruction(self):
        hist = [(1, 0), (1, 1), (2, 0), (2, 1), (2, 1)]
        st_ = TrialState.from_history(3, hist)
        assert st_.n == (2, 3, 0)
        assert st_.tox == (1, 2, 0)
        assert st_.current == 2

    def test_rejects_tox_above_n(self):
        with pytest.raises(ValueError):
            TrialState(m=2, n=(1, 0), tox=(2, 0), current=1, history=((1, 1),))

    def test_rejects_count_history_mismatch(self):
        with pytest.raises(ValueError):
            TrialState(m=2, n=(2, 0), tox=(0, 0), current=1, history=((1, 0),))

    def test_with_outcomes(self):
        st_ = TrialState.empty(3, start=2).with_outcomes(2, [1, 0, 0])
        assert st_.n == (0, 3, 0)
        assert st_.tox == (0, 1, 0)
        assert st_.history == ((2, 1), (2, 0), (2, 0))


class TestFhat:
    def test_simple_ratio(self):
        est = fhat(state_from_counts((2, 0, 0), (1, 0, 0)))
        assert est.values[0] == 0.5
        assert np.isnan(est.values[1]) and np.isnan(est.values[2])

    def test_empty_history_all_undefined(self):
        est = fhat(TrialState.empty(3))
        assert np.isnan(est.values).all()

    def test_boundary_ratios(self):
        est = fhat(state_from_counts((3, 4), (0, 4)))
        assert est.values[0] == 0.0
        assert est.values[1] == 1.0

    @given(st.lists(st.tuples(st.integers(1, 4), st.integers(0, 1)), min_size=1, max_size=60))
    def test_reconstruction_consistency(self, history):
        st_ = TrialState.from_history(4, history)
        est = fhat(st_)
        n = [0] * 4
        tox = [0] * 4
        for dose, y in history:
            n[dose - 1] += 1
            tox[dose - 1] += y
        for u in range(4):
            if n[u] == 0:
                assert np.isnan(est.values[u])
            else:
                assert est.values[u] == tox[u] / n[u]
            assert est.weights[u] == n[u]


def brute_force_isotonic(values, weights):
    """Exact minimizer by enumerating contiguous-block partitions."""
    k = len(values)
    best, best_sse = None, np.inf
    for cuts in itertools.product([0, 1], repeat=k - 1):
        bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [k]
        fitted = np.empty(k)
        for a, b in zip(bounds[:-1], bounds[1:]):
            w = sum(weights[a:b])
            fitted[a:b] = sum(v * wt for v, wt in zip(values[a:b], weights[a:b])) / w
        if all(fitted[i] <= fitted[i + 1] + 1e-12 for i in range(k - 1)):
            sse = sum(w * (v - fv) ** 2 for v, w, fv in zip(values, weights, fitted))
            if sse < best_sse:
                best, best_sse = fitted, sse
    return best


class TestMonotonize:
    def test_weighted_pool(self):
        est = EstimateVector(values=[0.5, 0.2], weights=[2, 5])
        out = monotonize(est)
        assert out.values == pytest.approx([2 / 7, 2 / 7], abs=1e-12)
        assert np.allclose(out.values, brute_force_isotonic([0.5, 0.2], [2, 5]))

    def test_already_monotone_unchanged(self):
        est = EstimateVector(values=[0.1, 0.3, 0.6], weights=[3, 1, 7])
        assert monotonize(est).values == pytest.approx([0.1, 0.3, 0.6])

    def test_pooling_across_gap(self):
        est = EstimateVector(values=[0.4, np.nan, 0.2], weights=[5, 0, 5])
        out = monotonize(est)
        assert out.values[0] == pytest.approx(0.3)
        assert np.isnan(out.values[1])
        assert out.values[2] == pytest.approx(0.3)
        assert np.allclose([out.values[0], out.values[2]], brute_force_isotonic([0.4, 0.2], [5, 5]))

    def test_all_undefined_raises(self):
        with pytest.raises(NoDataError):
            monotonize(EstimateVector(values=[np.nan, np.nan], weights=[0, 0]))

    @given(
        st.lists(st.integers(0, 1000), min_size=1, max_size=4),
        st.data(),
    )
    @settings(max_examples=200)
    def test_matches_brute_force(self, grid_values, data):
        values = [v / 1000 for v in grid_values]
        weights = [data.draw(st.integers(1, 9)) for _ in values]
        est = EstimateVector(values=values, weights=weights)
        out = monotonize(est)
        expected = brute_force_isotonic(values, weights)
        assert np.allclose(out.values, expected, atol=1e-9)

    @given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=8), st.data())
    @settings(max_examples=200)
    def test_idempotent_monotone_mean_preserving(self, values, data):
        weights = [data.draw(st.integers(1, 20)) for _ in values]
        est = EstimateVector(values=values, weights=weights)
        out = monotonize(est)
        assert (np.diff(out.values) >= -1e-12).all()
        again = monotonize(out)
        assert np.allclose(out.values, again.values, atol=1e-12)
        w = np.asarray(weights, dtype=float)
        assert np.dot(out.values, w) == pytest.approx(np.dot(values, w), rel=1e-9, abs=1e-9)


class TestMtdIndex:
    def test_tie_broken_low(self):
        assert mtd_index(ToxScenario(f=(0.05, 0.1, 0.2, 0.4, 0.8), p=0.3)) == 3

    def test_exact_hit(self):
        assert mtd_index(ToxScenario(f=(0.05, 0.1, 0.3, 0.5, 0.7), p=0.3)) == 3

    def test_boundary_minimum(self):
        assert mtd_index(ToxScenario(f=(0.5, 0.6), p=0.3)) == 1

    def test_against_scan_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            m = int(rng.integers(2, 9))
            f = tuple(np.sort(rng.uniform(0.01, 0.99, size=m)))
            if len(set(f)) != m:
                continue
            p = float(rng.uniform(0.05, 0.95))
            sc = ToxScenario(f=f, p=p)
            dists = [abs(v - p) for v in f]
            expected = dists.index(min(dists)) + 1
            assert mtd_index(sc) == expected
