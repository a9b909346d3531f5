import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cudbound.bootstrap import (
    Multiplicities,
    deviation,
    draw_multiplicities,
    off_support,
    replicate_multiplicities,
)
from cudbound.model import empirical_error


class TestMultiplicities:
    @pytest.mark.parametrize("phi", [[1, 2], [2, 0, 0], [0.5, 1.5], [-1, 3]])
    def test_invalid(self, phi):
        with pytest.raises(ValueError):
            Multiplicities(phi)

    def test_valid(self):
        assert Multiplicities([3, 0, 0]).n == 3


class TestDraw:
    def test_n_one(self):
        for s in range(5):
            np.testing.assert_array_equal(draw_multiplicities(1, s).phi, [1])

    def test_deterministic(self):
        np.testing.assert_array_equal(draw_multiplicities(20, 4).phi, draw_multiplicities(20, 4).phi)

    def test_replicates_distinct(self):
        reps = replicate_multiplicities(15, 3, 0)
        assert not np.array_equal(reps[0].phi, reps[1].phi)

    def test_moments(self):
        first = np.array([draw_multiplicities(30, s).phi[0] for s in range(10_000)])
        # phi_1 ~ Binomial(30, 1/30)
        var = 30 * (1 / 30) * (29 / 30)
        assert abs(first.mean() - 1.0) <= 5 * np.sqrt(var / 10_000)
        p0 = (29 / 30) ** 30
        assert p0 == pytest.approx(0.3617, abs=1e-4)
        assert abs(np.mean(first == 0) - p0) <= 5 * np.sqrt(p0 * (1 - p0) / 10_000)

    def test_bad_n(self):
        with pytest.raises(ValueError):
            draw_multiplicities(0, 1)


class TestOffSupport:
    def test_none(self):
        assert off_support(Multiplicities([1, 1, 1])).d == 0

    def test_example(self):
        o = off_support(Multiplicities([2, 0, 1]))
        np.testing.assert_array_equal(o.indices, [0, 1])
        np.testing.assert_array_equal(o.net, [1, -1])

    def test_conservation(self):
        o = off_support(Multiplicities([3, 0, 0]))
        np.testing.assert_array_equal(o.net, [2, -1, -1])
        assert o.net.sum() == 0

    def test_coincident_features_grouped(self):
        X = np.array([[0.0], [1.0], [0.0], [2.0]])
        o = off_support(Multiplicities([2, 2, 0, 0]), X)
        assert o.d == 3
        assert sorted(len(gp) for gp in o.groups) == [1, 1, 2]

    @given(seed=st.integers(0, 10_000), n=st.integers(1, 40))
    def test_invariants(self, seed, n):
        m = draw_multiplicities(n, seed)
        o = off_support(m)
        assert o.net.sum() == 0
        assert np.all(m.phi[o.indices] != 1)


class TestDeviation:
    def test_all_ones(self):
        assert deviation(Multiplicities([1, 1, 1, 1]), [1, 0, 1, 1]) == 0.0

    def test_examples(self):
        assert deviation(Multiplicities([2, 0, 1]), [1, 1, 0]) == 0.0
        assert deviation(Multiplicities([3, 0, 0]), [1, 0, 1]) == pytest.approx(1 / 3)

    def test_shape_check(self):
        with pytest.raises(ValueError):
            deviation(Multiplicities([1, 1]), [1, 0, 0])

    @given(seed=st.integers(0, 2**31), n=st.integers(2, 25))
    def test_matches_resampled_errors(self, seed, n):
        r = np.random.default_rng(seed)
        X = np.column_stack([np.ones(n), r.normal(size=(n, 2))])
        y = np.where(r.random(n) < 0.5, 1, -1)
        beta = r.normal(size=3)
        m = draw_multiplicities(n, seed)
        idx = np.repeat(np.arange(n), m.phi)
        z = (np.where(X @ beta >= 0, 1, -1) != y).astype(int)
        direct = abs(empirical_error(X[idx], y[idx], beta) - empirical_error(X, y, beta))
        assert deviation(m, z) == pytest.approx(direct, abs=1e-12)
        assert deviation(m, z) <= np.abs(m.phi - 1).sum() / n + 1e-15
