import math
from fractions import Fraction
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from cudbound._validation import ParameterError
from cudbound.baselines import (
    CONSTRUCTORS,
    METHODS,
    BaselineConfig,
    BaselineInterval,
    PointEstimate632,
    _Refits,
    all_baselines,
    bayes_interval,
    bc_percentile_interval,
    beta_quantile,
    binomial_inversion,
    cv_normal_interval,
    effective_sample_size,
    estimate_632,
    kohavi_interval,
    langford_interval,
    percentile_interval,
)
from cudbound.dataset import Dataset, SimSpec, generate_simulated

GRID = (0.5, 1.0, 2.0, 5.0, 20.0)
QS = (0.01, 0.025, 0.5, 0.975, 0.99)


def _exact_n_star(n):
    return float(n * (1 - (1 - Fraction(1, n)) ** n))


class TestEffectiveSize:
    def test_one(self):
        assert effective_sample_size(1) == 1.0

    def test_thirty(self):
        value = effective_sample_size(30)
        assert value == pytest.approx(_exact_n_star(30), abs=1e-12)
        assert value == pytest.approx(19.1502, abs=1e-4)
        # commonly quoted as about 19.148; the formula gives 19.1502
        assert abs(value - 19.148) < 5e-3

    def test_limit(self):
        assert effective_sample_size(10**6) / 10**6 == pytest.approx(1 - math.exp(-1), abs=1e-6)

    @given(n=st.integers(1, 400))
    def test_matches_rational(self, n):
        assert effective_sample_size(n) == pytest.approx(_exact_n_star(n), rel=1e-12)


class TestBetaQuantile:
    def test_uniform(self):
        assert beta_quantile(1, 1, 0.5) == pytest.approx(0.5, abs=1e-15)

    def test_closed_form(self):
        assert beta_quantile(2, 1, 0.25) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("a", [1, 2, 5])
    def test_symmetric(self, a):
        assert beta_quantile(a, a, 0.5) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("a", GRID)
    @pytest.mark.parametrize("b", GRID)
    @pytest.mark.parametrize("q", QS)
    def test_round_trip(self, a, b, q):
        assert special.betainc(a, b, beta_quantile(a, b, q)) == pytest.approx(q, abs=1e-8)

    def test_endpoints(self):
        assert beta_quantile(2, 3, 0.0) == 0.0 and beta_quantile(2, 3, 1.0) == 1.0

    def test_invalid(self):
        with pytest.raises(ParameterError):
            beta_quantile(0, 1, 0.5)


class TestPercentile:
    def test_identical(self):
        ci = percentile_interval([0.3] * 50, 0.05)
        assert ci.lower == ci.upper == 0.3

    def test_grid(self):
        ci = percentile_interval(np.linspace(0, 1, 101), 0.1)
        assert ci.lower == pytest.approx(0.05) and ci.upper == pytest.approx(0.95)

    def test_median_center(self):
        assert percentile_interval([0.1, 0.2, 0.9], 0.5).center == pytest.approx(0.2)


def _interp_quantile(sorted_values, p):
    # linear interpolation between order statistics at position (N - 1) p
    h = (len(sorted_values) - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, len(sorted_values) - 1)
    return sorted_values[lo] + (h - lo) * (sorted_values[hi] - sorted_values[lo])


class TestBiasCorrected:
    def test_symmetric_reduces_to_percentile(self):
        e = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
        bc = bc_percentile_interval(e, 0.3, 0.1)
        pc = percentile_interval(e, 0.1)
        assert (bc.lower, bc.upper) == pytest.approx((pc.lower, pc.upper), abs=1e-12)

    def test_fallback(self):
        ci = bc_percentile_interval([0.1, 0.2, 0.15], 0.5, 0.05)
        assert "bc_fallback" in ci.flags

    def test_hand_computed(self):
        e = sorted([0.1] * 10 + [0.2] * 5 + [0.3] * 3 + [0.6] * 2)
        point, delta = 0.25, 0.1
        nd = NormalDist()
        z0 = nd.inv_cdf(15 / 20)
        z = nd.inv_cdf(1 - delta / 2)
        lo = _interp_quantile(e, nd.cdf(2 * z0 - z))
        hi = _interp_quantile(e, nd.cdf(2 * z0 + z))
        ci = bc_percentile_interval(e, point, delta)
        assert ci.lower == pytest.approx(lo, abs=1e-10)
        assert ci.upper == pytest.approx(hi, abs=1e-10)
        assert ci.center == point

    def test_ties_count_half(self):
        # all estimates equal the point: F = 1/2, z0 = 0
        ci = bc_percentile_interval([0.2, 0.2, 0.2, 0.2], 0.2, 0.05)
        assert ci.flags == () and ci.lower == ci.upper == 0.2


class TestKohavi:
    def test_example(self):
        ci = kohavi_interval(0.5, 25, 0.05)
        assert ci.half_width == pytest.approx(1.959964 * 0.1, abs=1e-6)

    def test_floor(self):
        ci = kohavi_interval(0.0, 20, 0.05)
        assert "variance_floor" in ci.flags and ci.half_width == pytest.approx(1 / 40)

    def test_shrinks_with_n(self):
        w30 = kohavi_interval(0.3, effective_sample_size(30), 0.05).diameter
        w50 = kohavi_interval(0.3, effective_sample_size(50), 0.05).diameter
        assert w50 < w30


class TestYang:
    def test_identical_folds(self):
        ci = cv_normal_interval([0.2] * 5, 0.05)
        assert ci.lower == ci.upper == 0.2

    def test_example(self):
        ci = cv_normal_interval([0, 0, 0, 0, 1], 0.05)
        s = math.sqrt(0.2)
        assert ci.center == pytest.approx(0.2)
        assert ci.half_width == pytest.approx(NormalDist().inv_cdf(0.975) * s / math.sqrt(5))
        assert ci.half_width == pytest.approx(0.392, abs=1e-3)

    def test_too_few_folds(self):
        with pytest.raises(ValueError):
            cv_normal_interval([0.1], 0.05)


class TestMartin:
    def test_prior_only(self):
        ci = bayes_interval(0.3, 30, 30, (1, 1), 0.05)
        assert (ci.lower, ci.upper) == pytest.approx((0.025, 0.975), abs=1e-12)

    def test_closed_form(self):
        ci = bayes_interval(0.0, 20, 9, (1, 1), 0.05)
        assert ci.upper == pytest.approx(1 - 0.025 ** (1 / 12), abs=1e-12)
        assert ci.upper == pytest.approx(0.265, abs=1e-3)

    def test_posterior_mean_between(self):
        ci = bayes_interval(0.1, 30, effective_sample_size(30), (1, 1), 0.05)
        assert 0.1 < ci.center < 0.5


class TestLangford:
    def test_k_zero(self):
        lo, hi = binomial_inversion(0, 10, 0.1)
        assert lo == 0.0
        assert hi == pytest.approx(1 - 0.05 ** 0.1, abs=1e-12)
        assert hi == pytest.approx(0.2589, abs=1e-4)

    def test_k_m_mirror(self):
        lo, hi = binomial_inversion(10, 10, 0.1)
        assert hi == 1.0 and lo == pytest.approx(0.05 ** 0.1, abs=1e-12)

    def test_nesting(self):
        for m in range(41):
            for k in range(m + 1):
                wide = binomial_inversion(k, m, 0.01)
                narrow = binomial_inversion(k, m, 0.1)
                assert wide[0] <= narrow[0] + 1e-15 and narrow[1] <= wide[1] + 1e-15
                if m:
                    assert narrow[0] <= k / m <= narrow[1]

    def test_no_pseudo_points(self):
        ci = langford_interval(0.2, 1, effective_sample_size(1), 0.05)
        assert (ci.lower, ci.upper) == (0.0, 1.0) and "no_pseudo_test_points" in ci.flags

    def test_center_clipped(self):
        ci = langford_interval(0.01, 30, effective_sample_size(30), 0.05)
        assert ci.lower <= ci.center <= ci.upper


class Test632:
    def test_combine(self):
        assert PointEstimate632.combine(0.1, 0.2).value == pytest.approx(0.368 * 0.1 + 0.632 * 0.2)
        assert PointEstimate632.combine(1.0, 1.0).value == 1.0

    def test_always_wrong(self):
        # a rule that misclassifies every point scores 1 whatever the resampling
        r = _Refits(np.ones((5, 4), bool), np.random.default_rng(0).random((5, 4)) < 0.6, np.ones(4, bool))
        assert r.estimate_632().value == 1.0

    def test_separable(self, separable):
        assert estimate_632(separable, cfg=BaselineConfig(n_bootstrap=50), seed=0).value == 0.0

    def test_nested_loop_reference(self):
        data = generate_simulated(SimSpec("outlier"), 8, 12)
        X = np.column_stack([np.ones(8), data.features])
        y = data.labels
        beta = np.linalg.lstsq(X, y, rcond=None)[0]
        train = np.mean(np.where(X @ beta >= 0, 1, -1) != y)
        r = np.random.default_rng(2024)
        wrong = np.zeros(8)
        count = np.zeros(8)
        for _ in range(20_000):
            idx = r.integers(0, 8, 8)
            b = np.linalg.lstsq(X[idx], y[idx], rcond=None)[0]
            for i in range(8):
                if i not in idx:
                    count[i] += 1
                    wrong[i] += (1 if X[i] @ b >= 0 else -1) != y[i]
        ref = 0.368 * train + 0.632 * np.mean(wrong / count)
        got = estimate_632(data, cfg=BaselineConfig(n_bootstrap=2000), seed=5)
        assert got.training == pytest.approx(train)
        assert got.value == pytest.approx(ref, abs=0.01)


@pytest.fixture(scope="module")
def data():
    return generate_simulated(SimSpec("donut"), 30, 8)


class TestConstructors:
    @pytest.mark.parametrize("method", METHODS)
    def test_valid_and_deterministic(self, data, method):
        cfg = BaselineConfig(n_bootstrap=60)
        a = CONSTRUCTORS[method](data, "poly:2", cfg, 4)
        b = CONSTRUCTORS[method](data, "poly:2", cfg, 4)
        assert a == b
        assert 0 <= a.lower <= a.center <= a.upper <= 1
        assert a.method == method and a.level == 0.95

    def test_all_baselines_shares_refits(self, data):
        cfg = BaselineConfig(n_bootstrap=60)
        together = all_baselines(data, "poly:2", cfg, 4)
        for m in METHODS:
            assert together[m] == CONSTRUCTORS[m](data, "poly:2", cfg, 4)

    def test_unknown_method(self, data):
        with pytest.raises(ParameterError):
            all_baselines(data, methods=("Z",))

    def test_estimator(self, data):
        est = BaselineInterval("M", basis="poly:2", n_bootstrap=40, seed=1).fit(data.features, data.labels)
        assert est.interval_.method == "M"
        with pytest.raises(ParameterError):
            BaselineInterval("Q").fit(data.features, data.labels)

    def test_yang_needs_folds(self):
        tiny = Dataset(np.arange(4.0)[:, None], [1, -1, 1, -1])
        with pytest.raises(ValueError):
            CONSTRUCTORS["Y"](tiny)

    @pytest.mark.parametrize("kw", [{"folds": 1}, {"prior": (0, 1)}, {"prior": (1,)}, {"n_bootstrap": 0},
                                    {"effective_size": "n"}])
    def test_config_validation(self, kw):
        with pytest.raises(ParameterError):
            BaselineConfig(**kw)
