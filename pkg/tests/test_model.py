import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from sklearn.base import clone

from cudbound._validation import ParameterError
from cudbound.dataset import Dataset
from cudbound.model import (
    BasisExpansion,
    LeastSquaresClassifier,
    empirical_error,
    expand,
    fit_least_squares,
    predict_signs,
    surrogate_loss,
)

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


class TestBasis:
    def test_affine(self, rng):
        X = rng.normal(size=(6, 2))
        Z = BasisExpansion("affine").fit_transform(X)
        assert Z.shape == (6, 3)
        np.testing.assert_array_equal(Z[:, 0], 1.0)
        np.testing.assert_array_equal(Z[:, 1:], X)

    def test_poly_one_feature(self):
        x = np.array([[-1.0], [0.5], [2.0]])
        Z = BasisExpansion("poly", degree=2).fit_transform(x)
        np.testing.assert_allclose(Z, np.column_stack([np.ones(3), x[:, 0], x[:, 0] ** 2]))

    def test_pca_orthonormal(self, rng):
        X = rng.normal(size=(20, 4)) @ rng.normal(size=(4, 4))
        b = BasisExpansion("pca", n_components=3).fit(X)
        np.testing.assert_allclose(b.components_ @ b.components_.T, np.eye(3), atol=1e-8)
        Z = b.transform(X)
        assert Z.shape == (20, 4)
        np.testing.assert_array_equal(Z[:, 0], 1.0)

    def test_pca_full_keeps_distances(self, rng):
        X = rng.normal(size=(10, 3))
        Z = BasisExpansion("pca").fit_transform(X)[:, 1:]
        d_raw = np.linalg.norm(X[:, None] - X[None], axis=-1)
        d_pca = np.linalg.norm(Z[:, None] - Z[None], axis=-1)
        np.testing.assert_allclose(d_pca, d_raw, atol=1e-10)

    def test_frozen_after_fit(self, rng):
        X = rng.normal(size=(10, 2))
        b = BasisExpansion("pca", n_components=1).fit(X)
        before = b.transform(X[:3])
        b.transform(rng.normal(size=(50, 2)) * 10)
        np.testing.assert_array_equal(b.transform(X[:3]), before)

    def test_dimension_mismatch(self, rng):
        b = BasisExpansion().fit(rng.normal(size=(5, 2)))
        with pytest.raises(ValueError, match="fitted on 2"):
            b.transform(rng.normal(size=(5, 3)))

    @pytest.mark.parametrize(
        "text, kind, arg",
        [("affine", "affine", None), ("poly:3", "poly", 3), ("pca:2", "pca", 2), ("PCA", "pca", None)],
    )
    def test_from_string(self, text, kind, arg):
        b = BasisExpansion.from_string(text)
        assert b.kind == kind
        if kind == "poly":
            assert b.degree == arg
        if kind == "pca":
            assert b.n_components == arg

    @pytest.mark.parametrize("text", ["spline", "poly:x", "affine:2"])
    def test_from_string_rejects(self, text):
        with pytest.raises(ParameterError):
            BasisExpansion.from_string(text)

    def test_bad_pca_k(self, rng):
        with pytest.raises(ParameterError):
            BasisExpansion("pca", n_components=5).fit(rng.normal(size=(10, 2)))

    def test_sklearn_clone(self):
        b = BasisExpansion("poly", degree=3)
        assert clone(b).get_params() == b.get_params()

    def test_expand_dataset(self, separable):
        b = BasisExpansion().fit(separable.features)
        assert expand(b, separable).shape == (30, 3)


class TestLoss:
    def test_zero_residual(self):
        X = np.array([[1.0, 1.0], [1.0, -1.0]])
        assert surrogate_loss(X, [1, -1], None, [0.0, 1.0]) == 0.0

    def test_zero_weights(self):
        X = np.ones((3, 1))
        assert surrogate_loss(X, [1, -1, 1], np.zeros(3), [5.0]) == 0.0

    def test_hand_value(self):
        X = np.ones((2, 1))
        # beta = 0 leaves residuals (1, -1)
        assert surrogate_loss(X, [-1, 1], [1, 1], [0.0]) == pytest.approx(1.0)

    @given(
        b1=arrays(np.float64, 3, elements=finite),
        b2=arrays(np.float64, 3, elements=finite),
        t=st.floats(0, 1),
        seed=st.integers(0, 1000),
    )
    def test_convex(self, b1, b2, t, seed):
        r = np.random.default_rng(seed)
        X = r.normal(size=(8, 3))
        y = np.where(r.random(8) < 0.5, 1, -1)
        w = r.integers(0, 3, 8).astype(float)
        lhs = surrogate_loss(X, y, w, t * b1 + (1 - t) * b2)
        rhs = t * surrogate_loss(X, y, w, b1) + (1 - t) * surrogate_loss(X, y, w, b2)
        assert lhs <= rhs + 1e-10

    @given(seed=st.integers(0, 10_000))
    def test_integer_weights_match_resample(self, seed):
        # weighting by copy counts equals the loss on the materialised resample (both are means over n)
        r = np.random.default_rng(seed)
        n = 9
        X = r.normal(size=(n, 2))
        y = np.where(r.random(n) < 0.5, 1, -1)
        phi = r.multinomial(n, np.full(n, 1 / n))
        beta = r.normal(size=2)
        idx = np.repeat(np.arange(n), phi)
        assert surrogate_loss(X, y, phi, beta) == pytest.approx(surrogate_loss(X[idx], y[idx], None, beta), abs=1e-12)


class TestFit:
    def test_interpolation(self):
        np.testing.assert_allclose(fit_least_squares(np.ones((1, 1)), [1]), [1.0])

    def test_symmetric(self):
        np.testing.assert_allclose(fit_least_squares(np.ones((2, 1)), [1, -1]), [0.0], atol=1e-15)

    def test_normal_equations(self, rng):
        X = rng.normal(size=(12, 3))
        y = np.where(rng.random(12) < 0.5, 1, -1)
        w = rng.uniform(0.5, 2, 12)
        beta = fit_least_squares(X, y, w)
        ref = np.linalg.solve(X.T @ (w[:, None] * X), X.T @ (w * y))
        np.testing.assert_allclose(beta, ref, atol=1e-10)

    def test_first_order_probe(self, rng):
        X = rng.normal(size=(8, 3))
        y = np.where(rng.random(8) < 0.5, 1, -1)
        beta = fit_least_squares(X, y)
        base = surrogate_loss(X, y, None, beta)
        for _ in range(100):
            v = rng.normal(size=3)
            assert base <= surrogate_loss(X, y, None, beta + 1e-4 * v)

    def test_minimum_norm(self):
        X = np.column_stack([np.ones(4), np.ones(4)])
        beta = fit_least_squares(X, [1, 1, 1, -1])
        np.testing.assert_allclose(beta, [0.25, 0.25])

    def test_all_zero_weights(self):
        with pytest.raises(ValueError):
            fit_least_squares(np.ones((2, 1)), [1, -1], [0, 0])

    @given(seed=st.integers(0, 10_000))
    def test_row_order_invariance(self, seed):
        r = np.random.default_rng(seed)
        X = r.normal(size=(10, 3))
        y = np.where(r.random(10) < 0.5, 1, -1)
        perm = r.permutation(10)
        a = surrogate_loss(X, y, None, fit_least_squares(X, y))
        b = surrogate_loss(X[perm], y[perm], None, fit_least_squares(X[perm], y[perm]))
        assert a == pytest.approx(b, abs=1e-8)


class TestError:
    def test_perfect(self):
        X = np.array([[1.0, -2.0], [1.0, 3.0]])
        assert empirical_error(X, [-1, 1], [0.0, 1.0]) == 0.0

    def test_negated(self):
        X = np.array([[1.0, -2.0], [1.0, 3.0]])
        assert empirical_error(X, [-1, 1], [0.0, -1.0]) == 1.0

    def test_quarter(self):
        X = np.ones((4, 1))
        assert empirical_error(X, [1, 1, 1, -1], [1.0]) == 0.25

    def test_sign_zero_positive(self):
        np.testing.assert_array_equal(predict_signs(np.eye(2), [0.0, -1.0]), [1, -1])

    @given(seed=st.integers(0, 10_000), c=st.floats(1e-3, 1e3))
    def test_scale_invariant(self, seed, c):
        r = np.random.default_rng(seed)
        X = r.normal(size=(10, 2))
        y = np.where(r.random(10) < 0.5, 1, -1)
        beta = r.normal(size=2)
        assert empirical_error(X, y, c * beta) == empirical_error(X, y, beta)


class TestClassifier:
    def test_fit_predict(self, separable):
        clf = LeastSquaresClassifier().fit(separable.features, separable.labels)
        assert clf.error(separable.features, separable.labels) == 0.0
        assert clf.score(separable.features, separable.labels) == 1.0

    def test_weights_equal_duplicates(self, rng):
        X = rng.normal(size=(7, 2))
        y = np.where(rng.random(7) < 0.5, 1, -1)
        y[:2] = (1, -1)
        w = np.array([2, 1, 1, 0, 1, 1, 1])
        idx = np.repeat(np.arange(7), w)
        a = LeastSquaresClassifier().fit(X, y, sample_weight=w).coef_
        b = LeastSquaresClassifier().fit(X[idx], y[idx]).coef_
        np.testing.assert_allclose(a, b, atol=1e-10)

    def test_poly_basis(self):
        d = Dataset(np.array([[-2.0], [-1.5], [0.0], [0.2], [1.7], [2.1]]), [1, 1, -1, -1, 1, 1])
        clf = LeastSquaresClassifier("poly:2").fit(d.features, d.labels)
        assert clf.error(d.features, d.labels) == 0.0
