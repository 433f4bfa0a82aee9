import numpy as np
import pytest
from scipy.linalg import LinAlgError

from pacreach.bounds import PacCertificate
from pacreach.estimators import (AffineTransform, KernelChristoffel,
                                 NystromChristoffel, PolyChristoffel,
                                 SupportEstimate, estimate_from_dict,
                                 estimate_to_dict, membership)
from pacreach.errors import CapacityError
from pacreach.kernels import (PolynomialInnerProductKernel,
                              SquaredExponentialKernel)
from pacreach.polybasis import MultiIndexBasis


def se_variance_oracle(X_train, X_query, lengthscale, noise):
    """Independent GP posterior-variance implementation (dense inverse)."""
    def k(a, b):
        d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
        return np.exp(-d2 / (2 * lengthscale**2))

    K = k(X_train, X_train)
    kd = k(X_train, X_query)
    inv = np.linalg.inv(noise * np.eye(len(X_train)) + K)
    return 1.0 - np.einsum("iq,ij,jq->q", kd, inv, kd)


class TestPolyChristoffel:
    def test_constant_basis_value(self):
        # single data point, degree 0: core matrix is the scalar 2
        est = PolyChristoffel(degree=0, ridge=1.0).fit([[5.0]])
        np.testing.assert_allclose(
            est.score_samples([[0.0], [123.0]]), [0.5, 0.5], rtol=1e-14)

    def test_degree_one_hand_solution(self):
        # data {0}, ridge 1: core matrix diag(2, 1), score = 1/2 + x^2
        est = PolyChristoffel(degree=1, ridge=1.0).fit([[0.0]])
        np.testing.assert_allclose(
            est.moment_factor_ @ est.moment_factor_.T, [[2.0, 0.0], [0.0, 1.0]],
            atol=1e-15)
        np.testing.assert_allclose(
            est.score_samples([[0.0], [3.0]]), [0.5, 9.5], rtol=1e-14)

    def test_nan_data_rejected(self):
        with pytest.raises((ValueError, LinAlgError)):
            PolyChristoffel(degree=1, ridge=1.0).fit([[np.nan], [1.0]])

    def test_scores_strictly_positive(self):
        rng = np.random.default_rng(0)
        est = PolyChristoffel(degree=3, ridge=1e-6).fit(rng.normal(size=(40, 2)))
        scores = est.score_samples(rng.normal(size=(200, 2)) * 3)
        assert np.all(scores > 0)

    def test_ridge_monotonicity(self):
        # a larger ridge never increases the score anywhere
        rng = np.random.default_rng(1)
        X = rng.normal(size=(30, 2))
        grid = rng.uniform(-2, 2, size=(10, 2))
        lo = PolyChristoffel(degree=3, ridge=1e-3).fit(X).score_samples(grid)
        hi = PolyChristoffel(degree=3, ridge=1e-1).fit(X).score_samples(grid)
        assert np.all(hi <= lo + 1e-12)

    def test_dimension_mismatch(self):
        est = PolyChristoffel(degree=2, ridge=1e-3).fit(np.zeros((5, 2)))
        with pytest.raises(ValueError):
            est.score_samples(np.zeros((3, 3)))

    def test_bad_ridge(self):
        with pytest.raises(ValueError):
            PolyChristoffel(degree=2, ridge=0.0).fit(np.zeros((5, 2)))

    def test_get_params_round_trip(self):
        est = PolyChristoffel(degree=7, ridge=0.25)
        assert est.get_params() == {"degree": 7, "ridge": 0.25}
        clone = PolyChristoffel(**est.get_params())
        assert clone.degree == 7 and clone.ridge == 0.25


class TestKernelChristoffel:
    def test_single_point_closed_form(self):
        # one sample, unit ridge: score at the sample is 1 - 1/(1+1)
        est = KernelChristoffel(SquaredExponentialKernel(1.0), ridge=1.0)
        est.fit([[0.0, 0.0]])
        assert est.score_samples([[0.0, 0.0]])[0] == pytest.approx(0.5, rel=1e-14)

    def test_far_query_approaches_diag(self):
        est = KernelChristoffel(SquaredExponentialKernel(1.0), ridge=1.0)
        est.fit([[0.0, 0.0]])
        assert est.score_samples([[50.0, 50.0]])[0] == pytest.approx(1.0, rel=1e-12)

    def test_se_scores_within_unit_interval(self):
        rng = np.random.default_rng(2)
        est = KernelChristoffel(SquaredExponentialKernel(0.5), ridge=1e-2)
        est.fit(rng.normal(size=(50, 2)))
        scores = est.score_samples(rng.uniform(-3, 3, size=(100, 2)))
        assert np.all(scores >= 0.0) and np.all(scores <= 1.0 + 1e-12)

    def test_training_scores_below_diag(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(30, 3))
        est = KernelChristoffel(SquaredExponentialKernel(0.8), ridge=0.1).fit(X)
        assert np.all(est.score_samples(X) <= 1.0 + 1e-12)

    def test_gp_posterior_variance_equivalence(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            X = rng.normal(size=(25, 2))
            q = rng.normal(size=(40, 2))
            ell = float(rng.uniform(0.3, 2.0))
            noise = float(rng.uniform(0.01, 1.0))
            est = KernelChristoffel(SquaredExponentialKernel(ell), ridge=noise).fit(X)
            np.testing.assert_allclose(
                est.score_samples(q), se_variance_oracle(X, q, ell, noise),
                atol=1e-10)

    def test_finite_basis_weight_space_equivalence(self):
        # independent Bayesian linear regression route: prior weight
        # covariance (1/s) I over monomial features, per-observation noise
        # variance N and zero targets give posterior weight covariance
        # inv(s I + (1/N) sum z z^T); its predictive variance must equal the
        # polynomial score
        rng = np.random.default_rng(21)
        X = rng.uniform(-1, 1, size=(30, 2))
        q = rng.uniform(-1.5, 1.5, size=(40, 2))
        s = 0.05
        basis = MultiIndexBasis(2, 3)
        z_train = basis.evaluate(X)
        posterior_cov = np.linalg.inv(
            s * np.eye(basis.size) + (z_train.T @ z_train) / len(X))
        zq = basis.evaluate(q)
        oracle = np.einsum("qi,ij,qj->q", zq, posterior_cov, zq)
        scores = PolyChristoffel(degree=3, ridge=s).fit(X).score_samples(q)
        np.testing.assert_allclose(scores, oracle, rtol=1e-10)

    def test_poly_kernel_identity(self):
        # kernel scores with ridge s equal (s/N) * poly scores with ridge s/N
        rng = np.random.default_rng(5)
        X = rng.uniform(-1, 1, size=(20, 2))
        q = rng.uniform(-1.5, 1.5, size=(30, 2))
        basis = MultiIndexBasis(2, 3)
        s = 0.7
        kern = KernelChristoffel(PolynomialInnerProductKernel(basis), ridge=s)
        kv = kern.fit(X).score_samples(q)
        pv = PolyChristoffel(degree=3, ridge=s / 20).fit(X).score_samples(q)
        np.testing.assert_allclose((20 / s) * kv, pv, rtol=1e-6)

    def test_conditioning_shrinks_variance(self):
        # adding a data point never increases the score anywhere
        rng = np.random.default_rng(6)
        X = rng.normal(size=(20, 2))
        extra = np.vstack([X, rng.normal(size=(1, 2))])
        grid = rng.uniform(-2, 2, size=(50, 2))
        k = SquaredExponentialKernel(0.7)
        before = KernelChristoffel(k, ridge=0.05).fit(X).score_samples(grid)
        after = KernelChristoffel(k, ridge=0.05).fit(extra).score_samples(grid)
        assert np.all(after <= before + 1e-8)

    def test_capacity_guard(self):
        est = KernelChristoffel(SquaredExponentialKernel(1.0), ridge=0.1,
                                gram_size_limit=10)
        with pytest.raises(CapacityError, match="Nystrom"):
            est.fit(np.zeros((11, 2)))


class TestNystromChristoffel:
    def _instance(self, rng, n=40):
        return rng.normal(size=(n, 2))

    def test_full_rank_matches_kernel(self):
        rng = np.random.default_rng(7)
        X = self._instance(rng)
        q = rng.uniform(-2, 2, size=(30, 2))
        k = SquaredExponentialKernel(0.6)
        full = KernelChristoffel(k, ridge=0.05).fit(X).score_samples(q)
        nys = NystromChristoffel(k, ridge=0.05, n_landmarks=40,
                                 landmark_rule="first-r").fit(X).score_samples(q)
        np.testing.assert_allclose(nys, full, atol=1e-8)

    def test_rank_one_on_duplicated_point(self):
        # two identical samples: the Gramian is rank one, a single landmark
        # reproduces the full estimator exactly
        X = np.array([[1.0, 2.0], [1.0, 2.0]])
        q = np.array([[0.0, 0.0], [1.0, 2.0], [2.0, 1.0]])
        k = SquaredExponentialKernel(1.0)
        full = KernelChristoffel(k, ridge=0.3).fit(X).score_samples(q)
        nys = NystromChristoffel(k, ridge=0.3, n_landmarks=1,
                                 landmark_rule="first-r").fit(X).score_samples(q)
        np.testing.assert_allclose(nys, full, atol=1e-10)

    def test_never_exceeds_full_estimator(self):
        rng = np.random.default_rng(8)
        k = SquaredExponentialKernel(0.5)
        for seed in range(5):
            X = np.random.default_rng(seed).normal(size=(20, 2))
            q = rng.uniform(-2, 2, size=(50, 2))
            full = KernelChristoffel(k, ridge=0.05).fit(X).score_samples(q)
            nys = NystromChristoffel(k, ridge=0.05, n_landmarks=5,
                                     random_state=seed).fit(X).score_samples(q)
            assert np.all(nys <= full + 1e-8)

    def test_matches_dense_substitution_oracle(self):
        # oracle: build the landmark approximation of the Gramian explicitly
        # and run the dense formula on it
        rng = np.random.default_rng(9)
        X = rng.normal(size=(20, 2))
        q = rng.uniform(-2, 2, size=(25, 2))
        k = SquaredExponentialKernel(0.8)
        ridge = 0.1
        est = NystromChristoffel(k, ridge=ridge, n_landmarks=5,
                                 landmark_rule="first-r").fit(X)
        idx = est.landmark_indices_
        k_nr = k(X, X[idx])
        k_rr = k(X[idx], X[idx])
        k_tilde = k_nr @ np.linalg.solve(k_rr, k_nr.T)
        kd = k(X, q)
        inv = np.linalg.inv(ridge * np.eye(20) + k_tilde)
        oracle = 1.0 - np.einsum("iq,ij,jq->q", kd, inv, kd)
        # the estimator clamps negatives (the substituted Gramian is not a
        # consistent covariance, so far queries can go genuinely negative)
        np.testing.assert_allclose(est.score_samples(q), np.maximum(oracle, 0.0),
                                   atol=1e-8)

    def test_landmark_validation(self):
        k = SquaredExponentialKernel(1.0)
        with pytest.raises(ValueError):
            NystromChristoffel(k, n_landmarks=0).fit(np.zeros((5, 2)))
        with pytest.raises(ValueError):
            NystromChristoffel(k, n_landmarks=6).fit(np.zeros((5, 2)))
        with pytest.raises(ValueError):
            NystromChristoffel(k, n_landmarks=2,
                               landmark_rule="fancy").fit(np.zeros((5, 2)))

    def test_clamp_counter(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(30, 2))
        est = NystromChristoffel(SquaredExponentialKernel(0.5), ridge=1e-6,
                                 n_landmarks=3, random_state=0).fit(X)
        scores = est.score_samples(X)
        assert np.all(scores >= 0.0)
        assert est.clamp_count_ >= 0  # counter exists and is consistent


class TestSupportEstimate:
    def _estimate(self, threshold=1.0):
        est = PolyChristoffel(degree=1, ridge=1.0).fit([[0.0]])
        cert = PacCertificate("classical", 0.1, 0.01, 1)
        return SupportEstimate(est, threshold, cert)

    def test_threshold_tie_is_inside(self):
        # score at x = sqrt(1/2) equals exactly... use the training max rule
        sup = self._estimate(threshold=0.5)
        assert membership(sup, [0.0]) is True  # score exactly 0.5

    def test_zero_threshold_excludes_everything(self):
        sup = self._estimate(threshold=0.0)
        assert not sup.contains([[0.0], [1.0]]).any()

    def test_infinite_threshold_includes_everything(self):
        sup = self._estimate(threshold=np.inf)
        assert sup.contains([[0.0], [1e6]]).all()

    def test_transform_applied(self):
        est = PolyChristoffel(degree=1, ridge=1.0).fit([[0.0]])
        tr = AffineTransform(offset=(10.0,), scale=(2.0,))
        sup = SupportEstimate(est, 0.5, None, tr)
        # raw x = 10 maps to 0, the training point
        assert membership(sup, [10.0]) is True
        assert membership(sup, [16.0]) is False  # maps to 3, score 9.5


class TestSerialization:
    def test_poly_round_trip_bit_exact(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(20, 2))
        est = PolyChristoffel(degree=4, ridge=1e-3).fit(X)
        sup = SupportEstimate(est, 3.7, None,
                              AffineTransform((0.1, -0.2), (2.0, 3.0)))
        doc = estimate_to_dict(sup)
        import json
        from pacreach.serialize import dumps_json
        again = estimate_from_dict(json.loads(dumps_json(doc)))
        q = rng.uniform(-2, 2, size=(50, 2))
        np.testing.assert_array_equal(again.score(q), sup.score(q))
        assert again.threshold == sup.threshold

    def test_kernel_round_trip_bit_exact(self):
        rng = np.random.default_rng(12)
        X = rng.normal(size=(15, 2))
        est = KernelChristoffel(SquaredExponentialKernel(0.4), ridge=0.02).fit(X)
        sup = SupportEstimate(est, 0.1)
        import json
        from pacreach.serialize import dumps_json
        again = estimate_from_dict(json.loads(dumps_json(estimate_to_dict(sup))))
        q = rng.uniform(-2, 2, size=(40, 2))
        np.testing.assert_array_equal(again.score(q), sup.score(q))

    def test_nystrom_round_trip_bit_exact(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(25, 2))
        est = NystromChristoffel(SquaredExponentialKernel(0.6), ridge=0.05,
                                 n_landmarks=6, random_state=3).fit(X)
        sup = SupportEstimate(est, 0.2)
        import json
        from pacreach.serialize import dumps_json
        again = estimate_from_dict(json.loads(dumps_json(estimate_to_dict(sup))))
        q = rng.uniform(-2, 2, size=(40, 2))
        np.testing.assert_array_equal(again.score(q), sup.score(q))

    def test_poly_document_is_compact(self):
        # polynomial estimates serialize without the training data
        est = PolyChristoffel(degree=2, ridge=1e-2).fit(np.zeros((100, 2)))
        doc = estimate_to_dict(SupportEstimate(est, 1.0))
        assert "data" not in doc
        assert doc["type"] == "poly"

    def test_unsupported_format_rejected(self):
        with pytest.raises(ValueError):
            estimate_from_dict({"format": 2})
