"""Empirical inverse Christoffel function estimators.

Three sklearn-style estimators share the same contract: ``fit(X)`` ingests an
iid sample cloud and factorizes the relevant positive-definite core matrix,
``score_samples(X)`` evaluates the fitted inverse Christoffel function, and
small values mark regions where the sampled distribution has mass.

* :class:`PolyChristoffel` scores by a quadratic form in a monomial feature
  vector against the ridge-regularized empirical moment matrix.
* :class:`KernelChristoffel` is the kernel-trick generalization; its score at
  a point equals the posterior variance of a zero-observation Gaussian
  process regression with observation noise equal to the ridge.
* :class:`NystromChristoffel` replaces the Gramian with a low-rank landmark
  approximation so that no N x N matrix is ever materialized.

A fitted estimator together with a threshold and a certificate forms a
:class:`SupportEstimate`, the set ``{x : score(x) <= threshold}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .bounds import PacCertificate
from .errors import CapacityError
from .kernels import (PolynomialInnerProductKernel, SquaredExponentialKernel,
                      kernel_from_spec)
from .polybasis import MultiIndexBasis


def cholesky_with_jitter(matrix: np.ndarray, stage: str) -> np.ndarray:
    """Lower Cholesky factor, retrying once with a small diagonal jitter.

    The jitter is 1e-10 * trace / d.  A second failure raises
    ``LinAlgError`` naming the offending stage.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if not np.all(np.isfinite(matrix)):
        raise LinAlgError(f"{stage}: matrix contains non-finite entries")
    try:
        return cholesky(matrix, lower=True)
    except LinAlgError:
        d = matrix.shape[0]
        jitter = 1e-10 * np.trace(matrix) / d
        bumped = matrix.copy()
        bumped[np.diag_indices(d)] += jitter
        try:
            return cholesky(bumped, lower=True)
        except LinAlgError as exc:
            raise LinAlgError(
                f"{stage}: Cholesky factorization failed even after adding "
                f"diagonal jitter {jitter:.3e}"
            ) from exc


def _validate_data(X) -> np.ndarray:
    return check_array(X, dtype=np.float64, ensure_2d=True)


class PolyChristoffel(BaseEstimator):
    """Polynomial empirical inverse Christoffel function.

    ``fit`` accumulates the ridged empirical moment matrix
    ``M = ridge * I + (1/N) sum_i z(x_i) z(x_i)^T`` over the monomial basis
    of total degree <= ``degree`` and stores its Cholesky factor;
    ``score_samples`` evaluates ``z(x)^T M^{-1} z(x)`` through one triangular
    solve per point.  Scores are strictly positive (the basis has a constant
    entry and M is positive definite).

    Parameters
    ----------
    degree : int
        Maximum total degree of the monomial basis.
    ridge : float
        Positive diagonal regularization added to the moment matrix.

    Attributes
    ----------
    basis_ : MultiIndexBasis
    moment_factor_ : ndarray of shape (d, d)
        Lower Cholesky factor of the ridged moment matrix.
    n_samples_ : int
    n_features_in_ : int
    """

    def __init__(self, degree: int = 2, ridge: float = 1e-4):
        self.degree = degree
        self.ridge = ridge

    def fit(self, X, y=None):
        if self.ridge <= 0:
            raise ValueError(f"ridge must be positive, got {self.ridge}")
        X = _validate_data(X)
        n_samples, n_features = X.shape
        self.basis_ = MultiIndexBasis(n_features, self.degree)
        z = self.basis_.evaluate(X)
        moment = (z.T @ z) / n_samples
        moment[np.diag_indices(self.basis_.size)] += self.ridge
        self.moment_factor_ = cholesky_with_jitter(moment, "moment matrix")
        self.n_samples_ = n_samples
        self.n_features_in_ = n_features
        return self

    def score_samples(self, X) -> np.ndarray:
        check_is_fitted(self, "moment_factor_")
        X = _validate_data(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, estimator was fit with "
                f"{self.n_features_in_}"
            )
        z = self.basis_.evaluate(X)
        w = solve_triangular(self.moment_factor_, z.T, lower=True)
        return np.einsum("ij,ij->j", w, w)


class KernelChristoffel(BaseEstimator):
    """Kernelized empirical inverse Christoffel function.

    ``fit`` builds the Gramian K over the training cloud and factorizes
    ``ridge * I + K``; the score at x is

        k(x, x) - k_D(x)^T (ridge * I + K)^{-1} k_D(x),

    always within [0, k(x, x)].  With the polynomial inner-product kernel and
    ridge ``s``, scores equal ``(s / N) *`` the :class:`PolyChristoffel`
    score fitted with ridge ``s / N`` (the change of variables that motivates
    the kernel form).

    Parameters
    ----------
    kernel : kernel object, default SquaredExponentialKernel(1.0)
    ridge : float
        Positive noise level added to the Gramian diagonal.
    gram_size_limit : int
        Refuse to materialize a Gramian larger than this (rows); callers
        beyond the limit should switch to :class:`NystromChristoffel`.
    """

    def __init__(self, kernel=None, ridge: float = 1e-4,
                 gram_size_limit: int = 20000):
        self.kernel = kernel
        self.ridge = ridge
        self.gram_size_limit = gram_size_limit

    def _kernel(self):
        return self.kernel if self.kernel is not None else SquaredExponentialKernel(1.0)

    def fit(self, X, y=None, gram: np.ndarray | None = None):
        """Fit on a sample cloud.

        ``gram`` optionally supplies the precomputed Gramian of X (without
        ridge) so callers that already built it do not pay for it twice.
        """
        if self.ridge <= 0:
            raise ValueError(f"ridge must be positive, got {self.ridge}")
        X = _validate_data(X)
        n = X.shape[0]
        if n > self.gram_size_limit:
            raise CapacityError(
                f"Gramian would be {n} x {n}, above the configured limit of "
                f"{self.gram_size_limit}; use NystromChristoffel for large "
                f"sample clouds"
            )
        k = self._kernel()
        kmat = np.array(k(X, X), dtype=np.float64) if gram is None \
            else np.array(gram, dtype=np.float64)
        if kmat.shape != (n, n):
            raise ValueError(f"Gramian has shape {kmat.shape}, expected {(n, n)}")
        kmat[np.diag_indices(n)] += self.ridge
        self.gram_factor_ = cholesky_with_jitter(kmat, "ridged Gramian")
        self.X_ = X
        self.n_samples_ = n
        self.n_features_in_ = X.shape[1]
        return self

    def score_samples(self, X) -> np.ndarray:
        check_is_fitted(self, "gram_factor_")
        X = _validate_data(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, estimator was fit with "
                f"{self.n_features_in_}"
            )
        k = self._kernel()
        cross = k(self.X_, X)
        return self._scores_from_cross(cross, k.diag(X))

    def _scores_from_cross(self, cross: np.ndarray, diag: np.ndarray) -> np.ndarray:
        # cross has one column of kernel evaluations k(x_i, x) per query x.
        v = solve_triangular(self.gram_factor_, cross, lower=True)
        out = diag - np.einsum("ij,ij->j", v, v)
        return np.maximum(out, 0.0)


class NystromChristoffel(BaseEstimator):
    """Low-rank landmark approximation of :class:`KernelChristoffel`.

    ``fit`` selects ``n_landmarks`` training points, forms the r x N cross
    Gramian ``K_rN`` and factorizes the r x r core
    ``ridge * K_rr + K_rN K_rN^T``; no N x N matrix is ever built.  The score

        k(x,x) - [k_D(x)^T k_D(x) - w^T (ridge*K_rr + K_rN K_rN^T)^{-1} w] / ridge

    with ``w = K_rN k_D(x)`` equals the full kernel score with the Gramian
    replaced by its landmark approximation, and never exceeds the full score
    (the approximation is dominated in the positive-semidefinite order).
    Round-off can push it slightly negative; such values clamp to zero and
    increment the ``clamp_count_`` diagnostic.

    Parameters
    ----------
    kernel : kernel object, default SquaredExponentialKernel(1.0)
    ridge : float
    n_landmarks : int
    landmark_rule : {"uniform-random", "first-r"}
        Landmark selection: uniform without replacement under
        ``random_state``, or the first r points for full determinism.
    random_state : int, Generator or None
    """

    def __init__(self, kernel=None, ridge: float = 1e-4, n_landmarks: int = 10,
                 landmark_rule: str = "uniform-random", random_state=None):
        self.kernel = kernel
        self.ridge = ridge
        self.n_landmarks = n_landmarks
        self.landmark_rule = landmark_rule
        self.random_state = random_state

    def _kernel(self):
        return self.kernel if self.kernel is not None else SquaredExponentialKernel(1.0)

    def fit(self, X, y=None):
        if self.ridge <= 0:
            raise ValueError(f"ridge must be positive, got {self.ridge}")
        X = _validate_data(X)
        n = X.shape[0]
        r = self.n_landmarks
        if not 1 <= r <= n:
            raise ValueError(f"n_landmarks must lie in [1, {n}], got {r}")
        if self.landmark_rule == "first-r":
            idx = np.arange(r)
        elif self.landmark_rule == "uniform-random":
            rng = np.random.default_rng(self.random_state)
            idx = np.sort(rng.choice(n, size=r, replace=False))
        else:
            raise ValueError(f"unknown landmark_rule {self.landmark_rule!r}")
        k = self._kernel()
        cross = k(X[idx], X)  # r x N
        k_rr = k(X[idx], X[idx])
        core = self.ridge * k_rr + cross @ cross.T
        self.core_factor_ = cholesky_with_jitter(core, "Nystrom core")
        self.X_ = X
        self.landmark_indices_ = idx
        self._cross_gram = cross
        self.n_samples_ = n
        self.n_features_in_ = X.shape[1]
        self.clamp_count_ = 0
        return self

    def score_samples(self, X) -> np.ndarray:
        check_is_fitted(self, "core_factor_")
        X = _validate_data(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, estimator was fit with "
                f"{self.n_features_in_}"
            )
        k = self._kernel()
        kd = k(self.X_, X)  # N x q
        w = self._cross_gram @ kd  # r x q
        v = solve_triangular(self.core_factor_, w, lower=True)
        subtracted = (np.einsum("ij,ij->j", kd, kd)
                      - np.einsum("ij,ij->j", v, v)) / self.ridge
        out = k.diag(X) - subtracted
        negative = out < 0
        if np.any(negative):
            self.clamp_count_ += int(np.count_nonzero(negative))
            out = np.maximum(out, 0.0)
        return out


@dataclass(frozen=True)
class AffineTransform:
    """Per-coordinate affine map x -> (x - offset) / scale.

    Used to normalize raw sample coordinates into a well-conditioned range
    before fitting; the map is fixed a priori (independent of the training
    data), so probabilistic guarantees transfer unchanged to the original
    coordinates.
    """

    offset: tuple[float, ...]
    scale: tuple[float, ...]

    @classmethod
    def from_box(cls, box) -> "AffineTransform":
        """Map the given axis-aligned box onto [-1, 1]^n."""
        box = np.asarray(box, dtype=np.float64)
        lo, hi = box[:, 0], box[:, 1]
        if np.any(hi <= lo):
            raise ValueError("normalization box must have positive width per axis")
        return cls(tuple((lo + hi) / 2.0), tuple((hi - lo) / 2.0))

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return (X - np.asarray(self.offset)) / np.asarray(self.scale)

    def to_dict(self) -> dict:
        return {"offset": list(self.offset), "scale": list(self.scale)}

    @classmethod
    def from_dict(cls, d: dict) -> "AffineTransform":
        return cls(tuple(float(v) for v in d["offset"]),
                   tuple(float(v) for v in d["scale"]))


@dataclass
class SupportEstimate:
    """A fitted estimator plus threshold: the set {x : score(x) <= threshold}.

    Ties sit inside the set.  ``transform``, when present, is applied to raw
    query coordinates before scoring.
    """

    estimator: PolyChristoffel | KernelChristoffel | NystromChristoffel
    threshold: float
    certificate: PacCertificate | None = None
    transform: AffineTransform | None = None

    @property
    def dim(self) -> int:
        return self.estimator.n_features_in_

    def score(self, X) -> np.ndarray:
        """Inverse Christoffel values at raw (untransformed) query points."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.transform is not None:
            X = self.transform.apply(X)
        return self.estimator.score_samples(X)

    def contains(self, X) -> np.ndarray:
        """Boolean membership, true iff score(x) <= threshold."""
        return self.score(X) <= self.threshold


def membership(estimate: SupportEstimate, x) -> bool:
    """Membership of a single point in the estimated support set."""
    return bool(estimate.contains(np.atleast_2d(np.asarray(x, dtype=np.float64)))[0])


# --------------------------------------------------------------------------
# Serialization.  Factors are stored as packed lower triangles (row-major)
# of IEEE doubles; parsing them back reproduces scores bit for bit.
# --------------------------------------------------------------------------

def _pack_lower(mat: np.ndarray) -> list[float]:
    idx = np.tril_indices(mat.shape[0])
    return mat[idx].tolist()


def _unpack_lower(values, size: int) -> np.ndarray:
    out = np.zeros((size, size), dtype=np.float64)
    out[np.tril_indices(size)] = np.asarray(values, dtype=np.float64)
    return out


def estimate_to_dict(estimate: SupportEstimate) -> dict:
    est = estimate.estimator
    doc: dict = {
        "format": 1,
        "n_features": est.n_features_in_,
        "sigma0_sq": est.ridge,
        "n_samples": est.n_samples_,
        "threshold": estimate.threshold,
        "transform": estimate.transform.to_dict() if estimate.transform else None,
    }
    if isinstance(est, PolyChristoffel):
        doc["type"] = "poly"
        doc["degree"] = est.degree
        doc["moment_factor"] = _pack_lower(est.moment_factor_)
    elif isinstance(est, KernelChristoffel):
        doc["type"] = "kernel"
        doc["kernel"] = est._kernel().to_spec()
        doc["data"] = est.X_.tolist()
        doc["gram_factor"] = _pack_lower(est.gram_factor_)
    elif isinstance(est, NystromChristoffel):
        doc["type"] = "nystrom"
        doc["kernel"] = est._kernel().to_spec()
        doc["data"] = est.X_.tolist()
        doc["landmark_indices"] = est.landmark_indices_.tolist()
        doc["core_factor"] = _pack_lower(est.core_factor_)
    else:
        raise TypeError(f"cannot serialize estimator of type {type(est)}")
    return doc


def estimate_from_dict(doc: dict) -> SupportEstimate:
    if doc.get("format") != 1:
        raise ValueError(f"unsupported estimate format: {doc.get('format')!r}")
    kind = doc["type"]
    n_features = int(doc["n_features"])
    ridge = float(doc["sigma0_sq"])
    n_samples = int(doc["n_samples"])
    if kind == "poly":
        est = PolyChristoffel(degree=int(doc["degree"]), ridge=ridge)
        est.basis_ = MultiIndexBasis(n_features, est.degree)
        est.moment_factor_ = _unpack_lower(doc["moment_factor"], est.basis_.size)
    elif kind == "kernel":
        est = KernelChristoffel(kernel=kernel_from_spec(doc["kernel"]), ridge=ridge)
        est.X_ = np.asarray(doc["data"], dtype=np.float64)
        est.gram_factor_ = _unpack_lower(doc["gram_factor"], n_samples)
    elif kind == "nystrom":
        est = NystromChristoffel(kernel=kernel_from_spec(doc["kernel"]), ridge=ridge)
        est.X_ = np.asarray(doc["data"], dtype=np.float64)
        est.landmark_indices_ = np.asarray(doc["landmark_indices"], dtype=np.intp)
        est.core_factor_ = _unpack_lower(doc["core_factor"],
                                         est.landmark_indices_.size)
        # The cross Gramian is a deterministic elementwise function of the
        # stored data, so rebuilding it preserves bit-exact scores.
        est._cross_gram = est._kernel()(est.X_[est.landmark_indices_], est.X_)
        est.clamp_count_ = 0
    else:
        raise ValueError(f"unknown estimate type {kind!r}")
    est.n_samples_ = n_samples
    est.n_features_in_ = n_features
    transform = doc.get("transform")
    return SupportEstimate(
        estimator=est,
        threshold=float(doc["threshold"]),
        certificate=None,
        transform=AffineTransform.from_dict(transform) if transform else None,
    )
