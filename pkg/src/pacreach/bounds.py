"""Certificate mathematics for the support estimators.

Everything here is a deterministic pure function: the VC-type sample bound,
the chi-square(1) CDF, Bernoulli KL divergence and its conservative upper
inversion, Gaussian KL divergences in dense / spectral / truncated / diagonal
forms, the stochastic-risk formula for Gaussian sublevel concepts, and the
per-iteration accuracy schedule of the iterative estimation loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.special import erf


def chi2_cdf_1dof(x: float) -> float:
    """CDF of the chi-square distribution with one degree of freedom.

    F1(x) = erf(sqrt(x / 2)); accurate to full double precision.
    """
    if x < 0:
        raise ValueError(f"chi-square CDF argument must be >= 0, got {x}")
    return math.erf(math.sqrt(0.5 * x))


#: F1(1): probability that a squared standard normal is <= 1.
CHI2_1DOF_AT_1 = chi2_cdf_1dof(1.0)

#: 1 / (1 - F1(1)) ~ 3.15, the risk inflation factor from a stochastic
#: sublevel concept to its mean-parameter (central) concept.
CENTRAL_CONCEPT_FACTOR = 1.0 / (1.0 - CHI2_1DOF_AT_1)


def classical_sample_bound(epsilon: float, delta: float, vc_dim: int) -> int:
    """Smallest N with N >= (5/eps) * (ln(4/delta) + d * ln(40/eps)).

    Natural logarithms throughout.  For a concept class of VC dimension
    ``vc_dim`` and a zero empirical risk estimator, drawing this many iid
    samples guarantees accuracy ``1 - epsilon`` with confidence ``1 - delta``.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if vc_dim < 1:
        raise ValueError(f"vc_dim must be a positive integer, got {vc_dim}")
    rhs = (5.0 / epsilon) * (math.log(4.0 / delta) + vc_dim * math.log(40.0 / epsilon))
    return math.ceil(rhs)


def bernoulli_kl(q: float, p: float) -> float:
    """KL divergence between Bernoulli(q) and Bernoulli(p), in nats.

    Uses the convention 0 * log(0 / p) = 0.  ``p`` must lie strictly inside
    (0, 1); the divergence is infinite at the endpoints unless q matches.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in the open interval (0, 1), got {p}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    out = 0.0
    if q > 0.0:
        out += q * (math.log(q) - math.log(p))
    if q < 1.0:
        out += (1.0 - q) * (math.log1p(-q) - math.log1p(-p))
    return max(out, 0.0)


def kl_inverse_upper(q_hat: float, gamma: float, tol: float = 1e-12) -> float:
    """Conservative upper inverse of the Bernoulli KL divergence.

    Returns sup{beta in [q_hat, 1) : bernoulli_kl(q_hat, beta) <= gamma},
    located by bisection to absolute tolerance ``tol`` and rounded up by the
    tolerance, so the returned value never under-reports the risk.
    """
    if not 0.0 <= q_hat < 1.0:
        raise ValueError(f"q_hat must lie in [0, 1), got {q_hat}")
    if gamma < 0.0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if gamma == 0.0:
        return q_hat
    lo, hi = q_hat, 1.0
    # Invariant: kl(q_hat, lo) <= gamma and (hi == 1 or kl(q_hat, hi) > gamma).
    # The divergence is continuous and strictly increasing in beta on
    # [q_hat, 1), so the supremum lies in [lo, hi].  Bisection runs past the
    # requested tolerance down to float resolution: near saturation the
    # divergence is so steep that a wider bracket would over-report the bound
    # by more than round-off.
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if bernoulli_kl(q_hat, mid) <= gamma:
            lo = mid
        else:
            hi = mid
    return hi if hi < 1.0 else math.nextafter(1.0, 0.0)


def empirical_stochastic_risk(values, eta: float) -> float:
    """Mean of 1 - F1(eta / v) over the estimator values v at the data points.

    This is the empirical risk of a stochastic sublevel-set concept whose
    defining Gaussian has pointwise variance v; a value of v = 0 contributes
    zero risk (the ratio diverges and F1 tends to 1).
    """
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("values must be non-empty")
    if np.any(v < 0):
        raise ValueError("values must be non-negative")
    with np.errstate(divide="ignore"):
        ratio = np.where(v > 0, eta / np.where(v > 0, v, 1.0), np.inf)
    return float(np.mean(1.0 - erf(np.sqrt(0.5 * ratio))))


def gaussian_kl_generic(mu0, sigma0, mu1, sigma1) -> float:
    """KL divergence between N(mu0, sigma0) and N(mu1, sigma1).

    0.5 * [log det(S1 S0^-1) + tr(S1^-1 ((mu0-mu1)(mu0-mu1)^T + S0)) - k],
    evaluated through Cholesky factors of both covariance matrices.
    """
    mu0 = np.asarray(mu0, dtype=np.float64).ravel()
    mu1 = np.asarray(mu1, dtype=np.float64).ravel()
    s0 = np.asarray(sigma0, dtype=np.float64)
    s1 = np.asarray(sigma1, dtype=np.float64)
    k = mu0.size
    if mu1.size != k or s0.shape != (k, k) or s1.shape != (k, k):
        raise ValueError("mean/covariance dimensions do not match")
    l0 = cholesky(s0, lower=True)
    l1 = cholesky(s1, lower=True)
    logdet = 2.0 * (np.sum(np.log(np.diag(l1))) - np.sum(np.log(np.diag(l0))))
    w = solve_triangular(l1, l0, lower=True)
    trace = float(np.sum(w * w))
    diff = solve_triangular(l1, mu0 - mu1, lower=True)
    quad = float(diff @ diff)
    return max(0.5 * (logdet + trace + quad - k), 0.0)


def gaussian_kl_kernel_dense(gram: np.ndarray, sigma0_sq: float) -> float:
    """KL divergence from the data-conditioned to the prior Gaussian, dense form.

    For an SPD Gramian K this is
    0.5 * [log det(I + K/s) + tr((I + K/s)^-1) - N] with s = sigma0_sq,
    computed without ever forming K^-1.
    """
    if sigma0_sq <= 0:
        raise ValueError(f"sigma0_sq must be positive, got {sigma0_sq}")
    gram = np.asarray(gram, dtype=np.float64)
    n = gram.shape[0]
    a = gram / sigma0_sq
    a[np.diag_indices(n)] += 1.0
    la = cholesky(a, lower=True)
    logdet = 2.0 * float(np.sum(np.log(np.diag(la))))
    inv_l = solve_triangular(la, np.eye(n), lower=True)
    trace = float(np.sum(inv_l * inv_l))
    return max(0.5 * (logdet + trace - n), 0.0)


def _spectral_summands(eigenvalues: np.ndarray, sigma0_sq: float) -> np.ndarray:
    # Tiny negatives from symmetric eigensolve round-off clamp to 0, where
    # the summand vanishes by continuity.
    lam = np.maximum(np.asarray(eigenvalues, dtype=np.float64), 0.0)
    r = lam / sigma0_sq
    return np.log1p(r) + 1.0 / (1.0 + r) - 1.0


def gaussian_kl_kernel_spectral(eigenvalues, sigma0_sq: float) -> float:
    """Spectral form of :func:`gaussian_kl_kernel_dense`.

    0.5 * sum_i [ln(1 + lam_i/s) + 1/(1 + lam_i/s) - 1] over the eigenvalues
    of the Gramian.
    """
    if sigma0_sq <= 0:
        raise ValueError(f"sigma0_sq must be positive, got {sigma0_sq}")
    return max(0.5 * float(np.sum(_spectral_summands(eigenvalues, sigma0_sq))), 0.0)


def gaussian_kl_kernel_truncated(top_eigenvalues, n_total: int, sigma0_sq: float) -> float:
    """Upper bound on the spectral KL from the p largest Gramian eigenvalues.

    The unknown trailing eigenvalues are replaced by the smallest known one;
    the spectral summand is nondecreasing in the eigenvalue, so the result
    is always >= the exact divergence.
    """
    if sigma0_sq <= 0:
        raise ValueError(f"sigma0_sq must be positive, got {sigma0_sq}")
    lam = np.asarray(top_eigenvalues, dtype=np.float64)
    p = lam.size
    if p == 0:
        raise ValueError("top_eigenvalues must be non-empty")
    if p > n_total:
        raise ValueError(f"received {p} eigenvalues for total dimension {n_total}")
    if np.any(np.diff(lam) > 0):
        raise ValueError("top_eigenvalues must be sorted in descending order")
    s = _spectral_summands(lam, sigma0_sq)
    tail = (n_total - p) * s[-1]
    return max(0.5 * (float(np.sum(s)) + tail), 0.0)


def gaussian_kl_poly(moment_factor: np.ndarray, sigma0_sq: float,
                     variant: str = "moment-inverse") -> float:
    """KL divergence from the moment-matrix posterior to the isotropic prior.

    ``moment_factor`` is the lower Cholesky factor L of the ridged moment
    matrix M (d x d).  The default ``"moment-inverse"`` variant takes the
    posterior weight covariance to be M^-1 against the prior s^-1 I, giving

        0.5 * sum_j [ln(mu_j / s) + s / mu_j - 1]

    over the eigenvalues mu_j of M, evaluated here from the factor as
    0.5 * (log det M - d ln s + s tr(M^-1) - d).  The ``"ridged"`` variant
    instead uses posterior covariance (s I + M)^-1, which double-counts the
    ridge; it is kept for comparison only.  Cost is O(d^3), independent of
    the sample count.
    """
    if sigma0_sq <= 0:
        raise ValueError(f"sigma0_sq must be positive, got {sigma0_sq}")
    l = np.asarray(moment_factor, dtype=np.float64)
    d = l.shape[0]
    if l.shape != (d, d):
        raise ValueError("moment_factor must be square")
    if np.any(np.diag(l) <= 0):
        raise ValueError("moment_factor must have positive diagonal (SPD input)")
    if variant == "ridged":
        m = l @ l.T
        m[np.diag_indices(d)] += sigma0_sq
        l = cholesky(m, lower=True)
    elif variant != "moment-inverse":
        raise ValueError(f"unknown variant {variant!r}")
    logdet = 2.0 * float(np.sum(np.log(np.diag(l))))
    inv_l = solve_triangular(l, np.eye(d), lower=True)
    trace = float(np.sum(inv_l * inv_l))
    return max(0.5 * (logdet - d * math.log(sigma0_sq) + sigma0_sq * trace - d), 0.0)


def pacbayes_risk_bound(q_hat: float, kl: float, n_samples: int, delta_i: float) -> float:
    """Upper bound on the true stochastic risk from its empirical value.

    Inverts the Bernoulli KL constraint
    D(q_hat || r) <= (kl + ln((N+1)/delta_i)) / N upward.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if not 0.0 < delta_i < 1.0:
        raise ValueError(f"delta_i must lie in (0, 1), got {delta_i}")
    if kl < 0:
        raise ValueError(f"kl must be >= 0, got {kl}")
    gamma = (kl + math.log((n_samples + 1) / delta_i)) / n_samples
    return kl_inverse_upper(q_hat, gamma)


def iteration_confidence(delta: float, iteration: int) -> float:
    """Per-iteration confidence budget 6*delta / (pi^2 * i^2).

    The budgets sum to delta over all iterations, so every iteration of the
    estimation loop is certified simultaneously.
    """
    if iteration < 1:
        raise ValueError(f"iteration must be >= 1, got {iteration}")
    return 6.0 * delta / (math.pi**2 * iteration**2)


def epsilon_schedule(r_bar: float, n_samples: int, iteration: int, delta: float) -> float:
    """Accuracy certified at one iteration of the estimation loop.

    eps_i = (r_bar + (2/N) * ln(pi^2 i^2 / (6 delta))) / (1 - F1(1)).
    Values >= 1 are vacuous and are reported as-is.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if iteration < 1:
        raise ValueError(f"iteration must be >= 1, got {iteration}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    slack = (2.0 / n_samples) * math.log(math.pi**2 * iteration**2 / (6.0 * delta))
    return (r_bar + slack) / (1.0 - CHI2_1DOF_AT_1)


def central_concept_scale(srisk_bound: float) -> float:
    """Risk bound for the central concept: srisk_bound / (1 - F1(1))."""
    if not 0.0 <= srisk_bound < 1.0:
        raise ValueError(f"srisk_bound must lie in [0, 1), got {srisk_bound}")
    return srisk_bound * CENTRAL_CONCEPT_FACTOR


@dataclass(frozen=True)
class IterationRecord:
    """Bound evaluation at one iteration of an iterative estimation run.

    ``delta_i`` and ``gamma`` are recorded for audit: ``risk_bound`` is the
    upward KL inversion of ``stochastic_risk`` at slack ``gamma``, and
    ``epsilon`` is recomputable from ``risk_bound``, ``n_samples``,
    ``iteration`` and the certificate-level delta.
    """

    iteration: int
    n_samples: int
    stochastic_risk: float
    kl_divergence: float
    risk_bound: float
    epsilon: float
    delta_i: float
    gamma: float

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "n_samples": self.n_samples,
            "stochastic_risk": self.stochastic_risk,
            "kl_divergence": self.kl_divergence,
            "risk_bound": self.risk_bound,
            "epsilon": self.epsilon,
            "delta_i": self.delta_i,
            "gamma": self.gamma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IterationRecord":
        return cls(**{k: d[k] for k in (
            "iteration", "n_samples", "stochastic_risk", "kl_divergence",
            "risk_bound", "epsilon", "delta_i", "gamma")})


@dataclass(frozen=True)
class PacCertificate:
    """Probabilistic guarantee attached to a support estimate.

    ``epsilon`` and ``delta`` are the requested accuracy/confidence targets.
    For iterative methods the trace holds one record per completed iteration
    and, on ``status == "certified"``, the final trace epsilon is <= the
    target.  A ``"not-terminated"`` status marks a run stopped by the
    iteration guard; the trace is still simultaneously valid.
    """

    method: str  # "classical" | "pacbayes-kernel" | "pacbayes-poly"
    epsilon: float
    delta: float
    n_samples: int
    status: str = "certified"
    trace: tuple[IterationRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.method not in ("classical", "pacbayes-kernel", "pacbayes-poly"):
            raise ValueError(f"unknown certificate method {self.method!r}")
        if self.status not in ("certified", "not-terminated"):
            raise ValueError(f"unknown certificate status {self.status!r}")

    @property
    def achieved_epsilon(self) -> float:
        """Best accuracy actually certified (last trace entry, if any)."""
        return self.trace[-1].epsilon if self.trace else self.epsilon

    def to_dict(self) -> dict:
        return {
            "format": 1,
            "method": self.method,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "n_samples": self.n_samples,
            "status": self.status,
            "trace": [r.to_dict() for r in self.trace],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PacCertificate":
        if d.get("format") != 1:
            raise ValueError(f"unsupported certificate format: {d.get('format')!r}")
        return cls(
            method=d["method"],
            epsilon=d["epsilon"],
            delta=d["delta"],
            n_samples=d["n_samples"],
            status=d["status"],
            trace=tuple(IterationRecord.from_dict(r) for r in d["trace"]),
        )
