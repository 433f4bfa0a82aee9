"""Positive-definite kernels used by the kernelized Christoffel estimators."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .polybasis import MultiIndexBasis


class SquaredExponentialKernel:
    """k(x, y) = exp(-||x - y||^2 / (2 * lengthscale^2))."""

    kind = "squared-exponential"

    def __init__(self, lengthscale: float = 1.0):
        if not lengthscale > 0:
            raise ValueError(f"lengthscale must be positive, got {lengthscale}")
        self.lengthscale = float(lengthscale)

    def __call__(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
        sq = cdist(X, Y, "sqeuclidean")
        return np.exp(-sq / (2.0 * self.lengthscale**2))

    def diag(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.ones(X.shape[0])

    def to_spec(self) -> dict:
        return {"kind": self.kind, "lengthscale": self.lengthscale}

    def __repr__(self) -> str:
        return f"SquaredExponentialKernel(lengthscale={self.lengthscale})"


class PolynomialInnerProductKernel:
    """k(x, y) = z(x) . z(y) for the monomial vector z of total degree <= degree.

    With this kernel the kernelized estimator reproduces the polynomial one up
    to an explicit rescaling of value and ridge (see ``estimators``).
    """

    kind = "polynomial-inner-product"

    def __init__(self, basis: MultiIndexBasis):
        self.basis = basis

    def __call__(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        zx = self.basis.evaluate(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        zy = self.basis.evaluate(np.atleast_2d(np.asarray(Y, dtype=np.float64)))
        return zx @ zy.T

    def diag(self, X: np.ndarray) -> np.ndarray:
        z = self.basis.evaluate(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        return np.einsum("ij,ij->i", z, z)

    def to_spec(self) -> dict:
        return {
            "kind": self.kind,
            "n_vars": self.basis.n_vars,
            "degree": self.basis.degree,
        }

    def __repr__(self) -> str:
        return (
            f"PolynomialInnerProductKernel(n_vars={self.basis.n_vars}, "
            f"degree={self.basis.degree})"
        )


def kernel_from_spec(spec: dict):
    """Rebuild a kernel object from its serialized dictionary form."""
    kind = spec.get("kind")
    if kind == SquaredExponentialKernel.kind:
        return SquaredExponentialKernel(lengthscale=spec["lengthscale"])
    if kind == PolynomialInnerProductKernel.kind:
        return PolynomialInnerProductKernel(
            MultiIndexBasis(spec["n_vars"], spec["degree"])
        )
    raise ValueError(f"unknown kernel kind: {kind!r}")
