"""Proximal and projection operators.

The workhorse is the exact Euclidean projection onto the unit simplex,
implemented as an expected-O(d) sequential scan (the O(d log d)
sort-and-threshold method serves as the independent test oracle).  Products
of simplices get a blockwise prox; the zero function's prox is the
identity.  All functions here are pure and safe for concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import get_backend
from .core import FiniteSumProblem, ProxFriendlyFunction


@dataclass(frozen=True)
class SimplexDomain:
    """The unit simplex {v >= 0, sum(v) = 1} in dimension ``dim``."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("simplex dimension must be positive")

    def contains(self, v: np.ndarray, coord_tol: float = 1e-12,
                 sum_tol: float = 1e-10) -> bool:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            return False
        return bool(v.min() >= -coord_tol and abs(v.sum() - 1.0) <= sum_tol)


def project_simplex(v: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Exact Euclidean projection of ``v`` onto the unit simplex."""
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] < 1:
        raise ValueError("expected a one-dimensional vector")
    if not np.isfinite(v).all():
        raise ValueError("cannot project a vector with NaN or Inf entries")
    _, kern = get_backend(backend)
    out = np.empty_like(v)
    d = v.shape[0]
    kern.project_simplex_into(v, out, np.empty(d), np.empty(d))
    return out


def prox_indicator_product(domains, alpha: float, z: np.ndarray,
                           backend: str | None = None) -> np.ndarray:
    """Blockwise simplex projection of a stacked vector.

    This is the prox of the indicator of a product of simplices; the step
    ``alpha`` does not enter (indicator functions are scale-invariant) but
    is kept for signature uniformity with other proxes.
    """
    z = np.ascontiguousarray(z, dtype=np.float64)
    total = sum(dom.dim for dom in domains)
    if z.shape != (total,):
        raise ValueError(
            f"stacked vector of length {z.shape[0] if z.ndim == 1 else z.shape} "
            f"does not partition into blocks of total length {total}"
        )
    out = np.empty_like(z)
    offset = 0
    for dom in domains:
        block = slice(offset, offset + dom.dim)
        out[block] = project_simplex(z[block], backend=backend)
        offset += dom.dim
    return out


def prox_zero(alpha: float, z: np.ndarray) -> np.ndarray:
    """Prox of the zero function: the identity."""
    return np.array(z, dtype=np.float64, copy=True)


def zero_function() -> ProxFriendlyFunction:
    """g identically zero on all of R^d (unconstrained problems)."""
    return ProxFriendlyFunction(
        prox_map=prox_zero,
        value=lambda z: 0.0,
        domain_test=lambda z: True,
    )


def simplex_product_function(domains) -> ProxFriendlyFunction:
    """Indicator of a product of unit simplices, with blockwise prox."""
    domains = tuple(domains)

    def value(z: np.ndarray) -> float:
        offset = 0
        for dom in domains:
            if not dom.contains(np.asarray(z)[offset:offset + dom.dim]):
                return float("inf")
            offset += dom.dim
        return 0.0

    def domain_test(z: np.ndarray) -> bool:
        return value(z) == 0.0

    return ProxFriendlyFunction(
        prox_map=lambda alpha, z: prox_indicator_product(domains, alpha, z),
        value=value,
        domain_test=domain_test,
    )


def prox_residual(problem: FiniteSumProblem, z: np.ndarray, eta: float) -> float:
    """Fixed-point residual ``||z - prox_{eta g}(z - eta F(z))||``.

    Zero exactly at solutions of the variational inequality; a cheap
    stationarity diagnostic for problems without a closed-form gap.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    z = np.asarray(z, dtype=np.float64)
    step = problem.prox.prox_map(eta, z - eta * problem.full_eval(z))
    return float(np.linalg.norm(z - step))
