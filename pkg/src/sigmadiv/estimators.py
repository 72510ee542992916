"""Frequentist point estimators and the classical rarefaction diagnostic."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.special as sps

from . import gibbs
from .datamodel import PartitionData
from .errors import DomainError, NoFiniteSolutionError

__all__ = [
    "AlphaEstimate",
    "fisher_alpha",
    "mle_alpha",
    "classical_rarefaction",
    "sample_coverage",
]

_BRACKET_LO = 1e-8
_BRACKET_HI = 1e12


@dataclass(frozen=True)
class AlphaEstimate:
    value: float
    method: str
    iterations: int
    residual: float


def _solve_increasing(f, fprime, method: str) -> AlphaEstimate:
    """Root of a strictly increasing f on [1e-8, 1e12]: bisection then Newton polish."""
    lo, hi = _BRACKET_LO, _BRACKET_HI
    if f(lo) >= 0.0 or f(hi) <= 0.0:
        raise NoFiniteSolutionError("estimating equation has no root in [1e-8, 1e12]")
    iters = 0
    while hi / lo > 1.0 + 1e-6:
        mid = math.sqrt(lo * hi)
        iters += 1
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    x = math.sqrt(lo * hi)
    for _ in range(5):
        iters += 1
        x = x - f(x) / fprime(x)
    return AlphaEstimate(value=float(x), method=method, iterations=iters,
                         residual=float(f(x)))


def _check_estimable(n: int, k: int) -> None:
    if k > n or k < 1 or n < 1:
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    if k == n:
        raise NoFiniteSolutionError(
            f"k = n = {n}: every observation distinct, the estimating equation "
            "has no finite root")


def fisher_alpha(n: int, k: int) -> AlphaEstimate:
    """Solve alpha * log(1 + n/alpha) = k for alpha."""
    _check_estimable(n, k)

    def f(a: float) -> float:
        return a * math.log1p(n / a) - k

    def fprime(a: float) -> float:
        return math.log1p(n / a) - n / (a + n)

    return _solve_increasing(f, fprime, "fisher")


def mle_alpha(n: int, k: int) -> AlphaEstimate:
    """Solve alpha * (psi(alpha + n) - psi(alpha)) = k, the DP likelihood equation."""
    _check_estimable(n, k)
    if k == 1:
        # the left side ranges over (1, n): a single distinct taxon pushes the
        # maximizer to the alpha -> 0 boundary
        raise NoFiniteSolutionError(
            f"k = 1 with n = {n}: the likelihood is maximized at the boundary alpha -> 0")

    def f(a: float) -> float:
        return a * (sps.digamma(a + n) - sps.digamma(a)) - k

    def fprime(a: float) -> float:
        return (sps.digamma(a + n) - sps.digamma(a)
                + a * (sps.polygamma(1, a + n) - sps.polygamma(1, a)))

    return _solve_increasing(f, fprime, "ml")


def classical_rarefaction(data: PartitionData,
                          sizes: Optional[Sequence[int]] = None) -> np.ndarray:
    """Permutation-averaged accumulation curve K-bar_i.

    K-bar_i = k - C(n,i)^{-1} sum_j C(n - n_j, i), evaluated through
    log-binomial ratios (each ratio <= 1, so the sum is done in linear space).
    With sizes=None the full curve i = 1..n is returned.
    """
    n, k = data.n, data.k
    if sizes is None:
        sizes = np.arange(1, n + 1)
    sizes = np.asarray(sizes, dtype=np.int64)
    if sizes.size and (sizes.min() < 1 or sizes.max() > n):
        raise DomainError("sizes must lie in 1..n")
    out = np.empty(sizes.shape, dtype=float)
    lgn = sps.gammaln(n + 1)
    abund = np.array(data.abundances, dtype=float)
    for idx, i in enumerate(sizes):
        log_denom = lgn - sps.gammaln(i + 1) - sps.gammaln(n - i + 1)
        top = n - abund
        ok = top >= i
        log_num = (sps.gammaln(top[ok] + 1) - sps.gammaln(top[ok] - i + 1)
                   - sps.gammaln(i + 1))
        out[idx] = k - np.exp(log_num - log_denom).sum()
    return out


def sample_coverage(model: gibbs.GibbsModel, n: int, k: int) -> float:
    """Bayesian sample coverage 1 - V_{n+1,k+1}/V_{n,k}, the mass of seen taxa."""
    delta = gibbs.log_V(model, n + 1, k + 1) - gibbs.log_V(model, n, k)
    return float(-np.expm1(delta))
