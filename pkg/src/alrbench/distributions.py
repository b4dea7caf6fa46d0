"""Probabilistic input models: marginal distributions, isoprobabilistic
transforms and Latin hypercube sampling.

All marginals are independent. Everything here is immutable after
construction and safe to share between workers; sampling routines take an
explicit numpy Generator.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

# Euler-Mascheroni constant, used by the Gumbel moment relations
EULER_GAMMA = 0.5772156649015329

# CDF values are clamped to [TAIL_EPS, 1 - TAIL_EPS] before ndtri
TAIL_EPS = 1e-16

FAMILIES = ("gaussian", "lognormal", "gumbel", "uniform")


class DomainError(ValueError):
    """Raised when an argument lies outside a distribution's support."""


class ExtremeTailWarning(UserWarning):
    """Emitted when a transform input falls so deep in a tail that the CDF
    value had to be clamped away from 0 or 1."""


def std_normal_cdf(x):
    return ndtr(x)


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def std_normal_inv_cdf(p):
    """Inverse standard normal CDF, accurate to double precision on (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise DomainError("quantile argument must lie strictly inside (0, 1)")
    return ndtri(p)


def _moments_from_params(family, params):
    a, b = params
    if family == "gaussian":
        return a, b
    if family == "lognormal":
        mean = np.exp(a + 0.5 * b * b)
        return mean, mean * np.sqrt(np.expm1(b * b))
    if family == "gumbel":
        return a + EULER_GAMMA * b, np.pi * b / np.sqrt(6.0)
    return 0.5 * (a + b), (b - a) / np.sqrt(12.0)


@dataclass(frozen=True)
class Marginal:
    """One continuous marginal distribution.

    ``params`` is the canonical parameter pair of the family:

    * gaussian:  (mean, std)
    * lognormal: (mu_log, sigma_log) of the underlying normal
    * gumbel:    (location, scale) of the max/Type-I variant
    * uniform:   (lower, upper)
    """

    family: str
    params: tuple[float, float]
    mean: float = field(default=np.nan)
    std: float = field(default=np.nan)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        a, b = self.params
        if self.family == "uniform":
            if not a < b:
                raise ValueError("uniform lower bound must be < upper bound")
        elif b <= 0.0:
            raise ValueError(f"{self.family} scale parameter must be > 0")
        if np.isnan(self.mean) or np.isnan(self.std):
            m, s = _moments_from_params(self.family, self.params)
            object.__setattr__(self, "mean", m)
            object.__setattr__(self, "std", s)

    # ------------------------------------------------------------------
    @classmethod
    def from_moments(cls, family, mean, cov):
        """Build a marginal from (mean, coefficient of variation)."""
        if family == "uniform":
            raise ValueError("uniform marginals are parameterized by bounds")
        if cov <= 0.0:
            raise ValueError("coefficient of variation must be > 0")
        std = abs(mean) * cov
        if family == "gaussian":
            params = (mean, std)
        elif family == "lognormal":
            if mean <= 0.0:
                raise ValueError("lognormal requires a positive mean")
            s2 = np.log1p(cov * cov)
            params = (np.log(mean) - 0.5 * s2, np.sqrt(s2))
        elif family == "gumbel":
            scale = std * np.sqrt(6.0) / np.pi
            params = (mean - EULER_GAMMA * scale, scale)
        else:
            raise ValueError(f"unknown family {family!r}")
        return cls(family, params, mean=mean, std=std)

    @classmethod
    def uniform(cls, lower, upper):
        return cls("uniform", (float(lower), float(upper)))

    @property
    def cov(self):
        if self.mean == 0.0:
            return np.inf
        return self.std / abs(self.mean)

    @property
    def support(self):
        if self.family == "lognormal":
            return (0.0, np.inf)
        if self.family == "uniform":
            return self.params
        return (-np.inf, np.inf)

    # ------------------------------------------------------------------
    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.params
        if self.family == "gaussian":
            return std_normal_pdf((x - a) / b) / b
        if self.family == "lognormal":
            out = np.zeros_like(x)
            pos = x > 0.0
            z = (np.log(x[pos]) - a) / b
            out[pos] = std_normal_pdf(z) / (x[pos] * b)
            return out
        if self.family == "gumbel":
            z = (x - a) / b
            return np.exp(-z - np.exp(-z)) / b
        lo, hi = a, b
        return np.where((x >= lo) & (x <= hi), 1.0 / (hi - lo), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        self._check_support(x)
        a, b = self.params
        if self.family == "gaussian":
            return ndtr((x - a) / b)
        if self.family == "lognormal":
            out = np.zeros_like(x)
            pos = x > 0.0
            out[pos] = ndtr((np.log(x[pos]) - a) / b)
            return out
        if self.family == "gumbel":
            return np.exp(-np.exp(-(x - a) / b))
        return np.clip((x - a) / (b - a), 0.0, 1.0)

    def inv_cdf(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0.0) | (p >= 1.0)):
            raise DomainError("quantile argument must lie strictly inside (0, 1)")
        a, b = self.params
        if self.family == "gaussian":
            return a + b * ndtri(p)
        if self.family == "lognormal":
            return np.exp(a + b * ndtri(p))
        if self.family == "gumbel":
            return a - b * np.log(-np.log(p))
        return a + (b - a) * p

    def _check_support(self, x):
        lo, hi = self.support
        if np.any(x < lo) or np.any(x > hi):
            raise DomainError(
                f"value outside the support [{lo}, {hi}] of {self.family}"
            )

    # ------------------------------------------------------------------
    def to_standard_normal(self, x):
        """Map physical values to standard normal space, u = Phi^-1(F(x))."""
        p = self.cdf(x)
        clipped = np.clip(p, TAIL_EPS, 1.0 - TAIL_EPS)
        if np.any(p != clipped):
            warnings.warn(
                "transform input in the extreme tail; CDF value clamped",
                ExtremeTailWarning,
                stacklevel=2,
            )
        return ndtri(clipped)

    def from_standard_normal(self, u):
        u = np.asarray(u, dtype=float)
        p = np.clip(ndtr(u), TAIL_EPS, 1.0 - TAIL_EPS)
        return self.inv_cdf(p)


@dataclass(frozen=True)
class RandomVector:
    """Vector of independent marginals with componentwise transforms."""

    marginals: tuple[Marginal, ...]

    def __post_init__(self):
        if len(self.marginals) < 1:
            raise ValueError("a random vector needs at least one marginal")
        object.__setattr__(self, "marginals", tuple(self.marginals))

    @property
    def dim(self):
        return len(self.marginals)

    def to_standard_normal(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        u = np.empty_like(x)
        for i, m in enumerate(self.marginals):
            u[:, i] = m.to_standard_normal(x[:, i])
        return u

    def from_standard_normal(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        x = np.empty_like(u)
        for i, m in enumerate(self.marginals):
            x[:, i] = m.from_standard_normal(u[:, i])
        return x

    def sample(self, n, rng):
        """n iid draws in physical space (inverse-CDF of uniforms)."""
        p = rng.uniform(size=(n, self.dim))
        p = np.clip(p, TAIL_EPS, 1.0 - TAIL_EPS)
        x = np.empty_like(p)
        for i, m in enumerate(self.marginals):
            x[:, i] = m.inv_cdf(p[:, i])
        return x

    def pdf(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.ones(x.shape[0])
        for i, m in enumerate(self.marginals):
            out *= m.pdf(x[:, i])
        return out

    def means(self):
        return np.array([m.mean for m in self.marginals])


def lhs_sample(n, rv, rng):
    """Latin hypercube sample of n points in physical space.

    Each marginal gets exactly one point per equiprobable stratum, placed
    uniformly inside the stratum. Deterministic for a fixed generator state.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.empty((n, rv.dim))
    for i, m in enumerate(rv.marginals):
        strata = rng.permutation(n)
        p = (strata + rng.uniform(size=n)) / n
        p = np.clip(p, TAIL_EPS, 1.0 - TAIL_EPS)
        x[:, i] = m.inv_cdf(p)
    return x
