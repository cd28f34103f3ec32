"""Cumulative spectral density estimation on top of the Chebyshev cache."""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import defaults
from .chebyshev import (ChebyshevBasisCache, jackson_damping,
                        step_filter_coefficients)
from .util import InputError


@dataclass
class SpectralDensityEstimate:
    """Monotone cubic estimate of the cumulative spectral distribution.

    ``cdf`` maps [0, lambda_max] onto [0, 1]; ``counts`` holds the
    post-processed node values N * cdf(xi_i) that the interpolant passes
    through, anchored at (0, 1) and (lambda_max, N) counts.
    """

    lambda_max: float
    n_vertices: int
    xi: np.ndarray
    counts: np.ndarray
    _interp: PchipInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.xi) != len(self.counts) or len(self.xi) < 2:
            raise InputError("density nodes and counts must align, length >= 2")
        if np.any(np.diff(self.xi) <= 0):
            raise InputError("density abscissas must be strictly increasing")
        if np.any(np.diff(self.counts) < 0):
            raise InputError("density counts must be nondecreasing")
        self._interp = PchipInterpolator(self.xi, self.counts / self.n_vertices)

    def cdf(self, z):
        """Estimated fraction of eigenvalues at or below z (clamped to domain)."""
        z = np.clip(np.asarray(z, dtype=np.float64), 0.0, self.lambda_max)
        return self._interp(z)

    def inverse(self, q: float) -> float:
        """Smallest z with cdf(z) >= q, by bisection to 1e-9 * lambda_max."""
        if not 0.0 <= q <= 1.0:
            raise InputError(f"quantile must lie in [0, 1], got {q}")
        if float(self.cdf(0.0)) >= q:
            return 0.0
        lo, hi = 0.0, self.lambda_max
        while hi - lo > 1e-9 * self.lambda_max:
            mid = 0.5 * (lo + hi)
            if float(self.cdf(mid)) >= q:
                hi = mid
            else:
                lo = mid
        return hi

    def to_json(self) -> dict:
        return {
            "lambda_max": self.lambda_max,
            "n_vertices": self.n_vertices,
            "xi": [float(v) for v in self.xi],
            "counts": [float(v) for v in self.counts],
            "anchor_points": [[0.0, 1.0 / self.n_vertices],
                              [self.lambda_max, 1.0]],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SpectralDensityEstimate":
        return cls(
            lambda_max=float(obj["lambda_max"]),
            n_vertices=int(obj["n_vertices"]),
            xi=np.asarray(obj["xi"], dtype=np.float64),
            counts=np.asarray(obj["counts"], dtype=np.float64),
        )

    @classmethod
    def from_eigenvalues(cls, eigenvalues: np.ndarray,
                         lambda_max: float | None = None) -> "SpectralDensityEstimate":
        """Exact cumulative distribution of a known spectrum (test/exact-path aid)."""
        lam = np.sort(np.asarray(eigenvalues, dtype=np.float64))
        lam = np.maximum(lam, 0.0)
        n = len(lam)
        if lambda_max is None:
            lambda_max = float(lam[-1]) if lam[-1] > 0 else 1e-12
        atol = 1e-12 * max(1.0, lambda_max)
        xs, ys = [], []
        for i, v in enumerate(lam):
            if xs and v - xs[-1] <= atol:
                ys[-1] = float(i + 1)
            else:
                xs.append(float(v))
                ys.append(float(i + 1))
        if xs[0] > 0.0:  # Laplacian spectra start at 0; keep the domain anchored
            xs.insert(0, 0.0)
            ys.insert(0, 0.0)
        if lambda_max - xs[-1] > atol:
            xs.append(float(lambda_max))
            ys.append(float(n))
        if len(xs) == 1:  # fully degenerate spectrum (edgeless graph)
            xs.append(xs[0] + max(atol, 1e-12))
            ys.append(float(n))
            lambda_max = xs[-1]
        return cls(lambda_max=float(lambda_max), n_vertices=n,
                   xi=np.asarray(xs), counts=np.asarray(ys))


def estimate_cdf(L, cache: ChebyshevBasisCache,
                 t_points: int = defaults.CDF_POINTS) -> SpectralDensityEstimate:
    """Estimate the cumulative spectral distribution from cached moments.

    Uses t_points linearly spaced abscissas on [0, lambda_max]. Each interior
    count is the trace estimate of a Jackson-damped lowpass step filter; this
    touches only the cache moments, so no Laplacian products are spent here.
    Counts are clamped to [0, N], forced nondecreasing, and anchored at
    (0, 1) and (lambda_max, N) before the monotone cubic fit.
    """
    if t_points < 3:
        raise InputError(f"need at least 3 CDF points, got {t_points}")
    if cache.n_vertices != L.n_vertices:
        raise InputError(
            f"cache built for {cache.n_vertices} vertices, operator has "
            f"{L.n_vertices}")
    lambda_max = cache.lambda_max
    if abs(L.require_lambda_max() - lambda_max) > 1e-9 * lambda_max:
        raise InputError("operator and cache disagree on lambda_max")
    n = cache.n_vertices
    xi = np.linspace(0.0, lambda_max, t_points)
    counts = np.empty(t_points)
    gamma = jackson_damping(cache.K)
    for i in range(1, t_points - 1):
        c = step_filter_coefficients(0.0, xi[i], lambda_max, cache.K)
        alpha = c
        alpha[0] = 0.5 * c[0]
        alpha[1:] *= gamma[1:]
        counts[i] = cache.trace_estimate(alpha)
    counts[0] = 1.0
    counts[-1] = n
    np.clip(counts, 0.0, n, out=counts)
    counts = np.maximum.accumulate(counts)
    return SpectralDensityEstimate(lambda_max=lambda_max, n_vertices=n,
                                   xi=xi, counts=counts)


def cdf_inverse(density: SpectralDensityEstimate, q: float) -> float:
    """Functional alias for :meth:`SpectralDensityEstimate.inverse`."""
    return density.inverse(q)
