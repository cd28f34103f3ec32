"""Band-end selection on the estimated spectral distribution, and the bank."""

import warnings
from dataclasses import dataclass

import numpy as np

from . import defaults
from .chebyshev import PolynomialFilter, make_polynomial_filter
from .density import SpectralDensityEstimate
from .util import InputError, NumericalError

SPACINGS = ("uniform-linear", "uniform-log", "adapted-linear", "adapted-log")


def initial_band_ends(density: SpectralDensityEstimate, M: int,
                      spacing: str = "adapted-log") -> np.ndarray:
    """Band ends tau_0..tau_M on [0, lambda_max].

    uniform-linear splits the value range evenly; uniform-log places the
    upper ends at lambda_max * 2^{m-M} (the lowest band absorbs everything
    below lambda_max * 2^{1-M}); the adapted variants put the same patterns
    on the estimated eigenvalue distribution via its quantiles. The top end
    clears lambda_max by a relative 1e-9 so every eigenvalue falls below it.
    """
    if M < 1:
        raise InputError(f"need M >= 1, got {M}")
    if spacing not in SPACINGS:
        raise InputError(f"unknown spacing {spacing!r}; choose from {SPACINGS}")
    lmax = density.lambda_max
    ends = np.empty(M + 1)
    ends[0] = 0.0
    ends[M] = lmax * (1.0 + 1e-9)
    m = np.arange(1, M)
    if spacing == "uniform-linear":
        ends[1:M] = lmax * m / M
    elif spacing == "uniform-log":
        ends[1:M] = lmax * 2.0 ** (m.astype(float) - M)
    elif spacing == "adapted-linear":
        ends[1:M] = [density.inverse(q) for q in m / M]
    else:  # adapted-log
        ends[1:M] = [density.inverse(q) for q in 2.0 ** (m.astype(float) - M)]
    if np.any(np.diff(ends) <= 0):
        raise NumericalError(
            f"{spacing} band ends collapsed for M={M}; the estimated "
            f"distribution is too concentrated"
        )
    return ends


def adjust_band_ends(density: SpectralDensityEstimate, band_ends,
                     delta: float = defaults.BAND_ADJUST_DELTA,
                     grid_points: int = defaults.BAND_ADJUST_GRID) -> np.ndarray:
    """Slide interior band ends to local minima of the estimated density.

    End m searches [tau_m - r, tau_m + r] with r half the smaller neighbor
    gap, minimizing the symmetric difference quotient
    (cdf(tau + delta) - cdf(tau - delta)) / (2 delta) over a uniform candidate
    grid. Ties prefer the initial end, then the smaller candidate; tau_0 and
    tau_M never move.
    """
    initial = np.asarray(band_ends, dtype=np.float64)
    ends = initial.copy()
    if delta <= 0:
        raise InputError(f"delta must be positive, got {delta}")
    M = len(ends) - 1
    for m in range(1, M):
        # Search radii come from the initial ends, so the intervals of
        # neighboring ends never overlap past their shared midpoint.
        r = 0.5 * min(initial[m] - initial[m - 1], initial[m + 1] - initial[m])
        grid = np.linspace(initial[m] - r, initial[m] + r, grid_points)
        quotient = (density.cdf(grid + delta) - density.cdf(grid - delta)) / (2 * delta)
        best = float(quotient.min())
        tied = np.flatnonzero(quotient <= best + 1e-12 + 1e-9 * abs(best))
        order = np.lexsort((grid[tied], np.abs(grid[tied] - initial[m])))
        candidate = float(grid[tied[order[0]]])
        if candidate <= ends[m - 1]:
            warnings.warn(f"band end {m} adjustment collapsed; keeping the initial end")
            candidate = float(initial[m])
        ends[m] = candidate
    if np.any(np.diff(ends) <= 0):
        raise NumericalError("adjusted band ends are no longer increasing")
    return ends


@dataclass
class FilterBankDesign:
    """Band ends plus the polynomial filter per band, all sharing one degree.

    The coefficient vectors of a bank built from a common band-end vector sum
    to the allpass vector, so the polynomial responses sum to 1 everywhere.
    """

    M: int
    spacing: str
    K: int
    delta: float
    initial_ends: np.ndarray
    adjusted_ends: np.ndarray
    filters: list

    @property
    def lambda_max(self) -> float:
        return self.filters[0].lambda_max

    def to_json(self) -> dict:
        return {
            "M": self.M,
            "spacing": self.spacing,
            "K": self.K,
            "delta": self.delta,
            "lambda_max": self.lambda_max,
            "damped": bool(self.filters[0].damped),
            "initial_ends": [float(v) for v in self.initial_ends],
            "adjusted_ends": [float(v) for v in self.adjusted_ends],
            "alpha": [[float(a) for a in f.alpha] for f in self.filters],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FilterBankDesign":
        ends = np.asarray(obj["adjusted_ends"], dtype=np.float64)
        lmax = float(obj["lambda_max"])
        filters = [
            PolynomialFilter(alpha=np.asarray(a, dtype=np.float64),
                             band=(float(ends[i]), float(ends[i + 1])),
                             lambda_max=lmax, damped=bool(obj["damped"]))
            for i, a in enumerate(obj["alpha"])
        ]
        return cls(M=int(obj["M"]), spacing=str(obj["spacing"]), K=int(obj["K"]),
                   delta=float(obj["delta"]),
                   initial_ends=np.asarray(obj["initial_ends"], dtype=np.float64),
                   adjusted_ends=ends, filters=filters)


def build_filter_bank(density: SpectralDensityEstimate, M: int,
                      spacing: str = "adapted-log",
                      K: int = defaults.TRANSFORM_DEGREE,
                      delta: float = defaults.BAND_ADJUST_DELTA,
                      adjust: bool = True) -> FilterBankDesign:
    """Choose band ends on the estimated distribution and build the filters."""
    initial = initial_band_ends(density, M, spacing)
    if adjust and M > 1:
        adjusted = adjust_band_ends(density, initial, delta)
    else:
        adjusted = initial.copy()
    filters = [
        make_polynomial_filter(adjusted[m], adjusted[m + 1], density.lambda_max,
                               K, damped=True)
        for m in range(M)
    ]
    return FilterBankDesign(M=M, spacing=spacing, K=K, delta=delta,
                            initial_ends=initial, adjusted_ends=adjusted,
                            filters=filters)
