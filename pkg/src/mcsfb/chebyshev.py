"""Shifted Chebyshev polynomial filters and the shared recurrence cache.

All polynomials use the Chebyshev basis shifted from [-1, 1] to [0, lambda_max]:
T-bar_0(x) = 1, T-bar_1(x) = 2x/lambda_max - 1, and

    T-bar_k(x) = (4/lambda_max) * (x - lambda_max/2) * T-bar_{k-1}(x) - T-bar_{k-2}(x).

A filter is a coefficient vector alpha of length K+1 acting as
h(L) f = sum_k alpha_k T-bar_k(L) f, evaluated matrix-free with one Laplacian
product per degree.
"""

from dataclasses import dataclass

import numpy as np

from . import defaults
from .graph import LaplacianOperator
from .util import InputError


def step_filter_coefficients(tau_a: float, tau_b: float, lambda_max: float,
                             K: int) -> np.ndarray:
    """Chebyshev coefficients of the band indicator 1_{[tau_a, tau_b)}.

    Closed form of the cosine-series integral for a step target: with
    phi(t) = arccos(2 t / lambda_max - 1),

        c_0 = (2/pi) (phi(tau_a) - phi(tau_b)),
        c_k = (2/(k pi)) (sin(k phi(tau_a)) - sin(k phi(tau_b))).

    Band ends are clamped to [0, lambda_max]; tau_b may exceed lambda_max for
    a top band. Note c_0 carries the conventional factor 2: evaluation weights
    it by 1/2 (see :func:`make_polynomial_filter`).
    """
    if lambda_max <= 0:
        raise InputError(f"lambda_max must be positive, got {lambda_max}")
    if not 0 <= tau_a < tau_b:
        raise InputError(f"need 0 <= tau_a < tau_b, got ({tau_a}, {tau_b})")
    if K < 1:
        raise InputError(f"polynomial degree must be >= 1, got {K}")
    a = min(max(tau_a, 0.0), lambda_max)
    b = min(max(tau_b, 0.0), lambda_max)
    phi_a = np.arccos(2.0 * a / lambda_max - 1.0)
    phi_b = np.arccos(2.0 * b / lambda_max - 1.0)
    c = np.zeros(K + 1)
    c[0] = (2.0 / np.pi) * (phi_a - phi_b)
    k = np.arange(1, K + 1)
    c[1:] = (2.0 / (k * np.pi)) * (np.sin(k * phi_a) - np.sin(k * phi_b))
    return c


def jackson_damping(K: int) -> np.ndarray:
    """Damping factors gamma_0..gamma_K that suppress Gibbs oscillations.

    gamma_0 = 1 falls out of the formula; the factors are positive and
    nonincreasing in k.
    """
    if K < 1:
        raise InputError(f"polynomial degree must be >= 1, got {K}")
    k = np.arange(K + 1)
    q = np.pi / (K + 2)
    return ((1.0 - k / (K + 2)) * np.sin(q) * np.cos(k * q)
            + np.cos(q) * np.sin(k * q) / (K + 2)) / np.sin(q)


def allpass_coefficients(K: int) -> np.ndarray:
    """Coefficient vector of the constant-1 filter at degree K."""
    alpha = np.zeros(K + 1)
    alpha[0] = 1.0
    return alpha


@dataclass
class PolynomialFilter:
    """A fixed-degree polynomial filter in the shifted Chebyshev basis.

    alpha holds the evaluation-ready coefficients (the k=0 term already
    halved); band records the target interval the filter approximates.
    """

    alpha: np.ndarray
    band: tuple
    lambda_max: float
    damped: bool

    @property
    def degree(self) -> int:
        return len(self.alpha) - 1

    def evaluate(self, lam) -> np.ndarray:
        """Evaluate the filter response at scalar eigenvalues (vectorized)."""
        lam = np.asarray(lam, dtype=np.float64)
        t_prev = np.ones_like(lam)
        out = self.alpha[0] * t_prev
        if self.degree >= 1:
            t_cur = 2.0 * lam / self.lambda_max - 1.0
            out = out + self.alpha[1] * t_cur
            for ak in self.alpha[2:]:
                t_next = (4.0 * lam / self.lambda_max - 2.0) * t_cur - t_prev
                out += ak * t_next
                t_prev, t_cur = t_cur, t_next
        return out


def make_polynomial_filter(tau_a: float, tau_b: float, lambda_max: float,
                           K: int, damped: bool = True) -> PolynomialFilter:
    """Degree-K polynomial approximation of the band indicator 1_{[tau_a, tau_b)}."""
    c = step_filter_coefficients(tau_a, tau_b, lambda_max, K)
    alpha = c.copy()
    alpha[0] = 0.5 * c[0]
    if damped:
        alpha[1:] *= jackson_damping(K)[1:]
    return PolynomialFilter(alpha=alpha, band=(float(tau_a), float(tau_b)),
                            lambda_max=float(lambda_max), damped=damped)


def chebyshev_fit(func, lambda_max: float, K: int, n_quad: int = 4096) -> np.ndarray:
    """Evaluation-ready Chebyshev coefficients of an arbitrary function.

    Uses midpoint quadrature at Chebyshev angles, exact for polynomial
    integrands well beyond degree K when n_quad >> K. Returns alpha with the
    k=0 term already halved.
    """
    theta = np.pi * (np.arange(n_quad) + 0.5) / n_quad
    values = func(0.5 * lambda_max * (np.cos(theta) + 1.0))
    k = np.arange(K + 1)
    c = (2.0 / n_quad) * np.cos(np.outer(k, theta)) @ values
    c[0] *= 0.5
    return c


def _check_lambda_max(L: LaplacianOperator, lambda_max: float) -> None:
    have = L.require_lambda_max()
    if abs(have - lambda_max) > 1e-9 * max(lambda_max, 1e-300):
        raise InputError(
            f"operator lambda_max {have} does not match filter lambda_max {lambda_max}"
        )


def chebyshev_apply(L: LaplacianOperator, alpha: np.ndarray, x: np.ndarray,
                    lambda_max: float) -> np.ndarray:
    """Apply sum_k alpha_k T-bar_k(L) to a vector or N x J block.

    Costs exactly len(alpha) - 1 Laplacian products per column.
    """
    x = np.asarray(x, dtype=np.float64)
    out = alpha[0] * x
    if len(alpha) > 1:
        t_prev = x
        t_cur = (2.0 / lambda_max) * L.matvec(x) - x
        out = out + alpha[1] * t_cur
        for ak in alpha[2:]:
            t_next = (4.0 / lambda_max) * L.matvec(t_cur) - 2.0 * t_cur - t_prev
            out += ak * t_next
            t_prev, t_cur = t_cur, t_next
    return out


def apply_filter(L: LaplacianOperator, filt: PolynomialFilter,
                 f: np.ndarray) -> np.ndarray:
    """Matrix-free filter application h(L) f."""
    _check_lambda_max(L, filt.lambda_max)
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != L.n_vertices:
        raise InputError(f"signal length {f.shape[0]} != vertex count {L.n_vertices}")
    return chebyshev_apply(L, filt.alpha, f, filt.lambda_max)


class ChebyshevBasisCache:
    """Random probe block X with its shifted Chebyshev images.

    The recurrence is run once at construction (K * J Laplacian products).
    When the (K+1) * N * J float64 footprint fits the budget the images are
    stored ("full") and later filter applications to X are free of Laplacian
    products; otherwise only X and the trace moments are kept ("streaming")
    and each filter application replays the recurrence. moments[k] holds
    <X, T-bar_k(L) X>_F, so trace estimates never need further products.
    """

    def __init__(self, L, K, J, seed, storage, X, blocks, moments):
        self.L = L
        self.lambda_max = L.require_lambda_max()
        self.K = K
        self.J = J
        self.seed = seed
        self.storage = storage
        self.X = X
        self.blocks = blocks
        self.moments = moments

    @property
    def n_vertices(self) -> int:
        return self.X.shape[0]

    def filter_block(self, alpha: np.ndarray) -> np.ndarray:
        """h(L) X for a coefficient vector of degree <= K."""
        if len(alpha) - 1 > self.K:
            raise InputError(
                f"filter degree {len(alpha) - 1} exceeds cache degree {self.K}"
            )
        if self.blocks is not None:
            out = alpha[0] * self.blocks[0]
            for ak, block in zip(alpha[1:], self.blocks[1:]):
                out += ak * block
            return out
        return chebyshev_apply(self.L, alpha, self.X, self.lambda_max)

    def trace_estimate(self, alpha: np.ndarray) -> float:
        """Stochastic estimate of trace(h(L)); costs no Laplacian products."""
        if len(alpha) - 1 > self.K:
            raise InputError(
                f"filter degree {len(alpha) - 1} exceeds cache degree {self.K}"
            )
        return float(np.dot(alpha, self.moments[: len(alpha)])) / self.J


def build_basis_cache(L: LaplacianOperator, K: int = defaults.DENSITY_DEGREE,
                      J: int = defaults.PROBE_VECTORS, seed: int = 0,
                      storage: str = "auto",
                      budget_bytes: int = defaults.CACHE_BUDGET_BYTES) -> ChebyshevBasisCache:
    """Draw the probe block and run the recurrence once.

    Args:
        L: Laplacian with lambda_max_estimate set.
        K: cache polynomial degree (filters of any degree <= K reuse it).
        J: number of standard normal probe vectors.
        seed: probe RNG seed.
        storage: "full", "streaming", or "auto" (full iff within budget_bytes).
    """
    lambda_max = L.require_lambda_max()
    if K < 1 or J < 1:
        raise InputError(f"need K >= 1 and J >= 1, got K={K}, J={J}")
    n = L.n_vertices
    if storage == "auto":
        storage = "full" if (K + 1) * n * J * 8 <= budget_bytes else "streaming"
    if storage not in ("full", "streaming"):
        raise InputError(f"unknown storage mode {storage!r}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, J))
    moments = np.empty(K + 1)
    blocks = [X] if storage == "full" else None
    t_prev = X
    moments[0] = np.vdot(X, X)
    t_cur = (2.0 / lambda_max) * L.matvec(X) - X
    moments[1] = np.vdot(X, t_cur)
    if blocks is not None:
        blocks.append(t_cur)
    for k in range(2, K + 1):
        t_next = (4.0 / lambda_max) * L.matvec(t_cur) - 2.0 * t_cur - t_prev
        moments[k] = np.vdot(X, t_next)
        t_prev, t_cur = t_cur, t_next
        if blocks is not None:
            blocks.append(t_cur)
    return ChebyshevBasisCache(L, K, J, seed, storage, X, blocks, moments)


def estimate_eigencount(cache: ChebyshevBasisCache, filt: PolynomialFilter) -> float:
    """Estimated number of Laplacian eigenvalues the filter passes."""
    if abs(cache.lambda_max - filt.lambda_max) > 1e-9 * filt.lambda_max:
        raise InputError("filter and cache disagree on lambda_max")
    return cache.trace_estimate(filt.alpha)
