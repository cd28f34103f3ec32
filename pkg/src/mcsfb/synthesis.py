"""Reconstruction from sampled band coefficients.

Each band recovers a full-length vector z from its samples by solving

    (kappa * S' diag(1/omega) S + phi(L) + ridge I) z = kappa * S' diag(1/omega) y

where S selects the sampled vertices, omega holds their sampling
probabilities, and phi is a polynomial penalty that is near zero on the
band and positive outside it. The solve is matrix-free conjugate gradients
with a diagonal preconditioner, so the Laplacian cost is the penalty degree
per iteration.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chebyshev import (PolynomialFilter, allpass_coefficients,
                        chebyshev_apply, chebyshev_fit, jackson_damping)
from .coeffs import AnalysisCoefficients
from .defaults import KAPPA, RATIONAL_EPSILON
from .graph import LaplacianOperator
from .sampling import SamplingPlan
from .util import InputError, NumericalError

_OMEGA_FLOOR = 1e-12
_RIDGE_FLOOR = 1e-8
_PENALTY_KINDS = ("one-minus-h", "rational", "spline")


@dataclass
class PenaltyFilter:
    """Polynomial off-band penalty plus the ridge that keeps it PSD."""

    kind: str
    alpha: np.ndarray
    lambda_max: float
    ridge: float

    @property
    def degree(self) -> int:
        return len(self.alpha) - 1

    def evaluate(self, lam):
        poly = PolynomialFilter(alpha=self.alpha, band=(0.0, self.lambda_max),
                                lambda_max=self.lambda_max, damped=False)
        return poly.evaluate(lam) + self.ridge


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _spline_target(band, lambda_max):
    # Zero on the shrunken band [lo+w, hi-w], one outside the grown band
    # [lo-w, hi+w], smoothstep ramps of half-width w straddling each end.
    # A ramp whose plateau would sit beyond the spectrum (below 0 for the
    # first band, above lambda_max for the last) is dropped so the band's
    # own edge content is not penalized.
    lo, hi = band
    width = 0.1 * (hi - lo)
    ramp_low = lo > 1e-12 * lambda_max
    ramp_high = hi < lambda_max * (1.0 - 1e-12)

    def target(lam):
        lam = np.asarray(lam, dtype=np.float64)
        out = np.zeros_like(lam)
        if ramp_low:
            out = np.maximum(out, 1.0 - _smoothstep((lam - (lo - width)) / (2 * width)))
        if ramp_high:
            out = np.maximum(out, _smoothstep((lam - (hi - width)) / (2 * width)))
        return out

    return target


def build_penalty(filt: PolynomialFilter, kind: str = "spline",
                  epsilon: float = RATIONAL_EPSILON) -> PenaltyFilter:
    """Off-band penalty polynomial for one band filter, same degree.

    "one-minus-h" is exact in coefficients: 1 - h. "rational" fits
    1/(h + epsilon) - 1/(1 + epsilon), which grows where h decays.
    "spline" fits a smoothstep bump: zero inside the band with ramps to one
    over the outer tenth of the band width, flat one outside. The ridge is
    whatever lifts the fitted polynomial's grid minimum to nonnegative,
    plus a fixed floor.
    """
    if kind not in _PENALTY_KINDS:
        raise InputError(f"unknown penalty kind {kind!r}, expected one of {_PENALTY_KINDS}")
    lmax = filt.lambda_max
    K = filt.degree
    if kind == "one-minus-h":
        alpha = allpass_coefficients(K) - filt.alpha
    elif kind == "rational":
        offset = 1.0 / (1.0 + epsilon)

        def target(lam):
            return 1.0 / (filt.evaluate(lam) + epsilon) - offset

        # Damping kills the fit's ripple; an undamped fit can dip several
        # percent below zero and the compensating ridge then over-shrinks
        # the band solve.
        alpha = chebyshev_fit(target, lmax, K) * jackson_damping(K)
    else:
        alpha = chebyshev_fit(_spline_target(filt.band, lmax), lmax, K)
        alpha *= jackson_damping(K)
    grid = np.linspace(0.0, lmax, 4001)
    poly = PolynomialFilter(alpha=alpha, band=(0.0, lmax), lambda_max=lmax,
                            damped=False)
    low = float(poly.evaluate(grid).min())
    ridge = max(0.0, -low) + _RIDGE_FLOOR
    return PenaltyFilter(kind=kind, alpha=alpha, lambda_max=lmax, ridge=ridge)


@dataclass
class SynthesisConfig:
    kappa: float = KAPPA
    cg_tolerance: float = 1e-8
    cg_max_iters: int = 100
    penalty_kind: str = "spline"

    def __post_init__(self):
        if self.kappa <= 0:
            raise InputError(f"kappa must be positive, got {self.kappa}")
        if not 0.0 < self.cg_tolerance < 1.0:
            raise InputError(f"cg_tolerance must lie in (0, 1), got {self.cg_tolerance}")
        if self.cg_max_iters < 1:
            raise InputError(f"cg_max_iters must be at least 1, got {self.cg_max_iters}")
        if self.penalty_kind not in _PENALTY_KINDS:
            raise InputError(f"unknown penalty kind {self.penalty_kind!r}")

    @classmethod
    def quick(cls, penalty_kind: str = "spline") -> "SynthesisConfig":
        """Low-accuracy profile: pair with degree-25 filters."""
        return cls(cg_tolerance=1e-8, cg_max_iters=100, penalty_kind=penalty_kind)

    @classmethod
    def accurate(cls, penalty_kind: str = "spline") -> "SynthesisConfig":
        """High-accuracy profile: pair with degree-50 filters."""
        return cls(cg_tolerance=1e-10, cg_max_iters=250, penalty_kind=penalty_kind)


def pcg_solve(apply_op, b: np.ndarray, diag: np.ndarray, tol: float,
              max_iters: int):
    """Preconditioned conjugate gradients from a zero start.

    apply_op(v) must be the SPD system matrix times v; diag is the
    preconditioner diagonal. Convergence is measured in the preconditioned
    residual norm sqrt(r' diag^-1 r) relative to its starting value. Returns
    the best iterate seen and an info dict with the residual history.
    """
    if np.any(diag <= 0):
        raise NumericalError("preconditioner diagonal must be positive")
    x = np.zeros_like(b)
    r = b.copy()
    z = r / diag
    rz = float(r @ z)
    norm0 = float(np.sqrt(max(rz, 0.0)))
    history = [norm0]
    if norm0 == 0.0:
        return x, {"iterations": 0, "converged": True,
                   "relative_residual": 0.0, "residual_history": history}
    best_norm = norm0
    best_x = x.copy()
    target = tol * norm0
    p = z.copy()
    converged = False
    iterations = 0
    for _ in range(max_iters):
        Ap = apply_op(p)
        pAp = float(p @ Ap)
        if pAp <= 0 or not np.isfinite(pAp):
            raise NumericalError(
                f"conjugate gradients met a non-positive curvature {pAp:.3e}; "
                f"the system is not positive definite"
            )
        step = rz / pAp
        x += step * p
        r -= step * Ap
        z = r / diag
        rz_new = float(r @ z)
        norm = float(np.sqrt(max(rz_new, 0.0)))
        history.append(norm)
        iterations += 1
        if norm < best_norm:
            best_norm = norm
            best_x = x.copy()
        if norm <= target:
            converged = True
            break
        beta = rz_new / rz
        p = z + beta * p
        rz = rz_new
    return best_x, {"iterations": iterations, "converged": converged,
                    "relative_residual": best_norm / norm0,
                    "residual_history": history}


def solve_band(L: LaplacianOperator, penalty: PenaltyFilter, band_plan,
               values, config: SynthesisConfig):
    """Recover one band's full-length signal from its samples.

    An empty band short-circuits to the zero signal. Otherwise runs the
    preconditioned CG on the regularized system; each iteration costs one
    penalty application (degree-many Laplacian products).
    """
    n = L.n_vertices
    if band_plan.n == 0:
        return np.zeros(n), {"iterations": 0, "converged": True,
                             "relative_residual": 0.0, "residual_history": [0.0]}
    verts = band_plan.vertices
    omega = np.maximum(band_plan.omega, _OMEGA_FLOOR)
    kappa = config.kappa
    inv_omega = kappa / omega
    alpha = penalty.alpha
    ridge = penalty.ridge
    lmax = penalty.lambda_max

    def apply_op(v):
        out = chebyshev_apply(L, alpha, v, lmax) + ridge * v
        out[verts] += inv_omega * v[verts]
        return out

    b = np.zeros(n)
    b[verts] = inv_omega * values
    diag = np.ones(n)
    diag[verts] += inv_omega
    return pcg_solve(apply_op, b, diag, config.cg_tolerance, config.cg_max_iters)


def synthesize_fast(L: LaplacianOperator, design, plan: SamplingPlan,
                    coeffs: AnalysisCoefficients,
                    config: SynthesisConfig | None = None,
                    threads: int = 1):
    """Reconstruct the signal from per-band samples.

    Solves one regularized least-squares system per band (optionally in a
    thread pool), sums the band reconstructions, and adds back the stored
    mean in adapted mode. Returns (signal, report); the report carries
    per-band solver statistics and flags bands that stopped short of the
    tolerance.
    """
    if config is None:
        config = SynthesisConfig()
    if not (coeffs.n_bands == design.M == plan.n_bands):
        raise InputError(
            f"coefficients ({coeffs.n_bands} bands), design ({design.M}) and "
            f"plan ({plan.n_bands}) disagree"
        )
    penalties = [build_penalty(f, config.penalty_kind) for f in design.filters]
    jobs = []
    for m, (verts, values) in enumerate(coeffs.bands):
        band_plan = plan.bands[m]
        if len(verts) != band_plan.n or not np.array_equal(verts, band_plan.vertices):
            raise InputError(f"band {m + 1} coefficients do not match the plan")
        jobs.append((penalties[m], band_plan, values))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda j: solve_band(L, j[0], j[1], j[2], config), jobs))
    else:
        results = [solve_band(L, p, bp, v, config) for p, bp, v in jobs]
    total = np.zeros(L.n_vertices)
    band_reports = []
    for m, (z, info) in enumerate(results):
        total += z
        band_reports.append({
            "band": m + 1,
            "n_samples": int(plan.bands[m].n),
            "iterations": info["iterations"],
            "converged": info["converged"],
            "relative_residual": info["relative_residual"],
        })
    if coeffs.mean is not None:
        total += coeffs.mean
    report = {
        "bands": band_reports,
        "converged": all(b["converged"] for b in band_reports),
        "penalty_kind": config.penalty_kind,
        "kappa": config.kappa,
        "cg_tolerance": config.cg_tolerance,
        "cg_max_iters": config.cg_max_iters,
    }
    return total, report
