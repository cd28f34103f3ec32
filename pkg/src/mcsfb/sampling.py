"""Band-energy vertex sampling: weights, budgets, and the sampling plan."""

from dataclasses import dataclass

import numpy as np

from .chebyshev import (ChebyshevBasisCache, PolynomialFilter, apply_filter,
                        estimate_eigencount)
from .coeffs import AnalysisCoefficients
from .density import SpectralDensityEstimate
from .design import FilterBankDesign
from .graph import LaplacianOperator, validate_signal
from .util import InputError, array_digest


def compute_weights(cache: ChebyshevBasisCache, filt: PolynomialFilter) -> np.ndarray:
    """Sampling distribution of one band: squared row norms of h(L) X.

    Each entry is an unbiased estimate (up to the polynomial approximation)
    of the band energy a delta at that vertex carries. Returns the zero
    vector when the filtered block vanishes, which flags an empty band.
    """
    block = cache.filter_block(filt.alpha)
    w = np.einsum("ij,ij->i", block, block)
    total = float(w.sum())
    return w / total if total > 0 else w


def adapt_weights_to_signal(weights: np.ndarray,
                            filtered_signal: np.ndarray) -> np.ndarray:
    """Reweight a band distribution by log(1 + |filtered signal|), renormalized."""
    w = weights * np.log1p(np.abs(filtered_signal))
    total = float(w.sum())
    return w / total if total > 0 else np.zeros_like(w)


def _round_counts(raw: np.ndarray, n_total: int) -> np.ndarray:
    """Integer budgets summing to n_total, proportional to nonnegative scores.

    Overshoot comes off the top band; shortfall goes to the bottom band; a
    top band driven negative is zeroed with the excess removed from the
    lowest bands upward.
    """
    raw = np.maximum(np.asarray(raw, dtype=np.float64), 0.0)
    total = float(raw.sum())
    if total <= 0:
        raise InputError("every band scored zero; cannot allocate samples")
    counts = np.round(raw * (n_total / total)).astype(int)
    diff = int(counts.sum()) - n_total
    if diff > 0:
        counts[-1] -= diff
    elif diff < 0:
        counts[0] -= diff
    if counts[-1] < 0:
        excess = -int(counts[-1])
        counts[-1] = 0
        for m in range(len(counts)):
            take = min(int(counts[m]), excess)
            counts[m] -= take
            excess -= take
            if excess == 0:
                break
    return counts


def allocate_counts(cache: ChebyshevBasisCache, design: FilterBankDesign,
                    n_total: int, mode: str = "trace",
                    density: SpectralDensityEstimate | None = None,
                    filtered_norms=None) -> np.ndarray:
    """Per-band integer sample budgets summing to n_total.

    mode "trace" scores each band by the stochastic eigenvalue count of its
    filter; mode "cdf" scores by increments of the estimated cumulative
    distribution across the adjusted band ends. With filtered_norms given
    (signal-adapted), each score is additionally scaled by
    log(1 + ||h_m(L) f||).
    """
    if n_total < 0:
        raise InputError(f"n_total must be nonnegative, got {n_total}")
    if mode == "trace":
        raw = np.array([estimate_eigencount(cache, f) for f in design.filters])
    elif mode == "cdf":
        if density is None:
            raise InputError("mode 'cdf' needs the density estimate")
        ends = np.clip(design.adjusted_ends, 0.0, density.lambda_max)
        cdf = np.asarray(density.cdf(ends), dtype=np.float64)
        raw = density.n_vertices * np.diff(cdf)
    else:
        raise InputError(f"unknown count mode {mode!r}")
    if filtered_norms is not None:
        raw = np.maximum(raw, 0.0) * np.log1p(np.asarray(filtered_norms, dtype=np.float64))
    return _round_counts(raw, n_total)


def sample_without_replacement(weights: np.ndarray, n: int, seed: int) -> np.ndarray:
    """Draw n distinct indices with probability proportional to weights.

    Exponential race: each supported index gets key Exp(1)/w_i and the n
    smallest keys win. Zero-weight indices never win; n must not exceed the
    support size. Returns sorted indices.
    """
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0):
        raise InputError("weights must be nonnegative")
    support = w > 0
    if not 0 <= n <= int(support.sum()):
        raise InputError(
            f"cannot draw {n} of {int(support.sum())} supported indices"
        )
    if n == 0:
        return np.zeros(0, dtype=int)
    rng = np.random.default_rng(seed)
    u = 1.0 - rng.random(len(w))  # in (0, 1], keeps the log finite
    keys = np.full(len(w), np.inf)
    keys[support] = -np.log(u[support]) / w[support]
    order = np.argsort(keys, kind="stable")
    return np.sort(order[:n])


@dataclass
class BandPlan:
    n: int
    vertices: np.ndarray
    omega: np.ndarray  # sampling probabilities at the sampled vertices
    weights_digest: str


@dataclass
class SamplingPlan:
    """Where each band is sampled, with the probabilities the solve reweights by."""

    bands: list
    n_total: int
    adapted: bool
    mean: float | None
    seed: int

    @property
    def n_bands(self) -> int:
        return len(self.bands)

    def n_stored(self) -> int:
        return sum(b.n for b in self.bands) + (1 if self.adapted else 0)

    def to_json(self) -> dict:
        return {
            "n_total": self.n_total,
            "adapted": self.adapted,
            "mean": self.mean,
            "seed": self.seed,
            "bands": [
                {
                    "n": int(b.n),
                    "vertices": [int(v) for v in b.vertices],
                    "omega": [float(w) for w in b.omega],
                    "weights_digest": b.weights_digest,
                }
                for b in self.bands
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SamplingPlan":
        bands = [
            BandPlan(
                n=int(b["n"]),
                vertices=np.asarray(b["vertices"], dtype=int),
                omega=np.asarray(b["omega"], dtype=np.float64),
                weights_digest=str(b["weights_digest"]),
            )
            for b in obj["bands"]
        ]
        mean = obj.get("mean")
        return cls(bands=bands, n_total=int(obj["n_total"]),
                   adapted=bool(obj["adapted"]),
                   mean=None if mean is None else float(mean),
                   seed=int(obj["seed"]))


def build_sampling_plan(cache: ChebyshevBasisCache, design: FilterBankDesign,
                        n_total: int | None = None, signal=None, seed: int = 0,
                        count_mode: str = "trace",
                        density: SpectralDensityEstimate | None = None) -> SamplingPlan:
    """Sampling distributions, budgets, and sampled vertices for every band.

    Critical sampling by default: n_total = N stored values. In
    signal-adapted mode one slot is reserved for the signal mean (subtracted
    before filtering); band distributions and budgets are reweighted by the
    filtered signal energy. Per-band draws use derived seeds (seed XOR the
    1-based band index), so bands are independent and reproducible.
    """
    n = cache.n_vertices
    if n_total is None:
        n_total = n
    if n_total < 1:
        raise InputError(f"n_total must be at least 1, got {n_total}")
    adapted = signal is not None
    mean = None
    budget = n_total
    weights = [compute_weights(cache, f) for f in design.filters]
    filtered_norms = None
    if adapted:
        f = validate_signal(n, signal)
        mean = float(f.mean())
        budget = n_total - 1
        centered = f - mean
        filtered = [apply_filter(cache.L, filt, centered) for filt in design.filters]
        filtered_norms = [float(np.linalg.norm(g)) for g in filtered]
        weights = [adapt_weights_to_signal(w, g) for w, g in zip(weights, filtered)]
    counts = allocate_counts(cache, design, budget, mode=count_mode,
                             density=density, filtered_norms=filtered_norms)
    supports = np.array([int(np.count_nonzero(w)) for w in weights])
    if counts.sum() > supports.sum():
        raise InputError(
            f"budget {int(counts.sum())} exceeds the {int(supports.sum())} "
            f"supported vertices across bands"
        )
    # Respect per-band support: overflow moves to bands with slack, lowest first.
    counts = np.minimum(counts, supports)
    short = budget - int(counts.sum())
    for m in range(len(counts)):
        if short == 0:
            break
        room = int(supports[m] - counts[m])
        add = min(room, short)
        counts[m] += add
        short -= add
    bands = []
    for m, (w, c) in enumerate(zip(weights, counts)):
        verts = sample_without_replacement(w, int(c), seed ^ (m + 1))
        bands.append(BandPlan(n=int(c), vertices=verts, omega=w[verts],
                              weights_digest=array_digest(w)[:16]))
    return SamplingPlan(bands=bands, n_total=n_total, adapted=adapted,
                        mean=mean, seed=seed)


def fast_analyze(L: LaplacianOperator, design: FilterBankDesign,
                 plan: SamplingPlan, f) -> AnalysisCoefficients:
    """Filter then downsample: y_m = (h_m(L) f)[V_m].

    Costs M * K Laplacian products. In adapted mode the plan's stored mean is
    subtracted first and rides along as coefficient band 0.
    """
    f = validate_signal(L.n_vertices, f)
    if plan.n_bands != design.M:
        raise InputError("plan and design disagree on the number of bands")
    work = f - plan.mean if plan.adapted else f
    bands = []
    for filt, band in zip(design.filters, plan.bands):
        filtered = apply_filter(L, filt, work)
        bands.append((band.vertices.copy(), filtered[band.vertices]))
    return AnalysisCoefficients(bands=bands, mean=plan.mean if plan.adapted else None)
