"""Exact transform path for small graphs.

Dense eigendecomposition, band partitions of the spectrum, uniqueness-set
partitions of the vertex set, and the resulting critically sampled analysis
and synthesis operators. Everything here is O(N^3)-ish and guarded by a
vertex-count cap; large graphs take the polynomial path instead.
"""

import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import defaults
from .coeffs import AnalysisCoefficients
from .graph import LaplacianOperator, validate_signal
from .util import InputError, NumericalError

_PIVOT_TOL = 1e-12
_CERTIFICATE_TOL = 1e-10


@dataclass
class EigenDecomposition:
    """Ascending eigenvalues and orthonormal eigenvector columns.

    Sign convention: each eigenvector's first nonzero component is positive,
    so repeated runs and platforms agree.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.vectors.shape[0]


def dense_eigendecomposition(L: LaplacianOperator,
                             cap: int = defaults.MAX_DENSE_N) -> EigenDecomposition:
    """Full symmetric eigendecomposition; refuses graphs beyond the cap."""
    n = L.n_vertices
    if n > cap:
        raise InputError(
            f"graph has {n} vertices; the exact path caps at {cap} (use the fast path)"
        )
    dense = L.matrix.toarray()
    dense = 0.5 * (dense + dense.T)
    lam, U = scipy.linalg.eigh(dense)
    lam = np.maximum(lam, 0.0)
    absU = np.abs(U)
    tol = 1e-12 * absU.max(axis=0)
    first = (absU > tol[None, :]).argmax(axis=0)
    flip = U[first, np.arange(n)] < 0
    U[:, flip] *= -1.0
    return EigenDecomposition(eigenvalues=lam, vectors=U)


@dataclass
class SpectralPartition:
    """Eigenvalue index sets per band: band m holds tau_{m-1} <= lambda < tau_m."""

    band_ends: np.ndarray
    indices: list

    @property
    def n_bands(self) -> int:
        return len(self.indices)


def partition_spectrum(eig: EigenDecomposition, band_ends) -> SpectralPartition:
    """Split eigenvalue indices into bands by half-open intervals."""
    ends = np.asarray(band_ends, dtype=np.float64)
    if ends.ndim != 1 or len(ends) < 2:
        raise InputError("band_ends must hold tau_0..tau_M with M >= 1")
    if np.any(np.diff(ends) <= 0):
        raise InputError("band ends must be strictly increasing")
    if ends[0] != 0.0:
        raise InputError(f"tau_0 must be 0, got {ends[0]}")
    if ends[-1] <= eig.eigenvalues[-1]:
        raise InputError(
            f"top band end {ends[-1]} must exceed the largest eigenvalue "
            f"{eig.eigenvalues[-1]}"
        )
    M = len(ends) - 1
    band_of = np.searchsorted(ends[1:-1], eig.eigenvalues, side="right")
    indices = [np.flatnonzero(band_of == m) for m in range(M)]
    for m, idx in enumerate(indices):
        if len(idx) == 0:
            warnings.warn(f"band {m + 1} of {M} contains no eigenvalues")
    return SpectralPartition(band_ends=ends, indices=indices)


def band_ends_from_eigenvalues(eigenvalues, M: int,
                               spacing: str = "adapted-log") -> np.ndarray:
    """Band ends straight from a known sorted spectrum (exact path).

    Adapted spacings cut at index quantiles (log: cumulative targets
    N * 2^{m-M}; linear: N * m/M) and place each interior end at the midpoint
    of the adjacent eigenvalue gap. Uniform spacings split the value range.
    The top end sits just above the largest eigenvalue.
    """
    lam = np.sort(np.asarray(eigenvalues, dtype=np.float64))
    n = len(lam)
    lmax = float(lam[-1])
    if M < 1:
        raise InputError(f"need M >= 1, got {M}")
    ends = np.empty(M + 1)
    ends[0] = 0.0
    ends[M] = lmax * (1.0 + 1e-9) + 1e-15
    if M == 1:
        return ends
    m = np.arange(1, M)
    if spacing == "uniform-linear":
        ends[1:M] = lmax * m / M
    elif spacing == "uniform-log":
        ends[1:M] = lmax * 2.0 ** (m.astype(float) - M)
    elif spacing in ("adapted-linear", "adapted-log"):
        if spacing == "adapted-linear":
            targets = n * m / M
        else:
            targets = n * 2.0 ** (m.astype(float) - M)
        cuts = np.clip(np.round(targets).astype(int), 1, n - 1)
        ends[1:M] = 0.5 * (lam[cuts - 1] + lam[cuts])
    else:
        raise InputError(f"unknown spacing {spacing!r}")
    if np.any(np.diff(ends) <= 0):
        raise InputError(
            f"cannot place {M} distinct band ends on this spectrum "
            f"(repeated or collapsed eigenvalues)"
        )
    return ends


# ---------------------------------------------------------------------------
# uniqueness sets


def greedy_uniqueness_set(eig: EigenDecomposition, band_indices,
                          candidates=None, priority=None,
                          rng=None) -> np.ndarray:
    """Greedy vertex rows making U[S, R] nonsingular with |S| = |R|.

    Each step selects the candidate row of U[:, R] with the largest component
    orthogonal to the span of the rows already selected (ties resolve to the
    lowest vertex index). Rows listed in ``priority`` are preferred while any
    of them can still extend the selection; ``rng`` randomizes near-ties for
    restart diversity. Raises NumericalError if the best residual drops below
    1e-12 before |R| rows are found.
    """
    R = np.asarray(band_indices, dtype=int)
    k = len(R)
    if k == 0:
        return np.zeros(0, dtype=int)
    if candidates is None:
        candidates = np.arange(eig.n_vertices)
    cand = np.asarray(candidates, dtype=int)
    if k > len(cand):
        raise InputError(f"{len(cand)} candidate rows cannot span {k} columns")
    res = eig.vectors[cand][:, R].copy()
    available = np.ones(len(cand), dtype=bool)
    if priority is not None:
        preferred = np.isin(cand, priority)
    else:
        preferred = np.zeros(len(cand), dtype=bool)
    chosen = []
    for _ in range(k):
        norms2 = np.einsum("ij,ij->i", res, res)
        norms2[~available] = -1.0
        pick_from = norms2
        if preferred.any():
            masked = np.where(preferred, norms2, -1.0)
            if masked.max() > _PIVOT_TOL ** 2:
                pick_from = masked
        if rng is None:
            i = int(np.argmax(pick_from))
        else:
            best = pick_from.max()
            near = np.flatnonzero(pick_from >= best * (1.0 - 1e-8))
            i = int(near[rng.integers(len(near))])
        if norms2[i] <= _PIVOT_TOL ** 2:
            raise NumericalError(
                f"greedy selection stalled at {len(chosen)} of {k} rows "
                f"(residual {np.sqrt(max(norms2[i], 0.0)):.2e})"
            )
        v = res[i] / np.sqrt(norms2[i])
        res -= np.outer(res @ v, v)
        available[i] = False
        preferred[i] = False
        chosen.append(int(cand[i]))
    return np.sort(np.array(chosen, dtype=int))


@dataclass
class VertexPartition:
    """Per-band vertex sets; set m is a uniqueness set for band m's eigenspace."""

    sets: list

    @property
    def n_bands(self) -> int:
        return len(self.sets)


def _min_singular_value(mat: np.ndarray) -> float:
    if mat.size == 0:
        return np.inf
    return float(np.linalg.svd(mat, compute_uv=False)[-1])


def _resolve_overlap(U, pool, C1, C2, g1, g2):
    """Clear gamma_1/gamma_2 overlap by chains of feasible row swaps.

    Feasibility of swapping row v out of a basis for row u is a rank-one
    determinant update: the tableau entry (U[pool] @ inv(U[basis]))[u, pos(v)]
    must exceed the pivot tolerance. Chains run from a free row to an
    overlapped row (shortest first, found by BFS) and all swaps on a chain
    are applied together; the rebuilt bases are then recertified.
    """
    g1, g2 = set(int(v) for v in g1), set(int(v) for v in g2)
    pool = np.asarray(pool, dtype=int)
    pos_in_pool = {int(v): i for i, v in enumerate(pool)}
    guard = len(g1 & g2) + 2
    while g1 & g2:
        guard -= 1
        if guard < 0:
            raise NumericalError("pivot-chain exchange failed to shrink the overlap")
        overlap = g1 & g2
        rows1 = sorted(g1)
        rows2 = sorted(g2)
        inv1 = np.linalg.inv(U[np.ix_(rows1, C1)]) if rows1 else np.zeros((0, 0))
        inv2 = np.linalg.inv(U[np.ix_(rows2, C2)]) if rows2 else np.zeros((0, 0))
        tab1 = np.abs(U[np.ix_(pool, C1)] @ inv1) > _PIVOT_TOL
        tab2 = np.abs(U[np.ix_(pool, C2)] @ inv2) > _PIVOT_TOL
        free = [int(v) for v in pool if v not in g1 and v not in g2]
        parent = {v: None for v in free}
        queue = deque(free)
        target = None
        while queue and target is None:
            u = queue.popleft()
            for basis, rows, tab in ((1, rows1, tab1), (2, rows2, tab2)):
                members = g1 if basis == 1 else g2
                if u in members:
                    continue
                for j in np.flatnonzero(tab[pos_in_pool[u]]):
                    v = rows[j]
                    if v in parent:
                        continue
                    parent[v] = (u, basis)
                    if v in overlap:
                        target = v
                        break
                    queue.append(v)
                if target is not None:
                    break
        if target is None:
            raise NumericalError("no feasible pivot chain between free and overlapped rows")
        v = target
        while parent[v] is not None:
            u, basis = parent[v]
            basis_set = g1 if basis == 1 else g2
            basis_set.remove(v)
            basis_set.add(u)
            v = u
        for basis_set, C in ((g1, C1), (g2, C2)):
            rows = sorted(basis_set)
            if _min_singular_value(U[np.ix_(rows, C)]) < _CERTIFICATE_TOL:
                raise NumericalError("pivot chain produced a near-singular basis")
    return (np.array(sorted(g1), dtype=int), np.array(sorted(g2), dtype=int))


def _split_pool(eig, pool, C1, C2, base_seed, max_restarts):
    """Pick gamma_1 from the pool with both U[g1, C1] and U[pool\\g1, C2] nonsingular."""
    last_error = None
    for attempt in range(max_restarts + 1):
        rng = None if attempt == 0 else np.random.default_rng(base_seed + attempt)
        try:
            g1 = greedy_uniqueness_set(eig, C1, candidates=pool, rng=rng)
            complement = np.setdiff1d(pool, g1, assume_unique=True)
            g2 = greedy_uniqueness_set(eig, C2, candidates=pool,
                                       priority=complement, rng=rng)
            g1, g2 = _resolve_overlap(eig.vectors, pool, C1, C2, g1, g2)
            for rows, cols in ((g1, C1), (g2, C2)):
                sub = eig.vectors[np.ix_(rows, cols)]
                if _min_singular_value(sub) < _CERTIFICATE_TOL:
                    raise NumericalError("uniqueness-set certificate failed")
            return g1
        except NumericalError as exc:
            last_error = exc
    raise NumericalError(
        f"could not split the vertex pool after {max_restarts} restarts: {last_error}"
    )


def partition_uniqueness_sets(eig: EigenDecomposition,
                              partition: SpectralPartition,
                              seed: int = 0,
                              max_restarts: int = 10) -> VertexPartition:
    """Partition the vertices into per-band uniqueness sets.

    Band by band: a greedy gamma_1 for the band's eigenvectors and a
    complement-seeded greedy gamma_2 for the remaining bands, then pivot-chain
    exchanges until the two are disjoint (they then tile the pool). The last
    band inherits the final pool, certified by the previous step. Randomized
    greedy restarts cover numerically stuck instances.
    """
    M = partition.n_bands
    pool = np.arange(eig.n_vertices)
    total = sum(len(idx) for idx in partition.indices)
    if total != eig.n_vertices:
        raise InputError("spectral partition must cover every eigenvalue exactly once")
    sets = [None] * M
    for m in range(M):
        R1 = partition.indices[m]
        if m == M - 1:
            sets[m] = pool.copy()
            break
        if len(R1) == 0:
            sets[m] = np.zeros(0, dtype=int)
            continue
        R2 = np.concatenate([partition.indices[j] for j in range(m + 1, M)])
        if len(R2) == 0:
            sets[m] = pool.copy()
            pool = np.zeros(0, dtype=int)
            continue
        g1 = _split_pool(eig, pool, R1, R2, seed + 1000 * m, max_restarts)
        sets[m] = g1
        pool = np.setdiff1d(pool, g1, assume_unique=True)
    for m in range(M):
        if sets[m] is None:
            sets[m] = np.zeros(0, dtype=int)
        sub = eig.vectors[np.ix_(sets[m], partition.indices[m])]
        if sub.shape[0] != sub.shape[1]:
            raise NumericalError(f"band {m + 1} vertex set size mismatch")
        if _min_singular_value(sub) < _CERTIFICATE_TOL:
            raise NumericalError(f"band {m + 1} certificate below tolerance")
    return VertexPartition(sets=sets)


# ---------------------------------------------------------------------------
# transform operators


def exact_analyze(eig: EigenDecomposition, spectral: SpectralPartition,
                  vertex: VertexPartition, f: np.ndarray) -> AnalysisCoefficients:
    """Band projections sampled on the uniqueness sets.

    y_m = (U_{R_m} U_{R_m}^T f) restricted to V_m.
    """
    f = validate_signal(eig.n_vertices, f)
    bands = []
    for R, V in zip(spectral.indices, vertex.sets):
        if len(R) == 0:
            bands.append((V.copy(), np.zeros(0)))
            continue
        spectrum_side = eig.vectors[:, R].T @ f
        bands.append((V.copy(), eig.vectors[np.ix_(V, R)] @ spectrum_side))
    return AnalysisCoefficients(bands=bands)


def exact_synthesize(eig: EigenDecomposition, spectral: SpectralPartition,
                     vertex: VertexPartition,
                     coeffs: AnalysisCoefficients) -> np.ndarray:
    """Invert band by band: f = sum_m U_{R_m} solve(U_{V_m, R_m}, y_m)."""
    if coeffs.n_bands != spectral.n_bands:
        raise InputError("coefficient band count does not match the partition")
    out = np.zeros(eig.n_vertices)
    for R, V, (stored_v, y) in zip(spectral.indices, vertex.sets, coeffs.bands):
        if len(R) == 0:
            continue
        if len(stored_v) != len(V) or np.any(stored_v != V):
            raise InputError("coefficient vertices do not match the vertex partition")
        z = scipy.linalg.solve(eig.vectors[np.ix_(V, R)], y)
        out += eig.vectors[:, R] @ z
    if coeffs.mean is not None:
        out += coeffs.mean
    return out


def atom(eig: EigenDecomposition, spectral: SpectralPartition,
         band: int, vertex: int) -> np.ndarray:
    """Analysis atom h_m(L) delta_i for ideal band filters (not normalized)."""
    R = spectral.indices[band]
    return eig.vectors[:, R] @ eig.vectors[vertex, R]


def build_dictionary(eig: EigenDecomposition, spectral: SpectralPartition,
                     vertex: VertexPartition):
    """All atoms as unit-normalized columns, plus (band, vertex) labels."""
    blocks = []
    labels = []
    for m, (R, V) in enumerate(zip(spectral.indices, vertex.sets)):
        if len(R) == 0:
            continue
        blocks.append(eig.vectors[:, R] @ eig.vectors[np.ix_(V, R)].T)
        labels.extend((m, int(i)) for i in V)
    D = np.concatenate(blocks, axis=1)
    norms = np.linalg.norm(D, axis=0)
    if np.any(norms == 0):
        raise NumericalError("zero-norm atom; the vertex partition is inconsistent")
    return D / norms, labels


def omp_sparse_code(dictionary: np.ndarray, f: np.ndarray, n_iters: int):
    """Orthogonal matching pursuit with per-iteration least-squares refits.

    Selection by maximum absolute correlation with the residual; the selected
    support is refit at every step. Inner refits ride a growing Cholesky
    factor of the support Gram matrix; the returned coefficients come from a
    final dense least-squares solve on the support for accuracy.

    Returns (coefficients, residual_norms) where coefficients is dense over
    atoms and residual_norms[t] is the residual after t iterations.
    """
    D = np.asarray(dictionary, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    n, P = D.shape
    if not 1 <= n_iters <= P:
        raise InputError(f"iteration count must lie in 1..{P}, got {n_iters}")
    support = []
    chol = np.zeros((n_iters, n_iters))
    proj = np.zeros(n_iters)  # forward-substituted D_S^T f
    r = f.copy()
    norms = [float(np.linalg.norm(f))]
    selected = np.zeros(P, dtype=bool)
    for t in range(n_iters):
        corr = D.T @ r
        corr[selected] = 0.0
        i = int(np.argmax(np.abs(corr)))
        if abs(corr[i]) <= 1e-14 * max(norms[0], 1.0):
            break
        d_new = D[:, i]
        g = D[:, support].T @ d_new if support else np.zeros(0)
        w = scipy.linalg.solve_triangular(chol[:t, :t], g, lower=True) if t else g
        head = 1.0 - float(w @ w)
        if head <= 1e-12:
            break  # new atom numerically dependent on the support
        chol[t, :t] = w
        chol[t, t] = np.sqrt(head)
        support.append(i)
        selected[i] = True
        proj[t] = (float(d_new @ f) - float(w @ proj[:t])) / chol[t, t]
        coef = scipy.linalg.solve_triangular(chol[:t + 1, :t + 1], proj[:t + 1],
                                             lower=True, trans="T")
        r = f - D[:, support] @ coef
        norms.append(float(np.linalg.norm(r)))
    coefficients = np.zeros(P)
    if support:
        final, *_ = np.linalg.lstsq(D[:, support], f, rcond=None)
        coefficients[support] = final
        norms[-1] = float(np.linalg.norm(f - D[:, support] @ final))
    return coefficients, np.asarray(norms)
