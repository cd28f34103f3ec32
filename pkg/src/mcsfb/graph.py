"""Graph containers, Laplacian operators, generators, and file loaders.

Vertices are indexed 0..N-1 in memory; the file formats use 1-based indices.
"""

import threading
import warnings

import numpy as np
import scipy.sparse as sp
from scipy.io import mmread
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import eigsh
from scipy.spatial import cKDTree

from .util import InputError, array_digest

_SYMMETRY_RTOL = 1e-12


class Graph:
    """Undirected weighted graph held as a symmetric CSR adjacency matrix.

    Construction validates the invariants every routine downstream relies on:
    symmetry, positive weights, no self-loops, canonical (sorted, deduplicated)
    sparse storage.
    """

    def __init__(self, adjacency, coords=None):
        adjacency = sp.csr_array(adjacency, dtype=np.float64)
        if adjacency.shape[0] != adjacency.shape[1]:
            raise InputError(f"adjacency must be square, got shape {adjacency.shape}")
        adjacency.sum_duplicates()
        adjacency.eliminate_zeros()
        adjacency.sort_indices()
        diag = adjacency.diagonal()
        if np.any(diag != 0):
            vertex = int(np.flatnonzero(diag)[0])
            raise InputError(f"self-loop at vertex {vertex} is not allowed")
        asym = abs(adjacency - adjacency.T)
        scale = float(np.max(np.abs(adjacency.data))) if adjacency.nnz else 1.0
        if asym.nnz and asym.max() > _SYMMETRY_RTOL * scale:
            raise InputError("adjacency matrix is not symmetric")
        if adjacency.nnz and np.any(adjacency.data <= 0):
            raise InputError("edge weights must be positive")
        self.adjacency = adjacency
        if coords is not None:
            coords = np.asarray(coords, dtype=np.float64)
            if coords.shape[0] != adjacency.shape[0]:
                raise InputError("coords length does not match vertex count")
        self.coords = coords

    @classmethod
    def from_edges(cls, n_vertices, edges, coords=None):
        """Build from an iterable of (i, j, w) with 0-based endpoints.

        Duplicate occurrences of the same edge are summed.
        """
        edges = list(edges)
        if edges:
            ii = np.array([e[0] for e in edges] + [e[1] for e in edges])
            jj = np.array([e[1] for e in edges] + [e[0] for e in edges])
            ww = np.array([e[2] for e in edges] * 2, dtype=np.float64)
        else:
            ii = jj = np.zeros(0, dtype=int)
            ww = np.zeros(0)
        adj = sp.coo_array((ww, (ii, jj)), shape=(n_vertices, n_vertices))
        return cls(adj.tocsr(), coords=coords)

    @property
    def n_vertices(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return self.adjacency.nnz // 2

    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def digest(self) -> str:
        a = self.adjacency
        return array_digest(np.array([self.n_vertices]), a.indptr, a.indices, a.data)


class LaplacianOperator:
    """Sparse Laplacian with a thread-safe matvec counter.

    The counter tallies single-vector products: applying the operator to an
    N x J block counts as J. ``lambda_max_estimate`` stays None until
    :func:`estimate_lambda_max` runs.
    """

    def __init__(self, matrix, variant: str):
        matrix = sp.csr_array(matrix, dtype=np.float64)
        matrix.sort_indices()
        self.matrix = matrix
        self.variant = variant
        self.lambda_max_estimate = None
        self._count = 0
        self._lock = threading.Lock()

    @property
    def n_vertices(self) -> int:
        return self.matrix.shape[0]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        cols = 1 if x.ndim == 1 else x.shape[1]
        with self._lock:
            self._count += cols
        return self.matrix @ x

    @property
    def matvec_count(self) -> int:
        return self._count

    def reset_matvec_count(self) -> None:
        with self._lock:
            self._count = 0

    def require_lambda_max(self) -> float:
        if self.lambda_max_estimate is None:
            raise ValueError("lambda_max_estimate is unset; run estimate_lambda_max first")
        return self.lambda_max_estimate


def build_laplacian(graph: Graph, variant: str = "combinatorial") -> LaplacianOperator:
    """Assemble the graph Laplacian.

    Args:
        graph: source graph.
        variant: "combinatorial" for D - W, "normalized" for
            I - D^{-1/2} W D^{-1/2}.
    """
    adj = graph.adjacency
    deg = graph.degrees()
    if variant == "combinatorial":
        lap = sp.diags_array(deg, format="csr") - adj
    elif variant == "normalized":
        if np.any(deg == 0):
            vertex = int(np.flatnonzero(deg == 0)[0])
            raise InputError(
                f"vertex {vertex} is isolated; the normalized Laplacian is undefined"
            )
        inv_sqrt = 1.0 / np.sqrt(deg)
        scaled = adj.multiply(inv_sqrt[:, None]).multiply(inv_sqrt[None, :])
        lap = sp.eye_array(graph.n_vertices, format="csr") - sp.csr_array(scaled)
    else:
        raise InputError(f"unknown Laplacian variant {variant!r}")
    return LaplacianOperator(sp.csr_array(lap), variant)


def estimate_lambda_max(L: LaplacianOperator, iters: int = 50, seed: int = 0) -> float:
    """Upper estimate of the largest Laplacian eigenvalue.

    Seeded power iterations warm-start a Lanczos refinement; the converged
    value is inflated by 1.01 so polynomial domains [0, lambda_max] cover the
    true spectrum, and edgeless graphs floor at 1e-12. The estimate is stored
    on ``L``.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(L.n_vertices)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = L.matvec(x)
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            lam = 0.0
            break
        lam = norm
        x = y / norm
    if lam > 0.0 and L.n_vertices >= 2:
        # the norm ratio approaches lambda_max from below and can stall inside
        # the 1% inflation margin when the top eigenvalues cluster
        try:
            top = eigsh(L.matrix, k=1, which="LA", v0=x,
                        return_eigenvectors=False)
            lam = max(lam, float(top[0]))
        except Exception:
            pass
    estimate = max(1.01 * lam, 1e-12)
    L.lambda_max_estimate = estimate
    return estimate


def validate_signal(graph_or_n, f) -> np.ndarray:
    """Check a vertex signal for shape and finiteness; returns it as float64."""
    n = graph_or_n if isinstance(graph_or_n, int) else graph_or_n.n_vertices
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 1 or f.shape[0] != n:
        raise InputError(f"signal has shape {f.shape}, expected ({n},)")
    if not np.all(np.isfinite(f)):
        raise InputError("signal contains non-finite values")
    return f


# ---------------------------------------------------------------------------
# generators


def generate_graph(kind: str, seed: int = 0, **params) -> Graph:
    """Build a named family of test graphs.

    Kinds and their parameters:
        ring: n
        path: n
        random_sensor: n, k (nearest neighbors, default 6)
        community: n, communities, p_in, p_out
        grid_from_mask: mask (2-D boolean array, 8-neighbor stencil)

    Randomized families are seeded and keep only the largest connected
    component (with a warning if anything was discarded).
    """
    if kind == "ring":
        return _gen_ring(int(params["n"]))
    if kind == "path":
        return _gen_path(int(params["n"]))
    if kind == "random_sensor":
        return _gen_random_sensor(int(params["n"]), int(params.get("k", 6)), seed)
    if kind == "community":
        return _gen_community(
            int(params["n"]),
            int(params.get("communities", 0)) or None,
            float(params.get("p_in", 0.2)),
            float(params.get("p_out", 0.01)),
            seed,
        )
    if kind == "grid_from_mask":
        return _gen_grid_from_mask(np.asarray(params["mask"], dtype=bool))
    raise InputError(f"unknown graph kind {kind!r}")


def _gen_ring(n: int) -> Graph:
    if n < 3:
        raise InputError("ring needs n >= 3")
    edges = [(i, (i + 1) % n, 1.0) for i in range(n)]
    theta = 2.0 * np.pi * np.arange(n) / n
    coords = 0.5 + 0.5 * np.column_stack([np.cos(theta), np.sin(theta)])
    return Graph.from_edges(n, edges, coords=coords)


def _gen_path(n: int) -> Graph:
    if n < 2:
        raise InputError("path needs n >= 2")
    edges = [(i, i + 1, 1.0) for i in range(n - 1)]
    coords = np.column_stack([np.linspace(0.0, 1.0, n), np.zeros(n)])
    return Graph.from_edges(n, edges, coords=coords)


def _gen_random_sensor(n: int, k: int, seed: int) -> Graph:
    if n < 2:
        raise InputError("random_sensor needs n >= 2")
    rng = np.random.default_rng(seed)
    coords = rng.random((n, 2))
    tree = cKDTree(coords)
    kk = min(k + 1, n)  # cannot ask for more neighbors than points
    dist, idx = tree.query(coords, k=kk)
    dist, idx = dist[:, 1:], idx[:, 1:]
    sigma = float(dist.mean())
    pairs = {}
    for i in range(n):
        for d, j in zip(dist[i], idx[i]):
            key = (min(i, int(j)), max(i, int(j)))
            pairs.setdefault(key, float(np.exp(-d * d / (2.0 * sigma * sigma))))
    edges = [(i, j, w) for (i, j), w in pairs.items()]
    return _largest_component(Graph.from_edges(n, edges, coords=coords))


def _gen_community(n, communities, p_in, p_out, seed) -> Graph:
    rng = np.random.default_rng(seed)
    if communities is None:
        communities = max(2, int(round(np.sqrt(n) / 2.0)))
    member = np.repeat(np.arange(communities), np.diff(
        np.round(np.linspace(0, n, communities + 1)).astype(int)))
    same = member[:, None] == member[None, :]
    prob = np.where(same, p_in, p_out)
    hit = np.triu(rng.random((n, n)) < prob, k=1)
    ii, jj = np.nonzero(hit)
    edges = [(int(i), int(j), 1.0) for i, j in zip(ii, jj)]
    theta = 2.0 * np.pi * member / communities
    centers = 0.35 * np.column_stack([np.cos(theta), np.sin(theta)]) + 0.5
    coords = centers + 0.08 * rng.standard_normal((n, 2))
    return _largest_component(Graph.from_edges(n, edges, coords=coords))


def _gen_grid_from_mask(mask: np.ndarray) -> Graph:
    if mask.ndim != 2 or not mask.any():
        raise InputError("mask must be a 2-D boolean array with at least one True cell")
    ids = -np.ones(mask.shape, dtype=int)
    ids[mask] = np.arange(int(mask.sum()))
    edges = []
    # Offsets covering each undirected 8-neighbor pair exactly once.
    for di, dj in ((0, 1), (1, 0), (1, 1), (1, -1)):
        src = np.zeros_like(mask)
        dst = np.zeros_like(mask)
        si = slice(max(0, -di), mask.shape[0] - max(0, di))
        sj = slice(max(0, -dj), mask.shape[1] - max(0, dj))
        ti = slice(max(0, di), mask.shape[0] - max(0, -di))
        tj = slice(max(0, dj), mask.shape[1] - max(0, -dj))
        src[si, sj] = mask[si, sj] & mask[ti, tj]
        dst[ti, tj] = src[si, sj]
        for a, b in zip(ids[src], ids[dst]):
            edges.append((int(a), int(b), 1.0))
    rows, cols = np.nonzero(mask)
    coords = np.column_stack([
        cols / max(1, mask.shape[1] - 1),
        rows / max(1, mask.shape[0] - 1),
    ])
    return _largest_component(Graph.from_edges(int(mask.sum()), edges, coords=coords))


def _largest_component(graph: Graph) -> Graph:
    ncomp, labels = connected_components(graph.adjacency, directed=False)
    if ncomp == 1:
        return graph
    sizes = np.bincount(labels)
    keep = int(np.argmax(sizes))
    warnings.warn(
        f"graph has {ncomp} components; keeping the largest "
        f"({sizes[keep]} of {graph.n_vertices} vertices)"
    )
    sel = np.flatnonzero(labels == keep)
    sub = graph.adjacency[sel][:, sel]
    coords = graph.coords[sel] if graph.coords is not None else None
    return Graph(sub, coords=coords)


# ---------------------------------------------------------------------------
# signals for fixtures and demos


def generate_signal(graph: Graph, kind: str = "piecewise_smooth", seed: int = 0) -> np.ndarray:
    """Deterministic or seeded test signals on a graph.

    Kinds: "piecewise_smooth" (smooth patches with jumps, built from vertex
    coordinates), "smooth" (single low-order patch), "noise" (standard normal).
    """
    n = graph.n_vertices
    if kind == "noise":
        return np.random.default_rng(seed).standard_normal(n)
    if graph.coords is not None:
        x, y = graph.coords[:, 0].copy(), graph.coords[:, 1].copy()
        for axis in (x, y):
            span = axis.max() - axis.min()
            if span > 0:
                axis -= axis.min()
                axis /= span
    else:
        x = np.arange(n) / max(1, n - 1)
        y = np.zeros(n)
    if kind == "smooth":
        return 1.0 + np.sin(np.pi * x) * np.sin(np.pi * y) + 0.5 * x
    if kind == "piecewise_smooth":
        f = 0.6 + 0.8 * x * y + 0.3 * np.sin(2.0 * np.pi * x)
        inner = (x - 0.35) ** 2 + (y - 0.4) ** 2 < 0.12
        upper = x + y > 1.25
        f[inner] = 2.4 - 1.8 * x[inner] + 1.2 * y[inner]
        f[upper] = -1.5 + 2.2 * x[upper] ** 2 + 0.8 * y[upper]
        return f
    raise InputError(f"unknown signal kind {kind!r}")


# ---------------------------------------------------------------------------
# file formats


def load_graph(path: str) -> Graph:
    """Load a graph from Matrix Market or a whitespace edge list.

    Edge lists hold one ``i j w`` triple per line with 1-based vertex indices;
    lines starting with '#' or '%' are comments. Self-loops are dropped with a
    warning, duplicate edges are summed, asymmetric or nonpositive input is
    rejected.
    """
    with open(path) as fh:
        head = fh.read(64)
    if head.startswith("%%MatrixMarket"):
        return _load_matrix_market(path)
    return _load_edge_list(path)


def _load_matrix_market(path: str) -> Graph:
    try:
        mat = sp.coo_array(mmread(path))
    except Exception as exc:
        raise InputError(f"{path}: unreadable Matrix Market file ({exc})") from exc
    if mat.shape[0] != mat.shape[1]:
        raise InputError(f"{path}: matrix is not square: {mat.shape}")
    csr = sp.csr_array(mat)
    diag = csr.diagonal()
    if diag.any():
        warnings.warn(f"{path}: dropping self-loops on the diagonal")
        csr = sp.csr_array(csr - sp.diags_array(diag, format="csr"))
        csr.eliminate_zeros()
    asym = abs(csr - csr.T)
    scale = float(np.max(np.abs(csr.data))) if csr.nnz else 1.0
    if asym.nnz and asym.max() > _SYMMETRY_RTOL * scale:
        raise InputError(f"{path}: asymmetric adjacency matrix")
    if csr.nnz and np.any(csr.data <= 0):
        raise InputError(f"{path}: nonpositive edge weight")
    return Graph(csr)


def _load_edge_list(path: str) -> Graph:
    edges = []
    n = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line[0] in "#%":
                continue
            parts = line.split()
            if len(parts) != 3:
                raise InputError(f"{path}:{lineno}: expected 'i j w', got {line!r}")
            try:
                i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: could not parse {line!r}") from exc
            if i < 1 or j < 1:
                raise InputError(f"{path}:{lineno}: vertex indices are 1-based")
            if not np.isfinite(w) or w <= 0:
                raise InputError(f"{path}:{lineno}: edge weight must be positive, got {w}")
            if i == j:
                warnings.warn(f"{path}:{lineno}: dropping self-loop at vertex {i}")
                continue
            edges.append((i - 1, j - 1, w))
            n = max(n, i, j)
    if not edges:
        raise InputError(f"{path}: no edges found")
    return Graph.from_edges(n, edges)


def write_edge_list(graph: Graph, path: str) -> None:
    """Write the 1-based ``i j w`` edge list of a graph."""
    upper = sp.coo_array(sp.triu(graph.adjacency))
    with open(path, "w") as fh:
        for i, j, w in zip(upper.row, upper.col, upper.data):
            fh.write(f"{i + 1} {j + 1} {float(w)!r}\n")


def load_signal(path: str) -> np.ndarray:
    """Load a vertex signal: one real per line, or the first column of a CSV."""
    values = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line[0] in "#%":
                continue
            token = line.split(",")[0].strip() if "," in line else line.split()[0]
            try:
                values.append(float(token))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: not a number: {token!r}") from exc
    if not values:
        raise InputError(f"{path}: empty signal file")
    return np.asarray(values, dtype=np.float64)


def write_signal(values: np.ndarray, path: str) -> None:
    with open(path, "w") as fh:
        for v in np.asarray(values, dtype=np.float64):
            fh.write(f"{float(v)!r}\n")
