"""Dense eigendecomposition path: spectral partitions, uniqueness sets,
perfect-reconstruction transform, dictionary atoms, OMP."""

import numpy as np
import pytest

import mcsfb
from mcsfb import (
    EigenDecomposition,
    InputError,
    NumericalError,
    SpectralPartition,
)

from conftest import make_operator, ring_eigenvalues


def complete_graph_operator(n):
    A = np.ones((n, n)) - np.eye(n)
    return make_operator(mcsfb.Graph(A))


def partition_for(eig, M, spacing="adapted-log"):
    ends = mcsfb.band_ends_from_eigenvalues(eig.eigenvalues, M, spacing)
    return mcsfb.partition_spectrum(eig, ends)


# --------------------------------------------------------- decomposition


def test_eigh_invariants(sensor100_op, sensor100_eig):
    eig = sensor100_eig
    n = eig.n_vertices
    U = eig.vectors
    assert np.max(np.abs(U.T @ U - np.eye(n))) <= 1e-9
    dense = sensor100_op.matrix.toarray()
    resid = dense @ U - U * eig.eigenvalues
    assert np.max(np.abs(resid)) <= 1e-8 * sensor100_op.lambda_max_estimate
    assert eig.eigenvalues[0] >= 0.0
    assert np.all(np.diff(eig.eigenvalues) >= 0.0)


def test_sign_convention(sensor100_eig):
    U = sensor100_eig.vectors
    colmax = np.max(np.abs(U), axis=0)
    for j in range(U.shape[1]):
        nz = np.nonzero(np.abs(U[:, j]) > 1e-12 * colmax[j])[0]
        assert U[nz[0], j] > 0.0


def test_single_edge_spectrum():
    L = make_operator(mcsfb.Graph.from_edges(2, [(0, 1, 1.0)]))
    eig = mcsfb.dense_eigendecomposition(L)
    assert np.allclose(eig.eigenvalues, [0.0, 2.0], atol=1e-12)
    assert np.allclose(eig.vectors[:, 0], np.full(2, 2 ** -0.5), atol=1e-12)


def test_complete_graph_spectrum():
    eig = mcsfb.dense_eigendecomposition(complete_graph_operator(4))
    assert np.allclose(eig.eigenvalues, [0.0, 4.0, 4.0, 4.0], atol=1e-12)


def test_ring_spectrum(ring8):
    eig = mcsfb.dense_eigendecomposition(make_operator(ring8))
    assert np.allclose(eig.eigenvalues, ring_eigenvalues(8), atol=1e-10)


def test_size_cap():
    L = make_operator(mcsfb.generate_graph("ring", n=12))
    with pytest.raises(InputError, match="caps at"):
        mcsfb.dense_eigendecomposition(L, cap=10)


# --------------------------------------------------------- partitions


def test_partition_single_band(sensor100_eig):
    part = partition_for(sensor100_eig, 1)
    assert len(part.indices) == 1
    assert len(part.indices[0]) == sensor100_eig.n_vertices


def test_partition_boundary_goes_up():
    eig = EigenDecomposition(np.array([0.0, 1.0, 2.0]), np.eye(3))
    part = mcsfb.partition_spectrum(eig, np.array([0.0, 1.0, 2.5]))
    assert list(part.indices[0]) == [0]
    assert list(part.indices[1]) == [1, 2]  # boundary eigenvalue moves up


def test_partition_validation():
    eig = EigenDecomposition(np.array([0.0, 1.0, 2.0]), np.eye(3))
    with pytest.raises(InputError):
        mcsfb.partition_spectrum(eig, np.array([0.1, 1.0, 2.5]))
    with pytest.raises(InputError):
        mcsfb.partition_spectrum(eig, np.array([0.0, 1.5, 1.5, 2.5]))
    with pytest.raises(InputError):
        mcsfb.partition_spectrum(eig, np.array([0.0, 1.0, 1.9]))


def test_partition_empty_band_warns():
    eig = EigenDecomposition(np.array([0.0, 0.1, 3.0]), np.eye(3))
    with pytest.warns(UserWarning, match="band 2 of 3"):
        mcsfb.partition_spectrum(eig, np.array([0.0, 1.0, 2.0, 3.5]))


def test_band_ends_octave_pattern():
    g = mcsfb.generate_graph("random_sensor", n=500, seed=2)
    L = make_operator(g)
    eig = mcsfb.dense_eigendecomposition(L)
    part = partition_for(eig, 5)
    sizes = [len(ix) for ix in part.indices]
    assert sizes == [31, 31, 63, 125, 250]
    assert sum(sizes) == g.n_vertices


def test_band_ends_infeasible():
    L = make_operator(mcsfb.Graph.from_edges(2, [(0, 1, 1.0)]))
    eig = mcsfb.dense_eigendecomposition(L)
    with pytest.raises(InputError, match="distinct band ends"):
        mcsfb.band_ends_from_eigenvalues(eig.eigenvalues, 5)


# --------------------------------------------------------- uniqueness sets


def test_greedy_whole_spectrum_returns_all(sensor100_eig):
    n = sensor100_eig.n_vertices
    sel = mcsfb.greedy_uniqueness_set(sensor100_eig, np.arange(n))
    assert np.array_equal(sel, np.arange(n))


def test_greedy_exact_tie_prefers_lowest_index():
    n = 4
    vectors = np.full((n, 1), n ** -0.5)  # exactly constant column
    eig = EigenDecomposition(np.array([0.0]), vectors)
    sel = mcsfb.greedy_uniqueness_set(eig, np.array([0]))
    assert list(sel) == [0]


def test_greedy_sets_are_well_conditioned():
    g = mcsfb.generate_graph("random_sensor", n=30, seed=1)
    eig = mcsfb.dense_eigendecomposition(make_operator(g))
    band = np.arange(10)
    for seed in range(20):
        rng = np.random.default_rng(seed)
        sel = mcsfb.greedy_uniqueness_set(eig, band, rng=rng)
        assert len(sel) == 10
        sub = eig.vectors[np.ix_(sel, band)]
        assert np.linalg.svd(sub, compute_uv=False)[-1] > 1e-10


def test_greedy_stalls_on_rank_deficiency():
    vectors = np.zeros((4, 2))
    vectors[:, 0] = 0.5  # second column identically zero: rank 1 < 2
    eig = EigenDecomposition(np.array([0.0, 1.0]), vectors)
    with pytest.raises(NumericalError, match="stalled"):
        mcsfb.greedy_uniqueness_set(eig, np.array([0, 1]))


def test_greedy_candidate_shortage():
    eig = EigenDecomposition(np.array([0.0, 1.0]), np.eye(4)[:, :2])
    with pytest.raises(InputError, match="cannot span"):
        mcsfb.greedy_uniqueness_set(eig, np.array([0, 1]), candidates=np.array([3]))


def test_vertex_partition_properties():
    g = mcsfb.generate_graph("random_sensor", n=20, seed=3)
    eig = mcsfb.dense_eigendecomposition(make_operator(g))
    part = partition_for(eig, 3)
    for seed in range(5):
        vp = mcsfb.partition_uniqueness_sets(eig, part, seed=seed)
        all_vertices = np.concatenate(vp.sets)
        assert len(all_vertices) == g.n_vertices  # critical sampling
        assert len(np.unique(all_vertices)) == g.n_vertices  # disjoint cover
        for m, ix in enumerate(part.indices):
            sel = vp.sets[m]
            assert len(sel) == len(ix)
            if len(ix) == 0:
                continue
            sub = eig.vectors[np.ix_(sel, ix)]
            assert np.linalg.svd(sub, compute_uv=False)[-1] > 1e-10


def test_vertex_partition_two_bands_complement(sensor100_eig):
    part = partition_for(sensor100_eig, 2)
    vp = mcsfb.partition_uniqueness_sets(sensor100_eig, part, seed=0)
    n = sensor100_eig.n_vertices
    comp = np.setdiff1d(np.arange(n), vp.sets[0])
    assert np.array_equal(np.sort(vp.sets[1]), comp)


def test_vertex_partition_single_band(sensor100_eig):
    part = partition_for(sensor100_eig, 1)
    vp = mcsfb.partition_uniqueness_sets(sensor100_eig, part, seed=0)
    assert np.array_equal(np.sort(vp.sets[0]), np.arange(sensor100_eig.n_vertices))


def test_complement_submatrices_share_smallest_singular_value():
    # For orthogonal U and |S| = |T|, sigma_min(U[S, T]) = sigma_min(U[S^c, T^c]).
    count = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(6, 41))
        g = mcsfb.generate_graph("random_sensor", n=n, seed=seed)
        eig = mcsfb.dense_eigendecomposition(make_operator(g))
        n = eig.n_vertices
        k = int(rng.integers(1, n))
        S = rng.choice(n, size=k, replace=False)
        T = rng.choice(n, size=k, replace=False)
        Sc = np.setdiff1d(np.arange(n), S)
        Tc = np.setdiff1d(np.arange(n), T)
        a = np.linalg.svd(eig.vectors[np.ix_(S, T)], compute_uv=False)[-1]
        if len(Sc):
            b = np.linalg.svd(eig.vectors[np.ix_(Sc, Tc)], compute_uv=False)[-1]
        else:
            b = a
        assert abs(a - b) <= 1e-8
        count += 1
    assert count == 100


def test_padded_determinant_identity():
    # |det [U[:, T] | I[:, S^c]]| equals |det U[S, T]|; nonsingularity of one
    # block therefore transfers to the other.
    for seed in range(30):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(4, 13))
        g = mcsfb.generate_graph("random_sensor", n=n, seed=seed)
        eig = mcsfb.dense_eigendecomposition(make_operator(g))
        n = eig.n_vertices
        k = int(rng.integers(1, n))
        S = np.sort(rng.choice(n, size=k, replace=False))
        T = np.sort(rng.choice(n, size=k, replace=False))
        Sc = np.setdiff1d(np.arange(n), S)
        padded = np.concatenate([eig.vectors[:, T], np.eye(n)[:, Sc]], axis=1)
        lhs = abs(np.linalg.det(padded))
        rhs = abs(np.linalg.det(eig.vectors[np.ix_(S, T)]))
        assert lhs == pytest.approx(rhs, abs=1e-10, rel=1e-8)


# --------------------------------------------------------- transform


def _bank(eig, M, seed=0):
    part = partition_for(eig, M)
    vp = mcsfb.partition_uniqueness_sets(eig, part, seed=seed)
    return part, vp


def test_analyze_constant_signal(sensor100_eig):
    part, vp = _bank(sensor100_eig, 3)
    n = sensor100_eig.n_vertices
    coeffs = mcsfb.exact_analyze(sensor100_eig, part, vp, np.ones(n))
    assert np.max(np.abs(coeffs.bands[0][1])) > 0.01
    for _, values in coeffs.bands[1:]:
        assert np.max(np.abs(values), initial=0.0) <= 1e-10


def test_analyze_isolates_eigenvector_bands(sensor100_eig):
    part, vp = _bank(sensor100_eig, 3)
    for m, ix in enumerate(part.indices):
        ell = ix[len(ix) // 2]
        f = sensor100_eig.vectors[:, ell]
        coeffs = mcsfb.exact_analyze(sensor100_eig, part, vp, f)
        for j, (_, values) in enumerate(coeffs.bands):
            if j != m:
                assert np.max(np.abs(values), initial=0.0) <= 1e-10


def test_analyze_matches_projector_oracle(sensor100_eig):
    part, vp = _bank(sensor100_eig, 4)
    rng = np.random.default_rng(7)
    f = rng.standard_normal(sensor100_eig.n_vertices)
    coeffs = mcsfb.exact_analyze(sensor100_eig, part, vp, f)
    U = sensor100_eig.vectors
    for m, (ix, sel) in enumerate(zip(part.indices, vp.sets)):
        verts, values = coeffs.bands[m]
        assert np.array_equal(verts, np.sort(sel))
        proj = U[:, ix] @ (U[:, ix].T @ f)
        assert np.allclose(values, proj[verts], atol=1e-10)
    assert coeffs.n_stored() == sensor100_eig.n_vertices


def test_roundtrip_perfect_reconstruction(sensor100_eig):
    for M in (2, 3, 5):
        part, vp = _bank(sensor100_eig, M)
        rng = np.random.default_rng(M)
        f = rng.standard_normal(sensor100_eig.n_vertices)
        coeffs = mcsfb.exact_analyze(sensor100_eig, part, vp, f)
        rec = mcsfb.exact_synthesize(sensor100_eig, part, vp, coeffs)
        assert mcsfb.nmse(rec, f) <= 1e-18


def test_synthesize_zero_coefficients(sensor100_eig):
    part, vp = _bank(sensor100_eig, 2)
    coeffs = mcsfb.exact_analyze(
        sensor100_eig, part, vp, np.zeros(sensor100_eig.n_vertices)
    )
    rec = mcsfb.exact_synthesize(sensor100_eig, part, vp, coeffs)
    assert np.max(np.abs(rec)) == 0.0


def test_synthesize_shape_validation(sensor100_eig):
    part, vp = _bank(sensor100_eig, 3)
    f = np.ones(sensor100_eig.n_vertices)
    coeffs = mcsfb.exact_analyze(sensor100_eig, part, vp, f)
    with pytest.raises(InputError, match="band count"):
        mcsfb.exact_synthesize(
            sensor100_eig,
            part,
            vp,
            mcsfb.AnalysisCoefficients(bands=coeffs.bands[:2], mean=None),
        )
    bad = [(v.copy(), y.copy()) for v, y in coeffs.bands]
    bad[0] = (bad[0][0][:-1], bad[0][1][:-1])
    with pytest.raises(InputError, match="vertices"):
        mcsfb.exact_synthesize(
            sensor100_eig, part, vp, mcsfb.AnalysisCoefficients(bands=bad, mean=None)
        )


def test_repeated_eigenvalue_band_is_basis_independent():
    # the triple eigenvalue of K_4 spans a 3-space: the band projector is
    # I - ones/4 no matter which internal basis eigh picked
    L = complete_graph_operator(4)
    eig = mcsfb.dense_eigendecomposition(L)
    part = mcsfb.partition_spectrum(eig, np.array([0.0, 2.0, 4.2]))
    U2 = eig.vectors[:, part.indices[1]]
    assert np.allclose(U2 @ U2.T, np.eye(4) - 0.25, atol=1e-12)
    vp = mcsfb.partition_uniqueness_sets(eig, part, seed=0)
    rng = np.random.default_rng(0)
    f = rng.standard_normal(4)
    coeffs = mcsfb.exact_analyze(eig, part, vp, f)
    rec = mcsfb.exact_synthesize(eig, part, vp, coeffs)
    assert mcsfb.nmse(rec, f) <= 1e-18


# --------------------------------------------------------- atoms and OMP


def test_atoms_partition_delta(sensor100_eig):
    part, _ = _bank(sensor100_eig, 3)
    n = sensor100_eig.n_vertices
    for vertex in (0, n // 2):
        total = sum(
            mcsfb.atom(sensor100_eig, part, m, vertex) for m in range(3)
        )
        delta = np.zeros(n)
        delta[vertex] = 1.0
        assert np.allclose(total, delta, atol=1e-10)


def test_atoms_cross_band_orthogonal(sensor100_eig):
    part, _ = _bank(sensor100_eig, 3)
    a = mcsfb.atom(sensor100_eig, part, 0, 5)
    b = mcsfb.atom(sensor100_eig, part, 1, 5)
    c = mcsfb.atom(sensor100_eig, part, 2, 17)
    assert abs(a @ b) <= 1e-10
    assert abs(a @ c) <= 1e-10
    assert abs(b @ c) <= 1e-10
    # bands above the lowest exclude the constant eigenvector
    assert abs(b.sum()) <= 1e-9
    assert abs(c.sum()) <= 1e-9


def test_dictionary_normalization_and_labels(sensor100_eig):
    part, vp = _bank(sensor100_eig, 3)
    D, labels = mcsfb.build_dictionary(sensor100_eig, part, vp)
    n = sensor100_eig.n_vertices
    assert D.shape == (n, n)
    assert len(labels) == n
    assert np.allclose(np.linalg.norm(D, axis=0), 1.0, atol=1e-12)
    band_of = np.array([m for m, _ in labels])
    gram = np.abs(D.T @ D)
    cross = gram[band_of[:, None] != band_of[None, :]]
    assert np.max(cross) <= 1e-9


def test_omp_recovers_single_atom(sensor100_eig):
    part, vp = _bank(sensor100_eig, 3)
    D, _ = mcsfb.build_dictionary(sensor100_eig, part, vp)
    f = 3.0 * D[:, 12]
    coef, norms = mcsfb.omp_sparse_code(D, f, 1)
    assert coef[12] == pytest.approx(3.0, abs=1e-10)
    assert np.count_nonzero(coef) == 1
    assert norms[0] == pytest.approx(3.0, abs=1e-12)
    assert norms[-1] <= 1e-10


def test_omp_residuals_decrease(sensor100_eig):
    part, vp = _bank(sensor100_eig, 3)
    D, _ = mcsfb.build_dictionary(sensor100_eig, part, vp)
    f = mcsfb.generate_signal(
        mcsfb.generate_graph("random_sensor", n=100, seed=0), seed=1
    )
    coef, norms = mcsfb.omp_sparse_code(D, f, 20)
    assert np.all(np.diff(norms) <= 1e-12)
    full, full_norms = mcsfb.omp_sparse_code(D, f, sensor100_eig.n_vertices)
    rec = D @ full
    assert mcsfb.nmse(rec, f) <= 1e-16
    assert full_norms[-1] <= 1e-8 * full_norms[0]


def test_omp_iteration_validation(sensor100_eig):
    part, vp = _bank(sensor100_eig, 2)
    D, _ = mcsfb.build_dictionary(sensor100_eig, part, vp)
    with pytest.raises(InputError, match="1..100"):
        mcsfb.omp_sparse_code(D, np.ones(100), 0)
    with pytest.raises(InputError, match="1..100"):
        mcsfb.omp_sparse_code(D, np.ones(100), 101)
