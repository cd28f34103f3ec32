"""Step-filter coefficients, damping, operator application, basis cache."""

import numpy as np
import pytest
from scipy.integrate import quad

import mcsfb
from mcsfb import InputError

from conftest import make_operator


LMAX = 4.0


def phi(tau, lmax=LMAX):
    return np.arccos(np.clip(2.0 * tau / lmax - 1.0, -1.0, 1.0))


# ------------------------------------------------------- coefficients


def test_full_band_coefficients():
    c = mcsfb.step_filter_coefficients(0.0, LMAX, LMAX, 6)
    assert c[0] == pytest.approx(2.0, abs=1e-15)
    assert np.max(np.abs(c[1:])) <= 1e-15


def test_half_band_closed_form():
    c = mcsfb.step_filter_coefficients(0.0, LMAX / 2, LMAX, 4)
    assert c[0] == pytest.approx(1.0, abs=1e-14)
    assert c[1] == pytest.approx(-2.0 / np.pi, abs=1e-14)


def test_coefficients_match_quadrature():
    rng = np.random.default_rng(11)
    for _ in range(5):
        a, b = np.sort(rng.uniform(0.0, LMAX, size=2))
        if b - a < 1e-3:
            b = min(LMAX, a + 0.5)
        c = mcsfb.step_filter_coefficients(a, b, LMAX, 100)
        lo, hi = phi(b), phi(a)
        for k in (0, 1, 2, 7, 40, 100):
            ref, _ = quad(lambda t: (2.0 / np.pi) * np.cos(k * t), lo, hi)
            assert c[k] == pytest.approx(ref, abs=1e-8)


def test_band_order_validated():
    with pytest.raises(InputError):
        mcsfb.step_filter_coefficients(2.0, 1.0, LMAX, 10)


def test_band_end_clamped_to_lambda_max():
    c1 = mcsfb.step_filter_coefficients(1.0, LMAX, LMAX, 20)
    c2 = mcsfb.step_filter_coefficients(1.0, LMAX * 1.5, LMAX, 20)
    assert np.array_equal(c1, c2)


def test_jackson_damping_values():
    g = mcsfb.jackson_damping(1)
    assert g[0] == 1.0
    assert g[1] == pytest.approx(0.5, abs=1e-15)
    for K in (2, 5, 25, 80, 200):
        g = mcsfb.jackson_damping(K)
        assert g.shape == (K + 1,)
        assert g[0] == 1.0
        assert np.all(g > 0.0) and np.all(g <= 1.0)
        assert np.all(np.diff(g) <= 1e-15)


# ------------------------------------------------------- filters


def test_full_band_filter_is_identity():
    filt = mcsfb.make_polynomial_filter(0.0, LMAX, LMAX, 30)
    lam = np.linspace(0.0, LMAX, 500)
    assert np.max(np.abs(filt.evaluate(lam) - 1.0)) <= 1e-12


def test_damping_suppresses_overshoot():
    lam = np.linspace(0.0, LMAX, 10_000)
    damped = mcsfb.make_polynomial_filter(0.0, LMAX / 2, LMAX, 80, damped=True)
    h = damped.evaluate(lam)
    assert np.min(h) >= -1e-6
    assert np.max(h) <= 1.0 + 1e-6
    raw = mcsfb.make_polynomial_filter(0.0, LMAX / 2, LMAX, 80, damped=False)
    assert np.max(raw.evaluate(lam)) > 1.01  # Gibbs overshoot without damping


def test_filter_degree():
    filt = mcsfb.make_polynomial_filter(0.0, 1.0, LMAX, 25)
    assert filt.degree == 25
    assert filt.alpha.shape == (26,)


def test_chebyshev_fit_recovers_polynomial():
    alpha = mcsfb.chebyshev_fit(lambda lam: lam, LMAX, 3)
    # exact representation: lam = lmax/2 + (lmax/2) * T1_shifted(lam)
    assert alpha[0] == pytest.approx(LMAX / 2, abs=1e-10)
    assert alpha[1] == pytest.approx(LMAX / 2, abs=1e-10)
    assert np.max(np.abs(alpha[2:])) <= 1e-10


# ------------------------------------------------------- operator apply


def test_apply_identity_encoding(ring64_op):
    lmax = ring64_op.lambda_max_estimate
    alpha = np.array([lmax / 2, lmax / 2])
    rng = np.random.default_rng(0)
    f = rng.standard_normal(64)
    out = mcsfb.chebyshev_apply(ring64_op, alpha, f, lmax)
    assert np.allclose(out, ring64_op.matvec(f), atol=1e-10)


def test_apply_allpass_is_identity(ring64_op):
    lmax = ring64_op.lambda_max_estimate
    rng = np.random.default_rng(1)
    f = rng.standard_normal(64)
    out = mcsfb.chebyshev_apply(ring64_op, mcsfb.allpass_coefficients(12), f, lmax)
    assert np.allclose(out, f, atol=1e-12)


def test_apply_filter_validations(ring64_op):
    filt = mcsfb.make_polynomial_filter(0.0, 1.0, LMAX * 10, 10)
    with pytest.raises(InputError):
        mcsfb.apply_filter(ring64_op, filt, np.zeros(64))
    good = mcsfb.make_polynomial_filter(
        0.0, 1.0, ring64_op.lambda_max_estimate, 10
    )
    with pytest.raises(InputError):
        mcsfb.apply_filter(ring64_op, good, np.zeros(63))


def test_apply_filter_linearity(ring64_op):
    filt = mcsfb.make_polynomial_filter(
        0.5, 2.0, ring64_op.lambda_max_estimate, 20
    )
    rng = np.random.default_rng(2)
    f, g = rng.standard_normal((2, 64))
    lhs = mcsfb.apply_filter(ring64_op, filt, 2.0 * f - 3.0 * g)
    rhs = 2.0 * mcsfb.apply_filter(ring64_op, filt, f) - 3.0 * mcsfb.apply_filter(
        ring64_op, filt, g
    )
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_apply_filter_matches_dense_oracle():
    g = mcsfb.generate_graph("random_sensor", n=120, seed=5)
    L = make_operator(g)
    lam, U = np.linalg.eigh(L.matrix.toarray())
    filt = mcsfb.make_polynomial_filter(0.0, 1.0, L.lambda_max_estimate, 40)
    rng = np.random.default_rng(3)
    f = rng.standard_normal(g.n_vertices)
    got = mcsfb.apply_filter(L, filt, f)
    want = U @ (filt.evaluate(lam) * (U.T @ f))
    assert np.linalg.norm(got - want) <= 1e-9 * np.linalg.norm(want)


# ------------------------------------------------------- basis cache


def test_cache_first_block_is_probe_matrix(ring64_op):
    ring64_op.reset_matvec_count()
    cache = mcsfb.build_basis_cache(ring64_op, K=10, J=4, seed=0, storage="full")
    assert cache.blocks[0] is cache.X or np.array_equal(cache.blocks[0], cache.X)
    assert ring64_op.matvec_count == 10 * 4


def test_cache_recurrence_against_dense(ring64_op):
    cache = mcsfb.build_basis_cache(ring64_op, K=8, J=3, seed=1, storage="full")
    lmax = ring64_op.lambda_max_estimate
    dense = ring64_op.matrix.toarray()
    Tbar = 2.0 * dense / lmax - np.eye(64)
    prev, cur = cache.X.copy(), Tbar @ cache.X
    assert np.allclose(cache.blocks[1], cur, atol=1e-10)
    for k in range(2, 9):
        prev, cur = cur, 2.0 * Tbar @ cur - prev
        assert np.allclose(cache.blocks[k], cur, atol=1e-10)


def test_cache_single_probe_vector(ring64_op):
    cache = mcsfb.build_basis_cache(ring64_op, K=5, J=1, seed=0)
    assert cache.X.shape == (64, 1)
    assert np.isfinite(cache.trace_estimate(mcsfb.allpass_coefficients(5)))


def test_cache_filter_block_no_extra_matvecs(ring64_op):
    cache = mcsfb.build_basis_cache(ring64_op, K=10, J=4, seed=0, storage="full")
    filt = mcsfb.make_polynomial_filter(
        0.0, 1.0, ring64_op.lambda_max_estimate, 10
    )
    ring64_op.reset_matvec_count()
    cache.filter_block(filt.alpha)
    assert ring64_op.matvec_count == 0


def test_cache_streaming_matches_full(ring64_op):
    full = mcsfb.build_basis_cache(ring64_op, K=12, J=5, seed=9, storage="full")
    stream = mcsfb.build_basis_cache(
        ring64_op, K=12, J=5, seed=9, storage="streaming"
    )
    filt = mcsfb.make_polynomial_filter(
        0.3, 2.1, ring64_op.lambda_max_estimate, 12
    )
    assert np.allclose(
        full.filter_block(filt.alpha), stream.filter_block(filt.alpha), atol=1e-12
    )
    assert full.trace_estimate(filt.alpha) == pytest.approx(
        stream.trace_estimate(filt.alpha), abs=1e-10
    )


def test_cache_rejects_overlong_coefficients(ring64_op):
    cache = mcsfb.build_basis_cache(ring64_op, K=5, J=2, seed=0)
    with pytest.raises(InputError):
        cache.filter_block(np.zeros(7))
    with pytest.raises(InputError):
        mcsfb.build_basis_cache(ring64_op, K=5, J=2, seed=0, storage="bogus")


# ------------------------------------------------------- trace estimates


def test_allpass_trace_is_vertex_count(ring64_op):
    # E[x^T x] = N per probe; averaged over J probes and 100 seeds
    alpha = mcsfb.allpass_coefficients(6)
    J = 8
    vals = []
    for seed in range(100):
        cache = mcsfb.build_basis_cache(ring64_op, K=6, J=J, seed=seed)
        vals.append(cache.trace_estimate(alpha))
    vals = np.asarray(vals)
    se = vals.std(ddof=1) / np.sqrt(len(vals))
    assert abs(vals.mean() - 64.0) <= 3.0 * se + 1e-9


def test_trace_estimate_unbiased_for_fixed_filter(ring64_op):
    filt = mcsfb.make_polynomial_filter(
        0.0, 1.2, ring64_op.lambda_max_estimate, 15
    )
    lam = np.linalg.eigvalsh(ring64_op.matrix.toarray())
    truth = float(np.sum(filt.evaluate(lam)))
    vals = []
    for seed in range(200):
        cache = mcsfb.build_basis_cache(ring64_op, K=15, J=6, seed=seed)
        vals.append(cache.trace_estimate(filt.alpha))
    vals = np.asarray(vals)
    se = vals.std(ddof=1) / np.sqrt(len(vals))
    assert abs(vals.mean() - truth) <= 3.0 * se


def test_eigencount_lower_half(ring64_op):
    lmax = ring64_op.lambda_max_estimate
    cache = mcsfb.build_basis_cache(ring64_op, K=80, J=30, seed=0)
    filt = mcsfb.make_polynomial_filter(0.0, lmax / 2, lmax, 80)
    est = mcsfb.estimate_eigencount(cache, filt)
    lam = np.linalg.eigvalsh(ring64_op.matrix.toarray())
    truth = int(np.sum(lam < lmax / 2))
    assert abs(est - truth) <= 0.15 * truth
