import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from riscap import rng as rrng
from riscap.errors import InvalidParameter
from riscap.estimation import build_estimator, perfect_estimator, structured_pilot_block
from riscap.model import make_config
from riscap.rates import (
    InputDistribution,
    LogRatioKernel,
    conditional_cgf,
    info_density,
    likelihood_ratio_check,
    mahalanobis_sq,
    make_block_input,
    make_phase_shift_matrix,
    make_support,
    mi_oracle_scalar,
    shaped_covariance,
    u_value,
    u_value_perfect,
    uniform,
)
from riscap.schemes import joint_support, mutual_info


def _estimator(cfg):
    return build_estimator(structured_pilot_block(cfg), cfg.gamma_tau, cfg.N)


def test_shaped_covariance_and_mahalanobis(small_config):
    est = _estimator(small_config)
    sup = joint_support(small_config, 2)
    L = sup.lifted()[17]
    cov = shaped_covariance(L, est.error_cov, small_config.gamma_d)
    want = np.eye(L.shape[0]) + small_config.gamma_d**2 * L @ est.error_cov @ L.conj().T
    assert np.allclose(cov.gamma, want)
    assert cov.log_det == pytest.approx(np.linalg.slogdet(want)[1])
    v = np.arange(L.shape[0]) + 1j
    assert mahalanobis_sq(v, cov) == pytest.approx(np.real(v.conj() @ np.linalg.solve(want, v)))
    with pytest.raises(InvalidParameter):
        mahalanobis_sq(np.ones(3), cov)


def test_block_and_phase_matrix_helpers(small_config):
    from riscap.model import enumerate_inputs

    xs = enumerate_inputs(small_config)
    blk = make_block_input([xs[3], xs[9]], small_config.N)
    assert blk.matrix.shape == (2, 2)
    assert blk.trace == pytest.approx(np.sum(np.abs(xs[3].matrix) ** 2) + np.sum(np.abs(xs[9].matrix) ** 2))
    Q = make_phase_shift_matrix([(0, 1), (1, 1)], small_config.phase_set, 1, small_config.N)
    assert np.allclose(Q.matrix, [[1, -1], [-1, -1]])
    with pytest.raises(InvalidParameter):
        make_phase_shift_matrix([(0, 1)], small_config.phase_set, 0, 2)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), P_dB=st.floats(-10, 30))
def test_u_identities(seed, P_dB):
    cfg = make_config(P_dB=P_dB)
    est = _estimator(cfg)
    L = joint_support(cfg, 2).lifted()
    gen = np.random.default_rng(seed)
    i, j = gen.integers(0, L.shape[0], 2)
    z = rrng.complex_normal(gen, L.shape[1])
    hh = rrng.complex_normal(gen, L.shape[2])
    assert u_value(L[i], L[i], z, hh, est.error_cov, cfg.gamma_d) == pytest.approx(-np.vdot(z, z).real, abs=1e-10)
    a, b = likelihood_ratio_check(L[i], L[j], z, hh, est.error_cov, min(cfg.gamma_d, 2.0))
    assert a == pytest.approx(b, rel=1e-9)
    zero = np.zeros((L.shape[2],) * 2)
    assert u_value(L[i], L[j], z, hh, zero, cfg.gamma_d) == pytest.approx(
        u_value_perfect(L[i], L[j], z, hh, cfg.gamma_d), abs=1e-12 * (1 + cfg.gamma_d**2 * 50))


@pytest.mark.parametrize("P_dB", [-5, 10])
@pytest.mark.parametrize("perfect", [False, True])
def test_kernel_matches_u_value(small_config, P_dB, perfect):
    cfg = small_config.replace(P_dB=P_dB)
    est = perfect_estimator(2, 2) if perfect else _estimator(cfg)
    sup = joint_support(cfg, 1)
    ker = LogRatioKernel(sup, est.error_cov, cfg.gamma_d)
    assert ker.white == perfect
    gen = np.random.default_rng(1)
    z = rrng.complex_normal(gen, (3, ker.d))
    hh = rrng.complex_normal(gen, (3, ker.nk))
    R = ker.log_ratio(hh, z)
    L = sup.lifted()
    for b in range(3):
        for i in (0, 5, 11):
            for j in (0, 7, 15):
                want = u_value(L[i], L[j], z[b], hh[b], est.error_cov, cfg.gamma_d) + np.vdot(z[b], z[b]).real
                assert R[b, i, j] == pytest.approx(want, abs=1e-9)
    assert np.all(np.diagonal(R, axis1=1, axis2=2) == 0.0)


def test_kernel_chunking_consistent(small_config):
    est = _estimator(small_config)
    ker = LogRatioKernel(joint_support(small_config, 2), est.error_cov, small_config.gamma_d)
    gen = np.random.default_rng(2)
    z = rrng.complex_normal(gen, (40, ker.d))
    hh = rrng.complex_normal(gen, ker.nk)
    full = ker.log_ratio(hh, z)
    p = np.random.default_rng(5).dirichlet(np.ones(ker.n))
    want = info_density(full, p)
    ker.chunk, ker.row_chunk = 3, 7
    assert np.allclose(ker.log_ratio(hh, z), full, atol=1e-12)
    assert np.allclose(ker.density(hh, z, p), want, atol=1e-12)
    ker.chunk = 1
    assert np.allclose(ker.density(hh, z, p), want, atol=1e-12)


def test_info_density_brute_force():
    gen = np.random.default_rng(3)
    R = gen.normal(size=(4, 5, 5))
    p = gen.dirichlet(np.ones(5))
    p[2] = 0
    p /= p.sum()
    want = np.array([sum(p[i] * math.log2(sum(p[j] * math.exp(R[b, i, j]) for j in range(5)))
                         for i in range(5) if p[i] > 0) for b in range(4)])
    assert np.allclose(info_density(R, p), want)


def _binary_antipodal_mi(a):
    """I(x; y) for x = +-a in complex unit noise; only the real noise part (variance 1/2) matters."""
    f = lambda n: math.exp(-n * n) / math.sqrt(math.pi) * np.logaddexp(0.0, -4 * a * (a + n)) / math.log(2)
    val, _ = integrate.quad(f, -12, 12, limit=200)
    return 1.0 - val


@pytest.mark.parametrize("P_dB,h", [(-3, 0.8 + 0.3j), (3, 1.0), (8, 0.5j)])
def test_binary_antipodal_against_quadrature(P_dB, h):
    cfg = make_config(N=1, K=1, A=1, constellation="psk", S=2, m=1, ell=1, tau=0, P_dB=P_dB)
    sup = make_support(cfg.constellation.array().reshape(-1, 1, 1), 1)
    est = mutual_info(uniform(sup), perfect_estimator(1, 1), cfg, 20000, 9, hhat=np.array([h]))
    ref = _binary_antipodal_mi(cfg.gamma_d * abs(h))
    assert est.bits_per_symbol == pytest.approx(ref, abs=max(1e-3, 4 * est.std_err))
    grid = mi_oracle_scalar([-1, 1], [0.5, 0.5], cfg.gamma_d, h)
    assert grid == pytest.approx(ref, abs=2e-4)


def test_grid_oracle_rejects_coarse_step():
    with pytest.raises(InvalidParameter):
        mi_oracle_scalar([1, -1], [1, 1], 1.0, 1.0, step=0.1)


def test_cgf_gaussian_synthetic():
    """u_ij = a_j + g with g ~ N(mu, s^2): the statistic is g/ln2 + log2 sum_j p_j exp(a_j)."""
    gen = np.random.default_rng(4)
    a = np.array([0.3, -1.2, 0.8])
    p2 = np.array([0.2, 0.5, 0.3])
    p1 = np.array([0.6, 0.4])
    mu, s = -0.7, 1.3
    g = gen.normal(mu, s, size=5000)
    kappa, err = conditional_cgf(p1, p2, lambda k: np.tile(a, (2, 1)) + g[k], 5000)
    want = (mu + math.log(p2 @ np.exp(a))) / math.log(2)
    assert kappa == pytest.approx(want, abs=4 * err)
    assert err == pytest.approx(s / math.log(2) / math.sqrt(5000), rel=0.05)
    with pytest.raises(InvalidParameter):
        conditional_cgf(p1, p2, lambda k: 0, 0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_relabeling_invariance(seed):
    """Permuting the support together with the probabilities leaves the estimate unchanged."""
    cfg = make_config(ell=3, tau=2, P_dB=5)
    est = _estimator(cfg)
    sup = joint_support(cfg, 1)
    gen = np.random.default_rng(seed)
    p = gen.dirichlet(np.ones(sup.size))
    perm = gen.permutation(sup.size)
    sup2 = make_support(sup.matrices[perm], cfg.N)
    r1 = mutual_info(InputDistribution(sup, p), est, cfg, 64, 3)
    r2 = mutual_info(InputDistribution(sup2, p[perm]), est, cfg, 64, 3)
    assert r1.bits_per_symbol == pytest.approx(r2.bits_per_symbol, abs=1e-10)


def test_support_dedupe_and_distribution_checks(small_config):
    sup = joint_support(small_config, 1)
    doubled = make_support(np.concatenate([sup.matrices, sup.matrices]), 2)
    assert doubled.size == sup.size
    with pytest.raises(InvalidParameter):
        InputDistribution(sup, np.ones(sup.size))
    with pytest.raises(InvalidParameter):
        InputDistribution(sup, np.ones(3) / 3)
    assert uniform(sup).expected_trace() == pytest.approx(small_config.K * small_config.m)


def test_mutual_info_bounds(small_config):
    est = _estimator(small_config)
    cfg = small_config.replace(ell=3)
    sup = joint_support(cfg, 1)
    r = mutual_info(uniform(sup), est, cfg, 400, 1)
    assert 0 <= r.bits_per_symbol * cfg.ell * cfg.m <= math.log2(sup.size) + 1e-9
    assert r.metadata["mi_bits"] == pytest.approx(r.bits_per_symbol * 3)
