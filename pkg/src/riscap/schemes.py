"""Scheme-level rates: joint encoding, max-SNR, layered, their lower bounds and high-SNR limits.

Every estimate averages over outer draws of the channel estimate and the
receiver noise. Draws are organised in groups: group ``h`` has one estimate
``hhat_h`` and ``group_size`` noise vectors, all addressed by ``(seed, h)`` so
that results do not depend on scheduling. Schemes that adapt the input to the
estimate fit their distribution on a separate set of noise draws and are scored
on the evaluation draws, so the reported number is an achievable rate rather
than an in-sample optimum.

Rates are in bits per channel use. With ``L`` data sub-blocks evaluated jointly
the block mutual information is divided by ``m*ell``; the lower bounds evaluate
a single sub-block and scale by ``(ell - tau)/(m*ell)``.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .errors import CapacityExceeded, InvalidParameter, NoDataSubBlocks
from .estimation import EstimatorModel, perfect_estimator
from .model import ENUMERATION_CAP, SystemConfig, input_arrays
from .optimize import OptimizerSettings, SampledMutualInfo, maximize_distribution, search_phase_pattern
from .rates import (
    InputDistribution,
    InputSupport,
    LogRatioKernel,
    info_density,
    make_support,
    uniform,
)

SCHEMES = (
    "capacity-csit",
    "capacity-csir",
    "max-snr-csit",
    "max-snr-csir",
    "layered",
    "perfect",
    "max-snr-perfect",
    "layered-perfect",
)
ALIASES = {"optimal": "capacity-csit", "uniform": "capacity-csir", "max-snr": "max-snr-csit"}
PERFECT_VARIANT = {
    "capacity-csit": "perfect",
    "capacity-csir": "perfect",
    "max-snr-csit": "max-snr-perfect",
    "max-snr-csir": "max-snr-perfect",
    "layered": "layered-perfect",
}

# joint supports larger than this are not evaluated exactly under evaluation="auto"
EXACT_AUTO_LIMIT = 1024
# layered phase matrices averaged exactly up to this count, sampled per group beyond it
PATTERN_ENUM_LIMIT = 256


@dataclass(frozen=True)
class RateEstimate:
    bits_per_symbol: float
    std_err: float
    samples: int
    scheme: str
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.std_err < 0 or self.samples < 1:
            raise InvalidParameter("std_err must be >= 0 and samples >= 1")


@dataclass(frozen=True)
class MonteCarlo:
    """Sampling layout shared by all schemes.

    ``group_size`` noise draws share one estimate draw; ``opt_samples`` extra
    noise draws per estimate are used only to fit adaptive distributions.
    """

    group_size: int = 16
    opt_samples: int = 48
    threads: int = 1
    optimizer: OptimizerSettings = OptimizerSettings(max_iterations=100, convergence_tol=1e-2)
    select_samples: int | None = None
    adaptive_share: float = 0.125
    min_adaptive_groups: int = 16

    def __post_init__(self):
        if self.group_size < 1 or self.opt_samples < 1 or self.threads < 1:
            raise InvalidParameter("group_size, opt_samples and threads must be >= 1")
        if not 0 < self.adaptive_share <= 1:
            raise InvalidParameter("adaptive_share must lie in (0, 1]")


def resolve_scheme(tag: str, csi: str = "estimated") -> str:
    tag = ALIASES.get(tag, tag)
    if tag not in SCHEMES:
        raise InvalidParameter(f"unknown scheme {tag!r}; expected one of {', '.join(SCHEMES)}")
    if csi == "perfect":
        tag = PERFECT_VARIANT.get(tag, tag)
    return tag


# ---------------------------------------------------------------------------
# supports


def joint_support(config: SystemConfig, blocks: int, theta=None, cap: int = ENUMERATION_CAP) -> InputSupport:
    """All ``blocks``-tuples of effective inputs (optionally with one fixed phase pattern)."""
    mats, th, si = input_arrays(config, theta=theta, cap=cap)
    n1 = mats.shape[0]
    if n1**blocks > cap:
        raise CapacityExceeded("joint input support", n1**blocks, cap, "use the lower-bound evaluation")
    if blocks == 1:
        return make_support(mats, config.N)
    idx = np.array(list(itertools.product(range(n1), repeat=blocks)))
    joint = np.concatenate([mats[idx[:, b]] for b in range(blocks)], axis=2)
    return make_support(joint, config.N)


def phase_matrix_support(config: SystemConfig, blocks: int, cap: int = ENUMERATION_CAP) -> InputSupport:
    """Q(blocks): K x blocks matrices with entries sqrt(mu)*exp(j*theta)."""
    K, A = config.K, config.A
    n = A ** (K * blocks)
    if n > cap:
        raise CapacityExceeded("phase-matrix support", n, cap, "use the lower-bound evaluation")
    ph = config.phase_set.phasors()
    idx = np.array(list(itertools.product(range(A), repeat=K * blocks))).reshape(n, blocks, K)
    Q = math.sqrt(config.mu) * np.transpose(ph[idx], (0, 2, 1))
    return make_support(Q, config.N)


def layered_symbol_support(config: SystemConfig, thetas) -> InputSupport:
    """Symbol matrices for fixed phases: sub-block i is exp(j*theta_i) s_i^T, s_i in S^(m - mu)."""
    q = config.m - config.mu
    pts = config.constellation.array()
    ph = config.phase_set.phasors()
    syms = np.array(list(itertools.product(range(config.S), repeat=q))).reshape(-1, q)
    per_block = [ph[list(t)][None, :, None] * pts[syms][:, None, :] for t in thetas]
    L = len(per_block)
    ns = syms.shape[0]
    idx = np.array(list(itertools.product(range(ns), repeat=L))).reshape(-1, L)
    mats = np.concatenate([per_block[b][idx[:, b]] for b in range(L)], axis=2)
    return make_support(mats, config.N)


# ---------------------------------------------------------------------------
# sampling and reduction


class _Outer:
    def __init__(self, estimator: EstimatorModel, seed: int, samples: int, group_size: int, fixed_hhat=None):
        if samples < 1:
            raise InvalidParameter("samples must be >= 1")
        self.est = estimator
        self.seed = int(seed)
        self.samples = int(samples)
        self.g = int(group_size)
        self.n_groups = -(-self.samples // self.g)
        self.fixed = None if fixed_hhat is None else np.asarray(fixed_hhat, dtype=complex)

    def size(self, h: int) -> int:
        return min(self.g, self.samples - h * self.g)

    def hhat(self, h: int) -> np.ndarray:
        if self.fixed is not None:
            return self.fixed
        gen = _rng.generator(self.seed, _rng.ESTIMATE, h)
        return self.est.prior_cov_root @ _rng.complex_normal(gen, self.est.dim)

    def z(self, h: int, d: int, stream: int = _rng.OUTER_Z, count: int | None = None) -> np.ndarray:
        gen = _rng.generator(self.seed, stream, h)
        n = self.g if count is None else count
        return _rng.complex_normal(gen, (n, d))[: (self.size(h) if count is None else n)]


def _map_groups(fn, n_groups: int, threads: int) -> list:
    if threads <= 1 or n_groups == 1:
        return [fn(h) for h in range(n_groups)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(n_groups)))


def _summarize(per_group: list, scale: float):
    """Mean over all samples and its standard error from group means."""
    sizes = np.array([len(v) for v in per_group], dtype=float)
    means = np.array([np.mean(v) for v in per_group])
    M = sizes.sum()
    est = float(np.sum(sizes * means) / M)
    G = len(per_group)
    if G > 1:
        var = G / (G - 1) * np.sum((sizes / M) ** 2 * (means - est) ** 2)
    else:
        v = np.asarray(per_group[0])
        var = np.var(v, ddof=1) / v.size if v.size > 1 else 0.0
    return est * scale, float(math.sqrt(var)) * abs(scale)


def _summarize_cv(control: list, delta: list, scale: float):
    """Control-variate estimate: mean of ``control`` over all groups plus mean of ``delta`` over a prefix."""
    sc = np.array([len(v) for v in control], dtype=float)
    cm = np.array([np.mean(v) for v in control])
    sd = np.array([len(v) for v in delta], dtype=float)
    dm = np.array([np.mean(v) for v in delta])
    Mc, Md = sc.sum(), sd.sum()
    c_est = np.sum(sc * cm) / Mc
    d_est = np.sum(sd * dm) / Md
    Gc, Gd = len(control), len(delta)
    var = 0.0
    if Gc > 1:
        var += Gc / (Gc - 1) * np.sum((sc / Mc) ** 2 * (cm - c_est) ** 2)
    if Gd > 1:
        var += Gd / (Gd - 1) * np.sum((sd / Md) ** 2 * (dm - d_est) ** 2)
        cov = np.sum((sd / Mc) * (sd / Md) * (cm[:Gd] - c_est) * (dm - d_est))
        var += 2 * Gd / (Gd - 1) * cov
    return float(c_est + d_est) * scale, float(math.sqrt(max(var, 0.0))) * abs(scale)


def _fit(kernel: LogRatioKernel, hhat, z_opt, budget: float, settings: OptimizerSettings):
    obj = SampledMutualInfo(kernel.log_ratio(hhat, z_opt))
    return maximize_distribution(obj, kernel.support.traces, budget, settings)


def _check_rate_config(config: SystemConfig):
    if config.tau >= config.ell:
        raise NoDataSubBlocks(config.tau, config.ell)


def _layout(config: SystemConfig, evaluation: str):
    """(blocks evaluated jointly, scale to bits per channel use)."""
    nd = config.n_data
    if evaluation == "exact":
        return nd, 1.0 / (config.m * config.ell)
    if evaluation == "lower-bound":
        return 1, nd / (config.m * config.ell)
    raise InvalidParameter(f"unknown evaluation mode {evaluation!r}")


def _auto(config: SystemConfig, evaluation: str, support_size: int) -> str:
    if evaluation != "auto":
        return evaluation
    return "exact" if support_size <= EXACT_AUTO_LIMIT else "lower-bound"


def _meta(estimator, seed, evaluation, **extra):
    pilots = None
    if estimator is not None and estimator.pilot_block is not None:
        pilots = [(p.theta, p.s) for p in estimator.pilot_block.pilots]
    out = {"seed": int(seed), "evaluation": evaluation, "pilots": pilots}
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# generic evaluators


def _eval_fixed(kernel: LogRatioKernel, probs, outer: _Outer, threads: int):
    def fn(h):
        return -kernel.density(outer.hhat(h), outer.z(h, kernel.d), probs)

    return _map_groups(fn, outer.n_groups, threads)


def _eval_adaptive(kernels: list, budget: float, outer: _Outer, mc: MonteCarlo):
    """Per estimate draw: fit a distribution on each kernel, keep the best, score on fresh noise."""

    def fn(h):
        hh = outer.hhat(h)
        best = None
        for k, ker in enumerate(kernels):
            z_opt = outer.z(h, ker.d, stream=_rng.OPT_Z, count=mc.opt_samples)
            res = _fit(ker, hh, z_opt, budget, mc.optimizer)
            if best is None or res.value > best[1].value:
                best = (k, res)
        k, res = best
        R = kernels[k].log_ratio(hh, outer.z(h, kernels[k].d))
        return -info_density(R, res.probs)

    return _map_groups(fn, outer.n_groups, mc.threads)


def _adaptive_with_control(ker: LogRatioKernel, budget: float, outer: _Outer, mc: MonteCarlo,
                           n_fit: int, scale: float):
    """Adaptive-input rate using the uniform input on the same draws as a control variate.

    The uniform rate is cheap, so it runs on every group; the per-estimate fit
    runs on the first ``n_fit`` groups only and contributes the difference.
    With ``n_fit`` equal to the group count this is the plain adaptive mean.
    """
    pu = uniform(ker.support).probs

    def fn(h):
        hh = outer.hhat(h)
        R = ker.log_ratio(hh, outer.z(h, ker.d))
        base = -info_density(R, pu)
        if h >= n_fit:
            return base, None
        z_opt = outer.z(h, ker.d, stream=_rng.OPT_Z, count=mc.opt_samples)
        res = _fit(ker, hh, z_opt, budget, mc.optimizer)
        return base, -info_density(R, res.probs) - base

    out = _map_groups(fn, outer.n_groups, mc.threads)
    control = [c for c, _ in out]
    delta = [d for _, d in out[:n_fit]]
    return _summarize_cv(control, delta, scale)


def mutual_info(p: InputDistribution, estimator: EstimatorModel, config: SystemConfig, M: int, seed: int,
                mc: MonteCarlo | None = None, hhat=None) -> RateEstimate:
    """Rate of a fixed input distribution over a data block, in bits per channel use.

    The support of ``p`` spans all data sub-blocks jointly. ``hhat`` pins the
    channel estimate to one value instead of sampling it.
    """
    _check_rate_config(config)
    mc = mc or MonteCarlo()
    if p.support.matrices.shape[2] != config.m * config.n_data:
        raise InvalidParameter("support must cover all data sub-blocks")
    ker = LogRatioKernel(p.support, estimator.error_cov, config.gamma_d)
    outer = _Outer(estimator, seed, M, mc.group_size if hhat is None else M, fixed_hhat=hhat)
    groups = _eval_fixed(ker, p.probs, outer, mc.threads)
    scale = 1.0 / (config.m * config.ell)
    val, err = _summarize(groups, scale)
    if hhat is not None:
        allv = np.concatenate(groups)
        err = float(np.std(allv, ddof=1) / math.sqrt(allv.size)) * scale if allv.size > 1 else 0.0
    return RateEstimate(val, err, M, "mutual-info", _meta(estimator, seed, "exact", mi_bits=val / scale))


# ---------------------------------------------------------------------------
# joint encoding


def _data_kernels(config, estimator, blocks, thetas=None):
    if thetas is None:
        sup = joint_support(config, blocks)
        return [LogRatioKernel(sup, estimator.error_cov, config.gamma_d)]
    return [LogRatioKernel(joint_support(config, blocks, theta=t), estimator.error_cov, config.gamma_d)
            for t in thetas]


def rate_capacity_csit(config: SystemConfig, estimator: EstimatorModel, M: int, seed: int,
                       mc: MonteCarlo | None = None, evaluation: str = "exact") -> RateEstimate:
    """Joint encoding with the input distribution adapted to each channel estimate."""
    _check_rate_config(config)
    mc = mc or MonteCarlo()
    evaluation = _auto(config, evaluation, config.input_count ** config.n_data)
    blocks, scale = _layout(config, evaluation)
    (ker,) = _data_kernels(config, estimator, blocks)
    outer = _Outer(estimator, seed, M, mc.group_size)
    budget = config.K * config.m * blocks
    n_fit = min(outer.n_groups, max(mc.min_adaptive_groups, math.ceil(mc.adaptive_share * outer.n_groups)))
    val, err = _adaptive_with_control(ker, budget, outer, mc, n_fit, scale)
    return RateEstimate(val, err, M, "capacity-csit",
                        _meta(estimator, seed, evaluation, adaptive_groups=n_fit))


def rate_capacity_csir(config: SystemConfig, estimator: EstimatorModel, M: int, seed: int,
                       mc: MonteCarlo | None = None, evaluation: str = "exact") -> RateEstimate:
    """Joint encoding with the uniform distribution (no transmitter CSI)."""
    _check_rate_config(config)
    mc = mc or MonteCarlo()
    evaluation = _auto(config, evaluation, config.input_count ** config.n_data)
    blocks, scale = _layout(config, evaluation)
    (ker,) = _data_kernels(config, estimator, blocks)
    p = uniform(ker.support).probs
    outer = _Outer(estimator, seed, M, mc.group_size)
    val, err = _summarize(_eval_fixed(ker, p, outer, mc.threads), scale)
    return RateEstimate(val, err, M, "capacity-csir", _meta(estimator, seed, evaluation))


def rate_perfect_csi(config: SystemConfig, M: int, seed: int, mc: MonteCarlo | None = None) -> RateEstimate:
    """Joint encoding with exact channel knowledge at both ends.

    The channel is memoryless across sub-blocks given the channel, so one
    sub-block suffices and the result does not depend on ell or tau.
    """
    mc = mc or MonteCarlo()
    est = perfect_estimator(config.N, config.K)
    kers = _data_kernels(config, est, 1)
    outer = _Outer(est, seed, M, mc.group_size)
    val, err = _summarize(_eval_adaptive(kers, config.K * config.m, outer, mc), 1.0 / config.m)
    return RateEstimate(val, err, M, "perfect", _meta(est, seed, "exact"))


# ---------------------------------------------------------------------------
# max-SNR


def _select_pattern_rx_only(config, estimator, blocks, M, seed, mc):
    """Fixed phase pattern for a receiver-only scheme, chosen on an independent stream."""
    sel_seed = int(np.random.SeedSequence(int(seed), spawn_key=(_rng.SELECT,)).generate_state(1)[0])
    n_sel = mc.select_samples or M
    outer = _Outer(estimator, sel_seed, n_sel, mc.group_size)
    cache = {}

    def inner(theta):
        ker = LogRatioKernel(joint_support(config, blocks, theta=theta), estimator.error_cov, config.gamma_d)
        cache[theta] = ker
        v, _ = _summarize(_eval_fixed(ker, uniform(ker.support).probs, outer, mc.threads), 1.0)
        return v

    theta, _ = search_phase_pattern(inner, config.A, config.K)
    return theta, cache[theta]


def rate_max_snr(config: SystemConfig, estimator: EstimatorModel, M: int, seed: int, csit: str = "full",
                 mc: MonteCarlo | None = None, evaluation: str = "exact") -> RateEstimate:
    """One phase pattern per coherence block, data carried by the symbols only.

    ``csit="full"`` picks the pattern and symbol distribution from each channel
    estimate; ``"rx-only"`` fixes one pattern for all estimates and sends uniform
    symbols; ``"perfect"`` is the full-CSI scheme with exact channel knowledge.
    """
    mc = mc or MonteCarlo()
    if csit == "perfect":
        est = perfect_estimator(config.N, config.K)
        thetas = list(itertools.product(range(config.A), repeat=config.K))
        kers = _data_kernels(config, est, 1, thetas)
        outer = _Outer(est, seed, M, mc.group_size)
        val, err = _summarize(_eval_adaptive(kers, config.K * config.m, outer, mc), 1.0 / config.m)
        return RateEstimate(val, err, M, "max-snr-perfect", _meta(est, seed, "exact"))
    _check_rate_config(config)
    if config.A**config.K > ENUMERATION_CAP:
        raise CapacityExceeded("phase pattern space", config.A**config.K, ENUMERATION_CAP)
    evaluation = _auto(config, evaluation, config.S ** (config.m * config.n_data))
    blocks, scale = _layout(config, evaluation)
    outer = _Outer(estimator, seed, M, mc.group_size)
    if csit == "full":
        thetas = list(itertools.product(range(config.A), repeat=config.K))
        kers = _data_kernels(config, estimator, blocks, thetas)
        val, err = _summarize(_eval_adaptive(kers, config.K * config.m * blocks, outer, mc), scale)
        return RateEstimate(val, err, M, "max-snr-csit", _meta(estimator, seed, evaluation))
    if csit == "rx-only":
        theta, ker = _select_pattern_rx_only(config, estimator, blocks, M, seed, mc)
        val, err = _summarize(_eval_fixed(ker, uniform(ker.support).probs, outer, mc.threads), scale)
        return RateEstimate(val, err, M, "max-snr-csir", _meta(estimator, seed, evaluation, theta=theta))
    raise InvalidParameter(f"csit must be full, rx-only or perfect, got {csit!r}")


# ---------------------------------------------------------------------------
# layered encoding


def _check_mu(config: SystemConfig):
    if not 1 <= config.mu <= config.m:
        raise InvalidParameter(f"layered encoding needs 1 <= mu <= m, got mu={config.mu}, m={config.m}")


def _layered_parts(config, estimator, blocks, outer, mc):
    """Per-group samples of the phase-layer and symbol-layer information (block totals, bits)."""
    ker1 = LogRatioKernel(phase_matrix_support(config, blocks), estimator.error_cov, config.gamma_d)
    p1 = uniform(ker1.support).probs
    r1 = _eval_fixed(ker1, p1, outer, mc.threads)
    if config.mu == config.m:
        return r1, [np.zeros_like(v) for v in r1]
    K, A = config.K, config.A
    n_pat = A ** (K * blocks)
    cache = {}

    def kernel_for(flat):
        if flat not in cache:
            thetas = [flat[b * K:(b + 1) * K] for b in range(blocks)]
            sup = layered_symbol_support(config, thetas)
            cache[flat] = LogRatioKernel(sup, estimator.error_cov, config.gamma_d)
        return cache[flat]

    if n_pat <= PATTERN_ENUM_LIMIT:
        patterns = list(itertools.product(range(A), repeat=K * blocks))
        kers = [kernel_for(f) for f in patterns]

        def fn(h):
            hh = outer.hhat(h)
            acc = 0.0
            for ker in kers:
                acc = acc - ker.density(hh, outer.z(h, ker.d, stream=_rng.NOISE), uniform(ker.support).probs)
            return acc / len(kers)
    else:
        def fn(h):
            gen = _rng.generator(outer.seed, _rng.PATTERN, h)
            flat = tuple(int(v) for v in gen.integers(0, A, size=K * blocks))
            ker = kernel_for(flat)
            return -ker.density(outer.hhat(h), outer.z(h, ker.d, stream=_rng.NOISE), uniform(ker.support).probs)

    # the kernel cache is filled lazily, so keep the pattern-sampling path sequential
    threads = mc.threads if n_pat <= PATTERN_ENUM_LIMIT else 1
    r2 = _map_groups(fn, outer.n_groups, threads)
    return r1, r2


def rate_layered(config: SystemConfig, estimator: EstimatorModel, M: int, seed: int,
                 mc: MonteCarlo | None = None, evaluation: str = "exact", perfect: bool = False) -> RateEstimate:
    """Two-layer scheme: phases decoded first from the averaged pilot symbols, then the symbols."""
    _check_mu(config)
    mc = mc or MonteCarlo()
    if perfect:
        estimator = perfect_estimator(config.N, config.K)
        blocks, scale, evaluation, tag = 1, 1.0 / config.m, "exact", "layered-perfect"
    else:
        _check_rate_config(config)
        evaluation = _auto(config, evaluation, config.A ** (config.K * config.n_data))
        blocks, scale = _layout(config, evaluation)
        tag = "layered"
    outer = _Outer(estimator, seed, M, mc.group_size)
    r1, r2 = _layered_parts(config, estimator, blocks, outer, mc)
    total = [a + b for a, b in zip(r1, r2)]
    val, err = _summarize(total, scale)
    v1, _ = _summarize(r1, scale)
    v2, _ = _summarize(r2, scale)
    return RateEstimate(val, err, M, tag, _meta(estimator, seed, evaluation, r1=v1, r2=v2))


# ---------------------------------------------------------------------------
# dispatch, lower bounds, limits


def evaluate(scheme: str, config: SystemConfig, estimator: EstimatorModel | None, M: int, seed: int,
             mc: MonteCarlo | None = None, evaluation: str = "exact") -> RateEstimate:
    """Evaluate any scheme tag."""
    tag = resolve_scheme(scheme, config.csi)
    if tag == "perfect":
        return rate_perfect_csi(config, M, seed, mc)
    if tag == "max-snr-perfect":
        return rate_max_snr(config, None, M, seed, "perfect", mc)
    if tag == "layered-perfect":
        return rate_layered(config, None, M, seed, mc, perfect=True)
    if estimator is None:
        raise InvalidParameter(f"scheme {tag} needs a channel estimator")
    if tag == "capacity-csit":
        return rate_capacity_csit(config, estimator, M, seed, mc, evaluation)
    if tag == "capacity-csir":
        return rate_capacity_csir(config, estimator, M, seed, mc, evaluation)
    if tag == "max-snr-csit":
        return rate_max_snr(config, estimator, M, seed, "full", mc, evaluation)
    if tag == "max-snr-csir":
        return rate_max_snr(config, estimator, M, seed, "rx-only", mc, evaluation)
    return rate_layered(config, estimator, M, seed, mc, evaluation)


def lower_bound(config: SystemConfig, estimator: EstimatorModel | None, M: int, seed: int, scheme: str,
                mc: MonteCarlo | None = None) -> RateEstimate:
    """Per-sub-block lower bound of a scheme (perfect-CSI variants are already per sub-block)."""
    return evaluate(scheme, config, estimator, M, seed, mc, evaluation="lower-bound")


def distinct_input_count(config: SystemConfig) -> int:
    """Number of distinct effective input matrices.

    Equals S^m * A^K unless a phase rotation maps the constellation onto
    itself (PSK), in which case different (theta, s) pairs coincide.
    """
    try:
        mats, _, _ = input_arrays(config)
    except CapacityExceeded:
        return config.input_count
    return make_support(mats, config.N).size


def high_snr_limit(config: SystemConfig, scheme: str) -> float:
    """Closed-form rate as the power grows without bound, in bits per channel use."""
    tag = resolve_scheme(scheme, config.csi)
    K, m, ell, tau = config.K, config.m, config.ell, config.tau
    log_s = math.log2(config.S)
    log_a = math.log2(config.A)
    if tag in ("perfect", "max-snr-perfect", "layered-perfect"):
        if tag == "perfect":
            return math.log2(distinct_input_count(config)) / m
        if tag == "max-snr-perfect":
            return log_s
        _check_mu(config)
        return ((m - config.mu) * log_s + K * log_a) / m
    _check_rate_config(config)
    frac = (ell - tau) / (m * ell)
    if tag in ("capacity-csit", "capacity-csir"):
        if tau < K:
            raise InvalidParameter(f"the joint-encoding limit needs tau >= K={K}, got tau={tau}")
        return frac * math.log2(distinct_input_count(config))
    if tag in ("max-snr-csit", "max-snr-csir"):
        if tau < 1:
            raise InvalidParameter(f"the max-SNR limit needs tau >= 1, got tau={tau}")
        return (ell - tau) * log_s / ell
    _check_mu(config)
    if tau < K:
        raise InvalidParameter(f"the layered limit needs tau >= K={K}, got tau={tau}")
    return frac * ((m - config.mu) * log_s + K * log_a)
