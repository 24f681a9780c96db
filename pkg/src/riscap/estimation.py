"""Pilot blocks and the linear MMSE channel estimator.

During the first ``tau`` sub-blocks the transmitter sends known effective
inputs. The receiver observes ``y = gamma_tau * L @ hbar + noise`` where ``L``
stacks the Kronecker lifts of the pilots, and forms the MMSE estimate of
``hbar``. Because the prior on ``hbar`` is CN(0, I), the error covariance is
``(I_K + gamma_tau^2 * G)^{-1} kron I_N`` with ``G`` the pilot Gram matrix
``sum_i conj(X_i) X_i^T``; rates therefore depend on a pilot block only through
``G``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import rng as _rng
from .errors import CapacityExceeded, InvalidParameter
from .model import (
    ENUMERATION_CAP,
    EffectiveInput,
    SystemConfig,
    input_arrays,
    kron_lift,
)

_TRACE_SLACK = 1e-9


@dataclass(frozen=True)
class PilotBlock:
    pilots: tuple
    lifted: np.ndarray = field(repr=False, compare=False)
    N: int = 1

    @property
    def tau(self) -> int:
        return len(self.pilots)

    @property
    def trace(self) -> float:
        return float(sum(np.sum(np.abs(p.matrix) ** 2) for p in self.pilots))

    def gram(self) -> np.ndarray:
        """K x K matrix sum_i conj(X_i) X_i^T."""
        if not self.pilots:
            return np.zeros((0, 0), complex)
        Xcat = np.concatenate([p.matrix for p in self.pilots], axis=1)
        return Xcat.conj() @ Xcat.T


def make_pilot_block(pilots, N: int) -> PilotBlock:
    pilots = tuple(pilots)
    if not pilots:
        raise InvalidParameter("a pilot block needs at least one pilot; use build_estimator(None, ...) for tau=0")
    K, m = pilots[0].matrix.shape
    tr = sum(float(np.sum(np.abs(p.matrix) ** 2)) for p in pilots)
    if tr > K * m * len(pilots) + _TRACE_SLACK:
        raise InvalidParameter(f"pilot block trace {tr} exceeds the training budget {K * m * len(pilots)}")
    lifted = np.vstack([kron_lift(p.matrix, N) for p in pilots])
    lifted.setflags(write=False)
    return PilotBlock(pilots, lifted, N)


@dataclass(frozen=True)
class EstimatorModel:
    """MMSE estimator for a fixed pilot block.

    ``gain`` maps training outputs to the estimate, ``error_cov`` is the error
    covariance and ``prior_cov_root`` a square root of the covariance of the
    estimate itself, ``I - error_cov``.
    """

    gain: np.ndarray = field(repr=False)
    error_cov: np.ndarray = field(repr=False)
    prior_cov_root: np.ndarray = field(repr=False)
    gamma_tau: float = 0.0
    pilot_block: PilotBlock | None = None
    perfect: bool = False

    @property
    def dim(self) -> int:
        return self.error_cov.shape[0]

    def is_zero_error(self) -> bool:
        return not np.any(self.error_cov)


def _prior_root(error_cov: np.ndarray) -> np.ndarray:
    n = error_cov.shape[0]
    C = np.eye(n) - error_cov
    C = 0.5 * (C + C.conj().T)
    w, U = np.linalg.eigh(C)
    if w.min() < -1e-10:
        raise InvalidParameter(f"I - error_cov has eigenvalue {w.min():.3e} < -1e-10")
    w = np.clip(w, 0.0, None)
    return (U * np.sqrt(w)) @ U.conj().T


def build_estimator(pilot_block: PilotBlock | None, gamma_tau: float, N: int, K: int | None = None) -> EstimatorModel:
    """MMSE gain and error covariance; ``pilot_block=None`` means no training."""
    if pilot_block is None or pilot_block.tau == 0:
        if K is None:
            raise InvalidParameter("K is required when there are no pilots")
        nk = N * K
        return EstimatorModel(np.zeros((nk, 0), complex), np.eye(nk, dtype=complex),
                              np.zeros((nk, nk), complex), float(gamma_tau), None)
    L = pilot_block.lifted
    nk = L.shape[1]
    M = gamma_tau**2 * (L @ L.conj().T) + np.eye(L.shape[0])
    try:
        cf = sla.cho_factor(M, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - I + PSD is PD
        raise RuntimeError("factorization of the training covariance failed") from exc
    # M is Hermitian, so gamma * L^H M^{-1} = gamma * (M^{-1} L)^H
    gain = gamma_tau * sla.cho_solve(cf, L).conj().T
    err = np.eye(nk) - gamma_tau * (gain @ L)
    err = 0.5 * (err + err.conj().T)
    return EstimatorModel(gain, err, _prior_root(err), float(gamma_tau), pilot_block)


def perfect_estimator(N: int, K: int) -> EstimatorModel:
    """Exact channel knowledge: zero error, estimate distributed as CN(0, I)."""
    nk = N * K
    return EstimatorModel(np.zeros((nk, 0), complex), np.zeros((nk, nk), complex),
                          np.eye(nk, dtype=complex), math.inf, None, perfect=True)


def training_output(pilot_block: PilotBlock, gamma_tau: float, hbar, noise) -> np.ndarray:
    hbar = np.asarray(hbar, dtype=complex)
    noise = np.asarray(noise, dtype=complex)
    L = pilot_block.lifted
    if hbar.shape != (L.shape[1],) or noise.shape != (L.shape[0],):
        raise InvalidParameter(
            f"dimension mismatch: lifted pilots are {L.shape}, hbar {hbar.shape}, noise {noise.shape}"
        )
    return gamma_tau * (L @ hbar) + noise


def estimate(model: EstimatorModel, training_y) -> np.ndarray:
    y = np.asarray(training_y, dtype=complex)
    if y.shape != (model.gain.shape[1],):
        raise InvalidParameter(f"training output has shape {y.shape}, expected ({model.gain.shape[1]},)")
    return model.gain @ y


def sample_estimate_prior(model: EstimatorModel, rng_state) -> np.ndarray:
    """One draw of the channel estimate from its marginal CN(0, I - error_cov)."""
    gen = _rng.as_generator(rng_state)
    w = _rng.complex_normal(gen, model.dim)
    return model.prior_cov_root @ w


def estimator_from_gram(G: np.ndarray, gamma_tau: float, N: int) -> EstimatorModel:
    """Estimator statistics determined by the pilot Gram matrix alone (no gain)."""
    K = G.shape[0]
    inner = np.eye(K) + gamma_tau**2 * G
    err_k = np.linalg.inv(0.5 * (inner + inner.conj().T))
    err = np.kron(0.5 * (err_k + err_k.conj().T), np.eye(N))
    return EstimatorModel(np.zeros((N * K, 0), complex), err, _prior_root(err), float(gamma_tau), None)


def enumerate_pilot_blocks(config: SystemConfig, cap: int = ENUMERATION_CAP):
    """Yield every tau-tuple of effective inputs meeting the training power budget."""
    tau = config.tau
    if tau < 1:
        raise InvalidParameter("pilot enumeration needs tau >= 1")
    n = config.input_count
    if n**tau > cap:
        raise CapacityExceeded("pilot block space", n**tau, cap,
                               "use structured_pilot_block instead")
    mats, th, si = input_arrays(config, cap=cap)
    inputs = [EffectiveInput(X, tuple(map(int, t)), tuple(map(int, s))) for X, t, s in zip(mats, th, si)]
    traces = np.sum(np.abs(mats) ** 2, axis=(1, 2))
    budget = config.K * config.m * tau + _TRACE_SLACK
    for combo in itertools.product(range(n), repeat=tau):
        if traces[list(combo)].sum() <= budget:
            yield make_pilot_block([inputs[i] for i in combo], config.N)


def walsh_phase_rows(K: int, A: int, rows: int) -> np.ndarray:
    """A-ary analogue of a DFT/Hadamard pattern: entry (r, k) = sum_d r_d*k_d mod A."""
    if A == 1:
        return np.zeros((rows, K), dtype=int)
    digits = 1
    while A**digits < K:
        digits += 1
    period = A**digits

    def to_digits(x):
        return [(x // A**d) % A for d in range(digits)]

    kd = np.array([to_digits(k) for k in range(K)])
    out = np.empty((rows, K), dtype=int)
    for r in range(rows):
        rd = np.array(to_digits(r % period))
        out[r] = (kd @ rd) % A
    return out


def structured_pilot_symbol(config: SystemConfig) -> int:
    """Index of the largest-modulus constellation point with power at most one."""
    pts = config.constellation.array()
    power = np.abs(pts) ** 2
    ok = np.flatnonzero(power <= 1 + 1e-12)
    best = ok[np.argmax(power[ok])]
    # prefer the point closest to 1 among equal-power candidates
    ties = ok[np.isclose(power[ok], power[best])]
    return int(ties[np.argmin(np.abs(pts[ties] - 1))])


def structured_pilot_block(config: SystemConfig) -> PilotBlock:
    """Deterministic pilots: Walsh-type phase rows with a fixed pilot symbol."""
    if config.tau < 1:
        raise InvalidParameter("structured pilots need tau >= 1")
    rows = walsh_phase_rows(config.K, config.A, config.tau)
    s = structured_pilot_symbol(config)
    phasors = config.phase_set.phasors()
    point = config.constellation.array()[s]
    pilots = []
    for r in rows:
        X = phasors[r][:, None] * np.full((1, config.m), point)
        X.setflags(write=False)
        pilots.append(EffectiveInput(X, tuple(int(v) for v in r), (s,) * config.m))
    return make_pilot_block(pilots, config.N)
