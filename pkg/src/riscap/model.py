"""Constellations, phase sets, system configuration and the effective input set.

An effective input is the rank-one ``K x m`` matrix ``exp(j*theta) s^T`` that
combines one RIS phase pattern with ``m`` transmitted symbols. The set of all
such matrices is the input alphabet of the equivalent MIMO channel.

Enumeration order is lexicographic over the phase indices first and the symbol
indices second; probability vectors elsewhere index into this order.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .errors import CapacityExceeded, InvalidParameter

ENUMERATION_CAP = 2**20


def _roots_of_unity(n: int) -> np.ndarray:
    z = np.exp(2j * np.pi * np.arange(n) / n)
    # snap rounding noise so that e.g. exp(j*pi) is exactly -1
    z.real[np.abs(z.real) < 1e-15] = 0.0
    z.imag[np.abs(z.imag) < 1e-15] = 0.0
    return z


@dataclass(frozen=True)
class Constellation:
    points: tuple
    kind: str

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        if pts.size == 0:
            raise InvalidParameter("constellation must have at least one point")
        if len(set(np.round(pts, 12).tolist())) != pts.size:
            raise InvalidParameter("constellation points must be distinct")

    @property
    def size(self) -> int:
        return len(self.points)

    def array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=complex)


@dataclass(frozen=True)
class PhaseSet:
    phases: tuple

    @property
    def size(self) -> int:
        return len(self.phases)

    def phasors(self) -> np.ndarray:
        return _roots_of_unity(self.size)


def make_ask(S: int) -> Constellation:
    """Unipolar ASK {sigma, 3 sigma, ..., (2S-1) sigma} with unit average power."""
    if S < 1:
        raise InvalidParameter(f"constellation size must be >= 1, got S={S}")
    sigma = math.sqrt(3.0 / (3.0 + 4.0 * (S * S - 1)))
    return Constellation(tuple(complex((2 * i + 1) * sigma) for i in range(S)), "ask")


def make_psk(S: int) -> Constellation:
    if S < 1:
        raise InvalidParameter(f"constellation size must be >= 1, got S={S}")
    return Constellation(tuple(complex(z) for z in _roots_of_unity(S)), "psk")


def make_constellation(kind: str, S: int) -> Constellation:
    kind = kind.lower()
    if kind == "ask":
        return make_ask(S)
    if kind == "psk":
        return make_psk(S)
    raise InvalidParameter(f"unknown constellation kind {kind!r} (expected ask or psk)")


def make_phase_set(A: int) -> PhaseSet:
    if A < 1:
        raise InvalidParameter(f"phase set size must be >= 1, got A={A}")
    return PhaseSet(tuple(2 * math.pi * a / A for a in range(A)))


@dataclass(frozen=True)
class SystemConfig:
    """All scalar parameters of the link.

    ``P`` is the average transmit power (linear). ``gamma_tau`` and ``gamma_d``
    are the amplitude gains used during training and data sub-blocks; they must
    satisfy the average power split ``(tau*gt^2 + (ell-tau)*gd^2)/ell = P``.
    ``csi`` selects whether the receiver works with an estimate
    (``"estimated"``) or knows the channel exactly (``"perfect"``).
    """

    N: int
    K: int
    phase_set: PhaseSet
    constellation: Constellation
    m: int
    ell: int
    tau: int
    mu: int
    P: float
    gamma_tau: float
    gamma_d: float
    csi: str = "estimated"

    def __post_init__(self):
        for name in ("N", "K", "m", "ell"):
            if int(getattr(self, name)) < 1:
                raise InvalidParameter(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0 <= self.tau <= self.ell:
            raise InvalidParameter(f"tau must satisfy 0 <= tau <= ell, got tau={self.tau}, ell={self.ell}")
        if self.mu < 0:
            raise InvalidParameter(f"mu must be >= 0, got {self.mu}")
        if self.csi not in ("estimated", "perfect"):
            raise InvalidParameter(f"csi must be 'estimated' or 'perfect', got {self.csi!r}")
        if self.P < 0 or self.gamma_tau < 0 or self.gamma_d < 0:
            raise InvalidParameter("power and gains must be nonnegative")
        used = (self.tau * self.gamma_tau**2 + (self.ell - self.tau) * self.gamma_d**2) / self.ell
        if abs(used - self.P) > 1e-12 * max(self.P, 1e-300) and not (self.P == 0 and used == 0):
            raise InvalidParameter(
                f"power split violates the average power: got {used!r}, expected P={self.P!r}"
            )

    @property
    def A(self) -> int:
        return self.phase_set.size

    @property
    def S(self) -> int:
        return self.constellation.size

    @property
    def n_data(self) -> int:
        return self.ell - self.tau

    @property
    def P_dB(self) -> float:
        return 10 * math.log10(self.P) if self.P > 0 else -math.inf

    @property
    def input_count(self) -> int:
        return self.A**self.K * self.S**self.m

    def replace(self, **changes) -> "SystemConfig":
        """Copy with changes; a new ``P`` re-derives the equal power split."""
        if "P_dB" in changes:
            changes["P"] = 10 ** (changes.pop("P_dB") / 10)
        if "P" in changes and "gamma_tau" not in changes and "gamma_d" not in changes:
            g = math.sqrt(changes["P"])
            changes["gamma_tau"] = g
            changes["gamma_d"] = g
        return dataclasses.replace(self, **changes)


def make_config(
    N: int = 2,
    K: int = 2,
    A: int = 2,
    constellation: str = "ask",
    S: int = 4,
    m: int = 1,
    ell: int = 4,
    tau: int = 2,
    mu: int = 1,
    P_dB: float = 0.0,
    gamma_tau: float | None = None,
    gamma_d: float | None = None,
    csi: str = "estimated",
) -> SystemConfig:
    """Build a config; gains default to the equal split gamma_tau = gamma_d = sqrt(P)."""
    P = 10 ** (P_dB / 10)
    if gamma_tau is None and gamma_d is None:
        gamma_tau = gamma_d = math.sqrt(P)
    elif gamma_tau is None or gamma_d is None:
        raise InvalidParameter("give both gamma_tau and gamma_d or neither")
    return SystemConfig(
        N=int(N), K=int(K), phase_set=make_phase_set(int(A)),
        constellation=make_constellation(constellation, int(S)),
        m=int(m), ell=int(ell), tau=int(tau), mu=int(mu), P=P,
        gamma_tau=float(gamma_tau), gamma_d=float(gamma_d), csi=csi,
    )


@dataclass(frozen=True)
class EffectiveInput:
    matrix: np.ndarray = field(repr=False, compare=False)
    theta: tuple
    s: tuple


def _check_cap(what: str, size: int, cap: int, advice: str = ""):
    if size > cap:
        raise CapacityExceeded(what, size, cap, advice)


def input_arrays(config: SystemConfig, theta=None, cap: int = ENUMERATION_CAP):
    """Vectorized enumeration.

    Returns ``(matrices, theta_idx, s_idx)`` with shapes ``(n, K, m)``,
    ``(n, K)`` and ``(n, m)``. With ``theta`` given only that pattern is used.
    """
    K, m, A, S = config.K, config.m, config.A, config.S
    if theta is None:
        n = A**K * S**m
        _check_cap("input set", n, cap)
        thetas = np.array(list(itertools.product(range(A), repeat=K)), dtype=int).reshape(-1, K)
    else:
        theta = tuple(int(t) for t in theta)
        if len(theta) != K or any(t < 0 or t >= A for t in theta):
            raise InvalidParameter(f"invalid phase index vector {theta} for K={K}, A={A}")
        _check_cap("input set", S**m, cap)
        thetas = np.array([theta], dtype=int)
    syms = np.array(list(itertools.product(range(S), repeat=m)), dtype=int).reshape(-1, m)
    phasor = config.phase_set.phasors()[thetas]  # (nt, K)
    points = config.constellation.array()[syms]  # (ns, m)
    mats = phasor[:, None, :, None] * points[None, :, None, :]
    nt, ns = len(thetas), len(syms)
    mats = mats.reshape(nt * ns, K, m)
    theta_idx = np.repeat(thetas, ns, axis=0)
    s_idx = np.tile(syms, (nt, 1))
    return mats, theta_idx, s_idx


def _wrap(mats, theta_idx, s_idx):
    out = []
    for X, t, s in zip(mats, theta_idx, s_idx):
        X = X.copy()
        X.setflags(write=False)
        out.append(EffectiveInput(X, tuple(int(v) for v in t), tuple(int(v) for v in s)))
    return out


def enumerate_inputs(config: SystemConfig, cap: int = ENUMERATION_CAP) -> list:
    return _wrap(*input_arrays(config, cap=cap))


def enumerate_inputs_fixed_phase(theta, config: SystemConfig, cap: int = ENUMERATION_CAP) -> list:
    return _wrap(*input_arrays(config, theta=theta, cap=cap))


@dataclass(frozen=True)
class ChannelRealization:
    g: np.ndarray
    H: np.ndarray
    hbar: np.ndarray


def sample_channel(rng_state, N: int, K: int) -> ChannelRealization:
    """Draw unit-modulus RIS gains and an i.i.d. CN(0,1) RIS-to-receiver matrix."""
    gen = _rng.as_generator(rng_state)
    phi = gen.uniform(0.0, 2 * np.pi, size=K)
    g = np.exp(1j * phi)
    H = _rng.complex_normal(gen, (N, K))
    hbar = stack(H * g[None, :])
    return ChannelRealization(g, H, hbar)


def stack(M: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(M).reshape(-1, order="F")


def kron_lift(X: np.ndarray, N: int) -> np.ndarray:
    """``X^T kron I_N``, so that stack(Hbar @ X) = kron_lift(X, N) @ stack(Hbar)."""
    return np.kron(np.asarray(X).T, np.eye(N))


def kron_lift_batch(X: np.ndarray, N: int) -> np.ndarray:
    """kron_lift applied to a stack of matrices of shape ``(n, K, q)``."""
    X = np.asarray(X)
    n, K, q = X.shape
    eye = np.eye(N)
    return np.einsum("nkq,ab->nqakb", X, eye).reshape(n, q * N, K * N)
