"""Rate primitives and the Monte-Carlo engine behind every rate formula.

Notation used throughout: for a data block ``X`` with lifted matrix ``L(X)``,
given the channel estimate ``hhat`` with error covariance ``Ge``, the received
data block is Gaussian with mean ``gamma_d * L(X) @ hhat`` and covariance
``Gamma(X) = I + gamma_d^2 * L(X) @ Ge @ L(X)^H``.

For two candidate inputs the log-likelihood variable is

    u(X1, X2) = ln(|Gamma(X1)| / |Gamma(X2)|)
                - || V(X1) z + gamma_d (L(X1) - L(X2)) hhat ||^2_{Gamma(X2)}

with ``V`` the lower Cholesky factor of ``Gamma`` and ``z ~ CN(0, I_d)``.
The mutual information between input and output given ``hhat`` is

    I = -d*log2(e) - E[ sum_X1 p(X1) log2 sum_X2 p(X2) exp(u) ].

Since ``u(X1, X1) = -||z||^2`` and ``E||z||^2 = d``, the engine works with the
shifted variable ``u + ||z||^2`` (the log of a likelihood ratio), which gives
the same mean with much smaller variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import InvalidParameter
from .model import EffectiveInput, kron_lift, kron_lift_batch

LOG2E = 1.0 / math.log(2.0)

# upper bound on complex scratch elements per engine chunk (about 32 MB)
_CHUNK_ELEMENTS = 2**21


# ---------------------------------------------------------------------------
# single-instance primitives


@dataclass(frozen=True)
class BlockInput:
    """A data block: one effective input per data sub-block, lifted jointly."""

    inputs: tuple
    lifted: np.ndarray = field(repr=False, compare=False)

    @property
    def matrix(self) -> np.ndarray:
        return np.concatenate([x.matrix for x in self.inputs], axis=1)

    @property
    def trace(self) -> float:
        return float(sum(np.sum(np.abs(x.matrix) ** 2) for x in self.inputs))


def make_block_input(inputs, N: int) -> BlockInput:
    inputs = tuple(inputs)
    if not inputs:
        raise InvalidParameter("a data block needs at least one sub-block")
    lifted = np.vstack([kron_lift(x.matrix, N) for x in inputs])
    return BlockInput(inputs, lifted)


@dataclass(frozen=True)
class PhaseShiftMatrix:
    """K x L matrix with entries sqrt(mu)*exp(j*theta), one column per data sub-block."""

    theta: tuple  # L tuples of K phase indices
    matrix: np.ndarray = field(repr=False, compare=False)
    lifted: np.ndarray = field(repr=False, compare=False)


def make_phase_shift_matrix(thetas, phase_set, mu: int, N: int) -> PhaseShiftMatrix:
    if mu < 1:
        raise InvalidParameter(f"mu must be >= 1, got {mu}")
    thetas = tuple(tuple(int(v) for v in t) for t in thetas)
    ph = phase_set.phasors()
    Q = math.sqrt(mu) * np.array([ph[list(t)] for t in thetas]).T
    return PhaseShiftMatrix(thetas, Q, kron_lift(Q, N))


def _lifted_of(block) -> np.ndarray:
    if isinstance(block, np.ndarray):
        return block
    if isinstance(block, EffectiveInput):
        raise InvalidParameter("pass a BlockInput (or a lifted matrix), not a bare EffectiveInput")
    return block.lifted


@dataclass(frozen=True)
class ShapedCovariance:
    gamma: np.ndarray = field(repr=False)
    root: np.ndarray = field(repr=False)
    log_det: float = 0.0


def shaped_covariance(block, error_cov, gamma_d: float) -> ShapedCovariance:
    """Gamma(X) = I + gamma_d^2 L Ge L^H with its lower Cholesky factor."""
    L = _lifted_of(block)
    error_cov = np.asarray(error_cov)
    if L.shape[1] != error_cov.shape[0]:
        raise InvalidParameter(f"lifted block has {L.shape[1]} columns, error covariance is {error_cov.shape}")
    d = L.shape[0]
    G = np.eye(d) + gamma_d**2 * (L @ error_cov @ L.conj().T)
    G = 0.5 * (G + G.conj().T)
    try:
        V = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - I + PSD
        raise RuntimeError("Cholesky factorization of the shaped covariance failed") from exc
    return ShapedCovariance(G, V, float(2.0 * np.sum(np.log(np.real(np.diag(V))))))


def mahalanobis_sq(v, cov: ShapedCovariance) -> float:
    """v^H Gamma^{-1} v via a triangular solve against the Cholesky factor."""
    v = np.asarray(v, dtype=complex)
    if v.shape != (cov.root.shape[0],):
        raise InvalidParameter(f"vector of shape {v.shape} does not match covariance of size {cov.root.shape[0]}")
    w = sla.solve_triangular(cov.root, v, lower=True)
    return float(np.real(np.vdot(w, w)))


def _check_u_dims(L1, L2, z, hhat):
    if L1.shape != L2.shape:
        raise InvalidParameter(f"blocks have different shapes {L1.shape} and {L2.shape}")
    if z.shape != (L1.shape[0],):
        raise InvalidParameter(f"z has shape {z.shape}, expected ({L1.shape[0]},)")
    if hhat.shape != (L1.shape[1],):
        raise InvalidParameter(f"hhat has shape {hhat.shape}, expected ({L1.shape[1]},)")


def u_value(X1, X2, z, hhat, error_cov, gamma_d: float) -> float:
    """Log-likelihood variable u(X1, X2) for one noise and estimate draw (natural log)."""
    L1, L2 = _lifted_of(X1), _lifted_of(X2)
    z = np.asarray(z, dtype=complex)
    hhat = np.asarray(hhat, dtype=complex)
    _check_u_dims(L1, L2, z, hhat)
    c1 = shaped_covariance(L1, error_cov, gamma_d)
    c2 = shaped_covariance(L2, error_cov, gamma_d)
    v = c1.root @ z + gamma_d * ((L1 - L2) @ hhat)
    return c1.log_det - c2.log_det - mahalanobis_sq(v, c2)


def u_value_perfect(X1, X2, z, h, gamma_d: float) -> float:
    """u for exact channel knowledge: -||z + gamma_d (L(X1) - L(X2)) h||^2."""
    L1, L2 = _lifted_of(X1), _lifted_of(X2)
    z = np.asarray(z, dtype=complex)
    h = np.asarray(h, dtype=complex)
    _check_u_dims(L1, L2, z, h)
    v = z + gamma_d * ((L1 - L2) @ h)
    return -float(np.real(np.vdot(v, v)))


def _log_density(y, mean, cov: ShapedCovariance) -> float:
    d = y.shape[0]
    return -d * math.log(math.pi) - cov.log_det - mahalanobis_sq(y - mean, cov)


def likelihood_ratio_check(X1, X2, z, hhat, error_cov, gamma_d: float):
    """Return (exp(u + ||z||^2), p(y|X2)/p(y|X1)) at y = gamma_d L(X1) hhat + V(X1) z.

    The second value is computed from the Gaussian densities directly, so the
    pair is an independent consistency check of ``u_value``.
    """
    L1, L2 = _lifted_of(X1), _lifted_of(X2)
    z = np.asarray(z, dtype=complex)
    hhat = np.asarray(hhat, dtype=complex)
    u = u_value(L1, L2, z, hhat, error_cov, gamma_d)
    lhs = math.exp(u + float(np.real(np.vdot(z, z))))
    c1 = shaped_covariance(L1, error_cov, gamma_d)
    c2 = shaped_covariance(L2, error_cov, gamma_d)
    y = gamma_d * (L1 @ hhat) + c1.root @ z
    rhs = math.exp(_log_density(y, gamma_d * (L2 @ hhat), c2) - _log_density(y, gamma_d * (L1 @ hhat), c1))
    return lhs, rhs


# ---------------------------------------------------------------------------
# supports and the vectorized log-ratio kernel


@dataclass(frozen=True)
class InputSupport:
    """Finite list of distinct input matrices, each of shape (K, q)."""

    matrices: np.ndarray = field(repr=False)
    N: int = 1
    labels: tuple = ()

    @property
    def size(self) -> int:
        return self.matrices.shape[0]

    @property
    def traces(self) -> np.ndarray:
        return np.sum(np.abs(self.matrices) ** 2, axis=(1, 2))

    @property
    def dim(self) -> int:
        return self.N * self.matrices.shape[2]

    def lifted(self) -> np.ndarray:
        return kron_lift_batch(self.matrices, self.N)


def make_support(matrices, N: int, labels=None, dedupe: bool = True) -> InputSupport:
    """Build a support, merging numerically identical matrices (first one wins)."""
    mats = np.asarray(matrices, dtype=complex)
    if mats.ndim != 3 or mats.shape[0] == 0:
        raise InvalidParameter("support must be a nonempty stack of matrices")
    labels = tuple(labels) if labels is not None else tuple(range(mats.shape[0]))
    if dedupe:
        keys = np.round(mats.reshape(mats.shape[0], -1), 10) + 0.0  # + 0.0 folds -0.0 into 0.0 for the byte key
        seen = {}
        keep = []
        for i, row in enumerate(keys):
            k = row.tobytes()
            if k not in seen:
                seen[k] = i
                keep.append(i)
        if len(keep) < mats.shape[0]:
            mats = mats[keep]
            labels = tuple(labels[i] for i in keep)
    mats = mats.copy()
    mats.setflags(write=False)
    return InputSupport(mats, int(N), labels)


@dataclass(frozen=True)
class InputDistribution:
    support: InputSupport
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (self.support.size,):
            raise InvalidParameter(f"probability vector has shape {p.shape}, support has {self.support.size} elements")
        if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-10:
            raise InvalidParameter("probabilities must be nonnegative and sum to one")

    def expected_trace(self) -> float:
        return float(self.probs @ self.support.traces)


def uniform(support: InputSupport) -> InputDistribution:
    return InputDistribution(support, np.full(support.size, 1.0 / support.size))


class LogRatioKernel:
    """Precomputed per-support quantities for evaluating u + ||z||^2 in bulk.

    ``log_ratio(hhat, z)`` returns an array ``R`` of shape ``(B, n, n)`` with
    ``R[b, i, j] = ln p(y_bi | X_j) - ln p(y_bi | X_i)`` where
    ``y_bi = gamma_d L(X_i) hhat_b + V(X_i) z_b``.
    """

    def __init__(self, support: InputSupport, error_cov, gamma_d: float):
        self.support = support
        self.gamma_d = float(gamma_d)
        L = support.lifted()
        self.n, self.d, self.nk = L.shape
        error_cov = np.asarray(error_cov)
        if error_cov.shape != (self.nk, self.nk):
            raise InvalidParameter(f"error covariance {error_cov.shape} does not match channel dimension {self.nk}")
        self.mean_op = self.gamma_d * L
        self.white = not np.any(error_cov) or self.gamma_d == 0.0
        if self.white:
            self.roots = None
            self.whiten = None
            self.log_det = np.zeros(self.n)
        else:
            G = np.eye(self.d) + self.gamma_d**2 * np.einsum("nab,bc,ndc->nad", L, error_cov, L.conj())
            G = 0.5 * (G + np.conj(np.swapaxes(G, 1, 2)))
            V = np.linalg.cholesky(G)
            self.roots = V
            self.log_det = 2.0 * np.sum(np.log(np.real(np.diagonal(V, axis1=1, axis2=2))), axis=1)
            eye = np.broadcast_to(np.eye(self.d), V.shape)
            self.whiten = np.linalg.solve(V, eye)
        per_sample = self.n * self.n * self.d
        self.chunk = max(1, _CHUNK_ELEMENTS // per_sample)
        # rows of R per chunk when a single sample already exceeds the budget
        self.row_chunk = self.n if self.chunk > 1 else max(1, _CHUNK_ELEMENTS // (self.n * self.d))

    def _block(self, hhat, z, rows):
        """R[:, rows, :] for a chunk of samples."""
        B = z.shape[0]
        r = rows.size
        mu = np.einsum("ndk,bk->bnd", self.mean_op, hhat)
        zz = np.real(np.einsum("bd,bd->b", z.conj(), z))
        if self.white:
            y = mu[:, rows] + z[:, None, :]
            diff = y[:, :, None, :] - mu[:, None, :, :]
            q = np.einsum("bijd,bijd->bij", diff.real, diff.real) + np.einsum("bijd,bijd->bij", diff.imag, diff.imag)
            R = zz[:, None, None] - q
        else:
            y = mu[:, rows] + np.einsum("nde,be->bnd", self.roots[rows], z)
            # whitened y_i for every X_j: (n_j, d, B*r)
            Wy = np.matmul(self.whiten, y.reshape(B * r, self.d).T)
            Wy = Wy.reshape(self.n, self.d, B, r)
            Wmu = np.einsum("jde,bje->jdb", self.whiten, mu)
            diff = Wy - Wmu[:, :, :, None]
            q = np.sum(diff.real**2 + diff.imag**2, axis=1)  # (n_j, B, r)
            q = np.transpose(q, (1, 2, 0))
            R = zz[:, None, None] - q + (self.log_det[rows][:, None] - self.log_det[None, :])[None]
        R[:, np.arange(r), rows] = 0.0
        return R

    def _chunks(self, hhat, z):
        hhat = np.atleast_2d(np.asarray(hhat, dtype=complex))
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        B = z.shape[0]
        if hhat.shape[0] == 1 and B > 1:
            hhat = np.broadcast_to(hhat, (B, self.nk))
        if z.shape[1] != self.d or hhat.shape != (B, self.nk):
            raise InvalidParameter(f"expected z of width {self.d} and hhat of width {self.nk}")
        return hhat, z, B

    def log_ratio(self, hhat, z) -> np.ndarray:
        hhat, z, B = self._chunks(hhat, z)
        out = np.empty((B, self.n, self.n))
        for s in range(0, B, self.chunk):
            for r0 in range(0, self.n, self.row_chunk):
                rows = np.arange(r0, min(r0 + self.row_chunk, self.n))
                out[s:s + self.chunk, rows] = self._block(hhat[s:s + self.chunk], z[s:s + self.chunk], rows)
        return out

    def density(self, hhat, z, probs) -> np.ndarray:
        """``info_density(self.log_ratio(hhat, z), probs)`` without holding the full array."""
        hhat, z, B = self._chunks(hhat, z)
        p = np.asarray(probs, dtype=float)
        act = np.flatnonzero(p > 0)
        pa = p[act]
        out = np.zeros(B)
        for s in range(0, B, self.chunk):
            for r0 in range(0, act.size, self.row_chunk):
                rows = act[r0:r0 + self.row_chunk]
                R = self._block(hhat[s:s + self.chunk], z[s:s + self.chunk], rows)[:, :, act]
                c = R.max(axis=2, keepdims=True)
                inner = np.log(np.einsum("bij,j->bi", np.exp(R - c), pa)) + c[..., 0]
                out[s:s + self.chunk] += inner @ p[rows]
        return out * LOG2E


def info_density(R: np.ndarray, probs) -> np.ndarray:
    """Per-sample statistic sum_i p_i log2 sum_j p_j exp(R_ij), shape (B,).

    Its negated mean estimates the mutual information in bits.
    """
    p = np.asarray(probs, dtype=float)
    act = np.flatnonzero(p > 0)
    Ra = R[:, act][:, :, act]
    pa = p[act]
    c = Ra.max(axis=2, keepdims=True)
    inner = np.log(np.einsum("bij,j->bi", np.exp(Ra - c), pa)) + c[..., 0]
    return (inner @ pa) * LOG2E


# ---------------------------------------------------------------------------
# CGF estimator and scalar oracle


def conditional_cgf(p1, p2, sample_source, M: int):
    """Monte-Carlo estimate of E[ sum_i p1_i log2 sum_j p2_j exp(u_ij) ].

    ``sample_source(k)`` returns the ``(n1, n2)`` matrix of u values for outer
    sample ``k``. Returns ``(kappa, stderr)`` where stderr is the sample
    standard deviation of the per-sample statistic over sqrt(M).
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.size == 0 or p2.size == 0:
        raise InvalidParameter("empty support")
    if M < 1:
        raise InvalidParameter("M must be >= 1")
    a1 = np.flatnonzero(p1 > 0)
    a2 = np.flatnonzero(p2 > 0)
    logp2 = np.log(p2[a2])
    vals = np.empty(M)
    for k in range(M):
        u = np.asarray(sample_source(k), dtype=float)[np.ix_(a1, a2)] + logp2
        c = u.max(axis=1)
        vals[k] = (p1[a1] @ (c + np.log(np.sum(np.exp(u - c[:, None]), axis=1)))) * LOG2E
    kappa = float(np.mean(vals))
    err = float(np.std(vals, ddof=1) / math.sqrt(M)) if M > 1 else 0.0
    return kappa, err


def mi_oracle_scalar(points, weights, gamma_d: float, h: complex, step: float = 0.02, extent: float = 8.0) -> float:
    """I(x; y) for y = gamma_d*h*x + w, w ~ CN(0, 1), by 2-D grid integration.

    The grid covers the hull of the noiseless points padded by ``extent``
    noise standard deviations per real dimension on each side.
    """
    if step > 0.05:
        raise InvalidParameter(f"grid step {step} is coarser than 0.05")
    pts = np.asarray(points, dtype=complex).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    w = w / w.sum()
    if pts.size == 1:
        return 0.0
    c = gamma_d * h * pts
    sd = math.sqrt(0.5)
    pad = extent * sd
    xs = np.arange(c.real.min() - pad, c.real.max() + pad + step, step)
    ys = np.arange(c.imag.min() - pad, c.imag.max() + pad + step, step)
    # differential entropy of the mixture minus that of the noise, in bits
    h_y = 0.0
    for y0 in ys:
        yy = xs + 1j * y0
        dens = np.zeros(xs.size)
        for ck, wk in zip(c, w):
            dens += wk * np.exp(-np.abs(yy - ck) ** 2) / math.pi
        nz = dens > 0
        h_y -= np.sum(dens[nz] * np.log2(dens[nz]))
    h_y *= step * step
    return float(h_y - math.log2(math.pi * math.e))
