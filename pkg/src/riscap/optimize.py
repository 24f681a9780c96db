"""Frank-Wolfe maximization over power-constrained distributions, and discrete searches.

The feasible set for a support with per-element power ``t`` and budget ``b`` is
``{p >= 0, sum(p) = 1, p @ t <= b}``. Its vertices have at most two nonzero
entries, so the linear subproblem is solved exactly by checking single elements
with ``t <= b`` and pairs that straddle the budget.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import CapacityExceeded, InvalidParameter
from .estimation import enumerate_pilot_blocks, structured_pilot_block
from .model import ENUMERATION_CAP, SystemConfig

_SLACK = 1e-9


@dataclass(frozen=True)
class OptimizerSettings:
    max_iterations: int = 500
    convergence_tol: float = 1e-4
    step_rule: str = "exact-line-search"
    power_budget: float | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidParameter("max_iterations must be >= 1")
        if not self.convergence_tol > 0:
            raise InvalidParameter("convergence_tol must be positive")
        if self.step_rule not in ("exact-line-search", "diminishing"):
            raise InvalidParameter(f"unknown step rule {self.step_rule!r}")


class OptimizeResult(NamedTuple):
    probs: np.ndarray
    value: float
    converged: bool
    iterations: int
    gap: float


def max_entropy_feasible(traces, budget: float) -> np.ndarray:
    """Uniform when it meets the budget, otherwise the exponential tilt p ~ exp(-lam*t) on the budget."""
    t = np.asarray(traces, dtype=float)
    if t.min() > budget + _SLACK:
        raise InvalidParameter(f"budget {budget} is infeasible: cheapest element needs {t.min()}")
    n = t.size
    if t.mean() <= budget + _SLACK:
        return np.full(n, 1.0 / n)
    if np.isclose(t.min(), budget, rtol=0, atol=_SLACK):
        p = (t <= t.min() + _SLACK).astype(float)
        return p / p.sum()
    ts = t - t.min()

    def tilted(lam):
        w = np.exp(-lam * ts)
        return w / w.sum()

    def excess(lam):
        return tilted(lam) @ t - budget

    hi = 1.0
    while excess(hi) > 0:
        hi *= 2.0
        if hi > 1e12:  # pragma: no cover - budget above min(t) guarantees a root
            break
    lam = brentq(excess, 0.0, hi, xtol=1e-14, rtol=1e-14)
    p = tilted(lam)
    # nudge onto the feasible side when rounding leaves a tiny excess
    while p @ t > budget + _SLACK:
        lam *= 1.0 + 1e-9
        p = tilted(lam)
    return p


def linear_oracle(grad, traces, budget: float) -> np.ndarray:
    """argmax_q grad @ q over the simplex intersected with {q @ t <= budget}."""
    g = np.asarray(grad, dtype=float)
    t = np.asarray(traces, dtype=float)
    n = g.size
    # best element per distinct power level
    levels, inv = np.unique(np.round(t, 9), return_inverse=True)
    best_idx = np.full(levels.size, -1)
    for k in range(n):
        lv = inv[k]
        if best_idx[lv] < 0 or g[k] > g[best_idx[lv]]:
            best_idx[lv] = k
    lt = t[best_idx]
    lg = g[best_idx]
    ok = lt <= budget + _SLACK
    q = np.zeros(n)
    if not ok.any():
        raise InvalidParameter("budget infeasible for the linear subproblem")
    cand = np.flatnonzero(ok)
    i0 = cand[np.argmax(lg[cand])]
    best_val = lg[i0]
    choice = (best_idx[i0], None, 1.0)
    lo = np.flatnonzero(lt < budget - _SLACK)
    hi = np.flatnonzero(lt > budget + _SLACK)
    if lo.size and hi.size:
        a = (lt[hi][None, :] - budget) / (lt[hi][None, :] - lt[lo][:, None])  # weight on the low element
        val = a * lg[lo][:, None] + (1 - a) * lg[hi][None, :]
        r, c = np.unravel_index(np.argmax(val), val.shape)
        if val[r, c] > best_val:
            choice = (best_idx[lo[r]], best_idx[hi[c]], a[r, c])
    i, j, a = choice
    q[i] = a
    if j is not None:
        q[j] = 1 - a
    return q


def _as_objective(objective):
    if hasattr(objective, "value_and_grad"):
        return objective
    return _CallableObjective(objective)


class _CallableObjective:
    def __init__(self, fn):
        self.fn = fn

    def value_and_grad(self, p):
        return self.fn(p)

    def value(self, p):
        return self.fn(p)[0]


def maximize_distribution(objective, traces, budget: float, settings: OptimizerSettings | None = None,
                          init=None) -> OptimizeResult:
    """Frank-Wolfe ascent for a concave objective over power-constrained distributions.

    ``objective`` is either a callable ``p -> (value, grad)`` or an object with
    ``value_and_grad(p)``, ``value(p)`` and optionally ``segment(p, q)``
    returning a fast callable ``step -> value`` along ``p + step*(q - p)``.
    Iteration stops when the duality gap ``grad @ (q - p)`` falls below the
    tolerance, which bounds the distance to the optimum for concave objectives.
    """
    settings = settings or OptimizerSettings()
    obj = _as_objective(objective)
    t = np.asarray(traces, dtype=float)
    if budget is None:
        budget = settings.power_budget if settings.power_budget is not None else math.inf
    p = max_entropy_feasible(t, budget) if init is None else np.asarray(init, dtype=float)
    if t.size == 1:
        f, _ = obj.value_and_grad(p)
        return OptimizeResult(p, float(f), True, 0, 0.0)
    f, g = obj.value_and_grad(p)
    tol = settings.convergence_tol
    away = settings.step_rule == "exact-line-search"
    # active set for away steps: atom key -> (vertex, weight); the start point is an atom itself
    atoms = {"init": (p.copy(), 1.0)}
    gap = math.inf
    for it in range(1, settings.max_iterations + 1):
        q = linear_oracle(g, t, budget)
        direction = q - p
        gap = float(g @ direction)
        if gap <= tol:
            return OptimizeResult(p, float(f), True, it - 1, max(gap, 0.0))
        if not away:
            step = 2.0 / (it + 2.0)
            fs = _segment(obj, p, q)(step)
            target = q
        else:
            target, step, fs, kind = _best_step(obj, p, q, g, gap, atoms)
        if away and not fs > f:
            # a positive gap with no improving step means the objective is flat to
            # rounding along the direction; the gap still certifies near-optimality
            return OptimizeResult(p, float(f), gap <= 10 * tol, it, gap)
        if away:
            _update_atoms(atoms, kind, q, step)
        p = p + step * (target - p)
        p = np.clip(p, 0.0, None)
        p /= p.sum()
        f, g = obj.value_and_grad(p)
    return OptimizeResult(p, float(f), False, settings.max_iterations, gap)


def _line_max(line):
    res = minimize_scalar(lambda s: -line(s), bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-9})
    step, fs = float(res.x), -float(res.fun)
    f1 = line(1.0)
    if f1 >= fs:
        step, fs = 1.0, f1
    return step, fs


def _best_step(obj, p, q, g, gap, atoms):
    """Pick a toward (Frank-Wolfe) or away step, whichever has the larger directional slope."""
    if len(atoms) > 1:
        key = min(atoms, key=lambda k: float(g @ atoms[k][0]))
        v, a = atoms[key]
        away_gap = float(g @ (p - v))
        if away_gap > gap and a < 1.0 - 1e-12:
            gmax = a / (1.0 - a)
            end = p + gmax * (p - v)  # the point where v's weight reaches zero
            step, fs = _line_max(_segment(obj, p, end))
            return end, step, fs, ("away", key, gmax)
    step, fs = _line_max(_segment(obj, p, q))
    return q, step, fs, ("toward",)


def _update_atoms(atoms, kind, q, step):
    if kind[0] == "toward":
        key = tuple(np.flatnonzero(q))
        if step >= 1.0:
            atoms.clear()
            atoms[key] = (q, 1.0)
            return
        for k, (v, a) in list(atoms.items()):
            atoms[k] = (v, a * (1.0 - step))
        _, a = atoms.get(key, (q, 0.0))
        atoms[key] = (q, a + step)
    else:
        _, key, gmax = kind
        gam = step * gmax
        for k, (v, a) in list(atoms.items()):
            atoms[k] = (v, a * (1.0 + gam))
        v, a = atoms[key]
        a -= gam
        if step >= 1.0 or a <= 1e-15:
            del atoms[key]
        else:
            atoms[key] = (v, a)


def _segment(obj, p, q) -> Callable[[float], float]:
    if hasattr(obj, "segment"):
        return obj.segment(p, q)
    return lambda s: float(obj.value(p + s * (q - p)))


class SampledMutualInfo:
    """Sample-average mutual information as a function of the input distribution.

    Built from log-ratio arrays ``R`` of shape ``(B, n, n)`` (one per outer
    sample under common random numbers). Value is in bits.
    """

    def __init__(self, R: np.ndarray):
        self.c = R.max(axis=2)
        self.E = np.exp(R - self.c[:, :, None])
        self.B, self.n, _ = R.shape
        self._ct = self.c * (1.0 / math.log(2.0))

    def _inner(self, Ep):
        return self._ct + np.log2(np.maximum(Ep, 1e-300))

    def value(self, p) -> float:
        Ep = self.E @ p
        return -float(np.sum(self._inner(Ep) @ p)) / self.B

    def value_and_grad(self, p):
        Ep = self.E @ p
        S = self._inner(Ep)  # (B, n)
        val = -float(np.sum(S @ p)) / self.B
        w = p[None, :] / (np.maximum(Ep, 1e-300) * math.log(2.0))
        cross = w.reshape(1, -1) @ self.E.reshape(-1, self.n)
        cross = cross[0]
        grad = -(S.sum(axis=0) + cross) / self.B
        return val, grad

    def segment(self, p, q):
        Ep = self.E @ p
        Eq = self.E @ q
        ct = self._ct
        B = self.B

        def f(s):
            ps = p + s * (q - p)
            Es = Ep + s * (Eq - Ep)
            return -float(np.sum((ct + np.log2(np.maximum(Es, 1e-300))) @ ps)) / B

        return f


def search_phase_pattern(inner: Callable, A: int, K: int, cap: int = ENUMERATION_CAP):
    """Exhaustive maximization over theta in {0..A-1}^K; ties go to the first pattern."""
    if A**K > cap:
        raise CapacityExceeded("phase pattern space", A**K, cap)
    best, best_val = None, -math.inf
    for theta in itertools.product(range(A), repeat=K):
        v = float(inner(theta))
        if v > best_val:
            best, best_val = theta, v
    return best, best_val


@dataclass
class SweepTable:
    parameter: str
    rows: list = field(default_factory=list)  # (value, RateEstimate)

    @property
    def argmax(self):
        best = max(range(len(self.rows)), key=lambda i: (self.rows[i][1].bits_per_symbol, -i))
        return self.rows[best][0]


def sweep_discrete(parameter: str, values, rate_functional: Callable) -> SweepTable:
    """Evaluate ``rate_functional(value)`` for each value; reports the table and argmax."""
    if parameter not in ("tau", "mu"):
        raise InvalidParameter(f"unknown sweep parameter {parameter!r}")
    values = list(values)
    if not values:
        raise InvalidParameter("sweep range is empty")
    table = SweepTable(parameter)
    for v in values:
        try:
            est = rate_functional(v)
        except InvalidParameter as exc:
            raise InvalidParameter(f"invalid {parameter}={v}: {exc}") from exc
        table.rows.append((v, est))
    return table


class PilotSearchResult(NamedTuple):
    block: object
    estimate: object
    search_mode: str
    evaluated: int


def _gram_key(G, A: int, max_transforms: int = 5040) -> tuple:
    """Canonical form of a pilot Gram matrix under element permutations and phase relabeling.

    Both symmetries leave every rate unchanged: channel columns are i.i.d.
    and the input set is closed under multiplying rows by A-th roots of unity.
    """
    K = G.shape[0]
    if math.factorial(K) * A**K > max_transforms:
        return tuple(np.round(G, 8).ravel().tolist())
    roots = np.exp(2j * np.pi * np.arange(A) / A)
    best = None
    for perm in itertools.permutations(range(K)):
        Gp = G[np.ix_(perm, perm)]
        for ph in itertools.product(range(A), repeat=K):
            d = roots[list(ph)]
            H = d.conj()[:, None] * Gp * d[None, :]
            key = tuple(np.round(np.concatenate([H.real.ravel(), H.imag.ravel()]), 8).tolist())
            if best is None or key < best:
                best = key
    return best


def pilot_candidates(config: SystemConfig, cap: int = ENUMERATION_CAP):
    """Representative pilot blocks that can possibly be optimal.

    Blocks are grouped by the canonical form of their Gram matrix (the estimator
    depends on nothing else) and a group is dropped when another group's Gram
    matrix dominates it in the positive-semidefinite order: the better block
    then yields a less noisy estimate and cannot lose on any rate.
    Representatives are the lexicographically first block of each group.
    """
    reps = {}
    for block in enumerate_pilot_blocks(config, cap):
        key = _gram_key(block.gram(), config.A)
        if key not in reps:
            reps[key] = block
    blocks = list(reps.values())
    grams = [b.gram() for b in blocks]
    keep = []
    for i, Gi in enumerate(grams):
        dominated = False
        for j, Gj in enumerate(grams):
            if i == j:
                continue
            D = Gj - Gi
            if np.max(np.abs(D)) > 1e-9 and np.linalg.eigvalsh(0.5 * (D + D.conj().T)).min() >= -1e-9:
                dominated = True
                break
        if not dominated:
            keep.append(blocks[i])
    return keep


def search_pilots(config: SystemConfig, rate_functional: Callable, cap: int = ENUMERATION_CAP) -> PilotSearchResult:
    """Best pilot block by ``rate_functional(block)``, which returns a rate estimate.

    Exhaustive (over non-dominated Gram classes) when the pilot space fits the
    cap, otherwise the structured block. Ties keep the earlier candidate.
    """
    if config.tau < 1:
        raise InvalidParameter("pilot search needs tau >= 1")
    try:
        cands = pilot_candidates(config, cap)
    except CapacityExceeded:
        block = structured_pilot_block(config)
        return PilotSearchResult(block, rate_functional(block), "structured", 1)
    best, best_est = None, None
    for block in cands:
        est = rate_functional(block)
        val = getattr(est, "bits_per_symbol", est)
        if best is None or val > getattr(best_est, "bits_per_symbol", best_est):
            best, best_est = block, est
    return PilotSearchResult(best, best_est, "exhaustive", len(cands))
