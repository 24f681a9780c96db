"""Scenario files, sweep runner and CSV output.

A scenario fixes a base configuration, a list of scheme tags and one swept
axis. Each (axis value, scheme) pair becomes one row. Failures at a single
point are written into that row instead of aborting the sweep.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InvalidParameter, NoDataSubBlocks
from .estimation import build_estimator, structured_pilot_block
from .model import ENUMERATION_CAP, SystemConfig, make_config
from .optimize import pilot_candidates, search_pilots
from .schemes import MonteCarlo, RateEstimate, evaluate, resolve_scheme

AXES = ("power_db", "tau", "ell", "antennas", "control_rate_m")
EVALUATIONS = ("exact", "lower-bound", "auto")
PILOT_MODES = ("auto", "exhaustive", "structured")
CSV_HEADER = ("axis", "axis_value", "scheme", "rate_bits", "std_err", "samples", "seed",
              "pilot_mode", "evaluation_mode")

_CONFIG_KEYS = {
    "N": int, "K": int, "A": int, "phase_set": int, "constellation": str, "S": int, "m": int,
    "ell": int, "tau": int, "mu": int, "P_dB": float, "P": float, "gamma_tau": float,
    "gamma_d": float, "csi": str,
}
_SCENARIO_KEYS = {
    "name": str, "schemes": list, "sweep_axis": str, "axis_values": list, "samples": int,
    "seed": int, "evaluation": str, "pilots": str, "search_samples": int, "optimize_tau": bool,
    "group_size": int, "opt_samples": int, "threads": int,
}


@dataclass(frozen=True)
class Scenario:
    name: str
    config: SystemConfig
    schemes: tuple = ()
    sweep_axis: str = "power_db"
    axis_values: tuple = ()
    samples: int = 4000
    seed: int = 1
    evaluation: str = "auto"
    pilots: str = "auto"
    search_samples: int | None = None
    optimize_tau: bool = False
    group_size: int = 16
    opt_samples: int = 48
    threads: int = 1

    def __post_init__(self):
        if self.sweep_axis not in AXES:
            raise InvalidParameter(f"unknown sweep_axis {self.sweep_axis!r}; expected one of {', '.join(AXES)}")
        if self.evaluation not in EVALUATIONS:
            raise InvalidParameter(f"unknown evaluation {self.evaluation!r}")
        if self.pilots not in PILOT_MODES:
            raise InvalidParameter(f"unknown pilots mode {self.pilots!r}")
        if self.samples < 1:
            raise InvalidParameter("samples must be >= 1")
        if not self.axis_values:
            raise InvalidParameter("axis_values must be nonempty")
        for v in self.axis_values:
            point_config(self.config, self.sweep_axis, v)
        for s in self.schemes:
            resolve_scheme(s)

    def monte_carlo(self) -> MonteCarlo:
        return MonteCarlo(group_size=self.group_size, opt_samples=self.opt_samples, threads=self.threads)


@dataclass
class SweepResult:
    axis: str
    rows: list = field(default_factory=list)  # (axis_value, scheme, bits, std_err, samples, seed, pilot_mode, evaluation_mode)


def point_config(base: SystemConfig, axis: str, value) -> SystemConfig:
    """Configuration at one axis value; a power change keeps the equal split."""
    if axis == "power_db":
        return base.replace(P_dB=float(value))
    if axis == "tau":
        return base.replace(tau=int(value))
    if axis == "ell":
        return base.replace(ell=int(value), tau=min(base.tau, int(value)))
    if axis == "antennas":
        return base.replace(N=int(value))
    if axis == "control_rate_m":
        return base.replace(m=int(value))
    raise InvalidParameter(f"unknown sweep axis {axis!r}")


# ---------------------------------------------------------------------------
# scenario files


def _parse_value(key: str, raw: str, kind):
    try:
        if kind is list:
            return [v.strip() for v in raw.split(",") if v.strip()]
        if kind is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise InvalidParameter(f"bad value for {key}: {raw!r}") from None


def parse_key_values(text: str) -> dict:
    """Parse ``key = value`` lines with ``#`` comments; unknown keys are rejected."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameter(f"line {n}: expected 'key = value', got {line!r}")
        key, raw = (p.strip() for p in line.split("=", 1))
        out[key] = raw
    return typed_settings(out)


def typed_settings(raw: dict) -> dict:
    out = {}
    for key, val in raw.items():
        kind = _CONFIG_KEYS.get(key) or _SCENARIO_KEYS.get(key)
        if kind is None:
            raise InvalidParameter(f"unknown key {key!r}")
        out[key] = _parse_value(key, val, kind) if isinstance(val, str) else val
    return out


def config_from_settings(settings: dict) -> SystemConfig:
    kw = {k: v for k, v in settings.items() if k in _CONFIG_KEYS}
    if "phase_set" in kw:
        kw.setdefault("A", kw.pop("phase_set"))
    const = kw.get("constellation")
    if const is not None:
        m = re.fullmatch(r"(\d+)-?(ask|psk)", const.lower())
        if m:
            kw["S"] = int(m.group(1))
            kw["constellation"] = m.group(2)
        elif const.lower() == "qpsk":
            kw["S"], kw["constellation"] = 4, "psk"
    if "P" in kw:
        P = kw.pop("P")
        if P <= 0:
            raise InvalidParameter("P must be positive; use P_dB")
        kw.setdefault("P_dB", 10 * math.log10(P))
    return make_config(**kw)


def scenario_from_settings(settings: dict) -> Scenario:
    config = config_from_settings(settings)
    kw = {k: v for k, v in settings.items() if k in _SCENARIO_KEYS}
    if "sweep_axis" not in kw or "axis_values" not in kw:
        raise InvalidParameter("a scenario needs sweep_axis and axis_values")
    conv = float if kw["sweep_axis"] == "power_db" else int
    try:
        kw["axis_values"] = tuple(conv(v) for v in kw["axis_values"])
    except ValueError:
        raise InvalidParameter(f"bad axis_values {kw['axis_values']}") from None
    kw["schemes"] = tuple(kw.get("schemes", ()))
    kw.setdefault("name", "scenario")
    return Scenario(config=config, **kw)


def load_settings(path) -> dict:
    return parse_key_values(Path(path).read_text(encoding="utf-8"))


def load_scenario(path) -> Scenario:
    return scenario_from_settings(load_settings(path))


def bundled_scenarios() -> list:
    files = resources.files("riscap") / "scenarios"
    return sorted(p.name[:-4] for p in files.iterdir() if p.name.endswith(".cfg"))


def bundled_scenario_path(name: str):
    p = resources.files("riscap") / "scenarios" / f"{name}.cfg"
    if not p.is_file():
        raise InvalidParameter(f"no bundled scenario named {name!r}; available: {', '.join(bundled_scenarios())}")
    return p


def load_bundled(name: str) -> Scenario:
    return scenario_from_settings(parse_key_values(bundled_scenario_path(name).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# running


def _derived_seed(seed: int, tag: int) -> int:
    return int(np.random.SeedSequence(int(seed), spawn_key=(tag,)).generate_state(1)[0])


def evaluate_point(config: SystemConfig, scheme: str, samples: int, seed: int, evaluation: str = "auto",
                   pilots: str = "auto", mc: MonteCarlo | None = None, search_samples: int | None = None,
                   cap: int = ENUMERATION_CAP):
    """Evaluate one scheme at one configuration, including the pilot choice.

    Returns ``(RateEstimate, pilot_mode)``. With an exhaustive pilot search the
    candidates are compared on an independent stream and the winner is
    re-evaluated on the main stream, so the reported rate carries no selection bias.
    """
    tag = resolve_scheme(scheme, config.csi)
    if tag in ("perfect", "max-snr-perfect", "layered-perfect"):
        return evaluate(tag, config, None, samples, seed, mc, evaluation), "none"
    if config.tau >= config.ell:
        raise NoDataSubBlocks(config.tau, config.ell)
    if config.tau == 0:
        est = build_estimator(None, config.gamma_tau, config.N, config.K)
        return evaluate(tag, config, est, samples, seed, mc, evaluation), "none"
    mode = pilots
    if mode == "auto":
        mode = "exhaustive" if config.input_count**config.tau <= cap else "structured"
    if mode == "structured":
        block = structured_pilot_block(config)
    else:
        search_seed = _derived_seed(seed, 99)
        n_search = search_samples or max(1, samples // 2)

        def functional(b):
            est = build_estimator(b, config.gamma_tau, config.N)
            return evaluate(tag, config, est, n_search, search_seed, mc, evaluation)

        cands = pilot_candidates(config, cap)
        if len(cands) == 1:
            block = cands[0]
        else:
            block = search_pilots(config, functional, cap).block
    est = build_estimator(block, config.gamma_tau, config.N)
    return evaluate(tag, config, est, samples, seed, mc, evaluation), mode


def _best_over_tau(config, scheme, scenario, mc):
    best = None
    for tau in range(0, config.ell):
        cfg = config.replace(tau=tau)
        est, mode = evaluate_point(cfg, scheme, scenario.samples, scenario.seed, scenario.evaluation,
                                   scenario.pilots, mc, scenario.search_samples)
        if best is None or est.bits_per_symbol > best[0].bits_per_symbol:
            best = (est, f"{mode};tau={tau}")
    return best


def run_scenario(scenario: Scenario) -> SweepResult:
    result = SweepResult(scenario.sweep_axis)
    mc = scenario.monte_carlo()
    for value in scenario.axis_values:
        cfg = point_config(scenario.config, scenario.sweep_axis, value)
        for scheme in scenario.schemes:
            try:
                if scenario.optimize_tau and resolve_scheme(scheme, cfg.csi) not in (
                        "perfect", "max-snr-perfect", "layered-perfect"):
                    est, pilot_mode = _best_over_tau(cfg, scheme, scenario, mc)
                else:
                    est, pilot_mode = evaluate_point(cfg, scheme, scenario.samples, scenario.seed,
                                                     scenario.evaluation, scenario.pilots, mc,
                                                     scenario.search_samples)
                row = (value, est.scheme, est.bits_per_symbol, est.std_err, est.samples, scenario.seed,
                       pilot_mode, est.metadata.get("evaluation", "exact"))
            except Exception as exc:  # a failed point must not abort the sweep
                kind = type(exc).__name__
                row = (value, scheme, math.nan, math.nan, scenario.samples, scenario.seed, "-",
                       f"error:{kind}:{exc}")
            result.rows.append(row)
    return result


# ---------------------------------------------------------------------------
# CSV


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def emit_csv(result: SweepResult, destination=None) -> bytes:
    """Serialize to CSV bytes; optionally write to a path or a binary/text stream."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in result.rows:
        w.writerow([result.axis] + [_fmt(v) for v in row])
    data = buf.getvalue().encode("utf-8")
    if destination is not None:
        if isinstance(destination, (str, Path)):
            with open(destination, "wb") as fh:
                fh.write(data)
        elif isinstance(destination, io.TextIOBase):
            destination.write(data.decode("utf-8"))
        else:
            destination.write(data)
    return data


def parse_csv(data) -> SweepResult:
    """Inverse of emit_csv."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    rows = list(csv.reader(io.StringIO(data)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise InvalidParameter("not a rate CSV: header mismatch")
    axis = rows[1][0] if len(rows) > 1 else ""
    out = SweepResult(axis)
    for r in rows[1:]:
        ax_val = float(r[1]) if axis == "power_db" else _num(r[1])
        out.rows.append((ax_val, r[2], float(r[3]), float(r[4]), int(r[5]), int(r[6]), r[7], r[8]))
    return out


def _num(s: str):
    try:
        return int(s)
    except ValueError:
        return float(s)


def rate_row(est: RateEstimate, axis: str = "point", axis_value="", pilot_mode: str = "-") -> SweepResult:
    """Single-row result for appending a point evaluation to a CSV."""
    res = SweepResult(axis)
    res.rows.append((axis_value, est.scheme, est.bits_per_symbol, est.std_err, est.samples,
                     est.metadata.get("seed", 0), pilot_mode, est.metadata.get("evaluation", "exact")))
    return res


def with_overrides(scenario: Scenario, **changes) -> Scenario:
    return replace(scenario, **changes)


__all__ = [
    "AXES", "CSV_HEADER", "Scenario", "SweepResult", "emit_csv", "parse_csv", "run_scenario",
    "evaluate_point", "load_scenario", "load_bundled", "bundled_scenarios", "parse_key_values",
    "config_from_settings", "scenario_from_settings", "point_config",
]
