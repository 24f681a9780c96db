"""Command-line front end.

    riscap rate --config FILE --scheme TAG [--snr-db X] [--samples M] [--seed S]
    riscap limit --config FILE --scheme TAG
    riscap sweep --config SCENARIO [--output out.csv]
    riscap estimate-demo --config FILE
    riscap validate --config FILE

``--config`` takes a path or the name of a bundled scenario. Exit status: 0 on
success, 2 for an invalid configuration, 3 when an enumeration cap is
exceeded, 4 for I/O errors and 1 for anything else.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .errors import CapacityExceeded, InvalidParameter, NoDataSubBlocks
from .estimation import build_estimator, structured_pilot_block
from .experiments import (
    bundled_scenario_path,
    config_from_settings,
    emit_csv,
    evaluate_point,
    parse_key_values,
    rate_row,
    run_scenario,
    scenario_from_settings,
    typed_settings,
)
from .model import ENUMERATION_CAP
from .optimize import pilot_candidates
from .schemes import MonteCarlo, high_snr_limit, resolve_scheme

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_CAPACITY, EXIT_IO = 0, 1, 2, 3, 4

DEFAULT_SAMPLES = 4000
DEFAULT_SEED = 1


def _load_settings(path: str, overrides: list) -> dict:
    p = Path(path)
    if p.exists():
        text = p.read_text(encoding="utf-8")
    elif os.sep not in path and not path.endswith(".cfg"):
        text = bundled_scenario_path(path).read_text(encoding="utf-8")
    else:
        raise FileNotFoundError(f"config file not found: {path}")
    settings = parse_key_values(text)
    raw = {}
    for item in overrides or []:
        if "=" not in item:
            raise InvalidParameter(f"--set expects key=value, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        raw[k] = v
    settings.update(typed_settings(raw))
    return settings


def _apply_flags(settings: dict, args) -> dict:
    if getattr(args, "snr_db", None) is not None:
        settings.pop("P", None)
        settings["P_dB"] = args.snr_db
    if getattr(args, "samples", None) is not None:
        settings["samples"] = args.samples
    if getattr(args, "seed", None) is not None:
        settings["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        settings["threads"] = args.threads
    if getattr(args, "evaluation", None) is not None:
        settings["evaluation"] = args.evaluation
    return settings


def _monte_carlo(settings: dict) -> MonteCarlo:
    kw = {k: settings[k] for k in ("group_size", "opt_samples", "threads") if k in settings}
    return MonteCarlo(**kw)


def cmd_rate(args) -> int:
    settings = _apply_flags(_load_settings(args.config, args.set), args)
    config = config_from_settings(settings)
    if config.tau >= config.ell and config.csi != "perfect":
        raise NoDataSubBlocks(config.tau, config.ell)
    scheme = args.scheme or (settings.get("schemes") or [None])[0]
    if scheme is None:
        raise InvalidParameter("no scheme given (use --scheme)")
    samples = int(settings.get("samples", DEFAULT_SAMPLES))
    seed = int(settings.get("seed", DEFAULT_SEED))
    if samples < 1:
        raise InvalidParameter("samples must be >= 1")
    est, pilot_mode = evaluate_point(config, scheme, samples, seed, settings.get("evaluation", "auto"),
                                     settings.get("pilots", "auto"), _monte_carlo(settings),
                                     settings.get("search_samples"))
    if args.output:
        out = Path(args.output)
        data = emit_csv(rate_row(est, "power_db", config.P_dB, pilot_mode))
        if out.exists() and out.stat().st_size > 0:
            data = data.split(b"\n", 1)[1]
        with open(out, "ab") as fh:
            fh.write(data)
    print(f"{est.scheme} {est.bits_per_symbol:.6f} {est.std_err:.6f} {est.samples} {seed}")
    return EXIT_OK


def cmd_limit(args) -> int:
    settings = _apply_flags(_load_settings(args.config, args.set), args)
    config = config_from_settings(settings)
    scheme = args.scheme or (settings.get("schemes") or [None])[0]
    if scheme is None:
        raise InvalidParameter("no scheme given (use --scheme)")
    value = high_snr_limit(config, scheme)
    print(repr(round(value, 12)))
    return EXIT_OK


def cmd_sweep(args) -> int:
    settings = _apply_flags(_load_settings(args.config, args.set), args)
    if args.scheme:
        settings["schemes"] = [s.strip() for s in args.scheme.split(",") if s.strip()]
    scenario = scenario_from_settings(settings)
    result = run_scenario(scenario)
    if args.output:
        emit_csv(result, args.output)
    else:
        sys.stdout.write(emit_csv(result).decode("utf-8"))
    return EXIT_OK


def _spectrum_line(label: str, err: np.ndarray) -> str:
    w = np.linalg.eigvalsh(err)
    return (f"{label}: eigenvalues [{', '.join(f'{v:.6g}' for v in w)}] "
            f"trace {np.trace(err).real:.6g} logdet {np.sum(np.log(np.clip(w, 1e-300, None))):.6g}")


def cmd_estimate_demo(args) -> int:
    settings = _apply_flags(_load_settings(args.config, args.set), args)
    config = config_from_settings(settings)
    if config.tau < 1:
        print("tau = 0: no pilots, error covariance is the identity")
        return EXIT_OK
    mode = settings.get("pilots", "auto")
    blocks = []
    if mode != "structured":
        try:
            blocks = [("candidate", b) for b in pilot_candidates(config, ENUMERATION_CAP)]
        except CapacityExceeded:
            if mode == "exhaustive":
                raise
    if not blocks:
        blocks = [("structured", structured_pilot_block(config))]
    print(f"gamma_tau {config.gamma_tau:.6g}  N {config.N}  K {config.K}  tau {config.tau}")
    for label, block in blocks:
        est = build_estimator(block, config.gamma_tau, config.N)
        pilots = " ".join(f"theta={p.theta} s={p.s}" for p in block.pilots)
        print(f"{label} pilots {pilots}")
        print(_spectrum_line("  error covariance", est.error_cov))
    return EXIT_OK


def cmd_validate(args) -> int:
    settings = _apply_flags(_load_settings(args.config, args.set), args)
    config = config_from_settings(settings)
    if args.target == "rate" and config.csi != "perfect" and config.tau >= config.ell:
        raise NoDataSubBlocks(config.tau, config.ell)
    if args.target == "sweep":
        scenario_from_settings(settings)
    if args.scheme:
        tag = resolve_scheme(args.scheme, config.csi)
        if args.target == "limit":
            high_snr_limit(config, tag)
        elif tag.startswith("layered") and not 1 <= config.mu <= config.m:
            raise InvalidParameter(f"layered encoding needs 1 <= mu <= m, got mu={config.mu}")
    print("ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riscap", description="Rates of RIS-aided single-RF MIMO links")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scheme=True):
        p.add_argument("--config", required=True, help="config/scenario file or bundled scenario name")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        if scheme:
            p.add_argument("--scheme", help="scheme tag")
        p.add_argument("--snr-db", type=float, help="override the power P in dB")
        p.add_argument("--samples", type=int, help="Monte-Carlo outer samples")
        p.add_argument("--seed", type=int, help="base seed")
        p.add_argument("--threads", type=int, help="worker threads (does not change results)")
        p.add_argument("--evaluation", choices=("exact", "lower-bound", "auto"))

    p = sub.add_parser("rate", help="evaluate one scheme at one point")
    common(p)
    p.add_argument("--output", help="append the result row to this CSV")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("limit", help="closed-form high-SNR rate")
    common(p)
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("sweep", help="run a scenario and write CSV")
    common(p)
    p.add_argument("--output", help="CSV destination (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("estimate-demo", help="error covariance spectrum of the pilot blocks")
    common(p, scheme=False)
    p.set_defaults(func=cmd_estimate_demo)

    p = sub.add_parser("validate", help="check a configuration")
    common(p)
    p.add_argument("--for", dest="target", choices=("rate", "limit", "sweep"), default="rate",
                   help="subcommand whose preconditions are checked")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except InvalidParameter as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # pragma: no cover - reported as an internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
