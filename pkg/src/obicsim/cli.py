"""Command-line entry point.

    obicsim fixtures  --out DIR
    obicsim simulate  SCENARIO.json [--traces N] [--seed S] --out traces.csv [--plot]
    obicsim scan      SCAN.json --out heatmap.csv [--plot]
    obicsim attack    ATTACK.json [--seed S] --out report.json
    obicsim calibrate ANCHORS.csv TEMPLATE.json [--seed S] --out fit.json [--plot]

Exit codes: 0 success, 1 input error, 2 model error, 3 fit not converged.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .analysis import (
    DegenerateVariance,
    estimate_distinguisher,
    pulse_statistics,
    welch_t,
)
from .calibration import Underdetermined, fit_params, read_anchors_csv
from .logic import EvaluationError
from .netlist import (
    CellLibrary,
    NetlistError,
    builtin_fixtures,
    libval_nand_chain,
    serialize_cell_library,
)
from .photo import induced_current, scan_totals
from .traces import (
    Scenario,
    ScenarioError,
    export_csv,
    load_scenario,
    read_scenario_json,
    scenario_from_dict,
    synthesize_campaign,
)

log = logging.getLogger("obicsim")

EXIT_OK, EXIT_INPUT, EXIT_MODEL, EXIT_NONCONV = 0, 1, 2, 3


class InputError(Exception):
    pass


class ModelError(Exception):
    pass


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from exc


def _sibling(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


def _read_json(path: Path) -> dict:
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(d, dict):
        raise InputError(f"{path}: line 1: top level must be an object")
    return d


def _expected(s: Scenario) -> float:
    try:
        return s.expected_total
    except EvaluationError as exc:
        raise ModelError(str(exc)) from exc


# --------------------------------------------------------------------------


def cmd_fixtures(args) -> int:
    out = Path(args.out)
    lib = builtin_fixtures()
    chain = libval_nand_chain()
    _write(out / "cells.net", serialize_cell_library(lib))
    _write(out / "libval_nand_chain.net", serialize_cell_library(CellLibrary((), (chain,))))
    log.info("wrote %s and %s", out / "cells.net", out / "libval_nand_chain.net")
    return EXIT_OK


def cmd_simulate(args) -> int:
    s = load_scenario(args.scenario)
    level = _expected(s)
    seed = s.seed if args.seed is None else args.seed
    ts = synthesize_campaign(s, args.traces, seed=seed)
    out = Path(args.out)
    _write(out, export_csv(ts))

    per_trace = []
    for i, tr in enumerate(ts.traces):
        window, mean = pulse_statistics(tr, level, s.spot)
        per_trace.append({"index": i, "window": list(window) if window else None, "in_pulse_mean_uA": mean})
    windows = [tuple(p["window"]) for p in per_trace if p["window"]]
    common = max(set(windows), key=windows.count) if windows else None
    summary = {
        "scenario_digest": s.digest(),
        "campaign_seed": seed,
        "n_traces": args.traces,
        "patterns": {
            s.pattern.digits: {
                "expected_total_uA": level,
                "in_pulse_mean_uA": float(np.mean([p["in_pulse_mean_uA"] for p in per_trace])),
                "window": list(common) if common else None,
            }
        },
        "per_trace": per_trace,
    }
    _write(_sibling(out, ".summary.json"), _dump(summary))
    if args.plot:
        from .plots import plot_traces

        plot_traces({s.pattern.digits: ts}, _sibling(out, ".png"), {s.pattern.digits: common})
    log.info("pattern %s: expected %.6f uA, mean %.6f uA, window %s",
             s.pattern, level, summary["patterns"][s.pattern.digits]["in_pulse_mean_uA"], common)
    return EXIT_OK


def _axis(spec: Any, name: str) -> np.ndarray:
    try:
        start, stop, step = (float(v) for v in spec)
    except (TypeError, ValueError):
        raise InputError(f"grid.{name} must be [start, stop, step]") from None
    if not step > 0:
        raise InputError(f"grid.{name} step must be positive")
    if stop < start:
        raise InputError(f"grid.{name} stop is below start")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 9)


def cmd_scan(args) -> int:
    path = Path(args.config)
    cfg = read_scenario_json(path)
    try:
        patterns = [str(p) for p in cfg["patterns"]]
        grid = cfg["grid"]
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path}: missing key {exc}") from exc
    xs, ys = _axis(grid.get("x"), "x"), _axis(grid.get("y"), "y")
    base = dict(cfg)
    base.setdefault("pattern", patterns[0] if patterns else "0")
    base.setdefault("spot", {})
    base["spot"] = {"cx": 0.0, "cy": 0.0, **base["spot"]}
    try:
        s = scenario_from_dict(base, path.parent)
    except ScenarioError as exc:
        raise InputError(str(exc)) from exc
    try:
        rows = scan_totals(s.design, patterns, xs, ys, s.spot, s.params)
    except EvaluationError as exc:
        raise ModelError(str(exc)) from exc
    lines = ["x_um,y_um,pattern,total_uA"]
    lines += [f"{x:.6f},{y:.6f},{p},{v:.6f}" for x, y, p, v in rows]
    out = Path(args.out)
    _write(out, "\n".join(lines) + "\n")
    if args.plot:
        from .plots import plot_scan

        plot_scan(rows, _sibling(out, ".png"))
    log.info("wrote %d rows to %s", len(rows), out)
    return EXIT_OK


def _attack_scenarios(cfg: dict, base_dir: Path) -> tuple[Scenario, Scenario]:
    def one(ref: Any) -> Scenario:
        if isinstance(ref, str):
            return load_scenario(base_dir / ref)
        return scenario_from_dict(ref, base_dir)

    if "scenario" in cfg:
        pats = cfg.get("patterns")
        if not isinstance(pats, list) or len(pats) != 2:
            raise InputError("attack config with 'scenario' needs 'patterns': [a, b]")
        ref = cfg["scenario"]
        if isinstance(ref, str):
            d, sdir = read_scenario_json(base_dir / ref), (base_dir / ref).parent
        else:
            d, sdir = dict(ref), base_dir
        return (
            scenario_from_dict({**d, "pattern": str(pats[0])}, sdir),
            scenario_from_dict({**d, "pattern": str(pats[1])}, sdir),
        )
    if "a" in cfg and "b" in cfg:
        return one(cfg["a"]), one(cfg["b"])
    raise InputError("attack config needs 'scenario' + 'patterns' or 'a' + 'b'")


def cmd_attack(args) -> int:
    path = Path(args.config)
    cfg = _read_json(path)
    try:
        sA, sB = _attack_scenarios(cfg, path.parent)
    except ScenarioError as exc:
        raise InputError(str(exc)) from exc
    target = float(cfg.get("target", 0.95))
    cap = int(cfg.get("cap", 100))
    if not 0.5 < target < 1 or cap < 1:
        raise InputError("target must lie in (0.5, 1) and cap must be >= 1")
    seed = int(cfg.get("seed", 0)) if args.seed is None else args.seed
    la, lb = _expected(sA), _expected(sB)

    est = estimate_distinguisher(
        sA, sB, target, cap,
        n_resamples=int(cfg.get("resamples", 10_000)),
        pool=int(cfg.get("pool", 5_000)),
        seed=seed,
    )
    n_campaign = int(cfg.get("campaign_traces", 1000))
    sub = np.random.SeedSequence([seed, 1]).generate_state(2, np.uint64)
    means = []
    for s, lvl, cs in ((sA, la, sub[0]), (sB, lb, sub[1])):
        ts = synthesize_campaign(s, n_campaign, seed=int(cs))
        means.append([pulse_statistics(tr, min(la, lb), s.spot)[1] for tr in ts.traces])
    try:
        t = welch_t(means[0], means[1])
    except DegenerateVariance:
        t = None

    report = {
        "patterns": [sA.pattern.digits, sB.pattern.digits],
        "templates_uA": [la, lb],
        "target_accuracy": target,
        "cap": cap,
        "n_traces": est.n,
        "distinguishable": est.n is not None,
        "single_trace_accuracy": est.single_trace_accuracy,
        "accuracy_by_n": [float(a) for a in est.accuracy_by_n[: (est.n or cap)]],
        "welch_t": t,
        "welch_campaign_traces": n_campaign,
        "seed": seed,
    }
    _write(Path(args.out), _dump(report))
    log.info("N = %s, single-trace accuracy %.4f, Welch t = %s", est.n, est.single_trace_accuracy, t)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    apath = Path(args.anchors)
    try:
        anchors = read_anchors_csv(apath.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"{apath}: {exc.strerror}") from exc
    except ValueError as exc:
        raise InputError(f"{apath}: {exc}") from exc
    tpath = Path(args.template)
    tmpl = read_scenario_json(tpath)
    s = scenario_from_dict(tmpl, tpath.parent, require_params=False)
    seed = 0 if args.seed is None else args.seed
    try:
        fit = fit_params(anchors, s.design, s.spot, seed=seed)
    except Underdetermined as exc:
        raise InputError(str(exc)) from exc
    except EvaluationError as exc:
        raise ModelError(str(exc)) from exc

    out = Path(args.out)
    report = fit.to_dict(anchors)
    report["template"] = tpath.name
    report["seed"] = seed
    _write(out, _dump(report))
    calibrated = {**tmpl, "params": fit.params.to_dict()}
    _write(_sibling(out, ".scenario.json"), _dump(calibrated))
    if args.plot:
        from .plots import plot_power_response

        powers = np.linspace(0, max(a.power_pct for a in anchors) * 1.25, 200)
        curves = {}
        for pat in dict.fromkeys(a.pattern for a in anchors):
            curves[pat] = (
                powers,
                np.array([induced_current(s.design, pat, s.spot.with_power(p), fit.params).total for p in powers]),
            )
        plot_power_response(curves, _sibling(out, ".png"), [(a.power_pct, a.pattern, a.observed) for a in anchors])
    log.info("residual %.6g uA, converged %s", fit.residual, fit.converged)
    if not fit.converged:
        print(f"error: fit did not converge after {fit.iterations} iterations", file=sys.stderr)
        return EXIT_NONCONV
    return EXIT_OK


# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # one-line diagnostics; subparsers inherit the class
    def error(self, message: str):
        self.exit(EXIT_INPUT, f"error: {self.prog}: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="obicsim", description="Laser-induced static power simulator")
    ap.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="suppress progress messages")
    common.add_argument("--seed", type=int, default=None, help="override the configured seed")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixtures", parents=[common], help="write built-in cells and the NAND chain")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fixtures)

    p = sub.add_parser("simulate", parents=[common], help="synthesize traces for a scenario")
    p.add_argument("scenario")
    p.add_argument("--traces", type=int, default=3)
    p.add_argument("--out", required=True, help="trace CSV path")
    p.add_argument("--plot", action="store_true", help="also write a PNG figure")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scan", parents=[common], help="total current over a spot grid")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("attack", parents=[common], help="traces needed to tell two patterns apart")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("calibrate", parents=[common], help="fit model parameters to anchors")
    p.add_argument("anchors")
    p.add_argument("template")
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_calibrate)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(message)s",
        stream=sys.stdout,
        force=True,
    )
    if getattr(args, "traces", 1) < 1:
        print("error: --traces must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, ScenarioError, NetlistError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ModelError, EvaluationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    raise SystemExit(main())
