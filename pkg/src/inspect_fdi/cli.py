"""Command-line front end.

    inspect-fdi validate <scenario>
    inspect-fdi run <scenario> --out <dir> [--seed N]
    inspect-fdi predict <scenario> --out <dir>
    inspect-fdi plots <telemetry-dir>

Exit codes: 0 success, 1 validation failure, 2 runtime failure.  The
``INSPECT_FDI_OUT`` environment variable, when set, replaces ``--out``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .config import ScenarioError, config_hash, load_scenario
from .sim import NominalPrediction, SimulationError, predict_nominal, run_scenario
from .telemetry import (RunManifest, _write, emit_plots, emit_plots_from_dir,
                        write_manifest, write_telemetry)

OUT_ENV = "INSPECT_FDI_OUT"
EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("inspect_fdi")


def _outdir(arg: str | None) -> Path:
    env = os.environ.get(OUT_ENV)
    if env:
        return Path(env)
    if arg is None:
        raise ScenarioError("--out is required (or set INSPECT_FDI_OUT)")
    return Path(arg)


def _load(path: str, seed: int | None = None):
    if not Path(path).is_file():
        raise ScenarioError(f"{path}: no such file")
    cfg = load_scenario(path)
    if seed is not None:
        if seed < 0:
            raise ScenarioError("--seed must be >= 0")
        cfg = cfg.replace(master_seed=seed)
    return cfg


def cmd_validate(args) -> int:
    cfg = _load(args.scenario)
    print(f"ok: {cfg.name}: {len(cfg.agents)} agents, {len(cfg.pois)} POIs, "
          f"{len(cfg.faults)} faults, {cfg.n_steps} steps, hash {config_hash(cfg)[:12]}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args.scenario, args.seed)
    out = _outdir(args.out)
    start = time.perf_counter()
    try:
        telemetry = run_scenario(cfg)
    except SimulationError as exc:
        if exc.partial_log is not None:
            write_telemetry(exc.partial_log, out)
        raise
    write_telemetry(telemetry, out)
    emit_plots(telemetry, out)
    write_manifest(RunManifest(str(args.scenario), str(out), __version__, config_hash(cfg),
                               round(time.perf_counter() - start, 3), cfg.master_seed, "run"), out)
    flagged = sorted({a for r in telemetry.reports for a, *_ in r.flagged_agents})
    print(f"wrote {out}; flagged agents: {flagged or 'none'}")
    return EXIT_OK


def _write_prediction(pred: NominalPrediction, agent_ids, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "nominal_cost.csv", ["t", "H_nom"], zip(pred.times, pred.h_nom))
    _write(out / "nominal_agents.csv", ["t", "agent", "H_i_pred", "aim_poi", "n_visible"],
           ((s.t, a, s.h_i[a], s.aim_poi[a], len(s.visible_sets[a]))
            for s in pred.snapshots for a in agent_ids))


def cmd_predict(args) -> int:
    cfg = _load(args.scenario)
    out = _outdir(args.out)
    start = time.perf_counter()
    pred = predict_nominal(cfg)
    _write_prediction(pred, cfg.agent_ids, out)
    write_manifest(RunManifest(str(args.scenario), str(out), __version__, config_hash(cfg),
                               round(time.perf_counter() - start, 3), cfg.master_seed,
                               "predict"), out)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_plots(args) -> int:
    src = Path(args.telemetry_dir)
    if not (src / "metrics.csv").is_file() or not (src / "cost.csv").is_file():
        raise ScenarioError(f"{src}: not a telemetry directory")
    out = Path(os.environ.get(OUT_ENV) or src)
    paths = emit_plots_from_dir(src, out)
    print("\n".join(str(p) for p in paths))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="inspect-fdi", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)
    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)
    r = sub.add_parser("run", help="simulate with faults and write telemetry")
    r.add_argument("scenario")
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)
    pr = sub.add_parser("predict", help="write the fault-free nominal prediction")
    pr.add_argument("scenario")
    pr.add_argument("--out")
    pr.set_defaults(func=cmd_predict)
    pl = sub.add_parser("plots", help="emit figure data from a telemetry directory")
    pl.add_argument("telemetry_dir")
    pl.set_defaults(func=cmd_plots)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors count as validation failures; --help exits cleanly
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        for err in exc.errors:
            print(f"invalid: {err}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit code 2
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
