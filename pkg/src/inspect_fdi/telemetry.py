"""Telemetry export: CSV time series, JSON fault reports and plot-ready data.

Floats are written with ``repr`` so files round-trip exactly and reruns of
the same scenario and seed are byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

from .sim import TelemetryLog

STATES_HEADER = ["t", "agent", "x", "y", "z", "vx", "vy", "vz", "bx", "by", "bz", "aim_poi",
                 "n_visible", "H_i", "H_i_known", "connected"]
FUSION_HEADER = ["t", "H", "prior_term", "agent", "H_i"]
METRICS_HEADER = ["t", "agent", "h_now", "h_prev", "h_pred", "delta_H", "delta_H_pred",
                  "ratio_x", "metric", "classification", "tau", "threshold_fallback", "flagged"]
COST_HEADER = ["t", "H_real", "H_nom", "integral"]

FIG_COST = "fig_cost.csv"
FIG_SIGNAL = "fig_fault_signal.csv"
FIG_THRESHOLD = "fig_threshold_agent{}.csv"


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def _write(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def _read(path: Path) -> list[dict]:
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass
class RunManifest:
    scenario_path: str
    outdir: str
    version: str
    config_hash: str
    wall_clock_s: float
    master_seed: int = 0
    mode: str = "run"


def write_telemetry(log: TelemetryLog, outdir) -> list[Path]:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)

    _write(out / "states.csv", STATES_HEADER, (
        (t, a, *map(float, pos), *map(float, vel), *map(float, b), aim, nvis,
         float(h), float(hk), bool(conn))
        for t, a, pos, vel, b, aim, nvis, h, hk, conn in log.states))

    _write(out / "fusion.csv", FUSION_HEADER, (
        (bd.timestamp, bd.total_H, bd.prior_term, a, h)
        for bd in log.fusions for a, h in bd.agent_terms.items()))

    thresholds = {(th.agent, th.t): th for th in log.thresholds}
    flags = {(a, t): f for t, a, f in log.flags}
    rows = []
    for m in log.metrics:
        th = thresholds.get((m.agent, m.t))
        rows.append((m.t, m.agent, m.h_now, m.h_prev, m.h_pred, m.delta_H, m.delta_H_pred,
                     m.ratio_x, m.metric, m.classification,
                     None if th is None else th.tau, None if th is None else th.fallback,
                     flags.get((m.agent, m.t), False)))
    _write(out / "metrics.csv", METRICS_HEADER, rows)

    _write(out / "cost.csv", COST_HEADER, log.cost)

    reports = [{
        "t": r.t,
        "flagged": [{"agent": a, "classification": c, "metric": m, "tau": tau}
                    for a, c, m, tau in r.flagged_agents],
        "global_integral_flag": r.global_integral_flag,
        "cost_integral": r.cost_integral,
    } for r in log.reports]
    (out / "reports.json").write_text(
        json.dumps({"scenario": log.scenario, "agents": log.agent_ids, "reports": reports},
                   indent=1, allow_nan=True) + "\n")
    return [out / n for n in ("states.csv", "fusion.csv", "metrics.csv", "cost.csv",
                              "reports.json")]


def write_manifest(manifest: RunManifest, outdir) -> Path:
    path = Path(outdir) / "manifest.json"
    path.write_text(json.dumps(asdict(manifest), indent=1, sort_keys=True) + "\n")
    return path


# --- plot-ready data ---------------------------------------------------------------

def emit_plots(log: TelemetryLog, outdir) -> list[Path]:
    """Figure-analog data files from an in-memory log."""
    metrics = [(m.t, m.agent, m.metric) for m in log.metrics]
    taus = {(th.agent, th.t): th.tau for th in log.thresholds}
    series = [(t, a, metric, taus.get((a, t))) for t, a, metric in metrics]
    return _emit(log.cost, log.agent_ids, series, outdir)


def emit_plots_from_dir(telemetry_dir, outdir=None) -> list[Path]:
    """Same as :func:`emit_plots`, reading a directory written by :func:`write_telemetry`."""
    src = Path(telemetry_dir)
    cost = [(float(r["t"]), float(r["H_real"]), float(r["H_nom"])) for r in _read(src / "cost.csv")]
    series = [(float(r["t"]), int(r["agent"]), float(r["metric"]),
               float(r["tau"]) if r["tau"] else None) for r in _read(src / "metrics.csv")]
    agents = json.loads((src / "reports.json").read_text())["agents"]
    return _emit(cost, agents, series, outdir or src)


def _emit(cost, agent_ids, series, outdir) -> list[Path]:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / FIG_COST, out / FIG_SIGNAL]
    _write(paths[0], ["t", "H_real", "H_nom"], ((c[0], c[1], c[2]) for c in cost))

    agent_ids = list(agent_ids)
    by_t: dict = {}
    for t, a, metric, _ in series:
        by_t.setdefault(t, {})[a] = metric
    _write(paths[1], ["t"] + [f"metric_agent{a}" for a in agent_ids],
           ((t, *(by_t[t].get(a) for a in agent_ids)) for t in sorted(by_t)))

    for a in agent_ids:
        p = out / FIG_THRESHOLD.format(a)
        _write(p, ["t", "metric", "tau"], ((t, m, tau) for t, ag, m, tau in series if ag == a))
        paths.append(p)
    return paths
