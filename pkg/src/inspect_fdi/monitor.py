"""Centralized fault detection and identification from information-cost telemetry.

Each agent reports its cost contribution ``H_i``.  Over one FDI window the
monitor compares the achieved change with the change a fault-free replica
predicts,

    metric_i = |1 - (H_i(t) - H_i(t-dt)) / (H_i^pred(t) - H_i(t-dt))|,

classifies the sign/ratio pattern, and flags the agent when the metric
exceeds an adaptive threshold built by re-pointing the nominal sensor at
random aim points near its nominal target POI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cost import contribution
from .sensing import (CameraModel, PoiArrays, TargetBody, point_at, sigma_row,
                      visible_mask)

NOMINAL = "nominal"
IMPROVED = "improved"
DETERIORATING = "deteriorating"
INDETERMINATE = "indeterminate"

DEGENERATE_RTOL = 1e-12
NOMINAL_XTOL = 1e-9


class ThresholdUnavailable(RuntimeError):
    """No candidate set yields a usable threshold."""


class EmptyCandidates(RuntimeError):
    """Agent has no nominal target POI to perturb around."""


@dataclass(frozen=True)
class FaultMetricRecord:
    agent: int
    t: float
    delta_H: float
    delta_H_pred: float
    ratio_x: float
    metric: float
    classification: str
    h_now: float = math.nan
    h_prev: float = math.nan
    h_pred: float = math.nan

    @property
    def determinate(self) -> bool:
        return self.classification != INDETERMINATE


@dataclass(frozen=True)
class ThresholdRecord:
    agent: int
    t: float
    tau: float
    sample_count: int
    epsilon: float
    fallback: bool = False
    valid_count: int = 0


@dataclass(frozen=True)
class FaultReport:
    t: float
    flagged_agents: list = field(default_factory=list)  # (agent, classification, metric, tau)
    global_integral_flag: bool = False
    cost_integral: float = 0.0


def _degenerate(den: float, *scales: float) -> bool:
    return abs(den) < DEGENERATE_RTOL * max(1.0, *(abs(s) for s in scales))


def classify(delta_H: float, delta_H_pred: float, ratio_x: float) -> str:
    """Performance class from the sign/ratio table."""
    if delta_H_pred == 0.0 or not math.isfinite(ratio_x):
        return INDETERMINATE
    if np.sign(delta_H) != np.sign(delta_H_pred):
        return DETERIORATING
    if abs(ratio_x - 1.0) <= NOMINAL_XTOL:
        return NOMINAL
    return IMPROVED if ratio_x > 1.0 else DETERIORATING


def fault_metric(h_now: float, h_prev: float, h_pred_now: float, *, agent: int = -1,
                 t: float = math.nan) -> FaultMetricRecord:
    delta = h_now - h_prev
    delta_pred = h_pred_now - h_prev
    if _degenerate(delta_pred, h_pred_now, h_prev):
        return FaultMetricRecord(agent, t, delta, delta_pred, math.nan, math.nan,
                                 INDETERMINATE, h_now, h_prev, h_pred_now)
    x = delta / delta_pred
    return FaultMetricRecord(agent, t, delta, delta_pred, x, abs(1.0 - x),
                             classify(delta, delta_pred, x), h_now, h_prev, h_pred_now)


def detect(record: FaultMetricRecord, threshold: ThresholdRecord) -> bool:
    if record.agent != threshold.agent or record.t != threshold.t:
        raise ValueError("metric and threshold refer to different agent/tick")
    if not record.determinate:
        return False
    return record.metric > threshold.tau


# --- adaptive threshold -------------------------------------------------------

def default_epsilon(accel_noise: float, window: float, scale: float = 0.5) -> float:
    """Aim-point neighborhood radius from an expected actuator noise level.

    Displacement produced by ``accel_noise`` held over one FDI window,
    ``scale * a * dt**2``.
    """
    return scale * accel_noise * window * window


def sample_ball(center: np.ndarray, radius: float, rng: np.random.Generator) -> np.ndarray:
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    r = radius * rng.uniform() ** (1.0 / 3.0)
    return center + r * direction


def sample_aim_points(target: np.ndarray, epsilon: float, n_samples: int,
                      rng: np.random.Generator, body: TargetBody) -> list[np.ndarray]:
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    target = np.asarray(target, dtype=float)
    if epsilon == 0.0:
        return [target.copy() for _ in range(n_samples)]
    out = []
    for _ in range(n_samples):
        p = sample_ball(target, epsilon, rng)
        if np.linalg.norm(p) > 0:
            p = body.project_to_surface(p)
        out.append(p)
    return out


def candidate_masks(position: np.ndarray, aim_points: Sequence[np.ndarray], camera: CameraModel,
                    pois: PoiArrays, body: TargetBody) -> list[np.ndarray]:
    return [visible_mask(point_at(position, a), camera, pois, body) for a in aim_points]


def sample_candidate_sets(agent: int, prediction, t: float, epsilon: float, n_samples: int,
                          rng: np.random.Generator, camera: CameraModel, pois: PoiArrays,
                          body: TargetBody) -> list[frozenset]:
    """Visible-POI sets obtained by re-pointing the nominal sensor near its target."""
    snap = prediction.at(t)
    aim = snap.aim_poi[agent]
    if aim is None:
        raise EmptyCandidates(f"agent {agent} has no nominal target POI at t={t}")
    target = pois.positions[np.searchsorted(pois.ids, aim)]
    points = sample_aim_points(target, epsilon, n_samples, rng, body)
    masks = candidate_masks(snap.positions[agent], points, camera, pois, body)
    return [frozenset(int(i) for i in pois.ids[m]) for m in masks]


def set_sigma_row(position: np.ndarray, poi_set, camera: CameraModel,
                  pois: PoiArrays) -> np.ndarray:
    """sigma from ``position`` with visibility dictated by ``poi_set``."""
    mask = np.isin(pois.ids, np.fromiter(poi_set, dtype=int, count=len(poi_set)))
    return masked_sigma_row(position, mask, camera, pois)


def masked_sigma_row(position: np.ndarray, mask: np.ndarray, camera: CameraModel,
                     pois: PoiArrays) -> np.ndarray:
    d = pois.positions - position
    d2 = np.einsum("ij,ij->i", d, d)
    return np.where(mask, camera.sigma_scale * d2, np.inf)


def tau_from_costs(candidate_costs: Sequence[float], h_pred: float, h_prev: float,
                   h_observed: float | None = None) -> tuple[float, int]:
    """Minimum threshold over admissible candidate costs.

    A candidate is admissible when its deviation from the predicted cost is
    strictly positive and, if the observed cost is known, no larger than the
    observed deviation.  Returns ``(tau, number_admissible)``.
    """
    den = h_pred - h_prev
    if _degenerate(den, h_pred, h_prev):
        raise ThresholdUnavailable("predicted change is degenerate")
    bound = math.inf if h_observed is None else abs(h_observed - h_pred)
    taus = []
    for hc in candidate_costs:
        dev = abs(hc - h_pred)
        if dev > 0.0 and dev <= bound:
            taus.append(abs(1.0 - (hc - h_prev) / den))
    if not taus:
        raise ThresholdUnavailable("no admissible candidate set")
    return min(taus), len(taus)


def compute_threshold(agent: int, candidates: Sequence[frozenset], prediction, h_prev: float,
                      t: float, *, camera: CameraModel, pois: PoiArrays, weights: np.ndarray,
                      epsilon: float = math.nan, h_observed: float | None = None
                      ) -> ThresholdRecord:
    """Adaptive threshold for ``agent`` at ``t`` from candidate visible sets.

    Candidate and nominal costs are evaluated from the agent's nominal
    position with the supplied ``weights`` (importance times psi).
    """
    if not candidates:
        raise ThresholdUnavailable("no candidates")
    snap = prediction.at(t)
    position = snap.positions[agent]
    h_pred = contribution(snap.sigma_rows[agent], weights)
    costs = [contribution(set_sigma_row(position, c, camera, pois), weights) for c in candidates]
    tau, n_valid = tau_from_costs(costs, h_pred, h_prev, h_observed)
    return ThresholdRecord(agent, t, tau, len(candidates), epsilon, False, n_valid)


def fallback_threshold(agent: int, t: float, tau_floor: float, sample_count: int,
                       epsilon: float) -> ThresholdRecord:
    return ThresholdRecord(agent, t, tau_floor, max(sample_count, 1), epsilon, True, 0)


# --- global integral test ----------------------------------------------------------

def cost_gap_integral(times, h_series, h_nom_series, t: float) -> float:
    """Trapezoidal integral of (H - H_nom) over the samples with time <= t."""
    times = np.asarray(times, dtype=float)
    gap = np.asarray(h_series, dtype=float) - np.asarray(h_nom_series, dtype=float)
    keep = times <= t + 1e-12 * max(1.0, abs(t))
    times, gap = times[keep], gap[keep]
    if len(times) < 2:
        return 0.0
    return float(np.sum(0.5 * (gap[1:] + gap[:-1]) * np.diff(times)))


def integral_detector(times, h_series, h_nom_series, delta_threshold: float, t: float) -> bool:
    """Global behavior test: integral of (H - H_nom) over [0, t] >= threshold * t."""
    if not t > 0:
        raise ValueError("t must be > 0")
    return cost_gap_integral(times, h_series, h_nom_series, t) >= delta_threshold * t
