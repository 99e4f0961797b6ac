"""Closed-loop inspection simulation with fusion and FDI cadences.

Tick ``k`` sits at ``t = k * sim_dt``.  On every tick each agent (in id
order) is propagated on its passive orbit, has its actuator faults
applied, and points its camera at the highest-variance POI it can see.
Every ``fusion_every`` ticks the monitor fuses the sigma table and
broadcasts a fresh ``psi``; every ``fdi_every`` ticks (from the first
window on) it evaluates the fault metric and adaptive threshold for every
agent that reported fresh telemetry.

The fault-free replica (:func:`predict_nominal`) runs the same code path,
so a run without faults reproduces it bit for bit.
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig
from .cost import CostBreakdown, SigmaTable, contribution, decompose, fused_variance
from .dynamics import RelativeState, pro_state, rk4_step, PropagationDiverged
from .faults import (ACTUATOR_POINTING, ACTUATOR_STATE, INSPECTION_SENSOR, SPURIOUS_COMM,
                     ActiveFault, apply_comm_fault, apply_pointing_fault,
                     apply_sensor_variance_fault, apply_state_fault, derive_seed)
from .monitor import (INDETERMINATE, FaultMetricRecord, FaultReport, ThresholdRecord,
                      ThresholdUnavailable, EmptyCandidates, compute_threshold, cost_gap_integral,
                      fallback_threshold, fault_metric, sample_candidate_sets)
from .sensing import Pose, PoiArrays, facing_mask, point_at, sigma_row, visible_mask

log = logging.getLogger(__name__)

_ZERO_U = np.zeros(3)


@dataclass
class CommGraph:
    t: float
    agent_ids: list
    adjacency: np.ndarray
    hub_connected: dict  # agent id -> reachable from the monitor at the origin


def comm_graph(t: float, agent_ids, positions: np.ndarray, radius: float) -> CommGraph:
    """Disk graph among agents; the monitor is a node at the target origin."""
    n = len(agent_ids)
    if n == 0:
        return CommGraph(t, [], np.zeros((0, 0), dtype=bool), {})
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    adj = dist <= radius
    np.fill_diagonal(adj, False)
    reached = np.linalg.norm(positions, axis=1) <= radius
    frontier = reached.copy()
    while frontier.any():
        nxt = adj[frontier].any(axis=0) & ~reached
        reached |= nxt
        frontier = nxt
    return CommGraph(t, list(agent_ids), adj, {a: bool(r) for a, r in zip(agent_ids, reached)})


@dataclass
class AgentSnapshot:
    """Per-agent nominal quantities at one tick, indexed by agent id."""

    t: float
    positions: dict
    aim_poi: dict
    sigma_rows: dict
    visible_sets: dict
    h_i: dict


@dataclass
class NominalPrediction:
    horizon_start: float
    horizon_end: float
    times: list = field(default_factory=list)  # FDI ticks, including t=0
    snapshots: list = field(default_factory=list)
    h_nom: list = field(default_factory=list)
    fusion_variance: dict = field(default_factory=dict)  # tick index -> fused variance
    _index: dict = field(default_factory=dict, repr=False)

    def add(self, snap: AgentSnapshot, h_total: float, tick: int) -> None:
        self._index[tick] = len(self.snapshots)
        self.times.append(snap.t)
        self.snapshots.append(snap)
        self.h_nom.append(h_total)

    def at_tick(self, tick: int) -> AgentSnapshot:
        return self.snapshots[self._index[tick]]

    def at(self, t: float) -> AgentSnapshot:
        k = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        return self.snapshots[k]

    def h_pred_series(self, agent) -> list:
        return [s.h_i[agent] for s in self.snapshots]

    def visible_series(self, agent) -> list:
        return [s.visible_sets[agent] for s in self.snapshots]


@dataclass
class TelemetryLog:
    scenario: str
    agent_ids: list
    # (t, agent, position, velocity, boresight, aim_poi, n_visible, H_i, H_i_known, connected)
    states: list = field(default_factory=list)
    fusions: list = field(default_factory=list)
    metrics: list = field(default_factory=list)
    thresholds: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    cost: list = field(default_factory=list)  # (t, H_real, H_nom, integral)
    flags: list = field(default_factory=list)  # (t, agent, flagged)

    def metrics_for(self, agent) -> list:
        return [m for m in self.metrics if m.agent == agent]

    def flagged_ticks(self, agent) -> list:
        return [t for t, a, f in self.flags if a == agent and f]


class SimulationError(RuntimeError):
    def __init__(self, msg, partial_log=None):
        super().__init__(msg)
        self.partial_log = partial_log


class Simulation:
    """One run of a scenario.

    ``plan`` is the nominal prediction whose fused variances drive the
    pointing law; without it (prediction mode) the run uses its own, and
    all FDI work is skipped.
    """

    def __init__(self, config: ScenarioConfig, plan: NominalPrediction | None = None,
                 inject_faults: bool = True):
        self.cfg = config
        self.plan = plan
        self.predicting = plan is None
        self.pois = PoiArrays.from_pois(config.pois)
        self.agents = list(config.agents)
        self.ids = [a.id for a in self.agents]
        self.n = config.environment.mean_motion_n
        self.dt = config.sim_dt
        self.k = 0
        self.t = 0.0
        self._started = False

        self.states = {a.id: pro_state(a.pro, config.environment, 0.0) for a in self.agents}
        self.poses: dict = {}
        self.aims: dict = {}
        self.rows: dict = {}
        self.visible: dict = {}

        m = len(self.pois)
        self.variance = self.pois.prior_variance.copy()  # pointing priorities
        prior_psi = self.pois.prior_variance ** 2
        self.agent_psi = {a: prior_psi for a in self.ids}
        self.h_i = {a: 0.0 for a in self.ids}
        self.h_known = {a: 0.0 for a in self.ids}  # monitor-side view, held while disconnected
        self.breakdown: CostBreakdown | None = None
        self.held_rows = {a: np.full(m, np.inf) for a in self.ids}
        self.graph: CommGraph | None = None

        faults = config.faults if inject_faults and not self.predicting else ()
        self.faults = {kind: {} for kind in
                       (ACTUATOR_STATE, ACTUATOR_POINTING, INSPECTION_SENSOR, SPURIOUS_COMM)}
        for spec in faults:
            self.faults[spec.kind].setdefault(spec.target_agent, []).append(
                ActiveFault.create(spec, config.master_seed))

        # monitor state
        self.reported: dict = {}
        self.last_fresh: dict = {}
        self.threshold_rng = {
            a: np.random.default_rng(derive_seed(config.master_seed, a, "threshold", 0.0))
            for a in self.ids
        }
        self.epsilon = config.epsilon
        self.h_times: list = []
        self.h_real: list = []
        self.h_nom: list = []

        self._plan_fusions = [] if plan is None else sorted(plan.fusion_variance)
        self.prediction = NominalPrediction(0.0, config.n_steps * self.dt)
        self.log = TelemetryLog(config.name, list(self.ids))

    # --- per-tick pieces ---------------------------------------------------------

    def _pointing_variance(self) -> np.ndarray:
        if self.predicting:
            return self.variance
        # fusion at the current tick happens after pointing, so only earlier fusions count
        j = bisect.bisect_left(self._plan_fusions, self.k) - 1
        if j < 0:
            return self.pois.prior_variance
        return self.plan.fusion_variance[self._plan_fusions[j]]

    def _point(self, agent) -> None:
        pos = self.states[agent.id].position
        cand = facing_mask(pos, agent.camera, self.pois, self.cfg.target)
        if cand.any():
            var = np.where(cand, self._pointing_variance(), -np.inf)
            # argmax returns the first maximum, i.e. the lowest POI id on ties
            j = int(np.argmax(var))
            aim_id = int(self.pois.ids[j])
            aim = self.pois.positions[j]
        else:
            aim_id, aim = None, np.zeros(3)
        try:
            pose = point_at(pos, aim)
        except ValueError:
            pose = Pose(pos, np.array([1.0, 0.0, 0.0]))
        for f in self.faults[ACTUATOR_POINTING].get(agent.id, ()):
            pose = apply_pointing_fault(f.spec, self.t, pose, f.rng)
        self.poses[agent.id] = pose
        self.aims[agent.id] = aim_id

    def _sense(self, agent) -> None:
        pose = self.poses[agent.id]
        mask = visible_mask(pose, agent.camera, self.pois, self.cfg.target)
        d = self.pois.positions - pose.position
        row = np.where(mask, agent.camera.sigma_scale * np.einsum("ij,ij->i", d, d), np.inf)
        for f in self.faults[INSPECTION_SENSOR].get(agent.id, ()):
            row = apply_sensor_variance_fault(f.spec, self.t, row)
        self.rows[agent.id] = row
        self.visible[agent.id] = mask

    def _advance(self) -> None:
        t_prev = self.t
        for agent in self.agents:
            state = self.states[agent.id]
            for f in self.faults[ACTUATOR_STATE].get(agent.id, ()):
                state = apply_state_fault(f.spec, t_prev, state, f.rng, self.dt)
            x = rk4_step(state.as_vector(), _ZERO_U, self.n, self.dt)
            if not np.all(np.isfinite(x)):
                raise PropagationDiverged(f"agent {agent.id} diverged at t={t_prev}")
            self.states[agent.id] = RelativeState.from_vector(x)
        self.k += 1
        self.t = self.k * self.dt

    def step(self) -> None:
        """Advance one tick: propagate, point, sense."""
        if self._started:
            self._advance()
        self._started = True
        for agent in self.agents:
            self._point(agent)
            self._sense(agent)
        positions = np.array([self.states[a].position for a in self.ids]).reshape(-1, 3)
        self.graph = comm_graph(self.t, self.ids, positions, self.cfg.comm_radius)

    def fusion_step(self) -> CostBreakdown:
        obs = self.ids
        for a in obs:
            if self.graph.hub_connected[a]:
                self.held_rows[a] = self.rows[a]
        values = np.array([self.held_rows[a] for a in obs]).reshape(len(obs), len(self.pois))
        table = SigmaTable(obs, self.pois.ids, values, self.t)
        bd = decompose(self.pois, table)
        self.breakdown = bd
        for a in obs:
            if self.graph.hub_connected[a]:
                self.agent_psi[a] = bd.psi_array
        self.variance = fused_variance(self.pois, table)
        if self.predicting:
            self.prediction.fusion_variance[self.k] = self.variance
        self.log.fusions.append(bd)
        return bd

    def _update_local_costs(self) -> None:
        for a in self.ids:
            self.h_i[a] = contribution(self.rows[a], self.pois.importance * self.agent_psi[a])
            if self.graph.hub_connected[a]:
                self.h_known[a] = self.h_i[a]

    def _true_cost(self) -> float:
        values = np.array([self.rows[a] for a in self.ids]).reshape(len(self.ids), len(self.pois))
        table = SigmaTable(self.ids, self.pois.ids, values, self.t)
        return float(np.sum(fused_variance(self.pois, table) * self.pois.importance))

    def _transmit(self, a) -> float:
        value = self.h_i[a]
        for f in self.faults[SPURIOUS_COMM].get(a, ()):
            value = apply_comm_fault(f.spec, self.t, value, f.rng)
        return value

    def _record_prediction(self) -> None:
        snap = AgentSnapshot(
            t=self.t,
            positions={a: self.states[a].position.copy() for a in self.ids},
            aim_poi=dict(self.aims),
            sigma_rows={a: self.rows[a].copy() for a in self.ids},
            visible_sets={a: frozenset(int(i) for i in self.pois.ids[self.visible[a]])
                          for a in self.ids},
            h_i=dict(self.h_i),
        )
        self.prediction.add(snap, self._true_cost(), self.k)

    def fdi_step(self) -> FaultReport:
        cfg = self.cfg
        snap = self.plan.at_tick(self.k)
        prev_tick = self.k - cfg.fdi_every
        prev_snap = self.plan.at_tick(prev_tick)
        flagged = []
        for agent in self.agents:
            a = agent.id
            if not self.graph.hub_connected[a]:
                continue
            h_now = self._transmit(a)
            if self.last_fresh.get(a) != prev_tick:
                self.reported[a] = h_now
                self.last_fresh[a] = self.k
                continue
            weights = self.pois.importance * self.agent_psi[a]
            h_pred = contribution(snap.sigma_rows[a], weights)
            if cfg.fdi.h_prev_mode == "predicted":
                h_prev = prev_snap.h_i[a]
            else:
                h_prev = self.reported[a]
            rec = fault_metric(h_now, h_prev, h_pred, agent=a, t=self.t)
            self.reported[a] = h_now
            self.last_fresh[a] = self.k
            self.log.metrics.append(rec)
            if not rec.determinate:
                self.log.flags.append((self.t, a, False))
                continue
            thr = self._threshold(agent, rec, weights, h_prev)
            self.log.thresholds.append(thr)
            flag = rec.metric > thr.tau
            self.log.flags.append((self.t, a, flag))
            if flag:
                flagged.append((a, rec.classification, rec.metric, thr.tau))

        integral = cost_gap_integral(self.h_times, self.h_real, self.h_nom, self.t)
        gflag = integral >= cfg.fdi.delta_threshold * self.t
        report = FaultReport(self.t, flagged, gflag, integral)
        self.log.reports.append(report)
        return report

    def _threshold(self, agent, rec: FaultMetricRecord, weights, h_prev) -> ThresholdRecord:
        cfg = self.cfg
        a = agent.id
        try:
            cands = sample_candidate_sets(a, self.plan, self.t, self.epsilon, cfg.fdi.n_samples,
                                          self.threshold_rng[a], agent.camera, self.pois,
                                          cfg.target)
            return compute_threshold(a, cands, self.plan, h_prev, self.t, camera=agent.camera,
                                     pois=self.pois, weights=weights, epsilon=self.epsilon,
                                     h_observed=rec.h_now)
        except (ThresholdUnavailable, EmptyCandidates):
            return fallback_threshold(a, self.t, cfg.fdi.tau_floor, cfg.fdi.n_samples,
                                      self.epsilon)

    def _log_states(self) -> None:
        for a in self.ids:
            s = self.states[a]
            self.log.states.append((self.t, a, s.position.copy(), s.velocity.copy(),
                                    self.poses[a].boresight.copy(), self.aims[a],
                                    int(self.visible[a].sum()), self.h_i[a], self.h_known[a],
                                    self.graph.hub_connected[a]))

    # --- driver -----------------------------------------------------------------------

    def run(self) -> TelemetryLog:
        cfg = self.cfg
        try:
            for _ in range(cfg.n_steps + 1):
                self.step()
                if self.k % cfg.fusion_every == 0:
                    self.fusion_step()
                self._update_local_costs()
                self._log_states()
                if self.k % cfg.fdi_every == 0:
                    h_true = self._true_cost()
                    if self.predicting:
                        self._record_prediction()
                        continue
                    self.h_times.append(self.t)
                    self.h_real.append(h_true)
                    self.h_nom.append(self.plan.h_nom[self.plan._index[self.k]])
                    if self.k == 0:
                        for a in self.ids:
                            if self.graph.hub_connected[a]:
                                self.reported[a] = self._transmit(a)
                                self.last_fresh[a] = 0
                        self.log.cost.append((self.t, h_true, self.h_nom[-1], 0.0))
                        continue
                    report = self.fdi_step()
                    self.log.cost.append((self.t, h_true, self.h_nom[-1], report.cost_integral))
        except PropagationDiverged as exc:
            raise SimulationError(str(exc), self.log) from exc
        return self.log


def predict_nominal(config: ScenarioConfig) -> NominalPrediction:
    """Fault-free replica of ``config`` sampled at the FDI ticks."""
    sim = Simulation(config.without_faults(), plan=None)
    sim.run()
    return sim.prediction


def run_scenario(config: ScenarioConfig, prediction: NominalPrediction | None = None
                 ) -> TelemetryLog:
    if prediction is None:
        prediction = predict_nominal(config)
    sim = Simulation(config, plan=prediction)
    return sim.run()
