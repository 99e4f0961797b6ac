"""Scenario description, YAML (de)serialization and validation."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .cost import FusionSchedule
from .dynamics import OrbitEnvironment, ProParameters
from .faults import FAULT_KINDS, FaultSpec
from .sensing import CameraModel, PoiModel, TargetBody, fibonacci_sphere_pois

CADENCE_TOL = 1e-6


class ScenarioError(ValueError):
    """Scenario file could not be parsed or violates constraints."""

    def __init__(self, errors):
        self.errors = list(errors) if not isinstance(errors, str) else [errors]
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class AgentConfig:
    id: int
    pro: ProParameters
    camera: CameraModel


@dataclass(frozen=True)
class FdiSettings:
    epsilon: float | None = None  # m; None derives it from epsilon_accel
    epsilon_accel: float = 1e-4  # m/s^2, expected actuator noise level
    epsilon_scale: float = 0.5
    n_samples: int = 10
    tau_floor: float = 0.05
    delta_threshold: float = 1e-6
    h_prev_mode: str = "measured"  # or "predicted"


@dataclass(frozen=True)
class ScenarioConfig:
    environment: OrbitEnvironment
    agents: tuple
    pois: tuple
    target: TargetBody
    schedule: FusionSchedule
    sim_dt: float
    horizon_orbits: float = 2.0
    faults: tuple = ()
    comm_radius: float = math.inf
    fdi: FdiSettings = field(default_factory=FdiSettings)
    master_seed: int = 0
    name: str = "scenario"

    @property
    def agent_ids(self) -> list:
        return [a.id for a in self.agents]

    @property
    def fusion_every(self) -> int:
        return int(round(1.0 / (self.schedule.omega_g * self.sim_dt)))

    @property
    def fdi_every(self) -> int:
        return int(round(1.0 / (self.schedule.omega_fdi * self.sim_dt)))

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon_orbits * self.environment.orbit_period / self.sim_dt))

    @property
    def fdi_window(self) -> float:
        return self.fdi_every * self.sim_dt

    @property
    def epsilon(self) -> float:
        if self.fdi.epsilon is not None:
            return self.fdi.epsilon
        w = self.fdi_window
        return self.fdi.epsilon_scale * self.fdi.epsilon_accel * w * w

    def without_faults(self) -> "ScenarioConfig":
        return _replace(self, faults=())

    def replace(self, **changes) -> "ScenarioConfig":
        return _replace(self, **changes)


def _replace(cfg, **changes):
    from dataclasses import replace
    return replace(cfg, **changes)


# --- dict <-> config ---------------------------------------------------------

def _num(x: float):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "name": cfg.name,
        "master_seed": cfg.master_seed,
        "environment": {"mean_motion_n": cfg.environment.mean_motion_n},
        "sim_dt": cfg.sim_dt,
        "horizon_orbits": cfg.horizon_orbits,
        "comm_radius": _num(cfg.comm_radius),
        "schedule": {"omega_g": cfg.schedule.omega_g, "omega_fdi": cfg.schedule.omega_fdi},
        "target": ({"shape": "sphere", "radius": cfg.target.radius}
                   if cfg.target.shape == "sphere"
                   else {"shape": "box", "half_extents": list(cfg.target.half_extents)}),
        "agents": [
            {
                "id": a.id,
                "pro": {
                    "radial_amplitude": a.pro.radial_amplitude,
                    "along_track_offset": a.pro.along_track_offset,
                    "cross_track_amplitude": a.pro.cross_track_amplitude,
                    "phase_radial": a.pro.phase_radial,
                    "phase_cross": a.pro.phase_cross,
                },
                "camera": {
                    "half_angle_fov": a.camera.half_angle_fov,
                    "max_range": _num(a.camera.max_range),
                    "sigma_scale": a.camera.sigma_scale,
                },
            }
            for a in cfg.agents
        ],
        "pois": [
            {
                "id": p.id,
                "position": list(p.position),
                "normal": list(p.surface_normal),
                "importance": p.importance,
                "prior_variance": p.prior_variance,
            }
            for p in cfg.pois
        ],
        "faults": [
            {
                "agent": f.target_agent,
                "kind": f.kind,
                "onset_time": f.onset_time,
                "magnitude": f.magnitude,
                "rng_seed": f.rng_seed,
            }
            for f in cfg.faults
        ],
        "fdi": {
            "epsilon": cfg.fdi.epsilon,
            "epsilon_accel": cfg.fdi.epsilon_accel,
            "epsilon_scale": cfg.fdi.epsilon_scale,
            "n_samples": cfg.fdi.n_samples,
            "tau_floor": cfg.fdi.tau_floor,
            "delta_threshold": cfg.fdi.delta_threshold,
            "h_prev_mode": cfg.fdi.h_prev_mode,
        },
    }


class _Checker:
    """Collects every validation failure with its field path."""

    def __init__(self):
        self.errors: list[str] = []

    def fail(self, path: str, msg: str) -> None:
        self.errors.append(f"{path}: {msg}")

    def number(self, d: dict, key: str, path: str, default=None, *, required=False,
               positive=False, nonneg=False, allow_inf=False, allow_none=False):
        full = f"{path}.{key}" if path else key
        if key not in d or (d[key] is None and not allow_none):
            if required:
                self.fail(full, "missing required field")
                return None
            return default
        raw = d[key]
        if raw is None:
            return None
        if isinstance(raw, str):
            # YAML 1.1 reads "1.0e4" (no exponent sign) and "inf" as strings
            text = raw.strip().lower().replace(".inf", "inf")
            try:
                raw = float(text)
            except ValueError:
                pass
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            self.fail(full, f"expected a number, got {raw!r}")
            return None
        val = float(raw)
        if math.isnan(val) or (math.isinf(val) and not allow_inf):
            self.fail(full, "must be finite")
            return None
        if positive and not val > 0:
            self.fail(full, f"must be > 0, got {val}")
            return None
        if nonneg and val < 0:
            self.fail(full, f"must be >= 0, got {val}")
            return None
        return val

    def integer(self, d: dict, key: str, path: str, default=None, *, required=False, minimum=None):
        full = f"{path}.{key}" if path else key
        if key not in d or d[key] is None:
            if required:
                self.fail(full, "missing required field")
            return default
        raw = d[key]
        if isinstance(raw, bool) or not isinstance(raw, int):
            self.fail(full, f"expected an integer, got {raw!r}")
            return None
        if minimum is not None and raw < minimum:
            self.fail(full, f"must be >= {minimum}, got {raw}")
            return None
        return raw

    def vector(self, d: dict, key: str, path: str):
        full = f"{path}.{key}"
        raw = d.get(key)
        if (not isinstance(raw, (list, tuple)) or len(raw) != 3
                or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in raw)
                or not all(math.isfinite(c) for c in raw)):
            self.fail(full, f"expected a finite 3-vector, got {raw!r}")
            return None
        return tuple(float(c) for c in raw)

    def section(self, d: dict, key: str, path: str = "", required=True) -> dict:
        full = f"{path}.{key}" if path else key
        raw = d.get(key)
        if raw is None:
            if required:
                self.fail(full, "missing required section")
            return {}
        if not isinstance(raw, dict):
            self.fail(full, "expected a mapping")
            return {}
        return raw


def from_dict(data: Any) -> ScenarioConfig:
    """Validate ``data`` and build a config, reporting every violation at once."""
    if not isinstance(data, dict):
        raise ScenarioError("scenario root must be a mapping")
    ck = _Checker()

    env_d = ck.section(data, "environment")
    n = ck.number(env_d, "mean_motion_n", "environment", required=True, positive=True)

    sched_d = ck.section(data, "schedule")
    omega_g = ck.number(sched_d, "omega_g", "schedule", required=True, positive=True)
    omega_fdi = ck.number(sched_d, "omega_fdi", "schedule", required=True, positive=True)
    if omega_g and omega_fdi and omega_g < omega_fdi:
        ck.fail("schedule", "omega_g must be >= omega_fdi")

    horizon = ck.number(data, "horizon_orbits", "", 2.0, positive=True)
    sim_dt = ck.number(data, "sim_dt", "", None, positive=True)
    if sim_dt is None and n:
        sim_dt = 2.0 * math.pi / n / 2000.0
    comm_radius = ck.number(data, "comm_radius", "", math.inf, positive=True, allow_inf=True)
    master_seed = ck.integer(data, "master_seed", "", 0, minimum=0)
    name = data.get("name", "scenario")
    if not isinstance(name, str):
        ck.fail("name", "expected a string")
        name = "scenario"

    if sim_dt and omega_g and omega_fdi:
        for label, om in (("omega_g", omega_g), ("omega_fdi", omega_fdi)):
            ratio = 1.0 / (om * sim_dt)
            if ratio < 1.0 - CADENCE_TOL or abs(ratio - round(ratio)) > CADENCE_TOL * ratio:
                ck.fail(f"schedule.{label}", f"1/{label} = {1.0 / om} s is not a whole multiple of "
                                             f"sim_dt = {sim_dt} s")

    tgt_d = ck.section(data, "target")
    target = None
    shape = tgt_d.get("shape", "sphere")
    if shape == "sphere":
        r = ck.number(tgt_d, "radius", "target", required=True, positive=True)
        if r:
            target = TargetBody("sphere", radius=r)
    elif shape == "box":
        he = ck.vector(tgt_d, "half_extents", "target")
        if he and all(h > 0 for h in he):
            target = TargetBody("box", half_extents=he)
        elif he:
            ck.fail("target.half_extents", "must be > 0")
    else:
        ck.fail("target.shape", f"expected 'sphere' or 'box', got {shape!r}")

    agents = []
    agents_raw = data.get("agents", [])
    if not isinstance(agents_raw, list):
        ck.fail("agents", "expected a list")
        agents_raw = []
    seen = set()
    for k, a in enumerate(agents_raw):
        path = f"agents[{k}]"
        if not isinstance(a, dict):
            ck.fail(path, "expected a mapping")
            continue
        aid = ck.integer(a, "id", path, required=True, minimum=0)
        if aid is not None:
            if aid in seen:
                ck.fail(f"{path}.id", f"duplicate agent id {aid}")
            seen.add(aid)
        pro_d = ck.section(a, "pro", path)
        pp = f"{path}.pro"
        ar = ck.number(pro_d, "radial_amplitude", pp, 0.0, nonneg=True)
        yo = ck.number(pro_d, "along_track_offset", pp, 0.0)
        ac = ck.number(pro_d, "cross_track_amplitude", pp, 0.0, nonneg=True)
        phr = ck.number(pro_d, "phase_radial", pp, 0.0)
        phc = ck.number(pro_d, "phase_cross", pp, 0.0)
        cam_d = ck.section(a, "camera", path)
        cp = f"{path}.camera"
        fov = ck.number(cam_d, "half_angle_fov", cp, required=True, positive=True)
        if fov is not None and not fov < math.pi / 2:
            ck.fail(f"{cp}.half_angle_fov", "must be < pi/2")
            fov = None
        rng_ = ck.number(cam_d, "max_range", cp, 1.0e4, positive=True, allow_inf=True)
        sc = ck.number(cam_d, "sigma_scale", cp, 1.0, positive=True)
        if None not in (aid, ar, yo, ac, phr, phc, fov, rng_, sc):
            agents.append(AgentConfig(aid, ProParameters(ar, yo, ac, phr, phc),
                                      CameraModel(fov, rng_, sc)))

    pois = _load_pois(data, ck, target)

    faults = []
    faults_raw = data.get("faults", []) or []
    if not isinstance(faults_raw, list):
        ck.fail("faults", "expected a list")
        faults_raw = []
    for k, f in enumerate(faults_raw):
        path = f"faults[{k}]"
        if not isinstance(f, dict):
            ck.fail(path, "expected a mapping")
            continue
        ag = ck.integer(f, "agent", path, required=True)
        if ag is not None and ag not in seen:
            ck.fail(f"{path}.agent", f"unknown agent id {ag}")
        kind = f.get("kind")
        if kind not in FAULT_KINDS:
            ck.fail(f"{path}.kind", f"expected one of {FAULT_KINDS}, got {kind!r}")
        onset = ck.number(f, "onset_time", path, 0.0, nonneg=True)
        mag = ck.number(f, "magnitude", path, required=True, nonneg=True)
        seed = ck.integer(f, "rng_seed", path, None, minimum=0)
        if None not in (ag, onset, mag) and kind in FAULT_KINDS:
            faults.append(FaultSpec(ag, kind, onset, mag, seed))

    fdi_d = ck.section(data, "fdi", required=False)
    eps = ck.number(fdi_d, "epsilon", "fdi", None, nonneg=True)
    eps_a = ck.number(fdi_d, "epsilon_accel", "fdi", FdiSettings.epsilon_accel, nonneg=True)
    eps_s = ck.number(fdi_d, "epsilon_scale", "fdi", FdiSettings.epsilon_scale, nonneg=True)
    ns = ck.integer(fdi_d, "n_samples", "fdi", FdiSettings.n_samples, minimum=1)
    floor = ck.number(fdi_d, "tau_floor", "fdi", FdiSettings.tau_floor, nonneg=True)
    dth = ck.number(fdi_d, "delta_threshold", "fdi", FdiSettings.delta_threshold)
    mode = fdi_d.get("h_prev_mode", "measured")
    if mode not in ("measured", "predicted"):
        ck.fail("fdi.h_prev_mode", f"expected 'measured' or 'predicted', got {mode!r}")

    if ck.errors:
        raise ScenarioError(ck.errors)

    return ScenarioConfig(
        environment=OrbitEnvironment(n),
        agents=tuple(sorted(agents, key=lambda a: a.id)),
        pois=tuple(sorted(pois, key=lambda p: p.id)),
        target=target,
        schedule=FusionSchedule(omega_g, omega_fdi),
        sim_dt=sim_dt,
        horizon_orbits=horizon,
        faults=tuple(faults),
        comm_radius=comm_radius,
        fdi=FdiSettings(eps, eps_a, eps_s, ns, floor, dth, mode),
        master_seed=master_seed,
        name=name,
    )


def _load_pois(data: dict, ck: _Checker, target: TargetBody | None) -> list:
    raw = data.get("pois", [])
    if isinstance(raw, dict):
        # generator block, e.g. {generator: fibonacci_sphere, count: 200}
        gen = raw.get("generator")
        if gen != "fibonacci_sphere":
            ck.fail("pois.generator", f"unknown generator {gen!r}")
            return []
        count = ck.integer(raw, "count", "pois", required=True, minimum=0)
        imp = ck.number(raw, "importance", "pois", 1.0, nonneg=True)
        w = ck.number(raw, "prior_variance", "pois", 1.0, positive=True)
        radius = ck.number(raw, "radius", "pois", target.radius if target and
                           target.shape == "sphere" else None, positive=True)
        if radius is None:
            ck.fail("pois.radius", "required unless the target is a sphere")
        if None in (count, imp, w, radius):
            return []
        return fibonacci_sphere_pois(count, radius, imp, w)
    if not isinstance(raw, list):
        ck.fail("pois", "expected a list or a generator mapping")
        return []
    pois, seen = [], set()
    for k, p in enumerate(raw):
        path = f"pois[{k}]"
        if not isinstance(p, dict):
            ck.fail(path, "expected a mapping")
            continue
        pid = ck.integer(p, "id", path, required=True)
        if pid is not None:
            if pid in seen:
                ck.fail(f"{path}.id", f"duplicate POI id {pid}")
            seen.add(pid)
        pos = ck.vector(p, "position", path)
        nrm = ck.vector(p, "normal", path)
        if nrm is not None and abs(math.sqrt(sum(c * c for c in nrm)) - 1.0) > 1e-9:
            ck.fail(f"{path}.normal", "must be a unit vector")
            nrm = None
        imp = ck.number(p, "importance", path, 1.0, nonneg=True)
        w = ck.number(p, "prior_variance", path, 1.0, positive=True)
        if pos is not None and target is not None and target.contains_strictly(pos):
            ck.fail(f"{path}.position", "lies inside the target body")
        if None not in (pid, pos, nrm, imp, w):
            pois.append(PoiModel(pid, pos, nrm, imp, w))
    return pois


# --- files -------------------------------------------------------------------------

def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError(f"parse error: {exc}") from exc
    return from_dict(data)


def save_scenario(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(to_dict(cfg), sort_keys=False))


def canonical_json(cfg: ScenarioConfig) -> str:
    return json.dumps(to_dict(cfg), sort_keys=True, separators=(",", ":"))


def config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()
