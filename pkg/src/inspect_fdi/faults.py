"""Fault injection: actuator (state and pointing), inspection sensor, telemetry.

Every fault is the identity before its onset time and for zero magnitude.
Each :class:`FaultSpec` owns an independent random stream, so faults on
one agent never consume random numbers belonging to another.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import RelativeState
from .sensing import Pose

ACTUATOR_STATE = "actuator-state"
ACTUATOR_POINTING = "actuator-pointing"
INSPECTION_SENSOR = "inspection-sensor"
SPURIOUS_COMM = "spurious-comm"
FAULT_KINDS = (ACTUATOR_STATE, ACTUATOR_POINTING, INSPECTION_SENSOR, SPURIOUS_COMM)


class WrongFaultKind(ValueError):
    pass


@dataclass(frozen=True)
class FaultSpec:
    """One injected fault.

    ``magnitude`` units depend on ``kind``:

    * actuator-state: acceleration noise std (m/s^2); each step adds a
      velocity kick with std ``magnitude * dt``
    * actuator-pointing: std (rad) of the boresight error angle
    * inspection-sensor: multiplicative inflation of sigma
    * spurious-comm: std of additive noise on the reported H_i
    """

    target_agent: int
    kind: str
    onset_time: float = 0.0
    magnitude: float = 0.0
    rng_seed: int | None = None

    def __post_init__(self):
        if self.kind not in FAULT_KINDS:
            raise ValueError(f"unknown fault kind {self.kind!r}")
        if self.onset_time < 0:
            raise ValueError("onset_time must be >= 0")
        if self.magnitude < 0:
            raise ValueError("magnitude must be >= 0")

    def active(self, t: float) -> bool:
        return t >= self.onset_time

    def seed(self, master_seed: int = 0) -> int:
        if self.rng_seed is not None:
            return int(self.rng_seed)
        return derive_seed(master_seed, self.target_agent, self.kind, self.onset_time)

    def make_rng(self, master_seed: int = 0) -> np.random.Generator:
        return np.random.default_rng(self.seed(master_seed))


def derive_seed(master_seed: int, agent: int, kind: str, onset_time: float) -> int:
    key = f"{master_seed}|{agent}|{kind}|{float(onset_time).hex()}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def _require(spec: FaultSpec, kind: str) -> None:
    if spec.kind != kind:
        raise WrongFaultKind(f"expected a {kind} fault, got {spec.kind}")


def apply_state_fault(spec: FaultSpec, t: float, state: RelativeState,
                      rng: np.random.Generator, dt: float) -> RelativeState:
    _require(spec, ACTUATOR_STATE)
    if not spec.active(t) or spec.magnitude == 0.0:
        return state
    kick = rng.normal(0.0, spec.magnitude * dt, size=3)
    return RelativeState(state.position.copy(), state.velocity + kick)


def rotate_about(v: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation of ``v`` about unit ``axis``."""
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * float(axis @ v) * (1.0 - c)


def random_orthogonal_axis(b: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # orthonormal basis {e1, e2} of the plane normal to b, then a uniform angle
    helper = np.array([1.0, 0.0, 0.0]) if abs(b[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(b, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(b, e1)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    return math.cos(phi) * e1 + math.sin(phi) * e2


def apply_pointing_fault(spec: FaultSpec, t: float, pose: Pose,
                         rng: np.random.Generator) -> Pose:
    _require(spec, ACTUATOR_POINTING)
    if not spec.active(t) or spec.magnitude == 0.0:
        return pose
    angle = abs(rng.normal(0.0, spec.magnitude))
    axis = random_orthogonal_axis(pose.boresight, rng)
    b = rotate_about(pose.boresight, axis, angle)
    return Pose(pose.position, b / np.linalg.norm(b))


def apply_sensor_variance_fault(spec: FaultSpec, t: float, sigma_value):
    """Inflate (or deflate) finite variances; works on scalars and arrays."""
    _require(spec, INSPECTION_SENSOR)
    # magnitude 0 means "not configured", like every other fault kind; a
    # literal zero factor would turn visible POIs into perfect observations
    if not spec.active(t) or spec.magnitude in (0.0, 1.0):
        return sigma_value
    if np.isscalar(sigma_value):
        return sigma_value if math.isinf(sigma_value) else sigma_value * spec.magnitude
    arr = np.asarray(sigma_value, dtype=float)
    return np.where(np.isinf(arr), np.inf, arr * spec.magnitude)


def apply_comm_fault(spec: FaultSpec, t: float, reported_h: float,
                     rng: np.random.Generator) -> float:
    _require(spec, SPURIOUS_COMM)
    if not spec.active(t) or spec.magnitude == 0.0:
        return reported_h
    return reported_h + float(rng.normal(0.0, spec.magnitude))


@dataclass
class ActiveFault:
    """Runtime pairing of a spec with its private random stream."""

    spec: FaultSpec
    rng: np.random.Generator = field(repr=False)

    @classmethod
    def create(cls, spec: FaultSpec, master_seed: int = 0) -> "ActiveFault":
        return cls(spec, spec.make_rng(master_seed))
