"""Relative orbital motion about a target on a circular orbit.

States live in the target-centered LVLH frame: x radial, y along-track,
z cross-track.  The observer dynamics are the Clohessy-Wiltshire equations

    x'' =  3 n^2 x + 2 n y' + u_x
    y'' = -2 n x'           + u_y
    z'' = -n^2 z            + u_z

integrated with a fixed-step classical Runge-Kutta scheme.  Nominal
trajectories are the drift-free (passive) CW ellipses, available in
closed form through :func:`pro_state`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class PropagationDiverged(RuntimeError):
    """Raised when an integration step produces non-finite values."""


@dataclass(frozen=True)
class OrbitEnvironment:
    mean_motion_n: float

    def __post_init__(self):
        if not (math.isfinite(self.mean_motion_n) and self.mean_motion_n > 0):
            raise ValueError(f"mean_motion_n must be > 0, got {self.mean_motion_n}")

    @property
    def orbit_period(self) -> float:
        return 2.0 * math.pi / self.mean_motion_n


@dataclass
class RelativeState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(3)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])

    @classmethod
    def from_vector(cls, vec) -> "RelativeState":
        vec = np.asarray(vec, dtype=float)
        return cls(vec[:3].copy(), vec[3:6].copy())

    def copy(self) -> "RelativeState":
        return RelativeState(self.position.copy(), self.velocity.copy())


@dataclass(frozen=True)
class ProParameters:
    """Drift-free CW ellipse, parameterized by amplitudes and phases.

    The initial velocity is never stored; it follows from the closed form.
    """

    radial_amplitude: float = 0.0
    along_track_offset: float = 0.0
    cross_track_amplitude: float = 0.0
    phase_radial: float = 0.0
    phase_cross: float = 0.0

    def __post_init__(self):
        if self.radial_amplitude < 0 or self.cross_track_amplitude < 0:
            raise ValueError("PRO amplitudes must be >= 0")


ZERO_CONTROL = np.zeros(3)


def cw_derivative(state: RelativeState, u, env: OrbitEnvironment) -> RelativeState:
    """Time derivative of ``state`` under CW dynamics with acceleration ``u``.

    Returned as a :class:`RelativeState` whose ``position`` slot holds the
    velocity and whose ``velocity`` slot holds the acceleration.
    """
    vec = _cw_rhs(state.as_vector(), np.asarray(u, dtype=float), env.mean_motion_n)
    return RelativeState.from_vector(vec)


def _cw_rhs(x: np.ndarray, u: np.ndarray, n: float) -> np.ndarray:
    n2 = n * n
    return np.array([
        x[3],
        x[4],
        x[5],
        3.0 * n2 * x[0] + 2.0 * n * x[4] + u[0],
        -2.0 * n * x[3] + u[1],
        -n2 * x[2] + u[2],
    ])


def rk4_step(x: np.ndarray, u: np.ndarray, n: float, dt: float) -> np.ndarray:
    k1 = _cw_rhs(x, u, n)
    k2 = _cw_rhs(x + 0.5 * dt * k1, u, n)
    k3 = _cw_rhs(x + 0.5 * dt * k2, u, n)
    k4 = _cw_rhs(x + dt * k3, u, n)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def propagate(state: RelativeState, u, env: OrbitEnvironment, dt: float) -> RelativeState:
    """Advance ``state`` by one RK4 step of length ``dt`` (zero-order-hold ``u``)."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    u = ZERO_CONTROL if u is None else np.asarray(u, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        x = rk4_step(state.as_vector(), u, env.mean_motion_n, dt)
    if not np.all(np.isfinite(x)):
        raise PropagationDiverged(f"non-finite state after step dt={dt}")
    return RelativeState.from_vector(x)


def propagate_many(state: RelativeState, env: OrbitEnvironment, dt: float, steps: int,
                   u=None) -> RelativeState:
    for _ in range(steps):
        state = propagate(state, u, env, dt)
    return state


def pro_state(params: ProParameters, env: OrbitEnvironment, t: float) -> RelativeState:
    """Closed-form state on the drift-free relative orbit at time ``t``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    n = env.mean_motion_n
    # reduce time modulo the period so whole periods map back to exactly the same phase
    theta = n * math.fmod(t, env.orbit_period)
    ar = params.radial_amplitude
    ac = params.cross_track_amplitude
    a_r = theta + params.phase_radial
    a_c = theta + params.phase_cross
    sr, cr = math.sin(a_r), math.cos(a_r)
    sc, cc = math.sin(a_c), math.cos(a_c)
    position = np.array([ar * sr, params.along_track_offset + 2.0 * ar * cr, ac * sc])
    velocity = np.array([ar * n * cr, -2.0 * ar * n * sr, ac * n * cc])
    return RelativeState(position, velocity)


def default_dt(env: OrbitEnvironment) -> float:
    return env.orbit_period / 2000.0
