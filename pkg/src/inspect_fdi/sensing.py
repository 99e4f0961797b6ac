"""Sensor pose, field-of-view visibility and the per-pixel variance model.

The variance of observing a point of interest (POI) ``s`` from a sensor
at ``p`` is ``k * dist(p, s)**2`` when ``s`` is visible and ``+inf``
otherwise, with ``k`` the camera's ``sigma_scale`` (1 by default).

Two flavours of every check live here: scalar functions operating on one
POI (used as reference implementations in tests) and array versions
operating on a :class:`PoiArrays` bundle (used by the simulator).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

SURFACE_TOL = 1e-6  # m
UNIT_TOL = 1e-9


class DegeneratePointing(ValueError):
    """Aim point coincides with the sensor position."""


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(3)
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class Pose:
    position: np.ndarray
    boresight: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boresight, dtype=float).reshape(3)
        if abs(np.linalg.norm(b) - 1.0) > UNIT_TOL:
            raise ValueError("boresight must be a unit vector")
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "boresight", b)


@dataclass(frozen=True)
class CameraModel:
    half_angle_fov: float
    max_range: float = 1.0e4
    sigma_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.half_angle_fov < math.pi / 2:
            raise ValueError("half_angle_fov must lie in (0, pi/2)")
        if not self.max_range > 0:
            raise ValueError("max_range must be > 0")
        if not self.sigma_scale > 0:
            raise ValueError("sigma_scale must be > 0")


@dataclass(frozen=True)
class PoiModel:
    id: int
    position: tuple
    surface_normal: tuple
    importance: float = 1.0
    prior_variance: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        object.__setattr__(self, "surface_normal", tuple(float(c) for c in self.surface_normal))
        if self.importance < 0:
            raise ValueError(f"POI {self.id}: importance must be >= 0")
        if not self.prior_variance > 0:
            raise ValueError(f"POI {self.id}: prior_variance must be > 0")
        if abs(math.sqrt(sum(c * c for c in self.surface_normal)) - 1.0) > UNIT_TOL:
            raise ValueError(f"POI {self.id}: surface_normal must be unit length")


@dataclass(frozen=True)
class TargetBody:
    """Convex occluder centered at the origin: a sphere or an axis-aligned box."""

    shape: str = "sphere"
    radius: float = 1.0
    half_extents: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.shape not in ("sphere", "box"):
            raise ValueError(f"unknown occluder shape {self.shape!r}")
        if self.shape == "sphere" and not self.radius > 0:
            raise ValueError("sphere radius must be > 0")
        object.__setattr__(self, "half_extents", tuple(float(h) for h in self.half_extents))
        if self.shape == "box" and not all(h > 0 for h in self.half_extents):
            raise ValueError("box half_extents must be > 0")

    def contains_strictly(self, point) -> bool:
        """True if ``point`` lies deeper than SURFACE_TOL inside the body."""
        p = np.asarray(point, dtype=float)
        if self.shape == "sphere":
            return float(np.linalg.norm(p)) < self.radius - SURFACE_TOL
        return bool(np.all(np.abs(p) < np.asarray(self.half_extents) - SURFACE_TOL))

    def project_to_surface(self, point) -> np.ndarray:
        """Radially project ``point`` onto the body surface."""
        p = np.asarray(point, dtype=float)
        if self.shape == "sphere":
            return self.radius * p / np.linalg.norm(p)
        scale = np.max(np.abs(p) / np.asarray(self.half_extents))
        return p / scale


@dataclass(frozen=True)
class InspectionMeasurement:
    observer_id: int
    poi_id: int
    value: float
    noise_variance: float


# --- scalar reference checks -------------------------------------------------

def segment_hits_interior(a, b, body: TargetBody) -> bool:
    """Does the segment a->b pass through the occluder interior?"""
    a = np.asarray(a, dtype=float)
    d = np.asarray(b, dtype=float) - a
    if body.shape == "sphere":
        dd = float(d @ d)
        t = 0.0 if dd == 0.0 else min(1.0, max(0.0, -float(a @ d) / dd))
        closest = a + t * d
        return float(np.linalg.norm(closest)) < body.radius - SURFACE_TOL
    h = np.asarray(body.half_extents) - SURFACE_TOL
    t0, t1 = 0.0, 1.0
    for k in range(3):
        if d[k] == 0.0:
            if abs(a[k]) >= h[k]:
                return False
            continue
        lo = (-h[k] - a[k]) / d[k]
        hi = (h[k] - a[k]) / d[k]
        if lo > hi:
            lo, hi = hi, lo
        t0, t1 = max(t0, lo), min(t1, hi)
        if t0 >= t1:
            return False
    return True


def visible(pose: Pose, camera: CameraModel, poi: PoiModel, body: TargetBody) -> bool:
    s = np.asarray(poi.position)
    los = s - pose.position
    dist = float(np.linalg.norm(los))
    if dist == 0.0 or dist > camera.max_range:
        return False
    cos_off = float(pose.boresight @ los) / dist
    if cos_off < math.cos(camera.half_angle_fov):
        return False
    if float(np.asarray(poi.surface_normal) @ (pose.position - s)) <= 0.0:
        return False
    return not segment_hits_interior(pose.position, s, body)


def sigma(pose: Pose, camera: CameraModel, poi: PoiModel, body: TargetBody) -> float:
    """Observation variance of ``poi`` from ``pose``; ``inf`` when not visible."""
    if not visible(pose, camera, poi, body):
        return math.inf
    d = np.asarray(poi.position) - pose.position
    return camera.sigma_scale * float(d @ d)


def inverse_sigma(value: float) -> float:
    return 0.0 if math.isinf(value) else 1.0 / value


def visible_set(pose: Pose, camera: CameraModel, pois: Sequence[PoiModel],
                body: TargetBody) -> frozenset:
    ids = [p.id for p in pois]
    if len(set(ids)) != len(ids):
        raise ValueError("POI ids must be unique")
    return frozenset(p.id for p in pois if visible(pose, camera, p, body))


def point_at(position, aim) -> Pose:
    position = np.asarray(position, dtype=float).reshape(3)
    d = np.asarray(aim, dtype=float).reshape(3) - position
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise DegeneratePointing("aim point coincides with sensor position")
    return Pose(position, d / norm)


# --- array versions ----------------------------------------------------------

@dataclass(frozen=True)
class PoiArrays:
    """Column view of a POI list, sorted by id."""

    ids: np.ndarray
    positions: np.ndarray
    normals: np.ndarray
    importance: np.ndarray
    prior_variance: np.ndarray

    @classmethod
    def from_pois(cls, pois: Iterable[PoiModel]) -> "PoiArrays":
        pois = sorted(pois, key=lambda p: p.id)
        ids = np.array([p.id for p in pois], dtype=int)
        if len(np.unique(ids)) != len(ids):
            raise ValueError("POI ids must be unique")
        return cls(
            ids=ids,
            positions=np.array([p.position for p in pois], dtype=float).reshape(-1, 3),
            normals=np.array([p.surface_normal for p in pois], dtype=float).reshape(-1, 3),
            importance=np.array([p.importance for p in pois], dtype=float),
            prior_variance=np.array([p.prior_variance for p in pois], dtype=float),
        )

    def __len__(self) -> int:
        return len(self.ids)

    def scaled(self, factor: float) -> "PoiArrays":
        return PoiArrays(self.ids, self.positions, self.normals, self.importance,
                         self.prior_variance * factor)


def occlusion_mask(position: np.ndarray, targets: np.ndarray, body: TargetBody) -> np.ndarray:
    """Boolean mask: segment position->target[k] passes through the body interior."""
    a = np.asarray(position, dtype=float)
    d = targets - a
    if body.shape == "sphere":
        dd = np.einsum("ij,ij->i", d, d)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(dd > 0, -(d @ a) / dd, 0.0)
        t = np.clip(t, 0.0, 1.0)
        closest = a + t[:, None] * d
        return np.linalg.norm(closest, axis=1) < body.radius - SURFACE_TOL
    h = np.asarray(body.half_extents) - SURFACE_TOL
    t0 = np.zeros(len(d))
    t1 = np.ones(len(d))
    hit = np.ones(len(d), dtype=bool)
    for k in range(3):
        dk = d[:, k]
        par = dk == 0.0
        hit &= ~(par & (abs(a[k]) >= h[k]))
        with np.errstate(divide="ignore", invalid="ignore"):
            lo = (-h[k] - a[k]) / dk
            hi = (h[k] - a[k]) / dk
        lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
        t0 = np.where(par, t0, np.maximum(t0, lo))
        t1 = np.where(par, t1, np.minimum(t1, hi))
    return hit & (t0 < t1)


def facing_mask(position: np.ndarray, camera: CameraModel, pois: PoiArrays,
                body: TargetBody) -> np.ndarray:
    """POIs that could be seen from ``position`` with a suitable pointing.

    Range, front-facing and occlusion tests only; the field of view is ignored.
    """
    los = pois.positions - position
    dist = np.linalg.norm(los, axis=1)
    ok = (dist > 0) & (dist <= camera.max_range)
    ok &= np.einsum("ij,ij->i", pois.normals, -los) > 0.0
    if ok.any():
        ok[ok] = ~occlusion_mask(position, pois.positions[ok], body)
    return ok


def visible_mask(pose: Pose, camera: CameraModel, pois: PoiArrays, body: TargetBody) -> np.ndarray:
    los = pois.positions - pose.position
    dist = np.linalg.norm(los, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos_off = (los @ pose.boresight) / dist
    ok = (dist > 0) & (dist <= camera.max_range) & (cos_off >= math.cos(camera.half_angle_fov))
    ok &= np.einsum("ij,ij->i", pois.normals, -los) > 0.0
    if ok.any():
        ok[ok] = ~occlusion_mask(pose.position, pois.positions[ok], body)
    return ok


def sigma_row(pose: Pose, camera: CameraModel, pois: PoiArrays, body: TargetBody) -> np.ndarray:
    """Variance of every POI from ``pose`` (``inf`` where not visible)."""
    mask = visible_mask(pose, camera, pois, body)
    d = pois.positions - pose.position
    d2 = np.einsum("ij,ij->i", d, d)
    return np.where(mask, camera.sigma_scale * d2, np.inf)


def fibonacci_sphere_pois(count: int, radius: float, importance: float = 1.0,
                          prior_variance: float = 1.0, start_id: int = 0) -> list[PoiModel]:
    """Quasi-uniform POIs on a sphere surface with outward normals."""
    pois = []
    golden = math.pi * (3.0 - math.sqrt(5.0))
    for k in range(count):
        z = 1.0 - 2.0 * (k + 0.5) / count
        r = math.sqrt(max(0.0, 1.0 - z * z))
        theta = golden * k
        n = (r * math.cos(theta), r * math.sin(theta), z)
        pois.append(PoiModel(start_id + k, tuple(radius * c for c in n), n,
                             importance, prior_variance))
    return pois
