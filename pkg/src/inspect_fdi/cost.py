"""Global information cost and its per-agent decomposition.

For every POI ``s`` the fused variance is

    h(s) = (1/w + sum_p 1/sigma(p, s))^-1

and the global cost is ``H = sum_s phi(s) h(s)``.  Writing
``psi(s) = h(s)**2`` turns ``h(s) = psi(s) * (1/w + sum_p 1/sigma)`` into a
sum that splits additively over observers:

    H = sum_s phi psi / w  +  sum_i sum_{s in S_i} phi psi / sigma(p_i, s)
        `---- prior ----'       `------------- H_i --------------'

``psi`` is refreshed only at fusion instants, so between fusions the
split is a linearization around the last fused state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .sensing import PoiArrays, PoiModel


class UnknownAgent(KeyError):
    pass


def _inv(sigmas) -> np.ndarray:
    s = np.asarray(sigmas, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(np.isinf(s), 0.0, 1.0 / s)


@dataclass
class SigmaTable:
    """Observation variances, one row per observer, columns in POI id order."""

    observer_ids: list
    poi_ids: np.ndarray
    values: np.ndarray  # (n_observers, n_pois), inf = not visible
    timestamp: float = 0.0

    def __post_init__(self):
        self.observer_ids = list(self.observer_ids)
        self.poi_ids = np.asarray(self.poi_ids, dtype=int)
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.observer_ids),
                                                                   len(self.poi_ids))
        finite = self.values[np.isfinite(self.values)]
        if np.any(finite <= 0):
            raise ValueError("finite sigma entries must be > 0")

    @classmethod
    def empty(cls, poi_ids, timestamp: float = 0.0) -> "SigmaTable":
        return cls([], poi_ids, np.zeros((0, len(poi_ids))), timestamp)

    @classmethod
    def from_entries(cls, observer_ids, poi_ids, entries: dict, timestamp: float = 0.0):
        """Build from a sparse ``{(observer, poi): sigma}`` map; missing = invisible."""
        values = np.full((len(observer_ids), len(poi_ids)), np.inf)
        col = {int(p): k for k, p in enumerate(poi_ids)}
        row = {o: k for k, o in enumerate(observer_ids)}
        for (o, p), v in entries.items():
            values[row[o], col[p]] = v
        return cls(observer_ids, poi_ids, values, timestamp)

    def row(self, observer_id) -> np.ndarray:
        try:
            return self.values[self.observer_ids.index(observer_id)]
        except ValueError:
            raise UnknownAgent(observer_id) from None

    def get(self, observer_id, poi_id) -> float:
        k = int(np.searchsorted(self.poi_ids, poi_id))
        return float(self.row(observer_id)[k])

    def information(self) -> np.ndarray:
        """Column sums of 1/sigma (invisible entries contribute 0)."""
        if not self.observer_ids:
            return np.zeros(len(self.poi_ids))
        return _inv(self.values).sum(axis=0)


@dataclass(frozen=True)
class FusionSchedule:
    omega_g: float
    omega_fdi: float

    def __post_init__(self):
        if not (self.omega_fdi > 0 and self.omega_g >= self.omega_fdi):
            raise ValueError("need omega_g >= omega_fdi > 0")


@dataclass(frozen=True)
class CostBreakdown:
    total_H: float
    prior_term: float
    agent_terms: dict
    psi: dict
    timestamp: float = 0.0
    psi_array: np.ndarray = field(default=None, repr=False, compare=False)

    def residual(self) -> float:
        return self.total_H - (self.prior_term + sum(self.agent_terms.values()))


def h_poi(poi: PoiModel, sigmas: Sequence[float]) -> float:
    info = 1.0 / poi.prior_variance + sum(0.0 if math.isinf(s) else 1.0 / s for s in sigmas)
    return 1.0 / info


def psi(poi: PoiModel, sigmas: Sequence[float]) -> float:
    info = 1.0 / poi.prior_variance + sum(0.0 if math.isinf(s) else 1.0 / s for s in sigmas)
    return 1.0 / (info * info)


def fused_variance(pois: PoiArrays, table: SigmaTable) -> np.ndarray:
    return 1.0 / (1.0 / pois.prior_variance + table.information())


def psi_array(pois: PoiArrays, table: SigmaTable) -> np.ndarray:
    info = 1.0 / pois.prior_variance + table.information()
    return 1.0 / (info * info)


def total_cost(pois: Sequence[PoiModel] | PoiArrays, table: SigmaTable) -> float:
    arr = pois if isinstance(pois, PoiArrays) else PoiArrays.from_pois(pois)
    _check_columns(arr, table)
    return float(np.sum(fused_variance(arr, table) * arr.importance))


def contribution(sigma_row: np.ndarray, weights: np.ndarray) -> float:
    """``sum_s weights[s] / sigma[s]`` over finite entries, in POI id order.

    Always reduces over the full row, so two rows with identical finite
    entries produce bit-identical sums.
    """
    return float(np.sum(weights * _inv(sigma_row)))


def decompose(pois: Sequence[PoiModel] | PoiArrays, table: SigmaTable,
              observers: Sequence | None = None) -> CostBreakdown:
    arr = pois if isinstance(pois, PoiArrays) else PoiArrays.from_pois(pois)
    _check_columns(arr, table)
    observers = list(table.observer_ids if observers is None else observers)
    ps = psi_array(arr, table)
    weights = arr.importance * ps
    prior_term = float(np.sum(weights / arr.prior_variance))
    agent_terms = {o: contribution(table.row(o), weights) for o in observers}
    total = float(np.sum(fused_variance(arr, table) * arr.importance))
    return CostBreakdown(
        total_H=total,
        prior_term=prior_term,
        agent_terms=agent_terms,
        psi={int(i): float(v) for i, v in zip(arr.ids, ps)},
        timestamp=table.timestamp,
        psi_array=ps,
    )


def agent_cost(observer_id, pois: Sequence[PoiModel] | PoiArrays, table: SigmaTable,
               psi_values: np.ndarray | None = None) -> float:
    """H_i for one observer.  ``psi_values`` defaults to the table's own fused psi."""
    arr = pois if isinstance(pois, PoiArrays) else PoiArrays.from_pois(pois)
    row = table.row(observer_id)
    ps = psi_array(arr, table) if psi_values is None else psi_values
    return contribution(row, arr.importance * ps)


def _check_columns(arr: PoiArrays, table: SigmaTable) -> None:
    if not np.array_equal(arr.ids, table.poi_ids):
        raise ValueError("sigma table columns do not match POI ids")
