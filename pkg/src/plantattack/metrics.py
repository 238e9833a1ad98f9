"""Front-quality metrics: hypervolume, spread, IGD, and significance testing.

All metrics operate on objective vectors in canonical minimization
orientation. Hypervolume is exact: a sweep in 2-D and slicing over the third
objective in 3-D.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ContractError, DegenerateDataError, MetricError


def pareto_filter(points: np.ndarray) -> np.ndarray:
    """Non-dominated, deduplicated subset of a point set (minimization)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ContractError("points must be a 2-D array")
    n = len(pts)
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        if not keep[i]:
            continue
        for j in range(n):
            if i == j or not keep[j]:
                continue
            if np.all(pts[j] <= pts[i]) and np.any(pts[j] < pts[i]):
                keep[i] = False
                break
    unique = np.unique(pts[keep], axis=0)
    return unique


@dataclass(frozen=True)
class Front:
    """Mutually non-dominated point set in minimization orientation."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or len(pts) == 0:
            raise MetricError("front must be a non-empty 2-D point set")
        if pts.shape[1] not in (2, 3):
            raise MetricError("fronts are 2- or 3-dimensional")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def from_points(cls, points: np.ndarray) -> "Front":
        """Build a front by filtering dominated and duplicate points."""
        return cls(pareto_filter(points))


@dataclass(frozen=True)
class ReferenceFront:
    """Aggregated non-dominated set across runs, with per-objective extremes.

    extreme_low[j] / extreme_high[j] are the members attaining the minimum /
    maximum of objective j (first such member under stable ordering).
    """

    points: np.ndarray
    extreme_low: np.ndarray
    extreme_high: np.ndarray

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _as_points(front) -> np.ndarray:
    if isinstance(front, Front):
        return front.points
    pts = np.asarray(front, dtype=float)
    if pts.ndim != 2 or len(pts) == 0:
        raise MetricError("expected a non-empty 2-D point set")
    return pts


def _hv2d(pts: np.ndarray, ref: np.ndarray) -> float:
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    hv = 0.0
    y_prev = ref[1]
    for i in order:
        x, y = pts[i]
        if y < y_prev:
            hv += (ref[0] - x) * (y_prev - y)
            y_prev = y
    return hv


def hypervolume(front, reference_point) -> float:
    """Lebesgue measure of the region dominated by the front, up to ref.

    The reference point must be weakly dominated by every front point
    (component-wise >=); violations raise ContractError.
    """
    pts = _as_points(front)
    ref = np.asarray(reference_point, dtype=float)
    if ref.shape != (pts.shape[1],):
        raise ContractError("reference point dimension mismatch")
    if not np.all(pts <= ref + 1e-12):
        raise ContractError("reference point must be weakly dominated by all points")
    if pts.shape[1] == 2:
        return _hv2d(pts, ref)
    if pts.shape[1] != 3:
        raise ContractError("hypervolume supports 2 or 3 objectives")
    # Slice along the third objective: between consecutive z-levels the
    # dominated area is the 2-D hypervolume of the points at or below z.
    zs = np.unique(pts[:, 2])
    hv = 0.0
    for i, z in enumerate(zs):
        z_next = zs[i + 1] if i + 1 < len(zs) else ref[2]
        active = pts[pts[:, 2] <= z][:, :2]
        hv += _hv2d(active, ref[:2]) * (z_next - z)
    return hv


def spread(front, reference_front: ReferenceFront) -> float:
    """Diversity metric over consecutive gaps plus boundary distances.

    Points are ordered by the first objective (ties by the second); the
    boundary terms measure distance to the reference front's extremes along
    the first objective. Lower is better; 0 means perfectly even spacing
    with boundaries on the reference extremes.
    """
    pts = _as_points(front)
    if len(pts) < 2:
        raise MetricError("spread needs at least 2 front points")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    d_mean = gaps.mean()
    d_f = float(np.linalg.norm(pts[0] - reference_front.extreme_low[0]))
    d_l = float(np.linalg.norm(pts[-1] - reference_front.extreme_high[0]))
    denom = d_f + d_l + (len(pts) - 1) * d_mean
    if denom == 0:
        return 0.0
    return float((d_f + d_l + np.abs(gaps - d_mean).sum()) / denom)


def igd(front, reference_front: ReferenceFront, form: str = "printed") -> float:
    """Inverted generational distance from the reference front to the front.

    form="printed" places the square root over the whole sum of squared
    nearest distances before dividing by the reference size; form="mean"
    is the conventional average of nearest distances.
    """
    pts = _as_points(front)
    ref = reference_front.points
    if len(ref) == 0:
        raise MetricError("reference front is empty")
    d = np.sqrt(((ref[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)).min(axis=1)
    if form == "printed":
        return float(np.sqrt((d ** 2).sum()) / len(ref))
    if form == "mean":
        return float(d.mean())
    raise ContractError(f"unknown igd form {form!r}")


def aggregate_reference_front(fronts) -> ReferenceFront:
    """Union of run fronts, filtered to the non-dominated set, with extremes."""
    all_pts = [_as_points(f) for f in fronts]
    if not all_pts:
        raise MetricError("need at least one front to aggregate")
    merged = pareto_filter(np.vstack(all_pts))
    dim = merged.shape[1]
    extreme_low = np.stack([merged[np.argmin(merged[:, j])] for j in range(dim)])
    extreme_high = np.stack([merged[np.argmax(merged[:, j])] for j in range(dim)])
    return ReferenceFront(merged, extreme_low, extreme_high)


def reference_point_for(fronts, offset_frac: float = 0.01) -> np.ndarray:
    """Worst value per objective across fronts, shifted by 1% of its range.

    The shift guarantees the point is strictly dominated by every front
    member even at the observed worst.
    """
    pts = np.vstack([_as_points(f) for f in fronts])
    worst = pts.max(axis=0)
    best = pts.min(axis=0)
    span = np.where(worst > best, worst - best, 1.0)
    return worst + offset_frac * span


def normalize_hypervolume(series, best_known: float) -> np.ndarray:
    """Divide a hypervolume series by the best known value, clamped to [0, 1]."""
    if best_known <= 0:
        raise ContractError("best_known must be positive")
    return np.clip(np.asarray(series, dtype=float) / best_known, 0.0, 1.0)


def kruskal_wallis(*groups) -> tuple[float, float]:
    """Rank-based H test with tie correction; p from the chi-square law.

    Raises DegenerateDataError when every observation is identical and
    ContractError for fewer than two groups or empty groups.
    """
    if len(groups) < 2:
        raise ContractError("kruskal_wallis needs at least two groups")
    arrays = [np.asarray(g, dtype=float) for g in groups]
    if any(len(a) == 0 for a in arrays):
        raise ContractError("groups must be non-empty")
    if sum(len(a) for a in arrays) < 3:
        raise ContractError("need at least 3 observations in total")
    stacked = np.concatenate(arrays)
    if np.all(stacked == stacked[0]):
        raise DegenerateDataError("all observations are identical")
    h, p = stats.kruskal(*arrays)
    return float(h), float(p)
