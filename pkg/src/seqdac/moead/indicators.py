"""Quality indicators and dominance utilities for objective-space point sets."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist


def _as_points(points, name: str) -> np.ndarray:
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if p.size == 0 or p.shape[0] == 0:
        raise ValueError(f"{name} must be non-empty")
    return p


def dominates(a: np.ndarray, b: np.ndarray) -> bool:
    """True when ``a`` Pareto-dominates ``b`` (minimization)."""
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated_mask(F: np.ndarray) -> np.ndarray:
    """Mask of points not dominated by any other point. Duplicates are all kept."""
    F = np.asarray(F, dtype=np.float64)
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    dominated_by = le & lt  # [i, j]: i dominates j
    return ~np.any(dominated_by, axis=0)


def igd(approx, reference) -> float:
    """Mean distance from each reference point to its nearest approximation point."""
    A = _as_points(approx, "approximation set")
    R = _as_points(reference, "reference set")
    if A.shape[1] != R.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {R.shape[1]}")
    return float(np.mean(cdist(R, A).min(axis=1)))


def _hv2d(P: np.ndarray, ref: np.ndarray) -> float:
    """Exact 2-D hypervolume of points already strictly inside the reference box."""
    order = np.lexsort((P[:, 1], P[:, 0]))
    x = P[order, 0]
    y = np.minimum.accumulate(P[order, 1])
    widths = np.diff(np.append(x, ref[0]))
    return float(np.dot(widths, ref[1] - y))


def hypervolume(points, reference_point) -> float:
    """Exact dominated volume for ``m <= 3``.

    Points that do not strictly dominate the reference point contribute nothing.
    Three objectives are handled by sweeping slabs along the last axis.
    """
    ref = np.asarray(reference_point, dtype=np.float64)
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    m = ref.shape[0]
    if m > 3:
        raise NotImplementedError("hypervolume is only implemented for m <= 3")
    if P.shape[0] == 0:
        return 0.0
    if P.shape[1] != m:
        raise ValueError(f"dimension mismatch: {P.shape[1]} vs {m}")
    P = P[np.all(P < ref, axis=1)]
    if P.shape[0] == 0:
        return 0.0
    if m == 1:
        return float(ref[0] - P[:, 0].min())
    P = P[nondominated_mask(P)]
    if m == 2:
        return float(_hv2d(P, ref))
    P = P[np.argsort(P[:, 2], kind="stable")]
    volume = 0.0
    for i in range(P.shape[0]):
        top = P[i + 1, 2] if i + 1 < P.shape[0] else ref[2]
        depth = top - P[i, 2]
        if depth > 0.0:
            volume += depth * _hv2d(P[: i + 1, :2], ref[:2])
    return float(volume)


def vicinity_sparsity(point, others, m: int | None = None) -> float:
    """Product of distances from ``point`` to its ``m`` nearest members of ``others``.

    ``others`` must not contain ``point`` itself (pass the population minus
    the point); ``m`` defaults to the objective count.
    """
    p = np.asarray(point, dtype=np.float64)
    O = np.atleast_2d(np.asarray(others, dtype=np.float64))
    m = p.shape[0] if m is None else int(m)
    if O.shape[0] < m:
        raise ValueError(f"need at least {m} other points, got {O.shape[0]}")
    d = np.sqrt(np.sum((O - p) ** 2, axis=1))
    return float(np.prod(np.partition(d, m - 1)[:m]))


def sparsity_levels(F: np.ndarray, m: int | None = None) -> np.ndarray:
    """Sparsity level of every point with respect to the rest of ``F`` (self excluded)."""
    F = np.asarray(F, dtype=np.float64)
    n = F.shape[0]
    m = F.shape[1] if m is None else int(m)
    if n <= m:
        raise ValueError(f"need more than {m} points, got {n}")
    d = cdist(F, F)
    np.fill_diagonal(d, np.inf)
    return np.prod(np.partition(d, m - 1, axis=1)[:, :m], axis=1)


def sparsity_to(candidates: np.ndarray, F: np.ndarray, m: int | None = None) -> np.ndarray:
    """Sparsity level of each candidate with respect to the set ``F``."""
    F = np.asarray(F, dtype=np.float64)
    m = F.shape[1] if m is None else int(m)
    if F.shape[0] < m:
        raise ValueError(f"need at least {m} points, got {F.shape[0]}")
    d = cdist(np.atleast_2d(candidates), F)
    return np.prod(np.partition(d, m - 1, axis=1)[:, :m], axis=1)


def mean_nearest_distance(F: np.ndarray) -> float:
    """Mean over points of the distance to the nearest other point."""
    F = np.asarray(F, dtype=np.float64)
    if F.shape[0] < 2:
        return 0.0
    d = cdist(F, F)
    np.fill_diagonal(d, np.inf)
    return float(np.mean(d.min(axis=1)))
