"""MOEA/D with Tchebycheff decomposition, DE reproduction and AWA weight adaptation.

One call to :func:`moead_generation` produces one offspring per subproblem,
evaluates it once, updates the ideal point, replaces neighbours whose
scalarized value strictly improves, and offers the offspring to a bounded
elite archive of non-dominated solutions.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .indicators import sparsity_levels, sparsity_to
from .problems import Problem

log = logging.getLogger(__name__)

NEIGHBORHOOD_SIZES = (15, 20, 25, 30)
OPERATORS = (1, 2, 3, 4)
SCALING_FACTORS = (0.4, 0.5, 0.6, 0.7)
WEIGHT_ADAPTATION = (False, True)
PARENT_COUNT = {1: 2, 2: 4, 3: 5, 4: 3}


class NonFiniteObjectiveError(RuntimeError):
    """A problem evaluation returned NaN or infinity."""


@dataclass(frozen=True)
class ActionTuple:
    neighborhood_size: int = 20
    operator: int = 1
    F: float = 0.5
    adapt_weights: bool = False

    def __post_init__(self):
        if self.operator not in OPERATORS:
            raise ValueError(f"operator must be one of {OPERATORS}, got {self.operator}")
        if self.neighborhood_size < 1:
            raise ValueError("neighborhood size must be positive")


DEFAULT_ACTION = ActionTuple()


# -- scalarization and reproduction ---------------------------------------------------


def tch(f, w, z_star) -> float:
    """Tchebycheff value ``max_i w_i |f_i - z*_i|``."""
    f = np.asarray(f, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    z = np.asarray(z_star, dtype=np.float64)
    if not f.shape == w.shape == z.shape:
        raise ValueError(f"shape mismatch: f{f.shape}, w{w.shape}, z{z.shape}")
    return float(np.max(w * np.abs(f - z)))


def tch_batch(F: np.ndarray, W: np.ndarray, z_star: np.ndarray) -> np.ndarray:
    return np.max(W * np.abs(F - z_star), axis=-1)


def de_mutant(op: int, xi: np.ndarray, parents: np.ndarray, F: float, K: float = 0.5) -> np.ndarray:
    """DE mutant for operator ``op`` from ``x_i`` and parent rows ``r1, r2, ...``."""
    r = parents
    if op == 1:
        return xi + F * (r[0] - r[1])
    if op == 2:
        return xi + F * (r[0] - r[1]) + F * (r[2] - r[3])
    if op == 3:
        return xi + K * (xi - r[0]) + F * (r[1] - r[2]) + F * (r[3] - r[4])
    if op == 4:
        return xi + K * (xi - r[0]) + F * (r[1] - r[2])
    raise ValueError(f"unknown operator {op}")


def repair(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    return np.clip(x, lower, upper)


def polynomial_mutation(
    x: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    rng: np.random.Generator,
    eta: float = 20.0,
    prob: float | None = None,
) -> np.ndarray:
    """Bounded polynomial mutation, each variable mutated with probability ``prob`` (default 1/D)."""
    D = x.shape[0]
    prob = 1.0 / D if prob is None else prob
    y = x.copy()
    power = 1.0 / (eta + 1.0)
    for j in np.flatnonzero(rng.random(D) < prob):
        xl, xu, v = float(lower[j]), float(upper[j]), float(y[j])
        span = xu - xl
        u = rng.random()
        if u < 0.5:
            val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - (v - xl) / span) ** (eta + 1.0)
            dq = val**power - 1.0
        else:
            val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - (xu - v) / span) ** (eta + 1.0)
            dq = 1.0 - val**power
        y[j] = min(max(v + dq * span, xl), xu)
    return y


# -- weights and neighbourhoods -----------------------------------------------------------


def simplex_lattice(m: int, H: int) -> np.ndarray:
    """All weight vectors with entries in ``{0, 1/H, ..., 1}`` summing to one."""
    rows = []
    for bars in itertools.combinations(range(H + m - 1), m - 1):
        edges = (-1,) + bars + (H + m - 1,)
        rows.append([edges[j + 1] - edges[j] - 1 for j in range(m)])
    return np.asarray(rows, dtype=np.float64) / H


def lattice_size(m: int, H: int) -> int:
    return math.comb(H + m - 1, m - 1)


def uniform_weights(N: int, m: int) -> np.ndarray:
    """``N`` simplex weights: the smallest lattice with at least ``N`` points, evenly subsampled."""
    H = 1
    while lattice_size(m, H) < N:
        H += 1
    W = simplex_lattice(m, H)
    idx = np.round(np.linspace(0, len(W) - 1, N)).astype(np.int64)
    return W[idx]


def neighborhoods(W: np.ndarray, size: int) -> np.ndarray:
    """Indices of the ``size`` nearest weight vectors (self included) for every subproblem."""
    size = min(int(size), W.shape[0])
    d = np.sum((W[:, None, :] - W[None, :, :]) ** 2, axis=2)
    return np.argsort(d, axis=1, kind="stable")[:, :size]


def weight_from_objectives(f: np.ndarray, z_star: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Weight whose Tchebycheff contour passes through ``f``: ``w_j ∝ 1 / (f_j - z*_j + eps)``."""
    w = 1.0 / (np.maximum(f - z_star, 0.0) + eps)
    return w / w.sum()


# -- elite archive --------------------------------------------------------------------------


class EliteArchive:
    """Bounded set of mutually non-dominated solutions.

    Candidates weakly dominated by a member (including exact duplicates) are
    rejected. When an insertion overflows the capacity, the member with the
    lowest sparsity level is evicted.

    Members live in ``capacity + 1`` fixed slots. A pairwise distance matrix
    and per-member sparsity are maintained incrementally; only rows whose
    ``m`` nearest neighbours change are recomputed.
    """

    def __init__(self, capacity: int, D: int, m: int):
        self.capacity = int(capacity)
        self.m = int(m)
        n = self.capacity + 1
        self._X = np.zeros((n, D))
        self._F = np.full((n, m), np.inf)
        self._active = np.zeros(n, dtype=bool)
        self._dist = np.full((n, n), np.inf)
        self._sl = np.full(n, np.inf)
        self._kth = np.full(n, np.inf)  # distance to the m-th nearest member
        self._size = 0

    def __len__(self) -> int:
        return self._size

    @property
    def X(self) -> np.ndarray:
        return self._X[self._active]

    @property
    def F(self) -> np.ndarray:
        return self._F[self._active]

    @property
    def sparsity(self) -> np.ndarray:
        """Sparsity of each member with respect to the other members."""
        return self._sl[self._active]

    def _refresh(self, rows: np.ndarray) -> None:
        if rows.size == 0:
            return
        near = np.partition(self._dist[rows], self.m - 1, axis=1)[:, : self.m]
        self._kth[rows] = near.max(axis=1)
        self._sl[rows] = np.prod(near, axis=1)

    def _remove(self, idx: np.ndarray) -> None:
        self._active[idx] = False
        self._size -= idx.size
        self._F[idx] = np.inf
        self._sl[idx] = np.inf
        self._kth[idx] = np.inf
        hit = self._active & np.any(self._dist[:, idx] <= self._kth[:, None], axis=1)
        self._dist[idx, :] = np.inf
        self._dist[:, idx] = np.inf
        self._refresh(np.flatnonzero(hit))

    def insert(self, x: np.ndarray, f: np.ndarray) -> bool:
        F = self._F
        diff = F - f
        # weakly dominated by a member (inactive slots hold +inf and never match)
        if diff.max(axis=1).min() <= 0.0:
            return False
        dominated = self._active & (diff.min(axis=1) >= 0.0)
        if dominated.any():
            self._remove(np.flatnonzero(dominated))
        slot = int(np.argmin(self._active))
        self._active[slot] = True
        self._size += 1
        self._X[slot] = x
        self._F[slot] = f
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        d[~self._active] = np.inf
        d[slot] = np.inf
        self._dist[slot, :] = d
        self._dist[:, slot] = d
        hit = self._active & (d < self._kth)
        hit[slot] = True
        self._refresh(np.flatnonzero(hit))
        if self._size > self.capacity:
            self._remove(np.array([int(np.argmin(self._sl))]))
        return True


# -- run state ------------------------------------------------------------------------------


@dataclass
class MoeadRun:
    problem: Problem
    X: np.ndarray
    F: np.ndarray
    W: np.ndarray
    B: np.ndarray
    neighborhood_size: int
    z_star: np.ndarray
    archive: EliteArchive
    evaluations: int = 0
    generation: int = 0

    @property
    def N(self) -> int:
        return self.X.shape[0]

    def rebuild_neighborhoods(self, size: int | None = None) -> None:
        if size is not None:
            self.neighborhood_size = int(size)
        self.B = neighborhoods(self.W, self.neighborhood_size)


def evaluate_checked(problem: Problem, x: np.ndarray) -> np.ndarray:
    """Evaluate an already-repaired offspring, rejecting non-finite objectives."""
    f = problem._evaluate(x[None, :])[0]
    if not np.all(np.isfinite(f)):
        raise NonFiniteObjectiveError(f"{problem!r} returned {f} for x={x}")
    return f


def init_run(problem: Problem, N: int, rng: np.random.Generator, neighborhood_size: int = 20) -> MoeadRun:
    """Uniform random population, lattice weights, ideal point from the initial objectives."""
    X = rng.uniform(problem.lower, problem.upper, (N, problem.D))
    F = problem.evaluate(X)
    if not np.all(np.isfinite(F)):
        raise NonFiniteObjectiveError(f"{problem!r} returned non-finite objectives at initialization")
    W = uniform_weights(N, problem.m)
    archive = EliteArchive(int(1.5 * N), problem.D, problem.m)
    for x, f in zip(X, F):
        archive.insert(x, f)
    return MoeadRun(
        problem=problem,
        X=X,
        F=F,
        W=W,
        B=neighborhoods(W, neighborhood_size),
        neighborhood_size=int(neighborhood_size),
        z_star=F.min(axis=0),
        archive=archive,
    )


def select_parents(run: MoeadRun, i: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` distinct parent indices from the neighbourhood of ``i``, excluding ``i``.

    Falls back to the whole population when the neighbourhood is too small.
    """
    pool = run.B[i]
    pool = pool[pool != i]
    if pool.shape[0] < count:
        pool = np.delete(np.arange(run.N), i)
    return rng.permutation(pool)[:count]


def de_offspring(
    op: int, i: int, run: MoeadRun, F: float, rng: np.random.Generator, K: float = 0.5
) -> np.ndarray:
    parents = run.X[select_parents(run, i, PARENT_COUNT[op], rng)]
    p = run.problem
    x = repair(de_mutant(op, run.X[i], parents, F, K), p.lower, p.upper)
    return polynomial_mutation(x, p.lower, p.upper, rng)


def adapt_weights(run: MoeadRun) -> None:
    """Replace the ``floor(0.05 N)`` most crowded subproblems with sparse archive members."""
    N = run.N
    n_swap = int(0.05 * N)
    if n_swap == 0:
        return
    keep = np.arange(N)
    for _ in range(n_swap):
        # recomputed after each removal so crowded clusters are thinned one at a time
        sl = sparsity_levels(run.F[keep])
        keep = np.delete(keep, int(np.argmin(sl)))
    X, F, W = run.X[keep], run.F[keep], run.W[keep]
    for _ in range(n_swap):
        if len(run.archive):
            sl = sparsity_to(run.archive.F, F)
            j = int(np.argmax(sl))
            x_new, f_new = run.archive.X[j], run.archive.F[j]
        else:
            log.warning("elite archive empty; duplicating the sparsest member")
            j = int(np.argmax(sparsity_levels(F)))
            x_new, f_new = X[j], F[j]
        X = np.vstack([X, x_new])
        F = np.vstack([F, f_new])
        W = np.vstack([W, weight_from_objectives(f_new, run.z_star)])
    run.X, run.F, run.W = X, F, W
    run.rebuild_neighborhoods()


def moead_generation(
    run: MoeadRun, action: ActionTuple, rng: np.random.Generator, K: float = 0.5
) -> MoeadRun:
    """Advance ``run`` by one generation (exactly ``N`` evaluations), in place."""
    if action.adapt_weights:
        adapt_weights(run)
    if action.neighborhood_size != run.neighborhood_size:
        run.rebuild_neighborhoods(action.neighborhood_size)
    problem = run.problem
    op = action.operator
    for i in range(run.N):
        x = de_offspring(op, i, run, action.F, rng, K)
        f = evaluate_checked(problem, x)
        run.evaluations += 1
        np.minimum(run.z_star, f, out=run.z_star)
        nb = run.B[i]
        Wn = run.W[nb]
        better = tch_batch(f, Wn, run.z_star) < tch_batch(run.F[nb], Wn, run.z_star)
        if better.any():
            idx = nb[better]
            run.X[idx] = x
            run.F[idx] = f
        run.archive.insert(x, f)
    run.generation += 1
    return run
