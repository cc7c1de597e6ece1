"""DTLZ2, DTLZ4 and WFG4-WFG9 test problems (minimization).

``evaluate`` accepts a single decision vector ``(D,)`` or a batch ``(B, D)``
and returns objectives of shape ``(m,)`` or ``(B, m)``.

WFG problems use ``k = 2 (m - 1)`` position variables and ``l = D - k``
distance variables, variable ``i`` (1-based) ranging over ``[0, 2 i]``.
"""

from __future__ import annotations

import numpy as np

PROBLEMS = ("DTLZ2", "DTLZ4", "WFG4", "WFG5", "WFG6", "WFG7", "WFG8", "WFG9")

_HALF_PI = 0.5 * np.pi


class OutOfBoundsError(ValueError):
    pass


class Problem:
    name: str = ""

    def __init__(self, m: int, D: int):
        if m < 2:
            raise ValueError("need at least two objectives")
        self.m = int(m)
        self.D = int(D)
        self.lower = np.zeros(self.D)
        self.upper = np.ones(self.D)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        xb = np.atleast_2d(x)
        if xb.shape[1] != self.D:
            raise ValueError(f"{self.name} expects {self.D} variables, got {xb.shape[1]}")
        if np.any(xb < self.lower) or np.any(xb > self.upper):
            raise OutOfBoundsError(f"{self.name}: decision vector outside bounds")
        f = self._evaluate(xb)
        return f[0] if single else f

    __call__ = evaluate

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def front_scale(self) -> np.ndarray:
        """Per-objective extent of the Pareto front (front points are ``scale * u``, ``|u| = 1``)."""
        return np.ones(self.m)

    def __repr__(self) -> str:
        return f"{self.name}(m={self.m}, D={self.D})"


# -- DTLZ ------------------------------------------------------------------------


def _sphere(theta: np.ndarray, radius) -> np.ndarray:
    """Map ``m-1`` angles in [0, 1] onto the positive orthant of a sphere.

    ``f_j = Π_{i < m-1-j} cos(θ_i)``, times ``sin(θ_{m-1-j})`` for ``j > 0``.
    """
    b, k = theta.shape
    ang = theta * _HALF_PI
    cum = np.ones((b, k + 1))
    np.cumprod(np.cos(ang), axis=1, out=cum[:, 1:])
    idx = np.arange(k, -1, -1)
    f = cum[:, idx]
    f[:, 1:] *= np.sin(ang[:, idx[1:]])
    return f * np.reshape(radius, (-1, 1))


class DTLZ2(Problem):
    name = "DTLZ2"
    position_power = 1.0

    def __init__(self, m: int = 3, D: int = 12):
        super().__init__(m, D)
        if D < m:
            raise ValueError(f"DTLZ needs D >= m, got D={D}, m={m}")

    def _evaluate(self, x):
        pos = x[:, : self.m - 1] ** self.position_power
        g = np.sum((x[:, self.m - 1 :] - 0.5) ** 2, axis=1)
        return _sphere(pos, 1.0 + g)


class DTLZ4(DTLZ2):
    name = "DTLZ4"
    position_power = 100.0


# -- WFG transformations --------------------------------------------------------------

def _correct(y: np.ndarray) -> np.ndarray:
    """Clamp tiny excursions outside [0, 1] from rounding."""
    return np.clip(y, 0.0, 1.0)


def s_linear(y, A):
    return _correct(np.abs(y - A) / np.abs(np.floor(A - y) + A))


def s_decept(y, A, B, C):
    t1 = np.floor(y - A + B) * (1.0 - C + (A - B) / B) / (A - B)
    t2 = np.floor(A + B - y) * (1.0 - C + (1.0 - A - B) / B) / (1.0 - A - B)
    return _correct(1.0 + (np.abs(y - A) - B) * (t1 + t2 + 1.0 / B))


def s_multi(y, A, B, C):
    t = np.abs(y - C) / (2.0 * (np.floor(C - y) + C))
    out = (1.0 + np.cos((4.0 * A + 2.0) * np.pi * (0.5 - t)) + 4.0 * B * t * t) / (B + 2.0)
    return _correct(out)


def b_param(y, u, A, B, C):
    v = A - (1.0 - 2.0 * u) * np.abs(np.floor(0.5 - u) + A)
    return _correct(y ** (B + (C - B) * v))


def r_sum(y, w=None):
    if w is None:
        return np.mean(y, axis=1)
    return (y @ w) / np.sum(w)


def r_nonsep(y, A: int):
    n = y.shape[1]
    total = np.zeros(y.shape[0])
    for j in range(n):
        total += y[:, j]
        for k in range(A - 1):
            total += np.abs(y[:, j] - y[:, (1 + j + k) % n])
    denom = (n / A) * np.ceil(A / 2.0) * (1.0 + 2.0 * A - 2.0 * np.ceil(A / 2.0))
    return _correct(total / denom)


def concave(x: np.ndarray) -> np.ndarray:
    """Concave WFG shape functions for ``M-1`` position parameters.

    Same sphere as DTLZ with sin and cos swapped: ``h_1 = Π sin``, ``h_M = cos(x_1)``.
    """
    return _sphere(1.0 - x, 1.0)


class WFG(Problem):
    """Shared WFG frame: normalize, transform, reduce to ``m`` parameters, shape."""

    def __init__(self, m: int = 3, D: int = 12, k: int | None = None):
        super().__init__(m, D)
        self.k = 2 * (m - 1) if k is None else int(k)
        self.l = self.D - self.k
        if self.k % (m - 1) or self.k < m - 1:
            raise ValueError(f"position count k={self.k} must be a positive multiple of m-1={m - 1}")
        if self.l < 1:
            raise ValueError(f"D={D} leaves no distance variables (k={self.k})")
        self.upper = 2.0 * np.arange(1, self.D + 1)
        self.scales = 2.0 * np.arange(1, self.m + 1)

    def front_scale(self) -> np.ndarray:
        return self.scales.copy()

    def _transform(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _reduce_sum(self, y):
        gap = self.k // (self.m - 1)
        t = [r_sum(y[:, i * gap : (i + 1) * gap]) for i in range(self.m - 1)]
        t.append(r_sum(y[:, self.k :]))
        return np.column_stack(t)

    def _reduce_nonsep(self, y):
        gap = self.k // (self.m - 1)
        t = [r_nonsep(y[:, i * gap : (i + 1) * gap], gap) for i in range(self.m - 1)]
        t.append(r_nonsep(y[:, self.k :], self.l))
        return np.column_stack(t)

    def _evaluate(self, x):
        y = x / self.upper
        t = self._transform(y)
        # degeneracy constants A_i = 1 for WFG4-9
        pos = np.maximum(t[:, -1:], 1.0) * (t[:, :-1] - 0.5) + 0.5
        h = concave(pos)
        return t[:, -1:] + self.scales * h


def _b_param_from_tail(y, stop):
    """``y_i <- b_param(y_i, mean(y_{i+1:}))`` for ``i < stop``, using the untransformed tail."""
    out = y.copy()
    for i in range(stop):
        u = np.mean(y[:, i + 1 :], axis=1)
        out[:, i] = b_param(y[:, i], u, 0.98 / 49.98, 0.02, 50.0)
    return out


class WFG4(WFG):
    name = "WFG4"

    def _transform(self, y):
        return self._reduce_sum(s_multi(y, 30.0, 10.0, 0.35))


class WFG5(WFG):
    name = "WFG5"

    def _transform(self, y):
        return self._reduce_sum(s_decept(y, 0.35, 0.001, 0.05))


class WFG6(WFG):
    name = "WFG6"

    def _transform(self, y):
        y = y.copy()
        y[:, self.k :] = s_linear(y[:, self.k :], 0.35)
        return self._reduce_nonsep(y)


class WFG7(WFG):
    name = "WFG7"

    def _transform(self, y):
        y = _b_param_from_tail(y, self.k)
        y[:, self.k :] = s_linear(y[:, self.k :], 0.35)
        return self._reduce_sum(y)


class WFG8(WFG):
    name = "WFG8"

    def _transform(self, y):
        out = y.copy()
        for i in range(self.k, self.D):
            u = np.mean(y[:, :i], axis=1)
            out[:, i] = b_param(y[:, i], u, 0.98 / 49.98, 0.02, 50.0)
        out[:, self.k :] = s_linear(out[:, self.k :], 0.35)
        return self._reduce_sum(out)


class WFG9(WFG):
    name = "WFG9"

    def _transform(self, y):
        y = _b_param_from_tail(y, self.D - 1)
        y[:, : self.k] = s_decept(y[:, : self.k], 0.35, 0.001, 0.05)
        y[:, self.k :] = s_multi(y[:, self.k :], 30.0, 95.0, 0.35)
        return self._reduce_nonsep(y)


_REGISTRY = {cls.name: cls for cls in (DTLZ2, DTLZ4, WFG4, WFG5, WFG6, WFG7, WFG8, WFG9)}


def make_problem(name: str, m: int = 3, D: int = 6) -> Problem:
    key = name.upper()
    if key not in _REGISTRY:
        raise ValueError(f"unknown problem {name!r}; choose from {PROBLEMS}")
    return _REGISTRY[key](m=m, D=D)
