"""Upper bounds on Bell violation in terms of the GHZ overlap, and threshold scans."""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

from .bell import SQRT2, b3_squared, u3_from_delta
from .qlinalg import ContractViolation


class OverlapBound(NamedTuple):
    n_qubits: int
    r: float
    beta_max: float
    eta: float
    b0: float
    b_rest: float
    lambda_rest: float


class ThresholdResult(NamedTuple):
    value: float
    tol: float
    lo: float
    hi: float
    evaluations: int


class UffinkOptimum(NamedTuple):
    value: float
    delta: np.ndarray
    gamma: float
    u0: float
    u_bar: float


def beta_of_r(n_qubits: int, r: float) -> OverlapBound:
    """Largest WWZB violation compatible with GHZ overlap ``r``.

    The optimum spreads ``1 - r`` evenly over the other ``2^(N-1) - 1``
    pairs; with ``tan(eta) = ((1 - r)/sqrt(m))/r`` the optimal spectrum is
    ``b_0 = 2^((N-1)/2) cos(eta)`` and ``b_k = 2^((N-1)/2) sin(eta)/sqrt(m)``.
    """
    if n_qubits < 2:
        raise ContractViolation("need at least two qubits")
    if not 0 <= r <= 1:
        raise ContractViolation("r must lie in [0, 1]")
    m = 2 ** (n_qubits - 1) - 1
    scale = 2 ** ((n_qubits - 1) / 2)
    beta = scale * math.sqrt(r**2 + (1 - r) ** 2 / m)
    eta = math.atan2((1 - r) / math.sqrt(m), r)
    b0 = scale * math.cos(eta)
    b_rest = math.sqrt(max(2 ** (n_qubits - 1) - b0**2, 0.0) / m)
    return OverlapBound(n_qubits, r, beta, eta, b0, b_rest, (1 - r) / m)


def overlap_requirement(n_qubits: int, p: int) -> float | None:
    """Smallest ``r`` with ``beta_of_r(N, r) = 2^((N-p)/2)``; ``None`` if unconstrained."""
    if not 2 <= p <= n_qubits:
        raise ContractViolation("need 2 <= p <= N")
    m = 2 ** (n_qubits - 1) - 1
    a, b, c = 1 + 1 / m, -2 / m, 1 / m - 2.0 ** (1 - p)
    disc = b * b - 4 * a * c
    if disc < 0:
        if disc > -1e-14:
            disc = 0.0
        else:
            return None
    r = (-b + math.sqrt(disc)) / (2 * a)
    if r < 0 or r > 1:
        return None
    return r


def threshold_scan(predicate: Callable[[float], bool], lo: float, hi: float, tol: float = 1e-4) -> ThresholdResult:
    """Bisection for the switching point of a monotone predicate (false at ``lo``, true at ``hi``)."""
    if tol <= 0 or hi <= lo:
        raise ContractViolation("need lo < hi and tol > 0")
    evals = 2
    if predicate(lo) or not predicate(hi):
        raise ContractViolation(f"predicate does not bracket a threshold on [{lo}, {hi}]")
    a, b = lo, hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        evals += 1
        if predicate(mid):
            b = mid
        else:
            a = mid
    return ThresholdResult(0.5 * (a + b), tol, a, b, evals)


# --- three-qubit Uffink bound ---------------------------------------------


def _pareto_hull(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Indices of the points that maximize ``r x + (1 - r) y`` for some ``r`` in [0, 1]."""
    order = np.argsort(-x, kind="stable")
    ys = y[order]
    previous = np.concatenate([[-np.inf], np.maximum.accumulate(ys)[:-1]])
    front = order[ys > previous]
    # front has x decreasing, y increasing; keep the concave chain
    hull: list[int] = []
    for i in front:
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross <= 0:  # a lies on or inside the chord o-i
                hull.pop()
            else:
                break
        hull.append(i)
    return np.array(hull, dtype=int)


def _u0_ubar(u2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u2 = np.maximum(u2, 0.0)
    top = u2.max(axis=-1)
    return np.sqrt(top), np.sqrt(np.maximum(u2.sum(axis=-1) - top, 0.0) / 3)


@lru_cache(maxsize=4)
def _uffink_candidates(grid: int, widen: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Grid points of ``(u0, u_bar)`` that can be optimal for some ``r``.

    Box: ``delta in [0, pi/2]^3``, ``gamma in [0, pi)``.  ``delta_i -> -delta_i``
    only permutes the labels ``k`` (the multiset ``{b_k}`` and ``prod cos`` are
    unchanged), and ``delta_i -> pi - delta_i`` flips the sign of ``prod cos``,
    which ``gamma -> -gamma`` undoes; ``gamma`` has period ``pi``.  Permuting
    the qubits permutes ``{b_k}`` as well, so only ``delta_1 <= delta_2 <=
    delta_3`` is scanned.  ``widen`` doubles the delta box to ``[0, pi]^3`` as
    a check of that reduction.
    """
    top = np.pi if widen else np.pi / 2
    axis = np.linspace(0.0, top, grid)
    d = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    d = d[(d[:, 0] <= d[:, 1]) & (d[:, 1] <= d[:, 2])]
    b2 = b3_squared(d)
    c = np.prod(np.cos(d), axis=1)
    keep_u0, keep_ub, keep_par = [], [], []
    for g in np.linspace(0.0, np.pi, grid, endpoint=False):
        u0, ub = _u0_ubar(b2 + np.sin(2 * g) * c[:, None])
        idx = _pareto_hull(u0, ub)
        keep_u0.append(u0[idx])
        keep_ub.append(ub[idx])
        keep_par.append(np.column_stack([d[idx], np.full(len(idx), g)]))
    u0, ub, par = np.concatenate(keep_u0), np.concatenate(keep_ub), np.concatenate(keep_par)
    idx = _pareto_hull(u0, ub)
    return u0[idx], ub[idx], par[idx]


def _uffink_objective(r: float, params: np.ndarray) -> tuple[float, float, float]:
    u2 = u3_from_delta(params[:3], params[3]) ** 2
    u0, ub = _u0_ubar(u2)
    return float(r * u0 + (1 - r) * ub), float(u0), float(ub)


def _compass_refine(r: float, start: np.ndarray, step: float, tol: float, top: float, max_evals: int = 4000) -> np.ndarray:
    """Pattern search: try +-step on each coordinate, halve the step when stuck.

    ``max_evals`` stops slow crawls along flat ridges (e.g. at the onset
    ``r = 5/8``, where the objective is quartic around ``delta = 0``).
    """
    x = start.copy()
    fx = _uffink_objective(r, x)[0]
    evals = 0
    while step >= tol and evals < max_evals:
        evals += 8
        improved = False
        for i in range(4):
            for sgn in (1, -1):
                y = x.copy()
                y[i] += sgn * step
                if i < 3:
                    y[i] = min(max(y[i], 0.0), top)
                fy = _uffink_objective(r, y)[0]
                if fy > fx + 1e-15:
                    x, fx, improved = y, fy, True
        if not improved:
            step /= 2
    return x


def uffink_overlap_optimum(r: float, grid: int = 64, refine_tol: float = 1e-6, widen: bool = False) -> UffinkOptimum:
    """Maximizer of ``u0 r + u_bar (1 - r)`` over three-qubit planar Uffink operators."""
    if not 0 <= r <= 1:
        raise ContractViolation("r must lie in [0, 1]")
    u0, ub, par = _uffink_candidates(grid, widen)
    scores = r * u0 + (1 - r) * ub
    top = np.pi if widen else np.pi / 2
    step = top / (grid - 1)
    best = None
    for i in np.argsort(-scores, kind="stable")[:3]:
        x = _compass_refine(r, par[i], step, refine_tol, top)
        val, a, b = _uffink_objective(r, x)
        if best is None or val > best.value:
            best = UffinkOptimum(val, x[:3], float(np.mod(x[3], np.pi)), a, b)
    return best


def beta_gamma_of_r(r: float, grid: int = 64, refine_tol: float = 1e-6, widen: bool = False) -> float:
    """Largest three-qubit Uffink value (unnormalized, LV bound sqrt(2)) at GHZ overlap ``r``."""
    return uffink_overlap_optimum(r, grid, refine_tol, widen).value


UFFINK_LV = SQRT2
