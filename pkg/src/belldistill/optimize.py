"""Derivative-free maximization over measurement settings and local unitaries.

All searches are multi-start coordinate ascent: each angle is scanned on a
uniform grid over one period around its current value and the best grid
point is polished with a bounded scalar search.  Coordinate ascent only
converges linearly along curved ridges, so once the sweeps stall the point
is finished with a quasi-Newton (BFGS) run; the better of the two points is
kept.  Starts are drawn from
``numpy.random.default_rng(seed)`` as one ``(restarts, dim)`` block, so a run
with more restarts contains every start of a run with fewer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .bell import (
    CHSH,
    MBK,
    SQRT2,
    SVETLICHNY,
    UFFINK,
    MeasurementSettings,
    m3_planar_expectation,
    mbk_levels_from_sigmas,
    mbk_matrices,
    svetlichny_gamma,
)
from .qlinalg import PAULI_X, PAULI_Y, PAULI_Z, ContractViolation, DensityMatrix, check_dim, kron_all, sigma

TWO_PI = 2 * np.pi
FAMILIES = (MBK, UFFINK, SVETLICHNY, CHSH)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)
SWEEP_GAIN_TOL = 1e-4  # below this sweep gain, hand over to BFGS
POLISH_GTOL = 1e-10


@dataclass(frozen=True)
class OptimizeOptions:
    restarts: int = 16
    grid_points: int = 24
    tol: float = 1e-6
    seed: int = 0
    planar: bool | None = None  # None: planar for three qubits, general otherwise
    max_sweeps: int = 200

    def __post_init__(self):
        if self.restarts < 1:
            raise ContractViolation("restarts must be at least 1")
        if self.tol <= 0:
            raise ContractViolation("tolerance must be positive")
        if self.grid_points < 3:
            raise ContractViolation("need at least three grid points per angle")

    def planar_for(self, n_qubits: int) -> bool:
        return n_qubits == 3 if self.planar is None else self.planar


class OptimizeResult(NamedTuple):
    settings: MeasurementSettings
    gamma: float | None
    beta: float
    family: str
    restart_values: tuple[float, ...]
    evaluations: int


class OverlapResult(NamedTuple):
    unitaries: tuple[np.ndarray, ...]
    r_max: float
    angles: np.ndarray
    restart_values: tuple[float, ...]


def coordinate_ascent(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    grid_points: int,
    tol: float,
    max_sweeps: int = 200,
    slicer: Callable[[np.ndarray, int], Callable[[float], float]] | None = None,
    polish: bool = True,
) -> tuple[np.ndarray, float]:
    """Maximize ``f`` over periodic angles, one coordinate at a time.

    ``slicer(x, i)`` may return a cheap restriction ``t -> f(x with x_i = t)``;
    by default ``f`` itself is re-evaluated.  The current value is always one
    of the grid points, so no coordinate update can lower the objective.
    With ``polish`` the result is refined by BFGS and only kept if better.
    """
    x = np.array(x0, dtype=float)
    fx = f(x)
    h = TWO_PI / grid_points
    offsets = h * np.arange(grid_points)
    for _ in range(max_sweeps):
        start = fx
        for i in range(len(x)):
            if slicer is not None:
                g = slicer(x, i)
            else:
                trial = x.copy()

                def g(t, trial=trial, i=i):
                    trial[i] = t
                    return f(trial)

            base = x[i]
            vals = [g(base + o) for o in offsets]
            j = int(np.argmax(vals))
            center, best = base + offsets[j], vals[j]
            res = minimize_scalar(lambda t: -g(t), bounds=(center - h, center + h), method="bounded", options={"xatol": tol})
            if -res.fun > best:
                center = float(res.x)
            x[i] = np.mod(center, TWO_PI)
        fx = f(x)
        if fx - start <= SWEEP_GAIN_TOL:
            break
    if polish:
        res = minimize(lambda y: -f(y), x, method="BFGS", options={"gtol": POLISH_GTOL, "maxiter": 1000})
        if -res.fun > fx:
            x, fx = np.mod(res.x, TWO_PI), f(np.mod(res.x, TWO_PI))
    return x, fx


# --- settings parametrization -------------------------------------------


def _vectors(x: np.ndarray, n_qubits: int, planar: bool) -> tuple[np.ndarray, np.ndarray]:
    if planar:
        a, ap = x[:n_qubits], x[n_qubits:]
        z = np.zeros(n_qubits)
        return np.stack([np.cos(a), np.sin(a), z], axis=1), np.stack([np.cos(ap), np.sin(ap), z], axis=1)
    t = x.reshape(2, n_qubits, 2)

    def vec(th, ph):
        return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=1)

    return vec(t[0, :, 0], t[0, :, 1]), vec(t[1, :, 0], t[1, :, 1])


def _qubit_vectors(x: np.ndarray, q: int, n_qubits: int, planar: bool) -> np.ndarray:
    """Stacked ``(n_q, n'_q)`` of one qubit, as a 6-vector."""
    if planar:
        a, ap = x[q], x[n_qubits + q]
        return np.array([np.cos(a), np.sin(a), 0.0, np.cos(ap), np.sin(ap), 0.0])
    th, ph, thp, php = x[2 * q], x[2 * q + 1], x[2 * (n_qubits + q)], x[2 * (n_qubits + q) + 1]
    return np.array(
        [
            np.sin(th) * np.cos(ph),
            np.sin(th) * np.sin(ph),
            np.cos(th),
            np.sin(thp) * np.cos(php),
            np.sin(thp) * np.sin(php),
            np.cos(thp),
        ]
    )


def settings_from_params(x: np.ndarray, n_qubits: int, planar: bool) -> MeasurementSettings:
    if planar:
        return MeasurementSettings.from_angles(x[:n_qubits], x[n_qubits:])
    t = x.reshape(2, n_qubits, 2)
    return MeasurementSettings.from_spherical(t[0, :, 0], t[0, :, 1], t[1, :, 0], t[1, :, 1])


def _owner(i: int, n_qubits: int, planar: bool) -> int:
    """Qubit (0-based) whose setting the parameter ``i`` moves."""
    return i % n_qubits if planar else (i % (2 * n_qubits)) // 2


def _trace(rho_m: np.ndarray, op: np.ndarray) -> float:
    return float(np.real(np.sum(rho_m.T * op)))


class _BellProblem:
    """Objective for one family, plus per-qubit linear restrictions.

    ``tr(rho M_N)`` and ``tr(rho M'_N)`` are linear in the pair
    ``(n_q, n'_q)`` of any single qubit, so a line search over one angle
    only needs a 2x6 coefficient matrix.
    """

    def __init__(self, rho_m: np.ndarray, n: int, family: str, planar: bool, gamma: float | None):
        self.rho_m, self.n, self.family, self.planar = rho_m, n, family, planar
        self.gamma = gamma
        self.fast = planar and n == 3 and family in (MBK, CHSH)

    def value(self, pair) -> float:
        if self.family in (MBK, CHSH):
            return pair[0]
        if self.family == UFFINK:
            return float(np.hypot(pair[0], pair[1])) / SQRT2
        c, s = np.cos(self.gamma), np.sin(self.gamma)
        return (c * pair[0] + s * pair[1]) / SQRT2

    def pair(self, x: np.ndarray) -> tuple[float, float]:
        nv, npv = _vectors(x, self.n, self.planar)
        m, mp = mbk_levels_from_sigmas([sigma(v) for v in nv], [sigma(v) for v in npv])[-1]
        return _trace(self.rho_m, m), _trace(self.rho_m, mp)

    def __call__(self, x: np.ndarray) -> float:
        if self.fast:
            return m3_planar_expectation(self.rho_m, x[:3], x[3:])
        return self.value(self.pair(x))

    def slicer(self, x: np.ndarray, i: int):
        q = _owner(i, self.n, self.planar)
        nv, npv = _vectors(x, self.n, self.planar)
        s = [sigma(v) for v in nv]
        sp = [sigma(v) for v in npv]
        zero = np.zeros((2, 2), dtype=complex)
        coeff = np.empty((2, 6))
        for a, p in enumerate(PAULIS):
            for slot in (0, 1):
                s_, sp_ = list(s), list(sp)
                s_[q], sp_[q] = (p, zero) if slot == 0 else (zero, p)
                m, mp = mbk_levels_from_sigmas(s_, sp_)[-1]
                coeff[:, 3 * slot + a] = _trace(self.rho_m, m), _trace(self.rho_m, mp)
        trial = x.copy()

        def g(t):
            trial[i] = t
            return self.value(coeff @ _qubit_vectors(trial, q, self.n, self.planar))

        return g


def optimize_settings(rho, family: str = MBK, options: OptimizeOptions | None = None) -> OptimizeResult:
    """Best normalized violation of ``family`` over measurement settings."""
    options = options or OptimizeOptions()
    rho_m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    check_dim(rho_m.shape[0])
    n = int(round(np.log2(rho_m.shape[0])))
    if family not in FAMILIES:
        raise ContractViolation(f"unknown family {family!r}")
    if family == CHSH and n != 2:
        raise ContractViolation("CHSH needs exactly two qubits")
    planar = options.planar_for(n)
    gamma = svetlichny_gamma(n) if family == SVETLICHNY else None
    problem = _BellProblem(rho_m, n, family, planar, gamma)
    counter = [0]

    def f(x):
        counter[0] += 1
        return problem(x)

    dim = 2 * n if planar else 4 * n
    starts = np.random.default_rng(options.seed).uniform(0, TWO_PI, size=(options.restarts, dim))
    best_x, best_v, values = None, -np.inf, []
    for x0 in starts:
        x, v = coordinate_ascent(f, x0, options.grid_points, options.tol, options.max_sweeps, problem.slicer)
        values.append(v)
        if v > best_v:
            best_x, best_v = x, v
    settings = settings_from_params(best_x, n, planar)
    if family == UFFINK:
        m, mp = mbk_matrices(settings)
        gamma = float(np.mod(np.arctan2(_trace(rho_m, mp), _trace(rho_m, m)), TWO_PI))
    return OptimizeResult(settings, gamma, float(best_v), family, tuple(values), counter[0])


# --- GHZ overlap -----------------------------------------------------------


def euler_unitary(a: float, b: float, c: float) -> np.ndarray:
    """``Rz(a) Ry(b) Rz(c)``."""
    rz = lambda t: np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])
    ry = np.array([[np.cos(b / 2), -np.sin(b / 2)], [np.sin(b / 2), np.cos(b / 2)]], dtype=complex)
    return rz(a) @ ry @ rz(c)


def _rotated_ghz(angles: np.ndarray) -> np.ndarray:
    """``(u_1 x ... x u_N)^dagger |GHZ_N>`` built from the columns of ``u^dagger``."""
    us = [euler_unitary(*angles[3 * i : 3 * i + 3]).conj().T for i in range(len(angles) // 3)]
    zero = kron_all([u[:, [0]] for u in us])[:, 0]
    one = kron_all([u[:, [1]] for u in us])[:, 0]
    return (zero + one) / np.sqrt(2)


def ghz_overlap(rho_m: np.ndarray, angles: np.ndarray) -> float:
    phi = _rotated_ghz(angles)
    return float(np.real(phi.conj() @ rho_m @ phi))


def _overlap_slicer(rho_m: np.ndarray, n: int):
    """``phi`` is linear in the four entries of one ``u_q^dagger``, so the overlap is a 4x4 form."""

    def slicer(x, i):
        q = i // 3
        cols = [euler_unitary(*x[3 * j : 3 * j + 3]).conj().T for j in range(n)]
        w = np.empty((2**n, 4), dtype=complex)
        for c in range(4):
            e = np.zeros(4, dtype=complex)
            e[c] = 1
            a = [u[:, 0] for u in cols]
            b = [u[:, 1] for u in cols]
            a[q], b[q] = e[:2], e[2:]
            w[:, c] = (kron_all([v[:, None] for v in a]) + kron_all([v[:, None] for v in b]))[:, 0] / np.sqrt(2)
        form = w.conj().T @ rho_m @ w
        trial = x.copy()

        def g(t):
            trial[i] = t
            u = euler_unitary(*trial[3 * q : 3 * q + 3]).conj().T
            v = np.concatenate([u[:, 0], u[:, 1]])
            return float(np.real(v.conj() @ form @ v))

        return g

    return slicer


def optimize_ghz_overlap(rho, options: OptimizeOptions | None = None) -> OverlapResult:
    """Maximize ``<GHZ|(x u_i) rho (x u_i)^dagger|GHZ>`` over local unitaries."""
    options = options or OptimizeOptions()
    rho_m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    check_dim(rho_m.shape[0])
    n = int(round(np.log2(rho_m.shape[0])))
    starts = np.random.default_rng(options.seed).uniform(0, TWO_PI, size=(options.restarts, 3 * n))
    slicer = _overlap_slicer(rho_m, n)
    best_x, best_v, values = None, -np.inf, []
    for x0 in starts:
        x, v = coordinate_ascent(
            lambda a: ghz_overlap(rho_m, a), x0, options.grid_points, options.tol, options.max_sweeps, slicer
        )
        values.append(v)
        if v > best_v:
            best_x, best_v = x, v
    us = tuple(euler_unitary(*best_x[3 * i : 3 * i + 3]) for i in range(n))
    return OverlapResult(us, float(best_v), best_x, tuple(values))
