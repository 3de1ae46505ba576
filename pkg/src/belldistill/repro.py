"""Reproduction drivers for the reference thresholds and identities.

Each driver returns a :class:`ReproResult` holding the computed value, the
reference value, the comparison tolerance and the verdict.  The
CLI ``repro`` command and the acceptance suite both call these.
"""

from __future__ import annotations

import math
import time
from typing import NamedTuple

import numpy as np

from .bell import (
    MBK,
    UFFINK,
    MeasurementSettings,
    b3_moduli,
    m3_closed_form,
    mbk_operator,
    pair_eigenvalues,
    u3_eigenvalues,
    uffink_operator,
)
from .bounds import beta_gamma_of_r, beta_of_r, overlap_requirement, threshold_scan
from .optimize import OptimizeOptions, optimize_settings
from .qlinalg import hermitian_eigvals
from .states import ghz, make_rho_r, make_w_mixture

SQRT2 = math.sqrt(2)
# A value must clear its threshold by this much to count as a violation, so
# that round-off at an exactly-attained bound is not read as a crossing.
VIOLATION_MARGIN = 1e-9


class ReproResult(NamedTuple):
    name: str
    value: float
    reference: float
    tolerance: float
    passed: bool
    details: dict


def _result(name, value, reference, tol, details, extra_ok=True) -> ReproResult:
    ok = bool(abs(value - reference) <= tol and extra_ok)
    return ReproResult(name, float(value), float(reference), tol, ok, details)


def repro_r3() -> ReproResult:
    """GHZ overlap above which ``beta_of_r(3, r)`` exceeds sqrt(2)."""
    closed = overlap_requirement(3, 2)
    scan = threshold_scan(lambda r: beta_of_r(3, r).beta_max > SQRT2, 0.5, 0.9, 1e-12)
    return _result(
        "r3",
        closed,
        (1 + math.sqrt(3)) / 4,
        1e-9,
        {"closed_form": closed, "bisection": scan.value, "bisection_tol": scan.tol},
    )


def repro_ru(tol: float = 1e-4, grid: int = 64) -> ReproResult:
    """Overlap at which the optimal three-qubit Uffink value exceeds sqrt(2)."""
    scan = threshold_scan(lambda r: beta_gamma_of_r(r, grid) > SQRT2 + VIOLATION_MARGIN, 0.5, 0.75, tol)
    return _result(
        "rU",
        scan.value,
        0.628,
        0.002,
        {"scan_tol": scan.tol, "bracket": [scan.lo, scan.hi], "grid_points": grid, "margin": VIOLATION_MARGIN},
    )


def mermin_value_rho_r(r: float, options: OptimizeOptions | None = None) -> float:
    options = options or OptimizeOptions(restarts=8)
    return optimize_settings(make_rho_r(3, r), MBK, options).beta


def repro_mermin_threshold(tol: float = 1e-4, options: OptimizeOptions | None = None) -> ReproResult:
    """Overlap at which the optimized MBK value of ``rho_3(r)`` exceeds sqrt(2)."""
    options = options or OptimizeOptions(restarts=8)
    scan = threshold_scan(lambda r: mermin_value_rho_r(r, options) > SQRT2 + VIOLATION_MARGIN, 0.6, 0.75, tol)
    return _result(
        "mermin-threshold",
        scan.value,
        0.687,
        0.002,
        {"scan_tol": scan.tol, "bracket": [scan.lo, scan.hi], "restarts": options.restarts, "seed": options.seed},
    )


def repro_mbk_max(options: OptimizeOptions | None = None, sizes=range(2, 7)) -> ReproResult:
    """Optimized MBK value of ``|GHZ_N>`` against ``2^((N-1)/2)``."""
    options = options or OptimizeOptions(planar=True)
    rows, worst = [], 0.0
    start = time.perf_counter()
    for n in sizes:
        res = optimize_settings(ghz(n), MBK, options)
        target = 2 ** ((n - 1) / 2)
        worst = max(worst, abs(res.beta - target))
        rows.append({"n_qubits": n, "beta": res.beta, "expected": target})
    elapsed = time.perf_counter() - start
    return _result("mbk-max", worst, 0.0, 1e-4, {"rows": rows, "seconds": elapsed})


def w_threshold(family: str, lo: float, hi: float, tol: float, options: OptimizeOptions, level: float = 1.0) -> float:
    """W-mixture angle where the optimized normalized value of ``family`` first exceeds ``level``."""

    def violated(alpha):
        return optimize_settings(make_w_mixture(alpha), family, options).beta > level + VIOLATION_MARGIN

    return threshold_scan(violated, lo, hi, tol).value


def repro_w_uffink(tol: float = 1e-3, options: OptimizeOptions | None = None) -> ReproResult:
    """W-mixture angles where Uffink and MBK certify three-qubit entanglement.

    Both are compared at the level ``2^((N-2)/2) = sqrt(2)`` of the bare
    operators: 1 for the Uffink value (normalized by sqrt(2)) and sqrt(2) for
    the MBK value (normalized by its local bound 1).  The MBK crossing must
    come later.
    """
    options = options or OptimizeOptions(restarts=8, planar=False)
    alpha_u = w_threshold(UFFINK, 0.3, 0.45, tol, options)
    alpha_m = w_threshold(MBK, 0.4, 0.6, tol, options, level=SQRT2)
    return _result(
        "w-uffink",
        alpha_u,
        math.pi / 8,
        0.01,
        {"mbk_threshold": alpha_m, "mbk_after_uffink": alpha_m > alpha_u, "scan_tol": tol, "restarts": options.restarts},
        extra_ok=alpha_m > alpha_u,
    )


def random_planar_settings(rng: np.random.Generator, n_qubits: int = 3) -> MeasurementSettings:
    return MeasurementSettings.from_angles(rng.uniform(0, 2 * np.pi, n_qubits), rng.uniform(0, 2 * np.pi, n_qubits))


def spectral_identity_errors(rng: np.random.Generator, count: int = 200) -> dict:
    """Largest deviations of the three-qubit closed forms over random planar settings."""
    worst = {"m3_eigenvalues": 0.0, "u3_eigenvalues": 0.0, "b_square_sum": 0.0, "u_square_sum": 0.0}
    for _ in range(count):
        s = random_planar_settings(rng)
        gamma = rng.uniform(0, 2 * np.pi)
        b = b3_moduli(s.delta)
        ev = pair_eigenvalues(hermitian_eigvals(mbk_operator(s).matrix))
        worst["m3_eigenvalues"] = max(worst["m3_eigenvalues"], float(np.max(np.abs(np.sort(ev) - np.sort(b)))))
        u = u3_eigenvalues(s, gamma)
        eu = pair_eigenvalues(hermitian_eigvals(uffink_operator(s, gamma).matrix))
        worst["u3_eigenvalues"] = max(worst["u3_eigenvalues"], float(np.max(np.abs(np.sort(eu) - np.sort(u)))))
        worst["b_square_sum"] = max(worst["b_square_sum"], abs(float(np.sum(b**2)) - 4))
        target = 4 * (1 + np.sin(2 * gamma) * np.prod(np.cos(s.delta)))
        worst["u_square_sum"] = max(worst["u_square_sum"], abs(float(np.sum(u**2)) - target))
        cf = m3_closed_form(s)
        worst["b_square_sum"] = max(worst["b_square_sum"], abs(float(np.sum(cf.b**2)) - 4))
    return worst


def repro_constraint_sum(seed: int = 0, count: int = 200) -> ReproResult:
    worst = spectral_identity_errors(np.random.default_rng(seed), count)
    value = max(worst.values())
    return _result("constraint-sum", value, 0.0, 1e-8, {"errors": worst, "samples": count, "seed": seed})


TARGETS = {
    "r3": repro_r3,
    "rU": repro_ru,
    "mermin-threshold": repro_mermin_threshold,
    "mbk-max": repro_mbk_max,
    "w-uffink": repro_w_uffink,
    "constraint-sum": repro_constraint_sum,
}
