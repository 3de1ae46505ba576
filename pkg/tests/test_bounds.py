import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from belldistill.bell import MBK, SQRT2, b3_squared
from belldistill.bounds import (
    beta_gamma_of_r,
    beta_of_r,
    overlap_requirement,
    threshold_scan,
    uffink_overlap_optimum,
)
from belldistill.optimize import OptimizeOptions, optimize_ghz_overlap, optimize_settings
from belldistill.qlinalg import ContractViolation
from belldistill.states import make_padded_ghz

R3 = (1 + math.sqrt(3)) / 4


def test_beta_of_r_examples():
    assert beta_of_r(2, 0.5).beta_max == pytest.approx(1.0, abs=1e-12)
    assert beta_of_r(3, R3).beta_max == pytest.approx(SQRT2, abs=1e-12)
    for n in range(2, 8):
        assert beta_of_r(n, 1.0).beta_max == pytest.approx(2 ** ((n - 1) / 2), abs=1e-12)
    with pytest.raises(ContractViolation):
        beta_of_r(3, 1.5)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(2, 10), r=st.floats(0, 1))
def test_beta_of_r_spectrum_is_consistent(n, r):
    res = beta_of_r(n, r)
    m = 2 ** (n - 1) - 1
    assert res.beta_max == pytest.approx(2 ** ((n - 1) / 2) * math.sqrt(r**2 + (1 - r) ** 2 / m), abs=1e-12)
    # the optimal spectrum saturates sum b_k^2 = 2^(N-1) and reproduces beta_max
    assert res.b0**2 + m * res.b_rest**2 == pytest.approx(2 ** (n - 1), abs=1e-9)
    assert res.b0 * r + m * res.b_rest * res.lambda_rest == pytest.approx(res.beta_max, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(2, 10), r1=st.floats(0, 1), r2=st.floats(0, 1))
def test_beta_of_r_monotone_above_uniform(n, r1, r2):
    lo, hi = sorted((r1, r2))
    if lo >= 1 / 2 ** (n - 1):
        assert beta_of_r(n, lo).beta_max <= beta_of_r(n, hi).beta_max + 1e-12


def test_overlap_requirement_examples():
    assert overlap_requirement(3, 2) == pytest.approx(R3, abs=1e-12)
    assert overlap_requirement(2, 2) == pytest.approx(0.5, abs=1e-12)
    assert overlap_requirement(12, 2) == pytest.approx(1 / SQRT2, abs=1e-3)
    for n in range(3, 9):
        for p in range(2, n + 1):
            r = overlap_requirement(n, p)
            assert beta_of_r(n, r).beta_max == pytest.approx(2 ** ((n - p) / 2), abs=1e-9)


def test_overlap_bound_is_not_universal():
    """``|Phi+>|0>`` reaches MBK value sqrt(2) with GHZ overlap 1/2: the even-spread bound misses it."""
    rho = make_padded_ghz(3)
    beta = optimize_settings(rho, MBK, OptimizeOptions(restarts=4, planar=False)).beta
    r_max = optimize_ghz_overlap(rho, OptimizeOptions(restarts=4)).r_max
    assert beta == pytest.approx(SQRT2, abs=1e-6)
    assert r_max == pytest.approx(0.5, abs=1e-6)
    assert beta_of_r(3, r_max).beta_max < beta - 0.2


def test_beta_gamma_examples():
    assert beta_gamma_of_r(1.0) == pytest.approx(2.0, abs=1e-9)
    assert beta_gamma_of_r(0.628) == pytest.approx(SQRT2, abs=2e-3)
    low = beta_gamma_of_r(0.5)
    assert low <= SQRT2 + 1e-9
    assert low == pytest.approx(SQRT2, abs=1e-9)  # attained at delta = 0, gamma = pi/4 for every r


def test_beta_gamma_onset_is_five_eighths():
    assert beta_gamma_of_r(0.62) <= SQRT2 + 1e-9
    assert beta_gamma_of_r(0.63) > SQRT2 + 1e-4
    # excess grows quadratically from r = 5/8 on the symmetric slice
    for r in (0.64, 0.66):
        x = np.linspace(0, 1, 200001)
        slice_ = r * np.sqrt(4 - 3 * x + x**1.5) + (1 - r) * np.sqrt(x + x**1.5)
        assert beta_gamma_of_r(r) >= slice_.max() - 1e-9


def test_uffink_optimum_is_a_valid_operator_point():
    opt = uffink_overlap_optimum(0.7)
    u2 = b3_squared(opt.delta) + math.sin(2 * opt.gamma) * np.prod(np.cos(opt.delta))
    u = np.sqrt(np.maximum(u2, 0))
    assert opt.u0 == pytest.approx(u[0], abs=1e-12)
    assert opt.u_bar == pytest.approx(u[1:].mean(), abs=1e-12)
    assert opt.value == pytest.approx(0.7 * opt.u0 + 0.3 * opt.u_bar, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), r=st.floats(0.3, 1.0))
def test_beta_gamma_dominates_random_points(seed, r):
    rng = np.random.default_rng(seed)
    delta = rng.uniform(-np.pi, np.pi, (500, 3))
    gamma = rng.uniform(0, 2 * np.pi, 500)
    u2 = b3_squared(delta) + (np.sin(2 * gamma) * np.prod(np.cos(delta), axis=1))[:, None]
    u = np.sqrt(np.maximum(u2, 0))
    sampled = np.max(r * u[:, 0] + (1 - r) * u[:, 1:].mean(axis=1))
    assert beta_gamma_of_r(r) >= sampled - 1e-9


def test_threshold_scan_examples():
    res = threshold_scan(lambda r: beta_of_r(3, r).beta_max > SQRT2, 0.5, 0.9, 1e-10)
    assert res.value == pytest.approx(R3, abs=1e-9)
    assert res.hi - res.lo <= 1e-10
    with pytest.raises(ContractViolation):
        threshold_scan(lambda r: True, 0.0, 1.0)
    with pytest.raises(ContractViolation):
        threshold_scan(lambda r: r > 0.5, 0.0, 1.0, tol=0.0)


@settings(max_examples=50, deadline=None)
@given(t=st.floats(0.01, 0.99), tol=st.sampled_from([1e-3, 1e-6, 1e-9]))
def test_threshold_scan_brackets_step(t, tol):
    res = threshold_scan(lambda r: r > t, 0.0, 1.0, tol)
    assert res.lo <= t <= res.hi and res.hi - res.lo <= tol
