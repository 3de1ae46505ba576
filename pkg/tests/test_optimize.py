import numpy as np
import pytest

from belldistill.bell import MBK, SQRT2, SVETLICHNY, UFFINK, MeasurementSettings, mbk_operator, uffink_operator, violation
from belldistill.optimize import (
    OptimizeOptions,
    coordinate_ascent,
    euler_unitary,
    optimize_ghz_overlap,
    optimize_settings,
    settings_from_params,
)
from belldistill.qlinalg import ContractViolation, DensityMatrix, apply_local_unitaries, is_unitary, kron_all
from belldistill.states import ghz, make_padded_ghz, make_w_mixture, maximally_mixed, random_density

from conftest import random_unitary

FAST = OptimizeOptions(restarts=4)


def test_options_validation():
    with pytest.raises(ContractViolation):
        OptimizeOptions(restarts=0)
    with pytest.raises(ContractViolation):
        OptimizeOptions(tol=0)
    assert OptimizeOptions().planar_for(3) and not OptimizeOptions().planar_for(4)
    assert OptimizeOptions(planar=True).planar_for(5)


def test_coordinate_ascent_finds_periodic_maximum():
    f = lambda x: np.cos(x[0] - 1.0) + 0.5 * np.cos(2 * (x[1] + 0.3))
    x, v = coordinate_ascent(f, np.array([4.0, 2.0]), 24, 1e-8)
    assert v == pytest.approx(1.5, abs=1e-12)
    assert np.mod(x[0] - 1.0 + np.pi, 2 * np.pi) - np.pi == pytest.approx(0, abs=1e-6)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_ghz_reaches_maximal_mbk_value(n):
    res = optimize_settings(ghz(n), MBK, OptimizeOptions(restarts=6, planar=True))
    assert res.beta == pytest.approx(2 ** ((n - 1) / 2), abs=1e-4)
    assert violation(ghz(n), mbk_operator(res.settings)).beta == pytest.approx(res.beta, abs=1e-12)
    assert res.settings.planar


def test_product_state_does_not_violate():
    psi = kron_all([np.array([[np.cos(0.3)], [np.sin(0.3) * np.exp(0.4j)]])] * 3)[:, 0]
    rho = DensityMatrix.from_vector(psi)
    assert optimize_settings(rho, MBK, OptimizeOptions(restarts=4, planar=False)).beta <= 1 + 1e-6


def test_maximally_mixed_gives_zero():
    assert optimize_settings(maximally_mixed(3), MBK, FAST).beta == pytest.approx(0.0, abs=1e-12)


def test_padded_ghz_needs_general_settings():
    rho = make_padded_ghz(3)
    assert optimize_settings(rho, MBK, OptimizeOptions(restarts=4, planar=False)).beta == pytest.approx(SQRT2, abs=1e-4)
    # in the xy-plane the unentangled |0> only contributes zero-mean outcomes
    assert optimize_settings(rho, MBK, OptimizeOptions(restarts=4, planar=True)).beta == pytest.approx(0.0, abs=1e-9)


def test_uffink_and_svetlichny_on_ghz3():
    res = optimize_settings(ghz(3), UFFINK, FAST)
    assert res.beta == pytest.approx(2 / SQRT2, abs=1e-5)
    op = uffink_operator(res.settings, res.gamma)
    assert violation(ghz(3), op).beta == pytest.approx(res.beta, abs=1e-9)
    sv = optimize_settings(ghz(3), SVETLICHNY, FAST)
    assert sv.beta * SQRT2 == pytest.approx(2.0, abs=1e-5)


def test_settings_invariants_respected():
    rng = np.random.default_rng(0)
    for planar in (True, False):
        s = settings_from_params(rng.uniform(0, 7, (2 if planar else 4) * 3), 3, planar)
        assert np.allclose(np.linalg.norm(s.n, axis=1), 1, atol=1e-12)
        assert np.allclose(np.linalg.norm(s.n_prime, axis=1), 1, atol=1e-12)
        if planar:
            assert s.planar and np.all(s.n[:, 2] == 0) and np.all(s.n_prime[:, 2] == 0)


def test_more_restarts_never_worse():
    rho = random_density(3, 3, rank=2)
    values = [optimize_settings(rho, MBK, OptimizeOptions(restarts=k)).beta for k in (1, 2, 4, 8)]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


def test_reproducible_bits():
    rho = random_density(5, 3, rank=1)
    a = optimize_settings(rho, MBK, OptimizeOptions(restarts=3, seed=9))
    b = optimize_settings(rho, MBK, OptimizeOptions(restarts=3, seed=9))
    assert a.beta == b.beta and np.array_equal(a.settings.n, b.settings.n)
    o1 = optimize_ghz_overlap(rho, OptimizeOptions(restarts=2, seed=4))
    o2 = optimize_ghz_overlap(rho, OptimizeOptions(restarts=2, seed=4))
    assert o1.r_max == o2.r_max and np.array_equal(o1.angles, o2.angles)


def test_euler_unitary_is_unitary():
    rng = np.random.default_rng(1)
    for a in rng.uniform(0, 7, (10, 3)):
        assert is_unitary(euler_unitary(*a))


def test_ghz_overlap_examples():
    rng = np.random.default_rng(2)
    us = [random_unitary(rng) for _ in range(3)]
    rotated = apply_local_unitaries(ghz(3), us)
    assert optimize_ghz_overlap(rotated, FAST).r_max == pytest.approx(1.0, abs=1e-6)

    assert optimize_ghz_overlap(maximally_mixed(3), OptimizeOptions(restarts=1)).r_max == pytest.approx(1 / 8, abs=1e-9)

    w = optimize_ghz_overlap(make_w_mixture(np.pi / 2), OptimizeOptions(restarts=8))
    assert w.r_max == pytest.approx(0.75, abs=1e-6)
    assert all(is_unitary(u) for u in w.unitaries)


def test_ghz_overlap_reported_value_is_attained():
    rho = random_density(8, 3, rank=2)
    res = optimize_ghz_overlap(rho, FAST)
    rotated = apply_local_unitaries(rho, [u for u in res.unitaries])
    direct = np.real(ghz(3).matrix[:, 0].conj() @ rotated.matrix @ ghz(3).matrix[:, 0]) * 2
    assert direct == pytest.approx(res.r_max, abs=1e-10)


def test_unknown_family_rejected():
    with pytest.raises(ContractViolation):
        optimize_settings(ghz(3), "nope")
    with pytest.raises(ContractViolation):
        optimize_settings(ghz(3), "CHSH")


def test_settings_from_params_general_dimension():
    s = settings_from_params(np.zeros(8), 2, False)
    assert isinstance(s, MeasurementSettings) and not s.planar
