import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from belldistill.qlinalg import ContractViolation, partial_trace
from belldistill.states import (
    GhzWeights,
    ghz,
    kbar,
    make_ghz_diagonal,
    make_noisy_ghz,
    make_padded_ghz,
    make_rho_r,
    make_theta_ghz,
    make_w_mixture,
    random_density,
    random_ghz_weights,
    w_vector,
)


def test_kbar():
    assert kbar(0, 3) == 7
    assert kbar(3, 3) == 4
    assert kbar(1, 1) == 0
    with pytest.raises(ContractViolation):
        kbar(8, 3)


def test_theta_ghz_examples():
    v = make_theta_ghz(3, 0)
    assert np.allclose(v, ghz(3).matrix[:, 0] * np.sqrt(2))
    v = make_theta_ghz(2, 1, 0.0, -1)
    assert np.allclose(v, np.array([0, 1, -1, 0]) / np.sqrt(2))
    with pytest.raises(ContractViolation):
        make_theta_ghz(3, 4)


def test_ghz_basis_is_orthonormal():
    n = 3
    basis = np.array([make_theta_ghz(n, k, 0.3 * k, s) for k in range(4) for s in (1, -1)])
    assert np.allclose(basis.conj() @ basis.T, np.eye(8), atol=1e-12)


def test_ghz_diagonal_examples():
    n = 3
    plus = np.zeros(4)
    plus[0] = 1
    assert np.allclose(make_ghz_diagonal(GhzWeights(n, plus, np.zeros(4))).matrix, ghz(3).matrix)
    uniform = np.full(4, 1 / 8)
    assert np.allclose(make_ghz_diagonal(GhzWeights(n, uniform, uniform)).matrix, np.eye(8) / 8)

    m = make_ghz_diagonal(GhzWeights(3, [0.6, 0.4, 0, 0], [0, 0, 0, 0])).matrix
    assert np.allclose(np.diag(m).real, [0.3, 0.2, 0, 0, 0, 0, 0.2, 0.3])
    assert m[0, 7] == pytest.approx(0.3)
    assert m[1, 6] == pytest.approx(0.2)


def test_ghz_weights_validation():
    with pytest.raises(ContractViolation):
        GhzWeights(2, [0.5, 0.6], [0, 0])
    with pytest.raises(ContractViolation):
        GhzWeights(2, [1.5, -0.5], [0, 0])
    with pytest.raises(ContractViolation):
        GhzWeights(2, [1.0], [0.0])


def test_rho_r():
    assert np.allclose(make_rho_r(3, 1.0).matrix, ghz(3).matrix)
    rho = make_rho_r(3, 0.687)
    overlap = np.real(ghz(3).matrix[:, 0].conj() @ rho.matrix @ ghz(3).matrix[:, 0]) * 2
    assert overlap == pytest.approx(0.687)
    with pytest.raises(ContractViolation):
        make_rho_r(3, 1.2)


def test_w_mixture():
    zero = np.zeros((8, 8))
    zero[0, 0] = 1
    assert np.allclose(make_w_mixture(0.0).matrix, zero)
    w = w_vector()
    assert np.allclose(make_w_mixture(np.pi / 2).matrix, np.outer(w, w.conj()))
    assert make_w_mixture(np.pi / 8).purity() == pytest.approx(1.0)


def test_padded_ghz():
    rho = make_padded_ghz(3)
    assert np.allclose(partial_trace(rho, [1, 2]), ghz(2).matrix)
    assert np.allclose(partial_trace(rho, [3]), np.diag([1, 0]))
    assert np.allclose(partial_trace(make_padded_ghz(5), [1, 2, 3, 4]), ghz(4).matrix)


def test_noisy_ghz():
    rho = make_noisy_ghz(3, 0.95)
    assert np.allclose(rho.matrix, 0.95 * ghz(3).matrix + 0.05 * np.eye(8) / 8)


def test_random_density_examples():
    a, b = random_density(7, 3), random_density(7, 3)
    assert np.array_equal(a.matrix, b.matrix)
    assert random_density(8, 3, rank=1).purity() == pytest.approx(1.0, abs=1e-9)
    assert np.linalg.eigvalsh(random_density(9, 2, rank=4).matrix)[0] > 0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 5))
def test_random_ghz_weights_are_a_distribution(seed, n):
    w = random_ghz_weights(np.random.default_rng(seed), n)
    assert min(w.plus.min(), w.minus.min()) >= 0
    assert w.plus.sum() + w.minus.sum() == pytest.approx(1.0, abs=1e-9)
    rho = make_ghz_diagonal(w)
    assert np.trace(rho.matrix).real == pytest.approx(1.0, abs=1e-12)
