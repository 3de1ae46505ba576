"""Shared instance generators for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from belldistill.bell import MeasurementSettings, mbk_operator
from belldistill.qlinalg import DensityMatrix, hermitian_eig


def random_planar_settings(rng: np.random.Generator, n_qubits: int) -> MeasurementSettings:
    return MeasurementSettings.from_angles(rng.uniform(0, 2 * np.pi, n_qubits), rng.uniform(0, 2 * np.pi, n_qubits))


def random_unitary(rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def violating_instance(rng: np.random.Generator, n_qubits: int, max_tries: int = 200):
    """A noisy GHZ-type state and random planar MBK operator with ``beta > 1``.

    The pure part is the top eigenvector of the operator (a GHZ state in the
    operator's theta basis), mixed with white noise and with a random
    GHZ-diagonal admixture.  Draws repeat until the violation exceeds 1.
    """
    d = 2**n_qubits
    for _ in range(max_tries):
        b = mbk_operator(random_planar_settings(rng, n_qubits))
        _, vecs = hermitian_eig(b.matrix)
        top = vecs[:, -1]
        pure = np.outer(top, top.conj())
        v = rng.uniform(0.3, 1.0)
        w = rng.dirichlet(np.ones(3))
        diag_noise = np.diag(rng.dirichlet(np.ones(d))).astype(complex)
        m = w[0] * pure + w[1] * np.eye(d) / d + w[2] * diag_noise
        m = v * pure + (1 - v) * m
        rho = DensityMatrix.from_matrix(m)
        beta = float(np.real(np.trace(m @ b.matrix)))
        if beta > 1 + 1e-6:
            return rho, b
    raise RuntimeError("no violating instance found")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance summary -----------------------------------------------------

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record_criterion():
    """Store a criterion verdict for the end-of-run summary, then return it."""

    def record(number: int, passed: bool, detail: str) -> bool:
        ACCEPTANCE_RESULTS[number] = (bool(passed), detail)
        print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
