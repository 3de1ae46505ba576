"""Bell operators with two two-outcome settings per qubit.

Every operator carries the local-variable bound it is normalized to, and all
reported violations are ``tr(rho B) / lv_bound`` so that ``beta > 1`` means a
violation for every family.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .qlinalg import (
    ContractViolation,
    DensityMatrix,
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    hermitian_eigvals,
    is_hermitian,
    kron,
    kron_all,
    sigma,
)
from .states import x_state

SQRT2 = float(np.sqrt(2.0))

MBK = "MBK"
MBK_PRIME = "MBK-prime"
UFFINK = "Uffink"
SVETLICHNY = "Svetlichny"
WWZB = "WWZB-spectral"
CHSH = "CHSH"
FAMILIES = (MBK, MBK_PRIME, UFFINK, SVETLICHNY, WWZB, CHSH)


class NotWWZBError(ValueError):
    """Spectral data violating ``sum b_k^2 <= 2^(N-1)``."""


@dataclass(frozen=True, eq=False)
class MeasurementSettings:
    """Unit Bloch vectors ``n_i`` and ``n'_i`` for every qubit (rows ``i = 1..N``)."""

    n: np.ndarray = field(repr=False)
    n_prime: np.ndarray = field(repr=False)
    planar: bool = False

    def __post_init__(self):
        n = np.array(self.n, dtype=float).reshape(-1, 3)
        npr = np.array(self.n_prime, dtype=float).reshape(-1, 3)
        if n.shape != npr.shape or len(n) == 0:
            raise ContractViolation("need one pair of vectors per qubit")
        if np.max(np.abs(np.linalg.norm(n, axis=1) - 1)) > 1e-12 or np.max(
            np.abs(np.linalg.norm(npr, axis=1) - 1)
        ) > 1e-12:
            raise ContractViolation("measurement directions must be unit vectors")
        if self.planar and (np.any(n[:, 2] != 0) or np.any(npr[:, 2] != 0)):
            raise ContractViolation("planar settings must have zero z-components")
        n.setflags(write=False)
        npr.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "n_prime", npr)

    @classmethod
    def from_angles(cls, alpha: Sequence[float], alpha_prime: Sequence[float]) -> "MeasurementSettings":
        """Planar settings ``n = cos(a) x + sin(a) y``."""
        a = np.asarray(alpha, dtype=float)
        ap = np.asarray(alpha_prime, dtype=float)
        zeros = np.zeros_like(a)
        n = np.stack([np.cos(a), np.sin(a), zeros], axis=1)
        npr = np.stack([np.cos(ap), np.sin(ap), zeros], axis=1)
        return cls(n, npr, planar=True)

    @classmethod
    def from_spherical(cls, theta, phi, theta_prime, phi_prime) -> "MeasurementSettings":
        def vec(t, p):
            t, p = np.asarray(t, dtype=float), np.asarray(p, dtype=float)
            return np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=1)

        return cls(vec(theta, phi), vec(theta_prime, phi_prime))

    @property
    def n_qubits(self) -> int:
        return len(self.n)

    def _require_planar(self):
        if not self.planar:
            raise ContractViolation("operation needs planar settings")

    @property
    def alpha(self) -> np.ndarray:
        self._require_planar()
        return np.arctan2(self.n[:, 1], self.n[:, 0])

    @property
    def alpha_prime(self) -> np.ndarray:
        self._require_planar()
        return np.arctan2(self.n_prime[:, 1], self.n_prime[:, 0])

    @property
    def delta(self) -> np.ndarray:
        return self.alpha - self.alpha_prime

    def swapped(self) -> "MeasurementSettings":
        return MeasurementSettings(self.n_prime, self.n, self.planar)

    def restrict(self, qubits: Sequence[int]) -> "MeasurementSettings":
        """Settings of the listed qubits (1-based), in the given order."""
        idx = [q - 1 for q in qubits]
        return MeasurementSettings(self.n[idx], self.n_prime[idx], self.planar)

    def to_dict(self) -> dict:
        return {"n": self.n.tolist(), "n_prime": self.n_prime.tolist(), "planar": self.planar}

    @classmethod
    def from_dict(cls, d: dict) -> "MeasurementSettings":
        if "alpha" in d:
            return cls.from_angles(d["alpha"], d["alpha_prime"])
        return cls(d["n"], d["n_prime"], bool(d.get("planar", False)))


class SpectralData(NamedTuple):
    """``B = V (sum_k b_k (Q_k^+ - Q_k^-)) V^dagger`` with ``V = kron(local_basis)``."""

    b: np.ndarray
    theta: np.ndarray
    local_basis: tuple[np.ndarray, ...]


class Split(NamedTuple):
    """``B = sigma(n) (x) C1 + sigma(n') (x) C2`` with the sigma acting on ``qubit``."""

    qubit: int
    n: np.ndarray
    n_prime: np.ndarray
    c1: np.ndarray
    c2: np.ndarray

    @property
    def plus(self) -> np.ndarray:
        return self.c1 + self.c2

    @property
    def minus(self) -> np.ndarray:
        return self.c1 - self.c2


@dataclass(frozen=True, eq=False)
class BellOperator:
    n_qubits: int
    matrix: np.ndarray = field(repr=False)
    lv_bound: float
    family: str
    settings: MeasurementSettings | None = field(default=None, repr=False)
    gamma: float | None = None
    spectral: SpectralData | None = field(default=None, repr=False)
    split: Split | None = field(default=None, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2**self.n_qubits,) * 2:
            raise ContractViolation("operator dimension does not match qubit count")
        if not is_hermitian(m):
            raise ContractViolation("Bell operator must be Hermitian within 1e-10")
        if self.lv_bound <= 0:
            raise ContractViolation("lv_bound must be positive")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def negated(self) -> "BellOperator":
        split = None
        if self.split is not None:
            s = self.split
            split = Split(s.qubit, s.n, s.n_prime, -s.c1, -s.c2)
        spectral = None
        if self.spectral is not None:
            sp = self.spectral
            spectral = SpectralData(sp.b, np.mod(sp.theta + np.pi, 2 * np.pi), sp.local_basis)
        return replace(self, matrix=-self.matrix, split=split, spectral=spectral)

    def split_at(self, qubit: int | None = None) -> Split:
        """Split form on ``qubit`` (default: the last qubit)."""
        qubit = self.n_qubits if qubit is None else qubit
        if self.split is not None and self.split.qubit == qubit:
            return self.split
        if self.settings is None:
            raise ContractViolation("operator carries no settings to split on")
        return split_operator(self.matrix, self.settings.n[qubit - 1], self.settings.n_prime[qubit - 1], qubit)

    def spectrum(self) -> SpectralData:
        """Stored spectral data, or numerically extracted from the settings."""
        if self.spectral is not None:
            return self.spectral
        return extract_spectrum(self)

    def with_spectrum(self) -> "BellOperator":
        return replace(self, spectral=self.spectrum())


class BellValue(NamedTuple):
    beta: float
    trace: float
    lv_bound: float


def _pauli_component(matrix: np.ndarray, qubit: int, pauli: np.ndarray) -> np.ndarray:
    """``tr_q[(P (x) 1) B] / 2`` for a Pauli ``P`` on ``qubit``."""
    n = int(np.log2(matrix.shape[0]))
    t = matrix.reshape((2,) * (2 * n))
    t = np.tensordot(pauli, t, axes=([1, 0], [qubit - 1, n + qubit - 1]))
    d = 2 ** (n - 1)
    return t.reshape(d, d) / 2


def split_operator(matrix: np.ndarray, n_vec, n_prime_vec, qubit: int) -> Split:
    """Decompose a correlation operator as ``sigma(n) C1 + sigma(n') C2`` on ``qubit``."""
    n_vec = np.asarray(n_vec, dtype=float)
    n_prime_vec = np.asarray(n_prime_vec, dtype=float)
    comps = np.stack([_pauli_component(matrix, qubit, p) for p in (PAULI_X, PAULI_Y, PAULI_Z)])
    a = np.stack([n_vec, n_prime_vec], axis=1)  # 3x2
    if np.linalg.norm(np.cross(n_vec, n_prime_vec)) < 1e-12:
        c1 = np.tensordot(n_vec, comps, axes=1)
        c2 = np.zeros_like(c1)
    else:
        coef = np.linalg.pinv(a)  # 2x3
        c1 = np.tensordot(coef[0], comps, axes=1)
        c2 = np.tensordot(coef[1], comps, axes=1)
    rebuilt = place_on_qubit(sigma(n_vec), c1, qubit) + place_on_qubit(sigma(n_prime_vec), c2, qubit)
    if np.max(np.abs(rebuilt - matrix)) > 1e-9:
        raise ContractViolation("operator is not of the two-setting form on this qubit")
    return Split(qubit, n_vec, n_prime_vec, c1, c2)


def place_on_qubit(single: np.ndarray, rest: np.ndarray, qubit: int) -> np.ndarray:
    """Operator acting as ``single`` on ``qubit`` and ``rest`` on the other qubits."""
    n = int(np.log2(rest.shape[0])) + 1
    full = kron(single, rest).reshape((2,) * (2 * n))
    # single sits on axis 0 (row) and n (col); move it to position qubit-1.
    full = np.moveaxis(full, [0, n], [qubit - 1, n + qubit - 1])
    return full.reshape(2**n, 2**n)


def reassemble(split: Split) -> np.ndarray:
    return place_on_qubit(sigma(split.n), split.c1, split.qubit) + place_on_qubit(
        sigma(split.n_prime), split.c2, split.qubit
    )


def mbk_matrices(settings: MeasurementSettings) -> tuple[np.ndarray, np.ndarray]:
    """``(M_N, M'_N)`` from the MBK recursion; qubit ``i`` is tensor factor ``i``."""
    levels = _mbk_levels(settings)
    return levels[-1]


def _mbk_levels(settings: MeasurementSettings) -> list[tuple[np.ndarray, np.ndarray]]:
    return mbk_levels_from_sigmas([sigma(v) for v in settings.n], [sigma(v) for v in settings.n_prime])


def mbk_levels_from_sigmas(s: Sequence[np.ndarray], sp: Sequence[np.ndarray]) -> list[tuple[np.ndarray, np.ndarray]]:
    """MBK recursion on arbitrary single-qubit operators (no unit-vector check).

    ``M_N`` is linear in each pair ``(s[i], sp[i])``, which the optimizer uses
    to read off one qubit's coefficients.
    """
    m, mp = s[0], sp[0]
    levels = [(m, mp)]
    for i in range(1, len(s)):
        plus, minus = s[i] + sp[i], s[i] - sp[i]
        m, mp = 0.5 * (kron(m, plus) + kron(mp, minus)), 0.5 * (kron(mp, plus) - kron(m, minus))
        levels.append((m, mp))
    return levels


def _last_split(settings: MeasurementSettings, b_plus: np.ndarray, b_minus: np.ndarray) -> Split:
    n = settings.n_qubits
    return Split(n, settings.n[-1], settings.n_prime[-1], (b_plus + b_minus) / 2, (b_plus - b_minus) / 2)


def mbk_operator(settings: MeasurementSettings) -> BellOperator:
    levels = _mbk_levels(settings)
    m, _ = levels[-1]
    split = None
    if settings.n_qubits >= 2:
        split = _last_split(settings, *levels[-2])
    return BellOperator(settings.n_qubits, m, 1.0, MBK, settings=settings, split=split)


def mbk_prime(settings: MeasurementSettings) -> BellOperator:
    """The MBK operator with every ``n_i`` and ``n'_i`` interchanged."""
    return replace(mbk_operator(settings.swapped()), family=MBK_PRIME, settings=settings.swapped())


def chsh_operator(settings: MeasurementSettings) -> BellOperator:
    if settings.n_qubits != 2:
        raise ContractViolation("CHSH needs exactly two qubits")
    return replace(mbk_operator(settings), family=CHSH)


def uffink_operator(settings: MeasurementSettings, gamma: float, family: str = UFFINK) -> BellOperator:
    """``cos(gamma) M_N + sin(gamma) M'_N`` with local-variable bound sqrt(2)."""
    levels = _mbk_levels(settings)
    m, mp = levels[-1]
    c, s = np.cos(gamma), np.sin(gamma)
    split = None
    if settings.n_qubits >= 2:
        lm, lmp = levels[-2]
        # U_{N-1,gamma} and U_{N-1,gamma+pi/2}
        split = _last_split(settings, c * lm + s * lmp, c * lmp - s * lm)
    return BellOperator(
        settings.n_qubits, c * m + s * mp, SQRT2, family, settings=settings, gamma=float(gamma), split=split
    )


def svetlichny_gamma(n_qubits: int) -> float:
    return 0.0 if n_qubits % 2 == 0 else np.pi / 4


def svetlichny_operator(settings: MeasurementSettings) -> BellOperator:
    return uffink_operator(settings, svetlichny_gamma(settings.n_qubits), family=SVETLICHNY)


def _rho_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)


def expectation(rho, op: np.ndarray) -> float:
    m = _rho_matrix(rho)
    val = np.einsum("ij,ji->", m, op)
    if abs(val.imag) > 1e-10 * max(1.0, np.abs(op).max()):
        raise ContractViolation("expectation value has an imaginary part")
    return float(val.real)


def violation(rho, b: BellOperator) -> BellValue:
    m = _rho_matrix(rho)
    if m.shape != b.matrix.shape:
        raise ContractViolation(f"state dimension {m.shape[0]} does not match operator {b.matrix.shape[0]}")
    t = expectation(m, b.matrix)
    return BellValue(t / b.lv_bound, t, b.lv_bound)


def uffink_value(rho, settings: MeasurementSettings) -> float:
    """``sqrt(tr(rho M)^2 + tr(rho M')^2)``; its local-variable bound is sqrt(2)."""
    m, mp = mbk_matrices(settings)
    return float(np.hypot(expectation(rho, m), expectation(rho, mp)))


def uffink_best_gamma(rho, settings: MeasurementSettings) -> float:
    m, mp = mbk_matrices(settings)
    return float(np.mod(np.arctan2(expectation(rho, mp), expectation(rho, m)), 2 * np.pi))


# --- spectral form -------------------------------------------------------


def wwzb_from_spectrum(
    n_qubits: int, b: Sequence[float], theta: Sequence[float], local_basis: Sequence[np.ndarray] | None = None
) -> BellOperator:
    """Assemble ``sum_k b_k (Q_k^+ - Q_k^-)`` in the given local basis."""
    half = 2 ** (n_qubits - 1)
    b = np.asarray(b, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if b.shape != (half,) or theta.shape != (half,):
        raise ContractViolation(f"need {half} values of b_k and theta_k")
    if np.any(b < 0):
        raise NotWWZBError("b_k must be nonnegative")
    if np.sum(b**2) > half + 1e-9:
        raise NotWWZBError(f"sum b_k^2 = {np.sum(b ** 2):.12g} exceeds 2^(N-1) = {half}")
    if local_basis is None:
        local_basis = tuple(PAULI_I for _ in range(n_qubits))
    local_basis = tuple(np.asarray(u, dtype=complex) for u in local_basis)
    core = x_state(n_qubits, b, -b, theta)
    v = kron_all(local_basis)
    mat = v @ core @ v.conj().T
    return BellOperator(n_qubits, mat, 1.0, WWZB, spectral=SpectralData(b, np.mod(theta, 2 * np.pi), local_basis))


def theta_basis_vector(spectral: SpectralData, k: int, sigma_: int) -> np.ndarray:
    """``V |theta_k^sigma>`` for the operator's local basis ``V``."""
    from .states import make_theta_ghz

    n = len(spectral.local_basis)
    v = make_theta_ghz(n, k, spectral.theta[k], sigma_)
    for q, u in enumerate(spectral.local_basis):
        t = v.reshape((2,) * n)
        t = np.moveaxis(np.tensordot(u, t, axes=([1], [q])), 0, q)
        v = t.reshape(-1)
    return v


def su2_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """``exp(-i angle/2 axis.sigma)``; conjugation rotates Bloch vectors by ``angle`` about ``axis``."""
    return np.cos(angle / 2) * PAULI_I - 1j * np.sin(angle / 2) * sigma(axis)


def planarizing_unitary(n_vec, n_prime_vec) -> np.ndarray:
    """``u`` with ``u sigma(n) u^dagger`` and ``u sigma(n') u^dagger`` in the xy-plane."""
    n_vec = np.asarray(n_vec, dtype=float)
    normal = np.cross(n_vec, np.asarray(n_prime_vec, dtype=float))
    if np.linalg.norm(normal) < 1e-12:
        # parallel pair: any plane containing n works
        trial = np.array([0.0, 0.0, 1.0]) if abs(n_vec[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
        normal = np.cross(n_vec, trial)
    normal = normal / np.linalg.norm(normal)
    z = np.array([0.0, 0.0, 1.0])
    axis = np.cross(normal, z)
    s = np.linalg.norm(axis)
    if s < 1e-14:
        return PAULI_I.copy() if normal[2] > 0 else su2_rotation(np.array([1.0, 0, 0]), np.pi)
    return su2_rotation(axis / s, float(np.arctan2(s, normal @ z)))


def extract_spectrum(op: BellOperator) -> SpectralData:
    """Numerical ``{b_k, theta_k}`` and local basis of a two-setting correlation operator.

    Each qubit is rotated so that its two directions lie in the xy-plane; the
    rotated operator then only couples ``|k>`` with ``|kbar>`` and
    ``b_k e^{i theta_k}`` is its ``(k, kbar)`` entry.  The gauge matches
    ``|theta_k^+> = (e^{i theta}|k> + |kbar>)/sqrt(2)`` as eigenvector of ``+b_k``.
    """
    if op.settings is None:
        raise ContractViolation("spectral extraction needs the measurement settings")
    n = op.n_qubits
    us = [planarizing_unitary(a, b) for a, b in zip(op.settings.n, op.settings.n_prime)]
    u = kron_all(us)
    planar = u @ op.matrix @ u.conj().T
    d = 2**n
    idx = np.arange(d)
    anti = planar[idx, d - 1 - idx]
    rest = planar.copy()
    rest[idx, d - 1 - idx] = 0
    scale = max(1.0, float(np.abs(op.matrix).max()))
    if np.abs(rest).max() > 1e-9 * scale:
        raise ContractViolation("operator is not X-shaped in its planar frame")
    half = d // 2
    coh = anti[:half]
    b = np.abs(coh)
    theta = np.where(b > 1e-12 * scale, np.mod(np.angle(coh), 2 * np.pi), 0.0)
    return SpectralData(b, theta, tuple(x.conj().T for x in us))


def spectrum_matches_eigenvalues(op: BellOperator, spectral: SpectralData | None = None, tol: float = 1e-8) -> bool:
    """Eigenvalues of the matrix equal the multiset ``{+-b_k}``."""
    spectral = op.spectrum() if spectral is None else spectral
    ev = np.sort(hermitian_eigvals(op.matrix))
    expected = np.sort(np.concatenate([spectral.b, -spectral.b]))
    return bool(np.max(np.abs(ev - expected)) <= tol)


def pair_eigenvalues(eigenvalues: np.ndarray, rel_tol: float = 1e-7) -> np.ndarray:
    """Pair ``+lambda`` with ``-lambda``; return the nonnegative members.

    Raises if the spectrum is not symmetric within ``rel_tol * max|lambda|``.
    """
    ev = np.sort(np.asarray(eigenvalues, dtype=float))
    scale = max(np.abs(ev).max(), 1e-300)
    pos = ev[::-1][: len(ev) // 2]
    neg = ev[: len(ev) // 2]
    if np.any(np.abs(pos + neg) >= rel_tol * scale + 1e-15):
        raise ContractViolation("spectrum is not symmetric under sign flip")
    return np.sort(pos)


# --- three-qubit closed forms ---------------------------------------------


def _k_signs(k: int) -> np.ndarray:
    """``(k_1, k_2, k_3)`` as signs: ``k_1 = +1``, ``k_j = (-1)^bit_j``."""
    return np.array([1.0, (-1.0) ** ((k >> 1) & 1), (-1.0) ** (k & 1)])


def f_k(alpha: np.ndarray, alpha_prime: np.ndarray, k: int) -> complex:
    s = _k_signs(k)
    a, ap = s * np.asarray(alpha), s * np.asarray(alpha_prime)
    return complex(
        np.exp(1j * (ap[0] + a[1] + a[2]))
        + np.exp(1j * (a[0] + ap[1] + a[2]))
        + np.exp(1j * (a[0] + a[1] + ap[2]))
        - np.exp(1j * (ap[0] + ap[1] + ap[2]))
    )


def b3_squared(delta: np.ndarray) -> np.ndarray:
    """``b_k^2`` for ``k = 0..3``; ``delta`` may carry leading batch axes (shape ``(..., 3)``)."""
    delta = np.asarray(delta, dtype=float)
    c = np.prod(np.cos(delta), axis=-1)
    s = np.sin(delta)
    out = np.empty(delta.shape[:-1] + (4,))
    for k in range(4):
        ks = _k_signs(k) * s
        out[..., k] = np.hypot(c, np.prod(ks, axis=-1) + np.sum(ks, axis=-1))
    return out


def b3_moduli(delta: np.ndarray) -> np.ndarray:
    """``b_k = [(prod cos d_i)^2 + (prod k_i sin d_i + sum k_i sin d_i)^2]^(1/4)``."""
    return np.sqrt(b3_squared(delta))


def m3_closed_form(settings: MeasurementSettings) -> SpectralData:
    """Closed-form ``{b_k, theta_k}`` of ``M_3`` for planar settings.

    ``<k|M_3|kbar> = conj(f_k)/2``, so ``theta_k = -arg f_k``.
    """
    if settings.n_qubits != 3:
        raise ContractViolation("closed form is for three qubits")
    settings._require_planar()
    a, ap = settings.alpha, settings.alpha_prime
    b = b3_moduli(a - ap)
    theta = np.zeros(4)
    for k in range(4):
        if b[k] > 1e-12:
            theta[k] = np.mod(-np.angle(f_k(a, ap, k)), 2 * np.pi)
    return SpectralData(b, theta, tuple(PAULI_I for _ in range(3)))


def u3_eigenvalues(settings: MeasurementSettings, gamma: float) -> np.ndarray:
    """Moduli ``u_k`` of the eigenvalues of ``U_{3,gamma}``: ``u_k^2 = b_k^2 + sin(2 gamma) prod cos d_i``."""
    if settings.n_qubits != 3:
        raise ContractViolation("closed form is for three qubits")
    delta = settings.delta
    return u3_from_delta(delta, gamma)


def u3_from_delta(delta, gamma: float) -> np.ndarray:
    delta = np.asarray(delta, dtype=float)
    u2 = b3_squared(delta) + np.sin(2 * gamma) * np.prod(np.cos(delta), axis=-1)[..., None]
    return np.sqrt(np.maximum(u2, 0.0))


def m3_planar_coherences(alpha: np.ndarray, alpha_prime: np.ndarray) -> np.ndarray:
    """``<k|M_3|kbar>`` for ``k = 0..3``."""
    return np.array([np.conj(f_k(alpha, alpha_prime, k)) / 2 for k in range(4)])


def m3_planar_expectation(rho_matrix: np.ndarray, alpha, alpha_prime) -> float:
    """``tr(rho M_3)`` for planar settings without building ``M_3``."""
    coh = m3_planar_coherences(np.asarray(alpha), np.asarray(alpha_prime))
    ks = np.arange(4)
    return float(2 * np.real(np.sum(rho_matrix[7 - ks, ks] * coh)))
