"""Dense complex linear algebra on multi-qubit operators.

Basis convention used throughout the package: in the computational-basis
index ``k`` of an ``N``-qubit vector, qubit 1 is the most significant bit
and qubit ``N`` the least significant one, so ``|1> = |0...01>``.  Qubits are
labelled ``1..N`` in every public function.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-10
NEGATIVE_TOL = 1e-9
EMPTY_BRANCH_TOL = 1e-12

_DEFAULT_MAX_QUBITS = 12
_max_qubits: int | None = None

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class DimensionCapError(ValueError):
    """Raised when an operator would exceed the configured qubit cap."""


class ContractViolation(ValueError):
    """Raised when an input breaks a documented precondition."""


def max_qubits() -> int:
    """Current qubit cap; ``MAX_QUBITS`` in the environment overrides the default."""
    if _max_qubits is not None:
        return _max_qubits
    env = os.environ.get("MAX_QUBITS")
    if env:
        return int(env)
    return _DEFAULT_MAX_QUBITS


def set_max_qubits(n: int | None) -> None:
    """Set the qubit cap for this process (``None`` restores the default)."""
    global _max_qubits
    if n is not None and n < 1:
        raise ValueError("qubit cap must be positive")
    _max_qubits = n


def check_dim(dim: int) -> None:
    if dim > 2 ** max_qubits():
        raise DimensionCapError(f"dimension {dim} exceeds cap 2^{max_qubits()}")


def n_qubits_of(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if 2**n != dim:
        raise ContractViolation(f"dimension {dim} is not a power of two")
    return n


def sigma(direction: Sequence[float]) -> np.ndarray:
    """``n . sigma`` for a real 3-vector ``n``."""
    x, y, z = direction
    return x * PAULI_X + y * PAULI_Y + z * PAULI_Z


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    return bool(np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))) <= tol)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the dimension cap enforced."""
    a, b = np.asarray(a), np.asarray(b)
    check_dim(a.shape[0] * b.shape[0])
    if a.ndim != 2 or b.ndim != 2:
        return np.kron(a, b)
    # broadcasting form: np.kron's generic shape handling dominates for small operands
    (ra, ca), (rb, cb) = a.shape, b.shape
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(ra * rb, ca * cb)


def kron_all(factors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for f in factors:
        out = kron(out, f)
    return out


def hermitian_eig(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in ascending order and orthonormal eigenvector columns."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractViolation("expected a square matrix")
    if not is_hermitian(a):
        raise ContractViolation("matrix is not Hermitian within 1e-10")
    return np.linalg.eigh(a)


def hermitian_eigvals(a: np.ndarray) -> np.ndarray:
    if not is_hermitian(a):
        raise ContractViolation("matrix is not Hermitian within 1e-10")
    return np.linalg.eigvalsh(a)


def classify_eigenvalue(x: float) -> str:
    """``negative`` below -1e-9, ``indeterminate`` in [-1e-9, 0), else ``nonnegative``."""
    if x < -NEGATIVE_TOL:
        return "negative"
    if x < 0:
        return "indeterminate"
    return "nonnegative"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated ``N``-qubit density matrix.  The array is made read-only."""

    n_qubits: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        dim = 2**self.n_qubits
        if self.n_qubits < 1 or m.shape != (dim, dim):
            raise ContractViolation(f"expected a {dim}x{dim} matrix for {self.n_qubits} qubits")
        check_dim(dim)
        if not is_hermitian(m, 1e-12):
            raise ContractViolation("density matrix is not Hermitian within 1e-12")
        if abs(np.trace(m) - 1) > 1e-9:
            raise ContractViolation(f"trace {np.trace(m).real:.12g} differs from 1")
        if np.linalg.eigvalsh(m)[0] < -1e-9:
            raise ContractViolation("density matrix has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "DensityMatrix":
        """Wrap a numerically Hermitian matrix, removing round-off asymmetry."""
        m = np.asarray(m, dtype=complex)
        return cls(n_qubits_of(m.shape[0]), (m + m.conj().T) / 2)

    @classmethod
    def from_vector(cls, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls.from_matrix(np.outer(psi, psi.conj()))

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def expectation(self, op: np.ndarray) -> complex:
        return complex(np.einsum("ij,ji->", self.matrix, op))

    def purity(self) -> float:
        return float(np.real(np.einsum("ij,ji->", self.matrix, self.matrix)))


@dataclass(frozen=True)
class QubitSubset:
    """A set of qubit labels in ``1..n_qubits``."""

    n_qubits: int
    members: frozenset[int]

    def __init__(self, n_qubits: int, members):
        members = frozenset(int(q) for q in members)
        if not members:
            raise ContractViolation("qubit subset must be nonempty")
        if min(members) < 1 or max(members) > n_qubits:
            raise ContractViolation(f"qubit labels must lie in 1..{n_qubits}")
        object.__setattr__(self, "n_qubits", n_qubits)
        object.__setattr__(self, "members", members)

    @property
    def mask(self) -> int:
        """Bitmask over basis indices (qubit 1 is the most significant bit)."""
        return sum(1 << (self.n_qubits - q) for q in self.members)

    @property
    def is_proper(self) -> bool:
        return len(self.members) < self.n_qubits

    def complement(self) -> "QubitSubset":
        return QubitSubset(self.n_qubits, set(range(1, self.n_qubits + 1)) - self.members)

    def sorted(self) -> list[int]:
        return sorted(self.members)

    def __str__(self) -> str:
        return "{" + ",".join(str(q) for q in self.sorted()) + "}"


def bipartitions(n_qubits: int) -> list[QubitSubset]:
    """All ``2^(N-1) - 1`` bipartition sides that exclude qubit 1, ordered by mask."""
    out = []
    for mask in range(1, 2 ** (n_qubits - 1)):
        members = [q for q in range(2, n_qubits + 1) if mask >> (n_qubits - q) & 1]
        out.append(QubitSubset(n_qubits, members))
    return sorted(out, key=lambda a: a.mask)


def _matrix_and_n(rho) -> tuple[np.ndarray, int]:
    if isinstance(rho, DensityMatrix):
        return rho.matrix, rho.n_qubits
    m = np.asarray(rho, dtype=complex)
    return m, n_qubits_of(m.shape[0])


def partial_transpose(rho, subset: QubitSubset) -> np.ndarray:
    """Transpose the tensor factors of the qubits in ``subset``."""
    m, n = _matrix_and_n(rho)
    if subset.n_qubits != n:
        raise ContractViolation(f"subset is for {subset.n_qubits} qubits, state has {n}")
    t = m.reshape((2,) * (2 * n))
    axes = list(range(2 * n))
    for q in subset.members:
        axes[q - 1], axes[n + q - 1] = axes[n + q - 1], axes[q - 1]
    return t.transpose(axes).reshape(m.shape)


def min_pt_eigenvalue(rho, subset: QubitSubset) -> float:
    return float(np.linalg.eigvalsh(partial_transpose(rho, subset))[0])


def partial_trace(rho, keep: Sequence[int]) -> np.ndarray:
    """Reduced matrix on the qubits in ``keep`` (kept in ascending label order)."""
    m, n = _matrix_and_n(rho)
    keep = sorted(keep)
    drop = [q for q in range(1, n + 1) if q not in keep]
    t = m.reshape((2,) * (2 * n))
    for q in sorted(drop, reverse=True):
        nq = t.ndim // 2
        t = np.trace(t, axis1=q - 1, axis2=nq + q - 1)
    d = 2 ** len(keep)
    return t.reshape(d, d)


def bloch_eigenvector(direction: Sequence[float], outcome: int) -> np.ndarray:
    """Eigenvector of ``direction . sigma`` with eigenvalue ``outcome``."""
    w, v = np.linalg.eigh(sigma(direction))
    return v[:, 1] if outcome > 0 else v[:, 0]


class Projection(NamedTuple):
    """Outcome of a local projective measurement.

    ``state`` is ``None`` for an empty branch (probability below 1e-12).
    """

    state: DensityMatrix | None
    probability: float

    @property
    def empty(self) -> bool:
        return self.state is None


def project_qubit(rho: DensityMatrix, qubit: int, direction: Sequence[float], outcome: int) -> Projection:
    """Measure ``direction . sigma`` on ``qubit`` and keep the ``outcome`` branch."""
    n = rho.n_qubits
    if n < 2:
        raise ContractViolation("projection needs at least two qubits")
    if not 1 <= qubit <= n:
        raise ContractViolation(f"qubit {qubit} out of range 1..{n}")
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1) > 1e-12:
        raise ContractViolation("measurement direction must be a unit vector")
    if outcome not in (1, -1):
        raise ContractViolation("outcome must be +1 or -1")
    v = bloch_eigenvector(direction, outcome)
    t = rho.matrix.reshape((2,) * (2 * n))
    # <v| on the row index of the qubit, |v> on its column index.
    t = np.tensordot(v.conj(), t, axes=([0], [qubit - 1]))
    t = np.tensordot(t, v, axes=([n - 1 + qubit - 1], [0]))
    d = 2 ** (n - 1)
    block = t.reshape(d, d)
    p = float(np.real(np.trace(block)))
    if p < EMPTY_BRANCH_TOL:
        return Projection(None, max(p, 0.0))
    return Projection(DensityMatrix.from_matrix(block / p), p)


def apply_local_unitaries(rho: DensityMatrix, us: Sequence[np.ndarray]) -> DensityMatrix:
    """Return ``(u_1 x ... x u_N) rho (u_1 x ... x u_N)^dagger``."""
    if len(us) != rho.n_qubits:
        raise ContractViolation(f"need {rho.n_qubits} local unitaries, got {len(us)}")
    for u in us:
        if np.shape(u) != (2, 2) or not is_unitary(np.asarray(u, dtype=complex)):
            raise ContractViolation("local factor is not a 2x2 unitary within 1e-10")
    n = rho.n_qubits
    t = rho.matrix.reshape((2,) * (2 * n))
    for q, u in enumerate(us):
        u = np.asarray(u, dtype=complex)
        t = np.moveaxis(np.tensordot(u, t, axes=([1], [q])), 0, q)
        t = np.moveaxis(np.tensordot(u.conj(), t, axes=([1], [n + q])), 0, n + q)
    return DensityMatrix.from_matrix(t.reshape(rho.matrix.shape))
