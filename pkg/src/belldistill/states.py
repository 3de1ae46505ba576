"""Constructors for the state families used throughout the package."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qlinalg import ContractViolation, DensityMatrix, check_dim, kron


def kbar(k: int, n_qubits: int) -> int:
    """Index of the bitwise complement of ``|k>``."""
    if not 0 <= k < 2**n_qubits:
        raise ContractViolation(f"basis index {k} out of range for {n_qubits} qubits")
    return 2**n_qubits - 1 - k


def make_theta_ghz(n_qubits: int, k: int, theta: float = 0.0, sigma: int = 1) -> np.ndarray:
    """The generalized GHZ vector ``(e^{i theta}|k> + sigma |kbar>)/sqrt(2)``."""
    if not 0 <= k < 2 ** (n_qubits - 1):
        raise ContractViolation(f"pair index {k} out of range [0, {2 ** (n_qubits - 1)})")
    if sigma not in (1, -1):
        raise ContractViolation("sigma must be +1 or -1")
    check_dim(2**n_qubits)
    v = np.zeros(2**n_qubits, dtype=complex)
    v[k] = np.exp(1j * theta) / np.sqrt(2)
    v[kbar(k, n_qubits)] = sigma / np.sqrt(2)
    return v


def ghz_vector(n_qubits: int) -> np.ndarray:
    return make_theta_ghz(n_qubits, 0)


def ghz(n_qubits: int) -> DensityMatrix:
    return DensityMatrix.from_vector(ghz_vector(n_qubits))


def maximally_mixed(n_qubits: int) -> DensityMatrix:
    d = 2**n_qubits
    check_dim(d)
    return DensityMatrix(n_qubits, np.eye(d, dtype=complex) / d)


def basis_state(bits: str) -> DensityMatrix:
    """Product state from a bit string such as ``"010"``."""
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1
    return DensityMatrix(len(bits), np.outer(v, v))


@dataclass(frozen=True, eq=False)
class GhzWeights:
    """Weights ``mu_k^sigma`` of a state diagonal in a GHZ-type basis.

    ``plus[k]`` and ``minus[k]`` belong to the pair ``(k, kbar)`` with
    ``k < 2^(N-1)``.
    """

    n_qubits: int
    plus: np.ndarray = field(repr=False)
    minus: np.ndarray = field(repr=False)

    def __post_init__(self):
        half = 2 ** (self.n_qubits - 1)
        plus = np.array(self.plus, dtype=float)
        minus = np.array(self.minus, dtype=float)
        if plus.shape != (half,) or minus.shape != (half,):
            raise ContractViolation(f"expected {half} weights per sign")
        if min(plus.min(), minus.min()) < -1e-10:
            raise ContractViolation("GHZ weights must be nonnegative")
        if abs(plus.sum() + minus.sum() - 1) > 1e-9:
            raise ContractViolation("GHZ weights must sum to 1")
        plus.setflags(write=False)
        minus.setflags(write=False)
        object.__setattr__(self, "plus", plus)
        object.__setattr__(self, "minus", minus)

    def weight(self, k: int, sigma: int) -> float:
        return float(self.plus[k] if sigma > 0 else self.minus[k])

    def as_list(self) -> list[tuple[int, int, float]]:
        return [(k, s, self.weight(k, s)) for k in range(len(self.plus)) for s in (1, -1)]


def x_state(n_qubits: int, plus, minus, thetas=None) -> np.ndarray:
    """Product-basis matrix of ``sum mu_k^s |theta_k^s><theta_k^s|``.

    Only the main diagonal and the anti-diagonal are populated.
    """
    d = 2**n_qubits
    check_dim(d)
    half = d // 2
    thetas = np.zeros(half) if thetas is None else np.asarray(thetas, dtype=float)
    m = np.zeros((d, d), dtype=complex)
    for k in range(half):
        kb = d - 1 - k
        diag = (plus[k] + minus[k]) / 2
        coh = (plus[k] - minus[k]) / 2 * np.exp(1j * thetas[k])
        m[k, k] = m[kb, kb] = diag
        m[k, kb] = coh
        m[kb, k] = np.conj(coh)
    return m


def make_ghz_diagonal(weights: GhzWeights) -> DensityMatrix:
    """``sum_k,s mu_k^s P_k^s`` with zero-phase GHZ projectors."""
    return DensityMatrix(weights.n_qubits, x_state(weights.n_qubits, weights.plus, weights.minus))


def make_rho_r(n_qubits: int, r: float) -> DensityMatrix:
    """GHZ weight ``r``, the rest spread evenly over the other ``P_k^+``."""
    if n_qubits < 2:
        raise ContractViolation("rho(r) needs at least two qubits")
    if not 0 <= r <= 1:
        raise ContractViolation("r must lie in [0, 1]")
    half = 2 ** (n_qubits - 1)
    plus = np.full(half, (1 - r) / (half - 1))
    plus[0] = r
    return make_ghz_diagonal(GhzWeights(n_qubits, plus, np.zeros(half)))


def w_vector() -> np.ndarray:
    v = np.zeros(8, dtype=complex)
    v[[3, 5, 6]] = 1 / np.sqrt(3)
    return v


def make_w_mixture(alpha: float) -> DensityMatrix:
    """Three-qubit pure state ``cos(alpha)|000> + sin(alpha)|W>``."""
    if not -1e-12 <= alpha <= np.pi / 2 + 1e-12:
        raise ContractViolation("alpha must lie in [0, pi/2]")
    v = np.sin(alpha) * w_vector()
    v[0] += np.cos(alpha)
    return DensityMatrix.from_vector(v)


def make_padded_ghz(n_qubits: int) -> DensityMatrix:
    """``|GHZ_{N-1}><GHZ_{N-1}| x |0><0|``."""
    if n_qubits < 3:
        raise ContractViolation("padded GHZ needs at least three qubits")
    zero = np.array([[1, 0], [0, 0]], dtype=complex)
    return DensityMatrix(n_qubits, kron(ghz(n_qubits - 1).matrix, zero))


def make_noisy_ghz(n_qubits: int, visibility: float) -> DensityMatrix:
    """``v |GHZ><GHZ| + (1 - v) I / 2^N``."""
    d = 2**n_qubits
    m = visibility * ghz(n_qubits).matrix + (1 - visibility) * np.eye(d) / d
    return DensityMatrix.from_matrix(m)


def random_density(seed: int, n_qubits: int, rank: int | None = None) -> DensityMatrix:
    """Random density matrix of the given rank.

    Algorithm: ``numpy.random.default_rng(seed)`` (PCG64) draws a
    ``2^N x rank`` matrix ``G`` whose real and imaginary parts are standard
    normal (real parts first, then imaginary parts, row-major); the result is
    ``G G^dagger / tr(G G^dagger)``.  ``rank=None`` means full rank.
    """
    d = 2**n_qubits
    check_dim(d)
    rank = d if rank is None else rank
    if not 1 <= rank <= d:
        raise ContractViolation(f"rank must lie in 1..{d}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    m = g @ g.conj().T
    return DensityMatrix.from_matrix(m / np.trace(m).real)


def random_ghz_weights(rng: np.random.Generator, n_qubits: int) -> GhzWeights:
    half = 2 ** (n_qubits - 1)
    w = rng.dirichlet(np.ones(2 * half))
    return GhzWeights(n_qubits, w[:half], w[half:])
