"""Distillability analysis driven by Bell violations.

The routes here follow the constructive chain: theta-basis weights locate a
negative 2x2 block of the partially transposed theta-diagonal state, local
phase erasure plus GHZ depolarization make the block physically reachable,
and a local projection leaves a two-qubit NPT state.  Single
qubit projections trade a factor sqrt(2) of violation for one fewer party.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .bell import BellOperator, extract_spectrum, theta_basis_vector, violation
from .qlinalg import (
    NEGATIVE_TOL,
    PAULI_I,
    PAULI_X,
    PAULI_Z,
    ContractViolation,
    DensityMatrix,
    QubitSubset,
    apply_local_unitaries,
    bipartitions,
    kron_all,
    min_pt_eigenvalue,
    partial_trace,
    project_qubit,
)
from .states import GhzWeights, make_ghz_diagonal, x_state

BLOCK_TOL = 1e-12


class PreconditionError(ValueError):
    """The state does not meet the violation level an analysis requires."""


class FalsificationError(RuntimeError):
    """A proven implication failed on a concrete instance.

    ``certificate`` holds the state, operator settings and the name of the
    failed invariant; :mod:`belldistill.serialize` writes it to disk.
    """

    def __init__(self, invariant: str, message: str, certificate: dict):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant
        self.certificate = certificate


def _certificate(invariant: str, rho, b: BellOperator | None, **details) -> dict:
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    cert = {"invariant": invariant, "state": m, "details": details}
    if b is not None:
        cert["operator"] = {
            "family": b.family,
            "lv_bound": b.lv_bound,
            "gamma": b.gamma,
            "settings": None if b.settings is None else b.settings.to_dict(),
        }
    return cert


@dataclass(frozen=True, eq=False)
class ThetaWeights(GhzWeights):
    """``lambda_k^sigma = tr(rho Q_k^sigma)`` in an operator's theta basis."""

    theta: np.ndarray = field(default=None, repr=False)
    local_basis: tuple = field(default=(), repr=False)

    def diagonal_state(self) -> np.ndarray:
        """The theta-diagonal analysis state ``rho_D`` as a matrix."""
        core = x_state(self.n_qubits, self.plus, self.minus, self.theta)
        if not self.local_basis:
            return core
        v = kron_all(self.local_basis)
        return v @ core @ v.conj().T


class BlockVerdict(NamedTuple):
    k: int
    k_prime: int
    partition: QubitSubset
    determinant: float
    negative: bool


@dataclass
class DistillReport:
    n_qubits: int
    beta: float
    p: int | None = None
    max_group_size: int | None = None
    fully_distillable: bool = False
    security_ok: bool = False
    bipartite_evidence: BlockVerdict | None = None
    npt_partitions: list = field(default_factory=list)
    protocol_trace: list = field(default_factory=list)
    projected_state: np.ndarray | None = None
    projected_min_pt: float | None = None


class Classification(NamedTuple):
    p: int
    max_group_size: int
    fully_distillable: bool
    security_ok: bool


# --- weights ---------------------------------------------------------------


def theta_weights(rho: DensityMatrix, b: BellOperator) -> ThetaWeights:
    spectral = b.spectrum()
    half = 2 ** (rho.n_qubits - 1)
    plus, minus = np.empty(half), np.empty(half)
    for k in range(half):
        for s, out in ((1, plus), (-1, minus)):
            v = theta_basis_vector(spectral, k, s)
            out[k] = np.real(v.conj() @ rho.matrix @ v)
    plus = np.where(np.abs(plus) < 1e-15, 0.0, plus)
    minus = np.where(np.abs(minus) < 1e-15, 0.0, minus)
    return ThetaWeights(rho.n_qubits, plus, minus, np.array(spectral.theta), tuple(spectral.local_basis))


def ghz_depolarize(rho: DensityMatrix) -> GhzWeights:
    """Weights ``mu_k^sigma = tr(rho P_k^sigma)`` on the zero-phase GHZ basis."""
    m = rho.matrix
    d = m.shape[0]
    k = np.arange(d // 2)
    kb = d - 1 - k
    diag = np.real(m[k, k] + m[kb, kb]) / 2
    coh = np.real(m[k, kb])
    return GhzWeights(rho.n_qubits, np.maximum(diag + coh, 0.0), np.maximum(diag - coh, 0.0))


# --- block analysis -------------------------------------------------------


def block_scan(weights: GhzWeights) -> list[BlockVerdict]:
    """Determinants of every 2x2 block of the partially transposed X-state.

    Under ``T_A`` the coherence of pair ``K'`` lands in the block of pair
    ``K = flip_A(K')``; the block determinant is
    ``((l_K^+ + l_K^-)/2)^2 - ((l_K'^+ - l_K'^-)/2)^2``.
    """
    n = weights.n_qubits
    half = 2 ** (n - 1)
    diag = (weights.plus + weights.minus) / 2
    coh = (weights.plus - weights.minus) / 2
    out = []
    for part in bipartitions(n):
        mask = part.mask
        for kp in range(half):
            f = kp ^ mask
            k = f if f < half else 2 * half - 1 - f
            det = float(diag[k] ** 2 - coh[kp] ** 2)
            out.append(BlockVerdict(k, kp, part, det, det < -BLOCK_TOL))
    return out


def select_block(verdicts: list[BlockVerdict]) -> BlockVerdict | None:
    """Most negative block; ties broken by (partition mask, K, K')."""
    neg = [v for v in verdicts if v.negative]
    if not neg:
        return None
    return min(neg, key=lambda v: (v.determinant, v.partition.mask, v.k, v.k_prime))


def npt_partitions(rho) -> list[tuple[QubitSubset, float]]:
    """Minimum eigenvalue of ``rho^{T_A}`` for every bipartition."""
    n = rho.n_qubits if isinstance(rho, DensityMatrix) else int(np.log2(np.shape(rho)[0]))
    return [(a, min_pt_eigenvalue(rho, a)) for a in bipartitions(n)]


def _bits(k: int, n: int) -> np.ndarray:
    return np.array([(k >> (n - 1 - j)) & 1 for j in range(n)])


def phase_erasing_unitaries(n: int, k: int, k_prime: int, theta_k: float, theta_kp: float) -> list[np.ndarray]:
    """Local ``diag(1, e^{i phi_j})`` mapping ``|theta_K^+-> -> |psi_K^+->`` and the same for ``K'``.

    Solves ``sum_j s_j(K) phi_j = theta_K`` with ``s_j(k) = 1 - 2 bit_j(k)``,
    using one qubit where ``K`` and ``K'`` agree and one where they differ.
    """
    s_k = 1 - 2 * _bits(k, n)
    s_kp = 1 - 2 * _bits(k_prime, n)
    agree = np.flatnonzero(s_k == s_kp)
    differ = np.flatnonzero(s_k != s_kp)
    if len(agree) == 0 or len(differ) == 0:
        raise ContractViolation("pairs K and K' must differ on a proper subset of qubits")
    phi = np.zeros(n)
    phi[agree[0]] = s_k[agree[0]] * (theta_k + theta_kp) / 2
    phi[differ[0]] = s_k[differ[0]] * (theta_k - theta_kp) / 2
    return [np.diag([1.0, np.exp(1j * p)]) for p in phi]


def project_pair_subspace(matrix: np.ndarray, k: int, k_prime: int) -> tuple[np.ndarray, float]:
    """Restrict to ``span{|K>,|K'>,|K'bar>,|Kbar>}`` relabelled as ``|00>,|01>,|10>,|11>``."""
    d = matrix.shape[0]
    idx = [k, k_prime, d - 1 - k_prime, d - 1 - k]
    sub = matrix[np.ix_(idx, idx)]
    p = float(np.real(np.trace(sub)))
    return sub / p, p


# --- protocols --------------------------------------------------------------


def theorem2_classify(beta: float, n_qubits: int) -> Classification:
    """Group size from ``2^((N-p)/2) < beta <= 2^((N-p+1)/2)``."""
    if beta <= 1:
        raise PreconditionError(f"beta = {beta} does not violate the inequality")
    x = 2 * math.log2(beta)
    p = n_qubits + 1 - math.ceil(x - 1e-12)
    p = max(p, 2)
    full = p == 2
    return Classification(p, p - 1, full, full)


def theorem1_protocol(rho: DensityMatrix, b: BellOperator) -> DistillReport:
    """Bipartite distillation route for a state violating ``b``."""
    val = violation(rho, b)
    if val.beta <= 1:
        raise PreconditionError(f"beta = {val.beta:.12g} <= 1")
    n = rho.n_qubits
    if b.spectral is None:
        b = b.with_spectrum()
    cls = theorem2_classify(val.beta, n)
    report = DistillReport(n, val.beta, cls.p, cls.max_group_size, cls.fully_distillable, cls.security_ok)
    trace = report.protocol_trace

    tw = theta_weights(rho, b)
    rho_d = tw.diagonal_state()
    trace.append(
        {
            "step": "theta_weights",
            "plus": tw.plus.tolist(),
            "minus": tw.minus.tolist(),
            "rho_D_beta": float(np.real(np.einsum("ij,ji->", rho_d, b.matrix))) / b.lv_bound,
        }
    )
    block = select_block(block_scan(tw))
    if block is None:
        raise FalsificationError(
            "theorem1_negative_block", "no negative block despite beta > 1", _certificate("theorem1_negative_block", rho, b, beta=val.beta)
        )
    report.bipartite_evidence = block
    rho_d_pt = min_pt_eigenvalue(rho_d, block.partition)
    trace.append(
        {
            "step": "select_block",
            "K": block.k,
            "K_prime": block.k_prime,
            "partition": block.partition.sorted(),
            "determinant": block.determinant,
            "rho_D_min_pt": rho_d_pt,
        }
    )

    # local basis change into the theta frame, then erase theta_K and theta_K'
    erase = phase_erasing_unitaries(n, block.k, block.k_prime, tw.theta[block.k], tw.theta[block.k_prime])
    basis = tw.local_basis or tuple(PAULI_I for _ in range(n))
    local = [e @ v.conj().T for e, v in zip(erase, basis)]
    rotated = apply_local_unitaries(rho, local)
    mu = ghz_depolarize(rotated)
    trace.append(
        {
            "step": "phase_erasure_and_depolarization",
            "mu_plus": mu.plus.tolist(),
            "mu_minus": mu.minus.tolist(),
            "weights_preserved": bool(
                np.allclose(mu.plus[[block.k, block.k_prime]], tw.plus[[block.k, block.k_prime]], atol=1e-9)
                and np.allclose(mu.minus[[block.k, block.k_prime]], tw.minus[[block.k, block.k_prime]], atol=1e-9)
            ),
        }
    )

    rho_dp = make_ghz_diagonal(mu).matrix
    two, prob = project_pair_subspace(rho_dp, block.k, block.k_prime)
    pt_min = min_pt_eigenvalue(two, QubitSubset(2, [1]))
    report.projected_state = two
    report.projected_min_pt = pt_min
    trace.append({"step": "project_pair_subspace", "probability": prob, "min_pt_eigenvalue": pt_min})
    if pt_min >= -NEGATIVE_TOL:
        raise FalsificationError(
            "theorem1_projected_npt",
            f"projected two-qubit state has min PT eigenvalue {pt_min:.3g}",
            _certificate("theorem1_projected_npt", rho, b, beta=val.beta, block=block.k),
        )
    return report


class Lemma1Result(NamedTuple):
    state: DensityMatrix
    operator: BellOperator
    beta_in: float
    beta: float
    qubit: int
    branch: str  # "x" (bisectrix) or "y"
    outcome: int
    probability: float
    measured: bool
    delta: float


def _orthonormal_pair(n_vec: np.ndarray, n_prime: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Bisectrix ``e1``, its in-plane normal ``e2`` and the half-angle ``delta``."""
    s, d = n_vec + n_prime, n_vec - n_prime
    ns, nd = np.linalg.norm(s), np.linalg.norm(d)
    delta = float(np.arctan2(nd, ns))
    if ns < 1e-12:
        e2 = d / nd
        trial = np.array([0.0, 0.0, 1.0]) if abs(e2[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
        e1 = np.cross(e2, trial)
        return e1 / np.linalg.norm(e1), e2, delta
    e1 = s / ns
    if nd < 1e-12:
        trial = np.array([0.0, 0.0, 1.0]) if abs(e1[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
        e2 = np.cross(e1, trial)
        return e1, e2 / np.linalg.norm(e2), delta
    return e1, d / nd, delta


def lemma1_project(rho: DensityMatrix, b: BellOperator, qubit: int | None = None) -> Lemma1Result:
    """Measure one qubit so the rest violates a Bell inequality by at least ``beta/sqrt(2)``.

    Both the bisectrix (``sigma_x`` after rotation) and the orthogonal
    (``sigma_y``) measurement and both outcomes are evaluated; the best
    branch is returned.  A branch with probability 1 needs no measurement.
    """
    n = rho.n_qubits
    if n < 2:
        raise ContractViolation("need at least two qubits")
    qubit = n if qubit is None else qubit
    beta_in = violation(rho, b).beta
    if beta_in <= 1:
        raise PreconditionError(f"beta = {beta_in:.12g} <= 1")
    split = b.split_at(qubit)
    e1, e2, delta = _orthonormal_pair(split.n, split.n_prime)
    rest = [q for q in range(1, n + 1) if q != qubit]
    settings = b.settings.restrict(rest) if b.settings is not None else None

    best = None
    for label, direction, reduced in (("x", e1, split.plus), ("y", e2, split.minus)):
        for outcome in (1, -1):
            proj = project_qubit(rho, qubit, direction, outcome)
            if proj.empty:
                continue
            op_matrix = outcome * reduced
            beta = float(np.real(np.einsum("ij,ji->", proj.state.matrix, op_matrix))) / b.lv_bound
            if best is None or beta > best[0] + 1e-15:
                best = (beta, label, outcome, proj, op_matrix)
    beta, label, outcome, proj, op_matrix = best
    op = BellOperator(n - 1, (op_matrix + op_matrix.conj().T) / 2, b.lv_bound, b.family, settings=settings)
    if beta < beta_in / np.sqrt(2) - 1e-9:
        raise FalsificationError(
            "lemma1_bound",
            f"beta_out {beta:.12g} < beta_in/sqrt(2) {beta_in / np.sqrt(2):.12g}",
            _certificate("lemma1_bound", rho, b, qubit=qubit, beta_in=beta_in, beta_out=beta),
        )
    measured = proj.probability < 1 - 1e-12
    return Lemma1Result(proj.state, op, beta_in, beta, qubit, label, outcome, proj.probability, measured, delta)


class PairEvidence(NamedTuple):
    pair: tuple[int, int]
    state: DensityMatrix
    beta: float
    min_pt: float
    chsh_violated: bool
    npt: bool
    projected: tuple[int, ...]


def corollary1_full_distill(rho: DensityMatrix, b: BellOperator) -> list[PairEvidence]:
    """Singlet evidence between qubit 1 and every other qubit."""
    n = rho.n_qubits
    beta = violation(rho, b).beta
    if beta <= 2 ** ((n - 2) / 2):
        raise PreconditionError(f"beta = {beta:.12g} does not exceed 2^((N-2)/2)")
    out = []
    for partner in range(2, n + 1):
        labels = list(range(1, n + 1))
        cur_rho, cur_b = rho, b
        projected = []
        for q in reversed(labels):
            if q in (1, partner):
                continue
            res = lemma1_project(cur_rho, cur_b, qubit=labels.index(q) + 1)
            cur_rho, cur_b = res.state, res.operator
            labels.remove(q)
            projected.append(q)
        beta2 = violation(cur_rho, cur_b).beta
        min_pt = min_pt_eigenvalue(cur_rho, QubitSubset(2, [2]))
        ev = PairEvidence((1, partner), cur_rho, beta2, min_pt, beta2 > 1, min_pt < -NEGATIVE_TOL, tuple(projected))
        if not (ev.chsh_violated or ev.npt):
            raise FalsificationError(
                "corollary1_pair",
                f"pair (1,{partner}) neither violates CHSH nor is NPT",
                _certificate("corollary1_pair", rho, b, pair=[1, partner], beta2=beta2, min_pt=min_pt),
            )
        out.append(ev)
    return out


class PartyResult(NamedTuple):
    party: int
    pair: tuple[int, int]
    p_plus: float
    p_minus: float
    lhs: float
    condition: bool
    a: float
    c: float
    d: float
    det_m: float
    min_pt: float
    npt: bool
    entries_match: bool


def relabel_max_first(weights: GhzWeights) -> tuple[list[np.ndarray], tuple[int, int]]:
    """Local Paulis moving the largest GHZ weight onto ``|GHZ_N>`` (``mu_0^+``)."""
    n = weights.n_qubits
    stacked = np.stack([weights.plus, weights.minus], axis=1)  # (k, sign)
    k, s = np.unravel_index(int(np.argmax(stacked)), stacked.shape)
    us = [PAULI_X.copy() if bit else PAULI_I.copy() for bit in _bits(int(k), n)]
    if s == 1:
        us[0] = PAULI_Z @ us[0]
    return us, (int(k), 1 if s == 0 else -1)


def appendix_b_check(rho3: DensityMatrix) -> list[PartyResult]:
    """Three-qubit route: depolarize, relabel, measure one party in sigma_x."""
    if rho3.n_qubits != 3:
        raise ContractViolation("the three-party protocol needs exactly three qubits")
    mu0 = ghz_depolarize(rho3)
    us, _ = relabel_max_first(mu0)
    rho_d = apply_local_unitaries(make_ghz_diagonal(mu0), us)
    mu = ghz_depolarize(rho_d)
    out = []
    for party in (1, 2, 3):
        a_q, b_q = [q for q in (1, 2, 3) if q != party]
        p = {1: 0.0, -1: 0.0}
        q_ = {1: 0.0, -1: 0.0}
        for k in range(4):
            bits = _bits(k, 3)
            same = bits[a_q - 1] == bits[b_q - 1]
            for s in (1, -1):
                (p if same else q_)[s] += mu.weight(k, s)
        pp, pm = p[1], p[-1]
        lhs = pp + pm - 2 * pp * pm
        a = (pp + pm) / 2
        c = (pp - pm) / 2
        d = (q_[1] - q_[-1]) / 2
        det_m = (0.5 - a) ** 2 - c**2
        min_pts = []
        entries_match = True
        for outcome in (1, -1):
            proj = project_qubit(rho_d, party, (1.0, 0.0, 0.0), outcome)
            m = proj.state.matrix
            min_pts.append(min_pt_eigenvalue(m, QubitSubset(2, [1])))
            if outcome == 1:
                entries_match = bool(
                    np.allclose([m[0, 0], m[0, 3], m[1, 1], m[1, 2]], [a, c, 0.5 - a, d], atol=1e-10)
                )
        min_pt = min(min_pts)
        out.append(
            PartyResult(party, (a_q, b_q), pp, pm, lhs, lhs > 0.5, a, c, d, det_m, min_pt, min_pt < -NEGATIVE_TOL, entries_match)
        )
    return out


def classify(rho: DensityMatrix, b: BellOperator, with_protocol: bool = True) -> DistillReport:
    """Full report: violation class, NPT table and, when violated, the bipartite route."""
    val = violation(rho, b)
    table = npt_partitions(rho)
    if val.beta > 1 and with_protocol:
        report = theorem1_protocol(rho, b)
    else:
        report = DistillReport(rho.n_qubits, val.beta)
        if val.beta > 1:
            cls = theorem2_classify(val.beta, rho.n_qubits)
            report.p, report.max_group_size = cls.p, cls.max_group_size
            report.fully_distillable, report.security_ok = cls.fully_distillable, cls.security_ok
    report.npt_partitions = table
    return report


def reduced_state(rho: DensityMatrix, keep) -> DensityMatrix:
    return DensityMatrix.from_matrix(partial_trace(rho, keep))


__all__ = [
    "BlockVerdict",
    "Classification",
    "DistillReport",
    "FalsificationError",
    "Lemma1Result",
    "PairEvidence",
    "PartyResult",
    "PreconditionError",
    "ThetaWeights",
    "appendix_b_check",
    "block_scan",
    "classify",
    "corollary1_full_distill",
    "extract_spectrum",
    "ghz_depolarize",
    "lemma1_project",
    "npt_partitions",
    "phase_erasing_unitaries",
    "select_block",
    "theorem1_protocol",
    "theorem2_classify",
    "theta_weights",
]
