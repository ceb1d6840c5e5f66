"""Exact verification oracles for the block-wise DPS security analysis.

Two groups of machinery live here:

* Operator algebra on the 24-dimensional space A (x) B, where A holds the
  three prediction qubits of a block and B the position of a single photon
  among Bob's three internal modes (first half pulse, intact second pulse,
  third half pulse).  The bit-error and phase-error operators, Bob's
  detection POVM, the Hamming-weight projectors, and the inequality linking
  phase errors to bit errors are all built and checked explicitly.

* Exact truncated-Fock-space channel computations for coherent-pair sources:
  joint photon-number / prediction-register distributions, the full chain of
  intermediate bounds, detection statistics behind a lossy channel and a
  misaligned interferometer, and the exact phase error rate of the conditional
  one-photon state.  These give every closed-form bound an independent check.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import NamedTuple

import numpy as np

from .bounds import LAMBDA, s_bounds
from .fock import (
    FockVector,
    beam_splitter,
    coherent_vector,
    suggest_cutoff,
    tensor,
    vacuum_vector,
)
from .source import CoherentSourceSpec, exact_pchar, t_param

DIM_A = 8   # three qubits, basis |z1 z2 z3>, z1 most significant
DIM_B = 3   # photon position: first half pulse, second pulse, third half pulse
DIM_AB = DIM_A * DIM_B

#: relative pulse weights of the three internal modes; the outer pulses are
#: halved by Bob's first beam splitter, the middle pulse arrives intact.
DEFAULT_WEIGHTS = (1.0, 0.5, 1.0)

SLACK_TOL = 1e-9
OPERATOR_TOL = 1e-12


class TruncationError(ValueError):
    """Raised when a requested cutoff loses more tail mass than tolerated."""


class BoundCheck(NamedTuple):
    """One verified inequality: lhs <= rhs within SLACK_TOL."""

    name: str
    lhs: float
    rhs: float
    slack: float
    ok: bool


def _check(name: str, lhs: float, rhs: float, tol: float = SLACK_TOL) -> BoundCheck:
    slack = rhs - lhs
    return BoundCheck(name, float(lhs), float(rhs), float(slack), bool(slack >= -tol))


# ---------------------------------------------------------------------------
# operators on A (x) B


@dataclass(frozen=True)
class QubitPhotonState:
    """Validated density operator on the 24-dimensional A (x) B space."""

    matrix: np.ndarray
    normalization: float = 1.0

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=complex)
        if m.shape != (DIM_AB, DIM_AB):
            raise ValueError(f"state must be {DIM_AB}x{DIM_AB}, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > 1e-9:
            raise ValueError("state is not Hermitian")
        if abs(np.trace(m).real - self.normalization) > 1e-9:
            raise ValueError(
                f"trace {np.trace(m).real} differs from stated normalization {self.normalization}"
            )
        if float(np.min(np.linalg.eigvalsh((m + m.conj().T) / 2.0))) < -1e-10:
            raise ValueError("state is not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class ErrorOperatorSet:
    """Detection POVM, error operators and weight projectors of one block."""

    bob_povm: dict
    e_bit_op: np.ndarray
    e_ph_op: np.ndarray
    weight_projectors: tuple
    weights: tuple


def _povm_vector(j: int, k: int, weights) -> np.ndarray:
    """Detection vector for outcome bit k in time slot j (j = 1 or 2)."""
    v = np.zeros(DIM_B, dtype=complex)
    v[j - 1] = np.sqrt(weights[j - 1])
    v[j] = (-1.0) ** k * np.sqrt(weights[j])
    return v / np.sqrt(2.0)


def _z_bits(z: int) -> tuple[int, int, int]:
    return (z >> 2) & 1, (z >> 1) & 1, z & 1


def build_error_operators(w2: float = 0.5) -> ErrorOperatorSet:
    """Construct the detection POVM and both error operators.

    ``w2`` is the weight of the intact middle pulse; 1/2 is the physical
    value (the outer pulses lose half their amplitude at the first beam
    splitter).  Passing a different value deliberately breaks POVM
    completeness, which the verification harness uses to test itself.
    """
    weights = (1.0, float(w2), 1.0)
    povm = {
        (j, k): np.outer(v := _povm_vector(j, k, weights), v.conj())
        for j in (1, 2)
        for k in (0, 1)
    }

    plus = np.array([1.0, 1.0]) / np.sqrt(2.0)
    minus = np.array([1.0, -1.0]) / np.sqrt(2.0)
    same = np.zeros((4, 4))       # both qubits agree in the X basis
    differ = np.zeros((4, 4))
    for u in (plus, minus):
        for v in (plus, minus):
            proj = np.outer(np.kron(u, v), np.kron(u, v))
            if u is v:
                same += proj
            else:
                differ += proj
    eye2 = np.eye(2)
    e_bit = np.zeros((DIM_AB, DIM_AB), dtype=complex)
    for j in (1, 2):
        agree_a = np.kron(same, eye2) if j == 1 else np.kron(eye2, same)
        differ_a = np.kron(differ, eye2) if j == 1 else np.kron(eye2, differ)
        e_bit += np.kron(agree_a, povm[(j, 1)]) + np.kron(differ_a, povm[(j, 0)])

    e_ph = np.zeros((DIM_AB, DIM_AB), dtype=complex)
    for j in (1, 2):
        for z in range(DIM_A):
            bits = _z_bits(z)
            pa = np.zeros((DIM_A, DIM_A))
            pa[z, z] = 1.0
            pb = np.zeros((DIM_B, DIM_B))
            if bits[j] == 1:          # prediction bit of pulse j+1 set -> photon at slot j
                pb[j - 1, j - 1] += weights[j - 1]
            if bits[j - 1] == 1:      # prediction bit of pulse j set -> photon at slot j+1
                pb[j, j] += weights[j]
            e_ph += np.kron(pa, pb)

    projectors = []
    for a in range(4):
        diag = np.array([1.0 if sum(_z_bits(z)) == a else 0.0 for z in range(DIM_A)])
        projectors.append(np.diag(diag))

    for m in (e_bit, e_ph, *povm.values(), *projectors):
        m.setflags(write=False)
    return ErrorOperatorSet(povm, e_bit, e_ph, tuple(projectors), weights)


def operator_checks(ops: ErrorOperatorSet | None = None) -> list[BoundCheck]:
    """Algebraic sanity of the operator set, each as a (deviation <= tol) check."""
    ops = ops or build_error_operators()
    eye_b = np.eye(DIM_B)
    eye_a = np.eye(DIM_A)
    checks = [
        _check("povm_completeness", np.max(np.abs(sum(ops.bob_povm.values()) - eye_b)), OPERATOR_TOL, tol=0.0),
        _check("weight_projector_completeness", np.max(np.abs(sum(ops.weight_projectors) - eye_a)), OPERATOR_TOL, tol=0.0),
        _check("e_ph_trace", abs(np.trace(ops.e_ph_op).real - 12.0), OPERATOR_TOL, tol=0.0),
    ]
    for name, op in [("e_bit", ops.e_bit_op), ("e_ph", ops.e_ph_op)] + [
        (f"povm_{j}{k}", p) for (j, k), p in sorted(ops.bob_povm.items())
    ]:
        eigs = np.linalg.eigvalsh(op)
        checks.append(_check(f"{name}_psd", -float(np.min(eigs)), OPERATOR_TOL, tol=0.0))
        if name in ("e_bit", "e_ph"):
            checks.append(_check(f"{name}_below_identity", float(np.max(eigs)) - 1.0, OPERATOR_TOL, tol=0.0))
    ranks = tuple(int(round(np.trace(p).real)) for p in ops.weight_projectors)
    checks.append(_check("weight_projector_ranks", 0.0 if ranks == (1, 3, 3, 1) else 1.0, 0.5, tol=0.0))
    return checks


class RelationCheck(NamedTuple):
    lhs: float
    rhs: float
    ok: bool


def check_phase_bit_relation(sigma: QubitPhotonState, ops: ErrorOperatorSet | None = None) -> RelationCheck:
    """Check that phase errors are controlled by bit errors and weight terms.

    For a one-photon conditional state sigma the phase-error probability obeys

        tr(e_ph sigma) <= lambda*(tr(e_bit sigma) + sqrt(tr(P1 sigma) tr(P3 sigma)))
                          + tr(P2 sigma) + tr(P3 sigma),

    with lambda = 3 + sqrt(5).  This holds for every density operator, so a
    single violation falsifies either the operator set or the claim.
    """
    ops = ops or build_error_operators()
    m = sigma.matrix
    eye_b = np.eye(DIM_B)

    def tr_with(op_a) -> float:
        return float(np.trace(np.kron(op_a, eye_b) @ m).real)

    lhs = float(np.trace(ops.e_ph_op @ m).real)
    p1, p2, p3 = (tr_with(ops.weight_projectors[a]) for a in (1, 2, 3))
    ebit = float(np.trace(ops.e_bit_op @ m).real)
    rhs = LAMBDA * (ebit + np.sqrt(max(p1, 0.0) * max(p3, 0.0))) + p2 + p3
    return RelationCheck(lhs, rhs, bool(lhs <= rhs + SLACK_TOL))


def random_sigma(rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state mixed with weight-0.1 white noise (a full-rank density matrix)."""
    psi = rng.normal(size=DIM_AB) + 1j * rng.normal(size=DIM_AB)
    psi /= np.linalg.norm(psi)
    return 0.9 * np.outer(psi, psi.conj()) + 0.1 * np.eye(DIM_AB) / DIM_AB


def phase_bit_relation_suite(n: int = 10_000, seed: int = 7, ops: ErrorOperatorSet | None = None) -> BoundCheck:
    """Run the relation over ``n`` seeded random states; reports the worst margin.

    Vectorized over states: expectations of the fixed operators reduce to
    quadratic forms of the pure parts plus constant noise offsets.
    """
    ops = ops or build_error_operators()
    rng = np.random.default_rng(seed)
    psis = rng.normal(size=(n, DIM_AB)) + 1j * rng.normal(size=(n, DIM_AB))
    psis /= np.linalg.norm(psis, axis=1, keepdims=True)

    def expect(op: np.ndarray) -> np.ndarray:
        pure = np.einsum("ni,ij,nj->n", psis.conj(), op, psis).real
        return 0.9 * pure + 0.1 * np.trace(op).real / DIM_AB

    eye_b = np.eye(DIM_B)
    lhs = expect(ops.e_ph_op)
    ebit = expect(ops.e_bit_op)
    p1, p2, p3 = (expect(np.kron(ops.weight_projectors[a], eye_b)) for a in (1, 2, 3))
    rhs = LAMBDA * (ebit + np.sqrt(np.clip(p1, 0.0, None) * np.clip(p3, 0.0, None))) + p2 + p3
    worst = float(np.max(lhs - rhs))
    return _check(f"phase_bit_relation_random[n={n}]", worst, 0.0)


# ---------------------------------------------------------------------------
# virtual-state joint distributions for coherent pairs


def pulse_joint_distribution(alpha0: complex, alpha1: complex, cutoff: int) -> np.ndarray:
    """Joint Pr{prediction bit z, photon number n} for one pulse.

    Row z holds |amplitudes of (|alpha0> + (-1)^z |alpha1>)/2|^2; the two rows
    sum to 1 up to truncation.  Pr{z=1} = (1 - Re<alpha1|alpha0>)/2.
    """
    v0 = coherent_vector(alpha0, cutoff).amplitudes
    v1 = coherent_vector(alpha1, cutoff).amplitudes
    return np.stack([np.abs((v0 + v1) / 2.0) ** 2, np.abs((v0 - v1) / 2.0) ** 2])


def block_joint_distribution(alpha0: complex, alpha1: complex, cutoff: int) -> np.ndarray:
    """Joint table Pr{block photon number n, register weight a} for three pulses.

    Returns an array of shape (3*cutoff + 1, 4); entry [n, a] is the
    probability that the block carries n photons while a of the three
    prediction bits are set.  Raises TruncationError when the chosen cutoff
    loses more than 1e-9 of per-pulse mass.
    """
    per_pulse = pulse_joint_distribution(alpha0, alpha1, cutoff)
    mass = float(per_pulse.sum())
    if mass < 1.0 - 1e-9:
        raise TruncationError(
            f"cutoff {cutoff} keeps only {mass:.12f} of the per-pulse mass; increase it"
        )
    table = np.zeros((3 * cutoff + 1, 4))
    for zs in product((0, 1), repeat=3):
        dist = np.convolve(np.convolve(per_pulse[zs[0]], per_pulse[zs[1]]), per_pulse[zs[2]])
        table[:, sum(zs)] += dist
    return table


def verify_appendix_bounds(alpha0: complex, alpha1: complex, cutoff: int | None = None) -> list[BoundCheck]:
    """Check every intermediate and final weight-probability bound exactly.

    The left-hand sides come from the exact joint table of a coherent pair;
    the right-hand sides are the polynomial bounds in the vacuum-mismatch
    parameter t plus the exact photon-number tails.
    """
    mean = max(abs(alpha0) ** 2, abs(alpha1) ** 2)
    if cutoff is None:
        cutoff = suggest_cutoff(mean, tol=1e-14, minimum=10)
    stats = exact_pchar(
        coherent_vector(alpha0, cutoff).density(),
        coherent_vector(alpha1, cutoff).density(),
    )
    t = t_param(stats)
    s1, s3, sge2 = s_bounds(stats)
    per_pulse = pulse_joint_distribution(alpha0, alpha1, cutoff)
    table = block_joint_distribution(alpha0, alpha1, cutoff)
    wt = table.sum(axis=0)        # marginal over photon number
    wt_ge2 = wt[2] + wt[3]
    return [
        _check("pulse_vacuum_flip", per_pulse[1, 0], t),
        _check("block_n0_wt3", table[0, 3], t**3),
        _check("block_n1_wt3", table[1, 3], 3.0 * t**2),
        _check("block_n2_wt3", table[2, 3], 3.0 * t**2 + 3.0 * t),
        _check("block_n0_wt1", table[0, 1], 3.0 * t),
        _check("block_n0_wtge2", table[0, 2] + table[0, 3], 3.0 * t**2 + t**3),
        _check("block_n1_wtge2", table[1, 2] + table[1, 3], 6.0 * t + 6.0 * t**2),
        _check("wt3_total", wt[3], s3),
        _check("wt1_total", wt[1], s1),
        _check("wtge2_total", wt_ge2, sge2),
    ]


def structured_pairs() -> list[tuple[complex, complex]]:
    """Canonical coherent pairs exercised by the verification suite."""
    pairs = [(np.sqrt(mu), -np.sqrt(mu)) for mu in (0.01, 0.05, 0.1, 0.3)]
    pairs.append((np.sqrt(0.11), -np.sqrt(0.09)))   # asymmetric intensities
    pairs.append((np.sqrt(0.1), np.sqrt(0.1)))      # degenerate pair
    return [(complex(a), complex(b)) for a, b in pairs]


def random_pairs(n: int, seed: int = 11, max_mean: float = 0.5) -> list[tuple[complex, complex]]:
    """Seeded random coherent pairs with per-pulse mean photon number <= max_mean."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        r = np.sqrt(rng.uniform(0.0, max_mean, size=2))
        phi = rng.uniform(0.0, 2.0 * np.pi, size=2)
        out.append((complex(r[0] * np.exp(1j * phi[0])), complex(r[1] * np.exp(1j * phi[1]))))
    return out


# ---------------------------------------------------------------------------
# lossy channel + interferometer, exact in Fock space


def detection_rows(misalignment_phase: float = 0.0) -> np.ndarray:
    """Amplitude map from the internal one-photon basis to the four click outcomes.

    Rows are ordered ((slot 1, bit 0), (slot 1, bit 1), (slot 2, bit 0),
    (slot 2, bit 1)).  The long interferometer arm carries the misalignment
    phase; rows stay complete (sum of |row|^2 over outcomes is 1 per mode).
    """
    ph = np.exp(1j * misalignment_phase)
    rows = np.zeros((4, DIM_B), dtype=complex)
    for idx, (j, k) in enumerate(((1, 0), (1, 1), (2, 0), (2, 1))):
        sign = (-1.0) ** k
        if j == 1:
            rows[idx] = (ph / np.sqrt(2.0), sign / 2.0, 0.0)
        else:
            rows[idx] = (0.0, ph / 2.0, sign / np.sqrt(2.0))
    return rows


OUTCOME_COLUMNS = ((1, 0), (1, 1), (2, 0), (2, 1))


def _default_channel_cutoff(spec: CoherentSourceSpec) -> int:
    return max(20, suggest_cutoff(3.0 * spec.mu_high, tol=1e-12))


def _pulse_grid(pulse: FockVector, eta: float, split: bool) -> np.ndarray:
    """Push one pulse through channel loss and (optionally) Bob's first beam splitter.

    Axis 0 of the returned grid is the internal mode Bob's photon-number
    measurement sees; the remaining axes are modes that leave the block
    (loss mode, plus the discarded half pulse when split).
    """
    vac = vacuum_vector(pulse.cutoff)
    state = beam_splitter(tensor([pulse, vac]), eta, modes=(0, 1))
    if split:
        state = beam_splitter(tensor([state, vac]), 0.5, modes=(0, 2))
    return state.grid()


def _coherence_block(ket: np.ndarray, bra: np.ndarray) -> np.ndarray:
    """G[m, m'] = sum over leaving modes of ket[m, ...] conj(bra[m', ...]), m, m' in {0, 1}."""
    k = ket.reshape(ket.shape[0], -1)[:2]
    b = bra.reshape(bra.shape[0], -1)[:2]
    return k @ b.conj().T


def _one_photon_matrix(blocks: list[np.ndarray]) -> np.ndarray:
    """Unnormalized 3x3 one-photon density matrix from per-pulse coherence blocks."""
    rho = np.empty((DIM_B, DIM_B), dtype=complex)
    for i in range(DIM_B):
        for i2 in range(DIM_B):
            val = 1.0 + 0.0j
            for p, g in enumerate(blocks):
                val *= g[int(p == i), int(p == i2)]
            rho[i, i2] = val
    return rho


def per_pattern_click_probs(
    spec: CoherentSourceSpec,
    eta: float,
    misalignment_phase: float = 0.0,
    cutoff: int | None = None,
) -> np.ndarray:
    """Joint probabilities of the detected event and each click outcome, per bit pattern.

    Returns an (8, 4) array; row order follows the three-bit pattern read as
    a binary number (first pulse most significant), columns follow
    OUTCOME_COLUMNS.  Row sums are the per-pattern detection probabilities.
    Everything is computed in truncated Fock space: coherent pulses pass a
    loss beam splitter, the outer pulses are halved, the one-photon sector
    is extracted, and the interferometer rows are applied.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    cutoff = cutoff or _default_channel_cutoff(spec)
    rows = detection_rows(misalignment_phase)
    split_blocks, whole_blocks = {}, {}
    for bit in (0, 1):
        pulse = coherent_vector(spec.amplitude(bit), cutoff)
        split_grid = _pulse_grid(pulse, eta, split=True)
        whole_grid = _pulse_grid(pulse, eta, split=False)
        split_blocks[bit] = _coherence_block(split_grid, split_grid)
        whole_blocks[bit] = _coherence_block(whole_grid, whole_grid)
    probs = np.zeros((8, 4))
    for pattern in range(8):
        b1, b2, b3 = (pattern >> 2) & 1, (pattern >> 1) & 1, pattern & 1
        rho_b = _one_photon_matrix([split_blocks[b1], whole_blocks[b2], split_blocks[b3]])
        probs[pattern] = np.real(np.einsum("ri,ij,rj->r", rows, rho_b, rows.conj()))
    if np.min(probs) < -1e-12:
        raise RuntimeError(f"click probability went negative: {np.min(probs)}")
    return np.clip(probs, 0.0, None)


def channel_detection_stats(
    spec: CoherentSourceSpec,
    eta: float,
    misalignment_phase: float = 0.0,
    cutoff: int | None = None,
) -> tuple[float, float]:
    """Exact detection rate Q and bit error rate of the coherent-source channel.

    A block is detected when exactly one photon reaches Bob's two active time
    slots; the error rate is the probability that the clicked detector
    disagrees with the parity of the adjacent source bits, averaged over
    uniform bit patterns.
    """
    probs = per_pattern_click_probs(spec, eta, misalignment_phase, cutoff)
    q = float(probs.sum() / 8.0)
    if q == 0.0:
        return 0.0, 0.0
    err = 0.0
    for pattern in range(8):
        bits = ((pattern >> 2) & 1, (pattern >> 1) & 1, pattern & 1)
        for col, (j, k) in enumerate(OUTCOME_COLUMNS):
            if k != bits[j - 1] ^ bits[j]:
                err += probs[pattern, col]
    return q, max(0.0, float(err / 8.0 / q))


def exact_phase_error(
    spec: CoherentSourceSpec,
    eta: float,
    misalignment_phase: float = 0.0,
    cutoff: int | None = None,
    ops: ErrorOperatorSet | None = None,
) -> tuple[float, QubitPhotonState]:
    """Exact phase error rate of the one-photon conditional state.

    Builds the entangled preparation (prediction qubits against coherent
    pulses), pushes the optical side through loss and the first beam
    splitter in Fock space, projects on the one-photon outcome, traces out
    everything but the qubits and the photon position, and evaluates the
    phase-error operator on the normalized state.  The interferometer phase
    acts downstream of that projection, so it conjugates the state without
    affecting the phase-error expectation.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    cutoff = cutoff or _default_channel_cutoff(spec)
    ops = ops or build_error_operators()
    v0 = coherent_vector(spec.amplitude(0), cutoff)
    v1 = coherent_vector(spec.amplitude(1), cutoff)
    split_grids, whole_grids = {}, {}
    for z in (0, 1):
        sign = 1.0 if z == 0 else -1.0
        pulse = FockVector(cutoff, 1, (v0.amplitudes + sign * v1.amplitudes) / 2.0)
        split_grids[z] = _pulse_grid(pulse, eta, split=True)
        whole_grids[z] = _pulse_grid(pulse, eta, split=False)

    split_g = {(z, z2): _coherence_block(split_grids[z], split_grids[z2])
               for z in (0, 1) for z2 in (0, 1)}
    whole_g = {(z, z2): _coherence_block(whole_grids[z], whole_grids[z2])
               for z in (0, 1) for z2 in (0, 1)}

    raw = np.zeros((DIM_AB, DIM_AB), dtype=complex)
    for za in range(DIM_A):
        a_bits = _z_bits(za)
        for zb in range(DIM_A):
            b_bits = _z_bits(zb)
            blocks = [
                split_g[(a_bits[0], b_bits[0])],
                whole_g[(a_bits[1], b_bits[1])],
                split_g[(a_bits[2], b_bits[2])],
            ]
            raw[za * DIM_B:(za + 1) * DIM_B, zb * DIM_B:(zb + 1) * DIM_B] = _one_photon_matrix(blocks)

    detected = float(np.trace(raw).real)
    if detected <= 0.0:
        raise TruncationError("no one-photon component survived; check cutoff and parameters")
    arm_phase = np.kron(np.eye(DIM_A), np.diag([np.exp(1j * misalignment_phase), 1.0, 1.0]))
    normalized = arm_phase @ (raw / detected) @ arm_phase.conj().T
    normalized = (normalized + normalized.conj().T) / 2.0  # scrub float dust
    sigma = QubitPhotonState(normalized)
    eph = float(np.trace(ops.e_ph_op @ sigma.matrix).real)
    return eph, sigma
