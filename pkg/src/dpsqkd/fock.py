"""Truncated Fock-space linear algebra for few-mode optical states.

Everything here is dense numpy in the occupation-number basis with a hard
per-mode photon cutoff.  States and operators are immutable once built and
all operations are pure functions, so the module is safe to use from
multiple threads.

Index convention (fixed, tested): a k-mode amplitude array reshaped to
``(cutoff+1,)*k`` is indexed ``[n_1, ..., n_k]`` where ``n_i`` is the photon
number of mode i.  Equivalently the flat index is big-endian in the modes,
mode 1 being the most significant digit.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

HERMITICITY_TOL = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FockVector:
    """Pure state of ``modes`` optical modes, truncated at ``cutoff`` photons per mode."""

    cutoff: int
    modes: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.cutoff < 0:
            raise ValueError(f"cutoff must be >= 0, got {self.cutoff}")
        if self.modes < 1:
            raise ValueError(f"modes must be >= 1, got {self.modes}")
        amps = np.ascontiguousarray(self.amplitudes, dtype=complex).ravel()
        if amps.size != self.dim:
            raise ValueError(
                f"amplitude array has {amps.size} entries, expected "
                f"(cutoff+1)**modes = {self.dim}"
            )
        object.__setattr__(self, "amplitudes", _freeze(amps))

    @property
    def dim(self) -> int:
        return (self.cutoff + 1) ** self.modes

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def grid(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per mode."""
        return self.amplitudes.reshape((self.cutoff + 1,) * self.modes)

    def amplitude(self, *occupation: int) -> complex:
        """Amplitude on the basis state with the given per-mode photon numbers."""
        if len(occupation) != self.modes:
            raise ValueError(f"expected {self.modes} occupation numbers")
        return complex(self.grid()[occupation])

    def normalized(self) -> "FockVector":
        n = self.norm
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return FockVector(self.cutoff, self.modes, self.amplitudes / n)

    def density(self) -> "FockOperator":
        """Rank-one density operator |psi><psi|."""
        return FockOperator(self.cutoff, self.modes, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Operator on ``modes`` truncated optical modes, dense in the number basis."""

    cutoff: int
    modes: int
    entries: np.ndarray

    def __post_init__(self):
        if self.cutoff < 0 or self.modes < 1:
            raise ValueError("cutoff must be >= 0 and modes >= 1")
        m = np.ascontiguousarray(self.entries, dtype=complex)
        if m.shape != (self.dim, self.dim):
            raise ValueError(f"entries must be a {self.dim}x{self.dim} matrix, got {m.shape}")
        object.__setattr__(self, "entries", _freeze(m))

    @property
    def dim(self) -> int:
        return (self.cutoff + 1) ** self.modes

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.conj().T)) <= tol)

    def expectation(self, state: FockVector) -> complex:
        _check_compatible(self, state)
        return complex(np.vdot(state.amplitudes, self.entries @ state.amplitudes))

    def apply(self, state: FockVector) -> FockVector:
        _check_compatible(self, state)
        return FockVector(self.cutoff, self.modes, self.entries @ state.amplitudes)


def _check_compatible(a, b):
    if a.cutoff != b.cutoff or a.modes != b.modes:
        raise ValueError(
            f"incompatible shapes: (cutoff={a.cutoff}, modes={a.modes}) vs "
            f"(cutoff={b.cutoff}, modes={b.modes})"
        )


# ---------------------------------------------------------------------------
# constructors


def vacuum_vector(cutoff: int, modes: int = 1) -> FockVector:
    amps = np.zeros((cutoff + 1) ** modes, dtype=complex)
    amps[0] = 1.0
    return FockVector(cutoff, modes, amps)


def number_vector(n: int, cutoff: int) -> FockVector:
    """Single-mode photon-number state |n>."""
    if not 0 <= n <= cutoff:
        raise ValueError(f"photon number {n} outside [0, {cutoff}]")
    amps = np.zeros(cutoff + 1, dtype=complex)
    amps[n] = 1.0
    return FockVector(cutoff, 1, amps)


def coherent_vector(alpha: complex, cutoff: int) -> FockVector:
    """Coherent state with complex amplitude alpha, truncated at ``cutoff``.

    The amplitude on |n> is exp(-|alpha|^2/2) alpha^n / sqrt(n!), accumulated
    by recurrence so large cutoffs stay finite.
    """
    if cutoff < 0:
        raise ValueError(f"cutoff must be >= 0, got {cutoff}")
    alpha = complex(alpha)
    amps = np.empty(cutoff + 1, dtype=complex)
    amps[0] = np.exp(-abs(alpha) ** 2 / 2.0)
    for n in range(1, cutoff + 1):
        amps[n] = amps[n - 1] * alpha / np.sqrt(n)
    return FockVector(cutoff, 1, amps)


def suggest_cutoff(mean: float, tol: float = 1e-12, minimum: int = 4) -> int:
    """Smallest cutoff whose Poisson tail at the given mean is below ``tol``.

    Used to size truncated spaces so that truncation error is negligible
    next to the tolerances asserted elsewhere.  Returns at least ``minimum``.
    """
    if mean < 0:
        raise ValueError("mean must be non-negative")
    if mean == 0.0:
        return minimum
    n = 0
    term = np.exp(-mean)
    cdf = term
    # Pr{N > n} = 1 - CDF(n); walk n upward until the remainder drops below tol.
    while 1.0 - cdf >= tol and n < 10_000:
        n += 1
        term *= mean / n
        cdf += term
    return max(n, minimum)


# ---------------------------------------------------------------------------
# basic operations


def overlap(u: FockVector, v: FockVector) -> complex:
    """Inner product <u|v>, conjugate-linear in the first argument."""
    _check_compatible(u, v)
    return complex(np.vdot(u.amplitudes, v.amplitudes))


def tensor(parts: list[FockVector]) -> FockVector:
    """Tensor product of single- or multi-mode vectors sharing one cutoff."""
    if not parts:
        raise ValueError("tensor() needs at least one factor")
    cutoff = parts[0].cutoff
    for p in parts[1:]:
        if p.cutoff != cutoff:
            raise ValueError("all tensor factors must share the same cutoff")
    amps = parts[0].amplitudes
    modes = parts[0].modes
    for p in parts[1:]:
        amps = np.kron(amps, p.amplitudes)
        modes += p.modes
    return FockVector(cutoff, modes, amps)


def tensor_operator(parts: list[FockOperator]) -> FockOperator:
    if not parts:
        raise ValueError("tensor_operator() needs at least one factor")
    cutoff = parts[0].cutoff
    ent = parts[0].entries
    modes = parts[0].modes
    for p in parts[1:]:
        if p.cutoff != cutoff:
            raise ValueError("all tensor factors must share the same cutoff")
        ent = np.kron(ent, p.entries)
        modes += p.modes
    return FockOperator(cutoff, modes, ent)


# ---------------------------------------------------------------------------
# beam splitter

# Convention (single-photon sector): |1,0> -> sqrt(T)|1,0> + sqrt(1-T)|0,1>
# and |0,1> -> sqrt(T)|0,1> - sqrt(1-T)|1,0>.  On coherent inputs it sends
# (|a>,|b>) to (|sqrt(T)a - sqrt(1-T)b>, |sqrt(1-T)a + sqrt(T)b>) up to a
# global phase (no phase when either input is vacuum).


@lru_cache(maxsize=64)
def _beam_splitter_matrix(cutoff: int, transmittance: float) -> np.ndarray:
    """Two-mode beam-splitter unitary, assembled per total-photon sector.

    The generator theta*(b†a - a†b) conserves total photon number, so the
    unitary block-diagonalizes over sectors {|k, n-k>}; exponentiating each
    small block is much cheaper than one dense expm and gives the identical
    matrix.  Exactly unitary on the truncated space.
    """
    d = cutoff + 1
    theta = float(np.arccos(np.sqrt(transmittance)))
    u = np.zeros((d * d, d * d), dtype=complex)
    for n in range(2 * cutoff + 1):
        k_lo, k_hi = max(0, n - cutoff), min(n, cutoff)
        ks = np.arange(k_lo, k_hi + 1)
        size = ks.size
        gen = np.zeros((size, size))
        for i, k in enumerate(ks[:-1]):
            # <k+1, n-k-1| a†b |k, n-k> = sqrt((k+1)(n-k))
            elem = theta * np.sqrt((k + 1) * (n - k))
            gen[i + 1, i] = -elem
            gen[i, i + 1] = elem
        block = expm(gen) if size > 1 else np.ones((1, 1))
        idx = ks * d + (n - ks)  # flat index of |k, n-k>
        u[np.ix_(idx, idx)] = block
    return _freeze(u)


def _apply_mode_pair(grid: np.ndarray, matrix: np.ndarray, i: int, j: int) -> np.ndarray:
    """Apply a two-mode operator (dim d^2 x d^2) to modes (i, j) of a state grid."""
    k = grid.ndim
    d = grid.shape[0]
    moved = np.moveaxis(grid, (i, j), (k - 2, k - 1))
    flat = moved.reshape(-1, d * d)
    out = flat @ matrix.T
    return np.moveaxis(out.reshape(moved.shape), (k - 2, k - 1), (i, j))


def beam_splitter(state: FockVector, transmittance: float, modes: tuple[int, int] = (0, 1)) -> FockVector:
    """Mix two modes of a state on a beam splitter of the given transmittance."""
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError(f"transmittance must lie in [0, 1], got {transmittance}")
    i, j = modes
    if i == j or not (0 <= i < state.modes and 0 <= j < state.modes):
        raise ValueError(f"invalid mode pair {modes} for a {state.modes}-mode state")
    u = _beam_splitter_matrix(state.cutoff, float(transmittance))
    out = _apply_mode_pair(state.grid(), u, i, j)
    return FockVector(state.cutoff, state.modes, out.ravel())


# ---------------------------------------------------------------------------
# projectors, loss, partial trace


def total_photon_projector(modes: int, n: int, cutoff: int) -> FockOperator:
    """Projector onto the subspace with exactly ``n`` photons across all modes."""
    if not 0 <= n <= modes * cutoff:
        raise ValueError(f"total photon number {n} outside [0, {modes * cutoff}]")
    totals = _total_occupation(modes, cutoff)
    return FockOperator(cutoff, modes, np.diag((totals == n).astype(complex)))


def _total_occupation(modes: int, cutoff: int) -> np.ndarray:
    per_mode = np.arange(cutoff + 1)
    totals = np.zeros(1, dtype=int)
    for _ in range(modes):
        totals = np.add.outer(totals, per_mode).ravel()
    return totals


def total_photon_distribution(state) -> np.ndarray:
    """Probability of each total photon number 0..modes*cutoff for a vector or operator."""
    totals = _total_occupation(state.modes, state.cutoff)
    size = state.modes * state.cutoff + 1
    if isinstance(state, FockVector):
        weights = np.abs(state.amplitudes) ** 2
    else:
        weights = np.real(np.diag(state.entries))
    return np.bincount(totals, weights=weights, minlength=size)


def _kraus_loss_ops(cutoff: int, survival: float) -> list[np.ndarray]:
    d = cutoff + 1
    ns = np.arange(d)
    a = np.diag(np.sqrt(ns[1:]), k=1)  # annihilation
    damp = np.diag(np.power(survival, ns / 2.0))
    ops = []
    ak = np.eye(d, dtype=float)
    coeff = 1.0
    for k in range(d):
        if k > 0:
            ak = a @ ak
            coeff *= (1.0 - survival) / k
        ops.append(np.sqrt(coeff) * (damp @ ak))
    return ops


def loss_channel(state, survival: float) -> FockOperator:
    """Pure-loss channel: each photon independently survives with probability ``survival``.

    Accepts a single-mode FockVector or FockOperator and returns the density
    operator after the lost photons are traced out.  Trace-preserving on the
    truncated space.  Multi-mode loss is modelled elsewhere by mixing each
    mode with an explicit vacuum ancilla on a beam splitter.
    """
    if not 0.0 <= survival <= 1.0:
        raise ValueError(f"survival must lie in [0, 1], got {survival}")
    if state.modes != 1:
        raise ValueError("loss_channel handles single-mode states only")
    rho = state.density().entries if isinstance(state, FockVector) else state.entries
    out = np.zeros_like(rho)
    for k_op in _kraus_loss_ops(state.cutoff, float(survival)):
        out += k_op @ rho @ k_op.conj().T
    return FockOperator(state.cutoff, 1, out)


def partial_trace(state, keep: tuple[int, ...]) -> FockOperator:
    """Reduced density operator on the ``keep`` modes (order preserved)."""
    rho = state.density() if isinstance(state, FockVector) else state
    keep = tuple(keep)
    if not keep or len(set(keep)) != len(keep):
        raise ValueError("keep must list distinct modes")
    if any(not 0 <= m < rho.modes for m in keep):
        raise ValueError(f"keep modes {keep} out of range for {rho.modes} modes")
    d = rho.cutoff + 1
    k = rho.modes
    grid = rho.entries.reshape((d,) * (2 * k))
    traced = [m for m in range(k) if m not in keep]
    for offset, m in enumerate(sorted(traced)):
        ax = m - offset
        grid = np.trace(grid, axis1=ax, axis2=ax + grid.ndim // 2)
    # the surviving axes run in increasing mode order; permute to `keep` order
    survivors = sorted(keep)
    perm = [survivors.index(m) for m in keep]
    n = len(keep)
    grid = np.transpose(grid, axes=perm + [n + p for p in perm])
    return FockOperator(rho.cutoff, n, grid.reshape(d ** n, d ** n))
