"""Light-source models and photon-number characterization.

The security analysis consumes exactly seven source parameters: two-sided
bounds on the vacuum emission probability of each of the two signal states,
and upper bounds q1 >= q2 >= q3 on the probability that a three-pulse block
carries at least 1, 2 or 3 photons.  This module produces that parameter set
either from the closed-form coherent-source model with bounded intensity
fluctuation, or exactly from arbitrary given single-pulse density operators.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .fock import FockOperator

RECORD_KEYS = ("pL0", "pU0", "pL1", "pU1", "q1", "q2", "q3")

_SERIES_RTOL = 1e-16


def poisson_tail(n: int, mean) -> float | np.ndarray:
    """Upper tail Pr{N >= n} of a Poisson distribution.

    Summed term by term from nu = n upward until the next term is
    negligible (relative size < 1e-16), which stays accurate for small
    means where forming 1 - CDF would cancel catastrophically.
    Accepts a scalar or an array of means.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    mean_arr = np.asarray(mean, dtype=float)
    if np.any(mean_arr < 0):
        raise ValueError("mean must be non-negative")
    if n == 0:
        out = np.ones_like(mean_arr)
        return float(out) if np.isscalar(mean) else out
    # first term e^{-m} m^n / n! via logs to dodge overflow for large n
    with np.errstate(divide="ignore", invalid="ignore"):
        log_term = -mean_arr + n * np.log(mean_arr) - _log_factorial(n)
    term = np.where(mean_arr > 0, np.exp(log_term), 0.0)
    total = term.copy()
    nu = n
    while True:
        nu += 1
        term = term * mean_arr / nu
        total += term
        if np.all(term <= _SERIES_RTOL * np.maximum(total, 1e-300)):
            break
    return float(total) if np.isscalar(mean) else total


def _log_factorial(n: int) -> float:
    return float(np.sum(np.log(np.arange(1, n + 1)))) if n > 1 else 0.0


@dataclass(frozen=True)
class PhotonStats:
    """Characterized source parameters feeding the key-rate bound.

    pL*/pU* bound the vacuum emission probability of signal state 0 / 1;
    q1, q2, q3 bound the probability that a block of three pulses contains
    at least that many photons (any bit pattern).
    """

    pL0: float
    pU0: float
    pL1: float
    pU1: float
    q1: float
    q2: float
    q3: float

    def __post_init__(self):
        for key in RECORD_KEYS:
            object.__setattr__(self, key, float(getattr(self, key)))
        if not 0.0 <= self.pL0 <= self.pU0 <= 1.0:
            raise ValueError(f"need 0 <= pL0 <= pU0 <= 1, got ({self.pL0}, {self.pU0})")
        if not 0.0 <= self.pL1 <= self.pU1 <= 1.0:
            raise ValueError(f"need 0 <= pL1 <= pU1 <= 1, got ({self.pL1}, {self.pU1})")
        if not 1.0 >= self.q1 >= self.q2 >= self.q3 >= 0.0:
            raise ValueError(
                f"tail bounds must be nested, 1 >= q1 >= q2 >= q3 >= 0, got "
                f"({self.q1}, {self.q2}, {self.q3})"
            )

    def to_record(self) -> str:
        """Flat key=value text record, one field per line."""
        return "".join(f"{k}={getattr(self, k)!r}\n" for k in RECORD_KEYS)

    @classmethod
    def from_record(cls, text: str) -> "PhotonStats":
        values = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ValueError(f"malformed record line: {line!r}")
            values[key.strip()] = float(val)
        missing = set(RECORD_KEYS) - set(values)
        extra = set(values) - set(RECORD_KEYS)
        if missing or extra:
            raise ValueError(f"record keys mismatch (missing {sorted(missing)}, extra {sorted(extra)})")
        return cls(**{k: values[k] for k in RECORD_KEYS})


@dataclass(frozen=True)
class CoherentSourceSpec:
    """Coherent pulses whose mean photon number may stray a% from nominal.

    Both signal intensities lie in [(1-0.01a)mu, (1+0.01a)mu]; the bounds
    below hold wherever they actually sit.  For channel simulations a
    concrete choice is needed, so bit 0 is pinned to the top of the interval
    and bit 1 to the bottom (the widest spread).  With ``phase_encoded`` the
    two amplitudes carry opposite signs, (-1)^b sqrt(mu_b); without it both
    are +sqrt(mu_b), which leaves the security bounds untouched but gives an
    interferometer nothing to distinguish.
    """

    mu: float
    fluctuation_percent: float = 0.0
    phase_encoded: bool = True

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not 0.0 <= self.fluctuation_percent < 100.0:
            raise ValueError(
                f"fluctuation must be a percentage in [0, 100), got {self.fluctuation_percent}"
            )

    @property
    def mu_high(self) -> float:
        return (1.0 + 0.01 * self.fluctuation_percent) * self.mu

    @property
    def mu_low(self) -> float:
        return (1.0 - 0.01 * self.fluctuation_percent) * self.mu

    def intensity(self, bit: int) -> float:
        return self.mu_high if bit == 0 else self.mu_low

    def amplitude(self, bit: int) -> float:
        sign = -1.0 if (self.phase_encoded and bit == 1) else 1.0
        return sign * float(np.sqrt(self.intensity(bit)))


def coherent_pchar(spec: CoherentSourceSpec) -> PhotonStats:
    """Characterized parameters of the fluctuating coherent source.

    Vacuum probabilities: pU = e^{-(1-0.01a)mu}, pL = e^{-(1+0.01a)mu},
    identical for both bits.  Block tails q_n are upper Poisson tails at
    mean 3(1+0.01a)mu, the worst case over bit patterns.
    """
    p_upper = float(np.exp(-spec.mu_low))
    p_lower = float(np.exp(-spec.mu_high))
    mean = 3.0 * spec.mu_high
    q1, q2, q3 = (float(poisson_tail(n, mean)) for n in (1, 2, 3))
    return PhotonStats(p_lower, p_upper, p_lower, p_upper, q1, q2, q3)


def _validate_density(rho: FockOperator, name: str) -> None:
    if rho.modes != 1:
        raise ValueError(f"{name} must be a single-mode density operator")
    tr = rho.trace
    if abs(tr - 1.0) > 1e-9:
        raise ValueError(f"{name} is not normalized: trace = {tr}")
    if not rho.is_hermitian(1e-9):
        raise ValueError(f"{name} is not Hermitian")
    min_eig = float(np.min(np.linalg.eigvalsh(rho.entries)))
    if min_eig < -1e-10:
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {min_eig})")


def exact_pchar(rho0: FockOperator, rho1: FockOperator) -> PhotonStats:
    """Exact characterized parameters of two given single-pulse states.

    Vacuum probabilities are point values (lower and upper bound coincide).
    Each q_n is the largest probability, over all eight three-bit patterns,
    that the corresponding three-pulse block holds n or more photons; the
    eight-way sweep is cheap and honors the any-pattern quantifier directly.
    """
    _validate_density(rho0, "rho0")
    _validate_density(rho1, "rho1")
    if rho0.cutoff != rho1.cutoff:
        raise ValueError("rho0 and rho1 must share a cutoff")
    p0 = float(np.real(rho0.entries[0, 0]))
    p1 = float(np.real(rho1.entries[0, 0]))
    dists = [np.clip(np.real(np.diag(r.entries)), 0.0, None) for r in (rho0, rho1)]
    q = np.zeros(4)
    for bits in product((0, 1), repeat=3):
        block = np.convolve(np.convolve(dists[bits[0]], dists[bits[1]]), dists[bits[2]])
        tails = np.concatenate([np.cumsum(block[::-1])[::-1], [0.0]])
        for n in (1, 2, 3):
            q[n] = max(q[n], float(tails[n]))
    return PhotonStats(p0, p0, p1, p1, q1=q[1], q2=q[2], q3=q[3])


def t_param(stats: PhotonStats):
    """Vacuum-probability mismatch parameter entering every bound.

    max{(sqrt(pU0)-sqrt(pL1))^2, (sqrt(pL0)-sqrt(pU1))^2} / 4, which lies in
    [0, 1/4] and vanishes when both states surely share a vacuum probability.
    Vectorizes over array-valued stats fields.
    """
    first = (np.sqrt(stats.pU0) - np.sqrt(stats.pL1)) ** 2
    second = (np.sqrt(stats.pL0) - np.sqrt(stats.pU1)) ** 2
    t = np.maximum(first, second) / 4.0
    return float(t) if np.ndim(t) == 0 else t
