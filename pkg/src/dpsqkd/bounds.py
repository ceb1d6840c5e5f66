"""Phase-error and secret-key-rate bounds for the three-pulse DPS protocol.

Given the characterized source parameters, the observed detection rate Q and
bit error rate, these functions evaluate the closed-form upper bound on the
phase error rate, turn it into an asymptotic key rate per pulse, optimize
the pulse intensity, and sweep channel transmissions to produce rate curves.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from .source import CoherentSourceSpec, PhotonStats, coherent_pchar, poisson_tail, t_param

LAMBDA = 3.0 + np.sqrt(5.0)

#: exact column order of rate-sweep CSV output
CSV_HEADER = "eta,mu,a_percent,e_bit,Q,f_EC,t,sU1,sU3,sUge2,eph_upper,R"

MU_GRID = np.logspace(-6.0, 0.0, 400)
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class NoDetections(ValueError):
    """Raised when a bound is requested at zero detection rate."""


def binary_entropy(x):
    """Binary entropy in bits, saturated at 1 above x = 0.5.

    h(x) = -x log2 x - (1-x) log2 (1-x) for 0 <= x <= 0.5 (with h(0) = 0 by
    the 0 log 0 = 0 convention) and h(x) = 1 for x > 0.5.  Accepts scalars
    or arrays; values outside [0, 1] are a domain error.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"binary_entropy domain is [0, 1], got {x}")
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(arr > 0.0, -arr * np.log2(np.where(arr > 0.0, arr, 1.0)), 0.0)
        q = 1.0 - arr
        qlogq = np.where(q > 0.0, -q * np.log2(np.where(q > 0.0, q, 1.0)), 0.0)
    h = np.where(arr > 0.5, 1.0, plogp + qlogq)
    return float(h) if np.ndim(x) == 0 else h


@dataclass(frozen=True)
class SecurityBound:
    """Intermediate and final quantities of the phase-error bound at one operating point."""

    t: float
    sU1: float
    sU3: float
    sUge2: float
    ephU: float
    eph_raw: float  # before clamping to [0, 1]

    def __post_init__(self):
        for name in ("t", "sU1", "sU3", "sUge2", "ephU"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if max(self.sU1, self.sU3, self.sUge2, self.ephU) > 1.0:
            raise ValueError("clamped bound fields must not exceed 1")


def s_bounds(stats: PhotonStats):
    """Upper bounds on Pr{single prediction-register pattern} per block.

    Returns (sU1, sU3, sUge2) where, with t the vacuum-mismatch parameter,
        sU1   = q1 + 3t
        sU3   = q3 + t^3 + 6t^2 + 3t
        sUge2 = q2 + t^3 + 9t^2 + 6t,
    each clamped to [0, 1] since it bounds a probability.
    """
    t = t_param(stats)
    s1 = np.clip(stats.q1 + 3.0 * t, 0.0, 1.0)
    s3 = np.clip(stats.q3 + t**3 + 6.0 * t**2 + 3.0 * t, 0.0, 1.0)
    sge2 = np.clip(stats.q2 + t**3 + 9.0 * t**2 + 6.0 * t, 0.0, 1.0)
    if np.ndim(t) == 0:
        return float(s1), float(s3), float(sge2)
    return s1, s3, sge2


def phase_error_bound(Q: float, ebit: float, stats: PhotonStats) -> SecurityBound:
    """Upper bound on the phase error rate from observables and source statistics.

    eph <= lambda*ebit + (lambda*sqrt(sU1*sU3) + sUge2)/Q with
    lambda = 3 + sqrt(5).  The raw value is kept alongside the [0, 1] clamp.
    """
    if Q <= 0.0:
        raise NoDetections("phase error bound undefined at Q = 0 (treat as rate 0)")
    if not 0.0 <= ebit <= 1.0:
        raise ValueError(f"ebit must lie in [0, 1], got {ebit}")
    t = t_param(stats)
    s1, s3, sge2 = s_bounds(stats)
    raw = LAMBDA * ebit + (LAMBDA * np.sqrt(s1 * s3) + sge2) / Q
    return SecurityBound(
        t=float(t), sU1=s1, sU3=s3, sUge2=sge2,
        ephU=float(np.clip(raw, 0.0, 1.0)), eph_raw=float(raw),
    )


def key_rate(Q: float, ebit: float, f_EC: float, ephU: float) -> float:
    """Asymptotic secret key rate per pulse.

    R = max(0, Q (1 - f_EC - h(ephU)) / 3); the division by three converts
    the per-block yield to per-pulse (three pulses per block).  ``ebit``
    enters only through the caller's choice of f_EC and ephU.
    """
    if not 0.0 <= Q <= 1.0:
        raise ValueError(f"Q must lie in [0, 1], got {Q}")
    if not 0.0 <= ebit <= 1.0:
        raise ValueError(f"ebit must lie in [0, 1], got {ebit}")
    if f_EC < 0.0:
        raise ValueError(f"f_EC must be non-negative, got {f_EC}")
    return float(max(0.0, Q * (1.0 - f_EC - binary_entropy(ephU)) / 3.0))


def closed_form_Q(eta: float, mu: float) -> float:
    """Detection rate of the lossless-detector coherent model: 2*eta*mu*e^{-2*eta*mu}."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if mu <= 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    return float(2.0 * eta * mu * np.exp(-2.0 * eta * mu))


def _rate_curve(eta: float, a_percent: float, ebit: float, mus: np.ndarray, f_ec: float) -> np.ndarray:
    """Vectorized key rate over an array of intensities (shared by the optimizer)."""
    scale_hi = 1.0 + 0.01 * a_percent
    scale_lo = 1.0 - 0.01 * a_percent
    p_up = np.exp(-scale_lo * mus)
    p_lo = np.exp(-scale_hi * mus)
    t = (np.sqrt(p_up) - np.sqrt(p_lo)) ** 2 / 4.0
    mean = 3.0 * scale_hi * mus
    q1 = poisson_tail(1, mean)
    q2 = poisson_tail(2, mean)
    q3 = poisson_tail(3, mean)
    s1 = np.clip(q1 + 3.0 * t, 0.0, 1.0)
    s3 = np.clip(q3 + t**3 + 6.0 * t**2 + 3.0 * t, 0.0, 1.0)
    sge2 = np.clip(q2 + t**3 + 9.0 * t**2 + 6.0 * t, 0.0, 1.0)
    big_q = 2.0 * eta * mus * np.exp(-2.0 * eta * mus)
    eph = np.clip(LAMBDA * ebit + (LAMBDA * np.sqrt(s1 * s3) + sge2) / big_q, 0.0, 1.0)
    return np.maximum(0.0, big_q * (1.0 - f_ec - binary_entropy(eph)) / 3.0)


class MuOptimum(NamedTuple):
    mu: float
    rate: float
    feasible: bool  # False when no intensity on the search grid yields a positive rate


def optimize_mu(eta: float, a_percent: float, ebit: float, f_ec: float | None = None) -> MuOptimum:
    """Best pulse intensity and rate at one channel transmission.

    Scans a 400-point log grid over [1e-6, 1], then refines around the best
    grid point by golden-section search down to 1e-6 relative bracket width.
    f_EC defaults to h(ebit).  When every grid point gives zero rate the
    result carries the grid minimum and ``feasible=False``.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if not 0.0 <= ebit <= 0.5:
        raise ValueError(f"ebit must lie in [0, 0.5], got {ebit}")
    if f_ec is None:
        f_ec = binary_entropy(ebit)
    rates = _rate_curve(eta, a_percent, ebit, MU_GRID, f_ec)
    best = int(np.argmax(rates))
    if rates[best] <= 0.0:
        return MuOptimum(float(MU_GRID[0]), 0.0, False)

    lo = float(MU_GRID[max(best - 1, 0)])
    hi = float(MU_GRID[min(best + 1, MU_GRID.size - 1)])
    evaluated = {float(MU_GRID[best]): float(rates[best])}

    def rate_at(mu: float) -> float:
        if mu not in evaluated:
            evaluated[mu] = float(_rate_curve(eta, a_percent, ebit, np.array([mu]), f_ec)[0])
        return evaluated[mu]

    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    while (hi - lo) > 1e-6 * hi:
        if rate_at(x1) < rate_at(x2):
            lo, x1 = x1, x2
            x2 = lo + _GOLDEN * (hi - lo)
        else:
            hi, x2 = x2, x1
            x1 = hi - _GOLDEN * (hi - lo)
    mu_best, r_best = max(evaluated.items(), key=lambda kv: kv[1])
    return MuOptimum(float(mu_best), float(r_best), True)


@dataclass(frozen=True)
class KeyRatePoint:
    """One row of a rate sweep; field order matches the CSV columns."""

    eta: float
    mu: float
    a_percent: float
    e_bit: float
    Q: float
    f_EC: float
    t: float
    sU1: float
    sU3: float
    sUge2: float
    eph_upper: float
    R: float

    def csv_row(self) -> str:
        return ",".join(repr(float(getattr(self, f.name))) for f in fields(self))


def evaluate_point(eta: float, mu: float, a_percent: float, ebit: float,
                   f_ec: float | None = None) -> KeyRatePoint:
    """Full bound pipeline at a single operating point."""
    if f_ec is None:
        f_ec = binary_entropy(ebit)
    stats = coherent_pchar(CoherentSourceSpec(mu, a_percent))
    q = closed_form_Q(eta, mu)
    bound = phase_error_bound(q, ebit, stats)
    r = key_rate(q, ebit, f_ec, bound.ephU)
    return KeyRatePoint(eta, mu, a_percent, ebit, q, f_ec, bound.t,
                        bound.sU1, bound.sU3, bound.sUge2, bound.ephU, r)


def sweep(eta_grid, a_list, ebit: float, mu_policy, f_ec: float | None = None) -> list[KeyRatePoint]:
    """Rate table over channel transmissions and fluctuation levels.

    ``mu_policy`` is either the string ``"optimized"`` (pick the best
    intensity per point) or a fixed positive intensity.  Rows are ordered
    deterministically, transmission outer, fluctuation inner.
    """
    etas = [float(e) for e in eta_grid]
    fluctuations = [float(a) for a in a_list]
    if not etas or not fluctuations:
        raise ValueError("eta_grid and a_list must be non-empty")
    optimize = isinstance(mu_policy, str)
    if optimize and mu_policy != "optimized":
        raise ValueError(f"mu_policy must be 'optimized' or a number, got {mu_policy!r}")
    points = []
    for eta in etas:
        for a in fluctuations:
            if optimize:
                mu = optimize_mu(eta, a, ebit, f_ec).mu
            else:
                mu = float(mu_policy)
            points.append(evaluate_point(eta, mu, a, ebit, f_ec))
    return points


def sweep_to_csv(points: list[KeyRatePoint]) -> str:
    """CSV text with the frozen header; floats printed in round-trip form."""
    return "\n".join([CSV_HEADER] + [p.csv_row() for p in points]) + "\n"
