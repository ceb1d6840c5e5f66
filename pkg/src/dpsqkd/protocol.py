"""Monte Carlo simulation of the block-wise DPS protocol.

Blocks are emitted i.i.d.; each block draws a uniform three-bit pattern,
samples a detection outcome from the exact per-pattern click distribution,
and contributes to sifting, sampled error estimation, and the error
correction / privacy amplification accounting.  Runs are deterministic given
the seed: the pattern choice, the click draw, the sampling marks, and the
optional exogenous bit flips each consume an independent derived stream.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from .bounds import NoDetections, binary_entropy, phase_error_bound
from .oracle import OUTCOME_COLUMNS, per_pattern_click_probs
from .source import CoherentSourceSpec, coherent_pchar

_CHUNK = 1 << 20

#: exact column order of the simulation CSV row
SIM_CSV_HEADER = "n_blocks,eta,mu,a_percent,seed,Q_hat,ebit_hat,sifted,ec_bits,pa_bits,key_bits,rate_per_pulse"


def _pattern_bits(pattern: int) -> tuple[int, int, int]:
    return (pattern >> 2) & 1, (pattern >> 1) & 1, pattern & 1


def _correct_bits() -> np.ndarray:
    """Alice's key bit per (pattern, slot): the parity of the adjacent pattern bits."""
    out = np.zeros((8, 2), dtype=np.int64)
    for p in range(8):
        b1, b2, b3 = _pattern_bits(p)
        out[p] = (b1 ^ b2, b2 ^ b3)
    return out


@dataclass(frozen=True)
class OutcomeTable:
    """Per-pattern distribution over the four click outcomes (remainder = no detection)."""

    probs: np.ndarray  # shape (8, 4), columns follow OUTCOME_COLUMNS

    def __post_init__(self):
        p = np.ascontiguousarray(self.probs, dtype=float)
        if p.shape != (8, 4):
            raise ValueError(f"outcome table must be (8, 4), got {p.shape}")
        if np.any(p < 0.0):
            raise ValueError("outcome probabilities must be non-negative")
        if np.any(p.sum(axis=1) > 1.0 + 1e-12):
            raise ValueError("outcome probabilities of a pattern must sum to at most 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_channel(cls, source: CoherentSourceSpec, eta: float,
                     misalignment_phase: float = 0.0, cutoff: int | None = None) -> "OutcomeTable":
        return cls(per_pattern_click_probs(source, eta, misalignment_phase, cutoff))

    def ordered_cdf(self) -> np.ndarray:
        """Cumulative outcome thresholds with columns (correct_1, error_1, correct_2, error_2).

        Ordering the correct outcome of each slot first keeps the per-slot
        boundaries fixed as misalignment grows, so a block's draw can only
        migrate from correct to erroneous, never back.
        """
        correct = _correct_bits()
        ordered = np.zeros_like(self.probs)
        col_of = {jk: c for c, jk in enumerate(OUTCOME_COLUMNS)}
        for p in range(8):
            for s, j in enumerate((1, 2)):
                good = int(correct[p, s])
                ordered[p, 2 * s] = self.probs[p, col_of[(j, good)]]
                ordered[p, 2 * s + 1] = self.probs[p, col_of[(j, good ^ 1)]]
        return np.cumsum(ordered, axis=1)


class BlockOutcome(NamedTuple):
    pattern: int
    detected: bool
    slot: int        # 0 when undetected
    bob_bit: int     # -1 when undetected
    alice_bit: int   # -1 when undetected


def sample_block(outcome_dist: OutcomeTable, rng: np.random.Generator) -> BlockOutcome:
    """Draw one block: a uniform bit pattern, then a click outcome (or none)."""
    if not isinstance(outcome_dist, OutcomeTable):
        outcome_dist = OutcomeTable(np.asarray(outcome_dist, dtype=float))
    pattern = int(rng.integers(0, 8))
    u = float(rng.random())
    cdf = outcome_dist.ordered_cdf()[pattern]
    idx = int(np.searchsorted(cdf, u, side="right"))
    if idx >= 4:
        return BlockOutcome(pattern, False, 0, -1, -1)
    slot = 1 + idx // 2
    correct = int(_correct_bits()[pattern, slot - 1])
    bob = correct ^ (idx % 2)
    return BlockOutcome(pattern, True, slot, bob, correct)


@dataclass(frozen=True)
class ProtocolConfig:
    """Inputs of one simulated run."""

    n_blocks: int
    source: CoherentSourceSpec
    eta: float
    misalignment_phase: float = 0.0
    sample_fraction: float = 0.05
    seed: int = 0
    ebit_override: float | None = None  # exogenous flip probability on Bob's raw bits
    cutoff: int | None = None

    def __post_init__(self):
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be >= 1")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if not 0.0 < self.sample_fraction < 1.0:
            raise ValueError("sample_fraction must lie strictly between 0 and 1")
        if self.ebit_override is not None and not 0.0 <= self.ebit_override <= 1.0:
            raise ValueError("ebit_override must lie in [0, 1]")


@dataclass(frozen=True)
class ProtocolTally:
    """Counters and key accounting of one finished run."""

    n_emitted: int
    n_detected: int
    counts_by_outcome: tuple  # counts ordered as OUTCOME_COLUMNS
    n_sampled: int
    n_sample_errors: int
    sifted_length: int
    q_hat: float
    ebit_hat: float
    eph_upper: float
    ec_cost_bits: float
    pa_removed_bits: float
    final_key_bits: float
    rate_per_pulse: float
    no_detections: bool = False

    def __post_init__(self):
        if self.n_detected > self.n_emitted:
            raise ValueError("detected blocks cannot exceed emitted blocks")
        if self.sifted_length != self.n_detected - self.n_sampled:
            raise ValueError("sifted_length must equal n_detected - n_sampled")
        if self.final_key_bits < 0.0:
            raise ValueError("final_key_bits must be non-negative")

    def to_record(self) -> str:
        """Flat key=value text record, one field per line."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "counts_by_outcome":
                for (j, k), c in zip(OUTCOME_COLUMNS, value):
                    lines.append(f"count_slot{j}_bit{k}={c}")
            else:
                lines.append(f"{f.name}={value!r}")
        return "\n".join(lines) + "\n"


def run_protocol(config: ProtocolConfig, outcome_table: OutcomeTable | None = None) -> ProtocolTally:
    """Execute the full emit / detect / sift / estimate / account loop.

    Vectorized in chunks; identical configs (seed included) produce
    bit-identical tallies.  The phase-error bound is evaluated at the
    empirical detection rate and sampled error rate against the source's
    characterized photon statistics.
    """
    table = outcome_table or OutcomeTable.from_channel(
        config.source, config.eta, config.misalignment_phase, config.cutoff
    )
    cdf = table.ordered_cdf()
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(4)]
    s_pattern, s_click, s_mark, s_flip = streams

    n_detected = 0
    n_sampled = 0
    n_sample_errors = 0
    clicks = np.zeros(4, dtype=np.int64)
    correct = _correct_bits()

    remaining = config.n_blocks
    while remaining > 0:
        m = min(remaining, _CHUNK)
        remaining -= m
        patterns = s_pattern.integers(0, 8, size=m)
        u = s_click.random(m)
        marks = s_mark.random(m) < config.sample_fraction
        flips = (
            s_flip.random(m) < config.ebit_override
            if config.ebit_override is not None
            else np.zeros(m, dtype=bool)
        )
        idx = (u[:, None] >= cdf[patterns]).sum(axis=1)
        detected = idx < 4
        idx_d = idx[detected]
        slot_d = idx_d // 2           # 0-based slot
        err_d = (idx_d % 2 == 1) ^ flips[detected]
        bob_d = correct[patterns[detected], slot_d] ^ err_d
        clicks += np.bincount(slot_d * 2 + bob_d, minlength=4)
        sampled_d = marks[detected]
        n_detected += int(detected.sum())
        n_sampled += int(sampled_d.sum())
        n_sample_errors += int((sampled_d & err_d).sum())

    sifted = n_detected - n_sampled
    q_hat = n_detected / config.n_blocks
    ebit_hat = (n_sample_errors / n_sampled) if n_sampled > 0 else 0.0
    stats = coherent_pchar(config.source)
    no_detections = n_detected == 0
    try:
        eph_upper = phase_error_bound(q_hat, min(ebit_hat, 1.0), stats).ephU
    except NoDetections:
        eph_upper = 1.0
    h_bit = binary_entropy(min(ebit_hat, 1.0))
    h_ph = binary_entropy(eph_upper)
    ec_cost = sifted * h_bit
    pa_removed = sifted * h_ph
    final = max(0.0, sifted * (1.0 - h_bit - h_ph))
    return ProtocolTally(
        n_emitted=config.n_blocks,
        n_detected=n_detected,
        counts_by_outcome=tuple(int(c) for c in clicks),
        n_sampled=n_sampled,
        n_sample_errors=n_sample_errors,
        sifted_length=sifted,
        q_hat=q_hat,
        ebit_hat=ebit_hat,
        eph_upper=eph_upper,
        ec_cost_bits=ec_cost,
        pa_removed_bits=pa_removed,
        final_key_bits=final,
        rate_per_pulse=final / (3.0 * config.n_blocks),
        no_detections=no_detections,
    )


def simulate_csv(config: ProtocolConfig, tally: ProtocolTally) -> str:
    """CSV header plus the single result row for one run."""
    row = [
        repr(config.n_blocks), repr(float(config.eta)), repr(float(config.source.mu)),
        repr(float(config.source.fluctuation_percent)), repr(config.seed),
        repr(float(tally.q_hat)), repr(float(tally.ebit_hat)), repr(tally.sifted_length),
        repr(float(tally.ec_cost_bits)), repr(float(tally.pa_removed_bits)),
        repr(float(tally.final_key_bits)), repr(float(tally.rate_per_pulse)),
    ]
    return SIM_CSV_HEADER + "\n" + ",".join(row) + "\n"
