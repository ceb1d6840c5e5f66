#!/usr/bin/env python3
"""Secret key rate vs channel transmission under intensity fluctuations.

Sweeps the channel transmission over three decades with the pulse intensity
optimized at every point, for fluctuation levels of 0, 1, 3 and 5%.  The
punchline: even 5% intensity uncertainty barely dents the achievable rate.

Writes rate_sweep.csv next to this script (and rate_sweep.png when
matplotlib is importable).

Run:  python3 demos/rate_sweep_with_fluctuations.py
"""

from pathlib import Path

import numpy as np

from dpsqkd import bounds

HERE = Path(__file__).resolve().parent

etas = np.logspace(-3.0, 0.0, 50)
fluctuations = [0.0, 1.0, 3.0, 5.0]

print("sweeping 50 transmissions x 4 fluctuation levels (intensity optimized)...")
points = bounds.sweep(etas, fluctuations, ebit=0.01, mu_policy="optimized")

csv_path = HERE / "rate_sweep.csv"
csv_path.write_text(bounds.sweep_to_csv(points))
print(f"wrote {csv_path}")

# a small excerpt: one row per decade, fluctuation-free column first
print(f"\n{'eta':>8} {'mu*':>10} {'R(a=0)':>12} {'R(a=1)':>12} {'R(a=3)':>12} {'R(a=5)':>12}")
for i, eta in enumerate(etas):
    if i % 12 and i != len(etas) - 1:
        continue
    row = points[4 * i: 4 * i + 4]
    rates = " ".join(f"{p.R:12.4e}" for p in row)
    print(f"{eta:8.4f} {row[0].mu:10.6f} {rates}")

# the qualitative claim made quantitative: ordering and relative loss at eta = 1
top = points[-4:]
loss = 1.0 - top[-1].R / top[0].R
print(f"\nat eta=1: R drops only {loss:.1%} going from 0% to 5% fluctuation")
assert all(r1.R >= r2.R for r1, r2 in zip(top, top[1:]))

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.2))
    for k, a in enumerate(fluctuations):
        rs = np.array([p.R for p in points[k::4]])
        mask = rs > 0
        ax.loglog(etas[mask], rs[mask], label=f"{a:g}% fluctuation")
    ax.set_xlabel("overall channel transmission")
    ax.set_ylabel("secret key rate per pulse")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(HERE / "rate_sweep.png", dpi=150)
    print(f"wrote {HERE / 'rate_sweep.png'}")
except ImportError:
    print("matplotlib not available; skipped the plot")
