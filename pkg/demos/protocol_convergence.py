#!/usr/bin/env python3
"""Monte Carlo protocol runs converging to the analytic operating point.

Simulates the full block loop (emit, detect, sift, sample errors, account
for error correction and privacy amplification) at increasing depths and
compares the empirical detection and error rates with their exact values,
then checks the resulting key rate against the closed-form bound pipeline.

Run:  python3 demos/protocol_convergence.py
"""

import numpy as np

from dpsqkd import bounds, oracle, protocol, source

eta = 0.5
misalignment = 2.0 * np.arcsin(0.1)   # exact bit error rate 1%

opt = bounds.optimize_mu(eta, 0.0, 0.01)
spec = source.CoherentSourceSpec(opt.mu, 0.0)
q_exact, e_exact = oracle.channel_detection_stats(spec, eta, misalignment)
analytic = bounds.evaluate_point(eta, opt.mu, 0.0, e_exact)

print(f"operating point: eta={eta}, optimized mu={opt.mu:.6f}")
print(f"exact detection rate Q={q_exact:.6e}, exact bit error rate={e_exact:.4%}")
print(f"analytic key rate per pulse: {analytic.R:.6e}\n")

table = protocol.OutcomeTable.from_channel(spec, eta, misalignment)

print(f"{'blocks':>10} {'Q_hat':>12} {'pull':>7} {'ebit_hat':>10} {'pull':>7} {'rate/pulse':>12}")
for exponent in (4, 5, 6, 7):
    n = 10**exponent
    cfg = protocol.ProtocolConfig(n, spec, eta, misalignment_phase=misalignment,
                                  sample_fraction=0.05, seed=2718)
    tally = protocol.run_protocol(cfg, table)
    q_pull = (tally.q_hat - q_exact) / np.sqrt(q_exact * (1 - q_exact) / n)
    e_sigma = np.sqrt(e_exact * (1 - e_exact) / max(tally.n_sampled, 1))
    e_pull = (tally.ebit_hat - e_exact) / e_sigma
    print(f"{n:>10} {tally.q_hat:12.6e} {q_pull:+7.2f} {tally.ebit_hat:10.5f} "
          f"{e_pull:+7.2f} {tally.rate_per_pulse:12.6e}")

print("\n(pull = deviation in units of the binomial standard deviation)")
print(f"analytic reference:     {analytic.R:.6e} per pulse")
print("the simulated rate sits below it by the sampled fraction plus estimation noise;")
print("both shrink as the run deepens.")

# accounting breakdown of the deepest run
print("\nledger of the 10^7-block run:")
for line in tally.to_record().strip().splitlines():
    print("  " + line)
