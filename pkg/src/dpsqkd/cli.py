"""Command-line front end.

Subcommands: ``keyrate`` (rate sweeps to CSV), ``verify`` (operator and
bound verification report), ``simulate`` (Monte Carlo protocol run), and
``pchar`` (source characterization record).  Exit codes: 0 success, 1
verification failure, 2 usage or validation error.

A flat key=value config file (``--config``) supplies defaults that explicit
flags override.  If the environment variable ``DPSQKD_OUT_DIR`` is set,
relative ``--out`` paths are created inside it.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds, oracle, protocol
from .source import CoherentSourceSpec, coherent_pchar, exact_pchar, RECORD_KEYS
from .fock import coherent_vector, suggest_cutoff

ENV_OUT_DIR = "DPSQKD_OUT_DIR"


def parse_grid(text: str) -> list[float]:
    """Parse ``start:stop:count[log]``, a comma list, or a single number."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid must be start:stop:count[log], got {text!r}")
        start, stop = float(parts[0]), float(parts[1])
        count_text = parts[2]
        log = count_text.endswith("log")
        count = int(count_text[:-3] if log else count_text)
        if count < 1:
            raise ValueError("grid count must be >= 1")
        if count == 1:
            return [start]
        if log:
            if start <= 0 or stop <= 0:
                raise ValueError("log grids need positive endpoints")
            return [float(v) for v in np.logspace(np.log10(start), np.log10(stop), count)]
        return [float(v) for v in np.linspace(start, stop, count)]
    if "," in text:
        return [float(v) for v in text.split(",") if v.strip()]
    return [float(text)]


def _load_config(path: str) -> dict[str, str]:
    values = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"malformed config line: {line!r}")
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def _resolve_out(path: str | None):
    if path is None:
        return None
    p = Path(path)
    out_dir = os.environ.get(ENV_OUT_DIR)
    if out_dir and not p.is_absolute():
        p = Path(out_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _emit(text: str, out_path) -> None:
    if out_path is None:
        sys.stdout.write(text)
    else:
        out_path.write_text(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpsqkd",
        description="Key-rate bounds, exact verification, and protocol simulation "
                    "for three-pulse DPS QKD with two i.i.d. sources.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    kr = sub.add_parser("keyrate", help="rate sweep over channel transmissions, CSV output")
    kr.add_argument("--eta", default="0.001:1:50log",
                    help="transmission grid: start:stop:count[log], comma list, or one value")
    kr.add_argument("--a", default="0", help="comma list of intensity-fluctuation percentages")
    kr.add_argument("--ebit", type=float, default=0.01, help="assumed bit error rate")
    kr.add_argument("--mu", default="optimize",
                    help="'optimize' or a fixed mean photon number per pulse")
    kr.add_argument("--fec", type=float, default=None,
                    help="error-correction cost (default: binary entropy of --ebit)")
    kr.add_argument("--out", help="CSV output path (default: stdout)")

    vf = sub.add_parser("verify", help="operator and bound verification report")
    vf.add_argument("--pairs", type=int, default=20, help="number of random coherent pairs")
    vf.add_argument("--sigmas", type=int, default=2000, help="random states for the relation suite")
    vf.add_argument("--seed", type=int, default=12345)
    vf.add_argument("--max-mean", type=float, default=0.5,
                    help="largest per-pulse mean photon number of random pairs")
    vf.add_argument("--skip-grid", action="store_true", help="check only random pairs")
    vf.add_argument("--perturb-w2", type=float, default=None,
                    help="deliberately wrong middle-pulse weight (harness self-test)")
    vf.add_argument("--out", help="report output path (default: stdout)")

    sim = sub.add_parser("simulate", help="Monte Carlo protocol run, CSV output")
    sim.add_argument("--blocks", type=int, default=None, help="number of emitted blocks")
    sim.add_argument("--eta", type=float, default=None)
    sim.add_argument("--mu", type=float, default=None)
    sim.add_argument("--a", type=float, default=0.0, help="intensity fluctuation percent")
    sim.add_argument("--misalignment", type=float, default=0.0,
                     help="interferometer phase offset in radians")
    sim.add_argument("--sample-fraction", type=float, default=0.05)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--ebit-override", type=float, default=None,
                     help="exogenous flip probability applied to Bob's raw bits")
    sim.add_argument("--no-phase-encoding", action="store_true")
    sim.add_argument("--cutoff", type=int, default=None)
    sim.add_argument("--format", choices=("csv", "text"), default="csv")
    sim.add_argument("--out", help="output path (default: stdout)")

    pc = sub.add_parser("pchar", help="characterized photon statistics of a source")
    pc.add_argument("--mu", type=float, default=None, help="mean photon number per pulse")
    pc.add_argument("--a", type=float, default=0.0, help="intensity fluctuation percent")
    pc.add_argument("--state-file", default=None,
                    help="key=value file with complex amplitudes alpha0, alpha1 (optional cutoff)")
    pc.add_argument("--format", choices=("text", "csv"), default="text")
    pc.add_argument("--out", help="output path (default: stdout)")

    for sp in (kr, vf, sim, pc):
        sp.add_argument("--config", help="flat key=value file supplying flag defaults")
    parser._dpsqkd_subparsers = {"keyrate": kr, "verify": vf, "simulate": sim, "pchar": pc}
    return parser


def cmd_keyrate(args) -> int:
    etas = parse_grid(args.eta)
    a_list = parse_grid(args.a)
    policy = args.mu
    if isinstance(policy, str) and policy not in ("optimize", "optimized"):
        policy = float(policy)
    elif isinstance(policy, str):
        policy = "optimized"
    points = bounds.sweep(etas, a_list, args.ebit, policy, args.fec)
    _emit(bounds.sweep_to_csv(points), _resolve_out(args.out))
    for a in a_list:
        best = max((p for p in points if p.a_percent == a), key=lambda p: p.R)
        print(f"a={a:g}%: max R={best.R:.6e} per pulse at eta={best.eta:.6g}, mu={best.mu:.6g}")
    return 0


def _format_report(checks: list[oracle.BoundCheck]) -> str:
    lines = [f"{'name':<40} {'lhs':>14} {'rhs':>14} {'slack':>14} verdict"]
    for c in checks:
        verdict = "PASS" if c.ok else "FAIL"
        lines.append(f"{c.name:<40} {c.lhs:>14.6e} {c.rhs:>14.6e} {c.slack:>14.6e} {verdict}")
    failures = sum(not c.ok for c in checks)
    lines.append(f"# {len(checks)} checks, {failures} failures")
    return "\n".join(lines) + "\n"


def cmd_verify(args) -> int:
    ops = oracle.build_error_operators() if args.perturb_w2 is None else \
        oracle.build_error_operators(w2=args.perturb_w2)
    checks = oracle.operator_checks(ops)
    if args.sigmas > 0:
        checks.append(oracle.phase_bit_relation_suite(args.sigmas, args.seed, ops))
    pairs = [] if args.skip_grid else oracle.structured_pairs()
    pairs += oracle.random_pairs(args.pairs, args.seed, args.max_mean)
    for idx, (a0, a1) in enumerate(pairs):
        for c in oracle.verify_appendix_bounds(a0, a1):
            checks.append(c._replace(name=f"pair{idx:03d}_{c.name}"))
    _emit(_format_report(checks), _resolve_out(args.out))
    return 0 if all(c.ok for c in checks) else 1


def cmd_simulate(args) -> int:
    for name in ("blocks", "eta", "mu"):
        if getattr(args, name) is None:
            raise ValueError(f"simulate requires --{name} (flag or config file)")
    source = CoherentSourceSpec(args.mu, args.a, phase_encoded=not args.no_phase_encoding)
    config = protocol.ProtocolConfig(
        n_blocks=args.blocks,
        source=source,
        eta=args.eta,
        misalignment_phase=args.misalignment,
        sample_fraction=args.sample_fraction,
        seed=args.seed,
        ebit_override=args.ebit_override,
        cutoff=args.cutoff,
    )
    tally = protocol.run_protocol(config)
    text = protocol.simulate_csv(config, tally) if args.format == "csv" else tally.to_record()
    _emit(text, _resolve_out(args.out))
    return 0


def cmd_pchar(args) -> int:
    if (args.mu is None) == (args.state_file is None):
        raise ValueError("pchar needs exactly one of --mu or --state-file")
    if args.mu is not None:
        stats = coherent_pchar(CoherentSourceSpec(args.mu, args.a))
    else:
        fields = _load_config(args.state_file)
        try:
            alpha0 = complex(fields["alpha0"])
            alpha1 = complex(fields["alpha1"])
        except KeyError as missing:
            raise ValueError(f"state file must define {missing.args[0]}") from None
        mean = max(abs(alpha0) ** 2, abs(alpha1) ** 2)
        cutoff = int(fields.get("cutoff", max(20, suggest_cutoff(mean))))
        stats = exact_pchar(
            coherent_vector(alpha0, cutoff).density(),
            coherent_vector(alpha1, cutoff).density(),
        )
    if args.format == "csv":
        header = ",".join(RECORD_KEYS)
        row = ",".join(repr(getattr(stats, k)) for k in RECORD_KEYS)
        text = header + "\n" + row + "\n"
    else:
        text = stats.to_record()
    _emit(text, _resolve_out(args.out))
    return 0


_COMMANDS = {
    "keyrate": cmd_keyrate,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "pchar": cmd_pchar,
}


def _convert_config_value(action: argparse.Action, text: str):
    if isinstance(action, argparse._StoreTrueAction):
        return text.strip().lower() in ("1", "true", "yes", "on")
    if action.type is not None:
        return action.type(text)
    return text


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # config file values become per-subcommand defaults; explicit flags still win
    if "--config" in argv:
        try:
            cfg_path = argv[argv.index("--config") + 1]
        except IndexError:
            print("error: --config needs a path", file=sys.stderr)
            return 2
        try:
            values = _load_config(cfg_path)
            for sp in parser._dpsqkd_subparsers.values():
                defaults = {
                    action.dest: _convert_config_value(action, values[action.dest])
                    for action in sp._actions
                    if action.dest in values
                }
                sp.set_defaults(**defaults)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
