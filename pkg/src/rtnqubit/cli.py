"""Command-line interface.

All quantities are dimensionless: energies in units of a_max and times in
units of hbar / a_max (hbar = a_max = 1). Every command that writes files also
writes a ``*.manifest.json`` next to its output; ``rtnqubit replay`` re-runs a
manifest and reproduces the outputs byte for byte.
"""

import argparse
import csv
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__, fidelity, grape, pulses, rtn, su2

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3

log = logging.getLogger("rtnqubit")

_PI_RE = re.compile(r"^([-+]?(?:\d+\.?\d*|\.\d+)?)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?$")


def parse_number(text):
    """Parse ``1.5``, ``pi``, ``7pi/3`` or ``2*pi``."""
    text = text.strip().lower()
    match = _PI_RE.match(text)
    if match:
        coef = match.group(1)
        coef = float(coef) if coef not in ("", "+", "-") else float(coef + "1")
        den = float(match.group(2)) if match.group(2) else 1.0
        return coef * np.pi / den
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def number_list(text):
    values = [parse_number(part) for part in text.split(",") if part.strip()]
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def resolve_pulse(source):
    """A built-in pulse name (``pi``, ``corpse``, ``scorpse``) or a pulse file."""
    if source in pulses.ANALYTIC_PULSES:
        return source, pulses.analytic_pulse(source)
    path = Path(source)
    if not path.exists():
        raise ValueError(f"unknown pulse {source!r}: not a built-in name or an existing file")
    return path.stem, pulses.load_pulse(path)


def write_manifest(path, subcommand, params, seed, outputs):
    manifest = {
        "subcommand": subcommand,
        "parameters": params,
        "seed": seed,
        "version": __version__,
        "outputs": [str(p) for p in outputs],
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _manifest_path(out):
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def cmd_fidelity_sweep(args):
    named = dict(resolve_pulse(source) for source in args.pulse)
    kind = "state" if args.kind == "bitflip" else "gate"
    rows = fidelity.fidelity_sweep(named, args.tauc, args.delta, kind, args.ntraj, args.seed)
    out = Path(args.out)
    fidelity.write_sweep_csv(rows, out)
    write_manifest(_manifest_path(out), "fidelity-sweep", _params(args), args.seed, [out])
    log.info("wrote %d rows to %s", len(rows), out)
    return EXIT_OK


def cmd_optimize(args):
    if args.T is None and args.T_grid is None:
        raise ValueError("one of --T or --T-grid is required")
    T_grid = [args.T] if args.T is not None else args.T_grid
    config = grape.GrapeConfig(
        target=args.target,
        delta=args.delta,
        tau_c=args.tauc,
        dt=args.dt,
        n_batch=args.batch,
        seed=args.seed,
        max_iter=args.max_iter,
        initial_step=args.initial_step,
        tol=args.tol,
        resample=args.resample,
    )
    search = grape.optimize_time(config, T_grid, args.restarts)
    best = search.best
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pulse_path = out_dir / "pulse.json"
    history_path = out_dir / "history.csv"
    summary_path = out_dir / "summary.csv"
    pulses.save_pulse(best.final, pulse_path)
    grape.write_history_csv(best, history_path)
    warnings = []
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["T", "fidelity", "stderr", "batch_fidelity", "converged", "status"])
        for run in search.best_per_T:
            writer.writerow(
                [fidelity.format_value(v) for v in (run.T, run.rescore.mean, run.rescore.stderr, run.batch_fidelity)]
                + [str(run.converged).lower(), run.status]
            )
            if not run.converged:
                warnings.append(f"T={run.T:.17g}: {run.status}")
    params = _params(args)
    params["warning"] = "; ".join(warnings)
    write_manifest(out_dir / "manifest.json", "optimize", params, args.seed, [pulse_path, history_path, summary_path])
    for w in warnings:
        log.warning("not converged: %s", w)
    print(f"best T={best.T:.6f} fidelity={best.rescore.mean:.10f} +- {best.rescore.stderr:.2e}")
    return EXIT_OK


def gate_report(pulse):
    U = pulses.noiseless_unitary(pulse)
    bound_ok = bool(np.all(np.abs(pulse.amplitudes) <= pulse.a_max))
    return {
        "unitary": [[[float(z.real), float(z.imag)] for z in row] for row in U],
        "not_distance": su2.not_gate_distance(U),
        "duration": pulse.duration,
        "bound": "ok" if bound_ok else "violated",
    }


def cmd_gate_check(args):
    _, pulse = resolve_pulse(args.pulse)
    report = gate_report(pulse)
    if args.json:
        print(json.dumps(report, indent=2))
        return EXIT_OK
    U = np.array([[complex(*z) for z in row] for row in report["unitary"]])
    print("noiseless unitary:")
    for row in U:
        print("  " + "  ".join(f"{z.real:+.12f}{z.imag:+.12f}j" for z in row))
    print(f"distance to NOT (up to phase): {report['not_distance']:.3e}")
    print(f"duration: {report['duration']:.12f}")
    print(f"bound compliance: {report['bound']}")
    return EXIT_OK


def write_trajectories(batch, fh):
    writer = csv.writer(fh)
    writer.writerow(["index", "initial_sign", "jump_times"])
    for k, traj in enumerate(batch):
        writer.writerow([k, traj.initial_sign, ";".join(f"{t:.17g}" for t in traj.jump_times)])


def cmd_trajectory_sample(args):
    params = rtn.RtnParams(args.delta, args.tauc)
    batch = rtn.sample_batch(params, args.horizon, args.n, args.seed)
    if args.out is None:
        write_trajectories(batch, sys.stdout)
        return EXIT_OK
    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        write_trajectories(batch, fh)
    write_manifest(_manifest_path(out), "trajectory-sample", _params(args), args.seed, [out])
    return EXIT_OK


def cmd_replay(args):
    manifest = json.loads(Path(args.manifest).read_text())
    argv = [manifest["subcommand"]]
    for key, value in manifest["parameters"].items():
        if key == "warning" or value is None or value is False:
            continue
        flag = "--" + key.replace("_", "-")
        if key == "T_grid":
            flag = "--T-grid"
        if value is True:
            argv.append(flag)
        elif key == "pulse" and manifest["subcommand"] == "fidelity-sweep":
            argv += [flag, ",".join(value)]
        elif isinstance(value, list):
            argv += [flag, ",".join(f"{v:.17g}" for v in value)]
        else:
            argv += [flag, f"{value:.17g}" if isinstance(value, float) else str(value)]
    return main(argv)


def _params(args):
    skip = {"func", "command", "verbose", "threads"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rtnqubit",
        description="One-qubit pulses under random telegraph noise. "
        "Units: energies in a_max, times in hbar/a_max (hbar = a_max = 1). "
        "Numbers accept forms like 7pi/3.",
    )
    parser.add_argument("--verbose", "-v", action="store_true")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (never changes results)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fidelity-sweep", help="fidelity of pulses over tau_c and delta grids")
    p.add_argument("--pulse", type=lambda s: s.split(","), default=["pi", "corpse", "scorpse"],
                   help="comma-separated built-in names (pi, corpse, scorpse) or pulse files")
    p.add_argument("--kind", choices=["bitflip", "notgate"], default="bitflip")
    p.add_argument("--delta", type=number_list, default=[0.125], help="noise strengths [a_max]")
    p.add_argument("--tauc", type=number_list, default=[0.1, 1.0, 3.0, 10.0, 30.0],
                   help="correlation times [hbar/a_max]")
    p.add_argument("--ntraj", type=int, default=100_000, help="trajectories per grid point")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="sweep.csv")
    p.set_defaults(func=cmd_fidelity_sweep)

    p = sub.add_parser("optimize", help="GRAPE optimization for one or several operation times")
    p.add_argument("--target", choices=["bitflip", "notgate"], default="bitflip")
    p.add_argument("--T", type=parse_number, default=None, help="operation time [hbar/a_max]")
    p.add_argument("--T-grid", dest="T_grid", type=number_list, default=None, help="operation times to search")
    p.add_argument("--delta", type=parse_number, default=0.125, help="noise strength [a_max]")
    p.add_argument("--tauc", type=parse_number, default=5.0, help="correlation time [hbar/a_max]")
    p.add_argument("--dt", type=parse_number, default=grape.DEFAULT_DT, help="grid step [hbar/a_max]")
    p.add_argument("--batch", type=int, default=1000, help="trajectories in the optimization batch")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=2000)
    p.add_argument("--initial-step", dest="initial_step", type=float, default=50.0)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--resample", action="store_true", help="draw a new batch every iteration")
    p.add_argument("--out-dir", dest="out_dir", default="grape_out")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("gate-check", help="noiseless unitary and bound compliance of a pulse")
    p.add_argument("pulse", help="built-in name or pulse file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_gate_check)

    p = sub.add_parser("trajectory-sample", help="dump noise realizations as CSV")
    p.add_argument("--tauc", type=parse_number, default=1.0, help="correlation time [hbar/a_max]")
    p.add_argument("--delta", type=parse_number, default=0.125, help="noise strength [a_max]; does not affect jumps")
    p.add_argument("--horizon", type=parse_number, default=10.0, help="time span [hbar/a_max]")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_trajectory_sample)

    p = sub.add_parser("replay", help="re-run a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.threads is not None:
        import numba

        numba.set_num_threads(max(1, min(args.threads, numba.config.NUMBA_NUM_THREADS)))
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"rtnqubit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"rtnqubit: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
