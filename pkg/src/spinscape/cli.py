"""Command-line interface.

Subcommands:

  design       optimize a bias landscape for excitation transfer
  localize     optimize a landscape that holds an excitation at a node
  verify       run the eigenstructure / sensitivity diagnostics on a controller
  export-plot  emit plot-ready CSV files from an experiment record

Node labels on the command line are 1-based (spin 1 is the first spin);
records and the library API use 0-based indices.  Exit codes: 0 success
(including "no controller met the threshold"), 2 usage error, 3 record
I/O or parse error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import analysis, dynamics, optimizer, record as rec
from .errors import InsufficientDataError, NumericalError, RecordError
from .network import TOPOLOGIES, build_network, single_excitation_hamiltonian

_OUTDIR_ENV = "SPINSCAPE_OUTDIR"


def _outdir(args) -> str:
    return args.outdir or os.environ.get(_OUTDIR_ENV) or "."


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, step, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be lo:step:hi, got {text!r}")
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def _parse_bias(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bias must be comma-separated floats, got {text!r}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--jobs", type=int, default=1, help="parallel restart workers")
    p.add_argument("--max-iterations", type=int, default=1000)
    p.add_argument("--bias-init", choices=["constant", "peaks", "troughs", "random-mix"],
                   default="random-mix")
    p.add_argument("--bias-bound", type=float, default=None,
                   help="optional box bound |D_k| <= BOUND")
    p.add_argument("--out", default=None, help="record file path")
    p.add_argument("--outdir", default=None,
                   help=f"output directory (default: ${_OUTDIR_ENV} or '.')")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinscape", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="optimize a transfer controller")
    d.add_argument("--n", type=int, required=True, help="number of spins")
    d.add_argument("--topology", choices=TOPOLOGIES, default="ring")
    d.add_argument("--kappa", type=float, default=0.0)
    d.add_argument("--from", dest="m", type=int, required=True, help="input spin (1-based)")
    d.add_argument("--to", dest="n_out", type=int, required=True, help="output spin (1-based)")
    d.add_argument("--time", choices=["free", "fixed"], default="free")
    d.add_argument("--t", type=float, default=None, help="fixed readout time")
    d.add_argument("--t-grid", type=_parse_grid, default=None, help="fixed-time sweep lo:step:hi")
    d.add_argument("--t-lo", type=float, default=0.1)
    d.add_argument("--t-hi", type=float, default=30.0)
    d.add_argument("--window", type=float, default=None,
                   help="readout half-window dT; optimizes the average fidelity")
    d.add_argument("--threshold", type=float, default=None,
                   help="fidelity threshold for the fastest-solution report")
    d.add_argument("--no-symmetry", action="store_true",
                   help="optimize all N biases instead of the symmetric orbits")
    _add_common(d)

    l = sub.add_parser("localize", help="optimize an excitation-holding landscape")
    l.add_argument("--n", type=int, required=True)
    l.add_argument("--topology", choices=TOPOLOGIES, default="ring")
    l.add_argument("--kappa", type=float, default=0.0)
    l.add_argument("--node", type=int, required=True, help="spin to hold (1-based)")
    l.add_argument("--hold", type=float, required=True, help="holding time")
    l.add_argument("--threshold", type=float, default=None)
    l.add_argument("--no-symmetry", action="store_true")
    _add_common(l)

    v = sub.add_parser("verify", help="diagnostics for a stored or explicit controller")
    v.add_argument("--record", default=None, help="experiment record to read")
    v.add_argument("--index", type=int, default=0, help="controller index in the record")
    v.add_argument("--n", type=int, default=None)
    v.add_argument("--topology", choices=TOPOLOGIES, default="ring")
    v.add_argument("--kappa", type=float, default=0.0)
    v.add_argument("--bias", type=_parse_bias, default=None, help="comma-separated biases")
    v.add_argument("--t", type=float, default=None)
    v.add_argument("--from", dest="m", type=int, default=None)
    v.add_argument("--to", dest="n_out", type=int, default=None)
    v.add_argument("--window", type=float, default=None)
    v.add_argument("--out", default=None, help="write the diagnostics as JSON here")

    e = sub.add_parser("export-plot", help="emit plot-ready CSV from a record")
    e.add_argument("--record", action="append", required=True,
                   help="record file (repeatable for fastest-table)")
    e.add_argument("--kind", choices=rec.PLOT_KINDS, required=True)
    e.add_argument("--index", type=int, default=0, help="controller index (evolution)")
    e.add_argument("--out", required=True, help="CSV output path")
    return parser


def _usage(msg: str) -> SystemExit:
    print(f"error: {msg}", file=sys.stderr)
    return SystemExit(2)


def _node0(label: int, n_spins: int, what: str) -> int:
    if not 1 <= label <= n_spins:
        raise _usage(f"{what} must be in 1..{n_spins}")
    return label - 1


def _config_from_args(args, time_mode: str) -> optimizer.OptimizationConfig:
    return optimizer.OptimizationConfig(
        restarts=args.restarts,
        time_mode=time_mode,
        symmetry=not getattr(args, "no_symmetry", False),
        bias_init=args.bias_init,
        rng_seed=args.seed,
        max_iterations=args.max_iterations,
        fidelity_threshold=getattr(args, "threshold", None),
        bias_bound=args.bias_bound,
        n_jobs=args.jobs,
    )


def _speed_limit_line(net, m: int, n: int) -> str:
    dist = net.distance(m, n)
    if dist < 1:
        return "speed limit: n/a (self transfer)"
    exact = analysis.speed_limit(dist)
    if exact is not None:
        return f"speed limit (exact, distance {dist}): T = {exact:.4f}"
    heur = analysis.chain_peak_heuristic(dist)
    return f"chain-peak heuristic (distance {dist}, not a proven bound): T = {heur:.4f}"


def _reports_for_best(net, cset) -> dict:
    reports: dict = {}
    best = cset.best
    eig = dynamics.eigensystem(single_excitation_hamiltonian(net, best.bias))
    if cset.objective_kind == optimizer.INSTANTANEOUS:
        reports["superoptimality"] = analysis.check_superoptimality(eig, cset.m, cset.n, best.time)
    try:
        reports["signature"] = analysis.check_signature(
            eig, cset.m, cset.n, best.bias, topology=net.topology, bias_tol=1e-9)
    except ValueError:
        reports["signature"] = None
    reports["sensitivity"] = analysis.sensitivity_report(
        net, best.bias, best.time, cset.m, cset.n, delta_t=cset.delta_t, fd_check=True)
    try:
        reports["concordance"] = analysis.concordance(cset)
    except InsufficientDataError:
        reports["concordance"] = None
    return reports


def _summarize(cset, threshold: float) -> list[str]:
    best = cset.best
    lines = [
        f"restarts: {len(cset)} "
        f"(converged: {sum(1 for c in cset.controllers if c.provenance.converged)})",
        f"best: infidelity = {best.infidelity:.3e} at T = {best.time:.4f}",
    ]
    fastest = optimizer.fastest_above_threshold(cset, threshold)
    if fastest is None:
        lines.append(f"fastest with fidelity >= {threshold}: none")
    else:
        lines.append(
            f"fastest with fidelity >= {threshold}: T = {fastest.time:.4f} "
            f"(infidelity = {fastest.infidelity:.3e})"
        )
    return lines


def _cmd_design(args) -> int:
    net = build_network(args.n, args.topology, args.kappa)
    m = _node0(args.m, args.n, "--from")
    n = _node0(args.n_out, args.n, "--to")
    if args.time == "fixed" and args.t is None and args.t_grid is None:
        raise _usage("--time fixed requires --t or --t-grid")
    grid = args.t_grid
    task = optimizer.TransferTask(
        m=m, n=n,
        t=args.t if (args.time == "fixed" and grid is None) else None,
        t_bounds=(args.t_lo, args.t_hi),
        delta_t=args.window,
    )
    config = _config_from_args(args, "fixed" if args.time == "fixed" else "joint")
    threshold = config.threshold_for(optimizer.WINDOWED if args.window else optimizer.INSTANTANEOUS)

    print(f"design: {args.topology} of {args.n} spins, spin {args.m} -> {args.n_out}, "
          + (f"window dT={args.window}" if args.window else "instantaneous readout"))
    grid_rows = None
    if grid is not None:
        csets = optimizer.sweep_fixed_times(net, task, config, grid)
        bests = [cs.best for cs in csets]
        grid_rows = [
            {"t": float(t), "best_infidelity": b.infidelity, "best_fidelity": b.fidelity}
            for t, b in zip(grid, bests)
        ]
        cset = optimizer.ControllerSet(
            m=m, n=n, objective_kind=csets[0].objective_kind,
            delta_t=task.delta_t,
            controllers=tuple(sorted(
                bests, key=lambda c: (c.infidelity, c.time))),
        )
    else:
        cset = optimizer.maximize(net, task, config)
    cset = analysis.attach_sensitivity_norms(net, cset)

    for line in _summarize(cset, threshold):
        print(line)
    print(_speed_limit_line(net, m, n))

    reports = _reports_for_best(net, cset)
    task_extra = {"t_lo": args.t_lo, "t_hi": args.t_hi, "fixed_t": args.t}
    record = rec.build_record(net, cset, config, task_extra=task_extra,
                              grid=grid_rows, reports=reports)
    out = args.out or os.path.join(
        _outdir(args),
        f"design-{args.topology}{args.n}-{args.m}to{args.n_out}"
        + (f"-w{args.window}" if args.window else "")
        + f"-seed{args.seed}.json",
    )
    rec.write_record(out, record)
    print(f"record written: {out}")
    return 0


def _cmd_localize(args) -> int:
    net = build_network(args.n, args.topology, args.kappa)
    node = _node0(args.node, args.n, "--node")
    config = _config_from_args(args, "fixed")
    print(f"localize: {args.topology} of {args.n} spins, hold spin {args.node} "
          f"for T = {args.hold}")
    cset = optimizer.localize(net, node, args.hold, config)
    cset = analysis.attach_sensitivity_norms(net, cset)
    best = cset.best
    print(f"restarts: {len(cset)}")
    print(f"best: localization error = {best.infidelity:.3e}")

    reports = _reports_for_best(net, cset)
    record = rec.build_record(net, cset, config,
                              task_extra={"t_hold": args.hold}, reports=reports)
    out = args.out or os.path.join(
        _outdir(args), f"localize-{args.topology}{args.n}-node{args.node}-seed{args.seed}.json")
    rec.write_record(out, record)
    print(f"record written: {out}")
    return 0


def _cmd_verify(args) -> int:
    if args.record is not None:
        record = rec.read_record(args.record)
        net = rec.network_from_record(record)
        cset = rec.controller_set_from_record(record)
        if not 0 <= args.index < len(cset.controllers):
            raise RecordError(f"controller index {args.index} out of range "
                              f"(record has {len(cset.controllers)})")
        ctrl = cset.controllers[args.index]
        m, n, delta_t = cset.m, cset.n, cset.delta_t
        bias, t = ctrl.bias, ctrl.time
    else:
        missing = [flag for flag, val in
                   (("--n", args.n), ("--bias", args.bias), ("--t", args.t),
                    ("--from", args.m), ("--to", args.n_out)) if val is None]
        if missing:
            raise _usage(f"verify needs --record or all of: {', '.join(missing)}")
        net = build_network(args.n, args.topology, args.kappa)
        m = _node0(args.m, args.n, "--from")
        n = _node0(args.n_out, args.n, "--to")
        bias, t, delta_t = args.bias, args.t, args.window

    eig = dynamics.eigensystem(single_excitation_hamiltonian(net, bias))
    p = dynamics.fidelity(eig, m, n, t)
    print(f"controller: spin {m + 1} -> {n + 1}, T = {t:.6f}")
    print(f"fidelity p = {p:.12f} (infidelity {1 - p:.3e})")
    if delta_t is not None:
        pbar = dynamics.avg_fidelity(eig, m, n, t, delta_t)
        print(f"windowed average (dT = {delta_t}): pbar = {pbar:.12f}")

    super_rep = analysis.check_superoptimality(eig, m, n, t)
    verdict = "SUPEROPTIMAL" if super_rep.is_superoptimal else "not superoptimal"
    print(f"{verdict} (projection residual {super_rep.projection_residual:.3e}, "
          f"max phase residual {super_rep.max_phase_residual:.3e})")

    try:
        sig = analysis.check_signature(eig, m, n, bias, topology=net.topology, bias_tol=1e-9)
        if sig.inconclusive:
            print("signature: inconclusive (degenerate spectrum)")
        else:
            print(f"signature: max violation {sig.max_violation:.3e}")
    except ValueError as exc:
        sig = None
        print(f"signature: not applicable ({exc})")

    sens = analysis.sensitivity_report(net, bias, t, m, n, delta_t=delta_t, fd_check=True)
    print(f"sensitivity norm = {sens.norm:.3e} (FD residual {sens.fd_residual:.3e})")

    if args.out:
        report = {
            "schema_version": rec.SCHEMA_VERSION,
            "fidelity": p,
            "superoptimality": super_rep,
            "signature": sig,
            "sensitivity": sens,
        }
        rec.write_record(args.out, rec.jsonable(report))
        print(f"report written: {args.out}")
    return 0


def _cmd_export_plot(args) -> int:
    records = [rec.read_record(path) for path in args.record]
    rec.export_plot(records[0], args.kind, args.out, index=args.index,
                    extra_records=records[1:])
    print(f"csv written: {args.out}")
    return 0


_COMMANDS = {
    "design": _cmd_design,
    "localize": _cmd_localize,
    "verify": _cmd_verify,
    "export-plot": _cmd_export_plot,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except RecordError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
