"""Command-line surface.

Subcommands map one-to-one onto the library: ``solve`` (parameter solving),
``sweep`` (phase-diagram grids), ``fixed-points``, ``nlo`` (finite-width
correction trajectories and their envelope), ``simulate`` / ``correlate``
(Monte Carlo), ``jacobian`` and ``train``.

Everything emitted is data: JSON documents (with a ``schema_version`` field)
on stdout and CSV grids behind ``--out``.  Plotting is left to external
tools.  All commands are deterministic given their flags; any randomness is
behind an explicit ``--seed``.

Exit codes: 0 success, 1 usage or configuration error, 2 infeasible target,
3 runtime divergence.

A JSON file passed via ``--config`` supplies defaults for any flag of the
subcommand (keys use the flag's destination name); explicit flags win.
``EOC_LAB_THREADS`` caps sweep parallelism; output order never depends on
completion order.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import finite_width, jacobian, maps, simulator, trainer
from .activations import CRELU, CST, KINDS, RELU, ActivationSpec
from .solver import (
    EocInit,
    InfeasibleTargetError,
    critical_gain,
    find_fixed_points,
    init_from_m,
    relu_init,
    solve_init,
    sparsity_threshold,
)

SCHEMA_VERSION = "1"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_DIVERGED = 3

SWEEP_QUANTITIES = ("Vprime", "Vprimeprime", "chi1prime", "nlo_bound", "vmap_curve")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"error: {message}\n")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "nan" if math.isnan(value) else repr(value)
    if isinstance(value, (int, np.integer)):
        return repr(int(value))
    return str(value)


def _emit_json(doc: dict, path: str | None = None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if path:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_csv(path: str, header: tuple[str, ...], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _thread_count() -> int:
    raw = os.environ.get("EOC_LAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _parallel_map(fn, items):
    workers = _thread_count()
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# shared flags
# --------------------------------------------------------------------------

def _add_init_flags(sub, with_m: bool = False):
    sub.add_argument("--activation", choices=KINDS, help="activation family")
    sub.add_argument("--sparsity", "-s", type=float, dest="sparsity",
                     help="target zero-activation rate in (0, 1)")
    sub.add_argument("--qstar", type=float, help="fixed-point variance q*")
    sub.add_argument("--vprime", type=float,
                     help="target slope of the variance map at q*, in (0, 1)")
    if with_m:
        sub.add_argument("--m", type=float,
                         help="clip level given directly instead of --vprime")


def _add_config_flag(sub):
    sub.add_argument("--config", help="JSON file with default values for these flags")


def _require(args, names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise _UsageError("missing required flag(s): " + ", ".join("--" + n for n in missing))


def _build_init(args) -> EocInit:
    _require(args, ["activation", "qstar"])
    if args.activation == RELU:
        return relu_init(args.qstar)
    _require(args, ["sparsity"])
    m = getattr(args, "m", None)
    if m is not None:
        return init_from_m(args.activation, args.sparsity, args.qstar, m)
    _require(args, ["vprime"])
    return solve_init(args.activation, args.sparsity, args.qstar, args.vprime)


def _range_triple(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("ranges are lo:hi:steps")
    lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    if not (lo < hi) or steps < 2:
        raise argparse.ArgumentTypeError("need lo < hi and steps >= 2")
    return lo, hi, steps


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


# --------------------------------------------------------------------------
# subcommand implementations
# --------------------------------------------------------------------------

def _cmd_solve(args) -> int:
    init = _build_init(args)
    diag = maps.diagnostics(init.spec, init.sw2, init.sb2, init.q_star)
    bound = None
    if 0.0 < init.v_prime_at_fp < 1.0:
        bound = finite_width.theorem1_bound(init)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "init": init.to_dict(),
        "diagnostics": diag.to_dict(),
        "nlo_bound": bound,
    }
    _emit_json(doc, args.out)
    return EXIT_OK


def _sweep_value(quantity, kind, s, q_star, m):
    """One grid cell: gain re-solved at (q*, m) with the threshold from s."""
    tau = sparsity_threshold(kind, s, q_star)
    spec = ActivationSpec(kind, tau, m)
    try:
        sw2 = critical_gain(spec, q_star)
    except InfeasibleTargetError:
        return float("nan")
    if quantity == "Vprime":
        return maps.v_prime(spec, sw2, q_star)
    if quantity == "Vprimeprime":
        return maps.v_prime2(spec, sw2, q_star)
    if quantity == "chi1prime":
        return maps.chi1_prime(spec, sw2, q_star)
    if quantity == "nlo_bound":
        try:
            init = init_from_m(kind, s, q_star, m)
            return finite_width.theorem1_bound(init)
        except (InfeasibleTargetError, ValueError):
            return float("nan")
    raise ValueError(quantity)


def _cmd_sweep(args) -> int:
    _require(args, ["quantity", "activation", "s_list", "qstar_range", "m_range", "out"])
    if args.activation == RELU:
        raise _UsageError("sweeps are defined for the clipped families")
    kind = args.activation
    q_lo, q_hi, q_steps = args.qstar_range
    m_lo, m_hi, m_steps = args.m_range
    q_grid = np.linspace(q_lo, q_hi, q_steps)
    m_grid = np.linspace(m_lo, m_hi, m_steps)

    if args.quantity == "vmap_curve":
        anchor = args.qstar if args.qstar is not None else 1.0
        cells = [(s, m) for s in args.s_list for m in m_grid]

        def curve(cell):
            s, m = cell
            try:
                init = init_from_m(kind, s, anchor, m)
            except InfeasibleTargetError:
                return [(kind, s, anchor, m, q, float("nan")) for q in q_grid]
            return [
                (kind, s, anchor, m, q, maps.v_map(init.spec, init.sw2, init.sb2, q))
                for q in q_grid
            ]

        rows = [row for chunk in _parallel_map(curve, cells) for row in chunk]
        _write_csv(args.out, ("activation", "s", "anchor_q_star", "m", "q", "value"), rows)
    else:
        cells = [(s, q, m) for s in args.s_list for q in q_grid for m in m_grid]

        def cell_value(cell):
            s, q, m = cell
            return (kind, s, q, m, _sweep_value(args.quantity, kind, s, q, m))

        rows = _parallel_map(cell_value, cells)
        _write_csv(args.out, ("activation", "s", "q_star", "m", "value"), rows)

    _emit_json(
        {
            "schema_version": SCHEMA_VERSION,
            "command": "sweep",
            "quantity": args.quantity,
            "activation": kind,
            "s_list": args.s_list,
            "q_star_range": list(args.qstar_range),
            "m_range": list(args.m_range),
            "anchor_q_star": args.qstar,
            "gain_resolved_per_cell": True,
            "out": args.out,
        }
    )
    return EXIT_OK


def _cmd_fixed_points(args) -> int:
    init = _build_init(args)
    report = find_fixed_points(init, lo=args.lo, hi=args.hi)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "init": init.to_dict(),
        "report": report.to_dict(),
    }
    _emit_json(doc, args.out)
    return EXIT_OK


def _cmd_nlo(args) -> int:
    _require(args, ["depth", "out"])
    init = _build_init(args)
    states = finite_width.nlo_trajectory(init, args.depth)
    bound = finite_width.theorem1_bound(init)
    rows = [(st.layer, st.q, st.r, st.q1, bound) for st in states]
    _write_csv(args.out, ("layer", "q", "r", "q1", "bound"), rows)
    _emit_json(
        {
            "schema_version": SCHEMA_VERSION,
            "command": "nlo",
            "init": init.to_dict(),
            "depth": args.depth,
            "bound": bound,
            "log_bound": finite_width.log_theorem1_bound(init),
            "trajectory_max_abs_q1": max(abs(st.q1) for st in states),
            # the weight gain is re-solved from the criticality condition at
            # every (s, q*) requested, never held fixed across q*
            "gain_resolved_per_init": True,
            "out": args.out,
        }
    )
    return EXIT_OK


def _stats_rows(stats):
    return [st.to_row() for st in stats]


def _cmd_simulate(args) -> int:
    _require(args, ["depth", "width", "out"])
    init = _build_init(args)
    config = simulator.SimConfig(
        init=init,
        depth=args.depth,
        width=args.width,
        batch=args.batch,
        seed=args.seed,
        measure_backward=bool(args.backward),
        input_variance=args.input_variance,
    )
    stats = simulator.run_backward(config) if args.backward else simulator.run_forward(config)
    _write_csv(args.out, simulator.CSV_COLUMNS, _stats_rows(stats))
    _emit_json(
        {
            "schema_version": SCHEMA_VERSION,
            "command": "simulate",
            "config": config.to_dict(),
            "out": args.out,
        }
    )
    return EXIT_OK


def _cmd_correlate(args) -> int:
    _require(args, ["depth", "width", "rho0", "out"])
    init = _build_init(args)
    config = simulator.SimConfig(
        init=init, depth=args.depth, width=args.width, batch=args.batch, seed=args.seed
    )
    stats = simulator.run_correlation(config, args.rho0)
    _write_csv(args.out, simulator.CSV_COLUMNS, _stats_rows(stats))
    _emit_json(
        {
            "schema_version": SCHEMA_VERSION,
            "command": "correlate",
            "config": config.to_dict(),
            "rho0": args.rho0,
            "out": args.out,
        }
    )
    return EXIT_OK


def _cmd_jacobian(args) -> int:
    _require(args, ["depth"])
    init = _build_init(args)
    moments = jacobian.jacobian_moments(init, args.depth)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "init": init.to_dict(),
        "moments": moments.to_dict(),
    }
    _emit_json(doc, args.out)
    return EXIT_OK


def _cmd_train(args) -> int:
    _require(args, ["depth", "width", "epochs", "lr", "batch"])
    init = _build_init(args)
    config = trainer.TrainConfig(
        init=init,
        depth=args.depth,
        width=args.width,
        epochs=args.epochs,
        lr=args.lr,
        batch=args.batch,
        seed=args.seed,
        dataset=args.dataset,
        data_csv=args.data_csv,
        n_samples=args.n_samples,
        input_dim=args.input_dim,
        n_classes=args.n_classes,
    )
    report = trainer.train(config)
    if args.log_csv:
        trainer.write_training_log(report, args.log_csv)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_dict(),
        "report": report.to_dict(),
    }
    _emit_json(doc, args.out)
    return EXIT_DIVERGED if report.diverged else EXIT_OK


# --------------------------------------------------------------------------
# parser assembly
# --------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="eoc-lab", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", metavar="command")

    sp = subs.add_parser("solve", parents=[], help="solve a full initialisation")
    _add_init_flags(sp)
    _add_config_flag(sp)
    sp.add_argument("--out", help="write the JSON document here instead of stdout")
    sp.set_defaults(func=_cmd_solve)

    sp = subs.add_parser("sweep", help="evaluate a diagnostic over a (q*, m) grid")
    sp.add_argument("--quantity", choices=SWEEP_QUANTITIES)
    sp.add_argument("--activation", choices=(CRELU, CST))
    sp.add_argument("--sparsity", type=_float_list, dest="s_list",
                    help="comma-separated sparsity levels")
    sp.add_argument("--qstar-range", type=_range_triple, dest="qstar_range",
                    help="lo:hi:steps grid of q* (the q axis for vmap_curve)")
    sp.add_argument("--m-range", type=_range_triple, dest="m_range",
                    help="lo:hi:steps grid of clip levels")
    sp.add_argument("--qstar", type=float,
                    help="anchor q* for vmap_curve (default 1.0)")
    sp.add_argument("--out", help="CSV output path")
    _add_config_flag(sp)
    sp.set_defaults(func=_cmd_sweep)

    sp = subs.add_parser("fixed-points", help="all fixed points of the variance map")
    _add_init_flags(sp, with_m=True)
    sp.add_argument("--lo", type=float, help="lower end of the search interval")
    sp.add_argument("--hi", type=float, help="upper end of the search interval")
    sp.add_argument("--out", help="write the JSON document here instead of stdout")
    _add_config_flag(sp)
    sp.set_defaults(func=_cmd_fixed_points)

    sp = subs.add_parser("nlo", help="finite-width correction trajectory and bound")
    _add_init_flags(sp, with_m=True)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--out", help="CSV output path")
    _add_config_flag(sp)
    sp.set_defaults(func=_cmd_nlo)

    sp = subs.add_parser("simulate", help="finite-width Monte Carlo forward/backward run")
    _add_init_flags(sp, with_m=True)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--width", type=int)
    sp.add_argument("--batch", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--backward", action="store_true",
                    help="also measure the backpropagated error moment")
    sp.add_argument("--input-variance", type=float, dest="input_variance",
                    help="draw inputs at this variance instead of q*")
    sp.add_argument("--out", help="CSV output path")
    _add_config_flag(sp)
    sp.set_defaults(func=_cmd_simulate)

    sp = subs.add_parser("correlate", help="two-input correlation trajectory")
    _add_init_flags(sp, with_m=True)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--width", type=int)
    sp.add_argument("--batch", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--rho0", type=float, help="initial correlation in [-1, 1]")
    sp.add_argument("--out", help="CSV output path")
    _add_config_flag(sp)
    sp.set_defaults(func=_cmd_correlate)

    sp = subs.add_parser("jacobian", help="spectral moments of the depth-L Jacobian")
    _add_init_flags(sp, with_m=True)
    sp.add_argument("--depth", type=int, help="number of layers L")
    sp.add_argument("--out", help="write the JSON document here instead of stdout")
    _add_config_flag(sp)
    sp.set_defaults(func=_cmd_jacobian)

    sp = subs.add_parser("train", help="desk-scale MLP training demo")
    _add_init_flags(sp, with_m=True)
    sp.add_argument("--dataset", choices=trainer.DATASETS, default=trainer.SYNTHETIC_BLOBS)
    sp.add_argument("--data-csv", dest="data_csv", help="digit CSV path for small-digits")
    sp.add_argument("--depth", type=int)
    sp.add_argument("--width", type=int)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--batch", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-samples", type=int, dest="n_samples", default=2000)
    sp.add_argument("--input-dim", type=int, dest="input_dim", default=64)
    sp.add_argument("--n-classes", type=int, dest="n_classes", default=10)
    sp.add_argument("--log-csv", dest="log_csv", help="per-step CSV training log path")
    sp.add_argument("--out", help="write the JSON report here instead of stdout")
    _add_config_flag(sp)
    sp.set_defaults(func=_cmd_train)

    return parser


def _apply_config_defaults(args, argv) -> argparse.Namespace:
    """Re-parse with values from --config installed as defaults."""
    with open(args.config) as fh:
        loaded = json.load(fh)
    if not isinstance(loaded, dict):
        raise _UsageError("--config must contain a JSON object")
    parser = build_parser()
    for action in parser._subparsers._group_actions:  # reach the subparser map
        sub = action.choices.get(args.command)
        if sub is not None:
            known = {a.dest for a in sub._actions}
            unknown = set(loaded) - known
            if unknown:
                raise _UsageError(f"unknown config keys: {sorted(unknown)}")
            sub.set_defaults(**loaded)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        if getattr(args, "config", None):
            args = _apply_config_defaults(args, argv)
        return args.func(args)
    except _UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except InfeasibleTargetError as exc:
        _emit_json(
            {
                "schema_version": SCHEMA_VERSION,
                "error": {"type": "infeasible_target", "message": str(exc)},
            }
        )
        return EXIT_INFEASIBLE
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
