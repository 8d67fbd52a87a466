"""Command-line front end.

Angles are given in degrees on the command line and converted to radians
internally. Every run starts with a header line

    # seed=<n> version=<semver> command=<argv>

followed by optional ``# key=value`` notes and the rows in the chosen format.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import secrets
import shlex
import sys
from typing import Optional

import numpy as np

from . import __version__
from .contextual import ContextClass, lift, local_states, y_lift
from .freevec import quotient_map
from .hilbert import BellKind, Frame, bell
from .measurement import (
    chsh_combination,
    chsh_correlations,
    closed_form_report,
    correlation_eq26,
    correlation_eq26_grid,
    eigenvalue,
    sample_ensemble,
)
from .oracle import oracle_correlation, oracle_correlation_grid

KIND_TOKENS = {
    "phi+": BellKind.PHI_PLUS,
    "phi-": BellKind.PHI_MINUS,
    "psi+": BellKind.PSI_PLUS,
    "psi-": BellKind.PSI_MINUS,
}
CLASS_TOKENS = {"1": ContextClass.CLASS1, "2": ContextClass.CLASS2}
FRAME_TOKENS = {"z": Frame.Z, "x": Frame.X, "y": Frame.Y}


class CommandFailed(RuntimeError):
    """A check the command reports on did not pass (exit code 1)."""


def _choice(table, what):
    def convert(text):
        try:
            return table[text.lower()]
        except KeyError:
            raise argparse.ArgumentTypeError(
                f"unknown {what} {text!r}; choose from {', '.join(table)}"
            ) from None

    convert.__name__ = what
    return convert


def _degrees(text):
    value = float(text)
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"angle must be finite, got {text!r}")
    return value


def _sweep(text):
    try:
        start, stop, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("sweep is start:stop:step in degrees") from None
    if step <= 0 or stop < start or not all(map(math.isfinite, (start, stop, step))):
        raise argparse.ArgumentTypeError("sweep needs finite start <= stop and step > 0")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def _angles4(text):
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("give four angles a,a2,b,b2 in degrees")
    return [_degrees(p) for p in parts]


def _count(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("count must be at least 1")
    return value


def _seed(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return value


# -- output ---------------------------------------------------------------------------


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def emit(rows: list, fmt: str, out, notes: Optional[dict] = None):
    for key, value in (notes or {}).items():
        out.write(f"# {key}={_cell(value)}\n")
    if fmt == "jsonl":
        for row in rows:
            out.write(json.dumps(row) + "\n")
    elif fmt == "csv":
        if rows:
            writer = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows({k: _cell(v) for k, v in row.items()} for row in rows)
    else:
        if not rows:
            return
        cols = list(rows[0])
        cells = [[_pretty(row[c]) for c in cols] for row in rows]
        widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(cols)]
        out.write("  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip() + "\n")
        for r in cells:
            out.write("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() + "\n")


def _pretty(value):
    if isinstance(value, float):
        return f"{value:.10g}"
    return _cell(value)


# -- commands -------------------------------------------------------------------------


def cmd_lift(args):
    rep = y_lift(args.kind, args.klass) if args.frame is Frame.Y else lift(args.kind, args.klass, args.frame)
    state = quotient_map(rep.sum)
    overlap = abs(np.vdot(bell(args.kind).amps, state.amps))
    ok = rep.quotient_holds()
    amps = " ".join(f"{complex(a).real:+.6f}{complex(a).imag:+.6f}j" for a in state.amps)
    row = {
        "kind": args.kind.name,
        "class": args.klass.name,
        "frame": args.frame.name,
        "sum": str(rep.sum),
        "amplitudes": amps,
        "overlap": float(overlap),
        "quotient": "PASS" if ok else "FAIL",
    }
    if not ok:
        return [row], {}, "quotient identity failed"
    return [row], {}, None


def cmd_collapse(args):
    pair = local_states(args.kind, args.klass, args.frame)
    rows = []
    for side in ("A", "B"):
        ket = pair.side(side)
        rows.append(
            {
                "side": side,
                "frame": args.frame.name,
                "ket": " ".join(f"{complex(a).real:+.6f}{complex(a).imag:+.6f}j" for a in ket.amps),
                "outcome": eigenvalue(ket, args.frame),
            }
        )
    return rows, {"kind": args.kind.name, "class": args.klass.name}, None


def cmd_correlate(args):
    if args.sweep is not None:
        alphas = betas = args.sweep
    else:
        if args.alpha is None or args.beta is None:
            raise argparse.ArgumentTypeError("give --alpha and --beta, or --sweep")
        alphas, betas = np.array([args.alpha]), np.array([args.beta])
    ra, rb = np.radians(alphas), np.radians(betas)
    total, diag, off = correlation_eq26_grid(args.kind, args.frame, ra, rb, args.source)
    truth = oracle_correlation_grid(bell(args.kind), ra, rb)
    rows = [
        {
            "alpha_deg": float(alphas[i]),
            "beta_deg": float(betas[j]),
            "E_analytic": float(total[i, j]),
            "E_oracle": float(truth[i, j]),
            "diag_term": float(diag[i, j]),
            "offdiag_term": float(off[i, j]),
        }
        for i in range(len(alphas))
        for j in range(len(betas))
    ]
    worst = float(np.max(np.abs(total - truth)))
    return rows, {"max_abs_diff": worst}, None


def cmd_chsh(args):
    a, a2, b, b2 = args.angles
    es = chsh_correlations(args.kind, *np.radians([a, a2, b, b2]))
    s = chsh_combination(*es)
    row = {
        "a_deg": a,
        "a2_deg": a2,
        "b_deg": b,
        "b2_deg": b2,
        "E_ab": es[0],
        "E_ab2": es[1],
        "E_a2b": es[2],
        "E_a2b2": es[3],
        "S": s,
    }
    return [row], {"tsirelson": 2 * math.sqrt(2), "classical_bound": 2}, None


def cmd_ensemble(args):
    ens = sample_ensemble(args.kind, args.frame, args.n, args.seed)
    if args.records:
        return [r.as_dict() for r in ens.records], {}, None
    row = {
        "kind": args.kind.name,
        "frame": args.frame.name,
        "n": ens.n,
        "E": ens.estimate.value,
        "stderr": ens.estimate.stderr,
        "class1_freq": ens.class1_fraction,
        "class2_freq": 1 - ens.class1_fraction,
        "mean_a": ens.mean_a,
        "mean_b": ens.mean_b,
    }
    for (x, y), c in ens.counts.items():
        row[f"count_{'+' if x > 0 else '-'}{'+' if y > 0 else '-'}"] = c
    return [row], {}, None


def cmd_stations(args):
    from .stations import run_experiment

    res = run_experiment(args.kind, args.n, args.policy_a, args.policy_b, args.seed)
    rows = []
    for (fa, fb), est in res.estimates().items():
        rows.append(
            {
                "setting_a": fa.name,
                "setting_b": fb.name,
                "n": est.n,
                "E": est.value,
                "stderr": est.stderr,
                "E_oracle": oracle_correlation(bell(args.kind), *np.radians([_ANGLE[fa], _ANGLE[fb]])),
            }
        )
    topo = res.topology
    if topo is None:
        route = "unchecked"
    else:
        route = "present" if topo.station_route_exists or topo.unexpected else "absent"
    notes = {"pairs": args.n, "joined": len(res.records), "losses": len(res.losses), "station_route": route}
    failure = None
    if route == "present":
        failure = "a transport route between the stations exists"
    elif res.losses:
        failure = f"{len(res.losses)} station reports lost"
    return rows, notes, failure


_ANGLE = {Frame.Z: 0.0, Frame.X: 45.0}


def cmd_report(args):
    rows = closed_form_report(step_deg=args.step)
    for row in rows:
        row["listed_form_fits"] = ",".join(row["listed_form_fits"]) or "none"
    return rows, {}, None


# -- parser -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctxphase", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_text, default_format="pretty", seeded=False):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--format", choices=("jsonl", "csv", "pretty"), default=default_format)
        p.add_argument("--seed", type=_seed, default=None, help="random seed (default: drawn and printed)")
        return p

    kind = dict(type=_choice(KIND_TOKENS, "kind"), required=True, help="phi+ phi- psi+ psi-")
    klass = dict(type=_choice(CLASS_TOKENS, "class"), required=True, dest="klass", help="1 or 2")

    p = command("lift", cmd_lift, "show a pre-image and check the quotient identity")
    p.add_argument("--kind", **kind)
    p.add_argument("--class", **klass)
    p.add_argument("--frame", type=_choice(FRAME_TOKENS, "frame"), required=True, help="presentation frame")

    p = command("collapse", cmd_collapse, "local kets and outcomes for one class")
    p.add_argument("--kind", **kind)
    p.add_argument("--class", **klass)
    p.add_argument("--frame", type=_choice(FRAME_TOKENS, "frame"), required=True, help="measurement frame")

    p = command("correlate", cmd_correlate, "four-term correlation vs oracle", default_format="csv")
    p.add_argument("--kind", **kind)
    p.add_argument("--frame", type=_choice({"z": Frame.Z, "x": Frame.X}, "frame"), default=Frame.Z)
    p.add_argument("--alpha", type=_degrees)
    p.add_argument("--beta", type=_degrees)
    p.add_argument("--sweep", type=_sweep, help="start:stop:step in degrees, for both angles")
    p.add_argument("--source", choices=("canonical", "class1", "class2"), default="canonical")

    p = command("chsh", cmd_chsh, "CHSH value from oracle correlations")
    p.add_argument("--kind", **kind)
    p.add_argument("--angles", type=_angles4, required=True, help="a,a2,b,b2 in degrees")

    p = command("ensemble", cmd_ensemble, "sample classes and joint outcomes")
    p.add_argument("--kind", **kind)
    p.add_argument("--frame", type=_choice({"z": Frame.Z, "x": Frame.X}, "frame"), required=True)
    p.add_argument("--n", type=_count, required=True)
    p.add_argument("--records", action="store_true", help="emit every outcome record")

    p = command("stations", cmd_stations, "run the separated-stations harness")
    p.add_argument("--kind", **kind)
    p.add_argument("--n", type=_count, required=True)
    p.add_argument("--policy-a", default="z", help="z, x, random or a z/x cycle such as zzx")
    p.add_argument("--policy-b", default="z")

    p = command("report", cmd_report, "closed-form expressions vs oracle")
    p.add_argument("--step", type=float, default=5.0, help="grid step in degrees")
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.seed is None:
        args.seed = secrets.randbits(32)
    out.write(f"# seed={args.seed} version={__version__} command={shlex.join(['ctxphase', *argv])}\n")
    try:
        rows, notes, failure = args.func(args)
    except argparse.ArgumentTypeError as exc:
        parser.print_usage(sys.stderr)
        print(f"ctxphase: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # reported, not raised: the exit code carries it
        print(f"ctxphase: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    try:
        emit(rows, args.format, out, notes)
        out.flush()
    except BrokenPipeError:  # e.g. piped into head
        return 0
    if failure:
        print(f"ctxphase: check failed: {failure}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
