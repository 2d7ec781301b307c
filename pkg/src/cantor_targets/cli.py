"""Command-line interface: one subcommand per operation family.

Every record carries ``schema`` (``cantor-targets/<version>``) and
``command`` fields. Exit codes: 0 success (uncertain verdicts and
no-limit flags included), 1 usage error, 2 computation error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction

from flint import arb

from . import covertree as ct
from . import dimension as dim
from . import expansion as exp_
from . import targets as tg
from .errors import CantorTargetsError, DomainError, ParseError, PreconditionUnmet, UnsupportedFamily
from .logreal import LogReal
from .sequences import BASE, DEFAULT_CAP_BITS, WEIGHT, CumulativeCache, parse_sequence_spec

SCHEMA_VERSION = 1
SCHEMA = f"cantor-targets/{SCHEMA_VERSION}"
DEFAULT_PRECISION = 128
FORMATS = ("jsonl", "csv", "human")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- output ------------------------------------------------------------------------------


def _plain(value):
    """JSON-safe, deterministic representation of library values."""
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, float):
        return value if math.isfinite(value) else ("inf" if value > 0 else "-inf" if value < 0 else "nan")
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, LogReal):
        return value.to_str(30)
    if isinstance(value, arb):
        return LogReal(value).to_str(30)
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "value") and isinstance(value.value, str):  # enums
        return value.value
    if hasattr(value, "item"):  # numpy scalars
        return _plain(value.item())
    return str(value)


def write_records(records, fmt: str, stream) -> None:
    """Emit records as JSON lines, CSV (header from the first record) or ``key: value`` text."""
    records = [_plain(r) for r in records]
    if fmt == "jsonl":
        for r in records:
            stream.write(json.dumps(r, separators=(",", ":")) + "\n")
    elif fmt == "csv":
        if not records:
            return
        fields = list(records[0])
        for r in records[1:]:
            fields += [k for k in r if k not in fields]
        writer = csv.DictWriter(stream, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for r in records:
            writer.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in r.items()})
    elif fmt == "human":
        for i, r in enumerate(records):
            if i:
                stream.write("\n")
            for k, v in r.items():
                if k == "schema":
                    continue
                stream.write(f"{k}: {json.dumps(v) if isinstance(v, (list, dict)) else v}\n")
    else:
        raise UsageError(f"unknown format {fmt!r}")


def emit_profile(profile: dim.PressureProfile, fmt: str, stream, command: str = "profile") -> int:
    """Write ``(n, value)`` rows of a profile ordered by n; returns the row count."""
    if len(profile.n) == 0:
        raise UsageError("empty profile window")
    if fmt == "csv":
        stream.write("n,value\n")
        for n, v in zip(profile.n.tolist(), profile.values.tolist()):
            stream.write(f"{n},{v!r}\n")
    else:
        rows = [{"schema": SCHEMA, "command": command, "s": profile.s, "n": n, "value": v}
                for n, v in zip(profile.n.tolist(), profile.values.tolist())]
        write_records(rows, fmt, stream)
    return len(profile.n)


# --- argument plumbing ------------------------------------------------------------------


def _probability(text: str) -> float:
    value = float(text)
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _levels(text: str) -> tuple:
    try:
        levels = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not levels:
        raise argparse.ArgumentTypeError("expected at least one level")
    return levels


def _fraction_arg(text: str) -> float:
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text}")
    return value


def _cache(args, target: str) -> CumulativeCache:
    text = args.q if target == BASE else args.alpha
    if text is None:
        raise UsageError(f"--{'q' if target == BASE else 'alpha'} is required")
    spec = parse_sequence_spec(text, target)
    return CumulativeCache(spec, prec=max(args.precision, 64), cap_bits=args.cap_bits)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n for n in missing))


def _rec(command: str, **fields) -> dict:
    return {"schema": SCHEMA, "command": command, **fields}


# --- commands ---------------------------------------------------------------------------


def cmd_expand(args):
    _require(args, "x", "n")
    Q = _cache(args, BASE)
    ds = exp_.cantor_digits(args.x, Q, args.n)
    yield _rec("expand", x=exp_.to_point(args.x), n=args.n, digits=list(ds.digits), remainder=ds.remainder)


def cmd_iterate(args):
    _require(args, "x", "n")
    Q = _cache(args, BASE)
    y = exp_.iterate(args.x, Q, args.n, start=args.start)
    yield _rec("iterate", x=exp_.to_point(args.x), n=args.n, start=args.start, value=y,
               distance_to_integer=exp_.nearest_integer_distance(y))


def cmd_hits(args):
    _require(args, "x", "n-max")
    Q, A = _cache(args, BASE), _cache(args, WEIGHT)
    for n, v in tg.hit_levels(args.x, Q, A, args.n_max, precision=args.precision):
        yield _rec("hits", x=exp_.to_point(args.x), n=n, verdict=v.status, margin=v.margin, precision=v.precision)


def cmd_height(args):
    _require(args, "x")
    Q = _cache(args, BASE)
    yield _rec("height", x=exp_.to_point(args.x), height=tg.height(args.x, Q, n_scan=args.n_max or tg.DEFAULT_SCAN))


def cmd_witness(args):
    _require(args, "x", "n")
    Q, A = _cache(args, BASE), _cache(args, WEIGHT)
    w = tg.witness_search(args.x, Q, A, args.n, precision=args.precision)
    hit = tg.hit_test(args.x, Q, A, args.n, precision=args.precision)
    yield _rec("witness", x=exp_.to_point(args.x), n=args.n, verdict=w.status, index=w.index, distance=w.distance,
               witness=w.witness, height=w.height, orbit_verdict=hit.status)


def cmd_pressure(args):
    _require(args, "s", "n-max")
    Q, A = _cache(args, BASE), _cache(args, WEIGHT)
    value, profile = dim.pressure_estimate(Q, A, args.s, args.n_max, args.window)
    if args.profile:
        yield ("profile", profile)
        return
    yield _rec("pressure", s=args.s, window=list(profile.window), value=value)


def cmd_bowen(args):
    _require(args, "n-max")
    Q, A = _cache(args, BASE), _cache(args, WEIGHT)
    yield _rec("bowen", **dim.bowen_parameter(Q, A, args.n_max, args.tol, args.window).as_dict())


def cmd_dimension(args):
    _require(args, "n-max")
    Q, A = _cache(args, BASE), _cache(args, WEIGHT)
    if args.profile:
        yield ("profile", dim.ratio_profile(Q, A, args.n_max, args.window))
        return
    yield _rec("dimension", **dim.dimension_limsup(Q, A, args.n_max, args.window).as_dict())


def cmd_corollary(args):
    _require(args, "n-max")
    Q, A = _cache(args, BASE), _cache(args, WEIGHT)
    yield _rec("corollary", **dim.corollary_limit(Q, A, args.n_max, args.window).as_dict())


def cmd_family(args):
    _require(args, "family")
    fam = dim.parse_family(args.family)
    fv = dim.family_formula(fam, prec=max(args.precision, 64))
    yield _rec("family", family=args.family, value=fv.value.mid, value_digits=fv.value, expression=fv.expression)


def _tree(args):
    Q, A = _cache(args, BASE), _cache(args, WEIGHT)
    if args.levels:
        schedule = ct.LevelSchedule.from_levels(args.levels, s=args.s if args.s is not None else math.nan)
    else:
        _require(args, "s", "depth")
        schedule = ct.choose_levels(Q, A, args.s, args.depth, N_cap=args.n_max or ct.DEFAULT_N_CAP)
    return ct.build_cover(Q, A, schedule, enumeration_cap=args.enumeration_cap)


def _level_records(command, tree):
    for lv in tree.levels:
        yield _rec(command, record="level", level=lv.level, n=lv.n, Q=str(lv.Q), log_radius=lv.log_radius,
                   half_width=lv.half_width, child_count=None if lv.child_count is None else str(lv.child_count),
                   nodes=str(lv.count), mass=str(lv.mass))


def cmd_cover_build(args):
    tree = _tree(args)
    yield _rec("cover-build", record="schedule", s=tree.schedule.s, levels=list(tree.schedule.levels),
               C=tree.schedule.C, pressure=tree.schedule.pressure,
               rejected=len(tree.schedule.rejected))
    yield from _level_records("cover-build", tree)
    if args.export:
        with open(args.export, "w", encoding="utf-8") as fh:
            lines = ct.export_tree(tree, fh)
        yield _rec("cover-build", record="export", path=args.export, node_lines=lines)


def cmd_cover_check(args):
    tree = _tree(args)
    s = args.s if args.s is not None else tree.schedule.s
    for report in (ct.mass_conservation_check(tree), ct.nesting_check(tree),
                   ct.counting_inequality_check(tree), ct.cylinder_estimate_check(tree)):
        yield _rec("cover-check", record=report.name, ok=report.ok, levels=report.levels, notes=report.notes)
    if tree.depth >= 2 and s is not None and not math.isnan(s):
        fr = ct.frostman_check(tree, s, sample_count=args.samples, radii_per_sample=args.radii, seed=args.seed)
        yield _rec("cover-check", record="frostman", C_observed=fr.C_observed, log_C_observed=fr.log_C_observed,
                   evaluations=fr.evaluations, worst=fr.worst,
                   cover_bound_failures=len(fr.cover_bound_failures))


def cmd_hsum(args):
    _require(args, "t", "n")
    Q, A = _cache(args, BASE), _cache(args, WEIGHT)
    hs = ct.hausdorff_sum(Q, A, Fraction(args.t), args.n, prec=args.precision)
    yield _rec("hsum", **hs.as_dict())


def cmd_series_check(args):
    _require(args, "t", "n-max")
    Q, A = _cache(args, BASE), _cache(args, WEIGHT)
    yield _rec("series-check", **ct.upper_bound_series_check(Q, A, args.t, args.n_max, args.window).as_dict())


def cmd_stolz(args):
    _require(args, "n-max")
    if args.alpha is None or args.b is None:
        raise UsageError("stolz needs --alpha (numerator terms) and --b (denominator terms)")
    a = CumulativeCache(parse_sequence_spec(args.alpha, WEIGHT), cap_bits=args.cap_bits)
    b = CumulativeCache(parse_sequence_spec(args.b, WEIGHT), cap_bits=args.cap_bits)
    yield _rec("stolz", **dim.stolz_check(a, b, args.n_max, args.window).as_dict())


COMMANDS = {
    "expand": (cmd_expand, "Q-Cantor digits of x and the remainder"),
    "iterate": (cmd_iterate, "exact orbit point T^n(x)"),
    "hits": (cmd_hits, "levels n <= n-max where the orbit hits the target"),
    "height": (cmd_height, "least n with x * Q_n an integer"),
    "witness": (cmd_witness, "nearest order-n grid point and whether it lies within psi(n)"),
    "pressure": (cmd_pressure, "windowed pressure at s (or its profile)"),
    "bowen": (cmd_bowen, "root of the windowed pressure"),
    "dimension": (cmd_dimension, "tail-window limsup of log Q_n / (log Q_n + alpha(n))"),
    "corollary": (cmd_corollary, "1/(1+L) from the limit of alpha_n / log q_n"),
    "family": (cmd_family, "closed-form dimension of a standard family"),
    "cover-build": (cmd_cover_build, "choose a level schedule and build the cover tree"),
    "cover-check": (cmd_cover_check, "run every cover-tree check and the ball-mass bound"),
    "hsum": (cmd_hsum, "t-dimensional sum over one level: direct and closed form"),
    "series-check": (cmd_series_check, "tail bound on the t-dimensional sums"),
    "stolz": (cmd_stolz, "term ratio versus partial-sum ratio"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cantor-targets", description="Shrinking targets for Q-Cantor series maps.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--q", help="base sequence spec, e.g. periodic:2,3")
        p.add_argument("--alpha", help="weight sequence spec, e.g. const:1")
        p.add_argument("--x", help="point: 'p/q' or a decimal (read exactly)")
        p.add_argument("--n", type=_positive_int)
        p.add_argument("--n-max", type=_positive_int, help="N_hi, scan horizon or schedule cap")
        p.add_argument("--s", type=_probability)
        p.add_argument("--t", type=_probability)
        p.add_argument("--tol", type=float, default=dim.DEFAULT_TOL)
        p.add_argument("--window", type=_fraction_arg, default=dim.DEFAULT_WINDOW, help="tail window fraction")
        p.add_argument("--precision", type=_positive_int, default=DEFAULT_PRECISION, help="bits")
        p.add_argument("--cap-bits", type=_positive_int, default=DEFAULT_CAP_BITS)
        p.add_argument("--levels", type=_levels, help="explicit schedule n_1,n_2,...")
        p.add_argument("--format", choices=FORMATS, default="jsonl")
        p.add_argument("--out", help="write output here instead of stdout")
        if name == "iterate":
            p.add_argument("--start", type=int, default=0, help="apply the maps from index start+1")
        if name in ("pressure", "dimension"):
            p.add_argument("--profile", action="store_true", help="emit the per-n samples")
        if name == "family":
            p.add_argument("--family", help="periodic:2,3;c=1 | eventually:5|2,3;c=1 | poly:k=1;c=2 | exp:b=2;c=1")
        if name == "stolz":
            p.add_argument("--b", help="denominator term spec")
        if name.startswith("cover"):
            p.add_argument("--depth", type=_positive_int, help="number of levels to choose")
            p.add_argument("--enumeration-cap", type=_positive_int, default=ct.DEFAULT_ENUMERATION_CAP)
        if name == "cover-build":
            p.add_argument("--export", help="write the versioned tree dump to this path")
        if name == "cover-check":
            p.add_argument("--samples", type=_positive_int, default=64)
            p.add_argument("--radii", type=_positive_int, default=32)
            p.add_argument("--seed", type=int, default=0)
    return parser


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required; see --help")
        if args.x is not None:
            try:
                exp_.to_point(args.x)
            except ValueError as err:
                raise UsageError(str(err)) from None
        handler = COMMANDS[args.command][0]
        buffer = io.StringIO()
        records = []
        for item in handler(args):
            if isinstance(item, tuple) and item[0] == "profile":
                emit_profile(item[1], args.format, buffer, args.command)
            else:
                records.append(item)
        if records:
            write_records(records, args.format, buffer)
    except UsageError as err:
        stderr.write(f"error: {err}\n")
        return 1
    except (ParseError, DomainError, UnsupportedFamily, PreconditionUnmet) as err:
        stderr.write(f"error: {err}\n")
        return 1
    except (CantorTargetsError, ArithmeticError) as err:
        stderr.write(f"computation error: {type(err).__name__}: {err}\n")
        return 2
    except ValueError as err:
        # out-of-range parameters rejected by the library
        stderr.write(f"error: {err}\n")
        return 1
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(buffer.getvalue())
        except OSError as err:
            stderr.write(f"computation error: cannot write {args.out}: {err}\n")
            return 2
    else:
        stdout.write(buffer.getvalue())
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
