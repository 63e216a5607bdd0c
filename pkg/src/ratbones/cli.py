"""Command-line entry point.

Exit codes: 0 ok, 2 usage error, 3 numerical nonconvergence, 4 acceptance failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ratbones import atlas, bones
from ratbones.errors import ConvergenceError, RatbonesError
from ratbones.serialize import dumps

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGENCE, EXIT_ACCEPTANCE = 0, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def read_config(path: str) -> dict:
    """Plain key=value lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _window(s: str) -> tuple:
    try:
        parts = tuple(float(x) for x in s.replace(",", " ").split())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad window {s!r}") from exc
    if len(parts) != 4 or not (parts[0] < parts[1] and parts[2] < parts[3]):
        raise argparse.ArgumentTypeError(f"window must be 'x0,x1,y0,y1' with x0<x1, y0<y1, got {s!r}")
    return parts


def _positive_float(s: str) -> float:
    x = float(s)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {s}")
    return x


def _positive_int(s: str) -> int:
    x = int(s)
    if x < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {s}")
    return x


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ratbones", description="Real entropy and bones of real quadratic rational maps.")
    p.add_argument("--config", help="key=value file of defaults; command-line flags win")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    e = sub.add_parser("entropy", help="entropy of one map, as JSON")
    e.add_argument("--mu", type=float)
    e.add_argument("--t", type=float)
    e.add_argument("--a", type=float)
    e.add_argument("--b", type=float)
    e.add_argument("--tol", type=_positive_float, default=1e-3)

    g = sub.add_parser("grid", help="entropy atlas over (mu, t)")
    g.add_argument("--mu-range", type=float, nargs=2, default=(-4.0, 0.0), metavar=("MIN", "MAX"))
    g.add_argument("--t-range", type=float, nargs=2, default=(-4.0, 0.0), metavar=("MIN", "MAX"))
    g.add_argument("--nx", type=_positive_int, default=400)
    g.add_argument("--ny", type=_positive_int, default=400)
    g.add_argument("--tol", type=_positive_float, default=1e-3)
    g.add_argument("--csv", default="-", help="output path, '-' for stdout")
    g.add_argument("--svg")
    g.add_argument("--connectivity", help="connectivity report JSON path")
    g.add_argument("--workers", type=_positive_int, default=1)

    b = sub.add_parser("bones", help="trace period-n bones in a v-window")
    b.add_argument("--window", type=_window, default=bones.DEFAULT_WINDOW)
    b.add_argument("--n", type=_positive_int, required=True)
    b.add_argument("--m-max", type=_positive_int, default=6, help="relations used to find PCF seeds")
    b.add_argument("--out", default="-")
    b.add_argument("--workers", type=_positive_int, default=1)

    s = sub.add_parser("pcf", help="PCF points with transversality data")
    s.add_argument("--window", type=_window, default=bones.DEFAULT_WINDOW)
    s.add_argument("--n-max", type=_positive_int, default=4)
    s.add_argument("--m-max", type=_positive_int, default=6)
    s.add_argument("--resolution", type=_positive_int, default=200)
    s.add_argument("--out", default="-")
    s.add_argument("--workers", type=_positive_int, default=1)

    c = sub.add_parser("check", help="run the acceptance battery")
    c.add_argument("--workers", type=_positive_int, default=1)
    c.add_argument("--criteria", default="1,2,3,4,5,6,7,8", help="comma-separated criterion numbers")
    return p


def parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required: entropy, grid, bones, pcf or check")
    if args.config:
        cfg = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions} | {"verbose"}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        # config values become defaults, then the command line is parsed again
        for action in sub._actions:
            if action.dest in cfg:
                raw = cfg[action.dest]
                if action.nargs in (2, "+"):
                    values = raw.replace(",", " ").split()
                    action.default = [action.type(v) if action.type else v for v in values]
                else:
                    action.default = action.type(raw) if action.type else raw
        args = parser.parse_args(argv)
    return args


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_entropy(args) -> int:
    from ratbones.entropy import real_entropy
    from ratbones.family import NormalFormParams, QuadraticMap, normal_form_to_map

    if args.mu is not None and args.t is not None:
        f = normal_form_to_map(NormalFormParams(args.mu, args.t)).map
    elif args.a is not None and args.b is not None:
        f = QuadraticMap(args.a, args.b)
    else:
        raise UsageError("entropy needs --mu and --t, or --a and --b")
    est = real_entropy(f, tol=args.tol)
    _write("-", dumps(est.to_dict()))
    return EXIT_OK


def cmd_grid(args) -> int:
    spec = atlas.GridSpec(tuple(args.mu_range), tuple(args.t_range), (args.nx, args.ny), args.tol)
    grid = atlas.entropy_grid(spec, workers=args.workers)
    _write(args.csv, grid.to_csv())
    if args.svg:
        Path(args.svg).write_text(atlas.to_svg(grid))
    if args.connectivity:
        Path(args.connectivity).write_text(atlas.connectivity_json(atlas.band_connectivity(grid)))
    return EXIT_OK


def find_bones(window, n: int, m_max: int = 6, workers: int = 1) -> list:
    """Bones of period n through PCF points and grid-line seeds in the window."""
    opts = bones.TraceOptions(window=None)
    seeds = [p.array for p in bones.scan_pcf(window, n, m_max, workers=workers) if p.n == n]
    seeds += [s for s in bones.grid_line_seeds(window, n) if bones.period_of_essential(s) == n]
    found = []
    for s in seeds:
        if any(bones.on_bone(b, s) for b in found):
            continue
        found.append(bones.trace_bone(s, n, opts, essential=-1.0))
    return sorted(found, key=lambda b: tuple(b.points[0]) + tuple(b.points[-1]))


def cmd_bones(args) -> int:
    found = find_bones(args.window, args.n, args.m_max, args.workers)
    _write(args.out, dumps({"window": list(args.window), "n": args.n, "bones": [b.to_dict() for b in found]}))
    return EXIT_OK


def cmd_pcf(args) -> int:
    pts = bones.scan_pcf(args.window, args.n_max, args.m_max, (args.resolution, args.resolution), args.workers)
    records = []
    for p in pts:
        rec = p.to_dict()
        rec["positive_direction"] = bones.check_positive_direction(p)
        records.append(rec)
    _write(args.out, dumps({"window": list(args.window), "n_max": args.n_max, "m_max": args.m_max, "points": records}))
    return EXIT_OK


def cmd_check(args) -> int:
    from ratbones.acceptance import Battery

    try:
        numbers = [int(k) for k in args.criteria.split(",")]
    except ValueError as exc:
        raise UsageError(f"--criteria: {exc}") from exc
    if any(k not in range(1, 9) for k in numbers):
        raise UsageError("--criteria: numbers must be in 1..8")
    results = Battery(workers=args.workers).run(numbers)
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


COMMANDS = {"entropy": cmd_entropy, "grid": cmd_grid, "bones": cmd_bones, "pcf": cmd_pcf, "check": cmd_check}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
    except (UsageError, OSError, ValueError) as exc:
        print(f"ratbones: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ratbones: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, ArithmeticError) as exc:
        print(f"ratbones: nonconvergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (RatbonesError, ValueError) as exc:
        print(f"ratbones: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
