"""Command-line front end: build graphs, run invariant suites, and export
plot-ready tables.

Exit codes: 0 pass, 1 invariant or I/O failure, 2 numerical non-convergence,
64 usage error.  Every command prints a JSON report to stdout embedding the
tool version, the resolved config, content hashes of inputs and outputs, the
seed, and wall-clock seconds.  Output files are byte-identical across reruns
with the same flags: they embed config and hashes but never timing.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict
from fractions import Fraction

import numpy as np

from . import __version__
from .graphs import (
    CapacityError,
    boundary_face,
    build_graph,
    read_graph,
    write_graph_binary,
    write_graph_json,
)
from .measures import (
    TileMeasure,
    ball_dimension_estimate,
    box_dimension_estimate,
    middle_third_ratios,
    pushforward_x,
)
from .metrics import (
    blowup_metric,
    cover_preimage,
    graph_metric,
    internal_block_metric,
    lipschitz_quotient_check,
    pi_diagnostic,
    qs_distortion,
    read_metric_matrix,
    symmetrize,
    write_metric_matrix,
)
from .modulus import ModulusProblem, Network, solve_modulus
from .verify import SUITES, run_suite

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_NO_CONVERGENCE = 2
EXIT_USAGE = 64

SIDES = ("left", "right", "top", "bottom")
DEFAULT_P_GRID = "1,1.5,2,2.0959,2.5,3"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _json_default(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, frozenset):
        return sorted(obj)
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _cell(value):
    if isinstance(value, bool) or isinstance(value, np.bool_):
        return str(bool(value))
    if isinstance(value, float):  # covers numpy floats; shortest round-trip repr
        return repr(float(value))
    return str(value)


def _write_csv(path, config, hashes, seed, header, rows):
    """Plot-ready CSV with '#' metadata comments; content is run-independent."""
    lines = [f"# pillowspace {__version__}"]
    lines.append(
        "# config: " + " ".join(f"{k}={v}" for k, v in sorted(config.items()))
    )
    for name, digest in sorted(hashes.items()):
        lines.append(f"# input sha256: {name}={digest}")
    lines.append(f"# seed: {'none' if seed is None else seed}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path, body):
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _parse_levels(text):
    """'1..5' or '3' or '1,3,5' to a sorted list of ints."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            levels = list(range(int(lo), int(hi) + 1))
        else:
            levels = [int(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse level range {text!r}")
    if not levels or min(levels) < 1:
        raise UsageError("levels must be integers >= 1")
    return sorted(set(levels))


def _parse_p_grid(text):
    try:
        grid = [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse p grid {text!r}")
    if not grid or any(p < 1 for p in grid):
        raise UsageError("p grid must list exponents >= 1")
    return grid


def _parse_sides(text):
    parts = text.split("-")
    if len(parts) != 2 or not all(s in SIDES for s in parts) or parts[0] == parts[1]:
        raise UsageError(
            f"sides must be two distinct names from {'/'.join(SIDES)}, like left-right"
        )
    return parts[0], parts[1]


def _parse_normalization(text):
    if text in ("none", "diameter"):
        return text
    if text.startswith("pair:"):
        parts = text.split(":")
        if len(parts) == 3:
            return ("pair", parts[1], parts[2])
    raise UsageError(f"normalization must be none, diameter, or pair:a:b, not {text!r}")


def _require_seed(args):
    if args.seed is None:
        raise UsageError("this subcommand samples; pass an explicit --seed")
    return args.seed


def _metric_from_args(args, level_attr="level"):
    """Metric from --in file when given, else the graph metric at the level."""
    hashes = {}
    if getattr(args, "infile", None):
        hashes["in"] = _sha256(args.infile)
        return read_metric_matrix(args.infile), hashes
    level = getattr(args, level_attr, None)
    if level is None:
        raise UsageError("pass either --in FILE or a --level to compute from")
    return graph_metric(build_graph(level, args.policy)), hashes


# ---------------------------------------------------------------------------
# command handlers: each returns (exit_code, report_fields)


def _cmd_build(args):
    if args.level < 1:
        raise UsageError("level must be >= 1")
    g = build_graph(args.level, args.policy)
    fmt = args.format or ("binary" if args.out.endswith(".bin") else "json")
    if fmt == "binary":
        write_graph_binary(g, args.out)
    else:
        write_graph_json(g, args.out)
    summary = f"{g.n_vertices} vertices, {len(g.edges)} edges"
    return EXIT_OK, {
        "summary": summary,
        "vertices": g.n_vertices,
        "edges": len(g.edges),
        "outputs": {args.out: _sha256(args.out)},
    }


def _cmd_verify(args):
    if args.suite not in SUITES:
        raise UsageError(
            f"unknown suite {args.suite!r}; choose from: {', '.join(SUITES)}"
        )
    levels = _parse_levels(args.levels) if args.levels else None
    try:
        rep = run_suite(
            args.suite, levels, policy=args.policy, seed=args.seed, tolerance=args.tol
        )
    except CapacityError as exc:
        raise UsageError(str(exc))
    outputs = {}
    if args.out:
        _write_json(args.out, rep.to_dict())
        outputs[args.out] = _sha256(args.out)
    code = EXIT_OK if rep.ok else EXIT_FAIL
    word = "pass" if rep.ok else "FAIL"
    return code, {
        "summary": f"suite {args.suite} levels {rep.levels}: {word}",
        "report": rep.to_dict(),
        "outputs": outputs,
    }


def _cmd_modulus(args):
    sides = _parse_sides(args.sides)
    p_grid = _parse_p_grid(args.p_grid)
    try:
        g = read_graph(args.graph)
    except OSError as exc:
        raise RuntimeError(f"cannot read graph file {args.graph}: {exc}")
    hashes = {"graph": _sha256(args.graph)}
    net = Network.from_graph(g)
    src = frozenset(boundary_face(g, sides[0]))
    tgt = frozenset(boundary_face(g, sides[1]))
    rows, all_converged = [], True
    for p in p_grid:
        res = solve_modulus(ModulusProblem(net, src, tgt, p, args.tol))
        all_converged &= bool(res.converged)
        rows.append(
            (
                g.level,
                p,
                float(res.value_lower),
                float(res.value_upper),
                float(res.value),
                float(res.value_upper - res.value_lower),
                int(res.iterations),
                bool(res.converged),
            )
        )
    config = {
        "graph": args.graph,
        "sides": args.sides,
        "p_grid": args.p_grid,
        "tol": args.tol,
        "policy": g.policy,
    }
    outputs = {}
    if args.out:
        _write_csv(
            args.out,
            config,
            hashes,
            None,
            ["level", "p", "value_lower", "value_upper", "value", "gap", "iterations", "converged"],
            rows,
        )
        outputs[args.out] = _sha256(args.out)
    code = EXIT_OK if all_converged else EXIT_NO_CONVERGENCE
    return code, {
        "summary": f"{len(rows)} exponents on level {g.level}, "
        + ("all converged" if all_converged else "NON-CONVERGED rows present"),
        "rows": [list(r) for r in rows],
        "input_sha256": hashes,
        "outputs": outputs,
    }


def _cmd_measure_pushforward(args):
    w = pushforward_x(TileMeasure.uniform(args.level))
    denom = 3**args.level
    rows = [
        (i, Fraction(i, denom), Fraction(i + 1, denom), weight)
        for i, weight in enumerate(w.weights)
    ]
    config = {"level": args.level}
    outputs = {}
    if args.out:
        _write_csv(args.out, config, {}, None, ["index", "left", "right", "weight"], rows)
        outputs[args.out] = _sha256(args.out)
    return EXIT_OK, {
        "summary": f"{len(rows)} intervals at level {args.level}, total {w.total()}",
        "outputs": outputs,
    }


def _cmd_measure_ratios(args):
    rows, skipped = middle_third_ratios(pushforward_x(TileMeasure.uniform(args.level)))
    table = [(r.level, r.index, r.weight, r.ratio) for r in rows]
    config = {"level": args.level}
    outputs = {}
    if args.out:
        _write_csv(
            args.out, config, {}, None, ["level", "index", "weight", "ratio"], table
        )
        outputs[args.out] = _sha256(args.out)
    distinct = sorted({str(r.ratio) for r in rows})
    return EXIT_OK, {
        "summary": f"{len(rows)} intervals, ratios {distinct}, skipped {len(skipped)}",
        "distinct_ratios": distinct,
        "outputs": outputs,
    }


def _cmd_measure_dimension(args):
    if args.mode == "box":
        if not args.levels:
            raise UsageError("box mode needs --levels")
        fit = box_dimension_estimate(_parse_levels(args.levels))
        config = {"mode": "box", "levels": args.levels}
        seed = None
    else:
        if args.level is None or args.samples is None:
            raise UsageError("ball mode needs --level and --samples")
        seed = _require_seed(args)
        g = build_graph(args.level, args.policy)
        fit = ball_dimension_estimate(g, args.samples, seed)
        config = {
            "mode": "ball",
            "level": args.level,
            "samples": args.samples,
            "policy": args.policy,
        }
    outputs = {}
    if args.out:
        rows = [(v, x, c) for v, x, c in fit.rows]
        rows.append(("estimate", "", repr(fit.estimate)))
        rows.append(("residual", "", repr(fit.residual)))
        _write_csv(args.out, config, {}, seed, ["variant", "scale", "count"], rows)
        outputs[args.out] = _sha256(args.out)
    return EXIT_OK, {
        "summary": f"dimension estimate {fit.estimate:.6f} (residual {fit.residual:.2e})",
        "estimate": fit.estimate,
        "residual": fit.residual,
        "outputs": outputs,
    }


def _cmd_metric_symmetrize(args):
    if args.mode == "sampled":
        if args.samples is None:
            raise UsageError("sampled mode needs --samples")
        seed = _require_seed(args)
    else:
        seed = None
    d, hashes = _metric_from_args(args)
    s = symmetrize(d, mode=args.mode, samples=args.samples, seed=seed)
    write_metric_matrix(s, args.out)
    fixed = bool(np.array_equal(s.entries, d.entries))
    return EXIT_OK, {
        "summary": f"symmetrized level-{d.level} metric ({args.mode}); "
        + ("input was already invariant" if fixed else "input changed"),
        "fixed_point": fixed,
        "input_sha256": hashes,
        "outputs": {args.out: _sha256(args.out)},
    }


def _cmd_metric_blowup(args):
    norm = _parse_normalization(args.normalization)
    hashes = {}
    if args.mode == "internal":
        if args.level_from is None:
            raise UsageError("internal mode needs --level-from")
        g = build_graph(args.level_from, args.policy)
        try:
            b = internal_block_metric(g, args.prefix, normalization=norm)
        except ValueError as exc:
            raise UsageError(str(exc))
    else:
        d, hashes = _metric_from_args(args, level_attr="level_from")
        try:
            b = blowup_metric(d, args.prefix, normalization=norm)
        except ValueError as exc:
            raise UsageError(str(exc))
    write_metric_matrix(b, args.out)
    return EXIT_OK, {
        "summary": f"blowup over prefix {args.prefix!r} to level {b.level} ({args.mode})",
        "input_sha256": hashes,
        "outputs": {args.out: _sha256(args.out)},
    }


def _cmd_metric_distortion(args):
    seed = _require_seed(args)
    d1 = read_metric_matrix(args.in1)
    d2 = read_metric_matrix(args.in2)
    hashes = {"in1": _sha256(args.in1), "in2": _sha256(args.in2)}
    prof = qs_distortion(d1, d2, args.samples, seed)
    config = {"in1": args.in1, "in2": args.in2, "samples": args.samples}
    rows = [("forward", *r) for r in prof.rows()]
    rows += [("inverse", *r) for r in prof.inverse.rows()]
    outputs = {}
    if args.out:
        _write_csv(
            args.out,
            config,
            hashes,
            seed,
            ["direction", "bin_low", "bin_high", "count", "max_ratio", "envelope"],
            rows,
        )
        outputs[args.out] = _sha256(args.out)
    return EXIT_OK, {
        "summary": f"profile over {prof.samples_used} triples "
        f"({prof.samples_skipped} degenerate skipped)",
        "input_sha256": hashes,
        "outputs": outputs,
    }


def _cmd_metric_quotient_check(args):
    try:
        rep = lipschitz_quotient_check(build_graph(args.level, args.policy))
    except CapacityError as exc:
        raise UsageError(str(exc))
    outputs = {}
    if args.out:
        _write_json(args.out, asdict(rep))
        outputs[args.out] = _sha256(args.out)
    code = EXIT_OK if rep.ok else EXIT_FAIL
    return code, {
        "summary": f"ball images at level {args.level}: {'pass' if rep.ok else 'FAIL'}",
        "report": asdict(rep),
        "outputs": outputs,
    }


def _cmd_metric_cover_check(args):
    g = build_graph(args.level, args.policy)
    side = 3**args.level
    if args.samples is not None:
        seed = _require_seed(args)
        import random as _random

        rng = _random.Random(seed)
        cases = [
            ((rng.randrange(side), rng.randrange(side)), rng.randint(0, 3))
            for _ in range(args.samples)
        ]
    else:
        seed = args.seed
        if args.center is None or args.radius is None:
            raise UsageError("pass --center X,Y and --radius R, or --samples with --seed")
        try:
            cx, cy = (int(t) for t in args.center.split(","))
        except ValueError:
            raise UsageError(f"cannot parse center {args.center!r}; expected X,Y")
        cases = [((cx, cy), args.radius)]
    reports = []
    for center, radius in cases:
        try:
            reports.append(cover_preimage(g, center, radius, c=args.c))
        except ValueError as exc:
            raise UsageError(str(exc))
    ok = all(r.ok and r.preimage_covered for r in reports)
    worst = max((r.max_overlap for r in reports), default=0)
    body = {
        "level": args.level,
        "c": args.c,
        "balls": [asdict(r) for r in reports],
        "worst_overlap": worst,
        "ok": ok,
    }
    outputs = {}
    if args.out:
        _write_json(args.out, body)
        outputs[args.out] = _sha256(args.out)
    code = EXIT_OK if ok else EXIT_FAIL
    return code, {
        "summary": f"{len(reports)} ball(s) at level {args.level}: "
        + ("pass" if ok else "FAIL") + f", worst overlap {worst}",
        "report": body,
        "outputs": outputs,
    }


def _cmd_metric_pi_diagnostic(args):
    seed = _require_seed(args)
    if args.p < 1:
        raise UsageError("exponent must be >= 1")
    g = build_graph(args.level, args.policy)
    rep = pi_diagnostic(g, TileMeasure.uniform(args.level), args.p, args.trials, seed)
    config = {
        "level": args.level,
        "p": args.p,
        "trials": args.trials,
        "policy": args.policy,
    }
    outputs = {}
    if args.out:
        _write_csv(
            args.out,
            config,
            {},
            seed,
            ["function", "center", "radius", "lhs", "rhs", "ratio"],
            rep.rows,
        )
        outputs[args.out] = _sha256(args.out)
    return EXIT_OK, {
        "summary": f"worst ratio {rep.worst_ratio:.6f} over {rep.trials} trials",
        "worst_ratio": rep.worst_ratio,
        "worst_case": rep.worst_case,
        "outputs": outputs,
    }


# ---------------------------------------------------------------------------
# parser wiring


def _add_policy(p):
    p.add_argument("--policy", choices=("on", "off"), default="on")


def build_parser():
    parser = _Parser(prog="pillowspace", description=__doc__)
    parser.add_argument("--version", action="version", version=f"pillowspace {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build a replacement graph and write it out")
    b.add_argument("-n", "--level", type=int, required=True)
    _add_policy(b)
    b.add_argument("--out", required=True)
    b.add_argument("--format", choices=("json", "binary"))
    b.set_defaults(handler=_cmd_build)

    v = sub.add_parser("verify", help="run a named invariant suite")
    v.add_argument("suite")
    v.add_argument("levels", nargs="?", help="like 1..3 or 2 or 1,3")
    _add_policy(v)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=float, default=1e-6)
    v.add_argument("--out")
    v.set_defaults(handler=_cmd_verify)

    m = sub.add_parser("modulus", help="crossing modulus scan of a graph file")
    m.add_argument("--graph", required=True)
    m.add_argument("--sides", required=True, help="like left-right or top-bottom")
    m.add_argument("--p-grid", default=DEFAULT_P_GRID)
    m.add_argument("--tol", type=float, default=1e-6)
    m.add_argument("--out")
    m.set_defaults(handler=_cmd_modulus)

    me = sub.add_parser("measure", help="measure-side tables")
    mesub = me.add_subparsers(dest="subcommand", required=True)
    mp = mesub.add_parser("pushforward", help="x-axis interval weights")
    mp.add_argument("--level", type=int, required=True)
    mp.add_argument("--out")
    mp.set_defaults(handler=_cmd_measure_pushforward)
    mr = mesub.add_parser("ratios", help="middle-third ratio table")
    mr.add_argument("--level", type=int, required=True)
    mr.add_argument("--out")
    mr.set_defaults(handler=_cmd_measure_ratios)
    md = mesub.add_parser("dimension", help="box or ball dimension fit")
    md.add_argument("--mode", choices=("box", "ball"), required=True)
    md.add_argument("--levels", help="box mode: like 1..5")
    md.add_argument("--level", type=int, help="ball mode: graph level")
    md.add_argument("--samples", type=int)
    md.add_argument("--seed", type=int)
    _add_policy(md)
    md.add_argument("--out")
    md.set_defaults(handler=_cmd_measure_dimension)

    mt = sub.add_parser("metric", help="metric-side experiments")
    mtsub = mt.add_subparsers(dest="subcommand", required=True)

    ms = mtsub.add_parser("symmetrize", help="average a metric over the flip group")
    ms.add_argument("--in", dest="infile")
    ms.add_argument("--level", type=int, help="compute the graph metric at this level")
    _add_policy(ms)
    ms.add_argument("--mode", choices=("exact", "sampled"), default="exact")
    ms.add_argument("--samples", type=int)
    ms.add_argument("--seed", type=int)
    ms.add_argument("--out", required=True)
    ms.set_defaults(handler=_cmd_metric_symmetrize)

    mb = mtsub.add_parser("blowup", help="rescaled restriction to a prefix block")
    mb.add_argument("--in", dest="infile", help="ambient mode: metric file")
    mb.add_argument("--level-from", type=int, help="level of the ambient graph")
    _add_policy(mb)
    mb.add_argument("--prefix", required=True)
    mb.add_argument("--mode", choices=("internal", "ambient"), default="internal")
    mb.add_argument("--normalization", default="none")
    mb.add_argument("--out", required=True)
    mb.set_defaults(handler=_cmd_metric_blowup)

    mdst = mtsub.add_parser("distortion", help="quasisymmetry distortion profile")
    mdst.add_argument("--in1", required=True)
    mdst.add_argument("--in2", required=True)
    mdst.add_argument("--samples", type=int, required=True)
    mdst.add_argument("--seed", type=int)
    mdst.add_argument("--out")
    mdst.set_defaults(handler=_cmd_metric_distortion)

    mq = mtsub.add_parser("quotient-check", help="projected balls versus grid balls")
    mq.add_argument("--level", type=int, required=True)
    _add_policy(mq)
    mq.add_argument("--out")
    mq.set_defaults(handler=_cmd_metric_quotient_check)

    mc = mtsub.add_parser("cover-check", help="covering of a grid ball preimage")
    mc.add_argument("--level", type=int, required=True)
    _add_policy(mc)
    mc.add_argument("--center", help="grid cell X,Y")
    mc.add_argument("--radius", type=int)
    mc.add_argument("--c", type=int, default=5)
    mc.add_argument("--samples", type=int, help="check this many seeded random balls")
    mc.add_argument("--seed", type=int)
    mc.add_argument("--out")
    mc.set_defaults(handler=_cmd_metric_cover_check)

    mpi = mtsub.add_parser("pi-diagnostic", help="empirical Poincare-ratio scan")
    mpi.add_argument("--level", type=int, required=True)
    _add_policy(mpi)
    mpi.add_argument("--p", type=float, default=2.0)
    mpi.add_argument("--trials", type=int, required=True)
    mpi.add_argument("--seed", type=int)
    mpi.add_argument("--out")
    mpi.set_defaults(handler=_cmd_metric_pi_diagnostic)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    config = {
        k: v
        for k, v in vars(args).items()
        if k not in ("handler",) and v is not None
    }
    t0 = time.perf_counter()
    try:
        code, fields = args.handler(args)
    except UsageError as exc:
        print(f"pillowspace: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"pillowspace: capacity: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, OSError, ValueError) as exc:
        print(f"pillowspace: error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    report = {
        "tool": "pillowspace",
        "version": __version__,
        "command": args.command,
        "config": config,
        "seed": getattr(args, "seed", None),
        "wall_clock_s": round(time.perf_counter() - t0, 3),
        "exit_code": code,
    }
    report.update(fields)
    report.setdefault("input_sha256", {})
    report.setdefault("outputs", {})
    if fields.get("summary"):
        print(fields["summary"], file=sys.stderr)
    print(json.dumps(report, indent=2, sort_keys=True, default=_json_default))
    return code


if __name__ == "__main__":
    sys.exit(main())
