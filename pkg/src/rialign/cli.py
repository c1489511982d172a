"""Command-line front end.

Artifacts go to ``--out`` when given (with a short summary on stdout),
otherwise to stdout (with the summary on stderr). Every artifact carries
the config hash and seed.

Exit codes: 0 success, 1 bad config or arguments, 2 cap exceeded,
3 alignment violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from . import align, directions, lattice, regions, sim
from .errors import AlignmentViolation, CapExceeded, ConfigError
from .netmodel import Kind, config_hash, load_config, sample_channel

EXIT_OK, EXIT_CONFIG, EXIT_CAP, EXIT_ALIGN = 0, 1, 2, 3

SIMULATE_HELP = """\
CSV columns (one row per power point and receiver):
  P0          power per integer symbol
  P           per-antenna power, P0 * nu2
  receiver    1-based receiver index
  Q, lam      constellation radius and scaling
  nu2         largest per-antenna sum of squared directions
  G           columns of the receive generator matrix
  n_useful    useful integer symbols per channel use
  d_min       minimum distance between received codewords, in noise std
  union_bound union bound on the block error
  rate        n_useful * log(2Q+1), nats per channel use
  slope_P0    rate / (0.5 log P0)
  slope_P     rate / (0.5 log P)
  trials, errors, block_error, ci_lo, ci_hi
              Monte Carlo block error of the useful symbols, Wilson 95% CI
"""


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _rational_list(text: str) -> list:
    """'1,1/2,0' -> [1, 1/2, 0]; rows separated by ';' give a matrix."""
    try:
        rows = [[Fraction(x.strip()) for x in row.split(",")] for row in text.split(";")]
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a list of rationals: {text!r}") from exc
    return rows if len(rows) > 1 else rows[0]


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="network config JSON")
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed (default 0)")
    common.add_argument("--out", help="write the artifact here")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--cap-directions", type=int, default=directions.DEFAULT_DIRECTION_CAP)
    common.add_argument("--cap-enum", type=int, default=lattice.DEFAULT_ENUM_CAP)
    common.add_argument("--threads", type=int, default=1)

    p = _Parser(prog="rialign", description="Real interference alignment toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("regions", parents=[common], help="inner/outer DoF regions")
    r.add_argument("--contains", type=_rational_list, help="point, e.g. 1,1/2,1 (X: rows split by ';')")
    r.add_argument("--maximize", type=_rational_list, help="linear objective weights")
    r.add_argument("--vertices", action="store_true", help="enumerate inner-region vertices")

    d = sub.add_parser("directions", parents=[common], help="direction counts and lists")
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--receiver", type=int, default=1, help="target receiver (X networks)")

    a = sub.add_parser("align-check", parents=[common], help="verify alignment at every receiver")
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--dof-point", type=_rational_list)

    m = sub.add_parser("mindist", parents=[common], help="minimum distance of a receive lattice")
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--receiver", type=int, default=1)
    m.add_argument("--Q", type=int, required=True)
    m.add_argument("--delta", type=float, default=0.5)
    m.add_argument("--full-box", action="store_true", help="search the whole lattice box")

    s = sub.add_parser(
        "simulate",
        parents=[common],
        help="power sweep with ML decoding",
        epilog=SIMULATE_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--p0", type=_float_list, default=list(sim.DEFAULT_P0_GRID), help="comma-separated P0 grid")
    s.add_argument("--epsilon", type=float, default=0.1)
    s.add_argument("--trials", type=int, default=2000)
    s.add_argument("--dof-point", type=_rational_list)
    s.add_argument("--cap-decode", type=int, default=lattice.DEFAULT_DECODE_CAP)

    sub.add_parser("formulas", parents=[common], help="closed-form total DoF values")
    return p


def _meta(cfg, seed) -> dict:
    return {"config_hash": config_hash(cfg), "seed": seed, "version": _version()}


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _emit(args, artifact: str, summary: list[str]) -> None:
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(artifact)
        for line in summary:
            print(line)
    else:
        sys.stdout.write(artifact)
        for line in summary:
            print(line, file=sys.stderr)


def _point_csv(meta, labels, points) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={meta['config_hash']} seed={meta['seed']}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(labels)
    for p in points:
        w.writerow([str(x) for x in p])
    return buf.getvalue()


def cmd_regions(args, cfg, seed):
    meta = _meta(cfg, seed)
    inner = regions.inner_region(cfg)
    doc = {"meta": meta, "inner": inner.to_json()}
    summary = []
    outer = None
    if cfg.kind is Kind.IC and cfg.uniform and cfg.K <= regions.MAX_OUTER_K:
        outer = regions.outer_region(cfg.K, cfg.M[0], cfg.N[0])
        doc["outer"] = outer.to_json()
    if args.contains is not None:
        inside = inner.contains(args.contains)
        doc["contains"] = {"point": _strs(args.contains), "inner": inside}
        summary.append(f"inner contains point: {inside}")
        if outer is not None:
            doc["contains"]["outer"] = outer.contains(args.contains)
    if args.maximize is not None:
        value, argmax = inner.maximize(args.maximize)
        doc["maximize"] = {"objective": _strs(args.maximize), "value": str(value), "argmax": [_strs(v) for v in argmax]}
        summary.append(f"maximum: {value}")
        if outer is not None:
            ov, _ = outer.maximize(args.maximize)
            doc["maximize"]["outer_value"] = str(ov)
            summary.append(f"outer maximum: {ov}")
    verts = None
    if args.vertices or args.format == "csv":
        verts = inner.vertices()
        doc["vertices"] = [_strs(v) for v in verts]
        summary.append(f"vertices: {len(verts)}")
    if args.format == "csv":
        _emit(args, _point_csv(meta, inner.labels, verts), summary)
    else:
        _emit(args, _dump_json(doc), summary)
    return EXIT_OK


def _strs(v):
    return [_strs(x) if isinstance(x, (list, tuple)) else str(x) for x in v]


def cmd_directions(args, cfg, seed):
    receiver = args.receiver - 1
    if not 0 <= receiver < cfg.J:
        raise ConfigError(f"receiver must lie in 1..{cfg.J}")
    rx = receiver if cfg.kind is Kind.X else None
    c = directions.direction_counts(cfg, args.n, rx)
    doc = {"meta": _meta(cfg, seed), "n": args.n, "E": c.E, "D": c.D, "D_ext": c.D_ext}
    gens = directions.generator_index(cfg, rx)
    doc["generators"] = [[x + 1 for x in g] for g in gens.coords]
    base = directions.build_direction_set(gens, args.n, cap=args.cap_directions)
    ext = directions.build_direction_set(gens, args.n, extended=True, cap=args.cap_directions)
    summary = [f"E={c.E} D={c.D} D'={c.D_ext}"]
    if args.format == "csv":
        buf = io.StringIO()
        buf.write(f"# config_hash={doc['meta']['config_hash']} seed={seed}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["set", "index"] + [f"a{i + 1}" for i in range(c.E)])
        for name, ds in (("base", base), ("extended", ext)):
            for i, row in enumerate(ds.exponents):
                w.writerow([name, i + 1, *map(int, row)])
        _emit(args, buf.getvalue(), summary)
    else:
        doc["base"] = [list(map(int, r)) for r in base.exponents]
        doc["extended"] = [list(map(int, r)) for r in ext.exponents]
        _emit(args, _dump_json(doc), summary)
    return EXIT_OK


def _allocation(cfg, point):
    if point is None:
        return align.unit_allocation(cfg)
    if cfg.kind is Kind.X and point and not isinstance(point[0], list):
        raise ConfigError("X-network DoF points need J rows separated by ';'")
    return align.allocate_streams(cfg, point)


def cmd_align_check(args, cfg, seed):
    alloc = _allocation(cfg, args.dof_point)
    plan = align.plan_directions(cfg, args.n, alloc, args.cap_directions)
    reports = [align.verify_alignment(plan, j) for j in range(cfg.J)]
    total = sum(len(r.violations) for r in reports)
    if total == 0:
        scheme = align.design_scheme(cfg, sample_channel(cfg, seed), args.n, alloc, seed, args.cap_directions)
        for j in range(cfg.J):
            align.build_receive_model(scheme, j)
    doc = {"meta": _meta(cfg, seed), "n": args.n, "violations": total, "receivers": [r.to_json() for r in reports]}
    summary = [f"receiver {r.receiver + 1}: checked {r.checked}, violations {len(r.violations)}" for r in reports]
    summary.append(f"violations: {total}")
    _emit(args, _dump_json(doc), summary)
    return EXIT_ALIGN if total else EXIT_OK


def cmd_mindist(args, cfg, seed):
    j = args.receiver - 1
    if not 0 <= j < cfg.J:
        raise ConfigError(f"receiver must lie in 1..{cfg.J}")
    scheme = align.design_scheme(cfg, sample_channel(cfg, seed), args.n, seed=seed, cap=args.cap_directions)
    model = align.build_receive_model(scheme, j)
    bounds = model.column_bounds if args.full_box else model.codebook_bounds
    rep = lattice.min_distance(
        model.A, args.Q, delta=args.delta, radii=2 * args.Q * np.asarray(bounds), cap=args.cap_enum
    )
    doc = {"meta": _meta(cfg, seed), "receiver": args.receiver, "n": args.n, "full_box": args.full_box,
           "report": rep.to_json()}
    _emit(args, _dump_json(doc), [f"d_min: {rep.d_min:.6g}", f"diophantine bound: {rep.bound_diophantine:.6g}"])
    return EXIT_OK


def cmd_simulate(args, cfg, seed):
    plan = sim.ExperimentPlan(
        config=cfg,
        n=args.n,
        seed=seed,
        allocation=_allocation(cfg, args.dof_point),
        p0_grid=tuple(args.p0),
        epsilon=args.epsilon,
        trials=args.trials,
        decode_cap=args.cap_decode,
        enum_cap=args.cap_enum,
        direction_cap=args.cap_directions,
        threads=args.threads,
    )
    report = sim.run_link_experiment(plan)
    summary = []
    for j, fit in report.fits.items():
        f = fit["P0"]
        val = "inconclusive" if f.slope is None else f"{f.slope:.4f} +- {f.stderr:.4f}"
        summary.append(f"receiver {j + 1}: slope {val}, finite-n prediction {report.finite_n[j]}")
    if args.format == "csv":
        _emit(args, report.to_csv(), summary)
    else:
        doc = report.to_json()
        doc["meta"] = _meta(cfg, seed)
        doc["table"] = [dict(zip(sim.CSV_COLUMNS, row)) for row in csv.reader(report.to_csv().splitlines()[2:])]
        _emit(args, _dump_json(doc), summary)
    return EXIT_OK


def cmd_formulas(args, cfg, seed):
    rows = regions.total_dof_formulas(cfg)
    meta = _meta(cfg, seed)
    summary = [f"{r.label}: {r.expression} = {r.value}" for r in rows] or ["no closed form applies"]
    if args.format == "csv":
        buf = io.StringIO()
        buf.write(f"# config_hash={meta['config_hash']} seed={seed}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "expression", "value", "witness", "note"])
        for r in rows:
            w.writerow([r.label, r.expression, str(r.value), "" if r.witness is None else str(r.witness), r.note])
        _emit(args, buf.getvalue(), summary)
    else:
        _emit(args, _dump_json({"meta": meta, "formulas": [r.to_json() for r in rows]}), summary)
    return EXIT_OK


COMMANDS = {
    "regions": cmd_regions,
    "directions": cmd_directions,
    "align-check": cmd_align_check,
    "mindist": cmd_mindist,
    "simulate": cmd_simulate,
    "formulas": cmd_formulas,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, file_seed = load_config(args.config)
        seed = file_seed if args.seed is None else args.seed
        if seed < 0:
            raise ConfigError("seed must be non-negative")
        return COMMANDS[args.command](args, cfg, seed)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapExceeded as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except AlignmentViolation as exc:
        print(f"alignment violation: {exc}", file=sys.stderr)
        return EXIT_ALIGN


if __name__ == "__main__":
    sys.exit(main())
