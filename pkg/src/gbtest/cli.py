"""Command-line interface.

    gbtest test --table t.csv --dist d.csv --stat uMST --pvalue perm:1000 --seed 7
    gbtest graph --dist d.csv --kind umst --format dot --table t.csv
    gbtest moments --table t.csv --dist d.csv --kind umst
    gbtest simulate power --scenario normal-shift --runs 200 --perms 200 --seed 1
    gbtest simulate pvalue-accuracy --lengths 8 --sizes 500

Exit codes: 0 success, 2 bad input, 3 a resource cap was hit.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import secrets
import sys
from pathlib import Path

from . import sim
from .catgraph import DEFAULT_CAP, CapExceeded, CategoryGraph, GraphError, SubsetTooLarge, build_graph
from .distance import METRICS, DistanceError, DistanceMatrix, load_matrix, pairwise_distance
from .inference import (
    TooLarge,
    bootstrap_moments_r,
    perm_moments_r,
    perm_moments_t,
    run_test,
)
from .stats import KINDS, TooManyOddCategories
from .table import ContingencyTable, TableError, from_records

EXIT_OK, EXIT_INPUT, EXIT_CAP = 0, 2, 3


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# file formats


def _read_csv(path: str) -> list[list[str]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    except OSError as e:
        raise InputError(f"{path}: {e.strerror or e}") from None


def read_table(path: str) -> tuple[ContingencyTable, list[str]]:
    """Table plus every id listed in the file (zero-margin rows included)."""
    rows = _read_csv(path)
    if not rows or [c.strip() for c in rows[0]] != ["category", "group_a", "group_b"]:
        raise InputError(f"{path}: header must be category,group_a,group_b")
    records, ids = [], []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise InputError(f"{path}:{i}: expected 3 fields")
        cid = row[0].strip()
        try:
            records.append((cid, int(row[1]), int(row[2])))
        except ValueError:
            raise InputError(f"{path}:{i}: counts must be integers") from None
        ids.append(cid)
    return from_records(records), ids


def read_distance(path: str) -> tuple[list[str], list[list[float]]]:
    rows = _read_csv(path)
    if not rows:
        raise InputError(f"{path}: empty")
    header = [c.strip() for c in rows[0]]
    body = rows[1:]
    if len(header) == len(body) + 1:
        header = header[1:]     # leading corner cell
    ids = header
    if len(body) != len(ids):
        raise InputError(f"{path}: {len(ids)} ids in header but {len(body)} rows")
    by_id = {}
    for i, row in enumerate(body, start=2):
        if len(row) != len(ids) + 1:
            raise InputError(f"{path}:{i}: expected id and {len(ids)} values")
        try:
            by_id[row[0].strip()] = [float(x) for x in row[1:]]
        except ValueError:
            raise InputError(f"{path}:{i}: non-numeric distance") from None
    if set(by_id) != set(ids):
        raise InputError(f"{path}: row ids do not match header ids")
    col = {cid: j for j, cid in enumerate(ids)}
    return ids, [[by_id[r][col[c]] for c in ids] for r in ids]


def distance_for(table: ContingencyTable, all_ids: list[str], path: str | None,
                 metric: str | None) -> DistanceMatrix:
    """Distances over the table's categories, in table order."""
    if path:
        ids, raw = read_distance(path)
        if set(ids) != set(all_ids):
            missing = sorted(set(all_ids) - set(ids))[:5]
            extra = sorted(set(ids) - set(all_ids))[:5]
            raise InputError(f"distance ids differ from table ids (missing {missing}, extra {extra})")
        full = load_matrix(raw, ids)
        pos = {cid: j for j, cid in enumerate(ids)}
        return full.subset([pos[c] for c in table.category_ids])
    if metric:
        items = table.category_ids
        if metric == "rank_diff":
            try:
                items = [int(c) for c in items]
            except ValueError:
                raise InputError("rank_diff needs integer category ids") from None
        return pairwise_distance(metric, items, table.category_ids)
    raise InputError("give --dist or --metric")


def read_c0(path: str, ids) -> CategoryGraph:
    pos = {cid: k for k, cid in enumerate(ids)}
    edges = []
    for i, row in enumerate(_read_csv(path), start=1):
        row = [c.strip() for c in row]
        if i == 1 and row == ["u", "v"]:
            continue
        if len(row) != 2:
            raise InputError(f"{path}:{i}: expected u,v")
        try:
            edges.append((pos[row[0]], pos[row[1]]))
        except KeyError as e:
            raise InputError(f"{path}:{i}: unknown category {e.args[0]!r}") from None
    try:
        return CategoryGraph(len(ids), tuple(edges))
    except ValueError as e:
        raise InputError(f"{path}: {e}") from None


def _emit(text: str, output: str | None):
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(63)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _parse_pvalue(text: str) -> tuple[str, int | None]:
    if text.startswith("perm"):
        _, _, b = text.partition(":")
        try:
            B = int(b) if b else 1000
        except ValueError:
            raise InputError(f"bad --pvalue {text!r}") from None
        if B < 1:
            raise InputError("B must be >= 1")
        return "perm", B
    if text.startswith("both"):
        _, _, b = text.partition(":")
        return "both", int(b) if b else 1000
    if text in ("normal", "exact"):
        return text, None
    raise InputError(f"bad --pvalue {text!r}; use perm:B, normal, exact or both")


def _graph_source(args, table: ContingencyTable, all_ids) -> CategoryGraph:
    if args.c0:
        if table.K != len(all_ids):
            kept = set(table.category_ids)
            raise InputError(f"custom C0 needs every category nonempty; empty: "
                             f"{[c for c in all_ids if c not in kept][:5]}")
        return read_c0(args.c0, table.category_ids)
    return build_graph(args.kind, distance_for(table, all_ids, args.dist, args.metric))


# ---------------------------------------------------------------------------
# subcommands


def cmd_test(args) -> int:
    table, all_ids = read_table(args.table)
    method, B = _parse_pvalue(args.pvalue)
    c0 = d = None
    if args.stat in ("R_C0", "T_C0"):
        if not args.c0:
            raise InputError(f"--stat {args.stat} needs --c0")
        c0 = _graph_source(args, table, all_ids)
    elif args.stat not in ("pearson", "deviance"):
        d = distance_for(table, all_ids, args.dist, args.metric)
    seed = _seed(args) if method in ("perm", "both") else args.seed
    result = run_test(table, args.stat, d=d, c0=c0, method=method, B=B or 1000, seed=seed,
                      cap=args.cap, threads=args.threads)
    _emit(json.dumps(result.to_dict(), indent=2) + "\n", args.output)
    return EXIT_OK


def cmd_graph(args) -> int:
    if args.table:
        table, all_ids = read_table(args.table)
        d = distance_for(table, all_ids, args.dist, args.metric)
        ids = table.category_ids
    elif args.dist:
        ids, raw = read_distance(args.dist)
        d = load_matrix(raw, ids)
        table = None
    else:
        raise InputError("give --dist, or --table with --metric")
    g = build_graph(args.kind, d)
    text = g.to_dot(ids, table, name=args.kind.replace("-", "_")) if args.format == "dot" else g.to_csv(ids)
    _emit(text, args.output)
    return EXIT_OK


def cmd_moments(args) -> int:
    table, all_ids = read_table(args.table)
    c0 = _graph_source(args, table, all_ids)
    out = {"K": table.K, "N": table.N, "n_a": table.n_a, "n_b": table.n_b, "edges": len(c0)}
    for name, fn in (("R_perm", perm_moments_r), ("T_perm", perm_moments_t), ("R_bootstrap", bootstrap_moments_r)):
        try:
            m = fn(table, c0)
            out[name] = {"mean": m.mean, "variance": m.variance}
        except ValueError as e:
            out[name] = {"error": str(e)}
    _emit(json.dumps(out, indent=2) + "\n", args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    seed = _seed(args)
    if args.study == "power":
        scen = sim.get_scenario(args.scenario)
        kinds = args.stats.split(",")
        for k in kinds:
            if k not in KINDS:
                raise InputError(f"unknown statistic {k!r}")
        alphas = [float(a) for a in args.alphas.split(",")]
        table = sim.power_study(scen, kinds, alphas, args.runs, args.perms, seed, args.threads)
        _emit(table.to_csv(), args.output)
        for row in table.rows:
            print(f"{scen.name} {row['statistic']} alpha={row['alpha']}: "
                  f"power {row['power']:.3f} (se {row['stderr']:.3f})", file=sys.stderr)
    else:
        lengths = [int(x) for x in args.lengths.split(",")]
        sizes = [int(x) for x in args.sizes.split(",")]
        study = sim.pvalue_accuracy(lengths, sizes, args.runs, args.perms, seed, threads=args.threads)
        _emit(study.to_csv(), args.output)
        if args.quartiles:
            Path(args.quartiles).write_text(study.quartiles_csv(), encoding="utf-8")
        for q in study.quartiles():
            print(f"length={q['length']} N={q['N']} {q['statistic']}: median diff {q['median']:+.4f} "
                  f"IQR [{q['q1']:+.4f}, {q['q3']:+.4f}]", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_distance(p, kinds=True):
    p.add_argument("--dist", help="distance matrix CSV")
    p.add_argument("--metric", choices=METRICS, help="compute distances from the category ids")
    if kinds:
        p.add_argument("--kind", default="umst", choices=["mst", "umst", "c-unng"],
                       help="category graph (default umst)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gbtest", description="Graph-based two-sample tests for categorical data.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="compute a statistic and its p-value")
    p.add_argument("--table", required=True)
    _add_distance(p, kinds=False)
    p.add_argument("--c0", help="custom category graph, lines u,v")
    p.add_argument("--stat", default="C-uMST", choices=KINDS)
    p.add_argument("--pvalue", default="both", help="perm:B, normal, exact or both[:B]")
    p.add_argument("--seed", type=int)
    p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="enumeration cap")
    p.add_argument("--threads", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("graph", help="export a category graph")
    p.add_argument("--table", help="label DOT nodes with counts; join distances by id")
    _add_distance(p)
    p.add_argument("--format", default="csv", choices=["csv", "dot"])
    p.add_argument("--output")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("moments", help="analytic null moments on a category graph")
    p.add_argument("--table", required=True)
    _add_distance(p)
    p.add_argument("--c0")
    p.add_argument("--output")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("simulate", help="power and p-value accuracy studies")
    p.add_argument("study", choices=["power", "pvalue-accuracy"])
    p.add_argument("--scenario", default="normal-shift", choices=sorted(sim.SCENARIOS))
    p.add_argument("--stats", default="aMST,uMST,aMDP,uNNG,pearson,deviance")
    p.add_argument("--alphas", default="0.01,0.05,0.1")
    p.add_argument("--lengths", default="8")
    p.add_argument("--sizes", default="500")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--perms", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--output")
    p.add_argument("--quartiles", help="also write per-cell quartiles here")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CapExceeded, TooManyOddCategories, SubsetTooLarge, TooLarge) as e:
        print(f"error: {e}", file=sys.stderr)
        if isinstance(e, CapExceeded) and args.command == "test":
            print(f"the distance matrix has {e.count} minimum spanning trees; "
                  f"use --stat C-uMST (or uMST) instead", file=sys.stderr)
        return EXIT_CAP
    except (InputError, TableError, DistanceError, GraphError, sim.ScenarioError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
