"""Command-line front end.

Exit codes are shared by all commands: 10 sat, 20 unsat, 30 aborted, 2 for
usage or parse errors.  ``generate``, ``bench``, ``convert`` and ``table``
exit 0 on success; ``table --check`` and ``oracle --against-solver`` exit 1
when a check fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import List, Optional

from . import algebra as ia
from .instances import GenSpecA, GenSpecH, OracleCapExceeded, gen_A, gen_H, load_pool, oracle
from .network import ParseError, qcn_to_json, read_qcn, serialize_qcn
from .solver import (ABORTED, SAT, UNSAT, SolverOptions, backbone, enumerate_scenarios,
                     solve_sat, union_labels)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_SAT = 10
EXIT_UNSAT = 20
EXIT_ABORTED = 30

STATUS_EXIT = {SAT: EXIT_SAT, UNSAT: EXIT_UNSAT, ABORTED: EXIT_ABORTED}
BENCH_TIMEOUT_S = 300.0


class UsageError(Exception):
    pass


@dataclass
class RunRecord:
    instance: str
    mode: str
    status: str
    wall_ms: float
    decisions: int
    conflicts: int
    d: float


def _options(args) -> SolverOptions:
    return SolverOptions(
        closure=not args.no_closure,
        maintain_closure=not args.no_closure,
        forward_check=not args.no_forward_check,
        allow_point_intervals=args.allow_point_intervals,
        timeout_s=args.timeout_s,
        heuristic=args.heuristic,
        backjumping=args.backjumping,
        restarts=not args.no_restarts,
    )


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(text)


def _stats_line(stats) -> str:
    return (f"decisions={stats.decisions} conflicts={stats.conflicts} "
            f"propagations={stats.propagations} wall_ms={stats.wall_ms:.1f}")


# -- reasoning commands ----------------------------------------------------------

def cmd_solve(args) -> int:
    res = solve_sat(read_qcn(args.file), _options(args))
    lines = [res.status]
    if res.sat:
        lines.append("scenario:")
        lines += [f"  {i} {j} {b.name}" for (i, j), b in sorted(res.scenario.items())]
        lines.append("solution:")
        lines += [f"  {v} [{s}, {e}]" for v, (s, e) in enumerate(res.solution)]
    lines.append(_stats_line(res.stats))
    _emit(args, res.to_json(), "\n".join(lines))
    return STATUS_EXIT[res.status]


def cmd_backbone(args) -> int:
    res = backbone(read_qcn(args.file), _options(args))
    lines = [res.status]
    if res.status == SAT:
        lines.append("backbone:")
        lines += [f"  {i} {j} {b.name}" for (i, j), b in sorted(res.backbone.items())]
    lines.append(_stats_line(res.stats))
    _emit(args, res.to_json(), "\n".join(lines))
    return STATUS_EXIT[res.status]


def cmd_union(args) -> int:
    res = union_labels(read_qcn(args.file), _options(args))
    lines = [res.status]
    if res.status == SAT:
        lines.append("union:")
        lines += [f"  {i} {j} {ia.format_relation(r)}" for (i, j), r in sorted(res.union.items())]
    lines.append(_stats_line(res.stats))
    _emit(args, res.to_json(), "\n".join(lines))
    return STATUS_EXIT[res.status]


def cmd_enumerate(args) -> int:
    if args.limit is not None and args.limit < 1:
        raise UsageError("--limit must be at least 1")
    q = read_qcn(args.file)
    found = []
    for scenario, witness in enumerate_scenarios(q, args.limit, _options(args)):
        found.append({
            "scenario": [{"i": i, "j": j, "rel": b.name} for (i, j), b in sorted(scenario.items())],
            "solution": [{"var": v, "start": s, "end": e} for v, (s, e) in enumerate(witness)],
        })
    lines = [f"{len(found)} scenario(s)"]
    for k, item in enumerate(found):
        rels = " ".join(f"{e['i']}-{e['j']}:{e['rel']}" for e in item["scenario"])
        lines.append(f"  #{k} {rels}")
    _emit(args, {"status": SAT if found else UNSAT, "count": len(found), "scenarios": found},
          "\n".join(lines))
    return EXIT_SAT if found else EXIT_UNSAT


def cmd_oracle(args) -> int:
    q = read_qcn(args.file)
    try:
        rep = oracle(q, args.max_n, args.max_scenarios, args.allow_point_intervals)
    except OracleCapExceeded as exc:
        raise UsageError(f"oracle cap exceeded: {exc}") from None
    payload = rep.to_json()
    lines = [payload["status"], f"scenario_count={rep.scenario_count}"]
    lines += [f"  backbone {i} {j} {b.name}" for (i, j), b in sorted(rep.backbone.items())]
    lines += [f"  union {i} {j} {ia.format_relation(r)}" for (i, j), r in sorted(rep.union.items())]
    if not args.against_solver:
        _emit(args, payload, "\n".join(lines))
        return EXIT_SAT if rep.sat else EXIT_UNSAT

    opts = _options(args)
    diffs = []
    sat = solve_sat(q, opts)
    if sat.status != payload["status"]:
        diffs.append(f"sat: oracle={payload['status']} solver={sat.status}")
    count = sum(1 for _ in enumerate_scenarios(q, None, opts))
    if count != rep.scenario_count:
        diffs.append(f"scenario_count: oracle={rep.scenario_count} solver={count}")
    if rep.sat:
        bb = backbone(q, opts)
        if bb.status != SAT or bb.backbone != rep.backbone:
            diffs.append("backbone differs")
        un = union_labels(q, opts)
        if un.status != SAT or un.union != rep.union:
            diffs.append("union differs")
    payload["agree"] = not diffs
    payload["differences"] = diffs
    lines.append("agree" if not diffs else "DISAGREE: " + "; ".join(diffs))
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK if not diffs else EXIT_CHECK_FAILED


# -- table / convert ---------------------------------------------------------------

def cmd_table(args) -> int:
    table = ia.build_table(args.allow_point_intervals)
    problems = ia.check_identities(args.allow_point_intervals) if args.check else []
    if args.json:
        payload = {"table": ia.table_as_tokens(args.allow_point_intervals)}
        if args.check:
            payload["violations"] = problems
        print(json.dumps(payload, indent=2))
    else:
        for a in ia.Base:
            for b in ia.Base:
                print(f"{a.name} {b.name} {ia.format_relation(table[a][b])}")
        if args.check:
            print("identities: ok" if not problems else "identities: FAILED")
            for p in problems:
                print(f"  {p}")
    return EXIT_CHECK_FAILED if problems else EXIT_OK


def cmd_convert(args) -> int:
    q = read_qcn(args.file)
    target = args.to
    if target is None:
        with open(args.file) as fh:
            target = "text" if fh.read().lstrip().startswith("{") else "json"
    out = json.dumps(qcn_to_json(q), indent=2) + "\n" if target == "json" else serialize_qcn(q)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


# -- generation ------------------------------------------------------------------

def _pool(arg: Optional[str]):
    if arg is None or arg == "default":
        return None
    try:
        return load_pool(arg)
    except ValueError as exc:
        raise UsageError(f"bad pool file {arg}: {exc}") from None


def _specs(model: str, n: int, d: float, s: float, count: int, seed: int, pool):
    try:
        if model == "A":
            return [GenSpecA(n, d, s, seed + k) for k in range(count)]
        return [GenSpecH(n, d, seed + k, pool) for k in range(count)]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _generate(spec):
    return gen_A(spec) if isinstance(spec, GenSpecA) else gen_H(spec)


def _spec_entry(spec, pool_arg) -> dict:
    entry = {"id": spec.filename()[:-4], "file": spec.filename(), "n": spec.n, "d": spec.d,
             "seed": spec.seed}
    if isinstance(spec, GenSpecA):
        entry.update(model="A", s=spec.s)
    else:
        entry.update(model="H", pool=pool_arg or "default")
    return entry


def cmd_generate(args) -> int:
    if args.count < 1:
        raise UsageError("--count must be at least 1")
    pool = _pool(args.pool)
    specs = _specs(args.model, args.n, args.d, args.s, args.count, args.seed, pool)
    os.makedirs(args.outdir, exist_ok=True)
    entries = []
    for spec in specs:
        with open(os.path.join(args.outdir, spec.filename()), "w") as fh:
            fh.write(serialize_qcn(_generate(spec)))
        entries.append(_spec_entry(spec, args.pool))
    with open(os.path.join(args.outdir, "manifest.json"), "w") as fh:
        json.dump({"instances": entries}, fh, indent=2)
        fh.write("\n")
    if not args.json:
        print(f"wrote {len(entries)} instance(s) to {args.outdir}")
    else:
        print(json.dumps({"outdir": args.outdir, "instances": entries}, indent=2))
    return EXIT_OK


# -- bench -----------------------------------------------------------------------

_MODES = {"sat": solve_sat, "backbone": backbone, "union": union_labels}


def _bench_one(task) -> RunRecord:
    inst_id, d, source, mode, opts = task
    q = read_qcn(source) if isinstance(source, str) else _generate(source)
    res = _MODES[mode](q, opts)
    return RunRecord(inst_id, mode, res.status, round(res.stats.wall_ms, 3),
                     res.stats.decisions, res.stats.conflicts, d)


def _parse_degrees(text: str) -> List[float]:
    out: List[float] = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-")
            out += [float(x) for x in range(int(lo), int(hi) + 1)]
        elif part:
            out.append(float(part))
    return out


def _bench_tasks(args, opts):
    if args.suite:
        with open(os.path.join(args.suite, "manifest.json")) as fh:
            entries = json.load(fh)["instances"]
        return [(e["id"], e["d"], os.path.join(args.suite, e["file"]), args.mode, opts)
                for e in entries]
    pool = _pool(args.pool)
    tasks = []
    # task order (degree, then seed) is the instance-id order of the output
    for d in _parse_degrees(args.degrees):
        for spec in _specs(args.model, args.n, d, args.s, args.count, args.seed, pool):
            tasks.append((spec.filename()[:-4], d, spec, args.mode, opts))
    return tasks


def summarize(records: List[RunRecord]) -> List[dict]:
    """Per-degree statistics; times use completed (non-aborted) runs only."""
    rows = []
    for d in sorted({r.d for r in records}):
        group = [r for r in records if r.d == d]
        done = [r for r in group if r.status != ABORTED]
        times = [r.wall_ms for r in done]
        rows.append({
            "d": d,
            "runs": len(group),
            "completed": len(done),
            "aborted": len(group) - len(done),
            "sat": sum(r.status == SAT for r in done),
            "sat_fraction": round(sum(r.status == SAT for r in done) / len(done), 4) if done else None,
            "median_ms": round(statistics.median(times), 3) if times else None,
            "mean_ms": round(statistics.fmean(times), 3) if times else None,
            "max_ms": round(max(times), 3) if times else None,
        })
    return rows


def cmd_bench(args) -> int:
    if args.timeout_s is None:
        args.timeout_s = BENCH_TIMEOUT_S
    opts = _options(args)
    tasks = _bench_tasks(args, opts)
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            records = list(ex.map(_bench_one, tasks))
    else:
        records = [_bench_one(t) for t in tasks]

    if args.csv:
        names = [f.name for f in fields(RunRecord)]
        fresh = not os.path.exists(args.csv) or os.path.getsize(args.csv) == 0
        with open(args.csv, "a", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=names)
            if fresh:
                w.writeheader()
            for r in records:
                w.writerow(asdict(r))

    summary = summarize(records)
    if args.json:
        print(json.dumps({"records": [asdict(r) for r in records], "summary": summary}, indent=2))
    else:
        cols = ["d", "runs", "completed", "aborted", "sat", "sat_fraction",
                "median_ms", "mean_ms", "max_ms"]
        print("\t".join(cols))
        for row in summary:
            print("\t".join("-" if row[c] is None else str(row[c]) for c in cols))
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--seed", type=int, default=0, help="base seed for generate/bench")
    common.add_argument("--timeout-s", type=float, default=None,
                        help=f"wall-clock budget per query (bench default {BENCH_TIMEOUT_S:g})")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for bench")
    common.add_argument("--allow-point-intervals", action="store_true",
                        help="permit start == end")
    common.add_argument("--no-closure", action="store_true",
                        help="disable algebraic closure (preprocessing and in search)")
    common.add_argument("--no-forward-check", action="store_true")
    common.add_argument("--heuristic", choices=["fail-first", "static"], default="fail-first")
    common.add_argument("--backjumping", action="store_true",
                        help="conflict-directed backjumping")
    common.add_argument("--no-restarts", action="store_true",
                        help="no restarts in backbone/union queries")

    ap = argparse.ArgumentParser(prog="allendl",
                                 description="Allen interval algebra reasoning via difference logic")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, fn, helptext in [("solve", cmd_solve, "find one consistent scenario"),
                               ("backbone", cmd_backbone, "relations shared by all scenarios"),
                               ("union", cmd_union, "relations used by some scenario")]:
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("file")
        p.set_defaults(func=fn)

    p = sub.add_parser("enumerate", parents=[common], help="list consistent scenarios")
    p.add_argument("file")
    p.add_argument("--limit", type=int, default=None)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("oracle", parents=[common], help="brute-force ground truth")
    p.add_argument("file")
    p.add_argument("--max-n", type=int, default=5)
    p.add_argument("--max-scenarios", type=int, default=10 ** 7)
    p.add_argument("--against-solver", action="store_true",
                   help="also run the solver and report any disagreement")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("table", parents=[common], help="print the composition table")
    p.add_argument("--check", action="store_true", help="verify algebraic identities")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("convert", parents=[common], help="text <-> JSON instance conversion")
    p.add_argument("file")
    p.add_argument("--to", choices=["text", "json"], default=None)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_convert)

    def model_args(p, count):
        p.add_argument("--model", choices=["A", "H"], default="A")
        p.add_argument("--n", type=int, default=30)
        p.add_argument("--s", type=float, default=6.5)
        p.add_argument("--count", type=int, default=count)
        p.add_argument("--pool", default=None, help="'default' or a pool file (model H)")

    p = sub.add_parser("generate", parents=[common], help="write random instances")
    model_args(p, 10)
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", parents=[common], help="run a degree sweep")
    model_args(p, 10)
    p.add_argument("--degrees", default="2-20", help="e.g. '2-20' or '4,8,12'")
    p.add_argument("--suite", default=None, help="directory written by generate")
    p.add_argument("--mode", choices=sorted(_MODES), default="sat")
    p.add_argument("--csv", default=None, help="append run records to this file")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ParseError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
