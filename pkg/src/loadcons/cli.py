"""Command line entry point: ``loadcons <subcommand>``.

Stages can run one at a time (generate, cluster, mine, paths, plan,
evaluate), passing JSON-lines artifacts between them, or all together with
``pipeline``. Exit status is 0 on success, 1 when a plan fails verification
and 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path as FsPath

from .baseline import plan_nnch, plan_tl
from .cluster import cluster_loads, write_clusters
from .datagen import GenConfig, generate, split_train_test, write_generated
from .evaluate import DayRecord, compare_report, dumps_report, render_table
from .mining import (
    abstract_clusters,
    consolidation_points_by_group,
    mine_groups,
    read_candidates,
    read_transactions,
    write_candidates,
    write_transactions,
)
from .model import ContractViolation, DataError, Node, read_network
from .pathgen import count_unfiltered_paths, write_paths
from .solver import CAPACITY_SCOPES, solve_bruteforce, solve_exact, verify_plan
from .pipeline import (
    METHODS,
    EventLog,
    PipelineConfig,
    StageError,
    TacticalResult,
    build_instance,
    destination_days,
    network_feasibility,
    plan_from_records,
    run_pipeline,
)

log = logging.getLogger("loadcons")


def _load_config(path: str | None) -> tuple[dict, dict]:
    """(generator section, pipeline section) of a JSON config file.

    A file without ``generate``/``pipeline`` keys is taken as a flat
    pipeline section.
    """
    if path is None:
        return {}, {}
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise DataError(f"{path}: config must be a JSON object")
    if "generate" in data or "pipeline" in data:
        extra = set(data) - {"generate", "pipeline"}
        if extra:
            raise DataError(f"{path}: unknown sections {sorted(extra)}")
        return dict(data.get("generate", {})), dict(data.get("pipeline", {}))
    return {}, data


def _pipeline_config(args) -> PipelineConfig:
    _, section = _load_config(args.config)
    if args.jobs is not None:
        section["jobs"] = args.jobs
    if args.seed is not None:
        section["seed"] = args.seed
    for key in ("eps", "min_sup", "min_pts", "maximal_only", "max_nodes", "max_seconds",
                "capacity_scope", "require_comembership", "normalize"):
        if getattr(args, key, None) is not None:
            section[key] = getattr(args, key)
    if section.get("normalize") == "cross-tier":
        section["normalize"] = "cross"
    cfg = PipelineConfig.from_dict(section)
    cfg.validate()
    return cfg


def _tiers(data_dir: FsPath) -> dict[Node, str] | None:
    f = data_dir / "destinations.json"
    if not f.exists():
        return None
    with open(f, encoding="utf-8") as fh:
        return {Node.parse(k): str(v) for k, v in json.load(fh)["tiers"].items()}


def _out(args) -> FsPath:
    out = FsPath(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _split(network, cfg):
    return split_train_test(sorted(network.loads, key=lambda l: l.id), cfg.test_weeks)


def cmd_generate(args) -> int:
    section, _ = _load_config(args.config)
    if args.seed is not None:
        section["seed"] = args.seed
    if args.days is not None:
        section["days"] = args.days
    cfg = GenConfig.from_dict(section)
    data = generate(cfg)
    write_generated(data, _out(args), cfg)
    print(f"{len(data.network.loads)} loads, {len(data.destinations)} destinations -> {args.out}")
    return 0


def cmd_cluster(args) -> int:
    cfg = _pipeline_config(args)
    data = FsPath(args.data)
    network = read_network(data)
    tiers = _tiers(data)
    train, _ = _split(network, cfg)
    if args.dest and args.dest != "all":
        dests = [Node.parse(args.dest)]
    else:
        dests = None if tiers is None else sorted(tiers)
    clusters, noise, skipped = cluster_loads(network, train, cfg.eps, cfg.min_pts, cfg.partial_threshold, dests)
    out = _out(args)
    write_clusters(clusters, out / "clusters.jsonl")
    write_transactions(abstract_clusters(clusters, {l.id: l for l in train}), out / "transactions.jsonl")
    print(f"{len(clusters)} clusters, {len(noise)} noise points, {len(skipped)} skipped loads")
    return 0


def cmd_mine(args) -> int:
    cfg = _pipeline_config(args)
    network = read_network(args.data)
    transactions = read_transactions(args.transactions)
    mined = mine_groups(transactions, cfg.min_sup, network_feasibility(network, cfg.speed_mph), cfg.maximal_only)
    out = _out(args)
    write_candidates(mined, out / "candidates.jsonl")
    cps = {f"{dest}@{dow}": sorted(str(n) for n in hubs)
           for (dest, dow), hubs in sorted(consolidation_points_by_group(mined).items())}
    (out / "cps.json").write_text(json.dumps(cps, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"{sum(len(r.candidates) for r in mined.values())} candidate sets in {len(mined)} groups")
    return 0


def _instances(args, cfg):
    data = FsPath(args.data)
    network = read_network(data)
    tiers = _tiers(data)
    _, test = _split(network, cfg)
    tactical = TacticalResult.from_artifacts(read_candidates(args.candidates))
    days = destination_days(test, cfg.partial_threshold, cfg.weekdays_only, None if tiers is None else sorted(tiers))
    insts = [build_instance(network, dest, day, partial, tactical, cfg) for (dest, day), partial in days.items()]
    return network, tiers, insts


def cmd_paths(args) -> int:
    cfg = _pipeline_config(args)
    _, _, insts = _instances(args, cfg)
    recs = (
        {"destination": str(i.destination), "due_day": i.due_day, **p.to_record()}
        for i in insts for l in i.loads for p in i.paths[l.id]
    )
    write_paths(recs, _out(args) / "paths.jsonl")
    print(f"{sum(i.n_paths for i in insts)} paths over {len(insts)} destination-days")
    return 0


def _solve_one(method: str, inst, cfg: PipelineConfig):
    if method == "exact":
        return solve_exact(inst, cfg.capacity_scope, cfg.max_nodes, cfg.max_seconds)
    if method == "bruteforce":
        return solve_bruteforce(inst, cfg.capacity_scope)
    return plan_nnch(inst) if method == "nnch" else plan_tl(inst)


def cmd_plan(args) -> int:
    cfg = _pipeline_config(args)
    network, _, insts = _instances(args, cfg)
    out = _out(args)
    events = EventLog(out / "events.jsonl")
    methods = METHODS if args.solver == "all" else (args.solver,)
    lines, summary, bad = [], [], 0
    for inst in insts:
        plans = {m: _solve_one(m, inst, cfg) for m in methods}
        for method, plan in plans.items():
            for rec in plan.to_records():
                lines.append(json.dumps({"destination": str(inst.destination), "due_day": inst.due_day,
                                         "method": method, **rec}, sort_keys=True))
            problems = verify_plan(inst, plan, cfg.capacity_scope)
            bad += len(problems)
            for p in problems:
                print(f"verify {inst.destination} day {inst.due_day} {method}: {p}", file=sys.stderr)
            summary.append({"destination": str(inst.destination), "due_day": inst.due_day, "method": method,
                            "objective": plan.objective, "optimal": plan.optimal,
                            "trailers": plan.n_trailers(), **plan.stats})
        events.emit("plan", destination=str(inst.destination), due_day=inst.due_day, loads=len(inst.loads),
                    paths=inst.n_paths)
    (out / "plans.jsonl").write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    (out / "plan_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"planned {len(insts)} destination-days with {', '.join(methods)}")
    return 1 if bad else 0


def cmd_evaluate(args) -> int:
    cfg = _pipeline_config(args)
    network, tiers, insts = _instances(args, cfg)
    plans_path = FsPath(args.plans)
    if plans_path.is_dir():
        plans_path = plans_path / "plans.jsonl"
    by_day: dict[tuple[str, int], dict[str, list[dict]]] = {}
    with open(plans_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                by_day.setdefault((rec["destination"], rec["due_day"]), {}).setdefault(rec["method"], []).append(rec)
    records = []
    for inst in insts:
        key = (str(inst.destination), inst.due_day)
        if key not in by_day:
            raise DataError(f"no plans for {key[0]} day {key[1]}")
        plans = {m: plan_from_records(inst, recs, m) for m, recs in sorted(by_day.pop(key).items())}
        unf = count_unfiltered_paths(inst.loads, network, cfg.dwell_minutes, cfg.speed_mph)
        tier = "all" if tiers is None else tiers[inst.destination]
        records.append(DayRecord(inst.destination, inst.due_day, tier, len(inst.loads), inst.n_paths, unf, plans, inst))
    if by_day:
        extra = sorted(by_day)[0]
        raise DataError(f"plans for {extra[0]} day {extra[1]} have no matching instance")
    transactions = read_transactions(args.train) if args.train else None
    echo = cfg.to_dict()
    echo.pop("jobs")
    report = compare_report(records, transactions, cfg.capacity_scope, cfg.normalize, echo)
    target = FsPath(args.out)
    if target.suffix != ".json":
        target.mkdir(parents=True, exist_ok=True)
        target = target / "report.json"
    else:
        target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(dumps_report(report), encoding="utf-8")
    table = render_table(report)
    target.with_suffix(".txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return 0


def cmd_pipeline(args) -> int:
    gen_section, _ = _load_config(args.config)
    cfg = _pipeline_config(args)
    out = _out(args)
    if args.data:
        network, tiers = read_network(args.data), _tiers(FsPath(args.data))
    else:
        if args.seed is not None:
            gen_section["seed"] = args.seed
        gcfg = GenConfig.from_dict(gen_section)
        data = generate(gcfg)
        write_generated(data, out / "data", gcfg)
        network, tiers = data.network, {k: str(v) for k, v in data.destinations.items()}
    result = run_pipeline(network, cfg, out, tiers, EventLog(out / "events.jsonl"))
    for f in result.failures:
        print(f, file=sys.stderr)
    if result.ok:
        print(render_table(result.report), end="")
    return 0 if result.ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loadcons", description="Freight load consolidation planning.")
    p.add_argument("--config", help="JSON config file (flat pipeline keys, or 'generate'/'pipeline' sections)")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--jobs", type=int, help="worker processes for destination-days")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("-v", "--verbose", action="store_true", help="log stage events to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def with_tuning(sp):
        sp.add_argument("--eps", type=float, help="clustering radius in radians")
        sp.add_argument("--min-sup", dest="min_sup", type=float, help="support: count >= 1 or fraction in (0, 1)")
        sp.add_argument("--min-pts", dest="min_pts", type=int, help="DBSCAN core threshold")
        sp.add_argument("--maximal", dest="maximal_only", action="store_const", const=True,
                        help="keep only maximal candidate sets")
        sp.add_argument("--capacity-scope", dest="capacity_scope", choices=CAPACITY_SCOPES,
                        help="origins whose trailer capacity is enforced: every last-leg origin, or hubs only")
        sp.add_argument("--require-comembership", dest="require_comembership", action="store_const", const=True,
                        help="keep a hub path only if both loads share a candidate set")
        sp.add_argument("--normalize", choices=("within", "cross", "cross-tier"),
                        help="distance denominator: each day's TL miles, or the first tier's mean")
        return sp

    sp = sub.add_parser("generate", help="write a synthetic network")
    sp.add_argument("--days", type=int, help="history length in days")
    sp.set_defaults(func=cmd_generate)

    sp = with_tuning(sub.add_parser("cluster", help="cluster the training loads"))
    sp.add_argument("--data", required=True, help="network directory")
    sp.add_argument("--dest", default="all", help="destination node TERMINAL/SORT, or 'all'")
    sp.set_defaults(func=cmd_cluster)

    sp = with_tuning(sub.add_parser("mine", help="mine candidate sets from transactions"))
    sp.add_argument("--data", required=True)
    sp.add_argument("--transactions", required=True)
    sp.set_defaults(func=cmd_mine)

    sp = with_tuning(sub.add_parser("paths", help="list paths for the test destination-days"))
    sp.add_argument("--data", required=True)
    sp.add_argument("--candidates", required=True)
    sp.set_defaults(func=cmd_paths)

    sp = with_tuning(sub.add_parser("plan", help="plan the test destination-days"))
    sp.add_argument("--data", required=True)
    sp.add_argument("--candidates", required=True)
    sp.add_argument("--solver", choices=("all", "exact", "bruteforce", "nnch", "tl"), default="all")
    sp.add_argument("--budget-nodes", dest="max_nodes", type=int, help="branch node limit per destination-day")
    sp.add_argument("--budget-secs", dest="max_seconds", type=float, help="time limit per destination-day")
    sp.set_defaults(func=cmd_plan)

    sp = with_tuning(sub.add_parser("evaluate", help="compare saved plans"))
    sp.add_argument("--data", required=True)
    sp.add_argument("--candidates", required=True)
    sp.add_argument("--plans", required=True, help="plans.jsonl or the directory holding it")
    sp.add_argument("--train", help="training transactions.jsonl, for path frequency")
    sp.set_defaults(func=cmd_evaluate)

    sp = with_tuning(sub.add_parser("pipeline", help="run every stage end to end"))
    sp.add_argument("--data", help="network directory; generated from the seed when omitted")
    sp.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, StageError, ContractViolation, ValueError, OSError) as exc:
        print(f"loadcons {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
