"""Command-line surface: solve coalitions, run the attack simulations, and
generate synthetic inputs. All outputs are machine-readable CSV/JSON; every
run writes a manifest so it can be reproduced bit-for-bit."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .cut import (
    EnumerationBudgetExceeded,
    Objective,
    cut_to_json,
    curve_to_csv,
    greedy_lopsided_cut,
    read_cut_json,
    value_vs_k_curve,
)
from .graph import (
    ConstantCapacity,
    GraphError,
    UniformCapacity,
    generate_scale_free,
    parse_edge_list,
    parse_lnd_graph,
    to_edge_list,
)
from .mempool import (
    DEFAULT_BAND_EDGES_SAT,
    ConstantAverage,
    FeeRate,
    Historical,
    ReplayError,
    TimelineError,
    load_block_trace,
    load_timeline,
)
from .doublespend import (
    AttackerStrategy,
    AverageCapacity,
    CapacityScaled,
    Fixed,
    PenaltyPolicy,
    PerChannel,
    realized_profit,
    simulate_double_spend,
)
from .scenario import Scenario, preset_scenario
from .strategies import Dynamic, Static
from .zombie import ZombieConfig, simulate_zombie, sweep_csv, sweep_zombie

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_EXHAUSTED = 4

SAT_PER_BTC = 100_000_000


def format_btc(sat: int) -> str:
    """Fixed 8-decimal BTC formatting without float drift."""
    sign = "-" if sat < 0 else ""
    sat = abs(sat)
    return f"{sign}{sat // SAT_PER_BTC}.{sat % SAT_PER_BTC:08d}"


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(prefix: Path, command: str, params: dict, inputs: dict, outputs: list, seeds=()):
    doc = {
        "command": command,
        "parameters": params,
        "inputs": {name: _sha256_file(Path(p)) for name, p in inputs.items()},
        "outputs": sorted(str(o) for o in outputs),
        "seeds": list(seeds),
        "tool_version": __version__,
    }
    path = prefix.with_name(prefix.name + ".manifest.json")
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _load_graph(path: str, fmt: str | None):
    text = Path(path).read_text()
    if fmt is None:
        fmt = "lnd" if path.endswith(".json") else "csv"
    return parse_lnd_graph(text) if fmt == "lnd" else parse_edge_list(text)


def _build_scenario(args) -> Scenario:
    timeline = load_timeline(Path(args.timeline).read_text())
    trace = load_block_trace(Path(args.blocks).read_text())
    if args.scenario in ("1", "2"):
        return preset_scenario(int(args.scenario), timeline, trace, args.avg_block_txs)
    start = args.start if args.start is not None else timeline.start
    mode = Historical() if args.avg_block_txs is None else ConstantAverage(args.avg_block_txs)
    return Scenario(timeline, trace, mode, start)


def _fee_list(text: str) -> list[FeeRate]:
    return [FeeRate.from_sat(part) for part in text.split(",") if part.strip()]


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _scenario_inputs(args) -> dict:
    return {"timeline": args.timeline, "blocks": args.blocks}


# -- solve -------------------------------------------------------------------


def cmd_solve(args) -> int:
    graph = _load_graph(args.graph, args.format)
    objective = Objective.CAPACITY if args.objective == "capacity" else Objective.EDGE_COUNT
    prefix = Path(args.out)
    outputs = []
    manifest_name = prefix.name + ".manifest.json"
    if args.k is not None:
        cut, _ = greedy_lopsided_cut(graph, args.k, objective)
        cut_path = prefix.with_name(prefix.name + ".cut.json")
        cut_path.write_text(cut_to_json(graph, cut, manifest=manifest_name))
        outputs.append(cut_path)
        print(
            f"k={cut.k} objective={objective.value} edge_count={cut.edge_count} "
            f"cut_capacity_btc={format_btc(cut.cut_capacity)}"
        )
    if args.k_max is not None:
        curve = value_vs_k_curve(graph, args.k_max, objective)
        curve_path = prefix.with_name(prefix.name + ".curve.csv")
        curve_path.write_text(curve_to_csv(curve))
        outputs.append(curve_path)
    _write_manifest(
        prefix,
        "solve",
        {"k": args.k, "k_max": args.k_max, "objective": args.objective, "format": args.format},
        {"graph": args.graph},
        outputs + [prefix.with_name(manifest_name)],
    )
    return EXIT_OK


# -- zombie --------------------------------------------------------------------


def cmd_zombie(args) -> int:
    scenario = _build_scenario(args)
    if args.cut_file is not None:
        n = read_cut_json(Path(args.cut_file).read_text()).edge_count
    else:
        n = args.channels
    if args.dynamic:
        fees = _fee_list(args.initial_fee)
        steps = _int_list(args.step)
        strategies = [Dynamic(fee, step, args.beta) for fee in fees for step in steps]
    else:
        strategies = [Static(fee) for fee in _fee_list(args.fee)]
    configs = [ZombieConfig(n, strategy, scenario) for strategy in strategies]
    prefix = Path(args.out)
    manifest_name = prefix.name + ".manifest.json"
    outputs = []
    exhausted = False
    if len(configs) == 1:
        report = simulate_zombie(configs[0])
        exhausted = report.horizon_exhausted
        series_path = prefix.with_name(prefix.name + ".series.csv")
        series_path.write_text(report.series_csv())
        summary_path = prefix.with_name(prefix.name + ".summary.json")
        summary_path.write_text(report.summary_json(manifest=manifest_name))
        outputs += [series_path, summary_path]
        closed = report.blocks_to_close_all
        print(f"{report.config_key} blocks_to_close_all={closed} horizon_exhausted={exhausted}")
    else:
        reports = sweep_zombie(configs)
        exhausted = any(r.horizon_exhausted for r in reports)
        sweep_path = prefix.with_name(prefix.name + ".sweep.csv")
        sweep_path.write_text(sweep_csv(reports))
        outputs.append(sweep_path)
        print(f"{len(reports)} zombie runs -> {sweep_path}")
    inputs = _scenario_inputs(args)
    if args.cut_file:
        inputs["cut"] = args.cut_file
    _write_manifest(
        prefix,
        "zombie",
        {
            "channels": n,
            "fee": args.fee,
            "dynamic": args.dynamic,
            "initial_fee": args.initial_fee,
            "step": args.step,
            "beta": args.beta,
            "scenario": args.scenario,
            "start": args.start,
            "avg_block_txs": args.avg_block_txs,
        },
        inputs,
        outputs + [prefix.with_name(manifest_name)],
    )
    return EXIT_EXHAUSTED if exhausted else EXIT_OK


# -- doublespend ---------------------------------------------------------------


def _parse_delay(text: str):
    if text == "scaled":
        return CapacityScaled()
    if text.startswith("fixed:"):
        return Fixed(int(text.split(":", 1)[1]))
    raise ValueError(f"delay must be 'scaled' or 'fixed:<blocks>', got {text!r}")


def cmd_doublespend(args) -> int:
    scenario = _build_scenario(args)
    cut_file = read_cut_json(Path(args.cut_file).read_text())
    if args.sweep_dynamic:
        sweep = Dynamic(FeeRate.from_sat(args.sweep_fee), args.sweep_step, args.sweep_beta)
    else:
        sweep = Static(FeeRate.from_sat(args.sweep_fee))
    attacker = AttackerStrategy(FeeRate.from_sat(args.attacker_fee), sweep)
    honest = (
        PenaltyPolicy(dynamic=True, step=args.honest_step, beta=args.honest_beta)
        if args.honest_step is not None
        else PenaltyPolicy()
    )
    report = simulate_double_spend(
        cut_file.channels,
        honest,
        attacker,
        _parse_delay(args.delay),
        scenario,
        strict_expiry=args.strict_expiry,
        record_events=args.event_log,
    )
    if report.undecided:
        print(
            f"warning: {report.undecided} channel(s) undecided at horizon, excluded from profit",
            file=sys.stderr,
        )
    if args.profit_mode == "average":
        mode = AverageCapacity(args.avg_capacity)
    else:
        mode = PerChannel()
    profit = realized_profit(report, mode, exclude_undecided=True)
    prefix = Path(args.out)
    manifest_name = prefix.name + ".manifest.json"
    report_path = prefix.with_name(prefix.name + ".report.json")
    report_path.write_text(
        report.to_json(profit_mode=args.profit_mode, profit_sat=profit, manifest=manifest_name)
    )
    series_path = prefix.with_name(prefix.name + ".series.csv")
    series_path.write_text(report.series_csv())
    outputs = [report_path, series_path]
    if args.event_log:
        events_path = prefix.with_name(prefix.name + ".events.jsonl")
        events_path.write_text(report.events_jsonl())
        outputs.append(events_path)
    print(
        f"attacked={report.attacked} compromised={report.compromised} defended={report.defended} "
        f"undecided={report.undecided} profit_btc={format_btc(profit)}"
    )
    _write_manifest(
        prefix,
        "doublespend",
        {
            "attacker_fee": args.attacker_fee,
            "sweep_fee": args.sweep_fee,
            "sweep_dynamic": args.sweep_dynamic,
            "sweep_step": args.sweep_step,
            "sweep_beta": args.sweep_beta,
            "delay": args.delay,
            "honest_step": args.honest_step,
            "honest_beta": args.honest_beta,
            "profit_mode": args.profit_mode,
            "avg_capacity": args.avg_capacity,
            "strict_expiry": args.strict_expiry,
            "scenario": args.scenario,
            "start": args.start,
            "avg_block_txs": args.avg_block_txs,
        },
        {**_scenario_inputs(args), "cut": args.cut_file},
        outputs + [prefix.with_name(manifest_name)],
    )
    return EXIT_EXHAUSTED if report.horizon_exhausted else EXIT_OK


# -- gen -------------------------------------------------------------------------


def cmd_gen_graph(args) -> int:
    if args.capacity.startswith("constant:"):
        dist = ConstantCapacity(int(args.capacity.split(":", 1)[1]))
    elif args.capacity.startswith("uniform:"):
        _, lo, hi = args.capacity.split(":")
        dist = UniformCapacity(int(lo), int(hi))
    else:
        raise ValueError(f"capacity must be 'constant:<sat>' or 'uniform:<lo>:<hi>', got {args.capacity!r}")
    graph = generate_scale_free(args.n, args.m, args.seed, dist)
    out = Path(args.out)
    out.write_text(to_edge_list(graph))
    _write_manifest(
        out,
        "gen graph",
        {"n": args.n, "m": args.m, "capacity": args.capacity},
        {},
        [out, out.with_name(out.name + ".manifest.json")],
        seeds=[args.seed],
    )
    print(f"scale-free graph: {graph.node_count} nodes, {graph.channel_count} channels -> {out}")
    return EXIT_OK


def cmd_gen_timeline(args) -> int:
    edges = [e.strip() for e in args.bands.split(",")] if args.bands else [str(e) for e in DEFAULT_BAND_EDGES_SAT]
    if args.counts:
        counts = [int(c) for c in args.counts.split(",")]
        if len(counts) != len(edges):
            raise ValueError(f"{len(counts)} counts for {len(edges)} bands")
    else:
        counts = [args.count] * len(edges)
    lines = ["timestamp," + ",".join(edges)]
    for i in range(args.snapshots):
        t = args.start + i * args.interval
        lines.append(str(t) + "," + ",".join(str(c) for c in counts))
    out = Path(args.out)
    out.write_text("\n".join(lines) + "\n")
    _write_manifest(
        out,
        "gen timeline",
        {
            "bands": args.bands,
            "counts": args.counts,
            "count": args.count,
            "snapshots": args.snapshots,
            "interval": args.interval,
            "start": args.start,
        },
        {},
        [out, out.with_name(out.name + ".manifest.json")],
    )
    print(f"flat timeline: {args.snapshots} snapshots x {len(edges)} bands -> {out}")
    return EXIT_OK


def cmd_gen_blocks(args) -> int:
    lines = ["height,timestamp,tx_count"]
    for i in range(args.count):
        lines.append(f"{args.start_height + i},{args.start + i * args.interval},{args.txs}")
    out = Path(args.out)
    out.write_text("\n".join(lines) + "\n")
    _write_manifest(
        out,
        "gen blocks",
        {
            "count": args.count,
            "txs": args.txs,
            "interval": args.interval,
            "start": args.start,
            "start_height": args.start_height,
        },
        {},
        [out, out.with_name(out.name + ".manifest.json")],
    )
    print(f"block trace: {args.count} blocks of {args.txs} txs -> {out}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def _add_scenario_args(parser):
    parser.add_argument("--timeline", required=True, help="mempool timeline CSV")
    parser.add_argument("--blocks", required=True, help="block trace CSV")
    parser.add_argument("--scenario", default="custom", choices=["1", "2", "custom"])
    parser.add_argument("--start", type=int, default=None, help="attack start (unix seconds, custom scenario)")
    parser.add_argument(
        "--avg-block-txs",
        type=float,
        default=None,
        help="constant block capacity (required for scenario 2)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lnme",
        description="Mass-exit attack toolkit: coalition cuts and congestion replay simulations.",
    )
    parser.add_argument("--version", action="version", version=f"lnme {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="greedy k-lopsided max-cut solutions and curves")
    solve.add_argument("--graph", required=True)
    solve.add_argument("--format", choices=["lnd", "csv"], default=None)
    solve.add_argument("--k", type=int, default=None)
    solve.add_argument("--k-max", type=int, default=None)
    solve.add_argument("--objective", choices=["edges", "capacity"], default="edges")
    solve.add_argument("--out", required=True, help="output path prefix")
    solve.set_defaults(func=cmd_solve, needs_k=True)

    zombie = sub.add_parser("zombie", help="simulate mass forced channel closure")
    group = zombie.add_mutually_exclusive_group(required=True)
    group.add_argument("--channels", type=int, default=None)
    group.add_argument("--cut-file", default=None)
    zombie.add_argument("--fee", default=None, help="static fee(s), sat/vByte, comma-separated sweeps")
    zombie.add_argument("--dynamic", action="store_true")
    zombie.add_argument("--initial-fee", default=None)
    zombie.add_argument("--step", default="10", help="bump cadence in blocks, comma-separated sweeps")
    zombie.add_argument("--beta", type=float, default=1.01)
    _add_scenario_args(zombie)
    zombie.add_argument("--out", required=True)
    zombie.set_defaults(func=cmd_zombie)

    ds = sub.add_parser("doublespend", help="simulate the mass double-spend attack")
    ds.add_argument("--cut-file", required=True)
    ds.add_argument("--attacker-fee", required=True, help="commitment fee, sat/vByte")
    ds.add_argument("--sweep-fee", default="100")
    ds.add_argument("--sweep-dynamic", action="store_true")
    ds.add_argument("--sweep-step", type=int, default=7)
    ds.add_argument("--sweep-beta", type=float, default=1.1)
    ds.add_argument("--delay", default="scaled", help="'scaled' or 'fixed:<blocks>'")
    ds.add_argument("--honest-step", type=int, default=None, help="dynamic victim bump cadence")
    ds.add_argument("--honest-beta", type=float, default=1.1)
    ds.add_argument("--profit-mode", choices=["per-channel", "average"], default="per-channel")
    ds.add_argument("--avg-capacity", type=int, default=None, help="satoshis (average profit mode)")
    ds.add_argument("--strict-expiry", action="store_true")
    ds.add_argument("--event-log", action="store_true")
    _add_scenario_args(ds)
    ds.add_argument("--out", required=True)
    ds.set_defaults(func=cmd_doublespend)

    gen = sub.add_parser("gen", help="generate synthetic inputs")
    gensub = gen.add_subparsers(dest="gen_command", required=True)

    gg = gensub.add_parser("graph", help="scale-free graph as edge-list CSV")
    gg.add_argument("--scale-free", action="store_true")
    gg.add_argument("--n", type=int, required=True)
    gg.add_argument("--m", type=int, required=True)
    gg.add_argument("--seed", type=int, default=0)
    gg.add_argument("--capacity", default="constant:4500000")
    gg.add_argument("--out", required=True)
    gg.set_defaults(func=cmd_gen_graph)

    gt = gensub.add_parser("timeline", help="flat timeline CSV")
    gt.add_argument("--constant", action="store_true")
    gt.add_argument("--bands", default=None, help="comma-separated band edges (default: dataset bands)")
    gt.add_argument("--counts", default=None, help="per-band counts")
    gt.add_argument("--count", type=int, default=0, help="same count for every band")
    gt.add_argument("--snapshots", type=int, required=True)
    gt.add_argument("--interval", type=int, default=60)
    gt.add_argument("--start", type=int, default=1_600_000_000)
    gt.add_argument("--out", required=True)
    gt.set_defaults(func=cmd_gen_timeline)

    gb = gensub.add_parser("blocks", help="constant block trace CSV")
    gb.add_argument("--count", type=int, required=True)
    gb.add_argument("--txs", type=int, required=True)
    gb.add_argument("--interval", type=int, default=600)
    gb.add_argument("--start", type=int, default=1_600_000_000)
    gb.add_argument("--start-height", type=int, default=1)
    gb.set_defaults(func=cmd_gen_blocks)
    gb.add_argument("--out", required=True)

    return parser


def _validate(args, parser) -> None:
    if getattr(args, "needs_k", False) and args.k is None and args.k_max is None:
        parser.error("solve requires --k and/or --k-max")
    if args.command == "zombie":
        if args.dynamic and args.initial_fee is None:
            parser.error("--dynamic requires --initial-fee")
        if not args.dynamic and args.fee is None:
            parser.error("either --fee or --dynamic --initial-fee is required")
    if args.command == "doublespend" and args.profit_mode == "average" and args.avg_capacity is None:
        parser.error("--profit-mode average requires --avg-capacity")
    if getattr(args, "scenario", None) == "2" and args.avg_block_txs is None:
        parser.error("--scenario 2 requires --avg-block-txs")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(args, parser)
    try:
        return args.func(args)
    except EnumerationBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXHAUSTED
    except (GraphError, TimelineError, ReplayError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
