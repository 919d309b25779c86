"""Command-line entry point: ``ridetree <subcommand> ...``.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import random
import sys
from dataclasses import fields
from pathlib import Path

from . import mip
from .bnb import best_schedule_bnb
from .bruteforce import best_schedule_bf
from .dispatch import SCHEDULERS
from .instances import InstanceConfig, random_instance
from .ktree import KineticTree, TreeStateError
from .roadnet import DistanceOracle, NetworkFormatError, grid_network, load_network, random_network, write_network
from .sim import SimConfig, TraceError, format_trace, generate_trace, load_trace, run, write_log, write_metrics
from .trips import OnboardTrip, ReschedulingInstance, WaitingTrip

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _grid(text: str) -> tuple[int, int]:
    try:
        r, c = text.lower().split("x")
        rows, cols = int(r), int(c)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 10x10, got {text!r}") from None
    if rows <= 0 or cols <= 0:
        raise argparse.ArgumentTypeError("grid dimensions must be positive")
    return rows, cols


def _sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--network", required=True, help="network file")
    p.add_argument("--trace", help="trace CSV; omitted means a synthetic trace from --seed")
    p.add_argument("--requests", type=int, default=None, help="synthetic trace size (default 100)")
    p.add_argument("--duration-s", type=float, default=None, help="synthetic trace span (default 600)")
    p.add_argument("--config", help="JSON file of defaults; flags override it")
    p.add_argument("--capacity", type=int, default=None, help="seats per vehicle; 0 means unlimited")
    p.add_argument("--wait-min", type=float, default=None)
    p.add_argument("--detour-pct", type=float, default=None)
    p.add_argument("--fleet", type=int, default=None)
    p.add_argument("--theta", type=float, default=None, help="hotspot radius in seconds")
    p.add_argument("--speed", type=float, default=None, help="meters per second")
    p.add_argument("--invalidation", choices=("eager", "lazy"), default=None)
    p.add_argument("--max-pending", type=int, default=None, help="cap on unfinished waypoints per vehicle")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-timing", action="store_true", help="write NA for wall-clock columns")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ridetree", description="Real-time ridesharing schedulers and simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="replay a trace with one scheduler")
    _sim_flags(p)
    p.add_argument("--scheduler", choices=SCHEDULERS, default=None)
    p.add_argument("--out", default="metrics.csv")
    p.add_argument("--log", help="per-request CSV")

    p = sub.add_parser("bench", help="response times of several schedulers on one trace")
    _sim_flags(p)
    p.add_argument("--schedulers", default="bf,bnb,tree,tree_slack")
    p.add_argument("--out", default="bench.csv")

    p = sub.add_parser("emit-mip", help="write the MIP model of a rescheduling instance")
    p.add_argument("--network", required=True)
    p.add_argument("--instance", help="instance JSON; omitted means a random one from --seed")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="model.lp")

    p = sub.add_parser("gen-network", help="write a grid or random network")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--grid", type=_grid, help="ROWSxCOLS")
    g.add_argument("--random", type=int, metavar="N", help="random connected graph on N vertices")
    p.add_argument("--block-s", type=float, default=10.0, help="grid edge travel time in seconds")
    p.add_argument("--speed", type=float, default=14.0, help="meters per second, for grid coordinates")
    p.add_argument("--extra", type=int, default=None, help="random graph chords (default N)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="network.txt")

    p = sub.add_parser("gen-trace", help="write a synthetic trip trace")
    p.add_argument("--network", required=True)
    p.add_argument("--requests", type=int, default=1000)
    p.add_argument("--clustering", type=float, default=0.0)
    p.add_argument("--duration-s", type=float, default=3600.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="trace.csv")

    p = sub.add_parser("verify", help="cross-check every scheduler against brute force")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=_grid, default=(20, 20))
    p.add_argument("--max-waypoints", type=int, default=9)
    p.add_argument("--wait-s", type=float, default=300.0)
    p.add_argument("--detour-pct", type=float, default=20.0)
    p.add_argument("--max-trips", type=int, default=4, help="pending trips per instance, new one included")
    return parser


# -- helpers -----------------------------------------------------------------

_CONFIG_KEYS = {f.name for f in fields(SimConfig)} | {"requests", "duration_s"}


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"config {path} is not valid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise DataError("config must be a JSON object")
    unknown = sorted(set(data) - _CONFIG_KEYS)
    if unknown:
        raise DataError(f"unknown config keys: {', '.join(unknown)}")
    return data


def _sim_config(args, scheduler: str | None = None) -> tuple[SimConfig, dict]:
    base = _load_config(args.config)
    flags = {
        "capacity": args.capacity,
        "wait_s": None if args.wait_min is None else args.wait_min * 60,
        "detour": None if args.detour_pct is None else args.detour_pct / 100,
        "fleet_size": args.fleet,
        "theta_s": args.theta,
        "speed": args.speed,
        "invalidation": args.invalidation,
        "max_pending_waypoints": args.max_pending,
        "seed": args.seed,
        "scheduler": scheduler,
        "requests": args.requests,
        "duration_s": args.duration_s,
    }
    merged = dict(base)
    merged.update({k: v for k, v in flags.items() if v is not None})
    extra = {k: merged.pop(k) for k in ("requests", "duration_s") if k in merged}
    if merged.get("capacity") == 0:
        merged["capacity"] = None
    merged["record_timing"] = not args.no_timing
    try:
        return SimConfig(**merged), extra
    except (TypeError, ValueError) as exc:
        raise DataError(f"bad configuration: {exc}") from None


def _network(path: str):
    try:
        return load_network(path)
    except OSError as exc:
        raise DataError(f"cannot read network {path}: {exc.strerror}") from None
    except NetworkFormatError as exc:
        raise DataError(f"{path}: {exc}") from None
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def _trace(args, net, cfg: SimConfig, extra: dict):
    if args.trace:
        try:
            return load_trace(args.trace)
        except OSError as exc:
            raise DataError(f"cannot read trace {args.trace}: {exc.strerror}") from None
        except TraceError as exc:
            raise DataError(f"{args.trace}: {exc}") from None
    return generate_trace(cfg.seed, net, int(extra.get("requests", 100)), duration_s=float(extra.get("duration_s", 600)))


def _run(cfg, net, trace, oracle=None):
    try:
        return run(cfg, net, trace, oracle)
    except TraceError as exc:
        raise DataError(str(exc)) from None


# -- subcommands -------------------------------------------------------------


def cmd_simulate(args) -> int:
    net = _network(args.network)
    cfg, extra = _sim_config(args, args.scheduler)
    result = _run(cfg, net, _trace(args, net, cfg, extra))
    write_metrics(result, args.out)
    if args.log:
        write_log(result, args.log)
    m = result.metrics
    print(f"{m.served}/{m.requests} served, {m.violations} violations -> {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    names = [s.strip() for s in args.schedulers.split(",") if s.strip()]
    bad = [s for s in names if s not in SCHEDULERS]
    if bad or not names:
        raise UsageError(f"unknown scheduler(s): {', '.join(bad) or '(none)'}")
    net = _network(args.network)
    cfg, extra = _sim_config(args)
    trace = _trace(args, net, cfg, extra)
    oracle = DistanceOracle(net)
    rows = []
    traces = set()
    for name in names:
        cfg_i = SimConfig(**{**cfg.__dict__, "scheduler": name})
        result = _run(cfg_i, net, trace, oracle)
        m = result.metrics
        if name != "tree_hotspot":
            traces.add(tuple(result.assignments))
        for active, mean in m.art_by_active.items():
            art = f"{mean * 1000:.4f}" if cfg.record_timing else "NA"
            acrt = f"{m.acrt * 1000:.4f}" if cfg.record_timing else "NA"
            rows.append([name, active, m.bids_by_active[active], art, acrt, m.served, m.violations])
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scheduler", "active_trips", "bids", "art_ms", "acrt_ms", "served", "violations"])
        w.writerows(rows)
    agree = "identical" if len(traces) <= 1 else "DIFFERENT"
    print(f"{len(names)} schedulers, assignment traces {agree} -> {args.out}")
    return EXIT_OK


def _instance_from_json(path: str) -> ReschedulingInstance:
    try:
        data = json.loads(Path(path).read_text())
        new = data.get("new")
        return ReschedulingInstance(
            int(data["start"]),
            tuple(OnboardTrip(*map(int, t)) for t in data.get("onboard", [])),
            tuple(WaitingTrip(*map(int, t)) for t in data.get("waiting", [])),
            WaitingTrip(*map(int, new)) if new else None,
            data.get("capacity"),
        )
    except OSError as exc:
        raise DataError(f"cannot read instance {path}: {exc.strerror}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"bad instance file {path}: {exc}") from None


def cmd_emit_mip(args) -> int:
    net = _network(args.network)
    oracle = DistanceOracle(net)
    if args.instance:
        inst = _instance_from_json(args.instance)
        for v in [inst.start] + [p.vertex for p in inst.waypoints()]:
            if not 0 <= v < net.vertex_count:
                raise DataError(f"instance vertex {v} not in network")
    else:
        inst = random_instance(oracle, net.vertex_count, random.Random(args.seed), InstanceConfig(max_waypoints=7))
    model = mip.build_model(oracle, inst)
    Path(args.out).write_text(mip.emit_lp(model))
    status = " (infeasible)" if model.infeasible else ""
    print(f"{len(model.lp.variables)} variables, {len(model.lp.rows)} rows{status} -> {args.out}")
    return EXIT_OK


def cmd_gen_network(args) -> int:
    if args.grid:
        rows, cols = args.grid
        weight = round(args.block_s * 10)
        if weight <= 0:
            raise UsageError("--block-s must be positive")
        net = grid_network(rows, cols, weight=weight, spacing=args.block_s * args.speed)
    else:
        if args.random < 2:
            raise UsageError("--random needs at least 2 vertices")
        extra = args.random if args.extra is None else args.extra
        net = random_network(args.random, extra, args.seed)
    write_network(net, args.out)
    print(f"{net.vertex_count} vertices, {net.edge_count} edges -> {args.out}")
    return EXIT_OK


def cmd_gen_trace(args) -> int:
    net = _network(args.network)
    try:
        trace = generate_trace(args.seed, net, args.requests, args.clustering, args.duration_s)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    Path(args.out).write_text(format_trace(trace))
    print(f"{len(trace)} requests -> {args.out}")
    return EXIT_OK


SLACK_TIERS = (50, 300, 1500)  # deciseconds of spare budget: tight, medium, loose


def verify_sweep(n: int, seed: int, rows: int, cols: int, max_waypoints: int, wait_ds: int, detour: float,
                 max_trips: int | None = 4, on_instance=None):
    """Compare bnb, basic tree and slack tree with brute force; return (matches, first mismatch).

    Instances cycle through tight, medium and loose budgets. ``on_instance``
    is called with ``(oracle, instance)`` for extra per-instance checks.
    """
    net = grid_network(rows, cols, weight=10)
    oracle = DistanceOracle(net)
    rng = random.Random(seed)
    matches, first_bad = 0, None
    for i in range(n):
        spare = SLACK_TIERS[i % len(SLACK_TIERS)]
        cfg = InstanceConfig(max_onboard=3, max_waiting=3, max_wait=wait_ds, detour=detour,
                             slack_range=(0, min(spare, wait_ds)), max_waypoints=max_waypoints,
                             max_trips=max_trips)
        inst = random_instance(oracle, net.vertex_count, rng, cfg)
        if on_instance is not None:
            on_instance(oracle, inst)
        want = best_schedule_bf(oracle, inst)
        want = None if want is None else (want.cost, want.sequence)
        got = {"bnb": best_schedule_bnb(oracle, inst)}
        got["bnb"] = None if got["bnb"] is None else (got["bnb"].cost, got["bnb"].sequence)
        for mode in ("basic", "slack"):
            try:
                tree = KineticTree.from_instance(oracle, inst.without_new(), mode=mode)
                cand = tree.insert_waiting(inst.new_trip)
                got[mode] = None if cand is None else (cand.cost, cand.route)
            except TreeStateError:
                # the vehicle's current state already has no valid schedule
                got[mode] = None
        if all(v == want for v in got.values()):
            matches += 1
        elif first_bad is None:
            first_bad = (i, want, got)
    return matches, first_bad


def cmd_verify(args) -> int:
    if args.instances < 0:
        raise UsageError("--instances must be non-negative")
    if args.max_trips < 1 or args.max_waypoints < 2:
        raise UsageError("--max-trips and --max-waypoints must allow one trip")
    rows, cols = args.grid
    matches, bad = verify_sweep(args.instances, args.seed, rows, cols, args.max_waypoints,
                                round(args.wait_s * 10), args.detour_pct / 100, args.max_trips)
    print(f"{matches}/{args.instances} match")
    if bad is not None:
        i, want, got = bad
        print(f"first mismatch at instance {i}: expected {want}, got {got}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "bench": cmd_bench,
    "emit-mip": cmd_emit_mip,
    "gen-network": cmd_gen_network,
    "gen-trace": cmd_gen_trace,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
