"""Command-line entry point.

Subcommands:

- ``run``: evaluate agents over a scenario grid and write the results CSV.
- ``grid list``: print the core scenario matrix.
- ``report``: render the %-of-Oracle table and figures from a results CSV.
- ``serve``: expose one scenario over the wire protocol (stdio or socket).
- ``ledger``: dump a single episode's per-period audit ledger.
"""

from __future__ import annotations

import argparse
import sys

from . import defaults
from .bench import (AGENT_IDS, ORACLE_ID, build_core_grid, grid_by_id,
                    run_matrix, run_oracle_episode, run_scenario_episode,
                    write_results_csv)
from .wire import serve_socket, serve_stdio


def _parse_seeds(text: str) -> list[int]:
    """Accept '0..9', '0-9', or comma lists like '0,3,7'."""
    text = text.strip()
    for sep in ("..", "-"):
        if sep in text and "," not in text:
            lo, hi = text.split(sep, 1)
            return list(range(int(lo), int(hi) + 1))
    return [int(p) for p in text.split(",") if p.strip()]


def _resolve_grid(name: str):
    if name == "core22":
        return build_core_grid()
    by_id = grid_by_id()
    ids = [s.strip() for s in name.split(",") if s.strip()]
    missing = [s for s in ids if s not in by_id]
    if missing:
        raise SystemExit(f"unknown scenario ids: {missing}")
    return [by_id[s] for s in ids]


def _cmd_run(args) -> int:
    grid = _resolve_grid(args.grid)
    agents = [a.strip() for a in args.agents.split(",") if a.strip()]
    known = set(AGENT_IDS)
    unknown = [a for a in agents if a not in known]
    if unknown:
        raise SystemExit(f"unknown agents: {unknown}; available: {sorted(known)}")
    seeds = _parse_seeds(args.seeds)
    results = run_matrix(agents, grid, seeds, timing=not args.no_timing,
                         workers=args.workers)
    write_results_csv(results, args.out)
    failed = [r for r in results if r.failed]
    print(f"wrote {len(results)} rows to {args.out}"
          + (f" ({len(failed)} failed)" if failed else ""))
    return 1 if failed else 0


def _cmd_grid(args) -> int:
    if args.grid_action != "list":
        raise SystemExit("usage: invbench grid list")
    for s in build_core_grid():
        print(f"{s.id:45s} topology={s.topology} regime={s.demand_regime} "
              f"goodwill={'on' if s.goodwill else 'off'} fulfillment={s.fulfillment}")
    return 0


def _cmd_report(args) -> int:
    from .report import render_report
    written = render_report(args.infile, args.out_dir, metric=args.metric)
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_serve(args) -> int:
    scenario = grid_by_id().get(args.scenario)
    if scenario is None:
        raise SystemExit(f"unknown scenario {args.scenario!r}")
    cfg = scenario.config(info_tier=args.tier)
    episodes = args.episodes if args.episodes > 0 else None
    if args.socket:
        n = serve_socket(cfg, port=args.socket, default_seed=args.seed,
                         scenario_id=scenario.id, episodes=episodes)
    else:
        n = serve_stdio(cfg, default_seed=args.seed, scenario_id=scenario.id,
                        episodes=episodes)
    print(f"served {n} episodes", file=sys.stderr)
    return 0


def _cmd_ledger(args) -> int:
    scenario = grid_by_id().get(args.scenario)
    if scenario is None:
        raise SystemExit(f"unknown scenario {args.scenario!r}")
    if args.agent == ORACLE_ID:
        record = run_oracle_episode(scenario, args.seed)
    else:
        record = run_scenario_episode(scenario, args.agent, args.seed)
    record.write_ledger(args.out)
    print(f"profit {record.profit!r}; ledger written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invbench",
        description="deterministic multi-echelon inventory benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="evaluate agents over a scenario grid")
    p_run.add_argument("--agents", required=True,
                       help="comma-separated agent ids (see --help for roster)")
    p_run.add_argument("--grid", default="core22",
                       help="'core22' or comma-separated scenario ids")
    p_run.add_argument("--seeds", default="0..9", help="e.g. '0..9' or '0,3,7'")
    p_run.add_argument("--out", default="results.csv")
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--no-timing", action="store_true",
                       help="report wall_time_s as 0 for byte-identical reruns")
    p_run.set_defaults(func=_cmd_run)

    p_grid = sub.add_parser("grid", help="inspect the scenario grid")
    p_grid.add_argument("grid_action", choices=["list"])
    p_grid.set_defaults(func=_cmd_grid)

    p_rep = sub.add_parser("report", help="render tables and figures")
    p_rep.add_argument("--in", dest="infile", required=True)
    p_rep.add_argument("--metric", default="pct-oracle", choices=["pct-oracle"])
    p_rep.add_argument("--out-dir", default="report")
    p_rep.set_defaults(func=_cmd_report)

    p_srv = sub.add_parser("serve", help="serve episodes over the wire protocol")
    p_srv.add_argument("--scenario", required=True)
    p_srv.add_argument("--seed", type=int, default=0)
    p_srv.add_argument("--tier", default="blind", choices=["blind", "informed"])
    p_srv.add_argument("--episodes", type=int, default=0,
                       help="stop after N episodes (0 = until disconnect)")
    p_srv.add_argument("--socket", type=int, default=0,
                       help="serve on this local TCP port instead of stdio")
    p_srv.set_defaults(func=_cmd_serve)

    p_led = sub.add_parser("ledger", help="dump one episode's audit ledger")
    p_led.add_argument("--scenario", required=True)
    p_led.add_argument("--agent", required=True)
    p_led.add_argument("--seed", type=int, default=0)
    p_led.add_argument("--out", default="ledger.csv")
    p_led.set_defaults(func=_cmd_ledger)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
