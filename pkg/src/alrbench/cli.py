"""Command line interface for running and ranking benchmark campaigns."""

from __future__ import annotations

import argparse
import sys

from .campaign import (CampaignConfig, expand_strategy_grid, export_results,
                       load_records, run_campaign)
from .metrics import rank_strategies
from .problems import load_registry


def _cmd_run(args):
    cfg = CampaignConfig.from_file(args.config)
    if args.jobs != 1:
        print("note: cells run sequentially; --jobs is accepted for "
              "compatibility but ignored to keep runs bit-reproducible",
              file=sys.stderr)
    count = {"n": 0}

    def progress(rec):
        count["n"] += 1
        status = rec.termination if not rec.failed else f"ERROR {rec.error}"
        print(f"[{count['n']:4d}] {rec.strategy_id:22s} problem {rec.problem_id:2d} "
              f"rep {rec.replication}  beta={rec.beta:8.4f}  n={rec.n_eval:4d}  "
              f"{status}")

    records = run_campaign(cfg, resume=args.resume, progress=progress)
    out = cfg.resolved_output_dir()
    export_results(records, out)
    print(f"wrote {out / 'results.csv'}, {out / 'ranking.txt'}, "
          f"{out / 'plotdata.json'}")
    return 0


def _cmd_rank(args):
    records = load_records(args.infile)
    rows = rank_strategies(records, args.criterion)
    for row in rows:
        w = ", ".join(f"{p:5.1f}%" for p in row.within_pct)
        print(f"{row.strategy_id:22s} within [{w}]  best {row.best_pct:5.1f}%")
    return 0


def _cmd_list_strategies(_args):
    for s in expand_strategy_grid():
        print(s.id)
    return 0


def _cmd_list_problems(args):
    for p in load_registry(args.registry):
        kind = "stub" if p.is_stub else "built-in"
        print(f"#{p.id:02d} {p.name:24s} M={p.dim:3d} pf_ref={p.pf_ref:.3e} "
              f"beta_ref={p.beta_ref:.3f} [{kind}]")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="alrbench",
        description="Active-learning structural reliability benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a campaign from a config file")
    p_run.add_argument("--config", required=True, help="JSON campaign config")
    p_run.add_argument("--resume", action="store_true",
                       help="skip cells already present in results.csv")
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.set_defaults(fn=_cmd_run)

    p_rank = sub.add_parser("rank", help="rank strategies from a results file")
    p_rank.add_argument("--criterion", choices=("neval", "relerr", "delta"),
                        required=True)
    p_rank.add_argument("--in", dest="infile", required=True)
    p_rank.set_defaults(fn=_cmd_rank)

    p_ls = sub.add_parser("list-strategies", help="print the 39-strategy grid")
    p_ls.set_defaults(fn=_cmd_list_strategies)

    p_lp = sub.add_parser("list-problems", help="print the problem registry")
    p_lp.add_argument("--registry", default=None,
                      help="override the packaged registry JSON")
    p_lp.set_defaults(fn=_cmd_list_problems)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
