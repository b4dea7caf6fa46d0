"""Campaign runner: strategy grid expansion, seeded execution, persistence.

A campaign is the cartesian product (problems x strategies x replications).
Replication k of a problem always derives its random stream from
(base seed, problem id, k) and never from the strategy, so every strategy
sees the same initial experimental designs. Cells are independent,
individually fault-isolated, and skippable on resume.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .estimators import (SolverConfig, importance_sampling, subset_simulation)
from .kriging import KrigingConfig
from .learning import (AlrBudget, Strategy, SurrogateConfigs, run_alr,
                       ESTIMATORS, STOPPING)
from .metrics import (CampaignRecord, attach_delta, median_evals_by_problem,
                      metric_relerr, rank_strategies)
from .pce import PceConfig
from .pck import PckConfig
from .problems import registry

OUTPUT_DIR_ENV = "ALRBENCH_OUTPUT_DIR"

CSV_HEADER = [
    "strategy", "problem", "replication", "seed", "pf", "beta", "rel_err",
    "delta", "n_eval", "termination", "wall_time", "error",
]

DIRECT_BASELINES = ("IS-direct", "SuS-direct")


def expand_strategy_grid(filters=None):
    """Every valid strategy, optionally filtered per component.

    ``filters`` maps component names (surrogate, estimator,
    learning_function, stopping) to an allowed value or list of values.
    The unfiltered grid has 39 members: 36 variance-based combinations
    plus 3 bootstrap-PCE ones.
    """
    filters = filters or {}

    def allowed(component, value):
        want = filters.get(component)
        if want is None:
            return True
        if isinstance(want, str):
            return value == want
        return value in want

    grid = []
    for surrogate in ("kriging", "pck"):
        for estimator in ESTIMATORS:
            for lf in ("u", "eff"):
                for stop in STOPPING:
                    grid.append(Strategy(surrogate, estimator, lf, stop))
    for estimator in ESTIMATORS:
        grid.append(Strategy("pce", estimator, "fbr", "stability"))
    return [
        s for s in grid
        if allowed("surrogate", s.surrogate)
        and allowed("estimator", s.estimator)
        and allowed("learning_function", s.learning_function)
        and allowed("stopping", s.stopping)
    ]


@dataclass(frozen=True)
class CampaignConfig:
    problem_ids: tuple[int, ...] = (12, 13, 14, 15)
    strategy_filter: dict = field(default_factory=dict)
    strategy_ids: tuple[str, ...] | None = None
    replications: int = 3
    base_seed: int = 2023
    estimator_mode: str = "overkill"        # overkill | standard
    estimator_divisor: int = 10             # desk-scale budget reduction
    budget: AlrBudget = field(default_factory=AlrBudget)
    pool_cap: int = 5000
    include_direct: bool = False
    output_dir: str = "campaign_out"
    surrogate: SurrogateConfigs = field(default_factory=SurrogateConfigs)
    registry_path: str | None = None

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")

    def strategies(self):
        if self.strategy_ids:
            return [Strategy.from_id(sid) for sid in self.strategy_ids]
        return expand_strategy_grid(self.strategy_filter)

    def solver_config(self):
        base = (SolverConfig.overkill() if self.estimator_mode == "overkill"
                else SolverConfig.standard())
        if self.estimator_divisor > 1:
            base = base.scaled(self.estimator_divisor)
        return base

    def resolved_output_dir(self):
        return Path(os.environ.get(OUTPUT_DIR_ENV, self.output_dir))

    @classmethod
    def from_file(cls, path):
        raw = json.loads(Path(path).read_text())
        budget = AlrBudget(**raw.pop("budget", {}))
        surrogate_raw = raw.pop("surrogate", {})
        surrogate = SurrogateConfigs(
            kriging=KrigingConfig(**surrogate_raw.get("kriging", {})),
            pce=PceConfig(**surrogate_raw.get("pce", {})),
            pck=PckConfig(
                trend_max_degree=surrogate_raw.get("pck", {}).get(
                    "trend_max_degree", 3),
                pce=PceConfig(**surrogate_raw.get("pck", {}).get("pce", {})),
                kriging=KrigingConfig(
                    **surrogate_raw.get("pck", {}).get("kriging", {})),
            ),
            bootstrap_replicates=surrogate_raw.get("bootstrap_replicates", 100),
        )
        for key in ("problem_ids", "strategy_ids"):
            if key in raw and raw[key] is not None:
                raw[key] = tuple(raw[key])
        return cls(budget=budget, surrogate=surrogate, **raw)


def cell_seed(base_seed, problem_id, replication):
    """Derived seed shared by all strategies of a (problem, replication)."""
    ss = np.random.SeedSequence(entropy=base_seed,
                                spawn_key=(int(problem_id), int(replication)))
    return int(ss.generate_state(1, dtype=np.uint64)[0] & 0x7FFFFFFF)


def _run_direct(name, problem, solver_cfg, seed):
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=seed, spawn_key=(9,))))
    fn = importance_sampling if name == "IS-direct" else subset_simulation
    return fn(problem.lsf, problem.rv, solver_cfg, rng)


def run_cell(strategy_or_baseline, problem, cfg, replication):
    """One campaign cell; exceptions are captured into the record."""
    seed = cell_seed(cfg.base_seed, problem.id, replication)
    start = time.perf_counter()
    trace = None
    try:
        if strategy_or_baseline in DIRECT_BASELINES:
            solver = SolverConfig.standard()
            res = _run_direct(strategy_or_baseline, problem, solver, seed)
            pf, beta, n_eval, term = res.pf, res.beta, res.n_evals, "direct"
            sid = strategy_or_baseline
        else:
            trace = run_alr(strategy_or_baseline, problem, cfg.solver_config(),
                            seed, cfg.budget, cfg.surrogate, cfg.pool_cap)
            pf, beta, n_eval = trace.pf, trace.beta, trace.n_true_evals
            term = trace.termination
            sid = strategy_or_baseline.id
        rel = metric_relerr(beta, problem.beta_ref)
        rec = CampaignRecord(sid, problem.id, replication, seed, pf, beta, rel,
                             None, n_eval, term,
                             time.perf_counter() - start, None)
    except Exception as exc:  # cell isolation: campaign must continue
        sid = (strategy_or_baseline if isinstance(strategy_or_baseline, str)
               else strategy_or_baseline.id)
        rec = CampaignRecord(sid, problem.id, replication, seed,
                             math.nan, math.nan, math.inf, None, 0, "error",
                             time.perf_counter() - start, repr(exc))
    return rec, trace


def _record_to_row(r):
    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, float):
            if math.isnan(v):
                return "nan"
            if math.isinf(v):
                return "inf" if v > 0 else "-inf"
            return repr(v)
        return str(v)
    return [fmt(getattr(r, name)) for name in (
        "strategy_id", "problem_id", "replication", "seed", "pf", "beta",
        "rel_err", "delta", "n_eval", "termination", "wall_time", "error")]


def _row_to_record(row):
    def num(s, default=math.nan):
        if s in ("", None):
            return default
        if s == "inf":
            return math.inf
        if s == "-inf":
            return -math.inf
        return float(s)
    return CampaignRecord(
        row["strategy"], int(row["problem"]), int(row["replication"]),
        int(row["seed"]), num(row["pf"]), num(row["beta"]), num(row["rel_err"]),
        None if row["delta"] in ("", None) else num(row["delta"]),
        int(row["n_eval"]), row["termination"], num(row["wall_time"], 0.0),
        row["error"] or None)


def load_records(csv_path):
    with open(csv_path, newline="") as fh:
        return [_row_to_record(row) for row in csv.DictReader(fh)]


def run_campaign(cfg, resume=False, progress=None):
    """Execute a campaign and persist results under the output directory.

    Returns the full record list (delta attached). With ``resume`` the
    cells already present in results.csv are skipped.
    """
    out_dir = cfg.resolved_output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    traces_dir = out_dir / "traces"
    traces_dir.mkdir(exist_ok=True)
    results_path = out_dir / "results.csv"

    reg = registry(cfg.registry_path)
    problems = [reg[pid] for pid in cfg.problem_ids]
    jobs = list(cfg.strategies())
    if cfg.include_direct:
        jobs = jobs + list(DIRECT_BASELINES)

    done = set()
    existing = []
    if resume and results_path.exists():
        existing = load_records(results_path)
        done = {(r.strategy_id, r.problem_id, r.replication) for r in existing}

    records = list(existing)
    mode = "a" if (resume and results_path.exists()) else "w"
    with open(results_path, mode, newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        if mode == "w":
            writer.writerow(CSV_HEADER)
        for problem in problems:
            for rep in range(cfg.replications):
                for job in jobs:
                    sid = job if isinstance(job, str) else job.id
                    if (sid, problem.id, rep) in done:
                        continue
                    rec, trace = run_cell(job, problem, cfg, rep)
                    records.append(rec)
                    writer.writerow(_record_to_row(rec))
                    fh.flush()
                    if trace is not None:
                        name = f"{sid}__p{problem.id}__r{rep}.jsonl"
                        with open(traces_dir / name, "w") as tfh:
                            for row in trace.to_record_dicts():
                                tfh.write(json.dumps(row) + "\n")
                    if progress:
                        progress(rec)

    records = attach_delta(records)
    _rewrite_csv(results_path, records)
    return records


def _rewrite_csv(path, records):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(_record_to_row(r))


def export_results(records, out_dir):
    """Write ranking report and violin-style plot data for a record table."""
    if not records:
        raise ValueError("empty record table")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = attach_delta(records)

    lines = []
    for criterion, label in (("neval", "model evaluations"),
                             ("relerr", "relative error"),
                             ("delta", "error-cost composite")):
        lines.append(f"== ranking by {label} ==")
        try:
            rows = rank_strategies(records, criterion)
        except ValueError as exc:
            lines.append(f"  (not rankable: {exc})")
            lines.append("")
            continue
        for row in rows:
            w = ", ".join(f"{p:5.1f}%" for p in row.within_pct)
            lines.append(
                f"  {row.strategy_id:22s} within [{w}]  best {row.best_pct:5.1f}%")
        lines.append("")
    (out_dir / "ranking.txt").write_text("\n".join(lines))

    quantiles = (0.05, 0.25, 0.5, 0.75, 0.95)
    plot = {"quantiles": list(quantiles), "problems": {}}
    by_problem: dict[int, dict[str, list]] = {}
    med = median_evals_by_problem(records)
    for r in records:
        if r.failed:
            continue
        entry = by_problem.setdefault(r.problem_id, {"rel_err": [], "delta": []})
        if math.isfinite(r.rel_err):
            entry["rel_err"].append(r.rel_err)
        if r.delta is not None and math.isfinite(r.delta):
            entry["delta"].append(r.delta)
    for pid, entry in sorted(by_problem.items()):
        plot["problems"][str(pid)] = {
            "n_median_evals": med.get(pid),
            "rel_err_quantiles": _quants(entry["rel_err"], quantiles),
            "delta_quantiles": _quants(entry["delta"], quantiles),
        }
    (out_dir / "plotdata.json").write_text(json.dumps(plot, indent=2))
    return out_dir / "ranking.txt", out_dir / "plotdata.json"


def _quants(values, qs):
    if not values:
        return None
    return [float(np.quantile(values, q)) for q in qs]
