"""Evaluation metrics and the strategy ranking protocol.

A campaign produces one record per (strategy, problem, replication) cell.
Strategies are compared per cell against the best performer under a
criterion, counting how often each strategy lands within fixed distance
factors of that best; the counts aggregate to robustness percentages over
all cells and the mid distance orders the final ranking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# distance factors per criterion; the middle one drives the ranking order
NEVAL_FACTORS = (2.0, 3.0, 5.0)
ERROR_FACTORS = (5.0, 10.0, 20.0)
ELIGIBILITY_RELERR = 0.05


@dataclass(frozen=True)
class CampaignRecord:
    strategy_id: str
    problem_id: int
    replication: int
    seed: int
    pf: float
    beta: float
    rel_err: float
    delta: float | None
    n_eval: int
    termination: str
    wall_time: float
    error: str | None = None

    @property
    def failed(self):
        return self.error is not None


def metric_relerr(beta_hat, beta_ref):
    """Relative reliability index error |beta_hat - beta_ref| / beta_ref.

    Infinite beta_hat (pf = 0 sentinel) maps to +inf.
    """
    if beta_ref <= 0.0 or not math.isfinite(beta_ref):
        raise ValueError("reference reliability index must be finite positive")
    if not math.isfinite(beta_hat):
        return math.inf
    return abs(beta_hat - beta_ref) / beta_ref


def metric_delta(rel_err, n_eval, n_median):
    """Error-cost composite: relative error scaled by relative model cost."""
    if n_median <= 0:
        raise ValueError("median evaluation count must be positive")
    if math.isinf(rel_err):
        return math.inf
    return rel_err * n_eval / n_median


def median_evals_by_problem(records):
    """Median true-model evaluation count per problem over all campaign runs."""
    by_problem: dict[int, list[int]] = {}
    for r in records:
        if not r.failed:
            by_problem.setdefault(r.problem_id, []).append(r.n_eval)
    return {pid: float(np.median(v)) for pid, v in by_problem.items()}


def attach_delta(records):
    """Records with the delta criterion recomputed over this campaign."""
    med = median_evals_by_problem(records)
    out = []
    for r in records:
        if r.failed or r.problem_id not in med:
            out.append(r)
            continue
        delta = metric_delta(r.rel_err, r.n_eval, med[r.problem_id])
        out.append(CampaignRecord(
            r.strategy_id, r.problem_id, r.replication, r.seed, r.pf, r.beta,
            r.rel_err, delta, r.n_eval, r.termination, r.wall_time, r.error))
    return out


@dataclass
class RankingRow:
    strategy_id: str
    within_pct: tuple[float, float, float]
    best_pct: float
    n_cells: int


def rank_strategies(records, criterion):
    """Rank strategies under one criterion with robustness percentages.

    ``criterion`` is one of 'neval', 'relerr', 'delta'. Per (problem,
    replication) cell the best value is found; each strategy's counts of
    landing within the criterion's distance factors aggregate over cells.
    For 'neval' only runs with relative error below 0.05 are eligible and
    the rest rank last regardless of their evaluation count. Rows come
    back ordered by the mid-distance percentage.
    """
    records = [r for r in records if not r.failed]
    if not records:
        raise ValueError("no records to rank")
    if criterion not in ("neval", "relerr", "delta"):
        raise ValueError(f"unknown ranking criterion {criterion!r}")
    factors = NEVAL_FACTORS if criterion == "neval" else ERROR_FACTORS

    strategies = sorted({r.strategy_id for r in records})
    cells: dict[tuple[int, int], list[CampaignRecord]] = {}
    for r in records:
        cells.setdefault((r.problem_id, r.replication), []).append(r)

    within = {s: np.zeros(len(factors)) for s in strategies}
    best_count = {s: 0.0 for s in strategies}
    n_cells = 0
    for cell_records in cells.values():
        values = {}
        for r in cell_records:
            if criterion == "neval":
                if r.rel_err >= ELIGIBILITY_RELERR:
                    continue
                values[r.strategy_id] = float(r.n_eval)
            elif criterion == "relerr":
                values[r.strategy_id] = r.rel_err
            else:
                values[r.strategy_id] = math.inf if r.delta is None else r.delta
        n_cells += 1
        finite = {s: v for s, v in values.items() if math.isfinite(v)}
        if not finite:
            continue
        best = min(finite.values())
        for s in sorted(finite):
            if finite[s] == best:
                best_count[s] += 1
                break  # one winner per cell, ties broken alphabetically
        for s, v in finite.items():
            for k, f in enumerate(factors):
                if best == 0.0:
                    ok = v == 0.0
                else:
                    ok = v <= f * best
                within[s][k] += 1 if ok else 0
    if n_cells == 0:
        raise ValueError("no rankable cells")

    rows = [
        RankingRow(
            strategy_id=s,
            within_pct=tuple(100.0 * within[s][k] / n_cells
                             for k in range(len(factors))),
            best_pct=100.0 * best_count[s] / n_cells,
            n_cells=n_cells,
        )
        for s in strategies
    ]
    rows.sort(key=lambda row: (-row.within_pct[1], -row.within_pct[0],
                               -row.best_pct, row.strategy_id))
    return rows
