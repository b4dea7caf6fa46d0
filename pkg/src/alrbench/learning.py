"""Learning functions, stopping criteria and the enrichment loop.

The loop alternates four steps: fit a surrogate on the current design,
estimate the failure probability by running a reliability estimator on
the surrogate mean, evaluate the stopping criterion, and add one true
model evaluation chosen from the estimator's archived sample population.

Randomness is organized around counter-based Philox streams derived from
a single run seed. The estimator stream is re-seeded identically on every
iteration (and shared by the three beta-bound sub-runs), so successive
reliability estimates differ only through the surrogate, not through
fresh sampling noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr

from .distributions import lhs_sample, std_normal_pdf
from .estimators import (
    EstimationError, SolverConfig, importance_sampling, monte_carlo,
    subset_simulation,
)
from .kriging import DuplicatePointError, ExperimentalDesign, KrigingConfig, fit_kriging
from .pce import PceConfig, bootstrap_replicates, fit_pce_lars
from .pck import PckConfig, fit_pck

SURROGATES = ("kriging", "pce", "pck")
ESTIMATORS = ("mcs", "is", "sus")
LEARNING_FUNCTIONS = ("u", "eff", "fbr")
STOPPING = ("bounds", "stability", "combined")

_ID_TOKENS = {
    "kriging": "KRG", "pce": "PCE", "pck": "PCK",
    "mcs": "MCS", "is": "IS", "sus": "SuS",
    "u": "U", "eff": "EFF", "fbr": "FBR",
    "bounds": "BB", "stability": "BS", "combined": "Co",
}


class InvalidStrategyError(ValueError):
    pass


@dataclass(frozen=True)
class Strategy:
    """One cell of the surrogate x estimator x learning x stopping grid."""

    surrogate: str
    estimator: str
    learning_function: str
    stopping: str

    def __post_init__(self):
        if self.surrogate not in SURROGATES:
            raise InvalidStrategyError(f"unknown surrogate {self.surrogate!r}")
        if self.estimator not in ESTIMATORS:
            raise InvalidStrategyError(f"unknown estimator {self.estimator!r}")
        if self.learning_function not in LEARNING_FUNCTIONS:
            raise InvalidStrategyError(
                f"unknown learning function {self.learning_function!r}")
        if self.stopping not in STOPPING:
            raise InvalidStrategyError(f"unknown stopping {self.stopping!r}")
        if (self.learning_function == "fbr") != (self.surrogate == "pce"):
            raise InvalidStrategyError(
                "the bootstrap-fraction learning function pairs with PCE only")
        if self.learning_function in ("u", "eff") and self.surrogate == "pce":
            raise InvalidStrategyError(
                f"{self.learning_function!r} needs a variance-bearing surrogate")
        if self.stopping in ("bounds", "combined") and self.surrogate == "pce":
            raise InvalidStrategyError(
                f"{self.stopping!r} stopping needs a variance-bearing surrogate")

    @property
    def id(self):
        return "+".join(_ID_TOKENS[t] for t in (
            self.surrogate, self.estimator, self.learning_function, self.stopping))

    @classmethod
    def from_id(cls, sid):
        rev = {v: k for k, v in _ID_TOKENS.items()}
        try:
            s, e, lf, sc = (rev[tok] for tok in sid.split("+"))
        except (KeyError, ValueError):
            raise InvalidStrategyError(f"malformed strategy id {sid!r}") from None
        return cls(s, e, lf, sc)


# ----------------------------------------------------------------------
# learning functions


def lf_u(mean, variance):
    """Deviation number |mu| / sigma (smaller means closer to the surface).

    sigma = 0 yields +inf for nonzero mean and 0 for zero mean.
    """
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < 0.0):
        raise ValueError("variance must be non-negative")
    sigma = np.sqrt(variance)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.abs(mean) / sigma
    out = np.where(sigma == 0.0, np.where(mean == 0.0, 0.0, np.inf), out)
    return out


def lf_eff(mean, variance):
    """Expected feasibility function with the band eps = 2 sigma."""
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < 0.0):
        raise ValueError("variance must be non-negative")
    sigma = np.sqrt(variance)
    out = np.zeros_like(mean, dtype=float)
    ok = sigma > 0.0
    mu, sg = mean[ok], sigma[ok]
    eps = 2.0 * sg
    z0 = -mu / sg
    zm = (-eps - mu) / sg
    zp = (eps - mu) / sg
    eff = (
        mu * (2.0 * ndtr(z0) - ndtr(zm) - ndtr(zp))
        - sg * (2.0 * std_normal_pdf(z0) - std_normal_pdf(zm) - std_normal_pdf(zp))
        + eps * (ndtr(zp) - ndtr(zm))
    )
    out[ok] = eff
    return out


def lf_fbr(replicate_values):
    """Fraction-of-bootstrap-replicates agreement score in [0, 1].

    ``replicate_values`` has shape (n_points, B); replicates with value > 0
    count as safe, <= 0 as failed. 0 means a perfect safe/fail split.
    """
    rep = np.atleast_2d(np.asarray(replicate_values, dtype=float))
    b = rep.shape[1]
    safe = np.sum(rep > 0.0, axis=1)
    return np.abs(2.0 * safe - b) / b


def select_enrichment(candidates, scores, maximize, ed, dedup_tol=1e-10):
    """Pick the best-scoring candidate that is not already a design point.

    Ties break toward the candidate farthest from the design (standardized
    distance), then toward the lowest index. Raises on an empty pool or
    when every candidate duplicates a design point.
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if candidates.shape[0] == 0:
        raise ValueError("empty candidate pool; the estimator must archive samples")
    scores = np.asarray(scores, dtype=float)
    key = -scores if maximize else scores

    std = ed.x.std(axis=0)
    std[std < 1e-15] = 1.0
    zc = candidates / std
    zed = ed.x / std
    d2 = np.min(
        np.sum((zc[:, None, :] - zed[None, :, :]) ** 2, axis=2), axis=1)
    nearest = np.sqrt(d2)

    order = np.lexsort((np.arange(len(key)), -nearest, key))
    for idx in order:
        if nearest[idx] > dedup_tol:
            return int(idx)
    raise ValueError("every candidate duplicates an existing design point")


# ----------------------------------------------------------------------
# stopping criteria


@dataclass(frozen=True)
class BoundsCheck:
    satisfied: bool
    beta: float
    beta_plus: float
    beta_minus: float
    ratio: float


def sc_beta_bounds(beta, beta_plus, beta_minus, threshold=0.01):
    """Kriging-variance bound criterion on three reliability estimates.

    beta_minus / beta_plus come from the mean -/+ 2 sigma limit states. A
    non-finite estimate (pf = 0 sentinel) leaves the criterion unsatisfied.
    """
    finite = all(map(math.isfinite, (beta, beta_plus, beta_minus))) and beta != 0.0
    if not finite:
        return BoundsCheck(False, beta, beta_plus, beta_minus, math.inf)
    ratio = abs(beta_plus - beta_minus) / abs(beta)
    return BoundsCheck(ratio <= threshold, beta, beta_plus, beta_minus, ratio)


def sc_beta_stability(beta_current, beta_previous, threshold=0.005):
    """Relative change of the reliability index between iterations."""
    if not (math.isfinite(beta_current) and math.isfinite(beta_previous)):
        return False
    if beta_current == 0.0:
        return False
    return abs(beta_current - beta_previous) / abs(beta_current) <= threshold


def sc_combined(bounds_history, stability_history, window=2):
    """Both criteria satisfied in each of the last ``window`` iterations."""
    if len(bounds_history) < window or len(stability_history) < window:
        return False
    joint = [b and s for b, s in zip(bounds_history, stability_history)]
    return all(joint[-window:])


CONSECUTIVE_REQUIRED = {"bounds": 3, "stability": 3, "combined": 2}


# ----------------------------------------------------------------------
# orchestrator


@dataclass(frozen=True)
class AlrBudget:
    n_initial: int | None = None       # default max(10, 2M)
    max_enrichment: int | None = None  # default 100 + 10M

    def resolved(self, dim):
        n0 = self.n_initial if self.n_initial is not None else max(10, 2 * dim)
        cap = (self.max_enrichment if self.max_enrichment is not None
               else 100 + 10 * dim)
        return n0, cap


@dataclass
class AlrIteration:
    iteration: int
    n_ed: int
    pf: float
    beta: float
    cov: float
    stopping: dict
    selected_point: list | None


@dataclass
class AlrTrace:
    strategy_id: str
    iterations: list[AlrIteration]
    termination: str                  # converged | budget_exhausted | fit_failed
    pf: float
    beta: float
    cov: float
    n_true_evals: int
    n_initial: int
    final_result: object = None
    error: str | None = None

    def to_record_dicts(self):
        return [
            {
                "iteration": it.iteration,
                "n_ed": it.n_ed,
                "pf": it.pf,
                "beta": None if math.isinf(it.beta) else it.beta,
                "cov": None if math.isinf(it.cov) else it.cov,
                "stopping": it.stopping,
                "selected_point": it.selected_point,
            }
            for it in self.iterations
        ]


@dataclass(frozen=True)
class SurrogateConfigs:
    kriging: KrigingConfig = field(default_factory=KrigingConfig)
    pce: PceConfig = field(default_factory=PceConfig)
    pck: PckConfig = field(default_factory=PckConfig)
    bootstrap_replicates: int = 100


def _stream(seed, *key):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


_ESTIMATOR_FN = {
    "mcs": monte_carlo,
    "is": importance_sampling,
    "sus": subset_simulation,
}


class _SurrogateFit:
    """Holds the fitted surrogate plus the pieces each strategy needs."""

    def __init__(self, model, ensemble=None):
        self.model = model
        self.ensemble = ensemble

    def mean_callable(self):
        return self.model.predict_mean

    def band_callable(self, shift):
        model = self.model

        def g(x):
            mean, var = model.predict(x)
            return mean + shift * np.sqrt(var)

        return g


def _fit_surrogate(strategy, ed, rv, cfgs, fit_rng_seed, boot_rng):
    if strategy.surrogate == "kriging":
        cfg = replace(cfgs.kriging, seed=fit_rng_seed)
        return _SurrogateFit(fit_kriging(ed, cfg))
    if strategy.surrogate == "pck":
        kcfg = replace(cfgs.pck.kriging, seed=fit_rng_seed)
        cfg = replace(cfgs.pck, kriging=kcfg)
        return _SurrogateFit(fit_pck(ed, rv, cfg))
    model = fit_pce_lars(ed, rv, cfgs.pce)
    ensemble = bootstrap_replicates(ed, rv, model, cfgs.bootstrap_replicates,
                                    boot_rng)
    return _SurrogateFit(model, ensemble)


def _harden(strategy, cfgs):
    """Retry configuration after a fit failure: bigger nugget / same ridge."""
    if strategy.surrogate == "kriging":
        k = cfgs.kriging
        return replace(cfgs, kriging=replace(
            k, nugget=k.nugget * 2, nugget_max=max(k.nugget_max, k.nugget * 20)))
    if strategy.surrogate == "pck":
        k = cfgs.pck.kriging
        hard = replace(k, nugget=k.nugget * 2,
                       nugget_max=max(k.nugget_max, k.nugget * 20))
        return replace(cfgs, pck=replace(cfgs.pck, kriging=hard))
    p = cfgs.pce
    return replace(cfgs, pce=replace(p, ridge=p.ridge * 10))


def run_alr(strategy, problem, solver_cfg, seed, budget=AlrBudget(),
            surrogate_cfgs=SurrogateConfigs(), pool_cap=5000,
            surrogate_factory=None):
    """Run one active-learning reliability analysis.

    ``problem`` provides ``rv`` (input model) and ``lsf`` (true limit
    state). Only true-model calls count toward ``n_true_evals``. The
    returned trace is fully determined by (strategy, problem, seed).

    ``surrogate_factory`` replaces the surrogate fit when given (testing
    hook); it maps an ExperimentalDesign to a fitted-model object.
    """
    rv = problem.rv
    lsf = problem.lsf
    m = rv.dim
    n0, max_add = budget.resolved(m)
    if strategy.estimator == "sus":
        solver_cfg = replace(solver_cfg,
                             sus=replace(solver_cfg.sus, on_stagnation="truncate"))
    if strategy.estimator in ("mcs", "is") and solver_cfg.population_cap is None:
        # iid draws: keeping the first pool_cap samples is an unbiased
        # uniform subset, so archive no more than the loop will ever use
        solver_cfg = replace(solver_cfg, population_cap=pool_cap)

    ed_rng = _stream(seed, 0)
    x0 = lhs_sample(n0, rv, ed_rng)
    y0 = np.asarray(lsf(x0), dtype=float).reshape(-1)
    ed = ExperimentalDesign(x0, y0)
    n_true = n0

    estimator = _ESTIMATOR_FN[strategy.estimator]
    needs_bounds = strategy.stopping in ("bounds", "combined")

    iterations: list[AlrIteration] = []
    consec = 0
    bounds_hist: list[bool] = []
    stab_hist: list[bool] = []
    added = 0
    termination = None
    result = None
    beta_prev = math.nan
    error_msg = None

    it = 0
    while True:
        it += 1
        fit_seed = int(_stream(seed, 2, it).integers(0, 2**31 - 1))
        boot_rng = _stream(seed, 4, it)
        cfgs = surrogate_cfgs
        if surrogate_factory is not None:
            fit = _SurrogateFit(surrogate_factory(ed))
            if strategy.surrogate == "pce" and hasattr(fit.model, "ensemble"):
                fit.ensemble = fit.model.ensemble
        else:
            try:
                fit = _fit_surrogate(strategy, ed, rv, cfgs, fit_seed, boot_rng)
            except Exception:
                try:
                    fit = _fit_surrogate(strategy, ed, rv, _harden(strategy, cfgs),
                                         fit_seed, boot_rng)
                except Exception as exc2:
                    termination = "fit_failed"
                    error_msg = f"surrogate fit failed twice: {exc2}"
                    break

        def run_estimator(g):
            return estimator(g, rv, solver_cfg, _stream(seed, 1))

        try:
            result = run_estimator(fit.mean_callable())
        except EstimationError as exc:
            termination = "fit_failed"
            error_msg = f"estimator failed: {exc}"
            break
        beta_hat = result.beta
        n_fit = ed.n  # design size this iteration's surrogate was fitted on

        stopping_info = {"criterion": strategy.stopping}
        stab_ok = sc_beta_stability(beta_hat, beta_prev) if it > 1 else False
        stab_hist.append(stab_ok)
        stopping_info["stability_satisfied"] = stab_ok

        bounds_ok = False
        if needs_bounds:
            try:
                res_minus = run_estimator(fit.band_callable(-2.0))
                res_plus = run_estimator(fit.band_callable(+2.0))
            except EstimationError:
                res_minus = res_plus = None
            if res_minus is None:
                check = BoundsCheck(False, beta_hat, math.nan, math.nan, math.inf)
            else:
                check = sc_beta_bounds(beta_hat, res_plus.beta, res_minus.beta)
            bounds_ok = check.satisfied
            stopping_info.update(
                bounds_satisfied=bounds_ok,
                beta_plus=check.beta_plus, beta_minus=check.beta_minus,
                bounds_ratio=None if math.isinf(check.ratio) else check.ratio,
            )
        bounds_hist.append(bounds_ok)

        if strategy.stopping == "stability":
            satisfied = stab_ok
        elif strategy.stopping == "bounds":
            satisfied = bounds_ok
        else:
            satisfied = bool(bounds_ok and stab_ok)
        consec = consec + 1 if satisfied else 0
        stopping_info["consecutive"] = consec
        beta_prev = beta_hat

        converged = consec >= CONSECUTIVE_REQUIRED[strategy.stopping]
        selected = None
        if not converged and added < max_add:
            pool_rng = _stream(seed, 3, it)
            pop = result.population
            idx = np.arange(pop.size)
            if pop.size > pool_cap:
                idx = pool_rng.choice(pop.size, size=pool_cap, replace=False)
            cand = pop.x[idx]
            if strategy.learning_function == "u":
                mean, var = fit.model.predict(cand)
                scores, maximize = lf_u(mean, var), False
            elif strategy.learning_function == "eff":
                mean, var = fit.model.predict(cand)
                scores, maximize = lf_eff(mean, var), True
            else:
                reps = fit.ensemble.predict_replicates(cand)
                scores, maximize = lf_fbr(reps), False
            try:
                best = select_enrichment(cand, scores, maximize, ed)
            except ValueError as exc:
                termination = "budget_exhausted"
                error_msg = f"enrichment selection failed: {exc}"
                iterations.append(AlrIteration(
                    it, n_fit, result.pf, beta_hat, result.cov, stopping_info, None))
                break
            x_new = cand[best]
            y_new = float(np.asarray(lsf(x_new[None, :])).reshape(-1)[0])
            n_true += 1
            added += 1
            try:
                ed = ed.append(x_new, y_new)
            except DuplicatePointError as exc:
                termination = "budget_exhausted"
                error_msg = f"enrichment produced a duplicate: {exc}"
                iterations.append(AlrIteration(
                    it, n_fit, result.pf, beta_hat, result.cov, stopping_info, None))
                break
            selected = x_new.tolist()

        iterations.append(AlrIteration(
            it, n_fit, result.pf, beta_hat, result.cov, stopping_info, selected))

        if converged:
            termination = "converged"
            break
        if selected is None:
            termination = "budget_exhausted"
            break

    if result is None:
        return AlrTrace(strategy.id, iterations, termination or "fit_failed",
                        math.nan, math.nan, math.nan, n_true, n0, None, error_msg)
    return AlrTrace(strategy.id, iterations, termination, result.pf, result.beta,
                    result.cov, n_true, n0, result, error_msg)
