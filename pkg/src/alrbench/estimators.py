"""Simulation-based failure probability estimators.

All estimators work on a vectorized limit state callable g(x) with x of
shape (n, M) in physical space, failure being g <= 0. Sampling happens in
standard normal space and is mapped through the input model, so the same
code drives both true models and surrogate means.

Every evaluated sample is archived in the result's population so that the
active learning loop can reuse it as an enrichment candidate pool. For
Monte Carlo and importance sampling the archive may be capped
(``population_cap``); since their draws are iid, keeping the first ``cap``
samples is an unbiased uniform subset. Subset simulation archives every
evaluated candidate across levels, tagged by level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr, ndtri


class EstimationError(RuntimeError):
    """Raised when an estimator cannot produce a result."""


class FormNonConvergence(EstimationError):
    """HLRF iteration failed to converge within the iteration cap."""


def beta_from_pf(pf):
    """Generalized reliability index beta = -Phi^-1(pf).

    pf = 0 maps to +inf and pf = 1 to -inf (sentinels, not errors).
    """
    if pf <= 0.0:
        return math.inf
    if pf >= 1.0:
        return -math.inf
    return float(-ndtri(pf))

def pf_from_beta(beta):
    if math.isinf(beta):
        return 0.0 if beta > 0 else 1.0
    return float(ndtr(-beta))


# ----------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class McsConfig:
    batch_size: int = 10_000
    target_cov: float = 0.025
    max_samples: int = 1_000_000

    def __post_init__(self):
        if self.batch_size < 100:
            raise ValueError("batch_size must be >= 100")
        if not 0.0 < self.target_cov:
            raise ValueError("target_cov must be > 0")


@dataclass(frozen=True)
class IsConfig:
    n_samples: int = 1_000
    pilot_samples: int = 1_000

    def __post_init__(self):
        if self.n_samples < 100:
            raise ValueError("n_samples must be >= 100")


@dataclass(frozen=True)
class SusConfig:
    batch_per_level: int = 1_000
    p0: float = 0.1
    max_levels: int = 25
    proposal_halfwidth: float = 1.0
    # "error" raises on a non-decreasing intermediate threshold;
    # "truncate" reports a pf = 0 sentinel with the population archived so
    # an enclosing active-learning loop can keep enriching a flat surrogate
    on_stagnation: str = "error"

    def __post_init__(self):
        if not 0.0 < self.p0 < 1.0:
            raise ValueError("p0 must lie in (0, 1)")
        if self.batch_per_level < 100:
            raise ValueError("batch_per_level must be >= 100")
        ns = round(self.p0 * self.batch_per_level)
        if ns < 1 or self.batch_per_level % ns != 0:
            raise ValueError("batch_per_level * p0 must divide batch_per_level")


@dataclass(frozen=True)
class SolverConfig:
    """Bundle of per-estimator settings.

    ``overkill`` deliberately minimizes estimator variance (cheap on a
    surrogate); ``standard`` matches the usual direct-simulation settings.
    """

    mcs: McsConfig = field(default_factory=McsConfig)
    is_: IsConfig = field(default_factory=IsConfig)
    sus: SusConfig = field(default_factory=SusConfig)
    mode: str = "standard"
    population_cap: int | None = None

    @classmethod
    def overkill(cls, population_cap=None):
        return cls(
            mcs=McsConfig(batch_size=100_000, target_cov=0.025, max_samples=10_000_000),
            is_=IsConfig(n_samples=10_000),
            sus=SusConfig(batch_per_level=100_000, p0=0.25),
            mode="overkill",
            population_cap=population_cap,
        )

    @classmethod
    def standard(cls, population_cap=None):
        return cls(
            mcs=McsConfig(batch_size=10_000, target_cov=0.025, max_samples=1_000_000),
            is_=IsConfig(n_samples=1_000),
            sus=SusConfig(batch_per_level=1_000, p0=0.1),
            mode="standard",
            population_cap=population_cap,
        )

    def scaled(self, divisor):
        """Same settings with sampling budgets divided by ``divisor``
        (desk-scale profile)."""
        return replace(
            self,
            mcs=McsConfig(
                batch_size=max(100, self.mcs.batch_size // divisor),
                target_cov=self.mcs.target_cov,
                max_samples=max(1000, self.mcs.max_samples // divisor),
            ),
            is_=IsConfig(n_samples=max(100, self.is_.n_samples // divisor)),
            sus=SusConfig(
                batch_per_level=max(400, self.sus.batch_per_level // divisor),
                p0=self.sus.p0,
                max_levels=self.sus.max_levels,
                proposal_halfwidth=self.sus.proposal_halfwidth,
            ),
            mode=self.mode,
            population_cap=self.population_cap,
        )


# ----------------------------------------------------------------------
# results


@dataclass
class Population:
    """Archive of evaluated samples, reused as enrichment candidates."""

    x: np.ndarray            # (n, M) physical space
    g: np.ndarray            # (n,) limit state values
    weight: np.ndarray       # (n,) importance weights (1 for MCS/SuS)
    level: np.ndarray        # (n,) subset level tag (0 for MCS/IS)
    truncated: bool = False  # True when capped below the evaluation count

    @property
    def size(self):
        return self.x.shape[0]


@dataclass
class ReliabilityResult:
    pf: float
    beta: float
    cov: float
    n_evals: int
    population: Population
    pf_zero: bool = False
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.population.size == 0:
            raise EstimationError("estimator produced an empty population")


class _CountingLimitState:
    """Wraps g to count evaluations and reject non-finite output."""

    def __init__(self, g):
        self._g = g
        self.n_evals = 0

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.asarray(self._g(x), dtype=float).reshape(-1)
        if out.shape[0] != x.shape[0]:
            raise EstimationError("limit state returned a wrong-length batch")
        if not np.all(np.isfinite(out)):
            bad = x[~np.isfinite(out)][0]
            raise EstimationError(f"non-finite limit state value at {bad}")
        self.n_evals += x.shape[0]
        return out


# ----------------------------------------------------------------------
# Monte Carlo


def monte_carlo(g, rv, cfg, rng):
    """Crude Monte Carlo with batchwise CoV stopping rule.

    Stops when CoV = sqrt((1 - pf) / (N pf)) <= target or the sample cap is
    reached. A run with zero failures reports pf = 0 with a +inf CoV flag.
    """
    mc = cfg.mcs
    gc = _CountingLimitState(g)
    cap = cfg.population_cap
    xs, gs = [], []
    kept = 0
    n, n_fail = 0, 0
    while n < mc.max_samples:
        b = min(mc.batch_size, mc.max_samples - n)
        x = rv.sample(b, rng)
        val = gc(x)
        n += b
        n_fail += int(np.sum(val <= 0.0))
        if cap is None or kept < cap:
            take = b if cap is None else min(b, cap - kept)
            xs.append(x[:take])
            gs.append(val[:take])
            kept += take
        pf = n_fail / n
        if n_fail > 0:
            cov = math.sqrt((1.0 - pf) / (n * pf))
            if cov <= mc.target_cov:
                break
    pf = n_fail / n
    pop = Population(
        x=np.concatenate(xs),
        g=np.concatenate(gs),
        weight=np.ones(kept),
        level=np.zeros(kept, dtype=int),
        truncated=kept < n,
    )
    if n_fail == 0:
        return ReliabilityResult(0.0, math.inf, math.inf, gc.n_evals, pop,
                                 pf_zero=True, flags=("no_failures",))
    cov = math.sqrt((1.0 - pf) / (n * pf))
    return ReliabilityResult(pf, beta_from_pf(pf), cov, gc.n_evals, pop)


# ----------------------------------------------------------------------
# FORM


@dataclass
class FormResult:
    u_star: np.ndarray
    beta: float
    n_iterations: int
    n_evals: int
    converged: bool


def form_hlrf(g, rv, max_iterations=100, tol=1e-6, fd_step=1e-6):
    """HLRF iteration for the most probable failure point.

    Runs in standard normal space starting from the origin, with central
    finite-difference gradients. beta is signed positive when the origin is
    safe. Raises FormNonConvergence after ``max_iterations``.
    """
    gc = _CountingLimitState(g)
    m = rv.dim

    def g_u(u2d):
        return gc(rv.from_standard_normal(u2d))

    u = np.zeros(m)
    g0 = float(g_u(u[None, :])[0])
    sign = 1.0 if g0 > 0.0 else -1.0
    beta_prev = 0.0
    for it in range(1, max_iterations + 1):
        gu = float(g_u(u[None, :])[0])
        h = fd_step * (1.0 + np.abs(u))
        pts = np.repeat(u[None, :], 2 * m, axis=0)
        for i in range(m):
            pts[2 * i, i] += h[i]
            pts[2 * i + 1, i] -= h[i]
        vals = g_u(pts)
        grad = (vals[0::2] - vals[1::2]) / (2.0 * h)
        norm2 = float(grad @ grad)
        if norm2 == 0.0:
            raise FormNonConvergence("zero gradient in HLRF iteration")
        u_next = ((grad @ u - gu) / norm2) * grad
        beta = float(np.linalg.norm(u_next))
        move = float(np.linalg.norm(u_next - u))
        u = u_next
        if abs(beta - beta_prev) < tol and move < tol:
            return FormResult(u, sign * beta, it, gc.n_evals, True)
        beta_prev = beta
    raise FormNonConvergence(
        f"HLRF did not converge in {max_iterations} iterations"
    )


# ----------------------------------------------------------------------
# importance sampling


def importance_sampling(g, rv, cfg, rng):
    """IS with a unit-covariance Gaussian proposal at the FORM design point.

    If FORM fails, the proposal recenters on the mean of failing samples
    from a pilot Monte Carlo run (flagged). Weights are the closed-form
    standard-space density ratio.
    """
    isc = cfg.is_
    gc = _CountingLimitState(g)
    flags = []
    try:
        form = form_hlrf(gc, rv)
        u_star = form.u_star
        n_form = 0  # already counted through gc
    except FormNonConvergence:
        flags.append("form_failed_pilot_fallback")
        x_pilot = rv.sample(isc.pilot_samples, rng)
        g_pilot = gc(x_pilot)
        fail = g_pilot <= 0.0
        if np.any(fail):
            u_star = rv.to_standard_normal(x_pilot[fail]).mean(axis=0)
        else:
            u_star = np.zeros(rv.dim)
            flags.append("pilot_found_no_failures")

    u = u_star[None, :] + rng.standard_normal((isc.n_samples, rv.dim))
    x = rv.from_standard_normal(u)
    val = gc(x)
    logw = 0.5 * float(u_star @ u_star) - u @ u_star
    w = np.exp(logw)
    ind = (val <= 0.0).astype(float)
    contrib = ind * w

    cap = cfg.population_cap
    keep = slice(None) if cap is None else slice(0, cap)
    pop = Population(
        x=x[keep], g=val[keep], weight=w[keep],
        level=np.zeros(len(val[keep]), dtype=int),
        truncated=cap is not None and cap < isc.n_samples,
    )
    pf = float(contrib.mean())
    if pf == 0.0:
        return ReliabilityResult(0.0, math.inf, math.inf, gc.n_evals, pop,
                                 pf_zero=True, flags=tuple(flags) + ("no_failures",))
    se = float(contrib.std(ddof=1)) / math.sqrt(isc.n_samples)
    return ReliabilityResult(pf, beta_from_pf(pf), se / pf, gc.n_evals, pop,
                             flags=tuple(flags))


# ----------------------------------------------------------------------
# subset simulation


def subset_simulation(g, rv, cfg, rng):
    """Subset simulation with component-wise (modified) Metropolis chains.

    Intermediate thresholds are the p0-quantiles of the current level,
    chosen on the fly. The CoV aggregates per-level delta terms including
    the chain correlation factor.

    Randomness is indexed per level: two runs seeded identically consume
    the same proposal and acceptance numbers at every level even when
    their thresholds differ. Runs on nearby limit states (the +/- 2 sigma
    bound states of an active-learning loop) therefore stay coupled as
    common random numbers all the way down, not just at level zero.
    """
    sc = cfg.sus
    gc = _CountingLimitState(g)
    N = sc.batch_per_level
    ns = round(sc.p0 * N)
    chain_len = N // ns

    entropy = int(rng.integers(0, 2**63 - 1))

    def level_rng(level):
        ss = np.random.SeedSequence(entropy=entropy, spawn_key=(level,))
        return np.random.Generator(np.random.Philox(ss))

    def to_u(x):
        return rv.to_standard_normal(x)

    # level 0: crude Monte Carlo
    x = rv.sample(N, level_rng(0))
    val = gc(x)
    pop_x, pop_g, pop_lvl = [x], [val], [np.zeros(N, dtype=int)]
    deltas2 = []
    level = 0
    t_prev = math.inf
    log_pf = 0.0

    while True:
        n_fail = int(np.sum(val <= 0.0))
        if n_fail >= ns or level >= sc.max_levels:
            p_last = n_fail / N
            if level == 0:
                if n_fail == 0:
                    pop = _sus_population(pop_x, pop_g, pop_lvl)
                    return ReliabilityResult(
                        0.0, math.inf, math.inf, gc.n_evals, pop,
                        pf_zero=True, flags=("no_failures",))
                deltas2.append((1.0 - p_last) / (p_last * N))
            else:
                if n_fail == 0:
                    pop = _sus_population(pop_x, pop_g, pop_lvl)
                    return ReliabilityResult(
                        0.0, math.inf, math.inf, gc.n_evals, pop,
                        pf_zero=True, flags=("no_failures_last_level",))
                deltas2.append(_level_delta2(val <= 0.0, ns, chain_len))
            log_pf += math.log(p_last)
            break

        order = np.argsort(val, kind="stable")
        t = float(val[order[ns - 1]])
        if t >= t_prev:
            if sc.on_stagnation == "truncate":
                pop = _sus_population(pop_x, pop_g, pop_lvl)
                return ReliabilityResult(
                    0.0, math.inf, math.inf, gc.n_evals, pop,
                    pf_zero=True, flags=("level_stagnation",))
            raise EstimationError(
                f"degenerate levels: threshold {t} did not decrease")
        t_prev = t
        if level == 0:
            deltas2.append((1.0 - sc.p0) / (sc.p0 * N))
        else:
            deltas2.append(_level_delta2(val <= t, ns, chain_len))
        log_pf += math.log(ns / N)
        level += 1

        # seeds for the next level: the ns lowest-g states
        seeds_x = x[order[:ns]]
        seeds_g = val[order[:ns]]
        u = to_u(seeds_x)
        cur_g = seeds_g.copy()
        states_u = [u.copy()]
        states_g = [cur_g.copy()]
        lrng = level_rng(level)
        for _ in range(chain_len - 1):
            xi = u + lrng.uniform(-sc.proposal_halfwidth,
                                  sc.proposal_halfwidth, size=u.shape)
            accept = lrng.uniform(size=u.shape) < np.exp(-0.5 * (xi * xi - u * u))
            cand = np.where(accept, xi, u)
            moved = np.any(accept, axis=1)
            new_u = u.copy()
            new_g = cur_g.copy()
            if np.any(moved):
                cand_x = rv.from_standard_normal(cand[moved])
                cand_g = gc(cand_x)
                pop_x.append(cand_x)
                pop_g.append(cand_g)
                pop_lvl.append(np.full(len(cand_g), level, dtype=int))
                ok = cand_g <= t
                idx = np.flatnonzero(moved)[ok]
                new_u[idx] = cand[moved][ok]
                new_g[idx] = cand_g[ok]
            u, cur_g = new_u, new_g
            states_u.append(u.copy())
            states_g.append(cur_g.copy())

        # chain states (ns, chain_len) flattened back to a level batch
        u_all = np.concatenate(states_u)
        val = np.concatenate(states_g)
        x = rv.from_standard_normal(u_all)

    pf = math.exp(log_pf)
    cov = math.sqrt(sum(deltas2))
    pop = _sus_population(pop_x, pop_g, pop_lvl)
    return ReliabilityResult(pf, beta_from_pf(pf), cov, gc.n_evals, pop)


def _sus_population(pop_x, pop_g, pop_lvl):
    x = np.concatenate(pop_x)
    gv = np.concatenate(pop_g)
    lvl = np.concatenate(pop_lvl)
    return Population(x=x, g=gv, weight=np.ones(len(gv)), level=lvl)


def _level_delta2(indicator, ns, chain_len):
    """Squared per-level CoV contribution with the chain correlation factor."""
    ind = indicator.reshape(chain_len, ns).T.astype(float)  # (chains, len)
    N = ind.size
    p = ind.mean()
    if p <= 0.0 or p >= 1.0:
        return 0.0
    base = (1.0 - p) / (p * N)
    r0 = p * (1.0 - p)
    gamma = 0.0
    for j in range(1, chain_len):
        rj = np.mean(ind[:, :-j] * ind[:, j:]) - p * p
        gamma += 2.0 * (1.0 - j / chain_len) * (rj / r0)
    return base * (1.0 + max(gamma, 0.0))
