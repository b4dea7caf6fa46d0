"""Sparse polynomial chaos expansions in standard normal space.

The basis is built from normalized probabilists' Hermite polynomials under
a hyperbolic (q-norm) truncation with bounded interaction order. The
coefficients come from a hybrid least-angle regression: LARS fixes the
order in which candidate terms become active, ordinary least squares
refits every prefix of that path, and the corrected leave-one-out error
picks the winner. The expansion degree is adapted upward until the LOO
error stops improving.

Inputs are always mapped through the isoprobabilistic transform first, so
arbitrary marginals (Gumbel, lognormal, ...) ride on the same Hermite
basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class BasisSizeError(ValueError):
    pass


@dataclass(frozen=True)
class PceConfig:
    q_norm: float = 0.75
    max_interaction: int = 2
    max_degree: int = 20
    early_stop_degrees: int = 2     # non-improving degrees before stopping
    basis_cap: int = 100_000
    ridge: float = 1e-8


def hyperbolic_basis(m, p, q=0.75, max_interaction=2, cap=100_000):
    """All multi-indices with q-norm <= p and interaction order bounded.

    Sorted by (total degree, lexicographic). The zero index is always
    included. Raises BasisSizeError past ``cap`` (lower p to recover).
    """
    if p < 0:
        raise ValueError("max degree must be >= 0")
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    if max_interaction < 1:
        raise ValueError("max interaction order must be >= 1")
    out = [(0,) * m]
    r = min(max_interaction, m)

    def admissible(degs):
        return sum(d ** q for d in degs) ** (1.0 / q) <= p + 1e-12

    # enumerate support sets of size k and degree compositions on them
    from itertools import combinations

    def compositions(k, prefix):
        # degrees >= 1 on k remaining slots, pruned by the q-norm bound
        if k == 0:
            yield prefix
            return
        for d in range(1, p + 1):
            nxt = prefix + (d,)
            if sum(t ** q for t in nxt) ** (1.0 / q) > p + 1e-12:
                if d == 1:
                    return
                break
            yield from compositions(k - 1, nxt)

    for k in range(1, r + 1):
        found_any = False
        for support in combinations(range(m), k):
            for degs in compositions(k, ()):
                if not admissible(degs):
                    continue
                alpha = [0] * m
                for dim, d in zip(support, degs):
                    alpha[dim] = d
                out.append(tuple(alpha))
                found_any = True
                if len(out) > cap:
                    raise BasisSizeError(
                        f"basis size exceeds cap {cap}; lower the degree p")
        if not found_any:
            break
    out.sort(key=lambda a: (sum(a), a))
    return np.array(out, dtype=int)


def _hermite_values(u, max_degree):
    """Normalized probabilists' Hermite He_k(u)/sqrt(k!), k=0..max_degree.

    Returns an array of shape (max_degree+1,) + u.shape.
    """
    u = np.asarray(u, dtype=float)
    vals = np.empty((max_degree + 1,) + u.shape)
    vals[0] = 1.0
    if max_degree >= 1:
        vals[1] = u
    he_prev, he = np.ones_like(u), u.copy()
    fact = 1.0
    for k in range(1, max_degree):
        he_prev, he = he, u * he - k * he_prev
        fact *= k + 1
        vals[k + 1] = he / np.sqrt(fact)
    return vals


def evaluate_basis(basis, u):
    """Design matrix Psi with Psi[i, j] = prod_d He_{a_jd}(u_id)/sqrt(a_jd!)."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    basis = np.atleast_2d(basis)
    maxdeg = int(basis.max(initial=0))
    hv = _hermite_values(u, maxdeg)          # (maxdeg+1, n, m)
    psi = np.ones((u.shape[0], basis.shape[0]))
    for d in range(u.shape[1]):
        psi *= hv[basis[:, d], :, d].T
    return psi


# ----------------------------------------------------------------------
# least-angle regression


def lars_path_order(x, y, max_steps):
    """Order in which LARS activates the columns of x.

    Plain least-angle regression (no lasso modification); columns are
    centered and normalized internally. Stops at ``max_steps`` or when the
    equiangular system degenerates (truncated path, not an error).
    """
    x = x - x.mean(axis=0)
    norms = np.linalg.norm(x, axis=0)
    usable = norms > 1e-12
    xs = np.zeros_like(x)
    xs[:, usable] = x[:, usable] / norms[usable]
    y = y - y.mean()

    n, p = xs.shape
    mu = np.zeros(n)
    active: list[int] = []
    inactive = [j for j in range(p) if usable[j]]
    order = []
    for _ in range(min(max_steps, len(inactive))):
        c = xs.T @ (y - mu)
        c_in = c[inactive]
        j_rel = int(np.argmax(np.abs(c_in)))
        big_c = abs(c_in[j_rel])
        if big_c < 1e-14:
            break
        j = inactive[j_rel]
        active.append(j)
        order.append(j)
        inactive.remove(j)

        sa = np.sign(c[active])
        xa = xs[:, active] * sa
        gram = xa.T @ xa
        try:
            w = np.linalg.solve(gram, np.ones(len(active)))
        except np.linalg.LinAlgError:
            order.pop()
            break
        denom = float(np.sum(w))
        if denom <= 0.0:
            order.pop()
            break
        a_a = 1.0 / np.sqrt(denom)
        u_eq = xa @ (a_a * w)
        if not inactive:
            break
        a = xs.T @ u_eq
        gammas = []
        for jj in inactive:
            for val in ((big_c - c[jj]) / (a_a - a[jj]),
                        (big_c + c[jj]) / (a_a + a[jj])):
                if val > 1e-14:
                    gammas.append(val)
        if not gammas:
            break
        mu = mu + min(gammas) * u_eq
    return order


def _ols_with_loo(psi, y):
    """OLS fit with the corrected relative leave-one-out error.

    Returns (coeffs, loo). loo is +inf when the system is underdetermined
    or numerically rank deficient.
    """
    n, p = psi.shape
    if n <= p:
        return None, np.inf
    q, r = np.linalg.qr(psi)
    diag = np.abs(np.diag(r))
    if diag.min() < 1e-12 * max(diag.max(), 1.0):
        return None, np.inf
    coef = np.linalg.solve(r, q.T @ y)
    resid = y - psi @ coef
    h = np.sum(q * q, axis=1)
    denom = np.clip(1.0 - h, 1e-12, None)
    err = float(np.mean((resid / denom) ** 2))
    var_y = float(np.var(y))
    r_inv = np.linalg.solve(r, np.eye(p))
    trace_c = float(np.sum(r_inv * r_inv))
    correction = (n / (n - p)) * (1.0 + trace_c)
    if var_y < 1e-28:
        loo = 0.0 if err < 1e-20 else np.inf
    else:
        loo = err / var_y * correction
    return coef, loo


class PceModel:
    """Sparse polynomial chaos surrogate (mean prediction only)."""

    def __init__(self, basis, coefficients, loo_error, rv, degree, config):
        self.basis = np.atleast_2d(basis)
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.loo_error = float(loo_error)
        self.rv = rv
        self.degree = degree
        self.config = config

    def predict(self, x):
        u = self.rv.to_standard_normal(x)
        return evaluate_basis(self.basis, u) @ self.coefficients

    def predict_mean(self, x):
        return self.predict(x)

    def to_json_dict(self):
        return {
            "basis": self.basis.tolist(),
            "coefficients": self.coefficients.tolist(),
            "loo_error": self.loo_error,
            "degree": self.degree,
        }


def _fit_fixed_degree(psi, y, basis, n):
    """Hybrid LARS at one degree: best OLS prefix of the LARS path."""
    max_steps = min(psi.shape[1] - 1, max(n - 2, 1))
    order = lars_path_order(psi[:, 1:], y, max_steps)
    candidates = [[0]]
    for k in range(1, len(order) + 1):
        candidates.append([0] + [j + 1 for j in order[:k]])
    best = (np.inf, None, None)
    for cols in candidates:
        coef, loo = _ols_with_loo(psi[:, cols], y)
        if coef is not None and loo < best[0]:
            best = (loo, cols, coef)
    return best


def fit_pce_lars(ed, rv, cfg=PceConfig(), max_degree=None):
    """Degree-adaptive sparse PCE via hybrid LARS and corrected LOO."""
    if ed.n < 3:
        raise ValueError("PCE fitting needs at least 3 design points")
    u = rv.to_standard_normal(ed.x)
    y = ed.y
    p_cap = cfg.max_degree if max_degree is None else max_degree

    best_global = (np.inf, None, None, None)  # loo, cols, coef, (basis, p)
    stall = 0
    for p in range(1, p_cap + 1):
        basis = hyperbolic_basis(rv.dim, p, cfg.q_norm, cfg.max_interaction,
                                 cfg.basis_cap)
        psi = evaluate_basis(basis, u)
        loo, cols, coef = _fit_fixed_degree(psi, y, basis, ed.n)
        if loo < best_global[0]:
            best_global = (loo, cols, coef, (basis, p))
            stall = 0
        else:
            stall += 1
            if stall >= cfg.early_stop_degrees:
                break
    loo, cols, coef, meta = best_global
    if meta is None:
        # degenerate data (e.g. constant y): constant-only model
        basis = hyperbolic_basis(rv.dim, 0, cfg.q_norm, cfg.max_interaction)
        return PceModel(basis, [float(np.mean(y))], 0.0, rv, 0, cfg)
    basis, p = meta
    return PceModel(basis[cols], coef, loo, rv, p, cfg)


# ----------------------------------------------------------------------
# bootstrap ensemble


class BootstrapEnsemble:
    """B coefficient sets refit on with-replacement resamples of the design.

    The basis is frozen from the base model; only coefficients move. Used
    by the bootstrap-fraction learning function.
    """

    def __init__(self, basis, coefficient_matrix, rv, ridge_flagged):
        self.basis = basis
        self.coefficient_matrix = coefficient_matrix  # (P, B)
        self.rv = rv
        self.ridge_flagged = ridge_flagged

    @property
    def n_replicates(self):
        return self.coefficient_matrix.shape[1]

    def predict_replicates(self, x):
        """Replicate predictions, shape (n_points, B)."""
        u = self.rv.to_standard_normal(x)
        return evaluate_basis(self.basis, u) @ self.coefficient_matrix

    def predict_replicates_from_u(self, u):
        return evaluate_basis(self.basis, u) @ self.coefficient_matrix


def bootstrap_replicates(ed, rv, base, n_replicates, rng, ridge=1e-8):
    """Refit the base model's active basis on B resampled designs."""
    if n_replicates < 2:
        raise ValueError("need at least 2 bootstrap replicates")
    u = rv.to_standard_normal(ed.x)
    psi = evaluate_basis(base.basis, u)
    n, p = psi.shape
    coefs = np.empty((p, n_replicates))
    flagged = False
    for b in range(n_replicates):
        idx = rng.integers(0, n, size=n)
        a = psi[idx]
        yb = ed.y[idx]
        coef, rank = _lstsq_rank(a, yb)
        if rank < p:
            flagged = True
            coef = np.linalg.solve(a.T @ a + ridge * np.eye(p), a.T @ yb)
        coefs[:, b] = coef
    return BootstrapEnsemble(base.basis, coefs, rv, flagged)


def _lstsq_rank(a, y):
    coef, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
    return coef, rank
