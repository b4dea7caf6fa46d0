"""Ordinary and universal Kriging with anisotropic Gaussian correlation.

Hyperparameters are found by maximizing the concentrated log-likelihood
with a differential-evolution search refined by Nelder-Mead, both over
log10 correlation lengths in standardized input space. Trend coefficients
and the process variance follow from their closed-form ML expressions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.linalg import cho_factor, cho_solve, LinAlgError


class KrigingFitError(RuntimeError):
    pass


class DuplicatePointError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentalDesign:
    """Paired inputs and limit state evaluations.

    The only place the expensive model is ever touched. ``n_initial``
    separates the space-filling seed points from enrichment points.
    """

    x: np.ndarray
    y: np.ndarray
    n_initial: int | None = None

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if x.shape[0] != y.shape[0]:
            raise ValueError("x and y row counts differ")
        if x.shape[0] < 1:
            raise ValueError("empty experimental design")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.n_initial is None:
            object.__setattr__(self, "n_initial", x.shape[0])
        _check_duplicates(x)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def dim(self):
        return self.x.shape[1]

    def append(self, x_new, y_new):
        x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
        y_new = np.atleast_1d(np.asarray(y_new, dtype=float))
        return ExperimentalDesign(
            np.vstack([self.x, x_new]),
            np.concatenate([self.y, y_new]),
            n_initial=self.n_initial,
        )


def _check_duplicates(x, tol=1e-12):
    std = x.std(axis=0)
    std[std == 0.0] = 1.0
    z = x / std
    n = z.shape[0]
    if n > 1:
        d2 = np.sum((z[:, None, :] - z[None, :, :]) ** 2, axis=2)
        d2[np.diag_indices(n)] = np.inf
        if np.min(d2) <= tol * tol:
            i, j = np.unravel_index(np.argmin(d2), d2.shape)
            raise DuplicatePointError(f"duplicate design rows {i} and {j}")


@dataclass(frozen=True)
class KrigingConfig:
    theta_bounds: tuple[float, float] = (1e-3, 1e2)
    de_popsize: int = 30
    de_generations: int = 50
    nugget: float = 1e-10
    nugget_max: float = 1e-6
    seed: int = 0


class KrigingModel:
    """Fitted Gaussian process with stored factorizations.

    Immutable after fitting; predictions are vectorized over query batches.
    Inputs are standardized per dimension before the kernel is applied and
    outputs are de-standardized on the way out.
    """

    def __init__(self, ed, theta, beta, sigma2, chol, f_alpha, ftrinvf_inv,
                 x_mean, x_std, y_mean, y_std, trend_fn, F, nugget,
                 log_likelihood):
        self.ed = ed
        self.theta = theta                    # correlation lengths, standardized space
        self.beta = beta                      # trend coefficients
        self.sigma2 = sigma2                  # process variance (standardized y)
        self._chol = chol                     # cho_factor of R
        self._alpha = f_alpha                 # R^-1 (y - F beta)
        self._ftrinvf_inv = ftrinvf_inv       # (F' R^-1 F)^-1
        self._x_mean = x_mean
        self._x_std = x_std
        self._y_mean = y_mean
        self._y_std = y_std
        self._trend_fn = trend_fn             # physical x -> regressor matrix
        self._F = F
        self.nugget = nugget
        self.log_likelihood = log_likelihood
        self._z_train = (ed.x - x_mean) / x_std
        # prediction works through an explicit R^-1; R is small and
        # nugget-stabilized, and GEMM beats repeated triangular solves on
        # the 1e5-point batches the estimators throw at the model
        n = ed.n
        eye = np.eye(n)
        self._rinv = cho_solve(chol, eye)
        self._ftrinv = F.T @ self._rinv       # (p, n)
        self._zt_scaled = self._z_train / theta[None, :]
        self._zt_sq = np.sum(self._zt_scaled**2, axis=1)

    # ------------------------------------------------------------------
    def _cross_corr(self, x):
        z = (np.atleast_2d(x) - self._x_mean) / self._x_std
        zq = z / self.theta[None, :]
        d2 = (np.sum(zq * zq, axis=1)[:, None] + self._zt_sq[None, :]
              - 2.0 * zq @ self._zt_scaled.T)
        return np.exp(-np.clip(d2, 0.0, None))

    def predict_mean(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = self._cross_corr(x)
        f = self._trend_fn(x)
        m = f @ self.beta + r @ self._alpha
        return m * self._y_std + self._y_mean

    def predict_variance(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self._variance_from_parts(self._cross_corr(x), self._trend_fn(x))

    def _variance_from_parts(self, r, f):
        rinv_r = self._rinv @ r.T              # (n, nq)
        quad = np.einsum("ij,ji->i", r, rinv_r)
        u = self._ftrinv @ r.T - f.T           # (p, nq)
        trend_term = np.einsum("ij,ji->i", u.T, self._ftrinvf_inv @ u)
        var = self.sigma2 * (1.0 - quad + trend_term)
        return np.clip(var, 0.0, None) * self._y_std**2

    def predict(self, x):
        """Mean and variance sharing one cross-correlation pass."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = self._cross_corr(x)
        f = self._trend_fn(x)
        mean = (f @ self.beta + r @ self._alpha) * self._y_std + self._y_mean
        return mean, self._variance_from_parts(r, f)

    def to_json_dict(self):
        """Debug dump of the fitted parameters and design."""
        return {
            "theta": self.theta.tolist(),
            "trend_coefficients": np.atleast_1d(self.beta).tolist(),
            "process_variance": float(self.sigma2 * self._y_std**2),
            "nugget": self.nugget,
            "x": self.ed.x.tolist(),
            "y": self.ed.y.tolist(),
        }


def _constant_trend(x):
    return np.ones((np.atleast_2d(x).shape[0], 1))


def _neg_concentrated_loglik(log10_theta, z, y, F, nugget):
    theta = 10.0 ** np.asarray(log10_theta, dtype=float)
    n = z.shape[0]
    R = _corr_matrix(z, theta, nugget)
    try:
        chol = cho_factor(R, lower=True)
    except LinAlgError:
        return 1e30, None
    rinv_y = cho_solve(chol, y)
    rinv_F = cho_solve(chol, F)
    A = F.T @ rinv_F
    try:
        beta = np.linalg.solve(A, F.T @ rinv_y)
    except LinAlgError:
        return 1e30, None
    resid = y - F @ beta
    sigma2 = float(resid @ cho_solve(chol, resid)) / n
    sigma2 = max(sigma2, 1e-300)
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    nll = n * np.log(sigma2) + logdet
    return nll, (chol, beta, sigma2, A)


def _corr_matrix(z, theta, nugget):
    n = z.shape[0]
    d2 = np.zeros((n, n))
    for d in range(z.shape[1]):
        diff = z[:, d, None] - z[None, :, d]
        d2 += (diff / theta[d]) ** 2
    R = np.exp(-d2)
    R[np.diag_indices(n)] += nugget
    return R


def concentrated_loglik(ed, theta, cfg=KrigingConfig(), trend_fn=_constant_trend):
    """Concentrated log-likelihood of given correlation lengths (for tests)."""
    z, y, x_mean, x_std, y_mean, y_std = _standardize(ed)
    F = trend_fn(ed.x)
    nll, aux = _neg_concentrated_loglik(np.log10(np.asarray(theta, float)),
                                        z, y, F, cfg.nugget)
    return -nll


def _standardize(ed):
    x_mean = ed.x.mean(axis=0)
    x_std = ed.x.std(axis=0)
    x_std[x_std < 1e-15] = 1.0
    y_mean = ed.y.mean()
    y_std = ed.y.std()
    if y_std < 1e-15:
        y_std = 1.0
    z = (ed.x - x_mean) / x_std
    y = (ed.y - y_mean) / y_std
    return z, y, x_mean, x_std, y_mean, y_std


def fit_kriging(ed, cfg=KrigingConfig(), trend_fn=_constant_trend):
    """Fit a Kriging model by maximum likelihood.

    ``trend_fn`` maps physical inputs to the regressor matrix; the default
    constant regressor gives ordinary Kriging. Raises KrigingFitError when
    the correlation matrix stays ill-conditioned at the maximum nugget.
    """
    if ed.n < 2:
        raise ValueError("kriging needs at least 2 design points")
    z, y, x_mean, x_std, y_mean, y_std = _standardize(ed)
    F = trend_fn(ed.x)
    m = ed.dim
    lo, hi = np.log10(cfg.theta_bounds[0]), np.log10(cfg.theta_bounds[1])

    nugget = cfg.nugget
    while True:
        def objective(lt):
            return _neg_concentrated_loglik(lt, z, y, F, nugget)[0]

        rng = np.random.default_rng(cfg.seed)
        init = rng.uniform(lo, hi, size=(max(cfg.de_popsize, 5), m))
        result = optimize.differential_evolution(
            objective,
            bounds=[(lo, hi)] * m,
            init=init,
            maxiter=cfg.de_generations,
            seed=cfg.seed,
            tol=1e-8,
            polish=False,
        )
        polished = optimize.minimize(
            objective, result.x, method="Nelder-Mead",
            options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": 200 * m},
        )
        best = polished.x if polished.fun <= result.fun else result.x
        best = np.clip(best, lo, hi)
        nll, aux = _neg_concentrated_loglik(best, z, y, F, nugget)
        if aux is not None:
            break
        if nugget >= cfg.nugget_max:
            R = _corr_matrix(z, 10.0 ** best, nugget)
            cond = np.linalg.cond(R)
            raise KrigingFitError(
                f"correlation matrix ill-conditioned (cond={cond:.3e}) "
                f"at maximum nugget {cfg.nugget_max:g}")
        nugget = min(nugget * 10.0, cfg.nugget_max)

    chol, beta, sigma2, A = aux
    theta = 10.0 ** best
    try:
        ftrinvf_inv = np.linalg.inv(A)
    except LinAlgError as exc:
        raise KrigingFitError(f"singular trend normal matrix: {exc}") from exc
    alpha = cho_solve(chol, y - F @ beta)
    return KrigingModel(
        ed=ed, theta=theta, beta=beta, sigma2=sigma2, chol=chol,
        f_alpha=alpha, ftrinvf_inv=ftrinvf_inv,
        x_mean=x_mean, x_std=x_std, y_mean=y_mean, y_std=y_std,
        trend_fn=trend_fn, F=F, nugget=nugget, log_likelihood=-nll,
    )
