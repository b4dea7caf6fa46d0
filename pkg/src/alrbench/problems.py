"""Benchmark problem registry: analytic limit states, finite element
problems and reference solutions.

Problems load from a JSON registry file (a packaged default plus optional
user overrides). Entries either name a built-in limit state, point at an
external Python definition file, or are stubs that carry only metadata
and a reference probability (black-box repository problems whose closed
forms live elsewhere).
"""

from __future__ import annotations

import importlib.util
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .distributions import Marginal, RandomVector
from .estimators import beta_from_pf
from . import frame as _frame
from . import truss as _truss


class StubProblemError(RuntimeError):
    """The limit state of a registry stub was invoked without a definition."""


@dataclass(frozen=True)
class BenchmarkProblem:
    id: int
    name: str
    dim: int
    rv: RandomVector | None
    lsf: object                    # vectorized callable (n, M) -> (n,)
    pf_ref: float
    reference_verified: bool
    tags: tuple[str, ...]
    is_stub: bool = False

    @property
    def beta_ref(self):
        return beta_from_pf(self.pf_ref)

    def __post_init__(self):
        if not 0.0 < self.pf_ref < 1.0:
            raise ValueError("reference probability must lie in (0, 1)")


# ----------------------------------------------------------------------
# built-in analytic limit states


def four_branch(x):
    """Series system with two parabolic and two linear branches."""
    x = np.atleast_2d(x)
    x1, x2 = x[:, 0], x[:, 1]
    s = (x1 + x2) / np.sqrt(2.0)
    d = x1 - x2
    g1 = 3.0 + 0.1 * d * d - s
    g2 = 3.0 + 0.1 * d * d + s
    g3 = d + 6.0 / np.sqrt(2.0)
    g4 = -d + 6.0 / np.sqrt(2.0)
    return np.min(np.stack([g1, g2, g3, g4]), axis=0)


def hat_function(x):
    """Smooth 2-D surface with a single curved failure front."""
    x = np.atleast_2d(x)
    x1, x2 = x[:, 0], x[:, 1]
    return 20.0 - (x1 - x2) ** 2 - 8.0 * (x1 + x2 - 3.5) ** 3


def damped_oscillator(x):
    """Peak-response margin of a primary/secondary two-degree oscillator.

    Inputs: m_p, m_s, k_p, k_s, zeta_p, zeta_s, F_s, S_0 (all positive).
    Peak factor 3 on the stationary secondary-spring force response.
    """
    x = np.atleast_2d(x)
    mp_, ms, kp, ks, zp, zs, fs, s0 = (x[:, i] for i in range(8))
    wp = np.sqrt(kp / mp_)
    ws = np.sqrt(ks / ms)
    gamma = ms / mp_
    wa = 0.5 * (wp + ws)
    za = 0.5 * (zp + zs)
    theta = (wp - ws) / wa
    mean_sq = (np.pi * s0 / (4.0 * zs * ws**3)) * (
        za * zs / (zp * zs * (4.0 * za**2 + theta**2) + gamma * za**2)
    ) * ((zp * wp**3 + zs * ws**3) * wp / (4.0 * za * wa**4))
    return fs - 3.0 * ks * np.sqrt(mean_sq)


def nonlinear_oscillator(x):
    """Undamped oscillator under a rectangular pulse, displacement margin.

    Inputs: m, c1, c2, r, F1, t1. Failure when the peak displacement of
    the two-spring oscillator exceeds three times the yield threshold r.
    """
    x = np.atleast_2d(x)
    m, c1, c2, r, f1, t1 = (x[:, i] for i in range(6))
    w0 = np.sqrt((c1 + c2) / m)
    peak = np.abs(2.0 * f1 / (m * w0**2) * np.sin(0.5 * w0 * t1))
    return 3.0 * r - peak


def vnl_function(x):
    """40-D V-shaped limit state with a sinusoidal perturbation.

    Two symmetric failure half-spaces along the mean direction, roughened
    by a smooth nonlinearity spread over every coordinate.
    """
    x = np.atleast_2d(x)
    m = x.shape[1]
    lin = np.abs(x.sum(axis=1)) / np.sqrt(m)
    return 3.2 + 0.5 * np.mean(np.sin(2.0 * x), axis=1) - lin


_TOWER_CACHE: dict[str, _truss.TrussModel] = {}


def _tower_model(geometry_path=None):
    key = str(geometry_path) if geometry_path else "<packaged>"
    if key not in _TOWER_CACHE:
        if geometry_path:
            text = Path(geometry_path).read_text()
        else:
            text = resources.files("alrbench.data").joinpath(
                "tower_demo.txt").read_text()
        _TOWER_CACHE[key] = _truss.parse_geometry(text)
    return _TOWER_CACHE[key]


def tower_displacement_lsf(x, geometry_path=None):
    """g = 0.07 m - |tip displacement|. Inputs: A1..A4, E1..E4, F, P, alpha(deg)."""
    x = np.atleast_2d(x)
    model = _tower_model(geometry_path)
    out = np.empty(x.shape[0])
    for i, row in enumerate(x):
        tip, _ = _truss.tower_response(
            model, row[0:4], row[4:8], row[8], row[9], np.deg2rad(row[10]))
        out[i] = 0.07 - tip
    return out


def tower_stress_lsf(x, geometry_path=None):
    """g = f_y - max |axial stress|. Inputs: A1..A4, E, F, P, alpha(deg), f_y."""
    x = np.atleast_2d(x)
    model = _tower_model(geometry_path)
    out = np.empty(x.shape[0])
    for i, row in enumerate(x):
        moduli = np.repeat(row[4], 4)
        _, smax = _truss.tower_response(
            model, row[0:4], moduli, row[5], row[6], np.deg2rad(row[7]))
        out[i] = row[8] - smax
    return out


_BUILTIN_LSF = {
    "four_branch": four_branch,
    "hat_function": hat_function,
    "damped_oscillator": damped_oscillator,
    "nonlinear_oscillator": nonlinear_oscillator,
    "vnl_function": vnl_function,
    "frame_sway": _frame.sway_limit_state,
    "tower_displacement": tower_displacement_lsf,
    "tower_stress": tower_stress_lsf,
}


# ----------------------------------------------------------------------
# registry loading


def _marginal_from_spec(spec):
    family = spec["family"]
    if "params" in spec:
        if family == "uniform":
            return Marginal.uniform(*spec["params"])
        return Marginal(family, tuple(float(v) for v in spec["params"]))
    return Marginal.from_moments(family, float(spec["mean"]), float(spec["cov"]))


def _load_external_lsf(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"external limit state file {path} not found")
    spec = importlib.util.spec_from_file_location(f"alrbench_ext_{path.stem}", path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    if not hasattr(module, "limit_state"):
        raise AttributeError(
            f"external definition {path} must expose a 'limit_state' callable")
    return module.limit_state


def _make_stub_lsf(pid, name):
    def missing(_x):
        raise StubProblemError(
            f"problem #{pid} ({name}) is a registry stub; supply an external "
            "definition file to evaluate it")
    return missing


def _problem_tags(dim, pf_ref):
    beta = beta_from_pf(pf_ref)
    return (
        "high_dim" if dim >= 20 else "low_dim",
        "high_beta" if beta >= 3.5 else "low_beta",
    )


def load_registry(path=None, geometry_path=None):
    """Build the benchmark problem list from a JSON registry file.

    ``path`` overrides the packaged registry; ``geometry_path`` overrides
    the packaged tower geometry for the finite element problems.
    """
    if path:
        text = Path(path).read_text()
    else:
        text = resources.files("alrbench.data").joinpath("problems.json").read_text()
    entries = json.loads(text)
    problems = []
    for e in entries:
        pid, name, dim, pf_ref = e["id"], e["name"], e["dim"], float(e["pf_ref"])
        tags = _problem_tags(dim, pf_ref)
        if e.get("stub"):
            problems.append(BenchmarkProblem(
                pid, name, dim, None, _make_stub_lsf(pid, name), pf_ref,
                reference_verified=False, tags=tags, is_stub=True))
            continue
        spec = e["marginals"]
        if isinstance(spec, str):
            if not spec.startswith("std_normal_"):
                raise ValueError(f"problem #{pid}: unknown marginal shorthand {spec!r}")
            count = int(spec.removeprefix("std_normal_"))
            marginals = tuple(Marginal("gaussian", (0.0, 1.0)) for _ in range(count))
        else:
            marginals = tuple(_marginal_from_spec(s) for s in spec)
        rv = RandomVector(marginals)
        if rv.dim != dim:
            raise ValueError(f"problem #{pid}: marginal count != dim")
        if "external" in e:
            lsf = _load_external_lsf(e["external"])
        else:
            key = e["lsf"]
            base = _BUILTIN_LSF[key]
            if key.startswith("tower_"):
                lsf = (lambda f, gp: lambda x: f(x, geometry_path=gp))(
                    base, geometry_path)
            else:
                lsf = base
        problems.append(BenchmarkProblem(
            pid, name, dim, rv, lsf, pf_ref,
            reference_verified=bool(e.get("reference_verified", False)),
            tags=tags))
    return problems


def registry(path=None, geometry_path=None):
    """Problems keyed by id."""
    return {p.id: p for p in load_registry(path, geometry_path)}


def get_problem(pid, path=None, geometry_path=None):
    reg = registry(path, geometry_path)
    if pid not in reg:
        raise KeyError(f"unknown problem id {pid}")
    return reg[pid]
