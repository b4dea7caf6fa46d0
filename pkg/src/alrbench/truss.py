"""Linear 3-D truss finite elements for the transmission-tower problems.

Bars are pin-jointed axial members: each one contributes (EA/L) d d^T to
the global stiffness in the bar direction d. Supports clamp all three
translations of the listed nodes. Geometry comes from a plain-text file
with NODES / BARS / GROUPS / SUPPORTS sections; a generated demo tower
with 51 nodes and 172 bars in 4 member groups ships with the package.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

N_GROUPS = 4


class GeometryError(ValueError):
    pass


class SingularStiffnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrussModel:
    nodes: np.ndarray      # (n_nodes, 3) coordinates in m
    bars: np.ndarray       # (n_bars, 2) node ids
    groups: np.ndarray     # (n_bars,) member group in 1..4
    supports: np.ndarray   # fixed node ids (all translations clamped)

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))
        object.__setattr__(self, "bars", np.asarray(self.bars, dtype=int))
        object.__setattr__(self, "groups", np.asarray(self.groups, dtype=int))
        object.__setattr__(self, "supports", np.asarray(self.supports, dtype=int))
        if self.bars.shape[0] != self.groups.shape[0]:
            raise GeometryError("group list must cover every bar")
        if set(np.unique(self.groups)) - set(range(1, N_GROUPS + 1)):
            raise GeometryError("groups must be numbered 1..4")
        if len(set(np.unique(self.groups))) != N_GROUPS:
            raise GeometryError("all 4 groups must be used")
        lengths = self.lengths()
        if np.any(lengths <= 0.0):
            raise GeometryError("zero-length bar in geometry")

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_bars(self):
        return self.bars.shape[0]

    @property
    def n_dof(self):
        return 3 * self.n_nodes

    def lengths(self):
        d = self.nodes[self.bars[:, 1]] - self.nodes[self.bars[:, 0]]
        return np.linalg.norm(d, axis=1)

    def directions(self):
        d = self.nodes[self.bars[:, 1]] - self.nodes[self.bars[:, 0]]
        return d / np.linalg.norm(d, axis=1)[:, None]

    def free_dofs(self):
        fixed = np.concatenate([3 * self.supports + k for k in range(3)])
        return np.setdiff1d(np.arange(self.n_dof), fixed)


def assemble_stiffness(model, ea_per_bar):
    """Global stiffness matrix (dense, all DOFs) for given EA per bar."""
    k = np.zeros((model.n_dof, model.n_dof))
    dirs = model.directions()
    lengths = model.lengths()
    for b, (i, j) in enumerate(model.bars):
        coef = ea_per_bar[b] / lengths[b]
        dd = coef * np.outer(dirs[b], dirs[b])
        di = slice(3 * i, 3 * i + 3)
        dj = slice(3 * j, 3 * j + 3)
        k[di, di] += dd
        k[dj, dj] += dd
        k[di, dj] -= dd
        k[dj, di] -= dd
    return k


def solve_truss(model, e_per_bar, a_per_bar, forces):
    """Static solve. ``forces`` is a (n_dof,) global load vector.

    Returns (displacements, axial_stresses, reactions). Raises
    SingularStiffnessError naming the mechanism count when the constrained
    stiffness is not positive definite.
    """
    ea = np.asarray(e_per_bar, float) * np.asarray(a_per_bar, float)
    if np.any(ea <= 0.0):
        raise ValueError("every bar needs positive EA")
    k = assemble_stiffness(model, ea)
    free = model.free_dofs()
    kff = k[np.ix_(free, free)]
    try:
        c = np.linalg.cholesky(kff)
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(kff)
        n_mech = int(np.sum(eig <= 1e-9 * max(eig.max(), 1.0)))
        raise SingularStiffnessError(
            f"stiffness not positive definite: {n_mech} mechanism mode(s)"
        ) from None
    u = np.zeros(model.n_dof)
    rhs = np.asarray(forces, float)[free]
    u[free] = np.linalg.solve(c.T, np.linalg.solve(c, rhs))

    dirs = model.directions()
    lengths = model.lengths()
    ui = u.reshape(-1, 3)[model.bars[:, 0]]
    uj = u.reshape(-1, 3)[model.bars[:, 1]]
    strains = np.einsum("bi,bi->b", uj - ui, dirs) / lengths
    stresses = np.asarray(e_per_bar, float) * strains
    reactions = k @ u - np.asarray(forces, float)
    return u, stresses, reactions


# ----------------------------------------------------------------------
# geometry file format


def parse_geometry(text):
    """Parse the whitespace-delimited NODES/BARS/GROUPS/SUPPORTS format.

    NODES lines:    id x y z
    BARS lines:     id node_i node_j
    GROUPS lines:   bar_id group (group in 1..4)
    SUPPORTS lines: node_id
    '#' starts a comment; ids must be contiguous from 0.
    """
    section = None
    nodes, bars, groups, supports = {}, {}, {}, []
    for raw in io.StringIO(text):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.upper() in ("NODES", "BARS", "GROUPS", "SUPPORTS"):
            section = line.upper()
            continue
        parts = line.split()
        if section == "NODES":
            nodes[int(parts[0])] = [float(v) for v in parts[1:4]]
        elif section == "BARS":
            bars[int(parts[0])] = (int(parts[1]), int(parts[2]))
        elif section == "GROUPS":
            groups[int(parts[0])] = int(parts[1])
        elif section == "SUPPORTS":
            supports.append(int(parts[0]))
        else:
            raise GeometryError(f"data line before any section: {line!r}")
    for name, d in (("node", nodes), ("bar", bars)):
        if sorted(d) != list(range(len(d))):
            raise GeometryError(f"{name} ids must be contiguous from 0")
    if sorted(groups) != sorted(bars):
        raise GeometryError("GROUPS must list every bar exactly once")
    node_arr = np.array([nodes[i] for i in range(len(nodes))])
    bar_arr = np.array([bars[i] for i in range(len(bars))], dtype=int)
    group_arr = np.array([groups[i] for i in range(len(bars))], dtype=int)
    return TrussModel(node_arr, bar_arr, group_arr, np.array(sorted(supports)))


def render_geometry(model, header=""):
    out = []
    if header:
        out.extend(f"# {line}" for line in header.splitlines())
    out.append("NODES")
    for i, (x, y, z) in enumerate(model.nodes):
        out.append(f"{i} {x:.6f} {y:.6f} {z:.6f}")
    out.append("BARS")
    for i, (a, b) in enumerate(model.bars):
        out.append(f"{i} {a} {b}")
    out.append("GROUPS")
    for i, g in enumerate(model.groups):
        out.append(f"{i} {g}")
    out.append("SUPPORTS")
    for s in model.supports:
        out.append(str(s))
    return "\n".join(out) + "\n"


# ----------------------------------------------------------------------
# demo tower: 51 nodes, 172 bars, 4 groups
#
# group 1: face/plan diagonals   group 2: ring horizontals
# group 3: legs + apex pyramid   group 4: cross-arm members


def build_demo_tower(n_panels=10, base_halfwidth=1.6, top_halfwidth=0.45,
                     panel_height=2.4, apex_height=1.6, arm_reach=1.5,
                     arm_drop=1.2):
    """Construct the packaged demo tower lattice programmatically."""
    nodes = []
    widths = np.linspace(base_halfwidth, top_halfwidth, n_panels + 1)
    for k in range(n_panels + 1):
        w, z = widths[k], k * panel_height
        nodes += [(w, w, z), (-w, w, z), (-w, -w, z), (w, -w, z)]
    ring = lambda k, c: 4 * k + c
    apex = len(nodes)
    nodes.append((0.0, 0.0, n_panels * panel_height + apex_height))

    # cross arms at ring 9 extending along +/- x
    z9 = 9 * panel_height
    w9 = widths[9]
    arm_nodes = {}
    for side, s in (("right", 1.0), ("left", -1.0)):
        m = len(nodes); nodes.append((s * (w9 + arm_reach), 0.0, z9))
        t = len(nodes); nodes.append((s * (w9 + 2 * arm_reach), 0.0, z9))
        b = len(nodes); nodes.append((s * (w9 + arm_reach), 0.0, z9 - arm_drop))
        arm_nodes[side] = (m, t, b)

    bars, groups = [], []

    def add(i, j, g):
        bars.append((i, j))
        groups.append(g)

    for k in range(n_panels):              # legs
        for c in range(4):
            add(ring(k, c), ring(k + 1, c), 3)
    for c in range(4):                     # apex pyramid
        add(ring(n_panels, c), apex, 3)
    for k in range(1, n_panels + 1):       # ring horizontals
        for c in range(4):
            add(ring(k, c), ring(k, (c + 1) % 4), 2)
    for k in range(n_panels):              # one face diagonal per panel face
        for c in range(4):
            lo, hi = ring(k, c), ring(k + 1, (c + 1) % 4)
            if (k + c) % 2:
                lo, hi = ring(k, (c + 1) % 4), ring(k + 1, c)
            add(lo, hi, 1)
    for k in range(2):                     # X-brace the bottom two panels
        for c in range(4):
            lo, hi = ring(k, c), ring(k + 1, (c + 1) % 4)
            if (k + c) % 2 == 0:
                lo, hi = ring(k, (c + 1) % 4), ring(k + 1, c)
            add(lo, hi, 1)
    for k in range(1, n_panels + 1):       # plan diagonals
        add(ring(k, 0), ring(k, 2), 1)
        add(ring(k, 1), ring(k, 3), 1)

    # each arm node is anchored by at least three non-coplanar bars
    side_corners = {"right": (0, 3), "left": (1, 2)}
    for side, (m, t, b) in arm_nodes.items():
        c_a, c_b = side_corners[side]
        add(m, ring(9, c_a), 4)
        add(m, ring(9, c_b), 4)
        add(m, ring(10, c_a), 4)
        add(m, ring(10, c_b), 4)
        add(b, m, 4)
        add(b, ring(8, c_a), 4)
        add(b, ring(8, c_b), 4)
        add(t, m, 4)
        add(t, b, 4)
        add(t, ring(9, c_a), 4)

    return TrussModel(np.array(nodes), np.array(bars, dtype=int),
                      np.array(groups, dtype=int), np.array([0, 1, 2, 3]))


def tower_load_vector(model, wind_force, hand_load, angle_rad,
                      apex_node=44, tips=(46, 49)):
    """Tip wind force at ``angle_rad`` from the arm axis plus vertical hand
    loads at the two arm tips."""
    f = np.zeros(model.n_dof)
    f[3 * apex_node + 0] = wind_force * np.cos(angle_rad)
    f[3 * apex_node + 1] = wind_force * np.sin(angle_rad)
    for t in tips:
        f[3 * t + 2] -= hand_load
    return f


def tower_response(model, areas_by_group, moduli_by_group, wind_force,
                   hand_load, angle_rad):
    """Tip displacement magnitude and peak |axial stress| for one realization.

    ``areas_by_group`` / ``moduli_by_group`` map group 1..4 values onto
    bars. Returns (tip_displacement, max_abs_stress).
    """
    a = np.asarray(areas_by_group, float)[model.groups - 1]
    e = np.asarray(moduli_by_group, float)[model.groups - 1]
    f = tower_load_vector(model, wind_force, hand_load, angle_rad)
    u, stresses, _ = solve_truss(model, e, a, f)
    tip = np.linalg.norm(u.reshape(-1, 3)[44])
    return tip, float(np.max(np.abs(stresses)))
