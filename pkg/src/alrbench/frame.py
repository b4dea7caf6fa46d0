"""Linear elastic 2-D frame for the 21-variable sway benchmark.

Three bays by five stories of Euler-Bernoulli members, grouped into four
column types and four beam types. Two material moduli (columns, beams),
eight moments of inertia, eight areas and three lateral floor loads give
the 21 random inputs. The response is the horizontal sway at the roof.

The element matrices are precomputed in global coordinates and scaled by
per-sample EA and EI, so the solver vectorizes over realization batches.
"""

from __future__ import annotations

import numpy as np

BAY = 7.62           # m
STORY = 3.6576       # m
N_COLS = 4           # column lines
N_STORIES = 5
SWAY_LIMIT = 0.061   # m

# element groups: 1-4 columns (ext/int x lower/upper), 5-8 beams by floor
COLUMN_GROUPS = 4
BEAM_GROUPS = 4


def _node(level, col):
    return level * N_COLS + col


def _build_topology():
    nodes = np.array([
        (col * BAY, level * STORY)
        for level in range(N_STORIES + 1)
        for col in range(N_COLS)
    ])
    elements = []   # (node_i, node_j, group)
    for story in range(N_STORIES):
        for col in range(N_COLS):
            exterior = col in (0, N_COLS - 1)
            lower = story < 3
            group = (0 if exterior and lower else
                     1 if not exterior and lower else
                     2 if exterior else 3)
            elements.append((_node(story, col), _node(story + 1, col), group))
    floor_group = {1: 4, 2: 4, 3: 5, 4: 6, 5: 7}
    for level in range(1, N_STORIES + 1):
        for col in range(N_COLS - 1):
            elements.append((_node(level, col), _node(level, col + 1),
                             floor_group[level]))
    return nodes, elements


_NODES, _ELEMENTS = _build_topology()
N_DOF = 3 * len(_NODES)
_FIXED = np.concatenate([3 * np.arange(N_COLS) + k for k in range(3)])
_FREE = np.setdiff1d(np.arange(N_DOF), _FIXED)
_TOP_SWAY_DOF = 3 * _node(N_STORIES, 0)  # x displacement, roof left node
# lateral loads act at the left node of the top three floors
LOAD_DOFS = (3 * _node(5, 0), 3 * _node(4, 0), 3 * _node(3, 0))


def _element_base_matrices():
    """Per element: global-coordinate matrices scaling with EA and EI."""
    ma_parts = np.zeros((len(_ELEMENTS), N_DOF, N_DOF))
    mi_parts = np.zeros((len(_ELEMENTS), N_DOF, N_DOF))
    for e, (i, j, _g) in enumerate(_ELEMENTS):
        xi, yi = _NODES[i]
        xj, yj = _NODES[j]
        length = float(np.hypot(xj - xi, yj - yi))
        c, s = (xj - xi) / length, (yj - yi) / length
        t = np.zeros((6, 6))
        rot = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
        t[:3, :3] = rot
        t[3:, 3:] = rot
        ka = np.zeros((6, 6))
        ka[0, 0] = ka[3, 3] = 1.0 / length
        ka[0, 3] = ka[3, 0] = -1.0 / length
        l2, l3 = length**2, length**3
        ki = np.array([
            [0, 0, 0, 0, 0, 0],
            [0, 12 / l3, 6 / l2, 0, -12 / l3, 6 / l2],
            [0, 6 / l2, 4 / length, 0, -6 / l2, 2 / length],
            [0, 0, 0, 0, 0, 0],
            [0, -12 / l3, -6 / l2, 0, 12 / l3, -6 / l2],
            [0, 6 / l2, 2 / length, 0, -6 / l2, 4 / length],
        ])
        ka_g = t.T @ ka @ t
        ki_g = t.T @ ki @ t
        dofs = np.r_[3 * i:3 * i + 3, 3 * j:3 * j + 3]
        for a in range(6):
            for b in range(6):
                ma_parts[e, dofs[a], dofs[b]] += ka_g[a, b]
                mi_parts[e, dofs[a], dofs[b]] += ki_g[a, b]
    return ma_parts, mi_parts


_MA, _MI = _element_base_matrices()
_MA_FREE = _MA[:, _FREE][:, :, _FREE]
_MI_FREE = _MI[:, _FREE][:, :, _FREE]
_GROUPS = np.array([g for _i, _j, g in _ELEMENTS])
_SWAY_INDEX = int(np.flatnonzero(_FREE == _TOP_SWAY_DOF)[0])
_LOAD_INDICES = [int(np.flatnonzero(_FREE == d)[0]) for d in LOAD_DOFS]


def roof_sway(x, chunk=2000):
    """Roof sway (m) for realizations x of shape (n, 21).

    Column order: P1 P2 P3 (N, lateral loads top floor downward),
    E_col E_beam (Pa), I1..I8 (m^4), A1..A8 (m^2), groups ordered columns
    ext-lower, int-lower, ext-upper, int-upper then beams floors 1+2, 3, 4, 5.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    out = np.empty(n)
    for start in range(0, n, chunk):
        part = x[start:start + chunk]
        loads = part[:, 0:3]
        e_col = part[:, 3]
        e_beam = part[:, 4]
        inertia = part[:, 5:13]
        area = part[:, 13:21]
        e_groups = np.concatenate([
            np.repeat(e_col[:, None], COLUMN_GROUPS, axis=1),
            np.repeat(e_beam[:, None], BEAM_GROUPS, axis=1)], axis=1)
        ea = e_groups[:, _GROUPS] * area[:, _GROUPS]
        ei = e_groups[:, _GROUPS] * inertia[:, _GROUPS]
        k = np.tensordot(ea, _MA_FREE, axes=(1, 0))
        k += np.tensordot(ei, _MI_FREE, axes=(1, 0))
        rhs = np.zeros((part.shape[0], len(_FREE)))
        for col, idx in enumerate(_LOAD_INDICES):
            rhs[:, idx] = loads[:, col]
        u = np.linalg.solve(k, rhs[:, :, None])[:, :, 0]
        out[start:start + chunk] = u[:, _SWAY_INDEX]
    return out


def sway_limit_state(x):
    """g = sway limit - roof sway; failure when the frame drifts too far."""
    return SWAY_LIMIT - roof_sway(x)
