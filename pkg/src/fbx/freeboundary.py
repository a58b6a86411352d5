"""Free boundary extraction and geometry checks.

The free boundary of a solution field is approximated by marching-squares
contours of the offset levels +tau and -tau (minimizers can have flat dead
cores where u = 0, so the exact zero level is unstable; tau at the field's
resolvable amplitude h^beta gives clean curves).

Each contour vertex carries a phase (plus / minus chain), a point class
(pos_one_phase, neg_one_phase, two_phase, branching) and a unit normal
oriented toward the phase the chain belongs to.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .domain import Grid
from .energy import EnergyParams, ScalarField
from .interp import nodal_gradient, sample_values

POS_ONE_PHASE = "pos_one_phase"
NEG_ONE_PHASE = "neg_one_phase"
TWO_PHASE = "two_phase"
BRANCHING = "branching"


class NotAFreeBoundaryPointError(ValueError):
    """Neither phase is present near the queried point."""


class DegenerateFitError(ValueError):
    """Normal estimation window is geometrically degenerate."""


@dataclass(frozen=True)
class ConeSpec:
    """Flat cone K_delta(z) = {|x1 - z1| < delta * |x2 - z2|} around an apex."""

    apex: tuple[float, float]
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("cone half-aperture slope must be positive")


@dataclass
class Chain:
    """One extracted polyline with per-vertex tags."""

    phase: str  # "plus" or "minus"
    points: np.ndarray  # (n, 2)
    classes: list[str]
    normals: np.ndarray  # (n, 2) unit vectors
    closed: bool = False


@dataclass
class FreeBoundary:
    chains: list[Chain] = field(default_factory=list)

    def vertex_count(self) -> int:
        return sum(len(c.points) for c in self.chains)

    def all_vertices(self) -> np.ndarray:
        if not self.chains:
            return np.zeros((0, 2))
        return np.vstack([c.points for c in self.chains])

    def all_normals(self) -> np.ndarray:
        if not self.chains:
            return np.zeros((0, 2))
        return np.vstack([c.normals for c in self.chains])

    def all_classes(self) -> list[str]:
        out: list[str] = []
        for c in self.chains:
            out.extend(c.classes)
        return out

    def locate(self, vertex_index: int) -> tuple[int, int]:
        """Map a flat vertex index to (chain index, local index)."""
        k = vertex_index
        for ci, c in enumerate(self.chains):
            if k < len(c.points):
                return ci, k
            k -= len(c.points)
        raise IndexError("vertex index out of range")


# marching-squares case table: corner bit order c0=(i,j), c1=(i+1,j),
# c2=(i+1,j+1), c3=(i,j+1); edges 0=bottom 1=right 2=top 3=left
_CASES = {
    1: [(3, 0)],
    2: [(0, 1)],
    3: [(3, 1)],
    4: [(1, 2)],
    6: [(0, 2)],
    7: [(3, 2)],
    8: [(3, 2)],
    9: [(0, 2)],
    11: [(1, 2)],
    12: [(3, 1)],
    13: [(0, 1)],
    14: [(3, 0)],
}


def _edge_key(cell_i, cell_j, edge):
    if edge == 0:
        return ("h", cell_i, cell_j)
    if edge == 2:
        return ("h", cell_i, cell_j + 1)
    if edge == 3:
        return ("v", cell_i, cell_j)
    return ("v", cell_i + 1, cell_j)


def _contour_chains(s: np.ndarray, grid: Grid) -> list[tuple[list, bool]]:
    """Marching squares of the sign field s > 0 over quadrature cells.

    Returns chains as lists of edge keys plus a closed flag.  Deterministic:
    cells are scanned lexicographically and chains start at the smallest open
    endpoint (loops at their smallest member).
    """
    cm = grid.cell_mask
    pos = s > 0.0
    c0 = pos[:-1, :-1]
    c1 = pos[1:, :-1]
    c2 = pos[1:, 1:]
    c3 = pos[:-1, 1:]
    code = (
        c0.astype(np.int8)
        | (c1.astype(np.int8) << 1)
        | (c2.astype(np.int8) << 2)
        | (c3.astype(np.int8) << 3)
    )
    code = np.where(cm, code, 0)

    adjacency: dict = {}

    def connect(a, b):
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)

    ii, jj = np.nonzero((code != 0) & (code != 15))
    order = np.lexsort((jj, ii))
    for k in order:
        i, j = int(ii[k]), int(jj[k])
        c = int(code[i, j])
        if c in (5, 10):
            center = 0.25 * (s[i, j] + s[i + 1, j] + s[i + 1, j + 1] + s[i, j + 1])
            if c == 5:
                segs = [(0, 1), (2, 3)] if center > 0 else [(0, 3), (1, 2)]
            else:
                segs = [(0, 3), (1, 2)] if center > 0 else [(0, 1), (2, 3)]
        else:
            segs = _CASES[c]
        for ea, eb in segs:
            connect(_edge_key(i, j, ea), _edge_key(i, j, eb))

    chains: list[tuple[list, bool]] = []
    visited = set()
    endpoints = sorted(k for k, nb in adjacency.items() if len(nb) == 1)

    def walk(start):
        chain = [start]
        visited.add(start)
        cur = start
        while True:
            nxt = [n for n in adjacency[cur] if n not in visited]
            if not nxt:
                closed = start in adjacency[cur] and len(chain) > 2
                return chain, closed
            cur = sorted(nxt)[0]
            chain.append(cur)
            visited.add(cur)

    for ep in endpoints:
        if ep not in visited:
            chains.append(walk(ep))
    for key in sorted(adjacency):
        if key not in visited:
            chains.append(walk(key))
    return chains


def _edge_vertex(key, s: np.ndarray, grid: Grid) -> tuple[float, float]:
    kind, i, j = key
    h = grid.h
    sa = s[i, j]
    if kind == "h":
        sb = s[i + 1, j]
        t = sa / (sa - sb)
        return ((i + t) * h, (j + grid.jmin) * h)
    sb = s[i, j + 1]
    t = sa / (sa - sb)
    return (i * h, (j + t + grid.jmin) * h)


def _window_direction(points: np.ndarray, idx: int, closed: bool) -> np.ndarray:
    """Unit tangent from a least-squares line fit over a 5-vertex window
    (3 at open chain ends)."""
    n = len(points)
    if closed:
        sel = [(idx + k) % n for k in (-2, -1, 0, 1, 2)]
    else:
        lo = max(0, idx - 2)
        hi = min(n, idx + 3)
        if hi - lo < 3:
            lo = max(0, min(lo, n - 3))
            hi = min(n, lo + 3)
        sel = list(range(lo, hi))
    w = points[sel]
    centered = w - w.mean(axis=0)
    if float(np.abs(centered).max()) < 1e-14:
        raise DegenerateFitError("window vertices are coincident")
    cov = centered.T @ centered
    evals, evecs = np.linalg.eigh(cov)
    d = evecs[:, -1]
    norm = float(np.hypot(d[0], d[1]))
    return d / norm


def classify_point(
    u: ScalarField,
    x: tuple[float, float],
    r_nbhd: float,
    grad_tol: float,
    params: EnergyParams,
    tau: float | None = None,
) -> str:
    """Phase classification of a point from the field in B_{r_nbhd}(x).

    One-phase: only one phase (|u| > tau) is present nearby.  Two-phase:
    both are.  A two-phase point whose interpolated gradient magnitude falls
    below ``grad_tol`` is tagged ``branching`` (the discrete shadow of a
    vanishing gradient).
    """
    grid = u.grid
    h = grid.h
    if r_nbhd < 2 * h:
        raise ValueError("r_nbhd must be at least 2h")
    if not grid.contains(x):
        raise ValueError(f"point {x} lies outside the domain")
    if tau is None:
        tau = h**params.beta

    d2 = (grid.x1() - x[0]) ** 2 + (grid.x2() - x[1]) ** 2
    near = (d2 <= r_nbhd * r_nbhd) & grid.nonexterior
    vals = u.values[near]
    pos = bool((vals > tau).any())
    neg = bool((vals < -tau).any())
    if not pos and not neg:
        raise NotAFreeBoundaryPointError(f"no phase present near {x}")
    if pos and neg:
        gx, gy = sample_gradient_at(u, x)
        if float(np.hypot(gx, gy)) < grad_tol:
            return BRANCHING
        return TWO_PHASE
    return POS_ONE_PHASE if pos else NEG_ONE_PHASE


def sample_gradient_at(u: ScalarField, x: tuple[float, float]) -> tuple[float, float]:
    gx, gy = nodal_gradient(u)
    return (
        float(sample_values(gx, u.grid, x[0], x[1])),
        float(sample_values(gy, u.grid, x[0], x[1])),
    )


def default_grad_tol(h: float, beta: float) -> float:
    """Branching gradient threshold 2 h^(beta-1).

    The canonical branching profile measures a centered-difference gradient of
    about beta * c * h^(beta-1) at lattice resolution, so the threshold must
    sit above h^(beta-1) itself to recognize it.
    """
    return 2.0 * h ** (beta - 1.0)


def extract_free_boundary(
    u: ScalarField,
    tau: float,
    params: EnergyParams | None = None,
    r_nbhd: float | None = None,
    grad_tol: float | None = None,
) -> FreeBoundary:
    """Marching-squares contours of the levels +tau (plus phase) and -tau
    (minus phase), merged into one free boundary object.

    Empty output iff u never crosses either level.  When ``params`` is given,
    vertices are classified and the branching tag uses ``grad_tol``
    (default 2 h^(beta-1)); without params all vertices keep their phase's
    one-phase class.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    grid = u.grid
    h = grid.h
    if r_nbhd is None:
        r_nbhd = 2 * h
    beta = params.beta if params is not None else None
    if grad_tol is None and beta is not None:
        grad_tol = default_grad_tol(h, beta)

    gx, gy = nodal_gradient(u)
    fb = FreeBoundary()
    for phase, sign in (("plus", 1.0), ("minus", -1.0)):
        s = sign * u.values - tau
        for keys, closed in _contour_chains(s, grid):
            pts = np.array([_edge_vertex(k, s, grid) for k in keys])
            if closed and len(pts) > 1 and np.allclose(pts[0], pts[-1]):
                pts = pts[:-1]
            classes = []
            normals = np.zeros_like(pts)
            for k in range(len(pts)):
                normals[k] = _oriented_normal(u, pts, k, closed, phase)
                classes.append(
                    _vertex_class(u, pts[k], tau, r_nbhd, grad_tol, gx, gy)
                    if params is not None
                    else (POS_ONE_PHASE if phase == "plus" else NEG_ONE_PHASE)
                )
            fb.chains.append(Chain(phase, pts, classes, normals, closed))
    return fb


def _vertex_class(u, x, tau, r_nbhd, grad_tol, gx, gy):
    grid = u.grid
    h = grid.h
    iw = int(np.ceil(r_nbhd / h)) + 1
    ic = int(round(x[0] / h))
    jc = int(round(x[1] / h)) - grid.jmin
    i0, i1 = max(0, ic - iw), min(grid.shape[0], ic + iw + 1)
    j0, j1 = max(0, jc - iw), min(grid.shape[1], jc + iw + 1)
    sub = u.values[i0:i1, j0:j1]
    lab = u.grid.nonexterior[i0:i1, j0:j1]
    xs = (np.arange(i0, i1) * h)[:, None] - x[0]
    ys = ((np.arange(j0, j1) + grid.jmin) * h)[None, :] - x[1]
    near = (xs**2 + ys**2 <= r_nbhd * r_nbhd) & lab
    vals = sub[near]
    pos = bool((vals > tau).any())
    neg = bool((vals < -tau).any())
    if pos and neg:
        if grad_tol is not None:
            g1 = float(sample_values(gx, grid, x[0], x[1]))
            g2 = float(sample_values(gy, grid, x[0], x[1]))
            if float(np.hypot(g1, g2)) < grad_tol:
                return BRANCHING
        return TWO_PHASE
    if pos:
        return POS_ONE_PHASE
    if neg:
        return NEG_ONE_PHASE
    # a contour vertex always has at least its own phase nearby; this is a
    # guard for exotic tau choices
    return POS_ONE_PHASE


def _oriented_normal(u, pts, idx, closed, phase):
    d = _window_direction(pts, idx, closed)
    n = np.array([-d[1], d[0]])
    h = u.grid.h
    step = 0.5 * h
    x = pts[idx]
    ahead = sample_values(u.values, u.grid, x[0] + step * n[0], x[1] + step * n[1])
    behind = sample_values(u.values, u.grid, x[0] - step * n[0], x[1] - step * n[1])
    want_up = 1.0 if phase == "plus" else -1.0
    if (float(ahead) - float(behind)) * want_up < 0:
        n = -n
    return n


def normal_at(fb: FreeBoundary, vertex_index: int) -> np.ndarray:
    """Unit normal at a vertex from the local least-squares line fit."""
    ci, k = fb.locate(vertex_index)
    chain = fb.chains[ci]
    if len(chain.points) < 2:
        raise DegenerateFitError("vertex has no polyline neighbor")
    d = _window_direction(chain.points, k, chain.closed)
    n = np.array([-d[1], d[0]])
    if float(n @ chain.normals[k]) < 0:
        n = -n
    return n


def cone_check(
    fb: FreeBoundary, cone: ConeSpec, rho: float
) -> tuple[bool, np.ndarray]:
    """Whether every vertex within ``rho`` of the apex lies inside the flat
    cone; returns the offending vertices otherwise.

    The apex itself (a vertex at distance ~0) is not its own witness.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    pts = fb.all_vertices()
    if len(pts) == 0:
        return True, np.zeros((0, 2))
    z = np.asarray(cone.apex)
    d = np.hypot(pts[:, 0] - z[0], pts[:, 1] - z[1])
    near = (d <= rho) & (d > 1e-12)
    dx1 = np.abs(pts[:, 0] - z[0])
    dx2 = np.abs(pts[:, 1] - z[1])
    bad = near & ~(dx1 < cone.delta * dx2)
    return (not bool(bad.any())), pts[bad]


def tangency_profile(
    fb: FreeBoundary, band_edges: list[float]
) -> list[tuple[tuple[float, float], float | None]]:
    """Max angular deviation of vertex normals from e1 per x1-band.

    Bands are the intervals (a, b] between consecutive edges.  Empty bands
    report None.
    """
    if fb.vertex_count() == 0:
        raise ValueError("free boundary is empty")
    pts = fb.all_vertices()
    nrm = fb.all_normals()
    dev = np.arccos(np.clip(np.abs(nrm[:, 0]), 0.0, 1.0))
    out = []
    for a, b in zip(band_edges[:-1], band_edges[1:]):
        sel = (pts[:, 0] > a) & (pts[:, 0] <= b)
        out.append(((a, b), float(dev[sel].max()) if sel.any() else None))
    return out


def boundary_to_json(fb: FreeBoundary) -> str:
    """JSON serialization: chains as arrays of [x1, x2, class, n1, n2]."""
    payload = {
        "chains": [
            {
                "phase": c.phase,
                "closed": c.closed,
                "points": [
                    [float(p[0]), float(p[1]), cls, float(n[0]), float(n[1])]
                    for p, cls, n in zip(c.points, c.classes, c.normals)
                ],
            }
            for c in fb.chains
        ]
    }
    return json.dumps(payload, sort_keys=True)


def boundary_from_json(text: str) -> FreeBoundary:
    raw = json.loads(text)
    fb = FreeBoundary()
    for c in raw["chains"]:
        pts = np.array([[row[0], row[1]] for row in c["points"]], dtype=np.float64)
        classes = [row[2] for row in c["points"]]
        normals = np.array(
            [[row[3], row[4]] for row in c["points"]], dtype=np.float64
        )
        if len(pts) == 0:
            pts = pts.reshape(0, 2)
            normals = normals.reshape(0, 2)
        fb.chains.append(Chain(c["phase"], pts, classes, normals, c["closed"]))
    return fb
