"""The two-phase singular energy and its smoothed surrogate.

The energy of a field u over the domain is

    E(u) = integral of |grad u|^2 + G(u),   G(s) = 2*lp*(s+)^p + 2*lm*(s-)^p,

with lp, lm > 0 and 0 < p < 1.  The exponent beta = 2/(2-p) in (1, 2) is the
natural growth rate of minimizers at degenerate free boundary points.

Quadrature (all tolerances downstream are calibrated to it):

* Dirichlet term: exact integral of the squared gradient of the bilinear
  interpolant per grid cell.  This equals the midpoint rule on cell-corner
  differences plus the twist correction t^2/6, t = u00 + u11 - u10 - u01;
  without the correction the two diagonal sublattices decouple and the
  minimizer loses consistency along the snapped curved boundary.
* Potential term: nodal trapezoid, i.e. per cell the average of G at the four
  corners.

Only cells whose four corners are non-exterior contribute.  Sums use numpy's
pairwise summation, so results do not depend on thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import Grid, Mask, grid_header, parse_grid_header, build_grid


class HarmonicRegionError(ValueError):
    """Raised when a replacement region is not contained in the interior."""


def beta_of(p: float) -> float:
    """Growth exponent beta = 2/(2-p) for p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    return 2.0 / (2.0 - p)


@dataclass(frozen=True)
class EnergyParams:
    """The coefficient triple (lambda_plus, lambda_minus, p)."""

    lambda_plus: float
    lambda_minus: float
    p: float

    def __post_init__(self):
        if not (self.lambda_plus > 0 and self.lambda_minus > 0):
            raise ValueError("lambda_plus and lambda_minus must be positive")
        beta_of(self.p)  # validates p

    @property
    def beta(self) -> float:
        # always derived from p, never stored
        return beta_of(self.p)


@dataclass(frozen=True)
class ScalarField:
    """One real value per non-exterior node of a grid.

    Values are stored in a full lattice array (exterior slots hold 0.0 and
    are never read).  Fields are immutable; operations return new fields.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError("field shape does not match grid")
        if self.values.dtype != np.float64:
            raise ValueError("field values must be float64")
        if not np.isfinite(self.values[self.grid.nonexterior]).all():
            raise ValueError("field has non-finite values")
        self.values.setflags(write=False)

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        v = np.asarray(fn(grid.x1(), grid.x2()), dtype=np.float64)
        v = np.where(grid.nonexterior, v, 0.0)
        return cls(grid, v)

    def with_values(self, values: np.ndarray) -> "ScalarField":
        v = np.where(self.grid.nonexterior, values, 0.0).astype(np.float64)
        return ScalarField(self.grid, v)

    @property
    def admissible(self) -> bool:
        """Membership in the constrained class: u = 0 exactly on the fixed boundary."""
        return bool((self.values[self.grid.pi] == 0.0).all())


def potential(s, params: EnergyParams):
    """G(s) = 2*lp*(s+)^p + 2*lm*(s-)^p (vectorized)."""
    s = np.asarray(s, dtype=np.float64)
    sp_ = np.maximum(s, 0.0)
    sm_ = np.maximum(-s, 0.0)
    return 2.0 * params.lambda_plus * sp_**params.p + 2.0 * params.lambda_minus * sm_**params.p


def potential_derivative(s, params: EnergyParams):
    """dG/ds away from s = 0 (used by the Euler-Lagrange residual)."""
    s = np.asarray(s, dtype=np.float64)
    p = params.p
    out = np.zeros_like(s)
    pos = s > 0
    neg = s < 0
    out[pos] = 2.0 * p * params.lambda_plus * s[pos] ** (p - 1.0)
    out[neg] = -2.0 * p * params.lambda_minus * (-s[neg]) ** (p - 1.0)
    return out


def smoothed_potential(s, params: EnergyParams, eps: float):
    """Smoothed potential G_eps and its exact s-derivative.

    G_eps(s) = 2*lp*(((s+)^2+eps^2)^(p/2) - eps^p)
             + 2*lm*(((s-)^2+eps^2)^(p/2) - eps^p).

    C-infinity in s for eps > 0; the -eps^p offset pins G_eps(0) = 0 so that
    energies of competitors stay comparable across eps.  At eps = 0 it reduces
    to :func:`potential` (with one-sided derivative conventions at s = 0).
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    s = np.asarray(s, dtype=np.float64)
    p = params.p
    e2 = eps * eps
    ep = eps**p
    sp_ = np.maximum(s, 0.0)
    sm_ = np.maximum(-s, 0.0)
    value = 2.0 * params.lambda_plus * ((sp_**2 + e2) ** (p / 2) - ep) + (
        2.0 * params.lambda_minus * ((sm_**2 + e2) ** (p / 2) - ep)
    )
    lam = np.where(s >= 0, params.lambda_plus, params.lambda_minus)
    with np.errstate(divide="ignore", invalid="ignore"):
        deriv = 2.0 * p * lam * s * (s * s + e2) ** ((p - 2.0) / 2.0)
    deriv = np.where(s == 0, 0.0, deriv)
    return value, deriv


def _node_weights(grid: Grid) -> np.ndarray:
    """Trapezoid weight per node: number of incident quadrature cells / 4."""
    cm = grid.cell_mask.astype(np.float64)
    w = np.zeros(grid.shape)
    w[:-1, :-1] += cm
    w[1:, :-1] += cm
    w[:-1, 1:] += cm
    w[1:, 1:] += cm
    return w / 4.0


def _dirichlet_term(values: np.ndarray, grid: Grid) -> float:
    h = grid.h
    a = values[:-1, :-1]
    b = values[1:, :-1]
    c = values[:-1, 1:]
    d = values[1:, 1:]
    ux = (b - a + d - c) / (2 * h)
    uy = (c - a + d - b) / (2 * h)
    t = a + d - b - c
    cm = grid.cell_mask
    mid = float(h * h * ((ux * ux + uy * uy)[cm]).sum())
    return mid + float((t[cm] ** 2).sum()) / 6.0


def total_energy(u: ScalarField, params: EnergyParams) -> float:
    """Quadrature of |grad u|^2 + G(u) over the masked domain.

    Nonnegative; zero exactly for u identically 0.
    """
    g = potential(u.values, params)
    w = _node_weights(u.grid)
    pot = float(u.grid.h**2 * (w * g).sum())
    return _dirichlet_term(u.values, u.grid) + pot


def smoothed_energy_and_gradient(
    values: np.ndarray, grid: Grid, params: EnergyParams, eps: float
):
    """Smoothed total energy and its gradient with respect to interior values.

    The Dirichlet part couples each node to its four diagonal cell-mates; the
    potential part is diagonal.  Gradient entries at pinned (non-interior)
    nodes are zero.
    """
    h = grid.h
    cm = grid.cell_mask
    a = values[:-1, :-1]
    b = values[1:, :-1]
    c = values[:-1, 1:]
    d = values[1:, 1:]
    d1 = np.where(cm, a - d, 0.0)
    d2 = np.where(cm, b - c, 0.0)
    t = np.where(cm, a + d - b - c, 0.0)
    e_dir = 0.5 * float((d1 * d1 + d2 * d2).sum()) + float((t * t).sum()) / 6.0

    gval, gder = smoothed_potential(values, params, eps)
    w = _node_weights(grid)
    e_pot = float(h * h * (w * gval).sum())

    grad = np.zeros_like(values)
    grad[:-1, :-1] += d1 + t / 3.0
    grad[1:, 1:] += -d1 + t / 3.0
    grad[1:, :-1] += d2 - t / 3.0
    grad[:-1, 1:] += -d2 - t / 3.0
    grad += h * h * w * gder
    grad[~grid.interior] = 0.0
    return e_dir + e_pot, grad


def smoothed_total_energy(
    u: ScalarField, params: EnergyParams, eps: float
) -> float:
    e, _ = smoothed_energy_and_gradient(u.values, u.grid, params, eps)
    return e


def el_residual(u: ScalarField, params: EnergyParams, dead_band: float) -> ScalarField:
    """Discrete Euler-Lagrange residual  Lap_h(u) - dG(u)/du / 2.

    The equation only holds where u does not vanish, so nodes with
    |u| <= dead_band report residual 0.  Only interior nodes carry residuals;
    boundary nodes hold their Dirichlet data.
    """
    if not dead_band > 0:
        raise ValueError("dead_band must be positive")
    grid = u.grid
    h = grid.h
    v = u.values
    lap = np.zeros_like(v)
    lap[1:-1, 1:-1] = (
        v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2] - 4.0 * v[1:-1, 1:-1]
    ) / (h * h)
    rhs = 0.5 * potential_derivative(v, params)
    res = np.where(grid.interior & (np.abs(v) > dead_band), lap - rhs, 0.0)
    return ScalarField(grid, res)


def dirichlet_graph_energy(u: ScalarField, region: Mask | None = None) -> float:
    """Sum of squared axis-edge differences (5-point stencil energy).

    With a region, only edges touching a region node count.  This is the
    quantity the discrete Dirichlet principle controls.
    """
    grid = u.grid
    v = u.values
    ne = grid.nonexterior
    total = 0.0
    for axis in (0, 1):
        if axis == 0:
            valid = ne[:-1, :] & ne[1:, :]
            diff = v[1:, :] - v[:-1, :]
            touch = valid
            if region is not None:
                touch = valid & (region.nodes[:-1, :] | region.nodes[1:, :])
        else:
            valid = ne[:, :-1] & ne[:, 1:]
            diff = v[:, 1:] - v[:, :-1]
            touch = valid
            if region is not None:
                touch = valid & (region.nodes[:, :-1] | region.nodes[:, 1:])
        total += float((diff[touch] ** 2).sum())
    return total


def harmonic_replacement(u: ScalarField, region: Mask) -> ScalarField:
    """Replace u inside ``region`` by the discrete harmonic function with
    boundary values taken from u.

    Satisfies the 5-point discrete Laplace equation on the region; never
    increases the discrete Dirichlet energy (Dirichlet principle).  An empty
    region returns u unchanged.
    """
    grid = u.grid
    if region.grid is not grid and region.grid != grid:
        raise ValueError("region lives on a different grid")
    if len(region) == 0:
        return u
    if bool((region.nodes & ~grid.interior).any()):
        raise HarmonicRegionError("region must consist of interior nodes")

    idx = -np.ones(grid.shape, dtype=np.int64)
    ri, rj = np.nonzero(region.nodes)
    n = ri.size
    idx[ri, rj] = np.arange(n)

    rows, cols, data = [], [], []
    rhs = np.zeros(n)
    v = u.values
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ni, nj = ri + di, rj + dj
        inside = region.nodes[ni, nj]
        rows.append(idx[ri, rj][inside])
        cols.append(idx[ni, nj][inside])
        data.append(-np.ones(int(inside.sum())))
        np.add.at(rhs, idx[ri, rj][~inside], v[ni[~inside], nj[~inside]])
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    data.append(4.0 * np.ones(n))
    A = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    sol = spla.spsolve(A, rhs)
    out = v.copy()
    out[ri, rj] = sol
    return ScalarField(grid, out)


def field_header(u: ScalarField) -> bytes:
    n = int(u.grid.nonexterior.sum())
    return ("FBFIELD v1\n" + grid_header(u.grid) + f"count={n}\n").encode("ascii")


def save_field(u: ScalarField, path=None) -> bytes:
    """FBFIELD v1: text header, then little-endian float64 in node order."""
    payload = u.values[u.grid.nonexterior].astype("<f8").tobytes()
    blob = field_header(u) + payload
    if path is not None:
        with open(path, "wb") as f:
            f.write(blob)
    return blob


def load_field(blob: bytes, grid: Grid | None = None) -> ScalarField:
    """Read an FBFIELD v1 blob, rebuilding the grid from the header if needed."""
    # header layout: FBFIELD v1 / FBGRID v1 / R=... h=... shape=... / count=N
    head_end = 0
    for _ in range(4):
        head_end = blob.index(b"\n", head_end) + 1
    header = blob[:head_end].decode("ascii").splitlines()
    if header[0] != "FBFIELD v1" or not header[1].startswith("FBGRID"):
        raise ValueError("not an FBFIELD v1 stream")
    spec = parse_grid_header(header[2])
    if grid is None:
        grid = build_grid(spec)
    elif grid.spec != spec:
        raise ValueError("field header does not match the supplied grid")
    if not header[3].startswith("count="):
        raise ValueError("missing count line")
    count = int(header[3].split("=", 1)[1])
    n = int(grid.nonexterior.sum())
    if count != n:
        raise ValueError(f"count {count} does not match grid ({n} nodes)")
    data = np.frombuffer(blob[head_end:], dtype="<f8")
    if data.size != n:
        raise ValueError("payload size mismatch")
    v = np.zeros(grid.shape)
    v[grid.nonexterior] = data
    return ScalarField(grid, v)
