"""Bilinear sampling of nodal fields at arbitrary points.

Sampling reads the full lattice array; callers are responsible for querying
points inside cells whose corners carry values (everything at distance > h
from the snapped outer boundary does).
"""

from __future__ import annotations

import numpy as np

from .domain import Grid
from .energy import ScalarField


def _locate(grid: Grid, x1, x2):
    """Cell indices and local coordinates for query points."""
    h = grid.h
    fi = np.clip(x1 / h, 0.0, grid.imax - 1e-12)
    fj = np.clip(x2 / h - grid.jmin, 0.0, (grid.jmax - grid.jmin) - 1e-12)
    i0 = np.floor(fi).astype(np.int64)
    j0 = np.floor(fj).astype(np.int64)
    return i0, j0, fi - i0, fj - j0


def sample_values(values: np.ndarray, grid: Grid, x1, x2) -> np.ndarray:
    """Bilinear interpolation of a lattice array at points (x1, x2)."""
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    i0, j0, t, s = _locate(grid, x1, x2)
    v00 = values[i0, j0]
    v10 = values[i0 + 1, j0]
    v01 = values[i0, j0 + 1]
    v11 = values[i0 + 1, j0 + 1]
    return (
        v00 * (1 - t) * (1 - s)
        + v10 * t * (1 - s)
        + v01 * (1 - t) * s
        + v11 * t * s
    )


def sample_field(u: ScalarField, x1, x2) -> np.ndarray:
    return sample_values(u.values, u.grid, x1, x2)


def nodal_gradient(u: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Per-node gradient: centered differences where both axis neighbors carry
    values, one-sided at boundary nodes, zero where no neighbor exists."""
    grid = u.grid
    h = grid.h
    v = u.values
    ne = grid.nonexterior

    gx = np.zeros_like(v)
    gy = np.zeros_like(v)

    has_e = np.zeros_like(ne)
    has_w = np.zeros_like(ne)
    has_n = np.zeros_like(ne)
    has_s = np.zeros_like(ne)
    has_e[:-1, :] = ne[1:, :]
    has_w[1:, :] = ne[:-1, :]
    has_n[:, :-1] = ne[:, 1:]
    has_s[:, 1:] = ne[:, :-1]

    ve = np.zeros_like(v)
    vw = np.zeros_like(v)
    vn = np.zeros_like(v)
    vs = np.zeros_like(v)
    ve[:-1, :] = v[1:, :]
    vw[1:, :] = v[:-1, :]
    vn[:, :-1] = v[:, 1:]
    vs[:, 1:] = v[:, :-1]

    both_x = has_e & has_w
    gx = np.where(both_x, (ve - vw) / (2 * h), gx)
    gx = np.where(has_e & ~has_w, (ve - v) / h, gx)
    gx = np.where(has_w & ~has_e, (v - vw) / h, gx)

    both_y = has_n & has_s
    gy = np.where(both_y, (vn - vs) / (2 * h), gy)
    gy = np.where(has_n & ~has_s, (vn - v) / h, gy)
    gy = np.where(has_s & ~has_n, (v - vs) / h, gy)

    gx = np.where(ne, gx, 0.0)
    gy = np.where(ne, gy, 0.0)
    return gx, gy


def sample_gradient(u: ScalarField, x1, x2) -> tuple[np.ndarray, np.ndarray]:
    """Bilinearly interpolated nodal gradient at points (x1, x2)."""
    gx, gy = nodal_gradient(u)
    return (
        sample_values(gx, u.grid, x1, x2),
        sample_values(gy, u.grid, x1, x2),
    )
