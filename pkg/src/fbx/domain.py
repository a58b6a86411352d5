"""Masked Cartesian grids on the half-disk B_R+ = B_R ∩ {x1 > 0}.

The grid covers the lattice (i*h, j*h), i >= 0, inside a bounding box of the
domain.  Every lattice slot carries one of four labels:

* ``interior`` -- strictly inside the domain and at distance >= h/2 from the
  outer boundary,
* ``pi``       -- on the flat fixed boundary {x1 = 0} (Dirichlet value 0),
* ``arc``      -- within h/2 of the outer boundary (snapped, carries Dirichlet
  data evaluated at the lattice position),
* ``exterior`` -- everything else; carries no field values.

A node lying on both the fixed boundary and the closure of the outer boundary
is labelled ``pi`` (the zero boundary condition wins at corners).

Besides the half-disk there is a rectangle variant (0, width) x (-height/2,
height/2) whose left edge plays the role of the fixed boundary; the remaining
three edges are treated like the arc.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

EXTERIOR = 0
INTERIOR = 1
PI = 2
ARC = 3

LABEL_NAMES = {EXTERIOR: "exterior", INTERIOR: "interior", PI: "pi", ARC: "arc"}
LABEL_CODES = {v: k for k, v in LABEL_NAMES.items()}

_TOL = 1e-12


class SpacingTooCoarseError(ValueError):
    """Grid spacing too large for the requested domain."""


@dataclass(frozen=True)
class DomainSpec:
    """Geometry of the computational domain.

    ``shape`` is either ``"half_disk"`` (radius ``radius``) or ``"rectangle"``
    (``width`` x ``height`` with the left edge on {x1 = 0}).
    """

    h: float
    radius: float = 1.0
    shape: str = "half_disk"
    width: float = 0.0
    height: float = 0.0

    def __post_init__(self):
        if self.shape not in ("half_disk", "rectangle"):
            raise ValueError(f"unknown shape {self.shape!r}")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not self.h > 0:
            raise ValueError("spacing h must be positive")
        if self.h >= self.radius:
            raise SpacingTooCoarseError(
                f"h={self.h} too coarse for radius {self.radius}"
            )
        if self.shape == "rectangle":
            if not (self.width > 0 and self.height > 0):
                raise ValueError("rectangle needs positive width and height")


@dataclass(frozen=True)
class Grid:
    """Immutable masked grid produced by :func:`build_grid`.

    ``labels[i, j - jmin]`` is the label of lattice node (i*h, j*h).
    """

    spec: DomainSpec
    imax: int
    jmin: int
    jmax: int
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.labels.setflags(write=False)

    @property
    def h(self) -> float:
        return self.spec.h

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def x1(self) -> np.ndarray:
        """x1 coordinate per lattice slot (2D array)."""
        return (np.arange(self.imax + 1) * self.h)[:, None] * np.ones(
            (1, self.jmax - self.jmin + 1)
        )

    def x2(self) -> np.ndarray:
        """x2 coordinate per lattice slot (2D array)."""
        return (np.arange(self.jmin, self.jmax + 1) * self.h)[None, :] * np.ones(
            (self.imax + 1, 1)
        )

    def node_xy(self, i: int, j: int) -> tuple[float, float]:
        return (i * self.h, j * self.h)

    @property
    def interior(self) -> np.ndarray:
        return self.labels == INTERIOR

    @property
    def pi(self) -> np.ndarray:
        return self.labels == PI

    @property
    def arc(self) -> np.ndarray:
        return self.labels == ARC

    @property
    def nonexterior(self) -> np.ndarray:
        return self.labels != EXTERIOR

    @property
    def cell_mask(self) -> np.ndarray:
        """Cells whose four corners are all non-exterior (quadrature cells)."""
        ne = self.nonexterior
        return ne[:-1, :-1] & ne[1:, :-1] & ne[:-1, 1:] & ne[1:, 1:]

    def contains(self, x: tuple[float, float]) -> bool:
        """Whether a point lies in the closed domain."""
        if x[0] < -_TOL:
            return False
        if self.spec.shape == "half_disk":
            return float(np.hypot(x[0], x[1])) <= self.spec.radius + _TOL
        return (
            x[0] <= self.spec.width + _TOL
            and abs(x[1]) <= self.spec.height / 2 + _TOL
        )

    def outer_clearance(self, x: tuple[float, float]) -> float:
        """Distance from a point to the outer (non-Pi) boundary."""
        if self.spec.shape == "half_disk":
            return self.spec.radius - float(np.hypot(x[0], x[1]))
        return min(self.spec.width - x[0], self.spec.height / 2 - abs(x[1]))


@dataclass(frozen=True)
class Mask:
    """A set of lattice nodes on a grid, stored as a boolean array."""

    grid: Grid
    nodes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.nodes.shape != self.grid.shape:
            raise ValueError("mask shape does not match grid")
        self.nodes.setflags(write=False)

    @classmethod
    def empty(cls, grid: Grid) -> "Mask":
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    @classmethod
    def from_indices(cls, grid: Grid, pairs) -> "Mask":
        m = np.zeros(grid.shape, dtype=bool)
        for i, j in pairs:
            m[i, j - grid.jmin] = True
        return cls(grid, m)

    def indices(self) -> list[tuple[int, int]]:
        ii, jj = np.nonzero(self.nodes)
        return [(int(i), int(j) + self.grid.jmin) for i, j in zip(ii, jj)]

    def __len__(self) -> int:
        return int(self.nodes.sum())

    def __contains__(self, ij) -> bool:
        i, j = ij
        return bool(self.nodes[i, j - self.grid.jmin])


def build_grid(spec: DomainSpec) -> Grid:
    """Build the masked grid for a domain.

    Raises :class:`SpacingTooCoarseError` when fewer than three interior
    nodes result.  Deterministic: identical specs give identical grids.
    """
    h = spec.h
    if spec.shape == "half_disk":
        R = spec.radius
        imax = int(np.floor((R + h / 2) / h + _TOL))
        jmax = imax
        jmin = -jmax
    else:
        imax = int(np.floor((spec.width + h / 2) / h + _TOL))
        jmax = int(np.floor((spec.height / 2 + h / 2) / h + _TOL))
        jmin = -jmax

    ii = np.arange(imax + 1)[:, None] * h
    jj = np.arange(jmin, jmax + 1)[None, :] * h
    labels = np.full((imax + 1, jmax - jmin + 1), EXTERIOR, dtype=np.int8)

    if spec.shape == "half_disk":
        R = spec.radius
        rho = np.hypot(ii, jj)
        interior = (ii > 0) & (rho <= R - h / 2 + _TOL)
        arc = (ii > 0) & ~interior & (rho <= R + h / 2 + _TOL)
        pi = (np.broadcast_to(ii == 0, rho.shape)) & (np.abs(jj) <= R + _TOL)
    else:
        W, H = spec.width, spec.height
        clearance = np.minimum(W - ii, H / 2 - np.abs(jj)) + 0 * ii
        interior = (ii > 0) & (clearance >= h / 2 - _TOL)
        arc = (ii > 0) & ~interior & (clearance >= -h / 2 - _TOL)
        pi = (np.broadcast_to(ii == 0, clearance.shape)) & (
            np.abs(jj) <= H / 2 + _TOL
        )

    labels[interior] = INTERIOR
    labels[arc] = ARC
    labels[pi] = PI  # corner rule: pi wins over arc

    if int((labels == INTERIOR).sum()) < 3:
        raise SpacingTooCoarseError(
            f"h={h} yields fewer than 3 interior nodes"
        )
    return Grid(spec, imax, jmin, jmax, labels)


def boundary_nodes(grid: Grid) -> tuple[Mask, Mask]:
    """The (pi, arc) partition of the boundary-labelled nodes."""
    return Mask(grid, grid.labels == PI), Mask(grid, grid.labels == ARC)


def ball_mask(grid: Grid, center: tuple[float, float], r: float) -> Mask:
    """All non-exterior nodes within Euclidean distance ``r`` of ``center``.

    A zero (or negative) radius yields an empty mask.
    """
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if r == 0:
        return Mask.empty(grid)
    d2 = (grid.x1() - center[0]) ** 2 + (grid.x2() - center[1]) ** 2
    return Mask(grid, (d2 <= r * r) & grid.nonexterior)


def grid_header(grid: Grid) -> str:
    s = grid.spec
    head = f"FBGRID v1\nR={s.radius!r} h={s.h!r} shape={s.shape}"
    if s.shape == "rectangle":
        head += f" width={s.width!r} height={s.height!r}"
    return head + "\n"


def save_grid(grid: Grid, path=None) -> str:
    """Serialize a grid (text).  Row-major by (i, j), one line per node."""
    buf = io.StringIO()
    buf.write(grid_header(grid))
    for i in range(grid.imax + 1):
        for j in range(grid.jmin, grid.jmax + 1):
            buf.write(f"{i} {j} {LABEL_NAMES[int(grid.labels[i, j - grid.jmin])]}\n")
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text


def parse_grid_header(line: str) -> DomainSpec:
    parts = line.strip().split()
    kv = dict(p.split("=", 1) for p in parts)
    shape = kv["shape"]
    return DomainSpec(
        h=float(kv["h"]),
        radius=float(kv["R"]),
        shape=shape,
        width=float(kv.get("width", 0.0)),
        height=float(kv.get("height", 0.0)),
    )


def load_grid(text: str) -> Grid:
    """Rebuild a grid from its serialization, verifying the node labels."""
    lines = text.splitlines()
    if not lines or lines[0] != "FBGRID v1":
        raise ValueError("not an FBGRID v1 stream")
    spec = parse_grid_header(lines[1])
    grid = build_grid(spec)
    n_expected = (grid.imax + 1) * (grid.jmax - grid.jmin + 1)
    body = lines[2 : 2 + n_expected]
    if len(body) != n_expected:
        raise ValueError("truncated FBGRID stream")
    for line in body:
        si, sj, name = line.split()
        if int(grid.labels[int(si), int(sj) - grid.jmin]) != LABEL_CODES[name]:
            raise ValueError(f"label mismatch at node ({si}, {sj})")
    return grid
