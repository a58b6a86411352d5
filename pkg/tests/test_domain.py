import numpy as np
import pytest

from fbx import (
    DomainSpec,
    Mask,
    SpacingTooCoarseError,
    ball_mask,
    boundary_nodes,
    build_grid,
    load_grid,
    save_grid,
)
from fbx.domain import ARC, EXTERIOR, INTERIOR, PI


def interior_points(grid):
    ii, jj = np.nonzero(grid.interior)
    return sorted((i * grid.h, (j + grid.jmin) * grid.h) for i, j in zip(ii, jj))


def test_coarse_halfdisk_enumeration():
    grid = build_grid(DomainSpec(h=0.5, radius=1.0))
    assert interior_points(grid) == [(0.5, -0.5), (0.5, 0.0), (0.5, 0.5)]


def test_spacing_too_coarse():
    with pytest.raises(SpacingTooCoarseError):
        build_grid(DomainSpec(h=2.0, radius=1.0))
    # enough lattice slots but fewer than 3 interior nodes
    with pytest.raises(SpacingTooCoarseError):
        build_grid(DomainSpec(h=0.6, radius=1.0))


def test_bad_spec_values():
    with pytest.raises(ValueError):
        DomainSpec(h=-0.1)
    with pytest.raises(ValueError):
        DomainSpec(h=0.1, radius=0.0)
    with pytest.raises(ValueError):
        DomainSpec(h=0.1, shape="rectangle", width=1.0, height=0.0)
    with pytest.raises(ValueError):
        DomainSpec(h=0.1, shape="triangle")


def test_interior_count_area_oracle():
    h = 1 / 128
    grid = build_grid(DomainSpec(h=h))
    # independent lattice-point count of the half-disk
    target = np.pi / 2 / h**2
    n = int(grid.interior.sum())
    assert abs(n - target) / target < 0.02


def test_pi_nodes_halfdisk():
    grid = build_grid(DomainSpec(h=0.5))
    pi, arc = boundary_nodes(grid)
    pts = {grid.node_xy(i, j) for i, j in pi.indices()}
    assert {(0.0, -0.5), (0.0, 0.0), (0.0, 0.5)} <= pts
    assert all(x1 == 0.0 for x1, _ in pts)
    # corners on the arc closure are labelled pi, never arc
    assert not (pi.nodes & arc.nodes).any()


def test_pi_x1_bit_exact():
    grid = build_grid(DomainSpec(h=1 / 96))
    assert (grid.x1()[grid.pi] == 0.0).all()


def test_boundary_partition():
    grid = build_grid(DomainSpec(h=1 / 32))
    pi, arc = boundary_nodes(grid)
    boundary = (grid.labels == PI) | (grid.labels == ARC)
    assert ((pi.nodes | arc.nodes) == boundary).all()
    assert not (pi.nodes & arc.nodes).any()


def test_rectangle_labels():
    grid = build_grid(DomainSpec(h=0.25, shape="rectangle", width=1.0, height=2.0))
    pi, arc = boundary_nodes(grid)
    # left edge (including both corners, by the corner rule) is pi
    pi_pts = sorted(grid.node_xy(i, j) for i, j in pi.indices())
    assert pi_pts == [(0.0, -1.0 + 0.25 * k) for k in range(9)]
    assert (grid.labels != EXTERIOR).all()  # box fits the rectangle exactly
    assert int(grid.interior.sum()) == 3 * 7


def test_interior_neighbors_never_exterior():
    for spec in (
        DomainSpec(h=1 / 24),
        DomainSpec(h=0.11),
        DomainSpec(h=0.13, shape="rectangle", width=1.1, height=0.9),
    ):
        grid = build_grid(spec)
        lab = grid.labels
        inner = np.zeros_like(grid.interior)
        inner[1:-1, 1:-1] = grid.interior[1:-1, 1:-1]
        assert (inner == grid.interior).all()  # interior never touches the box edge
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            shifted = np.roll(lab, (-di, -dj), axis=(0, 1))
            assert (shifted[grid.interior] != EXTERIOR).all()


def test_refinement_monotonicity():
    for h in (0.4, 0.3, 0.2, 0.11, 0.05):
        n1 = int(build_grid(DomainSpec(h=h)).interior.sum())
        n2 = int(build_grid(DomainSpec(h=h / 2)).interior.sum())
        assert n2 >= n1


def test_build_grid_deterministic():
    a = save_grid(build_grid(DomainSpec(h=1 / 48)))
    b = save_grid(build_grid(DomainSpec(h=1 / 48)))
    assert a == b


def test_grid_roundtrip():
    for spec in (
        DomainSpec(h=1 / 16),
        DomainSpec(h=0.25, shape="rectangle", width=1.5, height=2.0),
    ):
        grid = build_grid(spec)
        text = save_grid(grid)
        back = load_grid(text)
        assert back.spec == grid.spec
        assert (back.labels == grid.labels).all()


def test_ball_mask_examples():
    grid = build_grid(DomainSpec(h=1 / 16))
    assert len(ball_mask(grid, (0.5, 0.0), 0.0)) == 0
    all_nodes = ball_mask(grid, (0.5, 0.0), 10.0)
    assert len(all_nodes) == int(grid.nonexterior.sum())
    center_only = ball_mask(grid, (0.5, 0.0), 0.6 * grid.h)
    assert center_only.indices() == [(8, 0)]


def test_mask_helpers():
    grid = build_grid(DomainSpec(h=1 / 8))
    m = Mask.from_indices(grid, [(2, 0), (3, 1)])
    assert (2, 0) in m and (3, -1) not in m
    assert len(m) == 2
    assert Mask.empty(grid).indices() == []
