import numpy as np
import pytest

from fbx import (
    BRANCHING,
    NEG_ONE_PHASE,
    POS_ONE_PHASE,
    TWO_PHASE,
    ConeSpec,
    DomainSpec,
    EnergyParams,
    NotAFreeBoundaryPointError,
    ScalarField,
    boundary_from_json,
    boundary_to_json,
    build_grid,
    classify_point,
    cone_check,
    extract_free_boundary,
    minimize,
    normal_at,
    tangency_profile,
)
from fbx.freeboundary import Chain, DegenerateFitError, FreeBoundary, default_grad_tol

from conftest import deep_schedule, halfplane_trace

P = EnergyParams(1.0, 1.0, 0.5)


def straight_chain(x1=0.2, n=21, lo=-0.5, hi=0.5):
    pts = np.array([[x1, t] for t in np.linspace(lo, hi, n)])
    normals = np.tile([1.0, 0.0], (n, 1))
    return FreeBoundary([Chain("plus", pts, [POS_ONE_PHASE] * n, normals)])


def test_extract_linear_rectangle():
    grid = build_grid(DomainSpec(h=0.25, shape="rectangle", width=1.0, height=2.0))
    u = ScalarField.from_function(grid, lambda x1, x2: x1 - 0.5)
    tau = 1e-6
    fb = extract_free_boundary(u, tau, params=P)
    plus = [c for c in fb.chains if c.phase == "plus"]
    minus = [c for c in fb.chains if c.phase == "minus"]
    assert len(plus) == 1 and len(minus) == 1
    # linear interpolation is exact: the level-tau polyline is x1 = 0.5 + tau
    assert np.abs(plus[0].points[:, 0] - (0.5 + tau)).max() < 1e-12
    assert np.abs(minus[0].points[:, 0] - (0.5 - tau)).max() < 1e-12
    assert len(plus[0].points) == 9  # one vertex per lattice row
    with pytest.raises(ValueError):
        extract_free_boundary(u, 0.0, params=P)


def test_extract_constant_empty():
    grid = build_grid(DomainSpec(h=1 / 8))
    u = ScalarField.from_function(grid, lambda x1, x2: np.ones_like(x1))
    fb = extract_free_boundary(u, 1e-6, params=P)
    assert fb.vertex_count() == 0


def test_extract_profile_levelset():
    grid = build_grid(DomainSpec(h=1 / 64))
    h = grid.h
    beta = P.beta
    u = ScalarField.from_function(grid, lambda x1, x2: np.maximum(x1 - 0.3, 0.0) ** beta)
    tau = h**beta
    fb = extract_free_boundary(u, tau, params=P)
    target = 0.3 + tau ** (1 / beta)  # = 0.3 + h
    pts = fb.all_vertices()
    assert len(pts) > 0
    assert np.abs(pts[:, 0] - target).max() < 2 * h


def test_extract_sign_swap_symmetry():
    grid = build_grid(DomainSpec(h=1 / 32))
    u = ScalarField.from_function(
        grid, lambda x1, x2: x1 - 0.4 - 0.2 * np.sin(3 * x2)
    )
    neg = ScalarField(grid, -u.values)
    swapped = EnergyParams(P.lambda_minus, P.lambda_plus, P.p)
    fb = extract_free_boundary(u, 1e-4, params=P)
    fb2 = extract_free_boundary(neg, 1e-4, params=swapped)
    plus = np.vstack([c.points for c in fb.chains if c.phase == "plus"])
    minus2 = np.vstack([c.points for c in fb2.chains if c.phase == "minus"])
    assert np.array_equal(plus, minus2)
    minus = np.vstack([c.points for c in fb.chains if c.phase == "minus"])
    plus2 = np.vstack([c.points for c in fb2.chains if c.phase == "plus"])
    assert np.array_equal(minus, plus2)


def test_tau_stability_linear():
    grid = build_grid(DomainSpec(h=1 / 64))
    u = ScalarField.from_function(grid, lambda x1, x2: x1 - 0.5)
    tau = 1e-3
    a = extract_free_boundary(u, tau, params=P).all_vertices()
    b = extract_free_boundary(u, tau / 2, params=P).all_vertices()

    def hausdorff(x, y):
        d = np.hypot(x[:, None, 0] - y[None, :, 0], x[:, None, 1] - y[None, :, 1])
        return max(d.min(axis=1).max(), d.min(axis=0).max())

    assert hausdorff(a, b) <= tau / 1.0 + 1e-12  # |grad u| = 1


def test_classify_examples():
    grid = build_grid(DomainSpec(h=1 / 64))
    h = grid.h
    beta = P.beta
    pos = ScalarField.from_function(grid, lambda x1, x2: np.maximum(x1 - 0.3, 0.0) ** beta)
    assert classify_point(pos, (0.3, 0.0), 0.1, 0.1, P) == POS_ONE_PHASE
    neg = ScalarField(grid, -pos.values)
    assert classify_point(neg, (0.3, 0.0), 0.1, 0.1, P) == NEG_ONE_PHASE
    lin = ScalarField.from_function(grid, lambda x1, x2: x1 - 0.3)
    assert classify_point(lin, (0.3, 0.0), 0.1, grad_tol=0.1, params=P) == TWO_PHASE
    two = ScalarField.from_function(
        grid,
        lambda x1, x2: np.maximum(x1 - 0.3, 0.0) ** beta
        - np.maximum(0.3 - x1, 0.0) ** beta,
    )
    assert (
        classify_point(two, (0.3, 0.0), 0.1, default_grad_tol(h, beta), P) == BRANCHING
    )
    with pytest.raises(NotAFreeBoundaryPointError):
        classify_point(ScalarField.zeros(grid), (0.3, 0.0), 0.1, 0.1, P)
    with pytest.raises(ValueError):
        classify_point(pos, (0.3, 0.0), h, 0.1, P)  # r_nbhd below 2h


def test_normals_straight_and_sloped():
    grid = build_grid(DomainSpec(h=1 / 128))
    u = ScalarField.from_function(grid, lambda x1, x2: x1 - 0.5)
    fb = extract_free_boundary(u, 1e-9, params=P)
    plus = [c for c in fb.chains if c.phase == "plus"][0]
    assert np.abs(np.abs(plus.normals[:, 0]) - 1.0).max() < 1e-12
    assert (plus.normals[:, 0] > 0).all()  # oriented toward u > 0

    u2 = ScalarField.from_function(grid, lambda x1, x2: x1 - 0.2 * x2 - 0.3)
    fb2 = extract_free_boundary(u2, 1e-9, params=P)
    chain = [c for c in fb2.chains if c.phase == "plus"][0]
    expect = np.array([1.0, -0.2]) / np.sqrt(1.04)
    mid = len(chain.points) // 2
    assert np.abs(chain.normals[mid] - expect).max() < 1e-9


def test_normals_circle():
    grid = build_grid(DomainSpec(h=1 / 128))
    z = (0.5, 0.0)
    u = ScalarField.from_function(grid, lambda x1, x2: np.hypot(x1 - z[0], x2 - z[1]) - 0.3)
    fb = extract_free_boundary(u, 1e-6, params=P)
    loop = max((c for c in fb.chains if c.phase == "plus"), key=lambda c: len(c.points))
    assert loop.closed
    radial = loop.points - np.array(z)
    radial /= np.hypot(radial[:, 0], radial[:, 1])[:, None]
    cosang = np.abs(np.einsum("ij,ij->i", radial, loop.normals))
    assert np.degrees(np.arccos(np.clip(cosang, -1, 1))).max() < 1.0
    # unit normals
    norms = np.hypot(loop.normals[:, 0], loop.normals[:, 1])
    assert np.abs(norms - 1.0).max() < 1e-12


def test_normal_at():
    fb = straight_chain()
    n = normal_at(fb, 10)
    assert np.allclose(np.abs(n), [1.0, 0.0])
    degenerate = FreeBoundary(
        [Chain("plus", np.zeros((3, 2)), [POS_ONE_PHASE] * 3, np.zeros((3, 2)))]
    )
    with pytest.raises(DegenerateFitError):
        normal_at(degenerate, 1)


def test_cone_check_examples():
    # slope-0.1 line through the apex fits in a 0.2-cone, not in a 0.05-cone
    pts = np.array([[0.2 + 0.1 * t, t] for t in np.linspace(-0.5, 0.5, 41)])
    fb = FreeBoundary([Chain("plus", pts, [POS_ONE_PHASE] * 41, np.tile([1.0, 0.0], (41, 1)))])
    ok, off = cone_check(fb, ConeSpec((0.2, 0.0), 0.2), 0.3)
    assert ok and len(off) == 0
    ok, off = cone_check(fb, ConeSpec((0.2, 0.0), 0.05), 0.3)
    assert not ok
    # every off-apex vertex within rho offends
    within = np.hypot(pts[:, 0] - 0.2, pts[:, 1]) <= 0.3
    assert len(off) == int(within.sum()) - 1
    # a segment along e1 through the apex lies outside every cone
    vert = np.array([[0.2 + t, 0.0] for t in np.linspace(-0.15, 0.15, 11)])
    fbv = FreeBoundary([Chain("plus", vert, [POS_ONE_PHASE] * 11, np.tile([0.0, 1.0], (11, 1)))])
    ok, _ = cone_check(fbv, ConeSpec((0.2, 0.0), 100.0), 0.1)
    assert not ok
    with pytest.raises(ValueError):
        ConeSpec((0.0, 0.0), 0.0)


def test_tangency_profile():
    fb = straight_chain(x1=0.2)
    out = tangency_profile(fb, [0.0, 0.3])
    assert out == [((0.0, 0.3), 0.0)]
    # parabola-like graph bends away from the fixed boundary
    grid = build_grid(DomainSpec(h=1 / 128))
    u = ScalarField.from_function(grid, lambda x1, x2: x1 - 0.5 * x2**2 - 1e-4)
    fb2 = extract_free_boundary(u, 1e-8, params=P)
    bands = tangency_profile(fb2, [0.0, 0.05, 0.2, 0.3])
    assert bands[0][1] < bands[2][1]
    # empty band reports None
    out = tangency_profile(straight_chain(x1=0.2), [0.0, 0.1, 0.3])
    assert out[0][1] is None and out[1][1] == 0.0
    with pytest.raises(ValueError):
        tangency_profile(FreeBoundary([]), [0.0, 1.0])


def test_boundary_json_roundtrip():
    grid = build_grid(DomainSpec(h=1 / 32))
    u = ScalarField.from_function(grid, lambda x1, x2: x1 - 0.2 * x2 - 0.4)
    fb = extract_free_boundary(u, 1e-5, params=P)
    text = boundary_to_json(fb)
    back = boundary_from_json(text)
    assert len(back.chains) == len(fb.chains)
    for c1, c2 in zip(fb.chains, back.chains):
        assert c1.phase == c2.phase and c1.closed == c2.closed
        assert np.array_equal(c1.points, c2.points)
        assert np.array_equal(c1.normals, c2.normals)
        assert c1.classes == c2.classes
    assert boundary_to_json(back) == text


def test_nondegeneracy_stability(grid64, params05):
    # perturbing the boundary data by eta moves the extracted boundary by an
    # amount that shrinks with eta (free boundary points are stable limits)
    sched = deep_schedule(grid64, params05, 4)
    f0 = halfplane_trace(grid64, params05)
    u0, _ = minimize(grid64, f0, params05, sched)

    def hausdorff(x, y):
        d = np.hypot(x[:, None, 0] - y[None, :, 0], x[:, None, 1] - y[None, :, 1])
        return max(d.min(axis=1).max(), d.min(axis=0).max())

    from fbx import BoundaryData, halfplane_constant

    beta = params05.beta
    cc = halfplane_constant(1.0, 0.5)
    dists = []
    for eta in (0.08, 0.02):
        f = BoundaryData.from_function(
            grid64,
            lambda x1, x2, eta=eta: cc * np.maximum(x1, 0.0) ** beta + eta,
            "perturbed",
        )
        u1, _ = minimize(grid64, f, params05, sched)
        eta_actual = np.abs((u1.values - u0.values)[grid64.nonexterior]).max()
        tau = 2 * max(eta_actual, eta)
        a = extract_free_boundary(u0, tau, params=params05).all_vertices()
        b = extract_free_boundary(u1, tau, params=params05).all_vertices()
        dists.append(hausdorff(a, b))
    assert dists[1] < dists[0]


def test_contact_points_are_one_phase(halfplane128, twophase128, grid128, params05):
    # no two-phase point abuts the fixed boundary on any minimizer run
    h = grid128.h
    for u, _ in (halfplane128, twophase128):
        fb = extract_free_boundary(u, h**params05.beta, params=params05)
        pts = fb.all_vertices()
        cls = np.array(fb.all_classes())
        near = pts[:, 0] < 2 * h
        assert near.any()
        assert set(cls[near]) <= {POS_ONE_PHASE, NEG_ONE_PHASE}
