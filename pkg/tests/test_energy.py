import numpy as np
import pytest
from scipy import integrate

from fbx import (
    DomainSpec,
    EnergyParams,
    Mask,
    ScalarField,
    ball_mask,
    beta_of,
    build_grid,
    dirichlet_graph_energy,
    el_residual,
    halfplane_constant,
    halfplane_profile,
    harmonic_replacement,
    load_field,
    potential,
    save_field,
    smoothed_potential,
    total_energy,
)
from fbx.energy import HarmonicRegionError


P = EnergyParams(1.0, 1.0, 0.5)


def test_beta_of():
    assert beta_of(0.5) == pytest.approx(4 / 3, abs=1e-15)
    assert beta_of(2 / 3) == pytest.approx(1.5, abs=1e-12)
    assert abs(beta_of(1e-6) - 1.0) < 1e-5
    assert abs(beta_of(1 - 1e-6) - 2.0) < 1e-5
    for bad in (0.0, 1.0, -0.3, 1.7):
        with pytest.raises(ValueError):
            beta_of(bad)


def test_params_validation():
    with pytest.raises(ValueError):
        EnergyParams(0.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        EnergyParams(1.0, -2.0, 0.5)
    with pytest.raises(ValueError):
        EnergyParams(1.0, 1.0, 1.5)
    # beta is derived, never stored
    assert "beta" not in EnergyParams(1.0, 1.0, 0.5).__dict__


def test_potential_examples():
    assert potential(0.0, P) == 0.0
    assert potential(1.0, P) == pytest.approx(2.0, abs=1e-15)
    assert potential(-4.0, EnergyParams(1.0, 0.5, 0.5)) == pytest.approx(2.0, abs=1e-14)
    s = np.array([-1.0, 0.0, 2.0])
    assert (potential(s, P) >= 0).all()


def test_potential_sign_symmetry():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        s = rng.normal() * 3
        lp, lm = rng.uniform(0.1, 5, size=2)
        p = rng.uniform(0.05, 0.95)
        a = potential(s, EnergyParams(lp, lm, p))
        b = potential(-s, EnergyParams(lm, lp, p))
        assert a == pytest.approx(b, rel=1e-14, abs=1e-300)


def test_smoothed_potential_examples():
    v, _ = smoothed_potential(0.0, P, 0.37)
    assert v == 0.0
    v, _ = smoothed_potential(1.0, P, 0.0)
    assert v == pytest.approx(potential(1.0, P), abs=1e-15)
    v, _ = smoothed_potential(1.0, P, 1.0)
    assert v == pytest.approx(2 * (2**0.25 - 1), abs=1e-12)


def test_smoothed_derivative_matches_fd():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(1000):
        s = rng.normal() * 2
        eps = 10 ** rng.uniform(-3, 0)
        lp, lm = rng.uniform(0.2, 3, size=2)
        p = rng.uniform(0.1, 0.9)
        params = EnergyParams(lp, lm, p)
        _, d = smoothed_potential(s, params, eps)
        step = 1e-6 * max(1.0, abs(s))
        vp, _ = smoothed_potential(s + step, params, eps)
        vm, _ = smoothed_potential(s - step, params, eps)
        fd = (vp - vm) / (2 * step)
        worst = max(worst, abs(fd - d) / max(1e-12, abs(fd)))
    assert worst < 1e-6


def test_smoothed_converges_pointwise():
    rng = np.random.default_rng(3)
    s = rng.normal(size=200) * 2
    for eps in (0.3, 0.05, 1e-3):
        lp, lm = 1.3, 0.6
        params = EnergyParams(lp, lm, 0.5)
        v, _ = smoothed_potential(s, params, eps)
        gap = np.abs(v - potential(s, params))
        assert (gap <= 4 * max(lp, lm) * eps**0.5 + 1e-14).all()


def test_smoothed_derivative_bounded():
    params = EnergyParams(2.0, 1.0, 0.5)
    eps = 0.01
    s = np.linspace(-5, 5, 10001)
    _, d = smoothed_potential(s, params, eps)
    bound = 2 * max(2.0, 1.0) * 0.5 * eps ** (0.5 - 1)
    assert (np.abs(d) <= bound + 1e-12).all()


def test_total_energy_zero_and_constant():
    grid = build_grid(DomainSpec(h=1 / 64))
    assert total_energy(ScalarField.zeros(grid), P) == 0.0
    ones = ScalarField.from_function(grid, lambda x1, x2: np.ones_like(x1))
    # constant integrand 2 over the half-disk of area pi/2
    assert abs(total_energy(ones, P) - np.pi) < 12 * grid.h


def test_total_energy_linear_oracle():
    grid = build_grid(DomainSpec(h=1 / 128))
    u = ScalarField.from_function(grid, lambda x1, x2: x1)
    oracle = integrate.dblquad(
        lambda t, r: r * (1 + 2 * np.sqrt(r * np.cos(t))), 0, 1, -np.pi / 2, np.pi / 2
    )[0]
    e = total_energy(u, P)
    assert abs(e - oracle) / oracle < 0.01
    # Dirichlet part alone is the half-disk area
    zero_pot = EnergyParams(1e-300, 1e-300, 0.5)
    assert total_energy(u, zero_pot) == pytest.approx(np.pi / 2, rel=0.01)


def test_total_energy_refinement():
    # quadratic test field on the lattice-aligned rectangle: quadrature error
    # is pure interior truncation and successive differences shrink by ~4
    energies = []
    for hinv in (8, 16, 32, 64):
        grid = build_grid(
            DomainSpec(h=1 / hinv, shape="rectangle", width=1.0, height=2.0)
        )
        u = ScalarField.from_function(grid, lambda x1, x2: x1**2)
        energies.append(total_energy(u, P))
    diffs = np.abs(np.diff(energies))
    assert (diffs[:-1] / diffs[1:] >= 1.8).all()
    # on the half-disk the values still approach the polar oracle
    oracle = integrate.dblquad(
        lambda t, r: r * ((2 * r * np.cos(t)) ** 2 + 2 * r * np.cos(t)),
        0, 1, -np.pi / 2, np.pi / 2,
    )[0]
    errs = []
    for hinv in (32, 128):
        grid = build_grid(DomainSpec(h=1 / hinv))
        u = ScalarField.from_function(grid, lambda x1, x2: x1**2)
        errs.append(abs(total_energy(u, P) - oracle))
    assert errs[1] < errs[0]


def test_el_residual_constant():
    grid = build_grid(DomainSpec(h=1 / 32))
    ones = ScalarField.from_function(grid, lambda x1, x2: np.ones_like(x1))
    r = el_residual(ones, P, dead_band=1e-3)
    vals = r.values[grid.interior]
    assert vals == pytest.approx(-0.5, abs=1e-12)
    zeros = ScalarField.zeros(grid)
    assert (el_residual(zeros, P, dead_band=1e-3).values == 0).all()
    with pytest.raises(ValueError):
        el_residual(ones, P, dead_band=0.0)


def test_el_residual_profile_convergence():
    # truncation of the 5-point stencil on the exact half-plane profile decays
    # under refinement away from the degenerate boundary
    res = {}
    for hinv in (64, 128):
        grid = build_grid(DomainSpec(h=1 / hinv))
        u = halfplane_profile(grid, P)
        r = el_residual(u, P, dead_band=grid.h**P.beta)
        sel = grid.interior & (grid.x1() > 0.2)
        res[hinv] = np.abs(r.values[sel]).max()
    assert res[64] / res[128] >= 1.8


def test_harmonic_replacement_basic():
    grid = build_grid(DomainSpec(h=1 / 32))
    u = ScalarField.from_function(grid, lambda x1, x2: np.abs(x2))
    region = Mask(grid, ball_mask(grid, (0.5, 0.0), 0.3).nodes & grid.interior)
    v = harmonic_replacement(u, region)
    # unchanged outside the region
    outside = grid.nonexterior & ~region.nodes
    assert (v.values[outside] == u.values[outside]).all()
    # strict energy decrease for the kinked field
    assert dirichlet_graph_energy(v, region) < dirichlet_graph_energy(u, region)
    # fixed point of the replacement
    v2 = harmonic_replacement(v, region)
    assert np.abs(v2.values - v.values).max() < 1e-10
    # empty region: unchanged, not an error
    assert harmonic_replacement(u, Mask.empty(grid)) is u
    with pytest.raises(HarmonicRegionError):
        harmonic_replacement(u, Mask(grid, grid.arc.copy()))


def test_harmonic_replacement_dense_oracle():
    # cross-check the sparse solve against a dense direct solve
    grid = build_grid(DomainSpec(h=1 / 8))
    rng = np.random.default_rng(5)
    u = ScalarField(grid, np.where(grid.nonexterior, rng.normal(size=grid.shape), 0.0))
    region = Mask(grid, ball_mask(grid, (0.5, 0.0), 0.25).nodes & grid.interior)
    v = harmonic_replacement(u, region)
    idx = {ij: k for k, ij in enumerate(region.indices())}
    n = len(idx)
    A = np.zeros((n, n))
    b = np.zeros(n)
    for (i, j), k in idx.items():
        A[k, k] = 4.0
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nb = (i + di, j + dj)
            if nb in idx:
                A[k, idx[nb]] = -1.0
            else:
                b[k] += u.values[nb[0], nb[1] - grid.jmin]
    dense = np.linalg.solve(A, b)
    for (i, j), k in idx.items():
        assert v.values[i, j - grid.jmin] == pytest.approx(dense[k], abs=1e-10)


def test_harmonic_replacement_never_increases_energy():
    grid = build_grid(DomainSpec(h=1 / 16))
    rng = np.random.default_rng(17)
    region = Mask(grid, ball_mask(grid, (0.4, 0.1), 0.3).nodes & grid.interior)
    for _ in range(20):
        u = ScalarField(
            grid, np.where(grid.nonexterior, rng.normal(size=grid.shape), 0.0)
        )
        v = harmonic_replacement(u, region)
        assert (
            dirichlet_graph_energy(v, region)
            <= dirichlet_graph_energy(u, region) + 1e-10
        )


def test_field_io_roundtrip():
    grid = build_grid(DomainSpec(h=1 / 32))
    rng = np.random.default_rng(2)
    u = ScalarField(grid, np.where(grid.nonexterior, rng.normal(size=grid.shape), 0.0))
    blob = save_field(u)
    back = load_field(blob)
    assert np.array_equal(back.values, u.values)
    assert back.grid.spec == grid.spec
    # same bytes when re-serialized
    assert save_field(back) == blob
    with pytest.raises(ValueError):
        load_field(blob[:-8])


def test_field_validation():
    grid = build_grid(DomainSpec(h=1 / 16))
    bad = np.zeros(grid.shape)
    bad[grid.interior] = np.nan
    with pytest.raises(ValueError):
        ScalarField(grid, bad)
    u = halfplane_profile(grid, P)
    assert u.admissible
    v = u.with_values(u.values + 1.0)
    assert not v.admissible


def test_halfplane_profile_solves_equation():
    # c (x1+)^beta with c from halfplane_constant satisfies the equation to
    # truncation accuracy
    grid = build_grid(DomainSpec(h=1 / 64))
    u = halfplane_profile(grid, P)
    r = el_residual(u, P, dead_band=grid.h**P.beta)
    sel = grid.interior & (grid.x1() > 0.3)
    assert np.abs(r.values[sel]).max() < 5e-3
    assert halfplane_constant(1.0, 0.5) == pytest.approx((9 / 8) ** (2 / 3), abs=1e-14)
