"""Quantitative verification suite.

Everything here measures a property that minimizers of the two-phase singular
energy are supposed to have:

* ``weiss`` / ``weiss_series``: the scale-normalized Weiss functional
  W(r) = r^(-2b) * int_{B_r+} (|grad u|^2 + G(u)) - (b / r^(1+2b)) * int_{arc} u^2,
  b = beta; monotone non-decreasing in r for minimizers and constant exactly
  on beta-homogeneous fields.
* ``growth_fit``: log-log slope of S_r = sup |u| over half-balls, which should
  equal beta at degenerate free boundary points.
* ``nondeg_check``: the lower bound sup_{arc of B_r, u>0} u >= c * r^beta with
  the barrier constant c = (p/(2*beta))^(beta/2).
* ``subharmonic_witness``: the discrete Laplacian of
  w = |u|^(2/beta) - (p/(2*beta)) |x-y|^2, nonnegative on the positivity set
  of a minimizer.
* ``blowup`` / ``match_profile``: zoom rescalings u(x0 + r x)/r^beta and their
  distance to the half-plane profile c * (x1+)^beta.
* ``campanato_rate``: decay exponent of demeaned gradient oscillation
  integrals, the quantity behind C^{1,alpha} control up to the fixed boundary.
* ``halfplane_constant`` / ``angular_profile``: closed-form and ODE oracles
  for the homogeneous profiles r^beta * phi(theta), where phi solves
  phi'' + beta^2 phi = p * lam * phi^(p-1) with zero endpoint values.

Bulk integrals use midpoint-in-radius times trapezoid-in-angle quadrature of
bilinearly interpolated data; circle integrals sample at one-degree
resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import Grid
from .energy import EnergyParams, ScalarField, beta_of, potential
from .freeboundary import (
    BRANCHING,
    POS_ONE_PHASE,
    TWO_PHASE,
    NotAFreeBoundaryPointError,
    classify_point,
)
from .interp import nodal_gradient, sample_values

_DEG = math.pi / 180.0


class RadiusTooSmallError(ValueError):
    """Radius below the resolvable scale (4h)."""


class BallExitsDomainError(ValueError):
    """The requested half-ball is not contained in the grid."""


class WrongPhaseError(ValueError):
    """Center is not a positive-phase free boundary point."""


class EmptyPositivitySetError(ValueError):
    """The field has no resolvable positivity region."""


class DegenerateFieldError(ValueError):
    """The field vanishes on every requested ball."""


def halfplane_constant(lam: float, p: float) -> float:
    """The unique c > 0 making c*(x1+)^beta solve the Euler-Lagrange equation.

    c = (p*lam / (beta*(beta-1)))^(1/(2-p)).
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    beta = beta_of(p)
    return (p * lam / (beta * (beta - 1.0))) ** (1.0 / (2.0 - p))


def halfplane_profile(grid: Grid, params: EnergyParams, sign: float = 1.0) -> ScalarField:
    """The half-plane profile field sign * c * (x1+)^beta sampled on a grid."""
    lam = params.lambda_plus if sign > 0 else params.lambda_minus
    c = halfplane_constant(lam, params.p)
    beta = params.beta
    s = 1.0 if sign > 0 else -1.0
    return ScalarField.from_function(
        grid, lambda x1, x2: s * c * np.maximum(x1, 0.0) ** beta
    )


def _require_ball(grid: Grid, x0, r: float) -> None:
    if not grid.contains(x0):
        raise BallExitsDomainError(f"center {x0} outside the domain")
    if r > grid.outer_clearance(x0) - 2 * grid.h:
        raise BallExitsDomainError(
            f"ball of radius {r} at {x0} exits the domain"
        )


def _circle_nodes(x0, r: float):
    """One-degree circle sampling; half circle for centers on the fixed
    boundary, full circle otherwise (clipped to x1 > 0 by weight)."""
    on_pi = abs(x0[0]) < 1e-12
    if on_pi:
        thetas = np.linspace(-math.pi / 2, math.pi / 2, 181)
        w = np.full(181, _DEG)
        w[0] *= 0.5
        w[-1] *= 0.5
    else:
        thetas = np.arange(360) * _DEG
        w = np.full(360, _DEG)
    x1 = x0[0] + r * np.cos(thetas)
    x2 = x0[1] + r * np.sin(thetas)
    w = np.where(x1 >= 0.0, w, 0.0)
    x1 = np.maximum(x1, 0.0)
    return x1, x2, w


def weiss(
    u: ScalarField,
    x0,
    r: float,
    params: EnergyParams,
    weiss_factor: int = 1,
) -> float:
    """The scale-normalized energy of u in the half-ball B_r(x0).

    ``weiss_factor`` multiplies the potential density in the bulk term:
    1 uses the energy density |grad u|^2 + G(u) (default), 2 uses
    |grad u|^2 + 2 G(u).  Both variants are constant on beta-homogeneous
    fields in 2D; the switch exists so the alternative is testable.
    """
    grid = u.grid
    h = grid.h
    if r < 4 * h:
        raise RadiusTooSmallError(f"r={r} below 4h={4*h}")
    _require_ball(grid, x0, r)
    if weiss_factor not in (1, 2):
        raise ValueError("weiss_factor must be 1 or 2")
    beta = params.beta

    # bulk: the same per-cell quadrature the energy uses, restricted to the
    # ball by a feathered indicator at cell centers (first-order in h, smooth
    # in r).  Using the energy's own quadrature keeps the monotonicity that
    # minimality provides.
    v = u.values
    a = v[:-1, :-1]
    b = v[1:, :-1]
    c = v[:-1, 1:]
    d = v[1:, 1:]
    ux = (b - a + d - c) / (2 * h)
    uy = (c - a + d - b) / (2 * h)
    t = a + d - b - c
    dens = h * h * (ux * ux + uy * uy) + t * t / 6.0
    gpot = potential(v, params)
    dens = dens + weiss_factor * (h * h / 4.0) * (
        gpot[:-1, :-1] + gpot[1:, :-1] + gpot[:-1, 1:] + gpot[1:, 1:]
    )
    cx = (np.arange(grid.imax) + 0.5) * h
    cy = (np.arange(grid.jmin, grid.jmax) + 0.5) * h
    cdist = np.sqrt((cx[:, None] - x0[0]) ** 2 + (cy[None, :] - x0[1]) ** 2)
    feather = np.clip((r - cdist) / h + 0.5, 0.0, 1.0)
    bulk = float((dens * feather)[grid.cell_mask].sum())

    x1, x2, w = _circle_nodes(x0, r)
    vals = sample_values(u.values, grid, x1, x2)
    boundary = float(r * (w * vals * vals).sum())

    return r ** (-2 * beta) * bulk - beta / r ** (1 + 2 * beta) * boundary


@dataclass
class WeissSeries:
    center: tuple[float, float]
    radii: np.ndarray
    values: np.ndarray
    monotone_verdict: bool
    slack: float  # magnitude of the worst negative increment (0 if monotone)


def weiss_series(
    u: ScalarField,
    x0,
    radii,
    params: EnergyParams,
    slack_tol: float = 0.0,
    weiss_factor: int = 1,
) -> WeissSeries:
    """W(r) over an ascending radius list with a monotonicity verdict.

    The verdict is true iff every increment is >= -slack_tol.
    """
    radii = np.asarray(sorted(radii), dtype=np.float64)
    if len(radii) < 2:
        raise ValueError("need at least two radii")
    values = np.array([weiss(u, x0, r, params, weiss_factor) for r in radii])
    inc = np.diff(values)
    slack = float(max(0.0, -inc.min())) if len(inc) else 0.0
    verdict = bool((inc >= -slack_tol).all())
    return WeissSeries((float(x0[0]), float(x0[1])), radii, values, verdict, slack)


@dataclass
class GrowthFit:
    center: tuple[float, float]
    radii: np.ndarray
    suprema: np.ndarray
    exponent: float
    amplitude: float  # exp(intercept) of the log-log fit
    residual: float


def growth_fit(u: ScalarField, x0, radii) -> GrowthFit:
    """Least-squares slope of log sup_{B_r+} |u| against log r."""
    grid = u.grid
    radii = np.asarray(sorted(radii), dtype=np.float64)
    if radii[0] < 4 * grid.h:
        raise RadiusTooSmallError("smallest radius below 4h")
    d2 = (grid.x1() - x0[0]) ** 2 + (grid.x2() - x0[1]) ** 2
    absu = np.abs(u.values)
    sup = np.array(
        [float(absu[(d2 <= r * r) & grid.nonexterior].max()) for r in radii]
    )
    if not (sup > 0).all():
        raise DegenerateFieldError("field vanishes on a requested ball")
    A = np.vstack([np.log(radii), np.ones_like(radii)]).T
    coef, res, *_ = np.linalg.lstsq(A, np.log(sup), rcond=None)
    resid = float(np.sqrt(res[0] / len(radii))) if len(res) else 0.0
    return GrowthFit(
        (float(x0[0]), float(x0[1])),
        radii,
        sup,
        float(coef[0]),
        float(np.exp(coef[1])),
        resid,
    )


def nondeg_floor(params: EnergyParams) -> float:
    """Non-degeneracy floor constant (p / (2 beta))^(beta/2)."""
    beta = params.beta
    return (params.p / (2.0 * beta)) ** (beta / 2.0)


@dataclass
class NondegReport:
    center: tuple[float, float]
    radii: np.ndarray
    measured: np.ndarray  # sup of u over the positive part of the r-circle
    floors: np.ndarray  # floor_constant * r^beta
    passes: np.ndarray  # measured >= slack * floor
    floor_constant: float
    slack: float

    @property
    def all_pass(self) -> bool:
        return bool(self.passes.all())


def nondeg_check(
    u: ScalarField,
    x0,
    radii,
    params: EnergyParams,
    slack: float = 0.9,
) -> NondegReport:
    """Check sup_{arc of B_r(x0), u > 0} u >= slack * floor * r^beta.

    The center must be a positive-phase free boundary point.
    """
    grid = u.grid
    try:
        cls = classify_point(
            u, x0, max(2 * grid.h, 4 * grid.h), grad_tol=np.inf, params=params
        )
    except NotAFreeBoundaryPointError as exc:
        raise WrongPhaseError(str(exc)) from exc
    if cls not in (POS_ONE_PHASE, TWO_PHASE, BRANCHING):
        raise WrongPhaseError(f"center classifies as {cls}")

    radii = np.asarray(sorted(radii), dtype=np.float64)
    beta = params.beta
    c0 = nondeg_floor(params)
    measured = []
    for r in radii:
        _require_ball(grid, x0, r)
        x1, x2, w = _circle_nodes(x0, r)
        vals = sample_values(u.values, grid, x1, x2)
        vals = vals[w > 0]
        top = float(vals.max()) if vals.size else 0.0
        measured.append(max(top, 0.0))
    measured = np.array(measured)
    floors = c0 * radii**beta
    passes = measured >= slack * floors
    return NondegReport(
        (float(x0[0]), float(x0[1])), radii, measured, floors, passes, c0, slack
    )


def subharmonic_witness(
    u: ScalarField,
    y,
    params: EnergyParams,
    tau: float | None = None,
    r: float | None = None,
) -> float:
    """Minimum discrete Laplacian of w = |u|^(2/beta) - c |x-y|^2, c = p/(2 beta),
    over interior nodes of B_r(y) whose own and whose four neighbors' values
    exceed tau.

    Nonnegative (up to O(h^(2 beta - 2)) slack) when u minimizes the energy;
    a strictly negative minimum flags a non-minimizer.  The default ball
    radius keeps a 6h collar away from the snapped outer boundary: the
    comparison argument lives in a ball inside the domain, and within the
    snapping collar the 5-point stencil is not a faithful Laplacian.
    """
    grid = u.grid
    if not grid.contains(y):
        raise ValueError(f"witness center {y} outside the domain")
    h = grid.h
    beta = params.beta
    if tau is None:
        tau = h**beta
    if r is None:
        r = grid.outer_clearance(y) - 6 * h
    if not r > 0:
        raise ValueError("witness ball is empty (center too close to boundary)")
    c = params.p / (2.0 * beta)

    v = u.values
    w = np.abs(v) ** (2.0 / beta) - c * (
        (grid.x1() - y[0]) ** 2 + (grid.x2() - y[1]) ** 2
    )
    pos = v > tau
    ok = grid.interior & (
        (grid.x1() - y[0]) ** 2 + (grid.x2() - y[1]) ** 2 <= r * r
    )
    ok[1:-1, 1:-1] &= (
        pos[1:-1, 1:-1]
        & pos[2:, 1:-1]
        & pos[:-2, 1:-1]
        & pos[1:-1, 2:]
        & pos[1:-1, :-2]
    )
    ok[0, :] = False
    ok[-1, :] = False
    ok[:, 0] = False
    ok[:, -1] = False
    if not ok.any():
        raise EmptyPositivitySetError("no interior node with a positive collar")
    lap = (
        w[2:, 1:-1] + w[:-2, 1:-1] + w[1:-1, 2:] + w[1:-1, :-2] - 4 * w[1:-1, 1:-1]
    ) / (h * h)
    return float(lap[ok[1:-1, 1:-1]].min())


def blowup(
    u: ScalarField, x0, r: float, reference_grid: Grid, params: EnergyParams
) -> ScalarField:
    """Bilinear resampling of u(x0 + r x) / r^beta onto a reference grid."""
    if not r > 0:
        raise ValueError("scale must be positive")
    grid = u.grid
    scale_extent = (
        reference_grid.spec.radius
        if reference_grid.spec.shape == "half_disk"
        else max(reference_grid.spec.width, reference_grid.spec.height / 2)
    )
    if r * scale_extent > grid.outer_clearance(x0) + 2 * grid.h:
        raise BallExitsDomainError("rescaled window exits the source domain")
    beta = params.beta
    X1 = np.minimum(x0[0] + r * reference_grid.x1(), grid.imax * grid.h)
    X2 = np.clip(
        x0[1] + r * reference_grid.x2(),
        grid.jmin * grid.h,
        grid.jmax * grid.h,
    )
    vals = sample_values(u.values, grid, X1, X2) / r**beta
    vals = np.where(reference_grid.nonexterior, vals, 0.0)
    return ScalarField(reference_grid, vals)


@dataclass
class ProfileMatch:
    sign: str  # "+" or "-"
    c_fit: float
    linf_error: float


def match_profile(v: ScalarField, params: EnergyParams) -> ProfileMatch:
    """Least-squares fit of v against the half-plane profile shape (x1+)^beta
    on the unit half-ball, reporting the signed amplitude and sup mismatch."""
    grid = v.grid
    beta = params.beta
    sel = grid.nonexterior & (grid.x1() ** 2 + grid.x2() ** 2 <= 1.0 + 1e-12)
    phi = np.maximum(grid.x1(), 0.0) ** beta
    num = float((v.values * phi)[sel].sum())
    den = float((phi * phi)[sel].sum())
    c_signed = num / den if den > 0 else 0.0
    err = float(np.abs(v.values - c_signed * phi)[sel].max())
    return ProfileMatch("+" if c_signed >= 0 else "-", abs(c_signed), err)


@dataclass
class BlowupSequence:
    center: tuple[float, float]
    scales: np.ndarray
    fields: list[ScalarField]
    matches: list[ProfileMatch]

    @property
    def distances(self) -> np.ndarray:
        return np.array([m.linf_error for m in self.matches])


def blowup_sequence(
    u: ScalarField, x0, scales, reference_grid: Grid, params: EnergyParams
) -> BlowupSequence:
    """Zoom rescalings at decreasing scales with profile-match distances."""
    scales = np.asarray(sorted(scales, reverse=True), dtype=np.float64)
    fields = [blowup(u, x0, float(r), reference_grid, params) for r in scales]
    matches = [match_profile(f, params) for f in fields]
    return BlowupSequence((float(x0[0]), float(x0[1])), scales, fields, matches)


def campanato_rate(u: ScalarField, x0, radii) -> tuple[float, np.ndarray]:
    """Decay exponent of demeaned gradient oscillation integrals.

    The discrete gradient is sampled where the energy quadrature sees it: at
    cell midpoints, from cell-corner differences.  For each radius the
    gradient over the ball is demeaned (per-radius mean, playing the role of
    the tangent vector at that scale) and the squared deviation integrated;
    the fitted exponent alpha satisfies  integral ~ r^(2 + 2 alpha).  Returns
    (alpha, A0) where A0 is the mean gradient over the smallest ball.  A
    gradient that is constant to machine precision reports alpha = inf.
    """
    grid = u.grid
    h = grid.h
    radii = np.asarray(sorted(radii), dtype=np.float64)
    if radii[0] < 4 * h:
        raise RadiusTooSmallError("smallest radius below 4h")
    v = u.values
    a = v[:-1, :-1]
    b = v[1:, :-1]
    c = v[:-1, 1:]
    d = v[1:, 1:]
    gx = (b - a + d - c) / (2 * h)
    gy = (c - a + d - b) / (2 * h)
    cm = grid.cell_mask
    cx = (np.arange(grid.imax) + 0.5) * h
    cy = (np.arange(grid.jmin, grid.jmax) + 0.5) * h
    dist = np.sqrt((cx[:, None] - x0[0]) ** 2 + (cy[None, :] - x0[1]) ** 2)
    integrals = []
    A0 = None
    for r in radii:
        # feathered ball indicator at cell centers: first-order quadrature of
        # the ball integral, smooth in r
        wsel = np.where(cm, np.clip((r - dist) / h + 0.5, 0.0, 1.0), 0.0)
        wsum = float(wsel.sum())
        if wsum == 0.0:
            raise DegenerateFieldError(f"no quadrature cell in ball r={r}")
        mx = float((wsel * gx).sum()) / wsum
        my = float((wsel * gy).sum()) / wsum
        if A0 is None:
            A0 = np.array([mx, my])
        integrals.append(
            float(h * h * (wsel * ((gx - mx) ** 2 + (gy - my) ** 2)).sum())
        )
    integrals = np.array(integrals)
    scale = float((h * h * (gx**2 + gy**2))[cm].sum())
    if (integrals <= 1e-18 * max(1.0, scale)).all():
        return float("inf"), A0
    A = np.vstack([np.log(radii), np.ones_like(radii)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(integrals), rcond=None)
    return (float(coef[0]) - 2.0) / 2.0, A0


@dataclass
class AngularProfile:
    gamma: float
    thetas: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    success: bool
    mismatch: float


_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(64)
_GAUSS_S = 0.5 * (_GAUSS_X + 1.0)
_GAUSS_W = 0.5 * _GAUSS_W


def _time_to_zero(phi, psi, lam, p, b2):
    """Angle for the trajectory to reach phi = 0 from (phi, psi < 0).

    Uses the conserved energy E = psi^2/2 + b2 phi^2/2 - lam phi^p, so the
    result is exact for the continuum ODE up to quadrature error; the
    substitution phi' = phi * s^(2/(2-p)) removes the endpoint singularity of
    the zero-energy (separatrix) trajectory.  Returns None when E < 0, i.e.
    the trajectory turns around before reaching zero.
    """
    E = 0.5 * psi * psi + 0.5 * b2 * phi * phi - lam * phi**p
    if E < 0.0:
        return None
    q = 2.0 / (2.0 - p)
    s = _GAUSS_S
    radicand = 2.0 * E + 2.0 * lam * phi**p * s ** (p * q) - b2 * phi * phi * s ** (
        2.0 * q
    )
    radicand = np.maximum(radicand, 0.0)
    with np.errstate(divide="ignore"):
        integrand = q * phi * s ** (q - 1.0) / np.sqrt(radicand)
    if not np.isfinite(integrand).all():
        return None
    return float((_GAUSS_W * integrand).sum())


def _shoot_first_zero(a, target_theta, lam, p, beta, step, record=False):
    """RK4 integration of phi'' + beta^2 phi = p lam phi^(p-1) from
    (phi, phi') = (a, 0); returns (first zero angle or None, samples).

    The singular term is regularized by (phi^2 + eps^2)^((p-2)/2) with
    eps = 1e-12.  Once phi drops into the endpoint window the remaining angle
    to the zero is closed with :func:`_time_to_zero`; a step that jumps
    straight across zero (very steep trajectories) falls back to linear
    extrapolation from the previous state.
    """
    eps2 = 1e-24
    em = (p - 2.0) / 2.0
    b2 = beta * beta
    plam = p * lam
    hand = 5e-3 * max(a, 1.0)
    theta = 0.0
    phi = a
    psi = 0.0
    thetas = [0.0]
    phis = [a]
    max_theta = target_theta + 0.45
    h6 = step / 6.0

    while theta < max_theta:
        if phi <= 0.0:
            # jumped across zero within one step; back off to the last state
            p_phi, p_psi, p_theta = prev
            if p_psi < 0:
                return p_theta + p_phi / (-p_psi), (thetas, phis)
            return None, (thetas, phis)
        if phi <= hand and psi < 0.0:
            tail = _time_to_zero(phi, psi, lam, p, b2)
            if tail is None:
                return None, (thetas, phis)
            return theta + tail, (thetas, phis)
        if psi > 0.0 and theta > step:
            return None, (thetas, phis)  # turned around before reaching zero
        prev = (phi, psi, theta)
        k1a = psi
        k1b = plam * phi * (phi * phi + eps2) ** em - b2 * phi
        y0 = phi + 0.5 * step * k1a
        y1 = psi + 0.5 * step * k1b
        k2a = y1
        k2b = plam * y0 * (y0 * y0 + eps2) ** em - b2 * y0
        y0 = phi + 0.5 * step * k2a
        y1 = psi + 0.5 * step * k2b
        k3a = y1
        k3b = plam * y0 * (y0 * y0 + eps2) ** em - b2 * y0
        y0 = phi + step * k3a
        y1 = psi + step * k3b
        k4a = y1
        k4b = plam * y0 * (y0 * y0 + eps2) ** em - b2 * y0
        phi += h6 * (k1a + 2 * k2a + 2 * k3a + k4a)
        psi += h6 * (k1b + 2 * k2b + 2 * k3b + k4b)
        theta += step
        if record:
            thetas.append(theta)
            phis.append(phi)
    return None, (thetas, phis)


def angular_profile(
    gamma: float, lam: float, p: float, ode_tol: float = 1e-8
) -> AngularProfile:
    """Symmetric positive profile phi on (-gamma/2, gamma/2) with
    phi(+-gamma/2) = 0 and phi'(0) = 0, found by shooting on phi(0).

    Homogeneous solutions r^beta phi(theta) exist only for openings
    gamma > pi/beta; smaller openings report a failure flag (no exception).
    For gamma = pi the profile is c * cos(theta)^beta with the half-plane
    constant c.
    """
    if not 0 < gamma <= math.pi:
        raise ValueError("gamma must lie in (0, pi]")
    if not lam > 0:
        raise ValueError("lam must be positive")
    beta = beta_of(p)
    target = gamma / 2.0
    step = math.pi / 7200.0
    b2 = beta * beta
    # amplitude of the zero-energy trajectory; zeros exist only at or above it
    a_sep = (2.0 * lam / b2) ** (1.0 / (2.0 - p))

    def hits(a):
        z, _ = _shoot_first_zero(a, target, lam, p, beta, step)
        return z is not None and z <= target

    lo = 0.9 * a_sep
    hi = None
    a = a_sep
    for _ in range(61):
        if hits(a):
            hi = a
            break
        lo = a
        a *= 2.0
    if hi is None:
        return AngularProfile(gamma, np.zeros(0), np.zeros(0), False, float("inf"))

    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if hits(mid):
            hi = mid
        else:
            lo = mid

    a_star = hi
    theta0, (ts, ps) = _shoot_first_zero(
        a_star, target, lam, p, beta, step, record=True
    )
    mismatch = abs(theta0 - target) if theta0 is not None else float("inf")
    # openings at or below pi/beta are only approached as the amplitude blows
    # up; a runaway amplitude means there is no genuine profile
    success = bool(mismatch <= ode_tol) and a_star <= 1e6 * a_sep
    ts = np.asarray(ts)
    ps = np.asarray(ps)
    keep = ps > 0
    ts, ps = ts[keep], ps[keep]
    ts = np.append(ts, target)
    ps = np.append(ps, 0.0)
    thetas = np.concatenate([-ts[:0:-1], ts])
    values = np.concatenate([ps[:0:-1], ps])
    return AngularProfile(gamma, thetas, values, success, float(mismatch))
