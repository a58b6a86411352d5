"""Discrete minimization of the singular energy by smoothing continuation.

The energy is nonsmooth (and nonconvex) at u = 0, so minimization runs over a
ladder of smoothed energies: eps walks down geometrically from ``eps_start``
to ``eps_min`` (default h^beta, the field's resolvable scale) and each stage
minimizes the eps-smoothed energy warm-started from the previous stage.

The inner solver is damped gradient descent with Barzilai-Borwein step
adaptation and an energy-decrease line search, interleaved with pointwise
Newton relaxation sweeps that drive the per-node gradient to tolerance
(plain descent stalls on the last few digits).  Accepted iterates never
increase the smoothed energy.

Dirichlet data is a hard constraint: fixed-boundary nodes stay at 0 and arc
nodes at their data values through every iteration.  Three starts hedge the
sign ambiguity of the nonconvex energy: the harmonic extension of the data
and its positive and negative absolute values.  The best seed by true energy
wins; ties within 1e-10 relative go to the lowest seed index.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .domain import Grid, Mask
from .energy import (
    EnergyParams,
    ScalarField,
    harmonic_replacement,
    smoothed_energy_and_gradient,
    smoothed_potential,
    total_energy,
)


class InadmissiblePerturbationError(ValueError):
    """Perturbation does not vanish on the pinned boundary."""


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet data on the arc nodes (implicitly 0 on the fixed boundary)."""

    grid: Grid
    values: np.ndarray = field(repr=False)  # full lattice, nonzero only at arc
    name: str = "custom"
    sup_bound: float = 0.0

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError("boundary data shape does not match grid")
        if not np.isfinite(self.values[self.grid.arc]).all():
            raise ValueError("boundary data has non-finite values")
        self.values.setflags(write=False)

    @classmethod
    def from_function(cls, grid: Grid, fn, name: str = "custom") -> "BoundaryData":
        vals = np.zeros(grid.shape)
        arc = grid.arc
        full = np.asarray(fn(grid.x1(), grid.x2()), dtype=np.float64)
        vals[arc] = full[arc]
        sup = float(np.abs(vals[arc]).max()) if arc.any() else 0.0
        return cls(grid, vals, name, sup)

    @classmethod
    def zero(cls, grid: Grid) -> "BoundaryData":
        return cls(grid, np.zeros(grid.shape), "zero", 0.0)


@dataclass(frozen=True)
class Schedule:
    """Continuation and inner-solver knobs."""

    eps_start: float = 1.0
    eps_factor: float = 0.25
    eps_min: float = 1e-3
    inner_tol: float = 1e-4
    max_inner_iters: int = 60000
    seeds: tuple[int, ...] = (0, 1, 2)

    def __post_init__(self):
        if not (self.eps_start > self.eps_min > 0):
            raise ValueError("need eps_start > eps_min > 0")
        if not 0 < self.eps_factor < 1:
            raise ValueError("eps_factor must lie in (0, 1)")
        if not self.inner_tol > 0:
            raise ValueError("inner_tol must be positive")

    def eps_ladder(self) -> list[float]:
        ladder = []
        eps = self.eps_start
        while eps > self.eps_min:
            ladder.append(eps)
            eps *= self.eps_factor
        ladder.append(self.eps_min)
        return ladder


def default_schedule(grid: Grid, params: EnergyParams) -> Schedule:
    """Defaults: eps down to h^beta, inner tolerance 1e-8 per interior node."""
    n = int(grid.interior.sum())
    return Schedule(
        eps_start=1.0,
        eps_factor=0.25,
        eps_min=grid.h**params.beta,
        inner_tol=1e-8 * n,
    )


@dataclass
class StageRecord:
    eps: float
    iterations: int
    energy_smoothed: float
    grad_norm1: float
    grad_max: float
    converged: bool
    energy_trace: list[float] = field(default_factory=list, repr=False)


@dataclass
class MinimizeReport:
    stages: list[StageRecord]
    seed: int
    seed_energies: dict[int, float]
    final_energy: float
    converged: bool
    wall_time: float


def harmonic_extension(grid: Grid, f: BoundaryData) -> ScalarField:
    """Discrete harmonic field with the data's boundary values."""
    base = ScalarField(grid, np.where(grid.arc, f.values, 0.0))
    return harmonic_replacement(base, Mask(grid, grid.interior.copy()))


def _cell_structure(grid: Grid):
    """Per-node count of valid incident cells and the four incidence masks
    (by cell position relative to the node), for the relaxation solver."""
    cm = grid.cell_mask
    nx, ny = grid.shape
    pad = np.zeros((nx + 1, ny + 1), dtype=bool)
    pad[1:-1, 1:-1] = cm
    inc_mm = pad[:-1, :-1]  # cell (i-1, j-1): node is its x-max/y-max corner
    inc_mp = pad[:-1, 1:]   # cell (i-1, j):   node is its x-max/y-min corner
    inc_pm = pad[1:, :-1]   # cell (i, j-1):   node is its x-min/y-max corner
    inc_pp = pad[1:, 1:]    # cell (i, j):     node is its x-min/y-min corner
    m = (
        inc_mm.astype(np.float64)
        + inc_mp.astype(np.float64)
        + inc_pm.astype(np.float64)
        + inc_pp.astype(np.float64)
    )
    return m, (inc_mm, inc_mp, inc_pm, inc_pp)


def _neighbor_sums(v: np.ndarray, masks) -> tuple[np.ndarray, np.ndarray]:
    """Per-node sums of diagonally opposite and edge-adjacent cell-mate
    values over valid incident cells."""
    inc_mm, inc_mp, inc_pm, inc_pp = masks
    opp = np.zeros_like(v)
    adj = np.zeros_like(v)
    opp[1:, 1:] += np.where(inc_mm[1:, 1:], v[:-1, :-1], 0.0)
    adj[1:, 1:] += np.where(inc_mm[1:, 1:], v[:-1, 1:] + v[1:, :-1], 0.0)
    opp[1:, :-1] += np.where(inc_mp[1:, :-1], v[:-1, 1:], 0.0)
    adj[1:, :-1] += np.where(inc_mp[1:, :-1], v[:-1, :-1] + v[1:, 1:], 0.0)
    opp[:-1, 1:] += np.where(inc_pm[:-1, 1:], v[1:, :-1], 0.0)
    adj[:-1, 1:] += np.where(inc_pm[:-1, 1:], v[:-1, :-1] + v[1:, 1:], 0.0)
    opp[:-1, :-1] += np.where(inc_pp[:-1, :-1], v[1:, 1:], 0.0)
    adj[:-1, :-1] += np.where(inc_pp[:-1, :-1], v[1:, :-1] + v[:-1, 1:], 0.0)
    return opp, adj


def _relax_sweeps(values, grid, params, eps, weights_h2, m, masks, groups, n_sweeps):
    """Pointwise Newton relaxation on the bilinear-element stationarity
    equation (4/3) m u + w h^2 G_eps'(u) = (2/3) S_opp + (1/3) S_adj.

    Nodes are updated in four independent parity groups; every update is an
    exact coordinate minimization, so the smoothed energy never increases.
    """
    for _ in range(n_sweeps):
        for gmask in groups:
            s_opp, s_adj = _neighbor_sums(values, masks)
            u = values[gmask]
            mm = (4.0 / 3.0) * m[gmask]
            wh = weights_h2[gmask]
            rhs = (2.0 / 3.0) * s_opp[gmask] + (1.0 / 3.0) * s_adj[gmask]
            for _ in range(30):
                _, gp = smoothed_potential(u, params, eps)
                gpp = _gpot_second(u, params, eps)
                fval = mm * u + wh * gp - rhs
                fder = mm + wh * gpp
                step = fval / fder
                u = u - step
                if float(np.abs(step).max(initial=0.0)) < 1e-15:
                    break
            values[gmask] = u
    return values


def _gpot_second(s, params: EnergyParams, eps: float):
    """Second derivative of the smoothed potential."""
    s = np.asarray(s, dtype=np.float64)
    e2 = eps * eps
    lam = np.where(s >= 0, params.lambda_plus, params.lambda_minus)
    base = (s * s + e2) ** ((params.p - 4.0) / 2.0)
    return 2.0 * params.p * lam * base * (e2 + (params.p - 1.0) * s * s)


def _minimize_single(
    grid: Grid,
    f: BoundaryData,
    params: EnergyParams,
    sched: Schedule,
    seed: int,
    init: ScalarField,
) -> tuple[ScalarField, list[StageRecord]]:
    values = init.values.copy()
    values[grid.pi] = 0.0
    values[grid.arc] = f.values[grid.arc]
    free = grid.interior
    n_free = int(free.sum())
    tol1 = sched.inner_tol
    tol_inf = sched.inner_tol / max(n_free, 1)

    weights_h2 = grid.h**2 * _node_weight_cache(grid)
    m, masks = _cell_structure(grid)
    par_i = np.arange(grid.shape[0])[:, None] % 2
    par_j = np.arange(grid.shape[1])[None, :] % 2
    groups = [
        free & (par_i == a) & (par_j == b) for a in (0, 1) for b in (0, 1)
    ]

    stages: list[StageRecord] = []
    for eps in sched.eps_ladder():
        energy, grad = smoothed_energy_and_gradient(values, grid, params, eps)
        trace = [energy]
        lip = 8.0 + float(weights_h2.max()) * 2.0 * params.p * max(
            params.lambda_plus, params.lambda_minus
        ) * eps ** (params.p - 2.0)
        alpha = 1.0 / lip
        iters = 0
        converged = False
        prev_vals = None
        prev_grad = None
        while iters < sched.max_inner_iters:
            g1 = float(np.abs(grad).sum())
            gmax = float(np.abs(grad).max(initial=0.0))
            if g1 <= tol1 and gmax <= tol_inf:
                converged = True
                break

            # Barzilai-Borwein descent segment with backtracking
            bb_iters = 0
            while bb_iters < 150 and iters < sched.max_inner_iters:
                gnorm2 = float((grad * grad).sum())
                if gnorm2 == 0.0:
                    break
                step = alpha
                for _ in range(60):
                    trial = values - step * grad
                    trial[~free] = values[~free]
                    e_trial, g_trial = smoothed_energy_and_gradient(
                        trial, grid, params, eps
                    )
                    if e_trial <= energy - 1e-4 * step * gnorm2:
                        break
                    step *= 0.5
                else:
                    break
                prev_vals, prev_grad = values, grad
                values, grad, energy = trial, g_trial, e_trial
                trace.append(energy)
                iters += 1
                bb_iters += 1
                s = values - prev_vals
                y = grad - prev_grad
                sy = float((s * y).sum())
                yy = float((y * y).sum())
                alpha = abs(sy) / yy if yy > 0 and sy != 0 else step
                alpha = min(max(alpha, 1e-12), 1e6)
                g1 = float(np.abs(grad).sum())
                gmax = float(np.abs(grad).max(initial=0.0))
                if g1 <= tol1 and gmax <= tol_inf:
                    break
            if g1 <= tol1 and gmax <= tol_inf:
                converged = True
                break

            # pointwise relaxation segment
            values = _relax_sweeps(
                values, grid, params, eps, weights_h2, m, masks, groups, 30
            )
            iters += 30
            energy, grad = smoothed_energy_and_gradient(values, grid, params, eps)
            trace.append(energy)

        g1 = float(np.abs(grad).sum())
        gmax = float(np.abs(grad).max(initial=0.0))
        converged = bool(g1 <= tol1 and gmax <= tol_inf)
        stages.append(
            StageRecord(eps, iters, energy, g1, gmax, converged, trace)
        )
    return ScalarField(grid, values), stages


def _node_weight_cache(grid: Grid) -> np.ndarray:
    from .energy import _node_weights

    return _node_weights(grid)


def _seed_init(grid: Grid, f: BoundaryData, seed: int) -> ScalarField:
    ext = harmonic_extension(grid, f)
    kind = seed % 3
    if kind == 0:
        return ext
    v = np.abs(ext.values) if kind == 1 else -np.abs(ext.values)
    v = v.copy()
    v[grid.pi] = 0.0
    v[grid.arc] = f.values[grid.arc]
    return ScalarField(grid, np.where(grid.nonexterior, v, 0.0))


def minimize(
    grid: Grid,
    f: BoundaryData,
    params: EnergyParams,
    sched: Schedule | None = None,
    max_workers: int | None = None,
) -> tuple[ScalarField, MinimizeReport]:
    """Minimize the energy over admissible fields with the given arc data.

    Returns the best field across seeds and a report with per-stage traces.
    Deterministic given (grid, f, params, sched); independent of
    ``max_workers`` (seeds are independent computations).
    """
    if sched is None:
        sched = default_schedule(grid, params)
    if max_workers is None:
        max_workers = int(os.environ.get("FBX_THREADS", "1") or "1")
    t0 = time.perf_counter()

    seeds = list(sched.seeds)
    inits = {s: _seed_init(grid, f, s) for s in seeds}

    def run_seed(s):
        return _minimize_single(grid, f, params, sched, s, inits[s])

    if max_workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(run_seed, seeds))
    else:
        results = [run_seed(s) for s in seeds]

    energies = {s: total_energy(u, params) for s, (u, _) in zip(seeds, results)}
    best = seeds[0]
    for s in seeds[1:]:
        e_best = energies[best]
        e_s = energies[s]
        scale = max(abs(e_best), abs(e_s), 1e-300)
        if e_s < e_best and (e_best - e_s) / scale > 1e-10:
            best = s
    u_best, stages = results[seeds.index(best)]
    report = MinimizeReport(
        stages=stages,
        seed=best,
        seed_energies=energies,
        final_energy=energies[best],
        converged=all(st.converged for st in stages),
        wall_time=time.perf_counter() - t0,
    )
    return u_best, report


def competitor_gap(
    u_star: ScalarField, phi: ScalarField, params: EnergyParams
) -> float:
    """Energy gap E(u* + phi) - E(u*) for a compact perturbation phi.

    For a genuine discrete minimizer the gap is nonnegative up to quadrature
    slack.  phi must vanish identically on the pinned boundary nodes.
    """
    grid = u_star.grid
    pinned = grid.pi | grid.arc
    if not (phi.values[pinned] == 0.0).all():
        raise InadmissiblePerturbationError(
            "perturbation must vanish on pi and arc nodes"
        )
    bumped = u_star.with_values(u_star.values + phi.values)
    return total_energy(bumped, params) - total_energy(u_star, params)
