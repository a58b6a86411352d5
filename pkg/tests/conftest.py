"""Shared fixtures: grids, parameter sets, and the expensive solver runs.

The minimization runs are session-scoped because they back both the module
tests and the acceptance suite.  Acceptance runs use a continuation ladder
deeper than the production default (eps_min divided by 16..64): the default
stops at the resolvable amplitude h^beta, which leaves an eps-sized halo
around dead cores that biases the finest-scale statistics.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from fbx import (
    BoundaryData,
    DomainSpec,
    EnergyParams,
    build_grid,
    default_schedule,
    halfplane_constant,
    minimize,
)


def halfplane_trace(grid, params):
    c = halfplane_constant(params.lambda_plus, params.p)
    beta = params.beta
    return BoundaryData.from_function(
        grid, lambda x1, x2: c * np.maximum(x1, 0.0) ** beta, "halfplane_trace"
    )


def two_phase_data(grid, M=1.0, gap=0.2):
    return BoundaryData.from_function(
        grid, lambda x1, x2: M * np.clip(x2 / (gap / 2.0), -1.0, 1.0), "two_phase"
    )


def deep_schedule(grid, params, divisor):
    base = default_schedule(grid, params)
    return replace(base, eps_min=base.eps_min / divisor)


@pytest.fixture(scope="session")
def params05():
    return EnergyParams(1.0, 1.0, 0.5)


@pytest.fixture(scope="session")
def grid128():
    return build_grid(DomainSpec(h=1 / 128))


@pytest.fixture(scope="session")
def grid64():
    return build_grid(DomainSpec(h=1 / 64))


@pytest.fixture(scope="session")
def grid32():
    return build_grid(DomainSpec(h=1 / 32))


@pytest.fixture(scope="session")
def halfplane128(grid128, params05):
    """Half-plane-trace minimizer at h=1/128 (deep continuation)."""
    f = halfplane_trace(grid128, params05)
    return minimize(grid128, f, params05, deep_schedule(grid128, params05, 64))


@pytest.fixture(scope="session")
def halfplane64(grid64, params05):
    f = halfplane_trace(grid64, params05)
    return minimize(grid64, f, params05, deep_schedule(grid64, params05, 64))


@pytest.fixture(scope="session")
def twophase128(grid128, params05):
    """Sign-changing run (M=1, gap=0.2) at h=1/128."""
    f = two_phase_data(grid128)
    return minimize(grid128, f, params05, deep_schedule(grid128, params05, 16))


@pytest.fixture(scope="session")
def p03run(grid128):
    params = EnergyParams(1.0, 1.0, 0.3)
    f = halfplane_trace(grid128, params)
    u, rep = minimize(grid128, f, params, deep_schedule(grid128, params, 16))
    return params, u, rep


@pytest.fixture(scope="session")
def p07run(grid128):
    params = EnergyParams(1.0, 1.0, 0.7)
    f = halfplane_trace(grid128, params)
    u, rep = minimize(grid128, f, params, deep_schedule(grid128, params, 16))
    return params, u, rep
