"""Shared fixtures: one warm numba kernel, session-scoped mesh solves."""
import math

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    max_examples=200,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("ci")

from capspectra.cap_spectral import cap_eigenvalue
from capspectra.domain_solver import (
    DomainSpec,
    build_mesh,
    solve_dirichlet_eigenpair,
    solve_torsion,
)
from capspectra.sphere_geometry import ManifoldSpec

RECT_PARAMS = {
    "theta_min": math.pi / 4,
    "theta_max": math.pi / 2,
    "phi_min": 0.0,
    "phi_max": math.pi / 2,
}
GRID = (256, 512)


@pytest.fixture(scope="session", autouse=True)
def warm_kernel():
    # first shot triggers the jit compile; timing-sensitive tests assume it
    cap_eigenvalue(2, math.pi / 2, num=129)


@pytest.fixture(scope="session")
def sphere():
    return ManifoldSpec.scaled_sphere(2, 1.0)


@pytest.fixture(scope="session")
def sphere_r08():
    return ManifoldSpec.scaled_sphere(2, 0.8)


def make_domain(kind, params, manifold):
    return DomainSpec(kind=kind, params=params, manifold=manifold)


@pytest.fixture(scope="session")
def cap2_mesh(sphere):
    return build_mesh(make_domain("cap", {"theta0": math.pi / 2}, sphere), GRID)


@pytest.fixture(scope="session")
def cap3_mesh(sphere):
    return build_mesh(make_domain("cap", {"theta0": math.pi / 3}, sphere), GRID)


@pytest.fixture(scope="session")
def rect_mesh(sphere):
    return build_mesh(make_domain("rect", RECT_PARAMS, sphere), GRID)


@pytest.fixture(scope="session")
def cap3_mesh_r08(sphere_r08):
    return build_mesh(make_domain("cap", {"theta0": math.pi / 3}, sphere_r08), GRID)


@pytest.fixture(scope="session")
def rect_mesh_r08(sphere_r08):
    return build_mesh(make_domain("rect", RECT_PARAMS, sphere_r08), GRID)


@pytest.fixture(scope="session")
def cap3_eig(cap3_mesh):
    return solve_dirichlet_eigenpair(cap3_mesh)


@pytest.fixture(scope="session")
def rect_eig(rect_mesh):
    return solve_dirichlet_eigenpair(rect_mesh)


@pytest.fixture(scope="session")
def cap2_torsion(cap2_mesh):
    return solve_torsion(cap2_mesh)


@pytest.fixture(scope="session")
def cap3_torsion(cap3_mesh):
    return solve_torsion(cap3_mesh)


@pytest.fixture(scope="session")
def rect_torsion(rect_mesh):
    return solve_torsion(rect_mesh)
