"""Shared small discretizations; session-scoped so suites stay fast."""
import numpy as np
import pytest

import fraclap as fl


@pytest.fixture(scope="session")
def interval_ops():
    # unit interval, Dirichlet at 0, Neumann at 1: the closed-form geometry
    mesh = fl.build_tensor_mesh(1, [(0.0, 1.0)], [128])
    part = fl.partition_boundary(mesh, [(0, 0)])
    return fl.assemble_operators(mesh, part)


@pytest.fixture(scope="session")
def interval_basis(interval_ops):
    return fl.eigendecompose(interval_ops, m="all")


@pytest.fixture(scope="session")
def square_ops():
    mesh = fl.build_tensor_mesh(2, [(0.0, 1.0), (0.0, 1.0)], [12, 12])
    part = fl.partition_boundary(mesh, [(0, 0)])
    return fl.assemble_operators(mesh, part)


@pytest.fixture(scope="session")
def square_basis(square_ops):
    return fl.eigendecompose(square_ops, m="all")


@pytest.fixture(scope="session")
def params1():
    return fl.FracParams(s=0.75, N=1)


@pytest.fixture(scope="session")
def params2():
    return fl.FracParams(s=0.75, N=2)


@pytest.fixture(scope="session")
def params3():
    return fl.FracParams(s=0.75, N=3)


def m_norm(ops, values_free: np.ndarray) -> float:
    return float(np.sqrt(values_free @ (ops.M @ values_free)))
