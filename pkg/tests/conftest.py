import numpy as np
import pytest

from nqhinf.cases import preset
from nqhinf.cli import quadratic_certificate
from nqhinf.design import GridSpec
from nqhinf.riccati import QuadWeights, gamma_search
from nqhinf.system import SystemLTI


@pytest.fixture(scope="session")
def fig1():
    return preset("fig1")


@pytest.fixture(scope="session")
def fig2():
    return preset("fig2")


@pytest.fixture(scope="session")
def fig3():
    return preset("fig3")


@pytest.fixture(scope="session")
def quad21():
    """2-state/1-input quadratic certificate (exercises n != d)."""
    A = np.array([[0.7, 0.2], [-0.1, 0.9]])
    B = np.array([[1.0], [0.5]])
    sys = SystemLTI(A, B)
    w = QuadWeights(np.eye(2), np.eye(1), np.eye(2), 1.0)
    ginf = gamma_search(sys, w, tol=1e-4)
    return quadratic_certificate(sys, np.eye(2), np.eye(1), np.eye(2), 1.5 * ginf,
                                 GridSpec(envelope=2.0))
