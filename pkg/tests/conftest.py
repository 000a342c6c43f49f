import pytest

from nslab import (
    ExplicitSystem,
    ZeroConnection,
    build_modified_hamiltonian,
    canonical_connection,
)


@pytest.fixture(scope="session")
def sys_id2():
    return ExplicitSystem(2, ["p1", "p2"], ["0", "0"])


@pytest.fixture(scope="session")
def sys_id3():
    return ExplicitSystem(3, ["p1", "p2", "p3"], ["0", "0", "0"])


@pytest.fixture(scope="session")
def sys_geo2():
    return build_modified_hamiltonian("(p1^2 + p2^2)/2", 2)


@pytest.fixture(scope="session")
def sys_geo3():
    return build_modified_hamiltonian("(p1^2 + p2^2 + p3^2)/2", 3)


@pytest.fixture(scope="session")
def sys_geox2():
    # x-dependent member of the compliant family: nonzero connection,
    # curvature and force, so residual cancellations are nontrivial
    return build_modified_hamiltonian("(p1^2 + 2*p2^2)/2 + x1", 2)


@pytest.fixture(scope="session")
def sys_geox3():
    return build_modified_hamiltonian("(p1^2 + p2^2 + p3^2)/2 + x1/2", 3)


@pytest.fixture(scope="session")
def sys_bad2():
    return ExplicitSystem(2, ["p1", "p2"], ["p2^2", "0"])


@pytest.fixture(scope="session")
def sys_bad3():
    return ExplicitSystem(3, ["p1", "p2", "p3"], ["p2^2", "0", "0"])


@pytest.fixture(scope="session")
def conn_geo2(sys_geo2):
    return canonical_connection(sys_geo2)


@pytest.fixture(scope="session")
def conn_geo3(sys_geo3):
    return canonical_connection(sys_geo3)


@pytest.fixture(scope="session")
def conn_geox2(sys_geox2):
    return canonical_connection(sys_geox2)


@pytest.fixture(scope="session")
def conn_geox3(sys_geox3):
    return canonical_connection(sys_geox3)


@pytest.fixture(scope="session")
def conn_bad2(sys_bad2):
    return canonical_connection(sys_bad2)


@pytest.fixture(scope="session")
def conn_bad3(sys_bad3):
    return canonical_connection(sys_bad3)


@pytest.fixture(scope="session")
def zero2():
    return ZeroConnection(2)


@pytest.fixture(scope="session")
def zero3():
    return ZeroConnection(3)


def random_phase_points(n, count, seed, pmin=0.1, pmax=10.0, xbox=1.0):
    from nslab import PointSampler

    return PointSampler(n=n, count=count, seed=seed, pmin=pmin, pmax=pmax,
                        xbox=xbox).points()
