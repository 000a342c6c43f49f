import numpy as np
import pytest

from nslab import (
    ConfigError,
    DegenerateOmega,
    ExplicitSystem,
    PhasePoint,
    PointSampler,
    SingularMetric,
    ZeroConnection,
    ZeroWv,
    build_modified_hamiltonian,
    build_riemannian_euclidean,
    check_regularity,
    frame_at,
    phi_pullback,
    system_from_config,
)


def q(x, p):
    return PhasePoint(np.asarray(x, float), np.asarray(p, float))


class TestPhasePoint:
    def test_rejects_dimension_one(self):
        with pytest.raises(ValueError):
            PhasePoint([1.0], [1.0])

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            PhasePoint([np.inf, 0], [1, 0])


class TestFrame:
    def test_identity_system(self, sys_id2):
        fr = frame_at(sys_id2, q([0, 0], [3, 4]))
        assert np.allclose(fr.g_up, np.eye(2))
        assert np.allclose(fr.W, [3, 4])
        assert fr.Omega == 25.0
        assert np.allclose(fr.P, [[0.64, -0.48], [-0.48, 0.36]], atol=1e-15)

    def test_geodesic_point(self, sys_geo2):
        fr = frame_at(sys_geo2, q([0, 0], [1, 0]))
        assert np.allclose(fr.V, [1, 0])
        assert np.allclose(fr.W, [-1, 0], atol=1e-14)
        assert fr.Omega == pytest.approx(-1.0, abs=1e-14)

    def test_geodesic_metric_pair(self, sys_geo2):
        fr = frame_at(sys_geo2, q([0, 0], [3, 4]))
        expected = np.array([[7.0, -24.0], [-24.0, -7.0]]) / 625.0
        assert np.allclose(fr.g_up, expected, atol=1e-15)
        assert np.linalg.det(fr.g_up) == pytest.approx(-1.0 / 625.0, rel=1e-12)

    def test_frame_identities_random(self, sys_geox2, sys_geo3):
        rng = np.random.default_rng(0)
        for sysm in (sys_geox2, sys_geo3):
            for _ in range(10):
                point = q(rng.uniform(-1, 1, sysm.n),
                          rng.uniform(0.2, 2, sysm.n) * rng.choice([-1, 1], sysm.n))
                fr = frame_at(sysm, point)
                n = sysm.n
                assert np.allclose(fr.g_up @ fr.g_down, np.eye(n), atol=1e-12)
                assert np.allclose(fr.P @ fr.P, fr.P, atol=1e-10)
                assert np.allclose(fr.P @ fr.W, 0, atol=1e-10)
                assert np.allclose(point.p @ fr.P, 0, atol=1e-10)
                assert fr.Omega == point.p @ fr.W

    def test_singular_metric(self):
        sysm = ExplicitSystem(2, ["p1", "p1"], ["0", "0"])
        with pytest.raises(SingularMetric):
            frame_at(sysm, q([0, 0], [1, 1]))


class TestModifiedHamiltonianBuilder:
    def test_values(self, sys_geo2):
        V, T = sys_geo2.rhs(np.zeros(2), np.array([1.0, 0.0]))
        assert np.allclose(V, [1, 0])
        assert np.allclose(T, [0, 0])

    def test_w_is_minus_v_everywhere(self):
        rng = np.random.default_rng(1)
        for text in ["(p1^2+p2^2)/2", "sqrt(p1^2+p2^2)", "(p1^2+2*p2^2)/2 + x1",
                     "exp(x1)*p1^2/2 + p2^2/2 + x2"]:
            sysm = build_modified_hamiltonian(text, 2)
            for _ in range(6):
                point = q(rng.uniform(-1, 1, 2), rng.uniform(0.3, 2, 2))
                fr = frame_at(sysm, point)
                assert np.allclose(fr.W, -fr.V, atol=1e-12)
                assert fr.Omega == pytest.approx(-1.0, abs=1e-12)

    def test_zero_momentum_degenerate(self):
        sysm = build_modified_hamiltonian("p1^2 + p2^2", 2)
        with pytest.raises(DegenerateOmega):
            sysm.rhs(np.zeros(2), np.zeros(2))


class TestEuclideanBuilder:
    def test_geodesic_case(self):
        sysm = build_riemannian_euclidean("v", "0", 2)
        V, T = sysm.rhs(np.array([0.4, -0.2]), np.array([3.0, 4.0]))
        assert np.allclose(V, [3, 4])
        assert np.allclose(T, 0.0)

    def test_identity_force(self):
        sysm = build_riemannian_euclidean("v", "w", 2)
        _, T = sysm.rhs(np.zeros(2), np.array([3.0, 4.0]))
        assert np.allclose(T, [3, 4], atol=1e-13)

    def test_velocity_independent_w(self):
        sysm = build_riemannian_euclidean("x1", "0", 2)
        with pytest.raises(ZeroWv):
            sysm.rhs(np.zeros(2), np.array([1.0, 0.0]))

    def test_trajectories_match_rescaled_hamiltonian(self):
        # h = 0 member versus the rescaled Hamiltonian flow of the same W;
        # the fibers are related by momentum inversion p -> p/|p|^2
        from nslab import ExtendedState, IntegratorConfig, integrate_family
        from nslab.expressions import parse, phase_variables, substitute

        n = 2
        flat = build_riemannian_euclidean("v + x1*v^2/10", "0", n)
        inv = parse("1/sqrt(p1^2+p2^2)", phase_variables(n))
        W = parse("v + x1*v^2/10", ("x1", "x2", "v"))
        twin = build_modified_hamiltonian(substitute(W, "v", inv), n)
        zc = ZeroConnection(n)
        cfg = IntegratorConfig(t_end=1.0, step=2e-3)
        rng = np.random.default_rng(9)
        sa, sb = [], []
        for _ in range(4):
            x0 = rng.uniform(-0.3, 0.3, n)
            p0 = rng.normal(size=n)
            p0 *= rng.uniform(0.6, 1.2) / np.linalg.norm(p0)
            sa.append(ExtendedState(0, PhasePoint(x0, p0)))
            sb.append(ExtendedState(0, PhasePoint(x0, p0 / float(p0 @ p0))))
        for ta, tb in zip(integrate_family(flat, zc, sa, cfg),
                          integrate_family(twin, zc, sb, cfg)):
            assert np.max(np.abs(ta.x - tb.x)) < 1e-6


class TestPhiPullback:
    def test_identity_zero(self, sys_id2):
        assert np.allclose(phi_pullback(sys_id2, q([0.3, 0.1], [1, 2])), 0.0)

    def test_geodesic_zero(self, sys_geo2):
        assert np.allclose(phi_pullback(sys_geo2, q([0.3, 0.1], [1, 2])), 0.0,
                           atol=1e-14)

    def test_constant_force(self):
        sysm = ExplicitSystem(2, ["p1", "p2"], ["1", "0"])
        assert np.allclose(phi_pullback(sysm, q([0.5, 0.5], [0.7, 0.2])), [1, 0])


class TestRegularity:
    def test_geodesic_passes(self, sys_geo2):
        report = check_regularity(sys_geo2, PointSampler(2, 100, seed=4))
        assert report.verdict
        assert "local" in report.note

    def test_identity_passes(self, sys_id2):
        report = check_regularity(sys_id2, PointSampler(2, 50, seed=5))
        assert report.verdict
        for s in report.samples:
            assert s.omega > 0

    def test_degenerate_map_fails(self):
        sysm = ExplicitSystem(2, ["p1", "p1"], ["0", "0"])
        report = check_regularity(sysm, PointSampler(2, 10, seed=6))
        assert not report.verdict
        assert all("singular" in s.failure for s in report.failures)


class TestConfig:
    def test_explicit(self):
        sysm = system_from_config(
            {"n": 2, "kind": "explicit", "V": ["p1", "p2"], "Theta": ["0", "0"]})
        assert isinstance(sysm, ExplicitSystem)

    def test_missing_field(self):
        with pytest.raises(ConfigError):
            system_from_config({"n": 2, "kind": "modified_hamiltonian"})

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            system_from_config({"n": 2, "kind": "nope"})

    def test_wrong_component_count(self):
        with pytest.raises(ConfigError):
            ExplicitSystem(2, ["p1"], ["0", "0"])
