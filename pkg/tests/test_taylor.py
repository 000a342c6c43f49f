import math

import numpy as np
import pytest

from nslab import taylor
from nslab.errors import EvaluationDomainError


def ctx(nvars=2, order=4):
    return taylor.context(nvars, order)


class TestRing:
    def test_product_coefficients(self):
        c = ctx()
        x = c.variable(0, 2.0)
        y = c.variable(1, 3.0)
        f = (x + y) * (x - y)   # x^2 - y^2
        assert f.value() == pytest.approx(4.0 - 9.0)
        assert f.partial((2, 0)) == 2.0
        assert f.partial((0, 2)) == -2.0
        assert f.partial((1, 1)) == 0.0

    def test_integer_powers(self):
        c = ctx()
        x = c.variable(0, -1.5)
        f = x.ipow(3)
        assert f.value() == pytest.approx((-1.5) ** 3)
        assert f.partial((1, 0)) == pytest.approx(3 * 1.5 ** 2)
        g = x.ipow(-2)
        assert g.value() == pytest.approx(1.5 ** -2)

    def test_division(self):
        c = ctx()
        x = c.variable(0, 2.0)
        f = 1.0 / (1.0 + x)
        assert f.value() == pytest.approx(1 / 3)
        assert f.partial((1, 0)) == pytest.approx(-1 / 9)
        with pytest.raises(EvaluationDomainError):
            _ = 1.0 / c.variable(0, 0.0)

    def test_trust_drops_with_differentiation(self):
        c = ctx(order=3)
        x = c.variable(0, 1.0)
        f = (x * x * x).partial_series(0)
        assert f.trust == 2
        assert f.value() == 3.0
        with pytest.raises(ValueError):
            f.partial((3, 0))

    def test_scalar_broadcast_with_batch(self):
        c = ctx(order=2)
        x = c.variable(0, np.array([1.0, 2.0]))
        f = x * np.array([10.0, 20.0]) + 1.0
        assert np.allclose(f.value(), [11.0, 41.0])
        assert np.allclose(f.partial((1, 0)), [10.0, 20.0])


class TestElementaryFunctions:
    @pytest.mark.parametrize("fn,ref,dref", [
        ("sqrt", math.sqrt, lambda u: 0.5 / math.sqrt(u)),
        ("exp", math.exp, math.exp),
        ("log", math.log, lambda u: 1 / u),
        ("sin", math.sin, math.cos),
        ("cos", math.cos, lambda u: -math.sin(u)),
        ("tan", math.tan, lambda u: 1 / math.cos(u) ** 2),
    ])
    def test_values_and_derivatives(self, fn, ref, dref):
        c = ctx()
        u0 = 0.7
        s = getattr(c.variable(0, u0), fn)()
        assert s.value() == pytest.approx(ref(u0), rel=1e-14)
        assert s.partial((1, 0)) == pytest.approx(dref(u0), rel=1e-12)

    def test_domain_errors(self):
        c = ctx()
        with pytest.raises(EvaluationDomainError):
            c.variable(0, -1.0).sqrt()
        with pytest.raises(EvaluationDomainError):
            c.variable(0, 0.0).log()
        with pytest.raises(EvaluationDomainError):
            c.variable(0, 0.0).absolute()

    def test_abs_away_from_zero(self):
        c = ctx()
        s = c.variable(0, -2.5).absolute()
        assert s.value() == 2.5
        assert s.partial((1, 0)) == -1.0

    def test_atan2_branches(self):
        c = ctx()
        for (y0, x0) in [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (2.0, 0.5)]:
            y = c.variable(0, y0)
            x = c.variable(1, x0)
            s = taylor.atan2_series(y, x)
            assert s.value() == pytest.approx(math.atan2(y0, x0), rel=1e-14)
            den = x0 * x0 + y0 * y0
            assert s.partial((1, 0)) == pytest.approx(x0 / den, rel=1e-12)
            assert s.partial((0, 1)) == pytest.approx(-y0 / den, rel=1e-12)

    def test_real_power(self):
        c = ctx()
        s = c.variable(0, 2.0).powc(1.5)
        assert s.value() == pytest.approx(2.0 ** 1.5, rel=1e-14)
        assert s.partial((1, 0)) == pytest.approx(1.5 * 2.0 ** 0.5, rel=1e-12)


class TestMatrixInverse:
    def test_inverse_of_series_matrix(self):
        c = ctx(nvars=2, order=3)
        x = c.variable(0, 0.3)
        y = c.variable(1, -0.2)
        m = [[1.0 + x * y, y], [x, 2.0 + x]]
        inv = taylor.series_matrix_inverse(m)
        for i in range(2):
            for j in range(2):
                acc = m[i][0] * inv[0][j] + m[i][1] * inv[1][j]
                expect = 1.0 if i == j else 0.0
                assert acc.value() == pytest.approx(expect, abs=1e-14)
                assert abs(acc.partial((1, 0))) < 1e-13
                assert abs(acc.partial((1, 1))) < 1e-13
