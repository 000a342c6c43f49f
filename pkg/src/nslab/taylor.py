"""Truncated multivariate Taylor (jet) arithmetic.

A series is a dense vector of Taylor coefficients over the monomial basis
of total degree <= order in `nvars` variables.  Coefficients are stored as
partial derivatives divided by multi-index factorials, so the truncated
product of two series is the exact Taylor expansion of the product.  All
elementary functions are evaluated by univariate composition around the
constant term, which is likewise exact to machine precision.

Coefficient arrays may carry leading batch axes; every operation
broadcasts over them, which lets ODE right-hand sides evaluate whole
families of points in single numpy calls.

Each series tracks a `trust` level: the highest total degree whose
coefficients are exact given the inputs.  Extracting a derivative above
the trust level is a bug and raises immediately.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import sparse

from .errors import EvaluationDomainError


def _monomials(nvars, order):
    """All multi-indices with total degree <= order, by degree then lex."""
    out = []
    for deg in range(order + 1):
        level = []

        def rec(prefix, remaining, slots):
            if slots == 1:
                level.append(prefix + (remaining,))
                return
            for k in range(remaining, -1, -1):
                rec(prefix + (k,), remaining - k, slots - 1)

        rec((), deg, nvars)
        level.sort()
        out.extend(level)
    return out


class TaylorContext:
    """Shared multiplication and differentiation tables for one (nvars, order)."""

    def __init__(self, nvars, order):
        self.nvars = nvars
        self.order = order
        self.monomials = _monomials(nvars, order)
        self.size = len(self.monomials)
        self.index = {m: i for i, m in enumerate(self.monomials)}
        self.degrees = np.array([sum(m) for m in self.monomials])
        self.factorials = np.array(
            [math.prod(math.factorial(k) for k in m) for m in self.monomials],
            dtype=float,
        )
        ia, ib, ik = [], [], []
        for i, ma in enumerate(self.monomials):
            da = sum(ma)
            for j, mb in enumerate(self.monomials):
                if da + sum(mb) > order:
                    continue
                ia.append(i)
                ib.append(j)
                ik.append(self.index[tuple(a + b for a, b in zip(ma, mb))])
        self._ia = np.array(ia)
        self._ib = np.array(ib)
        self._ik = np.array(ik)
        npairs = len(ia)
        self._gather = sparse.csr_matrix(
            (np.ones(npairs), (self._ik, np.arange(npairs))),
            shape=(self.size, npairs),
        )
        # d/dx_v maps coeff[m + e_v] -> coeff[m] * (m_v + 1)
        self._shift_src = []
        self._shift_dst = []
        self._shift_scale = []
        for v in range(nvars):
            src, dst, scale = [], [], []
            for i, m in enumerate(self.monomials):
                up = list(m)
                up[v] += 1
                j = self.index.get(tuple(up))
                if j is not None:
                    src.append(j)
                    dst.append(i)
                    scale.append(m[v] + 1)
            self._shift_src.append(np.array(src))
            self._shift_dst.append(np.array(dst))
            self._shift_scale.append(np.array(scale, dtype=float))

    def multiply(self, a, b):
        # zero factors are common (sparse connections, x-independent fields)
        if not a.any() or not b.any():
            return np.zeros(np.broadcast_shapes(a.shape, b.shape))
        prod = a[..., self._ia] * b[..., self._ib]
        if prod.ndim == 1:
            return np.bincount(self._ik, weights=prod, minlength=self.size)
        flat = prod.reshape(-1, prod.shape[-1])
        out = (self._gather @ flat.T).T
        return np.ascontiguousarray(out).reshape(prod.shape[:-1] + (self.size,))

    def constant(self, value):
        value = np.asarray(value, dtype=float)
        coef = np.zeros(value.shape + (self.size,))
        coef[..., 0] = value
        return TaylorSeries(self, coef, self.order)

    def variable(self, v, value):
        s = self.constant(value)
        if self.order >= 1:
            unit = tuple(1 if k == v else 0 for k in range(self.nvars))
            s.coef[..., self.index[unit]] = 1.0
        return s


@lru_cache(maxsize=None)
def context(nvars, order):
    return TaylorContext(nvars, order)


class TaylorSeries:
    __slots__ = ("ctx", "coef", "trust")

    def __init__(self, ctx, coef, trust):
        self.ctx = ctx
        self.coef = coef
        self.trust = trust

    # ------------------------------------------------------------------
    # ring operations
    # ------------------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, TaylorSeries):
            return other
        return self.ctx.constant(np.broadcast_to(other, self.coef.shape[:-1]))

    def __add__(self, other):
        o = self._coerce(other)
        return TaylorSeries(self.ctx, self.coef + o.coef, min(self.trust, o.trust))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return TaylorSeries(self.ctx, self.coef - o.coef, min(self.trust, o.trust))

    def __rsub__(self, other):
        o = self._coerce(other)
        return TaylorSeries(self.ctx, o.coef - self.coef, min(self.trust, o.trust))

    def __neg__(self):
        return TaylorSeries(self.ctx, -self.coef, self.trust)

    @staticmethod
    def _scalar(other):
        a = np.asarray(other, dtype=float)
        return a[..., None] if a.ndim else a

    def __mul__(self, other):
        if not isinstance(other, TaylorSeries):
            return TaylorSeries(self.ctx, self.coef * self._scalar(other), self.trust)
        return TaylorSeries(
            self.ctx, self.ctx.multiply(self.coef, other.coef), min(self.trust, other.trust)
        )

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if not isinstance(other, TaylorSeries):
            return TaylorSeries(self.ctx, self.coef / self._scalar(other), self.trust)
        return self * other._reciprocal()

    def __rtruediv__(self, other):
        return self._coerce(other) * self._reciprocal()

    def __pow__(self, k):
        if isinstance(k, int):
            return self.ipow(k)
        raise TypeError("use ipow or powc for series exponentiation")

    def ipow(self, k):
        if k < 0:
            return self.ipow(-k)._reciprocal()
        out = self.ctx.constant(np.ones(self.coef.shape[:-1]))
        out.trust = self.trust
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base if k > 1 else base
            k >>= 1
        return out

    # ------------------------------------------------------------------
    # extraction
    # ------------------------------------------------------------------

    def value(self):
        return self.coef[..., 0]

    def partial(self, multi_index):
        """Exact mixed partial derivative for the given multi-index."""
        deg = sum(multi_index)
        if deg > self.trust:
            raise ValueError(
                f"requested order-{deg} derivative from a series trusted to order {self.trust}"
            )
        i = self.ctx.index[tuple(multi_index)]
        return self.coef[..., i] * self.ctx.factorials[i]

    def partial_series(self, v):
        """d/dx_v as a series; costs one trust level."""
        if self.trust < 1:
            raise ValueError("cannot differentiate a series with no trusted derivatives")
        ctx = self.ctx
        coef = np.zeros_like(self.coef)
        coef[..., ctx._shift_dst[v]] = self.coef[..., ctx._shift_src[v]] * ctx._shift_scale[v]
        return TaylorSeries(ctx, coef, self.trust - 1)

    # ------------------------------------------------------------------
    # univariate composition
    # ------------------------------------------------------------------

    def _compose(self, outer_coeffs):
        """Evaluate sum_k c_k (s - s0)^k, truncated.

        `outer_coeffs` holds the Taylor coefficients of the outer function
        around the constant term s0; each entry broadcasts over batch axes.
        """
        hat = TaylorSeries(self.ctx, self.coef.copy(), self.trust)
        hat.coef[..., 0] = 0.0
        out = self.ctx.constant(np.broadcast_to(outer_coeffs[0], self.coef.shape[:-1]).copy())
        out.trust = self.trust
        acc = None
        for k in range(1, min(self.ctx.order, self.trust) + 1):
            if k >= len(outer_coeffs):
                break
            acc = hat if acc is None else acc * hat
            out = out + acc * outer_coeffs[k]
        return out

    def _reciprocal(self):
        s0 = self.value()
        if np.any(s0 == 0.0):
            raise EvaluationDomainError("division by zero")
        K = min(self.ctx.order, self.trust)
        coeffs = [(-1.0) ** k / s0 ** (k + 1) for k in range(K + 1)]
        return self._compose(coeffs)

    def sqrt(self):
        s0 = self.value()
        if np.any(s0 < 0.0):
            raise EvaluationDomainError("sqrt of negative value")
        K = min(self.ctx.order, self.trust)
        if K >= 1 and np.any(s0 == 0.0):
            raise EvaluationDomainError("sqrt differentiated at zero")
        coeffs = [np.sqrt(s0)]
        c = 0.5
        for k in range(1, K + 1):
            coeffs.append(coeffs[-1] * c / (k * s0))
            c -= 1.0
        # coeffs[k] = binom(1/2, k) * s0^(1/2 - k)
        return self._compose(coeffs)

    def exp(self):
        e0 = np.exp(self.value())
        K = min(self.ctx.order, self.trust)
        coeffs = [e0 / math.factorial(k) for k in range(K + 1)]
        return self._compose(coeffs)

    def log(self):
        s0 = self.value()
        if np.any(s0 <= 0.0):
            raise EvaluationDomainError("log of non-positive value")
        K = min(self.ctx.order, self.trust)
        coeffs = [np.log(s0)]
        for k in range(1, K + 1):
            coeffs.append((-1.0) ** (k + 1) / (k * s0 ** k))
        return self._compose(coeffs)

    def sin(self):
        s0 = self.value()
        table = (np.sin(s0), np.cos(s0), -np.sin(s0), -np.cos(s0))
        K = min(self.ctx.order, self.trust)
        coeffs = [table[k % 4] / math.factorial(k) for k in range(K + 1)]
        return self._compose(coeffs)

    def cos(self):
        s0 = self.value()
        table = (np.cos(s0), -np.sin(s0), -np.cos(s0), np.sin(s0))
        K = min(self.ctx.order, self.trust)
        coeffs = [table[k % 4] / math.factorial(k) for k in range(K + 1)]
        return self._compose(coeffs)

    def tan(self):
        c = self.cos()
        if np.any(c.value() == 0.0):
            raise EvaluationDomainError("tan at a pole")
        return self.sin() / c

    def absolute(self):
        s0 = self.value()
        K = min(self.ctx.order, self.trust)
        if K >= 1 and np.any(s0 == 0.0):
            raise EvaluationDomainError("abs differentiated at zero")
        return self * np.sign(s0)

    def powc(self, c):
        """Real power with constant exponent."""
        if float(c).is_integer():
            return self.ipow(int(c))
        s0 = self.value()
        if np.any(s0 <= 0.0):
            raise EvaluationDomainError("non-integer power of non-positive base")
        K = min(self.ctx.order, self.trust)
        coeffs = [s0 ** c]
        fall = c
        for k in range(1, K + 1):
            coeffs.append(coeffs[-1] * fall / (k * s0))
            fall -= 1.0
        return self._compose(coeffs)


def atan2_series(y, x):
    """Branch-correct atan2 of two series sharing a context.

    The nonconstant part reduces to atan of a series with zero constant
    term, so only the odd atan coefficients around 0 are needed.
    """
    x0, y0 = x.value(), y.value()
    if np.any((x0 == 0.0) & (y0 == 0.0)):
        raise EvaluationDomainError("atan2 at the origin")
    theta0 = np.arctan2(y0, x0)
    w = (y * x0 - x * y0) / (x * x0 + y * y0)
    K = min(w.ctx.order, w.trust)
    coeffs = [theta0 if k == 0 else ((-1.0) ** ((k - 1) // 2) / k if k % 2 else 0.0)
              for k in range(K + 1)]
    return w._compose(coeffs)


def series_matrix_inverse(m):
    """Invert a square matrix of TaylorSeries by Gauss-Jordan elimination.

    Pivoting uses the constant terms; the leading matrix must be
    invertible (checked by the caller via its determinant).
    """
    n = len(m)
    ctx = m[0][0].ctx
    shape = m[0][0].coef.shape[:-1]
    a = [[m[i][j] for j in range(n)] for i in range(n)]
    e = [[ctx.constant(np.full(shape, 1.0 if i == j else 0.0)) for j in range(n)]
         for i in range(n)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: np.min(np.abs(a[r][col].value())))
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            e[col], e[piv] = e[piv], e[col]
        inv = a[col][col]._reciprocal()
        a[col] = [x * inv for x in a[col]]
        e[col] = [x * inv for x in e[col]]
        for r in range(n):
            if r == col:
                continue
            f = a[r][col]
            a[r] = [x - f * y for x, y in zip(a[r], a[col])]
            e[r] = [x - f * y for x, y in zip(e[r], e[col])]
    return e
