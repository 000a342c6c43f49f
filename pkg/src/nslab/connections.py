"""Symmetric extended connections, their curvatures, and gauge moves.

Connection coefficients here depend on momentum as well as position.
Every connection knows how to render itself as Taylor series inside a
PointCalculus, which is what makes the curvature tensors exact: the
series of the canonical connection are assembled from the system's own
V and Theta series, never from numerical differentiation.
"""

from __future__ import annotations

import numpy as np

from . import taylor
from .engine import PointCalculus, curvature_tensors
from .errors import AsymmetricGauge, ConfigError
from .expressions import Expression, evaluate, evaluate_series, parse, phase_variables
from .systems import DEFAULT_TOL

__all__ = [
    "ConnectionField",
    "ZeroConnection",
    "ExplicitConnection",
    "CanonicalConnection",
    "GaugedConnection",
    "GaugeTensor",
    "canonical_connection",
    "covariant_derivative",
    "momentum_gradient",
    "curvatures",
    "CurvaturePair",
    "force_covector",
    "gauge_transform",
    "random_gauge_tensor",
    "TensorField",
]


class ConnectionField:
    source = "abstract"

    def __init__(self, n):
        self.n = n

    def v_trust_needed(self, depth):
        """Extra exactness the connection demands of the V series."""
        return 0

    def gamma_series(self, calc):
        raise NotImplementedError

    def gamma(self, q):
        """Connection coefficients gamma[k, i, j] at a point."""
        raise NotImplementedError

    def gamma_jet(self, q):
        """(gamma, d gamma/dx^m, d gamma/dp_m) with leading m axes on the jets."""
        raise NotImplementedError


class ZeroConnection(ConnectionField):
    source = "zero"

    def gamma_series(self, calc):
        n = self.n
        zero = calc.ctx.constant(0.0)
        return [[[zero] * n for _ in range(n)] for _ in range(n)]

    def gamma(self, q):
        return np.zeros((self.n,) * 3)

    def gamma_jet(self, q):
        z4 = np.zeros((self.n,) * 4)
        return np.zeros((self.n,) * 3), z4, z4


class _ExpressionTable:
    """Symmetric (k, i, j) table of expressions with triangle completion."""

    def __init__(self, n, entries, label):
        self.n = n
        pv = phase_variables(n)
        table = {}
        for key, text in entries.items():
            if isinstance(key, str):
                parts = tuple(int(s) for s in key.split(","))
            else:
                parts = tuple(key)
            if len(parts) != 3 or not all(1 <= v <= n for v in parts):
                raise ConfigError(f"bad {label} index {key!r}")
            k, i, j = (v - 1 for v in parts)
            expr = text if isinstance(text, Expression) else parse(str(text), pv)
            mirror = table.get((k, j, i))
            if mirror is not None and mirror.text != expr.text:
                raise ConfigError(
                    f"{label} entries ({k+1},{i+1},{j+1}) and ({k+1},{j+1},{i+1}) "
                    "are both given and differ"
                )
            table[(k, i, j)] = expr
            table[(k, j, i)] = expr
        self.table = table

    def values(self, q):
        vals = np.zeros((self.n,) * 3)
        env = list(np.concatenate([q.x, q.p]))
        for (k, i, j), expr in self.table.items():
            vals[k, i, j] = evaluate(expr, env)
        return vals

    def jet(self, q, n):
        from .expressions import evaluate_jet

        g = np.zeros((n,) * 3)
        dgdx = np.zeros((n,) * 4)
        dgdp = np.zeros((n,) * 4)
        for (k, i, j), expr in self.table.items():
            jet = evaluate_jet(expr, q, 1)
            g[k, i, j] = jet.value
            for m in range(n):
                mi = [0] * (2 * n)
                mi[m] = 1
                dgdx[m, k, i, j] = jet.partial(tuple(mi))
                mi = [0] * (2 * n)
                mi[n + m] = 1
                dgdp[m, k, i, j] = jet.partial(tuple(mi))
        return g, dgdx, dgdp

    def series(self, calc):
        n = self.n
        env = calc.xs + calc.ps
        zero = calc.ctx.constant(0.0)
        out = [[[zero] * n for _ in range(n)] for _ in range(n)]
        for (k, i, j), expr in self.table.items():
            out[k][i][j] = evaluate_series(expr, env)
        return out


class ExplicitConnection(ConnectionField):
    """Connection given by expressions; omitted entries are zero.

    Only one of the (i, j) / (j, i) entries needs to be supplied; the
    symmetric partner is filled in automatically.
    """

    source = "explicit"

    def __init__(self, n, entries):
        super().__init__(n)
        self._table = _ExpressionTable(n, entries, "connection")

    def gamma_series(self, calc):
        return self._table.series(calc)

    def gamma(self, q):
        return self._table.values(q)

    def gamma_jet(self, q):
        return self._table.jet(q, self.n)


class CanonicalConnection(ConnectionField):
    """The symmetric connection generated by the dynamical system itself.

    Built as -1/2 of the second velocity-derivative of the acceleration
    field, transported to momentum variables through the inverse metric
    pair.  Its Taylor form consumes three derivative levels of V (and two
    of Theta), which fixes the jet orders requested from the system.
    """

    source = "canonical"

    def __init__(self, sys, tol=DEFAULT_TOL):
        super().__init__(sys.n)
        self.sys = sys
        self.tol = tol

    def v_trust_needed(self, depth):
        return depth + 3

    def gamma_series(self, calc):
        if calc.sys is not self.sys:
            raise ValueError("canonical connection evaluated against a foreign system")
        n = self.n
        calc.g_up  # raises SingularMetric early if dV/dp degenerates
        g_down = taylor.series_matrix_inverse(calc.Vp_s)
        # acceleration field pulled back to momentum variables
        phi = []
        for k in range(n):
            acc = calc.V_s[k].partial_series(0) * calc.V_s[0]
            acc = acc + calc.Vp_s[k][0] * calc.T_s[0]
            for m in range(1, n):
                acc = acc + calc.V_s[k].partial_series(m) * calc.V_s[m]
                acc = acc + calc.Vp_s[k][m] * calc.T_s[m]
            phi.append(acc)
        dphi = [[phi[k].partial_series(n + r) for r in range(n)] for k in range(n)]
        d2phi = [[[None] * n for _ in range(n)] for _ in range(n)]
        vpp = [[[None] * n for _ in range(n)] for _ in range(n)]
        for r in range(n):
            for s in range(r, n):
                for k in range(n):
                    d2 = dphi[k][r].partial_series(n + s)
                    d2phi[k][r][s] = d2
                    d2phi[k][s][r] = d2
                    v2 = calc.Vp_s[k][r].partial_series(n + s)
                    vpp[k][r][s] = v2
                    vpp[k][s][r] = v2
        # psi[k][a]: first velocity-derivative of the acceleration field
        psi = [[None] * n for _ in range(n)]
        for k in range(n):
            for a in range(n):
                acc = g_down[0][a] * dphi[k][0]
                for m in range(1, n):
                    acc = acc + g_down[m][a] * dphi[k][m]
                psi[k][a] = acc
        inner = [[[None] * n for _ in range(n)] for _ in range(n)]
        for k in range(n):
            for r in range(n):
                for s in range(r, n):
                    acc = d2phi[k][r][s]
                    for a in range(n):
                        acc = acc - vpp[a][r][s] * psi[k][a]
                    inner[k][r][s] = acc
                    inner[k][s][r] = acc
        gamma = [[[None] * n for _ in range(n)] for _ in range(n)]
        for k in range(n):
            tmp = [[None] * n for _ in range(n)]
            for r in range(n):
                for j in range(n):
                    acc = inner[k][r][0] * g_down[0][j]
                    for s in range(1, n):
                        acc = acc + inner[k][r][s] * g_down[s][j]
                    tmp[r][j] = acc
            for i in range(n):
                for j in range(i, n):
                    acc = g_down[0][i] * tmp[0][j]
                    for r in range(1, n):
                        acc = acc + g_down[r][i] * tmp[r][j]
                    acc = acc * (-0.5)
                    gamma[k][i][j] = acc
                    gamma[k][j][i] = acc
        return gamma

    def _calc(self, q, depth):
        return PointCalculus(self.sys, self, q, depth=depth, tol=self.tol)

    def gamma(self, q):
        return self._calc(q, 0).gamma

    def gamma_jet(self, q):
        return self._calc(q, 1).gamma_jet


class GaugeTensor:
    """Symmetric (1,2) tensor used to move between connections."""

    def __init__(self, n, entries):
        self.n = n
        try:
            self._table = _ExpressionTable(n, entries, "gauge tensor")
        except ConfigError as err:
            raise AsymmetricGauge(str(err)) from None

    def values(self, q):
        return self._table.values(q)

    def series(self, calc):
        return self._table.series(calc)

    def jet(self, q):
        return self._table.jet(q, self.n)


class GaugedConnection(ConnectionField):
    source = "gauged"

    def __init__(self, base, T):
        super().__init__(base.n)
        self.base = base
        self.T = T

    def v_trust_needed(self, depth):
        return self.base.v_trust_needed(depth)

    def gamma_series(self, calc):
        n = self.n
        base = self.base.gamma_series(calc)
        tser = self.T.series(calc)
        return [[[base[k][i][j] + tser[k][i][j] for j in range(n)]
                 for i in range(n)] for k in range(n)]

    def gamma(self, q):
        return self.base.gamma(q) + self.T.values(q)

    def gamma_jet(self, q):
        g, dgdx, dgdp = self.base.gamma_jet(q)
        tg, tdx, tdp = self.T.jet(q)
        return g + tg, dgdx + tdx, dgdp + tdp


def canonical_connection(sys, q=None, tol=DEFAULT_TOL):
    """The canonical connection of a system; with q, its coefficients there."""
    conn = CanonicalConnection(sys, tol)
    if q is None:
        return conn
    return conn.gamma(q)


def connection_from_config(cfg, sys):
    """Connection for a loaded system config.

    An optional "Gamma" block ({"k,i,j": expr, ...}, 1-based indices,
    omitted entries zero, symmetric completion) selects an explicit
    connection; otherwise the system's canonical connection is used.
    """
    block = cfg.get("Gamma") if isinstance(cfg, dict) else None
    if block is not None:
        return ExplicitConnection(sys.n, block)
    return CanonicalConnection(sys)


# ----------------------------------------------------------------------
# curvature and covariant differentiation
# ----------------------------------------------------------------------

class CurvaturePair(tuple):
    """(R, D); R[k,r,i,j] antisymmetric in (i,j), D = -d gamma/dp."""

    __slots__ = ()

    def __new__(cls, R, D):
        return super().__new__(cls, (R, D))

    @property
    def R(self):
        return self[0]

    @property
    def D(self):
        return self[1]


def curvatures(conn, q):
    gamma, dgdx, dgdp = conn.gamma_jet(q)
    return CurvaturePair(*curvature_tensors(q.p, gamma, dgdx, dgdp))


class TensorField:
    """Extended tensor field given componentwise by expressions.

    `index_types` is a string of 'u'/'d' characters, one per axis, e.g.
    'u' for a vector field, 'd' for a covector, '' for a scalar.
    """

    def __init__(self, n, index_types, components):
        self.n = n
        self.index_types = index_types
        comps = np.empty((n,) * len(index_types), dtype=object)
        pv = phase_variables(n)
        for idx in np.ndindex(comps.shape):
            entry = components[idx] if comps.ndim else components
            comps[idx] = entry if isinstance(entry, Expression) else parse(str(entry), pv)
        self.components = comps

    def jet(self, q):
        from .expressions import evaluate_jet

        n = self.n
        shape = self.components.shape
        vals = np.zeros(shape)
        ddx = np.zeros((n,) + shape)
        ddp = np.zeros((n,) + shape)
        for idx in np.ndindex(shape):
            jet = evaluate_jet(self.components[idx], q, 1)
            vals[idx] = jet.value
            for m in range(n):
                mi = [0] * (2 * n)
                mi[m] = 1
                ddx[(m,) + idx] = jet.partial(tuple(mi))
                mi = [0] * (2 * n)
                mi[n + m] = 1
                ddp[(m,) + idx] = jet.partial(tuple(mi))
        return vals, ddx, ddp


def covariant_derivative(conn, field, q):
    """Horizontal covariant derivative of an extended tensor field.

    Returns an array with a new leading axis m:

        nabla_m X = dX/dx^m + sum_b Gamma_{mb} dX/dp_b
                    + (one connection term per upper index)
                    - (one connection term per lower index),

    with Gamma_{mb} = sum_c p_c gamma[c, m, b].  The companion momentum
    gradient is the plain dX/dp_m (see momentum_gradient).
    """
    n = conn.n
    gamma = conn.gamma(q)
    glow = np.einsum("c,cmb->mb", q.p, gamma)
    vals, ddx, ddp = field.jet(q)
    out = ddx + np.einsum("mb,b...->m...", glow, ddp)
    for axis, kind in enumerate(field.index_types):
        moved = np.moveaxis(vals, axis, 0)  # contracted index first
        if kind == "u":
            corr = np.einsum("ima,a...->mi...", gamma, moved)
        else:
            corr = -np.einsum("bmi,b...->mi...", gamma, moved)
        out = out + np.moveaxis(corr, 1, axis + 1)
    return out


def momentum_gradient(field, q):
    _, _, ddp = field.jet(q)
    return ddp


def force_covector(sys, conn, q):
    """Q_i = Theta_i - sum_{j,k} gamma[k,i,j] p_k V^j."""
    V, Theta = sys.rhs(q.x, q.p)
    gamma = conn.gamma(q)
    return Theta - np.einsum("kij,k,j->i", gamma, q.p, V)


# ----------------------------------------------------------------------
# gauge transformations
# ----------------------------------------------------------------------

def gauge_transform(sys, conn, T):
    """Shift the connection by a symmetric tensor and compensate the force.

    Returns (conn', Q') with gamma' = gamma + T and

        Q'_i(q) = Q_i(q) - sum_{k,s} T^k_{is} p_k V^s,

    so the connection-free dynamics (V, Theta) is untouched.
    """
    gauged = GaugedConnection(conn, T)

    def q_field(q):
        return force_covector(sys, gauged, q)

    return gauged, q_field


def random_gauge_tensor(n, rng, degree=2, scale=1.0):
    """Random symmetric gauge tensor, polynomial in x and p.

    Coefficients are uniform in [-scale, scale]; each entry is a sum of
    monomials of degree <= `degree` in every variable separately.
    """
    pv = phase_variables(n)
    names = list(pv)
    entries = {}
    for k in range(n):
        for i in range(n):
            for j in range(i, n):
                terms = []
                for _ in range(3):
                    c = rng.uniform(-scale, scale)
                    a = names[rng.integers(0, len(names))]
                    b = names[rng.integers(0, len(names))]
                    da = int(rng.integers(0, degree + 1))
                    db = int(rng.integers(0, degree + 1 - min(da, degree)))
                    term = f"{c:.6f}"
                    if da:
                        term += f"*{a}^{da}"
                    if db:
                        term += f"*{b}^{db}"
                    terms.append(term)
                entries[f"{k+1},{i+1},{j+1}"] = " + ".join(terms)
    return GaugeTensor(n, entries)
