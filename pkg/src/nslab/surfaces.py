"""Parametric hypersurfaces, the Pfaff system for nu, and the normal shift.

A hypersurface is a single-chart embedding y -> x(y) with n-1 parameters.
Closed surfaces are handled as open parameter boxes that stay clear of
chart singularities and of sign flips of the normal gauge.

The normal covector is the annihilator of the tangent span, normalized to
unit Euclidean norm with its first nonvanishing component positive, then
multiplied by `normal_scale` (default 1).  The scale hook exists because
the normal is only defined up to a factor; rescaling it by c while
rescaling nu0 by 1/c must leave every shift quantity unchanged, and the
test suite holds the code to that.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import taylor
from .dynamics import ExtendedState, integrate_family
from .engine import PointCalculus
from .errors import ConfigError, NuVanished, RankDeficientTangents
from .expressions import Expression, evaluate_series, parse
from .systems import DEFAULT_TOL, PhasePoint, frame_at


class Hypersurface:
    def __init__(self, n, embedding, domain, normal_scale=1.0):
        self.n = n
        self.m = n - 1
        if len(embedding) != n:
            raise ConfigError("embedding needs one expression per ambient coordinate")
        if len(domain) != self.m:
            raise ConfigError("domain needs one interval per surface parameter")
        yvars = tuple(f"y{i+1}" for i in range(self.m))
        self.embedding = [e if isinstance(e, Expression) else parse(str(e), yvars)
                          for e in embedding]
        for e in self.embedding:
            if e.variables != yvars:
                raise ConfigError("embedding expressions must use y1..y{m}")
        self.domain = [(float(lo), float(hi)) for lo, hi in domain]
        self.normal_scale = float(normal_scale)

    # ------------------------------------------------------------------

    def _series_det(self, rows):
        k = len(rows)
        if k == 1:
            return rows[0][0]
        out = None
        for c in range(k):
            minor = [[row[cc] for cc in range(k) if cc != c] for row in rows[1:]]
            term = rows[0][c] * self._series_det(minor)
            if c % 2:
                term = -term
            out = term if out is None else out + term
        return out

    def geometry(self, y, tol=DEFAULT_TOL):
        """Embedded point, tangents, gauged normal and its y-derivatives.

        Returns (x, taus, normal, dn_dy) with taus[i, s] = dx^s/dy^i and
        dn_dy[i, s] = dn_s/dy^i, all exact through series arithmetic.
        """
        y = np.asarray(y, dtype=float)
        n, m = self.n, self.m
        ctx = taylor.context(m, 2)
        ys = [ctx.variable(i, y[i]) for i in range(m)]
        xser = [evaluate_series(e, ys) for e in self.embedding]
        x = np.array([s.value() for s in xser])
        unit = np.eye(m, dtype=int)
        tau_s = [[xser[s].partial_series(i) for s in range(n)] for i in range(m)]
        taus = np.array([[float(tau_s[i][s].value()) for s in range(n)]
                         for i in range(m)])
        # annihilator of the tangent span via signed minors
        raw = []
        for s in range(n):
            rows = [[tau_s[i][c] for c in range(n) if c != s] for i in range(m)]
            term = self._series_det(rows) if m else ctx.constant(1.0)
            if s % 2:
                term = -term
            raw.append(term)
        raw_pt = np.array([float(s.value()) for s in raw])
        norm = float(np.linalg.norm(raw_pt))
        if norm < 1e-12:
            raise RankDeficientTangents(f"tangent vectors are dependent at y={y.tolist()}")
        nsq = raw[0] * raw[0]
        for s in range(1, n):
            nsq = nsq + raw[s] * raw[s]
        length = nsq.sqrt()
        first = np.flatnonzero(np.abs(raw_pt) > 1e-12 * norm)[0]
        sign = self.normal_scale * (1.0 if raw_pt[first] > 0 else -1.0)
        nser = [r * sign / length for r in raw]
        normal = np.array([float(s.value()) for s in nser])
        dn_dy = np.array([[float(nser[s].partial(tuple(unit[i]))) for s in range(n)]
                          for i in range(m)])
        return x, taus, normal, dn_dy

    def grid_axes(self, counts):
        counts = [int(c) for c in counts]
        if len(counts) != self.m:
            raise ConfigError("grid needs one node count per surface parameter")
        return [np.linspace(lo, hi, c) for (lo, hi), c in zip(self.domain, counts)]


@dataclass
class SurfaceFrame:
    """Surface data at one parameter value for a given system and nu."""

    y: np.ndarray
    x: np.ndarray
    taus: np.ndarray        # (m, n)
    normal: np.ndarray      # (n,)
    dn: np.ndarray          # (m, n): covariant derivative of n along tau_i
    b: np.ndarray           # (m, m): second fundamental form components


def _dn_covariant(conn, q, normal, taus, dn_dy):
    gamma = conn.gamma(q)
    return dn_dy - np.einsum("ksr,k,ir->is", gamma, normal, taus)


def surface_frame(sys, conn, surf, y, nu, tol=DEFAULT_TOL):
    """Tangents, normal, covariant dn and second fundamental form at y.

    The momentum entering the connection and the projector is p = nu * n.
    b is assembled from the projected dn map; its symmetry is a theorem,
    not an input, and is asserted only by the tests.
    """
    if nu == 0:
        raise ValueError("nu must be nonzero")
    x, taus, normal, dn_dy = surf.geometry(y, tol)
    q = PhasePoint(x, nu * normal)
    frame = frame_at(sys, q, tol)
    dn = _dn_covariant(conn, q, normal, taus, dn_dy)
    b = -np.einsum("ir,qr,jq->ij", taus, frame.P, dn)
    return SurfaceFrame(y=np.asarray(y, float), x=x, taus=taus, normal=normal,
                        dn=dn, b=b)


def pfaff_rhs(sys, conn, surf, y, nu, tol=DEFAULT_TOL):
    """Right-hand side psi_i of dnu/dy^i for the shift-initialization field.

        psi_i = -(nu^2 / Omega) sum_s W^s dn[i, s]
                - (nu / Omega) sum_s U_s tau^s_i,

    evaluated at momentum p = nu * n(y).
    """
    x, taus, normal, dn_dy = surf.geometry(y, tol)
    q = PhasePoint(x, nu * normal)
    calc = PointCalculus(sys, conn, q, depth=0, tol=tol)
    dn = dn_dy - np.einsum("ksr,k,ir->is", calc.gamma, normal, taus)
    omega = calc.Omega
    return (-(nu * nu / omega) * dn @ calc.W
            - (nu / omega) * taus @ calc.U)


# ----------------------------------------------------------------------
# Pfaff integration over a parameter grid
# ----------------------------------------------------------------------

@dataclass
class NuGrid:
    axes: list
    values: np.ndarray
    base_index: tuple
    nu0: float
    residual: float

    def nodes(self):
        for idx in np.ndindex(self.values.shape):
            y = np.array([ax[i] for ax, i in zip(self.axes, idx)])
            yield idx, y, float(self.values[idx])


def _edge_rk4(sys, conn, surf, y_from, y_to, nu, substeps, tol):
    """RK4 for nu along one straight parameter segment.

    The right-hand side is singular like 1/nu^3 as nu -> 0, so solutions
    can reach zero at finite parameter values; a sign change between
    substeps means the integration stepped across that singular set and
    left the sheet on which the shift construction exists.
    """
    delta = y_to - y_from
    h = 1.0 / substeps

    def f(s, v):
        psi = pfaff_rhs(sys, conn, surf, y_from + s * delta, v, tol)
        return float(psi @ delta)

    v = nu
    for k in range(substeps):
        s = k * h
        k1 = f(s, v)
        k2 = f(s + 0.5 * h, v + 0.5 * h * k1)
        k3 = f(s + 0.5 * h, v + 0.5 * h * k2)
        k4 = f(s + h, v + h * k3)
        prev = v
        v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(v) or abs(v) < tol.nu_floor or v * prev <= 0.0:
            raise NuVanished(
                f"nu reached {v:.3e} integrating from y={y_from.tolist()} "
                f"toward y={y_to.tolist()}; the initial-speed field vanishes "
                "inside the patch for this base value"
            )
    return v


def solve_nu(sys, conn, surf, y0, nu0, grid, substeps=4, tol=DEFAULT_TOL):
    """Integrate the Pfaff system over an axis-parallel grid.

    nu is propagated from the node nearest to y0 along axis-parallel
    paths in a fixed sweep order (axis by axis), so results are
    deterministic.  The returned residual is the largest two-path
    disagreement over all grid cells: each cell's far corner is reached
    along its two edge orderings from the same base value, and the
    difference measures how far the system is from an integrable one.
    """
    if nu0 == 0:
        raise ValueError("nu0 must be nonzero")
    axes = surf.grid_axes(grid)
    m = surf.m
    y0 = np.asarray(y0, dtype=float)
    base = tuple(int(np.argmin(np.abs(ax - y0[d]))) for d, ax in enumerate(axes))
    shape = tuple(len(ax) for ax in axes)
    values = np.full(shape, np.nan)
    values[base] = nu0

    def node(idx):
        return np.array([ax[i] for ax, i in zip(axes, idx)])

    # sweep axis by axis: after pass d, the slab spanned by axes 0..d is filled
    filled = [base]
    for d in range(m):
        new_filled = []
        for idx in filled:
            new_filled.append(idx)
            for direction in (1, -1):
                cur = idx
                while True:
                    nxt = list(cur)
                    nxt[d] += direction
                    if not (0 <= nxt[d] < shape[d]):
                        break
                    nxt = tuple(nxt)
                    values[nxt] = _edge_rk4(sys, conn, surf, node(cur), node(nxt),
                                            values[cur], substeps, tol)
                    new_filled.append(nxt)
                    cur = nxt
        filled = new_filled

    residual = 0.0
    for a in range(m):
        for b in range(a + 1, m):
            for idx in np.ndindex(shape):
                if idx[a] + 1 >= shape[a] or idx[b] + 1 >= shape[b]:
                    continue
                stepa = list(idx)
                stepa[a] += 1
                stepb = list(idx)
                stepb[b] += 1
                far = list(idx)
                far[a] += 1
                far[b] += 1
                start = values[idx]
                via_a = _edge_rk4(sys, conn, surf, node(idx), node(tuple(stepa)),
                                  start, substeps, tol)
                via_a = _edge_rk4(sys, conn, surf, node(tuple(stepa)), node(tuple(far)),
                                  via_a, substeps, tol)
                via_b = _edge_rk4(sys, conn, surf, node(idx), node(tuple(stepb)),
                                  start, substeps, tol)
                via_b = _edge_rk4(sys, conn, surf, node(tuple(stepb)), node(tuple(far)),
                                  via_b, substeps, tol)
                residual = max(residual, abs(via_a - via_b))
    return NuGrid(axes=axes, values=values, base_index=base, nu0=nu0,
                  residual=residual)


def compatibility_residual(sys, conn, surf, y, nu, tol=DEFAULT_TOL):
    """Antisymmetric mixed-partial defect of the Pfaff system at one point.

    Assembled from the A/B/C tensors and the projected dn map; vanishes
    identically when the additional normality equations hold.  The output
    is exactly antisymmetric by construction.
    """
    x, taus, normal, dn_dy = surf.geometry(y, tol)
    q = PhasePoint(x, nu * normal)
    calc = PointCalculus(sys, conn, q, depth=1, tol=tol)
    dn = dn_dy - np.einsum("ksr,k,ir->is", calc.gamma, normal, taus)
    pdn = np.einsum("qr,iq->ir", calc.P, dn)
    omega = calc.Omega
    xa = np.einsum("rs,ir,js->ij", calc.A_tensor, pdn, pdn)
    xb = np.einsum("rs,ir,js->ij", calc.B_tensor, pdn, taus)
    xc = np.einsum("rs,ir,js->ij", calc.C_tensor, taus, taus)
    return (nu ** 3 / omega * (xa - xa.T)
            + nu ** 2 / omega * (xb - xb.T)
            + nu / omega * (xc - xc.T))


# ----------------------------------------------------------------------
# the shift itself
# ----------------------------------------------------------------------

@dataclass
class ShiftRun:
    surf: Hypersurface
    ys: list
    nus: np.ndarray
    trajectories: list

    @property
    def t(self):
        return self.trajectories[0].t

    def phi_matrix(self):
        """|phi| over (time, node, variation) collapsed to (time,) maxima."""
        phis = np.stack([tr.phis for tr in self.trajectories], axis=1)
        return np.max(np.abs(phis), axis=(1, 2))

    def write_csv(self, path):
        n = self.surf.n
        m = self.surf.m
        cols = ([f"y{i+1}" for i in range(m)] + ["t"]
                + [f"x{i+1}" for i in range(n)] + [f"p{i+1}" for i in range(n)]
                + [f"phi_{j+1}" for j in range(m)])
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for y, tr in zip(self.ys, self.trajectories):
                phis = tr.phis
                for k in range(len(tr.t)):
                    row = [*y, tr.t[k], *tr.x[k], *tr.p[k], *phis[k]]
                    fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def simulate_shift(sys, conn, surf, nu_source, cfg, grid=None, tol=DEFAULT_TOL):
    """Shift a gridded surface patch along the system's trajectories.

    Initial data per grid node: x from the embedding, p = nu * n, tau_i
    the embedding tangents, and xi_i = (dnu/dy^i) n + nu * dn_i with
    dnu/dy taken from the Pfaff right-hand side at the solved nu (zero
    for a constant nu source).  The deviation functions phi_i then start
    at zero and stay zero exactly when the shift is normal.
    """
    if isinstance(nu_source, NuGrid):
        items = [(y, val) for _, y, val in nu_source.nodes()]
        solved = True
    else:
        nu0 = float(nu_source)
        if nu0 == 0:
            raise ValueError("nu must be nonzero on the grid")
        if grid is None:
            raise ValueError("a grid spec is required with a constant nu")
        axes = surf.grid_axes(grid)
        items = []
        for idx in np.ndindex(tuple(len(ax) for ax in axes)):
            y = np.array([ax[i] for ax, i in zip(axes, idx)])
            items.append((y, nu0))
        solved = False

    states = []
    ys, nus = [], []
    for y, nu in items:
        if abs(nu) < tol.nu_floor:
            raise NuVanished(f"nu vanished at grid node y={y!r}")
        x, taus, normal, dn_dy = surf.geometry(y, tol)
        q = PhasePoint(x, nu * normal)
        dnu = (pfaff_rhs(sys, conn, surf, y, nu, tol) if solved
               else np.zeros(surf.m))
        dn = _dn_covariant(conn, q, normal, taus, dn_dy)
        xis = dnu[:, None] * normal[None, :] + nu * dn
        states.append(ExtendedState(0.0, q, taus, xis))
        ys.append(y)
        nus.append(nu)
    trajectories = integrate_family(sys, conn, states, cfg)
    return ShiftRun(surf=surf, ys=ys, nus=np.array(nus), trajectories=trajectories)


@dataclass
class OrthogonalityReport:
    tol: float
    max_by_time: np.ndarray
    t: np.ndarray
    verdict: str
    first_violation: float | None

    @property
    def max_abs(self):
        return float(np.max(self.max_by_time))


def verify_orthogonality(run, tol):
    """NORMAL when max_i |phi_i| stays below tol for every recorded time."""
    prof = run.phi_matrix()
    t = run.t
    bad = np.flatnonzero(prof > tol)
    if bad.size:
        return OrthogonalityReport(tol=tol, max_by_time=prof, t=t,
                                   verdict="VIOLATED",
                                   first_violation=float(t[bad[0]]))
    return OrthogonalityReport(tol=tol, max_by_time=prof, t=t,
                               verdict="NORMAL", first_violation=None)


# ----------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------

def surface_from_config(cfg):
    try:
        m = int(cfg["params"])
        embedding = cfg["embedding"]
        domain = cfg["domain"]
    except KeyError as err:
        raise ConfigError(f"missing surface config field: {err}") from None
    surf = Hypersurface(len(embedding), embedding, domain,
                        normal_scale=float(cfg.get("normal_scale", 1.0)))
    if surf.m != m:
        raise ConfigError("params must equal len(embedding) - 1")
    surf.default_grid = [int(c) for c in cfg.get("grid", [9] * m)]
    return surf


def load_surface(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read surface config: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON in surface config: {err}") from None
    return surface_from_config(cfg)
