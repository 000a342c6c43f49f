"""Pointwise residuals of the weak and additional normality equations.

The weak residuals project the deviation-equation fields alpha and eta
onto the null space of the momentum covector; the additional residuals
test projected antisymmetry of A and C and proportionality of the
projected B to the projector itself.  A system admits the normal shift
of arbitrary hypersurfaces exactly when all of them vanish wherever
p != 0, so the batch report's verdict is the operational form of that
condition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import PointCalculus
from .systems import DEFAULT_TOL


@dataclass
class ABCTensors:
    """Compatibility tensors of the Pfaff system plus the trace factor."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    lam: float


def abc_tensors(sys, conn, q, tol=DEFAULT_TOL):
    calc = PointCalculus(sys, conn, q, depth=1, tol=tol)
    return ABCTensors(A=calc.A_tensor, B=calc.B_tensor, C=calc.C_tensor,
                      lam=calc.lam)


def weak_residuals(sys, conn, q, tol=DEFAULT_TOL):
    """(sum_r alpha^r P^k_r, sum_r eta_r P^r_k) as two n-vectors."""
    calc = PointCalculus(sys, conn, q, depth=1, tol=tol)
    return _weak_from_calc(calc)


def _weak_from_calc(calc):
    weak1 = calc.P @ calc.alpha
    weak2 = calc.eta @ calc.P
    return weak1, weak2


def additional_residuals(sys, conn, q, tol=DEFAULT_TOL):
    """(addA, addB, addC) matrices; empty for n = 2 where they are vacuous."""
    calc = PointCalculus(sys, conn, q, depth=1, tol=tol)
    return _additional_from_calc(calc)


def _additional_from_calc(calc):
    n = calc.n
    if n == 2:
        empty = np.zeros((0, 0))
        return empty, empty, empty
    P = calc.P
    A, B, C = calc.A_tensor, calc.B_tensor, calc.C_tensor
    addA = np.einsum("ir,rs,js->ij", P, A - A.T, P)
    addC = np.einsum("ri,rs,sj->ij", P, C - C.T, P)
    addB = P @ B @ P - calc.lam * P
    return addA, addB, addC


@dataclass
class NormalityResidual:
    """Raw residuals at one point plus the conditioning scale.

    `max_abs` is the raw form the acceptance thresholds apply to;
    `normalized_max` divides by 1 + the magnitudes of the fields the
    residuals are built from, which flattens the growth of raw values at
    large momenta.
    """

    q: object
    weak1: np.ndarray
    weak2: np.ndarray
    addA: np.ndarray
    addB: np.ndarray
    addC: np.ndarray
    scale: float = 1.0
    error: str = ""

    @property
    def max_abs(self):
        parts = [self.weak1, self.weak2, self.addA, self.addB, self.addC]
        vals = [np.max(np.abs(p)) for p in parts if p.size]
        return float(max(vals)) if vals else float("nan")

    @property
    def normalized_max(self):
        return self.max_abs / self.scale


def residual_at(sys, conn, q, tol=DEFAULT_TOL):
    """All residuals at one point from a single shared pipeline."""
    calc = PointCalculus(sys, conn, q, depth=1, tol=tol)
    weak1, weak2 = _weak_from_calc(calc)
    addA, addB, addC = _additional_from_calc(calc)
    scale = float(1.0
                  + np.linalg.norm(calc.alpha) + np.linalg.norm(calc.eta)
                  + np.linalg.norm(calc.A_tensor) + np.linalg.norm(calc.B_tensor)
                  + np.linalg.norm(calc.C_tensor))
    return NormalityResidual(q=q, weak1=weak1, weak2=weak2,
                             addA=addA, addB=addB, addC=addC, scale=scale)


@dataclass
class BatchReport:
    rows: list
    tolerance: float
    n: int
    additional_applicable: bool

    @property
    def evaluated(self):
        return [r for r in self.rows if not r.error]

    @property
    def max_abs(self):
        vals = [r.max_abs for r in self.evaluated]
        return float(max(vals)) if vals else float("nan")

    @property
    def median_abs(self):
        vals = [r.max_abs for r in self.evaluated]
        return float(np.median(vals)) if vals else float("nan")

    @property
    def verdict(self):
        if not self.evaluated or len(self.evaluated) < len(self.rows):
            return "FAIL"
        return "PASS" if self.max_abs <= self.tolerance else "FAIL"

    @property
    def violations(self):
        return [r for r in self.rows if r.error or r.max_abs > self.tolerance]

    def write_csv(self, path):
        cols = ([f"x{i+1}" for i in range(self.n)]
                + [f"p{i+1}" for i in range(self.n)]
                + ["weak1_max", "weak2_max", "addA_max", "addB_max",
                   "addC_max", "verdict"])
        def block(arr):
            return f"{np.max(np.abs(arr)):.17g}" if arr.size else "n/a"
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for r in self.rows:
                point = [f"{v:.17g}" for v in (*r.q.x, *r.q.p)]
                if r.error:
                    fh.write(",".join(point + ["error"] * 5 + [r.error]) + "\n")
                    continue
                verdict = "pass" if r.max_abs <= self.tolerance else "FAIL"
                fh.write(",".join(
                    point + [block(r.weak1), block(r.weak2), block(r.addA),
                             block(r.addB), block(r.addC), verdict]) + "\n")


def normality_report(sys, conn, sampler, tolerance, tol=DEFAULT_TOL):
    """Residual sweep over a point cloud with a PASS/FAIL verdict.

    Point-level evaluation failures (singular metric, degenerate Omega)
    become report rows, not exceptions.  For n = 2 the additional
    equations are marked not applicable rather than trivially passed.
    """
    points = list(sampler.points())
    if not points:
        raise ValueError("sampler produced no points")
    rows = []
    for q in points:
        try:
            rows.append(residual_at(sys, conn, q, tol))
        except Exception as err:  # noqa: BLE001 - report rows carry the reason
            empty = np.zeros((0, 0))
            rows.append(NormalityResidual(q=q, weak1=np.zeros(0), weak2=np.zeros(0),
                                          addA=empty, addB=empty, addC=empty,
                                          error=f"{type(err).__name__}: {err}"))
    return BatchReport(rows=rows, tolerance=tolerance, n=sys.n,
                       additional_applicable=sys.n >= 3)
