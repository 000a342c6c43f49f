"""Independent cross-check constructions used by the CLI and the tests.

The canonical connection admits two routes: the production pipeline in
`connections` contracts a rearranged double momentum derivative through
the inverse metric pair inside the series ring, while the oracle here
rebuilds -1/2 of the second velocity derivative of the acceleration
field by explicit nested chain rules on plain jet data, including the
derivative-of-inverse-matrix step.  Agreement of the two is one of the
acceptance gates.
"""

from __future__ import annotations

import numpy as np


def canonical_connection_oracle(sys, q):
    """gamma[k,i,j] from the velocity-space generator, via plain jets."""
    n = sys.n
    vj = [sys.component_jet("V", i, q, 3) for i in range(n)]
    tj = [sys.component_jet("Theta", i, q, 2) for i in range(n)]

    def mi(*pairs):
        out = [0] * (2 * n)
        for slot, k in pairs:
            out[slot] += k
        return tuple(out)

    V = np.array([j.value for j in vj])
    T = np.array([j.value for j in tj])
    Vx = np.array([[vj[k].partial(mi((m, 1))) for m in range(n)] for k in range(n)])
    Vp = np.array([[vj[k].partial(mi((n + m, 1))) for m in range(n)] for k in range(n)])
    Vxp = np.array([[[vj[k].partial(mi((m, 1), (n + r, 1))) for r in range(n)]
                     for m in range(n)] for k in range(n)])
    Vpp = np.array([[[vj[k].partial(mi((n + m, 1), (n + r, 1))) for r in range(n)]
                     for m in range(n)] for k in range(n)])
    Vxpp = np.array([[[[vj[k].partial(mi((m, 1), (n + r, 1), (n + s, 1)))
                        for s in range(n)] for r in range(n)]
                      for m in range(n)] for k in range(n)])
    Vppp = np.array([[[[vj[k].partial(mi((n + m, 1), (n + r, 1), (n + s, 1)))
                        for s in range(n)] for r in range(n)]
                      for m in range(n)] for k in range(n)])
    Tp = np.array([[tj[m].partial(mi((n + r, 1))) for r in range(n)] for m in range(n)])
    Tpp = np.array([[[tj[m].partial(mi((n + r, 1), (n + s, 1))) for s in range(n)]
                     for r in range(n)] for m in range(n)])

    # acceleration field and its first two momentum derivatives by Leibniz
    dphi = (np.einsum("kmr,m->kr", Vxp, V) + np.einsum("km,mr->kr", Vx, Vp)
            + np.einsum("kmr,m->kr", Vpp, T) + np.einsum("km,mr->kr", Vp, Tp))
    d2phi = (np.einsum("kmrs,m->krs", Vxpp, V)
             + np.einsum("kmr,ms->krs", Vxp, Vp)
             + np.einsum("kms,mr->krs", Vxp, Vp)
             + np.einsum("km,mrs->krs", Vx, Vpp)
             + np.einsum("kmrs,m->krs", Vppp, T)
             + np.einsum("kmr,ms->krs", Vpp, Tp)
             + np.einsum("kms,mr->krs", Vpp, Tp)
             + np.einsum("km,mrs->krs", Vp, Tpp))

    g_down = np.linalg.inv(Vp)
    # d g_down / dp_s = -g_down (d g_up / dp_s) g_down
    dg_down = -np.einsum("ra,abs,bi->sri", g_down, Vpp, g_down)

    # first velocity derivative of the acceleration, then the second
    psi1 = np.einsum("ri,kr->ki", g_down, dphi)
    dpsi1 = (np.einsum("sri,kr->kis", dg_down, dphi)
             + np.einsum("ri,krs->kis", g_down, d2phi))
    second = np.einsum("sj,kis->kij", g_down, dpsi1)
    return -0.5 * second
