"""The shift-initialization field nu on a sphere patch.

With more than one surface parameter the initial-speed function nu has
to satisfy a complete Pfaff system, which is solvable only when the
system's compatibility tensors cancel.  Operationally that is path
independence: integrating nu around the two edge orderings of every grid
cell must give the same value.  The residual scales like the integration
order for compliant systems and saturates at order one for broken ones.
"""

import numpy as np

from nslab import (
    ExplicitSystem,
    Hypersurface,
    build_modified_hamiltonian,
    canonical_connection,
    compatibility_residual,
    solve_nu,
)

sphere = Hypersurface(3, ["sin(y1)*cos(y2)", "sin(y1)*sin(y2)", "cos(y1)"],
                      [[0.3, 1.2], [-0.6, 0.6]])

print("compliant system (rescaled Hamiltonian with position dependence):")
geo = build_modified_hamiltonian("(p1^2 + p2^2 + p3^2)/2 + x1/2", 3)
conn = canonical_connection(geo)
for counts in ([3, 3], [5, 5]):
    grid = solve_nu(geo, conn, sphere, [0.75, 0.0], 2.0, counts, substeps=1)
    print(f"  grid {counts}: nu in [{grid.values.min():.6f}, {grid.values.max():.6f}],"
          f" two-path residual {grid.residual:.3e}")
print("  halving the spacing divides the residual by ~2^5;")
print("  the defect is pure integrator truncation, not incompatibility.")
print()

print("pointwise compatibility residual (antisymmetric matrix):")
out = compatibility_residual(geo, conn, sphere, [0.7, 0.2], 1.3)
print(f"  compliant system : max |theta_ij - theta_ji| = {np.max(np.abs(out)):.2e}")
bad = ExplicitSystem(3, ["p1", "p2", "p3"], ["p2^2", "0", "0"])
out = compatibility_residual(bad, canonical_connection(bad), sphere, [0.7, 0.2], 1.3)
print(f"  perturbed system : max |theta_ij - theta_ji| = {np.max(np.abs(out)):.2e}")
print()
print("For the perturbed system no choice of nu can make the shift normal;")
print("the Pfaff system is genuinely inconsistent, not merely hard to solve.")
