import csv
import math
from pathlib import Path

import numpy as np

from holodescent import (
    ConstraintSet,
    affine_inequality,
    ball_inequality,
    chgd_minimize,
    hgd_minimize,
    sufficient_stats,
    vm_initial_state,
    vm_pfaffian_system,
    vm_sample,
)

out_dir = Path("traces")
out_dir.mkdir(exist_ok=True)

data = vm_sample(5.0, math.pi / 4, 100, seed=2013)
stats = sufficient_stats(data)
system = vm_pfaffian_system(stats)
x0 = np.array([-2.0, 0.1])
start = vm_initial_state(x0, stats)

free = hgd_minimize(system, start.point, start.F)
print("unconstrained optimum:", free.x)

experiments = {
    # theta1 <= theta2; the true parameter lies on this boundary, so whether
    # it binds depends on the sample (for this one it does not)
    "half_plane": ConstraintSet([affine_inequality([1.0, -1.0], 0.0)]),
    # theta1^2 + theta2^2 <= 9
    "disk": ConstraintSet([ball_inequality(3.0)]),
}

for name, cons in experiments.items():
    res = chgd_minimize(system, start.point, start.F, cons)
    print(f"\n{name}: {res.status.value} after {res.iterations} iterations")
    print("  estimate", res.x, " |theta| = %.6f" % np.linalg.norm(res.x))
    print("  penalty along the path:", np.round(res.trace.penalties, 4))

    # one CSV per run, ready for plotting the path over the contours of L
    rows = res.trace.rows()
    path = out_dir / f"{name}.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    print("  trace written to", path)

# The disk run usually ends with line_search_failed: the iterate is on the
# boundary and the Newton direction of the free objective points outward, so
# no step lowers the penalty any further.
# For the disk the solution sits on the boundary, in the direction of the free optimum
disk = chgd_minimize(system, start.point, start.F, experiments["disk"])
print("\nangle of free optimum %.4f, angle on the disk %.4f"
      % (math.atan2(free.x[1], free.x[0]), math.atan2(disk.x[1], disk.x[0])))
