"""Load the bundled 6-bus case and look at its shift factors."""
import numpy as np

from dnedispatch import compute_shift_factors, load_bundled_case

system = load_bundled_case("six_bus")
print(f"{system.name}: {system.n_bus} buses, {len(system.lines)} lines, slack {system.slack_bus}")

for g in system.conventional_units:
    print(f"  {g.id} @ {g.bus} {g.control_class}  [{g.p_min:.0f}, {g.p_max:.0f}] MW  now {g.p_current:.0f}")
for v in system.vrg_units:
    print(f"  {v.id} @ {v.bus} wind, {v.capacity:.0f} MW")
print(f"  total load {system.total_load:.0f} MW")

sf = compute_shift_factors(system)

# rows are lines, columns are buses; the slack column is zero
np.set_printoptions(precision=3, suppress=True)
print("\nshift factors (line x bus)")
print("       " + "  ".join(f"{b:>6}" for b in sf.buses))
for name, row in zip(sf.lines, sf.matrix):
    print(f"{name:>6} " + "  ".join(f"{x:6.3f}" for x in row))

# 1 MW more wind at bus 6, withdrawn at the slack
print("\nflow change for +1 MW at bus 6:", sf.column("6"))
