"""Do-not-exceed limits for one period on the 6-bus case.

Samples are the historical forecast errors whose forecasts sit closest
to the current one.  The limits must be robustly deliverable by the
corrective units; the solver leaves out as few samples as it can.
"""
import numpy as np

from dnedispatch import DneConfig, compute_shift_factors, load_bundled_case, select_samples, solve_dne
from dnedispatch.synthetic import generate_wind

system = load_bundled_case("six_bus")
sf = compute_shift_factors(system)
history, validation = generate_wind(system.vrg_capacity, 3000, 1, seed=5)

rec = validation[0]
print("forecast      ", rec.forecast)

for n in (25, 75, 150):
    samples = select_samples(history, rec.forecast, n, system.vrg_capacity)
    dec = solve_dne(system, sf, samples, rec.forecast)
    print(
        f"n {n:3d}: lower {np.round(dec.lower, 2)} upper {np.round(dec.upper, 2)}"
        f"  covers {dec.coverage_count}/{n}  C&CG rounds {dec.ccg_iterations}  K {dec.k_used}  {dec.solve_seconds:.2f}s"
    )

# the big-M form gives the same limits, just slower
big_m = solve_dne(system, sf, samples, rec.forecast, DneConfig(formulation="dne2"))
print("big-M form     ", np.round(big_m.lower, 2), np.round(big_m.upper, 2), big_m.coverage_count)
