"""Economic dispatch, LMPs, and the LMP-weighted DNE baseline."""
import numpy as np

from dnedispatch import compute_shift_factors, load_bundled_case, solve_ed, solve_odne

system = load_bundled_case("six_bus")
sf = compute_shift_factors(system)
forecast = np.array([35.0, 40.0])

ed = solve_ed(system, sf, forecast)
print("ED base points", np.round(ed.obp, 2), " wind", np.round(ed.vrg_dispatch, 2), " cost", round(ed.total_cost, 1))
for bus, price in zip(system.buses, ed.lmp):
    print(f"  LMP bus {bus}: {price:7.2f}")

# widest robust box at the ED base points, weighted by local prices
odne = solve_odne(system, sf, ed)
print("baseline limits", np.round(odne.lower, 2), np.round(odne.upper, 2), " fallback", odne.fallback)
