"""Pick base points for fixed DNE limits by sample-average cost."""
import numpy as np

from dnedispatch import ObpConfig, compute_shift_factors, corrective_cost, load_bundled_case, select_samples, solve_dne, solve_obp
from dnedispatch.obp import ObpInfeasible
from dnedispatch.synthetic import generate_wind

system = load_bundled_case("six_bus")
sf = compute_shift_factors(system)
history, validation = generate_wind(system.vrg_capacity, 3000, 1, seed=5)
rec = validation[0]

limits = solve_dne(system, sf, select_samples(history, rec.forecast, 150, system.vrg_capacity), rec.forecast)
cost_samples = select_samples(history, rec.forecast, 20, system.vrg_capacity)

dec = solve_obp(system, sf, cost_samples, rec.forecast, limits.lower, limits.upper)
print("base points    ", np.round(dec.base_obp, 2))
print("expected cost  ", round(dec.expected_cost, 2))
print("sample spread  ", round(dec.per_sample_costs.min(), 1), "to", round(dec.per_sample_costs.max(), 1))

# strict mode drops the shortfall slack, so a sample below the lower limit
# that the corrective units cannot cover makes the whole problem infeasible
try:
    strict = solve_obp(system, sf, cost_samples, rec.forecast, limits.lower, limits.upper, ObpConfig(penalty="strict"))
    print("strict cost    ", round(strict.expected_cost, 2))
except ObpInfeasible as exc:
    print("strict mode    ", exc)

# what the operator actually pays once wind shows up
realized = np.minimum(rec.observed, limits.upper)
after = corrective_cost(system, sf, dec.base_obp, realized)
print("realized wind  ", np.round(realized, 2), " cost", round(after.cost, 2), " slack", round(after.slack_used, 3))
