"""Synthetic forecast/error histories: errors grow with the forecast level."""
import numpy as np

from dnedispatch.synthetic import WindModel, generate_wind

cap = [60.0, 60.0]
history, validation = generate_wind(cap, 8760, 24, seed=1)
f = np.array([r.forecast for r in history])
e = np.array([r.error for r in history])

print(f"{len(history)} history records, {len(validation)} validation periods")
print("lag-1 autocorrelation of W1 forecast", round(np.corrcoef(f[:-1, 0], f[1:, 0])[0, 1], 3))
print("cross-unit error correlation       ", round(np.corrcoef(e[:, 0], e[:, 1])[0, 1], 3))

bins = np.quantile(f[:, 0], [0, 0.25, 0.5, 0.75, 1.0])
for lo, hi in zip(bins, bins[1:]):
    mask = (f[:, 0] >= lo) & (f[:, 0] <= hi)
    print(f"  forecast {lo:5.1f}-{hi:5.1f} MW: error std {e[mask, 0].std():5.2f}")

# calmer weather, smaller errors
calm, _ = generate_wind(cap, 2000, 0, seed=1, model=WindModel(ar=0.97, error_base=0.01, error_slope=0.05))
print("calm model error std", round(np.std([r.error[0] for r in calm]), 2))
