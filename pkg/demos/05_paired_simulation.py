"""Run both dispatch methods over the same validation window and compare.

About a minute on one core.
"""
from dnedispatch import SimulationConfig, load_bundled_case, run_simulation
from dnedispatch.synthetic import generate_wind

system = load_bundled_case("six_bus")
history, validation = generate_wind(system.vrg_capacity, 8760, 48, seed=2024)

reports = {}
for method in ("proposed", "odne"):
    cfg = SimulationConfig(method=method, n_dne=100, n_obp=20, horizon=list(range(24)))
    reports[method] = run_simulation(system, history, validation, cfg)
    print(method, reports[method].summary())

prop, base = reports["proposed"], reports["odne"]
print("\nperiod  in-sample (prop/odne)  covered  wind prop/odne")
for a, b in zip(prop.per_period, base.per_period):
    print(f"{a.period:6d}  {a.in_sample_covered:5d} / {b.in_sample_covered:<5d}       {int(a.covered)}/{int(b.covered)}"
          f"    {a.wind_output_mw:6.1f} / {b.wind_output_mw:6.1f}")

prop.write("out/demo_proposed", [v.id for v in system.vrg_units])
