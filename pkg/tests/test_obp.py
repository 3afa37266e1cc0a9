import numpy as np
import pytest

from dnedispatch.model import compute_shift_factors, load_bundled_case
from dnedispatch.obp import ObpConfig, ObpInfeasible, corrective_cost, sample_injections, solve_obp
from dnedispatch.robust import enumerate_subproblem
from dnedispatch.solver import SolveStatus

from instances import assert_robust, fixed_two_stage, random_dne_instance, sample_set, two_bus


def test_corrective_cost_single_unit():
    system = two_bus(delta=100.0)
    sf = compute_shift_factors(system)
    c = corrective_cost(system, sf, [30.0], [20.0])
    assert c.cost == pytest.approx(300.0)
    assert c.outputs == pytest.approx([30.0])
    assert c.slack_used == pytest.approx(0.0)


def test_corrective_cost_shortfall_penalized_or_strict():
    system = two_bus(delta=1.0)
    sf = compute_shift_factors(system)
    strict = corrective_cost(system, sf, [30.0], [10.0], penalty="strict")
    assert strict.status is SolveStatus.INFEASIBLE and strict.cost == float("inf")
    # unit tops out at 31 MW; 9 MW of slack at 10 x 10 $/MWh
    soft = corrective_cost(system, sf, [30.0], [10.0])
    assert soft.slack_used == pytest.approx(9.0)
    assert soft.cost == pytest.approx(310.0 + 900.0)
    assert corrective_cost(system, sf, [30.0], [10.0], penalty=50.0).cost == pytest.approx(310.0 + 450.0)


def test_corrective_cost_includes_nccu_at_base_point():
    system = load_bundled_case("smoke3")
    sf = compute_shift_factors(system)
    c = corrective_cost(system, sf, [70.0, 20.0], [20.0])
    # G1 redispatches to 70: 200 + 15*50; G2 fixed at 20: 150 + 22*10
    assert c.cost == pytest.approx(950.0 + 370.0)


def test_sample_injections_clip_and_curtail():
    s = sample_set([[-6.0], [1.0], [4.0]], [5.0])
    np.testing.assert_allclose(sample_injections(s, [5.0], [7.0], [8.0])[:, 0], [0.0, 6.0, 7.0])


def smoke_setup(width=20.0):
    system = load_bundled_case("smoke3")
    sf = compute_shift_factors(system)
    f = np.array([25.0])
    s = sample_set([-8.0, -3.0, 0.0, 2.0, 7.0], f)
    return system, sf, s, f, f - width / 2, f + width / 2


def grid_oracle(system, sf, s, f, lower, upper, step=1.0):
    """Cheapest expected cost over a grid of base points passing the
    base-case and robust checks."""
    best = np.inf
    g1, g2 = system.conventional_units
    realized = sample_injections(s, f, upper, system.vrg_capacity)
    for p2 in np.arange(g2.p_min, g2.p_max + 1e-9, step):
        # base case: wind in [0, forecast]
        for p1 in np.arange(max(g1.p_min, system.total_load - p2 - f[0]), system.total_load - p2 + 1e-9, step):
            problem, x = fixed_two_stage(system, sf, lower, upper, [p1, p2])
            if enumerate_subproblem(problem, x)[0] > 1e-7:
                continue
            cost = np.mean([corrective_cost(system, sf, [p1, p2], r).cost for r in realized])
            best = min(best, cost)
    return best


def test_obp_matches_grid_search_oracle():
    system, sf, s, f, lo, hi = smoke_setup()
    dec = solve_obp(system, sf, s, f, lo, hi)
    assert dec.expected_cost == pytest.approx(grid_oracle(system, sf, s, f, lo, hi), abs=1e-6)
    assert dec.expected_cost == pytest.approx(dec.objective, abs=1e-6)
    assert dec.per_sample_costs.mean() == pytest.approx(dec.expected_cost)
    assert_robust(system, sf, lo, hi, dec.base_obp)


def test_obp_rejects_limits_wider_than_corrective_range():
    system, sf, s, f, lo, hi = smoke_setup(width=24.0)
    with pytest.raises(ObpInfeasible):
        solve_obp(system, sf, s, f, lo, hi)


def test_obp_rejects_malformed_limits():
    system, sf, s, f, lo, hi = smoke_setup()
    with pytest.raises(ValueError):
        solve_obp(system, sf, s, f, hi, lo)


def test_cost_scaling_keeps_base_points():
    system, sf, s, f, lo, hi = smoke_setup(width=12.0)
    a = solve_obp(system, sf, s, f, lo, hi)
    b = solve_obp(system.with_costs_scaled(3.0), sf, s, f, lo, hi)
    np.testing.assert_allclose(a.base_obp, b.base_obp, atol=1e-6)
    assert b.expected_cost == pytest.approx(3.0 * a.expected_cost)


def test_strict_costs_never_undercut_penalized():
    system, sf, s, f, lo, hi = smoke_setup(width=4.0)
    dec = solve_obp(system, sf, s, f, lo, hi)
    assert np.isfinite(dec.expected_cost)
    dec_strict = solve_obp(system, sf, s, f, lo, hi, ObpConfig(penalty="strict"))
    assert dec_strict.expected_cost >= dec.expected_cost - 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_obp_after_dne_is_robust(seed):
    from dnedispatch.dne import solve_dne

    rng = np.random.default_rng(200 + seed)
    system, sf, s, f = random_dne_instance(rng, n_vrg=2, n_samples=10)
    dne = solve_dne(system, sf, s, f)
    dec = solve_obp(system, sf, s, f, dne.lower, dne.upper)
    assert_robust(system, sf, dne.lower, dne.upper, dec.base_obp)
    assert np.all(np.isfinite(dec.per_sample_costs))
