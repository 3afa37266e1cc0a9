import numpy as np
import pytest

from dnedispatch.dne import (
    DneConfig,
    DneInfeasible,
    build_dne2,
    build_dne3,
    coverage_count,
    initial_k,
    solve_dne,
    sort_sequences,
)
from dnedispatch.model import compute_shift_factors
from dnedispatch.solver import brute_force_milp, solve_milp

from instances import assert_robust, random_dne_instance, sample_set, two_bus, with_all_vertices, z_only


def hand(delta):
    system = two_bus(delta=delta)
    return system, compute_shift_factors(system), sample_set([-1.0, 0.0, 1.0], [5.0]), [5.0]


def test_loose_corrective_range_covers_everything():
    system, sf, s, f = hand(100.0)
    dec = solve_dne(system, sf, s, f)
    assert dec.coverage_count == 3
    # widest range once every sample is covered
    assert dec.lower[0] == pytest.approx(0.0) and dec.upper[0] == pytest.approx(10.0)


def test_tight_corrective_range_drops_one_sample():
    # +-0.75 MW of corrective range allows a 1.5 MW band, and the base
    # case caps output at the 5 MW forecast, so [4, 5] is the best pair
    system, sf, s, f = hand(0.75)
    dec = solve_dne(system, sf, s, f)
    assert dec.coverage_count == 2
    assert dec.upper[0] - dec.lower[0] == pytest.approx(1.5)
    assert dec.lower[0] <= 4.0 + 1e-9 and dec.upper[0] >= 5.0 - 1e-9
    assert list(dec.indicators) == [0, 0, 1]
    assert_robust(system, sf, dec.lower, dec.upper, dec.base_obp)


def test_k_escalation_from_zero():
    system, sf, s, f = hand(0.75)
    dec = solve_dne(system, sf, s, f, DneConfig(initial_k=0))
    assert dec.coverage_count == 2 and dec.k_used >= 1


def test_both_formulations_agree_on_hand_case():
    system, sf, s, f = hand(0.75)
    a = solve_dne(system, sf, s, f, DneConfig(formulation="dne2"))
    b = solve_dne(system, sf, s, f, DneConfig(formulation="dne3"))
    assert a.coverage_count == b.coverage_count == 2


def test_sort_sequences_tie_break():
    s = sample_set([[1.0, 0.0], [0.0, 0.0], [1.0, -2.0]], [5.0, 5.0])
    seq = sort_sequences(s, [5.0, 5.0], [10.0, 10.0])
    assert seq.gamma.tolist() == [[0, 2, 1], [0, 1, 2]]
    assert seq.phi.tolist() == [[1, 0, 2], [2, 0, 1]]


def test_unclipped_samples_are_rejected():
    system, sf, _, f = hand(1.0)
    bad = sample_set([6.0], [5.0])  # realized 11 > capacity 10
    with pytest.raises(ValueError, match="negative big-M"):
        build_dne2(system, sf, bad, f)
    with pytest.raises(ValueError):
        build_dne3(system, sf, sample_set([0.0], [5.0]), f, k=2)


def test_initial_k():
    assert [initial_k(n) for n in (1, 5, 10, 11, 400)] == [1, 1, 2, 3, 80]


def test_coverage_count_is_componentwise():
    s = sample_set([[0.0, 0.0], [1.0, 0.0], [0.0, 3.0]], [5.0, 5.0])
    assert coverage_count(s, [4.0, 4.0], [6.0, 6.0]) == 2
    assert coverage_count(s, [4.0, 4.0], [6.0, 8.0]) == 3


def test_emit_lp_collects_master_text():
    system, sf, s, f = hand(0.75)
    texts = []
    solve_dne(system, sf, s, f, DneConfig(initial_k=1), emit_lp=texts)
    assert texts and all(t.startswith("\\ dne3") for t in texts)
    assert "Binaries" in texts[-1]


def test_base_case_infeasibility_is_reported():
    system = two_bus(delta=1.0, load=600.0)  # beyond the 500 MW unit plus wind
    sf = compute_shift_factors(system)
    with pytest.raises(DneInfeasible):
        solve_dne(system, sf, sample_set([0.0], [5.0]), [5.0], DneConfig(formulation="dne2"))


@pytest.mark.parametrize("seed", range(6))
def test_extended_formulation_matches_big_m_by_brute_force(seed):
    rng = np.random.default_rng(seed)
    system, sf, s, f = random_dne_instance(rng, n_vrg=int(rng.integers(1, 3)), n_samples=7)
    m2 = build_dne2(system, sf, s, f, tiebreak=0.0)
    m3 = build_dne3(system, sf, s, f, k=len(s), tiebreak=0.0)
    a = brute_force_milp(with_all_vertices(m2, system, sf))
    b = brute_force_milp(z_only(with_all_vertices(m3, system, sf), m3.z))
    c = solve_milp(with_all_vertices(m3, system, sf), gap_tol=0.0)
    assert a.objective == b.objective == pytest.approx(c.objective)
    assert a.objective == round(a.objective)


@pytest.mark.parametrize("seed", range(6))
def test_solve_dne_is_robust_and_matches_escalation(seed):
    rng = np.random.default_rng(50 + seed)
    system, sf, s, f = random_dne_instance(rng, n_vrg=int(rng.integers(1, 4)), n_samples=15)
    full = solve_dne(system, sf, s, f, DneConfig(initial_k=len(s)))
    low = solve_dne(system, sf, s, f, DneConfig(initial_k=1))
    big_m = solve_dne(system, sf, s, f, DneConfig(formulation="dne2"))
    assert low.coverage_count == full.coverage_count == big_m.coverage_count
    for dec in (full, low, big_m):
        assert dec.coverage_count == coverage_count(s, dec.lower, dec.upper)
        assert_robust(system, sf, dec.lower, dec.upper, dec.base_obp)
        assert np.all(dec.base_vrg <= np.asarray(f) + 1e-7)
