import numpy as np
import pytest

from minep import block_norm, load_fixture
from minep.bounds import (bound_report, cap_thm1, cap_thm2, cap_thm2_from_distance,
                          check_gamma, radius_inexact, radius_thm1, radius_thm3, radius_thm4)
from minep.certify import CertificateError
from minep.iterate import (Schedule, relaxed_start, rounded_start, run_continuous, run_mixed,
                           solve_two_phase)

from helpers import dominant_continuous_game

CYCLE = [[-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [1.0, 1.0]]


@pytest.mark.parametrize("schedule", ["gs", "jacobi"])
def test_example_1_cycle(schedule):
    t = run_mixed(load_fixture("example-1", eps=0.1), [-1.0, 1.0], schedule)
    assert t.stop_reason == "cycle-detected"
    assert [p.tolist() for p in t.cycle] == CYCLE


def test_gauss_seidel_keeps_idle_blocks_frozen():
    t = run_mixed(load_fixture("example-1"), [-1.0, 1.0], "gs")
    for J, a, b in zip(t.subsets, t.points, t.points[1:]):
        idle = [v for v in range(2) if v not in J]
        assert all(a[v] == b[v] for v in idle)


def test_cycle_detection_can_be_disabled():
    t = run_mixed(load_fixture("example-1"), [-1.0, 1.0], "gs", max_iter=6, detect_cycles=False)
    assert t.stop_reason == "max-iter" and t.cycle is None
    assert t.iterations == 12


def test_example_2_converges_to_origin():
    g = load_fixture("example-2")
    for schedule in ("gs", "jacobi"):
        t = run_mixed(g, [3.0, -4.0], schedule)
        assert t.converged
        np.testing.assert_array_equal(t.final, [0.0, 0.0])


def test_relaxed_limit_on_example_2():
    g = load_fixture("example-2").replace(int_counts=(0, 0))
    x_bar = 0.3 * 0.9 / 0.99
    t = run_continuous(g, [4.0, -4.0], "gs", max_iter=1000, step_tol=1e-13)
    assert t.converged
    np.testing.assert_allclose(t.final, [x_bar, x_bar], atol=1e-12)
    again = run_continuous(g, t.final, "gs")
    assert again.converged and max(again.steps_l2) <= 1e-12


def test_infeasible_start_is_rejected():
    g = load_fixture("example-1")
    with pytest.raises(ValueError):
        run_mixed(g, [0.5, 0.0])
    with pytest.raises(ValueError):
        run_mixed(g, [3.0, 0.0])
    with pytest.raises(ValueError):
        run_continuous(g, [3.0, 0.0])


def test_revisit_periods():
    assert Schedule("gs", 3).h == 3
    assert Schedule("jacobi", 3).h == 1
    assert Schedule("custom", 3, [[0, 1], [2]]).h == 2
    assert Schedule("custom", 3, [[0], [1], [0], [2]]).h == 4
    with pytest.raises(ValueError):
        Schedule("custom", 3, [[0], [1]])
    with pytest.raises(ValueError):
        Schedule("random", 3)


def test_sweep_budget_scales_with_period():
    g = load_fixture("example-1")
    assert run_mixed(g, [-1.0, 1.0], "gs", max_iter=3, detect_cycles=False).iterations == 6
    assert run_mixed(g, [-1.0, 1.0], "jacobi", max_iter=3, detect_cycles=False).iterations == 3


def test_trace_serializes():
    d = run_mixed(load_fixture("example-1"), [-1.0, 1.0], "gs").to_dict()
    assert d["stop_reason"] == "cycle-detected"
    assert d["cycle"] == CYCLE
    assert len(d["points"]) == d["iterations"] + 1


def test_relaxed_iterates_contract_in_block_norm():
    rng = np.random.default_rng(31)
    for _ in range(5):
        g = dominant_continuous_game(rng, alpha=0.6)
        x_bar = run_continuous(g, np.zeros(g.n), "jacobi", 5000, 1e-14).final
        t = run_continuous(g, rng.normal(size=g.n) * 10, "jacobi", 30, 0.0)
        errs = [block_norm(np.ones(g.n_players), p - x_bar, g.dims) for p in t.points]
        for a, b in zip(errs, errs[1:]):
            assert b <= 0.6 * a + 1e-9


def test_example_1_bounds():
    a, b, w, i = 0.55, 0.5, [1, 1], [1, 1]
    r1, l1 = radius_thm1(a, b, w, i, 1.05)
    r3, l3 = radius_thm3(a, b, w, i, 1.05)
    assert l1 == pytest.approx(1 / 0.45) and l3 == pytest.approx(0.5 / 0.45)
    assert r3 == pytest.approx(r1 / 2) and radius_thm4(a, b, w, i, 1.05) == (r3, l3)
    assert cap_thm1(a, b, w, i, 1.05, 2, 4.0) == 22
    assert radius_inexact(a, b, w, i, 1.05, 0.2)[1] == pytest.approx(1.2 / 0.45)


def test_relaxed_accuracy_cap():
    # 0.5^k <= 1/16 first at k = 4
    assert cap_thm2_from_distance(0.5, 1, 1.0, 1 / 16) == 4
    assert cap_thm2_from_distance(0.5, 3, 1.0, 1 / 16) == 12
    assert cap_thm2(0.5, [1, 1], 1, [[1.0], [0.0]], [[0.0], [0.0]], 1 / 16) == 4
    assert cap_thm2(0.5, [1, 1], 1, [1.0, 0.0], [0.0, 0.0], 2.0, dims=[1, 1]) == 0


def test_cluster_radius_formula():
    for eps in (0.05, 0.2, 0.5):
        alpha = (1 + eps) / 2
        assert radius_thm1(alpha, 0.5, [1, 1], [1, 1], 1.01)[1] == pytest.approx(2 / (1 - eps))


def test_gamma_range_is_checked():
    with pytest.raises(ValueError):
        check_gamma(0.5, 2.5)
    with pytest.raises(ValueError):
        check_gamma(0.5, 1.0)
    check_gamma(0.0, 1e6)


def test_bound_report_fills_available_caps():
    rep = bound_report(0.55, 0.5, [1, 1], [1, 1], gamma=1.05, h=2, dist0=4.0)
    assert rep.cap_thm1 == 22 and rep.cap_thm2 is None
    rep = bound_report(0.5, 0.5, [1, 1], [1, 1], dist0_relaxed=1.0, epsilon_relaxed=1 / 16)
    assert rep.cap_thm2 == 4 and rep.cap_thm1 is None


def test_two_phase_on_example_2():
    res = solve_two_phase(load_fixture("example-2"))
    assert res.certificate.certified
    assert res.trace_mixed.converged
    np.testing.assert_allclose(res.trace_mixed.final, [0.0, 0.0], atol=1e-12)


def test_two_phase_on_example_3_falls_back_to_mixed_iterations():
    res = solve_two_phase(load_fixture("example-3", eps=0.05), "gs", max_iter=20)
    assert not res.certificate.certified
    assert res.trace_mixed.stop_reason == "cycle-detected"


def test_two_phase_needs_certificate():
    with pytest.raises(CertificateError):
        solve_two_phase(load_fixture("example-1", eps=1.5))


def test_starts_are_feasible():
    g = load_fixture("example-6")
    x = relaxed_start(g)
    assert g.is_feasible(x, tol=1e-9, relaxed=True)
    assert g.is_feasible(rounded_start(g, x), tol=1e-9)
