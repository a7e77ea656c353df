import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from einstein_limits.catalog import (
    LIMIT_U_CHART,
    KasnerParams,
    Perturbation,
    T2ModelParams,
    apply_perturbation,
    kasner,
    minkowski,
    t2_limit,
    t2_model,
)
from einstein_limits.expr import ZERO, Const, cos, simplify
from einstein_limits.geometry import Chart
from einstein_limits.rescaling import (
    T_I,
    Box,
    RescalingError,
    ThetaMap,
    convergence_study,
    fit_rate,
    kasner_plan,
    proper_time_estimate,
    pullback,
    rescaled_norm,
    sup_distance,
    t2_convergence,
    t2_plan,
    type_ii_plan,
)

P = (F(2, 3), F(2, 3), F(-1, 3))
KASNER = kasner(KasnerParams(P))
U_CHART = Chart(("u", "x", "y", "z"), positive={"u"}, ranges=(("u", 0.5, 2.0),))


# --- pullback ---------------------------------------------------------------


def test_identity_pullback():
    assert pullback(KASNER, KASNER.chart, {}) == KASNER


def test_singular_map_rejected():
    with pytest.raises(RescalingError, match="singular"):
        pullback(KASNER, KASNER.chart, {"x": Const(0)})


def test_map_must_cover_source_chart():
    with pytest.raises(RescalingError):
        pullback(KASNER, U_CHART, {"x": U_CHART.symbol("x")})


def test_kasner_rescaling_is_exact_for_symbolic_basepoint():
    plan = kasner_plan(KasnerParams(P), [1e2, 1e4])
    pulled = pullback(KASNER, plan.target, plan.mapping, plan.scale)
    assert "t_i" not in pulled.parameters
    u = plan.target.symbol("u")
    assert pulled[0, 0] == Const(F(-1, 9))
    assert pulled[1, 1] == simplify(u ** Const(F(4, 3)))
    assert pulled[3, 3] == simplify(u ** Const(F(-2, 3)))
    assert all(pulled[a, b] == ZERO for a in range(4) for b in range(4) if a != b)


def test_kasner_plan_translation_keeps_limit():
    plan = kasner_plan(KasnerParams(P), [1e2, 1e4, 1e6, 1e8], basepoint={"x": 3.0})
    report = convergence_study(KASNER, plan, pullback(KASNER, plan.target, {"t": plan.target.symbol("u")}))
    assert report.distances == [0.0] * 4


def test_time_map_hits_basepoint():
    plan = kasner_plan(KasnerParams(P), [10.0, 1e3])
    assert plan.time_map(1.0, 1) == 1e3


def test_pullback_scale_commutes():
    plan = kasner_plan(KasnerParams(P), [1.0])
    a = pullback(KASNER, plan.target, plan.mapping, plan.scale)
    b = pullback(KASNER, plan.target, plan.mapping, 1).scaled(plan.scale)
    assert a == b


def test_pullback_is_functorial_for_affine_maps():
    c1 = Chart(("u", "x", "y", "z"), positive={"u"})
    c2 = Chart(("v", "x", "y", "z"), positive={"v"})
    m1 = {"t": 3 * c1.symbol("u"), "x": 2 * c1.symbol("x") + 1}
    m2 = {"u": c2.symbol("v") / 2, "x": c2.symbol("x") - c2.symbol("y")}
    composed = {"t": 3 * c2.symbol("v") / 2, "x": 2 * (c2.symbol("x") - c2.symbol("y")) + 1}
    assert pullback(pullback(KASNER, c1, m1), c2, m2) == pullback(KASNER, c2, composed)


def test_pullback_is_functorial_numerically():
    c1 = Chart(("u", "x", "y", "z"), positive={"u"})
    c2 = Chart(("v", "x", "y", "z"), positive={"v"})
    m1 = {"t": c1.symbol("u") ** 2}
    m2 = {"u": c2.symbol("v") ** Const(F(1, 3)), "y": c2.symbol("y") + c2.symbol("v")}
    composed = {"t": c2.symbol("v") ** Const(F(2, 3)), "y": c2.symbol("y") + c2.symbol("v")}
    lhs = pullback(pullback(KASNER, c1, m1), c2, m2)
    rhs = pullback(KASNER, c2, composed)
    box = Box((("v", 0.5, 2.0), ("x", -1, 1), ("y", -1, 1), ("z", -1, 1)), 5)
    assert sup_distance(lhs, rhs, box) <= 1e-10


def test_t2_hat_map_components():
    params = T2ModelParams(G="cos(theta)")
    plan = t2_plan(params, [1e2])
    pulled = pullback(t2_model(params), plan.target, plan.mapping, plan.scale)
    th = LIMIT_U_CHART.symbol("thetahat")
    expect = T_I ** Const(F(-3, 4)) * cos(T_I ** Const(F(1, 4)) * th)
    assert simplify(pulled[1, 2] - expect) == ZERO
    lim = t2_limit(params, chart="u")
    for a, b in [(0, 0), (2, 2), (3, 3), (1, 3)]:
        assert simplify(pulled[a, b] - lim[a, b]) == ZERO
    # the only other discrepancy is the G^2 term t_i^(-3/2) cos^2 in g_thetahat,thetahat
    rest = simplify(pulled[1, 1] - lim[1, 1] - T_I ** Const(F(-3, 2)) * cos(T_I ** Const(F(1, 4)) * th) ** 2)
    assert rest == ZERO


# --- sup_distance -----------------------------------------------------------


BOX = Box((("t", 0.5, 2.0), ("x", -1.0, 1.0), ("y", -1.0, 1.0), ("z", -1.0, 1.0)), 5)


def test_sup_distance_to_self_is_zero():
    assert sup_distance(KASNER, KASNER, BOX) == 0.0


def test_minkowski_against_twice_minkowski():
    g = minkowski(3)
    assert sup_distance(g, g.scaled(2), BOX) == 1.0


def test_sup_distance_chart_mismatch():
    with pytest.raises(RescalingError):
        sup_distance(KASNER, t2_limit(T2ModelParams()), BOX)


@settings(max_examples=25)
@given(st.lists(st.fractions(min_value=F(1, 4), max_value=4, max_denominator=8), min_size=3, max_size=3))
def test_sup_distance_is_a_pseudometric(scales):
    g1, g2, g3 = (KASNER.scaled(c) for c in scales)
    d12, d21 = sup_distance(g1, g2, BOX), sup_distance(g2, g1, BOX)
    d13, d23 = sup_distance(g1, g3, BOX), sup_distance(g2, g3, BOX)
    assert d12 == d21
    assert d12 >= 0
    # rounding in the component differences is the only slack
    assert d13 <= d12 + d23 + 1e-14 * max(1.0, d13)


def test_rescaled_model_distance_at_late_time():
    # regression values from the engine: G = 0 gives exact agreement, G = cos gives t_i^(-3/4)
    rep0 = t2_convergence(T2ModelParams())
    assert rep0.distances[-1] == 0.0
    rep = t2_convergence(T2ModelParams(G="cos(theta)"))
    assert rep.distances[-1] <= 1e-4
    assert rep.distances[-1] == pytest.approx(1e-6, rel=1e-9)


# --- convergence ------------------------------------------------------------


def test_default_convergence_rate():
    rep = t2_convergence(T2ModelParams(G="cos(theta)"))
    assert rep.slope == pytest.approx(-0.75, abs=0.05)
    assert rep.slope_ci[0] <= rep.slope <= rep.slope_ci[1]
    assert [r[0] for r in rep.rows] == [1e2, 1e4, 1e6, 1e8]
    assert all(r[1] == 2 for r in rep.rows)


def test_polarised_model_equals_limit():
    rep = t2_convergence(T2ModelParams())
    assert rep.distances == [0.0] * 4
    assert rep.slope is None


def test_non_constant_l_uses_numeric_theta_map():
    params = T2ModelParams(K=2, C_U=F(3, 10), C_inf=1, L="1 + sin(theta)^2/10", G="cos(theta)")
    rep = t2_convergence(params, points=5)
    assert rep.method == "numeric-theta-map"
    assert rep.slope == pytest.approx(-0.75, abs=0.05)


def test_convergence_needs_four_decades():
    with pytest.raises(RescalingError):
        t2_convergence(T2ModelParams(), t_list=(1e2, 1e3, 1e4, 1e5))
    with pytest.raises(RescalingError):
        t2_convergence(T2ModelParams(), t_list=(1e2,))
    with pytest.raises(RescalingError):
        t2_convergence(T2ModelParams(), t_list=(1e4, 1e2, 1e6, 1e8))


def test_results_do_not_depend_on_thread_count():
    params = T2ModelParams(G="cos(theta)", L="1 + sin(theta)^2/10")
    one = t2_convergence(params, points=4, threads=1)
    four = t2_convergence(params, points=4, threads=4)
    assert one.to_csv() == four.to_csv()


def test_compact_sets():
    plan = t2_plan(T2ModelParams(), [1e2])
    box = plan.compact_set(3, 4)
    assert box.intervals[0] == ("u", 1 / 3, 3.0)
    assert box.intervals[1] == ("thetahat", -3.0, 3.0)
    assert len(box.grid()["u"]) == 4 ** 4
    with pytest.raises(RescalingError):
        plan.compact_set(0)
    assert plan.check_jacobian() > 0


def test_fit_rate_recovers_power_law():
    ts = [1e2, 1e4, 1e6, 1e8]
    slope, intercept, ci, resid = fit_rate(ts, [3 * t ** -0.5 for t in ts])
    assert slope == pytest.approx(-0.5, abs=1e-12)
    assert intercept == pytest.approx(math.log10(3), abs=1e-12)
    assert max(abs(r) for r in resid) < 1e-12


def test_theta_map_inverts_primitive():
    from einstein_limits.expr import parse

    tm = ThetaMap(parse("1 + sin(theta)^2/10", coordinates=["theta"]))
    for target in (-3.0, 0.4, 7.5):
        th = tm.invert(target)
        # primitive of 1 + sin^2/10 is 1.05 theta - sin(2 theta)/40
        assert 1.05 * th - math.sin(2 * th) / 40 == pytest.approx(target, abs=1e-11)


# --- perturbations ----------------------------------------------------------


@pytest.mark.parametrize(
    "pert",
    [
        Perturbation("U", "cos(theta)", F(-1, 2)),
        Perturbation("eta", "cos(theta)", F(-1, 4)),
        Perturbation("ainv", "cos(theta)", -1),
        Perturbation("H", "cos(theta)", F(1, 4)),
        Perturbation("U", "cos(theta)/2", -1),
    ],
    ids=lambda p: f"{p.target}^{p.exponent}",
)
def test_admissible_perturbations_keep_the_limit(pert):
    params = T2ModelParams(G="cos(theta)")
    base = t2_convergence(params, points=5)
    rep = t2_convergence(params, points=5, model=apply_perturbation(params, [pert]))
    d = rep.distances
    assert all(b < a for a, b in zip(d, d[1:]))
    assert rep.slope < 0
    assert rep.slope >= base.slope - 0.1


# --- type II ----------------------------------------------------------------


def test_type_ii_normalises_curvature():
    pts = [{"t": 10.0, "x": 0.0, "y": 0.0, "z": 0.0}, {"t": 100.0, "x": 1.0, "y": 0.0, "z": 0.0}]
    plan = type_ii_plan(KASNER, pts)
    assert plan.kind == "type-II"
    assert plan.scales[0] == pytest.approx(math.sqrt(192) / 100, rel=1e-12)
    for i in range(2):
        assert rescaled_norm(KASNER, plan, i) == pytest.approx(1.0, abs=1e-9)
    assert plan.time_map(0.0, 1) == pytest.approx(100.0)
    assert plan.compact_set(2).intervals[0] == ("u", -2.0, 2.0)


def test_type_ii_rejects_flat_space():
    with pytest.raises(RescalingError, match="curvature vanishes"):
        type_ii_plan(minkowski(3), [{"t": 1.0, "x": 0.0, "y": 0.0, "z": 0.0}])


def test_doubling_metric_halves_type_ii_scale():
    pt = [{"t": 10.0, "x": 0.0, "y": 0.0, "z": 0.0}]
    c1 = type_ii_plan(KASNER, pt).scales[0]
    c2 = type_ii_plan(KASNER.scaled(2), pt).scales[0]
    assert c2 == pytest.approx(c1 / 2, rel=1e-12)


# --- proper time ------------------------------------------------------------


def test_proper_time_matches_closed_form():
    p = T2ModelParams()
    assert proper_time_estimate(p, 1.0, 100.0) / 100.0 ** 2 == pytest.approx(0.5, rel=1e-2)
    assert proper_time_estimate(p, 1.0, 1e4) / 1e8 == pytest.approx(0.5, rel=1e-4)
    q = T2ModelParams(K=-3, C_U=F(1, 2))
    exact = math.exp(-0.5) * (50.0 ** 2 - 2.0 ** 2) / (2 * 3)
    assert proper_time_estimate(q, 2.0, 50.0) == pytest.approx(exact, rel=1e-9)


def test_proper_time_trivial_and_invalid_ranges():
    p = T2ModelParams()
    assert proper_time_estimate(p, 3.0, 3.0) == 0.0
    with pytest.raises(RescalingError):
        proper_time_estimate(p, 3.0, 2.0)
    with pytest.raises(RescalingError):
        proper_time_estimate(p, 0.0, 2.0)


def test_doubling_exp_cu_halves_proper_time():
    a = proper_time_estimate(T2ModelParams(C_U=0), 1.0, 20.0)
    b = proper_time_estimate(T2ModelParams(C_U=math.log(2)), 1.0, 20.0)
    assert b == pytest.approx(a / 2, rel=1e-12)
