import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from einstein_limits.catalog import (
    ALLOWANCE,
    FAMILIES,
    LIMIT_CHART,
    LIMIT_U_CHART,
    MODEL_CHART,
    KasnerParams,
    ParameterError,
    Perturbation,
    PerturbationError,
    T2ModelParams,
    apply_perturbation,
    family,
    kasner,
    kasner_sphere_point,
    minkowski,
    parse_metric_file,
    t2_limit,
    t2_model,
    to_rational,
)
from einstein_limits.expr import ZERO, Const, evaluate, parse, simplify
from einstein_limits.geometry import riemann
from einstein_limits.rescaling import pullback


@pytest.mark.parametrize("n", [1, 3])
def test_minkowski_is_diagonal(n):
    g = minkowski(n)
    assert g.dim == n + 1
    assert np.array_equal(g.evaluate({nm: 0.0 for nm in g.chart.names}), np.diag([-1.0] + [1.0] * n))


def test_minkowski_needs_two_dimensions():
    with pytest.raises(ParameterError):
        minkowski(0)


def test_to_rational():
    assert to_rational("2/3") == F(2, 3)
    assert to_rational("-1") == F(-1)
    assert isinstance(to_rational("0.3"), float)
    with pytest.raises(ParameterError):
        to_rational("abc")


def test_flat_kasner():
    assert riemann(kasner(KasnerParams((1, 0, 0)))).is_zero()


def test_vacuum_kasner_is_curved():
    assert not riemann(kasner(KasnerParams((F(2, 3), F(2, 3), F(-1, 3))))).is_zero()


def test_kasner_error_reports_both_sums():
    with pytest.raises(ParameterError, match=r"sum p = 1, sum p\^2 = 1/2"):
        kasner(KasnerParams(("1/2", "1/2", "0")))


def test_kasner_lapse_is_one_over_n():
    g = kasner(KasnerParams((F(2, 3), F(2, 3), F(-1, 3))))
    assert g[0, 0] == Const(F(-1, 9))


@given(st.fractions(min_value=-20, max_value=20, max_denominator=50))
def test_kasner_sphere_points_satisfy_constraints(s):
    p = kasner_sphere_point(s)
    assert sum(p) == 1 and sum(x * x for x in p) == 1


def test_t2_model_default_components():
    g = t2_model(T2ModelParams())
    t = MODEL_CHART.symbol("t")
    assert g[0, 0] == Const(F(-1, 4))
    assert g[3, 3] == t
    assert simplify(g[1, 3] - 2 * t ** Const(F(5, 4))) == ZERO
    # t^(3/2) from the a^-2 block plus 4 t^(3/2) from the twist block
    assert simplify(g[1, 1] - 5 * t ** Const(F(3, 2))) == ZERO
    assert g[1, 2] == ZERO


def test_t2_model_g_theta_cross_term():
    g = t2_model(T2ModelParams(G="cos(theta)"))
    assert evaluate(g[1, 2], {"t": 2.0, "theta": 0.0}) == 1.0


def test_g_theta_theta_grows_like_t_three_halves():
    g = t2_model(T2ModelParams(K=2, C_U=F(3, 10), C_inf=1))
    v1 = evaluate(g[1, 1], {"t": 1e2, "theta": 0.0})
    v2 = evaluate(g[1, 1], {"t": 1e4, "theta": 0.0})
    assert math.log(v2 / v1) / math.log(1e2) == pytest.approx(1.5, abs=1e-6)


@pytest.mark.parametrize(
    "kw,match",
    [
        ({"K": 0}, "nonzero"),
        ({"C_inf": 0}, "positive"),
        ({"C_inf": -1}, "positive"),
        ({"L": "cos(theta)"}, "positive"),
        ({"L": "x"}, "only depend"),
        ({"G": "sin("}, "bad G profile"),
    ],
)
def test_t2_params_validation(kw, match):
    with pytest.raises(ParameterError, match=match):
        T2ModelParams(**kw).validate()


def test_limit_is_spatially_homogeneous():
    g = t2_limit(T2ModelParams(K=2, C_U=F(3, 10), C_inf=1))
    for a in range(4):
        for b in range(4):
            assert g[a, b].free_names() <= {"Rhat"}


def test_limit_time_component():
    g = t2_limit(T2ModelParams())
    r = LIMIT_CHART.symbol("Rhat")
    assert simplify(g[0, 0] + r ** 2) == ZERO


def test_limit_u_chart_matches_substitution():
    p = T2ModelParams()
    gu = t2_limit(p, chart="u")
    again = pullback(t2_limit(p), LIMIT_U_CHART, {"Rhat": LIMIT_U_CHART.symbol("u") ** Const(F(1, 2))})
    assert gu == again
    u = LIMIT_U_CHART.symbol("u")
    # -R^2 dR^2 with R = u^(1/2) gives -dR^2 R^2 = -(1/4) du^2
    assert gu[0, 0] == Const(F(-1, 4))
    assert simplify(gu[3, 3] - u) == ZERO


def test_limit_with_symbolic_constants():
    g = t2_limit(T2ModelParams.symbolic(K=2.0, C_U=0.3, C_inf=1.0))
    assert g.parameters >= {"K", "C_U", "C_inf"}
    assert g.evaluate({"Rhat": 1.0, "thetahat": 0, "xhat": 0, "yhat": 0})[2, 2] == pytest.approx(math.exp(0.6))


def test_unknown_limit_chart():
    with pytest.raises(ParameterError):
        t2_limit(T2ModelParams(), chart="v")


def test_perturbation_of_u_accepted():
    g = apply_perturbation(T2ModelParams(), [Perturbation("U", "sin(theta)", F(-1, 2))])
    assert g.name == "t2_perturbed"
    assert g != t2_model(T2ModelParams())


def test_perturbation_of_g_rejected():
    with pytest.raises(PerturbationError):
        apply_perturbation(T2ModelParams(), [Perturbation("G", "cos(theta)", -5)])


def test_zero_g_perturbation_is_harmless():
    Perturbation("G", 0, 0).validate()


@pytest.mark.parametrize("target", sorted(ALLOWANCE))
def test_perturbation_allowances(target):
    Perturbation(target, "cos(theta)", ALLOWANCE[target]).validate()
    Perturbation(target, "cos(theta)", ALLOWANCE[target] - 1).validate()
    with pytest.raises(PerturbationError):
        Perturbation(target, "cos(theta)", ALLOWANCE[target] + F(1, 8)).validate()


def test_unknown_perturbation_target():
    with pytest.raises(PerturbationError):
        Perturbation("V", 1, -1).validate()


@pytest.mark.parametrize("params", [T2ModelParams(), T2ModelParams(K=2, C_U=F(3, 10), C_inf=1, L="1 + sin(theta)^2/10", G="cos(theta)")])
def test_empty_perturbation_is_model(params):
    a = apply_perturbation(params, [])
    b = t2_model(params)
    for i in range(4):
        for j in range(4):
            assert simplify(a[i, j] - b[i, j]) == ZERO


def test_family_lookup():
    for name in FAMILIES:
        assert family(name).dim in (4,)
    with pytest.raises(ParameterError):
        family("schwarzschild")


METRIC_FILE = """
# Kasner written by hand
chart: t x y z
positive: t
range: t 0.5 2
param: p = 2/3
g[t,t] = -1/9
g[x,x] = t^(2*p)
g[y,y] = t^(4/3)
g[z,z] = t^(-2/3)
"""


def test_metric_file_round_trip():
    g = parse_metric_file(METRIC_FILE)
    ref = kasner(KasnerParams((F(2, 3), F(2, 3), F(-1, 3))))
    assert g.chart.names == ref.chart.names
    assert g.defaults["p"] == pytest.approx(2 / 3)
    pt = {"t": 1.4, "x": 0.0, "y": 0.0, "z": 0.0}
    assert np.allclose(g.evaluate(pt), ref.evaluate(pt), rtol=1e-14)


@pytest.mark.parametrize(
    "text",
    ["g[t,t] = -1", "chart: t x\ng[t,q] = 1", "chart: t x\nnonsense", "chart: t x\ng[t,t] = (1"],
)
def test_metric_file_errors(text):
    with pytest.raises(ParameterError):
        parse_metric_file(text)


def test_profiles_parse_like_expressions():
    p = T2ModelParams(L="1 + sin(theta)^2/10")
    assert simplify(p.l_profile - parse("1 + sin(theta)^2/10", coordinates=["theta"])) == ZERO
    assert evaluate(p.l_profile, {"theta": math.pi / 2}) == pytest.approx(1.1)
