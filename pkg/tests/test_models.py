import numpy as np
import pytest

from wrvc.errors import DomainError, ExpressionError, ModelError
from wrvc.expr import evaluate, parse_expression, to_string
from wrvc.jets import Jet
from wrvc.models import (
    BUILTIN_NAMES,
    builtin_model,
    lcf_candidate_ambient,
    load_model_file,
    quasi_einstein_ambient,
)
from wrvc.rho import obstruction_tensors, save_ambient_file, volume_coefficients
from wrvc.weighted import (
    quasi_einstein_residual,
    sigma_k_phi,
    weighted_invariants,
)


# -- expression parsing ---------------------------------------------------


def test_parse_and_evaluate_metric_component():
    ast = parse_expression("4/(1+x^2+y^2)^2")
    assert evaluate(ast, {"x": 0.0, "y": 0.0}) == pytest.approx(4.0)


def test_jet_evaluation_derivative():
    ast = parse_expression("sin(x)*cos(x)")
    x = Jet.variable(0, 0.0, 1, 3)
    val = evaluate(ast, {"x": x})
    assert val.partial((1,)) == pytest.approx(1.0)


def test_domain_error_is_not_parse_error():
    ast = parse_expression("log(0.0)")
    with pytest.raises(DomainError):
        evaluate(ast, {})


def test_syntax_error_carries_position():
    with pytest.raises(ExpressionError) as err:
        parse_expression("1 + * 2")
    assert err.value.position == 4


def test_unknown_identifier_at_evaluation():
    ast = parse_expression("1 + q")
    with pytest.raises(ExpressionError) as err:
        evaluate(ast, {"x": 1.0})
    assert "q" in str(err.value)


def test_unknown_function_and_arity():
    with pytest.raises(ExpressionError):
        parse_expression("sinh(1)")
    with pytest.raises(ExpressionError):
        parse_expression("pow(2)")
    with pytest.raises(ExpressionError):
        parse_expression("sqrt(1, 2)")


def test_precedence_structure():
    # ^ over unary minus over * over +, right-assoc ^
    assert evaluate(parse_expression("-2^2"), {}) == pytest.approx(-4.0)
    assert evaluate(parse_expression("2^3^2"), {}) == pytest.approx(512.0)
    assert evaluate(parse_expression("2-3-4"), {}) == pytest.approx(-5.0)
    assert evaluate(parse_expression("12/2/3"), {}) == pytest.approx(2.0)
    assert evaluate(parse_expression("1+2*3"), {}) == pytest.approx(7.0)


@pytest.mark.parametrize("text", [
    "4/(1+x^2+y^2)^2",
    "-x^2+3*(y-2)/z",
    "pow(x, 1.5)-sin(x)*cos(y)",
    "x^-2",
    "2^3^2",
    "-(x*y)",
    "a-b-c",
    "a-(b-c)",
    "x/(y*z)",
    "sqrt(exp(x)+1)",
])
def test_print_parse_roundtrip(text):
    ast = parse_expression(text)
    assert parse_expression(to_string(ast)) == ast


def test_jet_float_agreement():
    rng = np.random.default_rng(0)
    ast = parse_expression("exp(x*y)-sqrt(1+x^2)*cos(y)+y/(2+x)")
    for _ in range(10):
        px, py = rng.uniform(-0.8, 0.8, 2)
        jx = Jet.variable(0, px, 2, 3)
        jy = Jet.variable(1, py, 2, 3)
        jet_val = evaluate(ast, {"x": jx, "y": jy})
        float_val = evaluate(ast, {"x": px, "y": py})
        assert jet_val.value == pytest.approx(float_val, rel=1e-13)


def test_array_evaluation_matches_scalar():
    ast = parse_expression("4/(1+x^2+y^2)^2")
    xs = np.array([0.0, 0.3, -0.7])
    ys = np.array([0.1, -0.2, 0.4])
    arr = evaluate(ast, {"x": xs, "y": ys})
    for i in range(3):
        assert arr[i] == pytest.approx(evaluate(ast, {"x": xs[i], "y": ys[i]}))


# -- builtin models --------------------------------------------------------


def test_unknown_model_name():
    with pytest.raises(ModelError):
        builtin_model("nonsense")


def test_qe_sphere_parameter_guards():
    with pytest.raises(ModelError):
        builtin_model("qe_sphere", 3, m=1.0, mu=1.0)
    with pytest.raises(ModelError):
        builtin_model("qe_sphere", 3, m=2.0, mu=-1.0)


def test_qe_sphere_constants():
    spec = builtin_model("qe_sphere", 3, 2, 1)
    assert spec.lam == pytest.approx(0.25)
    p = spec.structure_at([0.1, 0.2, 0.0])
    assert p.f.value == pytest.approx(np.sqrt(0.5))
    lam, res = quasi_einstein_residual(
        weighted_invariants(p), p.g.matrix, 3, 2.0
    )
    assert lam == pytest.approx(0.25, abs=1e-11)
    assert res <= 1e-9


def test_qe_sphere_many_points():
    spec = builtin_model("qe_sphere", 3, 2, 1)
    rng = np.random.default_rng(4)
    for point in spec.random_points(rng, 20):
        p = spec.structure_at(point)
        _, res = quasi_einstein_residual(
            weighted_invariants(p), p.g.matrix, 3, 2.0
        )
        assert res <= 1e-9


def test_euclidean_invariants_vanish():
    spec = builtin_model("euclidean", 3)
    w = weighted_invariants(spec.structure_at([0.3, -0.4, 0.2]))
    assert abs(w.J) < 1e-12 and abs(w.r_phi) < 1e-12
    assert np.max(np.abs(w.ric_phi)) < 1e-12


def test_round_sphere_unweighted_curvature():
    spec = builtin_model("round_sphere_stereographic", 3)
    rng = np.random.default_rng(5)
    for point in spec.random_points(rng, 5):
        p = spec.structure_at(point)
        w = weighted_invariants(p)
        assert np.allclose(w.ric_phi, 2.0 * p.g.matrix, atol=1e-10)
    assert spec.lam == pytest.approx(0.5)


def test_hyperbolic_constants():
    spec = builtin_model("hyperbolic_upper_half", 3)
    p = spec.structure_at(spec.default_point)
    w = weighted_invariants(p)
    assert w.r_phi == pytest.approx(-6.0, abs=1e-11)
    assert spec.lam == pytest.approx(-0.5)


def test_builtin_models_evaluate_on_domain():
    rng = np.random.default_rng(6)
    for name in BUILTIN_NAMES:
        spec = builtin_model(name, 3, m=2.0 if name == "qe_sphere" else None,
                             mu=1.0 if name == "qe_sphere" else None)
        for point in spec.random_points(rng, 10):
            spec.structure_at(point)   # must not raise


# -- ambient generators -------------------------------------------------------


def test_quasi_einstein_ambient_structure():
    spec = builtin_model("qe_sphere", 3, 2, 1)
    point = [0.1, 0.2, 0.0]
    a = quasi_einstein_ambient(spec, point, 5)
    g0 = spec.metric_at(point, 0).matrix
    f0 = spec.density_at(point, 0).value
    lam = spec.lam
    assert np.allclose(a.gcoeffs[0], g0)
    assert np.allclose(a.gcoeffs[1], 2 * lam * g0)
    assert np.allclose(a.gcoeffs[2], lam**2 * g0)
    assert np.max(np.abs(a.gcoeffs[3:])) == 0.0
    assert a.fcoeffs[0] == pytest.approx(f0)
    assert a.fcoeffs[1] == pytest.approx(lam * f0)
    # first-order data carries (2P, (Y/m) f) for P = lam g, Y = m lam
    p = spec.structure_at(point)
    w = weighted_invariants(p)
    assert np.allclose(a.gcoeffs[1], 2 * w.P, atol=1e-10)
    assert a.fcoeffs[1] == pytest.approx(w.Y / 2.0 * f0, abs=1e-11)


def test_lambda_zero_gives_constant_expansion():
    spec = builtin_model("euclidean", 3, m=2.0)
    a = quasi_einstein_ambient(spec, [0.0, 0.0, 0.0], 4)
    assert np.allclose(volume_coefficients(a, 2.0).v, 0.0, atol=1e-14)


def test_missing_lambda_errors():
    spec = builtin_model("round_sphere_stereographic", 3, m=2.0)
    assert spec.lam is None
    with pytest.raises(ModelError):
        quasi_einstein_ambient(spec, [0.0, 0.0, 0.0], 3)


def test_lcf_specializes_to_quasi_einstein():
    rng = np.random.default_rng(7)
    g = np.eye(3) + 0.2 * _sym(rng, 3)
    lam, m, f = 0.3, 2.0, 1.1
    a = lcf_candidate_ambient(g, f, lam * g, m * lam, m, 4)
    b = __import__("wrvc.models", fromlist=["quasi_einstein_coeffs"]) \
        .quasi_einstein_coeffs(g, f, lam, 4)
    assert np.allclose(a.gcoeffs[:3], b.gcoeffs[:3], atol=1e-13)
    assert np.allclose(a.fcoeffs[:2], b.fcoeffs[:2], atol=1e-13)


def test_lcf_random_diagonal_oracle():
    rng = np.random.default_rng(8)
    g = np.eye(3)
    P = np.diag(rng.uniform(-0.5, 0.5, 3))
    Y, m = 0.4, 2.0
    a = lcf_candidate_ambient(g, 1.0, P, Y, m, 5)
    v = volume_coefficients(a, m)
    for k in range(1, 6):
        assert v[k] == pytest.approx(sigma_k_phi(Y, P, g, m, k), abs=1e-10)
    assert np.max(obstruction_tensors(a).sup_norms()) < 1e-12


def _sym(rng, n):
    a = rng.uniform(-1, 1, (n, n))
    return 0.5 * (a + a.T)


# -- model files ---------------------------------------------------------------


QE_MODEL_TEXT = """
[space]
n = 3
m = 2
mu = 1
coords = x, y, z

[metric]
g_11 = 4/(1+x^2+y^2+z^2)^2
g_22 = 4/(1+x^2+y^2+z^2)^2
g_33 = 4/(1+x^2+y^2+z^2)^2

[density]
f = 0.70710678118654752

[ambient]
lambda = 0.25
"""


def test_model_file_roundtrip(tmp_path):
    path = tmp_path / "qe.cfg"
    path.write_text(QE_MODEL_TEXT)
    spec = load_model_file(path)
    assert spec.n == 3 and spec.m == 2.0 and spec.mu == 1.0
    assert spec.lam == pytest.approx(0.25)
    p = spec.structure_at([0.1, 0.2, 0.0])
    w = weighted_invariants(p)
    assert w.J == pytest.approx(1.25, abs=1e-11)
    v = volume_coefficients(spec.ambient_at([0.1, 0.2, 0.0], 5), spec.m)
    assert v[1] == pytest.approx(1.25, abs=1e-12)


def test_model_file_lower_triangle_and_defaults(tmp_path):
    path = tmp_path / "offdiag.cfg"
    path.write_text(
        "[space]\nn = 2\nm = 2\nmu = 0\n\n"
        "[metric]\ng_11 = 2\ng_21 = 0.3\ng_22 = 1\n\n"
        "[density]\nf = 1.5\n"
    )
    spec = load_model_file(path)
    g = spec.metric_at([0.0, 0.0]).matrix
    assert g[0, 1] == pytest.approx(0.3)
    assert g[1, 0] == pytest.approx(0.3)


def test_model_file_missing_diagonal(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("[space]\nn = 2\n\n[metric]\ng_11 = 1\n")
    with pytest.raises(ModelError):
        load_model_file(path)


def test_model_file_ambient_coefficients(tmp_path):
    rng = np.random.default_rng(9)
    g = np.eye(3) + 0.1 * _sym(rng, 3)
    a = lcf_candidate_ambient(g, 1.2, 0.2 * _sym(rng, 3), 0.5, 2.0, 4)
    coeff_path = tmp_path / "amb.txt"
    save_ambient_file(a, 2.0, 0.0, coeff_path)
    model_path = tmp_path / "model.cfg"
    model_path.write_text(
        "[space]\nn = 3\nm = 2\nmu = 0\n\n"
        "[metric]\ng_11 = 1\ng_22 = 1\ng_33 = 1\n\n"
        "[density]\nf = 1.2\n\n"
        f"[ambient]\ncoefficients = {coeff_path}\n"
    )
    spec = load_model_file(model_path)
    loaded = spec.ambient_at([0.0, 0.0, 0.0], 4)
    assert np.allclose(loaded.gcoeffs, a.gcoeffs)
