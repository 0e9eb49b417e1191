from fractions import Fraction

import numpy as np
import pytest

from injcert.errors import BadParamsError, DimensionMismatchError, NonFiniteValueError, UnknownIdError
from injcert.maps import (
    BUILTIN_IDS,
    JacobianKind,
    MapSpec,
    exact_jacobian_det,
    finite_diff_jacobian,
    get_builtin,
    map_from_expr,
    pinchuk_det_sos,
    pinchuk_generic,
)


def test_builtin_ids():
    assert set(BUILTIN_IDS) == {
        "identity", "linear", "rotation90", "cubic1d", "square_shift1d",
        "sin_perturbed1d", "arctan1d", "pinchuk",
    }


def test_identity():
    e = get_builtin("identity", n=3)
    x = np.array([1.0, -2.0, 3.5])
    np.testing.assert_array_equal(e.spec(x), x)
    np.testing.assert_array_equal(e.spec.jacobian(x), np.eye(3))


def test_cubic_derivative_matches_ad():
    e = get_builtin("cubic1d")
    ad = map_from_expr("[x1^3 - x1]")
    for x in np.linspace(-3, 3, 13):
        assert e.spec.jacobian([x])[0, 0] == pytest.approx(3 * x * x - 1)
        assert e.spec.jacobian([x])[0, 0] == pytest.approx(ad.jacobian([x])[0, 0], abs=1e-12)


def test_unknown_id_and_bad_params():
    with pytest.raises(UnknownIdError):
        get_builtin("nope")
    with pytest.raises(BadParamsError):
        get_builtin("identity", m=2)
    with pytest.raises(BadParamsError):
        get_builtin("linear", matrix=[[1, 2], [2, 4]])
    with pytest.raises(BadParamsError):
        get_builtin("sin_perturbed1d", a=1.0)


def test_linear_custom_matrix():
    e = get_builtin("linear", matrix=[[1, 2], [0, 1]])
    np.testing.assert_array_equal(e.spec([1.0, 1.0]), [3.0, 1.0])


def test_known_collisions_hold():
    for i in BUILTIN_IDS:
        e = get_builtin(i)
        kc = e.known_properties.known_collision
        if kc is None:
            continue
        a, b = kc
        assert np.linalg.norm(e.spec(a) - e.spec(b)) <= 1e-8
        assert np.linalg.norm(np.asarray(a) - np.asarray(b)) >= 1e-2


def test_finite_difference_examples():
    A = np.array([[1.0, -3.0], [3.0, 1.0]])
    spec = MapSpec(2, lambda x: A @ x, name="affine")
    np.testing.assert_allclose(finite_diff_jacobian(spec, [0.3, -7.0], 1e-5), A, atol=1e-9)
    cubic = MapSpec(1, lambda x: x**3 - x)
    assert finite_diff_jacobian(cubic, [1.0], 1e-5)[0, 0] == pytest.approx(2.0, abs=1e-8)
    ident = MapSpec(3, lambda x: x)
    np.testing.assert_allclose(finite_diff_jacobian(ident, [5.0, 6.0, 7.0]), np.eye(3), atol=1e-9)
    with pytest.raises(BadParamsError):
        finite_diff_jacobian(ident, [0, 0, 0], 0.0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_finite_difference_non_finite_probe():
    spec = MapSpec(1, lambda x: np.log(x))
    with pytest.raises(NonFiniteValueError):
        finite_diff_jacobian(spec, [0.0], 1e-3)


def test_mapspec_checks():
    spec = MapSpec(2, lambda x: x)
    with pytest.raises(DimensionMismatchError):
        spec([1.0])
    bad = MapSpec(2, lambda x: np.array([1.0, np.inf]))
    with pytest.raises(NonFiniteValueError) as info:
        bad([0.0, 0.0])
    assert info.value.component == 2
    with pytest.raises(BadParamsError):
        MapSpec(0, lambda x: x)
    with pytest.raises(BadParamsError):
        MapSpec(1, lambda x: x, JacobianKind.ANALYTIC)


def test_evaluate_is_deterministic():
    rng = np.random.default_rng(0)
    for i in BUILTIN_IDS:
        spec = get_builtin(i).spec
        x = rng.uniform(-3, 3, size=spec.dim)
        assert spec(x).tobytes() == spec(x.copy()).tobytes()


def test_analytic_and_ad_jacobians_match_fd():
    rng = np.random.default_rng(1)
    for i in BUILTIN_IDS:
        spec = get_builtin(i).spec
        if spec.jacobian_source == JacobianKind.FINITE_DIFFERENCE:
            continue
        box = 2.0 if i == "pinchuk" else 5.0
        for x in rng.uniform(-box, box, size=(100, spec.dim)):
            ja = spec.jacobian(x)
            jf = finite_diff_jacobian(spec, x)
            assert np.max(np.abs(ja - jf)) <= 1e-5 * (1 + np.max(np.abs(ja))), (i, x)


def test_negated():
    spec = get_builtin("linear").spec
    neg = spec.negated()
    x = np.array([0.5, 2.0])
    np.testing.assert_array_equal(neg(x), -spec(x))
    np.testing.assert_array_equal(neg.jacobian(x), -spec.jacobian(x))


# Pinchuk ---------------------------------------------------------------------


def test_pinchuk_metadata():
    e = get_builtin("pinchuk")
    assert e.spec.dim == 2
    assert e.metadata["det_grid_min"] > 0
    assert e.known_properties.injective == "no"
    assert e.known_properties.det_nonvanishing == "yes"


def test_pinchuk_symbolic_oracle():
    sympy = pytest.importorskip("sympy")
    x, y = sympy.symbols("x y")
    P, Q = pinchuk_generic([x, y])
    P, Q = sympy.expand(P), sympy.expand(Q)
    assert sympy.Poly(P, x, y).total_degree() == 10
    assert sympy.Poly(Q, x, y).total_degree() == 25
    det = sympy.expand(sympy.diff(P, x) * sympy.diff(Q, y) - sympy.diff(P, y) * sympy.diff(Q, x))
    assert sympy.expand(det - pinchuk_det_sos(x, y)) == 0


def test_pinchuk_exact_collision():
    p1 = pinchuk_generic([Fraction(1), Fraction(0)])
    p2 = pinchuk_generic([Fraction(-1), Fraction(-2)])
    assert p1 == p2 == [0, -1]


def test_pinchuk_exact_det_positive_on_grid():
    pts = [Fraction(k, 2) for k in range(-10, 11, 3)]
    for a in pts:
        for b in pts:
            assert exact_jacobian_det(pinchuk_generic, (a, b)) > 0


def test_summary_is_plain_data():
    import json

    for i in BUILTIN_IDS:
        json.dumps(get_builtin(i).summary())
