import math

import numpy as np
import pytest

from injcert.collide import find_collision, inverse_jacobian, newton_invert
from injcert.errors import BadParamsError, NoConvergenceError, SingularJacobianError
from injcert.maps import MapSpec, get_builtin, map_from_expr


def test_mirror_collision():
    res = find_collision(map_from_expr("[x1^2, x2]"), [(-2, 2), (-2, 2)], 32)
    assert res.found
    w = res.witness
    assert w.residual < 1e-8 and w.separation >= 0.1
    assert w.a[0] == pytest.approx(-w.b[0], abs=1e-6)
    assert w.a[1] == pytest.approx(w.b[1], abs=1e-6)


def test_cubic_collision():
    spec = get_builtin("cubic1d").spec
    res = find_collision(spec, [(-2, 2)], 32, min_separation=0.5)
    assert res.found
    w = res.witness
    assert w.residual < 1e-8 and w.separation >= 0.5
    assert abs(spec(w.a)[0] - spec(w.b)[0]) < 1e-8


def test_identity_not_found():
    res = find_collision(get_builtin("identity").spec, [(-2, 2), (-2, 2)], 32)
    assert not res.found
    assert res.best_residual >= 0.1 * (1 - 1e-9)
    assert res.to_dict()["status"] == "NotFound"


@pytest.mark.parametrize("name", ["identity", "linear", "rotation90", "sin_perturbed1d", "arctan1d"])
def test_injective_maps_not_found_over_seeds(name):
    spec = get_builtin(name).spec
    for seed in range(10):
        assert not find_collision(spec, [(-10, 10)] * spec.dim, 8, seed=seed).found


def test_search_is_deterministic_and_thread_independent():
    spec = get_builtin("cubic1d").spec
    a = find_collision(spec, [(-2, 2)], 16, seed=3)
    b = find_collision(spec, [(-2, 2)], 16, seed=3)
    c = find_collision(spec, [(-2, 2)], 16, seed=3, workers=4)
    assert a.to_dict() == b.to_dict() == c.to_dict()
    assert a.seed == 3


def test_search_arguments():
    spec = get_builtin("identity").spec
    with pytest.raises(BadParamsError):
        find_collision(spec, [(-1, 1)] * 2, 0)
    with pytest.raises(BadParamsError):
        find_collision(spec, [(-1, 1)] * 2, 4, min_separation=0)


def test_pinchuk_small_box():
    spec = get_builtin("pinchuk").spec
    res = find_collision(spec, [(-3, 3), (-3, 3)], 48)
    assert res.found
    w = res.witness
    assert np.linalg.norm(spec(w.a) - spec(w.b)) <= 1e-8
    assert w.separation >= 0.1


def test_pinchuk_large_box():
    spec = get_builtin("pinchuk").spec
    res = find_collision(spec, [(-20, 20), (-20, 20)], 256)
    assert res.found
    assert res.witness.residual <= 1e-8


# inversion -----------------------------------------------------------------------


def test_newton_examples():
    inv = newton_invert(get_builtin("identity", n=3).spec, [1.0, 2.0, 3.0])
    np.testing.assert_allclose(inv.x, [1, 2, 3])
    assert inv.iterations == 1
    spec = get_builtin("sin_perturbed1d").spec
    y = 2 + 0.5 * math.sin(2)
    inv = newton_invert(spec, [y])
    assert inv.x[0] == pytest.approx(2.0, abs=1e-10)
    with pytest.raises(SingularJacobianError) as info:
        newton_invert(get_builtin("square_shift1d").spec, [1.0])
    np.testing.assert_array_equal(info.value.point, [0.0])


def test_newton_no_convergence():
    # arctan cannot reach 2 > pi/2
    with pytest.raises(NoConvergenceError) as info:
        newton_invert(get_builtin("arctan1d").spec, [2.0], max_iter=30)
    assert info.value.best is not None
    with pytest.raises(BadParamsError):
        newton_invert(get_builtin("identity").spec, [0, 0], tol=0)


def test_inverse_jacobian_examples():
    np.testing.assert_array_equal(inverse_jacobian(get_builtin("identity").spec, [3, 4]), np.eye(2))
    lin = get_builtin("linear", matrix=[[2, 0], [0, 4]]).spec
    np.testing.assert_allclose(inverse_jacobian(lin, [0, 0]), np.diag([0.5, 0.25]))
    sp = get_builtin("sin_perturbed1d").spec
    assert inverse_jacobian(sp, [2.0])[0, 0] == pytest.approx(1 / (1 + 0.5 * math.cos(2)))
    with pytest.raises(SingularJacobianError):
        inverse_jacobian(get_builtin("square_shift1d").spec, [0.0])
    with pytest.raises(SingularJacobianError):
        inverse_jacobian(MapSpec(2, lambda x: np.array([x[0], 1e-15 * x[1]])), [0.0, 0.0])


@pytest.mark.parametrize("name", ["identity", "linear", "sin_perturbed1d"])
def test_round_trip(name):
    spec = get_builtin(name).spec
    rng = np.random.default_rng(0)
    for x in rng.uniform(-10, 10, size=(100, spec.dim)):
        inv = newton_invert(spec, spec(x))
        assert np.linalg.norm(inv.x - x) <= 1e-8


@pytest.mark.parametrize("name", ["linear", "sin_perturbed1d"])
def test_chain_rule(name):
    spec = get_builtin(name).spec
    rng = np.random.default_rng(1)
    n = spec.dim
    for x in rng.uniform(-5, 5, size=(10, n)):
        G = inverse_jacobian(spec, x)
        np.testing.assert_allclose(G @ spec.jacobian(x), np.eye(n), atol=1e-8)
        y = spec(x)
        h = 1e-5
        fd = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            xp = newton_invert(spec, y + e, x, tol=1e-13).x
            xm = newton_invert(spec, y - e, x, tol=1e-13).x
            fd[:, j] = (xp - xm) / (2 * h)
        np.testing.assert_allclose(fd, G, atol=1e-4)


def test_inverse_result_invariant():
    spec = map_from_expr("[x1 + 0.3*sin(x2), x2 + 0.3*cos(x1)]")
    inv = newton_invert(spec, [1.0, -2.0])
    np.testing.assert_allclose(inv.inv_jacobian @ spec.jacobian(inv.x), np.eye(2), atol=1e-8)
    assert inv.residual <= 1e-10


def test_newton_handles_non_finite_trial():
    spec = MapSpec(1, lambda x: np.where(x > -1, x + 0.1 * x**2, np.nan), name="partial")
    with np.errstate(all="ignore"):
        inv = newton_invert(spec, [0.5], [0.0])
    assert abs(spec(inv.x)[0] - 0.5) <= 1e-10
