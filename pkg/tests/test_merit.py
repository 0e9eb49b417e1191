import math

import numpy as np
import pytest

from injcert import spectral
from injcert.errors import (
    BadParamsError,
    DimensionMismatchError,
    NonPositiveAlphaError,
    RingNotSeparatingError,
    SingularAtZeroError,
)
from injcert.maps import MapSpec, get_builtin, map_from_expr
from injcert.merit import (
    eval_I,
    eval_J,
    grad_J,
    isolated_zero_radius,
    jac_I,
    make_merit,
    ring_level,
)


def cubic():
    return make_merit(get_builtin("cubic1d").spec, [0.0], [1.0])


def square():
    return make_merit(get_builtin("square_shift1d").spec, [-1.0], [1.0])


def test_cubic_pair():
    p = cubic()
    assert p.is_collision and p.warning is None
    assert eval_J(p, [0.0]) == 0.0 and eval_J(p, p.x0) == 0.0
    assert eval_J(p, [1 / math.sqrt(3)]) == pytest.approx(4 / 27, abs=1e-15)
    assert np.abs(grad_J(p, [1 / math.sqrt(3)]))[0] <= 1e-9
    assert grad_J(p, [0.0])[0] == 0.0


def test_x0_is_x2_minus_x1():
    p = make_merit(get_builtin("pinchuk").spec, [1.0, 0.0], [-1.0, -2.0])
    np.testing.assert_array_equal(p.x0, [-2.0, -2.0])
    assert eval_J(p, [0, 0]) <= 1e-24 and eval_J(p, p.x0) <= 1e-24


def test_identity_warning():
    p = make_merit(get_builtin("identity").spec, [0.0, 0.0], [1.0, 0.0])
    assert not p.is_collision and "not a collision" in p.warning
    assert eval_J(p, [0, 0]) == 1.0
    assert eval_J(p, [1, 0]) == 0.0


def test_square_shift_I():
    p = square()
    for x in np.linspace(-3, 3, 25):
        assert eval_I(p, [x])[0] == pytest.approx((x - 1) ** 2 - 1, abs=1e-12)
    assert eval_J(p, [0.0]) == 0.0 and eval_J(p, [2.0]) == 0.0
    np.testing.assert_array_equal(p.x0, [2.0])


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        make_merit(get_builtin("identity").spec, [0.0], [1.0, 0.0])


def test_translation_consistency_bitwise():
    spec = get_builtin("pinchuk").spec
    p = make_merit(spec, [1.0, 0.0], [-1.0, -2.0])
    rng = np.random.default_rng(0)
    for x in rng.uniform(-1, 1, size=(20, 2)):
        r = spec(x + p.x1) - spec(p.x2)
        assert eval_J(p, x) == float(r @ r)


def _fd_grad(p, x, h):
    g = np.empty(p.dim)
    for j in range(p.dim):
        e = np.zeros(p.dim)
        e[j] = h
        g[j] = (eval_J(p, x + e) - eval_J(p, x - e)) / (2 * h)
    return g


def test_grad_against_finite_differences():
    rng = np.random.default_rng(1)
    problems = [
        cubic(),
        square(),
        make_merit(get_builtin("sin_perturbed1d").spec, [0.3], [2.0]),
        make_merit(get_builtin("linear").spec, [0.3, 1.0], [2.0, -1.0]),
        make_merit(get_builtin("rotation90").spec, [0.3, 1.0], [2.0, -1.0]),
        make_merit(map_from_expr("[x1^2 + sin(x2), x1*x2]"), [0.5, 0.2], [-0.5, 0.2]),
    ]
    for p in problems:
        for x in rng.uniform(-2, 2, size=(30, p.dim)):
            g = grad_J(p, x)
            fd = _fd_grad(p, x, 1e-6 * (1 + np.max(np.abs(x))))
            assert np.max(np.abs(g - fd)) <= 1e-5 * (1 + np.max(np.abs(g)))


def test_isolated_zero_radius_values():
    assert isolated_zero_radius(cubic()) == pytest.approx(1 / math.sqrt(6), abs=1e-9)
    assert isolated_zero_radius(square()) == pytest.approx(0.5, abs=1e-9)
    lin = make_merit(get_builtin("linear").spec, [0.0, 0.0], [1.0, 1.0])
    assert isolated_zero_radius(lin) == 1e6


def test_isolated_zero_radius_singular():
    p = make_merit(get_builtin("square_shift1d").spec, [0.0], [1.0])
    with pytest.raises(SingularAtZeroError):
        isolated_zero_radius(p)


def test_mixed_row_matrices_nonsingular():
    # rows of I' sampled independently inside B_r must stay nonsingular
    spec = map_from_expr("[x1^2 + 3*x1 + x2, x1*x2 - 2*x2 + x1^3]")
    p = make_merit(spec, [0.1, -0.2], [2.0, 1.0])
    r = isolated_zero_radius(p)
    rng = np.random.default_rng(2)
    J0 = jac_I(p, [0, 0])
    for _ in range(300):
        pts = rng.normal(size=(2, 2))
        pts *= (r * rng.uniform(0, 1, size=(2, 1))) / np.linalg.norm(pts, axis=1, keepdims=True)
        mixed = np.array([jac_I(p, pts[i])[i] for i in range(2)])
        assert spectral.sigma_min(mixed) >= 0.5 * spectral.sigma_min(J0) - 1e-12


def test_ring_level_examples():
    a = ring_level(cubic(), 0.3)
    assert a.alpha == pytest.approx((0.3 - 0.027) ** 2, abs=1e-12)
    b = ring_level(square(), 0.4)
    assert b.alpha == pytest.approx(0.4096, abs=1e-12)
    # tent map: F(0) = F(10) = 0 and I(x) = x on |x| <= 5
    tent = MapSpec(1, lambda x: np.where(x <= 5, x, 10 - x), name="tent")
    c = ring_level(make_merit(tent, [0.0], [10.0]), 1.0)
    assert c.alpha == pytest.approx(1.0)
    d = ring_level(make_merit(get_builtin("identity").spec, [0.0, 0.0], [3.0, 0.0]), 1.0)
    assert d.alpha == pytest.approx(4.0)  # min |x - (3, 0)|^2 on the unit circle
    assert d.samples == 4 + 128


def test_ring_level_errors():
    with pytest.raises(RingNotSeparatingError):
        ring_level(cubic(), 1.0, check_radius=False)
    with pytest.raises(BadParamsError):
        ring_level(cubic(), 0.41)
    with pytest.raises(BadParamsError):
        ring_level(cubic(), -0.1)
    # sphere through a zero of J: radius deliberately not checked
    flat = make_merit(MapSpec(1, lambda x: np.sin(x)), [0.0], [2 * math.pi])
    with pytest.raises(NonPositiveAlphaError):
        ring_level(flat, math.pi, check_radius=False)


def test_critical_point_with_positive_J_has_singular_jacobian():
    for p, x in [(cubic(), 1 / math.sqrt(3)), (square(), 1.0)]:
        assert eval_J(p, [x]) > 0
        assert np.linalg.norm(grad_J(p, [x])) <= 1e-12
        Ip = jac_I(p, [x])
        assert spectral.sigma_min(Ip) <= 1e-6 * max(np.linalg.norm(Ip), 1.0)
