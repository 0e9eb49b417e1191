import math

import numpy as np
import pytest

from injcert.certify import (
    WORDING,
    Regime,
    Status,
    certify_box,
    check_point,
    classify,
    monotonicity_probe,
)
from injcert.errors import BadParamsError, GridTooLargeError, ProbeFailedError, UsageError
from injcert.maps import MapSpec, get_builtin, map_from_expr


def test_check_point_examples():
    c = check_point(get_builtin("identity").spec, [3.0, -1.0], eps=0.5)
    assert (c.min_abs_lambda, c.sym_min, c.sym_max, c.det_jac) == (1.0, 2.0, 2.0, 1.0)
    c = check_point(get_builtin("rotation90").spec, [0.2, 0.7])
    assert c.min_abs_lambda == pytest.approx(1.0)
    assert c.sym_min == c.sym_max == 0.0
    c = check_point(get_builtin("sin_perturbed1d").spec, [math.pi])
    assert c.min_abs_lambda == pytest.approx(0.5)
    assert c.sym_min == pytest.approx(1.0) and c.sym_max == pytest.approx(1.0)


def test_check_point_bad_eps():
    with pytest.raises(BadParamsError):
        check_point(get_builtin("identity").spec, [0, 0], eps=0)


def test_sin_perturbed_satisfied():
    v = certify_box(get_builtin("sin_perturbed1d").spec, [(-20, 20)], 401, 0.4)
    assert v.status == Status.SATISFIED
    assert v.regime == Regime.POSITIVE_DEFINITE
    assert v.epsilon_estimate >= 0.5
    assert v.witness is None
    assert v.wording == WORDING


def test_rotation_violated():
    v = certify_box(get_builtin("rotation90").spec, [(-1, 1), (-1, 1)], 11, 0.1)
    assert v.status == Status.VIOLATED
    assert v.witness.sym_min == v.witness.sym_max == 0.0


def test_pinchuk_violated_with_pinned_witness():
    v = certify_box(get_builtin("pinchuk").spec, [(-5, 5), (-5, 5)], 101, 1e-3)
    assert v.status == Status.VIOLATED
    assert v.regime == Regime.MIXED
    # the symmetric part is indefinite: that is the hypothesis that breaks
    w = v.witness
    assert w.sym_min < 0 < w.sym_max
    np.testing.assert_array_equal(w.x, [5.0, 5.0])
    assert w.sym_min == pytest.approx(-9.02e19, rel=1e-2)


def test_grid_guard_and_args():
    spec = get_builtin("identity", n=3).spec
    with pytest.raises(GridTooLargeError):
        certify_box(spec, [(-1, 1)] * 3, 300, 0.1)
    with pytest.raises(BadParamsError):
        certify_box(spec, [(-1, 1)] * 3, 1, 0.1)
    with pytest.raises(BadParamsError):
        certify_box(spec, [(1, -1)] * 3, 3, 0.1)


def test_tie_counts_as_satisfied():
    # sym part of identity is exactly 2, |lambda| exactly 1
    v = certify_box(get_builtin("identity").spec, [(-1, 1), (-1, 1)], 3, 1.0)
    assert v.status == Status.SATISFIED and v.epsilon_estimate == 1.0


def test_unknown_on_evaluation_failure():
    spec = map_from_expr("[log(x1)]")
    with np.errstate(all="ignore"):
        v = certify_box(spec, [(-1, 1)], 5, 0.1)
    assert v.status == Status.UNKNOWN
    assert v.failure["error"] == "NonFiniteValueError"
    assert v.failure["point"] == [-1.0]


def test_monotone_in_eps():
    spec = get_builtin("sin_perturbed1d").spec
    for e2 in [0.1, 0.3, 0.5]:
        assert certify_box(spec, [(-6, 6)], 61, e2).status == Status.SATISFIED
        for e1 in [e2 / 2, e2 / 10]:
            assert certify_box(spec, [(-6, 6)], 61, e1).status == Status.SATISFIED


def test_refined_grid_keeps_witness():
    # F' = 1e4 u^2 / (1 + 1e4 u^2) with u = x - 0.3: zero only in a narrow dip
    spec = map_from_expr("[(x1 - 0.3) - atan(100*(x1 - 0.3))/100]")
    assert certify_box(spec, [(-1, 1)], 3, 0.5).status == Status.SATISFIED
    coarse = certify_box(spec, [(-1, 1)], 3, 0.5, extra_points=[[0.3]])
    assert coarse.status == Status.VIOLATED
    np.testing.assert_allclose(coarse.witness.x, [0.3])
    # the refined grid alone misses the dip; carrying the witness keeps the verdict
    assert certify_box(spec, [(-1, 1)], 4, 0.5).status == Status.SATISFIED
    fine = certify_box(spec, [(-1, 1)], 4, 0.5, extra_points=[coarse.witness.x])
    assert fine.status == Status.VIOLATED


def test_negation_flips_regime():
    for name in ["sin_perturbed1d", "linear", "identity"]:
        spec = get_builtin(name).spec
        box = [(-4, 4)] * spec.dim
        a = certify_box(spec, box, 9, 0.1)
        b = certify_box(spec.negated(), box, 9, 0.1)
        assert a.regime == Regime.POSITIVE_DEFINITE
        assert b.regime == Regime.NEGATIVE_DEFINITE
        assert a.epsilon_estimate == b.epsilon_estimate
        assert a.sym_margin == b.sym_margin


def test_parallel_matches_serial():
    spec = get_builtin("pinchuk").spec
    box = [(-2, 2), (-2, 2)]
    a = certify_box(spec, box, 31, 1e-3, workers=1)
    b = certify_box(spec, box, 31, 1e-3, workers=4)
    assert a.to_dict() == b.to_dict()


def test_classify_is_order_independent():
    spec = get_builtin("cubic1d").spec
    checks = [check_point(spec, [x]) for x in np.linspace(-2, 2, 41)]
    a = classify(checks, box=[[-2, 2]], eps=0.1)
    b = classify(checks[::-1], box=[[-2, 2]], eps=0.1)
    assert a.to_dict() == b.to_dict()
    assert a.regime == Regime.MIXED and a.status == Status.VIOLATED


def test_probe_examples():
    spec = get_builtin("identity", n=3).spec
    rep = monotonicity_probe(spec, [(-5, 5)] * 3, 500, eps=2.0)
    assert rep.min_ratio == pytest.approx(1.0)
    spec = get_builtin("sin_perturbed1d").spec
    v = certify_box(spec, [(-20, 20)], 401, 0.4)
    rep = monotonicity_probe(spec, [(-20, 20)], 10_000, verdict=v)
    assert rep.min_ratio >= 0.5
    spec = get_builtin("linear").spec
    rep = monotonicity_probe(spec, [(-10, 10)] * 2, 2000, eps=2.0)
    assert rep.min_ratio == pytest.approx(1.0)


def test_probe_catches_coarse_grid():
    # F' = 1 + 0.99 cos(40x) is far from definite between the 3 grid points
    spec = MapSpec(1, lambda x: x + 0.99 / 40 * np.sin(40 * x), name="wiggle")
    v = certify_box(spec, [(0, 2 * math.pi)], 3, 0.5)
    assert v.regime == Regime.POSITIVE_DEFINITE
    with pytest.raises(ProbeFailedError):
        monotonicity_probe(spec, [(0, 2 * math.pi)], 10_000, verdict=v)


def test_probe_needs_positive_definite():
    v = certify_box(get_builtin("rotation90").spec, [(-1, 1)] * 2, 3, 0.1)
    with pytest.raises(UsageError):
        monotonicity_probe(get_builtin("rotation90").spec, [(-1, 1)] * 2, 10, verdict=v)


def test_verdict_serializes():
    import json

    v = certify_box(get_builtin("rotation90").spec, [(-1, 1)] * 2, 3, 0.1)
    d = json.loads(json.dumps(v.to_dict()))
    assert d["status"] == "Violated" and d["witness"]["sym_min"] == 0.0
