# tests/test_validity.py
import pytest

from services.errors import UsageError
from services.validity import (
    AlwaysTrue, BoxPredicate, FiniteSetPredicate, SimplexPredicate, ex_val, from_spec, safe_ex_val,
)


def test_always_true():
    assert ex_val(AlwaysTrue(), (1e9, -1e9))


def test_box():
    box = BoxPredicate((0.0, 0.0), (10.0, 10.0))
    assert ex_val(box, (0.0, 10.0))
    assert not ex_val(box, (10.5, 1.0))


def test_box_corners_must_be_ordered():
    with pytest.raises(UsageError):
        BoxPredicate((1.0,), (0.0,))


def test_simplex():
    simplex = SimplexPredicate(3)
    assert ex_val(simplex, (0.2, 0.3, 0.5))
    assert not ex_val(simplex, (0.6, 0.6, -0.2))
    assert not ex_val(simplex, (0.5, 0.5, 0.5))


def test_simplex_tolerates_rounding():
    assert ex_val(SimplexPredicate(3), (0.1, 0.2, 0.7000000000000001))


def test_finite_set():
    p = FiniteSetPredicate(((0.0, 0.0), (3.0, 4.0)), tol=1e-12)
    assert ex_val(p, (3.0, 4.0))
    assert not ex_val(p, (3.0, 4.1))


def test_dimension_mismatch_is_usage_error():
    with pytest.raises(UsageError):
        ex_val(SimplexPredicate(3), (1.0,))


def test_safe_ex_val_swallows_bad_points():
    assert not safe_ex_val(SimplexPredicate(3), (1.0,))
    assert not safe_ex_val(AlwaysTrue(), (float('nan'),))


def test_callable():
    assert BoxPredicate((0.0,), (1.0,))((0.5,))


@pytest.mark.parametrize("spec", [
    {"kind": "always_true"},
    {"kind": "box", "lo": [0.0, 1.0], "hi": [2.0, 3.0]},
    {"kind": "simplex", "dim": 4},
    {"kind": "finite_set", "allowed": [[1.0], [2.0]], "tol": 0.5},
])
def test_spec_round_trip(spec):
    assert from_spec(spec).to_spec() == spec


def test_unknown_kind():
    with pytest.raises(UsageError):
        from_spec({"kind": "ellipse"})
