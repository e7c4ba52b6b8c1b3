import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from loewner_pmp.controls import (
    BoundaryAtom,
    ControlValue1,
    ControlValueN,
    DrivingControl,
    ball_grid,
    builtin_control,
    control_jet,
    extreme_point,
    koebe_control,
    project_to_un,
    random_control,
    random_poly_control,
    validate_un,
)
from loewner_pmp.errors import ConstraintError, ValidationError
from loewner_pmp.jets import Jet, JetN

D = 10
angles = st.floats(0.0, 2 * math.pi, allow_nan=False)


def test_extreme_point_examples():
    assert np.allclose(extreme_point(1, D).coeffs, [0, -1] + [-2] * (D - 1))
    alt = [0, -1] + [-2 * (-1) ** k for k in range(1, D)]
    assert np.allclose(extreme_point(-1, D).coeffs, alt)
    with pytest.raises(ValidationError):
        extreme_point(0.5, D)


@given(angles)
def test_extreme_point_linear_coefficient(theta):
    c = extreme_point(np.exp(1j * theta), D).coeffs
    assert c[0] == 0 and c[1] == -1


@given(angles, st.floats(0.0, 0.95), angles)
def test_extreme_point_pointwise_dissipative(theta, r, phi):
    z = r * np.exp(1j * phi)
    v = ControlValue1.single(theta).field(z)
    # Re(-h(z) conj z) > 0 away from the origin
    assert np.real(-v * np.conj(z)) >= 0
    if r > 0.01:
        assert np.real(-v * np.conj(z)) > 0


def test_field_matches_jet():
    v = ControlValue1((BoundaryAtom(0.4, 0.3), BoundaryAtom(2.5, 0.7)))
    z = 0.2 - 0.1j
    assert v.jet(40)(z) == pytest.approx(v.field(z), abs=1e-14)


def test_control_jet_examples():
    assert control_jet(ControlValue1.single(0.0), D).allclose(extreme_point(1, D))
    mix = ControlValue1((BoundaryAtom(0.0, 0.5), BoundaryAtom(math.pi, 0.5)))
    expect = [0, -1] + [0 if k % 2 == 0 else -2 for k in range(2, D + 1)]
    assert np.allclose(control_jet(mix, D).coeffs, expect, atol=1e-14)
    neg = ControlValueN.from_nonlinear({})
    assert control_jet(neg, 4).allclose(JetN.from_terms({(1, 0): [-1, 0], (0, 1): [0, -1]}, 4))


@given(angles, angles, st.floats(0.0, 1.0))
def test_control_jet_is_convex(t1, t2, lam):
    v1, v2 = ControlValue1.single(t1), ControlValue1.single(t2)
    blend = ControlValue1((BoundaryAtom(t1, lam), BoundaryAtom(t2, 1 - lam)))
    j = lam * control_jet(v1, D) + (1 - lam) * control_jet(v2, D)
    assert control_jet(blend, D).allclose(j, atol=1e-13)


@given(st.integers(0, 10_000))
def test_control_jet_normalization(seed):
    c = random_control(seed, pieces=2)
    for v in c.values:
        jc = control_jet(v, D).coeffs
        assert jc[0] == 0
        assert jc[1] == pytest.approx(-1, abs=1e-12)


def test_weights_must_sum_to_one():
    with pytest.raises(ValidationError):
        ControlValue1((BoundaryAtom(0.0, 0.4), BoundaryAtom(1.0, 0.4)))
    with pytest.raises(ValidationError):
        BoundaryAtom(0.0, 1.5)
    with pytest.raises(ValidationError):
        BoundaryAtom.from_kappa(0.9)


# ---- ball control set -------------------------------------------------------

def test_validate_minus_identity():
    h = ControlValueN.from_nonlinear({}).poly_terms
    grid = ball_grid()
    rep = validate_un(h, grid)
    assert rep.valid and rep.linear_ok
    assert rep.max_violation == pytest.approx(-np.min(np.sum(np.abs(grid) ** 2, axis=1)), abs=1e-14)
    assert rep.max_violation < 0


def test_validate_quadratic_example():
    h = JetN.from_terms({(1, 0): [-1, 0], (0, 1): [0, -1], (0, 2): [2, 0]}, 2)
    single = validate_un(h, np.array([[0.1, 0.9j]]))
    assert single.max_violation == pytest.approx(-0.982, abs=1e-12)
    # Re<h,z> <= -1 + 2 s^2 sqrt(1 - s^2) < 0 on the sphere, so the grid passes too
    assert validate_un(h, ball_grid()).valid


def test_validate_plus_identity_fails():
    h = JetN.from_terms({(1, 0): [1, 0], (0, 1): [0, 1]}, 1)
    grid = ball_grid()
    rep = validate_un(h, grid)
    assert not rep.valid and not rep.linear_ok
    assert rep.max_violation == pytest.approx(np.max(np.sum(np.abs(grid) ** 2, axis=1)), abs=1e-14)


def test_ball_grid_is_deterministic_and_inside():
    g1, g2 = ball_grid(), ball_grid(64, 32)
    assert g1.shape == (768, 2)
    assert np.all(np.linalg.norm(g1, axis=1) < 1)
    assert np.allclose(np.linalg.norm(g1[512:], axis=1), 0.99)
    assert np.array_equal(g2, ball_grid(64, 32))


def test_projection_rescales_into_family(rng):
    big = {(2, 0): np.array([5.0, 0]), (0, 2): np.array([0, 5.0j])}
    v, scale = project_to_un(big)
    assert 0 < scale < 1
    assert validate_un(v.poly_terms).valid
    with pytest.raises(ValidationError):
        ControlValueN.from_nonlinear(big)


def test_projection_failure_raises():
    # shrink=1 never reduces the violating term
    bad = {(2, 0): np.array([10.0, 0])}
    grid = np.array([[0.5, 0.0]])
    with pytest.raises(ConstraintError):
        project_to_un(bad, grid=grid, shrink=1.0, max_rescalings=3)


def test_nonlinear_terms_need_degree_two():
    with pytest.raises(ValidationError):
        ControlValueN.from_nonlinear({(1, 0): [0.1, 0]})


# ---- driving controls -------------------------------------------------------

def test_breakpoint_validation():
    v = ControlValue1.single(0.0)
    with pytest.raises(ValidationError):
        DrivingControl((0.0, 1.0, 1.0), (v, v))
    with pytest.raises(ValidationError):
        DrivingControl((0.5, 1.0), (v,))
    with pytest.raises(ValidationError):
        DrivingControl((0.0, 1.0), (v, v))


def test_piece_lookup_is_right_continuous():
    c = DrivingControl((0.0, 1.0, 2.0), (ControlValue1.single(0.0), ControlValue1.single(1.0)))
    assert c.piece_index(0.0) == 0
    assert c.piece_index(1.0) == 1
    assert c.piece_index(2.0) == 1
    with pytest.raises(ValidationError):
        c.piece_index(2.5)


@given(st.integers(0, 10_000))
def test_json_round_trip(seed):
    c = random_control(seed)
    assert DrivingControl.from_json(c.to_json()) == c
    assert DrivingControl.from_json(c.to_json()).digest() == c.digest()


def test_json_round_trip_ball():
    c = random_poly_control(3)
    back = DrivingControl.from_json(c.to_json())
    for a, b in zip(back.values, c.values):
        assert a.poly_terms.allclose(b.poly_terms, atol=0)


def test_unknown_keys_rejected():
    d = koebe_control().to_dict()
    d["extra"] = 1
    with pytest.raises(ValidationError):
        DrivingControl.from_dict(d)
    with pytest.raises(ValidationError):
        DrivingControl.from_json("{not json")


def test_split_reassembles():
    c = random_control(5, pieces=4, horizon=3.0)
    head, tail = c.split(1.3)
    assert head.horizon == pytest.approx(1.3)
    assert tail.horizon == pytest.approx(c.horizon - 1.3)
    assert head.value_at(1.0) == c.value_at(1.0)
    assert tail.value_at(0.5) == c.value_at(1.8)


def test_builtin_controls():
    k = builtin_control("koebe")
    assert k.pieces == 1 and k.horizon == 20.0
    (atom,) = k.values[0].atoms
    assert atom.theta == pytest.approx(math.pi) and atom.weight == 1.0
    r = builtin_control("koebe-rotated:0.5")
    assert r.values[0].atoms[0].theta == pytest.approx(math.pi - 0.5)
    assert builtin_control("random:7").to_json() == builtin_control("random:7").to_json()
    rot = builtin_control("rotating:1")
    assert rot.horizon == 20.0 and rot.pieces == 80
    for bad in ("nope", "koebe-rotated:x", "random:"):
        with pytest.raises(ValidationError):
            builtin_control(bad)
