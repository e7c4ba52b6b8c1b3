import math

import numpy as np
import pytest

from loewner_pmp.controls import builtin_control, koebe_control, slit_control
from loewner_pmp.errors import PreconditionError, ValidationError
from loewner_pmp.loewner import limit_map, slit_limit_coeffs
from loewner_pmp.optimize import (
    OptimizeProblem,
    optimize,
    sample_reachable,
    teichmueller_experiment,
)


@pytest.mark.parametrize("T", [0.5, 2.0, 6.0])
def test_single_piece_closed_form(T):
    res = optimize(OptimizeProblem(2, horizon=T, pieces=1, restarts=2, seed=3))
    assert res.best_value == pytest.approx(2 * (1 - math.exp(-T)), abs=1e-8)
    (atom,) = res.best_control.values[0].atoms
    assert abs(np.exp(1j * atom.theta) + 1) < 1e-4


def test_result_is_recomputed_and_history_monotone():
    res = optimize(OptimizeProblem(3, horizon=6.0, pieces=3, restarts=3, seed=1, maxfev=300))
    fresh = limit_map(res.best_control, 6).a(3).real
    assert res.best_value == pytest.approx(fresh, abs=1e-9)
    assert len(res.history) == 3
    for entry in res.history:
        for stage in entry["stages"]:
            assert np.all(np.diff(stage["best"]) >= 0)
    assert res.pmp_gap_at_best >= -1e-10
    assert res.schiffer_at_best is not None
    assert max(res.restart_values) == pytest.approx(res.best_value, abs=1e-9)


def test_optimize_is_deterministic_and_worker_independent():
    p = OptimizeProblem(2, horizon=4.0, pieces=2, restarts=2, seed=9, maxfev=200)
    a = optimize(p, workers=1)
    b = optimize(p, workers=2)
    assert a.best_control == b.best_control
    assert a.best_value == b.best_value


def test_rotation_equivariance():
    rng = np.random.default_rng(0)
    th = rng.uniform(0, 2 * math.pi, 6)
    for N in (2, 3, 4):
        base = abs(limit_map(slit_control(th, 4.0), N).a(N))
        for delta in (0.3, 2.0):
            shifted = abs(limit_map(slit_control(th + delta, 4.0), N).a(N))
            assert shifted == pytest.approx(base, abs=1e-8)
            fast = slit_limit_coeffs(th + delta, 4.0, N)
            assert abs(fast[N]) == pytest.approx(base, abs=1e-8)


def test_constrained_problem_meets_tolerance():
    p = OptimizeProblem(3, horizon=5.0, pieces=4, restarts=2, seed=0, constraints={2: 1.0}, maxfev=300)
    res = optimize(p)
    assert res.constraint_violation <= 1e-4
    assert len(res.history[0]["stages"]) >= 5


def test_problem_validation_and_round_trip():
    with pytest.raises(ValidationError):
        OptimizeProblem(1)
    with pytest.raises(ValidationError):
        OptimizeProblem(3, pieces=0)
    with pytest.raises(ValidationError):
        OptimizeProblem((1, 0), dimension=2)
    with pytest.raises(ValidationError):
        OptimizeProblem(3, constraints={3: 1.0})
    p = OptimizeProblem(4, constraints={2: 1.5, 3: 1 + 1j})
    assert p.horizon == 14.0
    assert OptimizeProblem.from_dict(p.to_dict()) == p
    with pytest.raises(ValidationError):
        OptimizeProblem.from_dict(dict(p.to_dict(), bogus=1))


def test_ball_optimize_runs():
    p = OptimizeProblem((2, 0), dimension=2, horizon=1.0, pieces=1, restarts=1, maxfev=15)
    res = optimize(p)
    assert math.isfinite(res.best_value)
    assert res.pmp_gap_at_best >= -1e-10
    assert res.schiffer_at_best is None


def test_sample_bound_and_determinism():
    s = sample_reachable(1, [2, 3], 2000, seed=4)
    assert np.all(np.abs(s.points[:, 0]) <= 2 + 1e-6)
    assert np.all(np.abs(s.points[:, 1]) <= 3 + 1e-6)
    again = sample_reachable(1, [2, 3], 2000, seed=4)
    assert s.to_csv() == again.to_csv()
    assert s.to_csv().splitlines()[0] == "sample_id,re_a2,im_a2,re_a3,im_a3,control_hash"


def test_samples_are_regenerable():
    s = sample_reachable(1, [2, 4], 50, seed=2)
    for i in (0, 17, 49):
        lm = limit_map(s.controls[i], 4)
        assert lm.a(2) == pytest.approx(s.points[i, 0], abs=1e-8)
        assert lm.a(4) == pytest.approx(s.points[i, 1], abs=1e-8)


def test_ball_samples_are_normalized():
    s = sample_reachable(2, [(2, 0), (1, 1)], 20, seed=1, horizon=2.0)
    assert np.all(np.isfinite(s.points))
    for c in s.controls[:5]:
        f = limit_map(c, 2).jet
        assert f.coeff((1, 0), 0) == pytest.approx(1, abs=1e-8)
        assert f.coeff((0, 1), 1) == pytest.approx(1, abs=1e-8)
        assert abs(f.coeff((0, 1), 0)) < 1e-8 and abs(f.coeff((1, 0), 1)) < 1e-8
    with pytest.raises(ValidationError):
        sample_reachable(1, [2], 0)


def test_teichmueller_gate_and_empty():
    with pytest.raises(PreconditionError):
        teichmueller_experiment(3, builtin_control("rotating:1"), 5)
    rep = teichmueller_experiment(3, koebe_control(), 0)
    assert rep.status == "empty" and rep.feasible_count == 0 and rep.violations == 0


def test_teichmueller_small_run():
    rep = teichmueller_experiment(3, koebe_control(), 6, seed=1)
    assert rep.status == "ok"
    assert rep.feasible_count >= 1
    assert rep.violations == 0
    assert rep.max_excess <= 1e-6
    assert rep.to_dict()["schema"] == 1
