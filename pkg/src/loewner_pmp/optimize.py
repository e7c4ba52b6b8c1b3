"""Coefficient maximization over piecewise-constant controls.

* :func:`optimize` -- multi-start Nelder-Mead on atom angles (disk) or on
  polynomial coefficients (ball), optionally with side conditions
  ``a_k = A_k`` imposed by a quadratic penalty with continuation.
* :func:`sample_reachable` -- seeded Monte Carlo point clouds of limit-map
  coefficients.
* :func:`teichmueller_experiment` -- perturb an extremal control, push the
  perturbations back onto the side-condition slice, and check that the
  target coefficient never exceeds the base value.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from .controls import (
    BoundaryAtom,
    ControlValue1,
    DrivingControl,
    _slit_coeffs,
    ball_grid,
    project_to_un,
    random_poly_terms,
    slit_control,
)
from .errors import PreconditionError, ValidationError
from .jets import _index, basis
from .loewner import DEFAULT_STEP, limit_map, normalize_final, slit_limit_coeffs, transport_batch
from .pontryagin import pmp_check
from .schiffer import schiffer_residual

PENALTY_SCHEDULE = (1.0, 1e1, 1e2, 1e3, 1e4)
EXTRA_STAGES = 3
THREADS_ENV = "LOEWNER_PMP_THREADS"


def default_workers():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _map_ordered(fn, args, workers):
    """Map preserving input order; parallel when ``workers > 1``."""
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, args))


def _target_degree(target):
    return sum(target) if isinstance(target, tuple) else int(target)


@dataclass(frozen=True)
class OptimizeProblem:
    target: object
    horizon: float = None
    pieces: int = 8
    dimension: int = 1
    constraints: dict = None
    constraint_tol: float = 1e-4
    seed: int = 0
    restarts: int = 8
    maxfev: int = None
    step: float = DEFAULT_STEP
    degree: int = 2

    def __post_init__(self):
        t = self.target
        if isinstance(t, list):
            object.__setattr__(self, "target", tuple(int(a) for a in t))
        if self.dimension not in (1, 2):
            raise ValidationError("dimension must be 1 or 2")
        if self.dimension == 1 and isinstance(self.target, tuple):
            raise ValidationError("disk problems take an integer target N")
        if self.dimension == 2 and not isinstance(self.target, tuple):
            raise ValidationError("ball problems take a multi-index target")
        if _target_degree(self.target) < 2:
            raise ValidationError("target degree must be at least 2")
        if self.pieces < 1:
            raise ValidationError("need at least one piece")
        if self.restarts < 1:
            raise ValidationError("need at least one restart")
        if self.horizon is None:
            object.__setattr__(self, "horizon", 10.0 + _target_degree(self.target))
        if self.horizon <= 0:
            raise ValidationError("horizon must be positive")
        if self.constraints:
            if self.dimension != 1:
                raise ValidationError("side conditions are only supported for the disk")
            cons = {int(k): complex(v) for k, v in dict(self.constraints).items()}
            if any(not 2 <= k < self.target for k in cons):
                raise ValidationError("side conditions must fix coefficients a_k with 2 <= k < N")
            object.__setattr__(self, "constraints", cons)

    def to_dict(self):
        d = asdict(self)
        if isinstance(self.target, tuple):
            d["target"] = list(self.target)
        if self.constraints:
            d["constraints"] = {str(k): [v.real, v.imag] for k, v in self.constraints.items()}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown problem keys: {sorted(unknown)}")
        if d.get("constraints"):
            d["constraints"] = {int(k): complex(*v) if isinstance(v, (list, tuple)) else complex(v)
                                for k, v in d["constraints"].items()}
        return cls(**d)


@dataclass(frozen=True)
class OptimizeResult:
    problem: OptimizeProblem
    best_control: DrivingControl
    best_value: float
    history: list
    restart_values: list
    pmp_gap_at_best: float
    schiffer_at_best: object = None
    constraint_violation: float = 0.0

    def to_dict(self):
        return {
            "schema": 1,
            "problem": self.problem.to_dict(),
            "best_value": self.best_value,
            "best_control": self.best_control.to_dict(),
            "restart_values": self.restart_values,
            "pmp_gap_at_best": self.pmp_gap_at_best,
            "constraint_violation": self.constraint_violation,
            "schiffer_at_best": None if self.schiffer_at_best is None else self.schiffer_at_best.to_dict(),
            "history": self.history,
        }


# --------------------------------------------------------------------------
# disk objective
# --------------------------------------------------------------------------

def _violation(a, constraints):
    if not constraints:
        return 0.0
    return max(abs(a[k] - v) for k, v in constraints.items())


class _Tracker:
    """Objective wrapper recording the running maximum of the maximized value."""

    def __init__(self, fn):
        self.fn = fn
        self.best = -math.inf
        self.trace = []

    def __call__(self, x):
        v = self.fn(x)
        if v > self.best:
            self.best = v
        self.trace.append(self.best)
        return -v


def _nm(fn, x0, maxfev):
    tr = _Tracker(fn)
    res = minimize(
        tr, x0, method="Nelder-Mead",
        options={"maxfev": maxfev, "xatol": 1e-10, "fatol": 1e-13, "adaptive": True},
    )
    stride = max(1, len(tr.trace) // 50)
    return res.x, tr.trace[::stride] + [tr.trace[-1]]


def _disk_run(args):
    """One restart: returns (theta, stage traces).

    Side conditions use the quadratic penalty ``lam * sum |a_k - A_k + s_k|^2``
    over the continuation schedule.  The shifts ``s_k`` accumulate the
    residual after each stage, removing the O(1/lam) bias a plain penalty
    leaves behind; extra stages at the last ``lam`` run until the
    violation is below ``tol / 10`` (at most :data:`EXTRA_STAGES`).
    """
    N, K, T, constraints, maxfev, step, x0, tol = args
    order = N

    def coeffs(th):
        return slit_limit_coeffs(th, T, order, step)

    stages = []
    x = np.asarray(x0, dtype=float)
    shifts = {k: 0j for k in constraints} if constraints else {}
    lams = list(PENALTY_SCHEDULE) if constraints else [0.0, 0.0]
    extra = 0
    while lams:
        lam = lams.pop(0)

        def obj(th, lam=lam, sh=dict(shifts)):
            a = coeffs(th)
            pen = sum(abs(a[k] - v + sh[k]) ** 2 for k, v in constraints.items()) if constraints else 0.0
            return float(a[N].real) - lam * pen

        x, trace = _nm(obj, x, maxfev)
        stages.append({"lambda": lam, "best": [float(v) for v in trace]})
        if constraints:
            a = coeffs(x)
            for k, v in constraints.items():
                shifts[k] += a[k] - v
            if not lams and _violation(a, constraints) > 0.1 * tol and extra < EXTRA_STAGES:
                extra += 1
                lams.append(lam)
    return x, stages


def _optimize_disk(problem, workers):
    N, K, T = problem.target, problem.pieces, float(problem.horizon)
    maxfev = problem.maxfev or max(2000, 250 * K)
    seeds = np.random.SeedSequence(problem.seed).spawn(problem.restarts)
    jobs = []
    for ss in seeds:
        x0 = np.random.default_rng(ss).uniform(0.0, 2 * math.pi, K)
        jobs.append((N, K, T, problem.constraints, maxfev, problem.step, x0, problem.constraint_tol))
    runs = _map_ordered(_disk_run, jobs, workers)
    scored = []
    for i, (x, stages) in enumerate(runs):
        a = slit_limit_coeffs(x, T, N, problem.step)
        viol = _violation(a, problem.constraints)
        feasible = viol <= problem.constraint_tol
        scored.append((feasible, float(a[N].real), -viol, i, x, stages))
    restart_values = [s[1] for s in scored]
    best = max(scored, key=lambda s: (s[0], s[1] if s[0] else s[2]))
    theta = np.mod(best[4], 2 * math.pi)
    control = slit_control(theta, T)
    order = max(12, 2 * N)
    lm = limit_map(control, order, problem.step)
    value = float(lm.a(N).real)
    a = np.array([lm.a(k) for k in range(N + 1)])
    history = [{"restart": i, "stages": s[5]} for i, s in enumerate(sorted(scored, key=lambda s: s[3]))]
    gap = pmp_check(control, N, step=problem.step).max_gap
    sch = schiffer_residual(lm.jet, N, tol=1e-6, positivity_tol=1e-6)
    return OptimizeResult(problem, control, value, history, restart_values, float(gap), sch,
                          float(_violation(a, problem.constraints)))


# --------------------------------------------------------------------------
# ball objective
# --------------------------------------------------------------------------

def _ball_monomials(degree):
    return [a for a in basis(degree).alphas if sum(a) >= 2]


def _params_to_terms(x, monos):
    n = len(monos) * 2
    q = x[:n] + 1j * x[n:2 * n]
    return {a: np.array([q[2 * i], q[2 * i + 1]]) for i, a in enumerate(monos)}


def _ball_control(x, problem, grid):
    monos = _ball_monomials(problem.degree)
    per = 4 * len(monos)
    bp = np.linspace(0.0, float(problem.horizon), problem.pieces + 1)
    values = []
    for k in range(problem.pieces):
        terms = _params_to_terms(np.asarray(x[k * per:(k + 1) * per]), monos)
        values.append(project_to_un(terms, grid)[0])
    return DrivingControl(tuple(bp), tuple(values))


def _ball_value(control, alpha, order, step):
    pcs = [v.jet(order).coeffs for v in control.values]
    y = normalize_final(transport_batch(pcs, control.breakpoints, order, step, dimension=2), 2)
    return complex(y[0, _index(order)[alpha]])


def _ball_run(args):
    problem, x0 = args
    grid = ball_grid()
    alpha = problem.target
    order = sum(alpha)

    def obj(x):
        return _ball_value(_ball_control(x, problem, grid), alpha, order, problem.step).real

    x, trace = _nm(obj, np.asarray(x0), problem.maxfev or 200)
    return x, [{"lambda": 0.0, "best": [float(v) for v in trace]}]


def _optimize_ball(problem, workers):
    monos = _ball_monomials(problem.degree)
    dim = 4 * len(monos) * problem.pieces
    seeds = np.random.SeedSequence(problem.seed).spawn(problem.restarts)
    jobs = [(problem, 0.3 * np.random.default_rng(ss).normal(size=dim)) for ss in seeds]
    runs = _map_ordered(_ball_run, jobs, workers)
    grid = ball_grid()
    alpha = problem.target
    order = max(6, sum(alpha) + 1)
    scored = []
    for i, (x, stages) in enumerate(runs):
        ctrl = _ball_control(x, problem, grid)
        scored.append((_ball_value(ctrl, alpha, sum(alpha), problem.step).real, i, ctrl, stages))
    best = max(scored, key=lambda s: s[0])
    control = best[2]
    lm = limit_map(control, order, problem.step)
    value = float(lm.jet.coeff(alpha, 0).real)
    gap = pmp_check(control, alpha, order=order, step=problem.step, degree=problem.degree).max_gap
    history = [{"restart": s[1], "stages": s[3]} for s in scored]
    return OptimizeResult(problem, control, value, history, [s[0] for s in scored], float(gap), None, 0.0)


def optimize(problem, workers=None):
    """Maximize ``Re J`` of the limit map over piecewise-constant controls.

    ``best_value`` is recomputed from a fresh integration of
    ``best_control``; the PMP gap (and, for the disk, the Schiffer report)
    are evaluated at the optimum.
    """
    if problem.dimension == 1:
        return _optimize_disk(problem, workers)
    return _optimize_ball(problem, workers)


# --------------------------------------------------------------------------
# reachable-set sampling
# --------------------------------------------------------------------------

def _target_label(t):
    return f"a{t}" if not isinstance(t, tuple) else "a_" + "_".join(str(i) for i in t)


@dataclass(frozen=True)
class ReachableSample:
    targets: list
    points: np.ndarray
    controls: list = field(repr=False)
    seed: int = 0

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["sample_id"]
        for t in self.targets:
            lab = _target_label(t)
            header += [f"re_{lab}", f"im_{lab}"]
        w.writerow(header + ["control_hash"])
        for i, (row, ctrl) in enumerate(zip(self.points, self.controls)):
            vals = []
            for v in row:
                vals += [repr(float(v.real)), repr(float(v.imag))]
            w.writerow([i] + vals + [ctrl.digest()])
        return buf.getvalue()


def sample_reachable(dimension, targets, count, horizon=10.0, pieces=4, seed=0, atoms=3,
                     step=DEFAULT_STEP, degree=2):
    """Seeded samples of limit-map coefficients.

    Disk: each piece is a convex combination of ``atoms`` slit fields with
    uniform angles and flat Dirichlet weights.  Ball: each piece is a random
    polynomial field projected onto the validated family.  All samples
    share equal-length pieces, so they are transported as one batch.
    """
    if count < 1:
        raise ValidationError("count must be at least 1")
    targets = [tuple(t) if isinstance(t, (list, tuple)) else int(t) for t in targets]
    rng = np.random.default_rng(seed)
    bp = tuple(np.linspace(0.0, float(horizon), pieces + 1))
    if dimension == 1:
        if any(isinstance(t, tuple) for t in targets):
            raise ValidationError("disk targets are integers")
        order = max(targets)
        th = rng.uniform(0.0, 2 * math.pi, (count, pieces, atoms))
        w = rng.dirichlet(np.ones(atoms), (count, pieces))
        w[..., -1] = 1.0 - w[..., :-1].sum(axis=-1)
        pcs = [_slit_coeffs(th[:, k], w[:, k], order) for k in range(pieces)]
        y = normalize_final(transport_batch(pcs, bp, order, step))
        points = y[:, targets]
        controls = [
            DrivingControl(bp, tuple(
                ControlValue1(tuple(BoundaryAtom(float(a), float(b)) for a, b in zip(th[i, k], w[i, k])))
                for k in range(pieces)))
            for i in range(count)
        ]
        return ReachableSample(targets, points, controls, seed)
    if dimension != 2:
        raise ValidationError("dimension must be 1 or 2")
    if any(not isinstance(t, tuple) for t in targets):
        raise ValidationError("ball targets are multi-indices")
    order = max(sum(t) for t in targets)
    grid = ball_grid()
    controls = []
    for _ in range(count):
        vals = tuple(project_to_un(random_poly_terms(rng, degree), grid)[0] for _ in range(pieces))
        controls.append(DrivingControl(bp, vals))
    pcs = [np.stack([c.values[k].jet(order).coeffs for c in controls]) for k in range(pieces)]
    y = normalize_final(transport_batch(pcs, bp, order, step, dimension=2), 2)
    idx = _index(order)
    points = np.stack([y[:, 0, idx[t]] for t in targets], axis=1)
    return ReachableSample(targets, points, controls, seed)


# --------------------------------------------------------------------------
# side-condition experiment
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TeichmuellerReport:
    N: int
    side_values: dict
    bound: float
    samples: np.ndarray
    feasible: np.ndarray
    excess: np.ndarray
    violations: int
    status: str
    base_gap: float = float("nan")

    @property
    def feasible_count(self):
        return int(np.sum(self.feasible))

    @property
    def max_excess(self):
        f = self.excess[self.feasible]
        return float(np.max(f)) if f.size else float("nan")

    def to_dict(self):
        return {
            "schema": 1,
            "N": self.N,
            "side_values": {str(k): [v.real, v.imag] for k, v in self.side_values.items()},
            "bound": self.bound,
            "samples": [[[float(x.real), float(x.imag)] for x in row] for row in self.samples],
            "feasible": [bool(b) for b in self.feasible],
            "feasible_count": self.feasible_count,
            "violations": self.violations,
            "max_excess": None if math.isnan(self.max_excess) else self.max_excess,
            "status": self.status,
            "base_gap": self.base_gap,
        }


def _base_angles(control, K):
    mids = (np.arange(K) + 0.5) * control.horizon / K
    out = []
    for t in mids:
        v = control.value_at(float(t))
        if not isinstance(v, ControlValue1) or len(v.atoms) != 1:
            raise ValidationError("base control must use single-atom (slit) pieces")
        out.append(v.atoms[0].theta)
    return np.array(out)


def _teich_run(args):
    N, K, T, side, theta0, maxfev, step, tol = args
    x, _ = _disk_run((N, K, T, side, maxfev, step, theta0, tol))
    raw = slit_limit_coeffs(theta0, T, N, step)
    opt = slit_limit_coeffs(x, T, N, step)
    return raw, opt


def teichmueller_experiment(N, base_control, perturbations, seed=0, pieces=8, tol=1e-4,
                            bound_tol=1e-6, maxfev=150, step=DEFAULT_STEP, gate_tol=1e-6,
                            workers=None):
    """Check ``Re a_N <= Re A_N`` on perturbations satisfying ``a_k = A_k`` (k < N).

    Each perturbation of the base angles is pushed back onto the side
    conditions by a penalized maximization of ``Re a_N``; both the raw and
    the pushed sample count when feasible.  Raises
    :class:`PreconditionError` if the base control fails the PMP gate.
    """
    if N < 3:
        raise ValidationError("side conditions need N >= 3")
    gap = pmp_check(base_control, N, step=step).max_gap
    if gap > gate_tol:
        raise PreconditionError(f"base control PMP gap {gap:.3e} exceeds {gate_tol:g}")
    T = float(base_control.horizon)
    F = limit_map(base_control, max(12, N), step)
    side = {k: F.a(k) for k in range(2, N)}
    bound = float(F.a(N).real)
    if perturbations == 0:
        empty = np.zeros((0, N - 1), dtype=complex)
        return TeichmuellerReport(N, side, bound, empty, np.zeros(0, bool), np.zeros(0), 0, "empty", gap)
    theta_base = _base_angles(base_control, pieces)
    seeds = np.random.SeedSequence(seed).spawn(perturbations)
    jobs = []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        amp = 10.0 ** rng.uniform(-3.0, 0.5)
        start = int(rng.integers(0, pieces))
        noise = amp * rng.normal(size=pieces)
        noise[:start] = 0.0
        jobs.append((N, pieces, T, side, theta_base + noise, maxfev, step, tol))
    runs = _map_ordered(_teich_run, jobs, workers)
    rows = []
    for raw, opt in runs:
        rows.append(raw[2:N + 1])
        rows.append(opt[2:N + 1])
    samples = np.array(rows)
    viol = np.array([max(abs(r[k - 2] - side[k]) for k in side) for r in samples])
    feasible = viol <= tol
    excess = samples[:, -1].real - bound
    violations = int(np.sum(feasible & (excess > bound_tol)))
    if not np.any(feasible):
        status = "inconclusive"
    else:
        status = "violations" if violations else "ok"
    return TeichmuellerReport(N, side, bound, samples, feasible, excess, violations, status, gap)
