"""Pontryagin maximum principle along a Loewner trajectory.

For a control with limit map ``F`` and trajectory ``phi_t``, the linear
functional

    L_t(h) = J( DF . [D phi_t]^{-1} . h(phi_t) )

is compared with its maximum over the control set.  ``J`` extracts the
coefficient of ``z^N`` (disk) or of ``z^alpha`` in the first component
(ball).  The transport factor ``DF [D phi_t]^{-1}`` is the closed-form
solution of the adjoint equation.

Because ``L_t`` is linear and the disk control set is the closed convex
hull of the slit fields ``h_kappa``, its maximum is attained at some
``h_kappa``; ``L_t(h_kappa)`` is a trigonometric polynomial in
``arg kappa`` and is maximized by a grid search plus golden-section
refinement.  In the ball the maximum is taken over polynomial fields of a
fixed degree that pass grid validation; that problem is a linear program.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, minimize_scalar

from .controls import UN_TOL, ControlValueN, ball_grid, control_jet
from .errors import OrderError, SingularJetError, ValidationError
from .jets import Jet, JetN, LaurentJet, _index, _size, basis, bmul, reciprocal
from .loewner import DEFAULT_STEP, integrate, limit_map

KAPPA_GRID = 1024
N_SAMPLES = 64


def _vmul(a, b):
    """Product of Taylor jets keeping every exactly known coefficient."""
    return (LaurentJet.from_jet(a) * LaurentJet.from_jet(b)).to_jet()


@dataclass(frozen=True)
class AdjointState:
    """Transport factor ``DF [D phi_t]^{-1}`` at time ``t`` and the jet of ``phi_t``.

    For ``n = 1`` ``transport_jet`` is a :class:`Jet`; for ``n = 2`` it is a
    coefficient array of shape ``(2, 2, M)`` (a matrix of scalar jets of
    order ``transport_order``).
    """

    t: float
    phi: object
    transport_jet: object
    transport_order: int

    @property
    def dimension(self):
        return 1 if isinstance(self.phi, Jet) else 2

    def transport_at_origin(self):
        if self.dimension == 1:
            return complex(self.transport_jet.coeffs[0])
        return np.asarray(self.transport_jet)[:, :, 0]


def _matjet_mul(A, B, order):
    m = _size(order)
    prod = bmul(A[:, :, None, :m], B[None, :, :, :m], order)
    return prod.sum(axis=1)


def _matjet_inverse(M, order):
    """Inverse of a matrix of bivariate jets via a Neumann series."""
    m = _size(order)
    M = M[:, :, :m]
    A0 = M[:, :, 0]
    if abs(np.linalg.det(A0)) < 1e-300:
        raise SingularJetError("Jacobian jet is singular at the origin")
    A0inv = np.linalg.inv(A0)
    Nrest = M.copy()
    Nrest[:, :, 0] = 0.0
    E = -np.einsum("ij,jkm->ikm", A0inv, Nrest)  # -A0^{-1} N
    term = np.zeros((2, 2, m), dtype=complex)
    term[:, :, 0] = np.eye(2)
    total = term.copy()
    for _ in range(order):
        term = _matjet_mul(E, term, order)
        total = total + term
    return np.einsum("ijm,jk->ikm", total, A0inv)


def _jacobian(jet):
    """Jacobian of a 2-component bivariate jet as a ``(2, 2, M)`` array of order-1-less jets."""
    d0 = jet.derivative(0).coeffs
    d1 = jet.derivative(1).coeffs
    return np.stack([d0, d1], axis=1)


def adjoint_state(traj, F_jet, t_index=None, t=None):
    """Closed-form adjoint ``DF [D phi_t]^{-1}`` at a grid index or an arbitrary time."""
    if (t_index is None) == (t is None):
        raise ValidationError("give exactly one of t_index or t")
    if t_index is not None:
        phi = traj.jet(t_index)
        t = float(traj.times[t_index])
    else:
        phi = traj.at(t)
    if isinstance(phi, Jet):
        dphi = phi.derivative()
        if dphi.coeffs[0] == 0:
            raise SingularJetError("phi_t'(0) vanished")
        transport = (F_jet.derivative() * reciprocal(dphi)).to_jet()
        return AdjointState(float(t), phi, transport, transport.order)
    order = min(phi.order, F_jet.order) - 1
    DF = _jacobian(F_jet)[:, :, : _size(order)]
    Dphi_inv = _matjet_inverse(_jacobian(phi), order)
    return AdjointState(float(t), phi, _matjet_mul(DF, Dphi_inv, order), order)


def _target_index(target):
    if isinstance(target, (tuple, list)):
        alpha = tuple(int(a) for a in target)
        if sum(alpha) < 2:
            raise ValidationError("multi-index must have |alpha| >= 2")
        return alpha
    N = int(target)
    if N < 2:
        raise ValidationError("N must be at least 2")
    return N


def _apply_transport_n2(state, v):
    """First component of ``transport . v`` for ``v`` of shape ``(..., 2, M)``."""
    order = state.transport_order
    m = _size(order)
    T = np.asarray(state.transport_jet)
    return bmul(T[0, 0], v[..., 0, :m], order) + bmul(T[0, 1], v[..., 1, :m], order)


def eval_Lt(state, h_jet, target):
    """``L_t(h)`` for a field jet ``h`` (constant term must vanish)."""
    target = _target_index(target)
    if state.dimension == 1:
        if h_jet.coeffs[0] != 0:
            raise ValidationError("field jet must vanish at the origin")
        hphi = h_jet.compose(state.phi)
        prod = _vmul(state.transport_jet, hphi)
        if target > prod.order:
            raise OrderError(f"J_{target} needs jet order >= {target}, have {prod.order}")
        return prod.coeff(target)
    if not isinstance(target, tuple):
        raise ValidationError("ball functionals take a multi-index target")
    if sum(target) > state.transport_order:
        raise OrderError(f"J_{target} needs transport order >= {sum(target)}")
    hphi = h_jet.compose(state.phi).coeffs
    w = _apply_transport_n2(state, hphi)
    return complex(w[_index(state.transport_order)[target]])


def slit_moments(state, N):
    """``m_k = J_N(transport . phi^{k+1})``, so ``L_t(h_kappa) = -m_0 - 2 sum_k conj(kappa)^k m_k``."""
    m = np.zeros(N, dtype=complex)
    pk = state.phi
    for k in range(N):
        if k:
            pk = _vmul(pk, state.phi)
        prod = _vmul(state.transport_jet, pk)
        if N > prod.order:
            raise OrderError(f"J_{N} needs jet order >= {N}, have {prod.order}")
        m[k] = prod.coeff(N)
    return m


def _slit_values(m, theta):
    theta = np.asarray(theta, dtype=float)
    k = np.arange(1, m.size)
    phase = np.exp(-1j * np.multiply.outer(theta, k))
    return np.real(-m[0] - 2.0 * phase @ m[1:])


@dataclass(frozen=True)
class MaxResult:
    value: float
    theta: float = float("nan")
    control: object = None
    lower_bound: bool = False

    @property
    def kappa(self):
        return complex(math.cos(self.theta), math.sin(self.theta))


def maximize_Lt(state, target, degree=2, grid=None, kappa_grid=KAPPA_GRID):
    """Maximum of ``Re L_t`` over the control set.

    Disk: exact maximum over slit fields.  Ball: linear program over the
    grid-validated polynomial fields of the given degree; ``lower_bound``
    is set because that family is a strict subset of the control set.
    """
    target = _target_index(target)
    if state.dimension == 1:
        m = slit_moments(state, target)
        theta = 2 * np.pi * np.arange(kappa_grid) / kappa_grid
        vals = _slit_values(m, theta)
        i = int(np.argmax(vals))
        best_t, best_v = float(theta[i]), float(vals[i])
        h = theta[1] - theta[0]
        try:
            res = minimize_scalar(
                lambda x: -float(_slit_values(m, x)),
                bracket=(best_t - h, best_t, best_t + h),
                method="golden",
                options={"xtol": 1e-12 / max(abs(best_t), 1.0)},
            )
            if -res.fun >= best_v:
                best_t, best_v = float(res.x), float(-res.fun)
        except ValueError:
            pass
        return MaxResult(best_v, best_t % (2 * np.pi))
    return _maximize_ball(state, target, degree, grid)


def _maximize_ball(state, alpha, degree, grid):
    grid = ball_grid() if grid is None else grid
    order = state.phi.order
    monos = [a for a in basis(degree).alphas if sum(a) >= 2]
    # L_t of the basis fields e_c z^a and of -z
    base = JetN.from_terms({(1, 0): [-1, 0], (0, 1): [0, -1]}, order)
    l0 = eval_Lt(state, base, alpha)
    ell = []
    for a in monos:
        for c in range(2):
            vec = [0, 0]
            vec[c] = 1
            ell.append(eval_Lt(state, JetN.from_terms({a: vec}, order), alpha))
    ell = np.array(ell)
    # constraint rows: Re sum q_{c,a} z^a conj(z_c) <= |z|^2 + tol
    z1, z2 = grid[:, 0], grid[:, 1]
    cols = []
    for a in monos:
        za = z1 ** a[0] * z2 ** a[1]
        cols.append(za * np.conj(z1))
        cols.append(za * np.conj(z2))
    W = np.stack(cols, axis=1)
    A_ub = np.concatenate([W.real, -W.imag], axis=1)
    b_ub = np.sum(np.abs(grid) ** 2, axis=1) + UN_TOL
    cost = -np.concatenate([ell.real, -ell.imag])
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=[(-1e3, 1e3)] * cost.size, method="highs")
    if res.status != 0:
        return MaxResult(float(l0.real), control=None, lower_bound=True)
    n = len(ell)
    q = res.x[:n] + 1j * res.x[n:]
    terms = {}
    for i, a in enumerate(monos):
        terms[a] = np.array([q[2 * i], q[2 * i + 1]])
    ctrl = ControlValueN.from_nonlinear(terms, validation_grid=grid, validate=False)
    return MaxResult(float(l0.real + (ell @ q).real), control=ctrl, lower_bound=True)


def default_sample_times(control, count=N_SAMPLES):
    """Chebyshev points of ``[0, T]`` plus the midpoint of every control piece."""
    T = control.horizon
    k = np.arange(count)
    cheb = 0.5 * T * (1 - np.cos((2 * k + 1) * np.pi / (2 * count)))
    return np.unique(np.concatenate([cheb, control.midpoints()]))


@dataclass(frozen=True)
class PmpReport:
    target: object
    times: np.ndarray
    achieved: np.ndarray
    optimal: np.ndarray
    gap: np.ndarray
    max_gap: float
    argmax_kappa: np.ndarray
    lower_bound: bool

    def to_dict(self):
        return {
            "schema": 1,
            "target": list(self.target) if isinstance(self.target, tuple) else self.target,
            "times": self.times.tolist(),
            "achieved": self.achieved.tolist(),
            "optimal": self.optimal.tolist(),
            "gap": self.gap.tolist(),
            "max_gap": self.max_gap,
            "argmax_kappa": [None if math.isnan(x) else x for x in self.argmax_kappa.tolist()],
            "lower_bound": self.lower_bound,
        }

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "achieved", "optimal", "gap", "theta_star"])
        for row in zip(self.times, self.achieved, self.optimal, self.gap, self.argmax_kappa):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def pmp_check(control, target, sample_times=None, order=None, step=DEFAULT_STEP, degree=2, grid=None):
    """Gap between ``max Re L_t`` and ``Re L_t`` of the control's own value.

    ``F`` is always the limit map of ``control`` itself.
    """
    target = _target_index(target)
    if control.dimension == 1 and isinstance(target, tuple):
        raise ValidationError("disk controls take an integer target N")
    if control.dimension == 2 and not isinstance(target, tuple):
        raise ValidationError("ball controls take a multi-index target")
    if order is None:
        order = max(12, target + 1) if control.dimension == 1 else max(6, sum(target) + 1)
    traj = integrate(control, order, step)
    F = limit_map(control, trajectory=traj).jet
    times = default_sample_times(control) if sample_times is None else np.asarray(sample_times, dtype=float)
    achieved, optimal, thetas = [], [], []
    lower = False
    for t in times:
        state = adjoint_state(traj, F, t=float(t))
        v = control.value_at(float(t))
        achieved.append(eval_Lt(state, control_jet(v, order), target).real)
        best = maximize_Lt(state, target, degree=max(degree, getattr(v, "degree", 0)), grid=grid)
        optimal.append(best.value)
        thetas.append(best.theta)
        lower = lower or best.lower_bound
    achieved = np.array(achieved)
    optimal = np.array(optimal)
    gap = optimal - achieved
    return PmpReport(
        target=target,
        times=np.asarray(times),
        achieved=achieved,
        optimal=optimal,
        gap=gap,
        max_gap=float(np.max(gap)) if gap.size else 0.0,
        argmax_kappa=np.array(thetas, dtype=float),
        lower_bound=lower,
    )
