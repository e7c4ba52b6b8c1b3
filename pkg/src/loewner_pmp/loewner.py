"""Loewner ODE integration.

The Loewner equation ``d phi/dt = G(phi, t)``, ``phi_0 = id`` is integrated
in two independent ways:

* jet transport -- the truncated Taylor coefficients of ``phi_t`` obey the
  ODE ``d/dt jet(phi) = control_jet o jet(phi)``, integrated with classical
  RK4 on a fixed grid refined to hit every breakpoint;
* pointwise -- RK4 on ``phi(t, z0)`` for a single initial point, using the
  closed-form field.

Past the horizon ``T`` a control is extended by the field ``-z``; under it
``e^t phi_t`` is stationary, so the limit map of the extended control is
``e^T phi_T`` exactly.
"""

from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass

import numpy as np

from .controls import DrivingControl, _slit_coeffs, control_jet
from .errors import BlowupError, StepRefinementError, ValidationError
from .jets import Jet, JetN, _index, _size, bcompose, series_compose

DEFAULT_ORDER = 12
DEFAULT_ORDER_N = 6
DEFAULT_STEP = 1.0 / 64
DRIFT_TOL = 1e-8

__all__ = [
    "Trajectory",
    "LimitMap",
    "PointwisePath",
    "integrate",
    "limit_map",
    "integrate_pointwise",
    "cross_check",
    "transport_batch",
    "slit_limit_coeffs",
    "normalize_final",
]


def _substeps(length, step):
    n = max(1, int(math.ceil(length / step - 1e-9)))
    return n, length / n


def _make_rhs(dimension, order):
    if dimension == 1:
        return lambda c, y: series_compose(c, y)
    return lambda c, y: bcompose(c, y, order)


def _rk4(rhs, c, y, h):
    k1 = rhs(c, y)
    k2 = rhs(c, y + 0.5 * h * k1)
    k3 = rhs(c, y + 0.5 * h * k2)
    k4 = rhs(c, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _identity_coeffs(dimension, order, batch=()):
    if dimension == 1:
        y = np.zeros(batch + (order + 1,), dtype=complex)
        if order >= 1:
            y[..., 1] = 1.0
        return y
    y = np.zeros(batch + (2, _size(order)), dtype=complex)
    if order >= 1:
        idx = _index(order)
        y[..., 0, idx[(1, 0)]] = 1.0
        y[..., 1, idx[(0, 1)]] = 1.0
    return y


def _linear_drift(y, t, dimension, order):
    if order < 1:
        return 0.0
    e = math.exp(-t)
    if dimension == 1:
        return float(np.max(np.abs(y[..., 1] - e)))
    idx = _index(order)
    i1, i2 = idx[(1, 0)], idx[(0, 1)]
    d = max(
        np.max(np.abs(y[..., 0, i1] - e)),
        np.max(np.abs(y[..., 1, i2] - e)),
        np.max(np.abs(y[..., 0, i2])),
        np.max(np.abs(y[..., 1, i1])),
    )
    return float(d)


def transport_batch(piece_coeffs, breakpoints, order, step=DEFAULT_STEP, dimension=1,
                    record=False, check=True):
    """RK4 jet transport for controls sharing one set of breakpoints.

    ``piece_coeffs[k]`` holds the field coefficients of piece ``k`` with
    any leading batch shape (``(..., D+1)`` for ``n = 1``, ``(..., 2, M)``
    for ``n = 2``).  Returns the final state, or ``(times, states, piece_of_step)``
    when ``record`` is true.
    """
    rhs = _make_rhs(dimension, order)
    batch = np.broadcast_shapes(*(np.shape(c)[: -1 if dimension == 1 else -2] for c in piece_coeffs)) \
        if piece_coeffs else ()
    y = _identity_coeffs(dimension, order, batch)
    times, states, owner = [0.0], [y], []
    t = 0.0
    for k, c in enumerate(piece_coeffs):
        a, b = breakpoints[k], breakpoints[k + 1]
        n, h = _substeps(b - a, step)
        c = np.asarray(c)
        for j in range(n):
            y = _rk4(rhs, c, y, h)
            t = b if j == n - 1 else a + (j + 1) * h
            if check:
                drift = _linear_drift(y, t, dimension, order)
                if drift > DRIFT_TOL:
                    raise StepRefinementError(
                        f"linear coefficient drifted {drift:.3e} from e^-t at t={t:.6g} "
                        f"(step {h:.3g}); refine the step"
                    )
            if record:
                times.append(t)
                states.append(y)
                owner.append(k)
    if record:
        return np.array(times), np.array(states), np.array(owner, dtype=int)
    return y


@dataclass(frozen=True)
class Trajectory:
    """Jets of ``phi_t`` on the integration grid.

    ``coeffs[i]`` is the jet at ``times[i]``; ``piece_of_step[i]`` is the
    control piece used on ``[times[i], times[i+1]]``.
    """

    control: DrivingControl
    times: np.ndarray
    coeffs: np.ndarray
    piece_of_step: np.ndarray
    order: int
    step: float

    @property
    def dimension(self):
        return self.control.dimension

    @property
    def horizon(self):
        return self.control.horizon

    def _wrap(self, c):
        return Jet(c) if self.dimension == 1 else JetN(c, self.order)

    def jet(self, i):
        return self._wrap(self.coeffs[i])

    def normalized(self, i):
        return self._wrap(math.exp(self.times[i]) * self.coeffs[i])

    def at(self, t):
        """Jet of ``phi_t`` for any ``t`` in ``[0, T]`` (one partial RK4 step off-grid)."""
        if t < 0 or t > self.horizon + 1e-12:
            raise ValidationError(f"time {t} outside [0, {self.horizon}]")
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        i = min(max(i, 0), len(self.times) - 1)
        dt = t - self.times[i]
        if dt <= 1e-15 or i == len(self.times) - 1:
            return self.jet(i)
        value = self.control.values[self.piece_of_step[i]]
        c = _coeffs_of(value, self.order)
        y = _rk4(_make_rhs(self.dimension, self.order), c, self.coeffs[i], dt)
        return self._wrap(y)

    def to_csv(self, indices=(2, 3)):
        """Row per grid time with Re/Im of selected normalized coefficients (n = 1)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"{p}_a{k}" for k in indices for p in ("re", "im")])
        for t, c in zip(self.times, self.coeffs):
            a = math.exp(t) * c
            row = [repr(float(t))]
            for k in indices:
                row += [repr(float(a[k].real)), repr(float(a[k].imag))]
            w.writerow(row)
        return buf.getvalue()


def _coeffs_of(value, order):
    return np.asarray(control_jet(value, order).coeffs)


def integrate(control, order=None, step=DEFAULT_STEP):
    """Transport the jet of ``phi_t`` along ``control``; returns a :class:`Trajectory`.

    Each piece is split into equal substeps no longer than ``step``.
    Raises :class:`StepRefinementError` when the degree-one coefficient
    drifts from ``e^{-t}`` by more than 1e-8.
    """
    if order is None:
        order = DEFAULT_ORDER if control.dimension == 1 else DEFAULT_ORDER_N
    if step <= 0:
        raise ValidationError("step must be positive")
    pcs = [_coeffs_of(v, order) for v in control.values]
    times, states, owner = transport_batch(
        pcs, control.breakpoints, order, step, control.dimension, record=True
    )
    return Trajectory(control, times, states, owner, order, step)


@dataclass(frozen=True)
class LimitMap:
    """Normalized limit ``f = lim e^t phi_t`` of the horizon-extended control."""

    jet: object
    horizon_used: float
    tail_estimate: float = 0.0

    @property
    def order(self):
        return self.jet.order

    @property
    def coefficients(self):
        """Taylor coefficients ``a_0..a_D`` (n = 1) or the raw coefficient array (n = 2)."""
        return np.asarray(self.jet.coeffs)

    def a(self, k):
        return self.jet.coeff(k)

    def to_dict(self):
        c = np.asarray(self.jet.coeffs)
        if c.ndim == 1:
            coeffs = [[float(x.real), float(x.imag)] for x in c]
        else:
            from .jets import basis

            coeffs = [
                {"component": comp, "alpha": list(a), "coeff": [float(c[comp, k].real), float(c[comp, k].imag)]}
                for k, a in enumerate(basis(self.order).alphas)
                for comp in range(c.shape[0])
            ]
        return {
            "schema": 1,
            "coefficients": coeffs,
            "horizon": self.horizon_used,
            "order": self.order,
            "tail_estimate": self.tail_estimate,
        }


def normalize_final(y, dimension=1):
    """Scale final coefficients so the linear part is exactly the identity.

    Equal to ``e^T y`` in exact arithmetic; dividing by the computed linear
    coefficient removes the O(h^4) drift RK4 accumulates in it.
    """
    y = np.asarray(y)
    if dimension == 1:
        return y / y[..., 1:2]
    order = _order_from_size(y.shape[-1])
    idx = _index(order)
    lin = np.stack([y[..., :, idx[(1, 0)]], y[..., :, idx[(0, 1)]]], axis=-1)
    return np.linalg.solve(lin, y)


def _order_from_size(m):
    d = 0
    while _size(d) < m:
        d += 1
    return d


def limit_map(control, order=None, step=DEFAULT_STEP, trajectory=None):
    """Limit map ``f^G`` of ``control`` extended past ``T`` by ``-z``."""
    traj = trajectory if trajectory is not None else integrate(control, order, step)
    y = normalize_final(traj.coeffs[-1], control.dimension)
    return LimitMap(traj._wrap(y), control.horizon, 0.0)


# --------------------------------------------------------------------------
# pointwise integration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PointwisePath:
    times: np.ndarray
    points: np.ndarray

    @property
    def final(self):
        return self.points[-1]


def integrate_pointwise(control, z0, step=DEFAULT_STEP):
    """RK4 path of ``phi(t, z0)`` using the closed-form field of each piece."""
    n = control.dimension
    z = np.asarray(z0, dtype=complex).reshape(-1) if n == 2 else complex(z0)
    if np.linalg.norm(np.atleast_1d(z)) >= 1.0:
        raise ValidationError("initial point must lie in the open unit ball")
    times, points = [0.0], [z]
    for k, v in enumerate(control.values):
        a, b = control.breakpoints[k], control.breakpoints[k + 1]
        m, h = _substeps(b - a, step)
        f = v.field
        for j in range(m):
            k1 = f(z)
            k2 = f(z + 0.5 * h * k1)
            k3 = f(z + 0.5 * h * k2)
            k4 = f(z + h * k3)
            z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t = b if j == m - 1 else a + (j + 1) * h
            if not np.all(np.isfinite(z)) or np.linalg.norm(np.atleast_1d(z)) >= 1.0:
                raise BlowupError(f"trajectory left the unit ball at t={t:.6g}")
            times.append(t)
            points.append(z)
    return PointwisePath(np.array(times), np.array(points))


def cross_check(control, z0, order=None, step=DEFAULT_STEP):
    """``|jet(phi_T)(z0) - phi(T, z0)|`` between the two integration routes."""
    traj = integrate(control, order, step)
    jet_T = traj.jet(len(traj.times) - 1)
    path = integrate_pointwise(control, z0, step)
    return float(np.linalg.norm(np.atleast_1d(jet_T(z0) - path.final)))


# --------------------------------------------------------------------------
# fast path: single-atom pieces of equal length
# --------------------------------------------------------------------------

@functools.lru_cache(maxsize=64)
def _unit_slit_flow(length, order, step):
    """Jet of the time-``length`` flow of ``h_1`` (frozen array)."""
    c = _slit_coeffs(np.zeros(1), np.ones(1), order)
    y = transport_batch([c], (0.0, length), order, step)
    y.setflags(write=False)
    return y


def slit_limit_coeffs(thetas, horizon, order, step=DEFAULT_STEP):
    """Normalized limit coefficients for equal single-atom pieces.

    ``thetas`` has shape ``(..., K)``.  Uses ``phi_T = psi_K o ... o psi_1``
    with ``psi^kappa(z) = kappa psi^1(conj(kappa) z)``; RK4 commutes with
    right composition and with rotations, so this agrees with
    :func:`integrate` to round-off.
    """
    thetas = np.asarray(thetas, dtype=float)
    K = thetas.shape[-1]
    psi = _unit_slit_flow(float(horizon) / K, order, step)
    j = np.arange(order + 1)
    y = _identity_coeffs(1, order, thetas.shape[:-1])
    for k in range(K):
        rot = np.exp(1j * thetas[..., k, None] * (1 - j))
        y = series_compose(psi * rot, y)
    return normalize_final(y)
