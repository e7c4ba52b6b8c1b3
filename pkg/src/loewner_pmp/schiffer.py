"""Schiffer differential equation for the N-th coefficient functional.

For a normalized candidate ``F(z) = z + A_2 z^2 + ...`` define

    P_N(w) = sum_{k=1}^{N-1} J_N(F^{k+1}) w^k
    R_N(z) = (N-1) A_N + sum_{k=1}^{N-1} (k A_k z^{k-N} + k conj(A_k) z^{N-k})

and test ``[z F'/F]^2 P_N(1/F) = R_N`` coefficientwise on the exponents
``-(N-1)..(N-1)``, together with ``R_N >= 0`` on the unit circle with a
zero somewhere.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import OrderError, ValidationError
from .jets import Jet, LaurentJet, reciprocal

EQUATION_TOL = 1e-8
POSITIVITY_TOL = 1e-8
EQUALITY_TOL = 1e-6
BOUNDARY_GRID = 4096
NORMALIZATION_TOL = 1e-6


@dataclass(frozen=True)
class SchifferData:
    N: int
    F_jet: Jet
    A: np.ndarray
    P_N: np.ndarray
    R_N: LaurentJet


@dataclass(frozen=True)
class SchifferReport:
    N: int
    residual_coeffs: np.ndarray
    residual_norm: float
    boundary_min: float
    boundary_argmin: float
    boundary_max_imag: float
    satisfied: tuple
    effective_order: int
    data: SchifferData = field(repr=False, compare=False)

    def to_dict(self):
        return {
            "schema": 1,
            "N": self.N,
            "residual_coeffs": [[float(c.real), float(c.imag)] for c in self.residual_coeffs],
            "residual_norm": self.residual_norm,
            "boundary_min": self.boundary_min,
            "boundary_argmin": self.boundary_argmin,
            "boundary_max_imag": self.boundary_max_imag,
            "satisfied": {"equation": self.satisfied[0], "positivity": self.satisfied[1]},
            "effective_order": self.effective_order,
        }

    def boundary_csv(self, points=BOUNDARY_GRID):
        theta = 2 * np.pi * np.arange(points) / points
        vals = self.data.R_N(np.exp(1j * theta))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "re_R", "im_R"])
        for th, v in zip(theta, vals):
            w.writerow([repr(float(th)), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()


def _check_normalized(F):
    if F.order < 1 or F.coeffs[0] != 0 or abs(F.coeffs[1] - 1) > NORMALIZATION_TOL:
        raise ValidationError("candidate must satisfy F(0) = 0, F'(0) = 1")


def build_pn(F_jet, N):
    """Coefficients ``[0, J_N(F^2), ..., J_N(F^N)]`` of ``P_N`` (index = power of w)."""
    if N < 2:
        raise ValidationError("N must be at least 2")
    if F_jet.order < N:
        raise OrderError(f"P_{N} needs a jet of order >= {N}, got {F_jet.order}")
    F = F_jet.truncate(N)
    p = np.zeros(N, dtype=complex)
    Fk = F
    for k in range(1, N):
        Fk = Fk * F
        p[k] = Fk.coeff(N)
    return p


def build_rn(F_jet, N):
    """``R_N`` as a Laurent jet with pole order ``N-1`` and top exponent ``N-1``."""
    if N < 2:
        raise ValidationError("N must be at least 2")
    if F_jet.order < N:
        raise OrderError(f"R_{N} needs a jet of order >= {N}, got {F_jet.order}")
    A = np.array([F_jet.coeff(k) for k in range(N + 1)])
    A[1] = 1.0
    c = np.zeros(2 * N - 1, dtype=complex)
    for k in range(1, N):
        c[(k - N) + (N - 1)] += k * A[k]
        c[(N - k) + (N - 1)] += k * np.conj(A[k])
    c[N - 1] += (N - 1) * A[N]
    return LaurentJet(N - 1, c)


def schiffer_lhs(F_jet, N, P=None):
    """``[z F'/F]^2 P_N(1/F)`` in Laurent arithmetic."""
    P = build_pn(F_jet, N) if P is None else P
    inv = reciprocal(F_jet)
    zF = Jet(np.concatenate([[0.0], F_jet.derivative().coeffs]))
    q = zF * inv
    q2 = q * q
    acc = None
    invk = None
    for k in range(1, N):
        invk = inv if invk is None else invk * inv
        term = invk * P[k]
        acc = term if acc is None else acc + term
    return q2 * acc


def _refine_min(f, theta, vals, i):
    """Parabolic refinement of a grid minimum at index ``i``."""
    n = theta.size
    h = theta[1] - theta[0]
    y0, y1, y2 = vals[(i - 1) % n], vals[i], vals[(i + 1) % n]
    denom = y0 - 2 * y1 + y2
    if denom <= 0:
        return theta[i], y1
    off = 0.5 * h * (y0 - y2) / denom
    t = theta[i] + float(np.clip(off, -h, h))
    v = f(t)
    if v < y1:
        return t % (2 * np.pi), v
    return theta[i], y1


def schiffer_residual(F_jet, N, tol=EQUATION_TOL, grid=BOUNDARY_GRID,
                      positivity_tol=POSITIVITY_TOL, equality_tol=EQUALITY_TOL):
    """Evaluate the Schiffer equation and the boundary positivity condition.

    ``satisfied = (residual_norm <= tol, -positivity_tol <= min R_N <= equality_tol)``.
    Jets produced by the integrator carry O(step^4) errors, so looser
    tolerances (or a finer step) are appropriate for them.
    """
    _check_normalized(F_jet)
    if F_jet.order < 2 * N:
        raise OrderError(f"Schiffer residual for N={N} needs a jet of order >= {2 * N}, got {F_jet.order}")
    P = build_pn(F_jet, N)
    R = build_rn(F_jet, N)
    lhs = schiffer_lhs(F_jet, N, P)
    if lhs.pole_order > N - 1 and np.any(lhs.coeffs[: lhs.pole_order - (N - 1)] != 0):
        raise AssertionError("left-hand side has a pole of order above N-1")
    lo, hi = -(N - 1), N - 1
    residual = lhs.window(lo, hi) - R.window(lo, hi)
    residual_norm = float(np.max(np.abs(residual)))

    def r_real(t):
        return float(np.real(R(np.exp(1j * t))))

    theta = 2 * np.pi * np.arange(grid) / grid
    rv = R(np.exp(1j * theta))
    vals = rv.real
    i = int(np.argmin(vals))
    th_star, vmin = _refine_min(r_real, theta, vals, i)
    ok_eq = residual_norm <= tol
    ok_pos = -positivity_tol <= vmin <= equality_tol
    data = SchifferData(N, F_jet, np.array([F_jet.coeff(k) for k in range(1, N + 1)]), P, R)
    return SchifferReport(
        N=N,
        residual_coeffs=residual,
        residual_norm=residual_norm,
        boundary_min=float(vmin),
        boundary_argmin=float(th_star),
        boundary_max_imag=float(np.max(np.abs(rv.imag))),
        satisfied=(bool(ok_eq), bool(ok_pos)),
        effective_order=F_jet.order,
        data=data,
    )
