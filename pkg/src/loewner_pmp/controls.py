"""Herglotz controls: finite parameterizations of the control sets.

For ``n = 1`` a control value is a convex combination of slit fields

    h_kappa(z) = -z (kappa + z) / (kappa - z),   |kappa| = 1,

which are the extreme points of the class of normalized fields with
``Re(h(z) conj(z)) <= 0``.  For ``n = 2`` a control value is a polynomial
map with linear part ``-id`` whose membership is checked numerically on a
fixed low-discrepancy grid of the ball.

A :class:`DrivingControl` is piecewise constant in time.
"""

from __future__ import annotations

import functools
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import ConstraintError, ValidationError
from .jets import Jet, JetN, _size, basis

KAPPA_TOL = 1e-12
WEIGHT_TOL = 1e-12
UN_TOL = 1e-10

__all__ = [
    "BoundaryAtom",
    "ControlValue1",
    "ControlValueN",
    "DrivingControl",
    "UnReport",
    "extreme_point",
    "control_jet",
    "validate_un",
    "ball_grid",
    "project_to_un",
    "constant_control",
    "slit_control",
    "koebe_control",
    "rotating_control",
    "random_control",
    "random_poly_control",
    "builtin_control",
]


# --------------------------------------------------------------------------
# control values
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryAtom:
    """A boundary point ``kappa = exp(i theta)`` with a convex weight.

    The angle is the stored quantity, so ``|kappa| = 1`` holds exactly.
    """

    theta: float
    weight: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValidationError("atom angle must be finite")
        if not (-WEIGHT_TOL <= self.weight <= 1 + WEIGHT_TOL):
            raise ValidationError(f"atom weight {self.weight} outside [0, 1]")

    @classmethod
    def from_kappa(cls, kappa, weight=1.0):
        kappa = complex(kappa)
        if abs(abs(kappa) - 1.0) > KAPPA_TOL:
            raise ValidationError(f"|kappa| = {abs(kappa)!r} is not 1")
        return cls(math.atan2(kappa.imag, kappa.real), weight)

    @property
    def kappa(self):
        return complex(math.cos(self.theta), math.sin(self.theta))


@dataclass(frozen=True)
class ControlValue1:
    """Convex combination of slit fields (an element of the disk control set)."""

    atoms: tuple

    def __post_init__(self):
        atoms = tuple(self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise ValidationError("a control value needs at least one atom")
        total = sum(a.weight for a in atoms)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValidationError(f"atom weights sum to {total!r}, not 1")

    dimension = 1

    @classmethod
    def single(cls, theta):
        return cls((BoundaryAtom(float(theta), 1.0),))

    def jet(self, order):
        return control_jet(self, order)

    def field(self, z):
        """Closed-form value ``h(z)`` (vectorized over ``z``)."""
        z = np.asarray(z, dtype=complex)
        acc = np.zeros_like(z)
        for a in self.atoms:
            k = a.kappa
            acc = acc + a.weight * (k + z) / (k - z)
        return -z * acc

    def to_dict(self):
        return {"atoms": [{"kappa_arg": a.theta, "weight": a.weight} for a in self.atoms]}


@dataclass(frozen=True)
class ControlValueN:
    """Polynomial map ``G`` on the ball of C^2 with ``G(0) = 0`` and ``DG(0) = -id``.

    ``poly_terms`` holds the full polynomial (linear part included).  Grid
    validation runs at construction unless ``validate=False``.
    """

    poly_terms: JetN
    validation_grid: np.ndarray = field(default=None, repr=False, compare=False)
    validate: bool = field(default=True, repr=False, compare=False)

    dimension = 2

    def __post_init__(self):
        if self.validation_grid is None:
            object.__setattr__(self, "validation_grid", ball_grid())
        if self.validate:
            rep = validate_un(self.poly_terms, self.validation_grid)
            if not rep.linear_ok:
                raise ValidationError("linear part of the polynomial control is not -id")
            if not rep.valid:
                raise ValidationError(
                    f"Re<G(z),z> reaches {rep.max_violation:.3e} > {UN_TOL:g} on the validation grid"
                )

    @classmethod
    def from_nonlinear(cls, terms, **kwargs):
        """Build ``-z + sum terms``; ``terms`` maps multi-indices (|alpha| >= 2) to 2-vectors."""
        degree = max((sum(a) for a in terms), default=1)
        for a in terms:
            if sum(a) < 2:
                raise ValidationError(f"nonlinear term {a} has degree < 2")
        full = {(1, 0): [-1, 0], (0, 1): [0, -1]}
        for a, v in terms.items():
            full[tuple(a)] = np.asarray(v, dtype=complex) + np.asarray(full.get(tuple(a), 0))
        return cls(JetN.from_terms(full, max(degree, 1)), **kwargs)

    @property
    def degree(self):
        return self.poly_terms.order

    def nonlinear_terms(self):
        return {a: v for a, v in self.poly_terms.terms.items() if sum(a) >= 2}

    def jet(self, order):
        return control_jet(self, order)

    def field(self, z):
        return self.poly_terms(z)

    def to_dict(self):
        return {
            "poly": [
                {"component": c, "alpha": list(a), "coeff": [v[c].real, v[c].imag]}
                for a, v in sorted(self.nonlinear_terms().items())
                for c in range(2)
                if v[c] != 0
            ]
        }


def extreme_point(kappa, order):
    """Jet of ``h_kappa(z) = -z (kappa + z)/(kappa - z)``.

    Coefficients: ``0, -1, -2 conj(kappa), -2 conj(kappa)^2, ...``.
    """
    kappa = complex(kappa)
    if abs(abs(kappa) - 1.0) > KAPPA_TOL:
        raise ValidationError(f"|kappa| = {abs(kappa)!r} is not 1")
    c = np.zeros(order + 1, dtype=complex)
    if order >= 1:
        c[1] = -1.0
    if order >= 2:
        c[2:] = -2.0 * np.conj(kappa) ** np.arange(1, order)
    return Jet(c)


def _slit_coeffs(thetas, weights, order):
    """Batched control-jet coefficients for atom arrays (..., A)."""
    thetas = np.asarray(thetas, dtype=float)
    weights = np.asarray(weights, dtype=float)
    k = np.arange(1, order)
    c = np.zeros(thetas.shape[:-1] + (order + 1,), dtype=complex)
    if order >= 1:
        c[..., 1] = -1.0
    if order >= 2:
        phase = np.exp(-1j * thetas[..., None] * k)  # conj(kappa)^k
        c[..., 2:] = -2.0 * np.sum(weights[..., None] * phase, axis=-2)
    return c


def control_jet(v, order):
    """Jet of the vector field of a control value to the given order."""
    if isinstance(v, ControlValue1):
        th = np.array([a.theta for a in v.atoms])
        w = np.array([a.weight for a in v.atoms])
        return Jet(_slit_coeffs(th, w, order))
    if isinstance(v, ControlValueN):
        p = v.poly_terms
        c = np.zeros((2, _size(order)), dtype=complex)
        m = min(p.coeffs.shape[1], _size(order))
        c[:, :m] = p.coeffs[:, :m]
        return JetN(c, order)
    raise ValidationError(f"not a control value: {type(v).__name__}")


# --------------------------------------------------------------------------
# validation of the ball control set
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class UnReport:
    valid: bool
    max_violation: float
    linear_ok: bool
    argmax: tuple


def _sphere_points(u):
    """Map uniforms in (0,1)^4 to unit vectors of C^2 via Gaussian directions."""
    from scipy.special import ndtri

    g = ndtri(u)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g[:, 0] + 1j * g[:, 1], g[:, 2] + 1j * g[:, 3]


@functools.lru_cache(maxsize=8)
def _ball_grid(count, shell_count, shell_radius):
    h = qmc.Halton(d=5, scramble=False).random(count + 1)[1:]
    z1, z2 = _sphere_points(h[:, :4])
    r = h[:, 4] ** 0.25
    interior = np.stack([r * z1, r * z2], axis=1)
    hs = qmc.Halton(d=4, scramble=False).random(shell_count + 1)[1:]
    s1, s2 = _sphere_points(hs)
    shell = shell_radius * np.stack([s1, s2], axis=1)
    grid = np.concatenate([interior, shell])
    grid.setflags(write=False)
    return grid


def ball_grid(count=512, shell_count=256, shell_radius=0.99):
    """Deterministic validation grid: Halton points in the ball plus a shell."""
    return _ball_grid(count, shell_count, shell_radius)


def _monomials(grid, order):
    z1 = grid[:, 0][:, None]
    z2 = grid[:, 1][:, None]
    al = np.array(basis(order).alphas)
    return z1 ** al[:, 0] * z2 ** al[:, 1]


def validate_un(candidate, grid=None, tol=UN_TOL):
    """Report ``max Re<h(z), z>`` over the grid and whether ``Dh(0) = -id``.

    Never raises on invalid candidates; the verdict is in the report.
    """
    grid = ball_grid() if grid is None else np.asarray(grid)
    c = candidate.coeffs
    if np.any(c[:, 0] != 0):
        raise ValidationError("candidate must vanish at the origin")
    lin = candidate.terms
    linear_ok = (
        candidate.order >= 1
        and np.allclose(lin.get((1, 0), 0), [-1, 0], rtol=0, atol=0)
        and np.allclose(lin.get((0, 1), 0), [0, -1], rtol=0, atol=0)
    )
    vals = _monomials(grid, candidate.order) @ c.T  # (P, 2)
    ip = np.real(np.sum(vals * np.conj(grid), axis=1))
    i = int(np.argmax(ip))
    worst = float(ip[i])
    return UnReport(bool(linear_ok and worst <= tol), worst, bool(linear_ok), tuple(grid[i]))


def project_to_un(terms, grid=None, shrink=0.5, max_rescalings=100):
    """Rescale nonlinear terms until the polynomial passes :func:`validate_un`.

    Returns ``(ControlValueN, scale)``.  Raises :class:`ConstraintError`
    after ``max_rescalings`` failed attempts.
    """
    grid = ball_grid() if grid is None else grid
    scale = 1.0
    for _ in range(max_rescalings + 1):
        scaled = {a: np.asarray(v, dtype=complex) * scale for a, v in terms.items()}
        cand = ControlValueN.from_nonlinear(scaled, validation_grid=grid, validate=False)
        if validate_un(cand.poly_terms, grid).valid:
            return ControlValueN(cand.poly_terms, grid, validate=False), scale
        scale *= shrink
    raise ConstraintError(f"no feasible rescaling after {max_rescalings} attempts")


# --------------------------------------------------------------------------
# driving controls
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DrivingControl:
    """Piecewise-constant admissible control on ``[0, T]``.

    ``breakpoints`` are ``0 = t_0 < ... < t_K = T``; ``values[k]`` acts on
    ``[t_k, t_{k+1})``.
    """

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        bp = tuple(float(t) for t in self.breakpoints)
        vals = tuple(self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if len(bp) < 1 or bp[0] != 0.0:
            raise ValidationError("breakpoints must start at 0")
        if len(vals) != len(bp) - 1:
            raise ValidationError(f"{len(vals)} values for {len(bp) - 1} pieces")
        if any(not math.isfinite(t) for t in bp):
            raise ValidationError("breakpoints must be finite")
        if any(b <= a for a, b in zip(bp, bp[1:])):
            raise ValidationError("breakpoints must be strictly increasing (no zero-length pieces)")
        dims = {v.dimension for v in vals}
        if len(dims) > 1:
            raise ValidationError("mixed control dimensions")

    kind = "piecewise-constant"

    @property
    def horizon(self):
        return self.breakpoints[-1]

    @property
    def dimension(self):
        return self.values[0].dimension if self.values else 1

    @property
    def pieces(self):
        return len(self.values)

    def piece_index(self, t):
        """Index of the piece active at ``t`` (right-continuous; ``T`` maps to the last piece)."""
        if t < 0 or t > self.horizon:
            raise ValidationError(f"time {t} outside [0, {self.horizon}]")
        k = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return min(k, self.pieces - 1)

    def value_at(self, t):
        return self.values[self.piece_index(t)]

    def midpoints(self):
        bp = np.asarray(self.breakpoints)
        return 0.5 * (bp[1:] + bp[:-1])

    def split(self, s):
        """Controls on ``[0, s]`` and on ``[s, T]`` (the latter shifted to start at 0)."""
        if not 0 < s < self.horizon:
            raise ValidationError("split time must lie strictly inside the horizon")
        k = self.piece_index(s)
        bp = self.breakpoints
        head_bp = [t for t in bp[: k + 1]] + [s]
        head_bp = sorted(set(head_bp))
        head_vals = self.values[: len(head_bp) - 1]
        tail_bp = [0.0] + [t - s for t in bp[k + 1:]]
        tail_vals = self.values[k:]
        return DrivingControl(tuple(head_bp), head_vals), DrivingControl(tuple(tail_bp), tail_vals)

    # serialization
    def to_dict(self):
        return {
            "schema": 1,
            "horizon": self.horizon,
            "breakpoints": list(self.breakpoints),
            "pieces": [v.to_dict() for v in self.values],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def digest(self):
        """Short content hash used to reference controls from point clouds."""
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ValidationError("control must be a JSON object")
        unknown = set(d) - {"schema", "horizon", "breakpoints", "pieces"}
        if unknown:
            raise ValidationError(f"unknown control keys: {sorted(unknown)}")
        if d.get("schema", 1) != 1:
            raise ValidationError(f"unsupported control schema {d.get('schema')!r}")
        try:
            bp = [float(t) for t in d["breakpoints"]]
            pieces = d["pieces"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed control: {exc}") from None
        if "horizon" in d and bp and abs(float(d["horizon"]) - bp[-1]) > 1e-12:
            raise ValidationError("horizon does not match the last breakpoint")
        values = [_value_from_dict(p) for p in pieces]
        return cls(tuple(bp), tuple(values))

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed control JSON: {exc}") from None
        return cls.from_dict(d)


def _value_from_dict(p):
    if not isinstance(p, dict) or len(p) != 1:
        raise ValidationError("each piece must have exactly one of 'atoms' or 'poly'")
    if "atoms" in p:
        try:
            atoms = tuple(BoundaryAtom(float(a["kappa_arg"]), float(a["weight"])) for a in p["atoms"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed atom: {exc}") from None
        return ControlValue1(atoms)
    if "poly" in p:
        terms = {}
        try:
            for t in p["poly"]:
                a = tuple(int(x) for x in t["alpha"])
                vec = np.asarray(terms.get(a, [0, 0]), dtype=complex)
                vec[int(t["component"])] += complex(t["coeff"][0], t["coeff"][1])
                terms[a] = vec
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ValidationError(f"malformed polynomial term: {exc}") from None
        return ControlValueN.from_nonlinear(terms)
    raise ValidationError(f"unknown piece keys: {sorted(p)}")


# --------------------------------------------------------------------------
# builders
# --------------------------------------------------------------------------

def constant_control(theta, horizon):
    return DrivingControl((0.0, float(horizon)), (ControlValue1.single(theta),))


def slit_control(thetas, horizon):
    """Single-atom pieces of equal length on ``[0, horizon]``."""
    k = len(thetas)
    bp = tuple(np.linspace(0.0, float(horizon), k + 1))
    return DrivingControl(bp, tuple(ControlValue1.single(float(t)) for t in thetas))


def koebe_control(horizon=20.0):
    """Constant ``kappa = -1``; the limit map is ``z/(1 - z)^2`` up to ``O(e^{-T})``."""
    return constant_control(math.pi, horizon)


def rotating_control(omega=1.0, horizon=20.0, piece=0.25):
    """``kappa(t) = exp(i omega t)`` sampled at piece midpoints."""
    k = max(1, int(round(horizon / piece)))
    bp = np.linspace(0.0, horizon, k + 1)
    mids = 0.5 * (bp[1:] + bp[:-1])
    return DrivingControl(tuple(bp), tuple(ControlValue1.single(omega * t) for t in mids))


def random_control(rng, pieces=3, horizon=3.0, max_atoms=3):
    """Random breakpoints, 1..max_atoms atoms per piece, Dirichlet weights."""
    rng = np.random.default_rng(rng)
    inner = np.sort(rng.uniform(0.0, horizon, pieces - 1))
    bp = np.concatenate([[0.0], inner, [horizon]])
    values = []
    for _ in range(pieces):
        na = int(rng.integers(1, max_atoms + 1))
        th = rng.uniform(0.0, 2 * math.pi, na)
        w = rng.dirichlet(np.ones(na))
        w[-1] = 1.0 - w[:-1].sum()
        values.append(ControlValue1(tuple(BoundaryAtom(float(a), float(b)) for a, b in zip(th, w))))
    return DrivingControl(tuple(bp), tuple(values))


def random_poly_terms(rng, degree=2, scale=1.0):
    rng = np.random.default_rng(rng)
    terms = {}
    for d in range(2, degree + 1):
        for j in range(d + 1):
            terms[(d - j, j)] = scale * (rng.normal(size=2) + 1j * rng.normal(size=2)) / math.sqrt(2)
    return terms


def random_poly_control(rng, pieces=2, horizon=2.0, degree=2, scale=1.0, grid=None):
    """Piecewise polynomial ball control, each piece projected onto the validated family."""
    rng = np.random.default_rng(rng)
    bp = np.linspace(0.0, horizon, pieces + 1)
    values = tuple(
        project_to_un(random_poly_terms(rng, degree, scale), grid)[0] for _ in range(pieces)
    )
    return DrivingControl(tuple(bp), values)


def builtin_control(name):
    """Named canonical controls.

    * ``koebe`` -- constant ``kappa = -1`` on ``[0, 20]``.
    * ``koebe-rotated:THETA`` -- constant atom at angle ``pi - THETA``; its
      limit map is ``z/(1 - e^{i THETA} z)^2``.
    * ``rotating:OMEGA`` -- ``kappa(t) = e^{i OMEGA t}``, pieces of length 1/4, ``T = 20``.
    * ``random:SEED`` -- :func:`random_control` with the given seed.
    """
    head, _, arg = name.partition(":")
    try:
        if head == "koebe" and not arg:
            return koebe_control()
        if head == "koebe-rotated":
            return constant_control(math.pi - float(arg), 20.0)
        if head == "rotating":
            return rotating_control(float(arg) if arg else 1.0)
        if head == "random":
            return random_control(int(arg))
    except ValueError as exc:
        raise ValidationError(f"bad argument in control name {name!r}: {exc}") from None
    raise ValidationError(f"unknown builtin control {name!r}")
