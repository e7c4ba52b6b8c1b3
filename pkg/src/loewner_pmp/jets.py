"""Truncated power-series ("jet") algebra.

Three value types are provided:

* :class:`Jet` -- univariate Taylor jet ``c_0 + c_1 z + ... + c_D z^D``.
* :class:`LaurentJet` -- ``z^{-m}`` times a Taylor jet, used for the
  reciprocal of maps vanishing at the origin.
* :class:`JetN` -- vector-valued Taylor jet in two complex variables,
  truncated at total degree ``D``.

All values are immutable.  Arithmetic never grows the truncation order:
a result is only carried to the order up to which it is exact.

The module also exposes the batched array kernels (``series_mul``,
``series_compose``, ...) on which the classes are built.  They operate on
the trailing axis and broadcast over any leading axes, which is what the
integrators use to transport many jets at once.
"""

from __future__ import annotations

import functools
import numbers

import numpy as np

from .errors import CompositionDomainError, OrderError, SingularJetError, ValidationError

__all__ = [
    "Jet",
    "LaurentJet",
    "JetN",
    "add",
    "mul",
    "reciprocal",
    "compose",
    "derivative",
    "power",
    "jetn_compose",
    "series_mul",
    "series_compose",
    "series_reciprocal",
    "koebe_jet",
]


# --------------------------------------------------------------------------
# univariate kernels (trailing axis = coefficient index)
# --------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _toeplitz_index(n):
    d = np.arange(n)[None, :] - np.arange(n)[:, None]
    return np.clip(d, 0, None), d >= 0


def _mul_matrix(b):
    """Upper-triangular Toeplitz matrix ``M`` with ``a @ M == a * b`` (truncated)."""
    idx, mask = _toeplitz_index(b.shape[-1])
    return b[..., idx] * mask


def _apply(a, m):
    if a.ndim == 1 and m.ndim == 2:
        return a @ m
    return np.matmul(a[..., None, :], m)[..., 0, :]


def series_mul(a, b):
    """Cauchy product of coefficient arrays truncated to the shorter length."""
    a = np.asarray(a)
    b = np.asarray(b)
    n = min(a.shape[-1], b.shape[-1])
    a = a[..., :n]
    b = b[..., :n]
    if a.ndim == 1 and b.ndim == 1:
        return np.convolve(a, b)[:n].astype(complex)
    return _apply(a.astype(complex), _mul_matrix(b.astype(complex)))


def series_compose(outer, inner):
    """Coefficients of ``outer(inner(z))``; ``inner`` must vanish at 0.

    Horner's scheme in the truncated ring.  The result has the length of
    ``inner``; coefficients of ``outer`` beyond that length cannot
    contribute and are ignored.
    """
    outer = np.asarray(outer)
    inner = np.asarray(inner, dtype=complex)
    n = inner.shape[-1]
    outer = outer[..., :n]
    m = _mul_matrix(inner)
    shape = np.broadcast_shapes(outer.shape[:-1], inner.shape[:-1]) + (n,)
    res = np.zeros(shape, dtype=complex)
    res[..., 0] = outer[..., -1]
    for k in range(outer.shape[-1] - 2, -1, -1):
        res = _apply(res, m)
        res[..., 0] += outer[..., k]
    return res


def series_reciprocal(a):
    """Coefficients of ``1/a`` for a series with nonzero constant term."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[-1]
    out = np.zeros_like(a)
    inv0 = 1.0 / a[..., 0]
    out[..., 0] = inv0
    for k in range(1, n):
        acc = np.sum(a[..., 1:k + 1] * out[..., k - 1::-1][..., :k], axis=-1)
        out[..., k] = -acc * inv0
    return out


def _frozen(arr):
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


# --------------------------------------------------------------------------
# univariate Taylor jets
# --------------------------------------------------------------------------

class Jet:
    """Univariate truncated Taylor series of order ``D`` (``D+1`` coefficients)."""

    __slots__ = ("_c",)
    __array_priority__ = 100

    def __init__(self, coeffs):
        c = _frozen(coeffs)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("Jet coefficients must be a nonempty 1-d sequence")
        self._c = c

    # construction helpers
    @classmethod
    def identity(cls, order):
        c = np.zeros(order + 1, dtype=complex)
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def constant(cls, value, order):
        c = np.zeros(order + 1, dtype=complex)
        c[0] = value
        return cls(c)

    @classmethod
    def monomial(cls, k, order, coeff=1.0):
        c = np.zeros(order + 1, dtype=complex)
        if k <= order:
            c[k] = coeff
        return cls(c)

    @property
    def coeffs(self):
        return self._c

    @property
    def order(self):
        return self._c.size - 1

    def coeff(self, k):
        if k < 0:
            return 0j
        if k > self.order:
            raise OrderError(f"coefficient z^{k} requested from a jet of order {self.order}")
        return complex(self._c[k])

    def valuation(self):
        """Index of the lowest nonzero coefficient, or ``None`` for the zero jet."""
        nz = np.flatnonzero(self._c)
        return int(nz[0]) if nz.size else None

    def truncate(self, order):
        if order > self.order:
            raise OrderError(f"cannot raise jet order {self.order} to {order}")
        return Jet(self._c[: order + 1])

    def __repr__(self):
        return f"Jet(order={self.order}, coeffs={np.array2string(self._c, precision=6)})"

    def __len__(self):
        return self._c.size

    # arithmetic
    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        if isinstance(other, numbers.Number):
            return Jet.constant(other, self.order)
        return NotImplemented

    def __add__(self, other):
        if isinstance(other, LaurentJet):
            return LaurentJet.from_jet(self) + other
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        n = min(self.order, other.order) + 1
        return Jet(self._c[:n] + other._c[:n])

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self._c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, numbers.Number):
            return Jet(self._c * other)
        if isinstance(other, LaurentJet):
            return LaurentJet.from_jet(self) * other
        if isinstance(other, Jet):
            return Jet(series_mul(self._c, other._c))
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, numbers.Number):
            return Jet(self._c * other)
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, numbers.Number):
            return Jet(self._c / other)
        return self * reciprocal(other)

    def __pow__(self, k):
        return power(self, k)

    def __call__(self, z):
        """Evaluate the truncated polynomial at ``z`` (scalar or array)."""
        return np.polynomial.polynomial.polyval(z, self._c)

    def derivative(self):
        return derivative(self)

    def compose(self, inner):
        return compose(self, inner)

    def reciprocal(self):
        return reciprocal(self)

    def allclose(self, other, atol=1e-12):
        other = other if isinstance(other, Jet) else Jet(other)
        n = min(self.order, other.order) + 1
        return bool(np.allclose(self._c[:n], other._c[:n], rtol=0.0, atol=atol))


# --------------------------------------------------------------------------
# Laurent jets
# --------------------------------------------------------------------------

class LaurentJet:
    """``z^{-m}`` times a truncated Taylor series.

    ``coeffs[i]`` is the coefficient of ``z^{i-m}``.  The highest exact
    exponent is ``top = len(coeffs) - 1 - m``.  A pole order of zero makes
    the value an ordinary :class:`Jet` (see :meth:`to_jet`).
    """

    __slots__ = ("_c", "_m")
    __array_priority__ = 100

    def __init__(self, pole_order, coeffs):
        if pole_order < 0:
            raise ValueError("pole order must be non-negative")
        c = _frozen(coeffs)
        if c.ndim != 1:
            raise ValueError("LaurentJet coefficients must be 1-d")
        self._c = c
        self._m = int(pole_order)

    @classmethod
    def from_jet(cls, jet):
        return cls(0, jet.coeffs)

    @property
    def pole_order(self):
        return self._m

    @property
    def coeffs(self):
        return self._c

    @property
    def top(self):
        return self._c.size - 1 - self._m

    def coeff(self, e):
        """Coefficient of ``z^e``."""
        if e > self.top:
            raise OrderError(f"exponent {e} exceeds truncation order {self.top}")
        if e < -self._m:
            return 0j
        return complex(self._c[e + self._m])

    def _val(self):
        # lowest exponent with a nonzero (exact) coefficient
        nz = np.flatnonzero(self._c)
        return int(nz[0]) - self._m if nz.size else self.top + 1

    def window(self, lo, hi):
        """Coefficients of exponents ``lo..hi`` inclusive."""
        return np.array([self.coeff(e) for e in range(lo, hi + 1)])

    def to_jet(self):
        """Taylor part; allowed when every negative-exponent coefficient is zero."""
        if np.any(self._c[: self._m] != 0):
            raise ValidationError("Laurent jet with a pole cannot be converted to a Taylor jet")
        if self.top < 0:
            raise OrderError("no Taylor coefficients are known")
        return Jet(self._c[self._m:])

    def __repr__(self):
        return f"LaurentJet(pole_order={self._m}, top={self.top}, coeffs={np.array2string(self._c, precision=6)})"

    def _coerce(self, other):
        if isinstance(other, LaurentJet):
            return other
        if isinstance(other, Jet):
            return LaurentJet.from_jet(other)
        if isinstance(other, numbers.Number):
            c = np.zeros(max(self.top, 0) + 1, dtype=complex)
            c[0] = other
            return LaurentJet(0, c)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        m = max(self._m, other._m)
        top = min(self.top, other.top)
        out = np.zeros(m + top + 1, dtype=complex)
        for x in (self, other):
            seg = x._c[: x._m + top + 1]
            out[m - x._m: m - x._m + seg.size] += seg
        return LaurentJet(m, out)

    __radd__ = __add__

    def __neg__(self):
        return LaurentJet(self._m, -self._c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, numbers.Number):
            return LaurentJet(self._m, self._c * other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        m = self._m + other._m
        top = min(self.top + other._val(), other.top + self._val())
        length = m + top + 1
        if length <= 0:
            raise OrderError("product has no exact coefficients left")
        a = np.zeros(length, dtype=complex)
        b = np.zeros(length, dtype=complex)
        a[: min(length, self._c.size)] = self._c[:length]
        b[: min(length, other._c.size)] = other._c[:length]
        return LaurentJet(m, series_mul(a, b))

    __rmul__ = __mul__

    def __pow__(self, k):
        return power(self, k)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return np.polynomial.polynomial.polyval(z, self._c) * z ** (-self._m)

    def reciprocal(self):
        return reciprocal(self)

    def allclose(self, other, atol=1e-12):
        other = self._coerce(other)
        lo = -max(self._m, other._m)
        hi = min(self.top, other.top)
        return bool(np.allclose(self.window(lo, hi), other.window(lo, hi), rtol=0.0, atol=atol))


# --------------------------------------------------------------------------
# functional forms of the univariate operations
# --------------------------------------------------------------------------

def add(a, b):
    return a + b


def mul(a, b):
    return a * b


def reciprocal(a):
    """``1/a`` as a :class:`LaurentJet`.

    The pole order of the result equals the index of the lowest nonzero
    coefficient of ``a`` (net of any pole ``a`` already carries).
    """
    if isinstance(a, Jet):
        a = LaurentJet.from_jet(a)
    c = a.coeffs
    nz = np.flatnonzero(c)
    if nz.size == 0:
        raise SingularJetError("reciprocal of a jet with no nonzero coefficient")
    v = int(nz[0])
    g = series_reciprocal(c[v:])
    shift = v - a.pole_order
    if shift >= 0:
        return LaurentJet(shift, g)
    return LaurentJet(0, np.concatenate([np.zeros(-shift, dtype=complex), g]))


def compose(outer, inner):
    """Taylor coefficients of ``outer(inner(z))`` truncated to ``inner.order``."""
    if inner.coeffs[0] != 0:
        raise CompositionDomainError(
            "inner jet must vanish at the origin (nonzero constant term)"
        )
    n = min(outer.order, inner.order) + 1
    return Jet(series_compose(outer.coeffs[:n], inner.coeffs[:n]))


def derivative(a):
    """Termwise derivative; the result has order one less (minimum 0)."""
    c = a.coeffs
    if c.size == 1:
        return Jet([0.0])
    return Jet(c[1:] * np.arange(1, c.size))


def power(a, k):
    if not isinstance(k, numbers.Integral) or k < 1:
        raise ValidationError("power expects a positive integer exponent")
    result = a
    base = a
    k -= 1
    while k:
        if k & 1:
            result = result * base
        k >>= 1
        if k:
            base = base * base
    return result


def koebe_jet(order, alpha=1.0):
    """Jet of the Koebe function ``z/(1 - alpha z)^2``: coefficients ``k alpha^{k-1}``."""
    k = np.arange(order + 1)
    c = np.zeros(order + 1, dtype=complex)
    c[1:] = k[1:] * np.power(complex(alpha), k[1:] - 1)
    return Jet(c)


# --------------------------------------------------------------------------
# bivariate jets
# --------------------------------------------------------------------------

class _Basis:
    """Monomials ``z1^i z2^j`` with ``i + j <= order``, sorted by total degree.

    Sorting by degree makes truncation to a lower order a prefix slice.
    """

    def __init__(self, order):
        self.order = order
        self.alphas = [(d - j, j) for d in range(order + 1) for j in range(d + 1)]
        self.size = len(self.alphas)
        self.index = {a: i for i, a in enumerate(self.alphas)}
        self.degree = np.array([i + j for i, j in self.alphas])
        pairs = [
            (p, q, self.index[(a[0] + b[0], a[1] + b[1])])
            for p, a in enumerate(self.alphas)
            for q, b in enumerate(self.alphas)
            if a[0] + b[0] + a[1] + b[1] <= order
        ]
        self.pidx = np.array([p for p, _, _ in pairs])
        self.qidx = np.array([q for _, q, _ in pairs])
        scatter = np.zeros((len(pairs), self.size))
        scatter[np.arange(len(pairs)), [k for _, _, k in pairs]] = 1.0
        self.scatter = scatter
        # d/dz1 and d/dz2 as (source index, target index in order-1 basis, factor)
        self.grad = []
        for var in (0, 1):
            src, dst, fac = [], [], []
            for p, a in enumerate(self.alphas):
                if a[var] > 0:
                    b = list(a)
                    b[var] -= 1
                    src.append(p)
                    dst.append(_index(order - 1)[tuple(b)])
                    fac.append(a[var])
            self.grad.append((np.array(src, dtype=int), np.array(dst, dtype=int), np.array(fac, dtype=float)))

    def mul(self, a, b):
        return (a[..., self.pidx] * b[..., self.qidx]) @ self.scatter


def _size(order):
    return (order + 1) * (order + 2) // 2 if order >= 0 else 0


@functools.lru_cache(maxsize=None)
def _index(order):
    return {(d - j, j): k for k, (d, j) in enumerate((d, j) for d in range(order + 1) for j in range(d + 1))}


@functools.lru_cache(maxsize=None)
def basis(order):
    return _Basis(order)


def bmul(a, b, order):
    """Truncated product of bivariate coefficient arrays of the given order."""
    m = _size(order)
    return basis(order).mul(np.asarray(a)[..., :m], np.asarray(b)[..., :m])


def bcompose(field, point, order):
    """Evaluate a polynomial map at a jet.

    ``field`` has shape ``(n_out, M_f)`` in the basis of some order; ``point``
    has shape ``(..., 2, M)`` in the basis of ``order`` with zero constant
    terms.  Returns ``(..., n_out, M)``.
    """
    bas = basis(order)
    field = np.asarray(field)
    point = np.asarray(point)
    nf = field.shape[-1]
    alphas = bas.alphas[:nf]
    out_shape = np.broadcast_shapes(point.shape[:-2], field.shape[:-2]) + (field.shape[-2], bas.size)
    out = np.zeros(out_shape, dtype=complex)
    powers = {}
    one = np.zeros(point.shape[:-2] + (bas.size,), dtype=complex)
    one[..., 0] = 1.0
    powers[(0, 0)] = one
    used = np.flatnonzero(np.any(field != 0, axis=tuple(range(field.ndim - 1))))
    maxdeg = max((sum(alphas[k]) for k in used), default=0)
    for k, (i, j) in enumerate(alphas):
        if i + j > maxdeg:
            break
        if (i, j) not in powers:
            if i > 0:
                powers[(i, j)] = bas.mul(powers[(i - 1, j)], point[..., 0, :])
            else:
                powers[(i, j)] = bas.mul(powers[(i, j - 1)], point[..., 1, :])
        coef = field[..., :, k]
        if np.any(coef):
            out += coef[..., :, None] * powers[(i, j)][..., None, :]
    return out


class JetN:
    """Vector-valued Taylor jet in two complex variables.

    ``coeffs`` has shape ``(n, M)``: one row per output component, one
    column per multi-index of total degree at most ``order`` (degree-sorted).
    Scalar bivariate jets are represented with ``n == 1``.
    """

    __slots__ = ("_c", "_order")
    __array_priority__ = 100
    nvars = 2

    def __init__(self, coeffs, order):
        c = _frozen(coeffs)
        if c.ndim == 1:
            c = _frozen(c[None, :])
        if c.shape[-1] != _size(order):
            raise ValueError(f"expected {_size(order)} coefficients per component for order {order}")
        self._c = c
        self._order = int(order)

    @classmethod
    def from_terms(cls, terms, order, n=2):
        """Build from ``{alpha: vector}``; terms with ``|alpha| > order`` are dropped."""
        c = np.zeros((n, _size(order)), dtype=complex)
        idx = _index(order)
        for alpha, vec in terms.items():
            alpha = tuple(int(x) for x in alpha)
            if sum(alpha) > order:
                continue
            c[:, idx[alpha]] += np.broadcast_to(np.asarray(vec, dtype=complex), (n,))
        return cls(c, order)

    @classmethod
    def identity(cls, order):
        return cls.from_terms({(1, 0): [1, 0], (0, 1): [0, 1]}, order)

    @property
    def coeffs(self):
        return self._c

    @property
    def order(self):
        return self._order

    @property
    def n(self):
        return self._c.shape[0]

    @property
    def terms(self):
        return {a: self._c[:, k].copy() for k, a in enumerate(basis(self._order).alphas) if np.any(self._c[:, k])}

    def coeff(self, alpha, component=0):
        alpha = tuple(alpha)
        if sum(alpha) > self._order:
            raise OrderError(f"multi-index {alpha} exceeds jet order {self._order}")
        return complex(self._c[component, _index(self._order)[alpha]])

    def component(self, c):
        return JetN(self._c[c:c + 1], self._order)

    def truncate(self, order):
        if order > self._order:
            raise OrderError(f"cannot raise jet order {self._order} to {order}")
        return JetN(self._c[:, : _size(order)], order)

    def degree_part(self, d):
        mask = basis(self._order).degree == d
        return self._c[:, mask]

    def __repr__(self):
        return f"JetN(n={self.n}, order={self._order}, terms={len(self.terms)})"

    def _align(self, other):
        order = min(self._order, other._order)
        m = _size(order)
        return self._c[:, :m], other._c[:, :m], order

    def __add__(self, other):
        if not isinstance(other, JetN):
            return NotImplemented
        a, b, order = self._align(other)
        return JetN(a + b, order)

    def __neg__(self):
        return JetN(-self._c, self._order)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, numbers.Number):
            return JetN(self._c * other, self._order)
        if isinstance(other, JetN):
            a, b, order = self._align(other)
            return JetN(bmul(a, b, order), order)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, numbers.Number):
            return JetN(self._c * other, self._order)
        return NotImplemented

    def __call__(self, z):
        """Evaluate at a point ``z = (z1, z2)``; returns a length-``n`` vector."""
        z1, z2 = complex(z[0]), complex(z[1])
        mono = np.array([z1 ** i * z2 ** j for i, j in basis(self._order).alphas])
        return self._c @ mono

    def derivative(self, var):
        """Partial derivative with respect to ``z1`` (var=0) or ``z2`` (var=1)."""
        if self._order == 0:
            return JetN(np.zeros((self.n, 1)), 0)
        src, dst, fac = basis(self._order).grad[var]
        out = np.zeros((self.n, _size(self._order - 1)), dtype=complex)
        out[:, dst] = self._c[:, src] * fac
        return JetN(out, self._order - 1)

    def compose(self, point):
        return jetn_compose(self, point)

    def allclose(self, other, atol=1e-12):
        a, b, _ = self._align(other)
        return bool(np.allclose(a, b, rtol=0.0, atol=atol))


def jetn_compose(field, point_jet):
    """``field(point_jet)`` truncated at the point jet's order."""
    if np.any(point_jet.coeffs[:, 0] != 0):
        raise CompositionDomainError("point jet must vanish at the origin in every component")
    if point_jet.n != 2:
        raise ValueError("point jet must have two components")
    order = point_jet.order
    fc = field.coeffs[:, : min(field.coeffs.shape[1], _size(order))]
    return JetN(bcompose(fc, point_jet.coeffs, order), order)
