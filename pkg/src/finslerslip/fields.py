"""Scalar fields on charts: registered families, composites and smoothing.

Every field evaluates on batches of shape ``(m, dim)`` and returns a
gradient of the same shape. Families with closed-form derivatives use them;
others fall back to central differences.
"""
from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import PchipInterpolator

from ._util import as_points, is_single
from .errors import MalformedInputError

FD_STEP = 1e-6
SELF_CHECK_RTOL = 1e-5


class ScalarField:
    family = "abstract"
    dim = 1
    is_c1 = True

    def values(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _grad(self, X: np.ndarray) -> np.ndarray | None:
        return None

    def grad(self, X: np.ndarray) -> np.ndarray:
        g = self._grad(X)
        return fd_grad(self, X) if g is None else g

    @property
    def has_analytic_grad(self) -> bool:
        return self._grad(np.zeros((1, self.dim))) is not None

    def __call__(self, x):
        out = self.values(as_points(x, self.dim))
        return float(out[0]) if is_single(x, self.dim) else out

    def derivative(self, x):
        """Gradient at ``x``; a scalar slope in 1-D."""
        g = self.grad(as_points(x, self.dim))
        if is_single(x, self.dim):
            return float(g[0, 0]) if self.dim == 1 else g[0]
        return g[:, 0] if self.dim == 1 else g

    def spec(self) -> dict:
        return {"family": self.family}

    def __add__(self, other):
        return SumField([self, _lift(other, self.dim)])

    __radd__ = __add__

    def __sub__(self, other):
        return SumField([self, _lift(other, self.dim)], [1.0, -1.0])

    def __rsub__(self, other):
        return SumField([_lift(other, self.dim), self], [1.0, -1.0])

    def __neg__(self):
        return ScaledField(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            return ProductField(self, other)
        return ScaledField(self, float(other))

    __rmul__ = __mul__


def _lift(obj, dim):
    return obj if isinstance(obj, ScalarField) else ConstantField(float(obj), dim)


def fd_grad(f: ScalarField, X: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central differences with step ``step * max(1, |x_i|)``."""
    X = np.asarray(X, dtype=float)
    g = np.empty_like(X)
    for i in range(X.shape[1]):
        h = step * np.maximum(1.0, np.abs(X[:, i]))
        Xp, Xm = X.copy(), X.copy()
        Xp[:, i] += h
        Xm[:, i] -= h
        g[:, i] = (f.values(Xp) - f.values(Xm)) / (Xp[:, i] - Xm[:, i])
    return g


def derivative_self_check(f: ScalarField, xs, rtol: float = SELF_CHECK_RTOL):
    """Compare the analytic gradient to central differences; returns ``(ok, worst_defect)``.

    The defect is ``|g - g_fd| / max(1, |g|)``, so it is relative for slopes
    above one and absolute below.
    """
    X = as_points(xs, f.dim)
    g = f.grad(X)
    fd = fd_grad(f, X)
    defect = np.max(np.abs(g - fd) / np.maximum(1.0, np.abs(g)))
    return bool(defect <= rtol), float(defect)


# ---------------------------------------------------------------- families


class ConstantField(ScalarField):
    family = "constant"

    def __init__(self, value: float, dim: int = 1):
        self.value, self.dim = float(value), int(dim)

    def values(self, X):
        return np.full(X.shape[0], self.value)

    def _grad(self, X):
        return np.zeros_like(X)

    def spec(self):
        return {"family": "constant", "params": {"value": self.value, "dim": self.dim}}


class AffineField(ScalarField):
    family = "affine"

    def __init__(self, w, b: float = 0.0):
        self.w = np.atleast_1d(np.asarray(w, dtype=float))
        self.b = float(b)
        self.dim = self.w.shape[0]

    def values(self, X):
        return X @ self.w + self.b

    def _grad(self, X):
        return np.broadcast_to(self.w, X.shape).copy()

    def spec(self):
        return {"family": "affine", "params": {"w": self.w.tolist(), "b": self.b}}


class ArctanRidge(ScalarField):
    """``offset + scale * arctan(w . x + b)``."""

    family = "arctan"

    def __init__(self, w=1.0, b: float = 0.0, scale: float = 1.0, offset: float = 0.0):
        self.w = np.atleast_1d(np.asarray(w, dtype=float))
        self.b, self.scale, self.offset = float(b), float(scale), float(offset)
        self.dim = self.w.shape[0]

    def values(self, X):
        return self.offset + self.scale * np.arctan(X @ self.w + self.b)

    def _grad(self, X):
        s = X @ self.w + self.b
        return (self.scale / (1.0 + s * s))[:, None] * self.w

    def spec(self):
        return {"family": "arctan", "params": {"w": self.w.tolist(), "b": self.b,
                                               "scale": self.scale, "offset": self.offset}}


class PhiField(ScalarField):
    """``sign * (x - arctan x)`` on the line; ``sign = -1`` is the neg-phi family."""

    family = "phi"
    dim = 1

    def __init__(self, sign: float = 1.0):
        self.sign = float(sign)

    def values(self, X):
        x = X[:, 0]
        return self.sign * (x - np.arctan(x))

    def _grad(self, X):
        x = X[:, 0]
        return (self.sign * x * x / (1.0 + x * x))[:, None]

    def spec(self):
        return {"family": "neg-phi" if self.sign < 0 else "phi", "params": {}}


class PolyClampedField(ScalarField):
    """``p(L tanh((w . x + b) / L))`` with ``p`` given by ascending coefficients.

    The tanh clamp keeps the argument in ``(-L, L)``, so the field and its
    derivative are bounded for any polynomial.
    """

    family = "polynomial-clamped"

    def __init__(self, coeffs, w=1.0, b: float = 0.0, L: float = 1.0):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.w = np.atleast_1d(np.asarray(w, dtype=float))
        self.b, self.L = float(b), float(L)
        if self.L <= 0:
            raise MalformedInputError("clamp half-width L must be positive")
        self.dim = self.w.shape[0]

    def values(self, X):
        s = self.L * np.tanh((X @ self.w + self.b) / self.L)
        return P.polyval(s, self.coeffs)

    def _grad(self, X):
        t = np.tanh((X @ self.w + self.b) / self.L)
        dp = P.polyval(self.L * t, P.polyder(self.coeffs)) if self.coeffs.size > 1 else 0.0 * t
        return (dp * (1.0 - t * t))[:, None] * self.w

    def spec(self):
        return {"family": "polynomial-clamped",
                "params": {"coeffs": self.coeffs.tolist(), "w": self.w.tolist(), "b": self.b, "L": self.L}}


class TabulatedField(ScalarField):
    """A 1-D table extended by constants outside its range.

    ``kind="linear"`` interpolates piecewise linearly (not C1 at interior
    nodes; the reported slope is the one of the segment to the right).
    ``kind="pchip"`` gives a C1 monotonicity-preserving cubic.
    """

    family = "tabulated"
    dim = 1

    def __init__(self, xs, ys, kind: str = "linear"):
        xs, ys = np.asarray(xs, dtype=float).ravel(), np.asarray(ys, dtype=float).ravel()
        if xs.shape != ys.shape or xs.size < 2:
            raise MalformedInputError("tabulated field needs matching xs, ys with at least 2 entries")
        if not np.all(np.diff(xs) > 0):
            raise MalformedInputError("tabulated xs must be strictly increasing")
        if kind not in ("linear", "pchip"):
            raise MalformedInputError(f"unknown interpolation kind {kind!r}")
        self.xs, self.ys, self.kind = xs, ys, kind
        self.is_c1 = kind == "pchip"
        self.slopes = np.diff(ys) / np.diff(xs)
        self._pchip = PchipInterpolator(xs, ys, extrapolate=False) if kind == "pchip" else None

    def values(self, X):
        x = X[:, 0]
        if self._pchip is None:
            return np.interp(x, self.xs, self.ys)
        out = self._pchip(np.clip(x, self.xs[0], self.xs[-1]))
        return out

    def _grad(self, X):
        x = X[:, 0]
        inside = (x >= self.xs[0]) & (x <= self.xs[-1])
        if self._pchip is None:
            k = np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, self.slopes.size - 1)
            g = np.where(inside & (x < self.xs[-1]), self.slopes[k], 0.0)
        else:
            g = np.where(inside, self._pchip(np.clip(x, self.xs[0], self.xs[-1]), 1), 0.0)
        return g[:, None]

    def spec(self):
        return {"family": "tabulated", "params": {"xs": self.xs.tolist(), "ys": self.ys.tolist(),
                                                  "kind": self.kind}}


# -------------------------------------------------------------- composites


class SumField(ScalarField):
    family = "sum"

    def __init__(self, terms, coefs=None):
        self.terms = list(terms)
        self.coefs = [1.0] * len(self.terms) if coefs is None else [float(c) for c in coefs]
        dims = {t.dim for t in self.terms}
        if len(dims) != 1:
            raise MalformedInputError("summands live in different dimensions")
        self.dim = dims.pop()
        self.is_c1 = all(t.is_c1 for t in self.terms)

    def values(self, X):
        return sum(c * t.values(X) for c, t in zip(self.coefs, self.terms))

    def grad(self, X):
        return sum(c * t.grad(X) for c, t in zip(self.coefs, self.terms))

    def _grad(self, X):
        return self.grad(X)

    def spec(self):
        return {"family": "sum", "params": {"terms": [{"coef": c, "field": t.spec()}
                                                      for c, t in zip(self.coefs, self.terms)]}}


class ScaledField(SumField):
    def __init__(self, base: ScalarField, factor: float):
        super().__init__([base], [factor])


class ProductField(ScalarField):
    family = "product"

    def __init__(self, a: ScalarField, b: ScalarField):
        if a.dim != b.dim:
            raise MalformedInputError("factors live in different dimensions")
        self.a, self.b, self.dim = a, b, a.dim
        self.is_c1 = a.is_c1 and b.is_c1

    def values(self, X):
        return self.a.values(X) * self.b.values(X)

    def grad(self, X):
        return self.a.values(X)[:, None] * self.b.grad(X) + self.b.values(X)[:, None] * self.a.grad(X)

    def _grad(self, X):
        return self.grad(X)

    def spec(self):
        return {"family": "product", "params": {"factors": [self.a.spec(), self.b.spec()]}}


class ReciprocalField(ScalarField):
    family = "reciprocal"

    def __init__(self, base: ScalarField):
        self.base, self.dim, self.is_c1 = base, base.dim, base.is_c1

    def values(self, X):
        return 1.0 / self.base.values(X)

    def grad(self, X):
        v = self.base.values(X)
        return -self.base.grad(X) / (v * v)[:, None]

    def _grad(self, X):
        return self.grad(X)

    def spec(self):
        return {"family": "reciprocal", "params": {"base": self.base.spec()}}


class ComposedField(ScalarField):
    """``f o h`` for a smooth map ``h`` with ``forward`` and ``jacobian``."""

    family = "composed"

    def __init__(self, f: ScalarField, h):
        if h.dim_out != f.dim:
            raise MalformedInputError("map codomain does not match field dimension")
        self.f, self.h, self.dim = f, h, h.dim_in
        self.is_c1 = f.is_c1

    def values(self, X):
        return self.f.values(self.h.forward(X))

    def grad(self, X):
        J = self.h.jacobian(X)
        return np.einsum("mji,mj->mi", J, self.f.grad(self.h.forward(X)))

    def _grad(self, X):
        return self.grad(X)

    def spec(self):
        return {"family": "composed", "params": {"field": self.f.spec(), "map": self.h.spec()}}


# ----------------------------------------------------------------- smoothing

# quartic kernel K(s) = 15/16 (1 - s^2)^2 on [-1, 1] and its first two moments
def _kernel_m0(s):
    return (15.0 / 16.0) * (s - 2.0 * s ** 3 / 3.0 + s ** 5 / 5.0)


def _kernel_m1(s):
    return (15.0 / 16.0) * (s ** 2 / 2.0 - s ** 4 / 2.0 + s ** 6 / 6.0)


class MollifiedField(ScalarField):
    """Exact convolution of a piecewise-linear table with the quartic kernel of half-width ``width``.

    The kernel is C1 with compact support, so the result is C1 (in fact C2)
    for any table. Values and slopes are computed segment by segment from
    closed-form kernel moments, not by quadrature.
    """

    family = "mollified"
    dim = 1

    def __init__(self, base: TabulatedField, width: float):
        if base.kind != "linear":
            raise MalformedInputError("mollification expects a piecewise-linear table")
        if width <= 0:
            raise MalformedInputError("mollifier width must be positive")
        self.base, self.width = base, float(width)
        xs, ys = base.xs, base.ys
        # constant pads so the table covers every kernel support that touches it
        self._t = np.concatenate([[xs[0] - 2 * width], xs, [xs[-1] + 2 * width]])
        self._y = np.concatenate([[ys[0]], ys, [ys[-1]]])
        self._b = np.diff(self._y) / np.diff(self._t)
        self._a = self._y[:-1] - self._b * self._t[:-1]

    def _segments(self, x):
        lo = np.searchsorted(self._t, x - self.width, side="right") - 1
        hi = np.searchsorted(self._t, x + self.width, side="left")
        return np.clip(lo, 0, self._b.size - 1), np.clip(hi, 1, self._b.size)

    def _convolve(self, x):
        x = np.clip(x, self._t[0] + self.width, self._t[-1] - self.width)
        w = self.width
        lo, hi = self._segments(x)
        val = np.zeros_like(x)
        der = np.zeros_like(x)
        span = int(np.max(hi - lo)) if x.size else 0
        for k in range(span):
            j = lo + k
            live = j < hi
            jj = np.where(live, j, 0)
            # segment [t_j, t_{j+1}] seen from x through t = x - w s
            s_hi = np.clip((x - self._t[jj]) / w, -1.0, 1.0)
            s_lo = np.clip((x - self._t[jj + 1]) / w, -1.0, 1.0)
            a, b = self._a[jj], self._b[jj]
            dm0 = _kernel_m0(s_hi) - _kernel_m0(s_lo)
            dm1 = _kernel_m1(s_hi) - _kernel_m1(s_lo)
            val += np.where(live, (a + b * x) * dm0 - b * w * dm1, 0.0)
            der += np.where(live, b * dm0, 0.0)
        return val, der

    def values(self, X):
        return self._convolve(X[:, 0])[0]

    def _grad(self, X):
        return self._convolve(X[:, 0])[1][:, None]

    def spec(self):
        return {"family": "mollified", "params": {"width": self.width, "base": self.base.spec()}}


def soft_truncation(t, a: float):
    """C1 nondecreasing approximation of ``min(t, 1)`` differing from it by at most ``a / 4``."""
    t = np.asarray(t, dtype=float)
    lo, hi = 1.0 - a, 1.0 + a
    mid = t - (t - lo) ** 2 / (4.0 * a)
    return np.where(t <= lo, t, np.where(t >= hi, 1.0, mid))


def soft_truncation_slope(t, a: float):
    t = np.asarray(t, dtype=float)
    lo, hi = 1.0 - a, 1.0 + a
    return np.where(t <= lo, 1.0, np.where(t >= hi, 0.0, 1.0 - (t - lo) / (2.0 * a)))


class TruncatedDistanceField(ScalarField):
    """Smooth stand-in for ``min(d(c, u), 1)`` on a constant-coefficient chart.

    ``d(c, u) = F(u - c)`` there. The kink at ``u = c`` is removed with
    ``sqrt(F^2 + delta^2) - delta`` and the truncation with
    :func:`soft_truncation`; the total error is at most ``delta + a / 4`` and
    the semi-Lipschitz constant stays at most one.
    """

    family = "truncated-distance"

    def __init__(self, norm_field, center, delta: float, a: float):
        if not norm_field.constant:
            raise MalformedInputError("truncated distance fields need a constant-coefficient norm")
        self.norm, self.dim = norm_field, norm_field.dim
        self.center = as_points(center, self.dim)[0]
        self.delta, self.a = float(delta), float(a)

    def _inner(self, X):
        V = X - self.center
        F = self.norm.evaluate(X, V)
        r = np.sqrt(F * F + self.delta ** 2)
        return V, F, r

    def values(self, X):
        _, F, r = self._inner(X)
        return soft_truncation(r - self.delta, self.a)

    def _grad(self, X):
        V, F, r = self._inner(X)
        dF = self.norm.grad_v(X, V)
        inner = (F / r)[:, None] * dF
        return soft_truncation_slope(r - self.delta, self.a)[:, None] * inner

    def spec(self):
        return {"family": "truncated-distance",
                "params": {"norm": self.norm.spec(), "center": self.center.tolist(),
                           "delta": self.delta, "a": self.a}}


# --------------------------------------------------------------------- specs


def field_from_spec(spec: dict, dim: int = 1) -> ScalarField:
    """Build a registered field from ``{"family": ..., "params": {...}}`` or ``{"xs", "ys"}``."""
    if "xs" in spec and "ys" in spec:
        return TabulatedField(spec["xs"], spec["ys"], spec.get("kind", "linear"))
    fam = spec.get("family")
    p = spec.get("params", {}) or {}
    try:
        if fam == "constant":
            return ConstantField(p.get("value", 0.0), p.get("dim", dim))
        if fam == "affine":
            return AffineField(p.get("w", [1.0] * dim), p.get("b", 0.0))
        if fam == "arctan":
            return ArctanRidge(p.get("w", [1.0] * dim), p.get("b", 0.0), p.get("scale", 1.0), p.get("offset", 0.0))
        if fam == "phi":
            return PhiField(1.0)
        if fam == "neg-phi":
            return PhiField(-1.0)
        if fam == "polynomial-clamped":
            return PolyClampedField(p["coeffs"], p.get("w", [1.0] * dim), p.get("b", 0.0), p.get("L", 1.0))
        if fam == "tabulated":
            return TabulatedField(p["xs"], p["ys"], p.get("kind", "linear"))
        if fam == "sum":
            terms = p["terms"]
            return SumField([field_from_spec(t["field"], dim) for t in terms], [t.get("coef", 1.0) for t in terms])
        if fam == "product":
            a, b = (field_from_spec(s, dim) for s in p["factors"])
            return ProductField(a, b)
    except KeyError as exc:
        raise MalformedInputError(f"field family {fam!r} is missing parameter {exc}") from None
    raise MalformedInputError(f"unknown field family {fam!r}")


def shifted_arctan() -> ArctanRidge:
    """``pi/2 + arctan``: nonnegative, bounded by ``pi``, slope at most one."""
    return ArctanRidge(1.0, 0.0, 1.0, math.pi / 2)
