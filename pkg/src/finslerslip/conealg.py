"""The cone of nonnegative bounded smooth semi-Lipschitz functions and its span.

Norms are grid estimates: ``sup_norm`` is the largest sampled ``|f|`` and
``slip_norm`` the largest sampled ``||df(x)|_F``. Both are lower bounds of
the true suprema, and every inequality check below compares estimates taken
on the same grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._util import as_points
from .errors import ChartMismatchError, MalformedInputError, NotInConeError, PreconditionError
from .fields import (ConstantField, ProductField, ReciprocalField, ScalarField, SumField,
                     TabulatedField, TruncatedDistanceField)
from .finsler import FinslerChart, finsler_distance, oracle_distances
from .semilip import DIVERGENCE_CAP, smooth_approximate_1d, sup_derivative_norm

SIGN_TOL = 1e-12
# sub-multiplicative constant of the cone product
PRODUCT_CONSTANT = 2.0


@dataclass(eq=False)
class ConeElement:
    field: ScalarField
    chart: FinslerChart
    grid: np.ndarray
    sup_norm: float
    slip_norm: float

    @property
    def hemi_norm(self) -> float:
        return max(self.sup_norm, self.slip_norm)

    nonneg_certified = True

    def values(self, X=None):
        return self.field.values(self.grid if X is None else as_points(X, self.chart.dim))

    def __call__(self, x):
        return self.field(x)

    def to_json(self):
        return {"field": self.field.spec(), "sup_norm": self.sup_norm, "slip_norm": self.slip_norm,
                "hemi_norm": self.hemi_norm, "nonneg_certified": True}


def _grid(chart, grid):
    G = chart.grid_points() if grid is None else as_points(grid, chart.dim)
    chart.require_inside(G, "grid point")
    return G


def cone_certify(f: ScalarField, chart: FinslerChart, grid=None, cap: float = DIVERGENCE_CAP) -> ConeElement:
    """Certify ``f`` on a grid or raise :class:`NotInConeError` listing every failed clause.

    Clauses: ``sign`` (``f >= -1e-12``), ``bounded`` (grid sup below ``cap``),
    ``slip`` (derivative-norm profile does not diverge) and ``smooth`` (the
    field family is C1).
    """
    G = _grid(chart, grid)
    v = f.values(G)
    clauses, witness = [], None

    def fail(name, x):
        nonlocal witness
        clauses.append(name)
        if witness is None:
            witness = float(x[0]) if chart.dim == 1 else x.tolist()

    if not f.is_c1:
        fail("smooth", G[0])
    if not np.isfinite(v).all():
        fail("bounded", G[int(np.argmax(~np.isfinite(v)))])
    if np.nanmin(v) < -SIGN_TOL:
        fail("sign", G[int(np.nanargmin(v))])
    sup = float(np.nanmax(np.abs(v)))
    if sup > cap and "bounded" not in clauses:
        fail("bounded", G[int(np.nanargmax(np.abs(v)))])
    prof = sup_derivative_norm(chart, f, G, cap)
    if prof.diverges:
        fail("slip", np.atleast_1d(np.asarray(prof.argmax, dtype=float)))
    if clauses:
        raise NotInConeError(clauses, witness)
    return ConeElement(f, chart, G, sup, prof.supremum)


def _same_chart(a: ConeElement, b: ConeElement):
    if a.chart is not b.chart or a.grid.shape != b.grid.shape or not np.array_equal(a.grid, b.grid):
        raise ChartMismatchError("cone elements live on different charts or grids")


def cone_sum(a: ConeElement, b: ConeElement) -> ConeElement:
    _same_chart(a, b)
    return cone_certify(SumField([a.field, b.field]), a.chart, a.grid)


def cone_scale(a: ConeElement, lam: float) -> ConeElement:
    if lam < 0:
        raise MalformedInputError("the cone is closed under nonnegative scaling only")
    return cone_certify(SumField([a.field], [lam]), a.chart, a.grid)


@dataclass
class ProductResult:
    element: ConeElement
    bound: float

    @property
    def holds(self) -> bool:
        return self.element.hemi_norm <= self.bound + 1e-9

    def to_json(self):
        return {"hemi_norm": self.element.hemi_norm, "bound": self.bound, "holds": self.holds}


def cone_product(a: ConeElement, b: ConeElement, with_bound: bool = False):
    """Pointwise product with its derivative from the product rule.

    With ``with_bound`` the result carries ``2 hemi(a) hemi(b)`` for comparison.
    """
    _same_chart(a, b)
    prod = cone_certify(ProductField(a.field, b.field), a.chart, a.grid)
    if with_bound:
        return ProductResult(prod, PRODUCT_CONSTANT * a.hemi_norm * b.hemi_norm)
    return prod


# ------------------------------------------------------------- the span


@dataclass(eq=False)
class SpanElement:
    """A formal difference ``pos - neg`` of cone elements on one chart and grid."""

    pos: ConeElement
    neg: ConeElement

    def __post_init__(self):
        _same_chart(self.pos, self.neg)

    @property
    def chart(self):
        return self.pos.chart

    @property
    def grid(self):
        return self.pos.grid

    @property
    def field(self) -> ScalarField:
        return SumField([self.pos.field, self.neg.field], [1.0, -1.0])

    def values(self, X=None):
        return self.pos.values(X) - self.neg.values(X)

    def __call__(self, x):
        return self.field(x)

    def __add__(self, other):
        return SpanElement(cone_sum(self.pos, other.pos), cone_sum(self.neg, other.neg))

    def __neg__(self):
        return SpanElement(self.neg, self.pos)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, lam: float):
        if lam >= 0:
            return SpanElement(cone_scale(self.pos, lam), cone_scale(self.neg, lam))
        return SpanElement(cone_scale(self.neg, -lam), cone_scale(self.pos, -lam))

    def __mul__(self, other):
        if isinstance(other, SpanElement):
            p = cone_sum(cone_product(self.pos, other.pos), cone_product(self.neg, other.neg))
            n = cone_sum(cone_product(self.pos, other.neg), cone_product(self.neg, other.pos))
            return SpanElement(p, n)
        return self.scale(float(other))

    __rmul__ = __mul__

    def equals(self, other, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.values(), other.values(self.grid), rtol=0, atol=atol))

    def to_json(self):
        return {"pos": self.pos.to_json(), "neg": self.neg.to_json(), "extended_norm": extended_norm(self)}


def zero_element(chart: FinslerChart, grid=None) -> ConeElement:
    return cone_certify(ConstantField(0.0, chart.dim), chart, grid)


def span(f: ConeElement, g: ConeElement | None = None) -> SpanElement:
    """``f - g`` (``g`` defaults to zero)."""
    return SpanElement(f, zero_element(f.chart, f.grid) if g is None else g)


def extended_norm(s: SpanElement) -> float:
    """Hemi-norm of ``pos - neg`` if the difference certifies as a cone element, else ``inf``."""
    try:
        return cone_certify(s.field, s.chart, s.grid).hemi_norm
    except NotInConeError:
        return math.inf


@dataclass
class InversionResult:
    """``1 / a`` written as ``1 - (1 - 1/a)`` with both parts in the cone."""

    inverse: SpanElement
    sup_norm: float
    neg_slip_norm: float

    def to_json(self):
        return {"sup_norm": self.sup_norm, "neg_slip_norm": self.neg_slip_norm,
                "extended_norm": extended_norm(self.inverse)}


def bounded_inversion(a: ConeElement) -> InversionResult:
    """Invert an element bounded below by one.

    ``1/a`` is bounded by one with derivative ``-da / a^2``; its negative has
    slip norm at most ``slip(a)``, so ``1 - 1/a`` is a cone element and
    ``1/a`` lies in the span.
    """
    v = a.values()
    if v.min() < 1.0:
        k = int(np.argmin(v))
        raise PreconditionError(f"grid minimum {v.min():.6g} < 1 at {a.grid[k].tolist()}")
    one = cone_certify(ConstantField(1.0, a.chart.dim), a.chart, a.grid)
    rest = cone_certify(SumField([ConstantField(1.0, a.chart.dim), ReciprocalField(a.field)], [1.0, -1.0]),
                        a.chart, a.grid)
    inv = SpanElement(one, rest)
    sup = float(np.max(np.abs(inv.values())))
    return InversionResult(inv, sup, rest.slip_norm)


# -------------------------------------------------------------- functionals


@dataclass
class Functional:
    """A finite combination ``sum c_i delta_{x_i}`` of evaluations."""

    atoms: list = field(default_factory=list)

    def __add__(self, other):
        return Functional(self.atoms + other.atoms)

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def scale(self, c: float):
        return Functional([(x, c * w) for x, w in self.atoms])

    def __call__(self, s):
        return functional_apply(self, s)

    def to_json(self):
        return {"atoms": [[_plain(x), c] for x, c in self.atoms]}


def _plain(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 or x.size == 1 else x.tolist()


def eval_functional(x, chart: FinslerChart | None = None) -> Functional:
    if chart is not None:
        chart.require_inside(as_points(x, chart.dim))
    return Functional([(x, 1.0)])


def functional_apply(phi: Functional, s) -> float:
    """``sum c_i s(x_i)`` for a span element, cone element or scalar field."""
    if not phi.atoms:
        return 0.0
    dim = s.chart.dim if hasattr(s, "chart") else s.dim
    X = np.vstack([as_points(x, dim) for x, _ in phi.atoms])
    c = np.array([w for _, w in phi.atoms])
    vals = s.values(X) if hasattr(s, "values") else s(X)
    return float(c @ vals)


# ------------------------------------------------------------ dual norm bracket


@dataclass
class Bracket:
    lower: float
    upper: float
    best: object = None
    dictionary_size: int = 0

    def to_json(self):
        return {"lower": self.lower, "upper": self.upper, "dictionary_size": self.dictionary_size}


def _unit_element(f: ScalarField, chart, grid):
    e = cone_certify(f, chart, grid)
    h = e.hemi_norm
    if h <= 0:
        return None
    return cone_certify(SumField([f], [1.0 / h]), chart, grid)


def _unit_reach_1d(chart, c):
    """Interval around ``c`` outside of which ``d(c, .) >= 1`` (clipped to the box)."""
    lo_box, hi_box = chart.box[0]

    def d(u):
        return float(oracle_distances(chart, np.array([c]), np.array([u]))[0])

    ends = []
    for end in (lo_box, hi_box):
        if d(end) <= 1.0:
            ends.append(end)
            continue
        a, b = c, end
        for _ in range(80):
            m = 0.5 * (a + b)
            a, b = (m, b) if d(m) < 1.0 else (a, m)
        ends.append(b)
    return ends[0], ends[1]


def truncated_distance_dictionary(chart: FinslerChart, x, eps: float, n_perturbed: int = 8, grid=None):
    """Unit-norm cone elements approximating ``min(d(c, .), 1)`` for centres ``c`` near ``x``.

    On 1-D charts the truncated distance is tabulated and smoothed with
    ``epsilon = eps / 2`` and ``r = eps``, shifted up by ``eps / 2`` to stay
    nonnegative and divided by its hemi-norm. On constant-coefficient charts
    in higher dimension the closed-form smooth truncation is used instead.
    """
    X0 = as_points(x, chart.dim)[0]
    rng = np.random.default_rng(0)
    offsets = [np.zeros(chart.dim)]
    for k in range(n_perturbed):
        offsets.append(rng.normal(size=chart.dim) * eps * (k + 1))
    centres = [np.clip(X0 + o, chart.box[:, 0], chart.box[:, 1]) for o in offsets]
    G = _grid(chart, grid)
    out = []
    if chart.dim == 1:
        for c in centres:
            lo, hi = _unit_reach_1d(chart, c[0])
            lo, hi = max(lo - 4 * eps, chart.box[0, 0]), min(hi + 4 * eps, chart.box[0, 1])
            step = min(eps / 4.0, (hi - lo) / 2000.0)
            xs = np.linspace(lo, hi, int(math.ceil((hi - lo) / step)) + 1)
            d = oracle_distances(chart, np.full_like(xs, c[0]), xs)
            f = TabulatedField(xs, np.minimum(d, 1.0))
            g = smooth_approximate_1d(chart, f, eps / 2.0, eps)
            shifted = SumField([g, ConstantField(eps / 2.0)])
            e = _unit_element(shifted, chart, np.union1d(G[:, 0], [X0[0]])[:, None])
            if e is not None:
                out.append(e)
    else:
        if not chart.field.constant:
            raise MalformedInputError("truncated distance dictionaries need a 1-D or constant-coefficient chart")
        for c in centres:
            f = TruncatedDistanceField(chart.field, c, eps / 2.0, 2.0 * eps)
            e = _unit_element(f, chart, G)
            if e is not None:
                out.append(e)
    return out


def dual_norm_bracket(phi: Functional, chart: FinslerChart, eps: float = 1e-3, grid=None,
                      method: str = "auto") -> Bracket:
    """Bracket the dual norm of ``delta_y - delta_x``.

    ``upper`` is the computed distance ``d(x, y)``; ``lower`` is the largest
    value of the functional over a dictionary of unit-norm cone elements.
    """
    if len(phi.atoms) != 2 or sorted(c for _, c in phi.atoms) != [-1.0, 1.0]:
        raise MalformedInputError("the bracket is defined for delta_y - delta_x")
    x = next(p for p, c in phi.atoms if c < 0)
    y = next(p for p, c in phi.atoms if c > 0)
    X, Y = as_points(x, chart.dim), as_points(y, chart.dim)
    chart.require_inside(np.vstack([X, Y]))
    if np.array_equal(X, Y):
        return Bracket(0.0, 0.0, None, 0)
    upper = finsler_distance(chart, X[0], Y[0], method).value
    dictionary = truncated_distance_dictionary(chart, X[0], eps, grid=grid)
    vals = [functional_apply(phi, e) for e in dictionary]
    k = int(np.argmax(vals))
    lower = max(float(vals[k]), 0.0)
    return Bracket(lower, upper, dictionary[k], len(dictionary))
