"""Finite and analytic quasi-metric spaces.

Finite spaces are the ground truth: every check here is an exhaustive scan
over ordered pairs or triples of a distance matrix. Analytic families are
sampled into finite sub-spaces before any check runs.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DegenerateInputError, MalformedInputError

QUASI_METRIC = "quasi-metric"
QUASI_HEMI_METRIC = "quasi-hemi-metric"
MODES = (QUASI_METRIC, QUASI_HEMI_METRIC)

# relative defect below which floating-point samples of analytic families pass
ANALYTIC_TRIANGLE_TOL = 1e-9


def d_u(x: float, y: float) -> float:
    """The upper quasi-hemi-metric on the real line, ``max(y - x, 0)``."""
    return max(y - x, 0.0)


@dataclass(frozen=True)
class QuasiMetricSpace:
    """A finite point set with a row-major asymmetric distance matrix.

    ``dist[i, j]`` is the distance from ``points[i]`` to ``points[j]``.
    Entries may be ``+inf`` (extended spaces); they are never negative.
    """

    points: tuple
    dist: np.ndarray
    mode: str = QUASI_METRIC
    exact: bool = True

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise MalformedInputError(f"distance matrix must be square, got shape {d.shape}")
        if len(self.points) != d.shape[0]:
            raise MalformedInputError(
                f"{len(self.points)} point ids for a {d.shape[0]}x{d.shape[0]} matrix"
            )
        if len(set(self.points)) != len(self.points):
            raise MalformedInputError("point ids must be unique")
        if np.isnan(d).any():
            raise MalformedInputError("distance matrix contains NaN")
        if (d < 0).any():
            i, j = np.argwhere(d < 0)[0]
            raise MalformedInputError(
                f"negative distance {d[i, j]} from {self.points[i]!r} to {self.points[j]!r}"
            )
        if self.mode not in MODES:
            raise MalformedInputError(f"unknown separation mode {self.mode!r}")
        d.setflags(write=False)
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "dist", d)

    @classmethod
    def from_matrix(cls, dist, points=None, mode=QUASI_METRIC) -> "QuasiMetricSpace":
        dist = np.asarray(dist, dtype=float)
        if points is None:
            points = tuple(_default_ids(dist.shape[0]))
        return cls(tuple(points), dist, mode)

    def __len__(self):
        return len(self.points)

    def index(self, p) -> int:
        try:
            return self.points.index(p)
        except ValueError:
            raise MalformedInputError(f"unknown point {p!r}") from None

    def d(self, p, q) -> float:
        return float(self.dist[self.index(p), self.index(q)])

    def distance_function(self, base) -> "SampledFunction":
        """``d(base, .)`` as a sampled function."""
        row = self.dist[self.index(base)]
        return SampledFunction(dict(zip(self.points, row.tolist())))

    def to_json(self) -> dict:
        return {"points": list(self.points), "dist": _jsonable_matrix(self.dist), "mode": self.mode}


def _default_ids(n):
    letters = "abcdefghijklmnopqrstuvwxyz"
    if n <= len(letters):
        return list(letters[:n])
    return [f"p{i}" for i in range(n)]


def _jsonable_matrix(d):
    return [[("inf" if math.isinf(v) else v) for v in row] for row in d.tolist()]


def _parse_entry(v):
    if isinstance(v, str):
        v = v.strip().lower()
        if v in ("inf", "+inf", "infinity"):
            return math.inf
        return float(v)
    return float(v)


@dataclass(frozen=True)
class SampledFunction:
    """Values of a real function on the points of a finite space."""

    values: Mapping

    def on(self, space: QuasiMetricSpace) -> np.ndarray:
        missing = [p for p in space.points if p not in self.values]
        if missing:
            raise MalformedInputError(f"function undefined at {missing[:5]}")
        return np.array([self.values[p] for p in space.points], dtype=float)

    def __neg__(self):
        return SampledFunction({k: -v for k, v in self.values.items()})

    def shifted(self, c: float) -> "SampledFunction":
        return SampledFunction({k: v + c for k, v in self.values.items()})


@dataclass(frozen=True)
class AnalyticSpace:
    """A quasi-metric given by a formula, checked only through finite samples."""

    family: str
    dist_fn: Callable[[float, float], float]
    params: dict = field(default_factory=dict)
    domain: str = ""
    mode: str = QUASI_METRIC

    def d(self, p, q) -> float:
        return float(self.dist_fn(p, q))

    def sample(self, points: Sequence) -> QuasiMetricSpace:
        pts = list(dict.fromkeys(points))
        d = np.array([[self.d(p, q) if p != q else 0.0 for q in pts] for p in pts])
        return QuasiMetricSpace(tuple(pts), d, self.mode, exact=False)


def example31_space() -> AnalyticSpace:
    """The real line with ``d(x, y) = |x - y| + phi(x) - phi(y)``, ``phi(t) = t - arctan t``.

    Index of symmetry 0.
    """

    def dist(x, y):
        if y >= x:
            return math.atan(y) - math.atan(x)
        return 2.0 * (x - y) - (math.atan(x) - math.atan(y))

    return AnalyticSpace("example31", dist, {}, "real line")


def upper_line_space() -> AnalyticSpace:
    """``(R, d_u)``, a quasi-hemi-metric space with index 0."""
    return AnalyticSpace("d_u", d_u, {}, "real line", QUASI_HEMI_METRIC)


ANALYTIC_FAMILIES = {"example31": example31_space, "d_u": upper_line_space}


# ---------------------------------------------------------------- validation


@dataclass(frozen=True)
class Violation:
    axiom: str  # "identity" | "separation" | "triangle"
    witness: tuple
    defect: float

    def to_json(self):
        return {"axiom": self.axiom, "witness": list(self.witness), "defect": self.defect}


def validate_space(space, samples: Sequence | None = None) -> list[Violation]:
    """Every violated axiom with a witness; empty iff the space is valid.

    Triangle violations are reported once per ordered pair ``(x, y)`` with
    the worst intermediate point, as the triple ``(x, z, y)`` and the defect
    ``d(x, y) - d(x, z) - d(z, y)``.
    """
    if isinstance(space, AnalyticSpace):
        if not samples:
            raise MalformedInputError("analytic spaces are validated on a finite sample set")
        space = space.sample(samples)
    d = space.dist
    n = len(space)
    pts = space.points
    out: list[Violation] = []

    for i in range(n):
        if d[i, i] != 0:
            out.append(Violation("identity", (pts[i],), float(d[i, i])))

    off = ~np.eye(n, dtype=bool)
    zero = (d == 0) & off
    if space.mode == QUASI_METRIC:
        for i, j in np.argwhere(zero):
            out.append(Violation("separation", (pts[i], pts[j]), 0.0))
    else:
        for i, j in np.argwhere(zero & zero.T):
            if i < j:
                out.append(Violation("separation", (pts[i], pts[j]), 0.0))

    if n >= 3:
        with np.errstate(invalid="ignore"):
            via = d[:, :, None] + d[None, :, :]  # via[x, z, y]
        best = np.argmin(via, axis=1)
        shortcut = np.take_along_axis(via, best[:, None, :], axis=1)[:, 0, :]
        if space.exact:
            tol = np.zeros_like(d)
        else:
            finite = d[np.isfinite(d)]
            scale = float(finite.max()) if finite.size else 1.0
            tol = np.full_like(d, ANALYTIC_TRIANGLE_TOL * max(scale, 1.0))
        with np.errstate(invalid="ignore"):
            defect = d - shortcut
        bad = np.argwhere((defect > tol) & off)
        for i, j in bad:
            k = best[i, j]
            out.append(Violation("triangle", (pts[i], pts[k], pts[j]), float(defect[i, j])))
    return out


def symmetrize(space: QuasiMetricSpace) -> QuasiMetricSpace:
    """``max(d(x, y), d(y, x))``, a metric."""
    return QuasiMetricSpace(space.points, np.maximum(space.dist, space.dist.T), QUASI_METRIC)


def reverse(space: QuasiMetricSpace) -> QuasiMetricSpace:
    """The reverse quasi-metric ``d(y, x)``."""
    return QuasiMetricSpace(space.points, space.dist.T.copy(), space.mode)


# ---------------------------------------------------------- index of symmetry


@dataclass(frozen=True)
class SymmetryReport:
    """Index of symmetry with the pair realising it.

    The witness ``(p, q)`` satisfies ``index == d(p, q) / d(q, p)``. ``trend``
    keeps the per-pair ratios in sample order (for analytic families), which
    serves as evidence of decay toward zero. ``certified_lower`` is a known
    positive lower bound when one is available in closed form.
    """

    index: float
    witness: tuple
    is_exact: bool
    trend: tuple = ()
    certified_lower: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.index <= 1.0:
            raise ValueError(f"index of symmetry out of range: {self.index}")

    def to_json(self):
        return {
            "index": self.index,
            "witness": list(self.witness),
            "is_exact": self.is_exact,
            "trend": list(self.trend),
            "certified_lower": self.certified_lower,
        }


def _ratio(forward: float, backward: float) -> float:
    """``forward / backward`` with the zero-index convention for infinite distances."""
    if math.isinf(backward):
        return 0.0
    return forward / backward


def index_of_symmetry(space, samples: Sequence | None = None) -> SymmetryReport:
    """``inf d(y, x) / d(x, y)`` over pairs with ``d(x, y) > 0``.

    Exact on finite spaces. For an :class:`AnalyticSpace`, ``samples`` is a
    list of pairs ``(p, q)``; the ratio ``d(p, q) / d(q, p)`` is evaluated on
    each and the minimum is returned as an upper estimate.
    """
    if isinstance(space, AnalyticSpace):
        if not samples:
            raise DegenerateInputError("analytic index needs a nonempty pair sample")
        trend, best, wit = [], math.inf, None
        for p, q in samples:
            fwd, back = space.d(p, q), space.d(q, p)
            if back > 0:
                trend.append(_ratio(fwd, back))
            for (a, b), num, den in (((p, q), fwd, back), ((q, p), back, fwd)):
                if den > 0 and _ratio(num, den) < best:
                    best, wit = _ratio(num, den), (a, b)
        if wit is None:
            raise DegenerateInputError("no sampled pair has positive distance")
        return SymmetryReport(best, wit, False, tuple(trend))

    n = len(space)
    if n < 2:
        raise DegenerateInputError("index of symmetry needs at least two points")
    d = space.dist
    best, wit = math.inf, None
    for i in range(n):
        for j in range(n):
            if i == j or d[j, i] <= 0:
                continue
            r = _ratio(d[i, j], d[j, i])
            if math.isinf(d[i, j]) and math.isinf(d[j, i]):
                r = 0.0
            if r < best:
                best, wit = r, (space.points[i], space.points[j])
    if wit is None:
        raise DegenerateInputError("no pair has positive distance")
    return SymmetryReport(float(best), wit, True)


# ----------------------------------------------------- semi-Lipschitz constants


def slip_constant(f, space: QuasiMetricSpace) -> float:
    """Least ``L`` with ``f(y) - f(x) <= L d(x, y)``; ``inf`` if none exists.

    A pair at distance 0 along which ``f`` increases makes the constant
    infinite.
    """
    vals = f.on(space) if isinstance(f, SampledFunction) else _as_values(f, space)
    d = space.dist
    rise = vals[None, :] - vals[:, None]  # rise[x, y] = f(y) - f(x)
    if ((d == 0) & (rise > 0)).any():
        return math.inf
    pos = (d > 0) & (rise > 0) & np.isfinite(d)
    if not pos.any():
        return 0.0
    return float(np.max(rise[pos] / d[pos]))


def slip_constant_bruteforce(f, space: QuasiMetricSpace) -> float:
    """Loop-based reference for :func:`slip_constant`."""
    vals = f.on(space) if isinstance(f, SampledFunction) else _as_values(f, space)
    best = 0.0
    n = len(space)
    for i in range(n):
        for j in range(n):
            rise = max(vals[j] - vals[i], 0.0)
            dij = space.dist[i, j]
            if dij == 0:
                if rise > 0:
                    return math.inf
                continue
            best = max(best, rise / dij)
    return best


def _as_values(f, space):
    vals = np.asarray(f, dtype=float)
    if vals.shape != (len(space),):
        raise MalformedInputError(f"expected {len(space)} function values, got shape {vals.shape}")
    return vals


@dataclass(frozen=True)
class LinearityVerdict:
    linear: bool
    index: float
    witness: dict | None = None
    generator: str | None = None
    witness_slip: float | None = None
    negation_slip: float | None = None

    def to_json(self):
        return {
            "linear": self.linear,
            "index": self.index,
            "witness": self.witness,
            "generator": self.generator,
            "witness_slip": self.witness_slip,
            "negation_slip": self.negation_slip,
        }


def slip0_linearity(space: QuasiMetricSpace) -> LinearityVerdict:
    """Decide whether the semi-Lipschitz functions vanishing at the first point form a linear space.

    Linear iff the index of symmetry is positive. Otherwise a witness ``f``
    (normalised to vanish at the base point) with finite constant whose
    negation has infinite constant is found among the distance-generated
    functions ``d(z, .)`` and ``-d(., z)``.
    """
    violations = validate_space(space)
    if violations:
        raise MalformedInputError(f"not a quasi-metric space: {violations[0]}")
    rep = index_of_symmetry(space)
    if rep.index > 0:
        return LinearityVerdict(True, rep.index)

    d = space.dist
    candidates = [(f"d({z},.)", d[k, :]) for k, z in enumerate(space.points)]
    candidates += [(f"-d(.,{z})", -d[:, k]) for k, z in enumerate(space.points)]
    for name, col in candidates:
        if not np.isfinite(col).all():
            continue
        g = col - col[0]
        s = slip_constant(g, space)
        if math.isfinite(s) and math.isinf(slip_constant(-g, space)):
            witness = dict(zip(space.points, g.tolist()))
            return LinearityVerdict(False, rep.index, witness, name, s, math.inf)
    return LinearityVerdict(False, rep.index)


# ------------------------------------------------------------- random spaces


def random_space(n: int, rng: np.random.Generator, mode=QUASI_METRIC, zero_prob=0.3,
                 max_weight=20) -> QuasiMetricSpace:
    """A random finite space with integer distances (so every check is exact).

    Random asymmetric weights are closed under shortest paths. In hemi mode,
    zero weights are only placed forward along a random ordering so no zero
    cycle can form.
    """
    w = rng.integers(1, max_weight + 1, size=(n, n)).astype(float)
    if mode == QUASI_HEMI_METRIC:
        order = rng.permutation(n)
        rank = np.empty(n, dtype=int)
        rank[order] = np.arange(n)
        forward = rank[:, None] < rank[None, :]
        w[forward & (rng.random((n, n)) < zero_prob)] = 0.0
    np.fill_diagonal(w, 0.0)
    for k in range(n):
        w = np.minimum(w, w[:, k : k + 1] + w[k : k + 1, :])
    return QuasiMetricSpace.from_matrix(w, mode=mode)


# ------------------------------------------------------------------------ io


def space_from_json(obj: Mapping) -> QuasiMetricSpace:
    if "dist" not in obj:
        raise MalformedInputError("space spec needs a 'dist' matrix")
    dist = [[_parse_entry(v) for v in row] for row in obj["dist"]]
    try:
        arr = np.array(dist, dtype=float)
    except ValueError as exc:
        raise MalformedInputError(f"ragged distance matrix: {exc}") from None
    return QuasiMetricSpace.from_matrix(arr, obj.get("points"), obj.get("mode", QUASI_METRIC))


def load_space(path, mode=None) -> QuasiMetricSpace:
    """Read a space from JSON or from CSV (header row of ids, then the matrix)."""
    path = str(path)
    if path.endswith(".json"):
        with open(path) as fh:
            obj = json.load(fh)
        if mode:
            obj = {**obj, "mode": mode}
        return space_from_json(obj)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise MalformedInputError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    try:
        dist = [[_parse_entry(v) for v in r] for r in body]
    except ValueError as exc:
        raise MalformedInputError(f"{path}: {exc}") from None
    if any(len(r) != len(header) for r in dist) or len(dist) != len(header):
        raise MalformedInputError(f"{path}: matrix is not {len(header)}x{len(header)}")
    return QuasiMetricSpace.from_matrix(np.array(dist), [h.strip() for h in header],
                                        mode or QUASI_METRIC)


def save_space_csv(space: QuasiMetricSpace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(space.points)
        for row in space.dist.tolist():
            w.writerow([("inf" if math.isinf(v) else repr(v)) for v in row])
