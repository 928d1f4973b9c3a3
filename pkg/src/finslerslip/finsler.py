"""Minkowski-norm fields on box charts and their quasi-distances.

Distances come from three routes:

* ``oracle``: closed forms. Constant-coefficient fields have straight
  geodesics, so ``d(x, y) = F(y - x)``; one-dimensional fields integrate
  ``F(t, +1)`` or ``F(t, -1)`` between the endpoints.
* ``graph``: shortest directed path on a stencil graph over the chart grid,
  with edge weights equal to the Finsler length of the straight edge.
* ``refine``: the graph path, then coordinate descent on interior nodes.

The graph and refined values are lengths of actual polylines, hence upper
bounds of the true distance up to quadrature error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from ._util import as_points, golden_section, is_single
from .errors import InvalidStructureError, MalformedInputError, OutOfDomainError
from .quasimetric import SymmetryReport

DIVERGENCE_CAP = 1e6
HESSIAN_REL_STEP = 1e-4
HESSIAN_EIG_THRESHOLD = 1e-8


# -------------------------------------------------------------- norm fields


class MinkowskiNormField:
    """A field ``x -> F(x, .)`` of (possibly asymmetric) Minkowski norms.

    Subclasses implement :meth:`evaluate` on batches: ``X`` and ``V`` of
    shape ``(m, dim)`` give an array of shape ``(m,)``.
    """

    family = "abstract"
    dim = 1
    constant = False

    def evaluate(self, X: np.ndarray, V: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x, v):
        X, V = as_points(x, self.dim), as_points(v, self.dim)
        if X.shape[0] == 1 and V.shape[0] > 1:
            X = np.repeat(X, V.shape[0], axis=0)
        out = self.evaluate(X, V)
        return float(out[0]) if is_single(v, self.dim) else out

    def grad_v(self, X: np.ndarray, V: np.ndarray) -> np.ndarray:
        """Gradient of ``F(x, .)`` at ``v`` by central differences."""
        h = 1e-7 * np.maximum(np.linalg.norm(V, axis=1, keepdims=True), 1e-300)
        g = np.empty_like(V)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            g[:, i] = (self.evaluate(X, V + h * e) - self.evaluate(X, V - h * e)) / (2 * h[:, 0])
        return g

    def drift_norm(self, X: np.ndarray) -> np.ndarray | None:
        return None

    def exact_index(self) -> float | None:
        """Closed-form index of symmetry when the family has one."""
        return None

    def potentials(self):
        """Antiderivatives of ``F(t, +1)`` and ``F(t, -1)`` for 1-D fields, if known."""
        return None

    def spec(self) -> dict:
        return {"family": self.family, "params": {}}


class EuclideanField(MinkowskiNormField):
    family = "euclidean"
    constant = True

    def __init__(self, dim: int = 1):
        self.dim = int(dim)

    def evaluate(self, X, V):
        return np.linalg.norm(V, axis=1)

    def grad_v(self, X, V):
        n = np.linalg.norm(V, axis=1, keepdims=True)
        return np.divide(V, n, out=np.zeros_like(V), where=n > 0)

    def exact_index(self):
        return 1.0

    def potentials(self):
        if self.dim == 1:
            return (lambda t: np.asarray(t, dtype=float), lambda t: np.asarray(t, dtype=float))
        return None

    def spec(self):
        return {"family": "euclidean", "params": {"dim": self.dim}}


class RiemannianField(MinkowskiNormField):
    """``F(x, v) = sqrt(v' A(x) v)``; ``A`` a constant SPD matrix or a batch callable."""

    family = "riemannian"

    def __init__(self, matrix, dim: int | None = None):
        if callable(matrix):
            if dim is None:
                raise ValueError("dim is required with a matrix callable")
            self._matrix_fn = matrix
            self.dim = dim
            self.constant = False
            self._A = None
        else:
            A = np.atleast_2d(np.asarray(matrix, dtype=float))
            if A.shape[0] != A.shape[1] or not np.allclose(A, A.T):
                raise InvalidStructureError("metric matrix must be square and symmetric")
            if np.linalg.eigvalsh(A).min() <= 0:
                raise InvalidStructureError("metric matrix must be positive definite")
            self._A = A
            self.dim = A.shape[0]
            self.constant = True

    def matrix(self, X):
        if self._A is not None:
            return np.broadcast_to(self._A, (X.shape[0], self.dim, self.dim))
        return np.asarray(self._matrix_fn(X), dtype=float)

    def _alpha(self, X, V):
        q = np.einsum("mi,mij,mj->m", V, self.matrix(X), V)
        return np.sqrt(np.maximum(q, 0.0))

    def evaluate(self, X, V):
        return self._alpha(X, V)

    def grad_v(self, X, V):
        a = self._alpha(X, V)[:, None]
        Av = np.einsum("mij,mj->mi", self.matrix(X), V)
        return np.divide(Av, a, out=np.zeros_like(V), where=a > 0)

    def exact_index(self):
        return 1.0

    def potentials(self):
        if self.dim == 1 and self.constant:
            s = math.sqrt(self._A[0, 0])
            return (lambda t: s * np.asarray(t, dtype=float), lambda t: s * np.asarray(t, dtype=float))
        return None

    def spec(self):
        if self._A is None:
            return {"family": "riemannian", "params": {"callable": True}}
        return {"family": "riemannian", "params": {"matrix": self._A.tolist()}}


class RandersField(RiemannianField):
    """``F(x, v) = sqrt(v' A(x) v) + <b(x), v>``.

    ``matrix`` defaults to the identity. Both ``matrix`` and ``drift`` may be
    constants or batch callables.
    """

    family = "randers"

    def __init__(self, drift, matrix=None, dim: int | None = None):
        if callable(drift):
            if dim is None:
                raise ValueError("dim is required with a drift callable")
            self._drift_fn, self._b = drift, None
        else:
            self._b = np.atleast_1d(np.asarray(drift, dtype=float))
            self._drift_fn = None
            dim = self._b.shape[0] if dim is None else dim
        if matrix is None:
            matrix = np.eye(dim)
        super().__init__(matrix, dim)
        self.constant = self.constant and self._b is not None

    def drift(self, X):
        if self._b is not None:
            return np.broadcast_to(self._b, (X.shape[0], self.dim))
        return np.asarray(self._drift_fn(X), dtype=float)

    def evaluate(self, X, V):
        return self._alpha(X, V) + np.einsum("mi,mi->m", self.drift(X), V)

    def grad_v(self, X, V):
        return super().grad_v(X, V) + self.drift(X)

    def drift_norm(self, X):
        b = self.drift(X)
        A = self.matrix(X)
        return np.sqrt(np.einsum("mi,mi->m", b, np.linalg.solve(A, b[..., None])[..., 0]))

    def exact_index(self):
        if not self.constant:
            return None
        b = float(self.drift_norm(np.zeros((1, self.dim)))[0])
        if b >= 1:
            return None
        return (1.0 - b) / (1.0 + b)

    def potentials(self):
        if self.dim == 1 and self.constant:
            a, b = math.sqrt(self._A[0, 0]), float(self._b[0])
            return (lambda t: (a + b) * np.asarray(t, dtype=float),
                    lambda t: (a - b) * np.asarray(t, dtype=float))
        return None

    def spec(self):
        if self._b is None or self._A is None:
            return {"family": "randers", "params": {"callable": True}}
        return {"family": "randers", "params": {"drift": self._b.tolist(), "matrix": self._A.tolist()}}


def phi(t):
    """``phi(t) = t - arctan t``, the potential of the index-0 line."""
    t = np.asarray(t, dtype=float)
    return t - np.arctan(t)


def phi_prime(t):
    t = np.asarray(t, dtype=float)
    return t * t / (1.0 + t * t)


class Example31Field(MinkowskiNormField):
    """``F(x, v) = |v| - phi'(x) v`` on the real line, with ``phi'(t) = t^2 / (1 + t^2)``.

    Forward and backward unit costs are evaluated as ``1 / (1 + x^2)`` and
    ``(1 + 2x^2) / (1 + x^2)`` to avoid cancellation for large ``|x|``.
    """

    family = "example31"
    dim = 1
    constant = False

    @staticmethod
    def forward_cost(x):
        x = np.asarray(x, dtype=float)
        return 1.0 / (1.0 + x * x)

    @staticmethod
    def backward_cost(x):
        x = np.asarray(x, dtype=float)
        return 2.0 - 1.0 / (1.0 + x * x)

    def evaluate(self, X, V):
        x, v = X[:, 0], V[:, 0]
        return np.where(v >= 0, v * self.forward_cost(x), -v * self.backward_cost(x))

    def grad_v(self, X, V):
        x, v = X[:, 0], V[:, 0]
        return np.where(v >= 0, self.forward_cost(x), -self.backward_cost(x))[:, None]

    def drift_norm(self, X):
        return phi_prime(X[:, 0])

    def potentials(self):
        return (np.arctan, lambda t: 2.0 * np.asarray(t, dtype=float) - np.arctan(t))

    def spec(self):
        return {"family": "example31", "params": {}}


def field_from_spec(spec: dict, dim: int | None = None) -> MinkowskiNormField:
    fam = spec.get("family")
    params = spec.get("params", {}) or {}
    if fam == "euclidean":
        return EuclideanField(params.get("dim", dim or 1))
    if fam == "riemannian":
        return RiemannianField(params["matrix"])
    if fam == "randers":
        return RandersField(params["drift"], params.get("matrix"))
    if fam == "example31":
        return Example31Field()
    raise MalformedInputError(f"unknown norm family {fam!r}")


# ----------------------------------------------------------------- validation


@dataclass
class MinkowskiReport:
    violations: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set:
        return {v["axiom"] for v in self.violations}

    def to_json(self):
        return {"ok": self.ok, "violations": self.violations, "notes": self.notes}


def _f2_hessian(field_, x, v):
    """Central-difference Hessian of ``F(x, .)^2`` at ``v``."""
    n = field_.dim
    h = HESSIAN_REL_STEP * np.linalg.norm(v)
    X = np.repeat(x[None, :], 4 * n * n, axis=0)
    V = []
    for i, j in product(range(n), range(n)):
        ei, ej = np.eye(n)[i] * h, np.eye(n)[j] * h
        V += [v + ei + ej, v + ei - ej, v - ei + ej, v - ei - ej]
    F2 = field_.evaluate(X, np.array(V)) ** 2
    F2 = F2.reshape(n, n, 4)
    return (F2[..., 0] - F2[..., 1] - F2[..., 2] + F2[..., 3]) / (4 * h * h)


def validate_minkowski(field_: MinkowskiNormField, xs, vs, tol: float = 1e-9) -> MinkowskiReport:
    """Check the Minkowski-norm axioms of ``field_`` on sampled base points and vectors.

    Homogeneity, subadditivity, separation, positive definiteness of
    ``g_v = 1/2 d^2[F^2](v)`` (finite-difference Hessian; smallest eigenvalue
    compared to ``1e-8 * (F(v)/|v|)^2``) and, for Randers fields, the drift
    bound ``|b|_A < 1``.
    """
    X = as_points(xs, field_.dim)
    Vs = as_points(vs, field_.dim)
    if X.size == 0 or Vs.size == 0:
        raise MalformedInputError("validate_minkowski needs nonempty samples")
    rep = MinkowskiReport()
    zero_v = np.linalg.norm(Vs, axis=1) == 0
    if zero_v.any():
        rep.notes.append("zero vector in samples: Hessian check skipped for it")

    for x in X:
        xb = np.repeat(x[None, :], len(Vs), axis=0)
        F = field_.evaluate(xb, Vs)
        scale = max(1.0, float(np.max(np.abs(F))))
        for lam in (0.5, 2.0, 3.0):
            Fl = field_.evaluate(xb, lam * Vs)
            bad = np.abs(Fl - lam * F) > tol * scale * lam
            for k in np.flatnonzero(bad):
                rep.violations.append({"axiom": "homogeneity", "x": x.tolist(), "v": Vs[k].tolist(),
                                       "defect": float(abs(Fl[k] - lam * F[k]))})
        for k in np.flatnonzero(~zero_v & (F <= 0)):
            rep.violations.append({"axiom": "separation", "x": x.tolist(), "v": Vs[k].tolist(),
                                   "defect": float(-F[k])})
        ii, jj = np.triu_indices(len(Vs))
        S = field_.evaluate(np.repeat(x[None, :], len(ii), axis=0), Vs[ii] + Vs[jj])
        excess = S - F[ii] - F[jj]
        for k in np.flatnonzero(excess > tol * scale):
            rep.violations.append({"axiom": "subadditivity", "x": x.tolist(),
                                   "v": [Vs[ii[k]].tolist(), Vs[jj[k]].tolist()],
                                   "defect": float(excess[k])})
        for k in np.flatnonzero(~zero_v):
            v = Vs[k]
            g = 0.5 * _f2_hessian(field_, x, v)
            lam_min = float(np.linalg.eigvalsh(0.5 * (g + g.T))[0])
            unit = (F[k] / np.linalg.norm(v)) ** 2
            if not lam_min > HESSIAN_EIG_THRESHOLD * max(unit, 1e-300) or F[k] <= 0:
                rep.violations.append({"axiom": "positive-definite", "x": x.tolist(),
                                       "v": v.tolist(), "defect": lam_min})
        dn = field_.drift_norm(x[None, :])
        if dn is not None and dn[0] >= 1:
            rep.violations.append({"axiom": "drift", "x": x.tolist(), "v": None,
                                   "defect": float(dn[0] - 1)})
    return rep


# ---------------------------------------------------------------------- charts


@dataclass(frozen=True, eq=False)
class FinslerChart:
    """A box in coordinates with a norm field and a graph discretisation."""

    box: np.ndarray
    field: MinkowskiNormField
    grid: tuple
    stencil: int | None = None

    def __post_init__(self):
        box = np.atleast_2d(np.asarray(self.box, dtype=float))
        if box.shape[1] != 2 or box.shape[0] != self.field.dim:
            raise MalformedInputError(f"box shape {box.shape} does not match dimension {self.field.dim}")
        if not (box[:, 1] > box[:, 0]).all():
            raise MalformedInputError("box must have lo < hi on every axis")
        grid = tuple(int(g) for g in np.atleast_1d(self.grid))
        if len(grid) != self.field.dim or min(grid) < 2:
            raise MalformedInputError("grid needs at least 2 nodes per axis")
        stencil = self.stencil if self.stencil is not None else (1 if self.field.dim == 1 else 2)
        if stencil < 1:
            raise MalformedInputError("stencil radius must be >= 1")
        box.setflags(write=False)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "stencil", int(stencil))

    @classmethod
    def with_step(cls, field_, box, step, stencil=None):
        box = np.atleast_2d(np.asarray(box, dtype=float))
        grid = [int(round((hi - lo) / step)) + 1 for lo, hi in box]
        return cls(box, field_, tuple(grid), stencil)

    @property
    def dim(self) -> int:
        return self.field.dim

    @property
    def steps(self) -> np.ndarray:
        return (self.box[:, 1] - self.box[:, 0]) / (np.array(self.grid) - 1)

    def axes(self):
        return [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.box, self.grid)]

    def grid_points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def contains(self, X, rtol: float = 1e-12) -> np.ndarray:
        X = as_points(X, self.dim)
        slack = rtol * (self.box[:, 1] - self.box[:, 0])
        return ((X >= self.box[:, 0] - slack) & (X <= self.box[:, 1] + slack)).all(axis=1)

    def require_inside(self, X, what="point"):
        inside = self.contains(X)
        if not inside.all():
            bad = as_points(X, self.dim)[~inside][0]
            raise OutOfDomainError(f"{what} {bad.tolist()} lies outside the chart box {self.box.tolist()}")

    def norm(self, x, v):
        return self.field(x, v)

    def to_json(self):
        return {**self.field.spec(), "box": self.box.tolist(), "grid": list(self.grid),
                "stencil": self.stencil}

    @cached_property
    def _base_graph(self):
        return _build_grid_edges(self)


def chart_from_json(obj: dict) -> FinslerChart:
    if "box" not in obj:
        raise MalformedInputError("chart spec needs a 'box'")
    box = np.atleast_2d(np.asarray(obj["box"], dtype=float))
    field_ = field_from_spec(obj, dim=box.shape[0])
    grid = obj.get("grid")
    if grid is None:
        step = obj.get("step", 0.01)
        return FinslerChart.with_step(field_, box, step, obj.get("stencil"))
    return FinslerChart(box, field_, tuple(np.atleast_1d(grid)), obj.get("stencil"))


def example31_chart(box=(-2.0, 3.0), step=0.01) -> FinslerChart:
    return FinslerChart.with_step(Example31Field(), [box], step)


# ----------------------------------------------------------------- path length

_GL_CACHE: dict = {}


def _gauss(order):
    if order not in _GL_CACHE:
        t, w = np.polynomial.legendre.leggauss(order)
        _GL_CACHE[order] = (0.5 * (t + 1.0), 0.5 * w)
    return _GL_CACHE[order]


def segment_lengths(field_: MinkowskiNormField, A: np.ndarray, B: np.ndarray, order: int = 8):
    """Finsler lengths of the straight segments ``A[k] -> B[k]`` by Gauss-Legendre."""
    t, w = _gauss(order)
    D = B - A
    m, q = A.shape[0], t.shape[0]
    P = A[:, None, :] + t[None, :, None] * D[:, None, :]
    V = np.repeat(D[:, None, :], q, axis=1)
    vals = field_.evaluate(P.reshape(m * q, -1), V.reshape(m * q, -1)).reshape(m, q)
    return vals @ w


def path_length(chart: FinslerChart, path, order: int = 8) -> float:
    """Finsler length of a polyline, composite Gauss-Legendre per segment."""
    P = as_points(path, chart.dim)
    if P.shape[0] < 2:
        raise MalformedInputError("a path needs at least two nodes")
    chart.require_inside(P, "path node")
    return float(segment_lengths(chart.field, P[:-1], P[1:], order).sum())


# ---------------------------------------------------------------- distances


@dataclass
class DistanceResult:
    x: list
    y: list
    value: float
    method: str
    error_estimate: float | None = None
    path: np.ndarray | None = None
    converged: bool = True

    def to_json(self):
        return {"x": self.x, "y": self.y, "value": self.value, "method": self.method,
                "error_estimate": self.error_estimate, "converged": self.converged}


def stencil_offsets(dim: int, radius: int) -> np.ndarray:
    """Primitive integer directions with Chebyshev length at most ``radius``."""
    rng = range(-radius, radius + 1)
    out = [o for o in product(rng, repeat=dim)
           if any(o) and math.gcd(*[abs(c) for c in o]) == 1]
    return np.array(out, dtype=int)


def _build_grid_edges(chart: FinslerChart, edge_order: int = 3):
    shape = chart.grid
    coords = chart.grid_points()
    idx = np.indices(shape).reshape(chart.dim, -1).T
    src, dst = [], []
    for o in stencil_offsets(chart.dim, chart.stencil):
        tgt = idx + o
        ok = ((tgt >= 0) & (tgt < np.array(shape))).all(axis=1)
        src.append(np.flatnonzero(ok))
        dst.append(np.ravel_multi_index(tgt[ok].T, shape))
    src, dst = np.concatenate(src), np.concatenate(dst)
    w = segment_lengths(chart.field, coords[src], coords[dst], edge_order)
    return coords, src, dst, w


def _locate(chart: FinslerChart, p: np.ndarray):
    """Grid node index of ``p`` if it sits on a node, else ``None`` and the cell corner."""
    frac = (p - chart.box[:, 0]) / chart.steps
    near = np.rint(frac)
    if np.all(np.abs(frac - near) <= 1e-9):
        return int(np.ravel_multi_index(near.astype(int), chart.grid)), None
    return None, np.floor(frac).astype(int)


def finsler_distance_graph(chart: FinslerChart, x, y, edge_order: int = 3) -> DistanceResult:
    """Shortest directed path on the chart's stencil graph (Dijkstra)."""
    X, Y = as_points(x, chart.dim), as_points(y, chart.dim)
    chart.require_inside(np.vstack([X, Y]), "endpoint")
    if edge_order == 3:
        coords, src, dst, w = chart._base_graph
    else:
        coords, src, dst, w = _build_grid_edges(chart, edge_order)
    n_nodes = coords.shape[0]
    extra_src, extra_dst, extra_pts, ids = [], [], [], []
    for p in (X[0], Y[0]):
        node, corner = _locate(chart, p)
        if node is None:
            node = n_nodes + len(extra_pts)
            extra_pts.append(p)
            r = chart.stencil
            ranges = [range(max(c - r + 1, 0), min(c + r, g - 1) + 1)
                      for c, g in zip(corner, chart.grid)]
            nbrs = [np.ravel_multi_index(m, chart.grid) for m in product(*ranges)]
            extra_src += [node] * len(nbrs) + nbrs
            extra_dst += nbrs + [node] * len(nbrs)
        ids.append(node)
    all_coords = np.vstack([coords] + [np.array(extra_pts)] if extra_pts else [coords])
    if extra_src:
        es, ed = np.array(extra_src), np.array(extra_dst)
        ew = segment_lengths(chart.field, all_coords[es], all_coords[ed], edge_order)
        src_all, dst_all, w_all = np.concatenate([src, es]), np.concatenate([dst, ed]), np.concatenate([w, ew])
    else:
        src_all, dst_all, w_all = src, dst, w
    if not (np.isfinite(w_all).all() and (w_all > 0).all()):
        raise InvalidStructureError("nonpositive edge weight: the norm field is not positive definite")
    s, t = ids
    if s == t:
        return DistanceResult(X[0].tolist(), Y[0].tolist(), 0.0, "graph", None, np.vstack([X, Y]))
    N = all_coords.shape[0]
    G = csr_matrix((w_all, (src_all, dst_all)), shape=(N, N))
    dist, pred = dijkstra(G, directed=True, indices=s, return_predecessors=True)
    if not np.isfinite(dist[t]):
        raise RuntimeError("stencil graph is disconnected; this cannot happen on a box")
    nodes = [t]
    while nodes[-1] != s:
        nodes.append(pred[nodes[-1]])
    path = all_coords[nodes[::-1]].copy()
    path[0], path[-1] = X[0], Y[0]
    return DistanceResult(X[0].tolist(), Y[0].tolist(), float(dist[t]), "graph", None, path)


def finsler_distance_refine(chart: FinslerChart, path, max_sweeps: int = 60, rtol: float = 1e-10,
                            order: int = 8) -> DistanceResult:
    """Shorten a polyline by golden-section coordinate descent on its interior nodes.

    Moves are accepted only when they shorten the path, so the result never
    exceeds the initial length. ``converged`` is false when the sweep cap is
    reached first.
    """
    P = as_points(path, chart.dim).copy()
    chart.require_inside(P, "path node")
    F = chart.field
    lo, hi = chart.box[:, 0], chart.box[:, 1]
    width = float(np.max(hi - lo))

    def local(i, p):
        A = np.vstack([P[i - 1], p])
        B = np.vstack([p, P[i + 1]])
        return float(segment_lengths(F, A, B, order).sum())

    P = _prune(F, P, order)
    total = path_length(chart, P, order)
    converged = P.shape[0] <= 2
    sweeps = 0
    while not converged and sweeps < max_sweeps:
        sweeps += 1
        for i in range(1, P.shape[0] - 1):
            reach = max(np.linalg.norm(P[i] - P[i - 1]), np.linalg.norm(P[i + 1] - P[i]))
            if reach == 0:
                continue
            for k in range(chart.dim):
                cur = P[i].copy()
                base = local(i, cur)

                def cost(c, k=k, cur=cur, i=i):
                    q = cur.copy()
                    q[k] = c
                    return local(i, q)

                a, b = max(lo[k], cur[k] - reach), min(hi[k], cur[k] + reach)
                c_best, f_best = golden_section(cost, a, b, 1e-10 * width)
                if f_best < base:
                    P[i, k] = c_best
        new_total = path_length(chart, P, order)
        converged = (total - new_total) <= rtol * max(total, 1e-300)
        total = min(total, new_total)
    return DistanceResult(P[0].tolist(), P[-1].tolist(), total, "refine", None, P, converged)


def _prune(field_, P, order):
    """Drop interior nodes whose removal does not lengthen the path."""
    keep = [0]
    for i in range(1, P.shape[0] - 1):
        a, b, c = P[keep[-1]], P[i], P[i + 1]
        via = segment_lengths(field_, np.vstack([a, b]), np.vstack([b, c]), order).sum()
        direct = segment_lengths(field_, a[None, :], c[None, :], order)[0]
        if direct > via:
            keep.append(i)
    keep.append(P.shape[0] - 1)
    return P[keep].copy()


def line_distance_1d(field_: MinkowskiNormField, x: float, y: float) -> float:
    """Exact distance on a 1-D chart: integrate the forward or backward unit cost."""
    pots = field_.potentials()
    if pots is not None:
        fwd, bwd = pots
        if y >= x:
            return float(fwd(y) - fwd(x))
        return float(bwd(x) - bwd(y))
    if y >= x:
        val, _ = integrate.quad(lambda t: field_(t, 1.0), x, y, limit=200)
    else:
        val, _ = integrate.quad(lambda t: field_(t, -1.0), y, x, limit=200)
    return float(val)


def has_oracle(chart: FinslerChart) -> bool:
    return chart.dim == 1 or chart.field.constant


def oracle_distances(chart: FinslerChart, P, Q) -> np.ndarray:
    """Closed-form distances for constant-coefficient or 1-D charts, batched."""
    P, Q = as_points(P, chart.dim), as_points(Q, chart.dim)
    if chart.field.constant:
        return chart.field.evaluate(P, Q - P)
    if chart.dim == 1:
        pots = chart.field.potentials()
        p, q = P[:, 0], Q[:, 0]
        if pots is not None:
            fwd, bwd = pots
            return np.where(q >= p, fwd(q) - fwd(p), bwd(p) - bwd(q))
        return np.array([line_distance_1d(chart.field, a, b) for a, b in zip(p, q)])
    raise ValueError(f"no closed-form distance for family {chart.field.family!r} in dimension {chart.dim}")


def finsler_distance(chart: FinslerChart, x, y, method: str = "auto") -> DistanceResult:
    """Distance from ``x`` to ``y`` by ``oracle``, ``graph`` or ``refine`` (graph then descent)."""
    if method == "auto":
        method = "oracle" if has_oracle(chart) else "refine"
    X, Y = as_points(x, chart.dim), as_points(y, chart.dim)
    chart.require_inside(np.vstack([X, Y]), "endpoint")
    if method == "oracle":
        val = float(oracle_distances(chart, X, Y)[0])
        return DistanceResult(X[0].tolist(), Y[0].tolist(), val, "oracle", 0.0, np.vstack([X, Y]))
    g = finsler_distance_graph(chart, X[0], Y[0])
    if method == "graph":
        return g
    if method == "refine":
        r = finsler_distance_refine(chart, g.path)
        r.error_estimate = max(g.value - r.value, 0.0)
        return r
    raise ValueError(f"unknown distance method {method!r}")


def pair_distances(chart: FinslerChart, P, Q, method: str = "auto") -> np.ndarray:
    P, Q = as_points(P, chart.dim), as_points(Q, chart.dim)
    if method in ("auto", "oracle") and has_oracle(chart):
        chart.require_inside(np.vstack([P, Q]), "endpoint")
        return oracle_distances(chart, P, Q)
    return np.array([finsler_distance(chart, p, q, method).value for p, q in zip(P, Q)])


def distance_matrix_1d(chart: FinslerChart, xs) -> np.ndarray:
    """All pairwise distances between sorted or unsorted points of a 1-D chart."""
    if chart.dim != 1:
        raise ValueError("distance_matrix_1d is for 1-D charts")
    xs = np.asarray(xs, dtype=float).ravel()
    pots = chart.field.potentials()
    if pots is None:
        order = np.argsort(xs)
        s = xs[order]
        fw = np.concatenate([[0.0], np.cumsum(segment_lengths(chart.field, s[:-1, None], s[1:, None]))])
        bw = np.concatenate([[0.0], np.cumsum(segment_lengths(chart.field, s[1:, None], s[:-1, None]))])
        fwd, bwd = np.empty_like(xs), np.empty_like(xs)
        fwd[order], bwd[order] = fw, bw
    else:
        fwd, bwd = pots[0](xs), pots[1](xs)
    later = xs[None, :] >= xs[:, None]
    D = np.where(later, fwd[None, :] - fwd[:, None], bwd[:, None] - bwd[None, :])
    np.fill_diagonal(D, 0.0)
    return np.maximum(D, 0.0)


def randers_1d_distance(x: float, y: float, phi_prime_fn: Callable | None = None,
                        family: str | None = None, phi_fn: Callable | None = None) -> float:
    """Distance on ``(R, |v| - phi'(x) v)``.

    ``int_x^y (1 - phi')`` forward and ``int_y^x (1 + phi')`` backward. The
    ``example31`` family and any supplied antiderivative ``phi_fn`` use
    ``|x - y| + phi(x) - phi(y)`` directly; otherwise ``phi_prime_fn`` is
    integrated adaptively after checking ``|phi'| < 1`` on the range.
    """
    if family == "example31":
        if y >= x:
            return float(np.arctan(y) - np.arctan(x))
        return float(2.0 * (x - y) - (np.arctan(x) - np.arctan(y)))
    if phi_fn is not None:
        return float(abs(x - y) + phi_fn(x) - phi_fn(y))
    if phi_prime_fn is None:
        raise ValueError("need a family, an antiderivative or a derivative")
    lo, hi = min(x, y), max(x, y)
    probe = np.linspace(lo, hi, 2001)
    vals = np.abs(np.asarray([phi_prime_fn(t) for t in probe], dtype=float))
    if (vals >= 1).any():
        t = probe[np.argmax(vals)]
        raise InvalidStructureError(f"|phi'| >= 1 at t = {t}: the structure is not positive")
    if y >= x:
        val, _ = integrate.quad(lambda t: 1.0 - phi_prime_fn(t), x, y, epsabs=1e-13, epsrel=1e-13, limit=200)
    else:
        val, _ = integrate.quad(lambda t: 1.0 + phi_prime_fn(t), y, x, epsabs=1e-13, epsrel=1e-13, limit=200)
    return float(val)


def chart_index_of_symmetry(chart: FinslerChart, pairs, method: str = "auto") -> SymmetryReport:
    """Upper estimate of the index of symmetry from sampled pairs.

    ``trend`` holds ``d(p, q) / d(q, p)`` per pair in sample order. Families
    with a closed-form index report it as ``certified_lower``.
    """
    pairs = list(pairs)
    if not pairs:
        raise MalformedInputError("chart_index_of_symmetry needs at least one pair")
    P = np.array([as_points(p, chart.dim)[0] for p, _ in pairs])
    Q = np.array([as_points(q, chart.dim)[0] for _, q in pairs])
    fwd = pair_distances(chart, P, Q, method)
    bwd = pair_distances(chart, Q, P, method)
    trend = np.divide(fwd, bwd, out=np.full_like(fwd, np.nan), where=bwd > 0)
    best, wit = math.inf, None
    for k in range(len(pairs)):
        for a, b, num, den in ((P[k], Q[k], fwd[k], bwd[k]), (Q[k], P[k], bwd[k], fwd[k])):
            if den > 0 and num / den < best:
                best, wit = num / den, (_plain(a), _plain(b))
    if wit is None:
        raise MalformedInputError("all sampled pairs have zero distance")
    return SymmetryReport(float(min(best, 1.0)), wit, False,
                          tuple(float(t) for t in trend if np.isfinite(t)),
                          chart.field.exact_index())


def _plain(p):
    p = np.asarray(p, dtype=float)
    return float(p[0]) if p.size == 1 else tuple(p.tolist())
