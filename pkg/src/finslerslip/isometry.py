"""Smooth maps between charts, isometry checks and composition operators.

A map ``h: X -> Y`` induces ``T f = f o h`` from functions on ``Y`` to
functions on ``X``. Operator norms and map constants here are sample
estimates; inequalities between them are only compared on coupled samples
(the ``Y`` grid is the image ``h(grid_X)``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from ._util import as_points
from .conealg import ConeElement, Functional, cone_certify
from .errors import MalformedInputError, OutOfDomainError
from .fields import ArctanRidge, ComposedField, ProductField, ScalarField, SumField
from .finsler import FinslerChart, has_oracle, pair_distances
from .quasimetric import SymmetryReport

ALGEBRA_RTOL = 1e-12


# -------------------------------------------------------------------- maps


class SmoothMap:
    family = "abstract"
    dim_in = dim_out = 1
    analytic_jacobian = True

    def forward(self, X):
        raise NotImplementedError

    def inverse(self, Y):
        raise NotImplementedError

    def jacobian(self, X):
        """``(m, dim_out, dim_in)`` Jacobians by central differences."""
        X = np.asarray(X, dtype=float)
        J = np.empty((X.shape[0], self.dim_out, self.dim_in))
        for i in range(self.dim_in):
            h = 1e-6 * np.maximum(1.0, np.abs(X[:, i]))
            Xp, Xm = X.copy(), X.copy()
            Xp[:, i] += h
            Xm[:, i] -= h
            J[:, :, i] = (self.forward(Xp) - self.forward(Xm)) / (2 * h)[:, None]
        return J

    def __call__(self, x):
        out = self.forward(as_points(x, self.dim_in))
        return out[0] if np.ndim(x) == (0 if self.dim_in == 1 else 1) else out

    def inverse_map(self) -> "SmoothMap":
        return _InverseMap(self)

    def spec(self):
        return {"family": self.family}


class IdentityMap(SmoothMap):
    family = "identity"

    def __init__(self, dim: int = 1):
        self.dim_in = self.dim_out = int(dim)

    def forward(self, X):
        return np.array(X, dtype=float)

    def inverse(self, Y):
        return np.array(Y, dtype=float)

    def jacobian(self, X):
        return np.broadcast_to(np.eye(self.dim_in), (X.shape[0], self.dim_in, self.dim_in)).copy()

    def inverse_map(self):
        return self

    def spec(self):
        return {"family": "identity", "params": {"dim": self.dim_in}}


class AffineMap(SmoothMap):
    """``h(x) = A x + c`` with ``A`` invertible."""

    family = "affine"

    def __init__(self, A, c=None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n) or abs(np.linalg.det(self.A)) < 1e-14:
            raise MalformedInputError("affine maps need a square invertible matrix")
        self.c = np.zeros(n) if c is None else np.atleast_1d(np.asarray(c, dtype=float))
        self.dim_in = self.dim_out = n
        self._Ainv = np.linalg.inv(self.A)

    def forward(self, X):
        return X @ self.A.T + self.c

    def inverse(self, Y):
        return (Y - self.c) @ self._Ainv.T

    def jacobian(self, X):
        return np.broadcast_to(self.A, (X.shape[0],) + self.A.shape).copy()

    def inverse_map(self):
        return AffineMap(self._Ainv, -self._Ainv @ self.c)

    def spec(self):
        return {"family": "affine", "params": {"A": self.A.tolist(), "c": self.c.tolist()}}


class TranslationMap(AffineMap):
    family = "translation"

    def __init__(self, c):
        c = np.atleast_1d(np.asarray(c, dtype=float))
        super().__init__(np.eye(c.size), c)

    def inverse_map(self):
        return TranslationMap(-self.c)

    def spec(self):
        return {"family": "translation", "params": {"c": self.c.tolist()}}


class MonotoneTableMap(SmoothMap):
    """Strictly increasing 1-D map through tabulated points (PCHIP), inverted by bisection."""

    family = "tabulated-1d-monotone"

    def __init__(self, xs, ys):
        xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
        if xs.size < 2 or xs.shape != ys.shape or not (np.all(np.diff(xs) > 0) and np.all(np.diff(ys) > 0)):
            raise MalformedInputError("monotone table needs strictly increasing xs and ys")
        self.xs, self.ys = xs, ys
        self._p = PchipInterpolator(xs, ys, extrapolate=False)

    def _check(self, x, lo, hi, what):
        if np.any((x < lo) | (x > hi)):
            raise OutOfDomainError(f"{what} outside the tabulated range [{lo}, {hi}]")

    def forward(self, X):
        x = X[:, 0]
        self._check(x, self.xs[0], self.xs[-1], "point")
        return self._p(x)[:, None]

    def jacobian(self, X):
        x = X[:, 0]
        self._check(x, self.xs[0], self.xs[-1], "point")
        return self._p(x, 1)[:, None, None]

    def inverse(self, Y):
        y = Y[:, 0]
        self._check(y, self.ys[0], self.ys[-1], "value")
        a = np.full_like(y, self.xs[0])
        b = np.full_like(y, self.xs[-1])
        for _ in range(200):
            m = 0.5 * (a + b)
            below = self._p(m) < y
            a, b = np.where(below, m, a), np.where(below, b, m)
            if np.all(b - a <= 1e-15 * np.maximum(1.0, np.abs(m))):
                break
        return (0.5 * (a + b))[:, None]

    def spec(self):
        return {"family": "tabulated-1d-monotone", "params": {"xs": self.xs.tolist(), "ys": self.ys.tolist()}}


class _InverseMap(SmoothMap):
    def __init__(self, h):
        self.h, self.dim_in, self.dim_out = h, h.dim_out, h.dim_in
        self.family = f"inverse({h.family})"

    def forward(self, X):
        return self.h.inverse(X)

    def inverse(self, Y):
        return self.h.forward(Y)

    def jacobian(self, X):
        return np.linalg.inv(self.h.jacobian(self.h.inverse(X)))

    def inverse_map(self):
        return self.h

    def spec(self):
        return {"family": "inverse", "params": {"map": self.h.spec()}}


def map_from_spec(spec: dict) -> SmoothMap:
    fam = spec.get("family")
    p = spec.get("params", {}) or {}
    try:
        if fam == "identity":
            return IdentityMap(p.get("dim", 1))
        if fam == "translation":
            return TranslationMap(p["c"])
        if fam == "affine":
            return AffineMap(p["A"], p.get("c"))
        if fam == "tabulated-1d-monotone":
            return MonotoneTableMap(p["xs"], p["ys"])
    except KeyError as exc:
        raise MalformedInputError(f"map family {fam!r} is missing parameter {exc}") from None
    raise MalformedInputError(f"unknown map family {fam!r}")


def map_self_check(h: SmoothMap, xs, rtol: float = 1e-5):
    """Round-trip and Jacobian checks; returns ``(roundtrip_defect, jacobian_defect)``."""
    X = as_points(xs, h.dim_in)
    rt = float(np.max(np.abs(h.forward(h.inverse(h.forward(X))) - h.forward(X))))
    J = h.jacobian(X)
    Jfd = SmoothMap.jacobian(h, X)
    jd = float(np.max(np.abs(J - Jfd) / np.maximum(1.0, np.abs(J))))
    return rt, jd


# ------------------------------------------------------------------ checks


@dataclass
class IsometryReport:
    kind: str
    max_defect: float
    tol: float
    passed: bool
    witness: object
    notes: list = field(default_factory=list)
    agrees_with_finsler: bool | None = None

    def to_json(self):
        out = {"kind": self.kind, "max_defect": self.max_defect, "tol": self.tol, "pass": self.passed,
               "witness": self.witness, "notes": self.notes}
        if self.agrees_with_finsler is not None:
            out["agrees_with_finsler"] = self.agrees_with_finsler
        return out


def _map_into(h, chartY, X, what="image"):
    Y = h.forward(X)
    chartY.require_inside(Y, what)
    return Y


def check_finsler_isometry(chartX: FinslerChart, chartY: FinslerChart, h: SmoothMap, xs, vs,
                           tol: float = 1e-9) -> IsometryReport:
    """Largest relative defect ``|F(x, v) - G(h(x), dh(x) v)| / F(x, v)`` over ``xs`` x ``vs``."""
    X = as_points(xs, chartX.dim)
    V = as_points(vs, chartX.dim)
    if np.any(np.linalg.norm(V, axis=1) == 0):
        raise MalformedInputError("isometry samples need nonzero vectors")
    chartX.require_inside(X)
    notes = [] if h.analytic_jacobian and type(h).jacobian is not SmoothMap.jacobian else [
        "Jacobian by central differences"]
    Y = _map_into(h, chartY, X)
    J = h.jacobian(X)
    XX = np.repeat(X, V.shape[0], axis=0)
    YY = np.repeat(Y, V.shape[0], axis=0)
    VV = np.tile(V, (X.shape[0], 1))
    W = np.einsum("mij,mj->mi", np.repeat(J, V.shape[0], axis=0), VV)
    F = chartX.field.evaluate(XX, VV)
    G = chartY.field.evaluate(YY, W)
    rel = np.abs(F - G) / F
    k = int(np.argmax(rel))
    return IsometryReport("finsler", float(rel[k]), tol, bool(rel[k] <= tol),
                          {"x": XX[k].tolist(), "v": VV[k].tolist()}, notes)


def _pairs_arrays(pairs, dim):
    P = np.array([as_points(p, dim)[0] for p, _ in pairs])
    Q = np.array([as_points(q, dim)[0] for _, q in pairs])
    return P, Q


def check_metric_isometry(chartX: FinslerChart, chartY: FinslerChart, h: SmoothMap, pairs,
                          tol: float = 1e-3, method: str = "auto", cross_validate: bool = True) -> IsometryReport:
    """Largest ``|d_X(p, q) - d_Y(h(p), h(q))|`` over pairs.

    With ``cross_validate`` the infinitesimal check runs on the pair points
    and directions at the same tolerance, and ``agrees_with_finsler`` records
    whether both verdicts coincide.
    """
    P, Q = _pairs_arrays(pairs, chartX.dim)
    hP, hQ = _map_into(h, chartY, P), _map_into(h, chartY, Q)
    dX = pair_distances(chartX, P, Q, method)
    dY = pair_distances(chartY, hP, hQ, method)
    err = 0.0 if (has_oracle(chartX) and has_oracle(chartY) and method in ("auto", "oracle")) else tol
    defect = np.abs(dX - dY)
    k = int(np.argmax(defect))
    passed = bool(defect[k] <= tol + err)
    rep = IsometryReport("metric", float(defect[k]), tol, passed,
                         {"p": P[k].tolist(), "q": Q[k].tolist(), "d_X": float(dX[k]), "d_Y": float(dY[k])},
                         [] if err == 0 else [f"distance-op allowance {err}"])
    if cross_validate:
        V = Q - P
        keep = np.linalg.norm(V, axis=1) > 0
        pts = np.vstack([P, Q])
        dirs = np.vstack([V[keep], -V[keep]])
        fin = check_finsler_isometry(chartX, chartY, h, pts, dirs / np.linalg.norm(dirs, axis=1, keepdims=True),
                                     tol)
        rep.agrees_with_finsler = fin.passed == passed
        rep.notes.append(f"infinitesimal defect {fin.max_defect:.3g}")
    return rep


def map_slip_constants(h: SmoothMap, chartX: FinslerChart, chartY: FinslerChart, pairs, method: str = "auto"):
    """Sampled ``sup d_Y(h p, h q) / d_X(p, q)`` and ``sup d_X(p, q) / d_Y(h p, h q)``."""
    P, Q = _pairs_arrays(pairs, chartX.dim)
    dX = pair_distances(chartX, P, Q, method)
    dY = pair_distances(chartY, _map_into(h, chartY, P), _map_into(h, chartY, Q), method)
    ok = (dX > 0) & (dY > 0)
    if not ok.any():
        raise MalformedInputError("no pair with positive distance")
    return float(np.max(dY[ok] / dX[ok])), float(np.max(dX[ok] / dY[ok]))


def random_pairs(chart: FinslerChart, n: int, rng: np.random.Generator, box=None):
    """``n`` ordered pairs of distinct uniform points in ``box`` (default: the chart box)."""
    B = chart.box if box is None else np.atleast_2d(np.asarray(box, dtype=float))
    P = rng.uniform(B[:, 0], B[:, 1], size=(n, chart.dim))
    Q = rng.uniform(B[:, 0], B[:, 1], size=(n, chart.dim))
    return list(zip(P, Q))


# --------------------------------------------------------------- operators


class CompositionOperator:
    """``T f = f o h`` taking fields on ``chart_src`` (``Y``) to fields on ``chart_tgt`` (``X``)."""

    def __init__(self, h: SmoothMap, chart_src: FinslerChart, chart_tgt: FinslerChart, grid=None):
        if h.dim_in != chart_tgt.dim or h.dim_out != chart_src.dim:
            raise MalformedInputError("map dimensions do not match the charts")
        self.h, self.src, self.tgt = h, chart_src, chart_tgt
        self.grid = chart_tgt.grid_points() if grid is None else as_points(grid, chart_tgt.dim)
        self.src_grid = _map_into(h, chart_src, self.grid, "image of the target grid")

    def apply_field(self, f: ScalarField) -> ScalarField:
        return ComposedField(f, self.h)

    def apply(self, f):
        """Compose and re-certify on the target grid."""
        g = f.field if isinstance(f, ConeElement) else f
        return cone_certify(self.apply_field(g), self.tgt, self.grid)

    def coupled(self, f) -> ConeElement:
        """Certify ``f`` on the image of the target grid."""
        g = f.field if isinstance(f, ConeElement) else f
        return cone_certify(g, self.src, self.src_grid)

    def adjoint(self, phi: Functional) -> Functional:
        """``T* phi``: each atom ``delta_x`` becomes ``delta_{h(x)}``."""
        atoms = []
        for x, c in phi.atoms:
            y = self.h.forward(as_points(x, self.h.dim_in))[0]
            atoms.append((float(y[0]) if y.size == 1 else y, c))
        return Functional(atoms)

    def inverse(self) -> "CompositionOperator":
        return CompositionOperator(self.h.inverse_map(), self.tgt, self.src, self.src_grid)


@dataclass
class OperatorNormEstimate:
    value: float
    ratios: list
    notes: list = field(default_factory=list)

    def to_json(self):
        return {"estimate": self.value, "n": len(self.ratios), "notes": self.notes}


def operator_norm_estimate(T: CompositionOperator, dictionary) -> OperatorNormEstimate:
    """``max hemi(T f) / hemi(f)`` over the dictionary, norms taken on coupled grids."""
    if not dictionary:
        raise MalformedInputError("operator norm estimate needs a nonempty dictionary")
    ratios, notes = [], []
    for f in dictionary:
        g = f.field if isinstance(f, ConeElement) else f
        src = T.coupled(g)
        if src.hemi_norm <= 0:
            notes.append(f"skipped zero-norm element {g.family}")
            continue
        ratios.append(T.apply(g).hemi_norm / src.hemi_norm)
    if not ratios:
        raise MalformedInputError("every dictionary element has zero norm")
    return OperatorNormEstimate(float(max(ratios)), ratios, notes)


def standard_dictionary(chart: FinslerChart, n_dirs: int = 16, steepness=(1.0, 4.0, 16.0), n_centres: int = 3):
    """Nonnegative arctan ridges ``pi/2 + arctan(k (w . x - t))`` over directions, slopes and offsets.

    Steep ridges make the slip part dominate the hemi-norm, which is where
    norm distortion of a map shows up.
    """
    if chart.dim == 1:
        dirs = [np.array([1.0]), np.array([-1.0])]
    elif chart.dim == 2:
        th = np.linspace(0, 2 * np.pi, n_dirs, endpoint=False)
        dirs = list(np.stack([np.cos(th), np.sin(th)], axis=1))
    else:
        rng = np.random.default_rng(0)
        D = rng.normal(size=(n_dirs, chart.dim))
        dirs = list(D / np.linalg.norm(D, axis=1, keepdims=True))
    centre = chart.box.mean(axis=1)
    half = 0.25 * (chart.box[:, 1] - chart.box[:, 0])
    out = []
    for w in dirs:
        for k in steepness:
            for j in range(n_centres):
                p = centre + (j - (n_centres - 1) / 2) * half * w
                out.append(ArctanRidge(k * w, -k * float(w @ p), 1.0, math.pi / 2))
    return out


def _unit_dirs(dim):
    V = np.eye(dim)
    return np.vstack([V, -V, _diag_dirs(dim)])


def matched_ridges(T: CompositionOperator, n_top: int = 4, steepness: float = 1e4):
    """Steep ridges on the source chart aimed at the largest infinitesimal stretch of ``h``.

    For grid points ``x`` and unit directions ``v`` the stretch is
    ``G(h x, dh v) / F(x, v)``. At the ``n_top`` largest, a ridge centred at
    ``h(x)`` with gradient along ``d_w G(h x, w)`` at ``w = dh v`` has a
    hemi-norm ratio at least that stretch, so the operator-norm estimate sees
    the same samples that bound ``slip(h)``.
    """
    X = T.grid
    V = _unit_dirs(T.tgt.dim)
    J = T.h.jacobian(X)
    Y = T.src_grid
    m, k = X.shape[0], V.shape[0]
    XX, YY = np.repeat(X, k, axis=0), np.repeat(Y, k, axis=0)
    VV = np.tile(V, (m, 1))
    W = np.einsum("mij,mj->mi", np.repeat(J, k, axis=0), VV)
    stretch = T.src.field.evaluate(YY, W) / T.tgt.field.evaluate(XX, VV)
    out = []
    for idx in np.argsort(stretch)[::-1][:n_top]:
        xi = T.src.field.grad_v(YY[idx:idx + 1], W[idx:idx + 1])[0]
        y0 = YY[idx]
        out.append(ArctanRidge(steepness * xi, -steepness * float(xi @ y0), 1.0, math.pi / 2))
    return out


@dataclass
class ConsistencyReport:
    clauses: dict
    slip_h: float
    slip_h_inv: float
    norm_T: float
    norm_T_inv: float
    finsler_isometry: bool
    norms_preserved: bool
    max_norm_distortion: float

    @property
    def consistent(self) -> bool:
        return bool(self.clauses["a"] and self.clauses["b"] and self.norms_preserved == self.finsler_isometry)

    def to_json(self):
        return {"clauses": self.clauses, "slip_h": self.slip_h, "slip_h_inv": self.slip_h_inv,
                "norm_T": self.norm_T, "norm_T_inv": self.norm_T_inv, "finsler_isometry": self.finsler_isometry,
                "norms_preserved": self.norms_preserved, "max_norm_distortion": self.max_norm_distortion,
                "consistent": self.consistent}


def _algebra_identities(T: CompositionOperator, fields_, X) -> bool:
    ok = True
    for f, g in zip(fields_, fields_[1:] + fields_[:1]):
        Tf, Tg = T.apply_field(f).values(X), T.apply_field(g).values(X)
        lin = T.apply_field(SumField([f, g], [2.5, 1.0])).values(X)
        mul = T.apply_field(ProductField(f, g)).values(X)
        scale = np.maximum(1.0, np.abs(Tf) + np.abs(Tg))
        ok &= bool(np.all(np.abs(lin - (2.5 * Tf + Tg)) <= ALGEBRA_RTOL * scale * 4))
        ok &= bool(np.all(np.abs(mul - Tf * Tg) <= ALGEBRA_RTOL * scale ** 2))
    return ok


def myers_nakai_consistency(chartX: FinslerChart, chartY: FinslerChart, h: SmoothMap, dictionary=None,
                            pairs=None, tol: float = 1e-3, grid=None, rng=None) -> ConsistencyReport:
    """Check the structure a map induces on function algebras.

    (a) ``T`` is linear and multiplicative on evaluations;
    (b) ``slip(h) <= ||T|`` and ``slip(h^-1) <= ||T^-1|`` up to ``tol``, with
        the operator norms estimated on the dictionary plus
        :func:`matched_ridges`;
    (c) hemi-norms are preserved on the dictionary within ``tol``.
    The report is consistent when (a) and (b) hold and (c) holds exactly
    when ``h`` passes the infinitesimal isometry check.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    T = CompositionOperator(h, chartY, chartX, grid)
    Tinv = T.inverse()
    dictY = standard_dictionary(chartY) if dictionary is None else [
        d.field if isinstance(d, ConeElement) else d for d in dictionary]
    dictY = dictY + matched_ridges(T)
    dictX = standard_dictionary(chartX) + matched_ridges(Tinv)
    pairs = random_pairs(chartX, 2000, rng) if pairs is None else pairs
    pairs = [(p, q) for p, q in pairs]

    a_ok = _algebra_identities(T, dictY[:6], T.grid) and _algebra_identities(Tinv, dictX[:6], Tinv.grid)
    slip_h, slip_inv = map_slip_constants(h, chartX, chartY, pairs)
    est = operator_norm_estimate(T, dictY)
    est_inv = operator_norm_estimate(Tinv, dictX)
    b_ok = slip_h <= est.value + tol and slip_inv <= est_inv.value + tol

    ratios = np.array(est.ratios + est_inv.ratios)
    distortion = float(np.max(np.abs(ratios - 1.0)))
    preserved = distortion <= tol
    fin = check_finsler_isometry(chartX, chartY, h, T.grid, _unit_dirs(chartX.dim), tol)
    return ConsistencyReport({"a": bool(a_ok), "b": bool(b_ok), "c": bool(preserved)}, slip_h, slip_inv,
                             est.value, est_inv.value, fin.passed, bool(preserved), distortion)


def _diag_dirs(dim):
    if dim == 1:
        return np.zeros((0, 1))
    th = np.linspace(0, 2 * np.pi, 32, endpoint=False)
    if dim == 2:
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    D = np.random.default_rng(1).normal(size=(32, dim))
    return D / np.linalg.norm(D, axis=1, keepdims=True)


# ----------------------------------------------------------- sign obstruction


def zero_evidence(rep: SymmetryReport, decay: float = 0.1) -> bool:
    """True when the index is exactly zero or the sampled ratios decay toward it.

    Decay means at least three samples, strictly decreasing, the last below
    ``decay`` times the first, and no positive certified lower bound.
    """
    if rep.certified_lower is not None and rep.certified_lower > 0:
        return False
    if rep.is_exact and rep.index == 0:
        return True
    t = list(rep.trend)
    return len(t) >= 3 and all(b < a for a, b in zip(t, t[1:])) and t[-1] <= decay * t[0]


def positive_evidence(rep: SymmetryReport) -> bool:
    if rep.certified_lower is not None and rep.certified_lower > 0:
        return True
    return bool(rep.is_exact and rep.index > 0)


def symmetry_sign_compatibility(rep_x: SymmetryReport, rep_y: SymmetryReport) -> dict:
    """Bi-semi-Lipschitz maps preserve the sign of the index of symmetry.

    ``incompatible`` when one side shows zero index and the other a certified
    positive one, ``compatible`` when both signs are settled and equal,
    ``inconclusive`` otherwise.
    """
    zx, zy = zero_evidence(rep_x), zero_evidence(rep_y)
    px, py = positive_evidence(rep_x), positive_evidence(rep_y)
    if (zx and py) or (zy and px):
        verdict = "incompatible"
    elif (px and py) or (zx and zy):
        verdict = "compatible"
    else:
        verdict = "inconclusive"
    return {"verdict": verdict, "x": {"zero": zx, "positive": px, "index": rep_x.index},
            "y": {"zero": zy, "positive": py, "index": rep_y.index}}
