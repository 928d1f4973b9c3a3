"""Asymmetric derivative norms and semi-Lipschitz constants of smooth fields.

``||df(x)|_F`` is the largest value of ``df(x)(v)`` on the forward unit
sphere ``F(x, v) = 1``. On the line the sphere has two points; in two and
three dimensions it is searched numerically, which yields lower bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._util import as_points
from .errors import (ApproximationFailedError, DegenerateInputError, InvalidStructureError,
                     MalformedInputError)
from .fields import MollifiedField, ScalarField, TabulatedField
from .finsler import FinslerChart, distance_matrix_1d, pair_distances, segment_lengths
from .quasimetric import QUASI_METRIC, QuasiMetricSpace

DIVERGENCE_CAP = 1e6
N_SEED_ANGLES = 256
N_SEED_SPHERE = 2048
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------- derivative norms


def dual_asym_norm(norm_field, X, Xi) -> np.ndarray:
    """``sup { xi . v : F(x, v) = 1 }`` for each row ``(x, xi)``."""
    X = as_points(X, norm_field.dim)
    Xi = as_points(Xi, norm_field.dim)
    if norm_field.dim == 1:
        fwd = norm_field.evaluate(X, np.ones_like(X))
        bwd = norm_field.evaluate(X, -np.ones_like(X))
        if (fwd <= 0).any() or (bwd <= 0).any():
            bad = X[(fwd <= 0) | (bwd <= 0)][0]
            raise InvalidStructureError(f"norm is not positive at x = {bad.tolist()}")
        xi = Xi[:, 0]
        return np.maximum(xi / fwd, -xi / bwd)
    if norm_field.dim == 2:
        return _dual_norm_2d(norm_field, X, Xi)
    if norm_field.dim == 3:
        return _dual_norm_3d(norm_field, X, Xi)
    raise MalformedInputError("derivative norms are implemented up to dimension 3")


def _ratio(norm_field, X, Xi, U):
    """``xi . u / F(x, u)`` for direction batches ``U`` of shape ``(m, k, dim)``."""
    m, k, n = U.shape
    F = norm_field.evaluate(np.repeat(X, k, axis=0), U.reshape(m * k, n)).reshape(m, k)
    if (F <= 0).any():
        bad = X[np.any(F <= 0, axis=1)][0]
        raise InvalidStructureError(f"norm is not positive at x = {bad.tolist()}")
    return np.einsum("mkn,mn->mk", U, Xi) / F


def _dual_norm_2d(norm_field, X, Xi):
    th = np.linspace(0.0, 2 * np.pi, N_SEED_ANGLES, endpoint=False)
    seeds = np.stack([np.cos(th), np.sin(th)], axis=1)
    m = X.shape[0]
    R = _ratio(norm_field, X, Xi, np.broadcast_to(seeds, (m, N_SEED_ANGLES, 2)))
    k = np.argmax(R, axis=1)
    best = R[np.arange(m), k]

    def obj(t):
        U = np.stack([np.cos(t), np.sin(t)], axis=1)[:, None, :]
        return _ratio(norm_field, X, Xi, U)[:, 0]

    step = 2 * np.pi / N_SEED_ANGLES
    a, b = th[k] - step, th[k] + step
    c, d = b - _INVPHI * (b - a), a + _INVPHI * (b - a)
    fc, fd = obj(c), obj(d)
    for _ in range(60):
        left = fc > fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c, d = (np.where(left, b - _INVPHI * (b - a), d),
                np.where(left, c, a + _INVPHI * (b - a)))
        fresh = obj(np.where(left, c, d))
        fc, fd = np.where(left, fresh, fd), np.where(left, fc, fresh)
    out = np.maximum(best, np.maximum(fc, fd))
    out[np.linalg.norm(Xi, axis=1) == 0] = 0.0
    return out


def _sphere_seeds(k):
    i = np.arange(k) + 0.5
    z = 1 - 2 * i / k
    r = np.sqrt(1 - z * z)
    a = np.pi * (1 + 5 ** 0.5) * i
    return np.stack([r * np.cos(a), r * np.sin(a), z], axis=1)


def _dual_norm_3d(norm_field, X, Xi):
    seeds = _sphere_seeds(N_SEED_SPHERE)
    m = X.shape[0]
    R = _ratio(norm_field, X, Xi, np.broadcast_to(seeds, (m, N_SEED_SPHERE, 3)))
    k = np.argmax(R, axis=1)
    best = R[np.arange(m), k]
    U = seeds[k].copy()
    # local pattern search on the tangent plane with shrinking steps
    h = np.full(m, 0.1)
    for _ in range(60):
        t1 = np.cross(U, np.where(np.abs(U[:, :1]) < 0.9, [[1.0, 0, 0]], [[0, 1.0, 0]]))
        t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
        t2 = np.cross(U, t1)
        hh = h[:, None, None]
        cand = U[:, None, :] + hh * np.stack([t1, -t1, t2, -t2], axis=1)
        cand /= np.linalg.norm(cand, axis=2, keepdims=True)
        Rc = _ratio(norm_field, X, Xi, cand)
        j = np.argmax(Rc, axis=1)
        top = Rc[np.arange(m), j]
        better = top > best
        U[better] = cand[np.arange(m), j][better]
        best = np.where(better, top, best)
        h = np.where(better, h, 0.5 * h)
    best[np.linalg.norm(Xi, axis=1) == 0] = 0.0
    return best


def derivative_asym_norm(chart: FinslerChart, f: ScalarField, x):
    """``||df(x)|_F`` at one point (float) or a batch (array)."""
    X = as_points(x, chart.dim)
    chart.require_inside(X)
    out = dual_asym_norm(chart.field, X, f.grad(X))
    return float(out[0]) if np.ndim(x) == (0 if chart.dim == 1 else 1) else out


@dataclass
class DerivativeNormProfile:
    xs: np.ndarray
    values: np.ndarray
    supremum: float
    argmax: object
    diverges: bool
    max_sampled: float
    cap: float = DIVERGENCE_CAP

    def to_json(self):
        return {"supremum": self.supremum, "argmax": self.argmax, "diverges": self.diverges,
                "max_sampled": self.max_sampled, "cap": self.cap, "n_samples": int(self.values.size)}


def sup_derivative_norm(chart: FinslerChart, f: ScalarField, xs, cap: float = DIVERGENCE_CAP) -> DerivativeNormProfile:
    """Sampled supremum of ``||df(x)|_F``.

    ``supremum`` is ``inf`` and ``diverges`` is set when a sampled value
    exceeds ``cap``.
    """
    X = as_points(xs, chart.dim)
    if X.shape[0] == 0:
        raise DegenerateInputError("sup_derivative_norm needs at least one sample")
    vals = derivative_asym_norm(chart, f, X)
    k = int(np.argmax(vals))
    top = float(vals[k])
    diverges = top > cap
    arg = float(X[k, 0]) if chart.dim == 1 else X[k].tolist()
    return DerivativeNormProfile(X if chart.dim > 1 else X[:, 0], vals, math.inf if diverges else (top if top > 0 else 0.0),
                                 arg, bool(diverges), top, cap)


# ----------------------------------------------------------- slip constants


def slip_from_pairs(fp, fq, dpq):
    """``max(f(q) - f(p), 0) / d(p, q)`` maximised over pairs; returns ``(value, index)``."""
    rise = np.maximum(np.asarray(fq) - np.asarray(fp), 0.0)
    dpq = np.asarray(dpq, dtype=float)
    zero = dpq <= 0
    if np.any(zero & (rise > 0)):
        return math.inf, int(np.flatnonzero(zero & (rise > 0))[0])
    if rise.size == 0:
        return 0.0, None
    r = np.divide(rise, dpq, out=np.zeros_like(rise), where=~zero)
    k = int(np.argmax(r))
    return float(r[k]), k


def chain_slip_1d(chart: FinslerChart, xs, fvals) -> float:
    """Semi-Lipschitz constant of sampled values over all pairs of a 1-D point set.

    Distances on a line are additive along monotone paths, so the ratio on
    any pair is a weighted average of ratios of consecutive points; the
    maximum over all pairs is attained on neighbours, in one of the two
    directions.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    order = np.argsort(xs)
    x, v = xs[order], np.asarray(fvals, dtype=float).ravel()[order]
    if x.size < 2:
        return 0.0
    pots = chart.field.potentials()
    if pots is not None:
        fwd = pots[0](x[1:]) - pots[0](x[:-1])
        bwd = pots[1](x[1:]) - pots[1](x[:-1])
    else:
        fwd = segment_lengths(chart.field, x[:-1, None], x[1:, None])
        bwd = segment_lengths(chart.field, x[1:, None], x[:-1, None])
    dv = np.diff(v)
    up, _ = slip_from_pairs(np.zeros_like(dv), dv, fwd)
    down, _ = slip_from_pairs(np.zeros_like(dv), -dv, bwd)
    return max(up, down)


@dataclass
class SlipReport:
    s1: float
    s2: float
    coverage_slack: float
    tol: float
    passed: bool
    witness_pair: tuple | None
    diverges: bool
    notes: list = field(default_factory=list)

    def to_json(self):
        return {"slip_empirical": self.s1, "derivative_sup": self.s2, "coverage_slack": self.coverage_slack,
                "tol": self.tol, "pass": self.passed, "witness_pair": self.witness_pair,
                "diverges": self.diverges, "notes": self.notes}


def _all_pairs_1d(chart, xs):
    D = distance_matrix_1d(chart, xs)
    i, j = np.nonzero(~np.eye(len(xs), dtype=bool))
    return i, j, D[i, j]


def verify_slip_equals_derivative_sup(chart: FinslerChart, f: ScalarField, xs, pairs=None,
                                      tol: float = 1e-2) -> SlipReport:
    """Compare the pairwise slip constant with the sampled derivative supremum.

    ``S1`` is the largest ``max(f(q) - f(p), 0) / d(p, q)`` over the pairs
    (all ordered pairs of ``xs`` by default on 1-D charts). ``S2`` is the
    sampled supremum of ``||df(x)|_F``. The check passes when
    ``S1 <= S2 (1 + tol)`` and ``S2 <= S1 (1 + tol) + slack``, where
    ``slack`` is the largest jump of the derivative profile between
    consecutive samples: a pair set cannot see a peak narrower than its
    spacing.
    """
    X = as_points(xs, chart.dim)
    prof = sup_derivative_norm(chart, f, X)
    notes = []
    if pairs is None:
        if chart.dim != 1:
            raise MalformedInputError("pairs are required on charts of dimension above one")
        xs1 = X[:, 0]
        if xs1.size <= 3000:
            i, j, d = _all_pairs_1d(chart, xs1)
            fv = f.values(X)
            s1, k = slip_from_pairs(fv[i], fv[j], d)
            wit = None if k is None else (float(xs1[i[k]]), float(xs1[j[k]]))
        else:
            s1 = chain_slip_1d(chart, xs1, f.values(X))
            wit = None
            notes.append("all-pairs constant from consecutive samples")
    else:
        Pp = np.array([as_points(p, chart.dim)[0] for p, _ in pairs])
        Qq = np.array([as_points(q, chart.dim)[0] for _, q in pairs])
        d = pair_distances(chart, Pp, Qq)
        s1, k = slip_from_pairs(f.values(Pp), f.values(Qq), d)
        wit = None if k is None else (Pp[k].tolist(), Qq[k].tolist())
    vals = prof.values
    slack = float(np.max(np.abs(np.diff(vals)))) if vals.size > 1 else 0.0
    s2 = prof.supremum
    if math.isinf(s1) or math.isinf(s2):
        passed = math.isinf(s1) and math.isinf(s2)
        notes.append("infinite constant")
    else:
        passed = s1 <= s2 * (1 + tol) + 1e-15 and s2 <= s1 * (1 + tol) + slack
    return SlipReport(s1, s2, slack, tol, bool(passed), wit, prof.diverges, notes)


def grid_quasi_metric_1d(chart: FinslerChart, xs) -> QuasiMetricSpace:
    """The finite quasi-metric space of sample points with the chart's exact 1-D distances."""
    xs = np.asarray(xs, dtype=float).ravel()
    D = distance_matrix_1d(chart, xs)
    return QuasiMetricSpace([f"{x:g}" for x in xs], D, QUASI_METRIC, exact=False)


# ---------------------------------------------------------------- smoothing


@dataclass
class SmoothingReport:
    width: float
    max_error: float
    slip_f: float
    slip_g: float
    attempts: int

    def to_json(self):
        return self.__dict__.copy()


def _eps_values(epsilon, x):
    if callable(epsilon):
        e = np.asarray(epsilon(x), dtype=float) * np.ones_like(x)
    else:
        e = np.full_like(x, float(epsilon))
    if (e <= 0).any():
        raise MalformedInputError("epsilon must be positive")
    return e


def smooth_approximate_1d(chart: FinslerChart, f: ScalarField, epsilon, r: float,
                          width: float | None = None, min_width: float | None = None,
                          return_report: bool = False):
    """C1 field ``g`` with ``|g - f| <= epsilon`` and ``slip(g) <= slip(f) + r`` on the verification grid.

    ``f`` is a piecewise-linear table (already C1 fields are returned
    unchanged). ``g`` is the convolution of ``f`` with a quartic kernel;
    its half-width starts at ``width`` (by default a few times the smallest
    epsilon over the steepest table slope)
    and halves until both clauses hold on the table nodes and midpoints.
    """
    if chart.dim != 1:
        raise MalformedInputError("smooth_approximate_1d works on 1-D charts")
    if r <= 0:
        raise MalformedInputError("r must be positive")
    if f.is_c1:
        return (f, SmoothingReport(0.0, 0.0, math.nan, math.nan, 0)) if return_report else f
    if not isinstance(f, TabulatedField):
        raise MalformedInputError("only tabulated fields can be smoothed")
    xs = f.xs
    grid = np.sort(np.concatenate([xs, 0.5 * (xs[1:] + xs[:-1])]))
    chart.require_inside(grid, "table node")
    eps = _eps_values(epsilon, grid)
    fg = f.values(grid[:, None])
    slip_f = chain_slip_1d(chart, grid, fg)
    if math.isinf(slip_f):
        raise MalformedInputError("table has an infinite semi-Lipschitz constant")
    if width is None:
        # |g - f| <= (5/16) w max|f'| for the quartic kernel
        steep = max(float(np.max(np.abs(f.slopes))), 1e-300)
        width = min((xs[-1] - xs[0]) / 10.0, 4.0 * float(eps.min()) / steep)
    w = float(width)
    w_min = float(np.min(np.diff(xs))) / 16.0 if min_width is None else float(min_width)
    attempts = 0
    diag = {}
    while w >= w_min:
        attempts += 1
        g = MollifiedField(f, w)
        gv = g.values(grid[:, None])
        err = np.abs(gv - fg) - eps
        slip_g = chain_slip_1d(chart, grid, gv)
        diag = {"width": w, "worst_excess": float(err.max()), "slip_f": slip_f, "slip_g": slip_g}
        if err.max() <= 0 and slip_g <= slip_f + r:
            rep = SmoothingReport(w, float(np.max(np.abs(gv - fg))), slip_f, slip_g, attempts)
            return (g, rep) if return_report else g
        w *= 0.5
    raise ApproximationFailedError("smoothing failed at the minimum width", diag)


# ------------------------------------------------------ norm comparison on a line


def default_example34_samples() -> np.ndarray:
    core = np.linspace(-50.0, 50.0, 2001)
    tail = np.logspace(np.log10(50.0), 4.0, 200)
    return np.unique(np.concatenate([-tail, core, tail]))


def example34_ratio_experiment(chart: FinslerChart, fields, xs=None, cap: float = DIVERGENCE_CAP) -> dict:
    """Compare the classical sup of ``|f'|`` with ``sup { |df(x)(v)| : F(x, v) <= 1 }``.

    For each field the report holds both norms, their ratio, whether
    ``||df|| <= 2 ||df||^F`` holds (always expected, since the backward unit
    vector has length at least one half), and whether the reverse bound
    ``||df||^F <= 2 ||df||`` holds on the sample. The reverse bound is only
    recorded.
    """
    if chart.dim != 1:
        raise MalformedInputError("the norm comparison is a 1-D experiment")
    xs = default_example34_samples() if xs is None else np.asarray(xs, dtype=float).ravel()
    X = xs[:, None]
    chart.require_inside(X)
    reach = np.maximum(1.0 / chart.field.evaluate(X, np.ones_like(X)),
                       1.0 / chart.field.evaluate(X, -np.ones_like(X)))
    out = {}
    for name, f in (fields.items() if isinstance(fields, dict) else enumerate(fields)):
        g = np.abs(f.grad(X)[:, 0])
        classical = float(g.max())
        fin_vals = g * reach
        k = int(np.argmax(fin_vals))
        finsler = float(fin_vals[k])
        diverges = finsler > cap
        ratio = finsler / classical if classical > 0 else (math.nan if finsler == 0 else math.inf)
        out[str(name)] = {
            "classical": classical,
            "finsler": math.inf if diverges else finsler,
            "finsler_max_sampled": finsler,
            "argmax": float(xs[k]),
            "ratio": math.inf if diverges else ratio,
            "diverges": bool(diverges),
            "lower_bound_holds": bool(classical <= 2 * finsler * (1 + 1e-12)),
            "upper_bound_holds": bool(not diverges and finsler <= 2 * classical * (1 + 1e-12)),
        }
    return out
