import math

import numpy as np


def as_points(x, dim: int) -> np.ndarray:
    """Coerce a point or a batch of points to shape ``(m, dim)``."""
    a = np.asarray(x, dtype=float)
    if dim == 1:
        return a.reshape(-1, 1)
    if a.ndim == 1:
        if a.shape[0] != dim:
            raise ValueError(f"expected a point of dimension {dim}, got shape {a.shape}")
        return a.reshape(1, dim)
    return a.reshape(-1, dim)


def is_single(x, dim: int) -> bool:
    nd = np.ndim(x)
    return nd == 0 if dim == 1 else nd == 1


def jsonable(obj):
    """Recursively convert numpy values, tuples and infinities for ``json.dump``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return None
        return v
    if hasattr(obj, "to_json"):
        return jsonable(obj.to_json())
    return obj


def golden_section(fun, a: float, b: float, tol: float, max_iter: int = 200):
    """Minimise a unimodal scalar function on ``[a, b]``; returns ``(x, f(x))``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return (c, fc) if fc < fd else (d, fd)
