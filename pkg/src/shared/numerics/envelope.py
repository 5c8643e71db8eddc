"""
Modulus-of-continuity certification from sampled (abscissa, value) data.

The envelope is the least concave nondecreasing majorant of max(value, 0) anchored at
the origin. A finite sample always admits such a majorant, so certification also asks
that it does not blow up as pairs coalesce: the worst ratio value/abscissa is binned by
pair distance into dyadic shells and its log-log growth over the finest shells must stay
below ``MAX_COALESCENCE_EXPONENT``.
"""

from __future__ import annotations

import math

import numpy as np
import numpy.typing as npt

from shared.schemas.reports import EnvelopeFit

ORIGIN_TOLERANCE = 1e-6
MAX_COALESCENCE_EXPONENT = 0.25
COINCIDENT = 1e-12
FINE_SHELLS = 3
MAX_KNOTS = 64


def concave_majorant(r: npt.ArrayLike, y: npt.ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    """
    Upper concave hull of {(0,0)} ∪ {(r_i, y_i)}, flattened after its maximum.
    """

    r = np.asarray(r, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    order = np.lexsort((-y, r))
    xs = np.concatenate([[0.0], r[order]])
    ys = np.concatenate([[0.0], y[order]])
    hull_x: list[float] = []
    hull_y: list[float] = []
    for px, py in zip(xs, ys, strict=True):
        if hull_x and px == hull_x[-1]:
            if py <= hull_y[-1]:
                continue
            hull_x.pop()
            hull_y.pop()
        while len(hull_x) >= 2:
            ax, ay, bx, by = hull_x[-2], hull_y[-2], hull_x[-1], hull_y[-1]
            if (by - ay) * (px - ax) <= (py - ay) * (bx - ax):
                hull_x.pop()
                hull_y.pop()
            else:
                break
        hull_x.append(float(px))
        hull_y.append(float(py))
    knots_x = np.asarray(hull_x)
    knots_y = np.maximum.accumulate(np.asarray(hull_y))
    return knots_x, knots_y


def coalescence_exponent(
    distance: npt.ArrayLike, ratio: npt.ArrayLike, floor: float = 1e-12
) -> tuple[float, int]:
    """
    Log-log slope of the per-shell worst ratio against 1/distance over the finest shells.

    Returns (exponent, number of nonempty shells). Fewer than two shells, or ratios that
    are all negligible, give exponent 0.
    """

    d = np.asarray(distance, dtype=np.float64)
    rho = np.asarray(ratio, dtype=np.float64)
    mask = d > COINCIDENT
    if not np.any(mask):
        return 0.0, 0
    d, rho = d[mask], rho[mask]
    shell = np.floor(np.log2(d)).astype(int)
    levels = np.unique(shell)
    worst = np.array([np.max(rho[shell == k]) for k in levels])
    if len(levels) < 2:
        return 0.0, int(len(levels))
    finest = slice(0, min(FINE_SHELLS, len(levels)))
    lv, wv = levels[finest], worst[finest]
    if np.all(wv <= floor):
        return 0.0, int(len(levels))
    centers = 2.0 ** (lv.astype(np.float64) + 0.5)
    slope = np.polyfit(np.log(1.0 / centers), np.log(np.maximum(wv, floor)), 1)[0]
    return float(slope), int(len(levels))


def fit_envelope(
    abscissa: npt.ArrayLike, values: npt.ArrayLike, distance: npt.ArrayLike
) -> EnvelopeFit:
    r = np.asarray(abscissa, dtype=np.float64)
    y = np.maximum(np.asarray(values, dtype=np.float64), 0.0)
    d = np.asarray(distance, dtype=np.float64)
    at_zero = r <= COINCIDENT
    value_at_zero = float(np.max(y[at_zero])) if np.any(at_zero) else 0.0
    if np.any(~at_zero):
        knots_x, knots_y = concave_majorant(r[~at_zero], y[~at_zero])
    else:
        knots_x, knots_y = np.array([0.0]), np.array([0.0])
    slope = float(knots_y[1] / knots_x[1]) if len(knots_x) > 1 and knots_x[1] > 0 else 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(r > COINCIDENT, y / np.where(r > COINCIDENT, r, 1.0), 0.0)
    exponent, shells = coalescence_exponent(d, ratio)
    if len(knots_x) > MAX_KNOTS:
        keep = np.unique(np.linspace(0, len(knots_x) - 1, MAX_KNOTS).round().astype(int))
        knots_x, knots_y = knots_x[keep], knots_y[keep]
    return EnvelopeFit(
        abscissa=[float(v) for v in knots_x],
        omega=[float(v) for v in knots_y],
        value_at_zero=value_at_zero,
        initial_slope=slope if math.isfinite(slope) else 0.0,
        coalescence_exponent=exponent,
        shells=shells,
    )


def envelope_certified(fit: EnvelopeFit, tolerance_scale: float = 1.0) -> bool:
    return (
        fit.value_at_zero <= ORIGIN_TOLERANCE * tolerance_scale
        and fit.coalescence_exponent <= MAX_COALESCENCE_EXPONENT
    )
