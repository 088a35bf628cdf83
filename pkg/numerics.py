"""Numerical building blocks: quadrature, 1-D maximization, normal CDF and grids."""
import logging
import math
from collections.abc import Callable

import numpy as np
from scipy import special

from config import SETTINGS
from errors import ModelInputError, NumericalError

logger = logging.getLogger(__name__)

# --- Configuration (Defaults/Constants) ---
QUAD_TOL = SETTINGS.quad_tol
QUAD_MAX_DEPTH = 50
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0          # 1 / phi
INV_PHI_SQUARE = (3.0 - math.sqrt(5.0)) / 2.0   # 1 / phi^2


# --- Normal distribution ---
def normal_cdf(x):
    """Standard normal CDF, erfc-based (accurate in both tails)."""
    return special.ndtr(x)


def log_normal_cdf(x):
    """log Phi(x), finite far into the lower tail."""
    return special.log_ndtr(x)


# --- Quadrature ---
def _simpson(fa: float, fm: float, fb: float, h: float) -> float:
    return h / 3.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = QUAD_TOL,
    panels: int = 1,
    max_depth: int = QUAD_MAX_DEPTH,
) -> float:
    """Adaptive Simpson's rule with Richardson correction.

    The interval is first split into ``panels`` equal pieces so that narrow
    peaks cannot hide between the five initial nodes; the absolute tolerance is
    shared evenly between the pieces.

    Args:
        f: Scalar integrand, finite on [a, b].
        a: Lower bound.
        b: Upper bound.
        tol: Absolute error tolerance for the whole integral.
        panels: Number of initial sub-intervals.
        max_depth: Bisection depth cap per panel.

    Returns:
        The integral estimate.
    """
    if a == b:
        return 0.0
    if a > b:
        return -adaptive_simpson(f, b, a, tol, panels, max_depth)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ModelInputError(f"Integration bounds must be finite, got [{a}, {b}]")
    if panels < 1:
        raise ModelInputError("panels must be at least 1")

    depth_capped = False

    def _adaptive(lo, hi, flo, fmid, fhi, whole, depth, local_tol):
        nonlocal depth_capped
        mid = 0.5 * (lo + hi)
        h = 0.5 * (hi - lo)
        flm = f(0.5 * (lo + mid))
        frm = f(0.5 * (mid + hi))
        left = _simpson(flo, flm, fmid, 0.5 * h)
        right = _simpson(fmid, frm, fhi, 0.5 * h)
        delta = left + right - whole
        if abs(delta) <= 15.0 * local_tol:
            return left + right + delta / 15.0
        if depth >= max_depth:
            depth_capped = True
            return left + right + delta / 15.0
        return (_adaptive(lo, mid, flo, flm, fmid, left, depth + 1, 0.5 * local_tol)
                + _adaptive(mid, hi, fmid, frm, fhi, right, depth + 1, 0.5 * local_tol))

    edges = np.linspace(a, b, panels + 1)
    panel_tol = tol / panels
    total = 0.0
    f_left = f(float(edges[0]))
    for lo, hi in zip(edges[:-1], edges[1:]):
        lo, hi = float(lo), float(hi)
        f_right = f(hi)
        f_mid = f(0.5 * (lo + hi))
        whole = _simpson(f_left, f_mid, f_right, 0.5 * (hi - lo))
        total += _adaptive(lo, hi, f_left, f_mid, f_right, whole, 0, panel_tol)
        f_left = f_right

    if depth_capped:
        logger.warning("Adaptive Simpson hit depth cap %d on [%g, %g]", max_depth, a, b)
    if not math.isfinite(total):
        raise NumericalError(f"Non-finite integral on [{a}, {b}]")
    return total


# --- Golden-section search ---
def golden_section_max(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-6,
) -> tuple[float, float]:
    """Maximizes a unimodal f on [a, b] by golden-section search.

    The number of iterations is fixed by the bracket width and ``tol``, so the
    evaluation sequence (and the result) is deterministic.

    Returns:
        (x, f(x)) for the better of the two final interior points.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        x = 0.5 * (a + b)
        return x, f(x)

    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))

    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = f(c)
    yd = f(d)

    for _ in range(n - 1):
        if yc >= yd:
            b = d
            d = c
            yd = yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            a = c
            c = d
            yc = yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = f(d)

    if yc >= yd:
        return c, yc
    return d, yd


# --- Grids ---
def geometric_grid(start: float = 1e-4, stop: float = 10.0, num: int = 400) -> np.ndarray:
    """Geometric time grid used for every emitted density curve."""
    if not (0.0 < start < stop) or num < 2:
        raise ModelInputError("Geometric grid needs 0 < start < stop and at least 2 points")
    return np.geomspace(start, stop, num)
