"""Principal-branch Lambert W and bracketed bisection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import DomainError, NoSignChange

INV_E = math.exp(-1.0)
# 1/e - INV_E, so that x + 1/e is exact near the branch point
INV_E_LO = -1.2428753672788363e-17
BRANCH_SLACK = 1e-12
DEFAULT_TOL = 1e-12


def _halley(x: float, w: float, max_iter: int = 60) -> tuple[float, bool]:
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            return w, False
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0 or not math.isfinite(denom):
            return w, False
        step = f / denom
        w -= step
        if abs(step) <= 4e-16 * (1.0 + abs(w)):
            return w, True
    return w, False


def _bisect_w(x: float) -> float:
    # w*e^w is increasing on [-1, inf)
    lo = -1.0
    hi = max(1.0, math.log1p(x) + 1.0) if x > 0 else 0.0
    while hi * math.exp(hi) < x:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if mid * math.exp(mid) < x:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# expansion of W0 about -1/e in p = sqrt(2(e x + 1))
_BRANCH_COEFFS = (
    -1.0, 1.0, -1.0 / 3.0, 11.0 / 72.0, -43.0 / 540.0, 769.0 / 17280.0, -221.0 / 8505.0,
    680863.0 / 43545600.0, -1963.0 / 204120.0, 226287557.0 / 37623398400.0,
)


def _branch_series(p: float) -> float:
    acc = 0.0
    for c in reversed(_BRANCH_COEFFS):
        acc = acc * p + c
    return acc


def lambert_w0(x: float) -> float:
    """Principal branch ``W0(x)``: the solution ``w >= -1`` of ``w * exp(w) = x``.

    Accepts ``x >= -1/e`` (with a 1e-12 slack that is clamped to the branch
    point).  Close to the branch point a series in ``sqrt(2(e x + 1))`` is
    used; elsewhere Halley's iteration does the work, with plain bisection
    as a fallback if it fails to converge.
    """
    x = float(x)
    if math.isnan(x) or x < -INV_E - BRANCH_SLACK:
        raise DomainError(f"lambert_w0 is undefined for x={x!r} < -1/e")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    if (x + INV_E) + INV_E_LO <= 0.0:
        return -1.0
    if x < 0.0:
        p = math.sqrt(max(2.0 * math.e * ((x + INV_E) + INV_E_LO), 0.0))
        if p < 0.05:
            # Halley loses digits near the branch point; the series is exact to rounding here
            return _branch_series(p)
        w0 = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    elif x <= math.e:
        w0 = math.log1p(x)
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w0 = l1 - l2 + l2 / l1
    w, ok = _halley(x, w0)
    if not ok or w < -1.0 or not math.isfinite(w):
        return _bisect_w(x)
    return w


@dataclass(frozen=True)
class RootResult:
    root: float
    iterations: int
    bracket: tuple[float, float]
    residual: float
    converged: bool = True


def bisect_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = 400,
) -> RootResult:
    """Bisection for a monotone ``f`` with ``f(lo) * f(hi) <= 0``.

    Stops when the bracket is at most ``tol`` wide (or cannot shrink in
    floating point).  The returned root is whichever of the final bracket
    endpoints and midpoint has the smallest ``|f|``.
    """
    lo, hi = float(lo), float(hi)
    if lo > hi:
        lo, hi = hi, lo
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise NoSignChange(f"f({lo})={flo:g} and f({hi})={fhi:g} have the same sign")
    if flo == 0.0:
        return RootResult(lo, 0, (lo, lo), 0.0)
    if fhi == 0.0:
        return RootResult(hi, 0, (hi, hi), 0.0)
    rising = fhi > 0
    it = 0
    while hi - lo > tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        it += 1
        fm = f(mid)
        if fm == 0.0:
            return RootResult(mid, it, (mid, mid), 0.0)
        if (fm > 0) == rising:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    mid = 0.5 * (lo + hi)
    fmid = f(mid)
    root, res = min(((lo, flo), (mid, fmid), (hi, fhi)), key=lambda p: abs(p[1]))
    return RootResult(root, it, (lo, hi), res, converged=hi - lo <= tol or it < max_iter)
