"""Nature's worst-case distribution: a co-monotonic ray through the support box.

For a parameter ``eta`` nature picks an entry point ``omega`` (thresholded
items start at ``upper * exp(-1/eta)``, the rest at their lower bound) and
moves all valuations together along

    v(xi) = min(omega * xi, upper),   xi >= 1,

with ``xi`` drawn from ``G(1) = 0``, ``dG/dxi = zeta * sum(v(xi)) / xi**2``.
Against this law every mechanism earns at most ``zeta * sum(omega)`` in
expected ratio, attained by posting the prices ``omega``; at ``eta = gamma*``
that bound equals ``gamma*`` and certifies optimality of ``M_{gamma*}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import DomainError, ScreeningError, ShapeMismatch
from .model import Instance, validate_instance
from .scalar import bisect_root
from .semi_separable import active_set, solve_gamma_star

XI_CAP = 1e12
BREAK_RTOL = 1e-12


@dataclass(frozen=True)
class AdversaryDistribution:
    eta: float
    omega: np.ndarray
    zeta: float
    breakpoints: tuple[float, ...]
    instance: Instance

    @property
    def caps(self) -> np.ndarray:
        """Per-item ``xi`` at which the item reaches its upper bound."""
        return self.instance.upper / self.omega

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "omega": [float(x) for x in self.omega],
            "zeta": self.zeta,
            "breakpoints": list(self.breakpoints),
        }


def _merge_breakpoints(caps: np.ndarray) -> tuple[float, ...]:
    pts = [1.0]
    for c in np.sort(caps):
        c = float(c)
        if c - pts[-1] > BREAK_RTOL * c:
            pts.append(c)
    return tuple(pts)


def from_omega(instance: Instance, omega, eta: float = math.nan) -> AdversaryDistribution:
    """Ray distribution with an arbitrary entry point ``lower <= omega <= upper``, ``omega > 0``."""
    instance = validate_instance(instance)
    omega = np.array(omega, dtype=float)
    if omega.shape != (instance.n_items,):
        raise ShapeMismatch(f"omega must have {instance.n_items} entries")
    lo, hi = instance.lower, instance.upper
    if np.any(omega <= 0) or np.any(omega < lo * (1 - 1e-12)) or np.any(omega > hi * (1 + 1e-12)):
        raise DomainError("omega must be positive and inside the support box")
    omega = np.minimum(np.maximum(omega, lo), hi)
    zeta = 1.0 / float(np.sum(omega * (np.log(hi / omega) + 1.0)))
    omega.setflags(write=False)
    return AdversaryDistribution(float(eta), omega, zeta, _merge_breakpoints(hi / omega), instance)


def build(eta: float, instance: Instance) -> AdversaryDistribution:
    """The ray distribution ``F_eta``."""
    eta = float(eta)
    if not (0.0 < eta <= 1.0):
        raise DomainError(f"eta must lie in (0, 1], got {eta}")
    instance = validate_instance(instance)
    active = active_set(eta, instance)
    omega = instance.lower.copy()
    omega[active] = instance.upper[active] * math.exp(-1.0 / eta)
    if np.any(omega <= 0):
        raise DomainError(f"eta={eta} is too small: thresholds underflow to zero")
    return from_omega(instance, omega, eta)


def valuation_at(dist: AdversaryDistribution, xi) -> np.ndarray:
    """Point(s) on the ray; a scalar ``xi`` gives shape (J,), an array gives (N, J)."""
    x = np.asarray(xi, dtype=float)
    if np.any(x < 1.0):
        raise DomainError("xi must be >= 1")
    v = np.minimum(np.multiply.outer(x, dist.omega), dist.instance.upper)
    return v


def cdf(dist: AdversaryDistribution, xi):
    """``G(xi)`` as a per-item sum of closed-form antiderivatives."""
    x = np.maximum(np.asarray(xi, dtype=float), 1.0)
    w, hi = dist.omega, dist.instance.upper
    c = hi / w
    xx = x[..., None]
    inner = w * np.log(np.minimum(xx, c))
    outer = np.where(xx > c, w - hi / xx, 0.0)
    out = dist.zeta * (inner + outer).sum(axis=-1)
    return float(out) if np.ndim(xi) == 0 else out


def pdf(dist: AdversaryDistribution, xi):
    x = np.asarray(xi, dtype=float)
    v = np.minimum(np.multiply.outer(x, dist.omega), dist.instance.upper)
    out = np.where(x >= 1.0, dist.zeta * v.sum(axis=-1) / x**2, 0.0)
    return float(out) if np.ndim(xi) == 0 else out


def tail(dist: AdversaryDistribution, xi):
    """``1 - G(xi)``, computed without cancellation beyond the last breakpoint."""
    x = np.asarray(xi, dtype=float)
    far = dist.zeta * float(dist.instance.upper.sum()) / np.maximum(x, 1.0)
    out = np.where(x >= dist.breakpoints[-1], far, 1.0 - cdf(dist, x))
    return float(out) if np.ndim(xi) == 0 else out


def _solve_segments(dist: AdversaryDistribution, target: np.ndarray) -> np.ndarray:
    """``log(xi)`` with ``G(xi) = target`` for targets below ``G`` at the last breakpoint.

    Between breakpoints ``G = zeta * (A y + B - D exp(-y))`` in ``y = log(xi)``,
    which is increasing and concave, so Newton from the left end of the
    segment climbs monotonically to the root.
    """
    bp = np.asarray(dist.breakpoints)
    w, hi = dist.omega, dist.instance.upper
    c = hi / w
    mids = np.sqrt(bp[:-1] * bp[1:])
    capped = c[None, :] <= mids[:, None]
    A = np.where(capped, 0.0, w).sum(axis=1)
    B = np.where(capped, w * (np.log(c) + 1.0), 0.0).sum(axis=1)
    D = np.where(capped, hi, 0.0).sum(axis=1)
    seg = np.clip(np.searchsorted(cdf(dist, bp), target, side="right") - 1, 0, len(mids) - 1)
    a, b, d = A[seg], B[seg], D[seg]
    y_lo, y_hi = np.log(bp[seg]), np.log(bp[seg + 1])
    goal = target / dist.zeta
    y = y_lo.copy()
    for _ in range(60):
        ed = d * np.exp(-y)
        step = (a * y + b - ed - goal) / (a + ed)
        y = np.clip(y - step, y_lo, y_hi)
        if np.all(np.abs(step) <= 1e-15 * (1.0 + np.abs(y))):
            break
    return y


def inverse_cdf(dist: AdversaryDistribution, u) -> np.ndarray:
    """Quantile function of ``xi``, capped at :data:`XI_CAP`."""
    u = np.asarray(u, dtype=float)
    last = dist.breakpoints[-1]
    g_last = cdf(dist, last)
    total_upper = float(dist.instance.upper.sum())
    out = np.empty_like(u)
    in_tail = u >= g_last
    with np.errstate(divide="ignore"):
        out[in_tail] = dist.zeta * total_upper / (1.0 - u[in_tail])
    inner = ~in_tail
    if np.any(inner):
        out[inner] = np.exp(_solve_segments(dist, u[inner]))
    return np.clip(out, 1.0, XI_CAP)


def sample_xi(dist: AdversaryDistribution, count: int, seed: int = 0, shards: int = 1) -> np.ndarray:
    """Draw ``xi`` by inverse transform.

    Shard ``k`` uses generator seed ``seed + k`` and shards are concatenated
    in order, so the output depends only on ``(count, seed, shards)``.
    """
    if count < 0:
        raise DomainError("count must be nonnegative")
    shards = max(1, int(shards))
    sizes = [count // shards + (1 if k < count % shards else 0) for k in range(shards)]
    parts = [inverse_cdf(dist, np.random.default_rng(seed + k).random(n)) for k, n in enumerate(sizes)]
    return np.concatenate(parts) if parts else np.empty(0)


def sample(dist: AdversaryDistribution, count: int, seed: int = 0, shards: int = 1) -> np.ndarray:
    """``count`` valuations from ``F``, shape (count, J)."""
    xi = sample_xi(dist, count, seed, shards)
    return valuation_at(dist, xi).reshape(len(xi), dist.instance.n_items)


def best_response_value(dist: AdversaryDistribution) -> float:
    """Largest expected ratio any feasible mechanism earns under ``dist``: ``zeta * sum(omega)``."""
    return dist.zeta * float(dist.omega.sum())


def best_response_prices(dist: AdversaryDistribution) -> np.ndarray:
    """Posted prices attaining :func:`best_response_value`."""
    return dist.omega.copy()


def best_response_grid(dist: AdversaryDistribution, points: int = 10_000) -> float:
    """Brute-force counterpart of :func:`best_response_value`.

    Posting price ``v_j(x)`` on item ``j`` earns ``v_j(x) * E[1/sum v(xi); xi >= x]``.
    The expectation is integrated numerically from the density on a
    log-spaced grid (breakpoints included), and the per-item maximum over the
    grid is summed across items.
    """
    last = dist.breakpoints[-1]
    far = last * 1e6
    grid = np.unique(np.concatenate([np.geomspace(1.0, far, points), dist.breakpoints]))
    s = np.log(grid)
    v = valuation_at(dist, grid)
    # integrand in log(xi): pdf(xi) / sum v(xi) * xi
    f = pdf(dist, grid) / v.sum(axis=1) * grid
    cum = cumulative_simpson(f, x=s, initial=0.0)
    # beyond the grid every item is capped and the integrand is zeta / xi**2
    rest = cum[-1] - cum + dist.zeta / far
    return float(np.max(v * rest[:, None], axis=0).sum())


def eta_star(instance: Instance, tol: float = 1e-10) -> float:
    """Nature's optimal parameter; coincides with ``gamma*``."""
    instance = validate_instance(instance)
    sol = solve_gamma_star(instance, min(tol, 1e-12))
    if sol.degenerate:
        return 0.0
    value = best_response_value(build(sol.gamma_star, instance))
    if abs(value - sol.gamma_star) > max(tol, 1e-9):
        raise ScreeningError(f"best response {value} does not match eta* {sol.gamma_star}")
    return sol.gamma_star


def _ordered_pair(instance: Instance):
    instance = validate_instance(instance)
    if instance.n_items != 2:
        raise ShapeMismatch(f"two-item operation on {instance.n_items} items")
    order = instance.ratio_order()
    return instance, order, instance.items[order[0]], instance.items[order[1]]


def two_item_ratio(omega1: float, instance: Instance) -> float:
    """Best-response value when item 1 enters the ray at ``omega1`` and item 2 at its lower bound.

    "Item 1" is the item with the smaller ``lower/upper``; the instance may be
    given in either order.
    """
    instance, order, a, b = _ordered_pair(instance)
    top = a.upper * b.lower / b.upper
    if not (a.lower * (1 - 1e-12) <= omega1 <= top * (1 + 1e-12)) or omega1 <= 0:
        raise DomainError(f"omega1={omega1} outside [{a.lower}, {top}]")
    omega = np.empty(2)
    omega[order[0]] = min(max(omega1, a.lower), top)
    omega[order[1]] = b.lower
    return best_response_value(from_omega(instance, omega))


def two_item_optimal_omega1(instance: Instance) -> tuple[float, int]:
    """Nature's best entry point for item 1 in the two-item warm-up.

    The first-order expression ``omega1 + lower2 * (ln(upper2 omega1 / (lower2 upper1)) + 1)``
    is increasing; if it is already nonnegative at ``lower1`` the corner wins
    (case 2), otherwise its root is found by bisection (case 1).
    """
    instance, order, a, b = _ordered_pair(instance)
    if b.lower == 0.0:
        raise DomainError("the second item needs a positive lower bound")
    top = a.upper * b.lower / b.upper

    def foc(w: float) -> float:
        return w + b.lower * (math.log(b.upper * w / (b.lower * a.upper)) + 1.0)

    if a.lower > 0 and foc(a.lower) >= 0:
        return a.lower, 2
    lo = a.lower if a.lower > 0 else top
    while foc(lo) > 0:
        lo *= 1e-3
    res = bisect_root(lambda s: foc(math.exp(s)), math.log(lo), math.log(top), tol=1e-15)
    return max(math.exp(res.root), a.lower), 1
