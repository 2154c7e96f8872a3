"""Abelian integrals ``int x**i dx / sqrt|P(x)|`` between consecutive zeros of ``P``.

Between two simple zeros ``lo < hi`` the substitution ``x = m + r cos(theta)``
turns ``dx / sqrt((x - lo)(hi - x))`` into ``d theta``, so the integrand becomes
a smooth even periodic function of ``theta`` and the trapezoidal rule
converges geometrically. The remaining factor is evaluated as a product over
the other zeros only.

Two charts are supported. The direct chart uses ``x`` itself. The reciprocal
chart uses ``u = 1/x``, in which the curve reads ``v**2 = u prod(c_k u - 1)``
and ``x**i dx / y`` becomes ``u**(g-1-i) du / v`` up to orientation.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .config import DEFAULT, Tolerances
from .errors import NonPositiveIntegrand, QuadratureNotConverged, ValidationError
from .spectral import (
    DROP_ZERO,
    BandIntervals,
    SpectralCurve,
    admissible_intervals,
    eval_P,
    gap_intervals,
    ordered_branch_points,
    paired_intervals,
)

CHART_DIRECT = "direct"
CHART_RECIPROCAL = "reciprocal"


@dataclass(frozen=True)
class PeriodVector:
    values: np.ndarray
    interval: tuple[float, float]
    kind: str
    estimated_error: np.ndarray
    nodes: int = 0
    chart: str = CHART_DIRECT

    def __len__(self):
        return len(self.values)


@functools.lru_cache(maxsize=4096)
def _interval_integrals(roots: tuple, lead: float, k: int, max_power: int,
                        rel_tol: float, abs_tol: float, max_nodes: int):
    lo, hi = roots[k], roots[k + 1]
    others = np.array(roots[:k] + roots[k + 2:])
    m = 0.5 * (lo + hi)
    r = 0.5 * (hi - lo)
    powers = np.arange(max_power + 1)

    def f(theta):
        x = m + r * np.cos(theta)
        rest = lead * np.prod(np.abs(x[:, None] - others[None, :]), axis=1)
        return (x[:, None] ** powers[None, :]) / np.sqrt(rest)[:, None]

    n = 8
    vals = f(np.linspace(0.0, np.pi, n + 1))
    acc = vals[1:-1].sum(axis=0) + 0.5 * (vals[0] + vals[-1])
    est = acc * (np.pi / n)
    while True:
        n *= 2
        if n > max_nodes:
            raise QuadratureNotConverged(
                f"integral over [{lo}, {hi}] did not converge with {max_nodes} nodes"
            )
        theta = np.pi * np.arange(1, n, 2) / n
        acc = acc + f(theta).sum(axis=0)
        new = acc * (np.pi / n)
        err = np.abs(new - est)
        est = new
        if n >= 32 and np.all(err <= rel_tol * np.abs(new) + abs_tol):
            return new, err, n


def root_interval_integrals(roots, lead, k, max_power, tol: Tolerances = DEFAULT):
    """``int_{roots[k]}^{roots[k+1]} x**p dx / sqrt(lead * prod|x - r|)`` for ``p = 0..max_power``.

    Returns ``(values, estimated_error, nodes)``.
    """
    roots = tuple(float(v) for v in roots)
    return _interval_integrals(roots, float(lead), int(k), int(max_power),
                               tol.quad_rel, tol.quad_abs, tol.quad_max_nodes)


def chart_roots(c: SpectralCurve, chart: str = CHART_DIRECT):
    """Sorted zeros and leading coefficient magnitude of the curve polynomial in a chart."""
    if chart == CHART_DIRECT:
        return tuple(c.branch_points), 1.0
    if chart == CHART_RECIPROCAL:
        nz = c.nonzero_roots
        return tuple(sorted([0.0, *(1.0 / nz)])), float(np.prod(nz))
    raise ValueError(f"unknown chart {chart!r}")


def _root_index(roots, value):
    k = int(np.argmin(np.abs(np.asarray(roots) - value)))
    if abs(roots[k] - value) > 1e-12 * max(1.0, abs(value)):
        raise ValidationError(f"{value} is not a zero of the curve polynomial")
    return k


def interval_vector(c: SpectralCurve, interval, kind: str, chart: str = CHART_DIRECT,
                    max_power: int | None = None, tol: Tolerances = DEFAULT) -> PeriodVector:
    """All power integrals over an interval between consecutive zeros (given in chart coordinates)."""
    roots, lead = chart_roots(c, chart)
    lo, hi = interval
    k = _root_index(roots, lo)
    if k + 1 >= len(roots) or _root_index(roots, hi) != k + 1:
        raise ValidationError(f"[{lo}, {hi}] is not bounded by consecutive zeros")
    if hi - lo <= tol.root * (hi + lo):
        raise ValidationError(f"degenerate interval [{lo}, {hi}]")
    mp = c.genus if max_power is None else max_power
    vals, err, n = root_interval_integrals(roots, lead, k, mp, tol)
    return PeriodVector(vals.copy(), (lo, hi), kind, err.copy(), n, chart)


def band_vector(c: SpectralCurve, s: int, tol: Tolerances = DEFAULT) -> PeriodVector:
    """Integrals ``I_{s,i}`` over band ``s`` (1-based) for ``i = 0..g``."""
    bands = admissible_intervals(c)
    lo, hi = bands[s]
    mid = 0.5 * (lo + hi)
    if eval_P(c, mid) < 0:
        raise NonPositiveIntegrand(f"P < 0 inside band [{lo}, {hi}]")
    return interval_vector(c, (lo, hi), "band", tol=tol)


def band_integral(c: SpectralCurve, s: int, i: int, tol: Tolerances = DEFAULT) -> float:
    """``int_{gamma'_s}^{gamma''_s} x**i dx / sqrt(P(x))`` (positive root)."""
    return float(band_vector(c, s, tol).values[i])


def gap_vector(c: SpectralCurve, k: int, tol: Tolerances = DEFAULT) -> PeriodVector:
    """Integrals over the ``k``-th gap (1-based) between consecutive bands, ``i = 0..g``.

    The curve is real there only up to a factor ``sqrt(-1)``; these are the
    magnitudes of the imaginary periods.
    """
    gaps = gap_intervals(c)
    if not 1 <= k <= len(gaps):
        raise IndexError(f"gap index {k} outside 1..{len(gaps)}")
    return interval_vector(c, gaps[k - 1], "gap", tol=tol)


def gap_integral(c: SpectralCurve, k: int, i: int, tol: Tolerances = DEFAULT) -> float:
    return float(gap_vector(c, k, tol).values[i])


def abel_difference(c: SpectralCurve, b: BandIntervals | None, s: int,
                    tol: Tolerances = DEFAULT) -> PeriodVector:
    """``A(P_{gamma'_s}) - A(P_{gamma''_s})`` for the projected Abel map.

    Component 0 is identically zero; component ``i`` is ``(-1)**s I_{s,i}``,
    the sign coming from the sheet ``y = (-1)**s sqrt(P)`` of both endpoints.
    """
    if b is not None and tuple(b[s]) != tuple(admissible_intervals(c)[s]):
        raise ValidationError("band data does not belong to this curve")
    v = band_vector(c, s, tol)
    vals = (-1.0) ** s * v.values
    vals[0] = 0.0
    err = v.estimated_error.copy()
    err[0] = 0.0
    return PeriodVector(vals, v.interval, "band", err, v.nodes)


def abel_prime_vectors(c: SpectralCurve, drop: str = DROP_ZERO, chart: str = CHART_RECIPROCAL,
                       tol: Tolerances = DEFAULT):
    """Band and gap vectors of the projected Abel map that drops the flow direction.

    Cuts are the consecutive pairs of the paired zero list (see
    :func:`ordered_branch_points`); gaps lie between consecutive cuts.

    In the reciprocal chart the vectors hold ``int u**k du / |v|`` for
    ``k = 0..g-2`` with a final 0 (length ``g``), and the cuts are listed in
    ascending ``u``. In the direct chart they hold ``int x**i dx / |y|`` for
    ``i = 0..g-1`` with a final 0 (length ``g + 1``). All entries before the
    zero are positive.
    """
    g = c.genus
    allz, z = ordered_branch_points(c, drop)
    if chart == CHART_RECIPROCAL:
        if drop != DROP_ZERO:
            raise ValueError("the reciprocal chart needs drop='zero' (the cut through x=0 is unbounded)")
        roots, _ = chart_roots(c, chart)
        # x = 0 sits at u = infinity; u = 0 (x = infinity) plays the dropped zero
        cuts, gaps = paired_intervals(roots[1:], roots)
        n_int = g - 1
    elif chart == CHART_DIRECT:
        cuts, gaps = paired_intervals(z, allz)
        n_int = g
    else:
        raise ValueError(f"unknown chart {chart!r}")

    roots, _ = chart_roots(c, chart)

    def vec(iv, kind):
        lo, hi = iv
        # snap to the exact stored zeros
        lo = roots[_root_index(roots, lo)]
        hi = roots[_root_index(roots, hi)]
        v = interval_vector(c, (lo, hi), kind, chart, max_power=max(n_int - 1, 0), tol=tol)
        vals = np.zeros(n_int + 1)
        errs = np.zeros(n_int + 1)
        vals[:n_int] = v.values[:n_int]
        errs[:n_int] = v.estimated_error[:n_int]
        return PeriodVector(vals, (lo, hi), kind, errs, v.nodes, chart)

    return [vec(iv, "band") for iv in cuts], [vec(iv, "gap") for iv in gaps]


def epsilon_extrapolated_integral(roots, lead, lo, hi, max_power, levels: int = 7,
                                  eps0: float | None = None, epsrel: float = 1e-13):
    """Independent check of :func:`root_interval_integrals`.

    Integrates the raw integrand ``x**p / sqrt(lead * prod|x - r|)`` over
    ``[lo + eps, hi - eps]`` with adaptive Gauss-Kronrod, for a geometric
    sequence of ``eps``, and Richardson-extrapolates ``eps -> 0`` in powers of
    ``sqrt(eps)`` (the truncated end pieces expand in odd powers of it).

    Panels are graded geometrically towards both ends so each one stays
    smooth on the scale of its width; the truncated integral for each ``eps``
    is the previous one plus the two new end panels.
    """
    roots = np.asarray(roots, dtype=float)
    powers = np.arange(max_power + 1)
    width = hi - lo
    if eps0 is None:
        others = roots[(roots < lo) | (roots > hi)]
        near = np.min(np.abs(np.concatenate([others - lo, others - hi]))) if len(others) else width
        eps0 = 2e-3 * min(width, near)

    lead = float(lead)
    # distances to the far zeros, measured from each end; the near zero's
    # factor is the local variable itself, so offsets of size eps stay exact
    from_lo = [float(lo - r) for r in roots if r != lo]
    from_hi = [float(hi - r) for r in roots if r != hi]

    def left(t, p):
        return (lo + t) ** p / math.sqrt(lead * t * math.prod(abs(c + t) for c in from_lo))

    def right(t, p):
        return (hi - t) ** p / math.sqrt(lead * t * math.prod(abs(c - t) for c in from_hi))

    def panel(f, u, w):
        out = np.zeros(len(powers))
        for ip, p in enumerate(powers):
            out[ip], _ = integrate.quad(f, u, w, args=(int(p),), epsabs=0.0,
                                        epsrel=epsrel, limit=200)
        return out

    # base: offsets eps0 * 4**k up to the midpoint, from each end
    half = 0.5 * width
    cuts = [eps0]
    while cuts[-1] < 0.25 * half:
        cuts.append(4.0 * cuts[-1])
    cuts.append(half)
    total = sum(panel(f, u, w) for f in (left, right) for u, w in zip(cuts[:-1], cuts[1:]))

    table = []
    eps = eps0
    for j in range(levels):
        if j:
            new = eps / 4.0
            total = total + panel(left, new, eps) + panel(right, new, eps)
            eps = new
        row = [total]
        for m in range(1, j + 1):
            fac = 2.0 ** (2 * m - 1)
            row.append((fac * row[m - 1] - table[j - 1][m - 1]) / (fac - 1.0))
        table.append(row)
    return table[-1][-1]
