"""Brute-force geodesic integrator on the ellipsoid, in Cartesian coordinates.

The flow ``x'' = -nu A^{-1} x`` with ``nu = (v^T A^{-1} v) / (x^T A^{-2} x)``
keeps ``x^T A^{-1} x = 1``. It is smooth everywhere, unlike its form in
elliptic coordinates, which is singular at every turning point. Elliptic
coordinates are recovered pointwise for event detection.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp

from .config import DEFAULT, Tolerances
from .confocal import (
    Ellipsoid,
    caustic_parameters,
    cartesian_from_elliptic,
    confocal_form,
    elliptic_coordinates,
    surface_normal,
)
from .errors import NotOnSurface, StepRejected
from .spectral import SpectralCurve, admissible_intervals, eval_P

SEGMENT = 5.0
DETECT_DT = 0.01


@dataclass
class GeodesicState:
    x: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.v = np.asarray(self.v, dtype=float)

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.x, self.v])


@dataclass
class Event:
    t: float
    kind: str  # "turn" (elliptic coordinate extremum) or "cross" (coordinate hyperplane)
    index: int  # 1-based coordinate s for turns, 1-based axis k for crossings
    value: float
    extremum: str = ""  # "min" / "max" for turns


@dataclass
class Trajectory:
    ellipsoid: Ellipsoid
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    events: list[Event] = field(default_factory=list)

    def turns(self, s: int) -> list[Event]:
        return [ev for ev in self.events if ev.kind == "turn" and ev.index == s]

    def to_csv(self, path) -> None:
        d = self.ellipsoid.d
        header = ["t"] + [f"x{i + 1}" for i in range(d)] + [f"v{i + 1}" for i in range(d)]
        header += [f"lambda{i + 1}" for i in range(d)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k in range(len(self.t)):
                row = [self.t[k], *self.x[k], *self.v[k], *self.lam[k]]
                w.writerow([f"{float(val):.17g}" for val in row])

    def events_json(self) -> str:
        return json.dumps(
            [
                {"t": ev.t, "kind": ev.kind, "index": ev.index, "value": ev.value,
                 "extremum": ev.extremum}
                for ev in self.events
            ],
            indent=2,
        )


def _rhs(e: Ellipsoid):
    ia = 1.0 / e.axes
    d = e.d

    def f(t, z):
        x = z[:d]
        v = z[d:]
        nu = np.dot(v * ia, v) / np.dot(x * ia, x * ia)
        return np.concatenate([v, -nu * ia * x])

    return f


def project_state(e: Ellipsoid, x, v, speed: float = 1.0):
    """Pull ``x`` back onto the surface and ``v`` into its tangent space."""
    x = np.asarray(x, dtype=float).copy()
    for _ in range(2):
        n = surface_normal(e, x)
        gval = confocal_form(e, x) - 1.0
        x -= 0.5 * gval * n / np.dot(n, n)
    n = surface_normal(e, x)
    v = np.asarray(v, dtype=float)
    v = v - n * np.dot(v, n) / np.dot(n, n)
    v = v * (speed / np.linalg.norm(v))
    return x, v


def check_state(e: Ellipsoid, s: GeodesicState, tol: Tolerances = DEFAULT) -> None:
    drift = max(
        abs(confocal_form(e, s.x) - 1.0),
        abs(np.dot(s.v, surface_normal(e, s.x))),
        abs(np.linalg.norm(s.v) - 1.0),
    )
    if drift > tol.drift:
        raise NotOnSurface(f"state drifted from the constraint manifold by {drift:.3e}")


def _solve(e: Ellipsoid, z0, t0, t1, tol: Tolerances):
    sol = solve_ivp(
        _rhs(e), (t0, t1), z0, method="DOP853", rtol=tol.ode, atol=tol.ode * 0.1,
        dense_output=True, first_step=None,
    )
    if not sol.success:
        raise StepRejected(sol.message)
    return sol


def step_geodesic(e: Ellipsoid, s: GeodesicState, h: float, tol: Tolerances = DEFAULT) -> GeodesicState:
    """Advance by arclength ``h`` (negative runs backwards), then project."""
    sol = _solve(e, s.z, s.t, s.t + h, tol)
    z = sol.y[:, -1]
    speed = float(np.linalg.norm(s.v))
    x, v = project_state(e, z[: e.d], z[e.d:], speed)
    return GeodesicState(x, v, s.t + h)


class _PiecewiseFlow:
    """Projected segments of the flow with dense output, extendable on demand."""

    def __init__(self, e: Ellipsoid, start: GeodesicState, tol: Tolerances):
        self.e = e
        self.tol = tol
        self.t0 = start.t
        self.speed = float(np.linalg.norm(start.v))
        self.breaks = [start.t]
        self.pieces = []
        self.z_end = start.z.copy()

    @property
    def t_end(self) -> float:
        return self.breaks[-1]

    def extend_to(self, t: float) -> None:
        while self.t_end < t:
            t1 = min(self.t_end + SEGMENT, max(t, self.t_end + 1e-9))
            sol = _solve(self.e, self.z_end, self.t_end, t1, self.tol)
            self.pieces.append(sol.sol)
            z = sol.y[:, -1]
            x, v = project_state(self.e, z[: self.e.d], z[self.e.d:], self.speed)
            self.z_end = np.concatenate([x, v])
            self.breaks.append(t1)

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty((len(t), 2 * self.e.d))
        for k in np.unique(idx):
            m = idx == k
            out[m] = self.pieces[k](t[m]).T
        return out


def lambda_rates(e: Ellipsoid, x, v, lam):
    """``d lam_s / dt`` for every coordinate from the cleared polynomial form.

    With ``p(lam) = prod(a - lam) - sum x_i^2 prod_{j != i}(a_j - lam)`` the
    rate is ``-p_t / p_lam``; no term divides by ``a_i - lam``.
    """
    a = e.axes
    x = np.atleast_2d(x)
    v = np.atleast_2d(v)
    lam = np.atleast_2d(lam)
    fac = a[None, None, :] - lam[:, :, None]  # (n, s, i)
    d = e.d
    pe = np.stack([np.prod(np.delete(fac, i, axis=2), axis=2) for i in range(d)], axis=2)
    p_t = -2.0 * np.sum((x * v)[:, None, :] * pe, axis=2)
    dp = -np.sum(pe, axis=2)
    for i in range(d):
        for k in range(d):
            if k == i:
                continue
            pik = np.prod(np.delete(fac, [i, k], axis=2), axis=2)
            dp = dp + x[:, None, i] ** 2 * pik
    return -p_t / dp


def _lambda_polish(e: Ellipsoid, x, lam0):
    """Newton refinement of all elliptic coordinates from a nearby estimate."""
    a = e.axes
    x2 = np.asarray(x) ** 2
    lam = np.array(lam0, dtype=float)
    lo = np.concatenate([a[1:], [-np.inf]])
    hi = a.copy()
    for _ in range(6):
        fac = a[None, :] - lam[:, None]
        pe = np.stack([np.prod(np.delete(fac, i, axis=1), axis=1) for i in range(e.d)], axis=1)
        p = np.prod(fac, axis=1) - pe @ x2
        dp = -np.sum(pe, axis=1)
        for i in range(e.d):
            for k in range(e.d):
                if k != i:
                    dp = dp + x2[i] * np.prod(np.delete(fac, [i, k], axis=1), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dp != 0, p / dp, 0.0)
        lam = np.clip(lam - step, lo, hi)
    return lam


def _detect(flow: _PiecewiseFlow, t0: float, t1: float, refine: bool = True):
    """Turning points of each elliptic coordinate and coordinate-hyperplane crossings in ``(t0, t1]``."""
    e = flow.e
    d = e.d
    n = max(int(math.ceil((t1 - t0) / DETECT_DT)), 2)
    ts = np.linspace(t0, t1, n + 1)
    z = flow(ts)
    x, v = z[:, :d], z[:, d:]
    lam = elliptic_coordinates(e, x, strict=False)
    rate = lambda_rates(e, x, v, lam)
    events = []

    def rate_at(t, s, guess):
        zz = flow(t)[0]
        lm = _lambda_polish(e, zz[:d], guess)
        return lambda_rates(e, zz[:d], zz[d:], lm)[0, s - 1]

    for s in range(1, d):
        r = rate[:, s - 1]
        for k in np.nonzero(np.sign(r[:-1]) * np.sign(r[1:]) < 0)[0]:
            if refine:
                tt = optimize.brentq(rate_at, ts[k], ts[k + 1], args=(s, lam[k]), xtol=1e-10)
            else:
                tt = ts[k] - r[k] * (ts[k + 1] - ts[k]) / (r[k + 1] - r[k])
            zz = flow(tt)[0]
            val = elliptic_coordinates(e, zz[:d], strict=False)[s - 1]
            events.append(Event(float(tt), "turn", s, float(val), "min" if r[k] < 0 else "max"))
    for i in range(d):
        xi = x[:, i]
        for k in np.nonzero(np.sign(xi[:-1]) * np.sign(xi[1:]) < 0)[0]:
            if refine:
                tt = optimize.brentq(lambda t: flow(t)[0, i], ts[k], ts[k + 1], xtol=1e-12)
            else:
                tt = ts[k]
            events.append(Event(float(tt), "cross", i + 1, 0.0))
    events.sort(key=lambda ev: ev.t)
    return events


def trace(e: Ellipsoid, start: GeodesicState, t_max: float, n_samples: int = 1001,
          events: bool = True, tol: Tolerances = DEFAULT) -> Trajectory:
    """Integrate from ``start`` over ``[start.t, start.t + t_max]``.

    Samples are taken from the dense output on a uniform grid; events are
    detected by sign changes on a finer grid and refined by Brent's method.
    """
    check_state(e, start, tol)
    flow = _PiecewiseFlow(e, start, tol)
    t_end = start.t + t_max
    flow.extend_to(t_end)
    ts = np.linspace(start.t, t_end, n_samples)
    z = flow(ts)
    x, v = z[:, : e.d], z[:, e.d:]
    lam = elliptic_coordinates(e, x, strict=False)
    evs = _detect(flow, start.t, t_end) if events else []
    return Trajectory(e, ts, x, v, lam, evs)


def _min_return(flow: _PiecewiseFlow, t_a: float, guess: float, window: float):
    """Smallest phase-space distance to the state at ``t_a`` for times within ``window`` of ``t_a + guess``."""
    lo_t, hi_t = t_a + (1 - window) * guess, t_a + (1 + window) * guess
    flow.extend_to(hi_t + 1e-6)
    z0 = flow(t_a)[0]
    f = _rhs(flow.e)

    def slope(t):
        # derivative of |z(t) - z0|**2 / 2; its root is the closest return
        z = flow(t)[0]
        return float(np.dot(z - z0, f(t, z)))

    grid = np.linspace(lo_t, hi_t, 801)
    dd = np.linalg.norm(flow(grid) - z0, axis=1)
    k = int(np.argmin(dd))
    a_, b_ = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    t_best = float(grid[k])
    if slope(a_) < 0 < slope(b_):
        t_best = optimize.brentq(slope, a_, b_, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    rd = float(np.linalg.norm(flow(t_best)[0] - z0))
    if rd > dd[k]:
        return float(dd[k]), float(grid[k]) - t_a
    return rd, t_best - t_a


def return_distance(e: Ellipsoid, start: GeodesicState, t_guess: float, window: float = 0.02,
                    tol: Tolerances = DEFAULT) -> tuple[float, float]:
    """``(distance, period)`` of the closest return to ``start`` near ``t_guess``.

    Needs no caustic data, so it also applies to planar sections.
    """
    check_state(e, start, tol)
    flow = _PiecewiseFlow(e, start, tol)
    return _min_return(flow, start.t, t_guess, window)


@dataclass
class ClosureTest:
    return_distance: float
    period: float
    t_reference: float
    crossings: dict  # s -> (count at lower band end, count at upper band end)
    ordering_violations: int
    bands: tuple
    events: list


def closure_test(e: Ellipsoid, start: GeodesicState, n, window: float = 0.02,
                 tol: Tolerances = DEFAULT, endpoint_tol: float = 1e-6) -> ClosureTest:
    """Check numerically whether the geodesic through ``start`` closes after ``2 n_1`` turns of ``lambda_1``.

    The reference state is the first turning point of ``lambda_1``; the
    period estimate is the time to the ``2 n_1``-th following turning point,
    and the phase-space distance to the reference is minimised over a window
    of relative width ``window`` around it.
    """
    check_state(e, start, tol)
    n = tuple(int(k) for k in n)
    cs = caustic_parameters(e, start.x, start.v / np.linalg.norm(start.v), tol)
    curve = SpectralCurve(e, cs.alpha, tol)
    bands = admissible_intervals(curve)
    flow = _PiecewiseFlow(e, start, tol)
    chunk = 20.0
    t_scanned = start.t
    evs: list[Event] = []
    needed = 2 * n[0] + 1
    while True:
        flow.extend_to(t_scanned + chunk)
        evs += _detect(flow, t_scanned, t_scanned + chunk)
        t_scanned += chunk
        lam1 = [ev for ev in evs if ev.kind == "turn" and ev.index == 1]
        if len(lam1) >= needed:
            break
        if t_scanned - start.t > 1e5:
            raise StepRejected("no turning points of lambda_1 found")
    t_a = lam1[0].t
    t_b = lam1[2 * n[0]].t
    guess = t_b - t_a
    rd, period = _min_return(flow, t_a, guess, window)
    t_ret = t_a + period

    if t_scanned < t_ret:
        evs += _detect(flow, t_scanned, t_ret)
    crossings = {}
    violations = 0
    half = 0.5 * period / max(len(lam1), 1)
    for s in range(1, e.d):
        lo, hi = bands[s]
        span = [ev for ev in evs if ev.kind == "turn" and ev.index == s
                and t_a - 1e-9 <= ev.t < t_a + period - min(half, 1e-6)]
        n_lo = sum(ev.extremum == "min" for ev in span)
        n_hi = sum(ev.extremum == "max" for ev in span)
        crossings[s] = (n_lo, n_hi)
        for prev, cur in zip(span[:-1], span[1:]):
            if prev.extremum == cur.extremum:
                violations += 1
        for ev in span:
            target = lo if ev.extremum == "min" else hi
            if abs(ev.value - target) > endpoint_tol * max(1.0, abs(target)):
                violations += 1
    return ClosureTest(rd, period, t_a, crossings, violations, bands.bands, evs)


def state_from_caustics(e: Ellipsoid, caustics, lam=None, sigma=None, signs=None,
                        tol: Tolerances = DEFAULT) -> GeodesicState:
    """A unit-speed state whose geodesic has the given caustics.

    ``lam`` gives the first ``d - 1`` elliptic coordinates (default: an
    off-centre point of each band); ``sigma`` the direction of motion of each
    coordinate; ``signs`` the orthant.
    """
    curve = SpectralCurve(e, caustics, tol)
    bands = admissible_intervals(curve)
    d = e.d
    if lam is None:
        lam = [lo + 0.37 * (hi - lo) for lo, hi in bands.bands]
    lam = np.array([*lam[: d - 1], 0.0], dtype=float)
    if sigma is None:
        sigma = np.ones(d - 1)
    x = cartesian_from_elliptic(e, lam, signs, tol)
    a = e.axes
    rates = np.empty(d - 1)
    for s in range(d - 1):
        others = np.delete(lam[: d - 1], s)
        pval = max(eval_P(curve, lam[s]), 0.0)
        rates[s] = sigma[s] * math.sqrt(pval) / (lam[s] * np.prod(lam[s] - others))
    # dx_i / dlam_s = -x_i / (2 (a_i - lam_s))
    jac = -x[:, None] / (2.0 * (a[:, None] - lam[None, : d - 1]))
    v = jac @ rates
    x, v = project_state(e, x, v)
    return GeodesicState(x, v, 0.0)
