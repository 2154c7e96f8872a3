"""Ellipsoid, confocal family and Jacobian elliptic coordinates.

The confocal family of the ellipsoid with parameters ``a1 > ... > ad > 0`` is
``Q_lam(x) = sum x_i**2 / (a_i - lam) = 1``. The base surface is ``lam = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import (
    DegenerateCoordinates,
    InvalidEllipsoid,
    NegativeSquare,
    NotInRange,
    NotOnSurface,
    NotTangentToBase,
    PoleAtSemiAxis,
)

_BISECT_ITERS = 80


@dataclass(frozen=True)
class Ellipsoid:
    a: tuple[float, ...]
    sep: float = 1e-9

    def __post_init__(self):
        a = tuple(float(v) for v in self.a)
        object.__setattr__(self, "a", a)
        if len(a) < 3:
            raise InvalidEllipsoid(f"need d >= 3 semi-axis parameters, got {len(a)}")
        if not all(np.isfinite(a)) or a[-1] <= 0:
            raise InvalidEllipsoid(f"semi-axis parameters must be finite and positive: {a}")
        gaps = -np.diff(a)
        if np.any(gaps <= self.sep):
            raise InvalidEllipsoid(f"semi-axis parameters must be strictly descending: {a}")

    @property
    def d(self) -> int:
        return len(self.a)

    @property
    def axes(self) -> np.ndarray:
        return np.array(self.a)

    def root_tol(self, tol: Tolerances = DEFAULT) -> float:
        return tol.root * self.a[0]


@dataclass(frozen=True)
class CausticSet:
    """Caustic parameters of a geodesic (ascending), with degeneracy flags.

    ``degenerate`` lists ``(k, j)`` pairs meaning ``alpha[k]`` coincides with
    the semi-axis parameter ``a[j]`` (both 0-based).
    """

    alpha: tuple[float, ...]
    degenerate: tuple[tuple[int, int], ...] = field(default=())

    @property
    def is_degenerate(self) -> bool:
        return bool(self.degenerate)


def confocal_form(e: Ellipsoid, x, y=None, lam=0.0):
    """``Q_lam(x, y) = sum x_i y_i / (a_i - lam)``; ``y`` defaults to ``x``."""
    x = np.asarray(x, dtype=float)
    y = x if y is None else np.asarray(y, dtype=float)
    return np.sum(x * y / (e.axes - lam), axis=-1)


def surface_normal(e: Ellipsoid, x) -> np.ndarray:
    return np.asarray(x, dtype=float) / e.axes


def check_on_surface(e: Ellipsoid, x, tol: Tolerances = DEFAULT) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    err = abs(confocal_form(e, x) - 1.0)
    if err > tol.surface:
        raise NotOnSurface(f"|Q0(x) - 1| = {err:.3e} exceeds {tol.surface:.1e}")
    return x


def check_tangent(e: Ellipsoid, x, y, tol: Tolerances = DEFAULT) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if abs(np.linalg.norm(y) - 1.0) > tol.surface:
        raise NotTangentToBase("direction is not a unit vector")
    if abs(y @ surface_normal(e, x)) > tol.surface:
        raise NotTangentToBase("direction is not orthogonal to the surface normal")
    return y


def project_to_surface(e: Ellipsoid, x) -> np.ndarray:
    """Radial rescaling onto the base ellipsoid."""
    x = np.asarray(x, dtype=float)
    return x / np.sqrt(confocal_form(e, x))


def tangent_unit(e: Ellipsoid, x, y) -> np.ndarray:
    """Project ``y`` onto the tangent space at ``x`` and normalise."""
    n = surface_normal(e, x)
    y = np.asarray(y, dtype=float)
    y = y - n * (y @ n) / (n @ n)
    return y / np.linalg.norm(y)


def elliptic_coordinates(e: Ellipsoid, x, tol: Tolerances = DEFAULT, strict: bool = True):
    """Jacobian elliptic coordinates of ``x``, sorted descending.

    Works on a single point or on a stack of points with shape ``(..., d)``.
    Each root is found by bisection of the monotone function
    ``Q_lam(x) - 1`` on its interlacing bracket ``[a_{s+1}, a_s]``
    (``(-inf, a_d]`` for the last one), so zero coordinates, which remove a
    pole, are handled without special cases.

    With ``strict`` a single point lying on two or more coordinate
    hyperplanes, or with coincident coordinates, raises
    :class:`DegenerateCoordinates`.
    """
    x = np.asarray(x, dtype=float)
    a = e.axes
    d = e.d
    single = x.ndim == 1
    pts = x.reshape(-1, d)
    x2 = pts**2
    r2 = x2.sum(axis=1)

    lo = np.empty((pts.shape[0], d))
    hi = np.empty((pts.shape[0], d))
    lo[:, : d - 1] = a[1:]
    hi[:, : d - 1] = a[:-1]
    lo[:, d - 1] = a[-1] - r2 - 1.0
    hi[:, d - 1] = a[-1]

    def f(lam):
        # lam: (n, d) candidate per bracket; terms with x_i = 0 vanish
        den = a[None, None, :] - lam[:, :, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(x2[:, None, :] == 0.0, 0.0, x2[:, None, :] / den)
        return terms.sum(axis=2) - 1.0

    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        pos = f(mid) > 0.0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    lam = 0.5 * (lo + hi)

    if np.any(lam[:, 0] > a[0] + e.root_tol(tol)):
        raise NotInRange("elliptic coordinate exceeds a1")
    if strict and single:
        tr = e.root_tol(tol)
        if np.sum(x2[0] <= tr) >= 2 or np.any(-np.diff(lam[0]) <= tr):
            raise DegenerateCoordinates(
                f"point {x.tolist()} lies on several coordinate hyperplanes"
            )
    return lam[0] if single else lam.reshape(x.shape)


def cartesian_from_elliptic(e: Ellipsoid, lam, signs=None, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Inverse coordinate map; ``signs`` selects the orthant (default all +)."""
    a = e.axes
    lam = np.asarray(lam, dtype=float)
    num = np.prod(a[:, None] - lam[None, :], axis=1)
    diff = a[:, None] - a[None, :]
    np.fill_diagonal(diff, 1.0)
    x2 = num / np.prod(diff, axis=1)
    if np.any(x2 < -e.root_tol(tol)):
        raise NegativeSquare(f"coordinates {lam.tolist()} violate interlacing")
    x = np.sqrt(np.clip(x2, 0.0, None))
    if signs is not None:
        x = x * np.asarray(signs, dtype=float)
    return x


def tangency_discriminant(e: Ellipsoid, x, y, lam: float, tol: Tolerances = DEFAULT) -> float:
    """Discriminant of ``Q_lam(x + t y) = 1`` in ``t`` (zero iff the line touches ``Q_lam``)."""
    if np.min(np.abs(e.axes - lam)) <= e.root_tol(tol):
        raise PoleAtSemiAxis(f"lambda = {lam} coincides with a semi-axis parameter")
    qxy = confocal_form(e, x, y, lam)
    return float(qxy**2 - confocal_form(e, y, y, lam) * (confocal_form(e, x, x, lam) - 1.0))


def tangency_numerator(e: Ellipsoid, x, y, lam):
    """Discriminant with denominators cleared, ``Phi_lam * prod(a_i - lam)``.

    A polynomial of degree ``d - 1`` in ``lam``; its roots are the parameters
    of the confocal quadrics touched by the line.
    """
    a = e.axes
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lam = np.asarray(lam, dtype=float)[..., None]
    fac = a - lam
    d = e.d
    total = 0.0
    for i in range(d):
        others = np.prod(np.delete(fac, i, axis=-1), axis=-1)
        total = total + y[i] ** 2 * others
        for j in range(i + 1, d):
            w = (x[i] * y[j] - x[j] * y[i]) ** 2
            total = total - w * np.prod(np.delete(fac, [i, j], axis=-1), axis=-1)
    return total


def tangent_quadric_parameters(e: Ellipsoid, x, y) -> np.ndarray:
    """All ``d - 1`` parameters of confocal quadrics tangent to the line ``x + t y``.

    They are the eigenvalues of ``diag(a) - p p^T`` compressed to the
    hyperplane orthogonal to ``y``, where ``p`` is the foot of the
    perpendicular from the origin. Returned ascending.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    y = y / np.linalg.norm(y)
    p = x - (x @ y) * y
    q, _ = np.linalg.qr(np.column_stack([y, np.eye(e.d)]))
    basis = q[:, 1 : e.d]
    m = basis.T @ (np.diag(e.axes) - np.outer(p, p)) @ basis
    return np.linalg.eigvalsh(0.5 * (m + m.T))


def caustic_parameters(e: Ellipsoid, x, y, tol: Tolerances = DEFAULT) -> CausticSet:
    """Caustics of the geodesic through ``x`` with tangent ``y``.

    The tangent line touches ``d - 1`` confocal quadrics; one of them is the
    base surface (parameter 0), the rest are returned ascending.
    """
    roots = tangent_quadric_parameters(e, x, y)
    k = int(np.argmin(np.abs(roots)))
    if abs(roots[k]) > tol.caustic * e.a[0]:
        raise NotTangentToBase(
            f"line is not tangent to the base ellipsoid (closest root {roots[k]:.3e})"
        )
    alpha = np.delete(roots, k)
    tr = e.root_tol(tol)
    flags = tuple(
        (i, j)
        for i, al in enumerate(alpha)
        for j, aj in enumerate(e.a)
        if abs(al - aj) <= tr
    )
    return CausticSet(tuple(float(v) for v in alpha), flags)
