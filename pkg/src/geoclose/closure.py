"""Closure conditions for geodesics and the inverse problem of finding closed ones.

For winding numbers ``n`` (``n_s`` touches of each end of band ``s``) the
geodesic with a given caustic set closes iff

    sum_s (-1)**s 2 n_s I_{s,i} = 0,   i = 1..d-2,

where ``I_{s,i}`` is the integral of ``x**i / sqrt(P)`` over band ``s``.
Linear combinations are formed in exact rational arithmetic from the
floating-point integrals, so residuals are exactly linear in the integers.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import optimize

from .config import DEFAULT, Tolerances
from .confocal import CausticSet, Ellipsoid
from .errors import DegenerateCaustic, GeocloseError, NoSolutionInBracket, ValidationError
from .quadrature import CHART_RECIPROCAL, abel_prime_vectors, band_vector
from .spectral import DROP_ZERO, BandIntervals, SpectralCurve, admissible_intervals

POWERS_PROOF = "proof"
POWERS_FULL = "full"


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("GEOCLOSE_THREADS", "")))
    except ValueError:
        return os.cpu_count() or 1


@dataclass(frozen=True)
class WindingNumbers:
    n: tuple[int, ...]
    m: tuple[int, ...] | None = None

    def __post_init__(self):
        n = tuple(int(k) for k in self.n)
        if any(k < 1 for k in n):
            raise ValidationError(f"winding numbers must be positive, got {n}")
        object.__setattr__(self, "n", n)
        if self.m is not None:
            object.__setattr__(self, "m", tuple(int(k) for k in self.m))

    @property
    def gcd(self) -> int:
        return math.gcd(*self.n)

    @property
    def primitive(self) -> bool:
        return self.gcd == 1


@dataclass
class ClosureReport:
    condition: str  # "thm1", "corollary" or "thm2"
    residual: np.ndarray
    scale: np.ndarray
    tolerance: float
    closed: bool
    powers: tuple[int, ...]
    exact: tuple[Fraction, ...] = ()
    details: dict = field(default_factory=dict)

    @property
    def relative(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.scale > 0, np.abs(self.residual) / self.scale, np.abs(self.residual))

    @property
    def max_relative(self) -> float:
        r = self.relative
        return float(np.max(r)) if r.size else 0.0

    def as_dict(self) -> dict:
        out = {
            "condition": self.condition,
            "powers": list(self.powers),
            "residual": [float(v) for v in self.residual],
            "relative_residual": [float(v) for v in self.relative],
            "tolerance": self.tolerance,
            "closed": bool(self.closed),
        }
        for k, v in self.details.items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out


def exact_combination(coeffs, values):
    """``sum_s coeffs[s] * values[s]`` per column, in exact rational arithmetic.

    Returns ``(float result, exact Fractions, largest |term| per column)``.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    coeffs = [int(c) for c in coeffs]
    if len(coeffs) != values.shape[0]:
        raise ValidationError(f"expected {values.shape[0]} integer coefficients, got {len(coeffs)}")
    exact = []
    for col in values.T:
        exact.append(sum((Fraction(c) * Fraction(float(v)) for c, v in zip(coeffs, col)), Fraction(0)))
    res = np.array([float(f) for f in exact])
    scale = np.max(np.abs(np.array(coeffs, dtype=float)[:, None] * values), axis=0) if coeffs else np.zeros(values.shape[1])
    return res, tuple(exact), scale


def _ints(n) -> tuple[int, ...]:
    return tuple(int(k) for k in (n.n if isinstance(n, WindingNumbers) else n))


def residual_powers(g: int, power_range: str = POWERS_PROOF) -> tuple[int, ...]:
    if power_range == POWERS_PROOF:
        return tuple(range(1, g))
    if power_range == POWERS_FULL:
        return tuple(range(1, g + 1))
    raise ValueError(f"unknown power range {power_range!r}")


def _band_matrix(c: SpectralCurve, tol: Tolerances) -> np.ndarray:
    """Rows ``s = 1..g`` holding ``I_{s,i}`` for ``i = 0..g``."""
    return np.array([band_vector(c, s, tol).values for s in range(1, c.genus + 1)])


def _check_bands(c: SpectralCurve, b: BandIntervals | None) -> None:
    if b is not None and tuple(b.bands) != tuple(admissible_intervals(c).bands):
        raise ValidationError("band data does not belong to this curve")


def thm1_linear_form(c: SpectralCurve, n, power_range: str = POWERS_PROOF,
                     tol: Tolerances = DEFAULT) -> ClosureReport:
    """``sum_s (-1)**s 2 n_s I_{s,i}`` for any integers ``n`` (zeros and signs allowed)."""
    g = c.genus
    n = [int(k) for k in n]
    if len(n) != g:
        raise ValidationError(f"expected {g} winding numbers, got {len(n)}")
    powers = residual_powers(g, power_range)
    mat = _band_matrix(c, tol)[:, list(powers)]
    coeffs = [(-1) ** s * 2 * n[s - 1] for s in range(1, g + 1)]
    res, exact, scale = exact_combination(coeffs, mat)
    rel = np.where(scale > 0, np.abs(res) / np.where(scale > 0, scale, 1.0), np.abs(res))
    closed = bool(np.all(rel <= tol.close))
    return ClosureReport("thm1", res, scale, tol.close, closed, powers, exact,
                         {"power_range": power_range})


def closure_residual_thm1(c: SpectralCurve, b: BandIntervals | None, n,
                          power_range: str = POWERS_PROOF, tol: Tolerances = DEFAULT) -> ClosureReport:
    _check_bands(c, b)
    w = n if isinstance(n, WindingNumbers) else WindingNumbers(tuple(n))
    rep = thm1_linear_form(c, w.n, power_range, tol)
    rep.details["gcd"] = w.gcd
    return rep


def closure_residual_corollary(c: SpectralCurve, b: BandIntervals | None, n,
                               tol: Tolerances = DEFAULT) -> ClosureReport:
    """The stronger condition that also cancels the ``dx / y`` row.

    The residual holds rows ``i = 0..d-2``; row 0 is reported separately
    together with the band-condition sub-residual and the reparametrised length
    ``L = sum_s 2 n_s I_{s,0}``.
    """
    _check_bands(c, b)
    w = n if isinstance(n, WindingNumbers) else WindingNumbers(tuple(n))
    g = c.genus
    powers = tuple(range(0, g))
    mat = _band_matrix(c, tol)
    coeffs = [(-1) ** s * 2 * w.n[s - 1] for s in range(1, g + 1)]
    res, exact, scale = exact_combination(coeffs, mat[:, list(powers)])
    rel = np.abs(res) / np.where(scale > 0, scale, 1.0)
    length, _, _ = exact_combination([2 * k for k in w.n], mat[:, [0]])
    sub = thm1_linear_form(c, w.n, POWERS_PROOF, tol)
    details = {
        "thm1_residual": sub.residual,
        "thm1_closed": sub.closed,
        "i0_component": float(res[0]),
        "i0_relative": float(rel[0]),
        "reparametrized_length": float(length[0]),
    }
    return ClosureReport("corollary", res, scale, tol.close, bool(np.all(rel <= tol.close)),
                         powers, exact, details)


def predicted_length(c: SpectralCurve, n, tol: Tolerances = DEFAULT) -> float:
    """Arclength of one circuit from the top row: ``sum_s (-1)**(s-1) n_s I_{s,g}``."""
    mat = _band_matrix(c, tol)
    g = c.genus
    n = _ints(n)
    res, _, _ = exact_combination([(-1) ** (s - 1) * n[s - 1] for s in range(1, g + 1)],
                                  mat[:, [g]])
    return float(res[0])


def reduce_mod_lattice(vector, periods):
    """Subtract the nearest integer combination of the period vectors.

    Returns ``(defect, integer coefficients)``; coefficients come from the
    least-squares fit rounded to the nearest integers.
    """
    vector = np.asarray(vector, dtype=float)
    periods = np.atleast_2d(np.asarray(periods, dtype=float))
    coef, *_ = np.linalg.lstsq(periods.T, vector, rcond=None)
    k = np.rint(coef).astype(int)
    defect, _, _ = exact_combination([1] + [-int(v) for v in k], np.vstack([vector, periods]))
    return defect, k


def lattice_defect(c: SpectralCurve, b: BandIntervals | None, n,
                   tol: Tolerances = DEFAULT):
    """``(L/2, 0, ..., 0) + sum_s n_s (A(P_{gamma'_s}) - A(P_{gamma''_s}))`` reduced modulo
    the real a-periods.

    The full a-period of band ``s`` is twice its band vector, with the same
    sheet sign as the Abel difference in rows ``1..g``. Returns
    ``(defect, raw vector, integer coefficients)``.
    """
    _check_bands(c, b)
    w = n if isinstance(n, WindingNumbers) else WindingNumbers(tuple(n))
    g = c.genus
    mat = _band_matrix(c, tol)
    signed = mat.copy()
    for s in range(1, g + 1):
        signed[s - 1, 1:] *= (-1.0) ** s
    length, _, _ = exact_combination([2 * k for k in w.n], mat[:, [0]])
    raw, _, _ = exact_combination(list(w.n), signed)
    raw[0] = 0.5 * length[0]
    periods = 2.0 * signed
    defect, k = reduce_mod_lattice(raw, periods)
    return defect, raw, k


def closure_residual_thm2(c: SpectralCurve, n, m, drop: str = DROP_ZERO,
                          chart: str = CHART_RECIPROCAL, tol: Tolerances = DEFAULT) -> ClosureReport:
    """Cut-and-gap condition built from the Abel map that drops the flow direction.

    ``residual`` is the real block ``sum_s 2 n_s B_s`` over the cut vectors;
    the gap block ``sum_s m_s G_s`` goes to ``details["imaginary"]``. ``n``
    and ``m`` are arbitrary integers of length ``g``.
    """
    cuts, gaps = abel_prime_vectors(c, drop, chart, tol)
    n = [int(k) for k in n]
    m = [int(k) for k in m]
    if len(n) != len(cuts) or len(m) != len(gaps):
        raise ValidationError(f"expected {len(cuts)} cut and {len(gaps)} gap multiples")
    bmat = np.array([v.values for v in cuts])
    gmat = np.array([v.values for v in gaps])
    res, exact, scale = exact_combination([2 * k for k in n], bmat)
    imag, _, iscale = exact_combination(m, gmat)
    rel = np.abs(res) / np.where(scale > 0, scale, 1.0)
    irel = np.abs(imag) / np.where(iscale > 0, iscale, 1.0)
    closed = bool(np.all(rel <= tol.close) and np.all(irel <= tol.close))
    details = {
        "imaginary": imag,
        "imaginary_scale": iscale,
        "drop": drop,
        "chart": chart,
        "cuts": [v.interval for v in cuts],
        "gaps": [v.interval for v in gaps],
    }
    return ClosureReport("thm2", res, scale, tol.close, closed,
                         tuple(range(len(res))), exact, details)


def thm2_winding_from_thm1(c: SpectralCurve, n, chart: str = CHART_RECIPROCAL) -> list[int]:
    """Re-index band winding numbers onto the cuts of the paired-zero list.

    With ``drop="zero"`` the cuts are the bands. In the reciprocal chart they
    are listed in ascending ``u = 1/x``, i.e. in slab order ``s = 1..g``;
    the sheet sign ``(-1)**s`` moves into the integer.
    """
    g = c.genus
    n = _ints(n)
    signed = [(-1) ** s * n[s - 1] for s in range(1, g + 1)]
    if chart == CHART_RECIPROCAL:
        return signed
    return signed[::-1]


def cartesian_winding(c: SpectralCurve, n) -> tuple[int, ...]:
    """Smallest multiple of ``n`` after which the Cartesian curve itself returns.

    A band endpoint equal to a semi-axis parameter ``a_k`` is a crossing of
    the hyperplane ``x_k = 0``; each one flips the sign of ``x_k``. The
    elliptic coordinates close after ``n``, but the point only does so if
    every such band is touched an even number of times.
    """
    n = _ints(n)
    a = set(c.ellipsoid.a)
    bands = admissible_intervals(c)
    odd = any(n[s - 1] % 2 and (bands[s][0] in a or bands[s][1] in a) for s in range(1, c.genus + 1))
    return tuple(2 * k for k in n) if odd else n


def winding_direction(c: SpectralCurve, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Unit vector ``n`` (real, non-negative) annihilated by the band-condition rows.

    Closed geodesics are the curves for which this direction is rational.
    """
    g = c.genus
    mat = _band_matrix(c, tol)
    rows = np.array([[(-1) ** s * mat[s - 1, i] for s in range(1, g + 1)] for i in range(1, g)])
    _, _, vt = np.linalg.svd(rows)
    vec = vt[-1]
    if vec.sum() < 0:
        vec = -vec
    return vec / np.linalg.norm(vec)


def _relative_residual(e: Ellipsoid, alpha, n, power_range, tol):
    """Signed relative band-condition residual vector, or ``None`` where the curve is invalid."""
    try:
        c = SpectralCurve(e, tuple(alpha), tol)
        rep = thm1_linear_form(c, n, power_range, tol)
    except GeocloseError:
        return None
    return rep.residual / np.where(rep.scale > 0, rep.scale, 1.0)


def default_brackets(e: Ellipsoid, margin: float = 1e-6):
    """Each slab ``(a_{s+1}, a_s)`` shrunk by a relative margin."""
    a = e.a
    out = []
    for s in range(1, e.d):
        lo, hi = a[s], a[s - 1]
        w = hi - lo
        out.append((lo + margin * w, hi - margin * w))
    return out


def scan_residual(e: Ellipsoid, n, lo: float, hi: float, points: int = 256,
                  power_range: str = POWERS_PROOF, tol: Tolerances = DEFAULT):
    """Relative residual of a single caustic on a cell-centred grid (``d = 3``)."""
    grid = lo + (hi - lo) * (np.arange(points) + 0.5) / points

    def one(al):
        r = _relative_residual(e, (al,), n, power_range, tol)
        return np.nan if r is None else float(r[0])

    with ThreadPoolExecutor(max_workers=thread_cap()) as ex:
        vals = np.array(list(ex.map(one, grid)))
    return grid, vals


def solve_caustics_for_winding(e: Ellipsoid, n, bracket=None, power_range: str = POWERS_PROOF,
                               scan_points: int | None = None, tol: Tolerances = DEFAULT,
                               return_all: bool = False):
    """Caustic parameters whose geodesics close with winding numbers ``n``.

    ``d = 3``: ``bracket`` is an interval or a list of intervals for the one
    caustic (default: every slab); the residual is scanned on
    ``scan_points`` cells and each sign change refined by Brent's method.
    ``d >= 4``: ``bracket`` is a box (one interval per caustic); the scan
    picks starting points for a damped Newton iteration with a
    finite-difference Jacobian that backtracks into the box.

    Returns ``(CausticSet, ClosureReport)`` for the first root found, or a
    list of them with ``return_all``.
    """
    w = n if isinstance(n, WindingNumbers) else WindingNumbers(tuple(n))
    if len(w.n) != e.d - 1:
        raise ValidationError(f"expected {e.d - 1} winding numbers, got {len(w.n)}")
    if e.d == 3:
        sols = _solve_d3(e, w, bracket, power_range, scan_points or 256, tol)
    else:
        sols = _solve_newton(e, w, bracket, power_range, scan_points or 24, tol)
    if not sols:
        raise NoSolutionInBracket(f"no caustics close with winding numbers {w.n} in {bracket}")
    out = []
    for alpha in sols:
        c = SpectralCurve(e, alpha, tol)
        min_gap = float(np.min(np.diff(c.branch_points)))
        if min_gap < 10 * e.root_tol(tol):
            raise DegenerateCaustic(f"solution {alpha} is at a branch-point collision")
        rep = closure_residual_thm1(c, None, w, power_range, tol)
        out.append((CausticSet(tuple(alpha)), rep))
    return out if return_all else out[0]


def _solve_d3(e, w, bracket, power_range, points, tol):
    if bracket is None:
        brackets = default_brackets(e)
    elif np.ndim(bracket) == 1:
        brackets = [tuple(bracket)]
    else:
        brackets = [tuple(b) for b in bracket]
    roots = []
    for lo, hi in brackets:
        # never let a bracket straddle a semi-axis parameter
        cuts = sorted({lo, hi, *[a for a in e.a if lo < a < hi]})
        for p, q in zip(cuts[:-1], cuts[1:]):
            if p in e.a:
                p += 1e-6 * (q - p)
            if q in e.a:
                q -= 1e-6 * (q - p)
            grid, vals = scan_residual(e, w.n, p, q, points, power_range, tol)
            for k in range(points - 1):
                if np.isfinite(vals[k]) and np.isfinite(vals[k + 1]) and vals[k] * vals[k + 1] < 0:
                    f = lambda al: _relative_residual(e, (al,), w.n, power_range, tol)[0]
                    al = optimize.brentq(f, grid[k], grid[k + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps,
                                         maxiter=200)
                    roots.append((float(al),))
                elif vals[k] == 0.0:
                    roots.append((float(grid[k]),))
    return roots


def _solve_newton(e, w, bracket, power_range, points, tol):
    k = e.d - 2
    if bracket is None:
        raise ValidationError("d >= 4 needs a caustic search box (one interval per caustic)")
    box = np.array(bracket, dtype=float).reshape(k, 2)
    axes = [lo + (hi - lo) * (np.arange(points) + 0.5) / points for lo, hi in box]
    mesh = np.array(np.meshgrid(*axes, indexing="ij")).reshape(k, -1).T

    def resid(al):
        if np.any(al <= box[:, 0]) or np.any(al >= box[:, 1]):
            return None
        return _relative_residual(e, tuple(sorted(al)), w.n, power_range, tol)

    with ThreadPoolExecutor(max_workers=thread_cap()) as ex:
        vals = list(ex.map(resid, mesh))
    norms = np.array([np.inf if v is None else float(np.linalg.norm(v)) for v in vals])
    order = np.argsort(norms, kind="stable")
    found = []
    for idx in order[:8]:
        if not np.isfinite(norms[idx]):
            break
        al = _newton(resid, mesh[idx].copy(), box, tol)
        if al is not None and not any(np.allclose(al, f, rtol=0, atol=1e-9) for f in found):
            found.append(al)
            break
    return [tuple(float(v) for v in sorted(al)) for al in found]


def _newton(resid, x, box, tol, maxiter: int = 60):
    r = resid(x)
    if r is None:
        return None
    for _ in range(maxiter):
        if np.linalg.norm(r, np.inf) <= 0.1 * tol.close:
            return x
        jac = np.empty((len(r), len(x)))
        for j in range(len(x)):
            h = 1e-7 * (box[j, 1] - box[j, 0])
            xp = x.copy()
            xp[j] += h
            rp = resid(xp)
            if rp is None:
                xp[j] -= 2 * h
                rp = resid(xp)
                if rp is None:
                    return None
                h = -h
            jac[:, j] = (rp - r) / h
        try:
            step = np.linalg.solve(jac, -r) if len(r) == len(x) else np.linalg.lstsq(jac, -r, rcond=None)[0]
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        while lam > 1e-6:
            xn = x + lam * step
            rn = resid(xn)
            if rn is not None and np.linalg.norm(rn) < np.linalg.norm(r):
                x, r = xn, rn
                break
            lam *= 0.5
        else:
            return x if np.linalg.norm(r, np.inf) <= tol.close else None
    return x if np.linalg.norm(r, np.inf) <= tol.close else None
