"""The hyperelliptic curve ``y**2 = P(x)`` attached to an ellipsoid and its caustics.

``P(x) = -x (a_1 - x) ... (a_d - x) (alpha_1 - x) ... (alpha_{d-2} - x)`` has
``2d - 1`` simple real zeros and genus ``g = d - 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT, Tolerances
from .confocal import CausticSet, Ellipsoid
from .errors import DegenerateCaustic, EmptyBand, ValidationError

CASE_TWO_CAUSTICS = "two-caustics"
CASE_ONE_CAUSTIC = "one-caustic"
CASE_NO_CAUSTIC = "no-caustic"


@dataclass(frozen=True)
class SpectralCurve:
    ellipsoid: Ellipsoid
    caustics: tuple[float, ...]
    tol: Tolerances = DEFAULT

    def __post_init__(self):
        alpha = self.caustics
        if isinstance(alpha, CausticSet):
            alpha = alpha.alpha
        alpha = tuple(sorted(float(v) for v in alpha))
        object.__setattr__(self, "caustics", alpha)
        e = self.ellipsoid
        if len(alpha) != e.d - 2:
            raise ValidationError(f"expected {e.d - 2} caustic parameters, got {len(alpha)}")
        for v in alpha:
            if not e.a[-1] < v < e.a[0]:
                raise ValidationError(f"caustic {v} outside (a_d, a_1)")
        for lo, hi in zip(e.a[1:], e.a[:-1]):
            if sum(lo < v < hi for v in alpha) > 2:
                raise ValidationError(f"more than two caustics in ({lo}, {hi})")
        bp = self.branch_points
        gaps = np.diff(bp)
        if np.any(gaps <= e.root_tol(self.tol)):
            k = int(np.argmin(gaps))
            raise DegenerateCaustic(
                f"branch points {bp[k]} and {bp[k + 1]} collide; the curve degenerates"
            )

    @property
    def genus(self) -> int:
        return self.ellipsoid.d - 1

    @property
    def branch_points(self) -> np.ndarray:
        """All ``2g + 1`` zeros of ``P``, ascending."""
        return np.sort(np.array((0.0, *self.ellipsoid.a, *self.caustics)))

    @property
    def nonzero_roots(self) -> np.ndarray:
        return np.sort(np.array((*self.ellipsoid.a, *self.caustics)))


@dataclass(frozen=True)
class BandIntervals:
    """Per-slab bands ``[gamma'_s, gamma''_s]`` (index ``s - 1``) and the case that produced each."""

    bands: tuple[tuple[float, float], ...]
    cases: tuple[str, ...]

    def __len__(self):
        return len(self.bands)

    def __getitem__(self, s: int) -> tuple[float, float]:
        """1-based slab index, as in ``s = 1..d-1``."""
        return self.bands[s - 1]


def signed_log_product(factors):
    """Return ``(sign, log|prod|)`` of the factors along the last axis."""
    factors = np.asarray(factors, dtype=float)
    sign = np.prod(np.sign(factors), axis=-1)
    with np.errstate(divide="ignore"):
        logmag = np.sum(np.log(np.abs(factors)), axis=-1)
    return sign, logmag


def eval_P(c: SpectralCurve, x, log: bool = False):
    """Evaluate ``P(x)`` from its product form.

    The sign is accumulated separately from the magnitude. With ``log=True``
    returns ``(sign, log|P(x)|)`` instead, which stays finite for large ``d``.
    """
    x = np.asarray(x, dtype=float)
    roots = c.nonzero_roots
    factors = np.concatenate(
        [(-x)[..., None], roots - x[..., None]], axis=-1
    )
    if log:
        return signed_log_product(factors)
    sign = np.prod(np.sign(factors), axis=-1)
    mag = np.prod(np.abs(factors), axis=-1)
    out = sign * mag
    return float(out) if out.ndim == 0 else out


def admissible_intervals(c: SpectralCurve) -> BandIntervals:
    """The sub-interval of each slab ``[a_{s+1}, a_s]`` on which ``P >= 0``."""
    a = c.ellipsoid.a
    bands = []
    cases = []
    for s in range(1, c.ellipsoid.d):
        lo, hi = a[s], a[s - 1]
        inside = [v for v in c.caustics if lo < v < hi]
        if len(inside) == 2:
            cand = [(inside[0], inside[1])]
            case = CASE_TWO_CAUSTICS
        elif len(inside) == 1:
            cand = [(lo, inside[0]), (inside[0], hi)]
            case = CASE_ONE_CAUSTIC
        else:
            cand = [(lo, hi)]
            case = CASE_NO_CAUSTIC
        picked = [iv for iv in cand if eval_P(c, 0.5 * (iv[0] + iv[1])) > 0]
        if len(picked) != 1:
            raise EmptyBand(
                f"no consistent band in slab s={s} ([{lo}, {hi}]) for caustics {c.caustics}"
            )
        bands.append(picked[0])
        cases.append(case)
    return BandIntervals(tuple(bands), tuple(cases))


def gap_intervals(c: SpectralCurve) -> list[tuple[float, float]]:
    """Intervals between consecutive bands; ``P <= 0`` on each."""
    bands = sorted(admissible_intervals(c).bands)
    return [(bands[k][1], bands[k + 1][0]) for k in range(len(bands) - 1)]


DROP_ZERO = "zero"
DROP_LARGEST = "largest"


def ordered_branch_points(c: SpectralCurve, drop: str = DROP_ZERO):
    """All zeros of ``P`` ascending, and the ``2g`` of them paired into cuts.

    One of the ``2g + 1`` finite zeros is paired with the branch point at
    infinity and left out of the second list. ``drop="zero"`` removes the
    zero at the origin, so consecutive pairs are exactly the bands;
    ``drop="largest"`` removes ``a_1``.
    """
    allz = c.branch_points
    if drop == DROP_ZERO:
        k = int(np.argmin(np.abs(allz)))
    elif drop == DROP_LARGEST:
        k = len(allz) - 1
    else:
        raise ValueError(f"unknown pairing convention {drop!r}")
    return allz, np.delete(allz, k)


def paired_intervals(z, all_zeros=None) -> tuple[list[tuple[float, float]], list[tuple[float, float]]]:
    """Cuts ``[z_{2s-1}, z_{2s}]`` and the complementary gaps.

    Gaps are the intervals between consecutive finite zeros (``all_zeros``,
    default ``z``) that are not cuts; with all ``2g + 1`` zeros there are
    ``g`` of them, one per b-cycle.
    """
    z = sorted(z)
    cuts = [(z[2 * k], z[2 * k + 1]) for k in range(len(z) // 2)]
    allz = sorted(z if all_zeros is None else all_zeros)
    cutset = set(cuts)
    gaps = [(p, q) for p, q in zip(allz[:-1], allz[1:]) if (p, q) not in cutset]
    return cuts, gaps


def curve_from_line(e: Ellipsoid, x, y, tol: Tolerances = DEFAULT) -> SpectralCurve:
    from .confocal import caustic_parameters

    cs = caustic_parameters(e, x, y, tol)
    if cs.is_degenerate:
        raise DegenerateCaustic(f"caustics {cs.alpha} touch semi-axis parameters")
    return SpectralCurve(e, cs.alpha, tol)


def min_relative_gap(c: SpectralCurve) -> float:
    bp = c.branch_points
    return float(np.min(np.diff(bp)) / max(bp[-1], math.ulp(1.0)))
