import math

import numpy as np
import pytest

from geoclose import DEFAULT, Ellipsoid, caustic_parameters, cartesian_from_elliptic, elliptic_coordinates
from geoclose.confocal import (
    check_tangent,
    confocal_form,
    tangency_discriminant,
    tangency_numerator,
    tangent_quadric_parameters,
)
from geoclose.errors import (
    DegenerateCoordinates,
    InvalidEllipsoid,
    NegativeSquare,
    NotTangentToBase,
    PoleAtSemiAxis,
    ValidationError,
)

from conftest import E3, E4, X0, Y0, random_tangent_line

# roots of 6 l^2 - 23 l + 19 (the cleared cubic l (6 l^2 - 23 l + 19) has the third root 0)
LAM_X0 = ((23 + math.sqrt(73)) / 12, (23 - math.sqrt(73)) / 12, 0.0)


@pytest.mark.parametrize("a", [(3, 2), (3, 3, 1), (3, 2, 0), (3, 2, -1), (1, 2, 3), (3, float("nan"), 1)])
def test_invalid_ellipsoid(a):
    with pytest.raises(InvalidEllipsoid):
        Ellipsoid(a)


def test_elliptic_coordinates_cubic_roots():
    lam = elliptic_coordinates(E3, X0)
    assert np.allclose(lam, LAM_X0, rtol=0, atol=1e-12)


def test_surface_point_has_zero_coordinate(rng):
    for _ in range(20):
        x, _ = random_tangent_line(E4, rng)
        assert abs(elliptic_coordinates(E4, x)[-1]) < 1e-12


def test_point_on_two_hyperplanes_is_degenerate():
    with pytest.raises(DegenerateCoordinates):
        elliptic_coordinates(E3, [math.sqrt(3.0), 0.0, 0.0])


def test_coordinates_interlace_batch(rng):
    pts = rng.normal(size=(2000, 4)) * 3
    lam = elliptic_coordinates(E4, pts)
    a = E4.axes
    assert np.all(lam[:, :-1] <= a[:-1]) and np.all(lam[:, :-1] >= a[1:])
    assert np.all(lam[:, -1] <= a[-1])
    # each coordinate solves Q_lam(x) = 1
    for s in range(4):
        off = np.abs(np.sum(pts**2 / (a - lam[:, s : s + 1]), axis=1) - 1.0)
        assert np.median(off) < 1e-8


def test_round_trip():
    x = cartesian_from_elliptic(E3, LAM_X0)
    assert np.allclose(x, np.abs(X0), atol=1e-10)
    assert np.allclose(cartesian_from_elliptic(E3, LAM_X0, signs=(-1, -1, -1)), -x)


def test_round_trip_random(rng):
    for _ in range(50):
        x, _ = random_tangent_line(E4, rng)
        lam = elliptic_coordinates(E4, x)
        back = cartesian_from_elliptic(E4, lam, signs=np.sign(x))
        assert np.allclose(back, x, atol=1e-8)


@pytest.mark.parametrize("lam,zero_axis", [((2.0, 1.5, 0.0), 1), ((2.5, 1.0, 0.0), 2), ((2.0, 1.0, 0.0), 1)])
def test_boundary_coordinates_land_on_hyperplane(lam, zero_axis):
    x = cartesian_from_elliptic(E3, lam)
    assert abs(x[zero_axis]) < 1e-7
    assert abs(confocal_form(E3, x) - 1.0) < 1e-12


def test_interlacing_violation():
    with pytest.raises(NegativeSquare):
        cartesian_from_elliptic(E3, (2.5, 2.2, 0.0))


def test_discriminant_on_own_quadric_is_square(rng):
    x, _ = random_tangent_line(E3, rng)
    y = rng.normal(size=3)
    assert tangency_discriminant(E3, x, y, 0.0) == pytest.approx(confocal_form(E3, x, y) ** 2, abs=1e-12)


def test_discriminant_vanishes_for_tangent_direction():
    assert abs(tangency_discriminant(E3, X0, Y0, 0.0)) < 1e-12


def test_discriminant_pole():
    with pytest.raises(PoleAtSemiAxis):
        tangency_discriminant(E3, X0, Y0, 2.0)


def test_caustic_quadratic_root():
    check_tangent(E3, X0, Y0)
    cs = caustic_parameters(E3, X0, Y0)
    # the cleared-denominator quadratic is l (78 l - 95) / 78
    assert cs.alpha == pytest.approx((95 / 78,), abs=1e-13)
    assert not cs.is_degenerate
    assert abs(tangency_discriminant(E3, X0, Y0, cs.alpha[0])) < 1e-10


def test_planar_section_caustic_is_degenerate():
    x = np.array([math.sqrt(1.5), 1.0, 0.0])
    y = np.array([-x[1] / 2.0, x[0] / 3.0, 0.0])
    y /= np.linalg.norm(y)
    cs = caustic_parameters(E3, x, y)
    assert cs.alpha == pytest.approx((1.0,), abs=1e-10)
    assert cs.degenerate == ((0, 2),)


def test_not_tangent():
    with pytest.raises(NotTangentToBase):
        caustic_parameters(E3, X0, np.array([1.0, 0.0, 0.0]))
    with pytest.raises(ValidationError):
        check_tangent(E3, X0, np.array([1.0, 0.0, 0.0]))


def test_chasles_root_count_matches_sign_changes(rng):
    # the eigenvalue roots agree with a sign scan of the numerator polynomial
    for e in (E3, E4):
        for _ in range(25):
            x = rng.normal(size=e.d)
            y = rng.normal(size=e.d)
            y /= np.linalg.norm(y)
            roots = tangent_quadric_parameters(e, x, y)
            assert len(roots) == e.d - 1
            assert np.max(np.abs(tangency_numerator(e, x, y, roots))) < 1e-9 * (1 + np.sum(x**2)) ** 2
            grid = np.linspace(-np.sum(x**2) - 2, e.a[0] + 1, 40001)
            vals = tangency_numerator(e, x, y, grid)
            changes = np.count_nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
            assert changes <= e.d - 1
            assert roots[-1] <= e.a[0] + 1e-12
            edges = [-np.inf, *sorted(e.a), np.inf]
            assert np.all(np.histogram(roots, bins=edges)[0] <= 2)


def test_d4_caustics_located(rng):
    for _ in range(30):
        x, y = random_tangent_line(E4, rng)
        cs = caustic_parameters(E4, x, y)
        assert len(cs.alpha) == 2
        for lo, hi in zip(E4.a[1:], E4.a[:-1]):
            assert sum(lo <= v <= hi for v in cs.alpha) <= 2
        for al in cs.alpha:
            assert abs(tangency_numerator(E4, x, y, al)) < 1e-9


def test_root_tol_scales_with_a1():
    assert Ellipsoid((30, 20, 10)).root_tol(DEFAULT) == pytest.approx(30 * DEFAULT.root)
