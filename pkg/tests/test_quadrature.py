import math

import numpy as np
import pytest

from geoclose import SpectralCurve, admissible_intervals, band_integral, band_vector, gap_vector
from geoclose.config import DEFAULT
from geoclose.errors import QuadratureNotConverged, ValidationError
from geoclose.quadrature import (
    CHART_DIRECT,
    CHART_RECIPROCAL,
    abel_difference,
    abel_prime_vectors,
    chart_roots,
    epsilon_extrapolated_integral,
    interval_vector,
    root_interval_integrals,
)
from geoclose.spectral import gap_intervals

from conftest import E3, E4, random_curve


def test_chebyshev_kernel_is_pi():
    vals, err, _ = root_interval_integrals((0.0, 1.0), 1.0, 0, 2)
    assert vals[0] == pytest.approx(math.pi, abs=1e-12)
    assert vals[1] == pytest.approx(math.pi / 2, abs=1e-12)
    assert vals[2] == pytest.approx(3 * math.pi / 8, abs=1e-12)


def test_kernel_with_outer_roots():
    # int_1^2 dx / sqrt((x-1)(2-x)) * 1/sqrt(x - 0) against the oracle
    vals, _, _ = root_interval_integrals((0.0, 1.0, 2.0), 1.0, 1, 1)
    ref = epsilon_extrapolated_integral((0.0, 1.0, 2.0), 1.0, 1.0, 2.0, 1)
    assert np.allclose(vals, ref, rtol=1e-10)


def test_band_value_against_oracle():
    c = SpectralCurve(E3, (1.5,))
    v = band_integral(c, 2, 1)
    assert v > 0
    roots, lead = chart_roots(c)
    ref = epsilon_extrapolated_integral(roots, lead, 1.0, 1.5, 1)
    assert v == pytest.approx(ref[1], rel=1e-9)


@pytest.mark.parametrize("d", [3, 4, 5])
def test_oracle_equivalence_random(rng, d):
    for _ in range(3):
        c = random_curve(rng, d)
        roots, lead = chart_roots(c)
        ivs = [(iv, band_vector(c, s)) for s, iv in enumerate(admissible_intervals(c).bands, 1)]
        ivs += [(iv, gap_vector(c, k)) for k, iv in enumerate(gap_intervals(c), 1)]
        for (lo, hi), v in ivs:
            ref = epsilon_extrapolated_integral(roots, lead, lo, hi, c.genus)
            assert np.allclose(v.values, ref, rtol=1e-9, atol=0)


def test_positive_and_error_estimate(rng):
    c = random_curve(rng, 4)
    for s in range(1, c.genus + 1):
        v = band_vector(c, s)
        assert np.all(v.values > 0)
        assert np.all(v.estimated_error <= DEFAULT.quad_rel * v.values + DEFAULT.quad_abs)
        assert v.nodes >= 32


def test_nodes_grow_as_neighbour_approaches():
    n = []
    for dl in (1e-1, 1e-3, 1e-5):
        n.append(band_vector(SpectralCurve(E3, (2.0 - dl,)), 2).nodes)
    assert n[0] < n[1] < n[2]


def test_narrow_gap_stays_finite_adjacent_band_diverges():
    gaps, bands = [], []
    for dl in (1e-2, 1e-4, 1e-6):
        c = SpectralCurve(E3, (2.0 - dl,))
        gaps.append(gap_vector(c, 1).values[0])
        bands.append(band_vector(c, 2).values[0])
    # the gap tends to pi / sqrt(|P'| at the merging root) = pi / sqrt(2)
    assert gaps[-1] == pytest.approx(math.pi / math.sqrt(2.0), rel=1e-5)
    # logarithmic growth: equal increments per factor 100 of the gap width
    inc = np.diff(bands)
    assert inc == pytest.approx([math.log(100.0) / math.sqrt(2.0)] * 2, rel=2e-2)


def test_extreme_separation_does_not_converge():
    c = SpectralCurve(E3, (2.0 - 1e-8,))
    with pytest.raises(QuadratureNotConverged):
        band_vector(c, 2)


def test_interval_must_be_between_consecutive_zeros():
    c = SpectralCurve(E3, (1.5,))
    with pytest.raises(ValidationError):
        interval_vector(c, (1.0, 2.0), "band")
    with pytest.raises(ValidationError):
        interval_vector(c, (1.1, 1.5), "band")


def test_reciprocal_chart_matches_direct(rng):
    c = random_curve(rng, 4)
    g = c.genus
    roots, _ = chart_roots(c, CHART_RECIPROCAL)
    for lo, hi in admissible_intervals(c).bands:
        d = interval_vector(c, (lo, hi), "band", CHART_DIRECT).values
        u_lo = roots[int(np.argmin(np.abs(np.array(roots) - 1.0 / hi)))]
        u_hi = roots[int(np.argmin(np.abs(np.array(roots) - 1.0 / lo)))]
        r = interval_vector(c, (u_lo, u_hi), "band", CHART_RECIPROCAL, max_power=g - 1).values
        # x**i dx / y  <->  u**(g-1-i) du / v
        assert np.allclose(d[:g], r[::-1][:g], rtol=1e-11)


def test_abel_difference_signs():
    c = SpectralCurve(E4, (2.2, 2.8))
    for s in (1, 2, 3):
        diff = abel_difference(c, None, s).values
        v = band_vector(c, s).values
        assert diff[0] == 0.0
        assert np.array_equal(diff[1:], (-1.0) ** s * v[1:])


def test_abel_prime_vectors_shapes():
    c = SpectralCurve(E3, (1.5,))
    cuts, gaps = abel_prime_vectors(c)
    assert len(cuts) == 2 and len(gaps) == 2
    for v in cuts + gaps:
        assert len(v) == c.genus and v.values[-1] == 0.0 and np.all(v.values[:-1] > 0)
    cuts_d, gaps_d = abel_prime_vectors(c, "largest", CHART_DIRECT)
    assert [v.interval for v in cuts_d] == [(0.0, 1.0), (1.5, 2.0)]
    assert len(cuts_d[0]) == c.genus + 1
    with pytest.raises(ValueError):
        abel_prime_vectors(c, "largest", CHART_RECIPROCAL)
