import math

import numpy as np
import pytest
from pytest import approx
from scipy.integrate import quad
from scipy.special import j0

from core.errors import LabError
from core.fractals import build_cantor, single_atom, uniform_circle, uniform_interval
from core.measure import DiscreteMeasure, lazy_product, product_measure, pushforward
from core.rotations import haar_measure
from core.spectral import (
    EnergyReport,
    annulus_average,
    ball_integral,
    cone_average,
    cone_measure_total,
    directional_decay,
    fourier_at,
    fourier_transform,
    mollified_energy_spatial,
    riesz_constant,
    riesz_energy_fourier,
    riesz_energy_spatial,
    sigma_theta,
    sigma_theta_estimate,
    sphere_nodes,
    spherical_average,
    spherical_profile,
)

MIDDLE_THIRD = math.log(2.0) / math.log(3.0)


def test_fourier_of_single_atom():
    assert fourier_at(single_atom([0.0, 0.0]), [3.0, -2.0]) == approx(1.0)
    assert abs(fourier_at(single_atom([0.25]), [1.0]) - (-1j)) < 1e-12


def test_lazy_product_transform_matches_materialised(rng):
    a = build_cantor(0.5, 3).measure
    b = build_cantor(0.7, 3).measure
    freqs = rng.normal(scale=5.0, size=(20, 2))
    np.testing.assert_allclose(fourier_transform(lazy_product(a, b), freqs),
                               fourier_transform(product_measure(a, b), freqs), atol=1e-12)


def test_sphere_nodes():
    _, weights = sphere_nodes(2, 64)
    assert weights.sum() == approx(2.0 * math.pi)
    nodes, weights = sphere_nodes(3, 512)
    assert weights.sum() == approx(4.0 * math.pi)
    np.testing.assert_allclose(np.linalg.norm(nodes, axis=1), 1.0)
    with pytest.raises(LabError) as e:
        sphere_nodes(2, 10)
    assert e.value.code == "insufficient_nodes"


def test_spherical_average_of_circle_matches_bessel_oracle():
    circle = uniform_circle(4096)
    expected = 2.0 * math.pi * j0(2.0 * math.pi * 5.0) ** 2
    assert spherical_average(circle, 5.0) == approx(expected, rel=1e-3)
    with pytest.raises(LabError) as e:
        spherical_average(circle, 1.0)
    assert e.value.code == "below_valid_range"


def test_transform_is_bounded_by_total_mass(rng):
    c = build_cantor(0.5, 5).measure
    square = product_measure(c, c)
    heavy = DiscreteMeasure(square.points, 2.0 * square.weights, square.resolution)
    freqs = rng.normal(scale=40.0, size=(500, 2))
    assert np.all(np.abs(fourier_transform(heavy, freqs)) <= heavy.total_mass * (1.0 + 1e-12))
    assert np.all(np.abs(fourier_transform(lazy_product(c, c), freqs)) <= 1.0 + 1e-12)


def test_spherical_average_is_invariant_under_isometries():
    c = build_cantor(0.5, 5).measure
    mu = product_measure(c, c)
    angle = 0.7
    rotation = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    shifted = pushforward(mu, lambda p: p + np.array([0.37, -1.25]))
    rotated = pushforward(mu, lambda p: p @ rotation.T)
    for r in (3.0, 7.3):
        reference = spherical_average(mu, r)
        assert spherical_average(shifted, r) == approx(reference, rel=1e-6)
        assert spherical_average(rotated, r) == approx(reference, rel=1e-6)


def test_annulus_average_tracks_spherical_average():
    c = build_cantor(0.5, 5).measure
    mu = product_measure(c, c)
    radii = [4.0, 8.0, 16.0, 32.0, 64.0]
    ratios = np.array([annulus_average(mu, r, seed=1, max_samples=200_000).value / spherical_average(mu, r)
                       for r in radii])
    constant = math.exp(float(np.log(ratios).mean()))
    assert np.all(ratios / constant <= 3.0)
    assert np.all(ratios / constant >= 1.0 / 3.0)


def test_ball_integral_grows_like_codimension():
    # for the middle-third Cantor measure the integral over |y| <= R grows like R^{1 - s}
    cantor = build_cantor(MIDDLE_THIRD, 10).measure
    radii = [9.0, 27.0, 81.0, 243.0]
    values = [ball_integral(cantor, R) for R in radii]
    slope = float(np.polyfit(np.log(radii), np.log(values), 1)[0])
    assert 0.0 < slope <= 1.0 - MIDDLE_THIRD + 0.1


def test_circle_profile_decays_like_inverse_radius():
    profile = spherical_profile(uniform_circle(4096), [4.0, 8.0, 16.0, 32.0, 64.0])
    assert profile.fit().slope == approx(-1.0, abs=0.05)


def test_averages_of_a_single_atom():
    atom = single_atom([0.0, 0.0])
    assert ball_integral(atom, 2.0) == approx(4.0 * math.pi)
    estimate = annulus_average(atom, 3.0, width=1.0)
    assert estimate.converged
    assert estimate.value == approx(4.0 * math.pi)


def test_cone_and_directional_of_a_single_atom():
    separable = lazy_product(single_atom([0.0, 0.0]), single_atom([0.0, 0.0]))
    assert cone_average(separable, 2.0).value == approx(cone_measure_total(2))
    assert cone_average(single_atom([0.0] * 4), 2.0).value == approx(3.0 * math.pi)
    theta = haar_measure(2, 16)
    assert directional_decay(single_atom([0.0] * 4), theta, 2.0).value == approx(2.0 ** 2 * 3.0 * math.pi)


def test_directional_decay_equals_scaled_cone_average():
    factor = build_cantor(0.6, 3).measure
    mu = lazy_product(factor, factor, factor, factor)
    theta = haar_measure(2, 4096, seed=2)
    R = 2.0
    direct = directional_decay(mu, theta, R, seed=5, rel_tolerance=0.02)
    cone = cone_average(mu, R)
    assert direct.value / (R ** 2 * cone.value) == approx(1.0, abs=0.1)


def test_sigma_theta_for_haar_is_normalised_spherical_average():
    c = build_cantor(0.5, 4).measure
    nu = product_measure(c, c)
    theta = haar_measure(2, 20000, seed=3)
    estimate = sigma_theta_estimate(nu, theta, [3.0, 0.0])
    expected = spherical_average(nu, 3.0) / (2.0 * math.pi)
    assert abs(estimate.value - expected) <= 4.0 * estimate.stderr + 1e-9
    assert sigma_theta(nu, theta, [3.0, 0.0]) == estimate.value
    with pytest.raises(LabError) as e:
        sigma_theta(nu, theta, [0.5, 0.0])
    assert e.value.code == "below_valid_range"


def test_riesz_constant():
    assert riesz_constant(1, 0.5) == approx(1.0)
    assert riesz_constant(3, 1.0) == approx(1.0 / math.pi)
    with pytest.raises(LabError) as e:
        riesz_constant(1, 1.0)
    assert e.value.code == "bad_exponent"


def test_spatial_energy():
    pair = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    assert riesz_energy_spatial(pair, 0.5).value == approx(0.5)
    coincident = DiscreteMeasure([[0.0], [0.0]], [0.5, 0.5])
    assert riesz_energy_spatial(coincident, 0.5).infinite


def test_mollified_energy_of_an_atom_matches_gaussian_moment():
    s, width = 0.5, 0.1
    tau = math.sqrt(2.0) * width
    moment, _ = quad(lambda z: 2.0 * z ** -s * math.exp(-z * z / (2.0 * tau * tau)) / (tau * math.sqrt(2.0 * math.pi)),
                     0.0, math.inf)
    assert mollified_energy_spatial(single_atom([0.0]), s, width) == approx(moment, rel=1e-5)


def test_mollified_energy_of_separated_atoms():
    s, width = 0.5, 0.01
    pair = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    diagonal = 0.5 * mollified_energy_spatial(single_atom([0.0]), s, width)
    assert mollified_energy_spatial(pair, s, width) - diagonal == approx(0.5, rel=1e-3)


def test_energy_identity_on_uniform_interval():
    report = riesz_energy_fourier(uniform_interval(1024), 0.5)
    assert report.relative_gap <= 0.1
    assert report.atomic_value == approx(8.0 / 3.0, rel=0.05)
    assert report.constant_used == approx(1.0)


@pytest.mark.parametrize("atoms, within", [(1024, False), (4096, True)])
def test_interval_energy_against_closed_form(atoms, within):
    value = riesz_energy_spatial(uniform_interval(atoms), 0.5).value
    assert value < 8.0 / 3.0
    assert (abs(value - 8.0 / 3.0) <= 0.05) is within


def test_truncated_energy_is_reported():
    mu = uniform_interval(256)
    with pytest.raises(LabError) as e:
        riesz_energy_fourier(mu, 0.5, xi_max=2.0, truncation_threshold=1e-9)
    assert e.value.code == "truncation_dominated"
    assert isinstance(e.value.detail, EnergyReport)
    report = riesz_energy_fourier(mu, 0.5, xi_max=2.0, strict=False, truncation_threshold=1e-9)
    assert report.xi_max == approx(e.value.detail.xi_max)


def test_fourier_energy_is_nondecreasing_in_cutoff():
    mu = uniform_interval(256)
    values = [riesz_energy_fourier(mu, 0.5, width=0.01, xi_max=xi_max, strict=False).fourier_value
              for xi_max in (5.0, 10.0, 20.0, 40.0)]
    assert all(later >= earlier for earlier, later in zip(values, values[1:]))
