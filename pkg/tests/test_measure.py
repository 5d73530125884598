import math

import numpy as np
import pytest
from pytest import approx

from core.errors import LabError
from core.fractals import build_cantor, single_atom, uniform_cube, uniform_interval
from core.measure import (
    Ball,
    DiscreteMeasure,
    ball_mass,
    ball_masses,
    density_pairing,
    frostman_exponent,
    lazy_product,
    lower_derivative_density,
    product_measure,
    pushforward,
    sphere_area,
    unit_ball_volume,
)


def test_measure_validation():
    with pytest.raises(LabError) as e:
        DiscreteMeasure(np.zeros((0, 2)), [])
    assert e.value.code == "empty_set"
    with pytest.raises(LabError) as e:
        DiscreteMeasure([[0.0], [1.0]], [0.5, -0.5])
    assert e.value.code == "negative_weight"
    with pytest.raises(LabError) as e:
        DiscreteMeasure([[0.0], [1.0]], [1.0])
    assert e.value.code == "dimension"


def test_measure_is_read_only():
    mu = uniform_interval(4)
    with pytest.raises(ValueError):
        mu.points[0, 0] = 3.0
    assert mu.total_mass == approx(1.0)
    assert mu.ambient_dim == 1


def test_ball_volumes():
    assert unit_ball_volume(2) == approx(math.pi)
    assert unit_ball_volume(3) == approx(4.0 * math.pi / 3.0)
    assert sphere_area(1) == approx(2.0)
    assert sphere_area(2) == approx(2.0 * math.pi)
    assert sphere_area(3) == approx(4.0 * math.pi)


def test_ball_mass_closed_ball():
    mu = uniform_interval(10)
    assert ball_mass(mu, Ball([0.5], 0.1)) == approx(0.2)


def test_ball_masses_agree_with_single_balls(rng):
    mu = uniform_cube(8, 2)
    centers = rng.random((5, 2))
    radii = [0.3, 0.1, 0.2]
    table = ball_masses(mu, centers, radii)
    for i, center in enumerate(centers):
        for j, r in enumerate(radii):
            assert table[i, j] == approx(ball_mass(mu, Ball(center, r)))


def test_frostman_exponent_of_cantor_set():
    estimate = frostman_exponent(build_cantor(0.5, 10).measure)
    assert estimate.exponent == approx(0.5, abs=0.05)


def test_frostman_exponent_of_cantor_product():
    c = build_cantor(0.5, 8).measure
    estimate = frostman_exponent(product_measure(c, c))
    assert estimate.exponent == approx(1.0, abs=0.1)


def test_frostman_radii_below_resolution():
    c = build_cantor(0.5, 4).measure
    with pytest.raises(LabError) as e:
        frostman_exponent(c, radii=[0.1, 0.01, 1e-5])
    assert e.value.code == "below_resolution"


def test_product_measure():
    a = uniform_interval(3)
    b = uniform_interval(4)
    product = product_measure(a, b)
    assert product.atom_count == 12
    assert product.ambient_dim == 2
    assert product.total_mass == approx(1.0)
    with pytest.raises(LabError) as e:
        product_measure(a, b, cap=10)
    assert e.value.code == "product_too_large"


def test_lazy_product_matches_materialised():
    a = uniform_interval(3)
    b = uniform_cube(2, 2)
    lazy = lazy_product(a, b)
    assert lazy.ambient_dim == 3
    assert lazy.atom_count == 12
    np.testing.assert_allclose(lazy.materialize().points, product_measure(a, b).points)
    first, second = lazy.split_at(1)
    assert first.ambient_dim == 1 and second.ambient_dim == 2
    assert lazy.split_at(2) is None


def test_pushforward_keeps_weights():
    mu = uniform_cube(3, 2)
    image = pushforward(mu, lambda p: p[:, :1] + p[:, 1:])
    assert image.ambient_dim == 1
    np.testing.assert_allclose(image.weights, mu.weights)
    with pytest.raises(LabError) as e:
        pushforward(mu, lambda p: p[:2])
    assert e.value.code == "map_dimension"


def test_lower_derivative_density_of_an_atom():
    mu = single_atom([0.0, 0.0])
    assert lower_derivative_density(mu, [0.0, 0.0], [1.0, 0.5]) == approx(1.0 / math.pi)
    with pytest.raises(LabError) as e:
        lower_derivative_density(mu, [0.0, 0.0], [0.5, 1.0])
    assert e.value.code == "unsorted_scales"


def test_density_pairing_of_uniform_square():
    # squared L^2 norm of the uniform density on [0, 1]^2 is 1; the boundary loses a little
    value = density_pairing(uniform_cube(64, 2), 0.05)
    assert value == approx(1.0, rel=0.15)


def test_cantor_ball_masses_are_powers_of_two():
    cantor = build_cantor(math.log(2.0) / math.log(3.0), 6).measure
    for atom in cantor.points[[0, 17, 42, 63]]:
        for j in range(7):
            assert ball_mass(cantor, Ball(atom, 3.0 ** -j)) == approx(2.0 ** -j, rel=1e-12)


def test_lower_derivative_density_of_uniform_square():
    square = uniform_cube(100, 2)
    radii = [0.2, 0.1, 0.05]
    assert lower_derivative_density(square, [0.5, 0.5], radii) == approx(1.0, abs=0.1)
    assert lower_derivative_density(square, [5.0, 5.0], radii) == 0.0
