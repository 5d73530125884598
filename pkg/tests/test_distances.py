import numpy as np
import pytest
from pytest import approx

from core.distances import (
    DistanceMeasure,
    consistency_triplet,
    distance_l2_indicator,
    distance_measure,
    weighted_distance_pairing,
)
from core.errors import LabError
from core.fractals import uniform_circle, uniform_disk, uniform_interval
from core.measure import DiscreteMeasure
from core.rotations import haar_measure


@pytest.fixture
def two_atoms():
    return DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])


def test_distance_measure_accounts_for_all_mass(two_atoms):
    dm = distance_measure(two_atoms, two_atoms, bins=4)
    assert dm.diagonal_mass == approx(0.5)
    assert dm.overflow_mass == 0.0
    np.testing.assert_allclose(dm.masses, [0.0, 0.0, 0.0, 0.5])
    assert dm.masses.sum() + dm.diagonal_mass + dm.overflow_mass == approx(dm.source_mass)


def test_distance_bins_respect_resolution():
    mu = uniform_interval(10)
    with pytest.raises(LabError) as e:
        distance_measure(mu, mu, bins=100)
    assert e.value.code == "bins_too_fine"


def test_coarsened_keeps_odd_last_bin():
    dm = DistanceMeasure([0.0, 1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 6.0)
    coarse = dm.coarsened()
    np.testing.assert_allclose(coarse.masses, [3.0, 3.0])
    np.testing.assert_allclose(coarse.bin_edges, [0.0, 2.0, 3.0])


def test_l2_indicator_separates_densities_from_point_masses(two_atoms):
    mu = uniform_interval(400)
    smooth = distance_l2_indicator(distance_measure(mu, mu, bins=32))
    assert smooth.stable
    assert smooth.refinement_ratio == approx(1.0, abs=0.1)
    atomic = distance_l2_indicator(distance_measure(two_atoms, two_atoms, bins=4))
    assert atomic.refinement_ratio == approx(2.0)
    assert not atomic.stable


def test_circle_chord_lengths_match_closed_form():
    circle = uniform_circle(10_000)
    edges = np.linspace(0.0, 2.0, 41)
    dm = distance_measure(circle, circle, bins=edges)
    exact = np.diff(2.0 / np.pi * np.arcsin(edges / 2.0))
    np.testing.assert_allclose(dm.masses[:-1], exact[:-1], rtol=0.05)
    assert dm.diagonal_mass == approx(1e-4)
    assert dm.masses.sum() + dm.diagonal_mass + dm.overflow_mass == approx(1.0)


def test_pairing_of_uniform_densities_on_one_to_two():
    edges = np.linspace(0.0, 2.0, 41)
    masses = np.where(edges[:-1] >= 1.0, np.diff(edges), 0.0)
    dm = DistanceMeasure(edges, masses, 1.0)
    assert weighted_distance_pairing(dm, dm, 2) == approx(np.log(2.0), abs=0.02)


def test_pairing_needs_shared_bins(two_atoms):
    with pytest.raises(LabError) as e:
        weighted_distance_pairing(distance_measure(two_atoms, two_atoms, bins=4),
                                  distance_measure(two_atoms, two_atoms, bins=8), 1)
    assert e.value.code == "bin_mismatch"


def test_consistency_triplet_on_uniform_disks():
    mu = uniform_disk(200, seed=0)
    nu = uniform_disk(200, seed=1)
    triplet = consistency_triplet(mu, nu, 0.15, haar_measure(2, 16, seed=0), bins=32)
    assert triplet.constant == approx(1.0 / (2.0 * np.pi))
    assert min(triplet.density_side, triplet.middle, triplet.pairing) > 0.0
    assert triplet.consistent(2.0)


def test_distance_measure_is_invariant_under_isometries():
    mu = uniform_disk(200, seed=4)
    nu = uniform_disk(150, seed=5)
    edges = np.linspace(0.0, 2.0, 17)
    angle = 1.1
    rotation = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    shift = np.array([3.0, -0.5])

    def move(m):
        return DiscreteMeasure(m.points @ rotation.T + shift, m.weights, m.resolution)

    reference = distance_measure(mu, nu, edges)
    moved = distance_measure(move(mu), move(nu), edges)
    np.testing.assert_allclose(moved.masses, reference.masses, atol=1e-15)
    assert moved.overflow_mass == approx(reference.overflow_mass)
