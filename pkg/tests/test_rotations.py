import math

import numpy as np
import pytest
from pytest import approx
from scipy.stats import kstest

from core.errors import LabError
from core.rotations import (
    Rotation,
    RotationMeasure,
    apply_pi,
    apply_S,
    circle_concentration_exact,
    concentration_audit,
    haar_batch,
    haar_concentration_exact,
    haar_measure,
    haar_sample,
    plane_basis,
    rotation_distance,
    s_map,
    sphere_concentration_exact,
    subgroup_measure,
    subgroup_sample,
)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_haar_batch_is_orthogonal(n, rng):
    mats = haar_batch(n, 100, rng)
    products = np.einsum("kji,kjl->kil", mats, mats)
    np.testing.assert_allclose(products, np.broadcast_to(np.eye(n), products.shape), atol=1e-12)


def test_haar_and_subgroup_exponents():
    haar = haar_measure(3, 50, seed=1)
    assert haar.alpha == 3.0
    assert haar.beta == 2.0
    assert haar.total_mass == approx(1.0)
    sub = subgroup_measure(3, 50, seed=1)
    assert sub.beta == 0.0
    np.testing.assert_allclose(sub.matrices[:, 2, 2], 1.0)
    np.testing.assert_allclose(sub.matrices[:, 2, :2], 0.0)


def test_haar_measure_is_seeded():
    np.testing.assert_array_equal(haar_measure(2, 10, seed=7).matrices, haar_measure(2, 10, seed=7).matrices)


def test_subgroup_sample_fixes_last_axis(rng):
    g = subgroup_sample(2, rng)
    assert g.dim == 2
    assert g.matrix[1, 1] == 1.0
    with pytest.raises(LabError) as e:
        subgroup_measure(1, 10)
    assert e.value.code == "unsupported_dimension"


def test_rotation_validation():
    with pytest.raises(LabError) as e:
        Rotation(np.array([[1.0, 0.1], [0.0, 1.0]]))
    assert e.value.code == "not_orthogonal"
    g = Rotation(np.array([[0.0, -1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(g.inverse().matrix @ g.matrix, np.eye(2))
    assert g.to_row_major() == [0.0, -1.0, 1.0, 0.0]


def test_projections():
    g = Rotation(np.array([[0.0, -1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(apply_S(g, [1.0, 2.0], [1.0, 0.0]), [1.0, 1.0])
    np.testing.assert_allclose(apply_pi(0.5, [1.0, 2.0], [2.0, 2.0]), [0.0, 1.0])
    points = np.array([[1.0, 2.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]])
    mapped = s_map(g)(points)
    for row, image in zip(points, mapped):
        np.testing.assert_allclose(image, apply_S(g, row[:2], row[2:]))


def test_plane_basis(rng):
    g = Rotation(haar_batch(3, 1, rng)[0])
    basis = plane_basis(g)
    np.testing.assert_allclose(basis.gram(), np.eye(6), atol=1e-12)
    project = s_map(g)
    np.testing.assert_allclose(project(basis.vectors_kernel), 0.0, atol=1e-12)
    np.testing.assert_allclose(project(basis.vectors_u) / math.sqrt(2.0), np.eye(3), atol=1e-12)


def test_rotation_distance():
    g = Rotation(np.eye(2))
    assert rotation_distance(g, g) == 0.0
    assert rotation_distance(g, Rotation(-np.eye(2))) == approx(2.0)


def test_exact_concentration():
    assert haar_concentration_exact(1, [1.0], [1.0], 0.5) == approx(0.5)
    assert haar_concentration_exact(2, [1.0, 0.0], [0.0, 1.0], math.sqrt(2.0)) == approx(0.5)
    assert haar_concentration_exact(3, [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], math.sqrt(2.0)) == approx(0.5)
    assert haar_concentration_exact(2, [1.0, 0.0], [3.0, 0.0], 1.0) == 0.0


def test_concentration_audit_matches_exact_fraction():
    theta = haar_measure(2, 20000, seed=4)
    x, z, r = [1.0, 0.0], [0.0, 1.5], 0.8
    row = concentration_audit(theta, x, z, [r])[0]
    exact = haar_concentration_exact(2, x, z, r)
    assert abs(row.measured - exact) <= 4.0 * row.stderr
    assert row.bound == approx(min(r / 1.5, r / 1.0))
    assert row.measured <= row.bound


def test_concentration_audit_rejects_zero_vector():
    theta = haar_measure(2, 10)
    with pytest.raises(LabError) as e:
        concentration_audit(theta, [0.0, 0.0], [1.0, 0.0], [0.5])
    assert e.value.code == "degenerate_input"


def test_haar_circle_angles_are_uniform(rng):
    mats = haar_batch(2, 100_000, rng)
    angles = np.mod(np.arctan2(mats[:, 1, 0], mats[:, 0, 0]), 2.0 * np.pi) / (2.0 * np.pi)
    assert kstest(angles, "uniform").statistic < 0.01


def test_haar_sphere_moments(rng):
    images = haar_batch(3, 100_000, rng)[:, :, 0]
    np.testing.assert_allclose(images.mean(axis=0), 0.0, atol=0.01)
    np.testing.assert_allclose((images ** 2).mean(axis=0), 1.0 / 3.0, atol=0.01)


def test_haar_sample_is_a_rotation(rng):
    g = haar_sample(3, rng)
    assert g.dim == 3
    np.testing.assert_allclose(g.inverse().matrix @ g.matrix, np.eye(3), atol=1e-12)


def test_arc_and_cap_oracles():
    assert circle_concentration_exact([1.0, 0.0], [1.0, 0.0], 2.0 * math.sin(math.pi / 8.0)) == approx(0.25)
    assert sphere_concentration_exact([0.0, 0.0, 2.0], [0.0, 0.0, 2.0], 2.0) == approx(0.25)
    assert haar_concentration_exact(2, [0.3, 0.4], [0.5, 0.0], 0.2) == circle_concentration_exact([0.3, 0.4], [0.5, 0.0], 0.2)
    with pytest.raises(LabError) as e:
        sphere_concentration_exact([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0.5)
    assert e.value.code == "degenerate_input"


def test_concentration_exponent_is_capped():
    with pytest.raises(LabError) as e:
        RotationMeasure(np.eye(2)[None, :, :], [1.0], alpha=1.5)
    assert e.value.code == "bad_config"
    assert RotationMeasure(np.eye(3)[None, :, :], [1.0], alpha=3.0).beta == 2.0


def test_haar_is_invariant_under_left_translation(rng):
    h = np.array([[0.0, 1.0], [1.0, 0.0]]) @ haar_batch(2, 1, rng)[0]
    images = h @ haar_batch(2, 100_000, rng)
    angles = np.mod(np.arctan2(images[:, 1, 0], images[:, 0, 0]), 2.0 * np.pi) / (2.0 * np.pi)
    assert kstest(angles, "uniform").statistic < 0.01

    h3 = haar_batch(3, 1, rng)[0]
    heights = (h3 @ haar_batch(3, 100_000, rng))[:, 2, 0]
    assert kstest(heights, "uniform", args=(-1.0, 2.0)).statistic < 0.01
