import math

import numpy as np
import pytest
from pytest import approx

from core.errors import LabError
from core.fractals import (
    FractalSpec,
    affine_embed,
    build_cantor,
    build_from_spec,
    build_sharpness_A,
    build_sharpness_B,
    cantor_power_spec,
    cantor_ratio,
    difference_dimension,
    difference_set,
    uniform_circle,
    uniform_disk,
)

MIDDLE_THIRD = math.log(2.0) / math.log(3.0)


def test_cantor_ratio_snaps_to_unit_fractions():
    assert cantor_ratio(MIDDLE_THIRD) == 1.0 / 3.0
    assert cantor_ratio(0.5) == approx(0.25)


def test_build_cantor():
    built = build_cantor(0.5, 3)
    mu = built.measure
    assert mu.atom_count == 8
    assert built.resolution == approx(0.25 ** 3)
    np.testing.assert_allclose(mu.weights, 1.0 / 8.0)
    assert mu.points[0, 0] == approx(0.25 ** 3 / 2.0)
    assert mu.points.min() > 0.0 and mu.points.max() < 1.0
    assert built.nominal_dimension == 0.5
    assert mu.metadata["provenance"]["kind"] == "central_cantor"


def test_build_cantor_rejects_bad_inputs():
    with pytest.raises(LabError) as e:
        build_cantor(1.5, 3)
    assert e.value.code == "bad_dimension"
    with pytest.raises(LabError) as e:
        build_cantor(0.5, 12, cap=1000)
    assert e.value.code == "too_large"


def test_spec_validation():
    with pytest.raises(LabError) as e:
        FractalSpec(kind="sierpinski")
    assert e.value.code == "unknown_kind"
    with pytest.raises(LabError) as e:
        FractalSpec(kind="product", children=[FractalSpec(kind="central_cantor", dimension_target=0.5)])
    assert e.value.code == "bad_arity"
    with pytest.raises(LabError) as e:
        FractalSpec.from_dict({"kind": "central_cantor", "dimension_target": 0.5, "depth": 3})
    assert e.value.code == "unknown_config_key"
    with pytest.raises(LabError) as e:
        FractalSpec(kind="central_cantor", dimension_target=0.5, level=0)
    assert e.value.code == "bad_level"


def test_spec_round_trip_and_level_shift():
    spec = cantor_power_spec(0.5, 3, 2)
    again = FractalSpec.from_dict(spec.to_dict())
    assert again.to_dict() == spec.to_dict()
    deeper = spec.at_level(5)
    assert deeper.level == 5
    assert all(child.level == 5 for child in deeper.children)


def test_cantor_power():
    built = build_from_spec(cantor_power_spec(0.5, 3, 4))
    assert built.measure.ambient_dim == 4
    assert built.measure.atom_count == 8 ** 4
    assert built.nominal_dimension == approx(2.0)
    assert built.measure.total_mass == approx(1.0)


def test_sharpness_A():
    built = build_sharpness_A(MIDDLE_THIRD, 2)
    mu = built.measure
    assert mu.ambient_dim == 4
    assert mu.atom_count == 4 * 9 * 9
    assert built.nominal_dimension == approx(2.0 + MIDDLE_THIRD)
    assert np.all(mu.points[:, 2] == 0.0)
    assert mu.total_mass == approx(1.0)


def test_sharpness_B():
    built = build_sharpness_B(0.5, 3)
    mu = built.measure
    assert mu.atom_count == 64
    assert built.nominal_dimension == approx(1.0)
    assert np.all(mu.points[:, 0] == 0.0)
    assert np.all(mu.points[:, 2] == 0.0)


def test_difference_dimension():
    assert difference_dimension(build_cantor(0.3, 2)) == approx(0.3 * math.log(3.0) / math.log(2.0))
    assert difference_dimension(build_cantor(MIDDLE_THIRD, 2)) == 1.0
    assert difference_dimension(build_cantor(0.8, 2)) == 1.0


def test_difference_set_merges_coincident_differences():
    source = build_cantor(MIDDLE_THIRD, 3)
    diff = difference_set(source)
    mu = diff.measure
    assert mu.atom_count < source.measure.atom_count ** 2
    assert mu.total_mass == approx(1.0)
    assert float(mu.weights @ mu.points[:, 0]) == approx(0.0, abs=1e-12)
    assert diff.resolution == approx(2.0 * source.resolution)


def test_affine_embed():
    line = build_cantor(0.4, 4)
    embedded = affine_embed(line, [[1.0], [0.0]], offset=[0.0, 2.0])
    assert embedded.measure.ambient_dim == 2
    assert np.all(embedded.measure.points[:, 1] == 2.0)
    assert embedded.nominal_dimension == 0.4
    with pytest.raises(LabError) as e:
        affine_embed(line, [[0.0], [0.0]])
    assert e.value.code == "degenerate_input"
    with pytest.raises(LabError) as e:
        affine_embed(line, [[1.0, 0.0]])
    assert e.value.code == "map_dimension"


def test_reference_measures():
    circle = uniform_circle(100, radius=2.0)
    np.testing.assert_allclose(np.linalg.norm(circle.points, axis=1), 2.0)
    assert circle.resolution == approx(4.0 * math.pi / 100)
    disk = uniform_disk(500, seed=3)
    assert np.all(np.linalg.norm(disk.points, axis=1) <= 1.0)
    np.testing.assert_array_equal(disk.points, uniform_disk(500, seed=3).points)


def test_difference_set_of_two_points():
    # the level-1 Cantor set rescaled onto {0, 1}
    ratio = cantor_ratio(0.5)
    pair = affine_embed(build_cantor(0.5, 1), [[1.0 / (1.0 - ratio)]], offset=[-0.5 * ratio / (1.0 - ratio)])
    np.testing.assert_allclose(np.sort(pair.measure.points[:, 0]), [0.0, 1.0], atol=1e-12)
    diff = difference_set(pair).measure
    order = np.argsort(diff.points[:, 0])
    np.testing.assert_allclose(diff.points[order, 0], [-1.0, 0.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(diff.weights[order], [0.25, 0.5, 0.25])
