import math

import numpy as np
import pytest
from pytest import approx

from core.dimension import (
    box_counts,
    box_dimension,
    count_boxes,
    energy_dimension,
    lebesgue_positivity,
)
from core.errors import LabError
from core.fractals import build_cantor, single_atom, uniform_cube, uniform_interval, uniform_segment
from core.measure import product_measure

MIDDLE_THIRD = math.log(2.0) / math.log(3.0)


def test_count_boxes_on_a_grid():
    count = count_boxes(uniform_cube(8, 2), 0.25)
    assert count.occupied == 16
    assert count.covered_volume(2) == approx(1.0)


def test_box_dimension_of_middle_third_cantor_set():
    cantor = build_cantor(MIDDLE_THIRD, 8)
    scales = [3.0 ** -j for j in range(1, 8)]
    fit = box_dimension(cantor, scales=scales)
    assert fit.slope == approx(MIDDLE_THIRD, abs=1e-6)
    # the coarse plateau and the saturated finest scale are trimmed
    assert fit.points_used == 5


def test_box_counts_are_exact_powers_of_two():
    cantor = build_cantor(MIDDLE_THIRD, 8)
    counts = box_counts(cantor, [3.0 ** -j for j in range(1, 8)], offsets=0)
    assert [c.occupied for c in counts] == [2 ** j for j in range(1, 8)]


def test_box_dimension_rejects_bad_scales():
    cantor = build_cantor(MIDDLE_THIRD, 4)
    with pytest.raises(LabError) as e:
        box_dimension(cantor, scales=[0.5, 0.25, 0.125])
    assert e.value.code == "insufficient_scales"
    with pytest.raises(LabError) as e:
        box_dimension(cantor, scales=[0.1, 0.2, 0.05, 0.02])
    assert e.value.code == "unsorted_scales"
    with pytest.raises(LabError) as e:
        box_dimension(cantor, scales=[0.1, 0.05, 0.02, 0.001])
    assert e.value.code == "below_resolution"
    with pytest.raises(LabError) as e:
        box_dimension(np.zeros((0, 2)))
    assert e.value.code == "empty_set"


def test_positivity_of_a_filled_square():
    result = lebesgue_positivity(uniform_cube(128, 2))
    assert result.verdict == "positive"
    assert result.box_fit.slope == approx(2.0, abs=0.15)


def test_positivity_of_a_one_dimensional_product():
    c = build_cantor(0.5, 6).measure
    result = lebesgue_positivity(product_measure(c, c))
    assert result.verdict == "null"
    assert result.curve.slope <= -0.3


def test_energy_dimension_of_cantor_set():
    result = energy_dimension(build_cantor(0.5, 7), [0.3, 0.7])
    assert result.flag == "ok"
    assert result.value == 0.3
    assert result.ratios[0.3] < 1.0 < result.ratios[0.7]
    assert result.levels == (3, 4, 5, 6, 7)


def test_energy_dimension_edge_cases():
    assert energy_dimension(single_atom([0.5]), [0.5]).flag == "zero_dimensional"
    with pytest.raises(LabError) as e:
        energy_dimension(uniform_interval(100), [0.5])
    assert e.value.code == "no_level_sweep"
    with pytest.raises(LabError) as e:
        energy_dimension(build_cantor(0.5, 7), [0.7, 0.3])
    assert e.value.code == "unsorted_scales"


def test_box_dimension_is_invariant_under_isometries():
    segment = uniform_segment(4096, [1.0, 0.0]).points
    scales = np.geomspace(1.0 / 16.0, 1.0 / 1024.0, 7)
    reference = box_dimension(segment, scales=scales, offsets=4).slope
    for k in range(8):
        angle = k * np.pi / 8.0
        rotation = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        moved = segment @ rotation.T + np.array([0.37 * k, -0.21 * k])
        assert box_dimension(moved, scales=scales, offsets=4).slope == approx(reference, abs=0.05)
    assert reference == approx(1.0, abs=0.05)
