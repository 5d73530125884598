"""
Scenario module initialization.
This module provides a factory to get a scenario by its registry name.
"""

from typing import Dict, Type

from core.errors import LabError
from scenarios.base import BaseScenario
from scenarios.audit_scenarios import ConcentrationLemma, DistanceConsistency, ParsevalBattery
from scenarios.decay_scenarios import ConeDecay, DirectionalDecay, SphericalDecay
from scenarios.projection_scenarios import (
    ProductTheorem,
    SharpPi,
    SharpSSubgroup,
    ThmPiAbsoluteContinuity,
    ThmPiDimension,
    ThmPiSmall,
    ThmPiTrivial,
    ThmSAbsoluteContinuity,
    ThmSDimension,
    ThmSTrivial,
)

# Dictionary of available scenarios
AVAILABLE_SCENARIOS: Dict[str, Type[BaseScenario]] = {
    cls.name: cls for cls in (
        ThmPiAbsoluteContinuity,
        ThmPiDimension,
        ThmPiSmall,
        ThmPiTrivial,
        ThmSAbsoluteContinuity,
        ThmSDimension,
        ThmSTrivial,
        SharpPi,
        SharpSSubgroup,
        ProductTheorem,
        SphericalDecay,
        DirectionalDecay,
        ConeDecay,
        ConcentrationLemma,
        ParsevalBattery,
        DistanceConsistency,
    )
}


def get_scenario(scenario_name: str) -> BaseScenario:
    """
    Get an instance of the named scenario

    Args:
        scenario_name: Registry name, e.g. ``thm_S_trivial``

    Returns:
        Instance of the requested scenario

    Raises:
        LabError: ``unknown_scenario`` if the name is not registered
    """
    scenario_class = AVAILABLE_SCENARIOS.get(scenario_name)

    if scenario_class is None:
        raise LabError("unknown_scenario",
                       f"Scenario '{scenario_name}' not found. Available scenarios: {list(AVAILABLE_SCENARIOS)}")

    return scenario_class()
