"""
Name-based lookup of map systems and observables.
"""

from typing import Dict, Optional, Sequence

from .baker_map import BakerMap
from .map_system import MapSystem
from .observables import CONSTANT, COS4X2, SIN_COS_X3, Observable
from .solenoid_map import SolenoidMap

# Mapping of map names to MapSystem subclasses
MAP_REGISTRY: Dict[str, type] = {
    "baker": BakerMap,
    "solenoid": SolenoidMap,
}

OBSERVABLE_REGISTRY: Dict[str, Observable] = {
    obs.name: obs for obs in (COS4X2, SIN_COS_X3, CONSTANT)
}


def available_maps():
    return sorted(MAP_REGISTRY)


def available_observables():
    return sorted(OBSERVABLE_REGISTRY)


def get_map(
    name: str,
    params: Optional[Sequence[float]] = None,
    perturb_dir: Optional[Sequence[float]] = None,
) -> MapSystem:
    """Build a registered map by name.

    Raises:
        ValueError: If no map is registered under ``name``.
    """
    key = name.strip().lower()
    if key not in MAP_REGISTRY:
        raise ValueError(f"No map named '{name}'. Available: {available_maps()}")
    return MAP_REGISTRY[key](params, perturb_dir)


def get_observable(name: str, map_system: Optional[MapSystem] = None) -> Observable:
    """Look up an observable by name; ``None``/empty picks the map's default.

    Raises:
        ValueError: If the name is unknown or the observable needs more state
            components than ``map_system`` has.
    """
    if not name:
        if map_system is None:
            raise ValueError("An observable name is required when no map is given.")
        name = map_system.DEFAULT_OBSERVABLE
    key = name.strip().lower()
    if key not in OBSERVABLE_REGISTRY:
        raise ValueError(f"No observable named '{name}'. Available: {available_observables()}")
    observable = OBSERVABLE_REGISTRY[key]
    if map_system is not None and observable.min_dim > map_system.dim:
        raise ValueError(
            f"Observable '{observable.name}' needs a state of dimension >= {observable.min_dim}, "
            f"map '{map_system.NAME}' has {map_system.dim}."
        )
    return observable
