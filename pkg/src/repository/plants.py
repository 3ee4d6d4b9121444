import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Type

import numpy as np
from pydantic import BaseModel, ValidationError

from src.conf import messages
from src.exceptions import ConfigError, EquilibriumError
from src.models.sdss import PlantModel
from src.plants.linear_test import LinearTestPlant
from src.plants.pancreas import ArtificialPancreas
from src.plants.powertrain import Powertrain
from src.plants.quad_tank import QuadTank
from src.schemas import (ArtificialPancreasParams, LinearTestParams, PowertrainParams, QuadTankParams)
from src.services.numerics import fd_jacobian

logger = logging.getLogger(__name__)

NEWTON_MAX_ITERATIONS = 200
NEWTON_TOLERANCE = 1e-9
MIN_DAMPING = 1e-10


@dataclass(frozen=True)
class PlantCatalogEntry:
    name: str
    prefix: str
    plant_class: Type[PlantModel]
    params_model: Type[BaseModel]
    default_config: dict


CATALOG: Dict[str, PlantCatalogEntry] = {
    entry.name: entry for entry in (
        PlantCatalogEntry(
            name="artificial-pancreas", prefix="ap", plant_class=ArtificialPancreas,
            params_model=ArtificialPancreasParams,
            default_config={
                "plant": {"name": "artificial-pancreas"},
                "controller": {"mode": "pid", "max_degree": 2,
                               "box": [[-1e-2, 1e-3], [-1e-5, 1e-6], [-1.0, 1e-1]]},
                "synthesis": {"threshold": 0.95, "m0": 1},
            }),
        PlantCatalogEntry(
            name="powertrain", prefix="pt", plant_class=Powertrain, params_model=PowertrainParams,
            default_config={
                "plant": {"name": "powertrain"},
                "controller": {"mode": "pid", "max_degree": 2,
                               "box": [[-0.1, 0.5], [-0.05, 0.2], [-0.05, 0.05]]},
                "synthesis": {"threshold": 0.96, "m0": 16},
            }),
        PlantCatalogEntry(
            name="quad-tank", prefix="qt", plant_class=QuadTank, params_model=QuadTankParams,
            default_config={
                "plant": {"name": "quad-tank"},
                "controller": {"mode": "pid", "max_degree": 2,
                               "channels": [{"output": 0, "reference": 0, "box": [[-1, 20], [-1, 10], [-1, 10]]},
                                            {"output": 1, "reference": 1, "box": [[-1, 20], [-1, 10], [-1, 10]]}]},
                "synthesis": {"threshold": 0.95, "m0": 1},
            }),
        PlantCatalogEntry(
            name="linear-test", prefix="lt", plant_class=LinearTestPlant, params_model=LinearTestParams,
            default_config={
                "plant": {"name": "linear-test"},
                "controller": {"mode": "general", "max_degree": 1,
                               "box": [[5.0, 30.0], [-0.5, 0.5], [-28.0, -5.0]]},
                "synthesis": {"threshold": 0.9, "m0": 1},
            }),
    )
}


def get_entry(name: str) -> PlantCatalogEntry:
    entry = CATALOG.get(name)
    if entry is None:
        raise ConfigError(messages.UNKNOWN_PLANT, f"{name!r} (known: {', '.join(CATALOG)})")
    return entry


def resolve_params(entry: PlantCatalogEntry, overrides: Optional[Mapping[str, float]] = None) -> BaseModel:
    """
    The resolve_params function applies "prefix.key" overrides on top of the default
    parameters of a plant.

    :param entry: PlantCatalogEntry: Catalog entry of the plant
    :param overrides: Optional[Mapping[str, float]]: Override values keyed "prefix.key"
    :return: The validated parameter model
    """
    values = {}
    for key, value in (overrides or {}).items():
        prefix, _, field = key.partition(".")
        if prefix != entry.prefix or field not in entry.params_model.__fields__:
            raise ConfigError(messages.UNKNOWN_OVERRIDE, f"{key!r} for plant {entry.name!r}")
        values[field] = value
    try:
        return entry.params_model(**values)
    except ValidationError as err:
        raise ConfigError(messages.CONFIG_INVALID, str(err)) from err


def find_equilibrium(plant: PlantModel, guess, fixed_input) -> np.ndarray:
    """
    The find_equilibrium function solves f(x, u, d_nominal) = 0 for x with a damped Newton
    iteration: least-squares Newton steps on a finite-difference Jacobian, halved until
    the residual norm decreases.

    :param plant: PlantModel: Plant whose dynamics are zeroed
    :param guess: Starting state
    :param fixed_input: Applied input held fixed
    :return: A state with residual sup-norm at most 1e-9
    """
    u = np.asarray(fixed_input, dtype=float)[None, :]
    d = np.asarray(plant.d_nominal, dtype=float)[None, :]

    def residual(x):
        return plant.dynamics(np.asarray(x, dtype=float)[None, :], u, d)[0]

    x = np.asarray(guess, dtype=float).copy()
    for iteration in range(NEWTON_MAX_ITERATIONS):
        r = residual(x)
        r_norm = np.max(np.abs(r)) if r.size else 0.0
        if r_norm <= NEWTON_TOLERANCE:
            logger.debug("%s equilibrium after %d Newton iterations", plant.name, iteration)
            return x
        step = np.linalg.lstsq(fd_jacobian(residual, x), -r, rcond=None)[0]
        damping = 1.0
        while damping >= MIN_DAMPING:
            candidate = x + damping * step
            r_new = residual(candidate)
            if np.all(np.isfinite(r_new)) and np.linalg.norm(r_new) < np.linalg.norm(r):
                break
            damping /= 2
        else:
            logger.warning("%s: backtracking found no decrease at Newton iteration %d", plant.name, iteration)
            candidate = x + step
        x = candidate
    raise EquilibriumError(messages.NEWTON_DIVERGED, f"{plant.name} after {NEWTON_MAX_ITERATIONS} iterations")


def build_plant(name: str, overrides: Optional[Mapping[str, float]] = None) -> PlantModel:
    """
    The build_plant function looks the plant up in the catalog, applies parameter
    overrides and refines the declared operating point to an equilibrium under the
    nominal input and disturbance.

    :param name: str: Catalog name
    :param overrides: Optional[Mapping[str, float]]: "prefix.key" parameter overrides
    :return: A fully wired PlantModel
    """
    entry = get_entry(name)
    plant = entry.plant_class(resolve_params(entry, overrides))
    u_nominal = plant.apply_input(np.zeros(plant.input_dim))
    plant._set_equilibrium(find_equilibrium(plant, plant.x_e, u_nominal))
    return plant
