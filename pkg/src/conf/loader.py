import copy
import json
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from src.conf import messages
from src.exceptions import ConfigError
from src.models.controller import DecentralizedController
from src.repository.plants import CATALOG
from src.schemas import RunConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def load_run_config(source: str) -> RunConfig:
    """
    The load_run_config function reads a TOML run config, or returns the catalog default
    config when source names a plant instead of a file.

    :param source: str: Path to a TOML file or a plant name
    :return: The validated RunConfig
    """
    path = Path(source)
    if path.is_file():
        try:
            document = tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as err:
            raise ConfigError(messages.CONFIG_INVALID, f"{source}: {err}") from err
    elif source in CATALOG:
        document = copy.deepcopy(CATALOG[source].default_config)
    else:
        raise ConfigError(messages.CONFIG_NOT_FOUND, source)
    try:
        return RunConfig.parse_obj(document)
    except ValidationError as err:
        raise ConfigError(messages.CONFIG_INVALID, str(err)) from err


def _split(values: Optional[str]) -> List[float]:
    if not values:
        return []
    try:
        return [float(v) for v in values.split(",")]
    except ValueError as err:
        raise ConfigError(messages.CONTROLLER_INVALID, values) from err


def load_controller(controller: Optional[str] = None, kp: Optional[str] = None, ki: Optional[str] = None,
                    kd: Optional[str] = None) -> DecentralizedController:
    """
    The load_controller function builds a controller from --controller (a JSON file or
    inline JSON: a controller, a list of channel controllers or a synthesis report) or
    from comma-separated per-channel gains --kp/--ki/--kd.

    :param controller: Optional[str]: File path or inline JSON
    :param kp: Optional[str]: Proportional gains, one per channel
    :param ki: Optional[str]: Integral gains, one per channel
    :param kd: Optional[str]: Derivative gains, one per channel
    :return: A DecentralizedController
    """
    if controller:
        path = Path(controller)
        try:
            document = json.loads(path.read_text(encoding="utf-8") if path.is_file() else controller)
        except json.JSONDecodeError as err:
            raise ConfigError(messages.CONTROLLER_INVALID, str(err)) from err
        if isinstance(document, dict) and "schema" in document:
            document = document.get("controller") or {}
        try:
            return DecentralizedController.from_dict(document)
        except (KeyError, TypeError, ValueError) as err:
            raise ConfigError(messages.CONTROLLER_INVALID, str(err)) from err
    gains_p, gains_i, gains_d = _split(kp), _split(ki), _split(kd)
    if not gains_p:
        raise ConfigError(messages.CONTROLLER_MISSING)
    channels = []
    for i, value in enumerate(gains_p):
        item = {"kp": value}
        if i < len(gains_i):
            item["ki"] = gains_i[i]
        if i < len(gains_d):
            item["kd"] = gains_d[i]
        channels.append(item)
    return DecentralizedController.from_dict(channels)
