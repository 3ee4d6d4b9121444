"""
Sampled-data stochastic system abstraction: plant dynamics with an output map, additive
i.i.d. measurement noise, a disturbance defined by finitely many random parameters,
a sampling structure and a time-indexed safety invariant.

Every plant function takes a leading batch axis so that many realizations of the
uncertainty are integrated together; a single realization is the batch of one.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.conf import messages
from src.exceptions import PlantError

Params = Dict[str, np.ndarray]

PURPOSE_DISTURBANCE = 1
PURPOSE_NOISE = 2
PURPOSE_OPTIMIZER = 3


def stream(master_seed: int, index: int, purpose: int) -> np.random.Generator:
    """
    The stream function returns a counter-based (Philox) generator keyed by
    (master_seed, index, purpose), so results never depend on evaluation order.

    :param master_seed: int: Run-level seed
    :param index: int: Trajectory ordinal (or any other counter)
    :param purpose: int: Purpose tag keeping disturbance and noise streams apart
    :return: A numpy Generator
    """
    key = np.random.SeedSequence([int(master_seed), int(index), int(purpose)])
    return np.random.Generator(np.random.Philox(key))


@dataclass(frozen=True)
class DisturbanceEvent:
    time: float
    kind: str  # "pulse" or "reset"
    channel: int
    amount: float


@dataclass(frozen=True)
class UncertaintyRealization:
    index: int
    master_seed: int
    disturbance_params: Params
    noise_seed: Tuple[int, int, int]
    noise: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SafetySpec:
    predicate: Callable[[float, np.ndarray, Params], np.ndarray]
    description: str

    def holds(self, t: float, x: np.ndarray, params: Params) -> np.ndarray:
        return np.asarray(self.predicate(t, x, params), dtype=bool)


def stack_params(realizations: Sequence[UncertaintyRealization]) -> Params:
    keys = realizations[0].disturbance_params.keys()
    return {key: np.stack([np.asarray(r.disturbance_params[key], dtype=float) for r in realizations])
            for key in keys}


class PlantModel(ABC):
    name: str = ''
    state_names: Tuple[str, ...] = ()
    input_names: Tuple[str, ...] = ()
    output_names: Tuple[str, ...] = ()
    disturbance_names: Tuple[str, ...] = ()
    equilibrium_tolerance: float = 1e-6

    def __init__(self, tau: float, horizon: float, x_e, u_e, d_nominal,
                 input_bounds: Optional[Sequence[Tuple[float, float]]], noise_std):
        if not tau > 0:
            raise PlantError(messages.TAU_NOT_POSITIVE, str(tau))
        steps = horizon / tau
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise PlantError(messages.HORIZON_NOT_MULTIPLE, f'T={horizon}, tau={tau}')
        self.tau = float(tau)
        self.horizon = float(horizon)
        self.n_samples = int(round(steps))
        self._x_e = np.asarray(x_e, dtype=float)
        self.u_e = np.asarray(u_e, dtype=float)
        self.d_nominal = np.asarray(d_nominal, dtype=float)
        if input_bounds is None:
            input_bounds = [(-np.inf, np.inf)] * self.u_e.size
        self.input_bounds = np.asarray(input_bounds, dtype=float).reshape(-1, 2)
        self.noise_std = np.asarray(noise_std, dtype=float).reshape(-1)

    @property
    def x_e(self) -> np.ndarray:
        return self._x_e

    def _set_equilibrium(self, x_e) -> None:
        self._x_e = np.asarray(x_e, dtype=float)
        self.__dict__.pop('linearization', None)

    @property
    def state_dim(self) -> int:
        return len(self.state_names)

    @property
    def input_dim(self) -> int:
        return len(self.input_names)

    @property
    def output_dim(self) -> int:
        return len(self.output_names)

    @property
    def disturbance_dim(self) -> int:
        return len(self.disturbance_names)

    @abstractmethod
    def dynamics(self, x: np.ndarray, u: np.ndarray, d: np.ndarray) -> np.ndarray:
        """State derivative f(x, u, d), batched over the leading axis."""

    @abstractmethod
    def output(self, x: np.ndarray) -> np.ndarray:
        """Noise-free output map o(x)."""

    @abstractmethod
    def draw_disturbance(self, rng: np.random.Generator) -> Params:
        """Draw the finitely many random disturbance parameters of one realization."""

    @abstractmethod
    def disturbance(self, t: float, h: Optional[float], params: Params) -> np.ndarray:
        """
        Value of d over the integration step [t, t + h). Pulse events are only included
        when h is given.
        """

    @abstractmethod
    def safety_spec(self) -> SafetySpec:
        """Time-indexed safety invariant over the plant state."""

    def events(self, params: Params) -> List[DisturbanceEvent]:
        return []

    def jump(self, t: float, h: float, x: np.ndarray, params: Params) -> np.ndarray:
        return x

    def initial_state(self, params: Params) -> np.ndarray:
        batch = next(iter(params.values())).shape[0] if params else 1
        return np.tile(self.x_e, (batch, 1))

    def reference(self, t: float) -> np.ndarray:
        return np.zeros(self.output_dim)

    def tracking_error(self, output_index: int, r: float, y: np.ndarray) -> np.ndarray:
        return r - y

    def apply_input(self, u_ctrl: np.ndarray) -> np.ndarray:
        return np.clip(self.u_e + u_ctrl, self.input_bounds[:, 0], self.input_bounds[:, 1])

    @cached_property
    def linearization(self):
        from src.services.stability import linearize_plant
        return linearize_plant(self)


def sample_uncertainty(plant: PlantModel, master_seed: int, index: int) -> UncertaintyRealization:
    """
    The sample_uncertainty function draws the disturbance parameters and the measurement
    noise sequence of trajectory number index.

    :param plant: PlantModel: Plant declaring the distributions
    :param master_seed: int: Run-level seed
    :param index: int: Trajectory ordinal
    :return: A realization fully determining d(.) on [0, T] and every noise sample
    """
    params = plant.draw_disturbance(stream(master_seed, index, PURPOSE_DISTURBANCE))
    noise_key = (int(master_seed), int(index), PURPOSE_NOISE)
    noise = stream(*noise_key).standard_normal((plant.n_samples + 1, plant.output_dim))
    return UncertaintyRealization(index=index, master_seed=master_seed,
                                  disturbance_params={k: np.asarray(v, dtype=float) for k, v in params.items()},
                                  noise_seed=noise_key, noise=noise)


def evaluate_disturbance(realization: UncertaintyRealization, plant: PlantModel, t: float) -> np.ndarray:
    """
    The evaluate_disturbance function returns the piecewise value of d(t). Impulsive
    events are not part of it; see disturbance_events.

    :param realization: UncertaintyRealization: Sampled uncertainty
    :param plant: PlantModel: Plant the realization belongs to
    :param t: float: Time in [0, T]
    :return: The disturbance vector
    """
    if not 0.0 <= t <= plant.horizon:
        raise PlantError(messages.TIME_OUT_OF_HORIZON, f't={t}')
    return plant.disturbance(t, None, stack_params([realization]))[0]


def disturbance_events(realization: UncertaintyRealization, plant: PlantModel) -> List[DisturbanceEvent]:
    return plant.events(realization.disturbance_params)


def measure_output(plant: PlantModel, x, realization: UncertaintyRealization, k: int) -> np.ndarray:
    """
    The measure_output function returns the sampled measurement o(x) + eta(t_k).

    :param plant: PlantModel: Plant providing the output map and noise level
    :param x: State vector
    :param realization: UncertaintyRealization: Source of the noise sample
    :param k: int: Sample ordinal with k * tau <= T
    :return: The noisy output vector
    """
    if not 0 <= k <= plant.n_samples:
        raise PlantError(messages.TIME_OUT_OF_HORIZON, f'k={k}')
    y = plant.output(np.asarray(x, dtype=float)[None, :])[0]
    return y + plant.noise_std * realization.noise[k]
