"""
Closed-loop simulation of a plant under a digital controller with zero-order hold.

Two fidelities are provided: explicit Euler (the fast candidate-search solver) and
classical Runge-Kutta 4 with a step-doubling error estimate (the verification solver).
Realizations are integrated together along a leading batch axis and the safety
invariant is monitored at every grid point while integrating.
"""
import copy
import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional, Sequence

import numpy as np

from src.conf import messages
from src.conf.config import settings
from src.exceptions import ConfigError
from src.models.controller import DecentralizedController
from src.models.sdss import PlantModel, SafetySpec, UncertaintyRealization, sample_uncertainty, stack_params

logger = logging.getLogger(__name__)

RK4_ORDER_FACTOR = 15.0


@dataclass(frozen=True)
class SolverConfig:
    mode: Literal["euler", "rk4"] = "euler"
    substeps: int = 1
    error_tolerance: float = 1e-6

    def __post_init__(self):
        if self.mode not in ("euler", "rk4"):
            raise ConfigError(messages.CONFIG_INVALID, f"solver mode {self.mode!r}")
        if self.substeps < 1:
            raise ConfigError(messages.CONFIG_INVALID, f"substeps must be >= 1, got {self.substeps}")

    def describe(self) -> str:
        return f"{self.mode}({self.substeps})"


@dataclass(frozen=True)
class SafetyOutcome:
    safe: bool
    first_violation_time: Optional[float] = None
    diverged: bool = False
    tolerance_breach: bool = False


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    realization: UncertaintyRealization
    diverged: bool = False
    divergence_time: Optional[float] = None
    tolerance_breaches: int = 0


@dataclass
class BatchResult:
    outcomes: List[SafetyOutcome]
    trajectories: List[Trajectory] = field(default_factory=list)


def euler_step(func: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> np.ndarray:
    return x + h * func(x)


def rk4_step(func: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> np.ndarray:
    k1 = func(x)
    k2 = func(x + 0.5 * h * k1)
    k3 = func(x + 0.5 * h * k2)
    k4 = func(x + h * k3)
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _channel_errors(plant: PlantModel, controller: DecentralizedController, t: float, y: np.ndarray) -> np.ndarray:
    r = plant.reference(t)
    return np.stack([plant.tracking_error(ch.output_index, r[ch.reference_index], y[:, ch.output_index])
                     for ch in controller.channels], axis=1)


def check_layout(plant: PlantModel, controller: DecentralizedController) -> None:
    if controller.n_channels != plant.input_dim:
        raise ConfigError(messages.CHANNEL_LAYOUT, f"{controller.n_channels} channels, {plant.input_dim} inputs")
    for ch in controller.channels:
        if not (0 <= ch.output_index < plant.output_dim and 0 <= ch.reference_index < plant.output_dim):
            raise ConfigError(messages.CHANNEL_LAYOUT, f"output {ch.output_index}, reference {ch.reference_index}")


def simulate_batch(plant: PlantModel, controller: DecentralizedController,
                   realizations: Sequence[UncertaintyRealization], solver: SolverConfig,
                   spec: Optional[SafetySpec] = None, record: bool = False) -> BatchResult:
    """
    The simulate_batch function integrates the closed loop for every realization at once.
    At each sampling instant the controller reads the noisy measurement and its output
    is held over the following period, which is split into solver.substeps integration
    steps. Jumps (instantaneous disturbances) are applied at the start of the step that
    contains them, before the invariant is checked at that grid point.

    :param plant: PlantModel: Plant at its equilibrium
    :param controller: DecentralizedController: Controller; its history is reset to the batch
    :param realizations: Sequence[UncertaintyRealization]: One realization per trajectory
    :param solver: SolverConfig: Integration scheme and substeps
    :param spec: Optional[SafetySpec]: Invariant, the plant's own by default
    :param record: bool: Keep the full grid for every trajectory
    :return: A BatchResult with one SafetyOutcome (and Trajectory when recording) per realization
    """
    check_layout(plant, controller)
    spec = spec or plant.safety_spec()
    batch = len(realizations)
    params = stack_params(realizations)
    noise = np.stack([r.noise for r in realizations])
    m = solver.substeps
    h = plant.tau / m
    threshold = settings.divergence_threshold

    x = plant.initial_state(params).astype(float)
    controller.reset(batch)
    violation = np.full(batch, np.nan)
    diverged = np.zeros(batch, dtype=bool)
    breaches = np.zeros(batch, dtype=int)
    rows_t, rows_x, rows_u, rows_y = [], [], [], []

    def check(t, state):
        failed = ~spec.holds(t, state, params) & np.isnan(violation)
        violation[failed] = t

    def step(t, state, u, width):
        d = plant.disturbance(t, width, params)
        return lambda s: plant.dynamics(s, u, d)

    u = plant.apply_input(np.zeros((batch, plant.input_dim)))
    for k in range(plant.n_samples):
        t_k = k * plant.tau
        y = plant.output(x) + plant.noise_std * noise[:, k, :]
        errors = np.where(diverged[:, None], 0.0, _channel_errors(plant, controller, t_k, y))
        u = plant.apply_input(controller.step(errors))
        for j in range(m):
            t = t_k + j * h
            x = plant.jump(t, h, x, params)
            check(t, x)
            if record:
                rows_t.append(t)
                rows_x.append(x.copy())
                rows_u.append(u.copy())
                rows_y.append(y.copy())
            if solver.mode == "euler":
                x_next = euler_step(step(t, x, u, h), x, h)
            else:
                full = rk4_step(step(t, x, u, h), x, h)
                mid = rk4_step(step(t, x, u, h / 2), x, h / 2)
                x_next = rk4_step(step(t + h / 2, mid, u, h / 2), mid, h / 2)
                with np.errstate(invalid="ignore"):
                    error = np.max(np.abs(x_next - full), axis=1) / RK4_ORDER_FACTOR
                    scale = np.maximum(1.0, np.max(np.abs(x_next), axis=1))
                    breaches += error > solver.error_tolerance * scale
            with np.errstate(invalid="ignore"):
                bad = ~np.all(np.isfinite(x_next) & (np.abs(x_next) <= threshold), axis=1)
            if bad.any():
                fresh = bad & ~diverged
                violation[fresh & np.isnan(violation)] = t + h
                diverged |= bad
                x_next[bad] = x[bad]
            x = x_next
        if not record and not np.isnan(violation).any():
            break
    else:
        t_end = plant.n_samples * plant.tau
        check(t_end, x)
        if record:
            rows_t.append(t_end)
            rows_x.append(x.copy())
            rows_u.append(u.copy())
            rows_y.append(plant.output(x) + plant.noise_std * noise[:, plant.n_samples, :])

    if breaches.any():
        logger.debug("rk4 tolerance breached on %d of %d trajectories", int(np.count_nonzero(breaches)), batch)
    outcomes = [SafetyOutcome(safe=bool(np.isnan(violation[i])),
                              first_violation_time=None if np.isnan(violation[i]) else float(violation[i]),
                              diverged=bool(diverged[i]), tolerance_breach=bool(breaches[i]))
                for i in range(batch)]
    trajectories = []
    if record:
        times = np.asarray(rows_t)
        states, inputs, outputs = (np.stack(rows, axis=1) for rows in (rows_x, rows_u, rows_y))
        for i, realization in enumerate(realizations):
            trajectories.append(Trajectory(times=times, states=states[i], inputs=inputs[i], outputs=outputs[i],
                                           realization=realization, diverged=bool(diverged[i]),
                                           divergence_time=outcomes[i].first_violation_time if diverged[i] else None,
                                           tolerance_breaches=int(breaches[i])))
    return BatchResult(outcomes=outcomes, trajectories=trajectories)


def simulate_trajectory(plant: PlantModel, controller: DecentralizedController, realization: UncertaintyRealization,
                        solver: SolverConfig) -> Trajectory:
    """
    The simulate_trajectory function simulates one realization and keeps every grid point.

    :param plant: PlantModel: Plant at its equilibrium
    :param controller: DecentralizedController: Controller (history is reset)
    :param realization: UncertaintyRealization: Disturbance and noise of the run
    :param solver: SolverConfig: Integration scheme and substeps
    :return: The recorded Trajectory
    """
    return simulate_batch(plant, controller, [realization], solver, record=True).trajectories[0]


def safety_outcome(traj: Trajectory, spec: SafetySpec) -> SafetyOutcome:
    """
    The safety_outcome function evaluates the invariant at every recorded grid point; a
    diverged trajectory is unsafe from its divergence time on.

    :param traj: Trajectory: Recorded trajectory
    :param spec: SafetySpec: Invariant to check
    :return: The SafetyOutcome
    """
    params = stack_params([traj.realization])
    for t, x in zip(traj.times, traj.states):
        if traj.divergence_time is not None and t >= traj.divergence_time:
            break
        if not spec.holds(float(t), x[None, :], params)[0]:
            return SafetyOutcome(safe=False, first_violation_time=float(t), diverged=traj.diverged,
                                 tolerance_breach=traj.tolerance_breaches > 0)
    if traj.diverged:
        return SafetyOutcome(safe=False, first_violation_time=traj.divergence_time, diverged=True,
                             tolerance_breach=traj.tolerance_breaches > 0)
    return SafetyOutcome(safe=True, tolerance_breach=traj.tolerance_breaches > 0)


def write_trajectory_csv(traj: Trajectory, path: str) -> None:
    """
    The write_trajectory_csv function writes one row per grid point with header
    t,x1..xn,u1..um,y1..yq and 17 significant digits.

    :param traj: Trajectory: Recorded trajectory
    :param path: str: Destination file
    """
    n, m, q = traj.states.shape[1], traj.inputs.shape[1], traj.outputs.shape[1]
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)] + [f"y{i + 1}" for i in range(q)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, x, u, y in zip(traj.times, traj.states, traj.inputs, traj.outputs):
            writer.writerow([f"{v:.17g}" for v in np.concatenate([[t], x, u, y])])


class TrajectoryEvaluator:
    """
    Picklable evaluator: simulates the trajectories with the given ordinals under a fresh
    copy of the controller and reports their safety outcomes.
    """

    def __init__(self, plant: PlantModel, controller: DecentralizedController, solver: SolverConfig):
        self.plant = plant
        self.controller = controller
        self.solver = solver

    def __call__(self, seed: int, ordinals: Sequence[int]) -> List[SafetyOutcome]:
        realizations = [sample_uncertainty(self.plant, seed, i) for i in ordinals]
        return simulate_batch(self.plant, copy.deepcopy(self.controller), realizations, self.solver).outcomes
