"""
Cross-entropy search over controller parameters. Candidates are drawn from a per-coordinate
Gaussian truncated to the parameter box; candidates whose linearized closed loop is
unstable score [0, 0] without being simulated, the others are scored by a Monte Carlo
interval on the safety probability. The best candidate so far always competes in the
next iteration.
"""
import logging
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.conf import messages
from src.conf.config import settings
from src.exceptions import ConfigError
from src.models.controller import ControllerFamily
from src.models.sdss import PURPOSE_OPTIMIZER, PlantModel, stream
from src.services.simulator import SolverConfig, TrajectoryEvaluator
from src.services.stability import REJECT, linearize_closed_loop
from src.services.stats import ConfidenceInterval, estimate_probability, zero_interval

logger = logging.getLogger(__name__)

MAX_RESAMPLES = 50
STD_FLOOR = 1e-6


@dataclass
class CeDistribution:
    mean: np.ndarray
    std: np.ndarray
    box: np.ndarray

    @classmethod
    def from_box(cls, box) -> "CeDistribution":
        box = np.asarray(box, dtype=float).reshape(-1, 2)
        if box.size == 0 or np.any(box[:, 0] > box[:, 1]):
            raise ConfigError(messages.EMPTY_BOX, str(box.tolist()))
        return cls(mean=box.mean(axis=1), std=np.maximum((box[:, 1] - box[:, 0]) / 2.0, cls.floor(box)), box=box)

    @staticmethod
    def floor(box: np.ndarray) -> np.ndarray:
        return np.maximum(STD_FLOOR * (box[:, 1] - box[:, 0]), np.finfo(float).tiny)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """
        The sample method draws count points inside the box, resampling each coordinate that
        falls outside up to 50 times before clamping it.

        :param rng: np.random.Generator: Source of randomness
        :param count: int: Number of candidates
        :return: Array of shape (count, dim)
        """
        lo, hi = self.box[:, 0], self.box[:, 1]
        points = rng.normal(self.mean, self.std, size=(count, self.mean.size))
        for _ in range(MAX_RESAMPLES):
            outside = (points < lo) | (points > hi)
            if not outside.any():
                break
            redraw = rng.normal(self.mean, self.std, size=points.shape)
            points = np.where(outside, redraw, points)
        return np.clip(points, lo, hi)


@dataclass(frozen=True)
class CandidateRecord:
    params: np.ndarray
    interval: ConfidenceInterval
    stable: bool

    @property
    def midpoint(self) -> float:
        return self.interval.midpoint


@dataclass(frozen=True)
class IterationLog:
    iteration: int
    samples: int
    unstable: int
    best_midpoint: float


@dataclass
class OptimizeResult:
    best: Optional[CandidateRecord]
    iterations: List[IterationLog] = field(default_factory=list)
    candidates: int = 0
    unstable: int = 0
    all_unstable: bool = False


def ranking_key(record: CandidateRecord):
    return -record.midpoint, float(np.linalg.norm(record.params))


def ce_update(dist: CeDistribution, elites: List[CandidateRecord], smoothing: float = 0.9) -> CeDistribution:
    """
    The ce_update function moves the sampling distribution towards the elites:
    mean' = s * mean(elites) + (1 - s) * mean, likewise for the standard deviation, which
    is floored at 1e-6 of the box width.

    :param dist: CeDistribution: Current distribution
    :param elites: List[CandidateRecord]: Best candidates of the iteration
    :param smoothing: float: Smoothing factor s in [0, 1]
    :return: The updated CeDistribution
    """
    if not elites:
        raise ConfigError(messages.EMPTY_ELITES)
    points = np.stack([record.params for record in elites])
    mean = smoothing * points.mean(axis=0) + (1.0 - smoothing) * dist.mean
    std = smoothing * points.std(axis=0) + (1.0 - smoothing) * dist.std
    return CeDistribution(mean=mean, std=np.maximum(std, CeDistribution.floor(dist.box)), box=dist.box)


def optimize(plant: PlantModel, family: ControllerFamily, box, m: int, xi: float, c: float,
             max_iterations: int = 10, max_samples: int = 30, n_max_per_ci: int = settings.ci_samples,
             seed: int = 0, method: str = "bayesian", elite_fraction: float = 0.1, smoothing: float = 0.9,
             workers: int = 1, executor: Optional[Executor] = None,
             initial: Optional[CandidateRecord] = None) -> OptimizeResult:
    """
    The optimize function runs the cross-entropy search for one controller degree. Every
    candidate of the run is scored on the same trajectory ordinals (common random numbers)
    with the Euler solver at m substeps.

    :param plant: PlantModel: Plant at its equilibrium
    :param family: ControllerFamily: Maps parameter vectors to controllers
    :param box: Parameter box, one [lo, hi] row per coordinate
    :param m: int: Euler substeps per sampling period
    :param xi: float: Target interval width
    :param c: float: Confidence
    :param max_iterations: int: CE iterations
    :param max_samples: int: Candidates per iteration
    :param n_max_per_ci: int: Trajectory cap per candidate
    :param seed: int: Master seed
    :param method: str: Interval method
    :param elite_fraction: float: Share of the ranked queue used for the update (at least 2)
    :param smoothing: float: CE smoothing factor
    :param workers: int: Trajectory evaluation workers
    :param executor: Optional[Executor]: Shared process pool
    :param initial: Optional[CandidateRecord]: Previous best seeding the queue
    :return: An OptimizeResult
    """
    if max_iterations < 1 or max_samples < 1 or n_max_per_ci < 1:
        raise ConfigError(messages.CONFIG_INVALID, "optimizer budgets must be >= 1")
    dist = CeDistribution.from_box(box)
    if dist.mean.size != family.dim:
        raise ConfigError(messages.PARAMS_LENGTH, f"box has {dist.mean.size} rows, family needs {family.dim}")
    rng = stream(seed, family.degree, PURPOSE_OPTIMIZER)
    solver = SolverConfig(mode="euler", substeps=m)
    best = initial
    result = OptimizeResult(best=initial)

    for iteration in range(max_iterations):
        queue = [best] if best is not None else []
        unstable = 0
        for params in dist.sample(rng, max_samples):
            controller = family.build(params)
            if linearize_closed_loop(plant, controller).verdict == REJECT:
                unstable += 1
                queue.append(CandidateRecord(params=params, interval=zero_interval(c, method), stable=False))
                continue
            estimate = estimate_probability(TrajectoryEvaluator(plant, controller, solver), xi, c, n_max_per_ci,
                                            seed, method=method, workers=workers, executor=executor)
            queue.append(CandidateRecord(params=params, interval=estimate.interval, stable=True))
        queue.sort(key=ranking_key)
        best = queue[0]
        elite_count = max(2, int(np.ceil(elite_fraction * len(queue))))
        dist = ce_update(dist, queue[:elite_count], smoothing)
        result.candidates += max_samples
        result.unstable += unstable
        log = IterationLog(iteration=iteration, samples=max_samples, unstable=unstable, best_midpoint=best.midpoint)
        result.iterations.append(log)
        logger.info("degree %d iteration %d: %d samples, %d unstable, best midpoint %.4f",
                    family.degree, iteration, max_samples, unstable, best.midpoint)

    result.best = best
    result.all_unstable = result.unstable == result.candidates
    if result.all_unstable:
        logger.warning("degree %d: every sampled candidate failed the stability check", family.degree)
    return result
