"""
Controller synthesis: for each degree in turn, alternate a fast cross-entropy search
(Euler, m substeps) with a verification of the best candidate (RK4, m_verify substeps),
refining m while the two intervals disagree, and stop as soon as a verified lower bound
reaches the probability threshold.
"""
import logging
import time
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.conf import messages
from src.conf.config import resolve_workers, settings
from src.exceptions import ConfigError
from src.models.controller import ControllerFamily, DecentralizedController
from src.models.sdss import PlantModel
from src.repository.plants import build_plant
from src.schemas import Diagnostics, HistoryRow, RunConfig
from src.services.optimizer import optimize
from src.services.simulator import SolverConfig, TrajectoryEvaluator
from src.services.stats import (ConfidenceInterval, ProbabilityEstimate, estimate_probability, evaluation_pool,
                                overlap_satisfied, zero_interval)

logger = logging.getLogger(__name__)

PURPOSE_VERIFY = 4
DIVERGENCE_STORM = 0.5


@dataclass(frozen=True)
class SynthesisConfig:
    plant_name: str
    overrides: dict = field(default_factory=dict)
    mode: str = "pid"
    max_degree: int = 2
    box: Optional[Sequence[Tuple[float, float]]] = None
    channels: Optional[Sequence[Tuple[int, int, Sequence[Tuple[float, float]]]]] = None
    threshold: float = 0.95
    xi: float = 0.05
    confidence: float = 0.99
    alpha: float = 0.5
    m0: int = 1
    m_verify: int = settings.m_verify
    max_iterations: int = 3
    verify_samples: int = settings.verify_samples
    ce_iterations: int = 10
    ce_samples: int = 30
    ci_samples: int = settings.ci_samples
    elite_fraction: float = 0.1
    smoothing: float = 0.9
    method: str = "bayesian"
    seed: int = 0
    workers: Optional[int] = None

    def __post_init__(self):
        for name in ("threshold", "xi", "confidence"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(messages.CONFIG_INVALID, f"{name} must lie in (0, 1)")
        if not 0 < self.alpha <= 1:
            raise ConfigError(messages.CONFIG_INVALID, "alpha must lie in (0, 1]")
        if self.max_degree < 0 or self.m0 < 1 or self.m_verify < 1:
            raise ConfigError(messages.CONFIG_INVALID, "max_degree >= 0, m0 >= 1 and m_verify >= 1 are required")
        if self.box is None and not self.channels:
            raise ConfigError(messages.CONFIG_INVALID, "a parameter box is required")

    @classmethod
    def from_run_config(cls, config: RunConfig) -> "SynthesisConfig":
        channels = None
        if config.controller.channels:
            channels = [(ch.output, ch.reference, ch.box or config.controller.box) for ch in config.controller.channels]
        return cls(plant_name=config.plant.name, overrides=dict(config.plant.overrides), mode=config.controller.mode,
                   max_degree=config.controller.max_degree, box=config.controller.box, channels=channels,
                   **config.synthesis.dict())

    def channel_layout(self, plant: PlantModel):
        if self.channels:
            if any(box is None for _, _, box in self.channels):
                raise ConfigError(messages.CONFIG_INVALID, "every controller channel needs a box")
            return [(o, r) for o, r, _ in self.channels], [box for _, _, box in self.channels]
        return [(i, i) for i in range(plant.input_dim)], [self.box] * plant.input_dim


@dataclass(frozen=True)
class SynthesizedController:
    params: np.ndarray
    degree: int
    controller: DecentralizedController
    interval: ConfidenceInterval


@dataclass
class SynthesisResult:
    best: Optional[SynthesizedController]
    success: bool
    history: List[HistoryRow]
    diagnostics: Diagnostics
    verify_seed: int
    confidence: float

    @property
    def interval(self) -> ConfidenceInterval:
        return self.best.interval if self.best else zero_interval(self.confidence)

    @property
    def degree(self) -> int:
        return self.best.degree if self.best else -1


def verify_seed(master_seed: int) -> int:
    """Seed of the verification trajectories, distinct from the optimization ones."""
    return int(np.random.SeedSequence([int(master_seed), PURPOSE_VERIFY]).generate_state(1)[0])


def update_discretization(m: int, cap: int = settings.m_verify) -> int:
    if m < 1:
        raise ConfigError(messages.CONFIG_INVALID, f"substeps must be >= 1, got {m}")
    return m if m >= cap else min(2 * m, cap)


def verify(plant: PlantModel, controller: DecentralizedController, xi: float, c: float, n_max: int, seed: int,
           m_verify: int = settings.m_verify, method: str = "bayesian", workers: int = 1,
           executor: Optional[Executor] = None) -> ProbabilityEstimate:
    """
    The verify function re-estimates the safety probability of one controller with the
    RK4 solver at m_verify substeps. The stability filter is not re-run.

    :param plant: PlantModel: Plant at its equilibrium
    :param controller: DecentralizedController: Candidate controller
    :param xi: float: Target interval width
    :param c: float: Confidence
    :param n_max: int: Trajectory cap
    :param seed: int: Seed of the verification trajectories
    :param m_verify: int: RK4 substeps per sampling period
    :param method: str: Interval method
    :param workers: int: Trajectory evaluation workers
    :param executor: Optional[Executor]: Shared process pool
    :return: The ProbabilityEstimate (interval plus divergence and tolerance counts)
    """
    evaluator = TrajectoryEvaluator(plant, controller, SolverConfig(mode="rk4", substeps=m_verify))
    estimate = estimate_probability(evaluator, xi, c, n_max, seed, method=method, workers=workers, executor=executor)
    trials = estimate.interval.trials
    if trials and estimate.diverged > DIVERGENCE_STORM * trials:
        logger.warning("divergence storm: %d of %d verification trajectories diverged", estimate.diverged, trials)
    if estimate.tolerance_breaches:
        logger.warning("rk4 error estimate above tolerance on %d of %d trajectories; consider a larger m_verify",
                       estimate.tolerance_breaches, trials)
    return estimate


def synthesize(config: SynthesisConfig, plant: Optional[PlantModel] = None) -> SynthesisResult:
    """
    The synthesize function searches controllers of increasing degree. For every degree the
    CE distribution starts afresh while the substep count m carries over. Within a degree,
    optimize and verify alternate until the optimize interval [a, b] and the verified
    interval [a', b'] overlap by at least alpha * (b - a), m doubling (up to m_verify)
    after each disagreement, or until max_iterations. The best controller is the one with
    the highest verified midpoint, except that a verified lower bound reaching the
    threshold ends the run with that controller.

    :param config: SynthesisConfig: Run settings
    :param plant: Optional[PlantModel]: Plant instance, built from the catalog when omitted
    :return: The SynthesisResult; success means its verified lower bound reaches the threshold
    """
    plant = plant or build_plant(config.plant_name, config.overrides)
    channels, boxes = config.channel_layout(plant)
    workers = resolve_workers(config.workers)
    seed_verify = verify_seed(config.seed)
    diagnostics = Diagnostics()
    history: List[HistoryRow] = []
    best: Optional[SynthesizedController] = None
    m = config.m0
    done = False

    with evaluation_pool(workers) as pool:
        for degree in range(config.max_degree + 1):
            family = ControllerFamily(config.mode, degree, channels)
            box = family.box(boxes)
            carried = None
            for iteration in range(config.max_iterations):
                started = time.perf_counter()
                opt = optimize(plant, family, box, m, config.xi, config.confidence,
                               max_iterations=config.ce_iterations, max_samples=config.ce_samples,
                               n_max_per_ci=config.ci_samples, seed=config.seed, method=config.method,
                               elite_fraction=config.elite_fraction, smoothing=config.smoothing,
                               workers=workers, executor=pool, initial=carried)
                carried = opt.best
                if opt.all_unstable:
                    if degree not in diagnostics.all_unstable_degrees:
                        diagnostics.all_unstable_degrees.append(degree)
                    verified = zero_interval(config.confidence, config.method)
                else:
                    controller = family.build(opt.best.params)
                    estimate = verify(plant, controller, config.xi, config.confidence, config.verify_samples,
                                      seed_verify, config.m_verify, config.method, workers, pool)
                    verified = estimate.interval
                    diagnostics.tolerance_breaches += estimate.tolerance_breaches
                    if verified.trials and estimate.diverged > DIVERGENCE_STORM * verified.trials:
                        diagnostics.divergence_storms += 1
                    if best is None or verified.lo >= config.threshold or verified.midpoint > best.interval.midpoint:
                        best = SynthesizedController(params=opt.best.params, degree=degree,
                                                     controller=family.build(opt.best.params), interval=verified)
                history.append(HistoryRow(degree=degree, iter=iteration, m=m, a_opt=opt.best.interval.lo,
                                          b_opt=opt.best.interval.hi, a_ver=verified.lo, b_ver=verified.hi,
                                          candidates=opt.candidates, unstable=opt.unstable,
                                          seconds=time.perf_counter() - started,
                                          source="unstable" if opt.all_unstable else "verify"))
                logger.info("degree %d iter %d m=%d: optimize [%.4f, %.4f], verify [%.4f, %.4f]", degree, iteration,
                            m, opt.best.interval.lo, opt.best.interval.hi, verified.lo, verified.hi)
                if verified.lo >= config.threshold:
                    done = True
                    break
                if overlap_satisfied(opt.best.interval, verified, config.alpha):
                    break
                m = update_discretization(m, config.m_verify)
            if done:
                break

    success = best is not None and best.interval.lo >= config.threshold
    return SynthesisResult(best=best, success=success, history=history, diagnostics=diagnostics,
                           verify_seed=seed_verify, confidence=config.confidence)
