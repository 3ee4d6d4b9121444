import logging
import math
from concurrent.futures import Executor, ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Union

import numpy as np

from src.conf import messages
from src.conf.config import settings
from src.exceptions import ConfigError, EstimationError
from src.services.numerics import beta_quantile
from src.services.simulator import SafetyOutcome

logger = logging.getLogger(__name__)

METHODS = ("bayesian", "clopper-pearson", "chernoff")

Evaluator = Callable[[int, Sequence[int]], List[Union[SafetyOutcome, bool]]]


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    confidence: float
    successes: int
    trials: int
    method: str

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class ProbabilityEstimate:
    interval: ConfidenceInterval
    diverged: int = 0
    tolerance_breaches: int = 0
    width_reached: bool = False


def zero_interval(confidence: float, method: str = "bayesian") -> ConfidenceInterval:
    return ConfidenceInterval(0.0, 0.0, confidence, 0, 0, method)


def bernoulli_ci(s: int, n: int, c: float, method: str = "bayesian") -> ConfidenceInterval:
    """
    The bernoulli_ci function brackets a Bernoulli success probability after s successes
    in n trials. The bayesian method returns the central credible interval of the
    Beta(1 + s, 1 + n - s) posterior (uniform prior); clopper-pearson the exact
    frequentist interval from Beta quantiles. With n > 0, s = 0 forces lo = 0 and s = n
    forces hi = 1.

    :param s: int: Number of successes
    :param n: int: Number of trials
    :param c: float: Confidence (credible mass)
    :param method: str: bayesian or clopper-pearson
    :return: The ConfidenceInterval
    """
    if not 0 <= s <= n:
        raise ConfigError(messages.CONFIG_INVALID, f"successes {s} outside [0, {n}]")
    if not 0 < c < 1:
        raise ConfigError(messages.CONFIG_INVALID, f"confidence {c} outside (0, 1)")
    tail = (1.0 - c) / 2.0
    if method == "bayesian":
        lo = beta_quantile(tail, 1 + s, 1 + n - s)
        hi = beta_quantile(1.0 - tail, 1 + s, 1 + n - s)
    elif method == "clopper-pearson":
        lo = beta_quantile(tail, s, n - s + 1) if s > 0 else 0.0
        hi = beta_quantile(1.0 - tail, s + 1, n - s) if s < n else 1.0
    else:
        raise ConfigError(messages.CONFIG_INVALID, f"interval method {method!r}")
    if n > 0 and s == 0:
        lo = 0.0
    if n > 0 and s == n:
        hi = 1.0
    return ConfidenceInterval(lo, hi, c, s, n, method)


def hoeffding_samples(xi: float, c: float) -> int:
    """
    Number of samples after which p_hat +- xi / 2 holds with probability at least c
    (Chernoff-Hoeffding bound).
    """
    if not (0 < xi < 1 and 0 < c < 1):
        raise ConfigError(messages.CONFIG_INVALID, f"xi={xi}, c={c}")
    return math.ceil(math.log(2.0 / (1.0 - c)) / (2.0 * (xi / 2.0) ** 2))


def hoeffding_interval(s: int, n: int, xi: float, c: float) -> ConfidenceInterval:
    p_hat = s / n if n else 0.5
    return ConfidenceInterval(max(0.0, p_hat - xi / 2), min(1.0, p_hat + xi / 2), c, s, n, "chernoff")


def interval_overlap(i1: ConfidenceInterval, i2: ConfidenceInterval) -> float:
    return max(0.0, min(i1.hi, i2.hi) - max(i1.lo, i2.lo))


def overlap_satisfied(i1: ConfidenceInterval, i2: ConfidenceInterval, alpha: float) -> bool:
    """
    The overlap_satisfied function tests |i1 n i2| >= alpha * width(i1); a degenerate i1
    passes when the intervals intersect at all.
    """
    if i1.width == 0:
        return i2.lo <= i1.hi and i1.lo <= i2.hi
    return interval_overlap(i1, i2) >= alpha * i1.width


@contextmanager
def evaluation_pool(workers: int) -> Iterator[Optional[Executor]]:
    """Process pool shared by all estimations of a run; None when evaluating in-process."""
    if workers <= 1:
        yield None
        return
    with ProcessPoolExecutor(max_workers=workers) as executor:
        yield executor


def _safe(outcome) -> bool:
    return bool(outcome) if isinstance(outcome, (bool, np.bool_)) else outcome.safe


def estimate_probability(evaluator: Evaluator, xi: float, c: float, n_max: int, seed: int,
                         method: str = "bayesian", workers: int = 1, chunk_size: int = settings.chunk_size,
                         executor: Optional[Executor] = None) -> ProbabilityEstimate:
    """
    The estimate_probability function estimates the probability that a trajectory is safe.
    Trajectory ordinals are evaluated in batches of workers * chunk_size consecutive
    ordinals (one chunk per worker); the interval is recomputed after each complete batch
    and sampling stops once its width is at most xi or n_max trajectories were used. The
    result therefore depends only on (seed, workers, chunk_size), never on completion order.

    :param evaluator: Evaluator: Callable (seed, ordinals) -> outcomes, picklable when workers > 1
    :param xi: float: Target interval width
    :param c: float: Confidence
    :param n_max: int: Sample cap (the Hoeffding sample size replaces it for method chernoff)
    :param seed: int: Master seed passed to the evaluator
    :param method: str: bayesian, clopper-pearson or chernoff
    :param workers: int: Number of chunks per batch
    :param chunk_size: int: Ordinals per chunk
    :param executor: Optional[Executor]: Pool to reuse; one is created when workers > 1 and none is given
    :return: A ProbabilityEstimate
    """
    if not 0 < xi < 1:
        raise ConfigError(messages.CONFIG_INVALID, f"xi={xi} outside (0, 1)")
    if n_max < 1:
        raise ConfigError(messages.CONFIG_INVALID, f"n_max={n_max}")
    if method not in METHODS:
        raise ConfigError(messages.CONFIG_INVALID, f"interval method {method!r}")
    if method == "chernoff":
        n_max = hoeffding_samples(xi, c)
    if executor is None and workers > 1:
        with evaluation_pool(workers) as pool:
            return estimate_probability(evaluator, xi, c, n_max, seed, method, workers, chunk_size, pool)

    successes = trials = diverged = breaches = 0
    interval = bernoulli_ci(0, 0, c, "bayesian" if method == "chernoff" else method)
    while trials < n_max:
        end = min(trials + max(1, workers) * chunk_size, n_max)
        chunks = [list(range(start, min(start + chunk_size, end))) for start in range(trials, end, chunk_size)]
        try:
            if executor is None:
                results = [evaluator(seed, chunk) for chunk in chunks]
            else:
                results = list(executor.map(evaluator, [seed] * len(chunks), chunks))
        except Exception as err:
            raise EstimationError(messages.ESTIMATION_ABORTED, successes, trials) from err
        outcomes = [outcome for chunk in results for outcome in chunk]
        successes += sum(_safe(o) for o in outcomes)
        trials += len(outcomes)
        diverged += sum(getattr(o, "diverged", False) for o in outcomes)
        breaches += sum(getattr(o, "tolerance_breach", False) for o in outcomes)
        if method == "chernoff":
            interval = hoeffding_interval(successes, trials, xi, c)
            continue
        interval = bernoulli_ci(successes, trials, c, method)
        logger.debug("estimate after %d trajectories: [%.4f, %.4f]", trials, interval.lo, interval.hi)
        if interval.width <= xi:
            break
    width_reached = method == "chernoff" or interval.width <= xi
    return ProbabilityEstimate(interval=interval, diverged=diverged, tolerance_breaches=breaches,
                               width_reached=width_reached)
