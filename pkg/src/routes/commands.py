import argparse
import csv
import json
import logging
from dataclasses import asdict
from pathlib import Path
from typing import Callable, Dict

from src.conf.config import TOOL_VERSION, resolve_workers
from src.conf.loader import load_controller, load_run_config
from src.exceptions import SingularLyapunovError
from src.models.sdss import sample_uncertainty
from src.repository.plants import build_plant
from src.schemas import (BoundsReport, EigenvalueModel, EvalReport, IntervalModel, RunConfig, StabilityReport,
                         SynthesisReport)
from src.services.simulator import SolverConfig, TrajectoryEvaluator, safety_outcome, simulate_trajectory, \
    write_trajectory_csv
from src.services.stability import linearize_closed_loop, lyapunov_certificate, perturbation_bounds
from src.services.stats import ConfidenceInterval, estimate_probability
from src.services.synthesis import SynthesisConfig, synthesize, verify_seed

logger = logging.getLogger(__name__)

HISTORY_FIELDS = ["degree", "iter", "m", "a_opt", "b_opt", "a_ver", "b_ver", "candidates", "unstable", "seconds"]

Handler = Callable[[argparse.Namespace], dict]
handlers: Dict[str, Handler] = {}


def command(name: str):
    def register(func: Handler) -> Handler:
        handlers[name] = func
        return func
    return register


def interval_model(interval: ConfidenceInterval) -> IntervalModel:
    return IntervalModel(lo=interval.lo, hi=interval.hi, confidence=interval.confidence,
                         successes=interval.successes, trials=interval.trials, method=interval.method)


def output_dir(config: RunConfig, override: str = None) -> Path:
    directory = Path(override or config.output.directory)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def write_history_csv(path: Path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.dict())


def _controller(args: argparse.Namespace):
    return load_controller(args.controller, args.kp, args.ki, args.kd)


@command("synth")
def synth(args: argparse.Namespace) -> dict:
    """
    The synth function runs the full synthesis for a run config and writes report.json and
    history.csv to the output directory.

    :param args: argparse.Namespace: Parsed command line
    :return: The report document
    """
    config = load_run_config(args.config)
    if args.seed is not None:
        config.synthesis.seed = args.seed
    if args.workers is not None:
        config.synthesis.workers = args.workers
    result = synthesize(SynthesisConfig.from_run_config(config))
    best = result.best
    report = SynthesisReport(tool_version=TOOL_VERSION, seed=config.synthesis.seed, config=config.dict(),
                             params=best.params.tolist() if best else [],
                             controller=best.controller.to_dict() if best else {},
                             interval=interval_model(result.interval), degree=result.degree,
                             success=result.success, diagnostics=result.diagnostics, history=result.history)
    directory = output_dir(config, args.out)
    payload = report.dict(by_alias=True)
    write_json(directory / config.output.report, payload)
    write_history_csv(directory / config.output.history, result.history)
    logger.info("synth finished: success=%s, degree %d, interval [%.4f, %.4f]", result.success, result.degree,
                result.interval.lo, result.interval.hi)
    return payload


@command("eval")
def evaluate(args: argparse.Namespace) -> dict:
    """
    The evaluate function estimates the safety probability of a given controller. With the
    defaults (rk4, m_verify substeps, the verification seed of the master seed) it
    reproduces the verified interval of a synthesis run.

    :param args: argparse.Namespace: Parsed command line
    :return: The evaluation document
    """
    config = load_run_config(args.config)
    plant = build_plant(config.plant.name, config.plant.overrides)
    controller = _controller(args)
    seed = config.synthesis.seed if args.seed is None else args.seed
    solver = SolverConfig(mode=args.solver, substeps=args.substeps or config.synthesis.m_verify)
    method = args.method or config.synthesis.method
    samples = args.samples or config.synthesis.verify_samples
    estimate = estimate_probability(TrajectoryEvaluator(plant, controller, solver), config.synthesis.xi,
                                    config.synthesis.confidence, samples, verify_seed(seed), method=method,
                                    workers=resolve_workers(args.workers or config.synthesis.workers))
    report = EvalReport(tool_version=TOOL_VERSION, seed=seed, plant=plant.name, controller=controller.to_dict(),
                        solver=solver.mode, substeps=solver.substeps, interval=interval_model(estimate.interval),
                        diverged=estimate.diverged, tolerance_breaches=estimate.tolerance_breaches,
                        width_reached=estimate.width_reached)
    payload = report.dict(by_alias=True)
    write_json(Path(args.out) if args.out else output_dir(config) / "eval.json", payload)
    logger.info("eval finished: [%.4f, %.4f] from %d trajectories", estimate.interval.lo, estimate.interval.hi,
                estimate.interval.trials)
    return payload


@command("stability")
def stability(args: argparse.Namespace) -> dict:
    """
    The stability function linearizes the plant at its equilibrium, closes the sampled loop
    with the given controller and reports the spectrum of the closed-loop matrix with the
    accept/reject verdict. The Lyapunov certificate is attached when it can be solved.

    :param args: argparse.Namespace: Parsed command line
    :return: The stability document
    """
    config = load_run_config(args.config)
    plant = build_plant(config.plant.name, config.plant.overrides)
    controller = _controller(args)
    lin = linearize_closed_loop(plant, controller)
    try:
        _, positive_definite = lyapunov_certificate(lin)
    except SingularLyapunovError:
        positive_definite = None
    report = StabilityReport(plant=plant.name, controller=controller.to_dict(),
                             spectral_radius=lin.spectrum.spectral_radius, verdict=lin.verdict,
                             eigenvalues=[EigenvalueModel(re=ev.real, im=ev.imag, modulus=abs(ev))
                                          for ev in lin.spectrum.eigenvalues],
                             lyapunov_positive_definite=positive_definite)
    logger.info("stability: spectral radius %.6f, %s", lin.spectrum.spectral_radius, lin.verdict)
    return report.dict()


@command("simulate")
def simulate(args: argparse.Namespace) -> dict:
    """
    The simulate function writes one recorded trajectory as CSV for plotting.

    :param args: argparse.Namespace: Parsed command line
    :return: The safety outcome of the trajectory
    """
    config = load_run_config(args.config)
    plant = build_plant(config.plant.name, config.plant.overrides)
    controller = _controller(args)
    solver = SolverConfig(mode=args.solver, substeps=args.substeps or config.synthesis.m_verify)
    realization = sample_uncertainty(plant, args.seed, 0)
    traj = simulate_trajectory(plant, controller, realization, solver)
    write_trajectory_csv(traj, args.out)
    outcome = safety_outcome(traj, plant.safety_spec())
    logger.info("simulate: wrote %d grid points to %s", traj.times.size, args.out)
    return {"seed": args.seed, "safe": outcome.safe, "first_violation_time": outcome.first_violation_time,
            "diverged": outcome.diverged, "tolerance_breach": outcome.tolerance_breach,
            "events": [asdict(event) for event in plant.events(realization.disturbance_params)]}


@command("bounds")
def bounds(args: argparse.Namespace) -> dict:
    """
    The bounds function evaluates the perturbation bound functions of the linearized closed
    loop at gamma and t.

    :param args: argparse.Namespace: Parsed command line
    :return: The bounds document
    """
    config = load_run_config(args.config)
    plant = build_plant(config.plant.name, config.plant.overrides)
    lin = linearize_closed_loop(plant, _controller(args))
    result = perturbation_bounds(lin, args.gamma, args.t)
    return BoundsReport(plant=plant.name, **asdict(result)).dict()


def add_controller_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--controller", help="controller JSON file, inline JSON or a synthesis report")
    parser.add_argument("--kp", help="proportional gain(s), comma separated per channel")
    parser.add_argument("--ki", help="integral gain(s), comma separated per channel")
    parser.add_argument("--kd", help="derivative gain(s), comma separated per channel")


def register(subparsers) -> None:
    """
    The register function declares the subcommands and their arguments.

    :param subparsers: Subparsers action of the main parser
    """
    parser = subparsers.add_parser("synth", help="synthesize a controller")
    parser.add_argument("config", help="TOML run config or plant name")
    parser.add_argument("--out", help="output directory (overrides [output].directory)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)

    parser = subparsers.add_parser("eval", help="estimate the safety probability of a controller")
    parser.add_argument("config", help="TOML run config or plant name")
    add_controller_arguments(parser)
    parser.add_argument("--samples", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--method", choices=["bayesian", "clopper-pearson", "chernoff"])
    parser.add_argument("--solver", choices=["euler", "rk4"], default="rk4")
    parser.add_argument("--substeps", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out", help="eval.json path")

    parser = subparsers.add_parser("stability", help="closed-loop eigenvalues and verdict")
    parser.add_argument("config", help="TOML run config or plant name")
    add_controller_arguments(parser)

    parser = subparsers.add_parser("simulate", help="write one trajectory as CSV")
    parser.add_argument("config", help="TOML run config or plant name")
    add_controller_arguments(parser)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--solver", choices=["euler", "rk4"], default="rk4")
    parser.add_argument("--substeps", type=int)
    parser.add_argument("--out", default="traj.csv")

    parser = subparsers.add_parser("bounds", help="perturbation bound diagnostics")
    parser.add_argument("config", help="TOML run config or plant name")
    add_controller_arguments(parser)
    parser.add_argument("--gamma", type=float, required=True)
    parser.add_argument("--t", type=float, required=True)
