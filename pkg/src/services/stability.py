"""
Instability filter for candidate controllers: the plant is linearized at its equilibrium,
sampled with a zero-order hold and closed with the controller's state-space realization.
A closed-loop transition matrix with an eigenvalue outside the unit circle proves the
sampled-data nonlinear loop unstable; acceptance is a necessary condition only.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from src.conf import messages
from src.conf.config import settings
from src.exceptions import ConfigError
from src.models.controller import DecentralizedController, StateSpaceController
from src.models.sdss import PlantModel
from src.services.numerics import (Spectrum, discretize_pair, fd_jacobian, mat_exp, solve_discrete_lyapunov,
                                   spectrum)

logger = logging.getLogger(__name__)

ACCEPT = "accept"
REJECT = "reject"
GROWTH_GRID_POINTS = 10_000
GROWTH_GRID_PERIODS = 10


@dataclass(frozen=True)
class PlantLinearization:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    g: np.ndarray
    h: np.ndarray
    tau: float


@dataclass(frozen=True)
class ClosedLoopLinearization:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    g: np.ndarray
    h: np.ndarray
    ghat: np.ndarray
    spectrum: Spectrum
    verdict: str
    controller: StateSpaceController
    tau: float


@dataclass(frozen=True)
class PerturbationBounds:
    gamma: float
    t: float
    L: float
    L1: float
    L2: float
    Gamma: float
    alpha_growth: float
    h1: float
    h2: float
    hhat1: float
    hhat2: float


def linearize_plant(plant: PlantModel, tau: Optional[float] = None) -> PlantLinearization:
    """
    The linearize_plant function differentiates the dynamics at (x_e, u_e, d_nominal) and the
    tracking-error map at x_e. C is the negated error Jacobian, so e = -C x to first order
    whatever error convention the plant uses.

    :param plant: PlantModel: Plant at its equilibrium
    :param tau: Optional[float]: Sampling period, the plant's own by default
    :return: The matrices A, B, C and the sampled pair G, H
    """
    tau = plant.tau if tau is None else tau
    x_e = plant.x_e
    u_zero = np.zeros(plant.input_dim)
    d = plant.d_nominal[None, :]

    def state_map(x):
        return plant.dynamics(x[None, :], plant.apply_input(u_zero)[None, :], d)[0]

    def input_map(u):
        return plant.dynamics(x_e[None, :], plant.apply_input(u)[None, :], d)[0]

    reference = plant.reference(0.0)

    def error_map(x):
        y = plant.output(x[None, :])[0]
        return np.array([plant.tracking_error(j, reference[j], y[j]) for j in range(plant.output_dim)])

    a = fd_jacobian(state_map, x_e)
    b = fd_jacobian(input_map, u_zero)
    c = -fd_jacobian(error_map, x_e)
    g, h = discretize_pair(a, b, tau)
    return PlantLinearization(a=a, b=b, c=c, g=g, h=h, tau=tau)


def _selected_outputs(plant: PlantModel, controller: DecentralizedController) -> np.ndarray:
    if controller.n_channels != plant.input_dim:
        raise ConfigError(messages.CHANNEL_LAYOUT, f"{controller.n_channels} channels, {plant.input_dim} inputs")
    outputs = [ch.output_index for ch in controller.channels]
    if any(not 0 <= j < plant.output_dim for j in outputs):
        raise ConfigError(messages.CHANNEL_LAYOUT, f"output indices {outputs}, {plant.output_dim} outputs")
    return np.asarray(outputs)


def _verdict(spectral_radius: float, margin: float) -> str:
    return REJECT if spectral_radius > 1.0 + margin else ACCEPT


def stability_check(lin: ClosedLoopLinearization, margin: float = settings.stability_margin) -> str:
    return _verdict(lin.spectrum.spectral_radius, margin)


def linearize_closed_loop(plant: PlantModel, controller: Union[DecentralizedController, StateSpaceController],
                          tau: Optional[float] = None) -> ClosedLoopLinearization:
    """
    The linearize_closed_loop function assembles the transition matrix of the sampled
    linearized loop over the stacked state (x, x_c):

        [[G - H D_c C, H C_c], [-H_c C, G_c]]

    and computes its spectrum and verdict.

    :param plant: PlantModel: Plant with a cached linearization
    :param controller: Decentralized controller or an already stacked state-space controller
    :param tau: Optional[float]: Sampling period, the plant's own by default
    :return: A ClosedLoopLinearization
    """
    lin = plant.linearization if tau is None or tau == plant.tau else linearize_plant(plant, tau)
    if isinstance(controller, DecentralizedController):
        c = lin.c[_selected_outputs(plant, controller)]
        ss = controller.to_state_space()
    else:
        c, ss = lin.c, controller
    n, k = lin.g.shape[0], ss.state_dim
    ghat = np.zeros((n + k, n + k))
    ghat[:n, :n] = lin.g - lin.h @ ss.d_c @ c
    ghat[:n, n:] = lin.h @ ss.c_c
    ghat[n:, :n] = -ss.h_c @ c
    ghat[n:, n:] = ss.g_c
    spec = spectrum(ghat)
    verdict = _verdict(spec.spectral_radius, settings.stability_margin)
    return ClosedLoopLinearization(a=lin.a, b=lin.b, c=c, g=lin.g, h=lin.h, ghat=ghat, spectrum=spec,
                                   verdict=verdict, controller=ss, tau=lin.tau)


def lyapunov_certificate(lin: ClosedLoopLinearization):
    """Discrete Lyapunov solution for the closed-loop matrix with Q = I and its PD flag."""
    return solve_discrete_lyapunov(lin.ghat, np.eye(lin.ghat.shape[0]))


def _norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2)) if m.size else 0.0


def growth_constant(a: np.ndarray, alpha: float, horizon: float) -> float:
    """
    The growth_constant function estimates sup_t ||e^{At}||_2 e^{-alpha t} on a uniform grid
    of [0, horizon], stepping the exponential by repeated multiplication.

    :param a: np.ndarray: State matrix
    :param alpha: float: Exponential rate strictly above the spectral abscissa
    :param horizon: float: Length of the grid
    :return: The estimated constant (at least 1)
    """
    dt = horizon / (GROWTH_GRID_POINTS - 1)
    step = mat_exp(a, dt)
    power = np.eye(a.shape[0])
    best = 1.0
    for i in range(1, GROWTH_GRID_POINTS):
        power = power @ step
        best = max(best, _norm(power) * np.exp(-alpha * i * dt))
    return best


def _exp_difference(rate_a: float, rate_b: float, t: float) -> float:
    # (e^{a t} - e^{b t}) / (a - b), t e^{a t} in the limit a = b
    if abs(rate_a - rate_b) <= 1e-12 * max(1.0, abs(rate_a)):
        return t * np.exp(rate_a * t)
    return (np.exp(rate_a * t) - np.exp(rate_b * t)) / (rate_a - rate_b)


def _exp_integral(rate: float, t: float) -> float:
    if abs(rate) <= 1e-12:
        return t
    return np.expm1(rate * t) / rate


def perturbation_bounds(lin: ClosedLoopLinearization, gamma: float, t: float) -> PerturbationBounds:
    """
    The perturbation_bounds function evaluates the closed-form functions bounding the
    deviation of the nonlinear loop from its linearization within one sampling interval:
    h1, h2 bound ||x(t)|| by the sampled plant and controller states, hhat1, hhat2 bound the
    integrated nonlinear remainder. Diagnostic only.

    :param lin: ClosedLoopLinearization: Linearized loop
    :param gamma: float: Remainder slope (> 0)
    :param t: float: Time since the last sampling instant (>= 0)
    :return: A PerturbationBounds record
    """
    if not gamma > 0 or not t >= 0:
        raise ConfigError(messages.CONFIG_INVALID, f"bounds need gamma > 0 and t >= 0 (gamma={gamma}, t={t})")
    ss = lin.controller
    bc_c = lin.b @ ss.c_c
    d_c_c = ss.d_c @ lin.c
    L = _norm(lin.a) + gamma
    L1 = _norm(bc_c) + gamma * _norm(ss.c_c)
    L2 = _norm(lin.b @ d_c_c) + gamma * _norm(d_c_c) + gamma ** 2 * _norm(ss.d_c)
    growth = np.expm1(L * t)
    h1 = np.exp(L * t) + growth * L2 / L
    h2 = growth * L1 / L
    alpha = float(np.max(np.real(np.linalg.eigvals(lin.a)))) + 1.0 if lin.a.size else 1.0
    big_gamma = growth_constant(lin.a, alpha, GROWTH_GRID_PERIODS * lin.tau)
    phi = _exp_difference(L, alpha, t)
    psi = _exp_integral(alpha, t)
    hhat1 = big_gamma * (1.0 + L2 / L) * phi + big_gamma * (_norm(d_c_c) + gamma * _norm(ss.d_c) - L2 / L) * psi
    hhat2 = big_gamma * L1 / L * phi + big_gamma * (_norm(ss.c_c) - L1 / L) * psi
    return PerturbationBounds(gamma=gamma, t=t, L=L, L1=L1, L2=L2, Gamma=big_gamma, alpha_growth=alpha,
                              h1=float(h1), h2=float(h2), hhat1=max(0.0, float(hhat1)), hhat2=max(0.0, float(hhat2)))
