"""
Digital controllers: degree-L difference equations, their shift-register state-space
realization, the PID special case and decentralized (block) composition.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from src.conf import messages
from src.exceptions import ConfigError, NumericsError


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0


class DifferenceController:
    """
    u(k) = -sum_{i=1..L} a_i u(k-i) + sum_{i=0..L} b_i e(k-i), with u(j) = e(j) = 0 for j < 0.
    History rows are independent controllers sharing the coefficients.
    """

    def __init__(self, a: Sequence[float], b: Sequence[float], batch: int = 1):
        self.a = np.asarray(a, dtype=float).reshape(-1)
        self.b = np.asarray(b, dtype=float).reshape(-1)
        if self.b.size != self.a.size + 1:
            raise ConfigError(messages.COEFFS_LENGTH, f'len(a)={self.a.size}, len(b)={self.b.size}')
        self.reset(batch)

    @property
    def degree(self) -> int:
        return self.a.size

    def reset(self, batch: int = 1) -> None:
        self.u_history = np.zeros((batch, self.degree))
        self.e_history = np.zeros((batch, self.degree))

    @property
    def params(self) -> np.ndarray:
        """Canonical vector [b0, a1, b1, ..., aL, bL]."""
        p = np.empty(2 * self.degree + 1)
        p[0::2] = self.b
        p[1::2] = self.a
        return p

    @classmethod
    def from_params(cls, p: Sequence[float], batch: int = 1) -> 'DifferenceController':
        p = np.asarray(p, dtype=float).reshape(-1)
        if p.size % 2 != 1:
            raise ConfigError(messages.PARAMS_LENGTH, str(p.size))
        return cls(a=p[1::2], b=p[0::2], batch=batch)

    def to_dict(self) -> Dict:
        return {'degree': self.degree, 'a': self.a.tolist(), 'b': self.b.tolist()}


def controller_step(c: DifferenceController, e_k) -> np.ndarray:
    """
    The controller_step function evaluates the difference equation for the current
    tracking error and shifts the stored history.

    :param c: DifferenceController: Controller (possibly batched)
    :param e_k: Tracking error, scalar or one value per batch row
    :return: The control value(s) u(k)
    """
    e = np.broadcast_to(np.asarray(e_k, dtype=float), (c.u_history.shape[0],)).copy()
    if not np.all(np.isfinite(e)):
        raise NumericsError(messages.NON_FINITE_ERROR)
    u = c.b[0] * e
    if c.degree:
        u = u - c.u_history @ c.a + c.e_history @ c.b[1:]
        c.u_history = np.roll(c.u_history, 1, axis=1)
        c.e_history = np.roll(c.e_history, 1, axis=1)
        c.u_history[:, 0] = u
        c.e_history[:, 0] = e
    return u


@dataclass
class StateSpaceController:
    g_c: np.ndarray
    h_c: np.ndarray
    c_c: np.ndarray
    d_c: np.ndarray
    x_c: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.x_c is None:
            self.x_c = np.zeros((1, self.g_c.shape[0]))

    @property
    def state_dim(self) -> int:
        return self.g_c.shape[0]

    def step(self, e) -> np.ndarray:
        """Step with errors of shape (batch, channels); returns inputs (batch, channels)."""
        e = np.atleast_2d(np.asarray(e, dtype=float))
        u = self.x_c @ self.c_c.T + e @ self.d_c.T
        self.x_c = self.x_c @ self.g_c.T + e @ self.h_c.T
        return u


def to_state_space(c: DifferenceController) -> StateSpaceController:
    """
    The to_state_space function realizes the difference equation as a shift register of
    dimension 2L: the state stores the last L inputs followed by the last L errors.

    :param c: DifferenceController: Controller to realize
    :return: The equivalent StateSpaceController with D_c = b0
    """
    L = c.degree
    g_c = np.zeros((2 * L, 2 * L))
    h_c = np.zeros((2 * L, 1))
    c_c = np.zeros((1, 2 * L))
    if L:
        c_c[0, :L] = -c.a
        c_c[0, L:] = c.b[1:]
        g_c[0, :] = c_c[0]
        g_c[1:L, 0:L - 1] = np.eye(L - 1)
        g_c[L + 1:, L:2 * L - 1] = np.eye(L - 1)
        h_c[0, 0] = c.b[0]
        h_c[L, 0] = 1.0
    x_c = np.concatenate([c.u_history, c.e_history], axis=1)
    return StateSpaceController(g_c=g_c, h_c=h_c, c_c=c_c, d_c=np.array([[c.b[0]]]), x_c=x_c)


def pid_to_coeffs(g: PidGains) -> DifferenceController:
    """
    The pid_to_coeffs function rewrites the velocity-form digital PID
    u(k) = u(k-1) + K_P[e(k)-e(k-1)] + K_I e(k) + K_D[e(k)-2e(k-1)+e(k-2)]
    as a degree-2 difference equation.

    :param g: PidGains: Proportional, integral and derivative gains
    :return: A degree-2 DifferenceController
    """
    return DifferenceController(a=[-1.0, 0.0],
                                b=[g.kp + g.ki + g.kd, -(g.kp + 2.0 * g.kd), g.kd])


def pid_controller(g: PidGains, degree: Optional[int] = None) -> DifferenceController:
    """
    P, PI or PID as the difference equation of the matching degree (0, 1, 2). With no
    degree, the smallest degree that represents the nonzero gains is used.
    """
    if degree is None:
        degree = 2 if g.kd else (1 if g.ki else 0)
    if degree == 0:
        return DifferenceController(a=[], b=[g.kp])
    if degree == 1:
        return DifferenceController(a=[-1.0], b=[g.kp + g.ki, -g.kp])
    return pid_to_coeffs(g)


@dataclass
class ControllerChannel:
    controller: DifferenceController
    output_index: int = 0
    reference_index: int = 0


class DecentralizedController:
    """One difference controller per control input, each closing its own output loop."""

    def __init__(self, channels: List[ControllerChannel]):
        self.channels = channels

    @classmethod
    def single(cls, controller: DifferenceController) -> 'DecentralizedController':
        return cls([ControllerChannel(controller)])

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def reset(self, batch: int = 1) -> None:
        for channel in self.channels:
            channel.controller.reset(batch)

    def step(self, errors: np.ndarray) -> np.ndarray:
        errors = np.atleast_2d(errors)
        return np.stack([controller_step(ch.controller, errors[:, i])
                         for i, ch in enumerate(self.channels)], axis=1)

    def to_state_space(self) -> StateSpaceController:
        parts = [to_state_space(ch.controller) for ch in self.channels]
        block = lambda mats: linalg.block_diag(*mats) if mats else np.zeros((0, 0))
        g_c = block([p.g_c for p in parts])
        h_c = block([p.h_c for p in parts]).reshape(g_c.shape[0], len(parts))
        c_c = block([p.c_c for p in parts]).reshape(len(parts), g_c.shape[0])
        d_c = np.diag([p.d_c[0, 0] for p in parts])
        x_c = np.concatenate([p.x_c for p in parts], axis=1)
        return StateSpaceController(g_c=g_c, h_c=h_c, c_c=c_c, d_c=d_c, x_c=x_c)

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([ch.controller.params for ch in self.channels])

    def to_dict(self) -> Dict:
        return {'channels': [dict(ch.controller.to_dict(), output=ch.output_index,
                                  reference=ch.reference_index) for ch in self.channels]}

    @classmethod
    def from_dict(cls, data) -> 'DecentralizedController':
        """
        The from_dict function accepts {degree, a, b}, {kp, ki, kd}, a list of those, or
        {channels: [...]}; channel i defaults to output i and reference i.

        :param data: Parsed JSON document
        :return: A DecentralizedController
        """
        if isinstance(data, dict) and 'channels' in data:
            data = data['channels']
        items = data if isinstance(data, list) else [data]
        channels = []
        for i, item in enumerate(items):
            if not isinstance(item, dict):
                raise ConfigError(messages.CONTROLLER_INVALID, repr(item))
            if {'a', 'b'} <= item.keys():
                controller = DifferenceController(a=item['a'], b=item['b'])
            elif 'kp' in item:
                gains = PidGains(kp=float(item['kp']), ki=float(item.get('ki', 0.0)), kd=float(item.get('kd', 0.0)))
                controller = pid_controller(gains, item.get('degree'))
            else:
                raise ConfigError(messages.CONTROLLER_INVALID, repr(item))
            channels.append(ControllerChannel(controller, int(item.get('output', i)), int(item.get('reference', i))))
        return cls(channels)


class ControllerFamily:
    """
    Search space of one synthesis degree: maps a flat parameter vector (channel blocks
    concatenated) to a decentralized controller. In pid mode a channel block holds the
    first degree + 1 gains of (K_P, K_I, K_D); in general mode the first 2 * degree + 1
    coefficients of [b0, a1, b1, ...].
    """

    def __init__(self, mode: str, degree: int, channels: Sequence[Tuple[int, int]] = ((0, 0),)):
        self.mode = mode
        self.degree = degree
        self.channels = list(channels)

    @property
    def channel_dim(self) -> int:
        return self.degree + 1 if self.mode == 'pid' else 2 * self.degree + 1

    @property
    def dim(self) -> int:
        return self.channel_dim * len(self.channels)

    def box(self, channel_boxes: Sequence[Sequence[Tuple[float, float]]]) -> np.ndarray:
        rows = []
        for full in channel_boxes:
            full = np.asarray(full, dtype=float).reshape(-1, 2)
            if full.shape[0] < self.channel_dim:
                raise ConfigError(messages.PARAMS_LENGTH, f'box has {full.shape[0]} rows, need {self.channel_dim}')
            rows.append(full[:self.channel_dim])
        return np.concatenate(rows, axis=0)

    def build(self, p: Sequence[float], batch: int = 1) -> DecentralizedController:
        p = np.asarray(p, dtype=float).reshape(-1)
        if p.size != self.dim:
            raise ConfigError(messages.PARAMS_LENGTH, f'{p.size} != {self.dim}')
        channels = []
        for i, (output_index, reference_index) in enumerate(self.channels):
            block = p[i * self.channel_dim:(i + 1) * self.channel_dim]
            if self.mode == 'pid':
                gains = PidGains(*np.pad(block, (0, 3 - block.size)))
                controller = pid_controller(gains, self.degree)
            else:
                controller = DifferenceController.from_params(block)
            controller.reset(batch)
            channels.append(ControllerChannel(controller, output_index, reference_index))
        return DecentralizedController(channels)
