"""
Quadruple-tank process: four interconnected tanks fed by two pumps through valves with
random split ratios. Water is removed from tanks 1 and 2 at the start of every window and
the valve settings are redrawn at the same instants; two decentralized loops hold the
levels of tanks 1 and 2.
"""
from typing import List, Optional

import numpy as np

from src.models.sdss import DisturbanceEvent, Params, PlantModel, SafetySpec
from src.schemas import QuadTankParams

MAX_RESAMPLES = 100
# grid times are sums of float substeps; event instants are matched within this slack
TIME_SLACK = 1e-9


class QuadTank(PlantModel):
    name = "quad-tank"
    state_names = ("h1", "h2", "h3", "h4")
    input_names = ("u1", "u2")
    output_names = ("y1", "y2")
    disturbance_names = ("gamma1", "gamma2")

    def __init__(self, params: QuadTankParams = QuadTankParams()):
        self.params = params
        p = params
        self.event_times = np.arange(0.0, p.horizon, p.window)
        super().__init__(tau=p.tau, horizon=p.horizon, x_e=[p.r1, p.r2, 1.8, 1.4],
                         u_e=[p.u1_nominal, p.u2_nominal], d_nominal=[p.gamma1_mean, p.gamma2_mean],
                         input_bounds=[(0.0, p.u_max), (0.0, p.u_max)],
                         noise_std=[np.sqrt(p.noise_var)] * 2)

    def dynamics(self, x, u, d):
        p = self.params
        flow = np.sqrt(2.0 * p.g * np.maximum(x, 0.0))
        h1_out, h2_out, h3_out, h4_out = np.moveaxis(flow, -1, 0)
        u1, u2 = u[..., 0], u[..., 1]
        gamma1, gamma2 = d[..., 0], d[..., 1]
        dx = np.empty_like(x)
        dx[..., 0] = (-p.a1 * h1_out + p.a3 * h3_out + gamma1 * p.k1 * u1) / p.A1
        dx[..., 1] = (-p.a2 * h2_out + p.a4 * h4_out + gamma2 * p.k2 * u2) / p.A2
        dx[..., 2] = (-p.a3 * h3_out + (1.0 - gamma2) * p.k2 * u2) / p.A3
        dx[..., 3] = (-p.a4 * h4_out + (1.0 - gamma1) * p.k1 * u1) / p.A4
        return dx

    def output(self, x):
        return self.params.kc * x[..., 0:2]

    def _valve(self, rng: np.random.Generator, mean: float) -> float:
        p = self.params
        for _ in range(MAX_RESAMPLES):
            value = rng.normal(mean, np.sqrt(p.gamma_var))
            if p.gamma_min < value < p.gamma_max:
                return value
        return float(np.clip(value, p.gamma_min, p.gamma_max))

    def draw_disturbance(self, rng: np.random.Generator) -> Params:
        p = self.params
        gammas = np.array([[self._valve(rng, p.gamma1_mean), self._valve(rng, p.gamma2_mean)]
                           for _ in self.event_times])
        removals = rng.uniform(0.0, p.removal_max, size=(self.event_times.size, 2))
        return {"gammas": gammas, "removals": removals}

    def events(self, params: Params) -> List[DisturbanceEvent]:
        return [DisturbanceEvent(time=float(t), kind="reset", channel=tank, amount=float(params["removals"][i, tank]))
                for i, t in enumerate(self.event_times) for tank in (0, 1)]

    def _window(self, t: float) -> int:
        return min(int(np.searchsorted(self.event_times, t + TIME_SLACK, side="right")) - 1, self.event_times.size - 1)

    def disturbance(self, t: float, h: Optional[float], params: Params) -> np.ndarray:
        gammas = params["gammas"]
        if gammas.ndim == 2:
            gammas = gammas[None]
        return gammas[:, self._window(t), :]

    def jump(self, t: float, h: float, x: np.ndarray, params: Params) -> np.ndarray:
        hits = np.nonzero((self.event_times >= t - TIME_SLACK) & (self.event_times < t + h - TIME_SLACK))[0]
        if hits.size == 0:
            return x
        x = x.copy()
        for i in hits:
            x[:, 0:2] = np.maximum(x[:, 0:2] - params["removals"][:, i, :], 0.0)
        return x

    def reference(self, t: float) -> np.ndarray:
        return np.array([self.params.r1, self.params.r2])

    def tracking_error(self, output_index: int, r: float, y: np.ndarray) -> np.ndarray:
        return r - y / self.params.kc

    def safety_spec(self) -> SafetySpec:
        p = self.params
        targets = np.array([p.r1, p.r2])

        def predicate(t, x, params):
            ok = np.all((x >= 0.0) & (x <= p.level_max), axis=-1)
            since = t - self.event_times[self._window(t)]
            if p.settle <= since < p.window:
                ok &= np.all(np.abs(x[..., 0:2] - targets) <= p.band, axis=-1)
            return ok

        return SafetySpec(predicate, f"0 <= h_i <= {p.level_max} and |h_j - r_j| <= {p.band} "
                                     f"from {p.settle} s after each disturbance until the next")
