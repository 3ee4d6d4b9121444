"""
Powertrain air-fuel control: intake manifold pressure, throttle angle and air/fuel ratio.
Engine speed and a pulse-train throttle command with random amplitude are the
disturbances; the controller trims the commanded fuel around the stoichiometric ratio.
"""
from typing import Optional

import numpy as np

from src.models.sdss import Params, PlantModel, SafetySpec
from src.schemas import PowertrainParams

P, THETA, LAMBDA = range(3)


class Powertrain(PlantModel):
    name = "powertrain"
    state_names = ("p", "theta", "lambda")
    input_names = ("u",)
    output_names = ("lambda",)
    disturbance_names = ("omega", "theta_in")

    def __init__(self, params: PowertrainParams = PowertrainParams()):
        self.params = params
        p = params
        super().__init__(tau=p.tau, horizon=p.zeta, x_e=[0.9, p.theta_low, p.lambda_bar], u_e=[0.0],
                         d_nominal=[p.omega_mean, p.theta_low], input_bounds=[(p.u_min, np.inf)],
                         noise_std=[np.sqrt(p.noise_var)])

    def throttle_plate(self, theta):
        p = self.params
        return p.c6 + p.c7 * theta + p.c8 * theta ** 2 + p.c9 * theta ** 3

    def cylinder_air(self, pressure, omega):
        p = self.params
        return p.c12 * (p.c2 + p.c3 * omega * pressure + p.c4 * omega * pressure ** 2 + p.c5 * omega ** 2 * pressure)

    def dynamics(self, x, u, d):
        p = self.params
        pressure, theta, lam = np.moveaxis(x, -1, 0)
        omega, theta_in = d[..., 0], d[..., 1]
        ratio = pressure / p.c10
        m_af = 2.0 * self.throttle_plate(theta) * np.sqrt(np.maximum(ratio - ratio ** 2, 0.0))
        m_c = self.cylinder_air(pressure, omega)
        dx = np.empty_like(x)
        dx[..., P] = p.c1 * (m_af - m_c)
        dx[..., THETA] = 10.0 * (theta_in - theta)
        # F_c = (1 + u) m_c / lambda_bar, so m_c / F_c reduces to lambda_bar / (1 + u)
        dx[..., LAMBDA] = p.c26 * (p.lambda_bar / (p.c25 * (1.0 + u[..., 0])) - lam)
        return dx

    def output(self, x):
        return x[..., LAMBDA:LAMBDA + 1]

    def draw_disturbance(self, rng: np.random.Generator) -> Params:
        p = self.params
        omega = rng.normal(p.omega_mean, np.sqrt(p.omega_var))
        amplitude = rng.normal(p.amp_mean, np.sqrt(p.amp_var))
        return {"omega": np.asarray(omega), "amplitude": np.asarray(amplitude)}

    def disturbance(self, t: float, h: Optional[float], params: Params) -> np.ndarray:
        omega = np.atleast_1d(params["omega"])
        amplitude = np.atleast_1d(params["amplitude"])
        phase = t % self.params.zeta if t < self.horizon else self.params.zeta
        theta_in = amplitude if phase < self.params.zeta / 2 else np.full_like(amplitude, self.params.theta_low)
        return np.stack([omega, theta_in], axis=1)

    def reference(self, t: float) -> np.ndarray:
        return np.array([self.params.lambda_bar])

    def tracking_error(self, output_index: int, r: float, y: np.ndarray) -> np.ndarray:
        return y - r

    def relative_error(self, x: np.ndarray) -> np.ndarray:
        return (x[..., LAMBDA] - self.params.lambda_bar) / self.params.lambda_bar

    def safety_spec(self) -> SafetySpec:
        zeta, band = self.params.zeta, self.params.band

        def predicate(t, x, params):
            mu = np.abs(self.relative_error(x))
            ok = mu < 1.0
            if zeta / 8 <= t <= zeta / 2 or 5 * zeta / 8 <= t <= zeta:
                ok &= mu < band
            return ok

        return SafetySpec(predicate, f"|mu| < 1 and |mu| < {band} on [zeta/8, zeta/2] and [5 zeta/8, zeta]")
