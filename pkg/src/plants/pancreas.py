"""
Artificial pancreas: glucose-insulin regulatory model with gut absorption, interstitial
glucose sensing and subcutaneous insulin delivery. Three meals of random size and timing
are the disturbance; a CGM reads the interstitial glucose every sampling period.
"""
from typing import List, Optional

import numpy as np

from src.models.sdss import DisturbanceEvent, Params, PlantModel, SafetySpec
from src.schemas import ArtificialPancreasParams

Q1, Q2, G1, G2, C, S1, S2, I, X1, X2, X3 = range(11)


class ArtificialPancreas(PlantModel):
    name = "artificial-pancreas"
    state_names = ("Q1", "Q2", "G1", "G2", "C", "S1", "S2", "I", "x1", "x2", "x3")
    input_names = ("u",)
    output_names = ("C",)
    disturbance_names = ("D_G",)

    def __init__(self, params: ArtificialPancreasParams = ArtificialPancreasParams()):
        self.params = params
        p = params
        self.v_i = p.vi_per_kg * p.w
        self.v_g = p.vg_per_kg * p.w
        self.f01 = p.f01_per_kg * p.w
        self.egp0 = p.egp0_per_kg * p.w
        self.grams_to_mmol = 1000.0 / p.mw_glucose
        super().__init__(tau=p.tau, horizon=p.horizon, x_e=self.basal_state(), u_e=[p.u_b], d_nominal=[0.0],
                         input_bounds=[(0.0, np.inf)], noise_std=[p.noise_std])

    def basal_state(self) -> np.ndarray:
        """
        The basal_state function solves the fasting steady state under the basal infusion
        in closed form; it is the Newton starting point and the initial state.

        :return: The 11-dimensional steady state
        """
        p = self.params
        s = p.tmax_i * p.u_b
        insulin = p.u_b / (self.v_i * p.ke)
        x1, x2, x3 = (p.kb1 / p.ka1 * insulin, p.kb2 / p.ka2 * insulin, p.kb3 / p.ka3 * insulin)
        net = -self.f01 - p.fr + self.egp0 * (1.0 - x3)
        uptake = x1 * x2 / (p.k12 + x2)
        q1 = net / uptake if uptake > 0 else p.reference * self.v_g
        q2 = x1 * q1 / (p.k12 + x2)
        g = q1 / self.v_g
        return np.array([q1, q2, 0.0, 0.0, g, s, s, insulin, x1, x2, x3])

    def glucose(self, x: np.ndarray) -> np.ndarray:
        return x[..., Q1] / self.v_g

    def dynamics(self, x, u, d):
        p = self.params
        q1, q2, g1, g2, c, s1, s2, i, x1, x2, x3 = np.moveaxis(x, -1, 0)
        u_g = g2 / p.tmax_g
        g = q1 / self.v_g
        dx = np.empty_like(x)
        dx[..., Q1] = -self.f01 - x1 * q1 + p.k12 * q2 - p.fr + self.egp0 * (1.0 - x3) + u_g
        dx[..., Q2] = x1 * q1 - (p.k12 + x2) * q2
        dx[..., G1] = -g1 / p.tmax_g + p.a_g * d[..., 0]
        dx[..., G2] = (g1 - g2) / p.tmax_g
        dx[..., C] = p.k_int * (g - c)
        # u is the total infusion u_b + controller output
        dx[..., S1] = u[..., 0] - s1 / p.tmax_i
        dx[..., S2] = (s1 - s2) / p.tmax_i
        dx[..., I] = s2 / (p.tmax_i * self.v_i) - p.ke * i
        dx[..., X1] = -p.ka1 * x1 + p.kb1 * i
        dx[..., X2] = -p.ka2 * x2 + p.kb2 * i
        dx[..., X3] = -p.ka3 * x3 + p.kb3 * i
        return dx

    def output(self, x):
        return x[..., C:C + 1]

    def draw_disturbance(self, rng: np.random.Generator) -> Params:
        p = self.params
        amounts = rng.normal(p.meal_means, np.sqrt(p.meal_var))
        waits = rng.normal(p.wait_mean, np.sqrt(p.wait_var), size=2)
        waits = np.where(waits < 0, p.negative_wait, waits)
        times = np.array([0.0, waits[0], waits[0] + waits[1]])
        return {"meal_grams": np.maximum(amounts, 0.0), "meal_times": times}

    def events(self, params: Params) -> List[DisturbanceEvent]:
        return [DisturbanceEvent(time=float(t), kind="pulse", channel=0, amount=float(grams * self.grams_to_mmol))
                for t, grams in zip(params["meal_times"], params["meal_grams"])]

    def disturbance(self, t: float, h: Optional[float], params: Params) -> np.ndarray:
        times = np.atleast_2d(params["meal_times"])
        d = np.zeros((times.shape[0], 1))
        if h is None:
            return d
        mmol = np.atleast_2d(params["meal_grams"]) * self.grams_to_mmol
        inside = (times >= t) & (times < t + h)
        d[:, 0] = np.sum(np.where(inside, mmol, 0.0), axis=1) / h
        return d

    def reference(self, t: float) -> np.ndarray:
        return np.array([self.params.reference])

    def safety_spec(self) -> SafetySpec:
        p = self.params
        final_start = self.horizon - p.final_window

        def predicate(t, x, params):
            g = self.glucose(x)
            ok = (g >= p.g_low) & (g <= p.g_high)
            if t >= final_start:
                ok &= np.abs(g - p.reference) <= p.final_band
            return ok

        return SafetySpec(predicate, f"G in [{p.g_low}, {p.g_high}] and |G - {p.reference}| <= {p.final_band} "
                                     f"for t in [{final_start}, {self.horizon}]")
