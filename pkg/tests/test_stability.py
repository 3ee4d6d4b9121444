import math
import unittest
from typing import Optional

import numpy as np
import pytest

from src.exceptions import ConfigError
from src.models.controller import DecentralizedController, DifferenceController, StateSpaceController
from src.models.sdss import PlantModel, SafetySpec, sample_uncertainty
from src.services.numerics import spectrum
from src.services.simulator import SolverConfig, simulate_trajectory
from src.services.stability import (ACCEPT, REJECT, ClosedLoopLinearization, linearize_closed_loop,
                                    linearize_plant, lyapunov_certificate, perturbation_bounds, stability_check)


class ScalarDecay(PlantModel):
    name = "scalar-decay"
    state_names = ("x",)
    input_names = ("u",)
    output_names = ("x",)

    def __init__(self):
        super().__init__(tau=0.5, horizon=5.0, x_e=[0.0], u_e=[0.0], d_nominal=[], input_bounds=None,
                         noise_std=[0.0])

    def dynamics(self, x, u, d):
        return -x + u

    def output(self, x):
        return x

    def draw_disturbance(self, rng):
        return {}

    def disturbance(self, t: float, h: Optional[float], params):
        return np.zeros((1, 0))

    def safety_spec(self):
        return SafetySpec(lambda t, x, params: np.abs(x[..., 0]) <= 1.0, "|x| <= 1")


def proportional(kp):
    return DecentralizedController.single(DifferenceController([], [kp]))


class TestLinearization:
    def test_double_integrator(self, linear_plant):
        lin = linearize_plant(linear_plant)
        tau = linear_plant.tau
        np.testing.assert_allclose(lin.a, [[0.0, 1.0], [0.0, 0.0]], atol=1e-8)
        np.testing.assert_allclose(lin.b, [[0.0], [1.0]], atol=1e-8)
        np.testing.assert_allclose(lin.c, [[1.0, 0.0]], atol=1e-8)
        np.testing.assert_allclose(lin.g, [[1.0, tau], [0.0, 1.0]], atol=1e-8)
        np.testing.assert_allclose(lin.h, [[tau ** 2 / 2], [tau]], atol=1e-8)

    def test_zero_controller_decouples(self, linear_plant):
        controller = DecentralizedController.from_dict({"a": [0.0], "b": [0.0, 0.0]})
        lin = linearize_closed_loop(linear_plant, controller)
        np.testing.assert_allclose(lin.ghat[:2, :2], lin.g)
        np.testing.assert_allclose(lin.ghat[:2, 2:], 0.0)
        np.testing.assert_allclose(np.sort(np.abs(lin.spectrum.eigenvalues)), [0.0, 0.0, 1.0, 1.0], atol=1e-6)

    def test_positive_feedback_rejected(self, linear_plant):
        lin = linearize_closed_loop(linear_plant, proportional(-1.0))
        assert lin.verdict == REJECT
        assert stability_check(lin) == REJECT

    def test_proportional_alone_rejected(self, linear_plant):
        # |eigenvalue|^2 = det = 1 + tau^2 / 2
        lin = linearize_closed_loop(linear_plant, proportional(1.0))
        assert lin.spectrum.spectral_radius == pytest.approx(math.sqrt(1 + linear_plant.tau ** 2 / 2), abs=1e-6)
        assert lin.verdict == REJECT

    def test_lead_controller_accepted(self, linear_plant, lead_controller):
        lin = linearize_closed_loop(linear_plant, lead_controller)
        assert lin.ghat.shape == (4, 4)
        assert lin.verdict == ACCEPT
        assert lin.spectrum.spectral_radius == pytest.approx(0.917, abs=0.005)

    def test_scalar_decay_accepted(self):
        lin = linearize_closed_loop(ScalarDecay(), proportional(0.0))
        assert lin.spectrum.spectral_radius == pytest.approx(math.exp(-0.5))
        assert lin.verdict == ACCEPT

    def test_channel_layout(self, linear_plant):
        two = DecentralizedController.from_dict([{"kp": 1.0}, {"kp": 1.0}])
        with pytest.raises(ConfigError):
            linearize_closed_loop(linear_plant, two)

    def test_pancreas_proportional_gain(self, pancreas):
        lin = linearize_closed_loop(pancreas, proportional(-5.716e-3))
        assert lin.ghat.shape == (11, 11)
        assert lin.verdict == ACCEPT

    def test_quad_tank_pi_pair(self, quad_tank):
        controller = DecentralizedController.from_dict([{"kp": 6.555, "ki": 1.233}, {"kp": 10.057, "ki": 1.359}])
        assert linearize_closed_loop(quad_tank, controller).verdict == ACCEPT


def test_linearized_loop_matches_simulation(quiet_linear_plant, lead_controller):
    plant = quiet_linear_plant
    realization = sample_uncertainty(plant, 0, 3)
    m = 8
    traj = simulate_trajectory(plant, lead_controller, realization, SolverConfig("rk4", m))
    lin = linearize_closed_loop(plant, lead_controller)
    z = np.concatenate([traj.states[0], np.zeros(2)])
    for k in range(100):
        np.testing.assert_allclose(traj.states[k * m], z[:2], atol=1e-8)
        z = lin.ghat @ z


def test_lyapunov_agrees_with_verdict(linear_plant, lead_controller):
    _, stable_pd = lyapunov_certificate(linearize_closed_loop(linear_plant, lead_controller))
    _, unstable_pd = lyapunov_certificate(linearize_closed_loop(linear_plant, proportional(-1.0)))
    assert stable_pd
    assert not unstable_pd


class TestPerturbationBounds(unittest.TestCase):
    def setUp(self):
        controller = StateSpaceController(g_c=np.zeros((1, 1)), h_c=np.zeros((1, 1)), c_c=np.ones((1, 1)),
                                          d_c=np.zeros((1, 1)))
        self.lin = ClosedLoopLinearization(a=np.zeros((1, 1)), b=np.ones((1, 1)), c=np.ones((1, 1)),
                                           g=np.ones((1, 1)), h=np.full((1, 1), 0.1), ghat=np.eye(2),
                                           spectrum=spectrum(np.eye(2)), verdict=ACCEPT, controller=controller,
                                           tau=0.1)

    def test_scalar_closed_forms(self):
        bounds = perturbation_bounds(self.lin, 0.1, 1.0)
        self.assertAlmostEqual(bounds.L, 0.1)
        self.assertAlmostEqual(bounds.L1, 1.1)
        self.assertAlmostEqual(bounds.h2, (math.exp(0.1) - 1) * 11)

    def test_anchors_at_zero(self):
        bounds = perturbation_bounds(self.lin, 0.3, 0.0)
        self.assertEqual(bounds.h1, 1.0)
        self.assertEqual(bounds.h2, 0.0)
        self.assertEqual(bounds.hhat1, 0.0)
        self.assertEqual(bounds.hhat2, 0.0)

    def test_monotone_and_nonnegative(self):
        values = [perturbation_bounds(self.lin, 0.2, t) for t in np.linspace(0.0, 1.0, 100)]
        h1 = [v.h1 for v in values]
        h2 = [v.h2 for v in values]
        self.assertTrue(all(np.diff(h1) > 0))
        self.assertTrue(all(np.diff(h2) > 0))
        self.assertTrue(all(v.hhat1 >= 0 and v.hhat2 >= 0 for v in values))

    def test_growth_constant_at_least_one(self):
        self.assertGreaterEqual(perturbation_bounds(self.lin, 0.1, 0.5).Gamma, 1.0)

    def test_preconditions(self):
        with self.assertRaises(ConfigError):
            perturbation_bounds(self.lin, 0.0, 1.0)
        with self.assertRaises(ConfigError):
            perturbation_bounds(self.lin, 0.1, -1.0)


def test_bounds_on_lead_loop(linear_plant, lead_controller):
    bounds = perturbation_bounds(linearize_closed_loop(linear_plant, lead_controller), 0.05, 0.1)
    assert bounds.h1 > 1.0
    assert bounds.hhat1 >= 0.0
