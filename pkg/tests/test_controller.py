import unittest

import numpy as np
import pytest

from src.exceptions import ConfigError, NumericsError
from src.models.controller import (ControllerFamily, DecentralizedController, DifferenceController, PidGains,
                                   controller_step, pid_controller, pid_to_coeffs, to_state_space)


def direct_pid(gains: PidGains, errors):
    """Velocity-form PID recursion evaluated directly."""
    u_prev, e1, e2 = 0.0, 0.0, 0.0
    out = []
    for e in errors:
        u = u_prev + gains.kp * (e - e1) + gains.ki * e + gains.kd * (e - 2 * e1 + e2)
        out.append(u)
        u_prev, e1, e2 = u, e, e1
    return np.array(out)


def run(controller, errors):
    return np.array([controller_step(controller, e)[0] for e in errors])


class TestDifferenceController(unittest.TestCase):
    def test_zero_history(self):
        self.assertEqual(controller_step(DifferenceController([0.5], [1.0, 2.0]), 0.0)[0], 0.0)

    def test_proportional(self):
        self.assertEqual(controller_step(DifferenceController([], [2.0]), 3.0)[0], 6.0)

    def test_params_ordering(self):
        c = DifferenceController(a=[0.3, -0.1], b=[1.0, 2.0, 3.0])
        np.testing.assert_array_equal(c.params, [1.0, 0.3, 2.0, -0.1, 3.0])
        restored = DifferenceController.from_params(c.params)
        np.testing.assert_array_equal(restored.a, c.a)
        np.testing.assert_array_equal(restored.b, c.b)

    def test_coefficient_lengths(self):
        with self.assertRaises(ConfigError):
            DifferenceController(a=[1.0], b=[1.0])
        with self.assertRaises(ConfigError):
            DifferenceController.from_params([1.0, 2.0])

    def test_non_finite_error(self):
        with self.assertRaises(NumericsError):
            controller_step(DifferenceController([], [1.0]), np.inf)

    def test_batched_rows_are_independent(self):
        c = DifferenceController(a=[-1.0], b=[1.0, 0.0], batch=3)
        controller_step(c, [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(controller_step(c, [1.0, 1.0, 1.0]), [2.0, 3.0, 4.0])

    def test_superposition(self):
        rng = np.random.default_rng(1)
        e1, e2 = rng.normal(size=50), rng.normal(size=50)
        make = lambda: DifferenceController(a=[0.2, -0.1], b=[1.0, -0.5, 0.25])
        np.testing.assert_allclose(run(make(), 2 * e1 + 3 * e2), 2 * run(make(), e1) + 3 * run(make(), e2),
                                   atol=1e-12)


class TestPid(unittest.TestCase):
    def test_zero_gains(self):
        c = pid_to_coeffs(PidGains())
        np.testing.assert_array_equal(c.b, [0.0, 0.0, 0.0])
        np.testing.assert_array_equal(run(c, [1.0, -2.0, 3.0]), [0.0, 0.0, 0.0])

    def test_proportional_coefficients(self):
        c = pid_to_coeffs(PidGains(kp=1.0))
        np.testing.assert_array_equal(c.b, [1.0, -1.0, 0.0])
        np.testing.assert_array_equal(c.a, [-1.0, 0.0])

    def test_constant_error(self):
        np.testing.assert_allclose(run(pid_to_coeffs(PidGains(kp=0.7)), np.ones(5)), np.full(5, 0.7))
        np.testing.assert_allclose(run(pid_to_coeffs(PidGains(ki=0.5)), np.ones(5)), 0.5 * np.arange(1, 6))

    def test_matches_direct_recursion(self):
        gains = PidGains(kp=-5.716e-3, ki=-1.88e-7, kd=-0.2002)
        errors = np.random.default_rng(7).normal(size=500)
        np.testing.assert_allclose(run(pid_to_coeffs(gains), errors), direct_pid(gains, errors), atol=1e-12)

    def test_lower_degrees(self):
        gains = PidGains(kp=1.0, ki=0.5)
        self.assertEqual(pid_controller(PidGains(kp=2.0)).degree, 0)
        self.assertEqual(pid_controller(gains).degree, 1)
        np.testing.assert_allclose(run(pid_controller(gains), np.ones(3)), [1.5, 2.0, 2.5])
        np.testing.assert_allclose(run(pid_controller(gains, 2), np.ones(3)), [1.5, 2.0, 2.5])


class TestStateSpace(unittest.TestCase):
    def test_degree_zero(self):
        ss = to_state_space(DifferenceController([], [4.0]))
        self.assertEqual(ss.state_dim, 0)
        np.testing.assert_array_equal(ss.d_c, [[4.0]])

    def test_pid_dimension(self):
        self.assertEqual(to_state_space(pid_to_coeffs(PidGains(1.0, 0.1, 0.01))).state_dim, 4)

    def test_forms_agree(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            degree = int(rng.integers(0, 5))
            a = rng.uniform(-0.8, 0.8, size=degree) / max(degree, 1)
            b = rng.normal(size=degree + 1)
            difference = DifferenceController(a, b)
            ss = to_state_space(DifferenceController(a, b))
            errors = rng.normal(size=1000)
            expected = run(difference, errors)
            got = np.array([ss.step([[e]])[0, 0] for e in errors])
            np.testing.assert_allclose(got, expected, rtol=1e-10, atol=1e-10)

    def test_decentralized_block_form(self):
        controller = DecentralizedController.from_dict([{"kp": 1.0, "ki": 0.2}, {"a": [0.1, 0.0], "b": [1, 2, 3]}])
        ss = controller.to_state_space()
        self.assertEqual(ss.g_c.shape, (6, 6))
        self.assertEqual(ss.h_c.shape, (6, 2))
        self.assertEqual(ss.c_c.shape, (2, 6))
        errors = np.random.default_rng(3).normal(size=(40, 2))
        for e in errors:
            np.testing.assert_allclose(ss.step(e[None, :])[0], controller.step(e[None, :])[0], atol=1e-12)


class TestDecentralized(unittest.TestCase):
    def test_from_gains(self):
        controller = DecentralizedController.from_dict({"kp": 2.0, "ki": 1.0})
        self.assertEqual(controller.n_channels, 1)
        self.assertEqual(controller.channels[0].controller.degree, 1)

    def test_dict_round_trip(self):
        controller = DecentralizedController.from_dict(
            {"channels": [{"a": [0.5], "b": [1.0, 2.0], "output": 1, "reference": 1}, {"kp": 3.0}]})
        restored = DecentralizedController.from_dict(controller.to_dict())
        np.testing.assert_array_equal(restored.params, controller.params)
        self.assertEqual([ch.output_index for ch in restored.channels], [1, 1])

    def test_invalid_item(self):
        with self.assertRaises(ConfigError):
            DecentralizedController.from_dict([{"gain": 1.0}])
        with self.assertRaises(ConfigError):
            DecentralizedController.from_dict([1.0])

    def test_step_shapes(self):
        controller = DecentralizedController.from_dict([{"kp": 1.0}, {"kp": 2.0}])
        controller.reset(4)
        self.assertEqual(controller.step(np.ones((4, 2))).shape, (4, 2))


@pytest.mark.parametrize("mode, degree, expected", [("pid", 0, 1), ("pid", 2, 3), ("general", 1, 3), ("general", 2, 5)])
def test_family_dimension(mode, degree, expected):
    family = ControllerFamily(mode, degree, [(0, 0), (1, 1)])
    assert family.channel_dim == expected
    assert family.dim == 2 * expected


def test_family_box_truncation():
    family = ControllerFamily("pid", 1)
    box = family.box([[[-1, 1], [-2, 2], [-3, 3]]])
    np.testing.assert_array_equal(box, [[-1, 1], [-2, 2]])
    with pytest.raises(ConfigError):
        ControllerFamily("general", 2).box([[[-1, 1], [-2, 2], [-3, 3]]])


def test_family_build():
    controller = ControllerFamily("pid", 1, [(0, 0), (1, 1)]).build([1.0, 0.5, 2.0, 0.1], batch=2)
    assert controller.n_channels == 2
    np.testing.assert_array_equal(controller.channels[1].controller.b, [2.1, -2.0])
    assert controller.channels[0].controller.u_history.shape == (2, 1)
    with pytest.raises(ConfigError):
        ControllerFamily("pid", 1).build([1.0])
