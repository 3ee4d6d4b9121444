import pytest

from src.models.controller import DecentralizedController
from src.repository.plants import build_plant


LEAD_CONTROLLER = {"a": [0.0], "b": [20.0, -19.0]}


@pytest.fixture(scope="module")
def linear_plant():
    return build_plant("linear-test")


@pytest.fixture(scope="module")
def quiet_linear_plant():
    # no measurement noise: trajectories are deterministic given x0
    return build_plant("linear-test", {"lt.noise_std": 0.0})


@pytest.fixture(scope="module")
def pancreas():
    return build_plant("artificial-pancreas")


@pytest.fixture(scope="module")
def powertrain():
    return build_plant("powertrain")


@pytest.fixture(scope="module")
def quad_tank():
    return build_plant("quad-tank")


@pytest.fixture()
def lead_controller():
    return DecentralizedController.from_dict(LEAD_CONTROLLER)


@pytest.fixture()
def run_config(tmp_path):
    path = tmp_path / "linear.toml"
    path.write_text(
        """
[plant]
name = "linear-test"

[controller]
mode = "general"
max_degree = 1
box = [[5.0, 30.0], [-0.5, 0.5], [-28.0, -5.0]]

[synthesis]
threshold = 0.9
xi = 0.2
confidence = 0.9
m_verify = 4
max_iterations = 1
verify_samples = 40
ce_iterations = 1
ce_samples = 3
ci_samples = 20
workers = 1

[output]
directory = "%s"
""" % tmp_path.as_posix(),
        encoding="utf-8",
    )
    return path
