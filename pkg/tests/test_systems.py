import numpy as np
import pytest

from mrfkit.systems import (
    SYSTEMS,
    double_integrator_ball_time,
    double_integrator_origin_time,
    make_system,
)


def test_catalog_names():
    assert {"int1d_mintime", "double_integrator_mintime", "zermelo", "scalar_lq"} <= set(SYSTEMS)
    with pytest.raises(KeyError):
        make_system("nope")


@pytest.mark.parametrize("name", sorted(SYSTEMS))
def test_catalog_invariants(name):
    s = make_system(name)
    rng = np.random.default_rng(0)
    pts = rng.uniform(s.box[:, 0], s.box[:, 1], size=(200, s.state_dim))
    assert s.validate(pts) == []
    assert len(s.control_samples) > 0


def test_origin_time_closed_form():
    # rest at x=1: accelerate back for 1, brake for 1
    assert double_integrator_origin_time(1.0, 0.0) == pytest.approx(2.0)
    # already on the switching curve x = -v|v|/2
    assert double_integrator_origin_time(-0.5, 1.0) == pytest.approx(1.0)
    assert double_integrator_origin_time(0.0, 0.0) == 0.0


def test_ball_time_bounded_by_origin_time():
    rng = np.random.default_rng(1)
    for x, v in rng.uniform(-1, 1, size=(20, 2)):
        if np.hypot(x, v) <= 0.1:
            continue
        tb = double_integrator_ball_time(x, v, 0.1)
        assert 0 < tb <= double_integrator_origin_time(x, v) + 1e-9


def test_zermelo_speed_bound():
    s = make_system("zermelo")
    x = np.zeros((1, 2))
    speeds = [np.linalg.norm(s.f(x, u)) for u in s.control_samples]
    assert max(speeds) == pytest.approx(1.5)
