"""Smoke test for the pyfovtrack extension module.

Install the module first (from the repository root):

    pip install --no-build-isolation .
    python python/smoke_test.py

Also collected by pytest.
"""

import math

import numpy as np

import pyfovtrack


def test_depth_rule():
    d = pyfovtrack.fov_depth(69.4, 42.5, 2.5)
    assert abs(d - 2.5 * (1 + math.sin(math.radians(42.5) / 2))) < 1e-12


def test_field_queries():
    f = pyfovtrack.FovField(resolution=0.1)
    value, grad = f.query(2.5, 0.0, 0.0)
    assert abs(value - 2.5 * math.sin(math.radians(42.5) / 2)) <= 0.1 * math.sqrt(3)
    assert len(grad) == 3
    assert f.query(-1.0, 0.0, 0.0)[0] == 0.0
    assert f.query(2 * f.depth, 0.0, 0.0)[0] == 0.0

    pts = np.array([[2.5, 0.0, 0.0], [1.0, 0.2, -0.1], [-1.0, 0.0, 0.0]])
    vals = f.values(pts)
    assert len(vals) == 3 and vals[0] == value and vals[2] == 0.0
    assert 0.0 < f.max_value < f.depth


def test_prediction_through_observations():
    obs = [[0.0, 0.0, 1.0], [0.5, 0.1, 1.0], [1.0, 0.4, 1.0]]
    # observations sit at -1.0, -0.5 and 0.0 seconds
    back = pyfovtrack.predict(obs, 0.5, [-1.0, -0.5, 0.0])
    assert np.allclose(back, obs, atol=1e-9)
    ahead = pyfovtrack.predict(obs, 0.5, [0.5, 1.0, 5.0])
    # clamped at the horizon
    assert np.allclose(ahead[1], ahead[2])


def test_simulation():
    assert "door-closure" in pyfovtrack.builtin_scenarios()
    text = pyfovtrack.builtin_scenario("open-field").replace("duration = 40.0", "duration = 3.0")
    run = pyfovtrack.simulate(text)
    m, t = run["metrics"], run["trace"]
    assert m["ticks"] == 30 == len(t["t"]) == len(t["detected"])
    assert m["failure_rate"] == 0.0
    again = pyfovtrack.simulate(text)
    assert again["trace"]["px"] == t["px"]
    d = np.hypot(np.array(t["px"]) - t["tx"], np.array(t["py"]) - t["ty"])
    assert abs(d.mean() - m["td_mean"]) < 0.05

    try:
        pyfovtrack.simulate(text, weights={"bogus": 1.0})
    except KeyError:
        pass
    else:
        raise AssertionError("unknown weight accepted")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok {name}")
