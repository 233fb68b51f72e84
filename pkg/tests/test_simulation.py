import numpy as np
import pytest

from phsobs.core import build_boundary_algebra, boundary_term_from_output
from phsobs.discretization import discretize
from phsobs.exceptions import ValidationError
from phsobs.models import model
from phsobs.simulation import default_dt, energy_balance_residual, simulate, stability_classify

A_EX = np.array([[-1.0, 1.0], [-1.0, 0.0]])
G_EX = np.array([[-1.0, -1.0], [-1.0, -1.0]])


def bump(d):
    z = d.grid.nodes
    return d.project(np.repeat(np.exp(-((z - 0.5) / 0.1) ** 2)[:, None], d.n, axis=1))


@pytest.mark.parametrize("integrator", ["trapezoidal", "explicit_rk4"])
def test_zero_state(integrator):
    d = discretize(model("wave", {"bc": "damped"}).system, 20)
    tr = simulate(d, np.zeros(d.m), 0.5, integrator=integrator)
    assert np.all(tr.states == 0)
    assert np.all(tr.outputs == 0)


@pytest.mark.parametrize("scheme", ["central_staggered", "upwind"])
def test_transport_bump_exits(scheme):
    d = discretize(model("transport").system, 100, scheme)
    tr = simulate(d, bump(d), 1.0)
    assert tr.energies[-1] / tr.energies[0] <= 1e-3


def test_conservative_wave_energy():
    sys = model("wave", {"G0": [[0.0, 1.5], [-1.5, 0.0]], "T": [1.0, 0.5]}).system
    d = discretize(sys, 60)
    z0 = d.project(np.random.default_rng(0).standard_normal((61, 2)))
    tr = simulate(d, z0, 5.0)
    assert np.max(np.abs(tr.energies - tr.energies[0])) / tr.energies[0] <= 1e-8


def test_conservative_wave_residual():
    d = discretize(model("wave").system, 40)
    z = d.grid.nodes
    x = np.stack([np.sin(np.pi * z) ** 2, np.sin(np.pi * z) ** 3], axis=1)
    tr = simulate(d, d.project(x), 0.5)
    res, _ = energy_balance_residual(tr)
    assert res <= 1e-8


def test_damped_residual_second_order():
    sys = model("wave", {"bc": "damped", "G0": -np.eye(2)}).system
    res = []
    for N in (50, 100):
        d = discretize(sys, N)
        z = d.grid.nodes
        x = np.stack([np.sin(np.pi * z) ** 2 * np.exp(z), np.cos(np.pi * z / 2) * (1 - z)], axis=1)
        tr = simulate(d, d.project(x), 1.0, dt=1.0 / (2 * N))
        res.append(energy_balance_residual(tr)[0])
    assert res[0] / res[1] >= 3.5


def test_trapezoid_rule_residual_is_exact():
    # the discrete identity holds to round-off with the trapezoid dissipation
    sys = model("wave", {"bc": "damped", "G0": -np.eye(2)}).system
    d = discretize(sys, 30)
    tr = simulate(d, d.project(np.ones((31, 2))), 0.5)
    assert energy_balance_residual(tr, rule="trapezoid")[0] <= 1e-10


def test_transport_outflow_boundary_term():
    sys = model("transport").system
    alg = build_boundary_algebra(sys)
    d = discretize(sys, 100)
    tr = simulate(d, bump(d), 0.6)
    dE = np.diff(tr.energies) / np.diff(tr.times)
    y_mid = 0.5 * (tr.outputs[1:] + tr.outputs[:-1])
    pred = np.array([boundary_term_from_output(alg, y) for y in y_mid])
    np.testing.assert_allclose(pred, -0.5 * np.abs(y_mid[:, 0]) ** 2)
    np.testing.assert_allclose(dE, pred, atol=1e-10)


def test_rk4_matches_trapezoidal():
    d = discretize(model("wave", {"bc": "damped"}).system, 30)
    z0 = bump(d)
    dt = default_dt(d) / 4
    a = simulate(d, z0, 0.5, dt=dt)
    b = simulate(d, z0, 0.5, dt=dt, integrator="explicit_rk4")
    assert np.max(np.abs(a.energies - b.energies)) < 1e-4 * a.energies[0]


def test_csv(tmp_path):
    d = discretize(model("transport").system, 10)
    tr = simulate(d, bump(d), 0.2)
    text = tr.to_csv(tmp_path / "t.csv").read_text().splitlines()
    assert text[0] == "t,E,re_y0,im_y0"
    assert len(text) == len(tr.times) + 1


def test_bad_inputs():
    d = discretize(model("transport").system, 10)
    with pytest.raises(ValidationError):
        simulate(d, np.zeros(3), 1.0)
    with pytest.raises(ValidationError):
        simulate(d, np.zeros(d.m), 1.0, integrator="euler")
    with pytest.raises(ValidationError):
        simulate(d, np.zeros(d.m), 1.0, dt=-0.1)


class TestStability:
    def test_counterexample_a(self):
        v = stability_classify(A_EX, np.eye(2))
        assert v.kind == "exponentially_stable"
        assert v.abscissa == pytest.approx(-0.5, abs=1e-12)

    def test_counterexample_a_plus_g(self):
        v = stability_classify(A_EX + G_EX, np.eye(2))
        assert v.kind == "exponentially_stable"
        assert v.abscissa == pytest.approx(-1.0, abs=1e-12)

    def test_conservative_wave_marginal(self):
        v = stability_classify(discretize(model("wave").system, 20))
        assert v.kind == "marginally_stable"

    def test_unstable(self):
        assert stability_classify(np.array([[0.3]]), np.eye(1)).kind == "unstable"
