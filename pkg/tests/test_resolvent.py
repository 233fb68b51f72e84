import numpy as np
import pytest

from phsobs.core import PortHamiltonianSystem
from phsobs.discretization import Grid, compute_q, discretize, growth_constants, smooth_diagonalization
from phsobs.exceptions import SolverError, ValidationError
from phsobs.models import model
from phsobs.resolvent import (fundamental_solution, phi_omega, resolvent_solve, solve_inhomogeneous,
                              verify_growth_bounds)


def transport(g=0.0):
    return model("transport", {"g": g}).system


def varying_wave():
    return model("wave", {"bc": "damped", "T": [1.0, 0.5], "inv_rho": [1.0, 0.0, 0.3],
                          "G0": [[0.0, 1.0], [-1.0, -0.5]]}).system


class TestFundamental:
    @pytest.mark.parametrize("s,g", [(-1.0, 0.0), (-1 + 2j, 0.3), (0.5 - 3j, -0.7)])
    def test_scalar_closed_form(self, s, g):
        fs = fundamental_solution(transport(g), s, 20)
        z = fs.grid.nodes
        for j in range(z.size):
            for i in range(j + 1):
                ref = np.exp((s - g) * (z[j] - z[i]))
                assert abs(fs.psi(j, i)[0, 0] - ref) <= 1e-8

    def test_unit_interval_value(self):
        fs = fundamental_solution(transport(), -1.0, 10)
        assert fs.psi(10, 0)[0, 0].real == pytest.approx(0.367879441171, abs=1e-8)

    def test_zero_frequency_identity(self):
        sys = model("wave", {"rho": 2.0, "T": 3.0}).system
        fs = fundamental_solution(sys, 0.0, 10)
        for j in range(11):
            np.testing.assert_allclose(fs.psi(j, 0), np.eye(2), atol=1e-10)

    def test_diagonal_exact(self):
        fs = fundamental_solution(varying_wave(), -1 + 4j, 10)
        for j in range(11):
            assert np.array_equal(fs.psi(j, j), np.eye(2))

    def test_cocycle(self):
        fs = fundamental_solution(varying_wave(), -2 + 10j, 20)
        assert fs.cocycle_defect(0) <= 1e-7

    def test_lower_triangle_only(self):
        fs = fundamental_solution(transport(), -1.0, 10)
        with pytest.raises(ValidationError):
            fs.psi(2, 5)

    def test_csv(self, tmp_path):
        fs = fundamental_solution(transport(), -1.0, 4)
        rows = fs.to_csv(tmp_path / "f.csv").read_text().splitlines()
        assert rows[0] == "zeta,tau,row,col,re,im" and len(rows) == 1 + 15


class TestInhomogeneous:
    def test_homogeneous_reduction(self):
        sys = varying_wave()
        fs = fundamental_solution(sys, -1 + 1j, 20)
        x0 = np.array([1.0, -2.0j])
        x = solve_inhomogeneous(sys, fs.s, x0, np.zeros((21, 2)), fs=fs)
        for j in range(21):
            np.testing.assert_allclose(x[j], fs.psi(j, 0) @ x0, atol=1e-14)

    def test_constant_forcing(self):
        # s = 0: -x' = 1 with x(0) = 0, so x = -z
        x = solve_inhomogeneous(transport(), 0.0, [0.0], np.ones(21), grid=20)
        np.testing.assert_allclose(x[:, 0], -np.linspace(0, 1, 21), atol=1e-10)

    def test_manufactured(self):
        sys = varying_wave()
        s = -0.7 + 1.3j
        N = 100
        z = np.linspace(0, 1, N + 1)
        xh = np.stack([np.sin(2 * z) * np.exp(z), z**2 * np.cos(3 * z)], axis=1)
        dxh = np.stack([(2 * np.cos(2 * z) + np.sin(2 * z)) * np.exp(z),
                        2 * z * np.cos(3 * z) - 3 * z**2 * np.sin(3 * z)], axis=1)
        H, dH = sys.H(z), sys.H.derivative()(z)
        w = np.einsum("kab,kb->ka", H, xh)
        dw = np.einsum("kab,kb->ka", dH, xh) + np.einsum("kab,kb->ka", H, dxh)
        f = s * xh - (dw @ sys.P1.T + w @ sys.G0.T)
        x = solve_inhomogeneous(sys, s, [0.0, 0.0], f, grid=N)
        assert np.max(np.abs(x - xh)) <= 1e-6

    def test_needs_grid(self):
        with pytest.raises(ValidationError):
            solve_inhomogeneous(transport(), -1.0, [0.0], np.ones(5))


class TestResolventSolve:
    def test_zero_forcing(self):
        r = resolvent_solve(varying_wave(), -1 + 2j, np.zeros((41, 2)), N=40)
        assert np.all(r.x == 0) and np.all(r.y == 0)

    def test_transport_left(self):
        # -x - x' = 1, x(1) = 0
        z = np.linspace(0, 1, 101)
        r = resolvent_solve(transport(), -1.0, np.ones(101), N=100)
        np.testing.assert_allclose(r.x[:, 0], np.exp(1 - z) - 1, atol=1e-6)
        assert r.y[0] == pytest.approx(np.e - 1, abs=1e-6)

    def test_transport_right(self):
        # x - x' = 1, x(1) = 0
        z = np.linspace(0, 1, 101)
        r = resolvent_solve(transport(), 1.0, np.ones(101), N=100)
        np.testing.assert_allclose(r.x[:, 0], 1 - np.exp(-(1 - z)), atol=1e-6)

    def test_discrete_output_converges(self):
        errs = []
        for N in (50, 100):
            r = resolvent_solve(transport(), -1.0, np.ones(N + 1), N=N)
            errs.append(abs(r.y_discrete[0] - (np.e - 1)))
        assert errs[0] / errs[1] > 3.0

    def test_at_discrete_eigenvalue(self):
        sys = model("wave", {"bc": "damped"}).system
        ev = np.linalg.eigvals(discretize(sys, 20).A)
        lam = ev[np.argmax(ev.real)]
        with pytest.raises(SolverError):
            resolvent_solve(sys, lam, np.ones((21, 2)), N=20)


class TestPhi:
    def test_zero_frequency(self):
        dg = smooth_diagonalization(varying_wave(), 20)
        np.testing.assert_array_equal(phi_omega(dg, 0.0), 1.0)

    def test_scalar_pi(self):
        dg = smooth_diagonalization(transport(), 10)
        assert phi_omega(dg, np.pi)[-1, 0] == pytest.approx(-1.0, abs=1e-14)

    def test_unimodular(self):
        dg = smooth_diagonalization(varying_wave(), 20)
        for w in np.random.default_rng(0).uniform(-200, 200, 10):
            np.testing.assert_allclose(np.abs(phi_omega(dg, w)), 1.0, atol=1e-14)


class TestGrowthBounds:
    def test_scalar(self):
        fs = fundamental_solution(transport(), -1.5 + 2j, 20)
        fs, rep = verify_growth_bounds(fs, 1.0, 0)
        assert rep.M == pytest.approx(1.0, abs=1e-8)
        assert rep.M_tilde == pytest.approx(1.0, abs=1e-8)
        assert rep.violations == 0
        assert fs.bounds is not None

    def test_isometric(self):
        sys = PortHamiltonianSystem(P1=np.eye(2), G0=[[0.0, 1.0], [-1.0, 0.0]], H=np.eye(2),
                                    WB=np.hstack([np.eye(2), np.zeros((2, 2))]),
                                    WC=np.hstack([np.zeros((2, 2)), np.eye(2)]))
        fs = fundamental_solution(sys, 3j, 20)
        rng = np.random.default_rng(1)
        for _ in range(20):
            v = rng.standard_normal(2)
            j, i = sorted(rng.integers(0, 21, 2))[::-1]
            assert np.linalg.norm(fs.psi(j, i) @ v) == pytest.approx(np.linalg.norm(v), rel=1e-8)
        _, rep = verify_growth_bounds(fs, 1.0, 0)
        assert rep.M == pytest.approx(1.0, abs=1e-8) and rep.M_tilde == pytest.approx(1.0, abs=1e-8)

    def test_wave_gronwall(self):
        sys = varying_wave()
        g = Grid(20)
        dg = smooth_diagonalization(sys, g)
        c0, c1 = growth_constants(dg, compute_q(dg, sys))
        fs = fundamental_solution(sys, -2.0, g)
        _, rep = verify_growth_bounds(fs, c0, 0, diag=dg, c1=c1)
        assert rep.M <= np.exp(c1 / 2)
        assert rep.violations == 0 and rep.gronwall_violations == 0
