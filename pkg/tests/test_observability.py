import numpy as np
import pytest

from phsobs.discretization import discretize
from phsobs.exceptions import StabilityError, ValidationError
from phsobs.models import model
from phsobs.observability import (approx_observability_verdict, gramian_finite, gramian_infinite,
                                  kalman_rank, lyapunov_verify)
from phsobs.simulation import stability_classify

A = np.array([[-1.0, 1.0], [-1.0, 0.0]])
C = np.array([[np.sqrt(2.0), 0.0]])
G = np.array([[-1.0, -1.0], [-1.0, -1.0]])


class TestInfinite:
    def test_scalar(self):
        rep = gramian_infinite([[-1.0]], [[np.sqrt(2.0)]])
        assert rep.gramian[0, 0] == pytest.approx(1.0, abs=1e-14)
        assert rep.delta == pytest.approx(1.0) and rep.adm_m == pytest.approx(1.0)

    def test_counterexample_pair(self):
        rep = gramian_infinite(A, C)
        np.testing.assert_allclose(rep.gramian, np.eye(2), atol=1e-12)
        assert rep.delta == pytest.approx(1.0, abs=1e-12)
        assert rep.exact_observable and rep.approx_observable

    def test_zero_output(self):
        rep = gramian_infinite(A, np.zeros((1, 2)))
        np.testing.assert_array_equal(rep.gramian, 0)
        assert rep.delta == 0
        assert approx_observability_verdict(rep) is False

    def test_unstable_rejected(self):
        with pytest.raises(StabilityError):
            gramian_infinite([[0.1]], [[1.0]])

    def test_energy_metric_operator(self):
        # scaling the inner product by M leaves the certificate in standard coordinates
        M = np.diag([2.0, 0.5])
        rep = gramian_infinite(A, C, M)
        chk = lyapunov_verify(rep.gramian, A, C, M)
        assert chk.residual < 1e-12
        # operator form satisfies A* M L + M L A = -C* C
        Lop = rep.operator
        lhs = A.T @ M @ Lop + (M @ Lop) @ A + C.T @ C
        np.testing.assert_allclose(lhs, 0, atol=1e-12)


class TestFinite:
    def test_converges_to_infinite(self):
        omega = -stability_classify(A, np.eye(2)).abscissa
        inf = gramian_infinite(A, C).gramian
        fin = gramian_finite(A, C, t0=20 / omega).gramian
        assert np.linalg.norm(fin - inf, 2) / np.linalg.norm(inf, 2) <= 1e-3

    def test_monotone_in_horizon(self):
        prev = np.zeros((2, 2))
        for t0 in (0.1, 0.5, 1.0, 2.0, 5.0):
            L = gramian_finite(A, C, t0=t0).gramian
            assert np.linalg.eigvalsh(L - prev)[0] >= -1e-12
            prev = L

    def test_trapezoid_cross_check(self):
        a = gramian_finite(A, C, t0=1.5).gramian
        b = gramian_finite(A, C, t0=1.5, method="trapezoid", steps=4000).gramian
        np.testing.assert_allclose(a, b, atol=1e-6)

    def test_transport_short_horizon(self):
        d = discretize(model("transport").system, 100)
        rep = gramian_finite(d.A, d.C, d.M, t0=0.1)
        assert rep.delta <= 1e-3 * rep.adm_m
        assert not rep.exact_observable

    def test_bad_horizon(self):
        with pytest.raises(ValidationError):
            gramian_finite(A, C, t0=0.0)

    def test_unknown_method(self):
        with pytest.raises(ValidationError):
            gramian_finite(A, C, t0=1.0, method="simpson")


class TestLyapunovVerify:
    def test_identity_certificate(self):
        chk = lyapunov_verify(np.eye(2), A, C)
        assert chk.residual <= 1e-15 and chk.passed

    def test_scaled_half(self):
        # L = I/2: slack = (C*C)/2 >= 0, the equation itself fails
        eq = lyapunov_verify(0.5 * np.eye(2), A, C, mode="equation")
        ineq = lyapunov_verify(0.5 * np.eye(2), A, C, mode="inequality")
        assert not eq.passed
        assert ineq.passed
        np.testing.assert_allclose(ineq.slack_min, 0, atol=1e-14)

    def test_scaled_two_violates_inequality(self):
        # slack = C*C - 2 C*C is negative semidefinite
        chk = lyapunov_verify(2 * np.eye(2), A, C, mode="inequality")
        assert not chk.inequality_holds

    def test_zero_not_coercive(self):
        chk = lyapunov_verify(np.zeros((2, 2)), A, C, mode="inequality")
        assert chk.inequality_holds and not chk.coercive and not chk.passed

    def test_non_hermitian(self):
        with pytest.raises(ValidationError):
            lyapunov_verify(np.array([[1.0, 1.0], [0.0, 1.0]]), A, C)


class TestKalman:
    def test_counterexample_pairs(self):
        assert kalman_rank(A, C) == (2, True)
        assert kalman_rank(A + G, C) == (1, False)

    def test_full_output(self):
        rng = np.random.default_rng(0)
        Ar = rng.standard_normal((5, 5))
        assert kalman_rank(Ar, np.eye(5)) == (5, True)


class TestVerdict:
    def test_counterexample(self):
        assert approx_observability_verdict(gramian_infinite(A, C))
        assert not approx_observability_verdict(gramian_infinite(A + G, C))

    def test_finite_report_rejected(self):
        with pytest.raises(ValidationError):
            approx_observability_verdict(gramian_finite(A, C, t0=1.0))
