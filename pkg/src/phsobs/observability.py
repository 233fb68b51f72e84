"""Admissibility and observability constants, Gramians and Lyapunov certificates.

All computations happen in standard coordinates: for a generator ``A`` on a
space with Gram matrix ``M = R* R`` we work with ``Ab = R A R^{-1}`` and
``Cb = C R^{-1}``, so that every norm is Euclidean. Gramians are returned in
these coordinates; ``report.operator`` maps back to the original ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ._linalg import hermitian, spectral_abscissa, standard_coords
from .config import DEFAULT_TOL, Tolerances
from .exceptions import SolverError, StabilityError, ValidationError

__all__ = [
    "ObservabilityReport", "LyapunovCheck", "gramian_infinite", "gramian_finite",
    "lyapunov_verify", "kalman_rank", "approx_observability_verdict",
]

_STABILITY_NOTE = ("discretized verdict: Hurwitz generator stands in for strong stability "
                   "of the semigroup")


@dataclass(frozen=True, eq=False)
class ObservabilityReport:
    """Gramian ``L`` with its extreme eigenvalues.

    ``delta`` is the observability (coercivity) constant and ``adm_m`` the
    admissibility constant, both relative to the energy norm.
    """

    gramian: np.ndarray
    delta: float
    adm_m: float
    lyapunov_residual: float
    horizon: float
    exact_observable: bool
    approx_observable: bool
    R: np.ndarray = field(repr=False)
    notes: tuple = ()

    @property
    def operator(self) -> np.ndarray:
        """L as an operator in the original coordinates, ``R^{-1} Lb R``."""
        return np.linalg.solve(self.R, self.gramian @ self.R)

    def to_dict(self, include_matrices: bool = False) -> dict:
        out = {
            "horizon": "inf" if np.isinf(self.horizon) else self.horizon,
            "delta": self.delta,
            "adm_m": self.adm_m,
            "residuals": {"lyapunov": self.lyapunov_residual},
            "verdicts": {"exact_observable": self.exact_observable,
                         "approx_observable": self.approx_observable},
            "notes": list(self.notes),
        }
        if include_matrices:
            out["gramian"] = {"re": self.gramian.real.tolist(), "im": self.gramian.imag.tolist()}
        return out


def _lyap_residual(Ab, Cb, L) -> float:
    CC = Cb.conj().T @ Cb
    res = Ab.conj().T @ L + L @ Ab + CC
    scale = np.linalg.norm(CC, 2)
    return float(np.linalg.norm(res, 2) / (scale if scale > 0 else 1.0))


def _report(L, Ab, Cb, R, horizon, tol: Tolerances, notes=()) -> ObservabilityReport:
    L = hermitian(L)
    ev = np.linalg.eigvalsh(L)
    delta, adm = float(ev[0]), float(ev[-1])
    residual = _lyap_residual(Ab, Cb, L) if np.isinf(horizon) else float("nan")
    exact = adm > 0 and delta >= tol.eps_obs_rel * adm
    approx = adm > 0 and delta > tol.eps_approx * adm
    return ObservabilityReport(gramian=L, delta=delta, adm_m=adm, lyapunov_residual=residual,
                               horizon=horizon, exact_observable=bool(exact),
                               approx_observable=bool(approx), R=R, notes=tuple(notes))


def gramian_infinite(A, C, M=None, tol: Tolerances = DEFAULT_TOL) -> ObservabilityReport:
    """Infinite-time Gramian from ``Ab* L + L Ab = -Cb* Cb``.

    Raises
    ------
    StabilityError
        If ``A`` is not exponentially stable (spectral abscissa above
        ``-eps_stab``); the infinite-time Gramian is then undefined.
    """
    Ab, Cb, R = standard_coords(A, C, M)
    if Ab.shape[0] > tol.eig_cap:
        raise SolverError(f"state dimension {Ab.shape[0]} exceeds eig_cap")
    absc = spectral_abscissa(Ab)
    if absc > -tol.eps_stab:
        raise StabilityError(
            f"infinite-time Gramian undefined: spectral abscissa {absc:.3e} is not negative")
    CC = Cb.conj().T @ Cb
    try:
        L = sla.solve_continuous_lyapunov(Ab.conj().T, -CC)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"Lyapunov solver breakdown: {exc}") from exc
    return _report(L, Ab, Cb, R, np.inf, tol, notes=(_STABILITY_NOTE,))


def _finite_doubling(Ab, CC, t0):
    # Van Loan block exponential on a short base step, then L_{2t} = L_t + E_t* L_t E_t
    m = Ab.shape[0]
    k = int(np.ceil(np.log2(max(np.linalg.norm(Ab, 1) * t0, 1.0))))
    tb = t0 / 2**k
    Z = np.block([[-Ab.conj().T, CC], [np.zeros((m, m)), Ab]])
    F = sla.expm(Z * tb)
    E = F[m:, m:]
    L = E.conj().T @ F[:m, m:]
    for _ in range(k):
        L = L + E.conj().T @ L @ E
        E = E @ E
    return L


def _finite_trapezoid(Ab, CC, t0, steps):
    dt = t0 / steps
    step = sla.expm(Ab * dt)
    X = np.eye(Ab.shape[0], dtype=complex)
    L = 0.5 * CC
    for k in range(1, steps + 1):
        X = step @ X
        Y = X.conj().T @ CC @ X
        L = L + (0.5 * Y if k == steps else Y)
    return L * dt


def gramian_finite(A, C, M=None, t0: float = 1.0, steps: int | None = None,
                   method: str = "doubling", tol: Tolerances = DEFAULT_TOL) -> ObservabilityReport:
    """Finite-horizon Gramian ``L_t0 = int_0^t0 e^{Ab* t} Cb* Cb e^{Ab t} dt``.

    Parameters
    ----------
    method : {"doubling", "trapezoid"}
        ``doubling`` evaluates the integral exactly (up to the matrix
        exponential) by a Van Loan block exponential on a short step followed
        by repeated doubling of the horizon. ``trapezoid`` sums ``steps``
        snapshots of ``e^{Ab t}`` with the trapezoidal rule.
    """
    if not t0 > 0:
        raise ValidationError("horizon t0 must be positive")
    Ab, Cb, R = standard_coords(A, C, M)
    CC = Cb.conj().T @ Cb
    if method == "doubling":
        L = _finite_doubling(Ab, CC, float(t0))
    elif method == "trapezoid":
        if steps is None:
            steps = max(64, int(np.ceil(8 * np.linalg.norm(Ab, 2) * t0)))
        L = _finite_trapezoid(Ab, CC, float(t0), int(steps))
    else:
        raise ValidationError(f"unknown Gramian method {method!r}")
    return _report(L, Ab, Cb, R, float(t0), tol,
                   notes=(f"discretized verdict: finite-horizon Gramian ({method})",))


@dataclass(frozen=True)
class LyapunovCheck:
    mode: str
    residual: float      # normalized equation residual
    slack_min: float     # smallest eigenvalue of Ab* L + L Ab + Cb* Cb
    coercivity: float    # smallest eigenvalue of L
    equation_holds: bool
    inequality_holds: bool
    coercive: bool

    @property
    def passed(self) -> bool:
        holds = self.equation_holds if self.mode == "equation" else self.inequality_holds
        return holds and self.coercive


def lyapunov_verify(L, A, C, M=None, mode: str = "equation", delta: float | None = None,
                    atol: float = 1e-10) -> LyapunovCheck:
    """Check a Lyapunov certificate ``L`` (given in standard coordinates).

    ``equation``: ``<Ax, Lx> + <Lx, Ax> = -|Cx|^2``.
    ``inequality``: ``<Ax, Lx> + <Lx, Ax> >= -|Cx|^2``, i.e. the slack
    ``Ab* L + L Ab + Cb* Cb`` is positive semidefinite.
    Coercivity requires ``lambda_min(L) >= delta`` (``> 0`` when ``delta`` is None).
    """
    if mode not in ("equation", "inequality"):
        raise ValidationError(f"unknown mode {mode!r}")
    L = np.atleast_2d(np.asarray(L, dtype=complex))
    scale = max(1.0, float(np.max(np.abs(L))))
    if np.max(np.abs(L - L.conj().T)) > 1e-12 * scale:
        raise ValidationError("Lyapunov certificate must be Hermitian")
    Ab, Cb, _ = standard_coords(A, C, M)
    CC = Cb.conj().T @ Cb
    slack = hermitian(Ab.conj().T @ L + L @ Ab + CC)
    residual = _lyap_residual(Ab, Cb, L)
    slack_min = float(np.linalg.eigvalsh(slack)[0])
    coer = float(np.linalg.eigvalsh(hermitian(L))[0])
    coercive = coer >= delta if delta is not None else coer > atol
    tol_abs = atol * max(1.0, float(np.linalg.norm(CC, 2)))
    return LyapunovCheck(mode=mode, residual=residual, slack_min=slack_min, coercivity=coer,
                         equation_holds=residual <= atol, inequality_holds=slack_min >= -tol_abs,
                         coercive=bool(coercive))


def kalman_rank(A, C, rtol: float = 1e-9):
    """Rank of ``[C; CA; ...; CA^{m-1}]`` by SVD with a relative threshold."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    C = np.atleast_2d(np.asarray(C, dtype=complex))
    m = A.shape[0]
    blocks = [C]
    for _ in range(m - 1):
        blocks.append(blocks[-1] @ A)
    sv = np.linalg.svd(np.vstack(blocks), compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0, False
    rank = int(np.sum(sv > rtol * sv[0]))
    return rank, rank == m


def approx_observability_verdict(report: ObservabilityReport,
                                 tol: Tolerances = DEFAULT_TOL) -> bool:
    """True iff the Gramian's smallest eigenvalue is positive relative to its largest."""
    if not np.isinf(report.horizon):
        raise ValidationError("approximate observability needs an infinite-horizon report")
    return bool(report.adm_m > 0 and report.delta > tol.eps_approx * report.adm_m)
