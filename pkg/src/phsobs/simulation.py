"""Time integration, energy accounting and stability classification."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from ._linalg import standard_coords
from .config import DEFAULT_TOL, Tolerances
from .core import PortHamiltonianSystem, power_balance_terms
from .discretization import DiscretizedSystem
from .exceptions import SolverError, ValidationError

__all__ = ["Trajectory", "simulate", "energy_balance_residual", "stability_classify",
           "StabilityVerdict", "default_dt"]


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    energies: np.ndarray
    dsys: DiscretizedSystem = field(repr=False)
    integrator: str = "trapezoidal"

    def __post_init__(self):
        k = len(self.times)
        if not (len(self.states) == len(self.outputs) == len(self.energies) == k):
            raise ValidationError("trajectory arrays must have equal length")

    def to_csv(self, path, include_states: bool = False) -> Path:
        """Columns ``t, E, re_y0, im_y0, ...`` (and ``re_z*``/``im_z*`` with states)."""
        path = Path(path)
        p = self.outputs.shape[1]
        header = ["t", "E"]
        for j in range(p):
            header += [f"re_y{j}", f"im_y{j}"]
        if include_states:
            for j in range(self.states.shape[1]):
                header += [f"re_z{j}", f"im_z{j}"]
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k, t in enumerate(self.times):
                row = [repr(float(t)), repr(float(self.energies[k]))]
                for y in self.outputs[k]:
                    row += [repr(float(y.real)), repr(float(y.imag))]
                if include_states:
                    for v in self.states[k]:
                        row += [repr(float(v.real)), repr(float(v.imag))]
                writer.writerow(row)
        return path


def default_dt(dsys: DiscretizedSystem) -> float:
    """CFL-like step ``h / (2 max |Delta|)`` from the fastest characteristic speed."""
    sys = dsys.parent
    z = dsys.grid.nodes
    speeds = [np.max(np.abs(np.linalg.eigvals(sys.P1 @ H))) for H in sys.H(z)]
    return dsys.grid.h / (2.0 * float(max(speeds)))


def simulate(dsys: DiscretizedSystem, x0, t_final: float, dt: float | None = None,
             integrator: str = "trapezoidal") -> Trajectory:
    """Integrate ``dz/dt = A_h z`` from ``z(0) = x0``.

    ``trapezoidal`` is the implicit midpoint rule, which for a linear system
    reproduces the discrete energy identity exactly; ``explicit_rk4`` is the
    classical fourth-order Runge-Kutta method.
    """
    dt = default_dt(dsys) if dt is None else float(dt)
    if not dt > 0:
        raise ValidationError("dt must be positive")
    if not t_final >= dt:
        raise ValidationError("t_final must be at least dt")
    z = np.asarray(x0, dtype=complex).reshape(-1)
    if z.shape != (dsys.m,):
        raise ValidationError(f"initial state must have length {dsys.m}, got {z.shape[0]}")
    steps = int(round(t_final / dt))
    A = dsys.A
    eye = np.eye(dsys.m)
    if integrator == "trapezoidal":
        lu = sla.lu_factor(eye - 0.5 * dt * A, check_finite=True)
        if np.min(np.abs(np.diag(lu[0]))) < 1e-14 * np.max(np.abs(np.diag(lu[0]))):
            raise SolverError("I - dt/2 A is singular; change the step size")
        B = eye + 0.5 * dt * A

        def step(v):
            return sla.lu_solve(lu, B @ v)
    elif integrator == "explicit_rk4":
        def step(v):
            k1 = A @ v
            k2 = A @ (v + 0.5 * dt * k1)
            k3 = A @ (v + 0.5 * dt * k2)
            k4 = A @ (v + dt * k3)
            return v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    else:
        raise ValidationError(f"unknown integrator {integrator!r}")
    states = np.empty((steps + 1, dsys.m), dtype=complex)
    states[0] = z
    for k in range(steps):
        states[k + 1] = step(states[k])
    times = dt * np.arange(steps + 1)
    outputs = states @ dsys.C.T
    energies = np.real(np.einsum("ki,ij,kj->k", states.conj(), dsys.M, states))
    return Trajectory(times=times, states=states, outputs=outputs, energies=energies,
                      dsys=dsys, integrator=integrator)


def energy_balance_residual(traj: Trajectory, sys: PortHamiltonianSystem | None = None,
                            rule: str = "simpson"):
    """Largest mismatch between ``dE/dt`` and the boundary plus dissipation terms.

    ``E`` is the squared energy norm, so the continuous identity reads
    ``dE/dt = boundary + dissipation``. Both terms are evaluated at the
    midpoint state of each step with ``power_balance_terms``.

    Returns
    -------
    residual : float
    index : int
        Step index where the maximum occurs.
    """
    sys = sys or traj.dsys.parent
    dsys = traj.dsys
    dE = np.diff(traj.energies) / np.diff(traj.times)
    mid = 0.5 * (traj.states[1:] + traj.states[:-1])
    res = np.empty(len(dE))
    for k, z in enumerate(mid):
        b, d = power_balance_terms(sys, dsys.to_grid(z), traces=dsys.traces(z),
                                   zeta=dsys.grid.nodes, rule=rule)
        res[k] = abs(dE[k] - (b + d))
    idx = int(np.argmax(res))
    return float(res[idx]), idx


@dataclass(frozen=True)
class StabilityVerdict:
    kind: str                  # exponentially_stable | marginally_stable | unstable
    abscissa: float
    omega_hat: float | None = None
    note: str = "discretized verdict"

    @property
    def exponentially_stable(self) -> bool:
        return self.kind == "exponentially_stable"


def stability_classify(dsys_or_A, M=None, tol: Tolerances = DEFAULT_TOL) -> StabilityVerdict:
    """Classify by the spectral abscissa of the generator in the energy inner product."""
    if isinstance(dsys_or_A, DiscretizedSystem):
        A, M = dsys_or_A.A, dsys_or_A.M
    else:
        A = np.atleast_2d(np.asarray(dsys_or_A, dtype=complex))
    if A.shape[0] > tol.eig_cap:
        raise SolverError(f"state dimension {A.shape[0]} exceeds eig_cap={tol.eig_cap}")
    Ab, _, _ = standard_coords(A, np.zeros((1, A.shape[0])), M)
    try:
        ev = np.linalg.eigvals(Ab)
    except np.linalg.LinAlgError as exc:
        raise SolverError("eigenvalue solver did not converge") from exc
    absc = float(np.max(ev.real))
    if absc <= -tol.eps_stab:
        return StabilityVerdict("exponentially_stable", absc, omega_hat=-absc)
    if absc <= tol.eps_stab:
        return StabilityVerdict("marginally_stable", absc)
    return StabilityVerdict("unstable", absc)
