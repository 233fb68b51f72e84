"""Numerical tolerances shared across the workbench."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    """Default thresholds; every field can be overridden from a run config."""

    eps_inv: float = 1e-10      # relative smallest singular value for invertibility
    tol_herm: float = 1e-12     # Hermitian defect
    eps_H: float = 1e-8         # lower bound on the Hamiltonian's smallest eigenvalue
    tol_diag: float = 1e-9      # diagonalization reconstruction
    eps_Delta: float = 1e-8     # eigenvalue separation / magnitude of P1 H
    eps_stab: float = 1e-8      # spectral abscissa margin for exponential stability
    eps_obs_rel: float = 1e-6   # exact observability, relative to adm_m
    eps_approx: float = 1e-9    # approximate observability, relative to adm_m
    eps_HT: float = 1e-8        # Hautus mesh infimum
    tol_ode: float = 1e-8       # adaptive ODE local error
    eig_cap: int = 4000         # largest dense eigenproblem we attempt

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict | None) -> "Tolerances":
        if not data:
            return cls()
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown tolerance keys: {sorted(unknown)}")
        return replace(cls(), **data)


DEFAULT_TOL = Tolerances()
