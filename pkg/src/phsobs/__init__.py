"""Observability workbench for linear first-order port-Hamiltonian systems."""

__version__ = "0.1.0"

from .config import Tolerances
from .core import (BoundaryAlgebra, MatrixField, PortHamiltonianSystem, boundary_effort_flow,
                   build_boundary_algebra, build_r0, power_balance_terms, split_g0)
from .discretization import (Diagonalization, DiscretizedSystem, Grid, compute_q, discretize,
                             growth_constants, smooth_diagonalization)
from .hautus import HautusScan, hautus_scan, hautus_value, shifted_halfplane_bound, theorem2_pipeline
from .models import ModelSpec, model
from .observability import (ObservabilityReport, approx_observability_verdict, gramian_finite,
                            gramian_infinite, kalman_rank, lyapunov_verify)
from .resolvent import (FundamentalSolution, fundamental_solution, phi_omega, resolvent_solve,
                        solve_inhomogeneous, verify_growth_bounds)
from .simulation import Trajectory, energy_balance_residual, simulate, stability_classify
