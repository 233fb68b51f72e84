"""Finite-dimensional realizations and pointwise diagonalization.

The state is sampled at the nodes of a uniform grid. Derivatives of the
effort ``w = H x`` use a summation-by-parts stencil whose norm is the
trapezoidal rule, so that the discrete power balance reproduces the
continuous one term by term. The ``n`` boundary constraints
``WB [w_N; w_0] = 0`` are eliminated by solving for ``n`` of the boundary
trace components; the generator is the Galerkin projection of the
unconstrained stencil onto the constrained subspace in the energy inner
product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .config import DEFAULT_TOL, Tolerances
from .core import PortHamiltonianSystem, _rel_smallest_sv
from .exceptions import BoundaryError, DiagonalizationError, ValidationError

__all__ = [
    "Grid", "DiscretizedSystem", "Diagonalization", "discretize",
    "smooth_diagonalization", "compute_q", "growth_constants", "SCHEMES",
]

SCHEMES = ("central_staggered", "upwind")


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``N`` cells on [0, 1]."""

    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4:
            raise ValidationError(f"grid needs N >= 4 cells, got N={self.N}")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N + 1)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights."""
        q = np.full(self.N + 1, self.h)
        q[[0, -1]] = 0.5 * self.h
        return q


def _sbp_central(K: int, h: float) -> np.ndarray:
    # D = diag(q)^{-1} Q with Q + Q^T = diag(-1, 0, ..., 0, 1)
    Q = 0.5 * (np.eye(K, k=1) - np.eye(K, k=-1))
    Q[0, 0] = -0.5
    Q[-1, -1] = 0.5
    q = np.full(K, h)
    q[[0, -1]] = 0.5 * h
    return Q / q[:, None]


def _one_sided(K: int, h: float):
    fwd = (np.eye(K, k=1) - np.eye(K)) / h
    fwd[-1, -2:] = [-1.0 / h, 1.0 / h]
    bwd = (np.eye(K) - np.eye(K, k=-1)) / h
    bwd[0, :2] = [-1.0 / h, 1.0 / h]
    return fwd, bwd


@dataclass(frozen=True, eq=False)
class DiscretizedSystem:
    """Energy-weighted realization ``(A, C, M)`` of a port-Hamiltonian system.

    The reduced coordinate vector is ``z = [t_free; x_1; ...; x_{N-1}]`` where
    ``t_free`` holds the boundary trace components left free by the boundary
    conditions. ``V`` maps ``z`` to the stacked node values of ``x``.
    """

    A: np.ndarray
    C: np.ndarray
    M: np.ndarray
    grid: Grid
    parent: PortHamiltonianSystem
    scheme: str
    V: np.ndarray = field(repr=False)
    trace_map: np.ndarray = field(repr=False)
    M_full: np.ndarray = field(repr=False)
    F_full: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.parent.n

    def to_grid(self, z) -> np.ndarray:
        """Node values of x, shape ``(N+1, n)`` (or ``(..., N+1, n)`` for stacked z)."""
        z = np.asarray(z)
        x = z @ self.V.T
        return x.reshape(z.shape[:-1] + (self.grid.N + 1, self.n))

    def traces(self, z):
        """``((H x)(1), (H x)(0))`` for the reduced state ``z``."""
        t = self.trace_map @ np.asarray(z)[: self.n]
        return t[: self.n], t[self.n:]

    def project(self, x_grid) -> np.ndarray:
        """Energy-orthogonal projection of node values onto the constrained subspace."""
        x = np.asarray(x_grid, dtype=complex).reshape(-1)
        return np.linalg.solve(self.M, self.V.conj().T @ (self.M_full @ x))

    def energy(self, z) -> float:
        z = np.asarray(z)
        return float(np.real(z.conj() @ self.M @ z))

    def output(self, z) -> np.ndarray:
        return self.C @ np.asarray(z)


def discretize(sys: PortHamiltonianSystem, N: int, scheme: str = "central_staggered",
               tol: Tolerances | None = None) -> DiscretizedSystem:
    """Build ``(A_h, C_h, M_h)`` on a uniform grid with ``N`` cells.

    Parameters
    ----------
    sys : PortHamiltonianSystem
    N : int
        Number of cells, at least 4.
    scheme : {"central_staggered", "upwind"}
        ``central_staggered`` is the energy-exact summation-by-parts stencil;
        ``upwind`` splits P1 into its positive and negative spectral parts and
        differences each against its characteristic direction.

    Raises
    ------
    BoundaryError
        If no choice of ``n`` trace components is determined by ``WB``.
    """
    tol = tol or sys.tol
    grid = Grid(N)
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    n = sys.n
    K = N + 1
    z = grid.nodes
    Hk = sys.H(z)
    q = grid.weights

    Hblk = sla.block_diag(*Hk)
    M_full = 0.5 * sla.block_diag(*(qk * H for qk, H in zip(q, Hk)))
    if scheme == "central_staggered":
        D = _sbp_central(K, grid.h)
        F = (np.kron(D, sys.P1) + np.kron(np.eye(K), sys.G0)) @ Hblk
    else:
        lam, U = np.linalg.eigh(sys.P1)
        Pp = (U * np.maximum(lam, 0.0)) @ U.conj().T
        Pm = (U * np.minimum(lam, 0.0)) @ U.conj().T
        fwd, bwd = _one_sided(K, grid.h)
        F = (np.kron(fwd, Pp) + np.kron(bwd, Pm) + np.kron(np.eye(K), sys.G0)) @ Hblk

    # solve WB t = 0 for n of the 2n trace components, t = [w_N; w_0]
    _, _, piv = sla.qr(sys.WB, pivoting=True)
    dep, free = np.sort(piv[:n]), np.sort(piv[n:])
    Wdep = sys.WB[:, dep]
    if _rel_smallest_sv(Wdep) < tol.eps_inv:
        raise BoundaryError("W_B does not determine inflow traces")
    T = np.zeros((2 * n, n), dtype=complex)
    T[free, np.arange(n)] = 1.0
    T[dep] = -np.linalg.solve(Wdep, sys.WB[:, free])

    m = n * N
    V = np.zeros((n * K, m), dtype=complex)
    Hinv_N = np.linalg.inv(Hk[-1])
    Hinv_0 = np.linalg.inv(Hk[0])
    V[(K - 1) * n:, :n] = Hinv_N @ T[:n]
    V[:n, :n] = Hinv_0 @ T[n:]
    V[n:(K - 1) * n, n:] = np.eye(n * (N - 1))

    M = V.conj().T @ M_full @ V
    M = 0.5 * (M + M.conj().T)
    A = np.linalg.solve(M, V.conj().T @ M_full @ F @ V)
    C = np.zeros((n, m), dtype=complex)
    C[:, :n] = sys.WC @ T
    for arr in (A, C, M, V, T, M_full, F):
        arr.setflags(write=False)
    return DiscretizedSystem(A=A, C=C, M=M, grid=grid, parent=sys, scheme=scheme,
                             V=V, trace_map=T, M_full=M_full, F_full=F)


# --- pointwise diagonalization of P1 H ---------------------------------------

@dataclass(frozen=True, eq=False)
class Diagonalization:
    """Samples of ``P1 H(z) = S^{-1}(z) Delta(z) S(z)`` on a grid.

    ``Delta`` holds the (real, ascending) diagonal of Delta at each node and
    ``alpha = 1 / Delta``. ``L_S`` bounds ``|S(z_{k+1}) - S(z_k)| / h``.
    """

    grid: Grid
    S: np.ndarray
    S_inv: np.ndarray
    Delta: np.ndarray
    alpha: np.ndarray
    L_S: float
    reconstruction_error: float
    S_inv_star: np.ndarray = field(repr=False)


def _hermitian_sqrt(H: np.ndarray):
    e, U = np.linalg.eigh(H)
    r = np.sqrt(e)
    return (U * r) @ U.conj().T, (U / r) @ U.conj().T


def smooth_diagonalization(sys: PortHamiltonianSystem, grid: Grid | int,
                           tol: Tolerances | None = None) -> Diagonalization:
    """Continuous pointwise diagonalization of ``P1 H``.

    Uses the congruent Hermitian matrix ``H^{1/2} P1 H^{1/2} = U Delta U*`` so
    that ``S = U* H^{1/2}``. Eigenvalues are sorted ascending, eigenvector
    phases are aligned with the previous node, and an assignment on the
    eigenvector overlaps confirms that sorting did not swap branches.

    Raises
    ------
    DiagonalizationError
        If two eigenvalues collide (within ``eps_Delta``) or branches swap
        between neighbouring nodes.
    """
    tol = tol or sys.tol
    grid = grid if isinstance(grid, Grid) else Grid(grid)
    z = grid.nodes
    K = z.size
    n = sys.n
    Hk = sys.H(z)
    S = np.empty((K, n, n), dtype=complex)
    S_inv = np.empty_like(S)
    S_inv_star = np.empty_like(S)
    Delta = np.empty((K, n))
    U_prev = None
    recon = 0.0
    for k in range(K):
        Hh, Hmh = _hermitian_sqrt(Hk[k])
        Kmat = Hh @ sys.P1 @ Hh
        lam, U = np.linalg.eigh(0.5 * (Kmat + Kmat.conj().T))
        scale = max(1.0, float(np.max(np.abs(lam))))
        if np.min(np.abs(lam)) < tol.eps_Delta * scale:
            raise DiagonalizationError(f"P1 H is singular at z={z[k]:.6g}")
        if n > 1 and np.min(np.diff(lam)) < tol.eps_Delta * scale:
            raise DiagonalizationError(
                f"non-smooth diagonalization: eigenvalues of P1 H collide at z={z[k]:.6g}")
        if U_prev is None:
            idx = np.argmax(np.abs(U), axis=0)
            ph = U[idx, np.arange(n)]
        else:
            overlap = U_prev.conj().T @ U
            rows, cols = linear_sum_assignment(-np.abs(overlap))
            if not np.array_equal(cols[np.argsort(rows)], np.arange(n)):
                raise DiagonalizationError(
                    f"non-smooth diagonalization: eigenvalue branches cross near z={z[k]:.6g}")
            ph = np.diag(overlap)
        U = U * (np.conj(ph) / np.abs(ph))
        U_prev = U
        S[k] = U.conj().T @ Hh
        S_inv[k] = Hmh @ U
        S_inv_star[k] = U.conj().T @ Hmh
        Delta[k] = lam
        P1H = sys.P1 @ Hk[k]
        err = np.linalg.norm(P1H - S_inv[k] @ np.diag(lam) @ S[k], 2)
        recon = max(recon, float(err / max(1.0, np.linalg.norm(P1H, 2))))
    if recon > tol.tol_diag:
        raise DiagonalizationError(f"reconstruction error {recon:.3e} exceeds tol_diag")
    jumps = np.linalg.norm(np.diff(S, axis=0), ord=2, axis=(1, 2)) / grid.h
    return Diagonalization(grid=grid, S=S, S_inv=S_inv, Delta=Delta, alpha=1.0 / Delta,
                           L_S=float(np.max(jumps)), reconstruction_error=recon,
                           S_inv_star=S_inv_star)


def compute_q(diag: Diagonalization, sys: PortHamiltonianSystem) -> np.ndarray:
    """Samples of ``Q = -Delta^{-1} S^{-*} H G0 S* + (S^{-*})' S*``.

    The derivative of ``S^{-*}`` is taken by centered differences on the
    phase-aligned samples (second-order one-sided at the ends).
    """
    z = diag.grid.nodes
    Hk = sys.H(z)
    S_star = np.conj(np.swapaxes(diag.S, -1, -2))
    term1 = -diag.alpha[:, :, None] * (diag.S_inv_star @ Hk @ sys.G0 @ S_star)
    dSis = np.gradient(diag.S_inv_star, diag.grid.h, axis=0, edge_order=2)
    return term1 + dSis @ S_star


def growth_constants(diag: Diagonalization, Q: np.ndarray | None = None,
                     sys: PortHamiltonianSystem | None = None):
    """Constants ``(c0, c1)`` with ``2 max |r Delta^{-1} + Q_w| <= |r| c0 + c1``."""
    if Q is None:
        if sys is None:
            raise ValidationError("growth_constants needs Q or the system")
        Q = compute_q(diag, sys)
    c0 = 2.0 * float(np.max(np.abs(diag.alpha)))
    c1 = 2.0 * float(np.max(np.linalg.norm(Q, ord=2, axis=(1, 2))))
    return c0, c1
