"""Continuous port-Hamiltonian model and its exact boundary algebra.

The systems handled here are

    dx/dt = (P1 d/dz + G0)(H x),         z in [0, 1]
    0     = WB [(H x)(1); (H x)(0)]
    y     = WC [(H x)(1); (H x)(0)]

with the energy inner product <u, v>_X = 1/2 int u* H v dz.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import simpson, trapezoid

from .config import DEFAULT_TOL, Tolerances
from .exceptions import BoundaryError, ValidationError

__all__ = [
    "MatrixField", "PortHamiltonianSystem", "BoundaryAlgebra", "sigma",
    "build_r0", "boundary_effort_flow", "build_boundary_algebra",
    "power_balance_terms", "boundary_term_from_output", "split_g0",
    "system_to_dict", "system_from_dict", "load_system", "save_system",
]


def _as_matrix(a, name: str, shape: tuple | None = None) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(a, dtype=complex))
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a matrix, got ndim={arr.ndim}")
    if shape is not None and arr.shape != shape:
        raise ValidationError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return arr


def _rel_smallest_sv(a: np.ndarray) -> float:
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0:
        return 0.0
    return float(sv[-1] / sv[0])


class MatrixField:
    """n x n matrix-valued polynomial in z on [0, 1].

    Parameters
    ----------
    coeffs : sequence of n x n arrays
        Coefficient matrices in ascending degree, ``F(z) = sum_k coeffs[k] z**k``.
        A single 2D array is treated as a constant field.
    """

    def __init__(self, coeffs):
        arr = np.asarray(coeffs, dtype=complex)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValidationError(
                f"matrix field coefficients must have shape (d+1, n, n), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("matrix field has non-finite coefficients")
        self.coeffs = arr
        self.coeffs.setflags(write=False)

    @classmethod
    def constant(cls, mat) -> "MatrixField":
        return cls(np.asarray(mat, dtype=complex)[None])

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def is_constant(self) -> bool:
        return self.degree == 0 or not np.any(self.coeffs[1:])

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        # Horner in the leading axis
        out = np.broadcast_to(self.coeffs[-1], z.shape + (self.n, self.n)).astype(complex)
        for c in self.coeffs[-2::-1]:
            out = out * z[..., None, None] + c
        return out

    def derivative(self) -> "MatrixField":
        if self.degree == 0:
            return MatrixField(np.zeros_like(self.coeffs))
        k = np.arange(1, self.degree + 1)[:, None, None]
        return MatrixField(self.coeffs[1:] * k)

    def check_hamiltonian(self, z, tol: Tolerances = DEFAULT_TOL) -> float:
        """Verify Hermitian positive definiteness on the samples ``z``.

        Returns the smallest sampled eigenvalue; raises if any sample fails.
        """
        vals = self(np.asarray(z, dtype=float))
        defect = np.max(np.abs(vals - np.conj(np.swapaxes(vals, -1, -2))))
        scale = max(1.0, float(np.max(np.abs(vals))))
        if defect > tol.tol_herm * scale:
            raise ValidationError(f"H is not Hermitian (defect {defect:.3e})")
        lam_min = float(np.min(np.linalg.eigvalsh(vals)))
        if lam_min < tol.eps_H:
            raise ValidationError(
                f"H is not uniformly positive definite (min eigenvalue {lam_min:.3e})")
        return lam_min

    def __eq__(self, other) -> bool:
        return (isinstance(other, MatrixField) and self.coeffs.shape == other.coeffs.shape
                and np.array_equal(self.coeffs, other.coeffs))

    def __repr__(self) -> str:
        return f"MatrixField(n={self.n}, degree={self.degree})"


def sigma(n: int) -> np.ndarray:
    """The 2n x 2n block swap [[0, I], [I, 0]]."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [eye, zero]]).astype(complex)


def _check_p1(P1: np.ndarray, tol: Tolerances) -> None:
    if P1.shape[0] != P1.shape[1]:
        raise ValidationError(f"P1 must be square, got {P1.shape}")
    scale = max(1.0, float(np.max(np.abs(P1))))
    if np.max(np.abs(P1 - P1.conj().T)) > tol.tol_herm * scale:
        raise ValidationError("P1 must be Hermitian")
    if _rel_smallest_sv(P1) < tol.eps_inv:
        raise ValidationError("P1 must be invertible")


@dataclass(frozen=True, eq=False)
class PortHamiltonianSystem:
    """Linear first-order port-Hamiltonian system on [0, 1].

    Parameters
    ----------
    P1 : (n, n) Hermitian invertible matrix
    G0 : (n, n) matrix
    H : MatrixField
        Hamiltonian density; Hermitian positive definite on [0, 1].
    WB, WC : (n, 2n) full row rank matrices
        Boundary condition and observation matrices acting on the stacked
        traces ``[(H x)(1); (H x)(0)]``.
    """

    P1: np.ndarray
    G0: np.ndarray
    H: MatrixField
    WB: np.ndarray
    WC: np.ndarray
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False)
    name: str = ""

    def __post_init__(self):
        P1 = _as_matrix(self.P1, "P1")
        n = P1.shape[0]
        object.__setattr__(self, "P1", P1)
        object.__setattr__(self, "G0", _as_matrix(self.G0, "G0", (n, n)))
        H = self.H if isinstance(self.H, MatrixField) else MatrixField(self.H)
        if H.n != n:
            raise ValidationError(f"H must be {n} x {n}, got {H.n} x {H.n}")
        object.__setattr__(self, "H", H)
        for key in ("WB", "WC"):
            W = _as_matrix(getattr(self, key), key, (n, 2 * n))
            if np.linalg.matrix_rank(W, tol=self.tol.eps_inv * np.linalg.norm(W, 2)) < n:
                raise ValidationError(f"{key} must have full row rank {n}")
            object.__setattr__(self, key, W)
        _check_p1(P1, self.tol)
        # grid plus midpoints of a fine uniform mesh
        H.check_hamiltonian(np.linspace(0.0, 1.0, 401), self.tol)
        for key in ("P1", "G0", "WB", "WC"):
            getattr(self, key).setflags(write=False)

    @property
    def n(self) -> int:
        return self.P1.shape[0]

    @property
    def WBC(self) -> np.ndarray:
        return np.vstack([self.WB, self.WC])

    def with_G0(self, G0) -> "PortHamiltonianSystem":
        return PortHamiltonianSystem(self.P1, G0, self.H, self.WB, self.WC,
                                     tol=self.tol, name=self.name)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PortHamiltonianSystem):
            return NotImplemented
        return (self.H == other.H and all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("P1", "G0", "WB", "WC")))


@dataclass(frozen=True, eq=False)
class BoundaryAlgebra:
    R0: np.ndarray
    Sigma: np.ndarray
    WBC: np.ndarray
    P: np.ndarray
    norm_P: float


def build_r0(P1, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Map from boundary traces to boundary flow and effort.

    ``R0 = 1/sqrt(2) [[P1, -P1], [I, I]]`` so that
    ``[f; e] = R0 [(H x)(1); (H x)(0)]`` and ``R0* Sigma R0 = diag(P1, -P1)``.
    """
    P1 = _as_matrix(P1, "P1")
    _check_p1(P1, tol)
    n = P1.shape[0]
    eye = np.eye(n)
    return np.block([[P1, -P1], [eye, eye]]) / np.sqrt(2.0)


def boundary_effort_flow(trace1, trace0, P1):
    """Boundary flow and effort ``(f, e)`` from the traces of H x at z = 1 and z = 0."""
    P1 = _as_matrix(P1, "P1")
    t1 = np.asarray(trace1, dtype=complex).reshape(-1)
    t0 = np.asarray(trace0, dtype=complex).reshape(-1)
    n = P1.shape[0]
    if t1.shape != (n,) or t0.shape != (n,):
        raise ValidationError(
            f"traces must have length {n}, got {t1.shape[0]} and {t0.shape[0]}")
    f = (P1 @ t1 - P1 @ t0) / np.sqrt(2.0)
    e = (t1 + t0) / np.sqrt(2.0)
    return f, e


def build_boundary_algebra(sys: PortHamiltonianSystem) -> BoundaryAlgebra:
    """Assemble R0, W_BC and ``P = W_BC^{-*} R0* Sigma R0 W_BC^{-1}``.

    Raises
    ------
    BoundaryError
        If the stacked matrix ``[WB; WC]`` is (numerically) singular, i.e. the
        boundary matrices are not complementary.
    """
    R0 = build_r0(sys.P1, sys.tol)
    Sig = sigma(sys.n)
    WBC = sys.WBC
    if _rel_smallest_sv(WBC) < sys.tol.eps_inv:
        raise BoundaryError("boundary matrices not complementary: W_BC is singular")
    inner = R0.conj().T @ Sig @ R0
    Winv = np.linalg.inv(WBC)
    P = Winv.conj().T @ inner @ Winv
    P = 0.5 * (P + P.conj().T)
    return BoundaryAlgebra(R0=R0, Sigma=Sig, WBC=WBC, P=P, norm_P=float(np.linalg.norm(P, 2)))


def _uniform_nodes(k: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, k)


def power_balance_terms(sys: PortHamiltonianSystem, state, traces=None, zeta=None,
                        rule: str = "simpson"):
    """Boundary and dissipation parts of ``<Ax, x>_X + <x, Ax>_X``.

    Parameters
    ----------
    state : (K, n) array
        Samples of x on the nodes ``zeta`` (uniform on [0, 1] by default).
    traces : pair of n-vectors, optional
        ``((H x)(1), (H x)(0))``; taken from the end samples when omitted.
    rule : {"simpson", "trapezoid"}
        Composite quadrature for the dissipation integral. Simpson needs an
        odd number of uniform samples and falls back to the trapezoid rule
        otherwise.

    Returns
    -------
    boundary_term, dissipation_term : float
    """
    x = np.asarray(state, dtype=complex)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != sys.n:
        raise ValidationError(f"state must have {sys.n} components, got {x.shape[1]}")
    z = _uniform_nodes(x.shape[0]) if zeta is None else np.asarray(zeta, dtype=float)
    if z.shape[0] != x.shape[0]:
        raise ValidationError("state and zeta lengths differ")
    w = np.einsum("kij,kj->ki", sys.H(z), x)
    if traces is None:
        t1, t0 = w[-1], w[0]
    else:
        t1 = np.asarray(traces[0], dtype=complex).reshape(sys.n)
        t0 = np.asarray(traces[1], dtype=complex).reshape(sys.n)
    boundary = 0.5 * float(np.real(t1.conj() @ sys.P1 @ t1 - t0.conj() @ sys.P1 @ t0))
    integrand = np.real(np.einsum("ki,ij,kj->k", w.conj(), sys.G0, w))
    if rule == "simpson" and x.shape[0] % 2 == 1 and x.shape[0] >= 3:
        dissipation = float(simpson(integrand, x=z))
    else:
        dissipation = float(trapezoid(integrand, x=z))
    return boundary, dissipation


def boundary_term_from_output(alg: BoundaryAlgebra, y) -> float:
    """``1/2 [0; y]* P [0; y]``; equals the trace form whenever the boundary conditions hold."""
    y = np.asarray(y, dtype=complex).reshape(-1)
    v = np.concatenate([np.zeros_like(y), y])
    return 0.5 * float(np.real(v.conj() @ alg.P @ v))


def split_g0(sys_or_G0):
    """Split G0 into skew-Hermitian and Hermitian parts ``(skew, Re G0)``."""
    G0 = sys_or_G0.G0 if isinstance(sys_or_G0, PortHamiltonianSystem) else sys_or_G0
    G0 = _as_matrix(G0, "G0")
    re_part = 0.5 * (G0 + G0.conj().T)
    skew_part = 0.5 * (G0 - G0.conj().T)
    return skew_part, re_part


# --- system definition files -------------------------------------------------

def _encode(a: np.ndarray):
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _decode_matrix(obj, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == ndim + 1 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == ndim:
        return arr.astype(complex)
    raise ValidationError(f"{name}: cannot read entries with shape {arr.shape}")


def system_to_dict(sys: PortHamiltonianSystem) -> dict:
    return {
        "n": sys.n,
        "P1": _encode(sys.P1),
        "G0": _encode(sys.G0),
        "H": _encode(sys.H.coeffs),
        "WB": _encode(sys.WB),
        "WC": _encode(sys.WC),
    }


def system_from_dict(data: dict, tol: Tolerances = DEFAULT_TOL,
                     name: str = "") -> PortHamiltonianSystem:
    missing = [k for k in ("n", "P1", "G0", "H", "WB", "WC") if k not in data]
    if missing:
        raise ValidationError(f"system definition missing keys: {missing}")
    n = int(data["n"])
    P1 = _decode_matrix(data["P1"], "P1", 2)
    if P1.shape != (n, n):
        raise ValidationError(f"P1: expected ({n}, {n}), got {P1.shape}")
    H = _decode_matrix(data["H"], "H", 3)
    return PortHamiltonianSystem(
        P1=P1,
        G0=_decode_matrix(data["G0"], "G0", 2),
        H=MatrixField(H),
        WB=_decode_matrix(data["WB"], "WB", 2),
        WC=_decode_matrix(data["WC"], "WC", 2),
        tol=tol, name=name or data.get("name", ""),
    )


def load_system(path, tol: Tolerances = DEFAULT_TOL) -> PortHamiltonianSystem:
    with open(path) as fh:
        return system_from_dict(json.load(fh), tol=tol)


def save_system(sys: PortHamiltonianSystem, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(system_to_dict(sys), indent=2))
    return path
