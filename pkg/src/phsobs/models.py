"""Model zoo: transport, wave, Timoshenko beam and a finite-dimensional counterexample."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .core import MatrixField, PortHamiltonianSystem
from .exceptions import ValidationError

__all__ = ["ModelSpec", "model", "MODEL_NAMES", "FiniteTriple"]

MODEL_NAMES = ("transport", "wave", "timoshenko", "paper_counterexample")


@dataclass(frozen=True, eq=False)
class FiniteTriple:
    """Finite-dimensional pair ``(A, C)`` with a bounded perturbation ``G``."""

    A: np.ndarray
    C: np.ndarray
    G: np.ndarray

    @property
    def M(self) -> np.ndarray:
        return np.eye(self.A.shape[0])


@dataclass(frozen=True, eq=False)
class ModelSpec:
    name: str
    params: dict = field(default_factory=dict)
    system: PortHamiltonianSystem | None = None
    triple: FiniteTriple | None = None

    @property
    def is_pde(self) -> bool:
        return self.system is not None


def _coeffs(value, key: str) -> np.ndarray:
    """Scalar or ascending polynomial coefficients for a profile in z."""
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{key} must be a number or a list of coefficients")
    return arr


def _positive_profile(coeffs: np.ndarray, key: str) -> None:
    z = np.linspace(0.0, 1.0, 401)
    vals = np.polyval(coeffs[::-1], z)
    if np.min(vals) <= 0:
        raise ValidationError(f"{key} must stay positive on [0, 1]")


def _diag_field(profiles) -> MatrixField:
    deg = max(p.size for p in profiles)
    n = len(profiles)
    coeffs = np.zeros((deg, n, n))
    for i, p in enumerate(profiles):
        coeffs[: p.size, i, i] = p
    return MatrixField(coeffs)


def _transport(params: dict, tol: Tolerances) -> PortHamiltonianSystem:
    g = complex(params.get("g", 0.0))
    return PortHamiltonianSystem(
        P1=[[1.0]], G0=[[g]], H=MatrixField.constant([[1.0]]),
        WB=[[1.0, 0.0]], WC=[[0.0, 1.0]], tol=tol, name="transport")


def _wave(params: dict, tol: Tolerances) -> PortHamiltonianSystem:
    # x = (rho w_t, w_z), H x = (velocity v, stress sigma)
    inv_rho = _coeffs(params.get("inv_rho", 1.0 / float(params.get("rho", 1.0))), "inv_rho")
    T = _coeffs(params.get("T", 1.0), "T")
    _positive_profile(inv_rho, "inv_rho")
    _positive_profile(T, "T")
    H = _diag_field([inv_rho, T])
    bc = params.get("bc", "conservative")
    k = float(params.get("damping", 0.5))
    # traces ordered [v(1), sigma(1), v(0), sigma(0)]
    if bc == "conservative":
        WB = [[0, 1, 0, 0], [0, 0, 1, 0]]           # sigma(1) = 0, v(0) = 0
    elif bc == "damped":
        if k <= 0:
            raise ValidationError("wave damping must be positive")
        WB = [[k, 1, 0, 0], [0, 0, 1, 0]]           # sigma(1) = -k v(1), v(0) = 0
    else:
        raise ValidationError(f"unknown wave bc {bc!r}")
    WC = [[1, 0, 0, 0], [0, 0, 0, 1]]               # y = (v(1), sigma(0))
    G0 = np.asarray(params.get("G0", np.zeros((2, 2))), dtype=complex)
    return PortHamiltonianSystem(P1=[[0, 1], [1, 0]], G0=G0, H=H, WB=WB, WC=WC,
                                 tol=tol, name=f"wave-{bc}")


def _timoshenko(params: dict, tol: Tolerances) -> PortHamiltonianSystem:
    # x = (w_z - phi, rho w_t, phi_z, I_rho phi_t); illustrative defaults
    K = float(params.get("K", 1.0))
    rho = float(params.get("rho", 1.0))
    EI = float(params.get("EI", 4.0))
    I_rho = float(params.get("I_rho", 1.0))
    if min(K, rho, EI, I_rho) <= 0:
        raise ValidationError("Timoshenko parameters K, rho, EI, I_rho must be positive")
    H = MatrixField.constant(np.diag([K, 1.0 / rho, EI, 1.0 / I_rho]))
    P1 = np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=float)
    G0 = np.zeros((4, 4))
    G0[0, 3] = -1.0
    G0[3, 0] = 1.0
    # traces ordered [Q(1), v(1), M(1), omega(1), Q(0), v(0), M(0), omega(0)]
    bc = params.get("bc", "damped")
    k = float(params.get("damping", 0.5))
    e = np.eye(8)
    if bc == "conservative":
        WB = np.vstack([e[0], e[2], e[5], e[7]])                # free at 1, clamped at 0
    elif bc == "damped":
        if k <= 0:
            raise ValidationError("Timoshenko damping must be positive")
        WB = np.vstack([e[0] + k * e[1], e[2] + k * e[3], e[5], e[7]])
    else:
        raise ValidationError(f"unknown Timoshenko bc {bc!r}")
    WC = np.vstack([e[1], e[3], e[4], e[6]])
    return PortHamiltonianSystem(P1=P1, G0=G0, H=H, WB=WB, WC=WC, tol=tol,
                                 name=f"timoshenko-{bc}")


def _counterexample() -> FiniteTriple:
    A = np.array([[-1.0, 1.0], [-1.0, 0.0]])
    C = np.array([[np.sqrt(2.0), 0.0]])
    G = np.array([[-1.0, -1.0], [-1.0, -1.0]])
    return FiniteTriple(A=A, C=C, G=G)


def model(name: str, params: dict | None = None, tol: Tolerances = DEFAULT_TOL) -> ModelSpec:
    """Resolve a named model.

    ``transport``: ``g`` (scalar G0). ``wave``: ``rho`` or ``inv_rho``, ``T``
    (numbers or ascending coefficient lists), ``bc`` in {conservative, damped},
    ``damping``, optional ``G0``. ``timoshenko``: ``K``, ``rho``, ``EI``,
    ``I_rho``, ``bc``, ``damping``. ``paper_counterexample``: no parameters.
    """
    params = dict(params or {})
    if name == "transport":
        return ModelSpec(name, params, system=_transport(params, tol))
    if name == "wave":
        return ModelSpec(name, params, system=_wave(params, tol))
    if name == "timoshenko":
        return ModelSpec(name, params, system=_timoshenko(params, tol))
    if name == "paper_counterexample":
        return ModelSpec(name, params, triple=_counterexample())
    raise ValidationError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")
