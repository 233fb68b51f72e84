"""Hautus-test functional over the open left half-plane.

For ``s`` with ``Re s < 0`` the best constant in

    |(sI - A)x|^2 + |Re s| |Cx|^2 >= m |Re s|^2 |x|^2

is ``m(s) = sigma_min([sI - Ab; sqrt|Re s| Cb])^2 / (Re s)^2`` in standard
coordinates. Scans report a *mesh* infimum; they can falsify the test but
never certify it over the continuum.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._linalg import standard_coords
from .config import DEFAULT_TOL, Tolerances
from .core import build_boundary_algebra, split_g0
from .discretization import discretize
from .exceptions import PHSError, ValidationError
from .observability import approx_observability_verdict, gramian_infinite
from .simulation import stability_classify

__all__ = ["HautusScan", "hautus_value", "hautus_scan", "shifted_halfplane_bound",
           "guaranteed_floor", "Theorem2Report", "theorem2_pipeline"]


def _m_values(Ab, Cb, s_values) -> np.ndarray:
    s_values = np.asarray(s_values, dtype=complex).reshape(-1)
    m = Ab.shape[0]
    r = s_values.real
    stack = np.empty((s_values.size, m + Cb.shape[0], m), dtype=complex)
    stack[:, :m, :] = -Ab
    stack[:, np.arange(m), np.arange(m)] += s_values[:, None]
    stack[:, m:, :] = np.sqrt(np.abs(r))[:, None, None] * Cb
    smin = np.linalg.svd(stack, compute_uv=False)[:, -1]
    return smin**2 / r**2


def hautus_value(s: complex, A, C, M=None) -> float:
    """Best Hautus constant at a single point ``s`` of the open left half-plane."""
    s = complex(s)
    if not s.real < 0:
        raise ValidationError(f"Hautus functional needs Re s < 0, got {s}")
    Ab, Cb, _ = standard_coords(A, C, M)
    return float(_m_values(Ab, Cb, [s])[0])


@dataclass(frozen=True, eq=False)
class HautusScan:
    re: np.ndarray
    im: np.ndarray
    values: np.ndarray          # shape (len(re), len(im))
    s_star: complex
    m_star: float
    verdict: bool
    alpha: float | None = None
    label: str = "mesh infimum"

    @property
    def grid(self) -> np.ndarray:
        return self.re[:, None] + 1j * self.im[None, :]

    @property
    def cell_size(self):
        dr = float(np.max(np.diff(self.re))) if self.re.size > 1 else 0.0
        di = float(np.max(np.diff(self.im))) if self.im.size > 1 else 0.0
        return dr, di

    def summary(self) -> dict:
        return {
            "infimum": self.m_star,
            "infimum_kind": self.label,
            "argmin": [self.s_star.real, self.s_star.imag],
            "alpha": self.alpha,
            "verdict": "pass" if self.verdict else "fail",
            "re_range": [float(self.re.min()), float(self.re.max())],
            "im_range": [float(self.im.min()), float(self.im.max())],
            "resolution": list(self.values.shape),
        }

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["re_s", "im_s", "m_s"])
            for i, r in enumerate(self.re):
                for j, w in enumerate(self.im):
                    writer.writerow([repr(float(r)), repr(float(w)), repr(float(self.values[i, j]))])
        return path

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.summary(), indent=2))
        return path


def _axis(lo: float, hi: float, num: int, spacing: str) -> np.ndarray:
    if num < 1:
        raise ValidationError("scan resolution must be positive")
    if num == 1:
        return np.array([0.5 * (lo + hi)])
    if spacing == "geometric":
        # clusters points towards hi (the imaginary axis for Re s < 0)
        return -np.geomspace(-lo, -hi, num)
    return np.linspace(lo, hi, num)


def hautus_scan(A, C, M=None, re_range=(-3.0, -0.05), im_range=(-4.0, 4.0),
                resolution=(60, 120), spacing: str = "linear", alpha: float | None = None,
                tol: Tolerances = DEFAULT_TOL, chunk: int = 64) -> HautusScan:
    """Evaluate ``m(s)`` on a rectangular mesh and record the mesh infimum.

    Parameters
    ----------
    re_range : (r_min, r_max)
        Real-part interval; ``r_max`` must be negative.
    im_range : (w_min, w_max) or float
        Imaginary-part interval; a number ``W`` means ``(-W, W)``.
    resolution : (n_re, n_im)
    spacing : {"linear", "geometric"}
        ``geometric`` refines the real axis towards ``Re s -> 0-``.
    """
    r_min, r_max = map(float, re_range)
    if np.isscalar(im_range):
        im_range = (-float(im_range), float(im_range))
    w_min, w_max = map(float, im_range)
    if not r_max < 0:
        raise ValidationError("scan region must lie in the open left half-plane (r_max < 0)")
    if not (r_min <= r_max and w_min <= w_max):
        raise ValidationError("empty scan region")
    n_re, n_im = resolution
    re = _axis(r_min, r_max, int(n_re), spacing)
    im = np.linspace(w_min, w_max, int(n_im)) if n_im > 1 else np.array([0.5 * (w_min + w_max)])
    Ab, Cb, _ = standard_coords(A, C, M)
    s_all = (re[:, None] + 1j * im[None, :]).reshape(-1)
    vals = np.empty(s_all.size)
    for start in range(0, s_all.size, chunk):
        vals[start:start + chunk] = _m_values(Ab, Cb, s_all[start:start + chunk])
    values = vals.reshape(re.size, im.size)
    k = int(np.argmin(vals))
    m_star = float(vals[k])
    return HautusScan(re=re, im=im, values=values, s_star=complex(s_all[k]), m_star=m_star,
                      verdict=bool(m_star >= tol.eps_HT), alpha=alpha)


def shifted_halfplane_bound(L, delta: float, G, M=None) -> float:
    """Half-plane threshold ``alpha = sqrt(2 |L| / delta) |G|``.

    ``L`` and ``delta`` come from the Lyapunov certificate of the unperturbed
    pair (``L`` in standard coordinates); ``G`` is the bounded perturbation,
    measured in the energy norm defined by ``M``.
    """
    if not delta > 0:
        raise ValidationError("certificate invalid: delta must be positive")
    L = np.atleast_2d(np.asarray(L, dtype=complex))
    G = np.atleast_2d(np.asarray(G, dtype=complex))
    Gb, _, _ = standard_coords(G, np.zeros((1, G.shape[0])), M)
    return float(np.sqrt(2.0 * np.linalg.norm(L, 2) / delta) * np.linalg.norm(Gb, 2))


def guaranteed_floor(r: float, L_norm: float, delta: float, G_norm: float) -> float:
    """Lower bound on ``m(s)`` for the perturbed pair at ``Re s = r``.

    From ``2|L| |(s-A-G)x|^2 + |r| |Cx|^2 >= (r^2 delta - 2|L| |G|^2) |x|^2``;
    positive exactly when ``|r| > alpha``.
    """
    kappa = min(1.0, 1.0 / (2.0 * L_norm)) if L_norm > 0 else 1.0
    return kappa * (delta - 2.0 * L_norm * G_norm**2 / r**2)


@dataclass(frozen=True, eq=False)
class Theorem2Report:
    stages: dict
    alpha: float | None
    m_star: float | None
    s_star: complex | None
    approx_observable: bool | None
    scans: dict = field(default_factory=dict, repr=False)
    warnings: tuple = ()

    @property
    def passed(self) -> bool:
        return all(st["passed"] for st in self.stages.values())

    def to_dict(self) -> dict:
        return {
            "stages": self.stages,
            "alpha": self.alpha,
            "m_star": self.m_star,
            "s_star": None if self.s_star is None else [self.s_star.real, self.s_star.imag],
            "approx_observable": self.approx_observable,
            "passed": self.passed,
            "warnings": list(self.warnings),
            "scans": {k: v.summary() for k, v in self.scans.items()},
        }


def theorem2_pipeline(sys, N: int, region: dict | None = None,
                      scheme: str = "central_staggered",
                      tol: Tolerances | None = None) -> Theorem2Report:
    """Check the Hautus test for a dissipative system through its stages.

    Stages: (0) W_BC invertible; (1) the discretized generator is
    exponentially stable; (2) the comparison generator with G0 replaced by its
    skew part is stable; (3) infinite-time Gramian of the comparison system
    yields ``(L, delta)``; (4) half-plane threshold ``alpha``; (5) scans of the
    far half-plane ``Re s < -alpha`` and the near strip ``[-alpha, 0)``.
    Failures are reported per stage and later stages proceed where possible.

    ``region`` keys: ``far_width`` (default ``max(4, alpha)``), ``im_max``
    (default 1.2 times the largest imaginary part of the spectrum, at least
    10), ``r_eps`` (closest approach to the imaginary axis, default 1e-3),
    ``resolution`` (default ``(60, 120)``).
    """
    tol = tol or sys.tol
    region = dict(region or {})
    stages: dict = {}
    warnings: list = []

    def record(key, passed, **detail):
        stages[key] = {"passed": bool(passed), **detail}
        if not passed:
            warnings.append(f"stage {key} failed")

    try:
        alg = build_boundary_algebra(sys)
        record("0_wbc_invertible", True, norm_P=alg.norm_P)
    except PHSError as exc:
        record("0_wbc_invertible", False, error=str(exc))

    dsys = discretize(sys, N, scheme=scheme, tol=tol)
    verdict = stability_classify(dsys, tol=tol)
    record("1_exponentially_stable", verdict.exponentially_stable,
           abscissa=verdict.abscissa, kind=verdict.kind)

    skew, _ = split_g0(sys)
    dcomp = discretize(sys.with_G0(skew), N, scheme=scheme, tol=tol)
    cverdict = stability_classify(dcomp, tol=tol)
    record("2_comparison_stable", cverdict.exponentially_stable,
           abscissa=cverdict.abscissa, kind=cverdict.kind)

    L = delta = None
    try:
        rep = gramian_infinite(dcomp.A, dcomp.C, dcomp.M, tol=tol)
        L, delta = rep.gramian, rep.delta
        record("3_comparison_gramian", rep.delta > 0, delta=rep.delta, adm_m=rep.adm_m,
               lyapunov_residual=rep.lyapunov_residual)
    except PHSError as exc:
        record("3_comparison_gramian", False, error=str(exc))

    alpha = None
    G = dsys.A - dcomp.A
    if delta is not None and delta > 0:
        alpha = shifted_halfplane_bound(L, delta, G, dsys.M)
        record("4_alpha", True, alpha=alpha)
    else:
        record("4_alpha", False, error="no valid certificate")

    approx = None
    try:
        full = gramian_infinite(dsys.A, dsys.C, dsys.M, tol=tol)
        approx = approx_observability_verdict(full, tol)
    except PHSError as exc:
        warnings.append(f"full-system Gramian unavailable: {exc}")

    a = alpha or 0.0
    r_eps = float(region.get("r_eps", 1e-3))
    far_width = float(region.get("far_width", max(4.0, a)))
    im_max = region.get("im_max")
    if im_max is None:
        ev = np.linalg.eigvals(dsys.A)
        im_max = max(10.0, 1.2 * float(np.max(np.abs(ev.imag))))
    res = tuple(region.get("resolution", (60, 120)))
    scans = {}
    far_hi = -a - r_eps if a > 0 else -r_eps
    scans["far"] = hautus_scan(dsys.A, dsys.C, dsys.M, re_range=(-a - far_width, far_hi),
                               im_range=float(im_max), resolution=res,
                               spacing="linear" if a > 0 else "geometric", alpha=alpha, tol=tol)
    if a > 0:
        scans["near"] = hautus_scan(dsys.A, dsys.C, dsys.M, re_range=(-a, -r_eps),
                                    im_range=float(im_max), resolution=res, spacing="geometric",
                                    alpha=alpha, tol=tol)
    best = min(scans.values(), key=lambda sc: sc.m_star)
    record("5_hautus_scan", best.m_star >= tol.eps_HT, m_star=best.m_star,
           s_star=[best.s_star.real, best.s_star.imag])
    return Theorem2Report(stages=stages, alpha=alpha, m_star=best.m_star, s_star=best.s_star,
                          approx_observable=approx, scans=scans, warnings=tuple(warnings))
