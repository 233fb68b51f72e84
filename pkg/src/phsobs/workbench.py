"""Config-driven runs: resolve a model, execute analysis stages, write reports."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import Tolerances
from .core import system_from_dict, system_to_dict, load_system
from .discretization import Grid, compute_q, discretize, growth_constants, smooth_diagonalization
from .exceptions import PHSError, ValidationError
from .hautus import hautus_scan, theorem2_pipeline
from .models import ModelSpec, model
from .observability import gramian_finite, gramian_infinite, kalman_rank
from .resolvent import fundamental_solution, verify_growth_bounds
from .simulation import energy_balance_residual, simulate, stability_classify

__all__ = ["RunManifest", "run", "run_config", "load_config", "STAGES", "resolve_model"]

log = logging.getLogger(__name__)

STAGES = ("simulate", "observability", "hautus-scan", "fundamental", "theorem2", "kalman")


@dataclass
class RunManifest:
    config_digest: str
    versions: dict
    tolerances: dict
    stages: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(st.get("verdict") is not False and st["status"] == "ok"
                   for st in self.stages.values())

    def to_dict(self) -> dict:
        return {
            "config_digest": self.config_digest,
            "versions": self.versions,
            "tolerances": self.tolerances,
            "stages": self.stages,
            "artifacts": self.artifacts,
            "all_passed": self.all_passed,
        }


def load_config(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _digest(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def validate_config(config: dict) -> None:
    if not isinstance(config, dict):
        raise ValidationError("config: top level must be an object")
    sources = [k for k in ("model", "system", "system_file") if k in config]
    if len(sources) != 1:
        raise ValidationError("config: exactly one of model, system, system_file is required")
    if "model" in config and "name" not in config["model"]:
        raise ValidationError("config.model.name: missing")
    pipeline = config.get("pipeline")
    if not isinstance(pipeline, list) or not pipeline:
        raise ValidationError("config.pipeline: must be a non-empty list of stages")
    for i, st in enumerate(pipeline):
        if st not in STAGES:
            raise ValidationError(f"config.pipeline[{i}]: unknown stage {st!r}")
    n = config.get("grid_n", 100)
    if not isinstance(n, int) or n < 4:
        raise ValidationError("config.grid_n: must be an integer >= 4")


def resolve_model(config: dict, tol: Tolerances, base_dir: Path | None = None) -> ModelSpec:
    if "model" in config:
        spec = config["model"]
        return model(spec["name"], spec.get("params"), tol=tol)
    if "system" in config:
        sys = system_from_dict(config["system"], tol=tol)
    else:
        path = Path(config["system_file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        sys = load_system(path, tol=tol)
    return ModelSpec(sys.name or "custom", {}, system=sys)


def _write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable))
    return path


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not JSON serializable: {type(o)}")


def _initial_state(dsys, kind: str, rng) -> np.ndarray:
    z = dsys.grid.nodes
    n = dsys.n
    if kind == "random":
        x = rng.standard_normal((z.size, n))
    else:
        bump = np.exp(-((z - 0.5) / 0.1) ** 2)
        x = np.repeat(bump[:, None], n, axis=1)
    return dsys.project(x)


def _need_pde(spec: ModelSpec, stage: str):
    if not spec.is_pde:
        raise ValidationError(f"stage {stage!r} needs a port-Hamiltonian model")
    return spec.system


# --- stages ------------------------------------------------------------------

def _stage_simulate(spec, cfg, ctx):
    sys = _need_pde(spec, "simulate")
    opts = cfg.get("simulate", {})
    dsys = discretize(sys, ctx["N"], scheme=ctx["scheme"], tol=ctx["tol"])
    z0 = _initial_state(dsys, opts.get("initial", "bump"), ctx["rng"])
    traj = simulate(dsys, z0, float(opts.get("t_final", 1.0)), opts.get("dt"),
                    opts.get("integrator", "trapezoidal"))
    resid, idx = energy_balance_residual(traj)
    ok = bool(np.all(np.isfinite(traj.energies)) and np.all(traj.energies >= -1e-12))
    ctx["artifacts"].append(traj.to_csv(ctx["out"] / "trajectory.csv",
                                        include_states=bool(opts.get("export_states", False))))
    verdict = stability_classify(dsys, tol=ctx["tol"])
    return {
        "energy_initial": float(traj.energies[0]),
        "energy_final": float(traj.energies[-1]),
        "energy_balance_residual": resid,
        "residual_step": idx,
        "stability": {"kind": verdict.kind, "abscissa": verdict.abscissa,
                      "note": verdict.note},
    }, ok


def _pairs(spec, ctx):
    if spec.is_pde:
        dsys = discretize(spec.system, ctx["N"], scheme=ctx["scheme"], tol=ctx["tol"])
        return {"system": (dsys.A, dsys.C, dsys.M)}
    t = spec.triple
    return {"A": (t.A, t.C, t.M), "A+G": (t.A + t.G, t.C, t.M)}


def _stage_observability(spec, cfg, ctx):
    opts = cfg.get("observability", {})
    horizon = opts.get("horizon", "inf")
    out, verdicts = {}, []
    for label, (A, C, M) in _pairs(spec, ctx).items():
        if horizon == "inf":
            rep = gramian_infinite(A, C, M, tol=ctx["tol"])
            verdicts.append(rep.approx_observable)
        else:
            rep = gramian_finite(A, C, M, t0=float(horizon), method=opts.get("method", "doubling"),
                                 tol=ctx["tol"])
            verdicts.append(rep.exact_observable)
        out[label] = rep.to_dict(include_matrices=bool(opts.get("embed_matrices", False)))
    return out, all(verdicts) if spec.is_pde else None


def _stage_hautus(spec, cfg, ctx):
    opts = cfg.get("hautus", {})
    out, verdicts = {}, []
    for label, (A, C, M) in _pairs(spec, ctx).items():
        scan = hautus_scan(A, C, M, re_range=tuple(opts.get("re_range", (-3.0, -0.05))),
                           im_range=opts.get("im_range", 4.0),
                           resolution=tuple(opts.get("resolution", (60, 120))),
                           spacing=opts.get("spacing", "geometric"), tol=ctx["tol"])
        stem = "hautus" if label == "system" else f"hautus_{label.replace('+', 'p')}"
        ctx["artifacts"].append(scan.to_csv(ctx["out"] / f"{stem}.csv"))
        ctx["artifacts"].append(scan.to_json(ctx["out"] / f"{stem}_summary.json"))
        out[label] = scan.summary()
        verdicts.append(scan.verdict)
    return out, all(verdicts) if spec.is_pde else None


def _stage_fundamental(spec, cfg, ctx):
    sys = _need_pde(spec, "fundamental")
    opts = cfg.get("fundamental", {})
    s = opts.get("s", [-1.0, 0.0])
    s = complex(s[0], s[1]) if isinstance(s, list) else complex(s)
    grid = Grid(int(opts.get("grid_n", 20)))
    diag = smooth_diagonalization(sys, grid, ctx["tol"])
    Q = compute_q(diag, sys)
    c0, c1 = growth_constants(diag, Q)
    fs = fundamental_solution(sys, s, grid, ctx["tol"])
    fs, rep = verify_growth_bounds(fs, c0, ctx["rng"], diag=diag, c1=c1)
    ctx["artifacts"].append(fs.to_csv(ctx["out"] / "fundamental.csv"))
    ctx["artifacts"].append(rep.to_json(ctx["out"] / "growth_bounds.json"))
    data = {"s": [s.real, s.imag], "c0": c0, "c1": c1, "bounds": rep.to_dict(),
            "cocycle_defect": fs.cocycle_defect(ctx["seed"])}
    return data, rep.violations == 0 and not rep.gronwall_violations


def _stage_theorem2(spec, cfg, ctx):
    sys = _need_pde(spec, "theorem2")
    opts = cfg.get("theorem2", {})
    rep = theorem2_pipeline(sys, ctx["N"], region=opts.get("region"), scheme=ctx["scheme"],
                            tol=ctx["tol"])
    for key, scan in rep.scans.items():
        ctx["artifacts"].append(scan.to_csv(ctx["out"] / f"theorem2_{key}.csv"))
    return rep.to_dict(), rep.passed


def _stage_kalman(spec, cfg, ctx):
    out = {}
    for label, (A, C, _) in _pairs(spec, ctx).items():
        rank, obs = kalman_rank(A, C)
        out[label] = {"rank": rank, "observable": obs, "dimension": int(np.shape(A)[0])}
    return out, None


_RUNNERS = {
    "simulate": _stage_simulate,
    "observability": _stage_observability,
    "hautus-scan": _stage_hautus,
    "fundamental": _stage_fundamental,
    "theorem2": _stage_theorem2,
    "kalman": _stage_kalman,
}


def run_config(config: dict, out_dir, base_dir: Path | None = None) -> RunManifest:
    """Execute ``config["pipeline"]`` and write JSON/CSV reports into ``out_dir``.

    Stage errors are recorded in the manifest; later stages still run.
    """
    validate_config(config)
    tol = Tolerances.from_dict(config.get("tolerances"))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        config_digest=_digest(config),
        versions={"phsobs": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        tolerances=tol.to_dict(),
    )
    spec = resolve_model(config, tol, base_dir)
    if spec.is_pde:
        manifest.artifacts.append(str(_write_json(out / "system.json", system_to_dict(spec.system))))
    seed = int(config.get("seed", 0))
    ctx = {"N": int(config.get("grid_n", 100)), "scheme": config.get("scheme", "central_staggered"),
           "tol": tol, "out": out, "seed": seed, "rng": np.random.default_rng(seed), "artifacts": []}
    for stage in config["pipeline"]:
        try:
            data, verdict = _RUNNERS[stage](spec, config, ctx)
            path = _write_json(out / f"{stage}.json", data)
            ctx["artifacts"].append(path)
            manifest.stages[stage] = {"status": "ok", "verdict": verdict}
        except (PHSError, np.linalg.LinAlgError) as exc:
            log.warning("stage %s failed: %s", stage, exc)
            manifest.stages[stage] = {"status": "error", "verdict": False, "error": str(exc)}
    manifest.artifacts += [str(p) for p in ctx["artifacts"]]
    manifest.artifacts.append(str(out / "manifest.json"))
    _write_json(out / "manifest.json", manifest.to_dict())
    return manifest


def run(config_path, out_dir=None) -> RunManifest:
    path = Path(config_path)
    config = load_config(path)
    out = Path(out_dir) if out_dir is not None else path.parent / "out"
    return run_config(config, out, base_dir=path.parent)
