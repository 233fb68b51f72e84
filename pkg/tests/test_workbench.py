import json

import numpy as np
import pytest

from phsobs.cli import main
from phsobs.core import system_from_dict, system_to_dict
from phsobs.exceptions import ValidationError
from phsobs.models import model
from phsobs.workbench import run, run_config


def write_config(tmp_path, config):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


class TestModels:
    def test_counterexample_identity(self):
        t = model("paper_counterexample").triple
        np.testing.assert_allclose(t.A + t.A.T + t.C.T @ t.C, 0, atol=4 * np.finfo(float).eps)

    def test_wave_delta(self):
        sys = model("wave", {"rho": 1.0, "T": 1.0}).system
        np.testing.assert_allclose(np.linalg.eigvalsh(sys.P1 @ sys.H(0.3)), [-1.0, 1.0])

    def test_transport_wbc(self):
        sys = model("transport").system
        np.testing.assert_array_equal(sys.WBC, np.eye(2))

    def test_timoshenko_shape(self):
        sys = model("timoshenko").system
        assert sys.n == 4

    def test_unknown(self):
        with pytest.raises(ValidationError):
            model("beam")

    @pytest.mark.parametrize("params", [{"rho": -1.0}, {"T": [1.0, -2.0]}])
    def test_non_positive_profile(self, params):
        with pytest.raises(ValidationError):
            model("wave", params)

    def test_deterministic(self):
        a = model("wave", {"T": [1.0, 0.5], "bc": "damped"}).system
        b = model("wave", {"T": [1.0, 0.5], "bc": "damped"}).system
        assert a == b
        assert system_from_dict(system_to_dict(a)) == a


class TestRun:
    def test_kalman_counterexample(self, tmp_path):
        path = write_config(tmp_path, {"model": {"name": "paper_counterexample"},
                                       "pipeline": ["kalman"]})
        m = run(path, tmp_path / "out")
        data = json.loads((tmp_path / "out" / "kalman.json").read_text())
        assert data["A"]["rank"] == 2 and data["A+G"]["rank"] == 1
        assert m.stages["kalman"]["status"] == "ok"

    def test_empty_pipeline(self, tmp_path):
        path = write_config(tmp_path, {"model": {"name": "transport"}, "pipeline": []})
        with pytest.raises(ValidationError, match="config.pipeline"):
            run(path)

    def test_unknown_stage_key_path(self, tmp_path):
        with pytest.raises(ValidationError, match=r"config.pipeline\[1\]"):
            run_config({"model": {"name": "transport"}, "pipeline": ["kalman", "plot"]}, tmp_path)

    def test_hautus_artifacts(self, tmp_path):
        m = run_config({"model": {"name": "transport"}, "pipeline": ["hautus-scan"],
                        "grid_n": 30, "hautus": {"resolution": [20, 40]}}, tmp_path)
        assert (tmp_path / "hautus.csv").exists()
        assert (tmp_path / "hautus_summary.json").exists()
        assert str(tmp_path / "hautus.csv") in m.artifacts
        assert m.stages["hautus-scan"]["verdict"] is True

    def test_stage_error_does_not_abort(self, tmp_path):
        m = run_config({"model": {"name": "paper_counterexample"},
                        "pipeline": ["simulate", "kalman"]}, tmp_path)
        assert m.stages["simulate"]["status"] == "error"
        assert m.stages["kalman"]["status"] == "ok"
        assert not m.all_passed

    def test_manifest_contents(self, tmp_path):
        cfg = {"model": {"name": "wave", "params": {"bc": "damped"}}, "grid_n": 20,
               "pipeline": ["simulate", "observability"], "tolerances": {"eps_HT": 1e-7}}
        m = run_config(cfg, tmp_path)
        man = json.loads((tmp_path / "manifest.json").read_text())
        assert len(man["config_digest"]) == 64
        assert man["tolerances"]["eps_HT"] == 1e-7
        assert set(man["versions"]) == {"phsobs", "numpy", "scipy"}
        assert all(p.startswith(str(tmp_path)) for p in man["artifacts"])
        assert m.all_passed

    def test_reproducible(self, tmp_path):
        cfg = {"model": {"name": "wave", "params": {"bc": "damped"}}, "grid_n": 16, "seed": 7,
               "pipeline": ["simulate", "observability", "fundamental"],
               "simulate": {"initial": "random", "t_final": 0.3}}
        run_config(cfg, tmp_path / "a")
        run_config(cfg, tmp_path / "b")
        for name in ("simulate.json", "observability.json", "fundamental.json", "manifest.json",
                     "trajectory.csv"):
            a = (tmp_path / "a" / name).read_text().replace(str(tmp_path / "a"), "")
            b = (tmp_path / "b" / name).read_text().replace(str(tmp_path / "b"), "")
            assert a == b, name

    def test_system_file(self, tmp_path):
        sys = model("wave", {"bc": "damped"}).system
        (tmp_path / "sys.json").write_text(json.dumps(system_to_dict(sys)))
        path = write_config(tmp_path, {"system_file": "sys.json", "grid_n": 16,
                                       "pipeline": ["kalman"]})
        m = run(path)
        assert m.stages["kalman"]["status"] == "ok"
        emitted = json.loads((tmp_path / "out" / "system.json").read_text())
        assert system_from_dict(emitted) == sys

    def test_two_sources_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            run_config({"model": {"name": "transport"}, "system_file": "x.json",
                        "pipeline": ["kalman"]}, tmp_path)


class TestCli:
    def test_models_list(self, capsys):
        assert main(["models"]) == 0
        assert "paper_counterexample" in capsys.readouterr().out.split()

    def test_models_definition(self, tmp_path):
        assert main(["models", "--model", "wave", "--param", 'bc="damped"',
                     "--out-dir", str(tmp_path)]) == 0
        data = json.loads((tmp_path / "wave.json").read_text())
        assert system_from_dict(data) == model("wave", {"bc": "damped"}).system

    def test_simulate_verb(self, tmp_path, capsys):
        rc = main(["simulate", "--model", "wave", "--param", 'bc="damped"', "--grid-n", "20",
                   "--out-dir", str(tmp_path), "--seed", "3"])
        assert rc == 0
        assert (tmp_path / "trajectory.csv").exists()
        assert "simulate: ok verdict=pass" in capsys.readouterr().out

    def test_config_flag_and_overrides(self, tmp_path):
        path = write_config(tmp_path, {"model": {"name": "transport"}, "pipeline": ["kalman"],
                                       "hautus": {"resolution": [10, 10]}})
        rc = main(["hautus", "--config", str(path), "--grid-n", "12",
                   "--out-dir", str(tmp_path / "o")])
        assert rc == 0
        man = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert list(man["stages"]) == ["hautus-scan"]

    def test_failing_verdict_exit_code(self, tmp_path):
        # y observes the trace that the boundary condition forces to zero
        data = system_to_dict(model("transport", {"g": -1.0}).system)
        data["WC"] = data["WB"]
        path = write_config(tmp_path, {"system": data, "grid_n": 12, "pipeline": ["observability"]})
        assert main(["run", "--config", str(path), "--out-dir", str(tmp_path / "o")]) == 1

    def test_validation_error_exit_code(self, tmp_path, capsys):
        path = write_config(tmp_path, {"model": {"name": "transport"}, "pipeline": []})
        assert main(["run", "--config", str(path)]) == 2
        assert "config.pipeline" in capsys.readouterr().err
