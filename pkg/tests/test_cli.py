import json
import subprocess
import sys

import pytest

from mvlab import cli


def _run(tmp_path, experiment, parameters, check=False, seed=0, name="out"):
    cfg = {"experiment": experiment, "output_dir": str(tmp_path / name), "seed": seed, "parameters": parameters}
    logs = []
    code = cli.run_experiment(cfg, check=check, log=logs.append)
    return code, tmp_path / name, logs


def _load(p):
    return json.loads(p.read_text())


def test_schema_rejects_bad_configs():
    with pytest.raises(cli.ValidationError):
        cli.validate_config({"experiment": "evolve", "parameters": {"beta": 1.0}})
    with pytest.raises(cli.ValidationError):
        cli.validate_config({"experiment": "nope", "parameters": {}})
    with pytest.raises(cli.ValidationError):
        cli.validate_config({"experiment": "evolve", "parameters": {"beta": 1.0, "dt": 1e-3, "T": 1, "grid": 48}})
    cli.validate_config({"experiment": "evolve", "parameters": {"beta": 1.0, "dt": 1e-3, "T": 1, "grid": 128}})


def test_invalid_config_exit_code(tmp_path):
    code, out, logs = _run(tmp_path, "homogenize", {"beta": -1.0})
    assert code == cli.EXIT_VALIDATION and not out.exists()
    assert "config error" in logs[0]


def test_overrides():
    cfg = {"experiment": "homogenize", "parameters": {"beta": 1.0}}
    new = cli.apply_overrides(cfg, ["a=2.5", "seed=4", "parameters.eta=0.3", "output_dir=x/y"])
    assert new == {"experiment": "homogenize", "seed": 4, "output_dir": "x/y",
                   "parameters": {"beta": 1.0, "a": 2.5, "eta": 0.3}}
    assert cfg["parameters"] == {"beta": 1.0}
    with pytest.raises(cli.ValidationError):
        cli.apply_overrides(cfg, ["nokey"])


def test_bifurcation_outputs(tmp_path):
    code, out, _ = _run(tmp_path, "bifurcation", {"eta": 0.0, "beta_grid": [1.0, 3.0, 4.0]}, check=True)
    assert code == 0
    lines = (out / "bifurcation.csv").read_text().splitlines()
    assert "a_min" in lines[0].split(",") and len(lines) == 4
    man = _load(out / "manifest.json")
    assert man["config_hash"] == cli.config_hash(man["config"])
    assert set(man["outputs"]) == {"bifurcation.csv", "summary.json"}
    assert all(c["passed"] for c in man["checks"].values())


def test_noncommute_report(tmp_path):
    code, out, _ = _run(tmp_path, "noncommute", {"eta": 0.5}, check=True)
    assert code == 0
    assert _load(out / "report.json")["relative_gap"] > 0


def test_evolve_uniform_is_steady(tmp_path):
    code, out, _ = _run(tmp_path, "evolve", {"beta": 1.0, "dt": 1e-3, "T": 0.05, "target": "uniform"})
    assert code == 0
    audit = _load(out / "audit.json")
    assert audit["sup_change"] < 1e-12 and audit["final_l1_to_target"] < 1e-12
    text = (out / "trace.csv").read_text()
    assert "nan" not in text.lower()


def test_rerun_is_reproducible_and_other_experiment_refused(tmp_path):
    params = {"N": 3, "beta": 1.0, "n_samples": 200, "n_chains": 4, "warmup": 50}
    code, out, _ = _run(tmp_path, "gibbs", params, seed=5)
    assert code == 0
    first = {p: (out / p).read_bytes() for p in _load(out / "manifest.json")["outputs"]}
    assert _run(tmp_path, "gibbs", params, seed=5)[0] == 0
    second = {p: (out / p).read_bytes() for p in _load(out / "manifest.json")["outputs"]}
    assert first == second
    summary = _load(out / "summary.json")
    assert 0 < summary["partition"]["energetic_ratio"] <= 1
    code, _, logs = _run(tmp_path, "homogenize", {"beta": 1.0})
    assert code == cli.EXIT_VALIDATION and "holds output" in logs[0]


def test_numerical_error_exit_code(tmp_path):
    code, out, _ = _run(tmp_path, "couple", {"beta": 0.3, "dt": 0.05, "T": 0.1})
    assert code == cli.EXIT_NUMERICAL
    man = _load(out / "manifest.json")
    assert man["status"] == cli.EXIT_NUMERICAL and "StepSizeError" in man["error"]


def test_failed_check_gives_statistical_exit(tmp_path):
    # far too few samples for the variance targets
    params = {"N": 10, "beta": 1.0, "n_samples": 20, "n_chains": 2, "warmup": 10}
    assert _run(tmp_path, "fluctuations", params, check=True)[0] == cli.EXIT_STATISTICAL
    assert _run(tmp_path, "fluctuations", params, check=False, name="o2")[0] == cli.EXIT_OK


def test_audit_reads_trace_relative_to_config(tmp_path):
    code, out, _ = _run(tmp_path, "evolve", {"beta": 4.0, "dt": 1e-3, "T": 0.2, "init": {"kind": "perturbed"}})
    assert code == 0
    cfg = {"experiment": "audit", "output_dir": str(tmp_path / "audit"),
           "parameters": {"trace": "out/trace.csv", "beta": 4.0}}
    cfg_path = tmp_path / "audit.json"
    cfg_path.write_text(json.dumps(cfg))
    assert cli.main(["run", str(cfg_path), "--check"]) == 0
    assert _load(tmp_path / "audit" / "audit.json")["monotone"] is True


def test_homogenize_and_couple(tmp_path):
    code, out, _ = _run(tmp_path, "homogenize", {"beta": 4.0}, check=True)
    assert code == 0 and (out / "corrector.csv").exists()
    code, out, _ = _run(tmp_path, "couple", {"beta": 0.3, "eta": 0.5, "T": 0.02, "replicas": 200, "frozen": True},
                        check=True, name="c")
    assert code == 0
    assert _load(out / "coupling.json")["c"] > 0


def test_msd_dump(tmp_path):
    code, out, _ = _run(tmp_path, "msd", {"beta": 4.0, "paths": 20, "dt": 1e-3, "T": 0.5, "record_dt": 0.1, "dump": True})
    assert code == 0
    from mvlab.io import read_binary
    paths, meta = read_binary(out / "paths.f64")
    assert paths.shape[1] == 20 and meta["record_every"] == 100


def test_cli_main_run_and_bad_file(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "missing.json")]) == cli.EXIT_VALIDATION
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "homogenize", "parameters": {"beta": 1.0}}))
    out = tmp_path / "h"
    assert cli.main(["run", str(cfg), "--set", f"output_dir={out}", "--set", "a=1.5"]) == 0
    assert _load(out / "effective_diffusion.json")["a"] == 1.5


def test_unwritable_output_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = {"experiment": "homogenize", "output_dir": str(blocker / "sub"), "parameters": {"beta": 1.0}}
    assert cli.run_experiment(cfg, log=lambda m: None) == cli.EXIT_IO


def test_check_suite_via_main(tmp_path, capsys):
    js = tmp_path / "r.json"
    assert cli.main(["check", "critical", "--json", str(js)]) == 0
    assert capsys.readouterr().out.startswith("PASS [1]")
    assert _load(js)[0]["passed"] is True


def test_module_entry_prints_schema():
    res = subprocess.run([sys.executable, "-m", "mvlab", "schema"], capture_output=True, text=True, check=True)
    schema = json.loads(res.stdout)
    assert schema["properties"]["experiment"]["enum"] == list(cli.EXPERIMENTS)
