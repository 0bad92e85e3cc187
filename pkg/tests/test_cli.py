"""Config parsing, orchestration, resume and plot output."""

import json

import pytest

from sigma_gap import cli
from sigma_gap.cli import (
    ConfigError,
    emit_plot,
    log_beta_grid,
    main,
    parse_config,
    run_experiment,
    worker_count,
)


@pytest.fixture(autouse=True)
def serial(monkeypatch):
    monkeypatch.setenv("SIGMA_GAP_THREADS", "1")


def config(tmp_path, **body):
    body.setdefault("output_dir", str(tmp_path / "out"))
    return json.dumps(body)


def test_minimal_vqe_config():
    cfg = parse_config('{"mode": "vqe", "hamiltonian": {"n_sites": 4, "beta": 0.1},'
                       ' "ansatz": {"kind": "S2D", "layers": 5}}')
    assert cfg.ansatz.build().n_params == 34
    assert cfg.optimizer.lr_init == 0.1
    assert cfg.optimizer.max_epochs == 2000
    assert cfg.restarts == 100
    assert cfg.dmrg.cutoff == 1e-10


def test_layers_default_to_table():
    cfg = parse_config('{"mode": "vqe", "hamiltonian": {"n_sites": 6, "beta": 0.1}, "ansatz": {"kind": "QMPS"}}')
    assert cfg.ansatz.layers == 8
    assert cfg.ansatz.build().n_params == 80


def test_ci_profile_defaults_and_override():
    cfg = parse_config('{"mode": "grad-scan", "profile": "ci"}')
    assert (cfg.restarts, cfg.n_inits) == (10, 25)
    cfg = parse_config('{"mode": "grad-scan", "profile": "ci", "n_inits": 40}')
    assert cfg.n_inits == 40


def test_ccharge_default_grid():
    cfg = parse_config('{"mode": "ccharge-scan"}')
    assert cfg.scan.betas == log_beta_grid()
    assert len(cfg.scan.betas) == 8
    assert cfg.scan.betas[0] == pytest.approx(0.1) and cfg.scan.betas[-1] == pytest.approx(10.0)
    assert cfg.scan.methods == ["DMRG"]


@pytest.mark.parametrize("text,needle", [
    ('{"mode": "ed", "hamiltonian": {"n_sites": 4, "beta": 0.1}, "colour": 1}', "colour"),
    ('{"mode": "ed", "hamiltonian": {"n_sites": 4, "beta": 0.1, "spin": 1}}', "spin"),
    ('{"mode": "ed", "hamiltonian": {"n_sites": 4, "beta": -0.1}}', "hamiltonian.beta"),
    ('{"mode": "ed", "hamiltonian": {"n_sites": 1, "beta": 0.1}}', "hamiltonian.n_sites"),
    ('{"mode": "ed", "hamiltonian": {"n_sites": 4, "beta": 0.1, "l_max": "1"}}', "l_max"),
    ('{"mode": "ed"}', "hamiltonian"),
    ('{"mode": "fit"}', "mode"),
    ('{"mode": "ed", "hamiltonian": {"n_sites": 4, "beta": 0.1}, "optimizer": {"lr_init": -1}}', "optimizer"),
    ('{"mode": "ed", "hamiltonian": {"n_sites": 4, "beta": 0.1}, "restarts": 1}', "restarts"),
    ('{"mode": "vqe", "hamiltonian": {"n_sites": 4, "beta": 0.1, "l_max": "3/2"}, "ansatz": {"kind": "S2D"}}',
     "l_max"),
    ('{"mode": "ccharge-scan", "scan": {"n_sites": [4, 6]}}', "scan.n_sites"),
    ('{"mode": "entropy-scan", "scan": {"methods": ["QMC"]}}', "scan.methods"),
    ('{"mode": "grad-scan", "scan": {"n_sites": [12]}}', "12 sites"),
])
def test_validation_names_the_field(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(text)


def test_parse_error_has_position():
    with pytest.raises(ConfigError, match="line 2, column"):
        parse_config('{"mode": "ed",\n  "hamiltonian": {,}}')


def test_config_echo_round_trip():
    cfg = parse_config('{"mode": "entropy-scan", "scan": {"l_max": ["1/2", "3/2"], "betas": [0.1]}, "master_seed": 5}')
    again = parse_config(json.dumps(cfg.to_dict()))
    assert again.to_dict() == cfg.to_dict()
    assert again.fingerprint() == cfg.fingerprint()


def test_worker_cap(monkeypatch):
    cfg = parse_config('{"mode": "grad-scan", "workers": 8}')
    monkeypatch.setenv("SIGMA_GAP_THREADS", "3")
    assert worker_count(cfg) == 3
    monkeypatch.delenv("SIGMA_GAP_THREADS")
    assert worker_count(cfg) == 8


def test_ed_record(tmp_path):
    cfg = parse_config(config(tmp_path, mode="ed", hamiltonian={"n_sites": 4, "beta": 0.1, "l_max": "1/2"}))
    record, code = run_experiment(cfg)
    assert code == 0
    assert record.payload["energy"] == pytest.approx(14.911111111111111, abs=1e-12)
    assert record.payload["entropy"] == pytest.approx(0.836988216785845, abs=1e-12)
    assert not record.payload["degenerate"]
    saved = json.loads((tmp_path / "out" / "record.json").read_text())
    assert saved["config"]["hamiltonian"]["beta"] == 0.1
    assert saved["version"] == cli.__version__
    assert saved["seeds"]["master_seed"] == 0


def test_ham_mode_writes_operator_files(tmp_path):
    cfg = parse_config(config(tmp_path, mode="ham", hamiltonian={"n_sites": 4, "beta": 0.1}))
    record, _ = run_experiment(cfg)
    assert record.payload["pauli_terms"] == 13
    assert (tmp_path / "out" / "hamiltonian.txt").exists()


def test_vqe_record_holds_runs(tmp_path):
    cfg = parse_config(config(tmp_path, mode="vqe", hamiltonian={"n_sites": 4, "beta": 0.1},
                              ansatz={"kind": "S2D"}, restarts=2))
    record, _ = run_experiment(cfg)
    runs = record.payload["runs"]
    assert len(runs) == 2
    assert {"seed", "energy_trajectory", "best_params"} <= set(runs[0])
    assert record.payload["energy"] == pytest.approx(14.911111111111111, rel=1e-3)


def test_dmrg_mode_checkpoint(tmp_path):
    from sigma_gap.tensornet import read_mps

    cfg = parse_config(config(tmp_path, mode="dmrg", hamiltonian={"n_sites": 6, "beta": 0.1}))
    record, _ = run_experiment(cfg)
    mps = read_mps(tmp_path / "out" / record.payload["mps_file"])
    assert mps.n_sites == 6


SCAN = {"mode": "entropy-scan", "scan": {"n_sites": [4, 6], "betas": [0.1, 10.0], "methods": ["ED", "DMRG"]},
        "master_seed": 11}


def test_scan_writes_records_and_csv(tmp_path):
    cfg = parse_config(config(tmp_path, **SCAN))
    record, code = run_experiment(cfg)
    out = tmp_path / "out"
    assert code == 0
    assert len(list((out / "records").glob("*.json"))) == 8
    rows = (out / "entropy.csv").read_text().splitlines()
    assert rows[0] == "n_sites,beta,l_max_x2,method,energy,energy_density,entropy,seed"
    assert len(rows) == 9
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["completed"]) == 8


def test_scan_is_deterministic(tmp_path):
    a = parse_config(config(tmp_path, **{**SCAN, "output_dir": str(tmp_path / "a")}))
    b = parse_config(config(tmp_path, **{**SCAN, "output_dir": str(tmp_path / "b")}))
    run_experiment(a)
    run_experiment(b)
    assert (tmp_path / "a" / "entropy.csv").read_bytes() == (tmp_path / "b" / "entropy.csv").read_bytes()


def test_seed_changes_vqe_rows(tmp_path):
    base = {"mode": "entropy-scan", "scan": {"n_sites": [4], "betas": [0.1], "methods": ["VQE-S2D"]}, "restarts": 2}
    run_experiment(parse_config(config(tmp_path, **{**base, "output_dir": str(tmp_path / "a"), "master_seed": 1})))
    run_experiment(parse_config(config(tmp_path, **{**base, "output_dir": str(tmp_path / "b"), "master_seed": 2})))
    assert (tmp_path / "a" / "entropy.csv").read_text() != (tmp_path / "b" / "entropy.csv").read_text()


def test_failed_cell_then_resume(tmp_path, monkeypatch):
    cfg = parse_config(config(tmp_path, **SCAN))
    real = cli.solve_dmrg
    calls = []

    def flaky(spec, config, seed):
        calls.append((spec.n_sites, spec.beta))
        if spec.n_sites == 6 and spec.beta == 10.0:
            raise RuntimeError("simulated crash")
        return real(spec, config, seed)

    monkeypatch.setattr(cli, "solve_dmrg", flaky)
    _, code = run_experiment(cfg)
    assert code == 1
    out = tmp_path / "out"
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["completed"]) == 7
    assert list(manifest["failed"]) == ["N6_beta10.0_l1_DMRG"]
    assert len((out / "entropy.csv").read_text().splitlines()) == 8

    monkeypatch.setattr(cli, "solve_dmrg", real)
    ed_calls = []
    real_ed = cli.solve_ed
    monkeypatch.setattr(cli, "solve_ed", lambda spec: ed_calls.append(spec) or real_ed(spec))
    _, code = run_experiment(cfg, resume=True)
    assert code == 0
    assert ed_calls == []  # only the missing DMRG cell ran
    assert len((out / "entropy.csv").read_text().splitlines()) == 9

    fresh = tmp_path / "fresh"
    run_experiment(parse_config(config(tmp_path, **{**SCAN, "output_dir": str(fresh)})))
    assert (out / "entropy.csv").read_bytes() == (fresh / "entropy.csv").read_bytes()


def test_resume_rejects_changed_config(tmp_path):
    run_experiment(parse_config(config(tmp_path, **SCAN)))
    changed = parse_config(config(tmp_path, **{**SCAN, "master_seed": 12}))
    with pytest.raises(ConfigError):
        run_experiment(changed, resume=True)


def test_vqe_cells_respect_profile_cap(tmp_path):
    cfg = parse_config(config(tmp_path, mode="entropy-scan", profile="ci",
                              scan={"n_sites": [10], "betas": [0.1], "methods": ["VQE-S2D"]}))
    cells, skipped = cli.scan_cells(cfg)
    assert cells == [] and len(skipped) == 1


def test_ccharge_scan_layout(tmp_path):
    cfg = parse_config(config(tmp_path, mode="ccharge-scan",
                              scan={"n_sites": [2, 4, 6], "betas": [0.1, 10.0], "l_max": ["1/2", "3/2"],
                                    "methods": ["DMRG"]}))
    record, code = run_experiment(cfg)
    assert code == 0
    rows = (tmp_path / "out" / "ccharge.csv").read_text().splitlines()
    assert rows[0] == "beta,l_max_x2,method,c,s0,residual_rms,n_points,seed"
    keys = {tuple(r.split(",")[:2]) for r in rows[1:]}
    assert keys == {("0.1", "1"), ("10.0", "1"), ("0.1", "3"), ("10.0", "3")}


def test_grad_scan_csv(tmp_path):
    cfg = parse_config(config(tmp_path, mode="grad-scan", scan={"n_sites": [4, 6]}, n_inits=4))
    run_experiment(cfg)
    rows = (tmp_path / "out" / "gradient.csv").read_text().splitlines()
    assert rows[0] == "n_sites,ansatz,layers,n_params,n_inits,grad_std,method,seed"
    assert [r.split(",")[:4] for r in rows[1:]] == [["4", "S2D", "5", "34"], ["6", "S2D", "10", "106"]]


def test_emit_plot_deterministic(tmp_path):
    run_experiment(parse_config(config(tmp_path, **SCAN)))
    csv_path = tmp_path / "out" / "entropy.csv"
    a = emit_plot(csv_path, "entropy", tmp_path / "a.svg")
    b = emit_plot(csv_path, "entropy", tmp_path / "b.svg")
    assert a.read_bytes() == b.read_bytes()
    assert b"stroke-dasharray" in a.read_bytes()  # reference curve
    emit_plot(csv_path, "energy", tmp_path / "e.svg")


def test_emit_plot_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("n_sites,beta,l_max_x2,method,energy,energy_density,entropy,seed\n")
    with pytest.raises(ValueError):
        emit_plot(empty, "entropy", tmp_path / "x.svg")
    assert not (tmp_path / "x.svg").exists()
    with pytest.raises(ValueError):
        emit_plot(empty, "gradient", tmp_path / "y.svg")


def test_main_exit_codes(tmp_path, capsys):
    good = tmp_path / "ed.json"
    good.write_text(json.dumps({"mode": "ed", "hamiltonian": {"n_sites": 4, "beta": 0.1}}))
    assert main(["ed", "--config", str(good), "--output-dir", str(tmp_path / "o"), "--seed", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["energy"] == pytest.approx(14.911111111111111)
    assert json.loads((tmp_path / "o" / "record.json").read_text())["seeds"]["master_seed"] == 3
    bad = tmp_path / "bad.json"
    bad.write_text('{"mode": "ed", "hamiltonian": {"n_sites": 4, "beta": -2}}')
    assert main(["ed", "--config", str(bad)]) == 2
    assert "beta" in capsys.readouterr().err
    assert main(["dmrg", "--config", str(good)]) == 2
