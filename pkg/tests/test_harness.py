import csv
import functools
import json

import numpy as np
import pytest

from topt import cli, harness
from topt.fixedpoint import StopCriteria
from topt.harness import (CSV_COLUMNS, TIMING_COLUMNS, ConfigError, ExperimentConfig, emit_diagnostics,
                          mesh_levels, run_experiment, run_mesh_sweep, run_sweep_alpha, speedups)
from topt.report import SolveReport, Status
from topt.transport import SemiLagrangian

SMALL = {
    "dataset": {"kind": "sinusoidal", "n": 16, "nt": 2, "gamma": 0},
    "model": {"kind": "advection", "alpha": 1e-2},
    "stop": {"eps_rel": 5e-2, "n_iter": 20},
    "methods": [{"type": "rpgd"}, {"type": "ga", "w": [2, 5], "schedule": [[1, 0], [2, 1]]},
                {"type": "nk", "preconditioner": "h0rpc"}],
}


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_parses(self):
        cfg = ExperimentConfig.from_dict(SMALL)
        assert [c.label for c in cfg.cells] == ["RPGD", "GA-NGMRES(2;1,0)", "GA-NGMRES(5;1,0)",
                                                "GA-NGMRES(2;2,1)", "GA-NGMRES(5;2,1)", "NK(h0rpc)"]
        assert cfg.stop == StopCriteria(5e-2, 20)

    @pytest.mark.parametrize("patch", [
        {"extra": 1},
        {"dataset": {"kind": "rect", "n": 15}},
        {"dataset": {"kind": "brain", "n": 16}},
        {"model": {"kind": "advection", "alpha": 0}},
        {"methods": [{"type": "ga", "w": 0}]},
        {"methods": [{"type": "rpgd", "w": 3}]},
        {"methods": []},
    ])
    def test_rejects(self, patch):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**SMALL, **patch})

    def test_sweep_grid_size(self):
        doc = {**SMALL, "methods": [{"type": "ga", "w": [1, 5, 10, 15, 20, 25, 50],
                                     "schedule": [[1, 0], [5, 1], [1, 5], [5, 5]]}]}
        assert len(ExperimentConfig.from_dict(doc).cells) == 28

    def test_infinite_depth(self):
        cfg = ExperimentConfig.from_dict({**SMALL, "methods": [{"type": "ga", "w": "inf"}]})
        assert cfg.cells[0].accel.w is None

    def test_mesh_levels(self):
        cfg = ExperimentConfig.from_dict({**SMALL, "dataset": {"kind": "rect", "n": 64, "nt": 4, "gamma": 1},
                                          "sweep": {"n": [64, 128]}})
        assert mesh_levels(cfg, "fixed") == [(64, 4, 1.0), (128, 8, 1.0)]
        assert mesh_levels(cfg, "scaled") == [(64, 4, 1.0), (128, 8, 2.0)]


class TestRun:
    def test_csv_schema_and_determinism(self, tmp_path):
        cfg = ExperimentConfig.from_dict(SMALL)
        run_experiment(cfg, tmp_path / "a")
        run_experiment(cfg, tmp_path / "b")
        header = (tmp_path / "a" / "results.csv").read_text().splitlines()[0]
        assert header == "run,method,w,sigma,tau,iters,pdes,matvecs,dist,grad,t_pdes,t_q,t_f,t_ls,t_total,status"
        a, b = read_rows(tmp_path / "a" / "results.csv"), read_rows(tmp_path / "b" / "results.csv")
        assert len(a) == len(cfg.cells)
        strip = lambda rows: [{k: v for k, v in r.items() if k not in TIMING_COLUMNS} for r in rows]
        assert strip(a) == strip(b)
        for r in a:
            assert int(r["pdes"]) >= int(r["iters"])
            assert float(r["dist"]) >= 0 and float(r["grad"]) >= 0
            assert all(float(r[c]) >= 0 for c in TIMING_COLUMNS)

    def test_matched_images(self):
        cfg = ExperimentConfig.from_dict({**SMALL, "methods": [{"type": "rpgd"}]})
        spec = cfg.problem_spec()
        spec.reference = spec.template.copy()
        v, rep = harness.run_cell(spec, cfg.cells[0], cfg.stop)
        assert rep.iters == 0 and rep.dist == 0.0

    def test_status_semantics(self, tmp_path):
        doc = {**SMALL, "stop": {"eps_rel": 1e-9, "n_iter": 3}}
        reports = run_experiment(ExperimentConfig.from_dict(doc), tmp_path)
        for r in reports:
            assert (r.status is Status.ITERCAP) == (r.iters == 3 and r.grad > 1e-9)

    def test_alpha_sweep(self, tmp_path):
        doc = {**SMALL, "methods": [{"type": "rpgd"}, {"type": "ga", "w": 5}], "sweep": {"alpha": [1e-1, 1e-2]}}
        out = run_sweep_alpha(ExperimentConfig.from_dict(doc), tmp_path)
        rows = read_rows(tmp_path / "alpha_sweep.csv")
        assert len(out) == 4 and list(rows[0]) == ["alpha", *CSV_COLUMNS, "speedup"]
        assert float(rows[0]["speedup"]) == 1.0

    def test_mesh_sweep(self, tmp_path):
        doc = {**SMALL, "methods": [{"type": "ga", "w": 5}], "sweep": {"n": [16, 32]}}
        out = run_mesh_sweep(ExperimentConfig.from_dict(doc), tmp_path)
        assert [(k[0], k[1], k[2]) for k, _ in out] == [("fixed", 16, 2), ("fixed", 32, 4), ("scaled", 16, 2),
                                                       ("scaled", 32, 4)]

    def test_speedups(self):
        assert speedups([2.0, 2.0], [True, False]) == [1.0, 1.0]
        assert speedups([4.0, 1.0], [True, False]) == [1.0, 4.0]


class TestCounters:
    def test_pdes_equal_sweep_calls(self, monkeypatch):
        calls = {"n": 0}

        def counting(fn):
            @functools.wraps(fn)
            def wrapper(*a, **kw):
                calls["n"] += 1
                return fn(*a, **kw)
            return wrapper

        for name in ("forward", "backward", "tangent"):
            monkeypatch.setattr(SemiLagrangian, name, counting(getattr(SemiLagrangian, name)))
        cfg = ExperimentConfig.from_dict(SMALL)
        spec = cfg.problem_spec()
        for cell in cfg.cells:
            calls["n"] = 0
            _, rep = harness.run_cell(spec, cell, cfg.stop)
            assert rep.pdes == calls["n"], cell.label


class TestDiagnostics:
    def test_zero_velocity(self, tmp_path):
        spec = ExperimentConfig.from_dict(SMALL).problem_spec()
        out = emit_diagnostics(np.zeros((2, 16, 16)), spec, tmp_path)
        assert out["det_grad_y"] == {"min": 1.0, "mean": 1.0, "max": 1.0, "std": 0.0}
        assert json.loads((tmp_path / "diagnostics.json").read_text())["det_grad_y"]["min"] == 1.0
        for name in ("m_final", "residual", "flow_map", "det_grad_y"):
            assert (tmp_path / f"{name}.f2d").exists()

    def test_io_error_has_path(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        spec = ExperimentConfig.from_dict(SMALL).problem_spec()
        with pytest.raises(OSError, match="file"):
            emit_diagnostics(np.zeros((2, 16, 16)), spec, blocker / "sub")


class TestCli:
    def test_config_error_exit(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({**SMALL, "bogus": True}))
        assert cli.main(["run", str(p)]) == 2
        assert "bogus" in capsys.readouterr().err

    def test_malformed_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{")
        assert cli.main(["run", str(p)]) == 2

    def test_run(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({**SMALL, "methods": [{"type": "rpgd"}]}))
        assert cli.main(["run", str(p), "--out", str(tmp_path / "out"), "--strict"]) == 0
        assert len(read_rows(tmp_path / "out" / "results.csv")) == 1

    def test_strict_stagnation(self, tmp_path, monkeypatch):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(SMALL))
        monkeypatch.setattr(cli, "run_experiment", lambda *a: [SolveReport("x", status=Status.STAGNATED)])
        assert cli.main(["run", str(p), "--out", str(tmp_path), "--strict"]) == 1
        assert cli.main(["run", str(p), "--out", str(tmp_path)]) == 0

    def test_gen(self, tmp_path):
        assert cli.main(["gen", "rect", "--n", "16", "--out", str(tmp_path)]) == 0
        assert {f.name for f in tmp_path.iterdir()} == {"m0.f2d", "m1.f2d", "m0.pgm", "m1.pgm"}

    def test_check(self, capsys):
        assert cli.main(["check"]) == 0
        assert capsys.readouterr().out.count("PASS") == 5
