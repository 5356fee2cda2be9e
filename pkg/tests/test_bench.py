import csv
import json
import os

import numpy as np
import pytest

from fmhsdm.bench import (
    ExperimentConfig,
    build_experiment_config,
    emit_plots,
    load_config_file,
    main,
    run_experiment,
)
from fmhsdm.errors import ConfigError
from fmhsdm.problems import (
    gen_problem_hyperplane,
    gen_problem_iiduka,
    hyperplane_recast_f0,
    iiduka_recast_f0,
    sample_x0,
)
from fmhsdm.solvers import SolverConfig, run


class TestGenerators:
    def test_iiduka_invariants(self):
        prob = gen_problem_iiduka(d=50, p11=0.5, seed=3)
        p = prob.meta["p_diag"]
        assert p[0] == 0.5
        assert p[-1] == 10.0
        assert np.all(p[1:-1] > 0.5) and np.all(p[1:-1] < 10.0)
        assert prob.smooth.lipschitz_L == pytest.approx(10.0)
        assert prob.dim == 150
        # the known solution is feasible for both balls and the consensus set
        x = prob.known_minimizer
        assert prob.finite_objective(x)[1]
        assert np.linalg.norm(prob.constraint_map.residual(x)) <= 1e-12

    def test_hyperplane_invariants(self):
        prob = gen_problem_hyperplane(d=50, p11=0.25, seed=3)
        p = prob.meta["p_diag"]
        assert p[0] == 0.25 and p[-1] == 10.0
        assert prob.known_minimizer[0] == 1.0
        assert np.linalg.norm(prob.known_minimizer[1:]) == 0.0

    def test_determinism_and_seed_sensitivity(self):
        a = gen_problem_iiduka(d=30, p11=1.0, seed=5)
        b = gen_problem_iiduka(d=30, p11=1.0, seed=5)
        c = gen_problem_iiduka(d=30, p11=1.0, seed=6)
        assert np.array_equal(a.meta["p_diag"], b.meta["p_diag"])
        assert not np.array_equal(a.meta["p_diag"], c.meta["p_diag"])

    def test_x0_on_unit_sphere(self):
        prob = gen_problem_hyperplane(d=40, p11=1.0, seed=2)
        x0 = sample_x0(prob, seed=2)
        assert np.linalg.norm(x0 - prob.known_minimizer) == pytest.approx(1.0)
        assert np.array_equal(x0, sample_x0(prob, seed=2))

    def test_recasts_preserve_solution(self):
        prob = gen_problem_iiduka(d=20, p11=1.0, seed=1)
        recast = iiduka_recast_f0(prob)
        assert recast.smooth.kind == "zero"
        assert np.array_equal(recast.known_minimizer, prob.known_minimizer)
        hp = gen_problem_hyperplane(d=20, p11=1.0, seed=1)
        recast2 = hyperplane_recast_f0(hp)
        assert recast2.dim == 2 * hp.dim
        trace = run(
            recast2,
            SolverConfig(
                variant="fm-hsdm-f0",
                lam=100.0,
                max_iters=3000,
                x0=np.tile(sample_x0(hp, seed=1), 2),
            ),
        )
        assert trace.distance[-1] <= 1e-3

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            gen_problem_iiduka(d=1, p11=1.0, seed=0)
        with pytest.raises(ValueError):
            gen_problem_iiduka(d=10, p11=0.0, seed=0)


class TestExperimentConfig:
    def test_defaults_fill_iters(self):
        cfg = ExperimentConfig(problem="hyperplane", d=10, runs=1).validate()
        assert cfg.iters == 5000

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(problem="nope"),
            dict(d=1),
            dict(p11=2.0),
            dict(runs=0),
            dict(iters=0),
            dict(solvers=[]),
            dict(solvers=["bogus"]),
            dict(problem="iiduka", solvers=["fm-hsdm-iii"]),
            dict(problem="iiduka", solvers=["fista"]),
        ],
    )
    def test_rejections(self, kwargs):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kwargs).validate()


def small_cfg(tmp_path, **overrides):
    base = dict(
        problem="hyperplane",
        d=12,
        p11=1.0,
        runs=2,
        iters=25,
        solvers=["fm-hsdm", "fm-hsdm-ii"],
        base_seed=0,
        output_dir=str(tmp_path / "out"),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestRunExperiment:
    def test_outputs_and_schema(self, tmp_path):
        cfg = small_cfg(tmp_path)
        result = run_experiment(cfg)
        assert not result.failures
        out = cfg.output_dir
        for name in ("fm-hsdm.csv", "fm-hsdm-ii.csv", "averaged.csv", "config.json",
                     "runs.log", "failures.log"):
            assert os.path.exists(os.path.join(out, name))
        with open(os.path.join(out, "fm-hsdm.csv"), newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["solver", "run", "iter", "metric", "value"]
        # 2 runs x 4 metrics x (iters + 1) rows
        assert len(rows) - 1 == 2 * 4 * 26
        with open(os.path.join(out, "config.json")) as fh:
            dump = json.load(fh)
        assert dump["runs"] == 2 and dump["iters"] == 25
        with open(os.path.join(out, "runs.log")) as fh:
            assert len(fh.read().strip().splitlines()) == 2

    def test_single_run_average_equals_trace(self, tmp_path):
        cfg = small_cfg(tmp_path, runs=1, solvers=["fm-hsdm"])
        result = run_experiment(cfg)
        prob = gen_problem_hyperplane(cfg.d, cfg.p11, cfg.base_seed)
        lam = 0.99 * 2.0 * 0.5 / prob.smooth.lipschitz_L
        trace = run(
            prob,
            SolverConfig(
                variant="fm-hsdm-g0",
                lam=lam,
                max_iters=cfg.iters,
                x0=sample_x0(prob, cfg.base_seed),
            ),
        )
        assert np.array_equal(
            result.curves["fm-hsdm"]["distance"], np.asarray(trace.distance)
        )

    def test_byte_identical_reruns(self, tmp_path):
        cfg1 = small_cfg(tmp_path, output_dir=str(tmp_path / "a"))
        cfg2 = small_cfg(tmp_path, output_dir=str(tmp_path / "b"))
        run_experiment(cfg1)
        run_experiment(cfg2)
        for name in ("fm-hsdm.csv", "fm-hsdm-ii.csv", "averaged.csv"):
            with open(os.path.join(cfg1.output_dir, name), "rb") as fh:
                a = fh.read()
            with open(os.path.join(cfg2.output_dir, name), "rb") as fh:
                b = fh.read()
            assert a == b

    def test_averaged_curves_decrease(self, tmp_path):
        cfg = small_cfg(tmp_path, iters=200, solvers=["fm-hsdm"])
        result = run_experiment(cfg)
        dist = result.curves["fm-hsdm"]["distance"]
        assert dist[-1] < 1e-3 * dist[0]


class TestPlots:
    def test_emit_from_averaged_csv(self, tmp_path):
        cfg = small_cfg(tmp_path, plots=True)
        run_experiment(cfg)
        for metric in ("distance", "objective_gap", "fp_residual"):
            for ext in (".svg", ".gp", ".dat"):
                assert os.path.exists(os.path.join(cfg.output_dir, metric + ext))

    def test_bad_header_rejected(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ConfigError):
            emit_plots(str(bad), str(tmp_path))

    def test_empty_rejected(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("solver,iter,metric,mean\n")
        with pytest.raises(ConfigError):
            emit_plots(str(empty), str(tmp_path))


class TestConfigFile:
    def test_load_and_types(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text(
            'problem = "hyperplane"  # family\n'
            "d = 12\n"
            "p11 = 0.5\n"
            "runs = 2\n"
            'solvers = ["fm-hsdm", "fista"]\n'
            "plots = false\n"
        )
        data = load_config_file(str(path))
        assert data["problem"] == "hyperplane"
        assert data["d"] == 12
        assert data["p11"] == 0.5
        assert data["solvers"] == ["fm-hsdm", "fista"]
        assert data["plots"] is False

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text('problem = "hyperplane"\nd = 12\nruns = 4\n')

        class Args:
            problem = None
            d = None
            p11 = None
            runs = 7
            iters = 25
            solvers = "fm-hsdm"
            seed = None
            out = str(tmp_path / "o")
            certificates = None
            plots = None

        cfg = build_experiment_config(Args(), load_config_file(str(path)))
        assert cfg.runs == 7
        assert cfg.d == 12
        assert cfg.solvers == ["fm-hsdm"]

    def test_unknown_key_rejected(self, tmp_path):
        class Args:
            problem = d = p11 = runs = iters = solvers = seed = None
            out = certificates = plots = None

        with pytest.raises(ConfigError):
            build_experiment_config(Args(), {"bogus": 1})


class TestCli:
    def test_success_exit_code(self, tmp_path):
        code = main(
            [
                "--problem", "hyperplane", "--d", "12", "--runs", "1",
                "--iters", "20", "--solvers", "fm-hsdm",
                "--out", str(tmp_path / "cli_out"),
            ]
        )
        assert code == 0
        assert os.path.exists(tmp_path / "cli_out" / "averaged.csv")

    def test_config_error_exit_code(self, tmp_path):
        assert main(["--problem", "iiduka", "--solvers", "fista",
                     "--out", str(tmp_path / "x")]) == 2

    def test_missing_config_file_exit_code(self, tmp_path):
        assert main(["--config", str(tmp_path / "absent.toml")]) == 2
