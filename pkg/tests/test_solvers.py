import numpy as np
import pytest

from fmhsdm.errors import (
    DivergenceError,
    StepSizeError,
    UnsupportedProblemError,
    VariantMismatchError,
)
from fmhsdm.linalg import SymOperator
from fmhsdm.maps import AffineFneMap, make_hyperplane_projection
from fmhsdm.objectives import Problem, make_quadratic, make_zero_prox, make_zero_smooth
from fmhsdm.problems import gen_problem_hyperplane, gen_problem_iiduka, sample_x0
from fmhsdm.solvers import (
    SolverConfig,
    run,
    run_fm_hsdm,
    run_fm_hsdm_f0,
    run_fm_hsdm_g0,
    run_fm_hsdm_iii,
    run_hcgm,
    run_hsdm,
    validate_step_size,
)


def scalar_problem(constant_target=True, family=None):
    """1-D instance: f(x) = x^2 / 2 constrained to x = 1.

    With constant_target=True the constraint map is the constant map x -> 1
    (the metric projection onto {1}); the minimizer is 1.
    """
    if constant_target:
        T = AffineFneMap(SymOperator.zero(1), np.array([1.0]))
    else:
        T = AffineFneMap(SymOperator.identity(1), np.zeros(1))
    meta = {}
    if family == "hyperplane":
        meta = {
            "family": "hyperplane",
            "d": 1,
            "p_diag": np.array([1.0]),
            "num_blocks": 1,
            "hyperplane_a": np.array([1.0]),
            "hyperplane_b": 1.0,
        }
    return Problem(
        smooth=make_quadratic(SymOperator.diagonal([1.0])),
        prox=make_zero_prox(),
        constraint_map=T,
        block_dims=[1],
        known_minimizer=np.array([1.0]) if constant_target else None,
        meta=meta,
    )


class TestStepSizeGate:
    def test_accepts_interior(self):
        assert validate_step_size("fm-hsdm", 0.5, 0.5, 1.0) == pytest.approx(1.0)
        assert validate_step_size("fm-hsdm-iii", 0.5, 0.25, 1.0) == pytest.approx(0.5)
        assert np.isinf(validate_step_size("fm-hsdm-f0", 0.5, 100.0, 1.0))

    @pytest.mark.parametrize(
        "variant,alpha,lam",
        [
            ("fm-hsdm", 0.4, 0.1),  # alpha below 1/2
            ("fm-hsdm", 1.0, 0.1),  # alpha at 1
            ("fm-hsdm", 0.5, 0.0),  # lam not positive
            ("fm-hsdm", 0.5, 1.0),  # lam at the closed endpoint 2(1-alpha)/L
            ("fm-hsdm-g0", 0.5, 1.5),
            ("fm-hsdm-iii", 0.5, 0.5),  # endpoint 2(1-alpha)^2/L
            ("fm-hsdm-f0", 0.5, -1.0),
        ],
    )
    def test_rejects(self, variant, alpha, lam):
        with pytest.raises(StepSizeError):
            validate_step_size(variant, alpha, lam, 1.0)


class TestScalarOracles:
    def test_fm_hsdm_first_iterates(self):
        # hand-computed with alpha = 1/2, lam = 1/4, x0 = 0
        cfg = SolverConfig(
            variant="fm-hsdm",
            alpha=0.5,
            lam=0.25,
            max_iters=3,
            x0=np.zeros(1),
            record_iterates=True,
        )
        trace = run_fm_hsdm(scalar_problem(), cfg)
        got = [it[0] for it in trace.iterates]
        assert got == pytest.approx([0.0, 0.5, 0.875, 1.03125], abs=1e-15)

    def test_fm_hsdm_iii_first_iterates(self):
        cfg = SolverConfig(
            variant="fm-hsdm-iii",
            alpha=0.5,
            lam=0.25,
            max_iters=3,
            x0=np.zeros(1),
            record_iterates=True,
        )
        trace = run_fm_hsdm_iii(scalar_problem(), cfg)
        got = [it[0] for it in trace.iterates]
        assert got == pytest.approx([0.0, 0.375, 0.828125, 1.083984375], abs=1e-15)

    def test_hsdm_first_iterates(self):
        # default schedule 2(1-alpha)/(L (n+1)) = 1/(n+1) here
        cfg = SolverConfig(
            variant="hsdm", alpha=0.5, max_iters=3, x0=np.zeros(1), record_iterates=True
        )
        trace = run_hsdm(scalar_problem(family="hyperplane"), cfg)
        got = [it[0] for it in trace.iterates]
        assert got == pytest.approx([0.0, 0.0, 0.5, 2.0 / 3.0], abs=1e-15)

    def test_hcgm_first_iterate(self):
        # d0 = -grad(0) = 0, so x1 = T(0) = 1 and the constant map keeps it
        cfg = SolverConfig(
            variant="hcgm", max_iters=3, x0=np.zeros(1), record_iterates=True
        )
        trace = run_hcgm(scalar_problem(family="hyperplane"), cfg)
        got = [it[0] for it in trace.iterates]
        assert got == pytest.approx([0.0, 1.0, 1.0, 1.0], abs=1e-15)

    def test_fm_hsdm_converges_to_constrained_minimizer(self):
        cfg = SolverConfig(variant="fm-hsdm", alpha=0.5, lam=0.25, max_iters=200)
        trace = run_fm_hsdm(scalar_problem(), cfg)
        assert abs(trace.x_final[0] - 1.0) <= 1e-10
        assert trace.distance[-1] <= 1e-10


class TestVariantEquivalences:
    def test_g0_bitwise_equals_full_method(self):
        prob = gen_problem_hyperplane(d=30, p11=1.0, seed=5)
        x0 = sample_x0(prob, seed=5)
        cfg = dict(alpha=0.5, lam=0.09, max_iters=50, x0=x0, record_iterates=True)
        full = run_fm_hsdm(prob, SolverConfig(variant="fm-hsdm", **cfg))
        g0 = run_fm_hsdm_g0(prob, SolverConfig(variant="fm-hsdm-g0", **cfg))
        for a, b in zip(full.iterates, g0.iterates):
            assert np.array_equal(a, b)

    def test_f0_equals_full_method_when_smooth_is_zero(self):
        T = make_hyperplane_projection(np.array([1.0, 1.0, 0.0]), 1.0)
        prob = Problem(
            smooth=make_zero_smooth(),
            prox=make_zero_prox(),
            constraint_map=T,
            block_dims=[3],
        )
        x0 = np.array([2.0, -1.0, 3.0])
        cfg = dict(alpha=0.6, lam=0.3, max_iters=40, x0=x0, record_iterates=True)
        full = run_fm_hsdm(prob, SolverConfig(variant="fm-hsdm", **cfg))
        f0 = run_fm_hsdm_f0(prob, SolverConfig(variant="fm-hsdm-f0", **cfg))
        for a, b in zip(full.iterates, f0.iterates):
            assert np.allclose(a, b, atol=1e-14)

    def test_iii_reduces_to_gradient_descent_when_T_is_identity(self):
        prob = scalar_problem(constant_target=False)
        lam = 0.3
        cfg = SolverConfig(
            variant="fm-hsdm-iii",
            alpha=0.5,
            lam=lam,
            max_iters=10,
            x0=np.array([4.0]),
            record_iterates=True,
        )
        trace = run_fm_hsdm_iii(prob, cfg)
        x = 4.0
        for it in trace.iterates:
            assert it[0] == pytest.approx(x, abs=1e-14)
            x = x - lam * x

    def test_iii_rejects_nonzero_prox(self):
        prob = gen_problem_iiduka(d=4, p11=1.0, seed=0)
        with pytest.raises(VariantMismatchError):
            run_fm_hsdm_iii(prob, SolverConfig(variant="fm-hsdm-iii", lam=0.01))


class TestTraceBookkeeping:
    def test_lengths_and_optional_fields(self):
        prob = gen_problem_hyperplane(d=10, p11=1.0, seed=1)
        cfg = SolverConfig(variant="fm-hsdm", lam=0.05, max_iters=20)
        trace = run(prob, cfg)
        assert len(trace) == 21
        assert len(trace.objective) == 21
        assert len(trace.feasible) == 21
        assert len(trace.distance) == 21
        assert trace.iterates is None and trace.duals is None

    def test_certificate_recording(self):
        prob = gen_problem_hyperplane(d=10, p11=1.0, seed=1)
        cfg = SolverConfig(
            variant="fm-hsdm", lam=0.05, max_iters=20, record_certificates=True
        )
        trace = run(prob, cfg)
        assert len(trace.iterates) == 21
        # dual vectors and half points start with iterate 1
        assert len(trace.duals) == 20
        assert len(trace.half_iterates) == 20

    def test_zero_iterations(self):
        prob = gen_problem_hyperplane(d=6, p11=1.0, seed=2)
        trace = run(prob, SolverConfig(variant="fm-hsdm", lam=0.05, max_iters=0))
        assert len(trace) == 1

    def test_early_stop_shortens_trace(self):
        cfg = SolverConfig(
            variant="fm-hsdm",
            lam=0.25,
            max_iters=10000,
            x0=np.zeros(1),
            early_stop_tol=1e-12,
        )
        trace = run_fm_hsdm(scalar_problem(), cfg)
        assert len(trace) < 10001

    def test_determinism(self):
        prob = gen_problem_iiduka(d=20, p11=1.0, seed=3)
        x0 = sample_x0(prob, seed=3)
        cfg = SolverConfig(variant="fm-hsdm", lam=0.09, max_iters=60, x0=x0)
        a = run(prob, cfg)
        b = run(prob, cfg)
        assert np.array_equal(a.x_final, b.x_final)
        assert a.fp_residual == b.fp_residual

    def test_x0_dimension_mismatch(self):
        prob = gen_problem_hyperplane(d=6, p11=1.0, seed=2)
        with pytest.raises(ValueError):
            run(prob, SolverConfig(variant="fm-hsdm", lam=0.05, x0=np.zeros(3)))

    def test_unknown_variant(self):
        prob = gen_problem_hyperplane(d=6, p11=1.0, seed=2)
        with pytest.raises(ValueError):
            run(prob, SolverConfig(variant="nope"))


class TestGuards:
    def test_divergence_error(self):
        prob = scalar_problem(family="hyperplane")
        cfg = SolverConfig(
            variant="hsdm", max_iters=5, x0=np.zeros(1), step_schedule=lambda n: -2e12
        )
        with pytest.raises(DivergenceError) as err:
            run_hsdm(prob, cfg)
        assert err.value.iteration == 1

    def test_fista_iiduka_unsupported(self):
        prob = gen_problem_iiduka(d=4, p11=1.0, seed=0)
        with pytest.raises(UnsupportedProblemError):
            run(prob, SolverConfig(variant="fista"))

    def test_adapters_need_known_family(self):
        prob = scalar_problem()
        for variant in ("hsdm", "hcgm", "admm", "pd-condat"):
            with pytest.raises(UnsupportedProblemError):
                run(prob, SolverConfig(variant=variant))


class TestConvergence:
    def test_fm_hsdm_iiduka(self):
        prob = gen_problem_iiduka(d=20, p11=1.0, seed=7)
        x0 = sample_x0(prob, seed=7)
        lam = 0.99 * 2.0 * 0.5 / prob.smooth.lipschitz_L
        trace = run(prob, SolverConfig(variant="fm-hsdm", lam=lam, max_iters=800, x0=x0))
        assert trace.distance[-1] <= 1e-8

    def test_fm_hsdm_iii_hyperplane(self):
        prob = gen_problem_hyperplane(d=20, p11=1.0, seed=7)
        x0 = sample_x0(prob, seed=7)
        lam = 0.99 * 2.0 * 0.25 / prob.smooth.lipschitz_L
        trace = run(
            prob, SolverConfig(variant="fm-hsdm-iii", lam=lam, max_iters=2000, x0=x0)
        )
        assert trace.distance[-1] <= 1e-8

    @pytest.mark.parametrize("variant", ["admm", "pd-condat", "pd-cp", "fista"])
    def test_baselines_hyperplane(self, variant):
        prob = gen_problem_hyperplane(d=20, p11=1.0, seed=9)
        x0 = sample_x0(prob, seed=9)
        trace = run(prob, SolverConfig(variant=variant, max_iters=2000, x0=x0))
        assert trace.distance[-1] <= 1e-4
        assert trace.distance[-1] < trace.distance[0]

    @pytest.mark.parametrize("variant", ["admm", "pd-condat", "pd-cp"])
    def test_baselines_iiduka(self, variant):
        prob = gen_problem_iiduka(d=20, p11=1.0, seed=9)
        x0 = sample_x0(prob, seed=9)
        trace = run(prob, SolverConfig(variant=variant, max_iters=2000, x0=x0))
        assert trace.distance[-1] <= 1e-3

    @pytest.mark.parametrize("variant", ["hsdm", "hcgm"])
    def test_slow_baselines_make_progress(self, variant):
        prob = gen_problem_hyperplane(d=20, p11=1.0, seed=9)
        x0 = sample_x0(prob, seed=9)
        trace = run(prob, SolverConfig(variant=variant, max_iters=500, x0=x0))
        assert trace.distance[-1] < 0.5 * trace.distance[0]
