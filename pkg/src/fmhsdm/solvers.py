"""Solver family for affinely constrained composite minimization.

The primary solvers are fixed-horizon primal iterations built from an
averaged affine firmly nonexpansive constraint map T, a gradient oracle and a
prox oracle:

- ``fm-hsdm``: the full method (gradient step inside T-averaging, prox
  outside, difference-of-maps increment).
- ``fm-hsdm-g0``: same recursion with the prox replaced by the identity
  (zero non-smooth part); shares the code path bit for bit.
- ``fm-hsdm-f0``: same recursion with a zero gradient (zero smooth part);
  any positive step size is admissible.
- ``fm-hsdm-iii``: variant evaluating gradients at the averaged points; the
  non-smooth part must be zero.

Baselines (``hsdm``, ``hcgm``, ``admm``, ``pd-condat``, ``pd-cp``,
``fista``) run through adapters for the two benchmark problem families and
report traces in the same schema.
"""

import time
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from . import kernels
from .errors import (
    DivergenceError,
    StepSizeError,
    UnsupportedProblemError,
    VariantMismatchError,
)
from .maps import fixed_point_witness
from .objectives import Problem

DIVERGENCE_GUARD = 1e12

FM_VARIANTS = ("fm-hsdm", "fm-hsdm-g0", "fm-hsdm-f0", "fm-hsdm-iii")
BASELINE_VARIANTS = ("hsdm", "hcgm", "admm", "pd-condat", "pd-cp", "fista")


@dataclass
class SolverConfig:
    variant: str = "fm-hsdm"
    alpha: float = 0.5
    lam: float = 0.1
    max_iters: int = 1000
    record_certificates: bool = False
    record_iterates: bool = False
    x0: Optional[np.ndarray] = None
    early_stop_tol: Optional[float] = None
    # baseline knobs; None means "use the per-family default"
    step_schedule: Optional[Callable[[int], float]] = None  # hsdm
    mu: Optional[float] = None  # hcgm
    lam_schedule: Optional[Callable[[int], float]] = None  # hcgm
    beta_schedule: Optional[Callable[[int], float]] = None  # hcgm
    rho: float = 1.0  # admm penalty
    tau: Optional[float] = None  # primal-dual primal step
    sigma: Optional[float] = None  # primal-dual dual step
    gamma_strong: Optional[float] = None  # accelerated primal-dual


class SolverTrace:
    """Per-iteration record of a solver run.

    Always stores scalar metrics (fixed-point residual, finite objective,
    distance to the known minimizer when available, cumulative wall time).
    Iterates, half-iterates and dual certificate vectors are stored only on
    request; certificates imply iterates.
    """

    def __init__(self, problem: Problem, config: SolverConfig):
        self.problem = problem
        self.config = config
        self.variant = config.variant
        keep_iterates = config.record_iterates or config.record_certificates
        self.iterates: Optional[List[np.ndarray]] = [] if keep_iterates else None
        self.half_iterates: Optional[List[np.ndarray]] = (
            [] if config.record_certificates else None
        )
        # duals[k] is the certificate vector paired with iterate k+1
        self.duals: Optional[List[np.ndarray]] = (
            [] if config.record_certificates else None
        )
        self.fp_residual: List[float] = []
        self.objective: List[float] = []
        self.feasible: List[bool] = []
        self.distance: List[float] = []
        self.wall_time: List[float] = []
        self.x_final: Optional[np.ndarray] = None
        self._t0 = time.perf_counter()

    def record(self, x, half=None, dual=None):
        self.fp_residual.append(
            float(np.linalg.norm(self.problem.constraint_map.residual(x)))
        )
        obj, ok = self.problem.finite_objective(x)
        self.objective.append(obj)
        self.feasible.append(ok)
        if self.problem.known_minimizer is not None:
            self.distance.append(
                float(np.linalg.norm(x - self.problem.known_minimizer))
            )
        self.wall_time.append(time.perf_counter() - self._t0)
        if self.iterates is not None:
            self.iterates.append(np.array(x, dtype=np.float64, copy=True))
        if self.half_iterates is not None and half is not None:
            self.half_iterates.append(np.array(half, dtype=np.float64, copy=True))
        if self.duals is not None and dual is not None:
            self.duals.append(np.array(dual, dtype=np.float64, copy=True))
        self.x_final = np.asarray(x, dtype=np.float64)

    def __len__(self):
        return len(self.fp_residual)


def validate_step_size(variant, alpha, lam, L):
    """Check the admissible (alpha, lam) range for the given variant.

    Raises StepSizeError naming the violated bound; returns the upper bound
    on lam (or inf) when accepted.
    """
    if not 0.5 <= alpha < 1.0:
        raise StepSizeError("alpha must lie in [0.5, 1), got %r" % alpha)
    if lam <= 0.0:
        raise StepSizeError("lam must be positive, got %r" % lam)
    if variant in ("fm-hsdm", "fm-hsdm-g0"):
        bound = 2.0 * (1.0 - alpha) / L
    elif variant == "fm-hsdm-iii":
        bound = 2.0 * (1.0 - alpha) ** 2 / L
    elif variant == "fm-hsdm-f0":
        return np.inf
    else:
        return np.inf
    if lam >= bound:
        raise StepSizeError(
            "lam must lie in the open interval (0, %.12g) for variant %s, got %r"
            % (bound, variant, lam)
        )
    return bound


def _initial_point(problem: Problem, config: SolverConfig):
    if config.x0 is not None:
        x0 = np.asarray(config.x0, dtype=np.float64)
        if x0.shape[0] != problem.dim:
            raise ValueError("x0 dimension mismatch")
        return x0
    return np.zeros(problem.dim)


def _check_finite(x, iteration):
    if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_GUARD:
        raise DivergenceError(
            "iterate diverged at iteration %d" % iteration, iteration=iteration
        )


def _run_core(problem, config, prox, grad, grad_at_averaged=False):
    """Shared loop for all fm-hsdm variants.

    With grad_at_averaged=False this is the primary recursion: the first
    bracket of the increment uses the averaged map and the gradient at x_n,
    the second uses the un-averaged map and the gradient at x_{n+1}. With
    grad_at_averaged=True both gradients are taken at the averaged points
    instead, and the initial half step applies the gradient after averaging.
    """
    T = problem.constraint_map
    Ta = T.averaged(config.alpha)
    lam = config.lam
    x_prev = _initial_point(problem, config)

    certs = config.record_certificates
    if certs:
        U = T.sqrt_I_minus_Q()
        w_star = fixed_point_witness(T)
        one_minus_alpha = 1.0 - config.alpha

    trace = SolverTrace(problem, config)
    trace.record(x_prev)
    if config.max_iters < 1:
        return trace

    if grad_at_averaged:
        ta0 = Ta.apply(x_prev)
        x_half = ta0 - lam * grad(ta0)
    else:
        x_half = Ta.apply(x_prev) - lam * grad(x_prev)
    x_curr = prox(lam, x_half)
    _check_finite(x_curr, 1)
    dual = None
    if certs:
        dual = one_minus_alpha * U.matvec(x_curr - w_star)
    trace.record(x_curr, half=x_half, dual=dual)

    for n in range(config.max_iters - 1):
        if grad_at_averaged:
            ta_prev = Ta.apply(x_prev)
            ta_curr = Ta.apply(x_curr)
            x_half = kernels.half_update(
                x_half, ta_prev, grad(ta_prev), T.apply(x_curr), grad(ta_curr), lam
            )
        else:
            x_half = kernels.half_update(
                x_half, Ta.apply(x_prev), grad(x_prev), T.apply(x_curr), grad(x_curr), lam
            )
        x_next = prox(lam, x_half)
        _check_finite(x_next, n + 2)
        if certs:
            dual = dual + one_minus_alpha * U.matvec(x_next - w_star)
        trace.record(x_next, half=x_half, dual=dual)
        if config.early_stop_tol is not None:
            if (
                np.linalg.norm(x_next - x_curr) < config.early_stop_tol
                and trace.fp_residual[-1] < config.early_stop_tol
            ):
                x_prev, x_curr = x_curr, x_next
                break
        x_prev, x_curr = x_curr, x_next
    return trace


def run_fm_hsdm(problem: Problem, config: SolverConfig):
    validate_step_size("fm-hsdm", config.alpha, config.lam, problem.smooth.lipschitz_L)
    return _run_core(problem, config, problem.prox.prox, problem.smooth.gradient)


def run_fm_hsdm_g0(problem: Problem, config: SolverConfig):
    """The zero-non-smooth-part variant: identical recursion with the prox
    replaced by the identity."""
    validate_step_size(
        "fm-hsdm-g0", config.alpha, config.lam, problem.smooth.lipschitz_L
    )

    def identity_prox(lam, x):
        return np.asarray(x, dtype=np.float64)

    return _run_core(problem, config, identity_prox, problem.smooth.gradient)


def run_fm_hsdm_f0(problem: Problem, config: SolverConfig):
    """The zero-smooth-part variant: any positive step size is admissible."""
    validate_step_size("fm-hsdm-f0", config.alpha, config.lam, 1.0)
    zero = np.zeros(problem.dim)

    def zero_grad(x):
        return zero

    return _run_core(problem, config, problem.prox.prox, zero_grad)


def run_fm_hsdm_iii(problem: Problem, config: SolverConfig):
    """Variant with gradients evaluated at the averaged points; requires a
    zero non-smooth part."""
    if problem.prox.kind != "zero":
        raise VariantMismatchError(
            "this variant requires a zero non-smooth part, got %r" % problem.prox.kind
        )
    validate_step_size(
        "fm-hsdm-iii", config.alpha, config.lam, problem.smooth.lipschitz_L
    )

    def identity_prox(lam, x):
        return np.asarray(x, dtype=np.float64)

    return _run_core(
        problem, config, identity_prox, problem.smooth.gradient, grad_at_averaged=True
    )


def run_hsdm(problem: Problem, config: SolverConfig):
    """Classic diminishing-step hybrid iteration
    x_{n+1} = T x_n - lam_n grad f(T x_n)."""
    apply_T, grad, x0, lift = _fixed_point_adapter(problem, config)
    schedule = config.step_schedule
    if schedule is None:
        c = 2.0 * (1.0 - config.alpha) / problem.smooth.lipschitz_L

        def schedule(n):
            return c / (n + 1.0)

    trace = SolverTrace(problem, config)
    x = x0
    trace.record(lift(x))
    for n in range(config.max_iters):
        y = apply_T(x)
        x = y - schedule(n) * grad(y)
        _check_finite(x, n + 1)
        trace.record(lift(x))
    return trace


def run_hcgm(problem: Problem, config: SolverConfig):
    """Conjugate-gradient-flavored hybrid iteration
    x_{n+1} = T(x_n + mu lam_n d_n), d_{n+1} = -grad f(x_{n+1}) + b_{n+1} d_n."""
    apply_T, grad, x0, lift = _fixed_point_adapter(problem, config)
    lam_schedule = config.lam_schedule or (lambda n: 1.0 / (n + 1.0))
    beta_schedule = config.beta_schedule or (lambda n: 1.0 / (n + 1.0) ** 2)
    mu = config.mu if config.mu is not None else 1.0 / problem.smooth.lipschitz_L

    trace = SolverTrace(problem, config)
    x = x0
    d = -grad(x)
    trace.record(lift(x))
    for n in range(config.max_iters):
        x = apply_T(x + mu * lam_schedule(n) * d)
        _check_finite(x, n + 1)
        d = -grad(x) + beta_schedule(n + 1) * d
        trace.record(lift(x))
    return trace


# -- problem-family adapters ----------------------------------------------


def _family(problem: Problem):
    return problem.meta.get("family")


def _block_mean(problem: Problem, x):
    blocks = problem.meta.get("num_blocks", 1)
    if blocks == 1:
        return np.asarray(x, dtype=np.float64)
    return kernels.block_mean_tile(np.asarray(x, dtype=np.float64), blocks)[
        : problem.dim // blocks
    ]


def _fixed_point_adapter(problem: Problem, config: SolverConfig):
    """(T, grad, x0, lift) for solvers that only need a nonexpansive map with
    the feasible set as fixed points, run in the original variable space."""
    family = _family(problem)
    x0_native = _initial_point(problem, config)
    if family == "hyperplane":
        T = problem.constraint_map
        return T.apply, problem.smooth.gradient, x0_native, lambda u: u
    if family == "iiduka":
        d = problem.meta["d"]
        p_diag = problem.meta["p_diag"]
        center1 = np.zeros(d)
        center1[0] = 2.0
        center2 = np.zeros(d)

        def apply_T(u):
            return kernels.ball_project(
                kernels.ball_project(u, center2, 2.0), center1, 1.0
            )

        def grad(u):
            return p_diag * u

        def lift(u):
            return np.tile(u, 3)

        return apply_T, grad, _block_mean(problem, x0_native), lift
    raise UnsupportedProblemError(
        "no fixed-point adapter for problem family %r" % family
    )


def _iiduka_pieces(problem: Problem):
    d = problem.meta["d"]
    p_diag = problem.meta["p_diag"]
    center1 = np.zeros(d)
    center1[0] = 2.0
    center2 = np.zeros(d)
    return d, p_diag, center1, center2


def run_admm(problem: Problem, config: SolverConfig):
    """Consensus form with scaled dual variables: block minimizations against
    the running average, then dual ascent."""
    family = _family(problem)
    rho = config.rho
    x0_native = _initial_point(problem, config)
    trace = SolverTrace(problem, config)
    trace.record(x0_native)
    if family == "iiduka":
        d, p_diag, center1, center2 = _iiduka_pieces(problem)
        z = _block_mean(problem, x0_native)
        u1 = np.zeros(d)
        u2 = np.zeros(d)
        u3 = np.zeros(d)
        for n in range(config.max_iters):
            x1 = kernels.diag_resolvent(z - u1, p_diag, 1.0 / rho)
            x2 = kernels.ball_project(z - u2, center1, 1.0)
            x3 = kernels.ball_project(z - u3, center2, 2.0)
            z = (x1 + u1 + x2 + u2 + x3 + u3) / 3.0
            u1 += x1 - z
            u2 += x2 - z
            u3 += x3 - z
            _check_finite(z, n + 1)
            trace.record(np.concatenate([x1, x2, x3]))
        return trace
    if family == "hyperplane":
        d = problem.meta["d"]
        p_diag = problem.meta["p_diag"]
        a = problem.meta["hyperplane_a"]
        b = problem.meta["hyperplane_b"]
        a_norm_sq = float(np.dot(a, a))
        z = np.asarray(x0_native, dtype=np.float64).copy()
        u1 = np.zeros(d)
        u2 = np.zeros(d)
        for n in range(config.max_iters):
            x1 = kernels.diag_resolvent(z - u1, p_diag, 1.0 / rho)
            x2 = kernels.hyperplane_project(z - u2, a, b, a_norm_sq)
            z = 0.5 * (x1 + u1 + x2 + u2)
            u1 += x1 - z
            u2 += x2 - z
            _check_finite(z, n + 1)
            trace.record(z)
        return trace
    raise UnsupportedProblemError("no admm adapter for family %r" % family)


def run_pd_condat(problem: Problem, config: SolverConfig):
    """Primal-dual splitting with a smooth term handled by explicit gradient
    steps and one dual block handled through its conjugate prox."""
    family = _family(problem)
    L = problem.smooth.lipschitz_L
    tau = config.tau if config.tau is not None else 1.0 / L
    sigma = config.sigma if config.sigma is not None else (1.0 / tau - L / 2.0)
    x0_native = _initial_point(problem, config)
    trace = SolverTrace(problem, config)
    trace.record(x0_native)
    if family == "iiduka":
        d, p_diag, center1, center2 = _iiduka_pieces(problem)
        u = _block_mean(problem, x0_native)
        y = np.zeros(d)
        for n in range(config.max_iters):
            u_new = kernels.ball_project(u - tau * (p_diag * u) - tau * y, center1, 1.0)
            w = y + sigma * (2.0 * u_new - u)
            y = w - sigma * kernels.ball_project(w / sigma, center2, 2.0)
            u = u_new
            _check_finite(u, n + 1)
            trace.record(np.tile(u, 3))
        return trace
    if family == "hyperplane":
        d = problem.meta["d"]
        p_diag = problem.meta["p_diag"]
        a = problem.meta["hyperplane_a"]
        b = problem.meta["hyperplane_b"]
        a_norm_sq = float(np.dot(a, a))
        u = np.asarray(x0_native, dtype=np.float64).copy()
        y = np.zeros(d)
        for n in range(config.max_iters):
            u_new = u - tau * (p_diag * u) - tau * y
            w = y + sigma * (2.0 * u_new - u)
            y = w - sigma * kernels.hyperplane_project(w / sigma, a, b, a_norm_sq)
            u = u_new
            _check_finite(u, n + 1)
            trace.record(u)
        return trace
    raise UnsupportedProblemError("no pd-condat adapter for family %r" % family)


def run_pd_cp(problem: Problem, config: SolverConfig):
    """Accelerated primal-dual iteration exploiting strong convexity of the
    quadratic part (per-iteration extrapolation update)."""
    family = _family(problem)
    x0_native = _initial_point(problem, config)
    p_diag = problem.meta["p_diag"]
    gamma = (
        config.gamma_strong
        if config.gamma_strong is not None
        else float(np.min(p_diag))
    )
    trace = SolverTrace(problem, config)
    trace.record(x0_native)
    if family == "iiduka":
        d, p_diag, center1, center2 = _iiduka_pieces(problem)
        norm_K = np.sqrt(2.0)
        tau = 1.0 / norm_K
        sigma = 1.0 / norm_K
        u = _block_mean(problem, x0_native)
        u_bar = u.copy()
        y1 = np.zeros(d)
        y2 = np.zeros(d)
        for n in range(config.max_iters):
            w1 = y1 + sigma * u_bar
            y1 = w1 - sigma * kernels.ball_project(w1 / sigma, center1, 1.0)
            w2 = y2 + sigma * u_bar
            y2 = w2 - sigma * kernels.ball_project(w2 / sigma, center2, 2.0)
            u_new = kernels.diag_resolvent(u - tau * (y1 + y2), p_diag, tau)
            theta = 1.0 / np.sqrt(1.0 + 2.0 * gamma * tau)
            tau *= theta
            sigma /= theta
            u_bar = u_new + theta * (u_new - u)
            u = u_new
            _check_finite(u, n + 1)
            trace.record(np.tile(u, 3))
        return trace
    if family == "hyperplane":
        d = problem.meta["d"]
        a = problem.meta["hyperplane_a"]
        b = problem.meta["hyperplane_b"]
        a_norm_sq = float(np.dot(a, a))
        tau = 1.0
        sigma = 1.0
        u = np.asarray(x0_native, dtype=np.float64).copy()
        u_bar = u.copy()
        y = np.zeros(d)
        for n in range(config.max_iters):
            w = y + sigma * u_bar
            y = w - sigma * kernels.hyperplane_project(w / sigma, a, b, a_norm_sq)
            u_new = kernels.diag_resolvent(u - tau * y, p_diag, tau)
            theta = 1.0 / np.sqrt(1.0 + 2.0 * gamma * tau)
            tau *= theta
            sigma /= theta
            u_bar = u_new + theta * (u_new - u)
            u = u_new
            _check_finite(u, n + 1)
            trace.record(u)
        return trace
    raise UnsupportedProblemError("no pd-cp adapter for family %r" % family)


def run_fista(problem: Problem, config: SolverConfig):
    """Accelerated proximal gradient; requires a projection-friendly
    constraint, so only the hyperplane family is supported."""
    if _family(problem) != "hyperplane":
        raise UnsupportedProblemError(
            "fista adapter exists only for the hyperplane family"
        )
    d = problem.meta["d"]
    p_diag = problem.meta["p_diag"]
    a = problem.meta["hyperplane_a"]
    b = problem.meta["hyperplane_b"]
    a_norm_sq = float(np.dot(a, a))
    L = problem.smooth.lipschitz_L
    step = 1.0 / L
    x = np.asarray(_initial_point(problem, config), dtype=np.float64).copy()
    y = x.copy()
    t = 1.0
    trace = SolverTrace(problem, config)
    trace.record(x)
    for n in range(config.max_iters):
        x_new = kernels.hyperplane_project(y - step * (p_diag * y), a, b, a_norm_sq)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x = x_new
        t = t_new
        _check_finite(x, n + 1)
        trace.record(x)
    return trace


_RUNNERS = {
    "fm-hsdm": run_fm_hsdm,
    "fm-hsdm-g0": run_fm_hsdm_g0,
    "fm-hsdm-f0": run_fm_hsdm_f0,
    "fm-hsdm-iii": run_fm_hsdm_iii,
    "hsdm": run_hsdm,
    "hcgm": run_hcgm,
    "admm": run_admm,
    "pd-condat": run_pd_condat,
    "pd-cp": run_pd_cp,
    "fista": run_fista,
}


def run_baseline(problem: Problem, config: SolverConfig):
    if config.variant not in ("admm", "pd-condat", "pd-cp", "fista"):
        raise ValueError("run_baseline handles admm/pd-condat/pd-cp/fista only")
    return _RUNNERS[config.variant](problem, config)


def run(problem: Problem, config: SolverConfig):
    """Dispatch on config.variant."""
    if config.variant not in _RUNNERS:
        raise ValueError("unknown solver variant %r" % config.variant)
    return _RUNNERS[config.variant](problem, config)
