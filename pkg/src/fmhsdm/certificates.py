"""Runtime convergence certificates.

From a solver trace recorded with certificates enabled, this module verifies:

- monotone decrease of the weighted primal-dual distance to an optimal pair
  (Fejer property in the Theta metric),
- optimality residuals of primal-dual pairs (constraint residual plus a
  prox-based stationarity residual),
- boundedness of the (n+1)-scaled running averages that witness the O(1/n)
  rate, and, for the zero-smooth-part variant, monotonicity of successive
  iterate differences in the Theta metric.

The dual certificate sequence is v_{n+1} = v_n + (1-alpha) U (x_{n+1} - w),
anchored at v_1; it does not depend on which fixed point w is used because
fixed points differ by elements of ker U.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import DimensionMismatchError, FmhsdmError, MetricCorruptionError
from .linalg import SymOperator, as_vector, min_eigenvalue
from .objectives import Problem
from .solvers import SolverTrace


@dataclass(frozen=True)
class DualState:
    v: np.ndarray
    w_star: np.ndarray
    alpha: float
    U: SymOperator

    @staticmethod
    def initial(x1, w_star, alpha, U):
        """State after the first iterate: v_1 = (1-alpha) U (x_1 - w)."""
        w_star = as_vector(w_star)
        return DualState(
            v=(1.0 - alpha) * U.matvec(as_vector(x1) - w_star),
            w_star=w_star,
            alpha=alpha,
            U=U,
        )


def update_dual(state: DualState, x_next):
    x_next = as_vector(x_next)
    if x_next.shape[0] != state.v.shape[0]:
        raise DimensionMismatchError("dual update dimension mismatch")
    v_next = state.v + (1.0 - state.alpha) * state.U.matvec(x_next - state.w_star)
    return DualState(v=v_next, w_star=state.w_star, alpha=state.alpha, U=state.U)


@dataclass(frozen=True)
class ThetaMetric:
    """Weighted product metric sqrt(<x, Q_alpha x> + ||v||^2 / (1-alpha))."""

    Q_alpha: SymOperator
    alpha: float

    @staticmethod
    def for_map(constraint_map, alpha):
        Q_alpha = constraint_map.Q.scale_shift(alpha, 1.0 - alpha)
        lo = min_eigenvalue(Q_alpha)
        if lo < (1.0 - alpha) - 1e-10:
            raise MetricCorruptionError(
                "averaged matrix not strongly positive: min eigenvalue %.3e" % lo
            )
        return ThetaMetric(Q_alpha=Q_alpha, alpha=alpha)


def theta_norm(metric: ThetaMetric, x, v):
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    quad = metric.Q_alpha.quad_form(x) + float(np.dot(v, v)) / (1.0 - metric.alpha)
    if quad < -1e-12:
        raise MetricCorruptionError("negative squared norm %.3e" % quad)
    return float(np.sqrt(max(quad, 0.0)))


@dataclass(frozen=True)
class OptimalPair:
    x_star: np.ndarray
    v_star: np.ndarray
    lam: float

    @staticmethod
    def from_problem(problem: Problem, lam, validate=True, tol=1e-6):
        """Build the pair for step size lam from the problem's stored
        minimizer and unit-step dual vector."""
        if problem.known_minimizer is None or problem.known_dual_witness is None:
            raise FmhsdmError("problem carries no optimal pair")
        x_star = problem.known_minimizer
        v_star = lam * problem.known_dual_witness
        if validate:
            res = upsilon_residual(x_star, v_star, lam, problem)
            if res > tol:
                raise FmhsdmError(
                    "stored pair fails the optimality residual: %.3e" % res
                )
        return OptimalPair(x_star=x_star, v_star=v_star, lam=float(lam))


def upsilon_residual(x, v, lam, problem: Problem):
    """Constraint residual plus prox-based stationarity residual; vanishes
    exactly on optimal primal-dual pairs."""
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    T = problem.constraint_map
    U = T.sqrt_I_minus_Q()
    r_fix = float(np.linalg.norm(T.residual(x)))
    inner = x - lam * problem.smooth.gradient(x) - U.matvec(v)
    r_stat = float(np.linalg.norm(x - problem.prox.prox(lam, inner)))
    return r_fix + r_stat


@dataclass(frozen=True)
class FejerReport:
    distances: np.ndarray  # distances[k] pairs with iterate k+1
    max_increment: float
    passed: bool
    start_iterate: int


def fejer_check(trace: SolverTrace, pair: OptimalPair, metric: Optional[ThetaMetric] = None):
    """Distances of (x_n, v_n) to the optimal pair in the Theta metric, with
    monotonicity enforced from iterate 2 on (relative slack 1e-10)."""
    if trace.duals is None or trace.iterates is None:
        raise FmhsdmError("trace was recorded without certificates")
    if metric is None:
        metric = ThetaMetric.for_map(trace.problem.constraint_map, trace.config.alpha)
    distances = []
    for k, v in enumerate(trace.duals):
        x = trace.iterates[k + 1]
        distances.append(theta_norm(metric, x - pair.x_star, v - pair.v_star))
    distances = np.asarray(distances)
    max_increment = -np.inf
    passed = True
    # distances[0] pairs with iterate 1; monotone from iterate 2 on
    for k in range(1, len(distances) - 1):
        inc = distances[k + 1] - distances[k]
        max_increment = max(max_increment, inc)
        if inc > 1e-10 * (1.0 + distances[k]):
            passed = False
    return FejerReport(
        distances=distances,
        max_increment=float(max_increment),
        passed=passed,
        start_iterate=2,
    )


@dataclass(frozen=True)
class RateReport:
    # partial sums S_n = (n+1) * running average, one entry per n
    scaled_distance_form: np.ndarray
    scaled_stationarity: np.ndarray
    scaled_fixed_point: np.ndarray
    # sup over the reported range divided by the value at n=10
    sup_ratios: dict
    # f=0 extras (None otherwise)
    per_iterate_fixed_point: Optional[np.ndarray]
    theta_diffs: Optional[np.ndarray]
    theta_diffs_nonincreasing: Optional[bool]


def rate_certificate(trace: SolverTrace, ratio_start: int = 10):
    """Boundedness certificates for the O(1/(n+1)) guarantees.

    Computes the three per-iteration quantities (weighted squared distance
    through I - Q, squared stationarity residual, squared fixed-point
    residual), their cumulative sums (= (n+1) times the running average,
    nondecreasing by construction, so the sup over any trailing range is the
    final value), and the sup-to-start ratios. For the zero-smooth-part
    variant it additionally reports per-iterate quantities and the
    monotonicity of successive differences in the Theta metric.
    """
    if trace.duals is None or trace.half_iterates is None:
        raise FmhsdmError("trace was recorded without certificates")
    problem = trace.problem
    if problem.known_minimizer is None:
        raise FmhsdmError("rate certificate needs the known minimizer")
    x_star = problem.known_minimizer
    lam = trace.config.lam
    T = problem.constraint_map
    U = T.sqrt_I_minus_Q()
    I_minus_Q = T.Q.complement()
    grad = problem.smooth.gradient
    if trace.variant == "fm-hsdm-f0":
        def grad(x):  # noqa: F811 - zero-smooth variant ignores the oracle
            return np.zeros_like(x)

    n_terms = len(trace.duals)
    t_dist = np.empty(n_terms)
    t_stat = np.empty(n_terms)
    t_fix = np.empty(n_terms)
    for nu in range(n_terms):
        x_next = trace.iterates[nu + 1]
        x_cur = trace.iterates[nu]
        v_next = trace.duals[nu]
        half = trace.half_iterates[nu]
        diff = x_next - x_star
        t_dist[nu] = float(np.dot(diff, I_minus_Q.matvec(diff)))
        xi = (half - x_next) / lam
        stat = U.matvec(v_next) + lam * (grad(x_cur) + xi)
        t_stat[nu] = float(np.dot(stat, stat))
        r = T.residual(x_next)
        t_fix[nu] = float(np.dot(r, r))
    sums_dist = np.cumsum(t_dist)
    sums_stat = np.cumsum(t_stat)
    sums_fix = np.cumsum(t_fix)

    def ratio(sums):
        if len(sums) <= ratio_start:
            return 1.0
        base = sums[ratio_start]
        if base <= 0.0:
            base = np.finfo(np.float64).tiny
        return float(sums[-1] / base)

    sup_ratios = {
        "distance_form": ratio(sums_dist),
        "stationarity": ratio(sums_stat),
        "fixed_point": ratio(sums_fix),
    }

    per_iter = None
    diffs = None
    nonincreasing = None
    if trace.variant == "fm-hsdm-f0":
        per_iter = t_fix.copy()
        metric = ThetaMetric.for_map(T, trace.config.alpha)
        diffs_list: List[float] = []
        for k in range(len(trace.duals) - 1):
            dx = trace.iterates[k + 2] - trace.iterates[k + 1]
            dv = trace.duals[k + 1] - trace.duals[k]
            diffs_list.append(theta_norm(metric, dx, dv))
        diffs = np.asarray(diffs_list)
        nonincreasing = True
        for k in range(len(diffs) - 1):
            if diffs[k + 1] > diffs[k] + 1e-12 * (1.0 + diffs[k]):
                nonincreasing = False
                break
    return RateReport(
        scaled_distance_form=sums_dist,
        scaled_stationarity=sums_stat,
        scaled_fixed_point=sums_fix,
        sup_ratios=sup_ratios,
        per_iterate_fixed_point=per_iter,
        theta_diffs=diffs,
        theta_diffs_nonincreasing=nonincreasing,
    )
