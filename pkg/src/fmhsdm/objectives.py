"""Smooth and proximable objective terms, plus the Problem container.

A SmoothTerm carries value/gradient oracles and a Lipschitz constant for the
gradient. A ProxTerm carries a value oracle (possibly extended-valued) and a
proximal-mapping oracle prox(lam, x). Terms compose blockwise over product
spaces via make_separable_sum.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import kernels
from .errors import DimensionMismatchError, NotPsdError
from .linalg import SymOperator, as_vector, min_eigenvalue, spectral_norm
from .maps import AffineFneMap

L_FLOOR = 1e-12
BOUNDARY_SLACK = 1e-10


@dataclass(frozen=True)
class SmoothTerm:
    eval: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    lipschitz_L: float
    kind: str = "generic"


@dataclass(frozen=True)
class ProxTerm:
    eval: Callable[[np.ndarray], float]
    prox: Callable[[float, np.ndarray], np.ndarray]
    kind: str = "generic"
    # finite part of eval plus a feasibility flag, for gap curves of
    # indicator terms
    finite_eval: Optional[Callable[[np.ndarray], tuple]] = None

    def finite_value(self, x):
        """(finite objective contribution, feasible flag)."""
        if self.finite_eval is not None:
            return self.finite_eval(x)
        value = self.eval(x)
        if np.isinf(value):
            return 0.0, False
        return float(value), True


def make_zero_smooth():
    """f = 0 with a tiny positive Lipschitz floor so step-size rules stay
    well-defined."""
    return SmoothTerm(
        eval=lambda x: 0.0,
        gradient=lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)),
        lipschitz_L=L_FLOOR,
        kind="zero",
    )


def make_zero_prox():
    """g = 0: prox is the identity for every step size."""
    return ProxTerm(
        eval=lambda x: 0.0,
        prox=lambda lam, x: np.asarray(x, dtype=np.float64),
        kind="zero",
        finite_eval=lambda x: (0.0, True),
    )


def make_zero_term():
    """The zero objective as both a smooth and a prox term."""
    return make_zero_smooth(), make_zero_prox()


def make_quadratic(P):
    """f(x) = (1/2) x^T P x for PSD P; gradient P x, Lipschitz constant the
    spectral norm of P (floored at a tiny positive value for P = 0)."""
    if isinstance(P, np.ndarray):
        P = SymOperator.dense(P)
    lo = min_eigenvalue(P)
    if lo < -1e-10:
        raise NotPsdError("quadratic matrix has eigenvalue %.3e" % lo, eigenvalue=lo)
    L = max(spectral_norm(P), L_FLOOR)
    return SmoothTerm(
        eval=lambda x: 0.5 * float(np.dot(x, P.matvec(x))),
        gradient=P.matvec,
        lipschitz_L=L,
        kind="quadratic",
    )


def make_ball_indicator(center, radius):
    """Indicator of the closed ball B[center, radius]; prox is the metric
    projection, independent of the step size."""
    center = as_vector(center)
    radius = float(radius)
    if radius <= 0.0:
        raise ValueError("radius must be positive")

    def eval_(x):
        if np.linalg.norm(np.asarray(x, dtype=np.float64) - center) <= radius + BOUNDARY_SLACK:
            return 0.0
        return np.inf

    def finite_eval(x):
        feasible = (
            np.linalg.norm(np.asarray(x, dtype=np.float64) - center)
            <= radius + BOUNDARY_SLACK
        )
        return 0.0, bool(feasible)

    def prox(lam, x):
        return kernels.ball_project(np.asarray(x, dtype=np.float64), center, radius)

    return ProxTerm(eval=eval_, prox=prox, kind="ball", finite_eval=finite_eval)


def make_affine_set_indicator(projection: AffineFneMap):
    """Indicator of the fixed-point set of an affine projection map; prox is
    the projection itself."""
    if not projection.Q.is_idempotent(tol=1e-8):
        raise ValueError("indicator prox requires an idempotent projection map")

    def eval_(x):
        if np.linalg.norm(projection.residual(x)) <= 1e-8 * (
            1.0 + np.linalg.norm(x)
        ):
            return 0.0
        return np.inf

    def finite_eval(x):
        feasible = np.linalg.norm(projection.residual(x)) <= 1e-6 * (
            1.0 + np.linalg.norm(x)
        )
        return 0.0, bool(feasible)

    def prox(lam, x):
        return projection.apply(x)

    return ProxTerm(eval=eval_, prox=prox, kind="affine-set", finite_eval=finite_eval)


def make_quadratic_prox(P):
    """g(x) = (1/2) x^T P x as a prox term: prox(lam, x) = (I + lam P)^-1 x,
    entrywise for diagonal P."""
    if isinstance(P, np.ndarray):
        P = SymOperator.dense(P)
    lo = min_eigenvalue(P)
    if lo < -1e-10:
        raise NotPsdError("quadratic matrix has eigenvalue %.3e" % lo, eigenvalue=lo)

    if P.kind == "diagonal":
        p_diag = P.diag

        def prox(lam, x):
            return kernels.diag_resolvent(np.asarray(x, dtype=np.float64), p_diag, lam)

    elif P.kind == "scaled":

        def prox(lam, x):
            return np.asarray(x, dtype=np.float64) / (1.0 + lam * P.scale)

    else:

        def prox(lam, x):
            return P.scale_shift(lam, 1.0).inverse_matvec(x)

    def eval_(x):
        return 0.5 * float(np.dot(x, P.matvec(x)))

    return ProxTerm(
        eval=eval_,
        prox=prox,
        kind="quadratic",
        finite_eval=lambda x: (0.5 * float(np.dot(x, P.matvec(x))), True),
    )


def make_separable_sum(terms: Sequence[ProxTerm], block_dims: Sequence[int]):
    """g(x) = sum_j g_j(x_j) over the stacked blocks; prox acts blockwise."""
    if len(terms) != len(block_dims):
        raise DimensionMismatchError("one term per block required")
    dims = list(block_dims)
    total = sum(dims)
    offsets = np.cumsum([0] + dims)

    def eval_(x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != total:
            raise DimensionMismatchError("expected dim %d" % total)
        return float(
            sum(t.eval(x[offsets[j] : offsets[j + 1]]) for j, t in enumerate(terms))
        )

    def finite_eval(x):
        x = np.asarray(x, dtype=np.float64)
        value = 0.0
        feasible = True
        for j, t in enumerate(terms):
            v, ok = t.finite_value(x[offsets[j] : offsets[j + 1]])
            value += v
            feasible = feasible and ok
        return value, feasible

    def prox(lam, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != total:
            raise DimensionMismatchError("expected dim %d" % total)
        return np.concatenate(
            [t.prox(lam, x[offsets[j] : offsets[j + 1]]) for j, t in enumerate(terms)]
        )

    all_zero = all(t.kind == "zero" for t in terms)
    return ProxTerm(
        eval=eval_,
        prox=prox,
        kind="zero" if all_zero else "separable",
        finite_eval=finite_eval,
    )


def make_block_smooth(term: SmoothTerm, block_index: int, block_dims: Sequence[int]):
    """Lift a smooth term acting on one block to the stacked product space."""
    dims = list(block_dims)
    offsets = np.cumsum([0] + dims)
    lo = offsets[block_index]
    hi = offsets[block_index + 1]
    total = sum(dims)

    def eval_(x):
        return term.eval(np.asarray(x, dtype=np.float64)[lo:hi])

    def gradient(x):
        x = np.asarray(x, dtype=np.float64)
        g = np.zeros(total)
        g[lo:hi] = term.gradient(x[lo:hi])
        return g

    return SmoothTerm(
        eval=eval_,
        gradient=gradient,
        lipschitz_L=term.lipschitz_L,
        kind=term.kind,
    )


@dataclass
class Problem:
    """An affinely constrained composite minimization instance."""

    smooth: SmoothTerm
    prox: ProxTerm
    constraint_map: AffineFneMap
    block_dims: List[int]
    known_minimizer: Optional[np.ndarray] = None
    # optimal dual vector for unit step size; the pair for step size lam is
    # (known_minimizer, lam * known_dual_witness)
    known_dual_witness: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if sum(self.block_dims) != self.constraint_map.dim:
            raise DimensionMismatchError("block dims do not match the constraint map")
        if self.known_minimizer is not None:
            x = as_vector(self.known_minimizer, dim=self.constraint_map.dim)
            res = np.linalg.norm(self.constraint_map.residual(x))
            if res > 1e-8 * (1.0 + np.linalg.norm(x)):
                raise ValueError(
                    "known minimizer violates the constraint (residual %.3e)" % res
                )
            object.__setattr__(self, "known_minimizer", x)

    @property
    def dim(self):
        return self.constraint_map.dim

    def finite_objective(self, x):
        """Finite part of f(x) + g(x) and a joint feasibility flag."""
        g_val, feasible = self.prox.finite_value(x)
        return float(self.smooth.eval(x)) + g_val, feasible
