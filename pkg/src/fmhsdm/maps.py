"""Catalog of affine firmly nonexpansive maps T(x) = Qx + pi.

Membership in the class requires Q symmetric positive semidefinite with
spectral norm at most 1; the fixed-point set of such a map is the affine set
ker(I - Q) + w for any fixed point w. Constructors cover metric projections
(consensus, hyperplane, linear systems), gradient-step and resolvent maps for
least-squares solution sets, weighted hyperplane averages, and their lifted
versions for linearly constrained least squares.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyFixedPointSetError,
    InfeasibleConstraintError,
)
from .linalg import (
    PSD_SLACK,
    SymOperator,
    as_vector,
    min_eigenvalue,
    pseudoinverse,
    psd_sqrt,
    spectral_norm,
)

NORM_SLACK = 1e-8


@dataclass(frozen=True)
class AffineMap:
    """Plain affine map Qx + pi with symmetric Q, ||Q|| <= 1.

    Positivity of Q is not required; these are the admissible outer layers of
    sandwich_compose.
    """

    Q: SymOperator
    pi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pi", as_vector(self.pi, dim=self.Q.dim))
        if spectral_norm(self.Q) > 1.0 + NORM_SLACK:
            raise ValueError("outer map norm exceeds 1")

    def apply(self, x):
        return self.Q.matvec(x) + self.pi


class AffineFneMap:
    """Affine firmly nonexpansive map T(x) = Qx + pi."""

    def __init__(self, Q, pi, fixed_point_witness=None, check=True):
        if isinstance(Q, np.ndarray):
            Q = SymOperator.dense(Q)
        self.Q = Q
        self.pi = as_vector(pi, dim=Q.dim)
        self.dim = Q.dim
        self._witness = (
            None if fixed_point_witness is None else as_vector(fixed_point_witness, dim=Q.dim)
        )
        self._U = None
        if check:
            lo = min_eigenvalue(Q)
            if lo < -PSD_SLACK:
                raise ValueError("map matrix has eigenvalue %.3e below 0" % lo)
            norm = spectral_norm(Q)
            if norm > 1.0 + NORM_SLACK:
                raise ValueError("map matrix norm %.12f exceeds 1" % norm)
            if self._witness is not None:
                res = np.linalg.norm(
                    self._witness - self.apply(self._witness)
                )
                if res > 1e-8 * (1.0 + np.linalg.norm(self.pi)):
                    raise ValueError(
                        "declared fixed point has residual %.3e" % res
                    )

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.dim:
            raise DimensionMismatchError(
                "map dim %d, vector dim %d" % (self.dim, x.shape[0])
            )
        return self.Q.matvec(x) + self.pi

    def __call__(self, x):
        return self.apply(x)

    def residual(self, x):
        """(I - T) x."""
        return np.asarray(x, dtype=np.float64) - self.apply(x)

    def averaged(self, alpha):
        """alpha * T + (1 - alpha) * I, same fixed-point set."""
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1), got %r" % alpha)
        return AffineFneMap(
            self.Q.scale_shift(alpha, 1.0 - alpha),
            alpha * self.pi,
            fixed_point_witness=self._witness,
            check=False,
        )

    def sqrt_I_minus_Q(self):
        """Positive square root U of I - Q, cached; U = I - Q when Q is a
        projection."""
        if self._U is None:
            self._U = psd_sqrt(self.Q.complement())
        return self._U


def apply(mapping, x):
    return mapping.apply(x)


def averaged(mapping, alpha):
    return mapping.averaged(alpha)


def sqrt_I_minus_Q(mapping):
    return mapping.sqrt_I_minus_Q()


def fixed_point_witness(mapping, tol=1e-8):
    """A point w with T(w) = w, from the attached witness or a least-squares
    solve of (I - Q) w = pi."""
    if mapping._witness is not None:
        return mapping._witness
    residual_op = mapping.Q.complement()
    w = pseudoinverse(residual_op.to_dense()) @ mapping.pi
    res = np.linalg.norm(residual_op.matvec(w) - mapping.pi)
    if res > tol * (1.0 + np.linalg.norm(mapping.pi)):
        raise EmptyFixedPointSetError(
            "no fixed point within tolerance (residual %.3e)" % res
        )
    return w


def convex_combine(mappings: Sequence[AffineFneMap], weights: Sequence[float]):
    """Convex combination sum_j w_j T_j of maps in the class."""
    if len(mappings) == 0:
        raise ValueError("need at least one map")
    if len(mappings) != len(weights):
        raise ValueError("weights length mismatch")
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w <= 0.0) or np.any(w > 1.0):
        raise ValueError("weights must lie in (0, 1]")
    if abs(float(np.sum(w)) - 1.0) > 1e-12:
        raise ValueError("weights must sum to 1")
    dim = mappings[0].dim
    for m in mappings:
        if m.dim != dim:
            raise DimensionMismatchError("map dimensions differ")
    Q = mappings[0].Q.scale_shift(w[0], 0.0)
    pi = w[0] * mappings[0].pi
    for m, wj in zip(mappings[1:], w[1:]):
        Q = Q.combine(m.Q, 1.0, wj)
        pi = pi + wj * m.pi
    witness = None
    common = mappings[0]._witness
    if common is not None and all(
        m._witness is not None and np.array_equal(m._witness, common)
        for m in mappings[1:]
    ):
        witness = common
    return AffineFneMap(Q, pi, fixed_point_witness=witness)


def sandwich_compose(core: AffineFneMap, outer_chain: Sequence[AffineMap]):
    """T_J ... T_1 T_0 T_1 ... T_J for outer affine nonexpansive layers T_j.

    Each wrap maps (Q, pi) to (Q_j Q Q_j, Q_j (Q pi_j + pi) + pi_j).
    """
    Q = core.Q
    pi = core.pi
    for layer in outer_chain:
        if layer.Q.dim != Q.dim:
            raise DimensionMismatchError("outer layer dimension mismatch")
        Qj = layer.Q
        Qj_dense = Qj.to_dense()
        Q_new = SymOperator.dense(Qj_dense @ Q.to_dense() @ Qj_dense)
        pi_new = Qj.matvec(Q.matvec(layer.pi) + pi) + layer.pi
        Q, pi = Q_new, pi_new
    return AffineFneMap(Q, pi)


@dataclass(frozen=True)
class MembershipReport:
    passed: bool
    failures: List[str]
    min_eigenvalue: float
    norm: float
    worst_firm_violation: float


def validate_membership(mapping, pairs=100, rng=None):
    """Check the algebraic class conditions plus empirical firm
    nonexpansiveness on random pairs."""
    failures = []
    lo = min_eigenvalue(mapping.Q)
    norm = spectral_norm(mapping.Q)
    if lo < -PSD_SLACK:
        failures.append("min eigenvalue %.3e below 0" % lo)
    if norm > 1.0 + NORM_SLACK:
        failures.append("norm %.12f exceeds 1" % norm)
    if rng is None:
        rng = np.random.default_rng(0)
    worst = -np.inf
    for _ in range(pairs):
        x = rng.standard_normal(mapping.dim)
        y = rng.standard_normal(mapping.dim)
        dT = mapping.apply(x) - mapping.apply(y)
        violation = float(np.dot(dT, dT) - np.dot(x - y, dT))
        worst = max(worst, violation)
    if worst > 1e-8:
        failures.append("firm nonexpansiveness violated by %.3e" % worst)
    return MembershipReport(
        passed=not failures,
        failures=failures,
        min_eigenvalue=lo,
        norm=norm,
        worst_firm_violation=worst,
    )


# -- projection constructors ----------------------------------------------


def make_consensus_projection(num_blocks, block_dim):
    """Projection onto the consensus set of ``num_blocks`` equal blocks:
    every block is replaced by the block mean."""
    Q = SymOperator.block_average(num_blocks, block_dim)
    dim = num_blocks * block_dim
    return AffineFneMap(
        Q, np.zeros(dim), fixed_point_witness=np.zeros(dim), check=False
    )


def make_hyperplane_projection(a, b):
    """Projection onto {x : <a, x> = b}."""
    a = as_vector(a)
    norm_sq = float(np.dot(a, a))
    if norm_sq == 0.0:
        raise ValueError("hyperplane normal must be nonzero")
    Q = SymOperator.rank_one_update(1.0, -1.0, a)
    pi = (float(b) / norm_sq) * a
    return AffineFneMap(Q, pi, fixed_point_witness=pi, check=False)


def _affine_set_projection(A0, b0):
    """Projection onto {x : A0 x = b0} as (Q, pi) with Q = I - A0^+ A0."""
    A0 = np.asarray(A0, dtype=np.float64)
    b0 = as_vector(b0)
    pinv = pseudoinverse(A0)
    Q = np.eye(A0.shape[1]) - pinv @ A0
    pi = pinv @ b0
    return 0.5 * (Q + Q.T), pi


# -- least-squares maps ----------------------------------------------------

LS_VARIANTS = (
    "grad-step",
    "ker-projection",
    "gram-projection",
    "resolvent",
    "row-hyperplane-average",
    "normal-hyperplane-average",
)

CONSTRAINED_LS_VARIANTS = (
    "lifted-grad",
    "lifted-projection",
    "lifted-resolvent",
    "lifted-hyperplane-average",
    "projected-composition",
)


def _hyperplane_average(rows, rhs, theta, weights):
    """(1 - theta) I + theta * sum_d w_d P_d for row hyperplanes
    <rows[d], x> = rhs[d]; zero rows with zero offset are vacuous."""
    D = rows.shape[1]
    if weights is None:
        weights = np.full(rows.shape[0], 1.0 / rows.shape[0])
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape[0] != rows.shape[0]:
            raise DimensionMismatchError("one weight per hyperplane required")
        if np.any(weights <= 0.0) or np.any(weights >= 1.0):
            if rows.shape[0] > 1 or weights[0] != 1.0:
                raise ValueError("weights must lie in (0, 1)")
        if abs(float(np.sum(weights)) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
    if not 0.0 < theta <= 1.0:
        raise ValueError("averaging parameter must lie in (0, 1]")
    Q_sum = np.zeros((D, D))
    pi_sum = np.zeros(D)
    for g, c, w in zip(rows, rhs, weights):
        nsq = float(np.dot(g, g))
        if nsq == 0.0:
            if abs(c) > 1e-12:
                raise InfeasibleConstraintError(
                    "zero normal with nonzero offset %.3e" % c
                )
            Q_sum += w * np.eye(D)
            continue
        Q_sum += w * (np.eye(D) - np.outer(g, g) / nsq)
        pi_sum += w * (c / nsq) * g
    Q = (1.0 - theta) * np.eye(D) + theta * Q_sum
    pi = theta * pi_sum
    return 0.5 * (Q + Q.T), pi


def make_ls_map(
    A,
    b,
    variant,
    rho=None,
    mu=1.0,
    gamma=1.0,
    beta=1.0,
    theta=1.0,
    weights=None,
):
    """A map whose fixed points are the least-squares solutions of A x = b.

    Variants: "grad-step" (I - (mu/rho) A^T A plus matching offset),
    "ker-projection" (projection via A^+), "gram-projection" (projection via
    the Gram pseudoinverse), "resolvent" ((I + gamma A^T A)^-1 form),
    "row-hyperplane-average" (weighted average of row-hyperplane projections,
    weights fixed to row energy over squared Frobenius norm),
    "normal-hyperplane-average" (average over the normal-equation
    hyperplanes, free weights).
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionMismatchError("A must be a matrix")
    b = as_vector(b, dim=A.shape[0])
    D = A.shape[1]
    G = A.T @ A
    Atb = A.T @ b
    if variant == "grad-step":
        a_norm_sq = float(np.linalg.norm(A, 2)) ** 2
        if rho is None:
            rho = max(a_norm_sq, np.finfo(np.float64).tiny)
        if rho < a_norm_sq - 1e-10:
            raise ValueError("rho must be at least the squared operator norm of A")
        if not 0.0 < mu <= 1.0:
            raise ValueError("mu must lie in (0, 1]")
        Q = np.eye(D) - (mu / rho) * G
        pi = (mu / rho) * Atb
    elif variant == "ker-projection":
        Ap = pseudoinverse(A)
        Q = np.eye(D) - Ap @ A
        pi = Ap @ b
    elif variant == "gram-projection":
        Gp = pseudoinverse(G)
        Q = np.eye(D) - G @ Gp
        pi = Gp @ Atb
    elif variant == "resolvent":
        if gamma <= 0.0:
            raise ValueError("gamma must be positive")
        R = np.linalg.inv(np.eye(D) + gamma * G)
        Q = 0.5 * (R + R.T)
        pi = gamma * (R @ Atb)
    elif variant == "row-hyperplane-average":
        if not 0.0 < beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        keep = np.linalg.norm(A, axis=1) > 0.0
        A_kept = A[keep]
        if A_kept.shape[0] == 0:
            raise ValueError("A has no nonzero rows")
        b_kept = b[keep]
        fro_sq = float(np.sum(A_kept * A_kept))
        Q = np.eye(D) - (beta / fro_sq) * (A_kept.T @ A_kept)
        pi = (beta / fro_sq) * (A_kept.T @ b_kept)
    elif variant == "normal-hyperplane-average":
        Q, pi = _hyperplane_average(G, Atb, theta, weights)
    else:
        raise ValueError("unknown variant %r (choose from %s)" % (variant, (LS_VARIANTS,)))
    witness = pseudoinverse(A) @ b
    Q = 0.5 * (Q + Q.T)
    return AffineFneMap(Q, pi, fixed_point_witness=witness)


def make_constrained_ls_map(
    A,
    b,
    A0,
    b0,
    variant,
    rho=None,
    mu=1.0,
    gamma=1.0,
    beta=1.0,
    theta=1.0,
    weights=None,
):
    """Maps for least squares over the affine set K = {x : A0 x = b0}.

    The "lifted-*" variants act on the stacked (x, multiplier) space via the
    symmetric system L = [[A^T A, A0^T], [A0, 0]], e = (A^T b; b0); their
    fixed points are the solutions of L z = e. "projected-composition" stays
    in the original space: a convex combination of P_K with the sandwiched
    row-hyperplane average P_K (sum_m w_m P_m) P_K.
    """
    A = np.asarray(A, dtype=np.float64)
    A0 = np.asarray(A0, dtype=np.float64)
    if A.ndim != 2 or A0.ndim != 2 or A.shape[1] != A0.shape[1]:
        raise DimensionMismatchError("A and A0 must share a column dimension")
    if A0.shape[0] < 1:
        raise ValueError("constraint system must have at least one row")
    b = as_vector(b, dim=A.shape[0])
    b0 = as_vector(b0, dim=A0.shape[0])
    A0p = pseudoinverse(A0)
    if np.linalg.norm(A0 @ (A0p @ b0) - b0) > 1e-8 * (1.0 + np.linalg.norm(b0)):
        raise InfeasibleConstraintError("constraint system A0 x = b0 has no solution")
    D = A.shape[1]
    M0 = A0.shape[0]
    if variant == "projected-composition":
        if not 0.0 < beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        Qk, pik = _affine_set_projection(A0, b0)
        proj_k = AffineFneMap(Qk, pik, check=False)
        keep = np.linalg.norm(A, axis=1) > 0.0
        A_kept = A[keep]
        if A_kept.shape[0] == 0:
            raise ValueError("A has no nonzero rows")
        b_kept = b[keep]
        fro_sq = float(np.sum(A_kept * A_kept))
        row_avg = AffineFneMap(
            SymOperator.dense(np.eye(D) - (A_kept.T @ A_kept) / fro_sq),
            (A_kept.T @ b_kept) / fro_sq,
            check=False,
        )
        sandwiched = sandwich_compose(row_avg, [AffineMap(SymOperator.dense(Qk), pik)])
        if beta == 1.0:
            combined = sandwiched
        else:
            combined = convex_combine([proj_k, sandwiched], [1.0 - beta, beta])
        L = np.block([[A.T @ A, A0.T], [A0, np.zeros((M0, M0))]])
        e = np.concatenate([A.T @ b, b0])
        witness = (pseudoinverse(L) @ e)[:D]
        return AffineFneMap(combined.Q, combined.pi, fixed_point_witness=witness)
    L = np.block([[A.T @ A, A0.T], [A0, np.zeros((M0, M0))]])
    e = np.concatenate([A.T @ b, b0])
    inner = {
        "lifted-grad": "grad-step",
        "lifted-projection": "ker-projection",
        "lifted-resolvent": "resolvent",
    }
    if variant in inner:
        return make_ls_map(L, e, inner[variant], rho=rho, mu=mu, gamma=gamma)
    if variant == "lifted-hyperplane-average":
        Q, pi = _hyperplane_average(L, e, theta, weights)
        witness = pseudoinverse(L) @ e
        return AffineFneMap(Q, pi, fixed_point_witness=witness)
    raise ValueError(
        "unknown variant %r (choose from %s)" % (variant, (CONSTRAINED_LS_VARIANTS,))
    )
