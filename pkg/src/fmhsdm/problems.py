"""Benchmark problem generators.

Two synthetic families, both with a unique known minimizer and a known
optimal dual vector so certificate checks can run:

- "iiduka": minimize (1/2) u^T P u subject to u in B[2 e_1, 1] and B[0, 2],
  recast on a 3-block product space with a consensus constraint. The smooth
  part acts on block 1 and the two ball indicators on blocks 2 and 3. The
  unique solution is u = e_1, i.e. (e_1, e_1, e_1) in the product space.
- "hyperplane": minimize (1/2) u^T P u over the hyperplane {u : u_1 = 1};
  the unique solution is e_1.

P is diagonal with first entry p11 (the smallest), last entry 10, and the
remaining entries drawn uniformly from (p11, 10) by a counter-based
generator seeded per run. Each family also has a zero-smooth-part recasting
where the quadratic moves into the prox via the resolvent (I + lam P)^-1.
"""

import numpy as np

from .linalg import SymOperator
from .maps import make_consensus_projection, make_hyperplane_projection
from .objectives import (
    Problem,
    make_affine_set_indicator,
    make_ball_indicator,
    make_block_smooth,
    make_quadratic,
    make_quadratic_prox,
    make_separable_sum,
    make_zero_prox,
    make_zero_smooth,
)

P_MAX = 10.0


def _rng(seed, stream=0):
    return np.random.Generator(np.random.Philox(key=[int(seed), int(stream)]))


def _draw_p_diag(d, p11, rng):
    if d < 2:
        raise ValueError("d must be at least 2")
    if not 0.0 < p11 <= 1.0:
        raise ValueError("p11 must lie in (0, 1]")
    p = np.empty(d)
    p[0] = p11
    p[-1] = P_MAX
    if d > 2:
        p[1:-1] = rng.uniform(p11, P_MAX, size=d - 2)
    return p


def _e1(d):
    e = np.zeros(d)
    e[0] = 1.0
    return e


def gen_problem_iiduka(d, p11, seed):
    rng = _rng(seed)
    p_diag = _draw_p_diag(d, p11, rng)
    e1 = _e1(d)
    smooth = make_block_smooth(
        make_quadratic(SymOperator.diagonal(p_diag)), 0, [d, d, d]
    )
    prox = make_separable_sum(
        [
            make_zero_prox(),
            make_ball_indicator(2.0 * e1, 1.0),
            make_ball_indicator(np.zeros(d), 2.0),
        ],
        [d, d, d],
    )
    T = make_consensus_projection(3, d)
    x_star = np.tile(e1, 3)
    # unit-step dual vector: the stationarity direction (P e1 on the smooth
    # block, its negative on the active-ball block) is consensus-orthogonal,
    # so the square root of I - Q acts on it as the identity
    dual_base = -np.concatenate([p11 * e1, -p11 * e1, np.zeros(d)])
    return Problem(
        smooth=smooth,
        prox=prox,
        constraint_map=T,
        block_dims=[d, d, d],
        known_minimizer=x_star,
        known_dual_witness=dual_base,
        meta={
            "family": "iiduka",
            "d": d,
            "p11": p11,
            "p_diag": p_diag,
            "num_blocks": 3,
            "seed": int(seed),
        },
    )


def iiduka_recast_f0(problem):
    """Move the quadratic into the prox: the zero-smooth-part solver then
    runs with the resolvent on block 1 and any positive step size."""
    d = problem.meta["d"]
    p_diag = problem.meta["p_diag"]
    p11 = problem.meta["p11"]
    e1 = _e1(d)
    prox = make_separable_sum(
        [
            make_quadratic_prox(SymOperator.diagonal(p_diag)),
            make_ball_indicator(2.0 * e1, 1.0),
            make_ball_indicator(np.zeros(d), 2.0),
        ],
        [d, d, d],
    )
    meta = dict(problem.meta)
    meta["family"] = "iiduka-f0"
    return Problem(
        smooth=make_zero_smooth(),
        prox=prox,
        constraint_map=problem.constraint_map,
        block_dims=[d, d, d],
        known_minimizer=problem.known_minimizer,
        known_dual_witness=problem.known_dual_witness,
        meta=meta,
    )


def gen_problem_hyperplane(d, p11, seed):
    rng = _rng(seed)
    p_diag = _draw_p_diag(d, p11, rng)
    e1 = _e1(d)
    smooth = make_quadratic(SymOperator.diagonal(p_diag))
    T = make_hyperplane_projection(e1, 1.0)
    dual_base = -p11 * e1
    return Problem(
        smooth=smooth,
        prox=make_zero_prox(),
        constraint_map=T,
        block_dims=[d],
        known_minimizer=e1,
        known_dual_witness=dual_base,
        meta={
            "family": "hyperplane",
            "d": d,
            "p11": p11,
            "p_diag": p_diag,
            "num_blocks": 1,
            "hyperplane_a": e1,
            "hyperplane_b": 1.0,
            "seed": int(seed),
        },
    )


def hyperplane_recast_f0(problem):
    """Two-block consensus recasting: block 1 carries the quadratic through
    its resolvent, block 2 the hyperplane indicator through its projection."""
    d = problem.meta["d"]
    p_diag = problem.meta["p_diag"]
    p11 = problem.meta["p11"]
    e1 = _e1(d)
    prox = make_separable_sum(
        [
            make_quadratic_prox(SymOperator.diagonal(p_diag)),
            make_affine_set_indicator(make_hyperplane_projection(e1, 1.0)),
        ],
        [d, d],
    )
    T = make_consensus_projection(2, d)
    x_star = np.tile(e1, 2)
    dual_base = -np.concatenate([p11 * e1, -p11 * e1])
    meta = dict(problem.meta)
    meta.update({"family": "hyperplane-f0", "num_blocks": 2})
    return Problem(
        smooth=make_zero_smooth(),
        prox=prox,
        constraint_map=T,
        block_dims=[d, d],
        known_minimizer=x_star,
        known_dual_witness=dual_base,
        meta=meta,
    )


def sample_x0(problem, seed):
    """Initial point uniform on the unit sphere centered at the known
    minimizer, drawn from a dedicated stream of the run's seed."""
    rng = _rng(seed, stream=1)
    w = rng.standard_normal(problem.dim)
    w /= np.linalg.norm(w)
    if problem.known_minimizer is not None:
        return problem.known_minimizer + w
    return w
