"""Symmetric operators in structured forms, with the spectral helpers used
everywhere else in the package.

A SymOperator stores one of five representations:

- ``dense``: an explicit symmetric matrix,
- ``diagonal``: a diagonal vector,
- ``scaled``: s * I,
- ``lowrank``: m * I + c * (a a^T / ||a||^2) for a unit direction a,
- ``blockavg``: m * I + c * Avg, where Avg replaces each of ``num_blocks``
  equal blocks by their mean (an orthogonal projection).

The last three are closed under the affine recombinations, square roots and
inverses needed by the solvers, so nothing is densified at large dimension.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DimensionMismatchError,
    EstimatorFailureError,
    NotPsdError,
    NotStronglyPositiveError,
)
from . import kernels

PSD_SLACK = 1e-8
DENSE_DIM_LIMIT = 4096


def as_vector(x, dim=None):
    """Validate and convert to a finite 1-D float64 array."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1 or v.shape[0] < 1:
        raise DimensionMismatchError("expected a 1-D vector, got shape %s" % (v.shape,))
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains non-finite entries")
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatchError(
            "expected dimension %d, got %d" % (dim, v.shape[0])
        )
    return v


def split_blocks(x, block_dims):
    """Split a stacked vector into its blocks, validating dimensions."""
    if sum(block_dims) != x.shape[0]:
        raise DimensionMismatchError(
            "block dims %s do not sum to %d" % (block_dims, x.shape[0])
        )
    out = []
    offset = 0
    for d in block_dims:
        out.append(x[offset : offset + d])
        offset += d
    return out


def join_blocks(blocks):
    return np.concatenate([np.asarray(b, dtype=np.float64) for b in blocks])


def _symmetric_eigh(mat):
    try:
        return np.linalg.eigh(mat)
    except np.linalg.LinAlgError as exc:
        raise EstimatorFailureError("eigendecomposition failed: %s" % exc) from exc


@dataclass(frozen=True)
class SymOperator:
    """Immutable symmetric linear operator."""

    kind: str
    dim: int
    diag: Optional[np.ndarray] = None
    scale: float = 0.0
    m: float = 0.0
    c: float = 0.0
    direction: Optional[np.ndarray] = None  # unit vector, lowrank form
    num_blocks: int = 0  # blockavg form
    dense_mat: Optional[np.ndarray] = field(default=None, repr=False)

    # -- constructors -----------------------------------------------------

    @staticmethod
    def dense(mat):
        mat = np.asarray(mat, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatchError("dense operator must be square")
        if not np.all(np.isfinite(mat)):
            raise ValueError("operator contains non-finite entries")
        tol = 1e-12 * max(1.0, float(np.max(np.abs(mat))))
        if np.max(np.abs(mat - mat.T)) > tol:
            raise ValueError("dense operator is not symmetric within 1e-12 relative")
        sym = 0.5 * (mat + mat.T)
        return SymOperator(kind="dense", dim=mat.shape[0], dense_mat=sym)

    @staticmethod
    def diagonal(entries):
        d = as_vector(entries)
        return SymOperator(kind="diagonal", dim=d.shape[0], diag=d)

    @staticmethod
    def scaled_identity(scale, dim):
        return SymOperator(kind="scaled", dim=int(dim), scale=float(scale))

    @staticmethod
    def identity(dim):
        return SymOperator.scaled_identity(1.0, dim)

    @staticmethod
    def zero(dim):
        return SymOperator.scaled_identity(0.0, dim)

    @staticmethod
    def rank_one_update(m, c, a):
        """m * I + c * (a a^T / ||a||^2)."""
        a = as_vector(a)
        norm = np.linalg.norm(a)
        if norm == 0.0:
            raise ValueError("direction vector must be nonzero")
        return SymOperator(
            kind="lowrank", dim=a.shape[0], m=float(m), c=float(c), direction=a / norm
        )

    @staticmethod
    def block_average(num_blocks, block_dim, m=0.0, c=1.0):
        """m * I + c * Avg over ``num_blocks`` blocks of size ``block_dim``."""
        if num_blocks < 1 or block_dim < 1:
            raise ValueError("num_blocks and block_dim must be positive")
        if num_blocks == 1:
            return SymOperator.scaled_identity(m + c, block_dim)
        return SymOperator(
            kind="blockavg",
            dim=num_blocks * block_dim,
            m=float(m),
            c=float(c),
            num_blocks=num_blocks,
        )

    # -- application ------------------------------------------------------

    def matvec(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.dim:
            raise DimensionMismatchError(
                "operator dim %d, vector dim %d" % (self.dim, x.shape[0])
            )
        if self.kind == "dense":
            return self.dense_mat @ x
        if self.kind == "diagonal":
            return self.diag * x
        if self.kind == "scaled":
            return self.scale * x
        if self.kind == "lowrank":
            return self.m * x + self.c * np.dot(self.direction, x) * self.direction
        if self.kind == "blockavg":
            avg = kernels.block_mean_tile(x, self.num_blocks)
            return self.m * x + self.c * avg
        raise ValueError("unknown operator kind %r" % self.kind)

    def __call__(self, x):
        return self.matvec(x)

    def quad_form(self, x):
        """<x, op x>."""
        return float(np.dot(x, self.matvec(x)))

    def to_dense(self):
        if self.dim > DENSE_DIM_LIMIT:
            raise MemoryError(
                "refusing to densify a %d-dimensional operator" % self.dim
            )
        if self.kind == "dense":
            return self.dense_mat.copy()
        if self.kind == "diagonal":
            return np.diag(self.diag)
        if self.kind == "scaled":
            return self.scale * np.eye(self.dim)
        if self.kind == "lowrank":
            return self.m * np.eye(self.dim) + self.c * np.outer(
                self.direction, self.direction
            )
        if self.kind == "blockavg":
            d = self.dim // self.num_blocks
            avg = np.tile(np.eye(d) / self.num_blocks, (self.num_blocks, self.num_blocks))
            return self.m * np.eye(self.dim) + self.c * avg
        raise ValueError("unknown operator kind %r" % self.kind)

    # -- spectra ----------------------------------------------------------

    def eig_bounds(self):
        """Return (min eigenvalue, max eigenvalue)."""
        if self.kind == "diagonal":
            return float(np.min(self.diag)), float(np.max(self.diag))
        if self.kind == "scaled":
            return self.scale, self.scale
        if self.kind in ("lowrank", "blockavg"):
            lo = min(self.m, self.m + self.c)
            hi = max(self.m, self.m + self.c)
            return lo, hi
        vals = _symmetric_eigh(self.dense_mat)[0]
        return float(vals[0]), float(vals[-1])

    def is_idempotent(self, tol=PSD_SLACK):
        """Whether op @ op == op within tol (max-entry sense)."""
        if self.kind == "diagonal":
            return bool(np.max(np.abs(self.diag * self.diag - self.diag)) <= tol)
        if self.kind == "scaled":
            return abs(self.scale * self.scale - self.scale) <= tol
        if self.kind in ("lowrank", "blockavg"):
            # (m I + c P)^2 = m^2 I + (2mc + c^2) P
            return (
                abs(self.m * self.m - self.m) <= tol
                and abs(2 * self.m * self.c + self.c * self.c - self.c) <= tol
            )
        sq = self.dense_mat @ self.dense_mat
        return bool(np.max(np.abs(sq - self.dense_mat)) <= tol)

    # -- algebra ----------------------------------------------------------

    def scale_shift(self, s, t):
        """Return s * op + t * I in the same structured form."""
        if self.kind == "diagonal":
            return SymOperator.diagonal(s * self.diag + t)
        if self.kind == "scaled":
            return SymOperator.scaled_identity(s * self.scale + t, self.dim)
        if self.kind == "lowrank":
            return SymOperator(
                kind="lowrank",
                dim=self.dim,
                m=s * self.m + t,
                c=s * self.c,
                direction=self.direction,
            )
        if self.kind == "blockavg":
            return SymOperator(
                kind="blockavg",
                dim=self.dim,
                m=s * self.m + t,
                c=s * self.c,
                num_blocks=self.num_blocks,
            )
        return SymOperator.dense(s * self.dense_mat + t * np.eye(self.dim))

    def complement(self):
        """I - op."""
        return self.scale_shift(-1.0, 1.0)

    def combine(self, other, w_self, w_other):
        """w_self * self + w_other * other, structured when representable."""
        if self.dim != other.dim:
            raise DimensionMismatchError("operator dimension mismatch")
        a, b = self, other
        if a.kind == "scaled":
            return b.scale_shift(w_other, w_self * a.scale)
        if b.kind == "scaled":
            return a.scale_shift(w_self, w_other * b.scale)
        if a.kind == "diagonal" and b.kind == "diagonal":
            return SymOperator.diagonal(w_self * a.diag + w_other * b.diag)
        if (
            a.kind == "lowrank"
            and b.kind == "lowrank"
            and np.allclose(a.direction, b.direction, atol=1e-14)
        ):
            return SymOperator(
                kind="lowrank",
                dim=a.dim,
                m=w_self * a.m + w_other * b.m,
                c=w_self * a.c + w_other * b.c,
                direction=a.direction,
            )
        if (
            a.kind == "blockavg"
            and b.kind == "blockavg"
            and a.num_blocks == b.num_blocks
        ):
            return SymOperator(
                kind="blockavg",
                dim=a.dim,
                m=w_self * a.m + w_other * b.m,
                c=w_self * a.c + w_other * b.c,
                num_blocks=a.num_blocks,
            )
        return SymOperator.dense(w_self * a.to_dense() + w_other * b.to_dense())

    def inverse_matvec(self, x):
        """Apply op^-1 to x; op must be invertible."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "diagonal":
            return x / self.diag
        if self.kind == "scaled":
            return x / self.scale
        if self.kind in ("lowrank", "blockavg"):
            # (m I + c P)^-1 = (1/m) I + (1/(m+c) - 1/m) P
            if self.m == 0.0 or self.m + self.c == 0.0:
                raise NotStronglyPositiveError("structured operator is singular")
            coef_i = 1.0 / self.m
            coef_p = 1.0 / (self.m + self.c) - coef_i
            if self.kind == "lowrank":
                return coef_i * x + coef_p * np.dot(self.direction, x) * self.direction
            avg = kernels.block_mean_tile(x, self.num_blocks)
            return coef_i * x + coef_p * avg
        try:
            return np.linalg.solve(self.dense_mat, x)
        except np.linalg.LinAlgError as exc:
            raise NotStronglyPositiveError("dense operator is singular") from exc


def spectral_norm(op):
    """Largest absolute eigenvalue of a symmetric operator."""
    lo, hi = op.eig_bounds()
    return max(abs(lo), abs(hi))


def min_eigenvalue(op):
    return op.eig_bounds()[0]


def psd_sqrt(op):
    """Positive square root of a PSD symmetric operator.

    Eigenvalues within the PSD slack below 0 are clamped to 0; anything
    lower raises
    NotPsdError. Idempotent inputs are returned unchanged.
    """
    lo = min_eigenvalue(op)
    if lo < -PSD_SLACK:
        raise NotPsdError(
            "operator has eigenvalue %.3e below the PSD slack" % lo, eigenvalue=lo
        )
    if op.is_idempotent():
        return op
    if op.kind == "diagonal":
        return SymOperator.diagonal(np.sqrt(np.clip(op.diag, 0.0, None)))
    if op.kind == "scaled":
        return SymOperator.scaled_identity(np.sqrt(max(op.scale, 0.0)), op.dim)
    if op.kind in ("lowrank", "blockavg"):
        s_ker = np.sqrt(max(op.m, 0.0))
        s_ran = np.sqrt(max(op.m + op.c, 0.0))
        if op.kind == "lowrank":
            return SymOperator(
                kind="lowrank",
                dim=op.dim,
                m=s_ker,
                c=s_ran - s_ker,
                direction=op.direction,
            )
        return SymOperator(
            kind="blockavg",
            dim=op.dim,
            m=s_ker,
            c=s_ran - s_ker,
            num_blocks=op.num_blocks,
        )
    vals, vecs = _symmetric_eigh(op.dense_mat)
    root = np.sqrt(np.clip(vals, 0.0, None))
    mat = (vecs * root) @ vecs.T
    return SymOperator.dense(0.5 * (mat + mat.T))


def pseudoinverse(mat):
    """Moore-Penrose pseudoinverse with rank truncation at
    sigma_max * max(rows, cols) * machine epsilon."""
    mat = np.asarray(mat, dtype=np.float64)
    if not np.all(np.isfinite(mat)):
        raise ValueError("matrix contains non-finite entries")
    rcond = max(mat.shape) * np.finfo(np.float64).eps
    return np.linalg.pinv(mat, rcond=rcond)


@dataclass(frozen=True)
class StrongPositivityReport:
    passed: bool
    inverse_norm: float
    inverse_norm_margin: float
    lower_margin: float
    upper_margin: float
    probes: int


def check_strongly_positive_inverse(op, delta, probes=100, rng=None):
    """Verify the inverse bounds of a strongly positive operator.

    Checks ||op^-1|| <= 1/delta and, on random probes x,
    (delta/||op||^2) ||x||^2 <= <op^-1 x, x> <= (1/delta) ||x||^2,
    returning the worst-case margins (nonnegative means the bound holds).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    lo, hi = op.eig_bounds()
    if lo < delta - PSD_SLACK:
        raise NotStronglyPositiveError(
            "min eigenvalue %.6e below requested delta %.6e" % (lo, delta)
        )
    if rng is None:
        rng = np.random.default_rng(0)
    norm = max(abs(lo), abs(hi))
    inverse_norm = 1.0 / lo
    lower_bound = delta / (norm * norm)
    upper_bound = 1.0 / delta
    lower_margin = np.inf
    upper_margin = np.inf
    for _ in range(probes):
        x = rng.standard_normal(op.dim)
        nx2 = float(np.dot(x, x))
        quad = float(np.dot(op.inverse_matvec(x), x)) / nx2
        lower_margin = min(lower_margin, quad - lower_bound)
        upper_margin = min(upper_margin, upper_bound - quad)
    slack = 1e-8 * max(1.0, upper_bound)
    norm_margin = upper_bound - inverse_norm
    passed = (
        norm_margin >= -slack
        and lower_margin >= -slack
        and upper_margin >= -slack
    )
    return StrongPositivityReport(
        passed=passed,
        inverse_norm=inverse_norm,
        inverse_norm_margin=norm_margin,
        lower_margin=float(lower_margin),
        upper_margin=float(upper_margin),
        probes=probes,
    )
