"""Dense linear algebra for stacked client states.

A model vector is a 1-D float64 array of length n.  A stacked matrix is an
N x n float64 array whose row i belongs to client i.  All weighted norms
used by the convergence analysis are induced by N x N matrices of the form

    Q = s * I                   ("identity-scaled")
    Q = a * I + b * P           ("centering-combination")

where P = I - (1/N) 11^T is the orthogonal projection that removes the
client mean from every column.  P equals its own pseudoinverse, so this
two-parameter family covers every weight matrix the analysis needs without
ever forming an N x N matrix explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError, InvariantError

# norms computed as sums of squares may go this far below zero before we
# treat the weight as invalid
_NEG_TOL = 1e-12


def as_vector(x) -> np.ndarray:
    """Validate and return a finite 1-D float64 model vector."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise DimensionError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InputError("model vector contains NaN or Inf")
    return v


def as_stacked(A) -> np.ndarray:
    """Validate and return a finite 2-D float64 stacked matrix (N x n)."""
    M = np.asarray(A, dtype=float)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise DimensionError(f"expected an N x n matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InputError("stacked matrix contains NaN or Inf")
    return M


def row_mean(A: np.ndarray) -> np.ndarray:
    """Client mean: average of the rows, a length-n vector."""
    return np.asarray(A, dtype=float).mean(axis=0)


def center_project(A) -> np.ndarray:
    """Apply P = I - (1/N) 11^T: subtract the client mean from every row.

    Idempotent; annihilates matrices with identical rows; the column sums
    of the result are zero.
    """
    M = as_stacked(A)
    return M - M.mean(axis=0, keepdims=True)


@dataclass(frozen=True)
class WeightSpec:
    """Weight matrix Q = a*I + b*P in the two-parameter family above.

    identity-scaled(s) is stored as a=s, b=0.  Validity requires Q to be
    positive semidefinite on the subspace it is applied to: a >= 0 and
    a + b >= 0 (the two eigenvalues of Q, on span(1) and range(P)).
    """

    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise InputError("weight coefficients must be finite")
        if self.a < 0 or self.a + self.b < 0:
            raise InvariantError(
                f"weight Q = {self.a}*I + {self.b}*P is indefinite"
            )

    @classmethod
    def identity_scaled(cls, s: float) -> "WeightSpec":
        if not s > 0:
            raise InvariantError(f"identity scaling must be positive, got {s}")
        return cls(a=float(s), b=0.0)

    @classmethod
    def centering_combination(cls, a: float, b: float) -> "WeightSpec":
        return cls(a=float(a), b=float(b))

    def apply(self, A: np.ndarray) -> np.ndarray:
        """Return Q A for a stacked matrix A."""
        if self.b == 0.0:
            return self.a * A
        return self.a * A + self.b * center_project(A)


def frob_inner(A, B, Q: WeightSpec | None = None) -> float:
    """Weighted Frobenius inner product tr(A^T Q B).

    With Q omitted this is the plain Frobenius inner product.  Symmetric
    and bilinear in (A, B).
    """
    Ma, Mb = as_stacked(A), as_stacked(B)
    if Ma.shape != Mb.shape:
        raise DimensionError(f"shape mismatch: {Ma.shape} vs {Mb.shape}")
    if Q is None:
        return float(np.sum(Ma * Mb))
    return float(np.sum(Q.apply(Ma) * Mb))


def weighted_norm_sq(A, Q: WeightSpec) -> float:
    """Squared weighted Frobenius norm ||A||_Q^2 = tr(A^T Q A).

    Nonnegative for any valid WeightSpec; a result below -1e-12 means the
    weight was invalid for this input and raises.
    """
    v = frob_inner(A, A, Q)
    if v < -_NEG_TOL:
        raise InvariantError(f"weighted norm came out negative: {v}")
    return max(v, 0.0)


def frob_norm(A) -> float:
    """Plain Frobenius norm of a stacked matrix."""
    return float(np.linalg.norm(np.asarray(A, dtype=float)))
