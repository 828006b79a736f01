"""Thin SVD adapter plus relative singular-value truncation.

The backend is numpy's LAPACK divide-and-conquer routine; keeping it behind
this adapter lets an alternate dense SVD be swapped in without touching
callers. The truncation threshold is always RELATIVE to the largest singular
value, which keeps it scale-invariant (exposed on the CLI as ``--sv-tol``).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateInputError
from .matrix import as_matrix


@dataclass
class SvdResult:
    """Thin SVD ``a = u @ diag(sigma) @ vt`` with sigma descending."""

    u: np.ndarray       # n x r, orthonormal columns
    sigma: np.ndarray   # r, descending, nonnegative
    vt: np.ndarray      # r x d, orthonormal rows

    @property
    def rank(self) -> int:
        return self.sigma.shape[0]


def thin_svd(a: np.ndarray) -> SvdResult:
    """Thin SVD of a dense matrix.

    Backend non-convergence (rare) surfaces as numpy.linalg.LinAlgError.
    """
    a = as_matrix(a)
    u, sigma, vt = np.linalg.svd(a, full_matrices=False)
    return SvdResult(u=u, sigma=sigma, vt=vt)


def truncate(svd: SvdResult, threshold: float) -> SvdResult:
    """Drop singular components with ``sigma_j <= threshold * sigma_1``.

    The comparison is strict (components are kept iff
    ``sigma_j > threshold * sigma_1``), so ``threshold=0`` keeps exactly the
    strictly positive components and at least one component survives whenever
    ``sigma_1 > 0``. Idempotent at a fixed threshold.
    """
    if not 0 <= threshold < 1:
        raise ConfigurationError(f"truncation threshold must be in [0, 1), got {threshold}")
    sigma = svd.sigma
    if sigma.shape[0] == 0 or sigma[0] <= 0:
        raise DegenerateInputError("cannot truncate an all-zero matrix (largest singular value is 0)")
    r: int = int(np.count_nonzero(sigma > threshold * sigma[0]))
    return SvdResult(u=svd.u[:, :r], sigma=sigma[:r], vt=svd.vt[:r, :])
