"""Cholesky helpers shared by the simulator, the LDA and the SNR estimator."""

import numpy as np
from scipy.linalg import cho_solve, lapack, solve_triangular

from p300snr.errors import NumericalError


def cholesky(a: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor of ``a``.

    Raises NumericalError naming the first leading minor that is not
    positive definite.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise NumericalError(f"{what} must be square, got shape {a.shape}")
    factor, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NumericalError(
            f"{what} is not positive definite: leading minor of order {info} fails")
    if info < 0:
        raise NumericalError(f"dpotrf rejected argument {-info}")
    return factor


def solve_lower(chol: np.ndarray, b: np.ndarray) -> np.ndarray:
    return solve_triangular(chol, b, lower=True, check_finite=False)


def chol_solve(chol: np.ndarray, b: np.ndarray) -> np.ndarray:
    return cho_solve((chol, True), b, check_finite=False)
