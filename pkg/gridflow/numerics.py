"""
Dense linear-algebra kernel: pseudoinverse, null space and projection.

The matrices handled here are tiny (line count by generator count at most), so
every rank decision goes through an SVD with a relative cutoff.
"""
import numpy as np
import numpy.typing as npt
from scipy import linalg

from .exceptions import SingularProjectionError

DenseMatrix = npt.NDArray[np.float64]

DEFAULT_TOL = 1e-10


def as_matrix(values):
    """Coerce to a finite 2-D float array."""
    matrix = np.atleast_2d(np.asarray(values, dtype=float))
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix entries must be finite")
    return matrix


def pinv(a, tol=DEFAULT_TOL):
    """
    Moore-Penrose pseudoinverse; singular values below ``tol * sigma_max`` are
    treated as zero. A zero matrix maps to the zero matrix of transposed shape.
    """
    a = as_matrix(a)
    if not a.size:
        return np.zeros(a.T.shape)
    return linalg.pinv(a, atol=0.0, rtol=tol)


def nullspace_basis(a, tol=DEFAULT_TOL):
    """Orthonormal basis of ker(a) as columns; zero columns when a has full column rank."""
    a = as_matrix(a)
    return linalg.null_space(a, rcond=tol)


def project_onto_columns(basis, v, tol=DEFAULT_TOL):
    """
    Least-squares projection ``Mb (Mb^T Mb)^-1 Mb^T v`` of ``v`` onto the
    column space of ``basis``. An empty basis projects everything to zero.
    """
    v = np.asarray(v, dtype=float)
    basis = np.asarray(basis, dtype=float).reshape(v.shape[0], -1)
    if basis.shape[1] == 0:
        return np.zeros_like(v)
    gram = basis.T @ basis
    singular = linalg.svdvals(gram)
    if singular[-1] <= tol * singular[0]:
        raise SingularProjectionError(
            "projection basis has dependent columns; re-orthonormalize it",
            {'condition': float(singular[0] / singular[-1]) if singular[-1] else None},
        )
    return basis @ linalg.solve(gram, basis.T @ v, assume_a='pos')
