"""Dense small-matrix primitives used throughout the package.

Everything here operates on plain ``numpy.float64`` arrays of modest size
(the systems of interest have two to eight states), so the routines favour
robustness and determinism over asymptotic speed.  Matrix exponentials use
the scaling-and-squaring Pade approximant, eigenvalues come from the QR
iteration underneath ``numpy.linalg.eigvals``, and all least-squares solves
return the minimum-norm solution so downstream gain synthesis is
deterministic.
"""

import numpy as np
import scipy.linalg

__all__ = [
    "expm",
    "solve_least_norm",
    "lyapunov_solve",
    "hurwitz_margin",
    "vec",
    "mat",
    "DimensionError",
    "NotHurwitzError",
]


class DimensionError(ValueError):
    """Raised when matrix/vector shapes are inconsistent."""


class NotHurwitzError(ValueError):
    """Raised when an operation requires a Hurwitz matrix and gets none."""


def _as_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DimensionError(f"{name} has non-finite entries")
    return a


def _as_square(a, name="matrix"):
    a = _as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    return a


def expm(a, dt=1.0):
    """Matrix exponential ``e^{a*dt}``.

    Parameters
    ----------
    a : (n, n) array_like
        Square matrix.
    dt : float
        Time scale.  ``dt = 0`` returns the identity exactly.

    Returns
    -------
    (n, n) ndarray
    """
    a = _as_square(a, "expm argument")
    if not np.isfinite(dt):
        raise DimensionError("dt must be finite")
    if dt == 0.0:
        return np.eye(a.shape[0])
    return scipy.linalg.expm(a * float(dt))


def solve_least_norm(m, b):
    """Minimum-norm solution of ``m @ x = b`` in the least-squares sense.

    Returns
    -------
    x : ndarray
        The minimum-norm minimiser of ``||m x - b||_2``.
    residual : float
        ``||m x - b||_2`` of the returned solution.
    """
    m = _as_matrix(m, "coefficient matrix")
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or b.shape[0] != m.shape[0]:
        raise DimensionError(
            f"right-hand side has shape {b.shape}, expected ({m.shape[0]},)"
        )
    x, _, _, _ = np.linalg.lstsq(m, b, rcond=None)
    residual = float(np.linalg.norm(m @ x - b))
    return x, residual


def hurwitz_margin(a):
    """Largest real part over the eigenvalues of ``a``.

    Negative means Hurwitz stable; the magnitude is the stability margin.
    """
    a = _as_square(a, "hurwitz_margin argument")
    return float(np.linalg.eigvals(a).real.max())


def lyapunov_solve(a, q, residual_tol=1e-9):
    """Solve ``a^T p + p a = -q`` for symmetric positive-definite ``p``.

    ``a`` must be Hurwitz; ``q`` symmetric positive definite.  The result is
    symmetrised and checked against the residual tolerance.
    """
    a = _as_square(a, "a")
    q = _as_square(q, "q")
    if a.shape != q.shape:
        raise DimensionError(f"shape mismatch: a {a.shape}, q {q.shape}")
    margin = hurwitz_margin(a)
    if margin >= 0.0:
        raise NotHurwitzError(
            f"lyapunov_solve requires a Hurwitz matrix (margin {margin:+.3e})"
        )
    p = scipy.linalg.solve_continuous_lyapunov(a.T, -q)
    p = 0.5 * (p + p.T)
    residual = np.linalg.norm(a.T @ p + p @ a + q)
    if residual > residual_tol:
        raise NotHurwitzError(
            f"Lyapunov residual {residual:.3e} exceeds tolerance {residual_tol:.1e}"
        )
    return p


def vec(m):
    """Stack the columns of ``m`` into a single vector (column-major)."""
    m = _as_matrix(m, "vec argument")
    return m.reshape(-1, order="F").copy()


def mat(v, rows, cols):
    """Inverse of :func:`vec`: reshape a vector into a (rows, cols) matrix."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise DimensionError(f"mat expects a vector, got shape {v.shape}")
    if v.shape[0] != rows * cols:
        raise DimensionError(
            f"cannot reshape length {v.shape[0]} into ({rows}, {cols})"
        )
    return v.reshape((rows, cols), order="F").copy()
