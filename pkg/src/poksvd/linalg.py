"""Dense complex linear-algebra kernels used by the pursuit and learning loops.

Only two primitives are needed: a regularized least-squares solve and the
dominant singular triple of a complex matrix.  Both are deterministic:
the power iteration always starts from the same (all-ones) vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative ridge weight applied when the normal equations are numerically
# singular (near-collinear atoms on degenerate inputs).
RIDGE_SCALE = 1e-10


@dataclass
class Diagnostics:
    """Counters for numerically degenerate events; never raised as errors."""

    ridge_fallbacks: int = 0
    refine_cap_hits: int = 0

    def reset(self):
        self.ridge_fallbacks = 0
        self.refine_cap_hits = 0


diagnostics = Diagnostics()


@dataclass
class SingularTriple:
    """Dominant singular value sigma with unit-norm left/right vectors."""

    sigma: float
    left: np.ndarray
    right: np.ndarray


class PowerIterationError(RuntimeError):
    """Raised when the power iteration fails to converge; carries the last
    iterate so callers can inspect or reuse it."""

    def __init__(self, message, last_triple):
        super().__init__(message)
        self.last_triple = last_triple


def least_squares_solve(A, y):
    """Minimize ||y - A x||_2 over complex x via the normal equations.

    If A^H A is numerically singular a small ridge proportional to
    trace(A^H A)/cols is added and ``diagnostics.ridge_fallbacks`` is
    incremented.

    Parameters
    ----------
    A : (rows, cols) complex ndarray
    y : (rows,) complex ndarray

    Returns
    -------
    x : (cols,) complex ndarray
    """
    A = np.asarray(A, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if A.ndim != 2 or y.ndim != 1 or A.shape[0] != y.shape[0]:
        raise ValueError(
            "dimension mismatch: A is %s, y has length %d" % (A.shape, y.shape[0])
        )
    G = A.conj().T @ A
    b = A.conj().T @ y
    try:
        L = np.linalg.cholesky(G)
        x = np.linalg.solve(L.conj().T, np.linalg.solve(L, b))
    except np.linalg.LinAlgError:
        ridge = RIDGE_SCALE * max(np.trace(G).real, 1.0) / max(G.shape[0], 1)
        diagnostics.ridge_fallbacks += 1
        x = np.linalg.solve(G + ridge * np.eye(G.shape[0]), b)
    return x


def dominant_singular_triple(A, tol=1e-12, max_iter=5000):
    """Largest singular value of A with its singular vectors.

    Power iteration on A^H A from a fixed all-ones start vector, so repeated
    calls on the same matrix are bitwise identical.

    Raises
    ------
    ValueError
        If A is the zero matrix.
    PowerIterationError
        If the iteration has not converged after ``max_iter`` sweeps; the
        exception carries the last triple.
    """
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim != 2:
        raise ValueError("expected a matrix, got ndim=%d" % A.ndim)
    if tol <= 0:
        raise ValueError("tol must be positive")
    norm_A = np.linalg.norm(A)
    if norm_A == 0.0:
        raise ValueError("zero matrix")

    G = A.conj().T @ A
    n = G.shape[0]
    v = np.ones(n, dtype=np.complex128) / np.sqrt(n)
    sigma2 = 0.0
    for _ in range(max_iter):
        w = G @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # start vector in the null space; deterministic restart on e_1
            v = np.zeros(n, dtype=np.complex128)
            v[0] = 1.0
            continue
        v_new = w / nw
        sigma2_new = np.real(np.vdot(v_new, G @ v_new))
        # residual of the eigen-equation decides convergence
        resid = np.linalg.norm(G @ v_new - sigma2_new * v_new)
        v = v_new
        sigma2 = sigma2_new
        if resid <= tol * max(sigma2, np.finfo(float).tiny):
            break
    else:
        sigma = np.sqrt(max(sigma2, 0.0))
        u = A @ v
        nu = np.linalg.norm(u)
        u = u / nu if nu > 0 else u
        raise PowerIterationError(
            "power iteration did not converge in %d iterations" % max_iter,
            SingularTriple(sigma=float(sigma), left=u, right=v),
        )

    sigma = float(np.sqrt(max(sigma2, 0.0)))
    u = A @ v
    nu = np.linalg.norm(u)
    if nu > 0:
        u = u / nu
    sigma = float(np.linalg.norm(A @ v))
    return SingularTriple(sigma=sigma, left=u, right=v)
