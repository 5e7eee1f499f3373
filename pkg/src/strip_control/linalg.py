"""Small dense solvers shared by the spectral and control modules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg


class IllConditionedError(ArithmeticError):
    pass


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    relative_residual: float
    converged: bool


def conjugate_gradient(apply: Callable[[np.ndarray], np.ndarray], b: np.ndarray, *,
                       tol: float = 1e-8, maxiter: int = 1000) -> CGResult:
    """Plain conjugate gradients for a symmetric positive definite operator.

    Stops when ``||b - A x|| <= tol * ||b||``.  The residual is recomputed
    from scratch before declaring convergence.
    """
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return CGResult(x, 0, 0.0, True)
    r = b.copy()
    p = r.copy()
    rr = r @ r
    for it in range(1, maxiter + 1):
        Ap = apply(p)
        pAp = p @ Ap
        if pAp <= 0:
            break
        alpha = rr / pAp
        x += alpha * p
        r -= alpha * Ap
        rr_new = r @ r
        if np.sqrt(rr_new) <= tol * bnorm:
            r = b - apply(x)
            rr_new = r @ r
            if np.sqrt(rr_new) <= tol * bnorm:
                return CGResult(x, it, float(np.sqrt(rr_new) / bnorm), True)
        p = r + (rr_new / rr) * p
        rr = rr_new
    res = np.linalg.norm(b - apply(x)) / bnorm
    return CGResult(x, maxiter, float(res), bool(res <= tol))


def largest_generalized_eigenvalue(A: np.ndarray, B: np.ndarray, *, rng: np.random.Generator,
                                   block: int = 6, tol: float = 1e-8, maxiter: int = 5000,
                                   cond_limit: float = 1e15) -> tuple[float, np.ndarray]:
    """Largest ``theta`` with ``A v = theta B v`` for symmetric A and SPD B.

    Block inverse subspace iteration with Rayleigh-Ritz on a Jacobi-scaled
    pencil, started from seeded random vectors.  Raises IllConditionedError if
    B is numerically singular.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = len(B)
    diag = np.diag(B).copy()
    if n == 0:
        raise ValueError("empty pencil")
    if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        raise IllConditionedError("matrix has a non-positive diagonal entry")
    s = 1.0 / np.sqrt(diag)
    As = s[:, None] * A * s[None, :]
    Bs = s[:, None] * B * s[None, :]
    try:
        factor = scipy.linalg.cho_factor(Bs, lower=True)
    except np.linalg.LinAlgError:
        raise IllConditionedError("matrix is not numerically positive definite") from None
    piv = np.abs(np.diag(factor[0]))
    if piv.min() ** 2 * cond_limit < piv.max() ** 2:
        raise IllConditionedError("matrix is numerically singular")

    k = min(block, n)
    V = rng.standard_normal((n, k))
    theta_old = None
    for _ in range(maxiter):
        Y = scipy.linalg.cho_solve(factor, As @ V)
        Q, _ = np.linalg.qr(Y)
        a_small = Q.T @ As @ Q
        b_small = Q.T @ Bs @ Q
        w, U = scipy.linalg.eigh(0.5 * (a_small + a_small.T), 0.5 * (b_small + b_small.T))
        order = np.argsort(w)[::-1]
        w, U = w[order], U[:, order]
        V = Q @ U
        theta = float(w[0])
        if theta_old is not None and abs(theta - theta_old) <= tol * abs(theta):
            break
        theta_old = theta
    vec = s * V[:, 0]
    return theta, vec / np.linalg.norm(vec)
