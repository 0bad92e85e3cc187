"""Restarted Lanczos for the lowest eigenpair of a Hermitian linear map."""

from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.linalg


class LanczosBreakdown(RuntimeError):
    pass


def lanczos_ground(
    matvec: Callable[[np.ndarray], np.ndarray],
    v0: np.ndarray,
    *,
    n_iter: int = 20,
    tol: float = 1e-12,
    max_restarts: int = 50,
) -> tuple[float, np.ndarray]:
    """Lowest eigenvalue and unit eigenvector of ``matvec``.

    Runs ``n_iter`` Lanczos steps with full re-orthogonalisation, restarts
    from the Ritz vector, and stops once the residual norm falls below
    ``tol * max(1, |theta|)``. The iteration is seeded by ``v0`` so a good
    guess (e.g. the previous DMRG tensor) converges in one or two cycles.
    """
    shape = v0.shape
    v = np.asarray(v0).ravel()
    dim = v.size
    norm = np.linalg.norm(v)
    if norm == 0 or not np.isfinite(norm):
        raise LanczosBreakdown("starting vector has zero or non-finite norm")
    v = v / norm
    k_max = max(1, min(n_iter, dim))

    theta = np.nan
    for _ in range(max_restarts + 1):
        w = np.asarray(matvec(v.reshape(shape))).ravel()
        basis = np.empty((k_max, dim), dtype=np.result_type(v, w))
        basis[0] = v
        alphas, betas = [], []
        for j in range(k_max):
            if j > 0:
                w = np.asarray(matvec(basis[j].reshape(shape))).ravel()
            alpha = np.vdot(basis[j], w).real
            alphas.append(alpha)
            if j + 1 == k_max:
                break
            # two Gram-Schmidt passes keep the basis orthogonal to machine precision
            w = w - basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
            w = w - basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
            beta = np.linalg.norm(w)
            if beta < 1e-14 * max(1.0, abs(alpha)):
                break
            betas.append(beta)
            basis[j + 1] = w / beta
        m = len(alphas)
        if m == 1:
            vals, vecs = np.array([alphas[0]]), np.ones((1, 1))
        else:
            vals, vecs = scipy.linalg.eigh_tridiagonal(
                np.array(alphas), np.array(betas[: m - 1]), select="i", select_range=(0, 0)
            )
        theta = float(vals[0])
        ritz = vecs[:, 0] @ basis[:m]
        ritz /= np.linalg.norm(ritz)
        if not np.all(np.isfinite(ritz)):
            raise LanczosBreakdown("non-finite Ritz vector")
        v = ritz
        if m < k_max:
            # invariant Krylov subspace: the Ritz pair is exact
            return theta, ritz.reshape(shape)
        residual = np.linalg.norm(np.asarray(matvec(ritz.reshape(shape))).ravel() - theta * ritz)
        if residual <= tol * max(1.0, abs(theta)):
            return theta, ritz.reshape(shape)
    return theta, v.reshape(shape)
