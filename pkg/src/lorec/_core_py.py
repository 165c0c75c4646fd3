"""Pure-numpy iteration kernel for the accelerated proximal-gradient solver.

Mirrors the compiled kernel in ``lorec._core`` step for step; the backend
selector picks whichever is available. Both kernels run the same scheme:
from the mixed point (Y, Z), one shared gradient G = Y + Z - sigma feeds a
singular-value soft-threshold update for the low-rank block and an entrywise
soft-threshold update for the sparse block, followed by momentum mixing with
weights alpha(t+1) = (1 + sqrt(1 + 4 alpha(t)^2)) / 2.
"""

from __future__ import annotations

import math

import numpy as np

from .exceptions import NumericError


def _frob(m: np.ndarray) -> float:
    return math.sqrt(float((m * m).sum()))


def solve_loop(
    sigma: np.ndarray,
    lam: float,
    rho: float,
    step_l: float,
    eps: float,
    max_iter: int,
    penalize_diag: bool,
):
    """Run the solver iteration on a symmetric input matrix.

    Returns ``(L, S, iterations, converged, objective_trace, momentum_trace)``
    where the traces have one entry per completed iteration.
    """
    p = sigma.shape[0]
    inv_l = 1.0 / step_l
    tau_l = lam / step_l
    tau_s = rho / step_l
    diag_idx = np.arange(p)

    init = np.diag(0.5 * np.diag(sigma))
    L = init.copy()
    S = init.copy()
    Y = init.copy()
    Z = init.copy()

    alpha = 1.0
    converged = False
    iterations = 0
    obj_trace: list[float] = []
    mom_trace: list[float] = []

    for t in range(1, max_iter + 1):
        G = (Y + Z - sigma) * inv_l
        A = Y - G
        B = Z - G

        w, V = np.linalg.eigh(A)
        tvals = np.sign(w) * np.maximum(np.abs(w) - tau_l, 0.0)
        nz = tvals != 0.0
        if nz.any():
            L_new = (V[:, nz] * tvals[nz]) @ V[:, nz].T
            L_new = (L_new + L_new.T) / 2.0
        else:
            L_new = np.zeros_like(A)
        nuclear = float(np.abs(tvals).sum())

        S_new = np.sign(B) * np.maximum(np.abs(B) - tau_s, 0.0)
        if penalize_diag:
            l1 = float(np.abs(S_new).sum())
        else:
            S_new[diag_idx, diag_idx] = B[diag_idx, diag_idx]
            l1 = float(np.abs(S_new).sum() - np.abs(S_new[diag_idx, diag_idx]).sum())

        resid = L_new + S_new - sigma
        obj = 0.5 * float((resid * resid).sum()) + lam * nuclear + rho * l1
        crit = _frob(L_new - L) / (1.0 + _frob(L)) + _frob(S_new - S) / (1.0 + _frob(S))
        if not (math.isfinite(obj) and math.isfinite(crit)):
            raise NumericError(f"non-finite iterate at iteration {t}")

        obj_trace.append(obj)
        mom_trace.append(alpha)
        iterations = t

        alpha_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * alpha * alpha))
        mix = (alpha - 1.0) / alpha_next
        Y = L_new + mix * (L_new - L)
        Z = S_new + mix * (S_new - S)
        L = L_new
        S = S_new
        alpha = alpha_next

        if crit <= eps:
            converged = True
            break

    return (
        L,
        S,
        iterations,
        converged,
        np.asarray(obj_trace, dtype=np.float64),
        np.asarray(mom_trace, dtype=np.float64),
    )
