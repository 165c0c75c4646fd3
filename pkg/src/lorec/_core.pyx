# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled iteration kernel for the accelerated proximal-gradient solver.

Same scheme as lorec._core_py, with the per-iteration entrywise passes fused
into single C loops and the symmetric eigendecomposition done through LAPACK
dsyevd directly. Row-major symmetric matrices are passed to the Fortran
routines as-is; after dsyevd the row-major view holds one eigenvector per
row, which the rank-restricted dgemm reconstruction accounts for.
"""

import numpy as np

from libc.math cimport fabs, isfinite, sqrt

from scipy.linalg.cython_blas cimport dgemm
from scipy.linalg.cython_lapack cimport dsyevd

from .exceptions import NumericError


def solve_loop(
    double[:, ::1] sigma,
    double lam,
    double rho,
    double step_l,
    double eps,
    int max_iter,
    bint penalize_diag,
):
    """Run the solver iteration; see lorec._core_py.solve_loop."""
    cdef int p = sigma.shape[0]
    cdef double inv_l = 1.0 / step_l
    cdef double tau_l = lam / step_l
    cdef double tau_s = rho / step_l

    L_arr = np.zeros((p, p))
    S_arr = np.zeros((p, p))
    Y_arr = np.zeros((p, p))
    Z_arr = np.zeros((p, p))
    Lnew_arr = np.zeros((p, p))
    Snew_arr = np.zeros((p, p))
    A_arr = np.zeros((p, p))
    B_arr = np.zeros((p, p))
    Lw_arr = np.zeros((p, p))
    VU_arr = np.zeros((p, p))
    VS_arr = np.zeros((p, p))
    w_arr = np.zeros(p)

    cdef double[:, ::1] L = L_arr, S = S_arr, Y = Y_arr, Z = Z_arr
    cdef double[:, ::1] Lnew = Lnew_arr, Snew = Snew_arr
    cdef double[:, ::1] A = A_arr, B = B_arr, Lw = Lw_arr
    cdef double[:, ::1] VU = VU_arr, VS = VS_arr
    cdef double[::1] w = w_arr

    cdef int i, j, r, t, nz, info
    cdef double g, wv, tv, lv, bv, sv, res
    cdef double nuclear, l1, resid2, dL2, dS2, nL2, nS2, obj, crit
    cdef double alpha = 1.0
    cdef double alpha_next, mix
    cdef bint converged = False
    cdef int iterations = 0

    # Initialize L = S = Y = Z = diag(sigma) / 2.
    for i in range(p):
        g = 0.5 * sigma[i, i]
        L[i, i] = g
        S[i, i] = g
        Y[i, i] = g
        Z[i, i] = g

    # dsyevd workspace, sized by a lwork = -1 query.
    cdef char jobz = b'V'
    cdef char uplo = b'L'
    cdef int lda = max(p, 1)
    cdef int lwork = -1, liwork = -1
    cdef double work_query
    cdef int iwork_query
    dsyevd(&jobz, &uplo, &p, &A[0, 0], &lda, &w[0], &work_query, &lwork,
           &iwork_query, &liwork, &info)
    if info != 0:
        raise NumericError(f"dsyevd workspace query failed (info={info})")
    lwork = <int> work_query
    liwork = iwork_query
    work_arr = np.zeros(lwork)
    iwork_arr = np.zeros(liwork, dtype=np.intc)
    cdef double[::1] work = work_arr
    cdef int[::1] iwork = iwork_arr

    # dgemm parameters for the rank-restricted reconstruction.
    cdef char no_trans = b'N'
    cdef char trans = b'T'
    cdef double one = 1.0, zero = 0.0

    obj_trace = []
    mom_trace = []

    for t in range(1, max_iter + 1):
        # Shared gradient step from the mixed point: A and B receive the
        # pre-prox targets for the low-rank and sparse blocks.
        for i in range(p):
            for j in range(p):
                g = (Y[i, j] + Z[i, j] - sigma[i, j]) * inv_l
                A[i, j] = Y[i, j] - g
                B[i, j] = Z[i, j] - g

        dsyevd(&jobz, &uplo, &p, &A[0, 0], &lda, &w[0], &work[0], &lwork,
               &iwork[0], &liwork, &info)
        if info != 0:
            raise NumericError(
                f"eigendecomposition failed at iteration {t} (dsyevd info={info})"
            )

        # Soft-threshold the spectrum; gather surviving eigenvector rows so
        # the reconstruction dgemm only touches the retained rank.
        nz = 0
        nuclear = 0.0
        for r in range(p):
            wv = w[r]
            if wv > tau_l:
                tv = wv - tau_l
            elif wv < -tau_l:
                tv = wv + tau_l
            else:
                continue
            nuclear += fabs(tv)
            for j in range(p):
                VS[nz, j] = tv * A[r, j]
                VU[nz, j] = A[r, j]
            nz += 1

        if nz > 0:
            dgemm(&no_trans, &trans, &p, &p, &nz, &one, &VS[0, 0], &lda,
                  &VU[0, 0], &lda, &zero, &Lw[0, 0], &lda)

        # Prox outputs, convergence accumulators, and the objective in one
        # fused pass. Lw is symmetrized here so iterates stay exactly
        # symmetric at every t.
        l1 = 0.0
        resid2 = 0.0
        dL2 = 0.0
        dS2 = 0.0
        nL2 = 0.0
        nS2 = 0.0
        for i in range(p):
            for j in range(p):
                lv = 0.5 * (Lw[i, j] + Lw[j, i]) if nz > 0 else 0.0
                bv = B[i, j]
                if bv > tau_s:
                    sv = bv - tau_s
                elif bv < -tau_s:
                    sv = bv + tau_s
                else:
                    sv = 0.0
                if i == j and not penalize_diag:
                    sv = bv
                else:
                    l1 += fabs(sv)
                Lnew[i, j] = lv
                Snew[i, j] = sv
                g = lv - L[i, j]
                dL2 += g * g
                nL2 += L[i, j] * L[i, j]
                g = sv - S[i, j]
                dS2 += g * g
                nS2 += S[i, j] * S[i, j]
                res = lv + sv - sigma[i, j]
                resid2 += res * res

        obj = 0.5 * resid2 + lam * nuclear + rho * l1
        crit = sqrt(dL2) / (1.0 + sqrt(nL2)) + sqrt(dS2) / (1.0 + sqrt(nS2))
        if not (isfinite(obj) and isfinite(crit)):
            raise NumericError(f"non-finite iterate at iteration {t}")

        obj_trace.append(obj)
        mom_trace.append(alpha)
        iterations = t

        alpha_next = 0.5 * (1.0 + sqrt(1.0 + 4.0 * alpha * alpha))
        mix = (alpha - 1.0) / alpha_next
        for i in range(p):
            for j in range(p):
                Y[i, j] = Lnew[i, j] + mix * (Lnew[i, j] - L[i, j])
                Z[i, j] = Snew[i, j] + mix * (Snew[i, j] - S[i, j])
        L, Lnew = Lnew, L
        S, Snew = Snew, S
        alpha = alpha_next

        if crit <= eps:
            converged = True
            break

    return (
        np.asarray(L).copy(),
        np.asarray(S).copy(),
        iterations,
        converged,
        np.asarray(obj_trace, dtype=np.float64),
        np.asarray(mom_trace, dtype=np.float64),
    )
