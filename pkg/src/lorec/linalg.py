"""Dense symmetric-matrix primitives: covariance, thresholding operators,
norms, spectral factorization, and the plain-CSV matrix format.

Matrices are float64 ndarrays kept *exactly* symmetric: entrywise operations
preserve exact symmetry on their own, and every spectral reconstruction is
re-symmetrized through :func:`symmetrize` so floating-point drift cannot
break the representation-level invariant ``M[i, j] == M[j, i]``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import NumericError, SingularMatrixError

__all__ = [
    "SpectralFactorization",
    "symmetrize",
    "is_symmetric",
    "require_symmetric",
    "sample_covariance",
    "soft_threshold",
    "svd_soft_threshold",
    "hard_threshold",
    "norms",
    "spectral_factorize",
    "invert_spd",
    "save_matrix_csv",
    "load_matrix_csv",
]


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return (M + M.T) / 2 as a new exactly symmetric array."""
    m = np.asarray(m, dtype=np.float64)
    return (m + m.T) / 2.0


def is_symmetric(m: np.ndarray) -> bool:
    """True when M is square and bitwise equal to its transpose."""
    m = np.asarray(m)
    return (
        m.ndim == 2
        and m.shape[0] == m.shape[1]
        and np.array_equal(m, m.T, equal_nan=True)
    )


def require_symmetric(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate exact symmetry and return the array as float64."""
    m = np.ascontiguousarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.array_equal(m, m.T, equal_nan=True):
        raise ValueError(f"{name} must be exactly symmetric")
    return m


def sample_covariance(data: np.ndarray) -> np.ndarray:
    """Sample covariance of an n-by-p observation matrix.

    Uses the n-1 divisor. The result is exactly symmetric and positive
    semidefinite up to rounding.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"data must be 2-dimensional, got ndim={x.ndim}")
    n = x.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 observations, got {n}")
    centered = x - x.mean(axis=0)
    return symmetrize(centered.T @ centered / (n - 1))


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not tau >= 0.0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    return tau


def soft_threshold(m: np.ndarray, tau: float) -> np.ndarray:
    """Entrywise soft-thresholding sign(m) * max(|m| - tau, 0).

    This is the proximal operator of ``tau * sum(|x|)``: coordinatewise it
    minimizes ``(x - z)**2 / 2 + tau * |x|``.
    """
    tau = _check_tau(tau)
    m = np.asarray(m, dtype=np.float64)
    return np.sign(m) * np.maximum(np.abs(m) - tau, 0.0)


def hard_threshold(m: np.ndarray, tau: float) -> np.ndarray:
    """Keep entries with |m| >= tau (inclusive), zero the rest."""
    tau = _check_tau(tau)
    m = np.asarray(m, dtype=np.float64)
    return np.where(np.abs(m) >= tau, m, 0.0)


def svd_soft_threshold(m: np.ndarray, tau: float) -> tuple[np.ndarray, int]:
    """Soft-threshold the singular values of M.

    Returns the reconstructed matrix and the number of singular values that
    survive the threshold. For exactly symmetric input the factorization is
    done by symmetric eigendecomposition (singular values are the absolute
    eigenvalues, with signs folded back on reconstruction) and the output is
    exactly symmetric.
    """
    tau = _check_tau(tau)
    m = np.asarray(m, dtype=np.float64)
    if is_symmetric(m):
        w, v = _eigh(m)
        t = np.sign(w) * np.maximum(np.abs(w) - tau, 0.0)
        nz = t != 0.0
        if not nz.any():
            return np.zeros_like(m), 0
        out = (v[:, nz] * t[nz]) @ v[:, nz].T
        return symmetrize(out), int(nz.sum())
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    st = np.maximum(s - tau, 0.0)
    nz = st != 0.0
    if not nz.any():
        return np.zeros_like(m), 0
    return (u[:, nz] * st[nz]) @ vt[nz, :], int(nz.sum())


def norms(m: np.ndarray) -> dict[str, float]:
    """All matrix norms used by the estimators and loss reports.

    Keys: ``operator`` (largest singular value), ``frobenius``, ``max``
    (largest absolute entry), ``elementwise_l1`` (sum of absolute entries),
    ``nuclear`` (sum of singular values), ``matrix_l1`` (max absolute
    column sum).
    """
    m = np.asarray(m, dtype=np.float64)
    sv = np.linalg.svd(m, compute_uv=False) if m.size else np.zeros(0)
    return {
        "operator": float(sv[0]) if sv.size else 0.0,
        "frobenius": float(np.sqrt((m * m).sum())),
        "max": float(np.abs(m).max()) if m.size else 0.0,
        "elementwise_l1": float(np.abs(m).sum()),
        "nuclear": float(sv.sum()),
        "matrix_l1": float(np.abs(m).sum(axis=0).max()) if m.size else 0.0,
    }


def _eigh(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """np.linalg.eigh with the failure mode mapped to NumericError."""
    try:
        return np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"symmetric eigendecomposition failed: {exc}") from exc


@dataclass(frozen=True)
class SpectralFactorization:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    ``eigenvectors`` holds orthonormal columns; column j pairs with
    ``eigenvalues[j]``. Signs are canonical: the first nonzero coordinate of
    each eigenvector is positive.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return symmetrize((v * self.eigenvalues) @ v.T)


def spectral_factorize(m: np.ndarray) -> SpectralFactorization:
    """Factor an exactly symmetric matrix as V diag(w) V.T, w descending."""
    m = require_symmetric(m)
    w, v = _eigh(m)
    w = w[::-1].copy()
    v = v[:, ::-1].copy()
    for j in range(v.shape[1]):
        col = v[:, j]
        nz = np.nonzero(col)[0]
        if nz.size and col[nz[0]] < 0:
            v[:, j] = -col
    return SpectralFactorization(eigenvalues=w, eigenvectors=v)


# Relative eigenvalue floor below which a matrix is treated as singular.
SPD_RTOL = 1e-12


def invert_spd(m: np.ndarray) -> np.ndarray:
    """Invert a symmetric positive-definite matrix via eigendecomposition.

    Raises SingularMatrixError when the smallest eigenvalue does not exceed
    ``SPD_RTOL`` times the largest, reporting the offending eigenvalue.
    """
    m = require_symmetric(m)
    w, v = _eigh(m)
    w_min, w_max = float(w[0]), float(w[-1])
    if not w_min > SPD_RTOL * max(w_max, 0.0):
        raise SingularMatrixError(
            f"matrix is not safely positive definite: smallest eigenvalue "
            f"{w_min:.6e} vs largest {w_max:.6e}"
        )
    return symmetrize((v / w) @ v.T)


def save_matrix_csv(path, m: np.ndarray) -> None:
    """Write a p x p matrix as headerless CSV, one row per line.

    Entries are formatted with repr so they round-trip bit-for-bit.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix CSV requires a square matrix, got {m.shape}")
    with open(path, "w", newline="") as fh:
        for row in m:
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write("\n")


def load_matrix_csv(path) -> np.ndarray:
    """Read a headerless numeric CSV and require it to be square."""
    rows = []
    with open(path, newline="") as fh:
        for record in csv.reader(fh):
            if not record:
                continue
            rows.append([float(x) for x in record])
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    m = np.array(rows, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{path}: expected a square matrix, got shape {m.shape}")
    return m
