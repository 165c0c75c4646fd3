"""Synthetic ground-truth covariance models and Gaussian sampling.

Three families, each an exact sum Sigma = L + S of a low-rank and a sparse
part:

* ``factor``: three latent directions of strength 8 plus unit noise,
  Sigma = U diag(8, 8, 8) U' + I with Haar-uniform orthonormal U.
* ``compound_symmetry``: constant between-group covariance 0.2 plus a
  randomly permuted block-diagonal within-group part (5x5 blocks of
  0.4 * ones + 0.4 * I).
* ``spike``: a single sparse spike 16 * u u' with u supported on a random
  half of the coordinates at values +-1/sqrt(k), plus block-diagonal noise
  (4x4 blocks of 0.4 * ones + 0.6 * I).

All generators are pure functions of (p, seed); sampling uses the PCG64
generator through numpy's SeedSequence so replication seeds derive
deterministically from (seed, index).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .exceptions import NumericError
from .linalg import load_matrix_csv, require_symmetric, save_matrix_csv, symmetrize

__all__ = [
    "GroundTruthModel",
    "child_rng",
    "gen_factor",
    "gen_compound_symmetry",
    "gen_spike",
    "sample_gaussian",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class GroundTruthModel:
    """A known (Sigma, L, S) triple for recovery scoring."""

    sigma: np.ndarray
    low_rank: np.ndarray
    sparse: np.ndarray
    true_rank: int
    true_support: frozenset
    family: str
    family_params: dict

    def __post_init__(self):
        sigma = require_symmetric(self.sigma, "sigma")
        low = require_symmetric(self.low_rank, "low_rank")
        sp = require_symmetric(self.sparse, "sparse")
        if not np.array_equal(sigma, low + sp):
            raise ValueError("sigma must equal low_rank + sparse exactly")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "low_rank", low)
        object.__setattr__(self, "sparse", sp)

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]


def child_rng(seed: int, *path: int) -> np.random.Generator:
    """Deterministic per-task generator derived from (seed, *path)."""
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(path)))


def _support_of(sparse: np.ndarray) -> frozenset:
    idx = np.argwhere(sparse != 0.0)
    return frozenset((int(i), int(j)) for i, j in idx)


def _haar_columns(p: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Orthonormal p x k matrix drawn from the Haar measure (QR with the
    sign of R's diagonal folded in)."""
    g = rng.standard_normal((p, k))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))


def gen_factor(p: int, seed: int) -> GroundTruthModel:
    """Three-factor model: Sigma = U diag(8,8,8) U' + I."""
    if p < 4:
        raise ValueError(f"factor model needs p >= 4, got {p}")
    rng = child_rng(seed, 0)
    u = _haar_columns(p, 3, rng)
    low = symmetrize(8.0 * (u @ u.T))
    sparse = np.eye(p)
    return GroundTruthModel(
        sigma=low + sparse,
        low_rank=low,
        sparse=sparse,
        true_rank=3,
        true_support=_support_of(sparse),
        family="factor",
        family_params={"strengths": [8.0, 8.0, 8.0], "n_factors": 3},
    )


def _block_diagonal(block: np.ndarray, count: int) -> np.ndarray:
    b = block.shape[0]
    out = np.zeros((b * count, b * count))
    for i in range(count):
        out[i * b : (i + 1) * b, i * b : (i + 1) * b] = block
    return out


def gen_compound_symmetry(p: int, seed: int) -> GroundTruthModel:
    """Rank-one 0.2 * ones plus permuted 5x5 blocks of 0.4 * ones + 0.4 * I.

    Only the block part is permuted; the all-ones part is permutation
    invariant so this matches permuting the whole matrix.
    """
    if p % 5 != 0 or p < 5:
        raise ValueError(f"compound symmetry needs p divisible by 5, got {p}")
    rng = child_rng(seed, 0)
    low = np.full((p, p), 0.2)
    block = 0.4 * np.ones((5, 5)) + 0.4 * np.eye(5)
    sparse = _block_diagonal(block, p // 5)
    perm = rng.permutation(p)
    sparse = sparse[np.ix_(perm, perm)]
    return GroundTruthModel(
        sigma=low + sparse,
        low_rank=low,
        sparse=sparse,
        true_rank=1,
        true_support=_support_of(sparse),
        family="compound_symmetry",
        family_params={"block_size": 5, "between": 0.2, "within": 0.4},
    )


def gen_spike(p: int, seed: int) -> GroundTruthModel:
    """Sparse spike 16 * u u' (support size p/2, entries +-1/sqrt(k)) plus
    4x4 blocks of 0.4 * ones + 0.6 * I."""
    if p % 4 != 0 or p < 4:
        raise ValueError(f"spike model needs p divisible by 4, got {p}")
    rng = child_rng(seed, 0)
    k = p // 2
    support = rng.choice(p, size=k, replace=False)
    signs = rng.choice([-1.0, 1.0], size=k)
    u = np.zeros(p)
    u[support] = signs / np.sqrt(k)
    low = 16.0 * np.outer(u, u)
    block = 0.4 * np.ones((4, 4)) + 0.6 * np.eye(4)
    sparse = _block_diagonal(block, p // 4)
    return GroundTruthModel(
        sigma=low + sparse,
        low_rank=low,
        sparse=sparse,
        true_rank=1,
        true_support=_support_of(sparse),
        family="spike",
        family_params={"beta": 16.0, "k": int(k), "spike_support": sorted(int(i) for i in support)},
    )


GENERATORS = {
    "factor": gen_factor,
    "compound_symmetry": gen_compound_symmetry,
    "spike": gen_spike,
}


def sample_gaussian(model: GroundTruthModel, n: int, seed: int) -> np.ndarray:
    """Draw n rows from N(0, Sigma) through the spectral square root."""
    if n < 1:
        raise ValueError(f"need n >= 1 observations, got {n}")
    w, v = np.linalg.eigh(model.sigma)
    if w[0] <= 0.0:
        raise NumericError(
            f"model covariance is not positive definite (min eigenvalue {w[0]:.3e})"
        )
    root = v * np.sqrt(w)
    rng = child_rng(seed, 1)
    z = rng.standard_normal((n, model.dim))
    return z @ root.T


def save_model(model: GroundTruthModel, out_dir) -> None:
    """Serialize to a directory: sigma.csv, low_rank.csv, sparse.csv, meta.json."""
    os.makedirs(out_dir, exist_ok=True)
    save_matrix_csv(os.path.join(out_dir, "sigma.csv"), model.sigma)
    save_matrix_csv(os.path.join(out_dir, "low_rank.csv"), model.low_rank)
    save_matrix_csv(os.path.join(out_dir, "sparse.csv"), model.sparse)
    meta = {
        "family": model.family,
        "family_params": model.family_params,
        "true_rank": model.true_rank,
        "dim": model.dim,
    }
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(in_dir) -> GroundTruthModel:
    with open(os.path.join(in_dir, "meta.json")) as fh:
        meta = json.load(fh)
    sparse = load_matrix_csv(os.path.join(in_dir, "sparse.csv"))
    return GroundTruthModel(
        sigma=load_matrix_csv(os.path.join(in_dir, "sigma.csv")),
        low_rank=load_matrix_csv(os.path.join(in_dir, "low_rank.csv")),
        sparse=sparse,
        true_rank=int(meta["true_rank"]),
        true_support=_support_of(sparse),
        family=meta["family"],
        family_params=meta["family_params"],
    )
