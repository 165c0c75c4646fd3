"""Covariance estimators behind one interface: the low-rank-plus-sparse
decomposition (plain and thresholded-input variants) and the comparison
baselines (sample covariance, hard thresholding, shrink to identity).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import hard_threshold, sample_covariance
from .solver import SUPPORT_CUTOFF, Decomposition, SolverConfig, solve

__all__ = ["KINDS", "EstimatorSpec", "estimate", "spike_support_recovery"]

KINDS = (
    "lorec",
    "lorec_thresholded_input",
    "sample",
    "hard_threshold",
    "shrink_to_identity",
)

_REQUIRED_PARAMS = {
    "lorec": ("lambda", "rho"),
    "lorec_thresholded_input": ("tau", "lambda", "rho"),
    "sample": (),
    "hard_threshold": ("tau",),
    "shrink_to_identity": ("w",),
}


@dataclass(frozen=True)
class EstimatorSpec:
    """An estimator kind plus its parameters.

    Parameters by kind: ``lorec`` needs positive lambda and rho;
    ``lorec_thresholded_input`` additionally a nonnegative input threshold
    tau; ``hard_threshold`` a nonnegative tau; ``shrink_to_identity`` a
    weight w in [0, 1]; ``sample`` takes none.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}; expected one of {KINDS}")
        required = _REQUIRED_PARAMS[self.kind]
        missing = [k for k in required if k not in self.params]
        if missing:
            raise ValueError(f"{self.kind} estimator missing params: {missing}")
        extra = [k for k in self.params if k not in required]
        if extra:
            raise ValueError(f"{self.kind} estimator got unexpected params: {extra}")
        p = self.params
        if "lambda" in required and not p["lambda"] > 0:
            raise ValueError(f"lambda must be positive, got {p['lambda']}")
        if "rho" in required and not p["rho"] > 0:
            raise ValueError(f"rho must be positive, got {p['rho']}")
        if "tau" in required and not p["tau"] >= 0:
            raise ValueError(f"tau must be nonnegative, got {p['tau']}")
        if "w" in required and not 0.0 <= p["w"] <= 1.0:
            raise ValueError(f"shrinkage weight must be in [0, 1], got {p['w']}")

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "params": self.params}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EstimatorSpec":
        data = json.loads(text)
        return cls(kind=data["kind"], params=dict(data.get("params", {})))


def estimate(
    spec: EstimatorSpec,
    data: np.ndarray,
    *,
    epsilon: float = 1e-4,
    max_iter: int = 5000,
    penalize_diagonal: bool = True,
) -> tuple[np.ndarray, Decomposition | None]:
    """Fit the estimator on an n x p observation matrix.

    Returns the covariance estimate and, for the decomposition-based kinds,
    the fitted (L, S) pair. Solver controls apply only to those kinds.
    """
    sigma_n = sample_covariance(data)
    p = sigma_n.shape[0]
    params = spec.params

    if spec.kind in ("lorec", "lorec_thresholded_input"):
        target = sigma_n
        if spec.kind == "lorec_thresholded_input":
            target = hard_threshold(sigma_n, params["tau"])
        config = SolverConfig(
            lam=params["lambda"],
            rho=params["rho"],
            epsilon=epsilon,
            max_iter=max_iter,
            penalize_diagonal=penalize_diagonal,
        )
        result = solve(target, config)
        decomp = result.estimate
        return decomp.total(), decomp

    if spec.kind == "sample":
        return sigma_n, None

    if spec.kind == "hard_threshold":
        # The diagonal is left alone: sparsity assumptions never touch
        # variances, and zeroing them would wreck positive semidefiniteness.
        out = hard_threshold(sigma_n, params["tau"])
        np.fill_diagonal(out, np.diag(sigma_n))
        return out, None

    # shrink_to_identity: trace-preserving pull toward a scaled identity.
    w = params["w"]
    mu = float(np.trace(sigma_n)) / p
    return (1.0 - w) * sigma_n + w * mu * np.eye(p), None


def spike_support_recovery(low_rank: np.ndarray, k: int) -> set[int]:
    """Recover the support of a single spike from a rank-one estimate.

    Takes the leading eigenvector u of the low-rank estimate, forms u u',
    keeps entries of magnitude at least 1 / (2k), and returns the row
    indices with any surviving entry.
    """
    if k < 1:
        raise ValueError(f"support size k must be >= 1, got {k}")
    low_rank = np.asarray(low_rank, dtype=np.float64)
    w, v = np.linalg.eigh(low_rank)
    observed_rank = int((np.abs(w) > SUPPORT_CUTOFF).sum())
    if observed_rank != 1:
        raise ValueError(
            f"spike support recovery needs a rank-1 input, observed rank {observed_rank}"
        )
    u = v[:, int(np.argmax(np.abs(w)))]
    outer = np.abs(np.outer(u, u))
    rows = np.where((outer >= 1.0 / (2.0 * k)).any(axis=1))[0]
    return {int(i) for i in rows}
