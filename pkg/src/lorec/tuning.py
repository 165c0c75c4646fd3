"""Penalty selection: k-fold cross-validation under Frobenius loss, and the
closed-form penalty rates with their unspecified constants exposed as
caller-supplied scale factors.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .estimators import EstimatorSpec, estimate
from .linalg import sample_covariance

__all__ = [
    "PenaltyGrid",
    "CoherenceParams",
    "default_grid",
    "kfold_cv",
    "theoretical_penalty",
    "spike_theoretical_penalty",
    "spike_coherence",
    "save_loss_table_csv",
    "save_selected_json",
]


@dataclass(frozen=True)
class PenaltyGrid:
    """Candidate nuclear-norm and l1 penalty values, each sorted ascending."""

    lambda_values: tuple
    rho_values: tuple

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambda_values)
        rho = tuple(float(x) for x in self.rho_values)
        for name, vals in (("lambda_values", lam), ("rho_values", rho)):
            if not vals:
                raise ValueError(f"{name} must be nonempty")
            if any(not v > 0 for v in vals):
                raise ValueError(f"{name} must be strictly positive")
            if any(b < a for a, b in zip(vals, vals[1:])):
                raise ValueError(f"{name} must be sorted ascending")
        object.__setattr__(self, "lambda_values", lam)
        object.__setattr__(self, "rho_values", rho)


def default_grid(sigma_n: np.ndarray, size: int = 10) -> PenaltyGrid:
    """Log-spaced grid bracketing the active penalty region.

    Lambda spans [0.01, 1] times the operator norm of the input and rho
    spans [0.01, 1] times its max norm; anything above the top of either
    range is zeroed outright by the prox steps.
    """
    sigma_n = np.asarray(sigma_n, dtype=np.float64)
    op = float(np.abs(np.linalg.eigvalsh(sigma_n)).max())
    mx = float(np.abs(sigma_n).max())
    lam = np.geomspace(0.01 * op, op, size)
    rho = np.geomspace(0.01 * mx, mx, size)
    return PenaltyGrid(lambda_values=tuple(lam), rho_values=tuple(rho))


def _fold_assignments(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Shuffle row indices, then split into `folds` contiguous groups."""
    order = np.random.default_rng(np.random.SeedSequence((int(seed), 2))).permutation(n)
    return [np.sort(part) for part in np.array_split(order, folds)]


def _candidate_specs(
    estimator_kind: str, grid: PenaltyGrid, tau: float | None
) -> list[EstimatorSpec]:
    if estimator_kind == "lorec":
        return [
            EstimatorSpec("lorec", {"lambda": lam, "rho": rho})
            for lam in grid.lambda_values
            for rho in grid.rho_values
        ]
    if estimator_kind == "lorec_thresholded_input":
        if tau is None:
            raise ValueError("lorec_thresholded_input needs an input threshold tau")
        return [
            EstimatorSpec(
                "lorec_thresholded_input",
                {"tau": float(tau), "lambda": lam, "rho": rho},
            )
            for lam in grid.lambda_values
            for rho in grid.rho_values
        ]
    if estimator_kind == "hard_threshold":
        return [EstimatorSpec("hard_threshold", {"tau": v}) for v in grid.rho_values]
    if estimator_kind == "shrink_to_identity":
        return [
            EstimatorSpec("shrink_to_identity", {"w": min(v, 1.0)})
            for v in sorted({min(v, 1.0) for v in grid.rho_values})
        ]
    if estimator_kind == "sample":
        return [EstimatorSpec("sample")]
    raise ValueError(f"unknown estimator kind {estimator_kind!r}")


def _sort_key(spec: EstimatorSpec):
    return tuple(spec.params[k] for k in sorted(spec.params))


def kfold_cv(
    data: np.ndarray,
    grid: PenaltyGrid,
    folds: int = 5,
    estimator_kind: str = "lorec",
    seed: int = 0,
    *,
    tau: float | None = None,
    candidates: list[EstimatorSpec] | None = None,
    epsilon: float = 1e-4,
    max_iter: int = 5000,
    penalize_diagonal: bool = True,
) -> tuple[dict, list[dict]]:
    """Pick penalties by k-fold cross-validation under Frobenius loss.

    Each grid point is fit on the training folds' sample covariance and
    scored by the squared Frobenius distance to the held-out fold's sample
    covariance. Returns the parameters with the smallest mean loss (ties go
    to the larger penalties) and the full loss table, one record per
    (candidate, fold).
    """
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[0]
    if folds < 2:
        raise ValueError(f"need at least 2 folds, got {folds}")
    if n < folds:
        raise ValueError(f"need at least one row per fold: n={n}, folds={folds}")
    assignments = _fold_assignments(n, folds, seed)
    sizes = [len(a) for a in assignments]
    if min(sizes) < 2:
        raise ValueError(
            f"every fold needs >= 2 rows for a holdout covariance; "
            f"smallest fold has {min(sizes)} (n={n}, folds={folds})"
        )

    if candidates is None:
        candidates = _candidate_specs(estimator_kind, grid, tau)
    candidates = sorted(candidates, key=_sort_key)

    all_rows = np.arange(n)
    table: list[dict] = []
    best_spec = None
    best_loss = math.inf
    for spec in candidates:
        losses = []
        for fold_id, holdout in enumerate(assignments):
            train = np.setdiff1d(all_rows, holdout, assume_unique=True)
            fitted, _ = estimate(
                spec, data[train], epsilon=epsilon, max_iter=max_iter,
                penalize_diagonal=penalize_diagonal,
            )
            target = sample_covariance(data[holdout])
            diff = fitted - target
            loss = float((diff * diff).sum())
            losses.append(loss)
            table.append({**spec.params, "fold": fold_id, "loss": loss})
        mean_loss = math.fsum(losses) / folds
        # <= prefers the later (larger-penalty) candidate on exact ties.
        if mean_loss <= best_loss:
            best_loss = mean_loss
            best_spec = spec
    return dict(best_spec.params), table


def theoretical_penalty(
    coherence: "CoherenceParams", n: int, p: int, scale_c1: float = 1.0
) -> tuple[float, float]:
    """Closed-form penalty rates for the n >= p regime.

    lambda = scale_c1 * max((1/xi) sqrt(log p / n), sqrt(p / n)) and
    rho = gamma * lambda.
    """
    if n < p:
        raise ValueError(
            f"rate formula needs n >= p (got n={n}, p={p}); "
            "for the sparse-spike regime use spike_theoretical_penalty"
        )
    lam = scale_c1 * max(
        math.sqrt(math.log(p) / n) / coherence.xi, math.sqrt(p / n)
    )
    return lam, coherence.gamma * lam


def spike_theoretical_penalty(
    k: int, s: int, n: int, p: int, scale_c2: float = 1.0, scale_c3: float = 1.0
) -> tuple[float, float, float]:
    """Penalty and input-threshold rates for the sparse-spike regime.

    lambda = scale_c2 * (k + s) * sqrt(log p / n),
    rho = scale_c3 * (sqrt(k) + sqrt(s / k)) * sqrt(log p / n), and the
    input hard-threshold tau = sqrt(log p / n).
    """
    if k < 1 or s < 1:
        raise ValueError(f"need k >= 1 and s >= 1, got k={k}, s={s}")
    if n < 2 or p < 2:
        raise ValueError(f"need n >= 2 and p >= 2, got n={n}, p={p}")
    rate = math.sqrt(math.log(p) / n)
    lam = scale_c2 * (k + s) * rate
    rho = scale_c3 * (math.sqrt(k) + math.sqrt(s / k)) * rate
    return lam, rho, rate


def spike_coherence(k: int, s: int) -> tuple[float, float]:
    """Closed-form coherence values for the single-spike model:
    xi bound 2 / sqrt(k) and mu = s."""
    if k < 1 or s < 1:
        raise ValueError(f"need k >= 1 and s >= 1, got k={k}, s={s}")
    return 2.0 / math.sqrt(k), float(s)


@dataclass(frozen=True)
class CoherenceParams:
    """Identifiability constants: xi for the low-rank tangent space, mu for
    the sparsity pattern space, and the penalty ratio gamma.

    When the interval [9 xi, 1 / (6 mu)] is nonempty, gamma must lie in it.
    """

    xi: float
    mu: float
    gamma: float

    def __post_init__(self):
        for name in ("xi", "mu", "gamma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        lo, hi = 9.0 * self.xi, 1.0 / (6.0 * self.mu)
        if lo <= hi and not lo <= self.gamma <= hi:
            raise ValueError(
                f"gamma must lie in [{lo:.6g}, {hi:.6g}], got {self.gamma}"
            )


def save_loss_table_csv(path, table: list[dict]) -> None:
    """Write the CV loss table; columns are the parameter names plus
    fold and loss (lambda, rho, fold, loss for the decomposition kinds)."""
    if not table:
        raise ValueError("empty loss table")
    params = [k for k in table[0] if k not in ("fold", "loss")]
    columns = sorted(params) + ["fold", "loss"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in table:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns])


def save_selected_json(path, params: dict) -> None:
    with open(path, "w") as fh:
        json.dump(params, fh, indent=2, sort_keys=True)
        fh.write("\n")
