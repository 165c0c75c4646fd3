"""Loss and structure-recovery scoring for covariance estimates, plus the
mean / standard-error aggregation used by the Monte-Carlo tables.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields

import numpy as np

from .exceptions import SingularMatrixError
from .linalg import invert_spd
from .models import GroundTruthModel
from .solver import SUPPORT_CUTOFF, Decomposition

__all__ = [
    "RecoveryReport",
    "FieldStat",
    "score",
    "joint_frobenius",
    "loading_angle",
    "aggregate",
    "save_reports_csv",
]


@dataclass(frozen=True)
class RecoveryReport:
    """Per-replication scores of one estimate against the ground truth.

    Rank and support fields are None for estimators that do not produce a
    decomposition; inverse losses are None when either matrix is singular.
    """

    spectral_loss: float
    frobenius_loss: float
    max_loss: float
    eigen_distance: float
    rank_estimated: int | None
    rank_correct: bool | None
    pct_true_positive: float | None
    pct_true_negative: float | None
    inverse_spectral_loss: float | None
    inverse_frobenius_loss: float | None


def _spectral_norm(m: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvalsh((m + m.T) / 2.0)).max())


def score(
    estimate: np.ndarray,
    decomposition: Decomposition | None,
    truth: GroundTruthModel,
) -> RecoveryReport:
    """Score a covariance estimate (and optional decomposition) against truth.

    Support percentages use the SUPPORT_CUTOFF magnitude convention: an entry
    of the fitted sparse part counts as detected when it exceeds the cutoff.
    """
    estimate = np.asarray(estimate, dtype=np.float64)
    if estimate.shape != truth.sigma.shape:
        raise ValueError(
            f"dimension mismatch: estimate {estimate.shape} vs truth {truth.sigma.shape}"
        )
    diff = estimate - truth.sigma
    spectral = _spectral_norm(diff)
    frob = float(np.sqrt((diff * diff).sum()))
    max_loss = float(np.abs(diff).max())
    ev_est = np.sort(np.linalg.eigvalsh((estimate + estimate.T) / 2.0))
    ev_true = np.sort(np.linalg.eigvalsh(truth.sigma))
    eigen_distance = float(np.abs(ev_est - ev_true).max())

    rank_estimated = rank_correct = pct_tp = pct_tn = None
    if decomposition is not None:
        rank_estimated = decomposition.rank
        rank_correct = rank_estimated == truth.true_rank
        detected = np.abs(decomposition.sparse) > SUPPORT_CUTOFF
        true_nz = truth.sparse != 0.0
        n_nz = int(true_nz.sum())
        n_zero = true_nz.size - n_nz
        pct_tp = 100.0 * float(detected[true_nz].sum()) / n_nz if n_nz else 100.0
        pct_tn = 100.0 * float((~detected[~true_nz]).sum()) / n_zero if n_zero else 100.0

    inv_spec = inv_frob = None
    try:
        inv_est = invert_spd((estimate + estimate.T) / 2.0)
        inv_true = invert_spd(truth.sigma)
    except SingularMatrixError:
        pass
    else:
        inv_diff = inv_est - inv_true
        inv_spec = _spectral_norm(inv_diff)
        inv_frob = float(np.sqrt((inv_diff * inv_diff).sum()))

    return RecoveryReport(
        spectral_loss=spectral,
        frobenius_loss=frob,
        max_loss=max_loss,
        eigen_distance=eigen_distance,
        rank_estimated=rank_estimated,
        rank_correct=rank_correct,
        pct_true_positive=pct_tp,
        pct_true_negative=pct_tn,
        inverse_spectral_loss=inv_spec,
        inverse_frobenius_loss=inv_frob,
    )


def joint_frobenius(decomposition: Decomposition, truth: GroundTruthModel) -> float:
    """Squared Frobenius error summed over both components."""
    if decomposition.low_rank.shape != truth.sigma.shape:
        raise ValueError(
            f"dimension mismatch: {decomposition.low_rank.shape} vs {truth.sigma.shape}"
        )
    dl = decomposition.low_rank - truth.low_rank
    ds = decomposition.sparse - truth.sparse
    return float((dl * dl).sum() + (ds * ds).sum())


def loading_angle(u1: np.ndarray, u2: np.ndarray) -> tuple[float, float]:
    """Sign-invariant angle between two loading vectors.

    Returns (|cos|, degrees in [0, 90]); loadings are identified only up to
    sign so the absolute inner product is used.
    """
    u1 = np.asarray(u1, dtype=np.float64).ravel()
    u2 = np.asarray(u2, dtype=np.float64).ravel()
    n1 = float(np.linalg.norm(u1))
    n2 = float(np.linalg.norm(u2))
    if n1 == 0.0 or n2 == 0.0:
        raise ValueError("loading vectors must be nonzero")
    cosine = min(abs(float(u1 @ u2)) / (n1 * n2), 1.0)
    return cosine, math.degrees(math.acos(cosine))


@dataclass(frozen=True)
class FieldStat:
    mean: float
    se: float
    count: int


def _mean_se(values: list[float]) -> FieldStat:
    m = len(values)
    mean = math.fsum(values) / m
    if m == 1:
        return FieldStat(mean=mean, se=0.0, count=1)
    var = math.fsum((v - mean) ** 2 for v in values) / (m - 1)
    return FieldStat(mean=mean, se=math.sqrt(var / m), count=m)


def aggregate(reports: list[RecoveryReport]) -> dict:
    """Mean and standard error (sd / sqrt(m)) per field, skipping missing
    values, plus the frequency of exact rank recovery."""
    if not reports:
        raise ValueError("cannot aggregate an empty report list")
    summary: dict = {}
    for f in fields(RecoveryReport):
        if f.name == "rank_correct":
            continue
        values = [getattr(r, f.name) for r in reports]
        values = [float(v) for v in values if v is not None]
        if values:
            summary[f.name] = _mean_se(values)
    flags = [r.rank_correct for r in reports if r.rank_correct is not None]
    if flags:
        summary["rank_correct_pct"] = FieldStat(
            mean=100.0 * sum(flags) / len(flags), se=0.0, count=len(flags)
        )
    return summary


def save_reports_csv(path, reports: list[RecoveryReport], extra: list[dict] | None = None) -> None:
    """One row per replication; `extra` supplies leading per-row columns
    (replication index, chosen penalties, ...)."""
    if not reports:
        raise ValueError("no reports to write")
    extra = extra or [{} for _ in reports]
    lead_cols = sorted({k for row in extra for k in row})
    stat_cols = [f.name for f in fields(RecoveryReport)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(lead_cols + stat_cols)
        for row, rep in zip(extra, reports):
            record = [_cell(row.get(c)) for c in lead_cols]
            record += [_cell(getattr(rep, c)) for c in stat_cols]
            writer.writerow(record)


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float):
        return repr(value)
    return value
