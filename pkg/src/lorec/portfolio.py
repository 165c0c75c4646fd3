"""Minimum-variance portfolio weights and the rolling annual backtest.

Weights follow the classic two-constraint solution: with A1 = 1' inv(S) 1,
A2 = 1' inv(S) mu, A3 = mu' inv(S) mu and required return q,

    w = ((A3 - q A2) inv(S) 1 + (q A1 - A2) inv(S) mu) / (A1 A3 - A2^2)

and the unconstrained global minimum-variance portfolio is
w = inv(S) 1 / (1' inv(S) 1).

The backtest walks calendar years: for each test year it re-tunes estimator
parameters to minimize realized out-of-sample variance over the preceding
construction years (each built from its own trailing window), then estimates
covariance from the trailing window, holds the weights for twelve months,
and records the realized monthly returns.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .estimators import EstimatorSpec, estimate
from .exceptions import SingularMatrixError
from .linalg import invert_spd, sample_covariance
from .tuning import PenaltyGrid, default_grid

__all__ = [
    "ReturnsPanel",
    "PortfolioWeights",
    "BacktestRecord",
    "markowitz_weights",
    "expected_return_vector",
    "rolling_backtest",
    "load_returns_csv",
    "save_returns_csv",
]


@dataclass(frozen=True)
class ReturnsPanel:
    """Dated n x p return observations (annualized monthly returns)."""

    dates: tuple
    tickers: tuple
    returns: np.ndarray

    def __post_init__(self):
        returns = np.asarray(self.returns, dtype=np.float64)
        dates = tuple(str(d) for d in self.dates)
        tickers = tuple(str(t) for t in self.tickers)
        if returns.ndim != 2:
            raise ValueError("returns must be a 2-d array")
        if returns.shape != (len(dates), len(tickers)):
            raise ValueError(
                f"returns shape {returns.shape} does not match "
                f"{len(dates)} dates x {len(tickers)} tickers"
            )
        if np.isnan(returns).any():
            raise ValueError("returns contain missing values")
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise ValueError("dates must be strictly increasing")
        object.__setattr__(self, "returns", returns)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "tickers", tickers)

    @property
    def n_months(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]


@dataclass(frozen=True)
class PortfolioWeights:
    weights: np.ndarray
    target_q: float | None = None


def markowitz_weights(
    sigma: np.ndarray, mu: np.ndarray | None = None, q: float | None = None
) -> PortfolioWeights:
    """Minimum-variance weights under the budget constraint, optionally with
    a required expected return q (which needs mu)."""
    sigma_inv = invert_spd(sigma)
    ones = np.ones(sigma_inv.shape[0])
    s1 = sigma_inv @ ones
    if q is None:
        return PortfolioWeights(weights=s1 / float(ones @ s1), target_q=None)
    if mu is None:
        raise ValueError("a required return q needs an expected-return vector mu")
    mu = np.asarray(mu, dtype=np.float64).ravel()
    if mu.shape[0] != ones.shape[0]:
        raise ValueError(f"mu has length {mu.shape[0]}, expected {ones.shape[0]}")
    smu = sigma_inv @ mu
    a1 = float(ones @ s1)
    a2 = float(ones @ smu)
    a3 = float(mu @ smu)
    denom = a1 * a3 - a2 * a2
    if denom <= 1e-12 * max(abs(a1 * a3), a2 * a2):
        raise ValueError(
            "degenerate return constraint: mu is (numerically) parallel to 1"
        )
    w = ((a3 - q * a2) * s1 + (q * a1 - a2) * smu) / denom
    return PortfolioWeights(weights=w, target_q=float(q))


def expected_return_vector(panel: ReturnsPanel, window: tuple[int, int]) -> np.ndarray:
    """Per-asset mean return over rows [start, stop)."""
    start, stop = window
    if stop <= start:
        raise ValueError(f"empty window [{start}, {stop})")
    return panel.returns[start:stop].mean(axis=0)


@dataclass(frozen=True)
class BacktestRecord:
    estimator_kind: str
    target_q: float | None
    years: tuple
    chosen_params: tuple
    monthly_returns: np.ndarray
    realized_mean: float
    realized_mean_se: float
    realized_variance: float
    realized_variance_se: float

    def per_year(self) -> list[tuple[int, list[float]]]:
        out = []
        for i, year in enumerate(self.years):
            out.append((year, list(self.monthly_returns[12 * i : 12 * (i + 1)])))
        return out

    def to_json_dict(self) -> dict:
        return {
            "estimator_kind": self.estimator_kind,
            "target_q": self.target_q,
            "years": list(self.years),
            "chosen_params": list(self.chosen_params),
            "realized_mean": self.realized_mean,
            "realized_mean_se": self.realized_mean_se,
            "realized_variance": self.realized_variance,
            "realized_variance_se": self.realized_variance_se,
            "monthly_returns": [float(x) for x in self.monthly_returns],
        }


def _january_indices(dates: tuple) -> dict[int, int]:
    """Map each calendar year to the row index of its January, for years
    fully covered by twelve consecutive months."""
    out = {}
    for idx, d in enumerate(dates):
        year, month = d.split("-")
        if month == "01" and idx + 11 < len(dates):
            end = dates[idx + 11]
            if end == f"{year}-12":
                out[int(year)] = idx
    return out


def _candidates_for(spec: EstimatorSpec, panel: ReturnsPanel, window: int,
                    grid: PenaltyGrid | None, grid_size: int) -> list[EstimatorSpec]:
    if spec.kind == "sample":
        return [spec]
    if grid is None:
        sigma0 = sample_covariance(panel.returns[:window])
        grid = default_grid(sigma0, size=grid_size)
    if spec.kind in ("lorec", "lorec_thresholded_input"):
        out = []
        for lam in grid.lambda_values:
            for rho in grid.rho_values:
                params = {"lambda": lam, "rho": rho}
                if spec.kind == "lorec_thresholded_input":
                    params["tau"] = spec.params["tau"]
                out.append(EstimatorSpec(spec.kind, params))
        return out
    if spec.kind == "hard_threshold":
        return [EstimatorSpec(spec.kind, {"tau": v}) for v in grid.rho_values]
    if spec.kind == "shrink_to_identity":
        return [
            EstimatorSpec(spec.kind, {"w": w})
            for w in np.linspace(0.1, 1.0, grid_size)
        ]
    raise ValueError(f"unsupported estimator kind {spec.kind!r}")


def rolling_backtest(
    panel: ReturnsPanel,
    spec,
    q: float | None = None,
    window_months: int = 120,
    tuning_lookback_years: int = 5,
    *,
    grid: PenaltyGrid | None = None,
    grid_size: int = 5,
    penalize_diagonal: bool = True,
) -> BacktestRecord:
    """Run the rolling annual minimum-variance backtest.

    `spec` is an EstimatorSpec, or a callable mapping a window of returns to
    a covariance matrix (used for oracle-covariance experiments). Parameter
    tuning minimizes realized out-of-sample variance over the lookback
    construction years; ties go to the later candidate in ascending
    parameter order.
    """
    required = window_months + 12 * tuning_lookback_years + 12
    if panel.n_months < required:
        raise ValueError(
            f"panel spans {panel.n_months} months; need at least {required} "
            f"(window {window_months} + {12 * tuning_lookback_years} tuning "
            f"+ 12 test)"
        )
    januaries = _january_indices(panel.dates)
    test_years = sorted(
        y for y, j in januaries.items()
        if j >= window_months + 12 * tuning_lookback_years
    )
    if not test_years:
        raise ValueError("no test year has a full tuning history; extend the panel")

    is_callable = callable(spec)

    def fit_sigma_mu(chosen, start: int, stop: int):
        window_data = panel.returns[start:stop]
        if is_callable:
            sigma = spec(window_data)
        else:
            sigma, _ = estimate(chosen, window_data,
                                penalize_diagonal=penalize_diagonal)
        mu = window_data.mean(axis=0) if q is not None else None
        return sigma, mu

    if is_callable:
        candidates = [None]
    else:
        candidates = _candidates_for(spec, panel, window_months, grid, grid_size)

    years: list[int] = []
    chosen_params: list[dict] = []
    monthly: list[float] = []
    for year in test_years:
        j_y = januaries[year]
        best = candidates[0]
        if len(candidates) > 1:
            best_var = math.inf
            any_feasible = False
            for cand in candidates:
                oos: list[float] = []
                try:
                    for back in range(tuning_lookback_years, 0, -1):
                        j_c = j_y - 12 * back
                        sigma, mu = fit_sigma_mu(cand, j_c - window_months, j_c)
                        w = markowitz_weights(sigma, mu, q).weights
                        oos.extend(panel.returns[j_c : j_c + 12] @ w)
                except SingularMatrixError:
                    # Heavy penalties can collapse the estimate to a singular
                    # matrix; such candidates are unusable, not fatal.
                    continue
                var = float(np.var(oos, ddof=1))
                # <= prefers the larger parameters on exact ties.
                if var <= best_var:
                    best_var = var
                    best = cand
                    any_feasible = True
            if not any_feasible:
                raise SingularMatrixError(
                    f"every candidate for test year {year} produced a "
                    f"singular covariance estimate"
                )
        sigma, mu = fit_sigma_mu(best, j_y - window_months, j_y)
        w = markowitz_weights(sigma, mu, q).weights
        years.append(year)
        chosen_params.append({} if best is None else dict(best.params))
        monthly.extend(panel.returns[j_y : j_y + 12] @ w)

    r = np.asarray(monthly)
    m = r.size
    mean = float(r.mean())
    mean_se = float(r.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    var = float(r.var(ddof=1)) if m > 1 else 0.0
    # Large-sample moment-based standard error of the sample variance.
    if m > 1:
        m4 = float(((r - mean) ** 4).mean())
        var_se = math.sqrt(max(m4 - var * var, 0.0) / m)
    else:
        var_se = 0.0
    return BacktestRecord(
        estimator_kind="callable" if is_callable else spec.kind,
        target_q=q,
        years=tuple(years),
        chosen_params=tuple(tuple(sorted(cp.items())) for cp in chosen_params),
        monthly_returns=r,
        realized_mean=mean,
        realized_mean_se=mean_se,
        realized_variance=var,
        realized_variance_se=var_se,
    )


def save_backtest_per_year_csv(path, record: BacktestRecord) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year"] + [f"m{i:02d}" for i in range(1, 13)])
        for year, rets in record.per_year():
            writer.writerow([year] + [repr(float(x)) for x in rets])


def load_returns_csv(path, annualize: bool = False) -> ReturnsPanel:
    """Read a returns CSV with header `date,TICKER1,...` and YYYY-MM dates.

    Assets with any missing cell are dropped; `annualize` multiplies
    returns by 12.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "date":
            raise ValueError(f"{path}: first header column must be 'date'")
        tickers = header[1:]
        if not tickers:
            raise ValueError(f"{path}: no asset columns")
        dates = []
        rows = []
        for record in reader:
            if not record:
                continue
            if len(record) != len(header):
                raise ValueError(f"{path}: ragged row for date {record[0]!r}")
            dates.append(record[0])
            rows.append([_parse_return(cell) for cell in record[1:]])
    values = np.array(rows, dtype=np.float64)
    keep = ~np.isnan(values).any(axis=0)
    if not keep.any():
        raise ValueError(f"{path}: every asset has missing returns")
    values = values[:, keep]
    tickers = [t for t, k in zip(tickers, keep) if k]
    if annualize:
        values = values * 12.0
    return ReturnsPanel(dates=tuple(dates), tickers=tuple(tickers), returns=values)


def _parse_return(cell: str) -> float:
    cell = cell.strip()
    if cell == "" or cell.upper() in ("NA", "NAN"):
        return math.nan
    return float(cell)


def save_returns_csv(path, panel: ReturnsPanel) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + list(panel.tickers))
        for date, row in zip(panel.dates, panel.returns):
            writer.writerow([date] + [repr(float(x)) for x in row])
