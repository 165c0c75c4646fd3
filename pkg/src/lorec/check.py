"""Self-contained verification suites run by the `check` CLI subcommand.

Each suite stresses the solver against an independent route: direct grid
search for the prox operators, first-order optimality for converged solves,
and the accuracy guarantee for the iteration trace.
"""

from __future__ import annotations

import numpy as np

from .linalg import soft_threshold, svd_soft_threshold
from .solver import (
    Decomposition,
    SolverConfig,
    complexity_bound,
    initial_point,
    kkt_check,
    solve,
)

__all__ = ["SUITES", "run_suite", "run_suites"]


def _random_psd(rng: np.random.Generator, p: int) -> np.ndarray:
    x = rng.standard_normal((2 * p, p))
    m = x.T @ x / (2 * p)
    return (m + m.T) / 2.0


def _grid_min_scalar(z: float, tau: float) -> float:
    """Two-stage grid search for argmin 0.5 (x - z)^2 + tau |x|."""
    lo, hi = -abs(z) - tau - 1.0, abs(z) + tau + 1.0
    best = 0.0
    for _ in range(5):
        xs = np.linspace(lo, hi, 401)
        vals = 0.5 * (xs - z) ** 2 + tau * np.abs(xs)
        best = float(xs[int(np.argmin(vals))])
        span = (hi - lo) / 40.0
        lo, hi = best - span, best + span
    return best


def _nuclear_2x2(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    half_gap = np.sqrt(((a - c) / 2.0) ** 2 + b * b)
    mid = (a + c) / 2.0
    return np.abs(mid + half_gap) + np.abs(mid - half_gap)


def _grid_min_svt_2x2(m: np.ndarray, tau: float) -> float:
    """Grid-search minimum of 0.5 |L - M|_F^2 + tau ||L||_* over symmetric
    2x2 L. Returns the best objective value (the argmin location is
    ill-conditioned near rank-deficient minimizers; the value is not)."""
    span = float(np.abs(m).max()) + tau + 1.0
    ca = cb = cc = 0.0
    width = span
    best_val = np.inf
    for _ in range(5):
        ga = np.linspace(ca - width, ca + width, 41)
        gb = np.linspace(cb - width, cb + width, 41)
        gc = np.linspace(cc - width, cc + width, 41)
        a, b, c = np.meshgrid(ga, gb, gc, indexing="ij")
        frob2 = (a - m[0, 0]) ** 2 + 2.0 * (b - m[0, 1]) ** 2 + (c - m[1, 1]) ** 2
        vals = 0.5 * frob2 + tau * _nuclear_2x2(a, b, c)
        i, j, k = np.unravel_index(int(np.argmin(vals)), vals.shape)
        ca, cb, cc = float(ga[i]), float(gb[j]), float(gc[k])
        best_val = float(vals[i, j, k])
        width /= 10.0
    return best_val


def suite_prox(seed: int = 0) -> list[str]:
    """Prox operators vs direct grid minimization."""
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(100):
        z = float(rng.uniform(-3, 3))
        tau = float(rng.uniform(0, 2))
        got = float(soft_threshold(np.array([[z]]), tau)[0, 0])
        want = _grid_min_scalar(z, tau)
        if abs(got - want) > 1e-6:
            failures.append(f"scalar prox {i}: got {got}, grid {want}")
    for i in range(20):
        m = rng.uniform(-2, 2, size=(2, 2))
        m = (m + m.T) / 2.0
        tau = float(rng.uniform(0.05, 1.5))
        got, _ = svd_soft_threshold(m, tau)
        d = got - m
        got_val = 0.5 * float((d * d).sum()) + tau * float(
            _nuclear_2x2(got[0, 0], got[0, 1], got[1, 1])
        )
        grid_val = _grid_min_svt_2x2(m, tau)
        if got_val > grid_val + 1e-4:
            failures.append(
                f"svt prox {i}: objective {got_val:.8f} above grid minimum "
                f"{grid_val:.8f}"
            )
    return failures


def suite_kkt(seed: int = 0, n_instances: int = 20) -> list[str]:
    """Converged solves must satisfy first-order optimality."""
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(n_instances):
        sigma = _random_psd(rng, 10)
        lam = float(rng.uniform(0.05, 0.5) * np.abs(np.linalg.eigvalsh(sigma)).max())
        rho = float(rng.uniform(0.05, 0.5) * np.abs(sigma).max())
        config = SolverConfig(lam=lam, rho=rho, epsilon=1e-8, max_iter=200_000)
        result = solve(sigma, config)
        if not result.converged:
            failures.append(f"kkt {i}: solver did not converge")
            continue
        report = kkt_check(result, sigma, lam, rho, tol=1e-3)
        if not report.passed:
            failures.append(f"kkt {i}: {'; '.join(report.violations)}")
    return failures


def suite_bound(seed: int = 0, n_instances: int = 10) -> list[str]:
    """Objective trace must respect the O(1/t^2) accuracy guarantee."""
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(n_instances):
        p = int(rng.choice([10, 20]))
        sigma = _random_psd(rng, p)
        lam = float(rng.uniform(0.05, 0.5) * np.abs(np.linalg.eigvalsh(sigma)).max())
        rho = float(rng.uniform(0.05, 0.5) * np.abs(sigma).max())
        config = SolverConfig(lam=lam, rho=rho, epsilon=1e-300, max_iter=3000)
        result = solve(sigma, config)
        f_star = float(result.objective_trace[-1])
        init = Decomposition(*initial_point(sigma))
        for t, f_t in enumerate(result.objective_trace, start=1):
            bound = complexity_bound(t, init, result.estimate)
            if f_t - f_star > bound + 1e-10:
                failures.append(
                    f"bound {i}: violated at t={t} "
                    f"(gap {f_t - f_star:.3e} > {bound:.3e})"
                )
                break
    return failures


SUITES = {"prox": suite_prox, "kkt": suite_kkt, "bound": suite_bound}


def run_suite(name: str, seed: int = 0) -> list[str]:
    try:
        fn = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown check suite {name!r}; expected {sorted(SUITES)}") from None
    return fn(seed=seed)


def run_suites(names, seed: int = 0) -> dict[str, list[str]]:
    return {name: run_suite(name, seed=seed) for name in names}
