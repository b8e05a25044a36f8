"""K-fold cross-validation over a penalty grid, and the rate-based default grid."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cca import CcaModel, directions_from_estimate, fit
from .exceptions import DegenerateSolution, InvalidConfig, NoViableModel, NumericalFailure
from .groups import GroupPartition
from .linalg import Dataset, empirical_covariances
from .metrics import prediction_mse
from .solver import AdmmConfig, PenaltySpec, admm_fit, theoretical_penalty


def worker_count(n_jobs: int | None = None) -> int:
    """Thread count: explicit ``n_jobs``, else ``ECCAR_THREADS``, else 1."""
    if n_jobs is None:
        env = os.environ.get("ECCAR_THREADS", "").strip()
        n_jobs = int(env) if env else 1
    return max(1, int(n_jobs))


@dataclass(frozen=True)
class CvConfig:
    grid: tuple[float, ...]
    k: int = 5
    r: int = 2
    seed: int = 0
    admm: AdmmConfig = field(default_factory=AdmmConfig)
    warm_start: bool = False
    center: bool = True

    def __post_init__(self):
        grid = tuple(float(w) for w in self.grid)
        object.__setattr__(self, "grid", grid)
        if not grid:
            raise InvalidConfig("penalty grid is empty")
        if any(w < 0 or not math.isfinite(w) for w in grid):
            raise InvalidConfig("penalty weights must be finite and >= 0")
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise InvalidConfig("penalty grid must be sorted ascending")
        if self.k < 2:
            raise InvalidConfig(f"need at least 2 folds, got {self.k}")


@dataclass(frozen=True)
class CvResult:
    grid: np.ndarray
    mean_val_mse: np.ndarray
    se_val_mse: np.ndarray
    per_fold: np.ndarray
    chosen_index: int
    chosen_weight: float
    chosen_model: CcaModel


def kfold_split(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Shuffled folds of near-equal size (sizes differ by at most one)."""
    if k < 2 or k > n:
        raise InvalidConfig(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def penalty_grid(n: int, p: int, q: int, length: int = 10, span: float = 10.0) -> np.ndarray:
    """Geometric grid from ``rate / span`` to ``rate * span`` around ``sqrt(ln(p+q)/n)``."""
    if length < 1:
        raise InvalidConfig(f"grid length must be >= 1, got {length}")
    if not span > 1:
        raise InvalidConfig(f"span must exceed 1, got {span}")
    rate = theoretical_penalty(n, p, q, 1.0)
    if length == 1:
        return np.array([rate])
    return np.geomspace(rate / span, rate * span, length)


def _fold_scores(data: Dataset, val_rows: np.ndarray, cfg: CvConfig,
                 partition: GroupPartition | None) -> np.ndarray:
    train_mask = np.ones(data.n, dtype=bool)
    train_mask[val_rows] = False
    cov = empirical_covariances(data.take(train_mask), center=cfg.center)
    val = Dataset(data.x[val_rows] - cov.x_mean, data.y[val_rows] - cov.y_mean)
    scores = np.full(len(cfg.grid), np.inf)
    state = None
    for j, w in enumerate(cfg.grid):
        penalty = PenaltySpec(w, partition)
        try:
            coef, report = admm_fit(cov, penalty, cfg.admm,
                                    warm_start=state if cfg.warm_start else None)
        except NumericalFailure:
            state = None
            continue
        state = (coef.b_hat, coef.dual)
        try:
            model = directions_from_estimate(cov, coef, report, cfg.r, penalty)
        except DegenerateSolution:
            continue
        scores[j] = prediction_mse(model.u, model.v, val)
    return scores


def cross_validate(data: Dataset, cfg: CvConfig, partition: GroupPartition | None = None,
                   n_jobs: int | None = None) -> CvResult:
    """Pick the penalty minimizing mean validation ``||X u - Y v||^2 / (n r)``.

    Covariances and centering statistics come from training rows only.
    Degenerate fits score ``inf``. Among tied minima the largest weight wins.
    Folds are evaluated in parallel threads but reduced in fold order, so the
    result does not depend on ``n_jobs``.
    """
    folds = kfold_split(data.n, cfg.k, cfg.seed)
    workers = worker_count(n_jobs)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda f: _fold_scores(data, f, cfg, partition), folds))
    else:
        rows = [_fold_scores(data, f, cfg, partition) for f in folds]
    per_fold = np.vstack(rows)
    with np.errstate(invalid="ignore"):
        mean = per_fold.mean(axis=0)
        se = per_fold.std(axis=0, ddof=1) / math.sqrt(cfg.k)
    se = np.where(np.isfinite(mean), se, np.inf)
    finite = np.isfinite(mean)
    if not finite.any():
        raise NoViableModel("every penalty in the grid gave a degenerate fit on some fold")
    best = mean[finite].min()
    chosen = int(np.flatnonzero(finite & (mean == best))[-1])
    weight = cfg.grid[chosen]
    model = fit(data, cfg.r, PenaltySpec(weight, partition), cfg.admm, center=cfg.center)
    return CvResult(np.asarray(cfg.grid), mean, se, per_fold, chosen, weight, model)
