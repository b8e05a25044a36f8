"""Subspace distances, prediction error and support-recovery scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidData, InvalidModel, RankDeficient
from .linalg import Dataset

QR_TOL = 1e-10


@dataclass(frozen=True)
class SupportMetrics:
    """Entrywise support comparison of ``B_hat`` against ``S_u x S_v``.

    ``empty_prediction`` marks the ``B_hat == 0`` case, where precision is 1
    by convention since no false positives exist.
    """

    precision: float
    recall: float
    f1: float
    exact_subset: bool
    n_predicted: int
    n_true: int
    empty_prediction: bool = False

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "exact_subset": self.exact_subset,
            "n_predicted": self.n_predicted,
            "n_true": self.n_true,
            "empty_prediction": self.empty_prediction,
        }


def _orthonormal(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    q, r = np.linalg.qr(a)
    diag = np.abs(np.diag(r))
    scale = max(np.linalg.norm(a), np.finfo(float).tiny)
    if diag.size == 0 or diag.min() <= QR_TOL * scale:
        raise RankDeficient(f"{name} does not have full column rank")
    return q


def principal_cosines(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    qa, qb = _orthonormal(a, "a"), _orthonormal(b, "b")
    return np.clip(np.linalg.svd(qa.T @ qb, compute_uv=False), 0.0, 1.0)


def sin_theta_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``||sin Theta||_F`` between the column spans of ``a`` and ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidData(f"shape mismatch {a.shape} vs {b.shape}")
    qa, qb = _orthonormal(a, "a"), _orthonormal(b, "b")
    # Equal to sqrt(sum(1 - cos^2)) but without cancellation for tiny angles.
    return float(np.linalg.norm(qa - qb @ (qb.T @ qa)))


def stacked_distance(u_hat, v_hat, u_star, v_star) -> float:
    """sin-Theta distance between ``[U_hat; V_hat]`` and ``[U*; V*]``."""
    return sin_theta_distance(np.vstack([u_hat, v_hat]), np.vstack([u_star, v_star]))


def procrustes_distance(a_hat: np.ndarray, a: np.ndarray) -> float:
    """``min_O ||a_hat - a O||_F`` over orthogonal ``O``."""
    a_hat = np.asarray(a_hat, dtype=float)
    a = np.asarray(a, dtype=float)
    if a_hat.shape != a.shape:
        raise InvalidData(f"shape mismatch {a_hat.shape} vs {a.shape}")
    p, _, wt = np.linalg.svd(a.T @ a_hat)
    return float(np.linalg.norm(a_hat - a @ (p @ wt)))


def prediction_mse(u: np.ndarray, v: np.ndarray, data: Dataset) -> float:
    """``||X u - Y v||_F^2 / (n r)``; ``inf`` when both ``u`` and ``v`` vanish.

    The infinite sentinel keeps model selection from picking an empty model,
    which would otherwise score a perfect zero.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float).T).T
    v = np.atleast_2d(np.asarray(v, dtype=float).T).T
    r = u.shape[1]
    if r == 0 or v.shape[1] != r:
        raise InvalidModel(f"direction matrices must share a positive rank, got {u.shape}, {v.shape}")
    if u.shape[0] != data.p or v.shape[0] != data.q:
        raise InvalidData("direction matrices do not match data dimensions")
    if not np.any(u) and not np.any(v):
        return float("inf")
    resid = data.x @ u - data.y @ v
    return float(np.sum(resid ** 2) / (data.n * r))


def variate_correlation(u: np.ndarray, v: np.ndarray, data: Dataset,
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Pearson correlation of each pair ``(X u_j, Y v_j)``.

    Returns the correlations and a boolean mask flagging pairs where one
    variate has zero variance (reported as correlation 0).
    """
    xu = data.x @ np.asarray(u, dtype=float).reshape(data.p, -1)
    yv = data.y @ np.asarray(v, dtype=float).reshape(data.q, -1)
    xu = xu - xu.mean(axis=0)
    yv = yv - yv.mean(axis=0)
    sx = np.sqrt(np.sum(xu ** 2, axis=0))
    sy = np.sqrt(np.sum(yv ** 2, axis=0))
    degenerate = (sx <= 1e-300) | (sy <= 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.sum(xu * yv, axis=0) / (sx * sy)
    corr = np.where(degenerate, 0.0, np.clip(corr, -1.0, 1.0))
    return corr, degenerate


def support_metrics(b_hat, truth) -> SupportMetrics:
    """Compare the nonzero pattern of ``b_hat`` with the truth's ``S_u x S_v``.

    ``b_hat`` may be a :class:`CoefficientEstimate` or a plain array; entries
    count as selected iff they are exactly nonzero.
    """
    return support_scores(b_hat, truth.support_u, truth.support_v)


def support_scores(b_hat, support_u, support_v) -> SupportMetrics:
    b_hat = np.asarray(getattr(b_hat, "b_hat", b_hat), dtype=float)
    truth = np.zeros(b_hat.shape, dtype=bool)
    truth[np.ix_(np.asarray(support_u, dtype=int), np.asarray(support_v, dtype=int))] = True
    pred = b_hat != 0
    tp = int(np.sum(pred & truth))
    n_pred, n_true = int(pred.sum()), int(truth.sum())
    empty = n_pred == 0
    precision = 1.0 if empty else tp / n_pred
    recall = tp / n_true if n_true else 1.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return SupportMetrics(precision, recall, f1, tp == n_pred, n_pred, n_true, empty)
