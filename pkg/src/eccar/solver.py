"""Penalized reduced-rank regression solved by ADMM in covariance space.

The smooth part of the loss is

    L(B) = 1/2 tr(B' Sx B Sy) - <B, Sxy> + n/2,

which equals ``1/2 ||X B Y'/n - I_n||_F^2`` for sample covariances, so no
``n x n`` matrix is ever formed. The nonsmooth part is either the entrywise
l1 norm or the weighted group norm ``sum_g sqrt(T_g) ||B_g||_F``; the former
is just the group norm over singleton groups.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidConfig, InvalidDimensions, InvalidPartition, NumericalFailure
from .groups import GroupPartition, elementwise_partition, validate_partition
from .linalg import CovarianceModel, group_threshold

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty weight and the grouping it acts on.

    ``partition=None`` means the elementwise (l1) penalty; it is resolved
    lazily against the problem dimensions by :func:`resolve_partition`.
    """

    weight: float
    partition: GroupPartition | None = None

    def __post_init__(self):
        if not (self.weight >= 0 and math.isfinite(self.weight)):
            raise InvalidConfig(f"penalty weight must be finite and >= 0, got {self.weight}")
        if self.partition is not None and not validate_partition(self.partition):
            raise InvalidPartition("penalty partition is not a disjoint cover")

    def with_weight(self, weight: float) -> "PenaltySpec":
        return PenaltySpec(float(weight), self.partition)


@dataclass(frozen=True)
class AdmmConfig:
    step: float = 1.0
    max_iter: int = 2000
    eps_abs: float = 1e-6
    eps_rel: float = 1e-5

    def __post_init__(self):
        if not self.step > 0:
            raise InvalidConfig(f"ADMM step must be > 0, got {self.step}")
        if self.max_iter < 1:
            raise InvalidConfig(f"max_iter must be >= 1, got {self.max_iter}")
        if not (self.eps_abs > 0 and self.eps_rel > 0):
            raise InvalidConfig("eps_abs and eps_rel must be > 0")


@dataclass(frozen=True)
class FitReport:
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    objective: float
    kkt_violation: float

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "converged": self.converged,
            "objective": self.objective,
            "kkt_violation": self.kkt_violation,
        }


@dataclass(frozen=True)
class CoefficientEstimate:
    """Sparse coefficient matrix returned by the solver.

    ``dual`` is the scaled dual variable at termination; it is only kept so
    that a neighbouring fit can be warm-started.
    """

    b_hat: np.ndarray
    numeric_zero_tol: float = 0.0
    dual: np.ndarray | None = None

    @property
    def support(self) -> np.ndarray:
        return np.abs(self.b_hat) > self.numeric_zero_tol


def theoretical_penalty(n: int, p: int, q: int, a: float = 1.0) -> float:
    """``a * sqrt(ln(p + q) / n)``, the rate at which the penalty should scale."""
    if p + q < 2:
        raise InvalidDimensions(f"need p + q >= 2, got {p + q}")
    if n < 1:
        raise InvalidDimensions(f"need n >= 1, got {n}")
    if a < 0:
        raise InvalidConfig(f"scale a must be >= 0, got {a}")
    return a * math.sqrt(math.log(p + q) / n)


def resolve_partition(penalty: PenaltySpec, p: int, q: int) -> GroupPartition:
    part = penalty.partition if penalty.partition is not None else elementwise_partition(p, q)
    if (part.p, part.q) != (p, q):
        raise InvalidPartition(f"partition is {part.p}x{part.q} but B is {p}x{q}")
    return part


class _SylvesterSolver:
    """Solves ``Sx B Sy + step B = R`` from cached spectral factors.

    With ``Sx = Ux diag(l1) Ux'`` (and likewise for y) the system is diagonal
    in the eigenbasis. When a basis is incomplete its orthogonal complement
    has eigenvalue zero, so that component of ``R`` is simply divided by
    ``step``.
    """

    def __init__(self, cov: CovarianceModel, step: float):
        if not step > 0:
            raise InvalidConfig(f"ADMM step must be > 0, got {step}")
        self.ux = cov.eig_x.basis
        self.uy = cov.eig_y.basis
        self.step = float(step)
        self.inv = 1.0 / (np.outer(cov.eig_x.eigenvalues, cov.eig_y.eigenvalues) + step)
        self.complete = cov.eig_x.is_complete and cov.eig_y.is_complete
        if not self.complete:
            self.inv = self.inv - 1.0 / step

    def __call__(self, rhs: np.ndarray) -> np.ndarray:
        core = (self.ux.T @ rhs @ self.uy) * self.inv
        out = self.ux @ core @ self.uy.T
        if not self.complete:
            out += rhs / self.step
        return out


def b_update(cov: CovarianceModel, z: np.ndarray, h: np.ndarray, step: float) -> np.ndarray:
    """Exact minimizer of the augmented Lagrangian in ``B``.

    Solves ``Sx B Sy + step B = Sxy + step (Z - H)``.
    """
    return _SylvesterSolver(cov, step)(cov.sigma_xy + step * (z - h))


def _quadratic(b: np.ndarray, cov: CovarianceModel) -> float:
    m = cov.eig_x.basis.T @ b @ cov.eig_y.basis
    return float(np.sum(np.outer(cov.eig_x.eigenvalues, cov.eig_y.eigenvalues) * m * m))


def penalty_value(b: np.ndarray, penalty: PenaltySpec) -> float:
    if penalty.weight == 0:
        return 0.0
    part = resolve_partition(penalty, *b.shape)
    if part.is_elementwise:
        return penalty.weight * float(np.abs(b).sum())
    return penalty.weight * float(np.sqrt(part.sizes) @ part.group_norms(b))


def objective(b: np.ndarray, cov: CovarianceModel, penalty: PenaltySpec) -> float:
    """Penalized loss in covariance space, the ``n/2`` constant included."""
    b = np.asarray(b, dtype=float)
    smooth = 0.5 * _quadratic(b, cov) - float(np.sum(b * cov.sigma_xy)) + cov.n_samples / 2.0
    return smooth + penalty_value(b, penalty)


def loss_gradient(b: np.ndarray, cov: CovarianceModel) -> np.ndarray:
    """``Sx B Sy - Sxy``."""
    ux, uy = cov.eig_x.basis, cov.eig_y.basis
    core = np.outer(cov.eig_x.eigenvalues, cov.eig_y.eigenvalues) * (ux.T @ b @ uy)
    return ux @ core @ uy.T - cov.sigma_xy


def kkt_violation(b: CoefficientEstimate | np.ndarray, cov: CovarianceModel,
                  penalty: PenaltySpec) -> float:
    """Largest violation of the subgradient optimality conditions.

    For a zero group the gradient block must lie in the dual ball of radius
    ``weight * sqrt(T_g)``; for an active group it must equal
    ``-weight * sqrt(T_g) * B_g / ||B_g||_F``.
    """
    b_hat = b.b_hat if isinstance(b, CoefficientEstimate) else np.asarray(b, dtype=float)
    grad = loss_gradient(b_hat, cov)
    w = penalty.weight
    part = resolve_partition(penalty, *b_hat.shape)
    if part.is_elementwise:
        nz = b_hat != 0
        active = np.abs(grad + w * np.sign(b_hat))
        inactive = np.maximum(np.abs(grad) - w, 0.0)
        return float(np.max(np.where(nz, active, inactive), initial=0.0))
    labels = part.labels
    radius = w * np.sqrt(part.sizes)
    b_norms = part.group_norms(b_hat)
    with np.errstate(divide="ignore", invalid="ignore"):
        direction = np.where(b_norms > 0, radius / b_norms, 0.0)
    residual = grad + direction[labels] * b_hat
    res_norms = part.group_norms(residual)
    grad_norms = part.group_norms(grad)
    viol = np.where(b_norms > 0, res_norms, np.maximum(grad_norms - radius, 0.0))
    return float(np.max(viol, initial=0.0))


def admm_fit(cov: CovarianceModel, penalty: PenaltySpec, config: AdmmConfig = AdmmConfig(),
             warm_start: tuple[np.ndarray, np.ndarray] | None = None,
             ) -> tuple[CoefficientEstimate, FitReport]:
    """Minimize the penalized loss with scaled-dual ADMM.

    Parameters
    ----------
    cov : CovarianceModel
        Covariance blocks with cached spectral factors.
    penalty : PenaltySpec
        Weight and grouping of the sparsity penalty.
    config : AdmmConfig
        Step size and stopping tolerances.
    warm_start : (Z, H), optional
        Initial split variable and scaled dual; zeros otherwise.

    Returns
    -------
    estimate : CoefficientEstimate
        ``b_hat`` is the thresholded iterate ``Z``, hence exactly sparse.
    report : FitReport
        Residuals, convergence flag, objective and KKT violation at ``b_hat``.
    """
    p, q = cov.p, cov.q
    part = resolve_partition(penalty, p, q)
    solve = _SylvesterSolver(cov, config.step)
    rho = config.step
    kappa = penalty.weight / rho
    if warm_start is None:
        z = np.zeros((p, q))
        h = np.zeros((p, q))
    else:
        z, h = (np.array(a, dtype=float) for a in warm_start)
    scale = math.sqrt(p * q)
    r_norm = s_norm = math.inf
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        b = solve(cov.sigma_xy + rho * (z - h))
        z_old = z
        z = group_threshold(b + h, kappa, part)
        h = h + (b - z)
        r_norm = float(np.linalg.norm(b - z))
        s_norm = rho * float(np.linalg.norm(z - z_old))
        if not (math.isfinite(r_norm) and math.isfinite(s_norm)):
            raise NumericalFailure(f"non-finite iterate at ADMM iteration {it}")
        eps_pri = config.eps_abs * scale + config.eps_rel * max(
            float(np.linalg.norm(b)), float(np.linalg.norm(z)))
        eps_dual = config.eps_abs * scale + config.eps_rel * rho * float(np.linalg.norm(h))
        if r_norm <= eps_pri and s_norm <= eps_dual:
            converged = True
            break
    if not converged:
        logger.warning("ADMM stopped at max_iter=%d (primal %.2e, dual %.2e)",
                       config.max_iter, r_norm, s_norm)
    est = CoefficientEstimate(z, 0.0, h)
    report = FitReport(
        iterations=it,
        primal_residual=r_norm,
        dual_residual=s_norm,
        converged=converged,
        objective=objective(z, cov, penalty),
        kkt_violation=kkt_violation(est, cov, penalty),
    )
    return est, report
