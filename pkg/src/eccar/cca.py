"""Canonical directions from the penalized regression estimate.

``fit`` runs the sparse pipeline: solve for ``B_hat``, take the rank-``r`` SVD
of ``Sx^{1/2} B_hat Sy^{1/2}`` and map the singular vectors back through
``B_hat`` so that the directions inherit its sparsity. ``fit_low_dim`` is the
unpenalized closed form for ``n`` well above ``p`` and ``q``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateSolution, InvalidData, RankTooLarge, SingularCovariance
from .linalg import (CovarianceModel, Dataset, empirical_covariances, psd_sqrt_apply,
                     truncated_svd)
from .solver import (AdmmConfig, CoefficientEstimate, FitReport, PenaltySpec, admm_fit,
                     kkt_violation, objective)

RANK_TOL = 1e-8
ABS_FLOOR = 1e-12
EIG_FLOOR = 1e-10


@dataclass(frozen=True)
class CcaModel:
    """Estimated canonical directions.

    ``lambdas`` are the singular values of ``Sx^{1/2} B_hat Sy^{1/2}``. Without
    a penalty they are sample canonical correlations; with one they are
    shrunk estimates and are reported as-is.
    """

    u: np.ndarray
    v: np.ndarray
    lambdas: np.ndarray
    rank: int
    penalty_used: PenaltySpec
    fit: FitReport
    effective_rank_reduced: bool
    coef: CoefficientEstimate
    x_mean: np.ndarray
    y_mean: np.ndarray

    @property
    def b_hat(self) -> np.ndarray:
        return self.coef.b_hat


def _check_rank(r: int, p: int, q: int) -> None:
    if r < 1 or r > min(p, q):
        raise RankTooLarge(f"rank {r} must lie in [1, min(p, q) = {min(p, q)}]")


def _keep_informative(sigma: np.ndarray, r: int) -> int:
    if sigma[0] <= ABS_FLOOR:
        raise DegenerateSolution(
            f"leading singular value {sigma[0]:.3e} is below the absolute floor")
    keep = int(np.sum(sigma >= RANK_TOL * sigma[0]))
    if keep < r:
        warnings.warn(f"only {keep} of {r} singular values exceed the rank floor; "
                      f"rank reduced to {keep}", RuntimeWarning, stacklevel=3)
    return keep


def directions_from_estimate(cov: CovarianceModel, coef: CoefficientEstimate,
                             report: FitReport, r: int, penalty: PenaltySpec) -> CcaModel:
    """Rank-``r`` SVD of ``Sx^{1/2} B_hat Sy^{1/2}`` followed by normalization through ``B_hat``."""
    _check_rank(r, cov.p, cov.q)
    b = coef.b_hat
    if not np.any(b):
        raise DegenerateSolution("penalized estimate is identically zero; lower the penalty")
    sy_half_b_t = psd_sqrt_apply(cov.eig_y, b.T)            # Sy^{1/2} B'
    whitened = psd_sqrt_apply(cov.eig_x, sy_half_b_t.T)     # Sx^{1/2} B Sy^{1/2}
    u0, sigma, v0 = truncated_svd(whitened, r)
    keep = _keep_informative(sigma, r)
    u0, sigma, v0 = u0[:, :keep], sigma[:keep], v0[:, :keep]
    u = (sy_half_b_t.T @ v0) / sigma
    v = (b.T @ psd_sqrt_apply(cov.eig_x, u0)) / sigma
    return CcaModel(u, v, sigma, keep, penalty, report, keep < r, coef,
                    cov.x_mean, cov.y_mean)


def fit_covariance(cov: CovarianceModel, r: int, penalty: PenaltySpec,
                   config: AdmmConfig = AdmmConfig(),
                   warm_start: tuple[np.ndarray, np.ndarray] | None = None) -> CcaModel:
    """Sparse CCA from precomputed covariance blocks."""
    _check_rank(r, cov.p, cov.q)
    coef, report = admm_fit(cov, penalty, config, warm_start=warm_start)
    return directions_from_estimate(cov, coef, report, r, penalty)


def fit(data: Dataset, r: int, penalty: PenaltySpec, config: AdmmConfig = AdmmConfig(),
        center: bool = True) -> CcaModel:
    """Sparse CCA of ``data`` at rank ``r``.

    Raises
    ------
    RankTooLarge
        ``r`` exceeds ``min(p, q)``.
    DegenerateSolution
        The penalty zeroes out ``B_hat`` entirely.
    """
    _check_rank(r, data.p, data.q)
    return fit_covariance(empirical_covariances(data, center=center), r, penalty, config)


def fit_low_dim_covariance(cov: CovarianceModel, r: int) -> CcaModel:
    _check_rank(r, cov.p, cov.q)
    for name, f in (("X", cov.eig_x), ("Y", cov.eig_y)):
        ev = f.eigenvalues
        if not f.is_complete or ev[-1] <= EIG_FLOOR * ev[0]:
            raise SingularCovariance(f"sample covariance of {name} is numerically singular")
    ix = cov.eig_x.power(-0.5)
    iy = cov.eig_y.power(-0.5)
    whitened = ix @ cov.sigma_xy @ iy
    b = ix @ whitened @ iy
    u0, sigma, v0 = truncated_svd(whitened, r)
    keep = _keep_informative(sigma, r)
    u0, sigma, v0 = u0[:, :keep], sigma[:keep], v0[:, :keep]
    penalty = PenaltySpec(0.0)
    coef = CoefficientEstimate(b)
    report = FitReport(0, 0.0, 0.0, True, objective(b, cov, penalty),
                       kkt_violation(coef, cov, penalty))
    return CcaModel(ix @ u0, iy @ v0, sigma, keep, penalty, report, keep < r, coef,
                    cov.x_mean, cov.y_mean)


def fit_low_dim(data: Dataset, r: int, center: bool = True) -> CcaModel:
    """Closed-form estimator ``B_hat = Sx^{-1} Sxy Sy^{-1}`` for ``n > p, q``."""
    if data.n <= data.p or data.n <= data.q:
        raise SingularCovariance(
            f"closed form needs n > p and n > q (n={data.n}, p={data.p}, q={data.q})")
    return fit_low_dim_covariance(empirical_covariances(data, center=center), r)


def canonical_variates(model: CcaModel, data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Projections ``(X u, Y v)`` after the centering used at fit time."""
    if data.p != model.u.shape[0] or data.q != model.v.shape[0]:
        raise InvalidData(f"model expects p={model.u.shape[0]}, q={model.v.shape[0]}; "
                          f"got p={data.p}, q={data.q}")
    return (data.x - model.x_mean) @ model.u, (data.y - model.y_mean) @ model.v
