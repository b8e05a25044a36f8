"""Dense linear-algebra primitives and proximal operators.

Everything here is a pure function of its inputs. Covariances are kept in
factored form so the solver never has to invert a ``p x p`` matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidData, RankTooLarge
from .groups import GroupPartition

# eigenvalues in [-NEG_CLAMP * lambda_max, 0) are treated as roundoff
NEG_CLAMP = 1e-10


@dataclass(frozen=True)
class Dataset:
    """Paired observations; rows of ``x`` and ``y`` are joint samples."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if y.ndim == 1:
            y = y[:, None]
        if x.ndim != 2 or y.ndim != 2:
            raise InvalidData("x and y must be 2-d arrays")
        if x.shape[0] != y.shape[0]:
            raise InvalidData(
                f"x has {x.shape[0]} rows but y has {y.shape[0]}; samples must be paired")
        if x.shape[0] < 2:
            raise InvalidData("need at least two samples")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidData("data contains NaN or Inf")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def q(self) -> int:
        return self.y.shape[1]

    def take(self, rows) -> "Dataset":
        return Dataset(self.x[rows], self.y[rows])


@dataclass(frozen=True)
class SpectralFactor:
    """``basis @ diag(eigenvalues) @ basis.T`` with orthonormal ``basis`` (d x k).

    When ``k < dim`` the orthogonal complement of ``basis`` carries eigenvalue
    zero and is never formed explicitly.
    """

    basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def rank_bound(self) -> int:
        return self.basis.shape[1]

    @property
    def is_complete(self) -> bool:
        return self.basis.shape[1] == self.basis.shape[0]

    def matrix(self) -> np.ndarray:
        return (self.basis * self.eigenvalues) @ self.basis.T

    def power(self, exponent: float) -> np.ndarray:
        """``basis @ diag(eigenvalues**exponent) @ basis.T`` (zeros stay zero for exponent > 0)."""
        return (self.basis * self.eigenvalues ** exponent) @ self.basis.T


@dataclass(frozen=True)
class CovarianceModel:
    sigma_x: np.ndarray
    sigma_y: np.ndarray
    sigma_xy: np.ndarray
    eig_x: SpectralFactor
    eig_y: SpectralFactor
    n_samples: int
    x_mean: np.ndarray = field(default=None)
    y_mean: np.ndarray = field(default=None)

    @property
    def p(self) -> int:
        return self.sigma_x.shape[0]

    @property
    def q(self) -> int:
        return self.sigma_y.shape[0]

    @classmethod
    def from_matrices(cls, sigma_x, sigma_y, sigma_xy, n_samples: int) -> "CovarianceModel":
        """Wrap population-style covariance blocks (no data available)."""
        sx = _symmetrize(np.asarray(sigma_x, dtype=float))
        sy = _symmetrize(np.asarray(sigma_y, dtype=float))
        sxy = np.asarray(sigma_xy, dtype=float)
        if sxy.shape != (sx.shape[0], sy.shape[0]):
            raise InvalidData(f"cross-covariance shape {sxy.shape} does not match "
                              f"{sx.shape[0]}x{sy.shape[0]}")
        return cls(sx, sy, sxy, psd_eigendecomposition(sx), psd_eigendecomposition(sy),
                   int(n_samples), np.zeros(sx.shape[0]), np.zeros(sy.shape[0]))


def _symmetrize(s: np.ndarray) -> np.ndarray:
    return (s + s.T) / 2.0


def _clamp(eigenvalues: np.ndarray) -> np.ndarray:
    top = eigenvalues.max(initial=0.0)
    floor = -NEG_CLAMP * max(top, 0.0)
    if eigenvalues.size and eigenvalues.min() < floor:
        raise InvalidData(
            f"matrix is not positive semi-definite (eigenvalue {eigenvalues.min():.3e})")
    return np.maximum(eigenvalues, 0.0)


def psd_eigendecomposition(s: np.ndarray, *, from_data: bool = False) -> SpectralFactor:
    """Eigendecomposition of a PSD matrix with eigenvalues sorted descending.

    Parameters
    ----------
    s : ndarray
        Either a symmetric ``d x d`` matrix, or (``from_data=True``) an
        ``n x d`` data block whose Gram matrix ``s.T @ s / n`` is factorized.
    from_data : bool
        Use the thin SVD of ``s / sqrt(n)``. For ``n < d`` this returns only
        ``n`` eigenpairs at cost ``O(d n^2)`` instead of ``O(d^3)``.
    """
    s = np.asarray(s, dtype=float)
    if from_data:
        n = s.shape[0]
        _, sv, vt = np.linalg.svd(s / np.sqrt(n), full_matrices=False)
        vals, basis = sv ** 2, vt.T
    else:
        vals, basis = np.linalg.eigh(_symmetrize(s))
        vals, basis = vals[::-1], basis[:, ::-1]
    vals = _clamp(vals)
    return SpectralFactor(np.ascontiguousarray(basis), vals)


def empirical_covariances(data: Dataset, center: bool = True) -> CovarianceModel:
    """Sample covariance blocks ``X'X/n``, ``Y'Y/n``, ``X'Y/n`` plus their spectra.

    Columns are mean-centered first when ``center`` is true. Each block's
    eigendecomposition goes through the data-SVD route when ``n`` is smaller
    than the block dimension.
    """
    x, y = data.x, data.y
    if center:
        x_mean, y_mean = x.mean(axis=0), y.mean(axis=0)
        x, y = x - x_mean, y - y_mean
    else:
        x_mean, y_mean = np.zeros(data.p), np.zeros(data.q)
    n = data.n
    sx = _symmetrize(x.T @ x / n)
    sy = _symmetrize(y.T @ y / n)
    sxy = x.T @ y / n
    eig_x = psd_eigendecomposition(x, from_data=True) if n < data.p else psd_eigendecomposition(sx)
    eig_y = psd_eigendecomposition(y, from_data=True) if n < data.q else psd_eigendecomposition(sy)
    return CovarianceModel(sx, sy, sxy, eig_x, eig_y, n, x_mean, y_mean)


def psd_sqrt(f: SpectralFactor) -> np.ndarray:
    """Principal square root ``basis @ diag(sqrt(eigenvalues)) @ basis.T``."""
    return _symmetrize(f.power(0.5))


def psd_sqrt_apply(f: SpectralFactor, m: np.ndarray) -> np.ndarray:
    """``psd_sqrt(f) @ m`` without forming the square root."""
    return f.basis @ (np.sqrt(f.eigenvalues)[:, None] * (f.basis.T @ m))


def soft_threshold(m: np.ndarray, kappa: float) -> np.ndarray:
    """Entrywise ``sign(m) * max(|m| - kappa, 0)``; exact zeros below the threshold."""
    m = np.asarray(m, dtype=float)
    return np.sign(m) * np.maximum(np.abs(m) - kappa, 0.0)


def group_threshold(m: np.ndarray, kappa: float, partition: GroupPartition) -> np.ndarray:
    """Proximal map of ``kappa * sum_g sqrt(T_g) ||m_g||_F``.

    Each group is scaled by ``(1 - sqrt(T_g) kappa / ||m_g||_F)_+``; groups
    whose norm does not exceed the threshold become exactly zero.
    """
    m = np.asarray(m, dtype=float)
    if partition.is_elementwise:
        return soft_threshold(m, kappa)
    norms = partition.group_norms(m)
    thresh = np.sqrt(partition.sizes) * kappa
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > thresh, 1.0 - thresh / norms, 0.0)
    return m * scale[partition.labels]


def truncated_svd(m: np.ndarray, r: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Leading ``r`` singular triplets with a deterministic sign convention.

    Within each left singular vector the entry of largest magnitude is made
    nonnegative (first such entry on ties); the right vector is flipped along.
    """
    m = np.asarray(m, dtype=float)
    if r < 1 or r > min(m.shape):
        raise RankTooLarge(f"rank {r} is not in [1, {min(m.shape)}] for a {m.shape} matrix")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    u, s, v = u[:, :r].copy(), s[:r].copy(), vt[:r].T.copy()
    pivot = np.argmax(np.abs(u), axis=0)
    signs = np.where(u[pivot, np.arange(r)] < 0, -1.0, 1.0)
    return u * signs, s, v * signs
