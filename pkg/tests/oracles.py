"""Reference computations that share no code path with the package."""

import numpy as np
import scipy.linalg as sla


def direct_loss(b, x, y, weight=0.0, groups=None):
    """1/2 ||X B Y'/n - I_n||_F^2 + penalty, formed literally with the n x n residual."""
    n = x.shape[0]
    resid = x @ b @ y.T / n - np.eye(n)
    if groups is None:
        pen = np.abs(b).sum()
    else:
        pen = sum(np.sqrt(len(g)) * np.sqrt(sum(b[i, j] ** 2 for i, j in g)) for g in groups)
    return 0.5 * np.sum(resid ** 2) + weight * pen


def covariance_loss(b, sx, sy, sxy, n, weight=0.0, groups=None):
    smooth = 0.5 * np.trace(b.T @ sx @ b @ sy) - np.sum(b * sxy) + n / 2
    if groups is None:
        pen = np.abs(b).sum()
    else:
        pen = sum(np.sqrt(len(g)) * np.linalg.norm([b[i, j] for i, j in g]) for g in groups)
    return smooth + weight * pen


def prox_group_loop(m, kappa, groups):
    out = np.zeros_like(m)
    for g in groups:
        idx = tuple(np.array(g).T)
        block = m[idx]
        nrm = np.linalg.norm(block)
        t = np.sqrt(len(g)) * kappa
        if nrm > t:
            out[idx] = (1 - t / nrm) * block
    return out


def fista(sx, sy, sxy, weight, groups=None, iters=20000, tol=1e-13):
    """Accelerated proximal gradient on the covariance-space objective."""
    if groups is None:
        def prox(m, t):
            return np.sign(m) * np.maximum(np.abs(m) - t, 0.0)
    else:
        def prox(m, t):
            return prox_group_loop(m, t, groups)
    p, q = sxy.shape
    lip = np.linalg.eigvalsh(sx)[-1] * np.linalg.eigvalsh(sy)[-1]
    b = np.zeros((p, q))
    z = b.copy()
    t = 1.0
    for _ in range(iters):
        grad = sx @ z @ sy - sxy
        b_new = prox(z - grad / lip, weight / lip)
        t_new = (1 + np.sqrt(1 + 4 * t * t)) / 2
        z = b_new + (t - 1) / t_new * (b_new - b)
        if np.linalg.norm(b_new - b) <= tol * max(1.0, np.linalg.norm(b)):
            b = b_new
            break
        b, t = b_new, t_new
    return b


def classical_cca(sx, sy, sxy, r):
    """Whitened cross-covariance SVD using scipy's matrix square root."""
    wx = np.real(sla.inv(sla.sqrtm(sx)))
    wy = np.real(sla.inv(sla.sqrtm(sy)))
    u0, s, v0t = np.linalg.svd(wx @ sxy @ wy)
    return wx @ u0[:, :r], wy @ v0t[:r].T, s[:r]


def subspace_gap(a, b):
    """||P_a - P_b||_F / sqrt(2) with projections from scipy's orth."""
    qa, qb = sla.orth(a), sla.orth(b)
    return np.linalg.norm(qa @ qa.T - qb @ qb.T) / np.sqrt(2)


def data_with_covariances(sx, sy, sxy, n, seed=0):
    """Uncentered data whose sample covariances equal the given blocks exactly."""
    p = sx.shape[0]
    joint = np.block([[sx, sxy], [sxy.T, sy]])
    chol = np.linalg.cholesky(joint)
    rng = np.random.default_rng(seed)
    qmat, _ = np.linalg.qr(rng.standard_normal((n, joint.shape[0])))
    z = np.sqrt(n) * qmat @ chol.T
    return z[:, :p], z[:, p:]


def correlated_data(rng, n, p, q, strength=1.0):
    """Gaussian X and Y with a planted shared component."""
    x = rng.standard_normal((n, p))
    y = rng.standard_normal((n, q))
    k = min(p, q, 2)
    y[:, :k] += strength * x[:, :k]
    return x, y
