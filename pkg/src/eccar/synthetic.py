"""Canonical pair model with known sparse directions, and Gaussian sampling from it."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import InvalidConfig, InvalidSignal
from .linalg import Dataset

SIGNAL_PRESETS = {"high": 0.9, "medium": 0.7, "weak": 0.5}
_MAX_RESAMPLE = 10


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the simulated covariance.

    ``p1``/``q1`` are the sizes of the correlated leading blocks of the
    marginal covariances and ``r_pca`` their rank (defaults: 20 and 5, capped
    at the dimension). ``support_u``/``support_v`` pin the sparse rows instead
    of drawing them at random.
    """

    p: int
    q: int
    r: int
    s_u: int
    s_v: int
    signal: float
    seed: int
    n: int = 400
    p1: int | None = None
    q1: int | None = None
    r_pca: int = 5
    support_u: tuple[int, ...] | None = None
    support_v: tuple[int, ...] | None = None

    def __post_init__(self):
        p1 = min(20, self.p) if self.p1 is None else self.p1
        q1 = min(20, self.q) if self.q1 is None else self.q1
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "q1", q1)
        if self.support_u is not None:
            object.__setattr__(self, "support_u", tuple(sorted(int(i) for i in self.support_u)))
        if self.support_v is not None:
            object.__setattr__(self, "support_v", tuple(sorted(int(i) for i in self.support_v)))
        problems = []
        if min(self.p, self.q, self.r, self.n) < 1:
            problems.append("p, q, r, n must be positive")
        if not (self.r <= min(self.s_u, self.s_v)):
            problems.append("need r <= min(s_u, s_v)")
        if not (self.s_u <= self.p and self.s_v <= self.q):
            problems.append("need s_u <= p and s_v <= q")
        if not (1 <= self.r_pca <= min(p1, q1) and p1 <= self.p and q1 <= self.q):
            problems.append("need r_pca <= p1 <= p and r_pca <= q1 <= q")
        if not 0 <= self.signal < 1:
            problems.append("signal must lie in [0, 1)")
        if not 0 <= self.seed < 2 ** 64:
            problems.append("seed must be an unsigned 64-bit integer")
        for name, sup, dim, size in (("support_u", self.support_u, self.p, self.s_u),
                                     ("support_v", self.support_v, self.q, self.s_v)):
            if sup is not None and (len(set(sup)) != size or min(sup) < 0 or max(sup) >= dim):
                problems.append(f"{name} must hold {size} distinct indices in [0, {dim})")
        if problems:
            raise InvalidConfig("; ".join(problems))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("support_u", "support_v"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d


@dataclass(frozen=True, eq=False)
class GroundTruth:
    spec: SyntheticSpec
    u_star: np.ndarray
    v_star: np.ndarray
    lambda_star: np.ndarray
    sigma_x: np.ndarray
    sigma_y: np.ndarray
    sigma_xy: np.ndarray
    b_star: np.ndarray
    support_u: np.ndarray
    support_v: np.ndarray
    joint_chol: np.ndarray

    @property
    def p(self) -> int:
        return self.sigma_x.shape[0]

    @property
    def q(self) -> int:
        return self.sigma_y.shape[0]

    def joint_covariance(self) -> np.ndarray:
        return np.block([[self.sigma_x, self.sigma_xy], [self.sigma_xy.T, self.sigma_y]])


def _marginal_covariance(rng: np.random.Generator, d: int, d1: int, rank: int) -> np.ndarray:
    basis, _ = np.linalg.qr(rng.standard_normal((d1, rank)))
    sigma = np.eye(d)
    sigma[:d1, :d1] += basis @ basis.T
    return sigma


def _inv_sqrt(s: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((s + s.T) / 2)
    return (vecs / np.sqrt(vals)) @ vecs.T


def _sparse_directions(rng: np.random.Generator, sigma: np.ndarray, s: int, r: int,
                       fixed_support) -> tuple[np.ndarray, np.ndarray]:
    d = sigma.shape[0]
    for _ in range(_MAX_RESAMPLE):
        if fixed_support is None:
            support = np.sort(rng.choice(d, size=s, replace=False))
        else:
            support = np.asarray(fixed_support, dtype=int)
        w = np.zeros((d, r))
        w[support] = rng.uniform(-1.0, 1.0, size=(s, r))
        gram = w.T @ sigma @ w
        ev = np.linalg.eigvalsh(gram)
        if ev[0] > 1e-8 * ev[-1]:
            w = w @ _inv_sqrt(gram)
            w[np.setdiff1d(np.arange(d), support)] = 0.0
            return w, support
    raise InvalidConfig(f"could not draw a rank-{r} direction matrix on {s} rows "
                        f"after {_MAX_RESAMPLE} attempts")


def build_model(spec: SyntheticSpec) -> GroundTruth:
    """Population covariance with sparse canonical directions, seeded by ``spec.seed``.

    The marginal covariances are ``blockdiag(W W' + I, I)`` with ``W`` a random
    orthonormal ``p1 x r_pca`` matrix, so the leading block has eigenvalues 2
    (multiplicity ``r_pca``) and 1 elsewhere. The cross-covariance is
    ``Sx U* diag(signal) V*' Sy`` with ``U*' Sx U* = I``.
    """
    rng = np.random.default_rng(spec.seed)
    sigma_x = _marginal_covariance(rng, spec.p, spec.p1, spec.r_pca)
    sigma_y = _marginal_covariance(rng, spec.q, spec.q1, spec.r_pca)
    u_star, sup_u = _sparse_directions(rng, sigma_x, spec.s_u, spec.r, spec.support_u)
    v_star, sup_v = _sparse_directions(rng, sigma_y, spec.s_v, spec.r, spec.support_v)
    lam = np.full(spec.r, float(spec.signal))
    sigma_xy = ((sigma_x @ u_star) * lam) @ (sigma_y @ v_star).T
    b_star = (u_star * lam) @ v_star.T
    joint = np.block([[sigma_x, sigma_xy], [sigma_xy.T, sigma_y]])
    try:
        chol = np.linalg.cholesky(joint)
    except np.linalg.LinAlgError:
        raise InvalidSignal(f"joint covariance is not positive definite "
                            f"at signal={spec.signal}") from None
    return GroundTruth(spec, u_star, v_star, lam, sigma_x, sigma_y, sigma_xy, b_star,
                       sup_u, sup_v, chol)


def sample_dataset(truth: GroundTruth, n: int, seed: int) -> Dataset:
    """``n`` i.i.d. rows ``L g`` with ``g ~ N(0, I)``; the first ``p`` columns are X."""
    if n < 2:
        raise InvalidConfig(f"need n >= 2, got {n}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, truth.p + truth.q)) @ truth.joint_chol.T
    return Dataset(z[:, :truth.p], z[:, truth.p:])


def condition_bounds(truth: GroundTruth) -> tuple[float, float]:
    """Smallest and largest eigenvalue of the joint covariance."""
    ev = np.linalg.eigvalsh(truth.joint_covariance())
    return float(ev[0]), float(ev[-1])
