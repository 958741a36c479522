"""Mutual-information and entropy estimation from Monte Carlo samples.

k-nearest-neighbour estimators (KSG for mutual information,
Kozachenko-Leonenko for entropy) with max-norm neighbourhoods, a plug-in
estimator for discrete data, Gaussian closed forms and the NMI map.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

__all__ = [
    "SampleMatrix",
    "MiEstimate",
    "ksg_mi",
    "knn_entropy",
    "discrete_mi",
    "nmi",
    "gaussian_mi",
    "gaussian_mi_cov",
    "gaussian_mi_samples",
    "whiten",
    "write_estimates_csv",
]

JITTER = 1e-10


@dataclass(frozen=True)
class SampleMatrix:
    """``N`` joint samples; ``x_cols`` and ``y_cols`` index the two blocks."""

    data: np.ndarray
    x_cols: tuple
    y_cols: tuple

    @classmethod
    def from_blocks(cls, x, y) -> "SampleMatrix":
        x, y = _as_2d(x), _as_2d(y)
        if x.shape[0] != y.shape[0]:
            raise ValueError("blocks have different sample counts")
        dx = x.shape[1]
        return cls(np.hstack([x, y]), tuple(range(dx)), tuple(range(dx, dx + y.shape[1])))

    @property
    def x(self) -> np.ndarray:
        return self.data[:, list(self.x_cols)]

    @property
    def y(self) -> np.ndarray:
        return self.data[:, list(self.y_cols)]

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class MiEstimate:
    """Estimated mutual information in nats; ``nats`` is the raw value and
    may be slightly negative."""

    nats: float
    k: int
    n_samples: int
    estimator: str = "ksg"

    @property
    def clipped(self) -> float:
        return max(self.nats, 0.0)


def _as_2d(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def _blocks(x, y):
    if isinstance(x, SampleMatrix):
        if y is not None:
            raise TypeError("pass either a SampleMatrix or two blocks")
        return x.x, x.y
    if y is None:
        raise TypeError("second block missing")
    x, y = _as_2d(x), _as_2d(y)
    if x.shape[0] != y.shape[0]:
        raise ValueError("blocks have different sample counts")
    return x, y


def _jitter(a, rng):
    scale = np.abs(a).mean(axis=0)
    scale[scale == 0] = 1.0
    return a + JITTER * scale * rng.random(a.shape)


def _check(a, k):
    n = a.shape[0]
    if n <= k + 1:
        raise ValueError(f"need more than k + 1 = {k + 1} samples, got {n}")
    if np.all(a == a[0]):
        raise ValueError("degenerate samples: all rows identical")


def _count_within(points, radii):
    """Number of other points strictly closer than ``radii`` (max norm)."""
    tree = cKDTree(points)
    r = np.nextafter(radii, 0.0)
    return tree.query_ball_point(points, r, p=np.inf, return_length=True) - 1


def ksg_mi(x, y=None, k: int = 3, seed: int = 0) -> MiEstimate:
    """KSG estimator (first variant) of ``I(X; Y)``.

    Parameters
    ----------
    x : SampleMatrix or array_like, shape (N,) or (N, dx)
    y : array_like, shape (N,) or (N, dy), optional
        Required unless ``x`` is a :class:`SampleMatrix`.
    k : int
        Neighbour count in the joint space.
    seed : int
        Seed of the tie-breaking jitter (``1e-10`` times the column scale).

    Returns
    -------
    MiEstimate
        ``psi(k) + psi(N) - <psi(n_x + 1) + psi(n_y + 1)>``.

    Notes
    -----
    The joint max-norm ball mixes coordinates of both blocks, so blocks on
    wildly different scales bias the estimate towards zero at finite ``N``.
    Standardise (or :func:`whiten`) the columns first when that happens.
    """
    x, y = _blocks(x, y)
    joint = np.hstack([x, y])
    _check(joint, k)
    rng = np.random.default_rng(seed)
    x = _jitter(x, rng)
    y = _jitter(y, rng)
    joint = np.hstack([x, y])
    n = joint.shape[0]
    dist, _ = cKDTree(joint).query(joint, k=k + 1, p=np.inf)
    eps = dist[:, -1]
    nx = _count_within(x, eps)
    ny = _count_within(y, eps)
    val = digamma(k) + digamma(n) - np.mean(digamma(nx + 1) + digamma(ny + 1))
    return MiEstimate(float(val), k, n, "ksg")


def knn_entropy(x, k: int = 3, seed: int = 0) -> float:
    """Kozachenko-Leonenko differential entropy (nats), max-norm balls.

    ``psi(N) - psi(k) + d log 2 + d <log eps_i>`` with ``eps_i`` the distance
    to the ``k``-th neighbour.
    """
    if isinstance(x, SampleMatrix):
        x = x.data
    x = _as_2d(x)
    _check(x, k)
    x = _jitter(x, np.random.default_rng(seed))
    n, d = x.shape
    dist, _ = cKDTree(x).query(x, k=k + 1, p=np.inf)
    eps = dist[:, -1]
    return float(digamma(n) - digamma(k) + d * np.log(2.0) + d * np.mean(np.log(eps)))


def _codes(a):
    a = np.asarray(a)
    if a.ndim == 1:
        a = a[:, None]
    _, inv = np.unique(a, axis=0, return_inverse=True)
    return inv.ravel()


def discrete_mi(x, y) -> MiEstimate:
    """Plug-in ``I(X; Y)`` from empirical joint frequencies of discrete rows."""
    cx, cy = _codes(x), _codes(y)
    n = cx.shape[0]
    if cy.shape[0] != n:
        raise ValueError("blocks have different sample counts")
    joint = np.zeros((cx.max() + 1, cy.max() + 1))
    np.add.at(joint, (cx, cy), 1.0)
    pxy = joint / n
    px = pxy.sum(axis=1, keepdims=True)
    py = pxy.sum(axis=0, keepdims=True)
    nz = pxy > 0
    val = float(np.sum(pxy[nz] * np.log(pxy[nz] / (px @ py)[nz])))
    return MiEstimate(val, 0, n, "plugin")


def nmi(est) -> float:
    """``1 - exp(-2 I)``: the squared correlation a bivariate Gaussian with
    mutual information ``I`` would have. Negative inputs map to 0."""
    nats = est.nats if isinstance(est, MiEstimate) else float(est)
    return float(-np.expm1(-2.0 * max(nats, 0.0)))


def gaussian_mi(rho: float) -> float:
    """``-1/2 ln(1 - rho**2)`` for a bivariate Gaussian."""
    if not abs(rho) < 1:
        raise ValueError(f"|rho| must be below 1, got {rho}")
    return float(-0.5 * np.log1p(-rho * rho))


def gaussian_mi_cov(cov, dx: int) -> float:
    """Mutual information between the first ``dx`` and remaining coordinates
    of a Gaussian vector with covariance ``cov``."""
    cov = np.asarray(cov, dtype=float)
    _, ld = np.linalg.slogdet(cov)
    _, ldx = np.linalg.slogdet(cov[:dx, :dx])
    _, ldy = np.linalg.slogdet(cov[dx:, dx:])
    return float(0.5 * (ldx + ldy - ld))


def gaussian_mi_samples(x, y=None) -> MiEstimate:
    """:func:`gaussian_mi_cov` evaluated on the sample covariance."""
    x, y = _blocks(x, y)
    joint = np.hstack([x, y])
    return MiEstimate(gaussian_mi_cov(np.cov(joint, rowvar=False), x.shape[1]),
                      0, joint.shape[0], "gaussian")


def whiten(a) -> np.ndarray:
    """Centre and decorrelate columns with the sample covariance.

    An invertible affine map, so mutual information with any other
    variable is unchanged; it only puts all coordinates on one scale
    before max-norm neighbour searches.
    """
    a = _as_2d(a)
    centred = a - a.mean(axis=0)
    cov = np.atleast_2d(np.cov(centred, rowvar=False))
    L = np.linalg.cholesky(cov)
    return np.linalg.solve(L, centred.T).T


def write_estimates_csv(path, rows) -> None:
    """Rows of ``(experiment, x_desc, y_desc, MiEstimate)`` to CSV
    ``experiment, x_desc, y_desc, n_samples, k, mi_nats, nmi``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["experiment", "x_desc", "y_desc", "n_samples", "k", "mi_nats", "nmi"])
        for exp, xd, yd, est in rows:
            w.writerow([exp, xd, yd, est.n_samples, est.k, repr(float(est.nats)), repr(nmi(est))])
