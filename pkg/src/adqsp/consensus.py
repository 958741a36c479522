"""Unquantized PDMM/ADMM averaging, the Psi / Psi-perp subspace machinery and
accuracy metrics.

Edge fields (``z``) are length-``2m`` arrays in the entry order documented
in :mod:`adqsp.topology`; node vectors are length-``n`` arrays.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .topology import IncidenceData

__all__ = [
    "ConsensusConfig",
    "SubspaceBasis",
    "x_update",
    "z_update",
    "run_plain",
    "run_broadcast",
    "compact_step",
    "subspace_basis",
    "project",
    "closed_form_zperp",
    "mse",
    "contraction_rate",
    "psi_operator",
    "write_trajectory_csv",
    "write_mse_csv",
]


@dataclass(frozen=True)
class ConsensusConfig:
    """Step constant ``c``, averaging constant ``theta`` and iteration budget.

    ``theta = 0`` is PDMM, ``theta = 0.5`` is ADMM.
    """

    c: float = 1.0
    theta: float = 0.0
    t_max: int = 500

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not 0 <= self.theta < 1:
            raise ValueError(f"theta must lie in [0, 1), got {self.theta}")
        if int(self.t_max) != self.t_max or self.t_max < 1:
            raise ValueError(f"t_max must be a positive integer, got {self.t_max}")


def x_update(s, z, cfg: ConsensusConfig, inc: IncidenceData) -> np.ndarray:
    """Per-node primal update.

    ``x_i = (s_i - sum_j B_{i|j} z_{i|j}) / (1 + c d_i)``, evaluated node by
    node from each node's own entries.
    """
    s = np.asarray(s, dtype=float)
    z = np.asarray(z, dtype=float)
    x = np.empty(inc.n)
    held = [[] for _ in range(inc.n)]
    for e, i in enumerate(inc.owner):
        held[i].append(e)
    for i in range(inc.n):
        acc = sum(inc.sign[e] * z[e] for e in held[i])
        x[i] = (s[i] - acc) / (1.0 + cfg.c * inc.degrees[i])
    return x


def z_update(z, x, cfg: ConsensusConfig, inc: IncidenceData) -> np.ndarray:
    """Per-edge auxiliary update, node ``i`` producing ``z_{j|i}`` for neighbour ``j``.

    ``z'_{j|i} = theta z_{j|i} + (1 - theta)(z_{i|j} + 2c B_{i|j} x_i)``.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    th, c = cfg.theta, cfg.c
    for e_ji in range(z.shape[0]):
        e_ij = inc.rev[e_ji]
        i = inc.owner[e_ij]
        out[e_ji] = th * z[e_ji] + (1.0 - th) * (z[e_ij] + 2.0 * c * inc.sign[e_ij] * x[i])
    return out


def _zeros_or(z0, inc):
    if z0 is None:
        return np.zeros(2 * inc.m)
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (2 * inc.m,):
        raise ValueError(f"z0 must have shape ({2 * inc.m},), got {z0.shape}")
    return z0


def run_plain(s, cfg: ConsensusConfig, inc: IncidenceData, z0=None,
              return_z: bool = False):
    """Run the synchronous averaging iteration for ``cfg.t_max`` rounds.

    Returns the trajectory as a ``(t_max, n)`` array whose row ``t`` is
    ``x^(t+1)``; with ``return_z`` the final auxiliary field is returned too.
    """
    s = np.ascontiguousarray(s, dtype=float)
    z0 = _zeros_or(z0, inc)
    traj, z = kernels.plain_iterate(s, inc.owner, inc.sign, inc.rev, inc.degrees,
                                    z0, float(cfg.c), float(cfg.theta), int(cfg.t_max))
    return (traj, z) if return_z else traj


def run_broadcast(s, cfg: ConsensusConfig, inc: IncidenceData, z0=None,
                  return_messages: bool = False):
    """Broadcast form: nodes send ``x_i`` and each receiver updates both
    directions of the shared edge itself.

    Numerically identical to :func:`run_plain`. With ``return_messages`` the
    per-round message count (``2m``: one copy of ``x_i`` per neighbour) is
    returned as well.
    """
    s = np.asarray(s, dtype=float)
    z = _zeros_or(z0, inc).copy()
    th, c = cfg.theta, cfg.c
    denom = 1.0 + c * inc.degrees
    src = inc.owner[inc.rev]          # node whose x drives entry e
    k_sign = inc.sign[inc.rev]
    traj = np.empty((cfg.t_max, inc.n))
    for t in range(cfg.t_max):
        x = (s - np.bincount(inc.owner, weights=inc.sign * z, minlength=inc.n)) / denom
        received = x[src]             # x_i as heard by the owner of entry e = (j|i)
        z = th * z + (1.0 - th) * (z[inc.rev] + 2.0 * c * k_sign * received)
        traj[t] = x
    if return_messages:
        return traj, 2 * inc.m
    return traj


def compact_step(x, z, s, cfg: ConsensusConfig, inc: IncidenceData):
    """Matrix form of one round, used as a cross-check of the per-node updates.

    ``x+ = (I + c C^T C)^{-1}(s - C^T z)``, ``z+ = theta z + (1 - theta)(P z + 2c P C x+)``.
    The incoming ``x`` is not needed by the recursion and is accepted only for
    signature symmetry.
    """
    C = inc.C
    CtC = C.T @ C
    diag = np.diag(CtC)
    assert np.array_equal(CtC, np.diag(diag)), "C^T C must be diagonal"
    A_diag = 1.0 + cfg.c * diag
    assert np.all(A_diag > 0)
    x_new = (np.asarray(s, float) - C.T @ z) / A_diag
    P = inc.P
    z_new = cfg.theta * z + (1.0 - cfg.theta) * (P @ z + 2.0 * cfg.c * (P @ C) @ x_new)
    return x_new, z_new


@dataclass(frozen=True)
class SubspaceBasis:
    basis: np.ndarray  # (2m, rank), orthonormal columns
    tol: float

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def subspace_basis(inc: IncidenceData, tol: float | None = None) -> SubspaceBasis:
    """Orthonormal basis of ``ran(C) + ran(PC)`` by modified Gram-Schmidt.

    Columns of ``C`` are processed first, then those of ``PC``; a vector whose
    residual norm falls below ``tol`` is dropped. The default tolerance is
    ``1e-10`` times the largest column norm.
    """
    cols = np.hstack([inc.C, inc.C[inc.rev]])
    if tol is None:
        norms = np.linalg.norm(cols, axis=0)
        tol = 1e-10 * (norms.max() if norms.size else 1.0)
    kept = []
    for v in cols.T:
        w = v.astype(float).copy()
        for _ in range(2):  # re-orthogonalise once for stability
            for q in kept:
                w -= (q @ w) * q
        nrm = np.linalg.norm(w)
        if nrm >= tol:
            kept.append(w / nrm)
    basis = np.array(kept).T if kept else np.zeros((cols.shape[0], 0))
    return SubspaceBasis(basis, tol)


def project(z, basis: SubspaceBasis):
    """Split ``z`` into its ``Psi`` and ``Psi-perp`` parts."""
    z = np.asarray(z, dtype=float)
    Q = basis.basis
    z_psi = Q @ (Q.T @ z)
    return z_psi, z - z_psi


def closed_form_zperp(z0_perp, t: int, theta: float, inc: IncidenceData) -> np.ndarray:
    """Psi-perp component after ``t`` unquantized rounds.

    ``1/2 (z0 + P z0) + 1/2 (2 theta - 1)^t (z0 - P z0)``.
    """
    z0 = np.asarray(z0_perp, dtype=float)
    pz = z0[inc.rev]
    return 0.5 * (z0 + pz) + 0.5 * (2.0 * theta - 1.0) ** t * (z0 - pz)


def psi_operator(inc: IncidenceData, cfg: ConsensusConfig):
    """Orthonormal basis ``Q`` of ``Psi`` and the iteration matrix in that basis.

    Returns ``(Q, T_psi)`` with ``T_psi = Q^T T Q``, where ``T`` is the linear
    part of one auxiliary-variable round.
    """
    c, th = cfg.c, cfg.theta
    C = inc.C
    PC = C[inc.rev]
    U, sv, _ = np.linalg.svd(np.hstack([C, PC]), full_matrices=False)
    Q = U[:, sv > 1e-10 * sv[0]]
    inv = 1.0 / (1.0 + c * inc.degrees)
    # T q = theta q + (1 - theta)(P q - 2c P C diag(inv) C^T q)
    TQ = th * Q + (1.0 - th) * (Q[inc.rev] - 2.0 * c * PC @ (inv[:, None] * (C.T @ Q)))
    return Q, Q.T @ TQ


def contraction_rate(inc: IncidenceData, cfg: ConsensusConfig) -> float:
    """Spectral radius of the auxiliary-variable iteration restricted to ``Psi``.

    This is the asymptotic per-round factor by which the primal error
    shrinks; the ``Psi-perp`` modes (eigenvalues ``1`` and ``2 theta - 1``)
    never reach ``x`` and are excluded.
    """
    _, T_psi = psi_operator(inc, cfg)
    return float(np.abs(np.linalg.eigvals(T_psi)).max())


def mse(x, target) -> float:
    x = np.asarray(x, dtype=float)
    target = np.broadcast_to(np.asarray(target, dtype=float), x.shape)
    if x.shape != target.shape:
        raise ValueError("length mismatch")
    d = x - target
    return float(d @ d) / x.shape[0]


def write_trajectory_csv(path, traj) -> None:
    """CSV with columns ``t, node, x``; row ``t`` of ``traj`` is iteration ``t + 1``."""
    traj = np.asarray(traj)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "node", "x"])
        for t, row in enumerate(traj, start=1):
            for i, v in enumerate(row):
                w.writerow([t, i, repr(float(v))])


def write_mse_csv(path, curve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mse"])
        for t, v in enumerate(curve, start=1):
            w.writerow([t, repr(float(v))])
