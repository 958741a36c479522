"""Complete protocols: ADQSP (subspace perturbation with adaptive differential
quantization), additive-secret-sharing consensus and local-DP consensus.

Each run returns its output trajectory and a :class:`Transcript` of every
message, flagged as secure (invisible to an eavesdropper) or public.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from . import kernels
from .consensus import ConsensusConfig, contraction_rate, psi_operator, run_broadcast
from .quantizer import (QuantizerSchedule, cell_widths, default_delta0, default_gamma,
                        dither_table)
from .topology import IncidenceData, incidence

__all__ = [
    "KINDS",
    "Transcript",
    "AdqspConfig",
    "AdqspRun",
    "SaturationError",
    "run_adqsp",
    "replay",
    "adqsp_mse_floor_prediction",
    "adqsp_mse_floor_propagated",
    "SmpcConfig",
    "SmpcRun",
    "WraparoundError",
    "smpc_share",
    "smpc_mask_and_average",
    "encode_fixed",
    "DpConfig",
    "DpRun",
    "run_dp",
]

KINDS = ("z_init", "delta_hat", "x_broadcast", "share")
_KIND_CODE = {k: i for i, k in enumerate(KINDS)}
NO_LEVEL = np.iinfo(np.int64).min


def _as_inc(graph) -> IncidenceData:
    return graph if isinstance(graph, IncidenceData) else incidence(graph)


# --------------------------------------------------------------------------
# transcripts

@dataclass(frozen=True)
class Transcript:
    """Columnar message log.

    One row per message: iteration ``t``, sender, receiver, kind code (index
    into :data:`KINDS`), secure flag, payload and the quantizer level index
    (``NO_LEVEL`` for messages that carry none). Integer payloads such as
    modular shares are held in ``ivalue`` so they stay exact.
    """

    t: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    kind: np.ndarray
    secure: np.ndarray
    value: np.ndarray
    level: np.ndarray
    ivalue: tuple = field(default=(), repr=False)

    def __len__(self) -> int:
        return int(self.t.shape[0])

    def select(self, mask) -> "Transcript":
        mask = np.asarray(mask, dtype=bool)
        iv = tuple(v for v, keep in zip(self.ivalue, mask) if keep) if self.ivalue else ()
        return Transcript(self.t[mask], self.src[mask], self.dst[mask], self.kind[mask],
                          self.secure[mask], self.value[mask], self.level[mask], iv)

    def of_kind(self, kind: str) -> "Transcript":
        return self.select(self.kind == _KIND_CODE[kind])

    @staticmethod
    def concat(parts) -> "Transcript":
        parts = list(parts)
        cols = [np.concatenate([getattr(p, f) for p in parts])
                for f in ("t", "src", "dst", "kind", "secure", "value", "level")]
        iv = ()
        if any(p.ivalue for p in parts):
            iv = tuple(v for p in parts for v in (p.ivalue or (None,) * len(p)))
        return Transcript(*cols, iv)

    def write_csv(self, path) -> None:
        """Columns ``t, from, to, kind, secure, value, level_index``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "from", "to", "kind", "secure", "value", "level_index"])
            for r in range(len(self)):
                if self.ivalue and self.ivalue[r] is not None:
                    val = str(self.ivalue[r])
                else:
                    val = repr(float(self.value[r]))
                lvl = "" if self.level[r] == NO_LEVEL else str(int(self.level[r]))
                w.writerow([int(self.t[r]), int(self.src[r]), int(self.dst[r]),
                            KINDS[self.kind[r]], int(bool(self.secure[r])), val, lvl])


def _block(t, src, dst, kind, secure, value, level=None):
    k = len(value)
    t = np.broadcast_to(np.asarray(t, dtype=np.int64), (k,)).copy()
    level = np.full(k, NO_LEVEL, dtype=np.int64) if level is None else np.asarray(level, np.int64)
    return Transcript(t, np.asarray(src, np.int64), np.asarray(dst, np.int64),
                      np.full(k, _KIND_CODE[kind], dtype=np.int8),
                      np.full(k, secure, dtype=bool), np.asarray(value, float), level)


# --------------------------------------------------------------------------
# ADQSP

class SaturationError(RuntimeError):
    """Quantizer clamped more inputs than the configured budget allows."""


@dataclass(frozen=True)
class AdqspConfig:
    """Perturbation variance, quantizer schedule and consensus parameters.

    ``max_saturations=None`` disables the saturation budget; saturations are
    always counted in the run result.
    """

    sigma_z2: float
    sched: QuantizerSchedule
    consensus: ConsensusConfig = field(default_factory=ConsensusConfig)
    max_saturations: int | None = None

    def __post_init__(self):
        if not self.sigma_z2 >= 0:
            raise ValueError(f"sigma_z2 must be non-negative, got {self.sigma_z2}")

    @property
    def sigma_z(self) -> float:
        return float(np.sqrt(self.sigma_z2))

    @classmethod
    def make(cls, sigma_z: float, *, c=1.0, theta=0.0, t_max=500, gamma=0.95,
             delta_min=0.0, bits=2, delta0=None, max_saturations=None, graph=None):
        """Build a config from flat parameters.

        ``delta0=None`` uses :func:`default_delta0`; ``gamma="auto"`` uses
        :func:`default_gamma` on the contraction rate of ``graph``.
        """
        cons = ConsensusConfig(c, theta, t_max)
        if delta0 is None:
            delta0 = default_delta0(sigma_z, c)
        if gamma == "auto":
            if graph is None:
                raise ValueError("gamma='auto' needs the graph")
            gamma = default_gamma(contraction_rate(_as_inc(graph), cons))
        return cls(float(sigma_z) ** 2, QuantizerSchedule(delta0, gamma, delta_min, bits),
                   cons, max_saturations)


@dataclass(frozen=True, eq=False)
class AdqspRun:
    """Everything one ADQSP execution produced.

    Row ``t`` of ``x``, ``delta_hat``, ``noise`` and ``level`` holds the
    quantity with superscript ``t + 1``. ``noise`` is the simulator's
    ground truth and is not part of any adversary view.
    """

    inc: IncidenceData = field(repr=False)
    s: np.ndarray = field(repr=False)
    cfg: AdqspConfig
    z0: np.ndarray = field(repr=False)
    dither_seed: int
    widths: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    delta_hat: np.ndarray = field(repr=False)
    noise: np.ndarray = field(repr=False)
    level: np.ndarray = field(repr=False)
    saturations: np.ndarray = field(repr=False)
    zhat_final: np.ndarray = field(repr=False)

    @property
    def trajectory(self) -> np.ndarray:
        return self.x

    @property
    def total_saturations(self) -> int:
        return int(self.saturations.sum())

    def zhat(self, t: int) -> np.ndarray:
        """Receiver-side reconstruction ``z_hat^(t)`` (``t = 0`` is ``z^(0)``)."""
        zh = self.z0.copy()
        for row in self.delta_hat[:t]:
            zh = zh + row
        return zh

    def mse_curve(self) -> np.ndarray:
        d = self.x - self.s.mean()
        return np.einsum("ij,ij->i", d, d) / self.x.shape[1]

    @cached_property
    def transcript(self) -> Transcript:
        inc = self.inc
        ne = 2 * inc.m
        T = self.x.shape[0]
        init = _block(0, inc.owner, inc.peer, "z_init", True, self.z0)
        # entry e = (owner|peer) is computed by its peer and sent to the owner
        steps = np.repeat(np.arange(1, T + 1), ne)
        upd = Transcript(steps, np.tile(inc.peer, T), np.tile(inc.owner, T),
                         np.full(T * ne, _KIND_CODE["delta_hat"], np.int8),
                         np.zeros(T * ne, bool), self.delta_hat.ravel(),
                         self.level.ravel().astype(np.int64))
        return Transcript.concat([init, upd])


def run_adqsp(s, graph, cfg: AdqspConfig, rng=None) -> AdqspRun:
    """Run ADQSP for ``cfg.consensus.t_max`` rounds.

    ``z^(0)`` is drawn i.i.d. Gaussian with variance ``sigma_z2`` per directed
    edge and exchanged securely. Every later round transmits dithered,
    quantized differences of the auxiliary variable in the clear; primal
    updates use the receiver-side reconstructions.

    Raises
    ------
    SaturationError
        If ``cfg.max_saturations`` is set and exceeded.
    """
    inc = _as_inc(graph)
    s = np.ascontiguousarray(s, dtype=float)
    if s.shape != (inc.n,):
        raise ValueError(f"s must have length {inc.n}")
    rng = np.random.default_rng(rng)
    ne = 2 * inc.m
    z0 = rng.normal(0.0, cfg.sigma_z, ne) if cfg.sigma_z2 > 0 else np.zeros(ne)
    dither_seed = int(rng.integers(0, 2 ** 63))
    cc = cfg.consensus
    widths = cell_widths(cfg.sched, cc.t_max)
    dith = dither_table(dither_seed, cc.t_max, ne)
    x, dzh, noise, level, sat, zh = kernels.adqsp_iterate(
        s, inc.owner, inc.sign, inc.rev, inc.degrees, z0, float(cc.c),
        float(cc.theta), widths, int(cfg.sched.half), dith)
    run = AdqspRun(inc, s, cfg, z0, dither_seed, widths, x, dzh, noise, level, sat, zh)
    if cfg.max_saturations is not None and run.total_saturations > cfg.max_saturations:
        raise SaturationError(
            f"{run.total_saturations} quantizer saturations (budget {cfg.max_saturations})")
    return run


def replay(transcript: Transcript, s, graph, cfg: AdqspConfig, dither_seed=None):
    """Recompute every node's state from an ADQSP transcript.

    Rebuilds ``z_hat`` from the secure initial values and the public
    differences, then the primal iterates. When ``dither_seed`` is given the
    transmitted values are also re-derived from their level indices, which
    checks that sender and receiver stay synchronised.

    Returns
    -------
    x : ndarray, shape (t_max, n)
    zhat_final : ndarray, shape (2m,)
    """
    inc = _as_inc(graph)
    s = np.asarray(s, dtype=float)
    ne = 2 * inc.m
    cc = cfg.consensus
    init = transcript.of_kind("z_init")
    zh = np.empty(ne)
    for src, dst, v in zip(init.src, init.dst, init.value):
        zh[inc.entry(int(src), int(dst))] = v
    upd = transcript.of_kind("delta_hat")
    T = int(upd.t.max()) if len(upd) else 0
    rows = np.empty((T, ne))
    lv = np.empty((T, ne), dtype=np.int64)
    ent = np.array([inc.entry(int(d), int(r)) for d, r in zip(upd.dst, upd.src)], dtype=np.int64)
    rows[upd.t - 1, ent] = upd.value
    lv[upd.t - 1, ent] = upd.level
    if dither_seed is not None:
        widths = cell_widths(cfg.sched, T)
        d = dither_table(dither_seed, T, ne) * widths[:, None]
        rows_from_levels = widths[:, None] * (lv + 0.5) - d
        if not np.array_equal(rows_from_levels, rows):
            raise ValueError("transmitted values disagree with their level indices")
    denom = 1.0 + cc.c * inc.degrees
    x = np.empty((T, inc.n))
    for t in range(T):
        x[t] = (s - np.bincount(inc.owner, weights=inc.sign * zh, minlength=inc.n)) / denom
        zh = zh + rows[t]
    return x, zh


def adqsp_mse_floor_prediction(graph, cfg: AdqspConfig) -> float:
    """Converged MSE predicted from uniform noise of width ``delta_min``.

    At convergence ``x_i`` is off by ``-sum_j B_{i|j} n_{i|j} / (1 + c d_i)``
    with independent noises of variance ``delta_min**2 / 12``, giving
    ``(1/n) sum_i d_i (delta_min**2/12) / (1 + c d_i)**2``.
    """
    inc = _as_inc(graph)
    c = cfg.consensus.c
    d = inc.degrees.astype(float)
    var = cfg.sched.delta_min ** 2 / 12.0
    return float(np.mean(d * var / (1.0 + c * d) ** 2))


def adqsp_mse_floor_propagated(graph, cfg: AdqspConfig) -> float:
    """Converged MSE when quantization noise is carried forward by the iteration.

    Every round adds white noise of variance ``delta_min**2 / 12`` to the
    auxiliary variables, and earlier noise keeps circulating through the
    update before it decays. In the ``Psi`` coordinates the steady-state
    covariance solves ``S = T S T^T + (delta_min**2 / 12) I``; the primal
    error is ``-diag(1 / (1 + c d)) C^T Q`` applied to it. Noise in
    ``Psi-perp`` never reaches ``x``.
    """
    inc = _as_inc(graph)
    Q, T_psi = psi_operator(inc, cfg.consensus)
    var = cfg.sched.delta_min ** 2 / 12.0
    S = solve_discrete_lyapunov(T_psi, var * np.eye(Q.shape[1]))
    M = (1.0 / (1.0 + cfg.consensus.c * inc.degrees))[:, None] * (inc.C.T @ Q)
    return float(np.trace(M @ S @ M.T)) / inc.n


# --------------------------------------------------------------------------
# SMPC

class WraparoundError(ValueError):
    """The modulus is too small for the data range."""


@dataclass(frozen=True)
class SmpcConfig:
    """Modulus ``p``, fixed-point scale and consensus parameters.

    The default ``p = 2**31 - 1`` (prime) keeps ``n * p`` well inside the
    range where doubles represent integers exactly, which the consensus on
    masked values relies on.
    """

    p: int = 2 ** 31 - 1
    scale: float = 1e6
    consensus: ConsensusConfig = field(default_factory=ConsensusConfig)

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2:
            raise ValueError(f"p must be an integer >= 2, got {self.p}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")


def encode_fixed(s, cfg: SmpcConfig) -> list[int]:
    """Round ``s * scale`` to integers (exact Python ints, possibly negative)."""
    return [int(round(float(v) * cfg.scale)) for v in np.asarray(s, dtype=float)]


def smpc_share(s_i: int, neighbors, rng, p: int):
    """Split ``s_i`` into one uniform share per neighbour plus an own share.

    Returns ``(own, shares)`` with ``shares[j] = r_i^j`` uniform on ``Z_p``
    and ``own = s_i - sum_j r_i^j mod p``.
    """
    rng = np.random.default_rng(rng)
    shares = {}
    for j in sorted(neighbors):
        shares[j] = int(rng.integers(0, p))
    own = (int(s_i) - sum(shares.values())) % p
    return own, shares


@dataclass(frozen=True, eq=False)
class SmpcRun:
    s_int: list
    s_masked: list
    shares: dict = field(repr=False)          # shares[i][j] = r_i^j
    x: np.ndarray = field(repr=False)          # consensus trajectory on masked values
    outputs: np.ndarray = field(repr=False)    # per-node decoded averages
    output: float
    exact_average: float
    cfg: SmpcConfig = field(repr=False)
    inc: IncidenceData = field(repr=False)

    @cached_property
    def transcript(self) -> Transcript:
        inc = self.inc
        src, dst, iv = [], [], []
        for i in range(inc.n):
            for j, r in self.shares[i].items():
                src.append(i)
                dst.append(j)
                iv.append(r)
        shares = _block(0, src, dst, "share", True, np.asarray(iv, float))
        shares = Transcript(*(getattr(shares, f) for f in
                              ("t", "src", "dst", "kind", "secure", "value", "level")),
                            tuple(iv))
        T = self.x.shape[0]
        ne = 2 * inc.m
        steps = np.repeat(np.arange(1, T + 1), ne)
        vals = self.x[:, inc.owner].ravel()
        bc = Transcript(steps, np.tile(inc.owner, T), np.tile(inc.peer, T),
                        np.full(T * ne, _KIND_CODE["x_broadcast"], np.int8),
                        np.zeros(T * ne, bool), vals, np.full(T * ne, NO_LEVEL, np.int64))
        return Transcript.concat([shares, bc])


def _balanced(v: int, p: int) -> int:
    v %= p
    return v - p if v > p // 2 else v


def smpc_mask_and_average(s, graph, cfg: SmpcConfig, rng=None) -> SmpcRun:
    """Additive-secret-sharing average.

    Each node shares its fixed-point input with its neighbours, forms the
    masked value ``s'_i = s_i + sum_j (r_j^i - r_i^j) mod p`` and the network
    runs broadcast consensus (``z^(0) = 0``) on the masked values. Every node
    decodes ``round(n * x_i) mod p`` as a balanced residue and unscales.

    Raises
    ------
    WraparoundError
        If ``2 * sum |s_i * scale| >= p`` (the sum would not decode uniquely)
        or the consensus did not settle close enough to an integer.
    """
    inc = _as_inc(graph)
    n, p = inc.n, int(cfg.p)
    s_int = encode_fixed(s, cfg)
    if 2 * sum(abs(v) for v in s_int) >= p:
        raise WraparoundError(
            f"modulus p={p} too small for n={n}, scale={cfg.scale}, max|s|={max(map(abs, s_int)) / cfg.scale}")
    rng = np.random.default_rng(rng)
    shares, own = {}, {}
    for i in range(n):
        own[i], shares[i] = smpc_share(s_int[i] % p, inc.graph.adjacency[i], rng, p)
    masked = []
    for i in range(n):
        acc = s_int[i]
        for j in inc.graph.adjacency[i]:
            acc += shares[j][i] - shares[i][j]
        masked.append(acc % p)
    x = run_broadcast(np.array(masked, dtype=float), cfg.consensus, inc)
    final = x[-1]
    outputs = np.empty(n)
    for i in range(n):
        y = n * final[i]
        k = round(y)
        if abs(y - k) > 0.25:
            raise WraparoundError(
                f"node {i}: consensus residual {abs(y - k):.3g} too large to decode; increase t_max")
        outputs[i] = _balanced(int(k), p) / (n * cfg.scale)
    exact = _balanced(sum(s_int), p) / (n * cfg.scale)
    return SmpcRun(s_int, masked, shares, x, outputs, float(outputs[0]), exact, cfg, inc)


# --------------------------------------------------------------------------
# local differential privacy

@dataclass(frozen=True)
class DpConfig:
    """Input-perturbation mechanism and consensus parameters.

    ``mechanism`` is ``"laplace"`` (scale ``M / eps``, variance ``2 M**2 / eps**2``)
    or ``"uniform"`` (uniform on ``[-u_r/2, u_r/2]``).
    """

    mechanism: str = "laplace"
    M: float = 1.0
    eps: float = 1.0
    u_r: float = 0.1
    consensus: ConsensusConfig = field(default_factory=ConsensusConfig)

    def __post_init__(self):
        if self.mechanism == "laplace":
            if not self.M > 0:
                raise ValueError(f"M must be positive, got {self.M}")
            if not self.eps > 0:
                raise ValueError(f"eps must be positive, got {self.eps}")
        elif self.mechanism == "uniform":
            if not self.u_r > 0:
                raise ValueError(f"u_r must be positive, got {self.u_r}")
        else:
            raise ValueError(f"mechanism must be 'laplace' or 'uniform', got {self.mechanism!r}")

    @property
    def noise_variance(self) -> float:
        if self.mechanism == "laplace":
            return 2.0 * self.M ** 2 / self.eps ** 2
        return self.u_r ** 2 / 12.0

    def draw(self, rng, size):
        if self.mechanism == "laplace":
            return rng.laplace(0.0, self.M / self.eps, size)
        return rng.uniform(-self.u_r / 2, self.u_r / 2, size)


@dataclass(frozen=True, eq=False)
class DpRun:
    s: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    inc: IncidenceData = field(repr=False)

    @property
    def output(self) -> np.ndarray:
        return self.x[-1]

    @property
    def e_dp(self) -> float:
        """``(1/n) sum r_i**2``, the squared input perturbation per node."""
        return float(np.mean(self.r ** 2))

    def mse_curve(self) -> np.ndarray:
        d = self.x - self.s.mean()
        return np.einsum("ij,ij->i", d, d) / self.x.shape[1]

    @cached_property
    def transcript(self) -> Transcript:
        inc = self.inc
        T = self.x.shape[0]
        ne = 2 * inc.m
        return Transcript(np.repeat(np.arange(1, T + 1), ne), np.tile(inc.owner, T),
                          np.tile(inc.peer, T),
                          np.full(T * ne, _KIND_CODE["x_broadcast"], np.int8),
                          np.zeros(T * ne, bool), self.x[:, inc.owner].ravel(),
                          np.full(T * ne, NO_LEVEL, np.int64))


def run_dp(s, graph, cfg: DpConfig, rng=None) -> DpRun:
    """Perturb every input locally, then run broadcast consensus with ``z^(0) = 0``."""
    inc = _as_inc(graph)
    s = np.asarray(s, dtype=float)
    rng = np.random.default_rng(rng)
    r = cfg.draw(rng, inc.n)
    x = run_broadcast(s + r, cfg.consensus, inc)
    return DpRun(s, r, x, inc)
