"""Adversary views and the reconstruction attacks that run on them.

Attacks take an :class:`AdversaryView` plus public parameters (graph,
configs) and never the simulator's ground truth; comparisons against the
truth live in the tests and in the harness's verification experiment.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .consensus import ConsensusConfig
from .protocols import SmpcConfig, Transcript, _balanced
from .topology import HonestPartition, IncidenceData, incidence

__all__ = [
    "CorruptModel",
    "AdversaryView",
    "PreconditionError",
    "collect_view",
    "predict_trajectory",
    "extract_component_sums",
    "reconstruct_noisy_secret",
    "reconstruct_noisy_trajectory",
    "noise_coefficient",
    "ideal_leakage_samples",
    "upper_bound_observables",
    "share_observables",
    "AttackRecord",
    "write_attack_report",
]

PROTOCOLS = ("adqsp", "smpc", "dp")


class PreconditionError(ValueError):
    """The attack's assumptions about the corrupt set do not hold."""


@dataclass(frozen=True)
class CorruptModel:
    """Corrupt node set ``V_c`` of an ``n``-node network and whether every
    public channel is eavesdropped."""

    n: int
    corrupt: frozenset
    eavesdrop: bool = True

    def __post_init__(self):
        object.__setattr__(self, "corrupt", frozenset(int(c) for c in self.corrupt))
        if any(not 0 <= c < self.n for c in self.corrupt):
            raise ValueError("corrupt node out of range")
        if len(self.corrupt) >= self.n:
            raise ValueError("at least one node must be honest")

    @classmethod
    def all_but(cls, n: int, i: int, eavesdrop: bool = True) -> "CorruptModel":
        return cls(n, frozenset(range(n)) - {i}, eavesdrop)


@dataclass(frozen=True)
class AdversaryView:
    """What the pooled adversary holds: the corrupt nodes' inputs and every
    message it could read."""

    protocol: str
    model: CorruptModel
    known_inputs: dict = field(repr=False)
    messages: Transcript = field(repr=False)

    def messages_of(self, kind: str) -> Transcript:
        return self.messages.of_kind(kind)


def collect_view(transcript: Transcript, model: CorruptModel, protocol: str,
                 inputs=None) -> AdversaryView:
    """Filter a transcript down to the adversary's observations.

    A message is visible when it touches a corrupt node, or when it is
    public and the model eavesdrops. ``inputs`` supplies the true data from
    which only the corrupt nodes' entries are copied.
    """
    if protocol not in PROTOCOLS:
        raise ValueError(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")
    corrupt = np.zeros(model.n, dtype=bool)
    corrupt[list(model.corrupt)] = True
    touches = corrupt[transcript.src] | corrupt[transcript.dst]
    visible = touches | (~transcript.secure & model.eavesdrop)
    known = {}
    if inputs is not None:
        inputs = np.asarray(inputs)
        known = {j: inputs[j] for j in sorted(model.corrupt)}
    return AdversaryView(protocol, model, known, transcript.select(visible))


# --------------------------------------------------------------------------
# unquantized consensus: trajectory prediction and the bijection attack

def predict_trajectory(x1, x2, graph, cfg: ConsensusConfig, t_max: int | None = None):
    """Extrapolate an unperturbed consensus run from its first two iterates.

    Uses ``x^(t+3) = 2 theta x^(t+2) - (2 theta - 1) x^(t+1)
    - [2c(1-theta)/(1+c d_i)] sum_j ((1-theta) x_i^(t+1) + theta x_j^(t+1) - x_j^(t+2))``.

    Returns
    -------
    ndarray, shape (t_max, n)
        Row ``t`` is ``x^(t+1)``; the first two rows are the inputs.
    """
    inc = graph if isinstance(graph, IncidenceData) else incidence(graph)
    t_max = cfg.t_max if t_max is None else t_max
    c, th = cfg.c, cfg.theta
    n = inc.n
    deg = inc.degrees.astype(float)
    k = 2.0 * c * (1.0 - th) / (1.0 + c * deg)
    out = np.empty((t_max, n))
    out[0], out[1] = x1, x2
    for t in range(2, t_max):
        a, b = out[t - 2], out[t - 1]
        nb_a = np.bincount(inc.owner, weights=a[inc.peer], minlength=n)
        nb_b = np.bincount(inc.owner, weights=b[inc.peer], minlength=n)
        coupling = (1.0 - th) * deg * a + th * nb_a - nb_b
        out[t] = 2.0 * th * b - (2.0 * th - 1.0) * a - k * coupling
    return out


def _first_broadcasts(view: AdversaryView, n: int) -> dict:
    bc = view.messages_of("x_broadcast")
    first = bc.select(bc.t == 1)
    return {int(src): float(v) for src, v in zip(first.src, first.value)}


def extract_component_sums(view: AdversaryView, graph, partition: HonestPartition,
                           cfg: SmpcConfig) -> list[float]:
    """Honest-component input sums recovered from a secret-sharing run.

    Every masked input is ``s'_j = (1 + c d_j) x_j^(1)`` because the
    consensus starts from ``z = 0``. Masks on edges inside a component
    cancel in the sum; masks on edges to corrupt nodes are shares the
    adversary has seen and subtracts.

    Raises
    ------
    PreconditionError
        If the first iterate of some honest node is not in the view.
    """
    inc = graph if isinstance(graph, IncidenceData) else incidence(graph)
    if view.protocol != "smpc":
        raise ValueError("extract_component_sums needs a secret-sharing view")
    p = int(cfg.p)
    c = cfg.consensus.c
    x1 = _first_broadcasts(view, inc.n)
    sh = view.messages_of("share")
    seen = {(int(a), int(b)): int(v) for a, b, v in zip(sh.src, sh.dst, sh.ivalue)}
    out = []
    for comp in partition.components:
        acc = 0
        for j in comp:
            if j not in x1:
                raise PreconditionError(f"x_{j}^(1) is not observable")
            acc += int(round((1.0 + c * inc.degrees[j]) * x1[j]))
            for l in partition.corrupt_neighbors(j):
                acc -= seen[(l, j)] - seen[(j, l)]
        out.append(_balanced(acc, p) / cfg.scale)
    return out


# --------------------------------------------------------------------------
# quantized protocol: noisy reconstruction of a lone honest node's input

def noise_coefficient(i: int, k: int, degree: int, c: float, theta: float) -> float:
    """``c_{i,k} = (1 + c d_i) / ((1 - theta) 2c B_{i|k})``."""
    b = IncidenceData.edge_weight(i, k)
    return (1.0 + c * degree) / ((1.0 - theta) * 2.0 * c * b)


def _incident_history(view: AdversaryView, inc: IncidenceData, i: int):
    """Initial values and per-step quantized updates on every entry at ``i``.

    Returns ``(nbrs, entries, z0, delta)`` where ``entries`` lists the directed
    entries ``(i|k)`` and ``(k|i)`` for each neighbour ``k`` in order,
    ``z0`` their initial values and ``delta[t]`` their updates with
    superscript ``t + 1``.
    """
    nbrs = sorted(inc.graph.adjacency[i])
    entries = np.array([inc.entry(a, b) for k in nbrs for a, b in ((i, k), (k, i))], dtype=np.int64)
    col = np.full(2 * inc.m, -1, dtype=np.int64)
    col[entries] = np.arange(entries.size)
    init = view.messages_of("z_init")
    e_init = np.array([inc.entry(int(a), int(b)) for a, b in zip(init.src, init.dst)],
                      dtype=np.int64)
    z0 = np.full(entries.size, np.nan)
    if len(init):
        hit = col[e_init] >= 0
        z0[col[e_init[hit]]] = init.value[hit]
    if np.isnan(z0).any():
        raise PreconditionError("initial auxiliary values on edges at the target are not observable")
    upd = view.messages_of("delta_hat")
    touching = (upd.src == i) | (upd.dst == i)
    upd = upd.select(touching)
    T = int(upd.t.max()) if len(upd) else 0
    delta = np.full((T, entries.size), np.nan)
    e_upd = np.array([inc.entry(int(d), int(s)) for d, s in zip(upd.dst, upd.src)], dtype=np.int64)
    if len(upd):
        delta[upd.t - 1, col[e_upd]] = upd.value
    return nbrs, entries, z0, delta


def _reconstruct_rows(nbrs, z0, delta, i, degree, cfg: ConsensusConfig, steps):
    c, th = cfg.c, cfg.theta
    b = np.array([IncidenceData.edge_weight(i, k) for k in nbrs], dtype=float)
    out = np.empty((len(steps), len(nbrs)))
    zh = z0.copy()
    done = 0
    for row, t in enumerate(steps):
        while done < t:
            zh = zh + delta[done]
            done += 1
        z_ik, z_ki = zh[0::2], zh[1::2]
        nxt = delta[t, 1::2]
        if np.isnan(nxt).any() or np.isnan(zh).any():
            raise PreconditionError(f"no quantized update at step {t + 1} in the view")
        resid = float(b @ z_ik)
        lk = (z_ki - z_ik) / (2.0 * c * b) + nxt / (2.0 * c * b * (1.0 - th))
        out[row] = (1.0 + c * degree) * lk + resid
    return out


def _lone_honest(view: AdversaryView, inc: IncidenceData, target):
    if view.protocol != "adqsp":
        raise ValueError("reconstruct_noisy_secret needs an ADQSP view")
    honest = sorted(set(range(inc.n)) - view.model.corrupt)
    if len(honest) != 1 or (target is not None and honest != [target]):
        raise PreconditionError("the target must be the only honest node")
    return honest[0]


def reconstruct_noisy_secret(view: AdversaryView, graph, cfg: ConsensusConfig, t: int,
                             target: int | None = None) -> dict:
    """Recover ``s_i + c_{i,k} n_{k|i}^(t+1)`` for every neighbour ``k`` of the
    only honest node ``i``.

    The update node ``i`` sent to ``k`` pins down ``x_i^(t+1)`` up to the
    quantization noise, and the primal update ties ``x_i^(t+1)`` to ``s_i``
    through the reconstructions on ``i``'s edges, all of which the corrupt
    neighbours hold.

    Parameters
    ----------
    view : AdversaryView
        ADQSP view with every node but ``i`` corrupt.
    graph : Graph or IncidenceData
    cfg : ConsensusConfig
        Public step and averaging constants.
    t : int
        Iteration; uses ``z_hat^(t)`` and ``Delta z_hat^(t+1)``.
    target : int, optional
        The honest node; inferred from the view when omitted.

    Returns
    -------
    dict
        Neighbour ``k`` to reconstructed value.
    """
    inc = graph if isinstance(graph, IncidenceData) else incidence(graph)
    i = _lone_honest(view, inc, target)
    nbrs, _, z0, delta = _incident_history(view, inc, i)
    if not 0 <= t < delta.shape[0]:
        raise PreconditionError(f"no quantized update at step {t + 1} in the view")
    row = _reconstruct_rows(nbrs, z0, delta, i, int(inc.degrees[i]), cfg, [t])[0]
    return dict(zip(nbrs, row.tolist()))


def reconstruct_noisy_trajectory(view: AdversaryView, graph, cfg: ConsensusConfig,
                                 target: int | None = None):
    """:func:`reconstruct_noisy_secret` for every step at once.

    Returns
    -------
    nbrs : list of int
    values : ndarray, shape (t_max, d_i)
        Row ``t`` holds the reconstructions using ``Delta z_hat^(t+1)``.
    """
    inc = graph if isinstance(graph, IncidenceData) else incidence(graph)
    i = _lone_honest(view, inc, target)
    nbrs, _, z0, delta = _incident_history(view, inc, i)
    vals = _reconstruct_rows(nbrs, z0, delta, i, int(inc.degrees[i]), cfg, range(delta.shape[0]))
    return nbrs, vals


# --------------------------------------------------------------------------
# Monte Carlo observables for the information bounds

def ideal_leakage_samples(partition: HonestPartition, s_samples, i: int):
    """Pairs ``(S_i, sum of S_j over the honest component holding i)``."""
    s_samples = np.asarray(s_samples, dtype=float)
    comp = list(partition.component_of(i))
    return s_samples[:, i], s_samples[:, comp].sum(axis=1)


def upper_bound_observables(partition: HonestPartition, inc: IncidenceData, i: int,
                            s_samples, z_samples):
    """Observable tuple bounding what the adversary learns about node ``i``.

    Columns are ``S_j - sum_{k in N_{j,h}} B_{j|k} Z_{j|k}`` for every ``j``
    in ``i``'s honest component, then ``Z_{j|k} - Z_{k|j}`` for every honest
    edge ``j < k`` inside it.

    Parameters
    ----------
    s_samples : ndarray, shape (N, n)
    z_samples : ndarray, shape (N, 2m)
        Initial auxiliary values per sample.
    """
    s_samples = np.asarray(s_samples, dtype=float)
    z_samples = np.asarray(z_samples, dtype=float)
    comp = partition.component_of(i)
    cols = []
    for j in comp:
        acc = s_samples[:, j].copy()
        for k in sorted(partition.honest_neighbors(j)):
            acc -= IncidenceData.edge_weight(j, k) * z_samples[:, inc.entry(j, k)]
        cols.append(acc)
    members = set(comp)
    for a, b in partition.honest_edges:
        if a in members:
            cols.append(z_samples[:, inc.entry(a, b)] - z_samples[:, inc.entry(b, a)])
    return np.column_stack(cols)


def share_observables(inc: IncidenceData, i: int, k: int, s_samples, z_samples, c: float):
    """``({Z_{i|j}}_{j != k}, X_i^(1))``: all of node ``i``'s perturbation
    shares but the one on edge ``(i, k)``, plus its first primal iterate."""
    s_samples = np.asarray(s_samples, dtype=float)
    z_samples = np.asarray(z_samples, dtype=float)
    nbrs = sorted(inc.graph.adjacency[i])
    ents = [inc.entry(i, j) for j in nbrs]
    acc = s_samples[:, i] - sum(inc.sign[e] * z_samples[:, e] for e in ents)
    x1 = acc / (1.0 + c * len(nbrs))
    others = [z_samples[:, inc.entry(i, j)] for j in nbrs if j != k]
    return np.column_stack(others + [x1])


# --------------------------------------------------------------------------
# reports

@dataclass(frozen=True)
class AttackRecord:
    trial: int
    target_node: int
    quantity: str
    reconstructed: float
    ground_truth: float

    @property
    def residual(self) -> float:
        return self.reconstructed - self.ground_truth


def write_attack_report(path, records: Iterable[AttackRecord]) -> None:
    """CSV ``trial, target_node, quantity, reconstructed, ground_truth, residual``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "target_node", "quantity", "reconstructed", "ground_truth", "residual"])
        for r in records:
            w.writerow([r.trial, r.target_node, r.quantity, repr(float(r.reconstructed)),
                        repr(float(r.ground_truth)), repr(float(r.residual))])
