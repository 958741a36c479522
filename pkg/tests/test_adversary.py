import csv

import numpy as np
import pytest

from adqsp import adversary as adv
from adqsp.consensus import ConsensusConfig, run_plain
from adqsp.protocols import AdqspConfig, SmpcConfig, run_adqsp, smpc_mask_and_average
from adqsp.topology import from_edges, honest_partition, incidence


def test_corrupt_model_validation():
    with pytest.raises(ValueError):
        adv.CorruptModel(3, {0, 1, 2})
    with pytest.raises(ValueError):
        adv.CorruptModel(3, {5})
    assert adv.CorruptModel.all_but(4, 2).corrupt == {0, 1, 3}


def test_view_filters_secure_messages(inc30, s30):
    run = smpc_mask_and_average(s30, inc30, SmpcConfig(consensus=ConsensusConfig(t_max=400)), 0)
    model = adv.CorruptModel(30, {0})
    view = adv.collect_view(run.transcript, model, "smpc", s30)
    sh = view.messages_of("share")
    assert np.all((sh.src == 0) | (sh.dst == 0))
    assert len(view.messages_of("x_broadcast")) == len(run.transcript.of_kind("x_broadcast"))
    assert list(view.known_inputs) == [0]
    quiet = adv.collect_view(run.transcript, adv.CorruptModel(30, {0}, eavesdrop=False), "smpc")
    bc = quiet.messages_of("x_broadcast")
    assert np.all((bc.src == 0) | (bc.dst == 0))
    with pytest.raises(ValueError):
        adv.collect_view(run.transcript, model, "gossip")


def test_predicted_trajectory_matches(inc30, s30, ccfg):
    cfg = ConsensusConfig(ccfg.c, ccfg.theta, 50)
    traj = run_plain(s30, cfg, inc30)
    pred = adv.predict_trajectory(traj[0], traj[1], inc30, cfg)
    assert np.max(np.abs(pred[2:] - traj[2:])) < 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_component_sums_exact(graph30, inc30, seed):
    rng = np.random.default_rng(seed)
    s = rng.normal(size=30)
    corrupt = rng.choice(30, size=8, replace=False)
    cfg = SmpcConfig(consensus=ConsensusConfig(t_max=400))
    run = smpc_mask_and_average(s, inc30, cfg, rng)
    part = honest_partition(graph30, corrupt)
    view = adv.collect_view(run.transcript, adv.CorruptModel(30, corrupt), "smpc", s)
    got = adv.extract_component_sums(view, inc30, part, cfg)
    want = [sum(run.s_int[j] for j in comp) / cfg.scale for comp in part.components]
    assert got == want


def test_component_sums_on_cut_path():
    g = from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    s = np.array([1.0, -2.0, 3.5, 0.25, 7.0])
    cfg = SmpcConfig(consensus=ConsensusConfig(t_max=400))
    run = smpc_mask_and_average(s, g, cfg, 3)
    part = honest_partition(g, [1, 3])
    view = adv.collect_view(run.transcript, adv.CorruptModel(5, {1, 3}), "smpc", s)
    assert adv.extract_component_sums(view, g, part, cfg) == [1.0, 3.5, 7.0]


def test_component_sums_needs_smpc_view(inc30, s30, graph30):
    run = run_adqsp(s30, inc30, AdqspConfig.make(1.0, t_max=5), 0)
    view = adv.collect_view(run.transcript, adv.CorruptModel(30, {0}), "adqsp")
    with pytest.raises(ValueError):
        adv.extract_component_sums(view, inc30, honest_partition(graph30, [0]), SmpcConfig())


def test_noise_coefficient():
    # (1 + c d) / ((1 - theta) 2 c B), B = +1 for i < k
    assert adv.noise_coefficient(0, 3, 4, 1.0, 0.5) == pytest.approx(5.0)
    assert adv.noise_coefficient(3, 0, 4, 1.0, 0.0) == pytest.approx(-2.5)


def _lone_run(inc, s, theta, delta_min, target, t_max=300):
    cfg = AdqspConfig.make(100.0, theta=theta, t_max=t_max, delta_min=delta_min,
                           gamma="auto", graph=inc)
    run = run_adqsp(s, inc, cfg, np.random.default_rng(9))
    view = adv.collect_view(run.transcript, adv.CorruptModel.all_but(inc.n, target), "adqsp", s)
    return run, view


@pytest.mark.parametrize("theta", [0.0, 0.2, 0.5])
def test_noisy_reconstruction_identity(inc30, s30, theta):
    i = 3
    run, view = _lone_run(inc30, s30, theta, 1e-2, i)
    cc = run.cfg.consensus
    nbrs, vals = adv.reconstruct_noisy_trajectory(view, inc30, cc)
    for col, k in enumerate(nbrs):
        coef = adv.noise_coefficient(i, k, int(inc30.degrees[i]), cc.c, cc.theta)
        # row t uses the update with superscript t + 1, whose noise is row t
        noise = run.noise[:, inc30.entry(k, i)]
        assert np.max(np.abs(vals[:, col] - s30[i] - coef * noise)) < 1e-9
    single = adv.reconstruct_noisy_secret(view, inc30, cc, 10)
    assert single == pytest.approx(dict(zip(nbrs, vals[10])), abs=0)


def test_lone_node_recovered_without_floor(inc30, s30):
    run, view = _lone_run(inc30, s30, 0.5, 0.0, 7, t_max=500)
    rec = adv.reconstruct_noisy_secret(view, inc30, run.cfg.consensus, 498)
    assert max(abs(v - s30[7]) for v in rec.values()) < 1e-6


def test_reconstruction_preconditions(inc30, s30):
    cfg = AdqspConfig.make(1.0, t_max=5)
    run = run_adqsp(s30, inc30, cfg, 0)
    two_honest = adv.collect_view(run.transcript, adv.CorruptModel(30, set(range(2, 30))), "adqsp")
    with pytest.raises(adv.PreconditionError):
        adv.reconstruct_noisy_secret(two_honest, inc30, cfg.consensus, 1)
    view = adv.collect_view(run.transcript, adv.CorruptModel.all_but(30, 0), "adqsp")
    with pytest.raises(adv.PreconditionError):
        adv.reconstruct_noisy_secret(view, inc30, cfg.consensus, 5)
    with pytest.raises(adv.PreconditionError):
        adv.reconstruct_noisy_secret(view, inc30, cfg.consensus, 1, target=4)


def test_upper_bound_observables_two_honest():
    g = from_edges(4, [(0, 1), (0, 2), (1, 2), (1, 3), (0, 3)])
    inc = incidence(g)
    part = honest_partition(g, [2, 3])
    s = np.array([[1.0, 2.0, 0.0, 0.0]])
    z = np.arange(2 * inc.m, dtype=float)[None, :]
    obs = adv.upper_bound_observables(part, inc, 0, s, z)
    e01, e10 = inc.entry(0, 1), inc.entry(1, 0)
    assert obs.tolist() == [[1.0 - z[0, e01], 2.0 + z[0, e10], z[0, e01] - z[0, e10]]]
    si, total = adv.ideal_leakage_samples(part, s, 0)
    assert si.tolist() == [1.0] and total.tolist() == [3.0]


def test_share_observables(inc30):
    rng = np.random.default_rng(0)
    s = rng.normal(size=(4, 30))
    z = rng.normal(size=(4, 2 * inc30.m))
    obs = adv.share_observables(inc30, 0, 6, s, z, 1.0)
    assert obs.shape == (4, inc30.degrees[0])
    # last column equals the first primal iterate from z
    x1 = (s[:, 0] - sum(inc30.sign[inc30.entry(0, j)] * z[:, inc30.entry(0, j)]
                        for j in inc30.graph.adjacency[0])) / (1 + inc30.degrees[0])
    assert np.allclose(obs[:, -1], x1)


def test_attack_report(tmp_path):
    recs = [adv.AttackRecord(0, 3, "s_i", 1.5, 1.0)]
    adv.write_attack_report(tmp_path / "r.csv", recs)
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0] == ["trial", "target_node", "quantity", "reconstructed", "ground_truth",
                       "residual"]
    assert rows[1][-1] == "0.5"
