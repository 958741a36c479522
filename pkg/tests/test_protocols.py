import csv

import numpy as np
import pytest

from adqsp import kernels
from adqsp.consensus import ConsensusConfig, run_plain
from adqsp.protocols import (NO_LEVEL, AdqspConfig, DpConfig, SaturationError, SmpcConfig,
                             Transcript, WraparoundError, adqsp_mse_floor_prediction,
                             adqsp_mse_floor_propagated, encode_fixed, replay, run_adqsp,
                             run_dp, smpc_mask_and_average, smpc_share)
from adqsp.quantizer import cell_widths, dither_table


def _adqsp(inc, theta=0.0, delta_min=0.0, t_max=200, sigma_z=100.0, **kw):
    return AdqspConfig.make(sigma_z, theta=theta, t_max=t_max, delta_min=delta_min,
                            gamma="auto", graph=inc, **kw)


def test_make_auto_gamma(inc30):
    cfg = _adqsp(inc30, theta=0.5)
    # 0.8944 + 0.005 falls below the floor of 0.95
    assert cfg.sched.gamma == 0.95
    assert cfg.sched.delta0 == 800.0
    with pytest.raises(ValueError):
        AdqspConfig.make(1.0, gamma="auto")


def test_adqsp_converges_without_floor(inc30, s30, ccfg):
    run = run_adqsp(s30, inc30, _adqsp(inc30, ccfg.theta, t_max=500), np.random.default_rng(0))
    assert run.mse_curve()[-1] < 1e-8


def test_noise_identity(inc30, s30):
    run = run_adqsp(s30, inc30, _adqsp(inc30, 0.2), np.random.default_rng(1))
    # z_hat^(t+1) - z^(t+1) equals the transmitted quantization noise
    z_prev = run.zhat(4)
    th, c = 0.2, 1.0
    x = run.x[4]
    z_next = th * z_prev + (1 - th) * (z_prev[inc30.rev] + 2 * c * inc30.sign[inc30.rev]
                                        * x[inc30.owner[inc30.rev]])
    assert np.allclose(run.zhat(5) - z_next, run.noise[4], atol=1e-9)


def test_noise_bounded_by_half_width(inc30, s30):
    run = run_adqsp(s30, inc30, _adqsp(inc30, 0.5, delta_min=1e-3), np.random.default_rng(2))
    assert run.total_saturations == 0
    assert np.all(np.abs(run.noise) <= run.widths[:, None] / 2 + 1e-12)


def test_zhat_accumulation_matches_kernel(inc30, s30):
    run = run_adqsp(s30, inc30, _adqsp(inc30), np.random.default_rng(3))
    assert np.array_equal(run.zhat(run.x.shape[0]), run.zhat_final)


def test_backends_agree_on_adqsp(inc30, s30):
    backends = kernels.available_backends()
    if len(backends) < 2:
        pytest.skip("compiled backend not built")
    cfg = _adqsp(inc30, 0.0, delta_min=1e-3)
    z0 = np.random.default_rng(4).normal(0, 100, 2 * inc30.m)
    widths = cell_widths(cfg.sched, 200)
    dith = dither_table(11, 200, 2 * inc30.m)
    args = (s30, inc30.owner, inc30.sign, inc30.rev, inc30.degrees, z0, 1.0, 0.0, widths,
            cfg.sched.half, dith)
    for a, b in zip(backends["python"].adqsp_iterate(*args),
                    backends["cython"].adqsp_iterate(*args)):
        assert np.array_equal(a, b)


def test_seed_reproducibility(inc30, s30):
    a = run_adqsp(s30, inc30, _adqsp(inc30), 42)
    b = run_adqsp(s30, inc30, _adqsp(inc30), 42)
    assert np.array_equal(a.x, b.x) and a.dither_seed == b.dither_seed


def test_transcript_layout(inc30, s30):
    run = run_adqsp(s30, inc30, _adqsp(inc30, t_max=10), np.random.default_rng(5))
    tr = run.transcript
    ne = 2 * inc30.m
    assert len(tr) == ne * 11
    init = tr.of_kind("z_init")
    assert len(init) == ne and init.secure.all() and np.all(init.t == 0)
    upd = tr.of_kind("delta_hat")
    assert not upd.secure.any() and np.all(upd.level != NO_LEVEL)
    # entry (owner|peer) is produced by the peer
    e = inc30.entry(0, 6)
    row = upd.select((upd.t == 3) & (upd.src == 6) & (upd.dst == 0))
    assert row.value[0] == run.delta_hat[2, e]


def test_replay_reproduces_run(inc30, s30):
    cfg = _adqsp(inc30, 0.2, delta_min=1e-3)
    run = run_adqsp(s30, inc30, cfg, np.random.default_rng(6))
    x, zh = replay(run.transcript, s30, inc30, cfg, dither_seed=run.dither_seed)
    assert np.array_equal(x, run.x) and np.array_equal(zh, run.zhat_final)
    with pytest.raises(ValueError):
        replay(run.transcript, s30, inc30, cfg, dither_seed=run.dither_seed + 1)


def test_transcript_csv(inc30, s30, tmp_path):
    run = run_adqsp(s30, inc30, _adqsp(inc30, t_max=2), np.random.default_rng(7))
    run.transcript.write_csv(tmp_path / "tr.csv")
    rows = list(csv.reader(open(tmp_path / "tr.csv")))
    assert rows[0] == ["t", "from", "to", "kind", "secure", "value", "level_index"]
    assert rows[1][3] == "z_init" and rows[1][4] == "1" and rows[1][6] == ""
    assert rows[-1][3] == "delta_hat" and rows[-1][4] == "0" and rows[-1][6] != ""


def test_saturation_budget(inc30, s30):
    cfg = AdqspConfig.make(1000.0, delta0=1.0, t_max=50, max_saturations=0)
    with pytest.raises(SaturationError):
        run_adqsp(s30, inc30, cfg, 0)


def test_zero_sigma_reaches_plain_limit(inc30, s30):
    cfg = AdqspConfig.make(0.0, theta=0.5, t_max=500, bits=40, gamma="auto", graph=inc30)
    run = run_adqsp(s30, inc30, cfg, 0)
    plain = run_plain(s30, ConsensusConfig(1.0, 0.5, 500), inc30)
    assert np.max(np.abs(run.x[-1] - plain[-1])) < 1e-6


def test_floor_predictions_frozen(inc30):
    cfg = AdqspConfig.make(1000.0, delta_min=0.01, gamma="auto", graph=inc30)
    assert adqsp_mse_floor_prediction(inc30, cfg) == pytest.approx(9.620069322604059e-07, rel=1e-9)
    assert adqsp_mse_floor_propagated(inc30, cfg) == pytest.approx(4.0972222222222e-06, rel=1e-6)


def test_propagated_floor_tracks_measurement(inc30, s30):
    cfg = _adqsp(inc30, 0.5, delta_min=1e-2, t_max=500, sigma_z=1000.0)
    curves = [run_adqsp(s30, inc30, cfg, seed).mse_curve()[-100:].mean() for seed in range(20)]
    assert np.mean(curves) / adqsp_mse_floor_propagated(inc30, cfg) == pytest.approx(1.0, abs=0.25)


# --------------------------------------------------------------------------
# secret sharing

def test_share_sums_to_secret():
    p = 101
    own, shares = smpc_share(42, [3, 1, 7], np.random.default_rng(0), p)
    assert sorted(shares) == [1, 3, 7]
    assert (own + sum(shares.values())) % p == 42
    assert all(0 <= r < p for r in shares.values())


def test_encode_fixed():
    assert encode_fixed([0.5, -1.25e-6], SmpcConfig()) == [500000, -1]


def test_smpc_exact_average(inc30, s30):
    cfg = SmpcConfig(consensus=ConsensusConfig(1.0, 0.0, 500))
    run = smpc_mask_and_average(s30, inc30, cfg, np.random.default_rng(0))
    assert run.output == run.exact_average
    assert np.all(run.outputs == run.exact_average)
    p = cfg.p
    assert sum(run.s_masked) % p == sum(run.s_int) % p
    assert abs(run.exact_average - s30.mean()) <= 0.5e-6


def test_smpc_transcript(inc30, s30):
    run = smpc_mask_and_average(s30, inc30, SmpcConfig(consensus=ConsensusConfig(t_max=400)), 1)
    sh = run.transcript.of_kind("share")
    assert len(sh) == 2 * inc30.m and sh.secure.all()
    assert all(isinstance(v, int) for v in sh.ivalue)
    bc = run.transcript.of_kind("x_broadcast")
    assert not bc.secure.any()


def test_smpc_wraparound(inc30):
    with pytest.raises(WraparoundError):
        smpc_mask_and_average(np.full(30, 1e3), inc30, SmpcConfig(), 0)


# --------------------------------------------------------------------------
# local DP

def test_dp_config():
    assert DpConfig("laplace", M=2.0, eps=0.5).noise_variance == 32.0
    assert DpConfig("uniform", u_r=0.6).noise_variance == pytest.approx(0.03)
    with pytest.raises(ValueError):
        DpConfig("gauss")


def test_dp_output_is_perturbed_average(inc30, s30):
    run = run_dp(s30, inc30, DpConfig("uniform", u_r=0.1), np.random.default_rng(0))
    assert np.allclose(run.output, (s30 + run.r).mean(), atol=1e-12)
    assert np.all(np.abs(run.r) <= 0.05)
    assert run.e_dp == pytest.approx(np.mean(run.r ** 2))
    assert run.transcript.of_kind("x_broadcast").value.size == 500 * 2 * inc30.m


def test_transcript_concat_keeps_integers():
    a = Transcript(np.array([0]), np.array([0]), np.array([1]), np.array([3], np.int8),
                   np.array([True]), np.array([5.0]), np.array([NO_LEVEL]), (5,))
    b = Transcript(np.array([1]), np.array([1]), np.array([0]), np.array([2], np.int8),
                   np.array([False]), np.array([0.5]), np.array([NO_LEVEL]))
    c = Transcript.concat([a, b])
    assert c.ivalue == (5, None) and len(c) == 2
