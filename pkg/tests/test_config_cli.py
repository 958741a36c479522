import json

import pytest

from adqsp import cli
from adqsp.config import DEFAULTS, ConfigError, config_hash, load_config


def _write(tmp_path, doc):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(path)


def test_defaults_resolve_trials():
    cfg = load_config(overrides={"experiment": "attack-verify"})
    assert cfg["trials"] == 100
    assert load_config()["trials"] == 2000
    assert DEFAULTS["trials"] is None


def test_nested_merge(tmp_path):
    cfg = load_config(_write(tmp_path, {"consensus": {"theta": 0.5}}), {"seed": 4})
    assert cfg["consensus"] == {"c": 1.0, "theta": 0.5, "t_max": 500}
    assert cfg["seed"] == 4


@pytest.mark.parametrize("doc, field", [
    ({"nope": 1}, "nope"),
    ({"consensus": {"bogus": 1}}, "consensus.bogus"),
    ({"consensus": 3}, "consensus"),
    ({"consensus": {"theta": 1.0}}, "consensus.theta"),
    ({"consensus": {"c": -1}}, "consensus.c"),
    ({"n": 1}, "n"),
    ({"trials": 0}, "trials"),
    ({"adqsp": {"gamma": 1.5}}, "adqsp.gamma"),
    ({"adqsp": {"bits": 2.5}}, "adqsp.bits"),
    ({"dp": {"mechanism": "gauss"}}, "dp.mechanism"),
    ({"corrupt": {"mode": "explicit", "value": [0, 99]}}, "corrupt.value"),
    ({"grids": {"theta": [0.0, 1.0]}}, "grids.theta"),
    ({"grids": {"u_r": []}}, "grids.u_r"),
    ({"experiment": "nope"}, "experiment"),
    ({"seed": True}, "seed"),
])
def test_validation_names_field(tmp_path, doc, field):
    with pytest.raises(ConfigError) as exc:
        load_config(_write(tmp_path, doc))
    assert exc.value.field == field


def test_bad_json(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "{not json"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "[1, 2]"))


def test_config_hash_stable():
    a = load_config()
    b = load_config()
    assert config_hash(a) == config_hash(b)
    b["seed"] = 1
    assert config_hash(a) != config_hash(b)


def test_cli_config_error_exit(tmp_path, capsys):
    code = cli.main(["convergence", "--config", _write(tmp_path, {"n": 0}),
                     "--out", str(tmp_path / "o")])
    assert code == 2
    assert "n:" in capsys.readouterr().err
    assert cli.main(["convergence", "--config", str(tmp_path / "missing.json")]) == 2


def test_cli_unknown_experiment():
    with pytest.raises(SystemExit) as exc:
        cli.main(["bogus"])
    assert exc.value.code == 2


SMALL = {"consensus": {"t_max": 60}, "grids": {"u_r": [0.1], "nmi_every": 20}}


def test_cli_outputs_and_manifest(tmp_path, capsys):
    out = tmp_path / "o"
    code = cli.main(["dp-compare", "--config", _write(tmp_path, SMALL), "--trials", "6",
                     "--seed", "3", "--out", str(out)])
    assert code in (0, 3)
    names = sorted(p.name for p in out.iterdir())
    assert names == ["checks.csv", "estimates.csv", "fig4_mse.csv", "fig4_summary.csv",
                     "fig5_nmi.csv", "manifest.json"]
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 3 and man["trials"] == 6
    assert set(man["outputs"]) == set(names) - {"manifest.json"}
    assert "workers" not in man["config"]
    assert man["versions"]["kernel_backend"] in ("cython", "python")
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(ln.split()[0] in ("PASS", "FAIL") for ln in lines)
    assert code == (0 if all(c["passed"] for c in man["checks"]) else 3)


def test_outputs_independent_of_worker_count(tmp_path):
    cfg = _write(tmp_path, SMALL)
    hashes = []
    for w in (1, 2):
        out = tmp_path / f"w{w}"
        cli.main(["dp-compare", "--config", cfg, "--trials", "6", "--workers", str(w),
                  "--out", str(out)])
        hashes.append(json.loads((out / "manifest.json").read_text())["outputs"])
    assert hashes[0] == hashes[1]


def test_same_seed_same_bytes(tmp_path):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        cli.main(["attack-verify", "--trials", "2", "--out", str(out)])
        outs.append((out / "attack_report.csv").read_bytes())
    assert outs[0] == outs[1]
