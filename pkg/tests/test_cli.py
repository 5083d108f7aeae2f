import json
from pathlib import Path

import pytest

from stochnls.cli import main
from stochnls.config import ConfigError, RunConfig, load_config, resolve

GOLDEN = Path(__file__).parent / "golden"

SMALL_LATTICE = "lattice:\n  nt: 32\n  nx: 32\n"


def run(tmp_path, *args, config=None):
    argv = list(args) + ["--out", str(tmp_path / "out")]
    if config is not None:
        path = tmp_path / "run.yaml"
        path.write_text(config)
        argv += ["--config", str(path)]
    return main(argv), tmp_path / "out"


# -- configuration ----------------------------------------------------------------------


def test_defaults():
    cfg = resolve("expand")
    assert cfg == RunConfig()
    assert cfg.lattice.nt == 128 and cfg.lattice.sign_convention == "plus"


def test_precedence(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("order: 2\nkappa: 2\nexpand:\n  order: 3\n")
    cfg = load_config("expand", str(path), {"kappa": 1})
    assert (cfg.order, cfg.kappa) == (3, 1)
    assert load_config("expect", str(path)).order == 2


def test_diagnostics_carry_positions(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("order: 2\nlattice:\n  nt: 4\n  colour: red\nsimulate:\n  n_real: 10\n")
    with pytest.raises(ConfigError) as err:
        load_config("simulate", str(path))
    msgs = err.value.messages
    assert f"{path}:3:3: lattice.nt: expected an integer >= 8, got 4" in msgs
    assert f"{path}:4:3: lattice.colour: unknown key" in msgs
    assert any(m.startswith(f"{path}:6:3: simulate.n_real") for m in msgs)


def test_syntax_error_position(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("order: [1, 2\n")
    with pytest.raises(ConfigError) as err:
        load_config("expand", str(path))
    assert str(path) + ":2:1" in err.value.messages[0]


def test_lattice_consistency_error(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("lattice:\n  T: 0.5\n")
    with pytest.raises(ConfigError) as err:
        load_config("simulate", str(path))
    assert "chi time support" in err.value.messages[0] and ":1:1:" in err.value.messages[0]


def test_config_error_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "expand", config="kappa: zero\n")
    assert code == 2
    assert "run.yaml:1:1: kappa: expected an integer" in capsys.readouterr().err
    assert main(["expand", "--config", str(tmp_path / "missing.yaml")]) == 2


# -- commands ---------------------------------------------------------------------------


def test_expand_k2_matches_golden(tmp_path):
    code, out = run(tmp_path, "expand", "--order", "2")
    assert code == 0
    assert (out / "F_2.json").read_text() == (GOLDEN / "F_2.json").read_text()
    assert "F_2 = G⊛(Φ²Ḡ⊛(Φ̄²Φ)) + 2G⊛(Φ̄ΦG⊛(Φ̄Φ²))" in (out / "expansion.txt").read_text()


def test_expand_order_zero(tmp_path):
    code, out = run(tmp_path, "expand", "--order", "0")
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == ["F_0.json", "expansion.txt", "manifest.json"]
    assert json.loads((out / "F_0.json").read_text())["pretty"] == "Phi"


def test_expand_kappa2_matches_picard(tmp_path):
    from stochnls.functional_algebra import from_json
    from stochnls.oracles import library_to_picard, picard_coefficients

    code, out = run(tmp_path, "expand", "--order", "2", "--kappa", "2")
    assert code == 0
    f2 = from_json(json.loads((out / "F_2.json").read_text())["terms"])
    assert library_to_picard(f2) == picard_coefficients(2, 2)[2]


def test_expect_all_zero(tmp_path):
    code, out = run(tmp_path, "expect", "--order", "3")
    assert code == 0
    rows = (out / "expectation.csv").read_text().splitlines()
    assert rows[0] == "order,value,is_zero" and all(r.endswith(",0,1") for r in rows[1:])


def test_correlate_order_one(tmp_path):
    code, out = run(tmp_path, "correlate", "--order", "1", config=SMALL_LATTICE)
    assert code == 0
    assert len(json.loads((out / "diagrams.json").read_text())) == 3
    assert len(list((out / "dot").glob("diagram_*.dot"))) == 3
    rows = (out / "correlate.csv").read_text().splitlines()
    assert rows[0] == "pair,diagram,lambda_power,value_re,value_im"
    assert sum(",total," in r for r in rows) == 5


def test_analyze_verdicts(tmp_path):
    code, out = run(tmp_path, "analyze", "--dim", "1", config="k_max: 4\ndot_max: 2\n")
    assert code == 0
    assert json.loads((out / "verdict.json").read_text())["subcritical"] is True
    assert (out / "dot" / "k2_1.dot").exists()
    code, out = run(tmp_path, "analyze", "--dim", "3", config="k_max: 3\n")
    assert json.loads((out / "verdict.json").read_text())["subcritical"] is False
    rows = (out / "divergence_report.csv").read_text().splitlines()[1:]
    assert all(r.split(",")[2] == str(3 * int(r.split(",")[0]) + 1) for r in rows)


def test_simulate_linear_and_manifest_roundtrip(tmp_path):
    code, out = run(tmp_path, "simulate", "--realizations", "200", "--seed", "5", config=SMALL_LATTICE)
    assert code == 0
    header = (out / "linear_estimates.csv").read_text().splitlines()[0]
    assert header == "observable,mean_re,mean_im,stderr,n"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 5 and manifest["config"]["lattice"]["nt"] == 32
    again = tmp_path / "again"
    assert main(["simulate", "--config", str(out / "manifest.json"), "--out", str(again)]) == 0
    for name in ("linear_estimates.csv", "linear_targets.csv"):
        assert (again / name).read_bytes() == (out / name).read_bytes()


def test_simulate_first_order(tmp_path):
    cfg = SMALL_LATTICE + "modes: [first_order]\n"
    code, out = run(tmp_path, "simulate", "--realizations", "100", config=cfg)
    assert code == 0
    rows = (out / "first_order_targets.csv").read_text().splitlines()
    assert rows[0] == "observable,target_re,target_im,zscore" and len(rows) == 1 + 5 * 2


def test_simulate_unknown_mode(tmp_path):
    assert run(tmp_path, "simulate", "--modes", "bogus")[0] == 2


def test_verify_subset_and_failure_exit(tmp_path, monkeypatch):
    code, out = run(tmp_path, "verify", "--criteria", "two_point", "extension")
    assert code == 0
    rows = (out / "verify.csv").read_text().splitlines()
    assert rows[0] == "criterion,status,detail" and [r.split(",")[1] for r in rows[1:]] == ["PASS", "PASS"]

    import stochnls.acceptance as acc
    broken = [acc.Criterion("two_point", "forced failure", 5, lambda: (False, "forced", {}))]
    monkeypatch.setattr(acc, "CRITERIA", broken)
    assert main(["verify", "--criteria", "two_point", "--out", str(tmp_path / "b")]) == 1


def test_verify_unknown_criterion(tmp_path):
    assert run(tmp_path, "verify", "--criteria", "nope")[0] == 2
