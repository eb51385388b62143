import csv
import io
import json
import math

import numpy as np
import pytest

from masqkd import adversary as adv
from masqkd import cli
from masqkd import harness as hz
from masqkd.config import ConfigError, ExperimentConfig, attack_to_dict, config_from_dict, load_config
from masqkd.kinds import EfficiencyConvention, Location, ProtocolKind


def write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(data if isinstance(data, str) else json.dumps(data), encoding="utf-8")
    return p


def parse_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestLoadConfig:
    def test_minimal_defaults(self, tmp_path):
        cfg = load_config(write(tmp_path, {"protocol": "base", "n": 100, "seed": 1}), env={})
        assert cfg == ExperimentConfig(ProtocolKind.BASE, 100, 1)
        assert cfg.threshold == 0.02 and cfg.disclosure_fraction == 0.5
        assert cfg.efficiency_convention is EfficiencyConvention.FINAL_OVER_PREPARED
        assert cfg.rounds == 800

    def test_bad_disclosure(self, tmp_path):
        with pytest.raises(ConfigError, match="disclosure_fraction"):
            load_config(write(tmp_path, {"protocol": "base", "n": 1, "disclosure_fraction": 1.5}), env={})

    def test_s2_norm_violation_lists_residual(self, tmp_path):
        z = [[0, 0]] * 4
        e = [[1, 0], [0, 0], [0, 0], [0, 0]]
        data = {"protocol": "base", "n": 1,
                "attack": {"kind": "collective_s2", "params": {"v0": e, "v1": e, "w0": z, "w1": e}}}
        with pytest.raises(ConfigError) as exc:
            load_config(write(tmp_path, data), env={})
        assert any("|v0|^2 + |v1|^2 = 1" in m and "residual 1.000e+00" in m for m in exc.value.errors)

    def test_parse_error_has_line(self, tmp_path):
        with pytest.raises(ConfigError, match="line 3"):
            load_config(write(tmp_path, '{\n"protocol": "base",\n"n": ,\n}'), env={})

    @pytest.mark.parametrize("patch,field", [
        ({"protocol": "bb84"}, "protocol"),
        ({"n": 0}, "n"),
        ({"seed": -1}, "seed"),
        ({"threshold": float("nan")}, "threshold"),
        ({"efficiency_convention": "x"}, "efficiency_convention"),
        ({"bogus": 1}, "unknown config keys"),
    ])
    def test_field_errors(self, patch, field):
        with pytest.raises(ConfigError, match=field):
            config_from_dict({"protocol": "base", "n": 1, **patch}, env={})

    def test_missing_keys(self):
        with pytest.raises(ConfigError, match="protocol"):
            config_from_dict({"n": 3}, env={})

    def test_seed_precedence(self):
        data = {"protocol": "base", "n": 1, "seed": 5}
        assert config_from_dict(data, env={}).seed == 5
        assert config_from_dict(data, env={"MASQKD_SEED": "9"}).seed == 9
        assert config_from_dict(data, seed_override=11, env={"MASQKD_SEED": "9"}).seed == 11
        with pytest.raises(ConfigError):
            config_from_dict(data, env={"MASQKD_SEED": "abc"})

    def test_theta_and_undetectable_forms(self):
        cfg = config_from_dict({"protocol": "base", "n": 1, "attack": {
            "kind": "collective_s1", "params": {"theta": math.pi / 6}}}, env={})
        assert adv.predicted_case1_error(cfg.attack, cfg.protocol) == pytest.approx(0.25)
        r = 1 / math.sqrt(2)
        cfg = config_from_dict({"protocol": "improved", "n": 1, "attack": {
            "kind": "collective_s2", "location": "bob_to_tp", "params": {
                "undetectable": True, "v0": [[r, 0], 0, 0, 0], "v1": [0, [0, r], 0, 0]}}}, env={})
        assert cfg.attack.location is Location.BOB_TO_TP
        np.testing.assert_allclose(cfg.attack.arrays()["w1"], cfg.attack.arrays()["v0"])


class TestRoundTrip:
    @pytest.mark.parametrize("attack", [
        adv.AttackModel.none(),
        adv.AttackModel.intercept_resend(Location.TP_TO_ALICE, "X"),
        adv.AttackModel.s1_theta(0.3),
        adv.random_s2(np.random.default_rng(5), Location.ALICE_TO_BOB),
    ])
    def test_emit_then_load(self, tmp_path, attack):
        cfg = ExperimentConfig(ProtocolKind.BASE, 17, 2**63 + 5, attack, 0.1, 0.25,
                               EfficiencyConvention.RAW_OVER_PREPARED, "out.json")
        again = load_config(write(tmp_path, cfg.to_json()), env={})
        assert again == cfg
        assert attack_to_dict(again.attack) == attack_to_dict(attack)


class TestRunExperiment:
    def test_honest(self):
        rep = hz.run_experiment(ExperimentConfig(ProtocolKind.BASE, 1000, 7))
        assert rep["abort"] is False and rep["case1_error_rate"] == 0
        assert sum(rep["case_counts"].values()) == 8000
        assert rep["final_key"]["length"] == rep["remaining_length"]

    def test_key_order(self):
        rep = hz.run_experiment(ExperimentConfig(ProtocolKind.KRAWEC, 10, 7))
        assert list(rep) == ["config", "rounds", "case_counts", "case1_errors", "case1_error_rate", "case2",
                             "sifted_length", "disclosed_count", "remaining_length", "abort", "qber",
                             "key_rate_estimate", "final_key", "efficiency", "eve", "wall_time_s"]

    def test_s1_quarter(self):
        cfg = ExperimentConfig(ProtocolKind.BASE, 1000, 7, adv.AttackModel.s1_theta(math.pi / 6))
        rep = hz.run_experiment(cfg)
        n1 = rep["case_counts"]["case1"]
        assert abs(rep["case1_error_rate"] - 0.25) <= 4 * math.sqrt(0.25 * 0.75 / n1)
        assert rep["abort"] is True and rep["final_key"]["length"] == 0

    def test_json_reproducible(self):
        cfg = ExperimentConfig(ProtocolKind.IMPROVED, 500, 3, adv.random_s2(np.random.default_rng(2)))
        a = hz.report_json(hz.run_experiment(cfg), include_wall_time=False)
        b = hz.report_json(hz.run_experiment(cfg, workers=4), include_wall_time=False)
        assert a == b
        assert "wall_time_s" not in a

    def test_eve_accuracy_near_helstrom(self):
        cfg = ExperimentConfig(ProtocolKind.BASE, 5000, 1, adv.AttackModel.s1_theta(0.5), threshold=1.0)
        eve = hz.run_experiment(cfg)["eve"]
        n = eve["guess_rounds"]
        p = eve["helstrom_success"]
        assert abs(eve["guess_accuracy"] - p) <= 4 * math.sqrt(p * (1 - p) / n)


class TestSweep:
    def test_theta(self):
        base = ExperimentConfig(ProtocolKind.BASE, 200, 1, adv.AttackModel.s1_theta(0.0))
        rows = hz.sweep_rows(base, "attack.params.theta", [0, math.pi / 8, math.pi / 4])
        pred = [r["predicted_case1_error"] for r in rows]
        np.testing.assert_allclose(pred, [0, math.sin(math.pi / 8) ** 2, 0.5], atol=1e-12)
        assert rows[0]["case1_error_rate"] == 0

    def test_empty_grid(self):
        text = hz.sweep(ExperimentConfig(ProtocolKind.BASE, 10, 1), "n", [])
        assert text == ",".join(hz.SWEEP_COLUMNS) + "\r\n"

    def test_n_honest(self):
        rows = parse_csv(hz.sweep(ExperimentConfig(ProtocolKind.BASE, 10, 1), "n", [10, 100, 1000]))
        assert [r["n"] for r in rows] == ["10", "100", "1000"]
        assert all(float(r["case1_error_rate"]) == 0 for r in rows)

    def test_columns_stable(self):
        a = hz.sweep(ExperimentConfig(ProtocolKind.BASE, 10, 1), "threshold", [0.1]).splitlines()[0]
        b = hz.sweep(ExperimentConfig(ProtocolKind.BASE, 10, 1), "seed", [3]).splitlines()[0]
        assert a == b

    @pytest.mark.parametrize("path", ["attack.params.theta", "nothing", "config.n.x"])
    def test_unresolvable(self, path):
        with pytest.raises(ConfigError):
            hz.sweep_rows(ExperimentConfig(ProtocolKind.BASE, 10, 1), path, [1])


class TestCompare:
    def test_table(self):
        rows = {r["protocol"]: r for r in hz.compare_protocols(2000, 1)}
        assert rows["base"]["eta_final_over_prepared"] == pytest.approx(1 / 12, rel=0.10)
        assert rows["improved"]["eta_final_over_prepared"] == pytest.approx(1 / 12, rel=0.10)
        assert rows["krawec"]["eta_raw_over_prepared"] == pytest.approx(1 / 24, rel=0.15)
        assert rows["base"]["closest_convention"] == "final_over_prepared"
        assert rows["krawec"]["closest_convention"] == "raw_over_prepared"
        liu = rows["liu"]
        assert liu["simulated"] is False and liu["published_eta"] == "1/8"
        assert liu["eta_raw_over_prepared"] is None


class TestCli:
    def cfg(self, tmp_path, **extra):
        return str(write(tmp_path, {"protocol": "base", "n": 50, "seed": 3, **extra}))

    def test_run_ok(self, tmp_path, capsys):
        assert cli.main(["run", self.cfg(tmp_path)]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["config"]["seed"] == 3 and rep["abort"] is False

    def test_run_out_and_seed(self, tmp_path):
        out = tmp_path / "r.json"
        assert cli.main(["run", self.cfg(tmp_path), "--seed", "12", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["config"]["seed"] == 12

    def test_env_seed(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("MASQKD_SEED", "44")
        cli.main(["run", self.cfg(tmp_path)])
        assert json.loads(capsys.readouterr().out)["config"]["seed"] == 44

    def test_abort_exit(self, tmp_path, capsys):
        attack = {"kind": "intercept_resend", "location": "alice_to_bob", "params": {"basis": "Z"}}
        path = self.cfg(tmp_path, attack=attack)
        assert cli.main(["run", path]) == 1
        assert cli.main(["run", path, "--abort-exit", "0"]) == 0

    def test_config_error(self, tmp_path, capsys):
        assert cli.main(["run", self.cfg(tmp_path, n=-1)]) == 2
        assert "n: must be" in capsys.readouterr().err
        assert cli.main(["run", str(tmp_path / "missing.json")]) == 2

    def test_sweep(self, tmp_path, capsys):
        path = self.cfg(tmp_path, attack={"kind": "collective_s1", "params": {"theta": 0}})
        assert cli.main(["sweep", path, "--param", "attack.params.theta", "--grid", "0,0.3"]) == 0
        rows = parse_csv(capsys.readouterr().out)
        assert [float(r["value"]) for r in rows] == [0, 0.3]
        assert cli.main(["sweep", path, "--param", "nope", "--grid", "1"]) == 2

    def test_compare(self, tmp_path):
        out = tmp_path / "c.csv"
        assert cli.main(["compare", "--n", "100", "--seed", "2", "--out", str(out)]) == 0
        rows = parse_csv(out.read_text())
        assert [r["protocol"] for r in rows] == ["base", "improved", "krawec", "liu"]

    def test_attack_check(self, tmp_path, capsys):
        ok = write(tmp_path, {"kind": "collective_s1", "params": {"theta": 0.4}}, "a.json")
        assert cli.main(["attack-check", str(ok)]) == 0
        res = json.loads(capsys.readouterr().out)
        assert res["valid"] and res["predicted_case1_error"] == pytest.approx(math.sin(0.4) ** 2)
        bad = write(tmp_path, {"kind": "intercept_resend", "location": "bob_to_tp"}, "b.json")
        assert cli.main(["attack-check", str(bad)]) == 2
        assert cli.main(["attack-check", str(bad), "--protocol", "improved"]) == 0
        worse = write(tmp_path, {"kind": "none", "protocol": "bb84"}, "c.json")
        assert cli.main(["attack-check", str(worse)]) == 2

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["sweep"])
        assert exc.value.code == 2
