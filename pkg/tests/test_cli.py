import csv
import json

import pytest

from fairsel.cli import main

SMALL = ["--n", "80", "--utility", "4", "--sensitive", "4", "--noise", "4"]


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_synth_writes_csv_and_roles(tmp_path):
    out = tmp_path / "data.csv"
    assert main(["synth", *SMALL, "--data-seed", "3", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 80
    roles = json.loads((tmp_path / "data.roles.json").read_text())["roles"]
    assert len(roles) == 12
    manifest = json.loads((tmp_path / "data.manifest.json").read_text())
    assert str(out) in manifest["outputs"]


def test_select_synthetic(tmp_path):
    out = tmp_path / "sel.json"
    assert main(["select", *SMALL, "--k", "3", "--out", str(out)]) == 0
    sel = json.loads(out.read_text())
    assert len(sel["selected"]) == 3
    assert len(sel["m"]) == len(sel["g"]) == 12
    assert {"utility_term", "fairness_m_term", "fairness_g_term", "sparsity_term", "total"} == set(sel["trajectory"][0])
    manifest = json.loads((tmp_path / "sel.manifest.json").read_text())
    assert manifest["config_snapshot"]["fufs"]["k"] == 3
    assert manifest["tool_version"]
    assert manifest["wall_time_seconds"] >= 0
    assert sorted(manifest["outputs"]) == sorted([str(out), str(tmp_path / "sel.manifest.json")])


def test_select_k_too_large(tmp_path, capsys):
    assert main(["select", *SMALL, "--k", "40", "--out", str(tmp_path / "s.json")]) == 1
    assert "k=40" in capsys.readouterr().err


def test_select_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"k": 2, "alpha": 0.5, "max_iter": 7}))
    out = tmp_path / "sel.json"
    assert main(["select", *SMALL, "--config", str(cfg), "--k", "4", "--out", str(out)]) == 0
    snap = json.loads((tmp_path / "sel.manifest.json").read_text())["config_snapshot"]["fufs"]
    assert (snap["k"], snap["alpha"], snap["max_iter"]) == (4, 0.5, 7)


def test_select_bad_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json")
    assert main(["select", "--config", str(cfg), "--out", str(tmp_path / "s.json")]) == 1
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["select", "--config", str(cfg), "--out", str(tmp_path / "s.json")]) == 1


def test_select_data_errors(tmp_path):
    assert main(["select", "--data", str(tmp_path / "missing.csv"), "--protected", "p",
                 "--out", str(tmp_path / "s.json")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,p\n1,2,0\n3,x,1\n")
    assert main(["select", "--data", str(bad), "--protected", "p", "--k", "1",
                 "--out", str(tmp_path / "s.json")]) == 2


def test_select_rerun_from_manifest_is_bitwise_identical(tmp_path):
    first = tmp_path / "a.json"
    assert main(["select", *SMALL, "--k", "3", "--out", str(first)]) == 0
    second = tmp_path / "b.json"
    assert main(["select", "--manifest", str(tmp_path / "a.manifest.json"), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_select_from_csv(tmp_path):
    data = tmp_path / "d.csv"
    assert main(["synth", *SMALL, "--out", str(data)]) == 0
    out = tmp_path / "sel.json"
    assert main(["select", "--data", str(data), "--protected", "protected", "--label", "label",
                 "--k", "3", "--out", str(out)]) == 0
    # CSV route and in-memory synthetic route see the same standardized data
    out2 = tmp_path / "sel2.json"
    assert main(["select", *SMALL, "--k", "3", "--out", str(out2)]) == 0
    assert json.loads(out.read_text())["m"] == json.loads(out2.read_text())["m"]


@pytest.fixture
def selection(tmp_path):
    out = tmp_path / "sel.json"
    assert main(["select", *SMALL, "--k", "3", "--out", str(out)]) == 0
    return out


def test_evaluate_fraction_grid(tmp_path, selection):
    out = tmp_path / "eval.csv"
    assert main(["evaluate", *SMALL, "--selection", str(selection), "--restarts", "3", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 7
    assert list(rows[0]) == ["fraction", "acc", "nmi", "balance", "proportion"]
    best = json.loads((tmp_path / "eval.best.json").read_text())
    assert set(best) == {"acc", "nmi", "balance", "proportion"}
    assert best["acc"]["value"] == max(float(r["acc"]) for r in rows)
    assert best["proportion"]["value"] == min(float(r["proportion"]) for r in rows)
    reports = json.loads((tmp_path / "eval.reports.json").read_text())
    first = next(iter(reports.values()))
    assert set(first) == {"acc", "nmi", "balance", "proportion", "restarts", "per_restart"}


def test_evaluate_full_fraction_on_separable_data(tmp_path):
    flags = ["--n", "200", "--separation", "6", "--correlation", "0"]
    sel = tmp_path / "sel.json"
    assert main(["select", *flags, "--k", "5", "--out", str(sel)]) == 0
    out = tmp_path / "eval.csv"
    assert main(["evaluate", *flags, "--selection", str(sel), "--fractions", "1.0",
                 "--restarts", "5", "--out", str(out)]) == 0
    assert float(read_rows(out)[0]["acc"]) > 0.95


def test_evaluate_missing_labels(tmp_path, selection):
    data = tmp_path / "d.csv"
    assert main(["synth", *SMALL, "--out", str(data)]) == 0
    # treat the label column as a plain feature so the dataset has no labels and d=13
    rows = read_rows(data)
    nolab = tmp_path / "nolab.csv"
    with open(nolab, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([c for c in rows[0] if c != "label"])
        for r in rows:
            w.writerow([v for c, v in r.items() if c != "label"])
    assert main(["evaluate", "--data", str(nolab), "--protected", "protected", "--selection", str(selection),
                 "--metrics", "acc", "--out", str(tmp_path / "e.csv")]) == 2


def test_evaluate_dimension_mismatch(tmp_path, selection):
    assert main(["evaluate", "--n", "80", "--utility", "5", "--sensitive", "4", "--noise", "4",
                 "--selection", str(selection), "--out", str(tmp_path / "e.csv")]) == 2


def test_gradcheck_defaults(capsys):
    assert main(["gradcheck"]) == 0
    assert "max relative error" in capsys.readouterr().out


def test_gradcheck_without_fairness_or_sparsity():
    assert main(["gradcheck", "--alpha", "0", "--beta", "0"]) == 0


def test_gradcheck_coarse_epsilon_reports(capsys):
    code = main(["gradcheck", "--epsilon", "0.1"])
    assert code in (0, 3)
    if code == 3:
        assert "d" in capsys.readouterr().err


def test_sweep_rows(tmp_path):
    out = tmp_path / "sweep.csv"
    alphas = "0.001,0.01,0.1,1,10,100,1000"
    assert main(["sweep", *SMALL, "--k", "3", "--alphas", alphas, "--betas", "0.1",
                 "--restarts", "2", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 7 * 7
    keys = [(float(r["alpha"]), float(r["beta"]), float(r["fraction"])) for r in rows]
    assert keys == sorted(keys)
    assert list(rows[0])[:7] == ["alpha", "beta", "fraction", "acc", "nmi", "balance", "proportion"]


def test_sweep_parallel_matches_serial(tmp_path, monkeypatch):
    args = ["sweep", *SMALL, "--k", "3", "--alphas", "0,1", "--betas", "0.1,1", "--fractions", "0.25",
            "--restarts", "2"]
    assert main([*args, "--out", str(tmp_path / "serial.csv")]) == 0
    monkeypatch.setenv("FAIRSEL_THREADS", "2")
    assert main([*args, "--out", str(tmp_path / "par.csv")]) == 0
    assert (tmp_path / "serial.csv").read_bytes() == (tmp_path / "par.csv").read_bytes()


def test_sweep_ablation_balance(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--k", "10", "--fractions", "0.1", "--restarts", "10", "--ablate-g",
                 "--out", str(out)]) == 0
    rows = {r["variant"]: r for r in read_rows(out)}
    assert set(rows) == {"full", "ablated"}
    assert float(rows["ablated"]["balance"]) <= float(rows["full"]["balance"])


def test_sweep_empty_grid(tmp_path):
    assert main(["sweep", "--alphas", "", "--out", str(tmp_path / "s.csv")]) == 1


def test_unknown_command():
    assert main(["frobnicate"]) == 1
