import csv
import json
from pathlib import Path

import numpy as np
import pytest

from groupcart import config as config_mod
from groupcart.cli import main
from groupcart.data import Dataset, SplitPlan, make_synthetic_biased, min_max_scale, split
from groupcart.ensemble import EnsembleConfig, EnsembleModel
from groupcart.errors import ConfigError
from groupcart.experiment import compare, sweep
from groupcart.metrics import evaluate
from groupcart.tree import WeightConfig, fit

SYNTH = "synthetic:n=600,bias=0.4,seed=1"


def read_tree(directory: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_synth(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["synth", "--n", "300", "--bias", "0.2", "--seed", "4", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["A", "x1", "x2", "x3", "x4", "y"]
    assert len(rows) == 301


def test_train_bundle(tmp_path, capsys):
    out = tmp_path / "m"
    assert main(["train", "--data", SYNTH, "--ensemble-size", "5", "--seed", "1", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["n"] == 5 and len(manifest["trees"]) == 5
    assert set(manifest["frontier_ids"]) <= set(range(5))
    assert manifest["lambdas"] == [repr(i / 5) for i in range(1, 6)]
    lines = (out / "frontier.csv").read_text().splitlines()
    assert lines[0].startswith("id,lambda,alpha,frontier,accuracy,f1,aod,di,norm_accuracy")
    assert len(lines) == 6
    again = tmp_path / "m2"
    main(["train", "--data", SYNTH, "--ensemble-size", "5", "--seed", "1", "--out", str(again)])
    assert read_tree(out) == read_tree(again)


def test_train_adaboost(tmp_path, capsys):
    out = tmp_path / "m"
    assert main(["train", "--data", SYNTH, "--ensemble-size", "4", "--mode", "adaboost", "--out", str(out)]) == 0
    model, _ = EnsembleModel.load(out)
    assert model.voting == "weighted" and all(m.alpha is not None for m in model.members)


def test_missing_protected_column(tmp_path, capsys):
    data = tmp_path / "d.csv"
    data.write_text("x,y\n" + "".join(f"{i},{i % 2}\n" for i in range(20)))
    code = main(["train", "--data", str(data), "--target", "y", "--favorable", "1",
                 "--protected", "sex=m:f", "--out", str(tmp_path / "m")])
    assert code == 2
    assert "'sex'" in capsys.readouterr().err


def test_evaluate_bundle_and_csv(tmp_path, capsys):
    model_dir = tmp_path / "m"
    main(["train", "--data", SYNTH, "--ensemble-size", "4", "--out", str(model_dir)])
    capsys.readouterr()
    assert main(["evaluate", "--model", str(model_dir)]) == 0
    text = capsys.readouterr().out
    assert "held-out test split" in text and "120 rows" in text
    header = (model_dir / "evaluation.csv").read_text().splitlines()[0]
    assert header == "protected,accuracy,precision,recall,f1,aod,eod,spd,di,fr,d2h"

    csv_path = tmp_path / "s.csv"
    main(["synth", "--n", "600", "--bias", "0.4", "--seed", "1", "--out", str(csv_path)])
    assert main(["evaluate", "--model", str(model_dir), "--data", str(csv_path), "--target", "y",
                 "--favorable", "1", "--protected", "A=1:0", "--out", str(tmp_path / "e")]) == 0
    assert "600 rows" in (tmp_path / "e" / "evaluation.txt").read_text()


def test_evaluate_schema_mismatch(tmp_path, capsys):
    model_dir = tmp_path / "m"
    main(["train", "--data", SYNTH, "--ensemble-size", "2", "--out", str(model_dir)])
    other = tmp_path / "o.csv"
    other.write_text("A,z,y\n" + "".join(f"{i % 2},{i},{i % 3 == 0:d}\n" for i in range(30)))
    code = main(["evaluate", "--model", str(model_dir), "--data", str(other), "--target", "y",
                 "--favorable", "1", "--protected", "A=1:0"])
    assert code == 2
    assert "schema mismatch" in capsys.readouterr().err


def test_evaluate_perfect_predictor(tmp_path, capsys):
    from groupcart.ensemble import Member, objective_specs
    from groupcart.tree import FairTree, Internal, Leaf, TreeHyper, WeightConfig

    data = tmp_path / "p.csv"
    data.write_text("A,x,y\n" + "0,0,0\n0,1,1\n1,0,0\n1,1,1\n" * 5)
    cfg = config_mod.build({}, {"data": str(data), "target": "y", "favorable": "1", "protected": ["A=1:0"]})
    tree = FairTree(Internal("x", 0.5, Leaf(0, 0.0, 10), Leaf(1, 1.0, 10), 1.0, 1, 20), WeightConfig(), TreeHyper(), ("A", "x"))
    specs = objective_specs(("accuracy", "f1", "aod", "di"), ["A"])
    model = EnsembleModel((Member(tree, 0.5, (1.0, 1.0, 0.0, 0.0)),), (0,), "majority", specs, ("A",))
    meta = {"data": cfg.declarations(), "feature_names": ["A", "x"], "scale_min": ["0.0", "0.0"], "scale_max": ["1.0", "1.0"]}
    model.save(tmp_path / "m", meta)
    assert main(["evaluate", "--model", str(tmp_path / "m"), "--data", str(data)]) == 0
    row = capsys.readouterr().out.strip().splitlines()[-1].split()
    assert row == ["A", "100.0", "100.0", "100.0", "100.0", "0.0", "0.0", "0.0", "0.0", "0.0", "0.000"]


def run_compare(tmp_path, name, *extra):
    out = tmp_path / name
    code = main(["compare", "--data", SYNTH, "--repeats", "3", "--ensemble-size", "4", "--out", str(out), *extra])
    assert code == 0
    return out


def test_compare_reports_and_determinism(tmp_path, capsys):
    a = run_compare(tmp_path, "a", "cart", "groupcart")
    b = run_compare(tmp_path, "b", "cart", "groupcart")
    assert sorted(p.name for p in a.iterdir()) == ["cells_synthetic.csv", "medians_synthetic_A.csv", "report_synthetic_A.txt"]
    assert read_tree(a) == read_tree(b)
    c = run_compare(tmp_path, "c", "cart", "groupcart", "--jobs", "2")
    assert read_tree(a) == read_tree(c)


def test_compare_medians_match_cells(tmp_path, capsys):
    out = run_compare(tmp_path, "a", "cart", "groupcart")
    cells = list(csv.DictReader((out / "cells_synthetic.csv").open()))
    medians = list(csv.DictReader((out / "medians_synthetic_A.csv").open()))
    for row in medians:
        values = [float(c["value"]) for c in cells if c["method"] == row["method"] and c["metric"] == row["metric"]]
        assert len(values) == 3
        assert float(row["median"]) == float(np.median(values))


def test_compare_single_method_all_rank_one(tmp_path, capsys):
    out = run_compare(tmp_path, "a", "cart")
    ranks = {r["rank"] for r in csv.DictReader((out / "medians_synthetic_A.csv").open())}
    assert ranks == {"1"}


def test_compare_aliases_identical(tmp_path, capsys):
    out = run_compare(tmp_path, "a", "groupcart@one", "groupcart@two")
    rows = list(csv.DictReader((out / "medians_synthetic_A.csv").open()))
    one = {r["metric"]: (r["median"], r["rank"]) for r in rows if r["method"] == "groupcart@one"}
    two = {r["metric"]: (r["median"], r["rank"]) for r in rows if r["method"] == "groupcart@two"}
    assert one == two


def test_compare_spd_direction():
    d = make_synthetic_biased(3000, 0.4, 0)
    rep = compare(d, SplitPlan(seed=0, repeats=5), EnsembleConfig(size_n=10), ("cart", "groupcart"))
    assert rep.median("groupcart", "spd", "A") <= rep.median("cart", "spd", "A")


def test_shared_splits_across_methods():
    d = make_synthetic_biased(500, 0.4, 0)
    plan = SplitPlan(seed=9, repeats=3)
    rep = compare(d, plan, EnsembleConfig(size_n=3), ("groupcart", "cart"))
    scaled = min_max_scale(d)
    for r in range(3):
        train, _, test = split(scaled, plan, r)
        tree = fit(train, WeightConfig())
        assert rep.cells[(r, "cart")].report == evaluate(tree, test, ["A"])


def test_sweep(tmp_path, capsys):
    out = tmp_path / "s"
    assert main(["sweep", "--data", SYNTH, "--repeats", "2", "--sizes", "2", "4", "8", "--out", str(out)]) == 0
    rows = (out / "sweep_synthetic.csv").read_text().splitlines()
    assert rows[0] == "size,frontier_size,fr:A,d2h,stop"
    assert [r.split(",")[0] for r in rows[1:]] == ["2", "4", "8"]
    assert sum(int(r.split(",")[-1]) for r in rows[1:]) <= 1


def test_sweep_stop_flag_follows_rule():
    rows = sweep(make_synthetic_biased(800, 0.4, 3), SplitPlan(repeats=2), EnsembleConfig(), sizes=(2, 4, 8))
    zero = [all(v == 0 for v in r.flip_rate.values()) for r in rows]
    first = zero.index(True) if True in zero else None
    assert [r.stop for r in rows] == [i == first for i in range(len(rows))]


def test_sweep_stops_at_first_size_without_pa_splits():
    # B copies A at a lower column index, so every A split ties with a B split and loses the tie-break
    d = make_synthetic_biased(800, 0.4, 3)
    X = np.column_stack([d.column("A"), d.columns])
    d = Dataset(("B",) + d.feature_names, X, d.target, d.protected, d.target_name)
    rows = sweep(d, SplitPlan(repeats=2), EnsembleConfig(), sizes=(2, 4, 8))
    assert [r.flip_rate["A"] for r in rows] == [0.0, 0.0, 0.0]
    assert [r.stop for r in rows] == [True, False, False]


def test_sweep_sizes_ascending():
    with pytest.raises(ConfigError):
        sweep(make_synthetic_biased(200, 0.4), SplitPlan(repeats=1), EnsembleConfig(), sizes=(10, 5))


def test_seed_environment_fallback(monkeypatch):
    assert config_mod.build({}, {}, environ={"GROUPCART_SEED": "17"}).plan.seed == 17
    assert config_mod.build({}, {"seed": 3}, environ={"GROUPCART_SEED": "17"}).plan.seed == 3
    assert config_mod.build({}, {}, environ={}).plan.seed == 0
    assert config_mod.build({"split": {"seed": "5"}}, {}, environ={"GROUPCART_SEED": "17"}).plan.seed == 5


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(
        "[data]\nsource = synthetic\nsynthetic = n=400 bias=0.3 seed=2\n\n"
        "[split]\nseed = 4\nrepeats = 2\n\n[ensemble]\nsize = 3\ndomination = continuous\n\n"
        f"[output]\nout = {tmp_path / 'from_file'}\n"
    )
    built = config_mod.build(config_mod.read_file(cfg), {"repeats": 5})
    assert built.plan.repeats == 5 and built.plan.seed == 4
    assert built.ensemble.size_n == 3 and built.ensemble.domination == "continuous"
    assert built.synthetic == {"n": 400, "bias": 0.3, "seed": 2}
    assert main(["compare", "--config", str(cfg), "cart"]) == 0
    assert (tmp_path / "from_file" / "report_synthetic_A.txt").exists()


def test_bad_config_values(tmp_path, capsys):
    with pytest.raises(ConfigError):
        config_mod.build({}, {"ensemble_size": "many"})
    assert main(["compare", "--data", SYNTH, "bogus"]) == 2
    assert main(["train", "--config", str(tmp_path / "missing.ini")]) == 2


def test_german_defaults():
    cfg = config_mod.build({}, {"data": "german"})
    d = config_mod.load_dataset(cfg)
    assert d.row_count == 1000 and [p.name for p in d.protected] == ["sex"]
