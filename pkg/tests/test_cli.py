import copy
import csv
import json
import xml.etree.ElementTree as ET

import pytest

from unlbench import plotting
from unlbench.cli import main
from unlbench.config import parse_config
from unlbench.errors import ConfigError
from unlbench.sweep import CSV_COLUMNS

SMALL = {
    "dataset": {"seed": 0},
    "targets": [{"kind": "full_class", "id": 2}, {"kind": "sub_class", "id": 4}],
    "arch": {"hidden_dims": [16]},
    "train": {"epochs": 6},
    "methods": [{"kind": "ssd", "hyper": {"alpha": 3.0}}, {"kind": "random_labels", "hyper": {"epochs_u": 2}}],
    "protocol": {"common_practice": {"J": 3}, "recommended": {"I": 3, "J": 1}},
    "root_seed": 17,
}


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def drop_timing(text):
    rows = list(csv.reader(text.splitlines()))
    k = rows[0].index("wall_ms")
    return [r[:k] + r[k + 1:] for r in rows]


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("small")
    cfg = write_config(tmp, SMALL)
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp / "out")]) == 0
    return tmp / "out"


def test_sweep_writes_complete_csv_and_plans(small_run):
    lines = (small_run / "results.csv").read_text().splitlines()
    assert tuple(lines[0].split(",")[:len(CSV_COLUMNS)]) == CSV_COLUMNS
    # per target: 2 methods x (1*3 + 3*1) cells
    assert len(lines) - 1 == 2 * 2 * (3 + 3)
    plans = sorted(p.name for p in small_run.glob("plan_*.json"))
    assert plans == ["plan_full_class-2_common_practice.json", "plan_full_class-2_recommended.json",
                     "plan_sub_class-4_common_practice.json", "plan_sub_class-4_recommended.json"]
    assert list((small_run / "checkpoints").glob("*.ckpt"))


def test_sweep_rerun_is_identical_except_timing(small_run, tmp_path):
    cfg = write_config(tmp_path, SMALL)
    assert main(["--threads", "2", "sweep", "--config", str(cfg), "--out", str(tmp_path / "again")]) == 0
    assert drop_timing((small_run / "results.csv").read_text()) == \
        drop_timing((tmp_path / "again" / "results.csv").read_text())


def test_zero_training_seeds_is_config_error(tmp_path, capsys):
    doc = copy.deepcopy(SMALL)
    doc["protocol"]["recommended"]["I"] = 0
    assert main(["sweep", "--config", str(write_config(tmp_path, doc)), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "I >= 1" in err and "protocol.recommended.I" in err


@pytest.mark.parametrize("mutate,where", [
    (lambda d: d["train"].update(learning_rat=0.1), "train.learning_rat"),
    (lambda d: d["methods"][0]["hyper"].update(alhpa=1.0), "methods[0].hyper"),
    (lambda d: d["targets"][0].update(id=9), "targets[0].id"),
    (lambda d: d.update(protocol={}), "protocol"),
    (lambda d: d["dataset"].update(d="8"), "dataset.d"),
])
def test_strict_config_names_first_violation(mutate, where):
    doc = copy.deepcopy(SMALL)
    mutate(doc)
    with pytest.raises(ConfigError) as info:
        parse_config(doc)
    assert info.value.path.startswith(where)


def test_malformed_json_is_config_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{\"targets\": [}")
    assert main(["sweep", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "invalid JSON" in capsys.readouterr().err


def test_cell_failure_exit_code(tmp_path, capsys):
    doc = copy.deepcopy(SMALL)
    doc["methods"] = [{"kind": "ssd"}, {"kind": "unsir"}]
    doc["targets"] = [{"kind": "sub_class", "id": 1}]
    out = tmp_path / "o"
    assert main(["sweep", "--config", str(write_config(tmp_path, doc)), "--out", str(out)]) == 1
    err = capsys.readouterr().err
    assert "method=unsir, i=0, j=0" in err
    assert (out / "results.partial.csv").read_text().count("\nssd,") == 3


def test_analyze_summary(small_run, tmp_path):
    out = tmp_path / "a.json"
    assert main(["analyze", "--in", str(small_run / "results.csv"), "--out", str(out)]) == 0
    entries = json.loads(out.read_text())["entries"]
    ssd_cp = [e for e in entries if e["method"] == "ssd" and e["protocol"] == "common_practice"]
    assert ssd_cp and all(e["v_within"] == 0.0 and e["v_total"] == 0.0 for e in ssd_cp)
    assert all("w2_vs_other_protocol" in e for e in entries)
    for e in entries:
        assert set(e["quantiles"]) == {"min", "q25", "q50", "q75", "max"}


def synthetic_csv(path, rows, protocol=True):
    header = list(CSV_COLUMNS) + (["protocol"] if protocol else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for train_seed, unlearn_seed, value in rows:
            row = ["retrain", train_seed, unlearn_seed, "full_class", 0, value, value, value, value, 1.0, "abc"]
            w.writerow(row + (["recommended"] if protocol else []))


def test_analyze_synthetic_grid(tmp_path):
    src = tmp_path / "g.csv"
    synthetic_csv(src, [(1, 10, 1), (1, 11, 3), (2, 12, 5), (2, 13, 7)], protocol=False)
    out = tmp_path / "g.json"
    assert main(["analyze", "--in", str(src), "--out", str(out)]) == 0
    e = json.loads(out.read_text())["entries"][0]
    assert (e["v_total"], e["v_between"], e["v_within"]) == (5.0, 4.0, 1.0)
    assert e["protocol"] == "recommended" and "w2_vs_other_protocol" not in e


def test_analyze_missing_columns(tmp_path, capsys):
    src = tmp_path / "m.csv"
    src.write_text("method,train_seed,unlearn_seed\nssd,1,2\n")
    assert main(["analyze", "--in", str(src), "--out", str(tmp_path / "x.json")]) == 2
    assert "missing" in capsys.readouterr().err


def test_report_empty_input(tmp_path):
    src = tmp_path / "e.csv"
    synthetic_csv(src, [])
    assert main(["report", "--in", str(src), "--out", str(tmp_path / "r")]) == 2


def test_report_writes_valid_svg(small_run, tmp_path):
    out = tmp_path / "rep"
    assert main(["report", "--in", str(small_run / "results.csv"), "--out", str(out)]) == 0
    svgs = sorted(out.glob("*.svg"))
    assert len(svgs) == 2 * 4 + 1
    for path in svgs:
        root = ET.parse(path).getroot()
        assert root.tag == "{http://www.w3.org/2000/svg}svg" and root.get("version") == "1.1"
    assert (out / "summary.csv").exists()


def test_report_is_reproducible(small_run, tmp_path):
    for name in ("a", "b"):
        main(["report", "--in", str(small_run / "results.csv"), "--out", str(tmp_path / name)])
    for path in (tmp_path / "a").iterdir():
        assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()


def test_boxes_encode_stats_quantiles(small_run, tmp_path, monkeypatch):
    from matplotlib.axes import Axes

    from unlbench.analysis import analyze
    from unlbench.sweep import read_results_csv

    drawn = []
    real = Axes.bxp

    def spy(self, bxpstats, *args, **kwargs):
        drawn.extend(bxpstats)
        return real(self, bxpstats, *args, **kwargs)

    monkeypatch.setattr(Axes, "bxp", spy)
    summary = analyze(read_results_csv(small_run / "results.csv"))
    plotting.write_report(summary, tmp_path)
    ssd_cp = [e for e in summary["entries"] if e["method"] == "ssd" and e["protocol"] == "common_practice"]
    boxes = [(b["whislo"], b["q1"], b["med"], b["q3"], b["whishi"]) for b in drawn]
    for e in summary["entries"]:
        q = e["quantiles"]
        assert (q["min"], q["q25"], q["q50"], q["q75"], q["max"]) in boxes
    for e in ssd_cp:  # deterministic method, one training seed: zero-height box
        assert e["quantiles"]["q25"] == e["quantiles"]["q75"]
