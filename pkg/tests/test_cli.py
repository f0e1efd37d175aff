import hashlib
import json
import shutil
import subprocess

import numpy as np
import pytest

from conftest import REFERENCE_SIGS, SEEDS
from pachner.cli import main
from pachner.graph import generate, import_graph


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def outputs(d):
    """Bytes of every output file except the manifest (which records wall time)."""
    return {p.name: p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file() and p.name != "manifest.json"}


def test_roundtrip_reference_signatures(tmp_path, capsys):
    f = tmp_path / "sigs.txt"
    f.write_text("\n".join(REFERENCE_SIGS) + "\n")
    code, out, _ = run(capsys, "roundtrip", "--isosigs", f)
    assert code == 0
    assert sum(ln.startswith("PASS") for ln in out.splitlines()) == 19


def test_roundtrip_reports_failures(tmp_path, capsys):
    f = tmp_path / "sigs.txt"
    other = generate(SEEDS["S3"], "23", 1).nodes[1]
    f.write_text(f"cMcabbgqs\nc!\n{other}\n")
    code, out, _ = run(capsys, "roundtrip", "--isosigs", f)
    lines = out.splitlines()
    assert code == 1
    assert lines[0].startswith("PASS") and lines[1].startswith("FAIL") and lines[2].startswith("PASS")


def test_generate_then_analyze(tmp_path, capsys):
    g = tmp_path / "g"
    code, out, _ = run(capsys, "generate", "--seed", "cMcabbgqs", "--moves", "23", "--depth", 3, "--out", g)
    assert code == 0 and json.loads(out)["nodes"] == generate("cMcabbgqs", "23", 3).node_count
    assert import_graph(g / "graph.txt") == generate("cMcabbgqs", "23", 3)
    growth = (g / "growth.csv").read_text().splitlines()
    assert growth[0] == "depth,new_nodes,nodes,edges,density" and len(growth) == 5
    man = json.loads((g / "manifest.json").read_text())
    assert man["subcommand"] == "generate" and man["flags"]["depth"] == 3
    assert {"rng_seeds", "inputs", "version", "wall_time_s"} <= set(man)
    a = tmp_path / "a"
    code, out, _ = run(capsys, "analyze", "--graph", g / "graph.txt", "--out", a)
    assert code == 0
    metrics = json.loads((a / "metrics.json").read_text())
    assert metrics["nodeCount"] == generate("cMcabbgqs", "23", 3).node_count
    assert metrics["triangleClustering"] == 0.0
    man = json.loads((a / "manifest.json").read_text())
    assert list(man["inputs"].values())[0] == hashlib.sha256((g / "graph.txt").read_bytes()).hexdigest()


def test_generate_is_idempotent(tmp_path, capsys):
    for d in ("x", "y"):
        run(capsys, "generate", "--seed", SEEDS["L71"], "--depth", 2, "--out", tmp_path / d)
    assert outputs(tmp_path / "x") == outputs(tmp_path / "y")


def test_budget_abort_exit_code(tmp_path, capsys):
    code, out, err = run(capsys, "generate", "--seed", "cMcabbgqs", "--depth", 6, "--max-nodes", 200,
                         "--out", tmp_path / "g")
    assert code == 2
    assert json.loads(err)["exit_code"] == 2
    partial = import_graph(tmp_path / "g" / "graph.txt")
    assert partial == generate("cMcabbgqs", "23", partial.depth_bound)


def test_validation_error_exit_code(tmp_path, capsys):
    code, _, err = run(capsys, "generate", "--seed", "c!", "--depth", 1, "--out", tmp_path / "g")
    assert code == 1
    doc = json.loads(err)
    assert doc["exit_code"] == 1 and doc["message"]
    code, _, err = run(capsys, "analyze", "--graph", tmp_path / "missing.txt", "--out", tmp_path / "a")
    assert code == 1 and json.loads(err)["error"]


def test_lengths_single_node(tmp_path, capsys):
    run(capsys, "generate", "--seed", "cMcabbgqs", "--depth", 0, "--out", tmp_path / "g")
    code, out, _ = run(capsys, "lengths", "--graph", tmp_path / "g" / "graph.txt")
    assert code == 0
    assert out.splitlines() == ["length,count", "9,1"]


def test_census_and_correlate(tmp_path, capsys):
    seeds = tmp_path / "seeds.txt"
    seeds.write_text("\n".join(SEEDS.values()) + "\nbad!\n")
    code, out, _ = run(capsys, "census", "--seeds", seeds, "--depth", 2, "--jobs", 2, "--out", tmp_path / "c")
    assert code == 0 and json.loads(out) == {"seeds": 9, "ok": 8}
    rows = (tmp_path / "c" / "summaries.csv").read_text().splitlines()
    assert len(rows) == 10 and rows[-1].startswith("bad!")
    dist = (tmp_path / "c" / "degree_distribution.csv").read_text().splitlines()
    assert dist[0] == "degree,mean_frequency"
    # invariants: nodes sit above 75 / sqrt(systole) for synthetic systoles
    inv = tmp_path / "inv.csv"
    lines = ["isosig,volume,systole,cusps"]
    for i, s in enumerate(SEEDS.values()):
        lines.append(f"{s},1.0,{0.1 * (i + 1)},0")
    inv.write_text("\n".join(lines) + "\n")
    code, out, _ = run(capsys, "correlate", "--summaries", tmp_path / "c" / "summaries.csv",
                       "--invariants", inv, "--bins", 4, "--out", tmp_path / "r")
    assert code == 0
    env = json.loads((tmp_path / "r" / "envelope.json").read_text())
    assert env["joined"] == 8 and env["invariant"] == "systole"
    assert (tmp_path / "r" / "scatter.csv").read_text().startswith("isosig,systole,nodes")


def test_correlate_rejects_missing_column(tmp_path, capsys):
    s = tmp_path / "s.csv"
    s.write_text("isosig,nodes,ok\ncMcabbgqs,10,1\n")
    inv = tmp_path / "i.csv"
    inv.write_text("isosig,volume\ncMcabbgqs,1.0\n")
    code, _, _ = run(capsys, "correlate", "--summaries", s, "--invariants", inv, "--out", tmp_path / "r")
    assert code == 1


def test_ml_pipeline(tmp_path, capsys):
    for name, seed in (("s3", SEEDS["S3"]), ("l72", SEEDS["L72"])):
        run(capsys, "generate", "--seed", seed, "--depth", 4, "--out", tmp_path / name)
        code, out, _ = run(capsys, "sample", "--graph", tmp_path / name / "graph.txt", "--length", 19,
                           "--count", 60, "--rng-seed", 1, "--out", tmp_path / f"{name}.txt")
        assert code == 0 and json.loads(out)["sampled"] > 0
        assert (tmp_path / f"{name}.txt.manifest.json").exists()
    code, out, _ = run(capsys, "dataset", "--class-a", tmp_path / "s3.txt", "--class-b", tmp_path / "l72.txt",
                       "--length", 19, "--rng-seed", 3, "--out", tmp_path / "ds")
    assert code == 0 and len(json.loads(out)["folds"]) == 5
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"hidden": [8], "epochs": 2, "rng_seed": 5}))
    code, out, _ = run(capsys, "train", "--dataset", tmp_path / "ds", "--config", cfg, "--out", tmp_path / "t")
    assert code == 0
    rep = json.loads((tmp_path / "t" / "cv_report.json").read_text())
    assert {"pair", "accuracyMean", "accuracyStd", "mccMean", "mccStd", "seeds"} <= set(rep)
    assert len(list((tmp_path / "t" / "models").glob("fold*.npz"))) == 5
    curve = (tmp_path / "t" / "training_curve.csv").read_text().splitlines()
    assert len(curve) == 1 + 5 * 2
    code, out, _ = run(capsys, "saliency", "--models", tmp_path / "t" / "models", "--dataset", tmp_path / "ds",
                       "--out", tmp_path / "sal")
    assert code == 0
    mat = np.loadtxt(tmp_path / "sal" / "saliency_matrix.csv", delimiter=",", skiprows=1)
    assert mat.shape == (19, 65) and mat[:, 1:].max() == pytest.approx(1.0)
    # a rerun of train reproduces every output byte
    run(capsys, "train", "--dataset", tmp_path / "ds", "--config", cfg, "--out", tmp_path / "t2")
    assert outputs(tmp_path / "t") == outputs(tmp_path / "t2")


def test_bad_config_is_a_validation_error(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json")
    ds = tmp_path / "ds"
    ds.mkdir()
    (ds / "dataset.csv").write_text("isosig,label\nbaa,0\ncaa,1\n")
    (ds / "folds.json").write_text(json.dumps({"rng_seed": 0, "length": 3, "class_names": ["a", "b"],
                                               "folds": [[0], [1]]}))
    code, _, err = run(capsys, "train", "--dataset", ds, "--config", cfg, "--out", tmp_path / "t")
    assert code == 1 and "JSON" in json.loads(err)["message"]


def test_console_script(tmp_path):
    exe = shutil.which("pachner")
    if exe is None:
        pytest.skip("console script not installed")
    f = tmp_path / "s.txt"
    f.write_text("caba\n")
    res = subprocess.run([exe, "roundtrip", "--isosigs", str(f)], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("PASS caba")
