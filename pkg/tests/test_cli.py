"""End-to-end CLI tests over the bundled mini fixture."""

import json
import subprocess
import sys

import pytest

from fdkit.cli import main

FIX = "tests/fixtures/mini"


@pytest.fixture()
def workdir(tmp_path, mini_dir, monkeypatch):
    monkeypatch.setenv("FD_CACHE_DIR", str(tmp_path / "cache"))
    return tmp_path


def run(args):
    return main([str(a) for a in args])


def test_pipeline_subcommands(workdir, mini_dir, manifest, capsys):
    store = workdir / "store.bin"
    verdicts = workdir / "verdicts.tsv"
    labels = workdir / "labels_ci.tsv"
    balanced = workdir / "balanced_ci.tsv"

    assert run(["ingest", mini_dir / "entities.nt", mini_dir / "aux_links.nt.gz",
                "-o", store]) == 0
    assert store.exists() and (workdir / "store.bin.json").exists()

    assert run(["seneca", "--graph", mini_dir / "align.tsv", "--store", store,
                "-o", verdicts, "--audit-log", workdir / "witness.jsonl"]) == 0
    out = capsys.readouterr().out
    assert f"candidate classes: {manifest['seneca_store']['class']}" in out
    lines = verdicts.read_text().splitlines()
    assert len(lines) == manifest["seneca_store"]["entities"]
    assert all(len(l.split("\t")) == 3 for l in lines)
    audit = [json.loads(l) for l in (workdir / "witness.jsonl").read_text().splitlines()]
    assert any("class_witness" in entry for entry in audit)

    assert run(["agreement", "--judgments", mini_dir / "judgments_ci.tsv",
                "-o", labels]) == 0
    assert len(labels.read_text().splitlines()) == 50

    assert run(["bucket", "--labels", labels, "--threshold", "0.5",
                "--threshold", "0.8", "--label-order", "C,I"]) == 0
    table = capsys.readouterr().out
    assert "# C" in table and "# I" in table

    assert run(["balance", "--labels", labels, "--strategy", "low_agreement_drop",
                "-o", balanced]) == 0
    assert len(balanced.read_text().splitlines()) == manifest["ci"]["balanced_size"]

    # expert-vs-crowd comparison on the bundled expert annotations
    assert run(["compare", "--a", mini_dir / "labels_ci_expert.tsv", "--b", labels,
                "-o", workdir / "disagreements.tsv"]) == 0
    out = capsys.readouterr().out
    rate = manifest["expert_ci"]["crowd_agreement_rate"]
    assert f"agreement rate: {rate:.4f}" in out
    disagreed = [l.split("\t")[0]
                 for l in (workdir / "disagreements.tsv").read_text().splitlines()]
    assert disagreed == manifest["expert_ci"]["crowd_disagreements"]

    assert run(["featurize", "--store", store, "--labels", balanced,
                "--verdicts", verdicts, "--task", "ci", "--blocks", "AUED",
                "-o", workdir / "X.tsv"]) == 0
    header = (workdir / "X.tsv").read_text().splitlines()[0]
    assert header.startswith("#") and json.loads(header[1:])["blocks"] == ["A", "U", "E", "D"]

    assert run(["train", "--kind", "svm", "--store", store, "--labels", balanced,
                "--verdicts", verdicts, "--task", "ci", "--blocks", "AUED",
                "--seed", "5", "-o", workdir / "model.json"]) == 0
    model = json.loads((workdir / "model.json").read_text())
    assert model["kind"] == "svm" and model["space_hash"]

    assert run(["cv", "--kind", "svm", "--store", store, "--labels", balanced,
                "--verdicts", verdicts, "--task", "ci", "--blocks", "AUE",
                "--folds", "10", "--seed", "5", "-o", workdir / "cv.json"]) == 0
    report = json.loads((workdir / "cv.json").read_text())
    assert report["avg_f1"] >= 0.9
    assert report["dataset"] == "C"

    assert run(["report", workdir / "cv.json"]) == 0
    assert "avgF1" in capsys.readouterr().out


def test_seneca_eval_option(workdir, mini_dir, manifest, capsys):
    store = workdir / "store.bin"
    run(["ingest", mini_dir / "entities.nt", "-o", store])
    gold = workdir / "gold.tsv"
    gold.write_text("".join(f"{iri}\t{ci}\t1.0\texpert\n"
                            for iri, (ci, _) in manifest["expected_verdicts"].items()))
    assert run(["seneca", "--graph", mini_dir / "align.tsv", "--store", store,
                "-o", workdir / "v.tsv", "--eval-labels", gold, "--task", "ci",
                "--report-out", workdir / "seneca_report.json"]) == 0
    report = json.loads((workdir / "seneca_report.json").read_text())
    assert report["method"] == "SENECA"
    assert report["avg_f1"] == 1.0  # gold here is the verdicts themselves


def test_sweep_writes_reports_and_is_byte_deterministic(workdir, mini_dir):
    store = workdir / "store.bin"
    verdicts = workdir / "v.tsv"
    labels = workdir / "labels.tsv"
    balanced = workdir / "balanced.tsv"
    run(["ingest", mini_dir / "entities.nt", mini_dir / "aux_links.nt.gz", "-o", store])
    run(["seneca", "--graph", mini_dir / "align.tsv", "--store", store, "-o", verdicts])
    run(["agreement", "--judgments", mini_dir / "judgments_ci.tsv", "-o", labels])
    run(["balance", "--labels", labels, "--strategy", "low_agreement_drop",
         "-o", balanced])

    outs = []
    for attempt in (1, 2):
        outdir = workdir / f"sweep{attempt}"
        assert run(["sweep", "--kind", "svm", "--store", store, "--labels", balanced,
                    "--verdicts", verdicts, "--task", "ci", "--folds", "10",
                    "--seed", "7", "-o", outdir]) == 0
        files = sorted(outdir.glob("report_*.json"))
        assert len(files) == 14
        outs.append({f.name: f.read_bytes() for f in files}
                    | {"table": (outdir / "table.txt").read_bytes()})
    assert outs[0] == outs[1]


def test_sweep_uses_cache_dir_default(workdir, mini_dir, monkeypatch):
    store = workdir / "store.bin"
    labels = workdir / "labels.tsv"
    balanced = workdir / "balanced.tsv"
    run(["ingest", mini_dir / "entities.nt", "-o", store])
    run(["agreement", "--judgments", mini_dir / "judgments_ci.tsv", "-o", labels])
    run(["balance", "--labels", labels, "--strategy", "low_agreement_drop",
         "-o", balanced])
    assert run(["sweep", "--kind", "knn", "--store", store, "--labels", balanced,
                "--task", "ci", "--folds", "5", "--seed", "1"]) == 0
    cache = workdir / "cache"
    produced = list(cache.glob("sweep-CI-C-knn/report_*.json"))
    assert len(produced) == 7  # no verdicts given: D-combinations unavailable


def test_sample_subcommand(workdir, mini_dir, manifest):
    store = workdir / "store.bin"
    run(["ingest", mini_dir / "entities.nt", "-o", store])
    out = workdir / "sample.txt"
    assert run(["sample", "--vectors", mini_dir / "vectors.tsv", "--store", store,
                "--seeds", mini_dir / "seeds.txt", "--places", mini_dir / "places.txt",
                "-o", out]) == 0
    assert out.read_text().split() == manifest["sample"]["expected"]


def test_strict_ingest_aborts_on_malformed(workdir, capsys):
    bad = workdir / "bad.nt"
    bad.write_text("<http://a> <http://p> <http://b> .\nbroken\n")
    assert run(["ingest", "--strict", bad, "-o", workdir / "s.bin"]) == 1
    assert "error:" in capsys.readouterr().err
    assert run(["ingest", bad, "-o", workdir / "s.bin"]) == 0  # lenient succeeds


def test_sweep_without_verdicts_but_d_needed(workdir, mini_dir, capsys):
    # cv with D but no verdict file: clean error, not a traceback
    store = workdir / "store.bin"
    labels = workdir / "labels.tsv"
    run(["ingest", mini_dir / "entities.nt", "-o", store])
    run(["agreement", "--judgments", mini_dir / "judgments_ci.tsv", "-o", labels])
    assert run(["cv", "--kind", "svm", "--store", store, "--labels", labels,
                "--task", "ci", "--blocks", "AD", "--folds", "5"]) == 1
    assert "verdict" in capsys.readouterr().err


def test_console_script_entry_point(workdir, mini_dir):
    result = subprocess.run(
        [sys.executable, "-m", "fdkit.cli", "--version"],
        capture_output=True, text=True)
    assert result.returncode == 0
    assert result.stdout.startswith("fd ")


def test_expert_dataset_pipeline(workdir, mini_dir):
    # the expert label file trains at weight 1 with no agreement bucketing
    store = workdir / "store.bin"
    balanced = workdir / "balanced_e.tsv"
    run(["ingest", mini_dir / "entities.nt", mini_dir / "aux_links.nt.gz", "-o", store])
    assert run(["balance", "--labels", mini_dir / "labels_ci_expert.tsv",
                "--strategy", "random_drop", "--seed", "3", "-o", balanced]) == 0
    assert run(["cv", "--kind", "svm", "--store", store, "--labels", balanced,
                "--task", "ci", "--blocks", "AUE", "--folds", "10", "--seed", "4",
                "-o", workdir / "cv_e.json"]) == 0
    report = json.loads((workdir / "cv_e.json").read_text())
    assert report["dataset"] == "E"
    assert report["avg_f1"] >= 0.9


def test_po_task_pipeline(workdir, mini_dir):
    store = workdir / "store.bin"
    verdicts = workdir / "v.tsv"
    labels = workdir / "labels_po.tsv"
    balanced = workdir / "balanced_po.tsv"
    run(["ingest", mini_dir / "entities.nt", mini_dir / "aux_links.nt.gz", "-o", store])
    run(["seneca", "--graph", mini_dir / "align.tsv", "--store", store, "-o", verdicts])
    run(["agreement", "--judgments", mini_dir / "judgments_po.tsv", "-o", labels])
    assert run(["balance", "--labels", labels, "--strategy", "low_agreement_drop",
                "-o", balanced]) == 0
    assert run(["cv", "--kind", "svm", "--store", store, "--labels", balanced,
                "--verdicts", verdicts, "--task", "po", "--blocks", "AUED",
                "--folds", "10", "--seed", "2", "-o", workdir / "po.json"]) == 0
    report = json.loads((workdir / "po.json").read_text())
    assert report["task"] == "PO"
    assert report["avg_f1"] >= 0.9
