import csv
import json

import numpy as np
import pytest

from riga.cli import COMMANDS, build_parser, main
from riga.config import ConfigError, load_config
from riga.manifest import ExperimentManifest

SMALL = """
seed = 3
folds = 3
[dataset.synthetic]
n_major = 60
n_minor = 12
d = 6
separation = 3.0
[gbdt]
n_trees = 10
[bn]
enabled = true
[bn.options.search]
max_iters = 50
restarts = 1
"""


@pytest.fixture
def small(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    return path


def run(*argv):
    return main([str(a) for a in argv])


def test_parser_surface():
    parser = build_parser()
    assert set(COMMANDS) == {"transform", "augment", "classify", "bnlearn", "pipeline", "report"}
    args = parser.parse_args(["classify", "--folds", "4", "--grid-size", "30", "--augmenter", "adasyn"])
    assert (args.folds, args.grid_size, args.augmenter) == (4, 30, "adasyn")
    with pytest.raises(SystemExit):
        parser.parse_args(["classify", "--augmenter", "ctgan"])


def test_explain_prints_effective_config(small, capsys):
    assert run("classify", "--config", small, "--seed", 9, "--explain") == 0
    text = capsys.readouterr().out
    assert "seed = 9" in text and "n_major = 60" in text


def test_classify_outputs_and_reproducible_hash(small, tmp_path, capsys):
    assert run("classify", "--config", small, "--out", tmp_path / "a", "--augmenter", "smote") == 0
    assert run("classify", "--config", small, "--out", tmp_path / "b", "--augmenter", "smote") == 0
    out = capsys.readouterr().out
    assert "GBDT + SMOTE, synthetic:" in out
    a = ExperimentManifest.load(tmp_path / "a" / "manifest.json")
    b = ExperimentManifest.load(tmp_path / "b" / "manifest.json")
    assert a.content_hash() == b.content_hash()
    assert len(a.results["fold_aucs"]) == 3
    rows = list(csv.DictReader((tmp_path / "a" / "results.csv").open()))
    assert rows[0]["manifest_hash"] == a.content_hash()
    assert (tmp_path / "a" / "roc.svg").read_text().startswith("<svg")


def test_seed_changes_hash(small, tmp_path):
    run("classify", "--config", small, "--out", tmp_path / "a")
    run("classify", "--config", small, "--out", tmp_path / "b", "--seed", 4)
    a = ExperimentManifest.load(tmp_path / "a" / "manifest.json")
    b = ExperimentManifest.load(tmp_path / "b" / "manifest.json")
    assert a.content_hash() != b.content_hash()


def test_tampered_manifest_rejected(small, tmp_path):
    run("classify", "--config", small, "--out", tmp_path / "a")
    path = tmp_path / "a" / "manifest.json"
    d = json.loads(path.read_text())
    d["results"]["mean"] = 0.99
    path.write_text(json.dumps(d))
    with pytest.raises(ValueError, match="hash mismatch"):
        ExperimentManifest.load(path)


def test_augment_writes_balanced_csv(small, tmp_path):
    assert run("augment", "--config", small, "--out", tmp_path, "--augmenter", "smote") == 0
    rows = list(csv.DictReader((tmp_path / "augmented.csv").open()))
    labels = np.array([int(r["label"]) for r in rows])
    flags = np.array([int(r["synthetic"]) for r in rows])
    assert (labels == 0).sum() == (labels == 1).sum() == 60
    assert flags.sum() == 48 and (labels[flags == 1] == 1).all()


def test_transform_writes_mapping_and_images(small, tmp_path):
    assert run("transform", "--config", small, "--out", tmp_path, "--dump-images", 2) == 0
    mapping = json.loads((tmp_path / "mapping.json").read_text())
    assert mapping["grid_size"] == 28
    assert len(list((tmp_path / "images").glob("*.pgm"))) == 2
    assert (tmp_path / "sample_grid.pgm").read_bytes().startswith(b"P5")


def test_grid_too_small_error(tmp_path, capsys):
    cfg = tmp_path / "wide.toml"
    cfg.write_text("[dataset.synthetic]\nn_major = 20\nn_minor = 5\nd = 785\nseparation = 1.0\n")
    assert run("transform", "--config", cfg, "--out", tmp_path / "o") == 2
    assert "grid too small for lossless mapping" in capsys.readouterr().err


def test_bnlearn_and_pipeline_outputs(small, tmp_path, capsys):
    assert run("bnlearn", "--config", small, "--out", tmp_path / "bn") == 0
    assert (tmp_path / "bn" / "bn.dot").read_text().startswith("digraph")
    assert "label" in (tmp_path / "bn" / "blanket.txt").read_text()
    assert run("pipeline", "--config", small, "--out", tmp_path / "p", "--augmenter", "smote") == 0
    out = capsys.readouterr().out
    assert "BIC before:" in out and "Markov blanket size:" in out
    for name in ("bn_before.dot", "bn_after.dot", "blanket_before.dot", "blanket_after.dot"):
        assert (tmp_path / "p" / name).exists()


def test_report_table_and_incompatible(small, tmp_path, capsys):
    run("classify", "--config", small, "--out", tmp_path / "a")
    run("classify", "--config", small, "--out", tmp_path / "b", "--augmenter", "smote")
    capsys.readouterr()
    assert run("report", tmp_path / "a", tmp_path / "b", "--out", tmp_path / "rep") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("GBDT w/o Augmentation: synthetic: ")
    assert (tmp_path / "rep" / "roc_synthetic.svg").exists()
    run("classify", "--config", small, "--out", tmp_path / "c", "--folds", 4)
    assert run("report", tmp_path / "a", tmp_path / "c", "--out", tmp_path / "rep2") == 2
    assert "different fold counts" in capsys.readouterr().err


def test_config_rejects_unknown_keys(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[augment]\nflavour = 'x'\n")
    with pytest.raises(ConfigError, match="flavour"):
        load_config(bad)
    worse = tmp_path / "worse.toml"
    worse.write_text("classifier = 'svm'\n")
    with pytest.raises(ConfigError):
        load_config(worse)
