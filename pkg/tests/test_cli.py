"""End-to-end command-line runs in a temp directory with small chain budgets."""
import csv
import json
from pathlib import Path

import numpy as np
import pytest

from treebma import load_ensemble, trauma_schema
from treebma.cli import main

FAST = ["--burn-in", "400", "--collect", "40", "--thin", "1", "--min-leaf", "8"]


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--rows", "120", "--seed", "5", "--irrelevant", "8",
                 "--out-dir", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def trained_dir(tmp_path_factory, synth_dir) -> Path:
    out = tmp_path_factory.mktemp("train")
    rc = main(["train", "--data", str(synth_dir / "data.csv"), "--seed", "1",
               *FAST, "--out-dir", str(out)])
    assert rc == 0
    return out


class TestSynth:
    def test_writes_loadable_dataset(self, synth_dir):
        from treebma import load_csv

        data = load_csv(synth_dir / "data.csv", trauma_schema())
        assert data.n == 120 and data.m == 16
        assert "irrelevant=[8]" in (synth_dir / "provenance.txt").read_text()

    def test_manifest_records_run(self, synth_dir):
        manifest = json.loads((synth_dir / "manifest.json").read_text())
        assert manifest["subcommand"] == "synth"
        assert manifest["seed"] == 5
        assert str(synth_dir / "data.csv") in manifest["artifacts"]


class TestTrain:
    def test_ensemble_file_and_metadata(self, trained_dir):
        ens = load_ensemble(trained_dir / "ensemble.jsonl", trained_dir / "metadata.json")
        assert len(ens) == 40
        assert ens.meta["config"]["burn_in_steps"] == 400
        assert 0.0 <= ens.meta["acceptance"]["overall"] <= 1.0

    def test_manifest_digests_inputs(self, trained_dir, synth_dir):
        manifest = json.loads((trained_dir / "manifest.json").read_text())
        digest = manifest["inputs"][str(synth_dir / "data.csv")]
        assert len(digest) == 64  # sha256 hex

    def test_same_seed_reproduces(self, synth_dir, trained_dir, tmp_path):
        out2 = tmp_path / "again"
        rc = main(["train", "--data", str(synth_dir / "data.csv"), "--seed", "1",
                   *FAST, "--out-dir", str(out2)])
        assert rc == 0
        assert (out2 / "ensemble.jsonl").read_bytes() == \
            (trained_dir / "ensemble.jsonl").read_bytes()


class TestEvalImportanceFilterCompare:
    def test_eval_writes_fold_report(self, synth_dir, tmp_path):
        out = tmp_path / "eval"
        rc = main(["eval", "--data", str(synth_dir / "data.csv"), "--folds", "3",
                   "--seed", "2", *FAST, "--out-dir", str(out)])
        assert rc == 0
        rows = list(csv.reader((out / "report.csv").open()))
        assert rows[0][0] == "fold"
        assert [r[0] for r in rows[1:4]] == ["0", "1", "2"]
        assert (out / "report.txt").exists()

    def test_importance_normalized(self, trained_dir, tmp_path):
        out = tmp_path / "imp"
        rc = main(["importance", "--ensemble", str(trained_dir / "ensemble.jsonl"),
                   "--out-dir", str(out)])
        assert rc == 0
        rows = list(csv.reader((out / "importance.csv").open()))[1:]
        assert len(rows) == 16
        assert sum(float(r[2]) for r in rows) == pytest.approx(1.0, abs=1e-4)

    def test_filter_excludes_variable(self, synth_dir, trained_dir, tmp_path):
        out = tmp_path / "filt"
        rc = main(["filter", "--ensemble", str(trained_dir / "ensemble.jsonl"),
                   "--variable", "8", "--data", str(synth_dir / "data.csv"),
                   "--out-dir", str(out)])
        assert rc == 0
        kept = load_ensemble(out / "filtered_ensemble.jsonl")
        assert all(8 not in t.variables_used() for t in kept.trees)
        assert "excluded variable: 8" in (out / "report.txt").read_text()

    def test_compare_writes_all_arms(self, synth_dir, tmp_path):
        out = tmp_path / "cmp"
        rc = main(["compare", "--data", str(synth_dir / "data.csv"), "--folds", "3",
                   "--seed", "3", "--variable", "8", *FAST, "--out-dir", str(out)])
        assert rc == 0
        arms = {r[0] for r in list(csv.reader((out / "compare.csv").open()))[1:]}
        assert arms == {"all_vars", "dropped", "filtered", "dropped_noise"}
        assert (out / "importance.csv").exists()


class TestExitCodes:
    def test_missing_data_file_is_io_error(self, tmp_path):
        rc = main(["train", "--data", str(tmp_path / "nope.csv"), *FAST,
                   "--out-dir", str(tmp_path / "o")])
        assert rc == 2

    def test_invalid_data_is_validation_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        schema = trauma_schema()
        header = ",".join(schema.names + [schema.outcome])
        bad.write_text(header + "\n" + ",".join(["0"] * 16 + ["7"]) + "\n")
        rc = main(["train", "--data", str(bad), *FAST, "--out-dir", str(tmp_path / "o")])
        assert rc == 1

    def test_bad_irrelevant_index(self, tmp_path):
        rc = main(["synth", "--rows", "50", "--irrelevant", "99",
                   "--out-dir", str(tmp_path / "o")])
        assert rc == 1
