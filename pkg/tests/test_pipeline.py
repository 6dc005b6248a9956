import csv
import hashlib
import json

import pytest

from orgminer.errors import BundleIncomplete, SchemaMismatch, StageError
from orgminer.pipeline import (
    BUNDLE_FILES,
    PipelineConfig,
    ScoringModel,
    bundle_hashes,
    run_pipeline,
    score_new_record,
)
from orgminer.trees import predict

from conftest import SMALL_CONFIG


def config_for(inputs, out, **extra):
    return PipelineConfig.from_dict(
        {**SMALL_CONFIG, **extra, "data": str(inputs["data"]), "codebook": str(inputs["codebook"]), "out": str(out)}
    )


def write_records(path, records):
    header = list(records[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in records:
            w.writerow(["" if r[h] is None else r[h] for h in header])
    return path


def test_bundle_contents_and_manifest(small_bundle):
    out = small_bundle.out
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "complete"
    assert set(manifest["files"]) == set(BUNDLE_FILES) | {"summary.md"}
    for name, digest in manifest["files"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    assert list(manifest["timings"]) == ["ingest", "prep", "reduce", "cluster", "trees", "rules"]
    assert "data" not in manifest["config"] and manifest["config"]["reduce"]["threshold"] == 0.4
    assert bundle_hashes(out) == manifest["files"]


def test_stage_hand_offs(small_bundle):
    b = small_bundle
    assert len(b.reduced.codebook) == len(b.prep.dataset.codebook) - len(b.reduction.drops)
    cluster_report = json.loads((b.out / "cluster.json").read_text())
    trees_report = json.loads((b.out / "trees.json").read_text())
    assert trees_report["target"] == cluster_report["attribute"] == b.tree.target
    assert b.labelled.codebook[b.tree.target].categories == tuple(str(i) for i in range(1, b.clustering.k + 1))
    assert all(r.consequent.attribute == b.tree.target for r in b.rules)
    assert all(r.confidence == 1.0 for r in b.rules) and len(b.rules) <= 100


def test_summary_sections(small_bundle):
    text = (small_bundle.out / "summary.md").read_text()
    assert "| Decision tree | Accuracy |" in text
    assert "| Rule | Results |" in text
    assert "They are in cluster" in text


def test_deterministic_hashes(small_inputs, small_bundle, tmp_path):
    again = run_pipeline(config_for(small_inputs, tmp_path / "again"))
    assert again.manifest["files"] == small_bundle.manifest["files"]


def test_stop_after_prep(small_inputs, tmp_path):
    bundle = run_pipeline(config_for(small_inputs, tmp_path / "p"), stop_after="prep")
    assert set(bundle.manifest["files"]) == {"codebook.json", "prep.json", "summary.md"}
    assert bundle.manifest["status"] == "stopped after prep"


def test_missing_codebook_aborts_in_ingest(small_inputs, tmp_path):
    config = PipelineConfig.from_dict(
        {"data": str(small_inputs["data"]), "codebook": str(tmp_path / "absent.json"), "out": str(tmp_path / "b")}
    )
    with pytest.raises(StageError) as err:
        run_pipeline(config)
    assert err.value.stage == "ingest" and isinstance(err.value.cause, FileNotFoundError)
    manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert manifest["status"] == "failed" and manifest["failed_stage"] == "ingest"


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig.from_dict({"colour": "blue"})
    with pytest.raises(ValueError):
        PipelineConfig.from_dict({"trees": {"depth": 3}})
    with pytest.raises(ValueError):
        PipelineConfig.from_dict({"cluster": {"k_range": [5, 2]}})
    config = PipelineConfig.from_dict({"rules": {"top_n": 10}, "trees": {"max_depth": 4, "folds": 3}})
    assert config.rules.params.top_n == 10 and config.trees.params.max_depth == 4 and config.trees.folds == 3


def test_scoring_agrees_with_tree(small_bundle, small_inputs, tmp_path):
    b = small_bundle
    scored = score_new_record(b.out, small_inputs["data"])
    assert [s.cluster for s in scored] == [predict(b.tree, r) for r in b.labelled.records()]


def signature_record(bundle, truth_path):
    """Signature values of the planted group that dominates cluster 1."""
    truth = json.loads(truth_path.read_text())
    members = [i for i, c in enumerate(bundle.labelled.column(bundle.tree.target)) if c == "1"]
    groups = [truth["labels"][i] for i in members]
    group = max(set(groups), key=groups.count)
    return truth["signatures"][str(group)]


def test_signature_record_scores_to_its_cluster(small_bundle, small_inputs, tmp_path):
    record = signature_record(small_bundle, small_inputs["ground_truth"])
    [scored] = score_new_record(small_bundle.out, write_records(tmp_path / "r.csv", [record]))
    assert scored.cluster == "1"
    assert len(scored.rules) >= 1
    assert all(r.consequent.value == "1" for r in scored.rules)


def test_missing_field_imputed_from_bundle(small_bundle, small_inputs, tmp_path):
    model = ScoringModel.load(small_bundle.out)
    first = next(small_bundle.dataset.records())
    name = small_bundle.reduced.codebook.names[0]
    record = {k: (None if k == name else v) for k, v in first.items()}
    [scored] = score_new_record(small_bundle.out, write_records(tmp_path / "r.csv", [record]))
    filled = dict(first, **{name: model.fills[name]})
    assert scored.cluster == predict(small_bundle.tree, model.complete(filled))


def test_schema_and_bundle_errors(small_bundle, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("shoe_size\n42\n")
    with pytest.raises(SchemaMismatch):
        score_new_record(small_bundle.out, bad)
    with pytest.raises(BundleIncomplete):
        ScoringModel.load(tmp_path)
