"""Batch harness: manifests, config files, seeded runs, report artifacts."""

import csv
import json

import numpy as np
import pytest

from advlight import Image, ManifestError, png_decode, png_encode
from advlight.attack import AttackConfig
from advlight.harness import (
    DatasetRecord,
    RunConfig,
    derive_record_seed,
    load_config,
    load_manifest,
    record_to_dict,
    report_fingerprint,
    report_to_dict,
    run_batch,
    write_report,
)

FAST_ATTACK = AttackConfig(param_step=0.25, image_step=0.02, param_iters=2, image_iters=3, resize_count=2)


def _write_corpus(tmp_path, n=3, seed=130, missing_ids=()):
    """Write n small PNGs plus a manifest; ids in missing_ids get a bogus path."""
    rng = np.random.default_rng(seed)
    lines = []
    for i in range(n):
        rid = f"r{i:02d}"
        path = tmp_path / f"img{i}.png"
        if rid in missing_ids:
            path = tmp_path / f"absent{i}.png"
        else:
            img = Image(rng.uniform(0.1, 0.9, size=(12, 10, 3)))
            path.write_bytes(png_encode(img))
        lines.append({"id": rid, "image_path": str(path), "captions": [f"scene number {i}", "a photo"]})
    manifest_path = tmp_path / "manifest.jsonl"
    manifest_path.write_text("\n".join(json.dumps(l) for l in lines) + "\n")
    return manifest_path


# ---------------------------------------------------------------------------
# seed derivation
# ---------------------------------------------------------------------------


def _splitmix_oracle(master, index):
    mask = (1 << 64) - 1
    x = (master + (index + 1) * 0x9E3779B97F4A7C15) & mask
    x = (x ^ (x >> 30)) & mask
    x = (x * 0xBF58476D1CE4E5B9) & mask
    x = (x ^ (x >> 27)) & mask
    x = (x * 0x94D049BB133111EB) & mask
    x = (x ^ (x >> 31)) & mask
    return x


def test_record_seed_matches_independent_mix():
    for master in (0, 1, 42, 2**63):
        for index in (0, 1, 2, 999):
            assert derive_record_seed(master, index) == _splitmix_oracle(master, index)


def test_record_seed_pure_and_distinct():
    seeds = [derive_record_seed(7, i) for i in range(100)]
    assert seeds == [derive_record_seed(7, i) for i in range(100)]
    assert len(set(seeds)) == 100
    assert all(0 <= s <= (1 << 64) - 1 for s in seeds)
    # removing a record leaves earlier seeds intact (index-keyed, not chained)
    assert derive_record_seed(7, 0) == seeds[0]


# ---------------------------------------------------------------------------
# manifest parsing
# ---------------------------------------------------------------------------


def test_manifest_empty_file(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text("")
    assert load_manifest(path) == []


def test_manifest_blank_lines_skipped(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text('\n{"id": "a", "image_path": "x.png", "captions": ["c"]}\n\n')
    records = load_manifest(path)
    assert len(records) == 1
    assert records[0].id == "a"
    assert records[0].captions == ("c",)
    assert records[0].attack_text == "c"


def test_manifest_vqa_record_uses_answer(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text('{"id": "q1", "image_path": "x.png", "question": "what color?", "answer": "red"}\n')
    (record,) = load_manifest(path)
    assert record.captions == ()
    assert record.attack_text == "red"


def test_manifest_duplicate_id_names_both_lines(tmp_path):
    rows = [{"id": f"r{i}", "image_path": "x.png", "captions": ["c"]} for i in range(6)]
    rows.append({"id": "r2", "image_path": "y.png", "captions": ["c"]})
    path = tmp_path / "m.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    with pytest.raises(ManifestError, match="line 7.*'r2'.*line 3"):
        load_manifest(path)


def test_manifest_invalid_json_reports_line(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text('{"id": "a", "image_path": "x.png", "captions": ["c"]}\n{not json\n')
    with pytest.raises(ManifestError, match="line 2"):
        load_manifest(path)


@pytest.mark.parametrize(
    "obj, message",
    [
        ({"image_path": "x.png", "captions": ["c"]}, "id"),
        ({"id": "a", "captions": ["c"]}, "image_path"),
        ({"id": "a", "image_path": "x.png"}, "captions .* or question"),
        ({"id": "a", "image_path": "x.png", "captions": []}, "captions .* or question"),
        ({"id": "a", "image_path": "x.png", "captions": ["c", ""]}, "non-empty strings"),
        ({"id": "a", "image_path": "x.png", "captions": "c"}, "list"),
        ({"id": "a", "image_path": "x.png", "question": "q"}, "present together"),
        ({"id": "a", "image_path": "x.png", "captions": ["c"], "extra": 1}, "unknown fields"),
    ],
)
def test_manifest_rejects_malformed_records(tmp_path, obj, message):
    path = tmp_path / "m.jsonl"
    path.write_text(json.dumps(obj) + "\n")
    with pytest.raises(ManifestError, match=message):
        load_manifest(path)


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

FULL_CONFIG = """
master_seed = 99
workers = 2

[attack]
param_step = 0.1
image_step = 0.01
param_iters = 3
image_iters = 4
resize_count = 2
scale_factors = [1.0, 0.5]

[backend]
mode = "remote"
endpoint = "http://127.0.0.1:8800"
timeout = 5.0
max_in_flight = 2

[surrogate]
relight_floor = 0.25
relight_gain = 0.75
nat_weight = 2.0

[recommender]
model = "gpt-4o-mini"
api_key_env = "MY_KEY"

[metrics]
niqe_model = "model.json"
"""


def test_load_config_full(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(FULL_CONFIG)
    cfg = load_config(path)
    assert cfg.master_seed == 99
    assert cfg.workers == 2
    assert cfg.attack.param_step == 0.1
    assert cfg.attack.scale_factors == (1.0, 0.5)
    assert cfg.backend == "remote"
    assert cfg.endpoint == "http://127.0.0.1:8800"
    assert cfg.timeout == 5.0
    assert cfg.max_in_flight == 2
    assert cfg.relight_floor == 0.25
    assert cfg.nat_weight == 2.0
    assert cfg.recommender.model == "gpt-4o-mini"
    assert cfg.recommender.api_key_env == "MY_KEY"
    assert cfg.niqe_model_path == "model.json"


def test_load_config_defaults(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("")
    cfg = load_config(path)
    assert cfg == RunConfig()
    assert cfg.backend == "surrogate"
    assert cfg.master_seed == 0


@pytest.mark.parametrize(
    "text, message",
    [
        ("[attack]\nstep = 0.1\n", "unknown keys.*attack"),
        ("[backend]\nurl = 'x'\n", "unknown keys.*backend"),
        ("bogus_top = 1\n", "unknown keys.*top level"),
        ("[extra]\nx = 1\n", "unknown config sections"),
        ("[recommender]\napi_key = 'sk-live'\n", "unknown keys.*recommender"),
        ("[backend]\nmode = 'remote'\n", "requires an endpoint"),
    ],
)
def test_load_config_rejects_unknowns(tmp_path, text, message):
    path = tmp_path / "run.toml"
    path.write_text(text)
    with pytest.raises(ValueError, match=message):
        load_config(path)


def test_run_config_validation():
    with pytest.raises(ValueError, match="backend"):
        RunConfig(backend="local")
    with pytest.raises(ValueError, match="workers"):
        RunConfig(workers=0)


# ---------------------------------------------------------------------------
# batch runs
# ---------------------------------------------------------------------------


def test_run_batch_empty_manifest():
    report = run_batch(RunConfig(attack=FAST_ATTACK), [])
    assert report.records == []
    assert report.aggregates["n_records"] == 0
    assert report.aggregates["n_ok"] == 0
    # no mean keys at all rather than NaN placeholders
    assert not any(k.startswith("mean_") for k in report.aggregates)


def test_run_batch_attacks_increase_loss(tmp_path):
    manifest = load_manifest(_write_corpus(tmp_path, n=3))
    report = run_batch(RunConfig(attack=FAST_ATTACK, master_seed=5), manifest)
    assert report.aggregates["n_ok"] == 3
    assert report.aggregates["mean_final_loss"] >= report.aggregates["mean_initial_loss"]
    for row in report.records:
        assert row.ok
        assert row.seed == derive_record_seed(5, report.records.index(row))
        assert row.final_loss.total >= row.initial_loss.total
        assert row.loss_gain == row.final_loss.total - row.initial_loss.total
        assert row.recommendation_source == "heuristic"
        assert row.adv_image is not None


def test_run_batch_isolates_per_record_failure(tmp_path):
    manifest = load_manifest(_write_corpus(tmp_path, n=3, missing_ids=("r01",)))
    report = run_batch(RunConfig(attack=FAST_ATTACK), manifest)
    assert report.aggregates["n_ok"] == 2
    assert report.aggregates["n_failed"] == 1
    bad = report.records[1]
    assert not bad.ok
    assert "FileNotFoundError" in bad.error
    assert bad.initial_loss is None
    # neighbors unaffected, and aggregates computed over the survivors only
    assert report.records[0].ok and report.records[2].ok
    assert "mean_final_loss" in report.aggregates


def test_run_batch_deterministic_across_worker_counts(tmp_path):
    manifest = load_manifest(_write_corpus(tmp_path, n=4))
    reports = [
        run_batch(RunConfig(attack=FAST_ATTACK, master_seed=11, workers=w), manifest)
        for w in (1, 3)
    ]
    prints = [report_fingerprint(r) for r in reports]
    assert prints[0] == prints[1]
    for a, b in zip(reports[0].records, reports[1].records):
        assert np.array_equal(a.adv_image.data, b.adv_image.data)


def test_report_fingerprint_masks_timing_only(tmp_path):
    manifest = load_manifest(_write_corpus(tmp_path, n=2))
    report = run_batch(RunConfig(attack=FAST_ATTACK), manifest)
    base = report_fingerprint(report)
    report.records[0].wall_time_s += 123.0
    assert report_fingerprint(report) == base
    assert report_fingerprint(report, include_timing=True) != base
    report.records[0].seed += 1
    assert report_fingerprint(report) != base


# ---------------------------------------------------------------------------
# report artifacts
# ---------------------------------------------------------------------------


@pytest.fixture()
def small_report(tmp_path):
    manifest = load_manifest(_write_corpus(tmp_path, n=3, missing_ids=("r02",)))
    return run_batch(RunConfig(attack=FAST_ATTACK, master_seed=3), manifest)


def test_write_report_artifacts(tmp_path, small_report):
    out = tmp_path / "out"
    written = write_report(small_report, out)
    names = sorted(p.name for p in written)
    assert names == ["r00_adv.png", "r01_adv.png", "report.csv", "report.json"]

    with open(out / "report.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1 + len(small_report.records)
    assert rows[0][0] == "id"
    assert rows[1][0] == "r00"
    assert rows[3][3].startswith("FileNotFoundError")

    # emitted adversarial images decode and match the in-memory results
    for row in small_report.records:
        if row.ok:
            img = png_decode((out / f"{row.record_id}_adv.png").read_bytes())
            assert img.data.shape == row.adv_image.data.shape


def test_report_json_reload_consistent(tmp_path, small_report):
    out = tmp_path / "out"
    write_report(small_report, out)
    data = json.loads((out / "report.json").read_text())
    assert data["master_seed"] == small_report.master_seed
    assert len(data["records"]) == len(small_report.records)
    ok_rows = [r for r in data["records"] if r["ok"]]
    mean_final = sum(r["final_loss"]["total"] for r in ok_rows) / len(ok_rows)
    assert abs(mean_final - data["aggregates"]["mean_final_loss"]) <= 1e-9
    assert abs(mean_final - small_report.aggregates["mean_final_loss"]) <= 1e-9
    for row in ok_rows:
        assert abs(row["loss_gain"] - (row["final_loss"]["total"] - row["initial_loss"]["total"])) <= 1e-12
        assert row["lighting"]["direction"] in ("left_to_right", "right_to_left", "top_to_bottom", "bottom_to_top")


def test_record_to_dict_round_trips_through_json(small_report):
    for row in small_report.records:
        encoded = json.dumps(record_to_dict(row), sort_keys=True)
        assert json.loads(encoded)["id"] == row.record_id


def test_write_report_creates_directory(tmp_path, small_report):
    out = tmp_path / "deep" / "nested" / "dir"
    write_report(small_report, out)
    assert (out / "report.json").exists()
