"""End-to-end checks of the vidsum command line."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from vidsum.annotation import load_annotation, load_summary
from vidsum.cli import main
from vidsum.gtgen import BankEntry, MixtureConfig, ReferenceBank, save_reference_bank
from vidsum.learn import MixtureModel, save_model, save_scores


runner = CliRunner()


def run(*args):
    return runner.invoke(main, [str(a) for a in args])


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One synth corpus, two banks, a trained model, shared by the tests below."""
    root = tmp_path_factory.mktemp("pipeline")
    videos = root / "videos"
    r = run("--seed", 9, "--output-dir", videos, "synth",
            "--n-videos", 2, "--n-snippets", 60, "--n-mega-events", 2)
    assert r.exit_code == 0, r.output
    annotations = sorted(videos.glob("synth-*.json"))
    assert len(annotations) == 2

    banks = []
    for i, apath in enumerate(annotations):
        bdir = root / f"bank_{i}"
        r = run("--seed", 3, "--output-dir", bdir, "generate-gt", apath,
                "--grid-levels", "0,1", "--n-summaries", 20)
        assert r.exit_code == 0, r.output
        banks.append(bdir)

    model_dir = root / "model"
    r = run("--seed", 1, "--output-dir", model_dir, "train",
            "--annotation", annotations[0], "--bank", banks[0],
            "--annotation", annotations[1], "--bank", banks[1],
            "--epochs", 2, "--loss-weights", "F1=1", "--loss-scale", 0.05)
    assert r.exit_code == 0, r.output
    assert "trained: w_fl=" in r.output

    return {"root": root, "annotations": annotations, "banks": banks,
            "model": model_dir / "model.json"}


# ---------------------------------------------------------------------------
# synth and validate

def test_synth_writes_corpus_and_manifest(tmp_path):
    out = tmp_path / "corpus"
    r = run("--seed", 5, "--output-dir", out, "synth", "--n-videos", 3,
            "--n-snippets", 20, "--prefix", "clip")
    assert r.exit_code == 0
    files = sorted(out.glob("clip-*.json"))
    assert len(files) == 3
    manifest = read_json(out / "manifest.json")
    assert manifest["command"] == "synth"
    assert manifest["seed"] == 5
    assert manifest["flags"]["n_videos"] == 3
    assert "timestamp" in manifest


def test_synth_rejects_bad_spec(tmp_path):
    r = run("--output-dir", tmp_path / "x", "synth", "--n-snippets", 0)
    assert r.exit_code == 2
    assert "error:" in r.stderr


def test_synth_jobs_flag_changes_nothing(tmp_path):
    one = tmp_path / "serial"
    two = tmp_path / "parallel"
    r1 = run("--seed", 4, "--output-dir", one, "synth", "--n-videos", 2, "--n-snippets", 15)
    r2 = run("--seed", 4, "--jobs", 2, "--output-dir", two, "synth", "--n-videos", 2, "--n-snippets", 15)
    assert r1.exit_code == 0 and r2.exit_code == 0
    for f in sorted(one.glob("synth-*.json")):
        assert f.read_bytes() == (two / f.name).read_bytes()


def test_validate_accepts_generated_files(pipeline):
    r = run("validate", *pipeline["annotations"])
    assert r.exit_code == 0
    assert r.output.count(": OK") == 2


def test_validate_flags_violations(pipeline, tmp_path):
    raw = read_json(pipeline["annotations"][0])
    raw["rating_map"][0]["rating"] = 99
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(raw), encoding="utf-8")
    r = run("validate", bad)
    assert r.exit_code == 1
    assert "violation" in r.output
    assert "rating-range" in r.output


def test_validate_exit_2_on_garbage(tmp_path):
    bad = tmp_path / "broken.json"
    bad.write_text("{never valid", encoding="utf-8")
    r = run("validate", bad)
    assert r.exit_code == 2


def test_global_flag_validation(tmp_path):
    assert run("--jobs", 0, "synth").exit_code == 2
    assert run("--budget-min-pct", 6, "--budget-max-pct", 5, "synth").exit_code == 2


# ---------------------------------------------------------------------------
# generate-gt

def test_generate_gt_outputs_and_determinism(pipeline, tmp_path):
    apath = pipeline["annotations"][0]
    first, second = tmp_path / "b1", tmp_path / "b2"
    for out in (first, second):
        r = run("--seed", 3, "--output-dir", out, "generate-gt", apath,
                "--grid-levels", "0,1", "--n-summaries", 20)
        assert r.exit_code == 0, r.output
        assert (out / "bank.json").exists()

    members = sorted(p.name for p in first.glob("summary_*.json"))
    assert members, "bank has no member files"
    assert (first / "bank.json").read_bytes() == (second / "bank.json").read_bytes()
    for name in members:
        assert (first / name).read_bytes() == (second / name).read_bytes()

    m1, m2 = read_json(first / "manifest.json"), read_json(second / "manifest.json")
    m1.pop("timestamp"), m2.pop("timestamp")
    assert m1 == m2

    # and it matches the bank the fixture built from the same seed and flags
    assert (first / "bank.json").read_bytes() == (pipeline["banks"][0] / "bank.json").read_bytes()


def test_generate_gt_rejects_bad_grid(pipeline, tmp_path):
    r = run("--output-dir", tmp_path / "x", "generate-gt",
            pipeline["annotations"][0], "--grid-levels", "0,abc")
    assert r.exit_code == 2
    assert "grid-levels" in r.stderr


def test_generate_gt_refuses_invalid_annotation(pipeline, tmp_path):
    raw = read_json(pipeline["annotations"][0])
    raw["rating_map"][0]["rating"] = 99
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(raw), encoding="utf-8")
    r = run("--output-dir", tmp_path / "x", "generate-gt", bad)
    assert r.exit_code == 1
    assert "fails validation" in r.stderr


# ---------------------------------------------------------------------------
# evaluate and report

def test_evaluate_with_bank(pipeline, tmp_path):
    bank = pipeline["banks"][0]
    candidates = sorted(bank.glob("summary_*.json"))[:2]
    out = tmp_path / "eval"
    r = run("--output-dir", out, "evaluate", *candidates,
            "--annotation", pipeline["annotations"][0], "--bank", bank)
    assert r.exit_code == 0, r.output
    assert "AF1" in r.output and "summary_000" in r.output

    payload = read_json(out / "evaluation.json")
    assert len(payload["reports"]) == 2
    for entry in payload["reports"]:
        assert entry["AF1"] is not None
        assert 0 <= entry["IMP"] <= 100


def test_evaluate_without_bank_leaves_f1_blank(pipeline, tmp_path):
    bank = pipeline["banks"][0]
    candidate = sorted(bank.glob("summary_*.json"))[0]
    out = tmp_path / "eval"
    r = run("--output-dir", out, "evaluate", candidate,
            "--annotation", pipeline["annotations"][0])
    assert r.exit_code == 0
    entry = read_json(out / "evaluation.json")["reports"][0]
    assert entry["AF1"] is None and entry["MF1"] is None


def test_evaluate_rejects_cross_video_candidate(pipeline, tmp_path):
    other_bank = pipeline["banks"][1]
    candidate = sorted(other_bank.glob("summary_*.json"))[0]
    r = run("--output-dir", tmp_path / "x", "evaluate", candidate,
            "--annotation", pipeline["annotations"][0])
    assert r.exit_code == 2
    assert "video" in r.stderr


def test_report_renders_evaluation_files(pipeline, tmp_path):
    bank = pipeline["banks"][0]
    candidate = sorted(bank.glob("summary_*.json"))[0]
    out = tmp_path / "eval"
    r = run("--output-dir", out, "evaluate", candidate,
            "--annotation", pipeline["annotations"][0], "--bank", bank)
    assert r.exit_code == 0
    r = run("report", out / "evaluation.json")
    assert r.exit_code == 0
    assert "summary_000" in r.output and "IMP" in r.output


def test_report_bank_consistency(pipeline):
    r = run("report", "--bank", pipeline["banks"][0],
            "--annotation", pipeline["annotations"][0])
    assert r.exit_code == 0, r.output
    assert "summary_000" in r.output
    assert "AF1" in r.output


def test_report_usage_errors(pipeline, tmp_path):
    assert run("report").exit_code == 2
    assert run("report", "--bank", pipeline["banks"][0]).exit_code == 2

    a = load_annotation(pipeline["annotations"][0])
    only = load_summary(sorted(pipeline["banks"][0].glob("summary_*.json"))[0], a)
    bank = ReferenceBank(a.video_id, (only,),
                         (BankEntry(MixtureConfig(lam_imp=1.0), only.total_duration, "grid"),), 0)
    lonely = tmp_path / "lonely"
    lonely.mkdir()
    save_reference_bank(bank, lonely)
    r = run("report", "--bank", lonely, "--annotation", pipeline["annotations"][0])
    assert r.exit_code == 1
    assert "at least 2" in r.stderr


# ---------------------------------------------------------------------------
# baseline

def test_baseline_random_batch(pipeline, tmp_path):
    out = tmp_path / "base"
    apath = pipeline["annotations"][0]
    r = run("--seed", 2, "--output-dir", out, "baseline",
            "--annotation", apath, "--kind", "random", "--count", 3, "--budget-pct", 4)
    assert r.exit_code == 0
    a = load_annotation(apath)
    files = sorted(out.glob("baseline_random_*.json"))
    assert len(files) == 3
    budget = 0.04 * a.duration
    for f in files:
        s = load_summary(f, a)
        assert s.total_duration <= budget + 1e-9
    assert read_json(out / "manifest.json")["flags"]["kind"] == "random"


def test_baseline_uniform_single(pipeline, tmp_path):
    out = tmp_path / "base"
    r = run("--output-dir", out, "baseline",
            "--annotation", pipeline["annotations"][0], "--kind", "uniform")
    assert r.exit_code == 0
    assert (out / "baseline_uniform_000.json").exists()


def test_baseline_zero_budget_fails(pipeline, tmp_path):
    r = run("--output-dir", tmp_path / "x", "baseline",
            "--annotation", pipeline["annotations"][0], "--budget-pct", 0)
    assert r.exit_code == 2


# ---------------------------------------------------------------------------
# train and infer

def test_train_writes_model_and_manifest(pipeline):
    model = read_json(pipeline["model"])
    assert model["w_fl"] >= 0 and model["w_imp"] >= 0
    assert set(model["loss_weights"]) == {"F1", "IMP", "MC", "DT", "DC", "DSi"}
    manifest = read_json(pipeline["model"].parent / "manifest.json")
    assert manifest["command"] == "train"
    assert manifest["flags"]["epochs"] == 2


def test_train_count_mismatch_is_usage_error(pipeline, tmp_path):
    r = run("--output-dir", tmp_path / "x", "train",
            "--annotation", pipeline["annotations"][0],
            "--bank", pipeline["banks"][0], "--bank", pipeline["banks"][1])
    assert r.exit_code == 2


def test_train_rejects_mismatched_bank(pipeline, tmp_path):
    r = run("--output-dir", tmp_path / "x", "train",
            "--annotation", pipeline["annotations"][0],
            "--bank", pipeline["banks"][1], "--epochs", 1)
    assert r.exit_code == 2
    assert "video" in r.stderr


def test_infer_with_model(pipeline, tmp_path):
    # a hand-picked mixture rather than the fixture's toy training run,
    # which is free to settle on degenerate weights
    mpath = tmp_path / "model.json"
    save_model(MixtureModel(0.5, 1.0), mpath)
    out = tmp_path / "inf"
    apath = pipeline["annotations"][0]
    r = run("--output-dir", out, "infer", "--annotation", apath,
            "--model", mpath, "--budget-pct", 4)
    assert r.exit_code == 0, r.output
    a = load_annotation(apath)
    s = load_summary(out / "summary.json", a)
    assert s.indices
    assert s.total_duration <= 0.04 * a.duration + 1e-9


def test_infer_with_scores_only_uses_knapsack(pipeline, tmp_path):
    apath = pipeline["annotations"][0]
    a = load_annotation(apath)
    spath = tmp_path / "scores.json"
    save_scores(a.video_id, [float(i % 7) for i in range(a.n_snippets)], spath)
    out = tmp_path / "inf"
    r = run("--output-dir", out, "infer", "--annotation", apath,
            "--scores", spath, "--budget-pct", 4)
    assert r.exit_code == 0, r.output
    s = load_summary(out / "summary.json", a)
    assert s.total_duration <= 0.04 * a.duration + 1e-9


def test_infer_needs_model_or_scores(pipeline, tmp_path):
    r = run("--output-dir", tmp_path / "x", "infer",
            "--annotation", pipeline["annotations"][0])
    assert r.exit_code == 2


def test_infer_rejects_foreign_scores(pipeline, tmp_path):
    spath = tmp_path / "scores.json"
    save_scores("somebody-else", [1.0, 2.0], spath)
    r = run("--output-dir", tmp_path / "x", "infer",
            "--annotation", pipeline["annotations"][0], "--scores", spath)
    assert r.exit_code == 2
    assert "video" in r.stderr
