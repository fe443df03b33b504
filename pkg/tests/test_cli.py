import filecmp
import json
from pathlib import Path

import pytest

from gmwalk.cli import CampaignSpec, evaluate_run, main, run_campaign
from gmwalk.manifold import ProjectionConfig, check_on_manifold
from gmwalk.motion_io import load_motion
from gmwalk.synthetic import generate_dataset


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "корpus"
    out = out.parent / "corpus"
    generate_dataset(out, num_classes=4, samples_per_class=6, seed=11, num_frames=24)
    return out


@pytest.fixture(scope="module")
def model_path(dataset, tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "model.json"
    assert main(["train", "--dataset", str(dataset), "--out", str(path)]) == 0
    return path


def test_gen_data_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(["gen-data", "--out", str(a), "--classes", "2", "--per-class", "2",
                 "--frames", "12", "--seed", "7"]) == 0
    assert main(["gen-data", "--out", str(b), "--classes", "2", "--per-class", "2",
                 "--frames", "12", "--seed", "7"]) == 0
    files_a = sorted(p.name for p in a.iterdir())
    assert files_a == sorted(p.name for p in b.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(a, b, files_a, shallow=False)
    assert not mismatch and not errors


def test_generated_motions_are_on_manifold(dataset):
    cfg = ProjectionConfig()
    for path in sorted(dataset.glob("sample_*.json"))[:6]:
        mo = load_motion(path)
        assert check_on_manifold(mo, mo.skeleton, cfg).on_manifold


def test_campaign_end_to_end(dataset, model_path, tmp_path):
    out = tmp_path / "run"
    spec = CampaignSpec(
        dataset=str(dataset),
        out=str(out),
        classifier=str(model_path),
        samples=3,
        max_iters=12,
        seed=5,
        budget=200_000,
        epsilon=0.0,
    )
    assert run_campaign(spec) == 0
    assert (out / "run.json").exists()
    assert (out / "run_meta.json").exists()
    assert (out / "report.csv").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["n_samples"] == 3
    for motion_dir in (out / "motions").iterdir():
        assert (motion_dir / "original.json").exists()
        assert (motion_dir / "adversarial.json").exists()
        assert (motion_dir / "trace.csv").exists()
        result = json.loads((motion_dir / "result.json").read_text())
        assert result["success"]
        assert result["final_l"] < result["initial_l"]


def test_campaign_reruns_are_byte_identical(dataset, model_path, tmp_path):
    import shutil

    out = tmp_path / "run"
    spec = CampaignSpec(
        dataset=str(dataset), out=str(out), classifier=str(model_path),
        samples=2, max_iters=8, seed=9, epsilon=0.0,
    )
    assert run_campaign(spec) == 0
    stash = tmp_path / "first"
    shutil.move(out, stash)
    assert run_campaign(spec) == 0

    compare = ["run.json", "report.csv", "report.json"]
    for motion_dir in sorted((stash / "motions").iterdir()):
        rel = motion_dir.relative_to(stash)
        for file in ("original.json", "adversarial.json", "trace.csv", "result.json"):
            compare.append(str(rel / file))
    for rel in compare:
        assert (stash / rel).read_bytes() == (out / rel).read_bytes(), rel
    # wall-clock metadata is quarantined in run_meta.json and may differ
    assert (out / "run_meta.json").exists()


def test_parallel_campaign_matches_serial(dataset, model_path, tmp_path):
    outs = []
    for name, workers in (("serial", 1), ("par", 2)):
        out = tmp_path / name
        spec = CampaignSpec(
            dataset=str(dataset), out=str(out), classifier=str(model_path),
            samples=2, max_iters=6, seed=3, parallel=workers, epsilon=0.0,
        )
        assert run_campaign(spec) == 0
        outs.append(out)
    for motion_dir in sorted((outs[0] / "motions").iterdir()):
        rel = motion_dir.relative_to(outs[0])
        adv_a = (outs[0] / rel / "adversarial.json").read_bytes()
        adv_b = (outs[1] / rel / "adversarial.json").read_bytes()
        assert adv_a == adv_b


def test_eval_reproduces_report(dataset, model_path, tmp_path):
    out = tmp_path / "run"
    spec = CampaignSpec(
        dataset=str(dataset), out=str(out), classifier=str(model_path),
        samples=2, max_iters=6, seed=4, epsilon=0.0,
    )
    run_campaign(spec)
    first = (out / "report.csv").read_bytes()
    assert main(["eval", "--run", str(out)]) == 0
    assert (out / "report.csv").read_bytes() == first


def test_report_prints_table_row(dataset, model_path, tmp_path, capsys):
    out = tmp_path / "run"
    spec = CampaignSpec(
        dataset=str(dataset), out=str(out), classifier=str(model_path),
        samples=2, max_iters=6, seed=4, epsilon=0.0,
    )
    run_campaign(spec)
    capsys.readouterr()
    assert main(["report", "--run", str(out)]) == 0
    row = capsys.readouterr().out.strip()
    parts = [p.strip() for p in row.split(",")]
    assert parts[0].startswith("builtin:")
    assert parts[1] == "MP"
    assert len(parts) == 7


def test_unreachable_endpoint_marks_rows_failed(dataset, tmp_path, capsys):
    out = tmp_path / "run"
    spec = CampaignSpec(
        dataset=str(dataset), out=str(out), endpoint="127.0.0.1:1",
        samples=2, max_iters=5, seed=2,
    )
    assert run_campaign(spec) == 1
    for motion_dir in (out / "motions").iterdir():
        result = json.loads((motion_dir / "result.json").read_text())
        assert not result["success"]
        assert "TransportError" in result["error"]


def test_config_file_with_flag_override(dataset, model_path, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "dataset": str(dataset),
        "classifier": str(model_path),
        "samples": 2,
        "max_iters": 5,
        "seed": 6,
        "out": str(tmp_path / "from_config"),
        "epsilon": 0.0,
    }))
    override = tmp_path / "override_out"
    assert main(["attack", "--config", str(config), "--out", str(override)]) == 0
    assert override.exists()
    assert not (tmp_path / "from_config").exists()


def test_campaign_spec_validation(dataset, model_path):
    with pytest.raises(ValueError):
        CampaignSpec(dataset=str(dataset), out="x")  # no classifier at all
    with pytest.raises(ValueError):
        CampaignSpec(dataset=str(dataset), out="x", classifier=str(model_path),
                     endpoint="127.0.0.1:9", samples=1)
