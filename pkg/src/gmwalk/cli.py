"""Command-line entry point.

Subcommands:

    gen-data   synthesize a labeled motion corpus
    train      fit the built-in nearest-centroid classifier on a corpus
    attack     run an attack campaign against a classifier
    eval       recompute the metrics report from a finished campaign
    report     print a campaign report as a benchmark-style table row

A JSON config file may mirror any flag (keys use underscores); explicit flags
override the file. Campaign outputs are reproducible byte-for-byte for a
fixed spec and seed; wall-clock metadata lives only in run_meta.json.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import platform
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .attack import AttackConfig, gmw_attack
from .classifier import CentroidModel, centroid_gateway, train_centroid
from .errors import GmwalkError
from .metrics import compute_metrics, format_report_row, write_report_csv, write_report_json
from .motion_io import load_motion, save_motion
from .synthetic import generate_dataset
from .wire import remote_gateway


@dataclass
class CampaignSpec:
    dataset: str
    out: str
    classifier: str | None = None  # path to a centroid model file
    endpoint: str | None = None  # host:port or stdio:<command>
    mode: str = "untargeted"
    target_class: int | None = None
    samples: int = 10
    seed: int = 0
    parallel: int = 1
    pool_size: int | None = 64
    max_iters: int = 500
    epsilon: float | None = None
    no_mp: bool = False
    budget: int | None = 1_000_000
    w: float | None = None
    model_label: str | None = None

    def __post_init__(self):
        if (self.classifier is None) == (self.endpoint is None):
            raise ValueError("exactly one of classifier / endpoint must be set")
        if self.samples < 1:
            raise ValueError("samples must be positive")
        if self.parallel < 1:
            raise ValueError("parallel must be positive")

    def attack_config(self, rng_seed: int, target_class: int | None) -> AttackConfig:
        kwargs = dict(
            mode=self.mode,
            target_class=target_class,
            max_iters=self.max_iters,
            epsilon=self.epsilon,
            manifold_projection=not self.no_mp,
            rng_seed=rng_seed,
            query_budget=self.budget,
        )
        if self.w is not None:
            kwargs["w"] = self.w
        return AttackConfig(**kwargs)

    def label(self) -> str:
        if self.model_label:
            return self.model_label
        if self.classifier:
            return f"builtin:{Path(self.classifier).stem}"
        return f"remote:{self.endpoint}"


def _derive_seed(campaign_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([campaign_seed, index]).generate_state(1)[0])


def _build_gateway(spec: CampaignSpec):
    if spec.classifier is not None:
        model = CentroidModel.load(spec.classifier)
        return centroid_gateway(model, budget=spec.budget)
    return remote_gateway(spec.endpoint, budget=spec.budget)


def _attack_one(job: dict) -> dict:
    """One campaign entry: load, attack, persist. Runs in a worker process."""
    spec = CampaignSpec(**job["spec"])
    motion_dir = Path(job["motion_dir"])
    motion_dir.mkdir(parents=True, exist_ok=True)
    x = load_motion(job["target_file"])
    save_motion(x, motion_dir / "original.json")

    summary = {
        "id": job["motion_id"],
        "source_file": Path(job["target_file"]).name,
        "target_class": job["target_class"],
        "mode": spec.mode,
        "rng_seed": job["rng_seed"],
        "success": False,
        "status": None,
        "queries": None,
        "initial_l": None,
        "final_l": None,
        "original_label": None,
        "error": None,
    }
    try:
        pool = [load_motion(path) for path in job["pool_files"]]
        gateway = _build_gateway(spec)
        cfg = spec.attack_config(job["rng_seed"], job["target_class"])
        result = gmw_attack(x, pool, x.skeleton, cfg, gateway)
        save_motion(result.adversarial, motion_dir / "adversarial.json")
        result.write_trace(motion_dir / "trace.csv")
        summary.update(
            success=result.success,
            status=result.status,
            queries=result.queries,
            initial_l=result.initial_l,
            final_l=result.final_l,
            original_label=result.original_label,
        )
    except GmwalkError as exc:
        summary["error"] = f"{type(exc).__name__}: {exc}"
    (motion_dir / "result.json").write_text(
        json.dumps(summary, sort_keys=True, allow_nan=False)
    )
    return summary


def run_campaign(spec: CampaignSpec) -> int:
    """Attack sampled dataset motions and write all artifacts; 0 iff all
    attacks succeeded."""
    t_start = time.time()
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    files = sorted(Path(spec.dataset).glob("sample_*.json"))
    if not files:
        raise FileNotFoundError(f"no sample_*.json files under {spec.dataset}")
    if spec.samples > len(files):
        raise ValueError(f"requested {spec.samples} samples from {len(files)} motions")

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([spec.seed, 0])))
    picked = sorted(rng.choice(len(files), size=spec.samples, replace=False).tolist())
    pool_order = rng.permutation(len(files)).tolist()

    labels = {i: load_motion(files[i]).label_hint for i in range(len(files))}
    jobs = []
    for motion_id, file_index in enumerate(picked):
        pool_indices = [i for i in pool_order if i != file_index]
        if spec.pool_size is not None:
            pool_indices = pool_indices[: spec.pool_size]
        target_class = spec.target_class
        if spec.mode == "targeted" and target_class is None:
            # random target differing from the stored label
            choices = sorted({c for c in labels.values() if c is not None and c != labels[file_index]})
            if not choices:
                raise ValueError("cannot draw target classes: dataset has no labels")
            target_class = int(choices[int(rng.integers(len(choices)))])
        jobs.append(
            {
                "spec": asdict(spec),
                "motion_id": f"{motion_id:04d}",
                "target_file": str(files[file_index]),
                "pool_files": [str(files[i]) for i in pool_indices],
                "target_class": target_class,
                "rng_seed": _derive_seed(spec.seed, motion_id),
                "motion_dir": str(out / "motions" / f"{motion_id:04d}"),
            }
        )

    run_doc = {
        "spec": asdict(spec),
        "dataset_files": [f.name for f in files],
        "attacked": [jobs[i]["target_file"] for i in range(len(jobs))],
        "environment": {
            "package": f"gmwalk {__version__}",
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
    }
    (out / "run.json").write_text(json.dumps(run_doc, sort_keys=True, allow_nan=False))

    if spec.parallel > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=spec.parallel) as pool:
            summaries = list(pool.map(_attack_one, jobs))
    else:
        summaries = [_attack_one(job) for job in jobs]
    summaries.sort(key=lambda s: s["id"])

    if any(s["success"] for s in summaries):
        evaluate_run(out, model_label=spec.label(), mp_flag=not spec.no_mp)
    else:
        print("no attack completed; skipping the metrics report", file=sys.stderr)

    (out / "run_meta.json").write_text(
        json.dumps({"started_unix": t_start, "elapsed_s": time.time() - t_start}, sort_keys=True)
    )
    failed = [s for s in summaries if not s["success"]]
    for s in failed:
        print(f"motion {s['id']}: FAILED ({s['error']})", file=sys.stderr)
    print(
        f"{len(summaries) - len(failed)}/{len(summaries)} attacks succeeded; "
        f"outputs in {out}"
    )
    return 0 if not failed else 1


def evaluate_run(
    run_dir: str | Path,
    model_label: str | None = None,
    mp_flag: bool | None = None,
    angle_space: bool = True,
):
    """Compute the metrics report from the persisted motion pairs.

    This is the only aggregation path: the attack command itself calls it, so
    re-evaluating a run directory reproduces the report exactly.
    """
    run_dir = Path(run_dir)
    if model_label is None or mp_flag is None:
        run_doc = json.loads((run_dir / "run.json").read_text())
        spec = CampaignSpec(**run_doc["spec"])
        model_label = model_label if model_label is not None else spec.label()
        mp_flag = mp_flag if mp_flag is not None else not spec.no_mp
    pairs = []
    for motion_dir in sorted((run_dir / "motions").iterdir()):
        adv_path = motion_dir / "adversarial.json"
        if not adv_path.exists():
            continue  # failed attack; reported via result.json and exit code
        pairs.append((load_motion(motion_dir / "original.json"), load_motion(adv_path)))
    if not pairs:
        raise FileNotFoundError(f"no completed attacks under {run_dir}")
    report = compute_metrics(pairs, pairs[0][0].skeleton, angle_space_available=angle_space)
    write_report_csv(report, run_dir / "report.csv", model=model_label, mp_flag=mp_flag)
    write_report_json(report, run_dir / "report.json", model=model_label, mp_flag=mp_flag)
    return report


def _add_campaign_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file mirroring the flags")
    parser.add_argument("--dataset", help="directory produced by gen-data")
    parser.add_argument("--classifier", help="built-in centroid model file")
    parser.add_argument("--endpoint", help="remote classifier (host:port or stdio:<cmd>)")
    parser.add_argument("--mode", choices=("untargeted", "targeted"))
    parser.add_argument("--target-class", type=int, dest="target_class")
    parser.add_argument("--max-iters", type=int, dest="max_iters")
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--no-mp", action="store_const", const=True, dest="no_mp")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--budget", type=int)
    parser.add_argument("--samples", type=int)
    parser.add_argument("--parallel", type=int)
    parser.add_argument("--pool-size", type=int, dest="pool_size")
    parser.add_argument("--w", type=float)
    parser.add_argument("--out")
    parser.add_argument("--model-label", dest="model_label")


def _merge_config(args: argparse.Namespace, keys: list[str]) -> dict:
    merged = {}
    if getattr(args, "config", None):
        file_values = json.loads(Path(args.config).read_text())
        unknown = set(file_values) - set(keys)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_values)
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="gmwalk", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="synthesize a labeled corpus")
    gen.add_argument("--out", required=True)
    gen.add_argument("--classes", type=int, default=8)
    gen.add_argument("--per-class", type=int, default=40, dest="per_class")
    gen.add_argument("--frames", type=int, default=60)
    gen.add_argument("--fps", type=float, default=30.0)
    gen.add_argument("--seed", type=int, default=0)

    train = sub.add_parser("train", help="fit the built-in classifier")
    train.add_argument("--dataset", required=True)
    train.add_argument("--out", required=True)

    attack = sub.add_parser("attack", help="run an attack campaign")
    _add_campaign_flags(attack)

    ev = sub.add_parser("eval", help="recompute the report from a run directory")
    ev.add_argument("--run", required=True)
    ev.add_argument("--model-label", dest="model_label")
    ev.add_argument("--no-angle-metrics", action="store_true")

    rep = sub.add_parser("report", help="print the report as a table row")
    rep.add_argument("--run", required=True)

    args = parser.parse_args(argv)

    if args.command == "gen-data":
        paths = generate_dataset(
            args.out,
            num_classes=args.classes,
            samples_per_class=args.per_class,
            seed=args.seed,
            num_frames=args.frames,
            frame_dt=1.0 / args.fps,
        )
        manifest = {
            "num_classes": args.classes,
            "samples_per_class": args.per_class,
            "seed": args.seed,
            "num_frames": args.frames,
            "frame_dt": 1.0 / args.fps,
            "files": [p.name for p in paths],
        }
        (Path(args.out) / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, allow_nan=False)
        )
        print(f"wrote {len(paths)} motions to {args.out}")
        return 0

    if args.command == "train":
        files = sorted(Path(args.dataset).glob("sample_*.json"))
        dataset = []
        for path in files:
            mo = load_motion(path)
            if mo.label_hint is None:
                raise ValueError(f"{path} has no label")
            dataset.append((mo, mo.label_hint))
        model = train_centroid(dataset)
        model.save(args.out)
        print(f"trained {model.num_classes}-class centroid model on {len(dataset)} motions")
        return 0

    if args.command == "attack":
        keys = [f.name for f in CampaignSpec.__dataclass_fields__.values()]
        spec = CampaignSpec(**_merge_config(args, keys))
        return run_campaign(spec)

    if args.command == "eval":
        report = evaluate_run(
            args.run,
            model_label=args.model_label,
            angle_space=not args.no_angle_metrics,
        )
        print(f"evaluated {report.sample_count} pairs; report written to {args.run}")
        return 0

    if args.command == "report":
        doc = json.loads((Path(args.run) / "report.json").read_text())
        print(
            format_report_row(
                l=doc["l"],
                delta_a=doc["delta_a"],
                delta_alpha=doc["delta_alpha"],
                bone_dev_pct=doc["bone_dev_pct"],
                om_pct=doc["om_pct"],
                model=doc["model"],
                mp_flag=doc["mp_flag"] == "MP",
            )
        )
        return 0

    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
