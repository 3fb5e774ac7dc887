"""Command-line front end.

Subcommands: train, eval, ablate, count, gradcheck, synth. Config files are
JSON with {"model": ..., "data": ..., "train": ...} sections (all optional;
defaults give the toy two-modality 4-class setup). The HYPCA_SEED environment
variable overrides every seed; a --seed flag overrides both.

Output files are byte-for-byte reproducible for a fixed config+seed; wall
clock timing goes to a separate *.timing.json sidecar.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .ablation import ablate, ablation_csv
from .checkpoint import load_checkpoint, save_checkpoint
from .data import DatasetSpec, SyntheticDataset
from .gradsuite import run_scope
from .network import HypcaNet
from .train import ExperimentConfig, count_params_macs, evaluate, result_record, train

SEED_ENV = "HYPCA_SEED"


def _load_config(path: str | None, seed_flag: int | None) -> ExperimentConfig:
    raw = {}
    if path is not None:
        raw = json.loads(Path(path).read_text())
    cfg = ExperimentConfig.from_dict(raw)
    seed = seed_flag
    if seed is None and os.environ.get(SEED_ENV):
        seed = int(os.environ[SEED_ENV])
    if seed is not None:
        cfg = cfg.with_seed(seed)
    return cfg


def _dump_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def cmd_train(args) -> int:
    cfg = _load_config(args.config, args.seed)
    result, net, _ = train(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / "result.json", result_record(result))
    _dump_json(out / "result.timing.json", result["timing"])
    save_checkpoint(out / "checkpoint.bin", net.state_items())
    mean = result["test_metrics"]["mean"]
    print(f"status={result['status']} params={result['param_count']} "
          f"macs={result['mac_count']} test_accuracy={mean['accuracy']:.4f}")
    return 0 if result["status"] == "ok" else 1


def cmd_eval(args) -> int:
    cfg = _load_config(args.config, args.seed)
    net = HypcaNet(cfg.model)
    net.load_state(load_checkpoint(args.checkpoint))
    dataset = SyntheticDataset(cfg.data)
    _, _, test_idx = dataset.splits()
    metrics = evaluate(net, dataset, test_idx, cfg.train.batch_size)
    payload = {"config_digest": cfg.digest(), "test_metrics": metrics}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _dump_json(out / "eval.json", payload)
    print(json.dumps(payload, sort_keys=True, indent=2))
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_config(args.config, args.seed)
    rows = ablate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / "ablation.json", rows)
    (out / "ablation.csv").write_text(ablation_csv(rows))
    failures = [r["row"] for r in rows if r["status"] != "ok"]
    print(f"rows={len(rows)} failures={failures or 'none'}")
    return 0


def cmd_count(args) -> int:
    cfg = _load_config(args.config, args.seed)
    params, macs = count_params_macs(cfg.model, cfg.data.image_size)
    print(json.dumps({"params": params, "macs": macs,
                      "image_size": cfg.data.image_size}, sort_keys=True))
    return 0


def cmd_gradcheck(args) -> int:
    rows = run_scope(args.scope)
    bad = 0
    for r in rows:
        flag = "ok " if r["ok"] else "FAIL"
        print(f"[{flag}] {r['name']:<28} error={r['error']:.3e} tol={r['tol']:.0e}")
        bad += not r["ok"]
    print(f"{len(rows) - bad}/{len(rows)} checks passed")
    return 1 if bad else 0


def cmd_synth(args) -> int:
    spec = DatasetSpec.from_dict(json.loads(Path(args.spec).read_text())) \
        if args.spec else DatasetSpec()
    if args.seed is not None:
        spec = DatasetSpec.from_dict({**spec.to_dict(), "seed": args.seed})
    elif os.environ.get(SEED_ENV):
        spec = DatasetSpec.from_dict({**spec.to_dict(), "seed": int(os.environ[SEED_ENV])})
    ds = SyntheticDataset(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, imgs in enumerate(ds.images):
        np.save(out / f"images_m{i}.npy", imgs)
    np.save(out / "labels.npy", ds.labels)
    (out / "spec.json").write_text(spec.to_json())
    print(f"wrote {spec.n} samples x {spec.modalities} modalities to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypca", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network and write result + checkpoint")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p.add_argument("--config", default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ablate", help="run the module/component/wiring grids")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("count", help="parameter and MAC counts for a config")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_count)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--scope", choices=("ops", "blocks", "network"), required=True)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("synth", help="materialize a synthetic dataset")
    p.add_argument("--spec", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
