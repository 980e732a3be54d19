"""Command-line entry point: dataset generation, MI estimation, training,
cross-validated evaluation, and subgraph explanation.

All randomness derives from --seed; outputs land under --out with fixed
filenames. Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import warnings
from pathlib import Path

import numpy as np
import torch

from .data import (Dataset, SyntheticConfig, generate_synthetic, load_dataset,
                   read_matrix_csv, save_dataset, write_matrix_csv)
from .encoder import load_checkpoint, save_checkpoint
from .entropy import EntropyConfig, mutual_information
from .evaluation import evaluate, kfold_split, loso_split, report_to_csv, report_to_json
from .generator import edge_scores
from .interpret import (SystemMap, dominant_subgraph, profile_systems,
                        write_edge_list, write_ranking_json, write_system_auc_csv)
from .selftest import run_selftest
from .training import (Model, TrainConfig, accuracy, fit, stack_graphs,
                       write_train_log)

_SECTION_FIELDS = {
    "synthetic": {f.name for f in dataclasses.fields(SyntheticConfig)},
    "train": {f.name for f in dataclasses.fields(TrainConfig)},
    "entropy": {f.name for f in dataclasses.fields(EntropyConfig)},
    "eval": {"scheme", "k"},
}


def load_config(path) -> dict:
    """Parse the run config, rejecting unknown sections or keys outright."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing config file: {path}")
    data = json.loads(path.read_text())
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    for key, value in data.items():
        if key == "seed":
            continue
        if key not in _SECTION_FIELDS:
            raise ValueError(
                f"unknown config key {key!r}; known sections: "
                f"{sorted(_SECTION_FIELDS)} plus 'seed'"
            )
        if not isinstance(value, dict):
            raise ValueError(f"config section {key!r} must be an object")
        unknown = set(value) - _SECTION_FIELDS[key]
        if unknown:
            raise ValueError(
                f"unknown keys in config section {key!r}: {sorted(unknown)}; "
                f"allowed: {sorted(_SECTION_FIELDS[key])}"
            )
    return data


def _section(config: dict, name: str) -> dict:
    return dict(config.get(name, {}))


def _resolve_seed(args, config: dict, section: dict) -> int:
    if args.seed is not None:
        return args.seed
    if "seed" in section:
        return int(section["seed"])
    return int(config.get("seed", 0))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen(args) -> int:
    config = load_config(args.config)
    section = _section(config, "synthetic")
    if not section:
        raise ValueError("gen requires a 'synthetic' section in the config")
    section["seed"] = _resolve_seed(args, config, section)
    cfg = SyntheticConfig(**section)
    dataset = generate_synthetic(cfg)
    manifest = save_dataset(dataset, _out_dir(args))
    print(f"wrote {len(dataset)} subjects to {manifest.parent}")
    return 0


def cmd_mi(args) -> int:
    config = load_config(args.config) if args.config else {}
    section = _section(config, "entropy")
    if args.alpha is not None:
        section["renyi_alpha"] = args.alpha
    if args.k is not None:
        section["knn_k"] = args.k
    cfg = EntropyConfig(**section)
    a = read_matrix_csv(args.a)
    b = read_matrix_csv(args.b)
    value = float(mutual_information(a, b, cfg))
    print(f"mi_bits={value!r}")
    return 0


def _stratified_val_split(dataset: Dataset, fraction: float, seed: int):
    rng = np.random.default_rng(seed)
    labels = dataset.labels
    val: list[int] = []
    for c in (0, 1):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        n_val = min(len(idx) - 1, max(1, round(fraction * len(idx))))
        val.extend(int(i) for i in idx[:n_val])
    val_set = set(val)
    train = [i for i in range(len(dataset)) if i not in val_set]
    return train, sorted(val)


def _train_config(args, config: dict) -> TrainConfig:
    section = _section(config, "train")
    section["seed"] = _resolve_seed(args, config, section)
    if getattr(args, "epochs", None) is not None:
        section["epochs"] = args.epochs
    return TrainConfig(**section)


def cmd_train(args) -> int:
    config = load_config(args.config) if args.config else {}
    cfg = _train_config(args, config)
    dataset = load_dataset(args.data)
    train_idx, val_idx = _stratified_val_split(dataset, args.val_fraction, cfg.seed)
    model, log = fit([dataset.graphs[i] for i in train_idx],
                     [dataset.graphs[i] for i in val_idx], cfg)
    out = _out_dir(args)
    save_checkpoint(out / "checkpoint.pt", model.encoder, model.generator,
                    extra={"train_config": dataclasses.asdict(cfg),
                           "classes": list(dataset.class_names)})
    write_train_log(out / "train_log.csv", log)
    if log:
        print(f"best validation accuracy {max(r.acc_val for r in log):.3f} "
              f"over {len(log)} epochs")
    print(f"wrote {out / 'checkpoint.pt'} and {out / 'train_log.csv'}")
    return 0


def cmd_eval(args) -> int:
    config = load_config(args.config) if args.config else {}
    cfg = _train_config(args, config)
    eval_section = _section(config, "eval")
    scheme = args.scheme or eval_section.get("scheme", "tenfold")
    k = args.k or int(eval_section.get("k", 10))
    dataset = load_dataset(args.data)
    if scheme == "tenfold":
        plan = kfold_split(dataset, k=k, seed=cfg.seed)
    elif scheme == "loso":
        plan = loso_split(dataset, seed=cfg.seed)
    else:
        raise ValueError(f"unknown eval scheme {scheme!r}; use 'tenfold' or 'loso'")
    report = evaluate(plan, dataset, cfg)
    out = _out_dir(args)
    report_to_json(report, out / "report.json")
    report_to_csv(report, out / "report.csv")
    print(f"{report.scheme}: mean accuracy {report.mean_accuracy:.3f} "
          f"+/- {report.std_accuracy:.3f} over {report.n_folds} folds")
    return 0


def _subject_masks(dataset: Dataset, generator) -> list[np.ndarray]:
    x, _, _ = stack_graphs(dataset.graphs)
    with torch.no_grad():
        probs = edge_scores(x, generator)
    return [probs[i].numpy() for i in range(len(dataset))]


def cmd_explain(args) -> int:
    encoder, generator, arch = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    if arch["n_rois"] != dataset.n_rois:
        raise ValueError(
            f"checkpoint expects n_rois={arch['n_rois']} but dataset has "
            f"{dataset.n_rois}"
        )
    out = _out_dir(args)
    masks = _subject_masks(dataset, generator)
    mask_dir = out / "masks"
    mask_dir.mkdir(exist_ok=True)
    for i, mask in enumerate(masks):
        write_matrix_csv(mask_dir / f"subject_{i:04d}_mask.csv", mask)

    system_map = None
    if args.systems:
        system_map = SystemMap.from_csv(args.systems)
    else:
        warnings.warn("no system map provided; skipping system AUC tables")

    labels = dataset.labels
    for c, name in enumerate(dataset.class_names):
        class_masks = [m for m, y in zip(masks, labels) if y == c]
        if not class_masks:
            continue
        edges = dominant_subgraph(class_masks, top_k=args.top_k)
        write_edge_list(out / f"dominant_subgraph_{name}.csv", edges)
        if system_map is not None:
            profile = profile_systems(class_masks, system_map)
            write_system_auc_csv(out / f"system_auc_{name}.csv", profile)
            write_ranking_json(out / f"system_ranking_{name}.json", profile)
    print(f"wrote explanation outputs to {out}")
    return 0


def cmd_selftest(args) -> int:
    return 0 if run_selftest(verbose=True) else 1


class _Parser(argparse.ArgumentParser):
    """Exit 1 (not argparse's 2) on usage errors such as unknown subcommands."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphib",
                     description="Information-bottleneck subgraph learning on "
                                 "connectivity graphs")
    parser.add_argument("--threads", type=int, default=1,
                        help="torch thread count (default 1 for determinism)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic planted-subgraph dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("mi", help="mutual information in bits between two "
                                  "embedding CSV matrices")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_mi)

    p = sub.add_parser("train", help="train on a dataset manifest")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="cross-validated evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scheme", choices=("tenfold", "loso"), default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("explain", help="dominant subgraphs and system AUC tables "
                                       "from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--systems", default=None,
                   help="CSV of node_index,system_name")
    p.add_argument("--top-k", type=int, default=50)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("selftest", help="run the built-in oracle checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    torch.set_num_threads(args.threads)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
