"""``tten`` command line: generate, train, evaluate, analyze, sweep."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, parse_p_grid, resolve
from .dataset import DatasetError, assign_groups, generate_synthetic, load_dataset, save_dataset, split_validation
from .evaluation import QUADRANTS, cosine_quadrant_analysis, evaluate, magnitude_popularity_correlation, p_sweep
from .graph import build_norm_adjacency
from .model import EmbeddingFileError, FinalEmbeddings, forward, load_embeddings, save_embeddings
from .training import train

logger = logging.getLogger("tten")

COMMANDS = ("generate", "train", "evaluate", "analyze", "sweep")

# (flag, type, help)
_FLAGS = [
    ("--train-file", str, "train interaction file"),
    ("--test-file", str, "test interaction file"),
    ("--validation-fraction", float, "share of each user's test items moved to validation (default 0.5)"),
    ("--loss", str, "bpr or ssm (default ssm)"),
    ("--dim", int, "embedding dimension (default 64)"),
    ("--layers", int, "propagation layers (default 3)"),
    ("--lr", float, "Adam learning rate (default 1e-3)"),
    ("--batch-size", int, "batch size (default 4096)"),
    ("--epochs", int, "maximum epochs (default 300)"),
    ("--min-epoch", int, "first epoch at which early stopping may trigger (default 50)"),
    ("--patience", int, "non-improving evaluations before stopping (default 5)"),
    ("--eval-every", int, "epochs between validation evaluations (default 5)"),
    ("--temperature", float, "softmax temperature (default 0.1)"),
    ("--l2", float, "L2 coefficient (default 1e-5 bpr, 1e-7 ssm)"),
    ("--p", float, "normalization strength (default 1)"),
    ("--k", int, "cut-off for Recall/NDCG (default 20)"),
    ("--groups", int, "popularity groups (default 5)"),
    ("--seed", int, "random seed (default 0)"),
    ("--out", str, "output directory (must be new or empty)"),
    ("--threads", int, "evaluation threads; 1 is the reference mode (default 1)"),
    ("--embeddings", str, "final embedding file (evaluate/analyze/sweep)"),
    ("--p-grid", str, "sweep grid start:stop:step (default 0:1:0.1)"),
    ("--popular-fraction", float, "popular share for the cosine analysis (default 0.2)"),
    ("--num-users", int, "synthetic users (default 2000)"),
    ("--num-items", int, "synthetic items (default 1000)"),
    ("--latent-dim", int, "synthetic latent dimension (default 16)"),
    ("--popularity-exponent", float, "synthetic power-law exponent (default 1.0)"),
    ("--popularity-mix", float, "synthetic popularity weight in [0, 1] (default 0.5)"),
    ("--interactions-per-user", int, "synthetic train items per user (default 40)"),
    ("--test-items-per-user", int, "synthetic test items per user (default 5)"),
    ("--affinity-temperature", float, "synthetic affinity softmax temperature (default 0.1)"),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tten", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("-v", "--verbose", action="store_true")
        for flag, kind, text in _FLAGS:
            p.add_argument(flag, type=kind, default=None, help=text)
    return parser


# -- helpers -----------------------------------------------------------------

def _out_dir(cfg: RunConfig, command: str) -> Path:
    if cfg.out is None:
        path = Path("runs") / f"{command}-{time.strftime('%Y%m%d-%H%M%S')}"
    else:
        path = Path(cfg.out)
    if path.exists() and any(path.iterdir()):
        raise ConfigError(f"output directory {path} is not empty")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fmt(x) -> str:
    return "" if x is None or (isinstance(x, float) and np.isnan(x)) else repr(float(x))


def _load_data(cfg: RunConfig):
    cfg.check_data_source()
    if cfg.uses_files():
        return load_dataset(cfg.train_file, cfg.test_file, cfg.validation_fraction, cfg.seed)
    dataset = generate_synthetic(cfg.synthetic_spec()).dataset
    return split_validation(dataset, cfg.validation_fraction, cfg.seed)


def _load_final(cfg: RunConfig, dataset) -> FinalEmbeddings:
    if cfg.embeddings is None:
        raise ConfigError("--embeddings is required")
    if not Path(cfg.embeddings).is_file():
        raise ConfigError(f"embedding file {cfg.embeddings} not found")
    table, U, I = load_embeddings(cfg.embeddings)
    if (U, I) != (dataset.num_users, dataset.num_items):
        raise ConfigError(f"embeddings are for {U} users/{I} items, dataset has "
                          f"{dataset.num_users}/{dataset.num_items}")
    return FinalEmbeddings(table, U, I)


def _groups(cfg, dataset):
    return assign_groups(dataset.popularity, cfg.groups)


# -- commands ----------------------------------------------------------------

def cmd_generate(cfg: RunConfig) -> Path:
    if cfg.uses_files():
        raise ConfigError("generate takes synthetic parameters, not dataset files")
    spec = cfg.synthetic_spec()
    data = generate_synthetic(spec)
    out = _out_dir(cfg, "generate")
    save_dataset(data.dataset, out)
    truth = {
        "spec": {k: getattr(spec, k) for k in spec.__dataclass_fields__},
        "base_popularity": data.base_popularity.tolist(),
        "user_latent": data.user_latent.tolist(),
        "item_latent": data.item_latent.tolist(),
    }
    _dump_json(out / "ground_truth.json", truth)
    logger.info("wrote %s", out)
    return out


def cmd_train(cfg: RunConfig) -> Path:
    dataset = _load_data(cfg)
    tcfg = cfg.train_config()
    out = _out_dir(cfg, "train")

    def progress(epoch, loss, entry):
        msg = f"epoch {epoch}: loss {loss:.5f}"
        if entry is not None:
            msg += f", validation recall@{tcfg.k} {entry['recall']:.5f}"
        logger.info(msg)

    model, report = train(dataset, tcfg, callback=progress, threads=cfg.threads)
    final = forward(model, build_norm_adjacency(dataset))
    save_embeddings(model.base, model.num_users, model.num_items, out / "base.emb")
    save_embeddings(final.final, model.num_users, model.num_items, out / "final.emb")
    payload = report.to_dict()
    payload["data"] = {"users": dataset.num_users, "items": dataset.num_items,
                       "train_interactions": dataset.num_train}
    _dump_json(out / "report.json", payload)
    (out / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
    logger.info("best epoch %s, wrote %s", report.best_epoch, out)
    return out


def cmd_evaluate(cfg: RunConfig) -> Path:
    dataset = _load_data(cfg)
    final = _load_final(cfg, dataset)
    groups = _groups(cfg, dataset)
    rep = evaluate(final, dataset, k=cfg.k, p=cfg.p, groups=groups, threads=cfg.threads)
    out = _out_dir(cfg, "evaluate")
    _dump_json(out / "eval.json", rep.to_dict())
    with open(out / "groups.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", "frequency", "recall"])
        for g in range(groups.num_groups):
            w.writerow([g + 1, _fmt(rep.group_frequency[g]), _fmt(rep.group_recall[g])])
    logger.info("recall@%d %.5f ndcg@%d %.5f (p=%g)", cfg.k, rep.recall, cfg.k, rep.ndcg, cfg.p)
    return out


def cmd_analyze(cfg: RunConfig) -> Path:
    dataset = _load_data(cfg)
    final = _load_final(cfg, dataset)
    corr = magnitude_popularity_correlation(final.items, dataset.popularity)
    stats = cosine_quadrant_analysis(final, dataset, cfg.popular_fraction)
    out = _out_dir(cfg, "analyze")
    counts = np.sum(~np.isnan(stats.user_means), axis=0)
    means = [float(np.nanmean(stats.user_means[:, q])) if counts[q] else None for q in range(4)]
    _dump_json(out / "analysis.json", {
        "correlation": None if np.isnan(corr) else corr,
        "popular_fraction": cfg.popular_fraction,
        "quadrant_mean": dict(zip(QUADRANTS, means)),
        "quadrant_users": dict(zip(QUADRANTS, (int(c) for c in counts))),
        "separation_popular": _nan_none(stats.separation(popular=True)),
        "separation_unpopular": _nan_none(stats.separation(popular=False)),
    })
    mags = np.linalg.norm(final.items, axis=1)
    with open(out / "magnitudes.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["item", "magnitude", "popularity"])
        for i in range(dataset.num_items):
            w.writerow([i, _fmt(mags[i]), int(dataset.popularity[i])])
    with open(out / "quadrants.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", *QUADRANTS])
        for u in range(dataset.num_users):
            w.writerow([u, *(_fmt(x) for x in stats.user_means[u])])
    with open(out / "histograms.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_low", "bin_high", *QUADRANTS])
        for b in range(stats.histograms.shape[1]):
            w.writerow([_fmt(stats.bin_edges[b]), _fmt(stats.bin_edges[b + 1]),
                        *(int(x) for x in stats.histograms[:, b])])
    logger.info("magnitude/popularity pearson r = %s", corr)
    return out


def _nan_none(x):
    return None if np.isnan(x) else x


def sweep_header(num_groups: int) -> list:
    return (["p", "recall", "ndcg"] + [f"freq_g{g}" for g in range(1, num_groups + 1)]
            + [f"recall_g{g}" for g in range(1, num_groups + 1)])


def cmd_sweep(cfg: RunConfig) -> Path:
    dataset = _load_data(cfg)
    final = _load_final(cfg, dataset)
    groups = _groups(cfg, dataset)
    grid = parse_p_grid(cfg.p_grid)
    rows = p_sweep(final, dataset, groups, grid, k=cfg.k, threads=cfg.threads)
    out = _out_dir(cfg, "sweep")
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(sweep_header(groups.num_groups))
        for rep in rows:
            w.writerow([_fmt(rep.p), _fmt(rep.recall), _fmt(rep.ndcg),
                        *(_fmt(x) for x in rep.group_frequency), *(_fmt(x) for x in rep.group_recall)])
    return out


HANDLERS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config")
    verbose = args.pop("verbose")
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = resolve(args, config_path)
        out = HANDLERS[command](cfg)
    except (ConfigError, DatasetError, EmbeddingFileError, ValueError, OSError) as exc:
        print(f"tten {command}: error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
