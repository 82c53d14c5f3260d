"""Run orchestration: config resolution plus the validate/train/tune/eval/
pr-curve/predict entry points shared by the HTTP service and the CLI."""

from __future__ import annotations

import dataclasses
import json
import os
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .corpus import load_bags_file, load_embedding_file, load_vocab_dir
from .errors import ManifestMismatchError, ValidationError
from .evaluate import (
    PN_CUTOFFS,
    SUBSAMPLE_MODES,
    auc,
    bag_accuracy,
    pn_csv,
    pn_report,
    pr_csv,
    pr_curve,
    score_all,
)
from .model import ACTIVATIONS, ModelConfig, predict
from .train import (
    OPTIMIZERS,
    SearchSpace,
    TrainConfig,
    derive_seed,
    load_checkpoint,
    random_search,
    save_checkpoint,
    train,
)

# stream ids for sub-seed derivation; 0 and 1..max_epochs belong to train
EVAL_STREAM = 2**32

CHECKPOINT_FILE = "checkpoint.bsd"
HISTORY_FILE = "history.csv"
TRIALS_FILE = "trials.csv"
BEST_CONFIG_FILE = "best_config.json"
PN_FILE = "pn.csv"
PR_FILE = "pr.csv"
PREDICTIONS_FILE = "predictions.jsonl"


@dataclass(frozen=True)
class RunConfig:
    """Flat run description; JSON config files use exactly these keys."""

    bags_train: str | None = None
    bags_valid: str | None = None
    bags_test: str | None = None
    embeddings: str | None = None
    vocab_dir: str | None = None
    alias_vectors: str | None = None
    out_dir: str | None = None

    d_a: int = 32
    d_t: int = 50
    u1: int = 96
    a1: str = "relu"
    p1: float = 0.61
    u2: int = 24
    a2: str = "relu"
    p2: float = 0.73

    optimizer: str = "sgd"
    lr: float = 0.65
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    eval_seed: int | None = None

    def resolved_eval_seed(self) -> int:
        if self.eval_seed is not None:
            return self.eval_seed
        return derive_seed(self.seed, EVAL_STREAM)


_FIELD_NAMES = {f.name for f in dataclasses.fields(RunConfig)}


def resolve_config(file_values: dict | None = None,
                   overrides: dict | None = None) -> RunConfig:
    """Merge config sources: override > file > dataclass default."""
    merged: dict = {}
    for source, label in ((file_values, "config file"), (overrides, "flags")):
        if not source:
            continue
        unknown = sorted(set(source) - _FIELD_NAMES)
        if unknown:
            raise ValidationError(f"unknown {label} keys: {', '.join(unknown)}")
        merged.update({k: v for k, v in source.items() if v is not None})
    try:
        cfg = RunConfig(**merged)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"bad run config: {e}") from e
    _check_values(cfg)
    return cfg


def load_config_file(path: str | os.PathLike) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file not found: {p}")
    try:
        values = json.loads(p.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValidationError(f"config file {p} is not valid JSON: {e}") from e
    if not isinstance(values, dict):
        raise ValidationError(f"config file {p} must hold a JSON object")
    return values


def _check_values(cfg: RunConfig) -> None:
    if cfg.a1 not in ACTIVATIONS or cfg.a2 not in ACTIVATIONS:
        raise ValidationError(
            f"activations must come from {sorted(ACTIVATIONS)}, got {cfg.a1!r}, {cfg.a2!r}")
    if cfg.optimizer not in OPTIMIZERS:
        raise ValidationError(f"optimizer must be one of {OPTIMIZERS}, got {cfg.optimizer!r}")
    for name in ("d_a", "d_t", "u1", "u2", "batch_size", "max_epochs", "patience"):
        if getattr(cfg, name) < 1:
            raise ValidationError(f"{name} must be >= 1, got {getattr(cfg, name)}")
    for name in ("p1", "p2"):
        if not 0.0 <= getattr(cfg, name) < 1.0:
            raise ValidationError(f"{name} must lie in [0, 1), got {getattr(cfg, name)}")
    if not cfg.lr > 0:
        raise ValidationError(f"lr must be > 0, got {cfg.lr}")


def _require(cfg: RunConfig, *names: str) -> None:
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise ValidationError(f"missing required config values: {', '.join(missing)}")


def _load_split(cfg: RunConfig, which: str):
    path = getattr(cfg, which)
    emb = load_embedding_file(cfg.embeddings)
    vocab = load_vocab_dir(cfg.vocab_dir)
    return load_bags_file(path, vocab, emb)


def _model_config(cfg: RunConfig, d_s: int, n_rel: int) -> ModelConfig:
    return ModelConfig(
        d_s=d_s, d_a=cfg.d_a, d_t=cfg.d_t,
        u1=cfg.u1, a1=cfg.a1, p1=cfg.p1,
        u2=cfg.u2, a2=cfg.a2, p2=cfg.p2,
        n_rel=n_rel,
    )


def _train_config(cfg: RunConfig, model: ModelConfig) -> TrainConfig:
    return TrainConfig(
        model=model, optimizer=cfg.optimizer, lr=cfg.lr,
        batch_size=cfg.batch_size, max_epochs=cfg.max_epochs,
        patience=cfg.patience, seed=cfg.seed,
    )


def _out_dir(cfg: RunConfig) -> Path:
    _require(cfg, "out_dir")
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ValidationError(f"cannot create output directory {out}: {e}") from e
    return out


def _load_trained(cfg: RunConfig, checkpoint_path: str):
    """Checkpoint plus the dataset it will score, cross-checked."""
    _require(cfg, "bags_test", "embeddings", "vocab_dir")
    p = Path(checkpoint_path)
    if not p.is_file():
        raise ValidationError(f"checkpoint not found: {p}")
    params, model_cfg, meta = load_checkpoint(p.read_bytes())
    data = _load_split(cfg, "bags_test")
    if model_cfg.d_s != data.embeddings.dim:
        raise ManifestMismatchError(
            f"checkpoint expects {model_cfg.d_s}-dim embeddings, file has {data.embeddings.dim}")
    if model_cfg.n_rel != data.n_relations:
        raise ManifestMismatchError(
            f"checkpoint has {model_cfg.n_rel} relations, vocab has {data.n_relations}")
    if params.alias_table.shape[0] != len(data.vocab.aliases):
        raise ManifestMismatchError(
            f"checkpoint alias table has {params.alias_table.shape[0]} rows, "
            f"vocab lists {len(data.vocab.aliases)} aliases")
    if params.type_table.shape[0] != len(data.vocab.types):
        raise ManifestMismatchError(
            f"checkpoint type table has {params.type_table.shape[0]} rows, "
            f"vocab lists {len(data.vocab.types)} types")
    return params, model_cfg, meta, data


def run_validate(cfg: RunConfig) -> dict:
    """Parse every referenced input and summarize the test split."""
    _require(cfg, "bags_test", "embeddings", "vocab_dir")
    data = _load_split(cfg, "bags_test")
    if cfg.alias_vectors is not None:
        vecs = load_embedding_file(cfg.alias_vectors)
        if vecs.rows != len(data.vocab.aliases):
            raise ValidationError(
                f"alias vector file has {vecs.rows} rows, "
                f"vocab lists {len(data.vocab.aliases)} aliases")
    hist = Counter(data.vocab.relations[b.rel] for b in data.bags)
    return {
        "bags": len(data.bags),
        "sentences": data.sentence_count,
        "relations": len(data.vocab.relations),
        "embedding_rows": data.embeddings.rows,
        "embedding_dim": data.embeddings.dim,
        "relation_histogram": {name: hist.get(name, 0) for name in data.vocab.relations},
    }


def run_train(cfg: RunConfig) -> dict:
    _require(cfg, "bags_train", "bags_valid", "embeddings", "vocab_dir")
    out = _out_dir(cfg)
    train_data = _load_split(cfg, "bags_train")
    valid_data = _load_split(cfg, "bags_valid")
    model_cfg = _model_config(cfg, train_data.embeddings.dim, train_data.n_relations)
    params, history = train(train_data, valid_data, _train_config(cfg, model_cfg))

    ckpt_path = out / CHECKPOINT_FILE
    ckpt_path.write_bytes(save_checkpoint(
        params, model_cfg,
        {"seed": cfg.seed, "valid_accuracy": history.best_accuracy}))
    lines = ["epoch,train_loss,valid_acc"]
    lines += [f"{e.epoch},{e.train_loss:.17g},{e.valid_accuracy:.17g}" for e in history.epochs]
    (out / HISTORY_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {
        "checkpoint": str(ckpt_path),
        "history": str(out / HISTORY_FILE),
        "epochs": len(history.epochs),
        "best_epoch": history.best_epoch,
        "valid_accuracy": history.best_accuracy,
    }


def run_tune(cfg: RunConfig, trials: int) -> dict:
    _require(cfg, "bags_train", "bags_valid", "embeddings", "vocab_dir")
    out = _out_dir(cfg)
    train_data = _load_split(cfg, "bags_train")
    valid_data = _load_split(cfg, "bags_valid")
    model_cfg = _model_config(cfg, train_data.embeddings.dim, train_data.n_relations)
    best_cfg, log = random_search(
        SearchSpace(), trials, train_data, valid_data,
        _train_config(cfg, model_cfg), cfg.seed)

    lines = ["trial,u1,a1,p1,u2,a2,p2,optimizer,lr,valid_acc,error"]
    for r in log:
        m = r.config.model
        lines.append(
            f"{r.index},{m.u1},{m.a1},{m.p1:.17g},{m.u2},{m.a2},{m.p2:.17g},"
            f"{r.config.optimizer},{r.config.lr:.17g},{r.accuracy:.17g},"
            f"{r.error or ''}")
    (out / TRIALS_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")

    best = {
        "u1": best_cfg.model.u1, "a1": best_cfg.model.a1, "p1": best_cfg.model.p1,
        "u2": best_cfg.model.u2, "a2": best_cfg.model.a2, "p2": best_cfg.model.p2,
        "optimizer": best_cfg.optimizer, "lr": best_cfg.lr,
    }
    (out / BEST_CONFIG_FILE).write_text(
        json.dumps(best, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return {
        "trials": str(out / TRIALS_FILE),
        "best_config": str(out / BEST_CONFIG_FILE),
        "best": best,
        "best_accuracy": max(r.accuracy for r in log),
    }


def run_eval(cfg: RunConfig, checkpoint_path: str,
             modes=SUBSAMPLE_MODES, ns=PN_CUTOFFS) -> dict:
    for mode in modes:
        if mode not in SUBSAMPLE_MODES:
            raise ValidationError(f"mode must be one of {SUBSAMPLE_MODES}, got {mode!r}")
    for n in ns:
        if n < 1:
            raise ValidationError(f"N values must be >= 1, got {n}")
    params, model_cfg, _, data = _load_trained(cfg, checkpoint_path)
    out = _out_dir(cfg)
    rows = pn_report(params, model_cfg, data, cfg.resolved_eval_seed(),
                     modes=tuple(modes), ns=tuple(ns))
    (out / PN_FILE).write_text(pn_csv(rows), encoding="utf-8")
    accuracy = bag_accuracy(params, model_cfg, data)
    return {
        "pn": str(out / PN_FILE),
        "rows": [{"mode": m, "n": n, "precision": p} for m, n, p in rows],
        "bag_accuracy": accuracy,
    }


def run_prcurve(cfg: RunConfig, checkpoint_path: str) -> dict:
    params, model_cfg, _, data = _load_trained(cfg, checkpoint_path)
    out = _out_dir(cfg)
    triples = score_all(params, model_cfg, data)
    positives = sum(1 for b in data.bags if b.rel != 0)
    points = pr_curve(triples, positives)
    (out / PR_FILE).write_text(pr_csv(points), encoding="utf-8")
    return {
        "pr": str(out / PR_FILE),
        "points": len(points),
        "positives": positives,
        "auc": auc(points),
    }


def run_predict(cfg: RunConfig, checkpoint_path: str) -> dict:
    params, model_cfg, _, data = _load_trained(cfg, checkpoint_path)
    out = _out_dir(cfg)
    rows = []
    for bag_id, bag in enumerate(data.bags):
        rel, p = predict(bag, data.embeddings, params, model_cfg)
        rows.append({
            "bag_id": bag_id,
            "sub": bag.sub,
            "obj": bag.obj,
            "rel_id": rel,
            "rel": data.vocab.relations[rel],
            "confidence": float(p[rel]),
        })
    path = out / PREDICTIONS_FILE
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return {"predictions": str(path), "rows": rows}
