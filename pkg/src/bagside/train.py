"""Training: initialization, SGD/Nadam, the epoch loop, random search, checkpoints."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import BagDataset, Vocab, batches
from .errors import (
    BadMagicError,
    DivergedError,
    ManifestMismatchError,
    ShapeMismatchError,
    TruncatedError,
)
from .model import (
    TENSOR_NAMES,
    Gradients,
    ModelConfig,
    ModelParams,
    backward,
    cross_entropy,
    forward,
    validate_params,
)

OPTIMIZERS = ("sgd", "nadam")

CKPT_MAGIC = b"BSD1"
_CKPT_LEN = struct.Struct("<I")

TABLE_INIT_BOUND = 0.1


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig
    optimizer: str = "sgd"
    lr: float = 0.1
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    nadam_beta1: float = 0.9
    nadam_beta2: float = 0.999
    nadam_eps: float = 1e-8

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs and patience must all be >= 1")


@dataclass
class NadamState:
    m: dict
    v: dict
    t: int
    beta1: float
    beta2: float
    eps: float

    @staticmethod
    def fresh(params: ModelParams, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> "NadamState":
        return NadamState(
            m={name: np.zeros_like(arr) for name, arr in params.tensors()},
            v={name: np.zeros_like(arr) for name, arr in params.tensors()},
            t=0, beta1=beta1, beta2=beta2, eps=eps,
        )


@dataclass(frozen=True)
class SearchSpace:
    u1_choices: tuple[int, ...] = (48, 96, 192, 384, 768)
    u2_choices: tuple[int, ...] = (6, 12, 24, 48)
    activation_choices: tuple[str, ...] = ("tanh", "relu", "sigmoid")
    optimizer_choices: tuple[str, ...] = ("nadam", "sgd")
    # dropout rates and learning rate are drawn from Uniform(0, 1)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    valid_accuracy: float


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    best_accuracy: float = float("-inf")


@dataclass(frozen=True)
class TrialResult:
    index: int
    config: TrainConfig
    accuracy: float
    error: str | None = None


def _glorot_bound(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_params(cfg: ModelConfig, vocab: Vocab, seed: int) -> ModelParams:
    """Glorot-uniform dense weights, zero biases, +-0.1 uniform tables."""
    rng = np.random.default_rng(seed)

    def uniform(bound, shape):
        return rng.uniform(-bound, bound, size=shape)

    params = ModelParams(
        alias_table=uniform(TABLE_INIT_BOUND, (len(vocab.aliases), cfg.d_a)),
        type_table=uniform(TABLE_INIT_BOUND, (len(vocab.types), cfg.d_t)),
        q=uniform(_glorot_bound(cfg.rep_dim, 1), (cfg.rep_dim,)),
        W1=uniform(_glorot_bound(cfg.z_dim, cfg.u1), (cfg.u1, cfg.z_dim)),
        b1=np.zeros(cfg.u1),
        W2=uniform(_glorot_bound(cfg.u1, cfg.u2), (cfg.u2, cfg.u1)),
        b2=np.zeros(cfg.u2),
        W3=uniform(_glorot_bound(cfg.u2, cfg.n_rel), (cfg.n_rel, cfg.u2)),
        b3=np.zeros(cfg.n_rel),
    )
    validate_params(params, cfg)
    return params


def _check_shapes(params: ModelParams, grads: Gradients) -> None:
    for (name, p), (_, g) in zip(params.tensors(), grads.tensors()):
        if p.shape != g.shape:
            raise ShapeMismatchError(f"{name}: params {p.shape} vs grads {g.shape}")


def sgd_step(params: ModelParams, grads: Gradients, lr: float) -> ModelParams:
    """theta <- theta - lr * g, elementwise."""
    _check_shapes(params, grads)
    return ModelParams(**{
        name: p - lr * getattr(grads, name) for name, p in params.tensors()
    })


def nadam_step(params: ModelParams, grads: Gradients, state: NadamState,
               lr: float) -> tuple[ModelParams, NadamState]:
    """Nesterov-accelerated adaptive-moment update."""
    _check_shapes(params, grads)
    for name, p in params.tensors():
        if state.m[name].shape != p.shape:
            raise ShapeMismatchError(f"{name}: optimizer state {state.m[name].shape} vs {p.shape}")
    b1, b2, eps = state.beta1, state.beta2, state.eps
    t = state.t + 1
    new_m, new_v, new_p = {}, {}, {}
    for name, p in params.tensors():
        g = getattr(grads, name)
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        step = lr * (b1 * m_hat + (1.0 - b1) * g / (1.0 - b1 ** t)) / (np.sqrt(v_hat) + eps)
        new_m[name], new_v[name], new_p[name] = m, v, p - step
    return (
        ModelParams(**new_p),
        NadamState(m=new_m, v=new_v, t=t, beta1=b1, beta2=b2, eps=eps),
    )


def derive_seed(seed: int, stream: int) -> int:
    """Deterministic sub-seed for one phase/epoch of a seeded run."""
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def _batch_gradients(dataset: BagDataset, bag_ids, params, cfg: TrainConfig, rng):
    """Mean loss and mean gradients over the bags of one batch."""
    total = Gradients.zeros_like(params)
    loss_sum = 0.0
    for bid in bag_ids:
        bag = dataset.bags[bid]
        cache = forward(bag, dataset.embeddings, params, cfg.model, mode="train", rng=rng)
        loss_sum += cross_entropy(cache.p, bag.rel)
        g = backward(cache, bag, bag.rel, params)
        for name, arr in total.tensors():
            arr += getattr(g, name)
    k = float(len(bag_ids))
    for _, arr in total.tensors():
        arr /= k
    return loss_sum, total


def train(train_data: BagDataset, valid_data: BagDataset,
          cfg: TrainConfig) -> tuple[ModelParams, TrainHistory]:
    """Seeded epoch loop with validation-accuracy model selection.

    Stops at max_epochs or after `patience` epochs without a strictly
    better validation accuracy; returns the best parameters seen.
    Non-finite loss or parameters abort with DivergedError carrying the
    best finite parameters so far.
    """
    from .evaluate import bag_accuracy  # local import keeps module layering flat

    if train_data.vocab != valid_data.vocab:
        raise ShapeMismatchError("train and valid splits must share one vocab")
    params = init_params(cfg.model, train_data.vocab, cfg.seed)
    state = NadamState.fresh(params, cfg.nadam_beta1, cfg.nadam_beta2, cfg.nadam_eps)
    dropout_rng = np.random.default_rng(derive_seed(cfg.seed, 0))

    history = TrainHistory()
    best = params.copy()
    epochs_since_improve = 0

    for epoch in range(1, cfg.max_epochs + 1):
        loss_sum = 0.0
        for bag_ids in batches(train_data, cfg.batch_size, derive_seed(cfg.seed, epoch)):
            batch_loss_sum, grads = _batch_gradients(train_data, bag_ids, params, cfg, dropout_rng)
            loss_sum += batch_loss_sum
            if not np.isfinite(batch_loss_sum):
                raise DivergedError(
                    f"non-finite loss in epoch {epoch}", params=best, history=history)
            if cfg.optimizer == "sgd":
                params = sgd_step(params, grads, cfg.lr)
            else:
                params, state = nadam_step(params, grads, state, cfg.lr)
            if not params.all_finite():
                raise DivergedError(
                    f"non-finite parameters in epoch {epoch}", params=best, history=history)

        train_loss = loss_sum / len(train_data.bags)
        valid_acc = bag_accuracy(params, cfg.model, valid_data)
        history.epochs.append(EpochStats(epoch, train_loss, valid_acc))

        if valid_acc > history.best_accuracy:
            history.best_accuracy = valid_acc
            history.best_epoch = epoch
            best = params.copy()
            epochs_since_improve = 0
        else:
            epochs_since_improve += 1
            if epochs_since_improve >= cfg.patience:
                break

    return best, history


def sample_config(space: SearchSpace, base_cfg: TrainConfig, seed: int) -> TrainConfig:
    """Draw one configuration from the search space with a seeded generator."""
    rng = np.random.default_rng(seed)

    def pick(choices):
        return choices[int(rng.integers(len(choices)))]

    model = replace(
        base_cfg.model,
        u1=pick(space.u1_choices),
        a1=pick(space.activation_choices),
        p1=float(rng.uniform(0.0, 1.0)),
        u2=pick(space.u2_choices),
        a2=pick(space.activation_choices),
        p2=float(rng.uniform(0.0, 1.0)),
    )
    return replace(
        base_cfg,
        model=model,
        optimizer=pick(space.optimizer_choices),
        lr=float(rng.uniform(0.0, 1.0)),
    )


def _default_runner(cfg: TrainConfig, train_data: BagDataset,
                    valid_data: BagDataset) -> float:
    _, history = train(train_data, valid_data, cfg)
    return history.best_accuracy


def random_search(space: SearchSpace, trials: int, train_data: BagDataset,
                  valid_data: BagDataset, base_cfg: TrainConfig, seed: int,
                  runner=None) -> tuple[TrainConfig, list[TrialResult]]:
    """Seeded random search; trial i uses generator seed + i.

    A diverged trial logs its error and scores 0. Ties on accuracy go to
    the earlier trial. `runner` exists for tests that substitute the
    training routine.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    runner = runner or _default_runner
    log: list[TrialResult] = []
    for i in range(trials):
        cfg = sample_config(space, base_cfg, seed + i)
        try:
            acc = float(runner(cfg, train_data, valid_data))
            log.append(TrialResult(index=i, config=cfg, accuracy=acc))
        except DivergedError as e:
            log.append(TrialResult(index=i, config=cfg, accuracy=0.0, error=str(e)))
    best = max(log, key=lambda r: (r.accuracy, -r.index))
    return best.config, log


def save_checkpoint(params: ModelParams, cfg: ModelConfig, meta: dict | None = None) -> bytes:
    """BSD1 bytes: magic, u32 header length, JSON header, f32 payloads."""
    validate_params(params, cfg)
    meta = meta or {}
    tensors = []
    payloads = []
    offset = 0
    for name, arr in params.tensors():
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        tensors.append({
            "name": name,
            "shape": list(arr.shape),
            "offset": offset,
            "len": len(raw),
        })
        payloads.append(raw)
        offset += len(raw)
    header = {
        "config": {
            "d_s": cfg.d_s, "d_a": cfg.d_a, "d_t": cfg.d_t,
            "u1": cfg.u1, "a1": cfg.a1, "p1": cfg.p1,
            "u2": cfg.u2, "a2": cfg.a2, "p2": cfg.p2,
            "n_rel": cfg.n_rel,
        },
        "vocab_sizes": {
            "relations": cfg.n_rel,
            "types": int(params.type_table.shape[0]),
            "aliases": int(params.alias_table.shape[0]),
        },
        "tensors": tensors,
        "seed": int(meta.get("seed", 0)),
        "valid_accuracy": float(meta.get("valid_accuracy", 0.0)),
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return CKPT_MAGIC + _CKPT_LEN.pack(len(blob)) + blob + b"".join(payloads)


def load_checkpoint(raw: bytes) -> tuple[ModelParams, ModelConfig, dict]:
    """Inverse of save_checkpoint; tensors reload bit-exactly."""
    if raw[:4] != CKPT_MAGIC:
        raise BadMagicError(f"expected magic {CKPT_MAGIC!r}, got {bytes(raw[:4])!r}")
    if len(raw) < 8:
        raise TruncatedError(f"checkpoint header needs 8 bytes, file has {len(raw)}")
    (header_len,) = _CKPT_LEN.unpack_from(raw, 4)
    if len(raw) < 8 + header_len:
        raise TruncatedError("checkpoint shorter than its declared header")
    try:
        header = json.loads(raw[8:8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ManifestMismatchError(f"unreadable checkpoint header: {e}") from e
    for key in ("config", "vocab_sizes", "tensors", "seed", "valid_accuracy"):
        if key not in header:
            raise ManifestMismatchError(f"checkpoint header is missing {key!r}")
    try:
        cfg = ModelConfig(**header["config"])
    except (TypeError, ShapeMismatchError) as e:
        raise ManifestMismatchError(f"bad checkpoint config: {e}") from e

    manifest = header["tensors"]
    names = [t.get("name") for t in manifest]
    if names != list(TENSOR_NAMES):
        raise ManifestMismatchError(f"tensor manifest names {names} != {list(TENSOR_NAMES)}")
    payload = raw[8 + header_len:]
    expected_offset = 0
    arrays = {}
    for entry in manifest:
        shape = tuple(int(x) for x in entry["shape"])
        length = int(entry["len"])
        offset = int(entry["offset"])
        if offset != expected_offset:
            raise ManifestMismatchError(
                f"{entry['name']}: offset {offset}, expected {expected_offset}")
        count = int(np.prod(shape)) if shape else 1
        if length != count * 4:
            raise ManifestMismatchError(
                f"{entry['name']}: payload length {length} != {count * 4} for shape {shape}")
        if offset + length > len(payload):
            raise TruncatedError(f"{entry['name']}: payload runs past end of file")
        values = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        arrays[entry["name"]] = values.reshape(shape).astype(np.float64)
        expected_offset = offset + length
    if expected_offset != len(payload):
        raise ManifestMismatchError(
            f"{len(payload) - expected_offset} trailing bytes after last tensor")

    params = ModelParams(**arrays)
    sizes = header["vocab_sizes"]
    if (params.alias_table.shape[0] != sizes.get("aliases")
            or params.type_table.shape[0] != sizes.get("types")
            or cfg.n_rel != sizes.get("relations")):
        raise ManifestMismatchError("vocab_sizes disagree with tensor shapes")
    try:
        validate_params(params, cfg)
    except ShapeMismatchError as e:
        raise ManifestMismatchError(str(e)) from e
    meta = {"seed": header["seed"], "valid_accuracy": header["valid_accuracy"]}
    return params, cfg, meta
