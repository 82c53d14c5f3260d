"""Request and response bodies for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict

from ..evaluate import PN_CUTOFFS, SUBSAMPLE_MODES


class RunConfigBody(BaseModel):
    """Run settings; unset fields defer to the config file, then defaults.

    `config_file` names a JSON file on the service host whose keys match
    the non-extra fields here; explicit body fields override it.
    """

    model_config = ConfigDict(extra="forbid")

    config_file: str | None = None

    bags_train: str | None = None
    bags_valid: str | None = None
    bags_test: str | None = None
    embeddings: str | None = None
    vocab_dir: str | None = None
    alias_vectors: str | None = None
    out_dir: str | None = None

    d_a: int | None = None
    d_t: int | None = None
    u1: int | None = None
    a1: str | None = None
    p1: float | None = None
    u2: int | None = None
    a2: str | None = None
    p2: float | None = None

    optimizer: str | None = None
    lr: float | None = None
    batch_size: int | None = None
    max_epochs: int | None = None
    patience: int | None = None
    seed: int | None = None
    eval_seed: int | None = None


# body fields that are not RunConfig keys
EXTRA_FIELDS = frozenset({"config_file", "checkpoint", "trials", "modes", "ns"})


class ValidateRequest(RunConfigBody):
    pass


class TrainRequest(RunConfigBody):
    pass


class TuneRequest(RunConfigBody):
    trials: int = 10


class EvalRequest(RunConfigBody):
    checkpoint: str
    modes: list[str] = list(SUBSAMPLE_MODES)
    ns: list[int] = list(PN_CUTOFFS)


class PrCurveRequest(RunConfigBody):
    checkpoint: str


class PredictRequest(RunConfigBody):
    checkpoint: str


class HealthResponse(BaseModel):
    status: str
    version: str


class ValidateResponse(BaseModel):
    bags: int
    sentences: int
    relations: int
    embedding_rows: int
    embedding_dim: int
    relation_histogram: dict[str, int]


class TrainResponse(BaseModel):
    checkpoint: str
    history: str
    epochs: int
    best_epoch: int
    valid_accuracy: float


class TuneResponse(BaseModel):
    trials: str
    best_config: str
    best: dict
    best_accuracy: float


class PnRow(BaseModel):
    mode: str
    n: int
    precision: float


class EvalResponse(BaseModel):
    pn: str
    rows: list[PnRow]
    bag_accuracy: float


class PrCurveResponse(BaseModel):
    pr: str
    points: int
    positives: int
    auc: float


class PredictRow(BaseModel):
    bag_id: int
    sub: str
    obj: str
    rel_id: int
    rel: str
    confidence: float


class PredictResponse(BaseModel):
    predictions: str
    rows: list[PredictRow]


class ErrorInfo(BaseModel):
    kind: str
    category: str
    message: str


class ErrorResponse(BaseModel):
    error: ErrorInfo
