"""Held-out metrics: P@N under bag subsampling, PR curve, AUC, accuracy."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .corpus import BagDataset
from .errors import (
    EmptyAfterFilterError,
    EmptyCurveError,
    NoPositivesError,
    NotEnoughTriplesError,
)
from .model import ModelConfig, ModelParams, forward, predict

SUBSAMPLE_MODES = ("one", "two", "all")
PN_CUTOFFS = (100, 200, 300)

THREADS_ENV = "BAGSIDE_THREADS"


@dataclass(frozen=True)
class ScoredTriple:
    """One (bag, candidate relation) pair with the model's confidence."""

    bag_id: int
    rel: int
    score: float
    correct: bool

    def __post_init__(self):
        if self.rel < 1:
            raise ValueError(f"scored relation id must be >= 1, got {self.rel}")
        if not np.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score}")


@dataclass(frozen=True)
class PRPoint:
    recall: float
    precision: float

    def __post_init__(self):
        if not 0.0 <= self.recall <= 1.0 or not 0.0 <= self.precision <= 1.0:
            raise ValueError(f"recall/precision out of [0,1]: {self.recall}, {self.precision}")


def worker_count() -> int:
    """Thread cap from the environment; 0 or unset means one per CPU."""
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be >= 0, got {n}")
    return n if n > 0 else (os.cpu_count() or 1)


def score_all(params: ModelParams, cfg: ModelConfig,
              bags: BagDataset) -> list[ScoredTriple]:
    """One eval-mode forward per bag, one triple per non-NA relation.

    Bags may be scored on several threads; the output order (bag major,
    relation minor) does not depend on the thread count.
    """

    def probs(bag):
        return forward(bag, bags.embeddings, params, cfg, mode="eval").p

    threads = min(worker_count(), max(len(bags.bags), 1))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            all_p = list(pool.map(probs, bags.bags))
    else:
        all_p = [probs(bag) for bag in bags.bags]

    triples = []
    for bag_id, (bag, p) in enumerate(zip(bags.bags, all_p)):
        for rel in range(1, cfg.n_rel):
            triples.append(ScoredTriple(
                bag_id=bag_id, rel=rel, score=float(p[rel]), correct=bag.rel == rel))
    return triples


def _ranked(triples) -> list[ScoredTriple]:
    # score descending; ties broken by bag_id then rel so ranks reproduce
    return sorted(triples, key=lambda t: (-t.score, t.bag_id, t.rel))


def precision_at_n(triples, n: int) -> float:
    if n < 1:
        raise ValueError(f"N must be >= 1, got {n}")
    if len(triples) < n:
        raise NotEnoughTriplesError(f"need {n} scored triples, have {len(triples)}")
    top = _ranked(triples)[:n]
    return sum(1 for t in top if t.correct) / n


def subsample_protocol(bags: BagDataset, mode: str, seed: int) -> BagDataset:
    """One/Two keep only bags of > 2 sentences and draw 1 or 2 of them."""
    if mode not in SUBSAMPLE_MODES:
        raise ValueError(f"mode must be one of {SUBSAMPLE_MODES}, got {mode!r}")
    if mode == "all":
        return bags
    keep = 1 if mode == "one" else 2
    rng = np.random.default_rng(seed)
    reduced = []
    for bag in bags.bags:
        n = len(bag.sentences)
        if n <= 2:
            continue
        chosen = rng.choice(n, size=keep, replace=False)
        reduced.append(replace(bag, sentences=tuple(bag.sentences[i] for i in chosen)))
    if not reduced:
        raise EmptyAfterFilterError(f"no bag has more than 2 sentences (mode={mode!r})")
    return BagDataset(bags=tuple(reduced), embeddings=bags.embeddings, vocab=bags.vocab)


def pn_report(params: ModelParams, cfg: ModelConfig, bags: BagDataset,
              seed: int, modes=SUBSAMPLE_MODES, ns=PN_CUTOFFS) -> list[tuple[str, int, float]]:
    """P@N for each (mode, N) cell; every mode subsamples from the same seed."""
    rows = []
    for mode in modes:
        subset = subsample_protocol(bags, mode, seed)
        triples = score_all(params, cfg, subset)
        for n in ns:
            rows.append((mode, n, precision_at_n(triples, n)))
    return rows


def pr_curve(triples, total_positives: int) -> list[PRPoint]:
    """Precision/recall after each prefix of the ranked triple list."""
    if total_positives < 1:
        raise NoPositivesError(
            f"total_positives must be >= 1, got {total_positives}")
    points = []
    correct = 0
    for k, t in enumerate(_ranked(triples), start=1):
        if t.correct:
            correct += 1
        points.append(PRPoint(recall=correct / total_positives, precision=correct / k))
    return points


def auc(points) -> float:
    """Trapezoid over recall, anchored at recall 0 with the first precision."""
    if not points:
        raise EmptyCurveError("cannot integrate an empty curve")
    recalls = [0.0] + [p.recall for p in points]
    precisions = [points[0].precision] + [p.precision for p in points]
    total = 0.0
    for i in range(1, len(recalls)):
        total += (recalls[i] - recalls[i - 1]) * (precisions[i] + precisions[i - 1]) / 2.0
    return total


def bag_accuracy(params: ModelParams, cfg: ModelConfig, bags: BagDataset) -> float:
    hits = sum(
        1 for bag in bags.bags
        if predict(bag, bags.embeddings, params, cfg)[0] == bag.rel)
    return hits / len(bags.bags)


def pr_csv(points) -> str:
    lines = ["recall,precision"]
    lines += [f"{p.recall:.17g},{p.precision:.17g}" for p in points]
    return "\n".join(lines) + "\n"


def pn_csv(rows) -> str:
    lines = ["mode,n,precision"]
    lines += [f"{mode},{n},{precision:.17g}" for mode, n, precision in rows]
    return "\n".join(lines) + "\n"
