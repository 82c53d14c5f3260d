"""Shared test fixtures: checked-in corpus files plus synthetic builders."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from bagside.corpus import (
    Bag,
    BagDataset,
    EmbeddingMatrix,
    SentenceRec,
    Vocab,
    load_bags_file,
    load_embedding_file,
    load_vocab_dir,
)
from bagside.model import ACTIVATIONS, ModelConfig, ModelParams, forward

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def fixture_vocab() -> Vocab:
    return load_vocab_dir(FIXTURES)


@pytest.fixture(scope="session")
def fixture_emb() -> EmbeddingMatrix:
    return load_embedding_file(FIXTURES / "emb_small.bin")


@pytest.fixture(scope="session")
def fixture_train(fixture_vocab, fixture_emb) -> BagDataset:
    return load_bags_file(FIXTURES / "bags_train.jsonl", fixture_vocab, fixture_emb)


@pytest.fixture(scope="session")
def fixture_valid(fixture_vocab, fixture_emb) -> BagDataset:
    return load_bags_file(FIXTURES / "bags_valid.jsonl", fixture_vocab, fixture_emb)


@pytest.fixture(scope="session")
def fixture_test(fixture_vocab, fixture_emb) -> BagDataset:
    return load_bags_file(FIXTURES / "bags_test.jsonl", fixture_vocab, fixture_emb)


def tiny_instance():
    """The fixed hand-set two-sentence instance used by the forward oracle."""
    emb = EmbeddingMatrix(np.array([[0.5, -1.0], [1.5, 0.25]], dtype=np.float32))
    cfg = ModelConfig(d_s=2, d_a=1, d_t=1, u1=2, a1="tanh", p1=0.0,
                      u2=2, a2="sigmoid", p2=0.0, n_rel=2)
    params = ModelParams(
        alias_table=np.array([[0.2], [-0.4], [0.6]]),
        type_table=np.array([[-0.3], [0.8]]),
        q=np.array([0.3, -0.2, 0.5]),
        W1=np.array([[0.1, -0.2, 0.3, 0.4, -0.5], [-0.1, 0.2, -0.3, 0.4, 0.5]]),
        b1=np.array([0.05, -0.05]),
        W2=np.array([[0.7, -0.6], [0.5, 0.4]]),
        b2=np.array([0.0, 0.1]),
        W3=np.array([[1.0, -1.0], [-0.5, 0.5]]),
        b3=np.array([0.2, -0.2]),
    )
    bag = Bag(sub="a", obj="b", rel=1, sub_types=(1,), obj_types=(0, 1),
              sentences=(SentenceRec(emb_row=0, alias_ids=(1, 2)),
                         SentenceRec(emb_row=1)))
    return bag, emb, params, cfg


# independently computed before the forward pass was implemented
TINY_ORACLE_P = np.array([0.5818480844578527, 0.4181519155421473])


def random_instance(seed: int, kink_margin: float = 1e-3):
    """Random tiny configuration for gradient checking.

    Resamples until every relu pre-activation clears `kink_margin`, so
    central differences stay on one smooth piece of the loss.
    """
    activations = sorted(ACTIVATIONS)
    for attempt in range(100):
        rng = np.random.default_rng([seed, attempt])
        n_rel = int(rng.integers(2, 5))
        d_s = int(rng.integers(2, 9))
        d_a = int(rng.integers(1, 9))
        d_t = int(rng.integers(1, 9))
        u1 = int(rng.integers(2, 9))
        u2 = int(rng.integers(2, 9))
        cfg = ModelConfig(
            d_s=d_s, d_a=d_a, d_t=d_t,
            u1=u1, a1=activations[int(rng.integers(3))], p1=0.0,
            u2=u2, a2=activations[int(rng.integers(3))], p2=0.0,
            n_rel=n_rel)
        n_alias = int(rng.integers(2, 6))
        n_type = int(rng.integers(2, 6))
        params = ModelParams(
            alias_table=rng.normal(size=(n_alias, d_a)) * 0.5,
            type_table=rng.normal(size=(n_type, d_t)) * 0.5,
            q=rng.normal(size=d_s + d_a) * 0.5,
            W1=rng.normal(size=(u1, d_s + d_a + 2 * d_t)) * 0.5,
            b1=rng.normal(size=u1) * 0.1,
            W2=rng.normal(size=(u2, u1)) * 0.5,
            b2=rng.normal(size=u2) * 0.1,
            W3=rng.normal(size=(n_rel, u2)) * 0.5,
            b3=rng.normal(size=n_rel) * 0.1,
        )
        n_sent = int(rng.integers(1, 5))
        emb = EmbeddingMatrix(rng.normal(size=(n_sent + 2, d_s)).astype(np.float32))
        sentences = []
        for _ in range(n_sent):
            n_ids = int(rng.integers(0, 4))
            # duplicates allowed on purpose: they weight the mean
            alias_ids = tuple(int(rng.integers(0, n_alias)) for _ in range(n_ids))
            sentences.append(SentenceRec(emb_row=int(rng.integers(0, emb.rows)),
                                         alias_ids=alias_ids))
        sub_types = tuple(int(rng.integers(0, n_type))
                          for _ in range(int(rng.integers(1, 4))))
        obj_types = tuple(int(rng.integers(0, n_type))
                          for _ in range(int(rng.integers(1, 4))))
        y = int(rng.integers(0, n_rel))
        bag = Bag(sub="s", obj="o", rel=y, sub_types=sub_types,
                  obj_types=obj_types, sentences=tuple(sentences))

        cache = forward(bag, emb, params, cfg, mode="eval")
        margins = []
        if cfg.a1 == "relu":
            margins.append(np.abs(cache.h1_pre).min())
        if cfg.a2 == "relu":
            margins.append(np.abs(cache.h2_pre).min())
        if not margins or min(margins) > kink_margin:
            return bag, emb, params, cfg
    raise RuntimeError(f"no kink-free instance found for seed {seed}")


def make_separable_dataset(n_bags: int, n_rel: int = 3, d_s: int = 8,
                           seed: int = 7, min_sents: int = 1, max_sents: int = 4,
                           noise: float = 0.1, na_fraction: float | None = None,
                           hard_positive_fraction: float = 0.0) -> BagDataset:
    """Synthetic bags whose embedding rows cluster by relation.

    With `na_fraction` set, that share of bags is NA; a
    `hard_positive_fraction` share of the positives gets NA-cluster
    embeddings, making them inseparable on purpose.
    """
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(n_rel, d_s)) * 3.0
    vocab = Vocab(
        relations=("NA",) + tuple(f"r{i}" for i in range(1, n_rel)),
        types=("NO_TYPE", "t1", "t2"),
        aliases=("NO_ALIAS",) + tuple(f"a{i}" for i in range(1, n_rel)),
    )
    rows, bags = [], []
    for i in range(n_bags):
        if na_fraction is None:
            rel = i % n_rel
            hard = False
        else:
            positive = rng.random() >= na_fraction
            rel = int(rng.integers(1, n_rel)) if positive else 0
            hard = positive and rng.random() < hard_positive_fraction
        cluster = 0 if hard else rel
        n_sents = int(rng.integers(min_sents, max_sents + 1))
        sents = []
        for _ in range(n_sents):
            rows.append(centers[cluster] + rng.normal(size=d_s) * noise)
            alias_ids = (cluster,) if cluster >= 1 else ()
            sents.append(SentenceRec(emb_row=len(rows) - 1, alias_ids=alias_ids))
        bags.append(Bag(sub=f"s{i}", obj=f"o{i}", rel=rel,
                        sub_types=(1 + rel % 2,), obj_types=(1 + (rel + 1) % 2,),
                        sentences=tuple(sents)))
    emb = EmbeddingMatrix(np.array(rows, dtype=np.float32))
    return BagDataset(bags=tuple(bags), embeddings=emb, vocab=vocab)


def small_model_config(data: BagDataset, u1: int = 16, u2: int = 8,
                       a1: str = "relu", a2: str = "tanh",
                       p1: float = 0.0, p2: float = 0.0) -> ModelConfig:
    return ModelConfig(d_s=data.embeddings.dim, d_a=4, d_t=3,
                       u1=u1, a1=a1, p1=p1, u2=u2, a2=a2, p2=p2,
                       n_rel=data.n_relations)
