#!/usr/bin/env python3
"""Regenerate the deterministic test fixtures under tests/fixtures/.

Three bag splits share one embedding file: a separable 40-bag training
split, a 12-bag validation split, and a 15-bag test split in which most
bags carry more than two sentences so subsampling modes stay feasible.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from bagside.corpus import EmbeddingMatrix, save_embedding_file

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

RELATIONS = ["NA", "born_in", "works_for"]
TYPES = ["NO_TYPE", "person", "org", "location"]
ALIASES = ["NO_ALIAS", "was born in", "employed by", "native of", "staff of"]

EMB_DIM = 16
ALIAS_DIM = 6
NOISE = 0.1

# alias ids that co-occur with each relation (0 = none matched)
REL_ALIASES = {0: [], 1: [1, 3], 2: [2, 4]}
REL_TYPES = {0: (1, 3), 1: (1, 3), 2: (1, 2)}  # (sub type, obj type)


def make_split(rng, centers, rows, n_bags, min_sents, max_sents, tag):
    bags = []
    for i in range(n_bags):
        rel = i % len(RELATIONS)
        n_sents = int(rng.integers(min_sents, max_sents + 1))
        sentences = []
        for _ in range(n_sents):
            rows.append(centers[rel] + rng.normal(size=EMB_DIM) * NOISE)
            alias_pool = REL_ALIASES[rel]
            aliases = []
            if alias_pool and rng.random() < 0.8:
                k = int(rng.integers(1, len(alias_pool) + 1))
                aliases = sorted(rng.choice(alias_pool, size=k, replace=False).tolist())
            sentence = {"emb": len(rows) - 1, "aliases": aliases}
            if rng.random() < 0.3:
                sentence["text"] = f"{tag} sentence {len(rows) - 1}"
            sentences.append(sentence)
        sub_t, obj_t = REL_TYPES[rel]
        # mix id and name references so both parse paths stay covered
        bags.append({
            "sub": f"{tag}_sub_{i}",
            "obj": f"{tag}_obj_{i}",
            "rel": RELATIONS[rel] if i % 2 == 0 else rel,
            "sub_types": [TYPES[sub_t]] if i % 3 == 0 else [sub_t],
            "obj_types": [obj_t, sub_t] if rel == 2 else [obj_t],
            "sentences": sentences,
        })
    return bags


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240817)

    (FIXTURES / "relations.txt").write_text("\n".join(RELATIONS) + "\n", encoding="utf-8")
    (FIXTURES / "types.txt").write_text("\n".join(TYPES) + "\n", encoding="utf-8")
    (FIXTURES / "aliases.txt").write_text("\n".join(ALIASES) + "\n", encoding="utf-8")

    centers = rng.normal(size=(len(RELATIONS), EMB_DIM)) * 3.0
    rows: list[np.ndarray] = []
    splits = {
        "bags_train.jsonl": make_split(rng, centers, rows, 40, 1, 4, "train"),
        "bags_valid.jsonl": make_split(rng, centers, rows, 12, 1, 4, "valid"),
        "bags_test.jsonl": make_split(rng, centers, rows, 15, 3, 5, "test"),
    }
    for name, bags in splits.items():
        lines = [json.dumps(bag, sort_keys=True) for bag in bags]
        (FIXTURES / name).write_text("\n".join(lines) + "\n", encoding="utf-8")

    emb = np.array(rows, dtype=np.float32)
    save_embedding_file(FIXTURES / "emb_small.bin", EmbeddingMatrix(emb))

    alias_vecs = rng.normal(size=(len(ALIASES), ALIAS_DIM)).astype(np.float32)
    alias_vecs[0] = 0.01  # null row: small but nonzero
    save_embedding_file(FIXTURES / "alias_vecs.bin", EmbeddingMatrix(alias_vecs))

    print(f"wrote fixtures to {FIXTURES}: emb {emb.shape}, "
          f"{', '.join(f'{k} ({len(v)} bags)' for k, v in splits.items())}")


if __name__ == "__main__":
    main()
