"""YAML serialization of model sets and regularizers.

Schema (documented in the README): a mapping with a ``model`` and/or a
``regularizer`` section.  Models carry a ``family`` tag plus the fields of
that family; regularizers carry a ``kind`` tag.  Groups are nested lists
of zero-based indices.
"""

from __future__ import annotations

import numpy as np
import yaml

from .models import (
    Block,
    BlockSparse,
    BlockStructure,
    GroupSparse,
    GroupStructure,
    HalfLines,
    LowRank,
    PermutationCone,
    PointCloudCone,
    Subspace,
)
from .norms import (
    BirkhoffGauge,
    GroupNorm,
    L1,
    ModelAtomicNorm,
    NuclearNorm,
    SubspaceIndicator,
    WeightedBlockNorm,
)


def _group_structure_from(entries, ambient_dim):
    return GroupStructure(tuple(tuple(g) for g in entries), ambient_dim)


def _block_structure_from(entries, ambient_dim):
    blocks = tuple(
        Block(
            structure=_group_structure_from(b["groups"], ambient_dim),
            k=int(b["k"]),
            weight=float(b.get("weight", 1.0)),
        )
        for b in entries
    )
    return BlockStructure(blocks)


def model_from_dict(doc):
    doc = doc.get("model", doc)
    family = doc["family"]
    if family == "group_sparse":
        structure = _group_structure_from(doc["groups"], int(doc["ambient_dim"]))
        return GroupSparse(structure, int(doc["k"]))
    if family == "block_sparse":
        return BlockSparse(_block_structure_from(doc["blocks"], int(doc["ambient_dim"])))
    if family == "low_rank":
        return LowRank(int(doc["rows"]), int(doc["cols"]), int(doc["r"]))
    if family == "half_lines":
        return HalfLines(np.asarray(doc["atoms"], dtype=float))
    if family == "point_cloud_cone":
        return PointCloudCone(np.asarray(doc["points"], dtype=float))
    if family == "permutation_cone":
        return PermutationCone(int(doc["n"]))
    if family == "subspace":
        return Subspace(np.asarray(doc["basis"], dtype=float))
    raise ValueError(f"unknown model family {family!r}")


def model_to_dict(model):
    if isinstance(model, GroupSparse):
        return {
            "family": "group_sparse",
            "ambient_dim": model.ambient_dim,
            "groups": [list(g) for g in model.structure.groups],
            "k": model.k,
        }
    if isinstance(model, BlockSparse):
        return {
            "family": "block_sparse",
            "ambient_dim": model.ambient_dim,
            "blocks": [
                {
                    "groups": [list(g) for g in b.structure.groups],
                    "k": b.k,
                    "weight": b.weight,
                }
                for b in model.structure.blocks
            ],
        }
    if isinstance(model, LowRank):
        return {
            "family": "low_rank",
            "rows": model.rows,
            "cols": model.cols,
            "r": model.r,
        }
    if isinstance(model, HalfLines):
        return {"family": "half_lines", "atoms": model.atoms.tolist()}
    if isinstance(model, PointCloudCone):
        return {"family": "point_cloud_cone", "points": model.points.tolist()}
    if isinstance(model, PermutationCone):
        return {"family": "permutation_cone", "n": model.n}
    if isinstance(model, Subspace):
        return {"family": "subspace", "basis": model.basis.tolist()}
    raise ValueError(f"unknown model {model!r}")


def regularizer_from_dict(doc):
    doc = doc.get("regularizer", doc)
    kind = doc["kind"]
    if kind == "group_norm":
        return GroupNorm(_group_structure_from(doc["groups"], int(doc["ambient_dim"])))
    if kind == "weighted_block_norm":
        return WeightedBlockNorm(
            _block_structure_from(doc["blocks"], int(doc["ambient_dim"]))
        )
    if kind == "nuclear":
        return NuclearNorm(int(doc["rows"]), int(doc["cols"]))
    if kind == "model_atomic":
        return ModelAtomicNorm(model_from_dict(doc["model"]))
    if kind == "birkhoff":
        return BirkhoffGauge(int(doc["n"]))
    if kind == "subspace_indicator":
        return SubspaceIndicator(np.asarray(doc["basis"], dtype=float))
    if kind == "l1":
        return L1(int(doc["n"]))
    raise ValueError(f"unknown regularizer kind {kind!r}")


def regularizer_to_dict(f):
    if isinstance(f, GroupNorm):
        return {
            "kind": "group_norm",
            "ambient_dim": f.ambient_dim,
            "groups": [list(g) for g in f.structure.groups],
        }
    if isinstance(f, WeightedBlockNorm):
        return {
            "kind": "weighted_block_norm",
            "ambient_dim": f.ambient_dim,
            "blocks": [
                {
                    "groups": [list(g) for g in b.structure.groups],
                    "k": b.k,
                    "weight": b.weight,
                }
                for b in f.structure.blocks
            ],
        }
    if isinstance(f, NuclearNorm):
        return {"kind": "nuclear", "rows": f.rows, "cols": f.cols}
    if isinstance(f, ModelAtomicNorm):
        return {"kind": "model_atomic", "model": model_to_dict(f.model)}
    if isinstance(f, BirkhoffGauge):
        return {"kind": "birkhoff", "n": f.n}
    if isinstance(f, SubspaceIndicator):
        return {"kind": "subspace_indicator", "basis": f.basis.tolist()}
    if isinstance(f, L1):
        return {"kind": "l1", "n": f.n}
    raise ValueError(f"unknown regularizer {f!r}")


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(yaml.safe_load(fh))


def load_regularizer(path):
    with open(path, "r", encoding="utf-8") as fh:
        return regularizer_from_dict(yaml.safe_load(fh))


def dump_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump({"model": model_to_dict(model)}, fh, sort_keys=False)


def dump_regularizer(f, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump({"regularizer": regularizer_to_dict(f)}, fh, sort_keys=False)
