"""JSON and TSV serialisation of models, reports and plot data."""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np

from .params import Hyperparams, ModelState, node_embeddings, one_hot

MODEL_FORMAT = "graphhull.model"
SCHEMA_VERSION = 1


def _matrix(rank):
    # nested arrays of numbers, ``rank`` levels deep
    item = {"type": "number"}
    for _ in range(rank):
        item = {"type": "array", "items": item}
    return item


MODEL_SCHEMA = {
    "type": "object",
    "required": ["format", "schema_version", "hyperparams", "seed", "n_nodes",
                 "A", "W_tilde", "Omega", "g", "s", "assignments"],
    "properties": {
        "format": {"const": MODEL_FORMAT},
        "schema_version": {"const": SCHEMA_VERSION},
        "hyperparams": {"type": "object", "required": ["K", "D", "epsilon",
                                                      "sigma_min", "sigma_max"]},
        "seed": {"type": ["integer", "null"]},
        "n_nodes": {"type": "integer", "minimum": 0},
        "node_ids": {"type": ["array", "null"], "items": {"type": "string"}},
        "A": _matrix(2),
        "W_tilde": _matrix(3),
        "Omega": _matrix(2),
        "m_logits": {"anyOf": [_matrix(2), {"type": "null"}]},
        "g": _matrix(1),
        "s": {"type": "number", "exclusiveMinimum": 0},
        "assignments": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    },
}


class ModelSchemaError(ValueError):
    pass


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def state_to_dict(state: ModelState, seed: int | None = None,
                  node_ids=None) -> dict:
    hp = state.hyperparams
    return {
        "format": MODEL_FORMAT,
        "schema_version": SCHEMA_VERSION,
        "hyperparams": hp.to_dict() if hp is not None else {},
        "seed": seed,
        "n_nodes": int(state.n_nodes),
        "node_ids": None if node_ids is None else [str(x) for x in node_ids],
        "A": _floats(state.A),
        "W_tilde": _floats(state.W_tilde),
        "Omega": _floats(state.Omega),
        "m_logits": None if state.m_logits is None else _floats(state.m_logits),
        "g": _floats(state.g),
        "s": float(state.s),
        "assignments": [int(c) for c in state.assignments],
    }


def validate_model_dict(doc: dict) -> None:
    try:
        jsonschema.validate(doc, MODEL_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ModelSchemaError(f"invalid model document: {exc.message}") from exc
    hp = doc["hyperparams"]
    K, D, n = hp["K"], hp["D"], doc["n_nodes"]
    shapes = {
        "A": (K, D), "W_tilde": (K, K, K), "Omega": (n, K), "g": (n,),
        "assignments": (n,),
    }
    if doc.get("m_logits") is not None:
        shapes["m_logits"] = (n, K)
    for key, shape in shapes.items():
        got = np.shape(doc[key])
        if got != shape and not (n == 0 and got[:1] == (0,)):
            raise ModelSchemaError(f"{key} has shape {got}, expected {shape}")
    if any(c >= K for c in doc["assignments"]):
        raise ModelSchemaError("assignment outside [0, K)")
    if doc.get("node_ids") is not None and len(doc["node_ids"]) != n:
        raise ModelSchemaError("node_ids length differs from n_nodes")


def state_from_dict(doc: dict) -> ModelState:
    validate_model_dict(doc)
    hp = Hyperparams.from_dict(doc["hyperparams"])
    A = np.array(doc["A"], dtype=float).reshape(hp.K, hp.D)
    W = np.array(doc["W_tilde"], dtype=float).reshape(hp.K, hp.K, hp.K)
    B = np.einsum("krj,jd->krd", W, A)
    n = doc["n_nodes"]
    Omega = np.array(doc["Omega"], dtype=float).reshape(n, hp.K)
    c = np.array(doc["assignments"], dtype=np.int64)
    M = one_hot(c, hp.K)
    m_logits = None if doc.get("m_logits") is None else np.array(doc["m_logits"], dtype=float)
    return ModelState(
        A=A, W_tilde=W, B=B, M_soft=M, assignments=c, Omega=Omega,
        Z=node_embeddings(M, Omega, B), g=np.array(doc["g"], dtype=float),
        s=float(doc["s"]), m_logits=m_logits, hyperparams=hp,
        extras={"seed": doc.get("seed"), "node_ids": doc.get("node_ids")},
    )


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def save_model(path, state: ModelState, seed=None, node_ids=None) -> None:
    write_json(path, state_to_dict(state, seed, node_ids))


def load_model(path) -> ModelState:
    try:
        doc = read_json(path)
    except json.JSONDecodeError as exc:
        raise ModelSchemaError(f"model file is not valid JSON: {exc}") from exc
    return state_from_dict(doc)


def format_tsv(header, rows) -> str:
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(x if isinstance(x, str) else repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def write_tsv(path, header, rows) -> None:
    Path(path).write_text(format_tsv(header, rows), encoding="utf-8")


def embeddings_tsv(state: ModelState, node_ids=None) -> str:
    ids = node_ids if node_ids is not None else [str(i) for i in range(state.n_nodes)]
    header = ["node"] + [f"z{d}" for d in range(state.D)]
    return format_tsv(header, ([ids[i], *state.Z[i]] for i in range(state.n_nodes)))

