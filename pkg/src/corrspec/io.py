"""JSON encodings of the input objects.

* joint: ``{"rows": [labels], "cols": [labels], "mass": [[...]]}`` (labels optional)
* factored: ``{"axes": [{"name": str, "labels": [...]}, ...], "mass": [row-major flat list]}``
* chain: ``{"pxy": joint, "kernel": {"from": [labels], "to": [labels], "rows": [[...]]}}``
* channel: ``{"x1": [labels], "x2": [labels], "y": [labels], "rows": [[...]]}``, rows x1-major
* candidate: ``{"pq": [...], "x1": [labels], "x2": [labels], "kernel": nested [q][u][v][x1][x2]}``
* distortion: ``{"d1": [[...]], "d2": [[...]]}``
"""
from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np

from .dpi import ChainSpec
from .probcore import Alphabet, FactoredDist, JointDist, Kernel, Marginal
from .regions import DistortionSpec, TestChannel

_labels = {"type": "array", "items": {"type": ["string", "integer"]}, "minItems": 1}
_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}, "minItems": 1}

INPUT_SCHEMAS = {
    "joint": {"type": "object", "required": ["mass"],
              "properties": {"rows": _labels, "cols": _labels, "mass": _matrix}},
    "factored": {"type": "object", "required": ["axes", "mass"],
                 "properties": {"axes": {"type": "array", "minItems": 1, "items": {
                     "type": "object", "required": ["name", "labels"],
                     "properties": {"name": {"type": "string"}, "labels": _labels}}},
                     "mass": {"type": "array", "items": {"type": "number"}}}},
    "kernel": {"type": "object", "required": ["rows"],
               "properties": {"from": _labels, "to": _labels, "rows": _matrix}},
    "channel": {"type": "object", "required": ["x1", "x2", "rows"],
                "properties": {"x1": _labels, "x2": _labels, "y": _labels, "rows": _matrix}},
    "candidate": {"type": "object", "required": ["kernel"],
                  "properties": {"pq": {"type": "array", "items": {"type": "number"}},
                                 "x1": _labels, "x2": _labels, "kernel": {"type": "array"}}},
    "distortion": {"type": "object", "required": ["d1", "d2"], "properties": {"d1": _matrix, "d2": _matrix}},
}
INPUT_SCHEMAS["chain"] = {"type": "object", "required": ["pxy", "kernel"],
                          "properties": {"pxy": INPUT_SCHEMAS["joint"], "kernel": INPUT_SCHEMAS["kernel"]}}


class InputError(ValueError):
    """Malformed input document."""


def read_json(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _validate(doc, kind: str):
    try:
        jsonschema.validate(doc, INPUT_SCHEMAS[kind])
    except jsonschema.ValidationError as exc:
        raise InputError(f"invalid {kind} document: {exc.message}") from None


def _alphabet(labels, size: int, prefix: str = "") -> Alphabet:
    return Alphabet.of_size(size, prefix) if labels is None else Alphabet(tuple(str(x) for x in labels))


def joint_from_json(doc) -> JointDist:
    _validate(doc, "joint")
    mass = np.asarray(doc["mass"], dtype=np.float64)
    if mass.ndim != 2:
        raise InputError("joint mass must be a rectangular matrix")
    return JointDist(_alphabet(doc.get("rows"), mass.shape[0]), _alphabet(doc.get("cols"), mass.shape[1]), mass)


def joint_to_json(j: JointDist) -> dict:
    return {"rows": list(j.rows.labels), "cols": list(j.cols.labels), "mass": j.mass.tolist()}


def factored_from_json(doc) -> FactoredDist:
    _validate(doc, "factored")
    axes = [(a["name"], Alphabet(tuple(str(x) for x in a["labels"]))) for a in doc["axes"]]
    return FactoredDist(axes, np.asarray(doc["mass"], dtype=np.float64))


def factored_to_json(d: FactoredDist) -> dict:
    return {"axes": [{"name": n, "labels": list(a.labels)} for n, a in d.axes], "mass": d.mass.ravel().tolist()}


def load_distribution(doc):
    """A joint or a factored document, whichever ``doc`` is."""
    return factored_from_json(doc) if "axes" in doc else joint_from_json(doc)


def chain_from_json(doc) -> ChainSpec:
    _validate(doc, "chain")
    pxy = joint_from_json(doc["pxy"])
    k = doc["kernel"]
    rows = np.asarray(k["rows"], dtype=np.float64)
    src = _alphabet(k.get("from"), rows.shape[0]) if "from" in k else pxy.cols
    return ChainSpec(pxy, Kernel(src, _alphabet(k.get("to"), rows.shape[1], "z"), rows))


def channel_from_json(doc) -> Kernel:
    _validate(doc, "channel")
    rows = np.asarray(doc["rows"], dtype=np.float64)
    x1, x2 = _alphabet(doc["x1"], 0), _alphabet(doc["x2"], 0)
    return Kernel(x1.product(x2), _alphabet(doc.get("y"), rows.shape[1], "y"), rows)


def candidate_from_json(doc, sources: JointDist) -> TestChannel:
    _validate(doc, "candidate")
    k = np.asarray(doc["kernel"], dtype=np.float64)
    if k.ndim == 4:
        k = k[None]
    if k.ndim != 5:
        raise InputError("candidate kernel must be nested [q][u][v][x1][x2]")
    pq = np.asarray(doc.get("pq", np.full(k.shape[0], 1.0 / k.shape[0])), dtype=np.float64)
    return TestChannel(sources, Marginal(Alphabet.of_size(len(pq)), pq), k,
                       _alphabet(doc.get("x1"), k.shape[-2]), _alphabet(doc.get("x2"), k.shape[-1]))


def distortion_from_json(doc) -> DistortionSpec:
    _validate(doc, "distortion")
    return DistortionSpec(np.asarray(doc["d1"], dtype=np.float64), np.asarray(doc["d2"], dtype=np.float64))
