"""Trained-model packaging: support vectors, prediction, JSON round trip.

A SparseModel is self-contained: it stores the surviving coefficients, the
standardized support vectors they refer to, the kernel specs, and the
feature standardizer, so prediction needs no access to the training set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import Dataset, Standardizer
from .errors import FormatError
from .kernels import KernelSpec, cross_gram
from .objective import CoefMatrix

FORMAT_NAME = "capsvm-model"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelEntry:
    k: int          # kernel family index
    j: int          # original training index
    alpha: float    # signed coefficient, |alpha| > 0
    y: float        # training label of point j
    x: np.ndarray   # standardized feature vector of point j


@dataclass(frozen=True)
class SparseModel:
    entries: list[ModelEntry]
    specs: list[KernelSpec]
    standardizer: Standardizer
    threshold: float = 0.0

    @property
    def num_features(self) -> int:
        return self.standardizer.mean.shape[0]


def from_coefs(
    coefs: CoefMatrix,
    train: Dataset,
    specs: list[KernelSpec],
    standardizer: Standardizer,
    prune_tol: float = 1e-7,
) -> SparseModel:
    """Keep coordinates with |alpha| > prune_tol; store their support vectors.

    ``train`` must be the standardized dataset the Gram stack was built on.
    """
    if prune_tol < 0:
        raise ValueError(f"prune_tol must be >= 0, got {prune_tol}")
    A = coefs.alpha
    if A.shape != (len(specs), train.num_examples):
        raise ValueError(
            f"coefficient shape {A.shape} does not match ({len(specs)}, {train.num_examples})"
        )
    entries = []
    for k, j in zip(*np.nonzero(np.abs(A) > prune_tol)):
        entries.append(
            ModelEntry(int(k), int(j), float(A[k, j]), float(train.labels[j]),
                       train.features[j].copy())
        )
    return SparseModel(entries, list(specs), standardizer)


def predict_raw(model: SparseModel, query: Dataset | np.ndarray) -> np.ndarray:
    """Raw scores f(x) = sum over entries of alpha * y_j * K_k(x, x_j).

    Queries are in the original feature space; the stored standardizer is
    applied before kernel evaluation.
    """
    Q = query.features if isinstance(query, Dataset) else np.asarray(query, dtype=float)
    if Q.ndim == 1:
        Q = Q[None, :]
    Qs = model.standardizer.apply(Q)
    raw = np.zeros(Qs.shape[0])
    if not model.entries:
        return raw
    vec_of: dict[int, np.ndarray] = {}
    for e in model.entries:
        vec_of.setdefault(e.j, e.x)
    distinct = sorted(vec_of)
    col_of = {j: t for t, j in enumerate(distinct)}
    support = np.vstack([vec_of[j] for j in distinct])
    for k, spec in enumerate(model.specs):
        w = np.zeros(len(distinct))
        for e in model.entries:
            if e.k == k:
                w[col_of[e.j]] += e.alpha * e.y
        if np.any(w != 0.0):
            raw += cross_gram(spec, support, Qs) @ w
    return raw


def predict_label(model: SparseModel, query: Dataset | np.ndarray) -> np.ndarray:
    """±1 decisions: sign(raw - threshold), ties at the boundary go to +1."""
    raw = predict_raw(model, query)
    return np.where(raw - model.threshold >= 0.0, 1.0, -1.0)


def support_count(model: SparseModel) -> tuple[int, int]:
    """(number of coefficients, number of distinct support points)."""
    return len(model.entries), len({e.j for e in model.entries})


def _spec_to_dict(spec: KernelSpec) -> dict:
    return {"family": spec.family, "degree": spec.degree, "gamma": spec.gamma,
            "a": spec.a, "b": spec.b}


def serialize(model: SparseModel, path: str) -> None:
    """Write the model as self-describing JSON; reals keep full precision."""
    payload = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "threshold": model.threshold,
        "specs": [_spec_to_dict(s) for s in model.specs],
        "standardizer": {
            "mean": model.standardizer.mean.tolist(),
            "std": model.standardizer.std.tolist(),
        },
        "entries": [
            {"k": e.k, "j": e.j, "alpha": e.alpha, "y": e.y, "x": e.x.tolist()}
            for e in model.entries
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def deserialize(path: str) -> SparseModel:
    """Read a model written by serialize; predictions reproduce bit-for-bit."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_NAME:
        raise FormatError(f"not a {FORMAT_NAME} file")
    version = payload.get("version")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported model version {version!r} (expected {FORMAT_VERSION})")
    try:
        specs = [
            KernelSpec(d["family"], degree=d["degree"], gamma=d["gamma"], a=d["a"], b=d["b"])
            for d in payload["specs"]
        ]
        rec = Standardizer(
            np.asarray(payload["standardizer"]["mean"], dtype=float),
            np.asarray(payload["standardizer"]["std"], dtype=float),
        )
        n = rec.mean.shape[0]
        entries = []
        for d in payload["entries"]:
            x = np.asarray(d["x"], dtype=float)
            if x.shape != (n,):
                raise FormatError(f"entry vector has {x.shape[0]} features, expected {n}")
            if d["alpha"] == 0.0:
                raise FormatError("entry with zero coefficient")
            entries.append(ModelEntry(int(d["k"]), int(d["j"]), float(d["alpha"]),
                                      float(d["y"]), x))
        return SparseModel(entries, specs, rec, float(payload["threshold"]))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"schema violation: {exc}") from exc
