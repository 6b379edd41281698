"""Save and load fitted estimators as a single ``.npz`` archive.

Array fields are stored as arrays, scalars and strings in a JSON ``meta``
entry, so a saved model carries its hyperparameters and standardizer and
reloads bit-exactly.
"""
from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .ridge import RidgeModel, Standardizer
from .svm import SvmModel

_KINDS = {"ridge": RidgeModel, "svm": SvmModel}


def _kind_of(model) -> str:
    for kind, cls in _KINDS.items():
        if isinstance(model, cls):
            return kind
    raise TypeError(f"cannot serialize {type(model).__name__}")


def save_estimator(model, path: str | Path) -> Path:
    path = Path(path)
    arrays: dict[str, np.ndarray] = {}
    meta: dict = {"kind": _kind_of(model), "scalars": {}, "tuples": {}, "none": []}
    for f in dataclasses.fields(model):
        value = getattr(model, f.name)
        if value is None:
            meta["none"].append(f.name)
        elif isinstance(value, Standardizer):
            arrays[f"{f.name}.mean"] = value.mean
            arrays[f"{f.name}.scale"] = value.scale
        elif isinstance(value, np.ndarray):
            arrays[f.name] = value
        elif isinstance(value, tuple):
            meta["tuples"][f.name] = len(value)
            for i, item in enumerate(value):
                arrays[f"{f.name}.{i}"] = np.asarray(item)
        else:
            meta["scalars"][f.name] = value
    arrays["meta"] = np.array(json.dumps(meta))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_estimator(path: str | Path):
    with np.load(Path(path), allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        cls = _KINDS[meta["kind"]]
        kwargs = {}
        for f in dataclasses.fields(cls):
            name = f.name
            if name in meta["none"]:
                kwargs[name] = None
            elif name in meta["scalars"]:
                kwargs[name] = meta["scalars"][name]
            elif name in meta["tuples"]:
                n = meta["tuples"][name]
                kwargs[name] = tuple(z[f"{name}.{i}"] if np.ndim(z[f"{name}.{i}"]) else z[f"{name}.{i}"].item()
                                     for i in range(n))
            elif f"{name}.mean" in z.files:
                kwargs[name] = Standardizer(z[f"{name}.mean"], z[f"{name}.scale"])
            elif name in z.files:
                kwargs[name] = z[name]
    return cls(**kwargs)
