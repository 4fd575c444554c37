"""Versioned JSON model files.

Floats are serialized with Python's shortest round-trip repr, so a loaded
model reproduces the saved one bit for bit. The projection plan stores its
explicit pair list: a model file stays self-contained even if the plan
construction ever changes.
"""

import json

import numpy as np

from ngrc.embed import Normalizer
from ngrc.errors import ModelFileError, UnsupportedModelVersionError
from ngrc.project import ProjectionPlan
from ngrc.readout import ReadoutMatrix
from ngrc.rollout import NgrcModel

FORMAT_VERSION = 1


def model_to_dict(model, provenance=None):
    norm = model.normalizer
    plan = model.plan
    weights = model.weights
    return {
        "format": "ngrc-model",
        "format_version": FORMAT_VERSION,
        "H": model.H,
        "sample_step": model.sample_step,
        "output_channels": list(model.output_channels),
        "input_channels": list(model.input_channels),
        "normalizer": {
            "epsilon": norm.epsilon,
            "lo": norm.lo.tolist(),
            "hi": norm.hi.tolist(),
        },
        "plan": {
            "seed": plan.seed,
            "input_len": plan.input_len,
            "m": plan.m,
            "pairs": [list(p) for p in plan.pairs],
        },
        "weights": {
            "lam": weights.lam,
            "shape": list(weights.weights.shape),
            "values": weights.weights.ravel().tolist(),
        },
        "provenance": provenance or {},
    }


def model_from_dict(data):
    if not isinstance(data, dict) or data.get("format") != "ngrc-model":
        raise ModelFileError("not a model file (missing format tag)")
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedModelVersionError(
            f"model format version {version!r} is not supported "
            f"(this build reads version {FORMAT_VERSION})"
        )
    try:
        norm = Normalizer(
            np.asarray(data["normalizer"]["lo"], dtype=float),
            np.asarray(data["normalizer"]["hi"], dtype=float),
            float(data["normalizer"]["epsilon"]),
        )
        plan = ProjectionPlan(
            int(data["plan"]["input_len"]),
            int(data["plan"]["m"]),
            tuple((int(i), int(j)) for i, j in data["plan"]["pairs"]),
            int(data["plan"]["seed"]),
        )
        shape = tuple(data["weights"]["shape"])
        weights = ReadoutMatrix(
            np.asarray(data["weights"]["values"], dtype=float).reshape(shape),
            float(data["weights"]["lam"]),
        )
        model = NgrcModel(
            normalizer=norm,
            plan=plan,
            weights=weights,
            H=int(data["H"]),
            sample_step=float(data["sample_step"]),
            output_channels=tuple(data["output_channels"]),
            input_channels=tuple(data["input_channels"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"model file is malformed: {exc!r}")
    return model, data.get("provenance", {})


def save_model(model, path, provenance=None):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model, provenance), fh, indent=1)
        fh.write("\n")


def load_model(path):
    """Read a model file; returns the model alone."""
    model, _ = load_model_file(path)
    return model


def load_model_file(path):
    """Read a model file; returns (model, provenance dict)."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ModelFileError(f"cannot read model {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path} is not valid JSON: {exc}")
    return model_from_dict(data)
