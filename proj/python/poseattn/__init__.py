"""Two-stream pose/RGB attention models for action recognition.

Thin Python layer over the C++ core: array helpers take and return NumPy
arrays, run helpers take and return plain dicts.
"""

import json

from . import _core
from ._core import (
    ConfigError,
    DataError,
    NumericError,
    ShapeError,
    augment_pose,
    content_hash,
    eval_window_starts,
    matmul,
    motion_stats,
    softmax,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "ShapeError",
    "augment_pose",
    "content_hash",
    "default_config",
    "default_spec",
    "dump_attention",
    "eval_window_starts",
    "evaluate",
    "generate",
    "gradcheck",
    "load_manifest",
    "matmul",
    "motion_stats",
    "softmax",
    "train",
]


def default_spec(task="active-hand"):
    return json.loads(_core.default_spec_json(task))


def default_config():
    return json.loads(_core.default_config_json())


def generate(path, task="active-hand", **overrides):
    """Writes a synthetic dataset to `path` and returns its manifest."""
    spec = default_spec(task)
    spec.update(overrides)
    return json.loads(_core.generate_json(json.dumps(spec), str(path)))


def load_manifest(path):
    return json.loads(_core.load_manifest_json(str(path)))


def train(config, dataset, out_dir=""):
    return json.loads(_core.train_json(json.dumps(config), str(dataset), str(out_dir)))


def evaluate(checkpoint, dataset, split="test"):
    return json.loads(_core.evaluate_json(str(checkpoint), str(dataset), split))


def dump_attention(checkpoint, dataset, split="test", out=""):
    return json.loads(_core.dump_attention_json(str(checkpoint), str(dataset), split, str(out)))


def gradcheck(eps=1e-5, tol=1e-5, seed=7):
    return json.loads(_core.gradcheck_json(eps, tol, seed))
