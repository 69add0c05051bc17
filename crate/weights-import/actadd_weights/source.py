"""Readers for published GPT-2 checkpoints.

Every reader yields tensors under the Hugging Face names without the
``transformer.`` prefix (``wte.weight``, ``h.0.attn.c_attn.weight`` ...) and
in the Conv1D orientation both upstream formats use: linear weights are
``in_features x out_features``.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Published GPT-2 family shapes: (n_layer, n_embd, n_head).
PUBLISHED = {
    "gpt2": (12, 768, 12),
    "gpt2-medium": (24, 1024, 16),
    "gpt2-large": (36, 1280, 20),
    "gpt2-xl": (48, 1600, 25),
}
ALIASES = {"gpt2-small": "gpt2", "124M": "gpt2", "355M": "gpt2-medium", "774M": "gpt2-large", "1558M": "gpt2-xl"}


class SourceError(ValueError):
    pass


@dataclass
class SourceConfig:
    n_layer: int
    n_embd: int
    n_head: int
    vocab_size: int = 50257
    n_positions: int = 1024
    layer_norm_epsilon: float = 1e-5

    @classmethod
    def published(cls, name: str) -> "SourceConfig":
        n_layer, n_embd, n_head = PUBLISHED[ALIASES.get(name, name)]
        return cls(n_layer, n_embd, n_head)


@dataclass
class Source:
    format: str
    config: SourceConfig
    tensors: dict[str, np.ndarray]
    sha256: str


def _hash_files(paths: list[Path]) -> str:
    h = hashlib.sha256()
    for p in sorted(paths):
        h.update(p.name.encode() + b"\0")
        with open(p, "rb") as f:
            for chunk in iter(lambda: f.read(1 << 20), b""):
                h.update(chunk)
    return h.hexdigest()


def _strip(name: str) -> str:
    return name.removeprefix("transformer.")


def _config_from_json(path: Path) -> SourceConfig | None:
    if not path.exists():
        return None
    raw = json.loads(path.read_text())
    if "n_vocab" in raw:  # OpenAI hparams.json
        return SourceConfig(raw["n_layer"], raw["n_embd"], raw["n_head"], raw["n_vocab"], raw["n_ctx"])
    return SourceConfig(
        raw["n_layer"],
        raw["n_embd"],
        raw["n_head"],
        raw.get("vocab_size", 50257),
        raw.get("n_positions", raw.get("n_ctx", 1024)),
        raw.get("layer_norm_epsilon", 1e-5),
    )


def _read_safetensors(files: list[Path]) -> dict[str, np.ndarray]:
    from safetensors.numpy import load_file

    out = {}
    for f in files:
        try:
            out.update({_strip(k): v for k, v in load_file(f).items()})
        except Exception as e:
            raise SourceError(f"cannot read {f}: {e}") from e
    return out


def _read_torch(files: list[Path]) -> dict[str, np.ndarray]:
    import torch

    out = {}
    for f in files:
        try:
            state = torch.load(f, map_location="cpu", weights_only=True)
        except Exception as e:
            raise SourceError(f"cannot read {f}: {e}") from e
        out.update({_strip(k): v.float().numpy() for k, v in state.items()})
    return out


_TF_NAME = re.compile(r"^model/(?:h(\d+)/)?(.+)$")
_TF_LEAF = {"g": "weight", "w": "weight", "b": "bias"}


def _read_tf(prefix: Path) -> dict[str, np.ndarray]:
    import tensorflow as tf

    try:
        reader = tf.train.load_checkpoint(str(prefix))
    except Exception as e:
        raise SourceError(f"cannot read TensorFlow checkpoint {prefix}: {e}") from e
    out = {}
    for name in reader.get_variable_to_shape_map():
        m = _TF_NAME.match(name)
        if not m:
            continue
        layer, rest = m.groups()
        parts = rest.split("/")
        if parts[-1] in _TF_LEAF:
            parts[-1] = _TF_LEAF[parts[-1]]
        else:
            parts.append("weight")
        rest = ".".join(parts)
        value = reader.get_tensor(name)
        if value.ndim == 3 and value.shape[0] == 1:  # conv1d kernels are [1, in, out]
            value = value[0]
        out[rest if layer is None else f"h.{layer}.{rest}"] = value
    return out


def load_source(path) -> Source:
    path = Path(path)
    if not path.exists():
        raise SourceError(f"source {path} does not exist")
    directory = path if path.is_dir() else path.parent
    config = _config_from_json(directory / "config.json") or _config_from_json(directory / "hparams.json")

    if path.is_dir():
        safetensors = sorted(path.glob("*.safetensors"))
        bins = sorted(path.glob("pytorch_model*.bin"))
        tf_index = sorted(path.glob("*.ckpt.index"))
        if safetensors:
            fmt, files = "safetensors", safetensors
        elif bins:
            fmt, files = "torch", bins
        elif tf_index:
            fmt, files = "tensorflow", [tf_index[0].with_suffix("")]
        else:
            raise SourceError(f"no checkpoint files in {path}")
    elif path.suffix == ".safetensors":
        fmt, files = "safetensors", [path]
    elif path.suffix == ".bin":
        fmt, files = "torch", [path]
    elif path.suffix == ".index" or Path(str(path) + ".index").exists():
        fmt, files = "tensorflow", [path.with_suffix("") if path.suffix == ".index" else path]
    else:
        raise SourceError(f"unrecognised checkpoint file {path}")

    if fmt == "safetensors":
        tensors, hashed = _read_safetensors(files), files
    elif fmt == "torch":
        tensors, hashed = _read_torch(files), files
    else:
        prefix = files[0]
        hashed = sorted(prefix.parent.glob(prefix.name + ".*"))
        tensors = _read_tf(prefix)
    return Source(format=fmt, config=config, tensors=tensors, sha256=_hash_files(hashed))
