"""GPT-2 checkpoint to AAWF conversion and verification.

AAWF tensor names and shapes (d = d_model, V = vocab, P = positions).
Linear weights are stored ``out_features x in_features``; the upstream
Conv1D kernels (``in x out``) are transposed.

======================  ==========  =====================
AAWF name               shape       source
======================  ==========  =====================
wte                     V x d       wte.weight
wpe                     P x d       wpe.weight
h.{i}.ln1.{g,b}         d           h.{i}.ln_1.{weight,bias}
h.{i}.attn.qkv.w        3d x d      h.{i}.attn.c_attn.weight (T)
h.{i}.attn.qkv.b        3d          h.{i}.attn.c_attn.bias
h.{i}.attn.proj.w       d x d       h.{i}.attn.c_proj.weight (T)
h.{i}.attn.proj.b       d           h.{i}.attn.c_proj.bias
h.{i}.ln2.{g,b}         d           h.{i}.ln_2.{weight,bias}
h.{i}.mlp.up.w          4d x d      h.{i}.mlp.c_fc.weight (T)
h.{i}.mlp.up.b          4d          h.{i}.mlp.c_fc.bias
h.{i}.mlp.down.w        d x 4d      h.{i}.mlp.c_proj.weight (T)
h.{i}.mlp.down.b        d           h.{i}.mlp.c_proj.bias
lnf.{g,b}               d           ln_f.{weight,bias}
======================  ==========  =====================
"""

from __future__ import annotations

import hashlib
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import aawf
from .source import ALIASES, PUBLISHED, Source, SourceConfig, SourceError, load_source


class ConversionError(ValueError):
    pass


@dataclass(frozen=True)
class Planned:
    name: str
    source: str
    shape: tuple[int, ...]
    transpose: bool


_LINEAR = {"attn.qkv": "attn.c_attn", "attn.proj": "attn.c_proj", "mlp.up": "mlp.c_fc", "mlp.down": "mlp.c_proj"}


def plan(cfg: SourceConfig) -> list[Planned]:
    d = cfg.n_embd
    out = [
        Planned("wte", "wte.weight", (cfg.vocab_size, d), False),
        Planned("wpe", "wpe.weight", (cfg.n_positions, d), False),
    ]
    dims = {"attn.qkv": (3 * d, d), "attn.proj": (d, d), "mlp.up": (4 * d, d), "mlp.down": (d, 4 * d)}
    for i in range(cfg.n_layer):
        for ours, theirs in [("ln1", "ln_1"), ("attn.qkv", None), ("attn.proj", None), ("ln2", "ln_2"), ("mlp.up", None), ("mlp.down", None)]:
            if theirs:
                out.append(Planned(f"h.{i}.{ours}.g", f"h.{i}.{theirs}.weight", (d,), False))
                out.append(Planned(f"h.{i}.{ours}.b", f"h.{i}.{theirs}.bias", (d,), False))
            else:
                o, n = dims[ours]
                out.append(Planned(f"h.{i}.{ours}.w", f"h.{i}.{_LINEAR[ours]}.weight", (o, n), True))
                out.append(Planned(f"h.{i}.{ours}.b", f"h.{i}.{_LINEAR[ours]}.bias", (o,), False))
    out.append(Planned("lnf.g", "ln_f.weight", (d,), False))
    out.append(Planned("lnf.b", "ln_f.bias", (d,), False))
    return out


def _resolve_config(src: Source, model_name: str) -> SourceConfig:
    canonical = ALIASES.get(model_name, model_name)
    cfg = src.config
    if cfg is None:
        if canonical not in PUBLISHED:
            raise ConversionError(f"no config.json next to the source and `{model_name}` is not a published GPT-2 size")
        cfg = SourceConfig.published(canonical)
        for name in ("wte.weight", "wpe.weight"):
            if name not in src.tensors:
                raise ConversionError(f"missing tensor `{name}`")
        cfg.vocab_size, cfg.n_positions = src.tensors["wte.weight"].shape[0], src.tensors["wpe.weight"].shape[0]
    if canonical in PUBLISHED:
        got = (cfg.n_layer, cfg.n_embd, cfg.n_head)
        if got != PUBLISHED[canonical]:
            raise ConversionError(
                f"source config (n_layer, n_embd, n_head) = {got} does not match published {canonical} {PUBLISHED[canonical]}"
            )
    if cfg.n_embd % cfg.n_head:
        raise ConversionError(f"n_embd {cfg.n_embd} is not divisible by n_head {cfg.n_head}")
    return cfg


def _source_value(src: Source, p: Planned) -> np.ndarray:
    if p.source not in src.tensors:
        raise ConversionError(f"missing tensor `{p.source}` (needed for `{p.name}`)")
    value = np.asarray(src.tensors[p.source])
    expected = p.shape[::-1] if p.transpose else p.shape
    if value.shape != expected:
        raise ConversionError(f"shape mismatch for `{p.source}`: expected {list(expected)}, found {list(value.shape)}")
    value = value.astype(np.float32, copy=False)
    if not np.isfinite(value).all():
        raise ConversionError(f"tensor `{p.source}` contains non-finite values")
    return np.ascontiguousarray(value.T if p.transpose else value)


def _engine_config(cfg: SourceConfig) -> dict:
    return {
        "n_layers": cfg.n_layer,
        "d_model": cfg.n_embd,
        "n_heads": cfg.n_head,
        "vocab_size": cfg.vocab_size,
        "max_positions": cfg.n_positions,
        "layernorm_epsilon": cfg.layer_norm_epsilon,
    }


def convert(src_path, dst_path, model_name: str = "gpt2") -> dict:
    """Convert a checkpoint; nothing is written unless every tensor checks out."""
    try:
        src = load_source(src_path)
    except SourceError as e:
        raise ConversionError(str(e)) from e
    cfg = _resolve_config(src, model_name)
    planned = plan(cfg)
    tensors = [(p.name, _source_value(src, p)) for p in planned]
    head = src.tensors.get("lm_head.weight")
    if head is not None and not np.array_equal(head, src.tensors["wte.weight"]):
        raise ConversionError("`lm_head.weight` differs from `wte.weight`; only tied unembeddings are supported")
    extra = {
        "config": _engine_config(cfg),
        "source": {"model_name": model_name, "format": src.format, "sha256": src.sha256},
    }
    digest = aawf.write_container(Path(dst_path), "model", extra, tensors)
    return {
        "path": str(dst_path),
        "sha256": digest,
        "model_name": model_name,
        "source_format": src.format,
        "source_sha256": src.sha256,
        "config": extra["config"],
        "tensors": len(tensors),
        "parameters": int(sum(t.size for _, t in tensors)),
    }


def _first_mismatch(a: np.ndarray, b: np.ndarray) -> tuple[int, ...] | None:
    bad = np.argwhere(a.view(np.uint32) != b.view(np.uint32))
    return tuple(int(i) for i in bad[0]) if len(bad) else None


def convert_check(aawf_path, n_probes: int = 0, source=None, seed: int = 0) -> dict:
    """Recompute every checksum, then compare `n_probes` random slices with the source.

    A slice is one row of a matrix or up to 64 consecutive entries of a
    vector. ``n_probes=0`` only checks checksums. Failures name the tensor
    and, for probes, the first differing index.
    """
    data = Path(aawf_path).read_bytes()
    failures = []
    try:
        header, start = aawf.parse_header(data)
    except aawf.FormatError as e:
        return {"ok": False, "failures": [str(e)], "tensors": 0, "probes": []}
    records = {r["name"]: r for r in header["tensors"]}
    for r in header["tensors"]:
        raw = aawf.tensor_bytes(data, start, r)
        n = int(np.prod(r["shape"], dtype=np.int64))
        actual = zlib.crc32(raw)
        if len(raw) != 4 * n or actual != r["crc32"]:
            failures.append(f"checksum mismatch in tensor `{r['name']}`: expected {r['crc32']:08x}, got {actual:08x}")

    probes = []
    if n_probes:
        if source is None:
            raise ConversionError("probes compare against the source checkpoint; pass a source")
        src = source if isinstance(source, Source) else load_source(source)
        by_name = {p.name: p for p in plan(config_from_engine(header["config"]))}
        rng = np.random.default_rng(seed)
        names = sorted(records)
        for _ in range(n_probes):
            name = names[rng.integers(len(names))]
            r = records[name]
            stored = np.frombuffer(aawf.tensor_bytes(data, start, r), dtype="<f4")
            if stored.size != int(np.prod(r["shape"])):
                failures.append(f"probe `{name}`: tensor is truncated")
                continue
            stored = stored.reshape(r["shape"])
            expected = _source_value(src, by_name[name]) if name in by_name else None
            if expected is None:
                failures.append(f"probe `{name}`: no such tensor in the source")
                continue
            if stored.ndim == 2:
                row = int(rng.integers(stored.shape[0]))
                a, b, base = stored[row], expected[row], (row,)
            else:
                lo = int(rng.integers(stored.size))
                a, b, base = stored[lo : lo + 64], expected[lo : lo + 64], ()
            at = _first_mismatch(a, b)
            entry = {"tensor": name, "slice": list(base) if base else [lo, lo + len(a)], "ok": at is None}
            if at is not None:
                index = base + at if base else (lo + at[0],)
                entry["index"] = list(index)
                failures.append(f"probe mismatch in tensor `{name}` at index {list(index)}: aawf {stored[index]!r}, source {expected[index]!r}")
            probes.append(entry)
    return {
        "ok": not failures,
        "sha256": hashlib.sha256(data).hexdigest(),
        "tensors": len(records),
        "probes": probes,
        "failures": failures,
    }


def _source_config(engine: dict) -> dict:
    return {
        "n_layer": engine["n_layers"],
        "n_embd": engine["d_model"],
        "n_head": engine["n_heads"],
        "vocab_size": engine["vocab_size"],
        "n_positions": engine["max_positions"],
        "layer_norm_epsilon": engine["layernorm_epsilon"],
    }


def config_from_engine(engine: dict) -> SourceConfig:
    return SourceConfig(**_source_config(engine))

