"""Reference logits from the original checkpoint, for engine parity checks.

The reference forward pass is the `transformers` GPT-2 implementation
loaded straight from the source tensors, so it shares nothing with the
AAWF writer or the engine.
"""

from __future__ import annotations

import base64
import json
import re
from pathlib import Path

import numpy as np

from .source import load_source

# Causal-mask buffers some checkpoints carry alongside the weights.
_MASK_BUFFER = re.compile(r"^h\.\d+\.attn\.(bias|masked_bias)$")

DEFAULT_PROMPTS = [
    "I went up to my friend and said",
    "The capital of France is",
    "Love is",
    "In 1969, astronauts landed on the moon and",
    "def fibonacci(n):\n    return",
]


def load_tokenizer(vocab: Path, merges: Path):
    from tokenizers import Tokenizer, decoders, models, pre_tokenizers

    tok = Tokenizer(models.BPE.from_file(str(vocab), str(merges)))
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    tok.decoder = decoders.ByteLevel()
    return tok


def reference_model(src):
    import torch
    from transformers import GPT2Config, GPT2LMHeadModel

    cfg = src.config
    config = GPT2Config(
        n_layer=cfg.n_layer,
        n_embd=cfg.n_embd,
        n_head=cfg.n_head,
        vocab_size=cfg.vocab_size,
        n_positions=cfg.n_positions,
        layer_norm_epsilon=cfg.layer_norm_epsilon,
        bos_token_id=None,
        eos_token_id=None,
    )
    model = GPT2LMHeadModel(config)
    state = {
        f"transformer.{k}": torch.from_numpy(np.asarray(v, dtype=np.float32).copy())
        for k, v in src.tensors.items()
        if not k.startswith("lm_head") and not _MASK_BUFFER.match(k)
    }
    missing, unexpected = model.load_state_dict(state, strict=False)
    missing = [m for m in missing if m != "lm_head.weight"]
    if missing or unexpected:
        raise ValueError(f"reference model load: missing {missing}, unexpected {unexpected}")
    model.tie_weights()
    return model.eval()


def reference_logits(model, ids: list[int]) -> np.ndarray:
    import torch

    with torch.no_grad():
        out = model(torch.tensor([ids], dtype=torch.long))
    return out.logits[0].float().numpy()


def export_golden(src_path, out_path, *, vocab=None, merges=None, prompts=None, prompt_ids=None, model_name="gpt2") -> dict:
    """Write golden logits for each prompt (all positions, no BOS).

    Either `prompts` (tokenized with the given vocab/merges) or `prompt_ids`
    (used as is, with an empty text) must be supplied.
    """
    import torch
    import transformers

    src = load_source(src_path)
    if src.config is None:
        raise ValueError("golden export needs config.json or hparams.json next to the checkpoint")
    model = reference_model(src)
    if prompt_ids is None:
        tok = load_tokenizer(vocab, merges)
        items = [(text, tok.encode(text, add_special_tokens=False).ids) for text in (prompts or DEFAULT_PROMPTS)]
    else:
        items = [("", list(ids)) for ids in prompt_ids]
    records = []
    for text, ids in items:
        logits = reference_logits(model, ids)
        records.append(
            {
                "text": text,
                "ids": ids,
                "shape": list(logits.shape),
                "logits_f32le_b64": base64.b64encode(logits.astype("<f4").tobytes()).decode(),
            }
        )
    golden = {
        "model_name": model_name,
        "source_sha256": src.sha256,
        "reference": f"transformers {transformers.__version__}, torch {torch.__version__}",
        "prompts": records,
    }
    Path(out_path).write_text(json.dumps(golden, indent=1) + "\n")
    return {"path": str(out_path), "prompts": len(records), "tokens": sum(len(r["ids"]) for r in records)}


def decode_logits(record: dict) -> np.ndarray:
    raw = base64.b64decode(record["logits_f32le_b64"])
    return np.frombuffer(raw, dtype="<f4").reshape(record["shape"])
