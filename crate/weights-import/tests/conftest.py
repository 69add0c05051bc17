import json

import numpy as np
import pytest

TINY = {"n_layer": 2, "n_embd": 16, "n_head": 2, "vocab_size": 512, "n_positions": 32, "layer_norm_epsilon": 1e-5}


def tiny_tensors(seed: int = 0, cfg: dict = TINY) -> dict[str, np.ndarray]:
    """Random GPT-2 weights in upstream (Conv1D, in x out) orientation."""
    rng = np.random.default_rng(seed)
    d, v, p = cfg["n_embd"], cfg["vocab_size"], cfg["n_positions"]

    def r(*shape, scale=0.1):
        return (rng.standard_normal(shape) * scale).astype(np.float32)

    t = {"transformer.wte.weight": r(v, d), "transformer.wpe.weight": r(p, d, scale=0.02)}
    for i in range(cfg["n_layer"]):
        h = f"transformer.h.{i}."
        t |= {
            h + "ln_1.weight": 1 + r(d),
            h + "ln_1.bias": r(d),
            h + "attn.c_attn.weight": r(d, 3 * d),
            h + "attn.c_attn.bias": r(3 * d),
            h + "attn.c_proj.weight": r(d, d),
            h + "attn.c_proj.bias": r(d),
            h + "ln_2.weight": 1 + r(d),
            h + "ln_2.bias": r(d),
            h + "mlp.c_fc.weight": r(d, 4 * d),
            h + "mlp.c_fc.bias": r(4 * d),
            h + "mlp.c_proj.weight": r(4 * d, d),
            h + "mlp.c_proj.bias": r(d),
        }
    t |= {"transformer.ln_f.weight": 1 + r(d), "transformer.ln_f.bias": r(d)}
    return t


def write_checkpoint(directory, tensors, cfg=TINY):
    from safetensors.numpy import save_file

    directory.mkdir(parents=True, exist_ok=True)
    save_file(tensors, str(directory / "model.safetensors"))
    (directory / "config.json").write_text(json.dumps({"model_type": "gpt2", **cfg}))
    return directory


@pytest.fixture
def tiny_source(tmp_path):
    return write_checkpoint(tmp_path / "src", tiny_tensors())
