"""Build the small cross-stack parity fixture used by the engine's tests.

A randomly initialised `transformers` GPT-2 (seeded) is saved in the
upstream layout, converted to AAWF and scored on five id sequences.
"""

import argparse
import json
import tempfile
from pathlib import Path

import torch
from transformers import GPT2Config, GPT2LMHeadModel

from actadd_weights import convert, convert_check
from actadd_weights.golden import export_golden

PROMPT_IDS = [
    [464, 286, 318, 262, 257],
    [40, 588, 1023],
    [0],
    [40, 510, 284, 616, 290, 531, 11, 13],
    [1, 2, 3, 1022, 1021, 11, 13, 198, 198, 7, 8, 9, 500, 600, 700, 800],
]


def main():
    root = Path(__file__).resolve().parents[2]
    p = argparse.ArgumentParser()
    p.add_argument("--out-dir", type=Path, default=root / "crates/core/tests/data")
    args = p.parse_args()

    torch.manual_seed(20230610)
    config = GPT2Config(n_layer=2, n_embd=16, n_head=4, vocab_size=1024, n_positions=16, bos_token_id=None, eos_token_id=None)
    model = GPT2LMHeadModel(config)
    # Default init leaves LayerNorm at (1, 0); perturb so gains and biases matter.
    with torch.no_grad():
        for name, param in model.named_parameters():
            if "ln" in name:
                param.add_(torch.randn_like(param) * 0.2)
    with tempfile.TemporaryDirectory() as tmp:
        model.save_pretrained(tmp)
        aawf = args.out_dir / "hf_tiny.aawf"
        summary = convert(tmp, aawf, "hf-tiny")
        assert convert_check(aawf, 32, tmp)["ok"]
        export_golden(tmp, args.out_dir / "hf_tiny_golden.json", prompt_ids=PROMPT_IDS, model_name="hf-tiny")
    print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
