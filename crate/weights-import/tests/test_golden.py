from pathlib import Path

import json

import numpy as np
import pytest
import reference

from actadd_weights import convert, read_container
from actadd_weights.golden import decode_logits, export_golden, load_tokenizer

pytest.importorskip("transformers")

ASSETS = Path(__file__).resolve().parents[2] / "assets" / "gpt2"


def test_reference_matches_numpy_forward_on_converted_weights(tiny_source, tmp_path):
    """Upstream logits equal an independent forward pass over the AAWF tensors."""
    convert(tiny_source, tmp_path / "m.aawf", "tiny")
    c = read_container(tmp_path / "m.aawf")
    ids = [[5, 17, 300, 2, 511], [0], list(range(40, 72))]
    summary = export_golden(tiny_source, tmp_path / "g.json", prompt_ids=ids, model_name="tiny")
    assert summary["prompts"] == 3
    golden = json.loads((tmp_path / "g.json").read_text())
    for rec, want_ids in zip(golden["prompts"], ids):
        assert rec["ids"] == want_ids
        ours = reference.forward(c.tensors, c.extra["config"], want_ids)
        np.testing.assert_allclose(decode_logits(rec), ours, atol=1e-4)


def test_default_prompts_use_gpt2_tokenization():
    tok = load_tokenizer(ASSETS / "vocab.json", ASSETS / "merges.txt")
    assert tok.encode("I like weddings", add_special_tokens=False).ids == [40, 588, 37377]
