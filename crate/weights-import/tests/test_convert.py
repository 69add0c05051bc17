import json
import os

import numpy as np
import pytest
from conftest import TINY, tiny_tensors, write_checkpoint

from actadd_weights import ConversionError, convert, convert_check, read_container
from actadd_weights.cli import main
from actadd_weights.convert import plan
from actadd_weights.source import SourceConfig


def test_conversion_is_deterministic(tiny_source, tmp_path):
    a = convert(tiny_source, tmp_path / "a.aawf", "tiny")
    b = convert(tiny_source, tmp_path / "b.aawf", "tiny")
    assert a["sha256"] == b["sha256"]
    assert (tmp_path / "a.aawf").read_bytes() == (tmp_path / "b.aawf").read_bytes()
    assert a["tensors"] == 2 + 12 * 2 + 2


def test_layout_and_transposition(tiny_source, tmp_path):
    convert(tiny_source, tmp_path / "m.aawf", "tiny")
    c = read_container(tmp_path / "m.aawf")
    src = tiny_tensors()
    assert c.kind == "model"
    assert c.extra["config"] == {
        "n_layers": 2,
        "d_model": 16,
        "n_heads": 2,
        "vocab_size": 512,
        "max_positions": 32,
        "layernorm_epsilon": 1e-5,
    }
    assert c.tensors["h.1.attn.qkv.w"].shape == (48, 16)
    np.testing.assert_array_equal(c.tensors["h.1.attn.qkv.w"], src["transformer.h.1.attn.c_attn.weight"].T)
    np.testing.assert_array_equal(c.tensors["h.0.mlp.down.w"], src["transformer.h.0.mlp.c_proj.weight"].T)
    np.testing.assert_array_equal(c.tensors["h.0.ln2.g"], src["transformer.h.0.ln_2.weight"])
    np.testing.assert_array_equal(c.tensors["wte"], src["transformer.wte.weight"])
    assert all(r["byte_offset"] % 64 == 0 for r in c.records)


def test_published_small_shapes():
    cfg = SourceConfig.published("gpt2-small")
    assert (cfg.n_layer, cfg.n_embd, cfg.n_head, cfg.vocab_size, cfg.n_positions) == (12, 768, 12, 50257, 1024)
    shapes = {p.name: p.shape for p in plan(cfg)}
    assert len(shapes) == 2 + 12 * 12 + 2
    assert shapes["wte"] == (50257, 768)
    assert shapes["h.11.attn.qkv.w"] == (2304, 768)
    assert shapes["h.11.mlp.down.w"] == (768, 3072)


def test_published_name_must_match_source(tiny_source, tmp_path):
    with pytest.raises(ConversionError, match="does not match published gpt2"):
        convert(tiny_source, tmp_path / "m.aawf", "gpt2")
    assert not (tmp_path / "m.aawf").exists()


def test_check_passes_on_fresh_conversion(tiny_source, tmp_path):
    convert(tiny_source, tmp_path / "m.aawf", "tiny")
    report = convert_check(tmp_path / "m.aawf", 40, tiny_source)
    assert report["ok"], report["failures"]
    assert len(report["probes"]) == 40
    assert convert_check(tmp_path / "m.aawf")["ok"]


def flip(path, offset_from_end):
    data = bytearray(path.read_bytes())
    data[len(data) - offset_from_end] ^= 0x04
    path.write_bytes(bytes(data))


def test_single_flipped_byte_fails(tiny_source, tmp_path):
    path = tmp_path / "m.aawf"
    convert(tiny_source, path, "tiny")
    flip(path, 70)  # inside lnf.g, the second-to-last tensor
    report = convert_check(path)
    assert not report["ok"]
    assert any("`lnf.g`" in f for f in report["failures"])
    with pytest.raises(Exception, match="lnf.g"):
        read_container(path)


def test_probe_reports_tensor_and_index(tiny_source, tmp_path):
    """A value change with a matching checksum is still caught by probes."""
    from actadd_weights import aawf

    src = tiny_tensors()
    src["transformer.ln_f.bias"][3] += 1.0
    other = write_checkpoint(tmp_path / "other", src)
    convert(tiny_source, tmp_path / "m.aawf", "tiny")
    report = convert_check(tmp_path / "m.aawf", 400, other, seed=1)
    assert not report["ok"]
    assert any("`lnf.b` at index [3]" in f for f in report["failures"])
    assert aawf.read_container(tmp_path / "m.aawf")  # checksums themselves are fine


def test_corrupted_source_writes_nothing(tiny_source, tmp_path):
    st = tiny_source / "model.safetensors"
    st.write_bytes(st.read_bytes()[:-100])
    out = tmp_path / "out"
    out.mkdir()
    with pytest.raises(ConversionError, match="cannot read"):
        convert(tiny_source, out / "m.aawf", "tiny")
    assert os.listdir(out) == []


def test_missing_and_misshapen_tensors_are_named(tmp_path):
    t = tiny_tensors()
    del t["transformer.h.1.mlp.c_fc.bias"]
    src = write_checkpoint(tmp_path / "a", t)
    with pytest.raises(ConversionError, match=r"missing tensor `h\.1\.mlp\.c_fc\.bias`"):
        convert(src, tmp_path / "a.aawf", "tiny")

    t = tiny_tensors()
    t["transformer.h.0.attn.c_proj.weight"] = np.zeros((16, 17), np.float32)
    src = write_checkpoint(tmp_path / "b", t)
    with pytest.raises(ConversionError, match=r"shape mismatch for `h\.0\.attn\.c_proj\.weight`"):
        convert(src, tmp_path / "b.aawf", "tiny")
    assert not list(tmp_path.glob("*.aawf*"))


def test_untied_head_is_rejected(tmp_path):
    t = tiny_tensors()
    t["lm_head.weight"] = t["transformer.wte.weight"] + 1
    src = write_checkpoint(tmp_path / "a", t)
    with pytest.raises(ConversionError, match="tied"):
        convert(src, tmp_path / "a.aawf", "tiny")


def test_torch_bin_matches_safetensors(tiny_source, tmp_path):
    torch = pytest.importorskip("torch")
    t = tiny_tensors()
    bin_dir = tmp_path / "bin"
    bin_dir.mkdir()
    torch.save({k: torch.from_numpy(v) for k, v in t.items()}, bin_dir / "pytorch_model.bin")
    (bin_dir / "config.json").write_text(json.dumps(TINY))
    a = convert(tiny_source, tmp_path / "a.aawf", "tiny")
    b = convert(bin_dir, tmp_path / "b.aawf", "tiny")
    assert b["source_format"] == "torch"
    ca, cb = read_container(tmp_path / "a.aawf"), read_container(tmp_path / "b.aawf")
    assert [r["crc32"] for r in ca.records] == [r["crc32"] for r in cb.records]
    assert a["sha256"] != b["sha256"]  # provenance differs


def test_cli_exit_codes(tiny_source, tmp_path, capsys):
    path = tmp_path / "m.aawf"
    assert main(["convert", str(tiny_source), str(path), "--model-name", "tiny"]) == 0
    assert json.loads(capsys.readouterr().out)["tensors"] == 28
    assert main(["check", str(path), "--source", str(tiny_source)]) == 0
    assert len(json.loads(capsys.readouterr().out)["probes"]) == 16
    assert main(["check", str(path), "--probes", "0"]) == 0
    capsys.readouterr()
    flip(path, 70)
    assert main(["check", str(path)]) == 1
    assert "lnf.g" in capsys.readouterr().err
    assert main(["convert", str(tmp_path / "nope"), str(tmp_path / "x.aawf")]) == 1
    assert "does not exist" in capsys.readouterr().err
