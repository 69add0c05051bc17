//! Logits from a small checkpoint in the upstream layout, converted by the
//! weights importer and scored by the upstream implementation.

use actadd_core::model::{HookSet, Model};
use actadd_core::TokenSequence;
use base64::Engine as _;
use serde::Deserialize;

#[derive(Deserialize)]
struct Prompt {
    ids: Vec<u32>,
    shape: [usize; 2],
    logits_f32le_b64: String,
}

#[derive(Deserialize)]
struct Golden {
    prompts: Vec<Prompt>,
}

fn data(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

#[test]
fn converted_checkpoint_matches_upstream_logits() {
    let model = Model::load(data("hf_tiny.aawf")).unwrap();
    let golden: Golden = serde_json::from_str(&std::fs::read_to_string(data("hf_tiny_golden.json")).unwrap()).unwrap();
    assert_eq!(golden.prompts.len(), 5);
    let mut worst = 0.0f32;
    for p in &golden.prompts {
        let bytes = base64::engine::general_purpose::STANDARD.decode(&p.logits_f32le_b64).unwrap();
        let want: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        let got = model.forward(&TokenSequence::new(p.ids.clone(), false), &HookSet::new()).unwrap().logits;
        assert_eq!([got.rows, got.cols], p.shape);
        for (a, b) in got.data.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst < 1e-4, "max logit error {worst}");
}

#[test]
fn session_decoding_matches_upstream_logits() {
    let model = Model::load(data("hf_tiny.aawf")).unwrap();
    let golden: Golden = serde_json::from_str(&std::fs::read_to_string(data("hf_tiny_golden.json")).unwrap()).unwrap();
    let p = golden.prompts.last().unwrap();
    let bytes = base64::engine::general_purpose::STANDARD.decode(&p.logits_f32le_b64).unwrap();
    let want: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let mut session = model.session();
    for (i, &id) in p.ids.iter().enumerate() {
        let last = session.extend(&[id], &[]).unwrap();
        for (a, b) in last.iter().zip(&want[i * p.shape[1]..(i + 1) * p.shape[1]]) {
            assert!((a - b).abs() < 1e-4, "position {i}: {a} vs {b}");
        }
    }
}
