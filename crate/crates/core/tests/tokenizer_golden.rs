//! GPT-2 tokenizer against golden encodings from the reference implementation.

use std::path::PathBuf;
use std::sync::OnceLock;

use actadd_core::tokenizer::{normalize_steering_prompt, BpeVocab};
use proptest::prelude::*;
use serde::Deserialize;

fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets/gpt2")
}

fn vocab() -> &'static BpeVocab {
    static V: OnceLock<BpeVocab> = OnceLock::new();
    V.get_or_init(|| BpeVocab::load(assets().join("vocab.json"), assets().join("merges.txt")).unwrap())
}

#[derive(Deserialize)]
struct Golden {
    text: String,
    ids: Vec<u32>,
}

#[test]
fn published_vocabulary_has_50257_entries() {
    let v = vocab();
    assert_eq!(v.len(), 50257);
    assert_eq!(v.end_of_text(), 50256);
    assert_eq!(v.merges().len(), 50000);
    assert_eq!(v.space_id(), Some(220));
}

#[test]
fn golden_encodings_match_reference() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_tokens.json");
    let golden: Vec<Golden> = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(golden.len(), 20);
    for g in &golden {
        let seq = vocab().encode(&g.text, false);
        assert_eq!(seq.ids, g.ids, "encoding of {:?}", g.text);
        assert_eq!(vocab().decode(&seq).unwrap(), g.text);
    }
}

#[test]
fn i_like_weddings_pieces() {
    let v = vocab();
    let seq = v.encode("I like weddings", false);
    let pieces: Vec<String> = seq.ids.iter().map(|&id| v.decode_ids(&[id]).unwrap()).collect();
    assert_eq!(pieces, vec!["I", " like", " weddings"]);

    let capital = v.encode("Weddings", false);
    let pieces: Vec<String> = capital.ids.iter().map(|&id| v.decode_ids(&[id]).unwrap()).collect();
    assert_eq!(pieces, vec!["W", "edd", "ings"]);

    let spaced = v.encode(&normalize_steering_prompt("weddings"), false);
    assert_eq!(spaced.ids.len(), 1);
    assert_eq!(v.decode(&spaced).unwrap(), " weddings");
}

#[test]
fn bos_convention() {
    let v = vocab();
    let seq = v.encode("", true);
    assert_eq!(seq.ids, vec![50256]);
    let seq = v.encode(" Anger", true);
    assert_eq!(seq.ids.len(), 2);
    assert_eq!(v.decode(&seq).unwrap(), "<|endoftext|> Anger");
    assert_eq!(v.decode_display(&seq.ids).unwrap(), " Anger");
}

#[test]
fn round_trip_examples() {
    for s in ["hello world", " weddings", "", "\n\n\t  x  ", "I'm done—really."] {
        assert_eq!(vocab().decode(&vocab().encode(s, false)).unwrap(), s);
    }
}

#[test]
fn encoding_is_deterministic_across_threads() {
    let text = "The bride and groom went on their honeymoon after the marriage ceremony.";
    let expected = vocab().encode(text, true);
    let handles: Vec<_> = (0..4)
        .map(|_| std::thread::spawn(move || vocab().encode(text, true)))
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn decode_inverts_encode(s in "\\PC*") {
        let seq = vocab().encode(&s, false);
        prop_assert_eq!(vocab().decode(&seq).unwrap(), s);
    }

    #[test]
    fn normalization_is_idempotent(s in ".*") {
        let once = normalize_steering_prompt(&s);
        prop_assert_eq!(normalize_steering_prompt(&once), once.clone());
    }
}
