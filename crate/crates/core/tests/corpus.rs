use std::fs;

use actadd_core::corpus::{self, Document, WEDDING_KEYWORDS};
use proptest::prelude::*;
use serde_json::Value;

fn data(name: &str) -> String {
    format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn fifty_sentence_fixture_matches_golden() {
    let text = fs::read_to_string(data("sentences.txt")).unwrap();
    let golden: Vec<String> = serde_json::from_str(&fs::read_to_string(data("sentences_golden.json")).unwrap()).unwrap();
    assert_eq!(golden.len(), 50);
    assert_eq!(corpus::split_sentences(&text), golden);
}

#[test]
fn binning_matches_brute_force_recount() {
    let mut docs = corpus::load_corpus(&data("binning_corpus.jsonl")).unwrap();
    assert_eq!(docs.len(), 300);
    let expected: Value = serde_json::from_str(&fs::read_to_string(data("binning_expected.json")).unwrap()).unwrap();
    let width = expected["bin_width"].as_f64().unwrap();
    let min_count = expected["min_count"].as_u64().unwrap() as usize;
    let bins = corpus::tag_and_bin(&mut docs, WEDDING_KEYWORDS, width, min_count).unwrap();
    assert_eq!(bins.len() as u64, expected["n_bins"].as_u64().unwrap());

    for d in &docs {
        let e = &expected["documents"][&d.id];
        let fw = e["hits"].as_u64().unwrap() as f64 / e["words"].as_u64().unwrap() as f64;
        assert_eq!(d.topic_freq, fw, "{}", d.id);
        let k = e["bin"].as_u64().unwrap() as usize;
        assert!(bins[k].documents.contains(&d.id), "{} expected in bin {k}", d.id);
        assert!(bins[k].contains(d.topic_freq));
    }
    let total: usize = bins.iter().map(|b| b.documents.len()).sum();
    assert_eq!(total, docs.len());
    let excluded: Vec<u64> = bins
        .iter()
        .enumerate()
        .filter(|(_, b)| b.excluded)
        .map(|(k, _)| k as u64)
        .collect();
    let want: Vec<u64> = expected["excluded_bins"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert_eq!(excluded, want);
}

#[test]
fn loading_files_directories_and_globs() {
    let dir = tempfile::tempdir().unwrap();
    let err = corpus::load_corpus(dir.path().to_str().unwrap()).unwrap_err();
    assert!(err.to_string().contains("no documents"), "{err}");

    let records: String = (0..10).map(|i| format!("{{\"text\": \"record {i}.\"}}\n")).collect();
    fs::write(dir.path().join("a.jsonl"), records).unwrap();
    fs::write(dir.path().join("b.txt"), "a\0\0b").unwrap();
    fs::write(dir.path().join("c.txt"), "   ").unwrap();
    fs::write(dir.path().join("d.txt"), [0xff, 0xfe, 0x41]).unwrap();

    let from_file = corpus::load_corpus(dir.path().join("a.jsonl").to_str().unwrap()).unwrap();
    assert_eq!(from_file.len(), 10);
    assert_eq!(from_file[3].id, "a:4");

    let all = corpus::load_corpus(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(all.len(), 11);
    assert_eq!(all[10].text, "ab");

    let globbed = corpus::load_corpus(&format!("{}/*.txt", dir.path().display())).unwrap();
    assert_eq!(globbed.len(), 1);
}

#[test]
fn knowledge_fixture_with_gpt2_vocab() {
    let assets = format!("{}/../../assets/gpt2", env!("CARGO_MANIFEST_DIR"));
    let vocab = actadd_core::BpeVocab::load(format!("{assets}/vocab.json"), format!("{assets}/merges.txt")).unwrap();
    let content = "{\"prompt\": \"A salad spinner is used to remove\", \"target\": \"water\"}\n\
                   {\"prompt\": \"They stayed in the\", \"target\": \"honeymoon suite\"}\n";
    let set = corpus::parse_knowledge_set(content, &vocab).unwrap();
    assert_eq!(set.items.len(), 1);
    assert_eq!(set.items[0].target, "water");
    assert_eq!(vocab.token_str(set.items[0].target_id).unwrap(), "Ġwater");
    assert_eq!(set.dropped, 1);
}

proptest! {
    #[test]
    fn splitting_preserves_non_whitespace(text in "[A-Za-z .?!\"()\n]{0,200}") {
        let joined: String = corpus::split_sentences(&text).concat();
        let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        prop_assert_eq!(strip(&joined), strip(&text));
    }

    #[test]
    fn keyword_matching_is_whole_word(
        prefix in "[a-z]{0,3}",
        suffix in "[a-z]{0,3}",
        kw in proptest::sample::select(WEDDING_KEYWORDS),
    ) {
        let set = corpus::keyword_set(WEDDING_KEYWORDS);
        let word = format!("{prefix}{kw}{suffix}");
        let expected = usize::from(set.contains(&word));
        prop_assert_eq!(corpus::count_keywords(&word.to_uppercase(), &set), expected);
        let doc = Document::new("p", &format!("({word}), and"));
        prop_assert!(doc.topic_freq == 0.0);
        prop_assert!((0.0..=1.0).contains(&corpus::topic_frequency(&doc.text, &set)));
    }
}
