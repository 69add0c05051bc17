//! Document ingestion, sentence splitting and topic-frequency binning.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::tokenizer::{normalize_steering_prompt, BpeVocab};

pub const WEDDING_KEYWORDS: &[&str] = &[
    "wedding",
    "weddings",
    "wed",
    "marry",
    "married",
    "marriage",
    "bride",
    "groom",
    "honeymoon",
];

pub const DEFAULT_BIN_WIDTH: f64 = 0.005;
pub const DEFAULT_MIN_COUNT: usize = 1000;

const ABBREVIATIONS: &[&str] = &["mr", "mrs", "dr", "st", "vs", "etc", "e.g", "i.e"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub sentences: Vec<String>,
    /// Fraction of words that are topic keywords; set by [`tag_and_bin`].
    pub topic_freq: f64,
}

impl Document {
    pub fn new(id: impl Into<String>, text: &str) -> Self {
        let text = text.replace('\0', "");
        Self {
            id: id.into(),
            sentences: split_sentences(&text),
            text,
            topic_freq: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBin {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
    /// The top bin of a two-group split also holds `f_w == hi`.
    pub hi_inclusive: bool,
    pub documents: Vec<String>,
    pub min_count: usize,
    pub excluded: bool,
}

impl FrequencyBin {
    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo && (f < self.hi || (self.hi_inclusive && f == self.hi))
    }
}

fn files_for(pattern: &str) -> Result<Vec<PathBuf>> {
    let path = Path::new(pattern);
    let mut files = if path.is_dir() {
        let entries = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
        entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect()
    } else if path.is_file() {
        vec![path.to_path_buf()]
    } else {
        glob::glob(pattern)
            .map_err(|e| Error::Corpus(format!("bad pattern {pattern:?}: {e}")))?
            .filter_map(|p| p.ok())
            .filter(|p| p.is_file())
            .collect::<Vec<_>>()
    };
    files.sort();
    Ok(files)
}

fn jsonl_documents(path: &Path, content: &str) -> Vec<Document> {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut docs = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("{}:{}: skipped malformed record: {e}", path.display(), i + 1);
                continue;
            }
        };
        let Some(text) = record.get("text").and_then(Value::as_str) else {
            log::warn!("{}:{}: record has no \"text\" string", path.display(), i + 1);
            continue;
        };
        let id = match record.get("id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => format!("{stem}:{}", i + 1),
        };
        docs.push(Document::new(id, text));
    }
    docs
}

/// Load documents from a file, a directory or a glob pattern. Files ending
/// in `.jsonl` hold one `{"text": ...}` record per line; any other file is
/// one document.
pub fn load_corpus(pattern: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for path in files_for(pattern)? {
        let content = match fs::read(&path).map(String::from_utf8) {
            Ok(Ok(s)) => s,
            Ok(Err(_)) => {
                log::warn!("skipping {}: not valid UTF-8", path.display());
                continue;
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                continue;
            }
        };
        if path.extension().is_some_and(|e| e == "jsonl") {
            docs.extend(jsonl_documents(&path, &content));
        } else {
            let id = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            docs.push(Document::new(id, &content));
        }
    }
    docs.retain(|d| !d.text.trim().is_empty());
    if docs.is_empty() {
        return Err(Error::Corpus(format!("no documents found at {pattern:?}")));
    }
    Ok(docs)
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}')
}

fn ends_with_abbreviation(before: &str) -> bool {
    let word = before
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or("")
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Rule-based splitter: a sentence ends at a run of `.`, `?` or `!` (plus
/// closing quotes or brackets) followed by whitespace and an uppercase
/// letter (possibly behind an opening quote or bracket), or by the end of
/// the text. A single `.` after a listed
/// abbreviation does not end a sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !matches!(c, '.' | '?' | '!') {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && matches!(chars[j].1, '.' | '?' | '!') {
            j += 1;
        }
        while j < chars.len() && is_closer(chars[j].1) {
            j += 1;
        }
        let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let mut m = k;
        while m < chars.len() && is_opener(chars[m].1) {
            m += 1;
        }
        let boundary = if k == chars.len() {
            true
        } else {
            k > j && m < chars.len() && chars[m].1.is_uppercase()
        };
        let single_period = c == '.' && j - i == 1;
        if boundary && !(single_period && ends_with_abbreviation(&text[start..pos])) {
            let s = text[start..end].trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            start = end;
        }
        i = j.max(i + 1);
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

/// Whitespace-delimited words, lowercased, with leading and trailing
/// non-alphanumeric characters removed; empty results are dropped.
pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
}

pub fn keyword_set(keywords: &[impl AsRef<str>]) -> HashSet<String> {
    keywords.iter().map(|k| k.as_ref().to_lowercase()).collect()
}

/// Whole-word, case-insensitive keyword count.
pub fn count_keywords(text: &str, keywords: &HashSet<String>) -> usize {
    words(text).filter(|w| keywords.contains(w)).count()
}

/// Character (Unicode scalar) ranges of the keyword occurrences that
/// [`count_keywords`] counts, in order.
pub fn keyword_spans(text: &str, keywords: &HashSet<String>) -> Vec<[usize; 2]> {
    let mut spans = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let (mut a, mut b) = (start, i);
        while a < b && !chars[a].is_alphanumeric() {
            a += 1;
        }
        while b > a && !chars[b - 1].is_alphanumeric() {
            b -= 1;
        }
        let word: String = chars[a..b].iter().collect::<String>().to_lowercase();
        if !word.is_empty() && keywords.contains(&word) {
            spans.push([a, b]);
        }
    }
    spans
}

/// Fraction of words that are keywords; 0 for text without words.
pub fn topic_frequency(text: &str, keywords: &HashSet<String>) -> f64 {
    let (mut hits, mut total) = (0usize, 0usize);
    for w in words(text) {
        total += 1;
        if keywords.contains(&w) {
            hits += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// `k` with `k·w <= f < (k+1)·w`, both products evaluated in f64. This
/// corrects the rounding of `f / w`, so membership agrees with a direct
/// comparison against the bin edges.
pub fn bin_index(f: f64, width: f64) -> usize {
    let mut k = (f / width).floor().max(0.0) as usize;
    if (k as f64) * width > f && k > 0 {
        k -= 1;
    }
    if ((k + 1) as f64) * width <= f {
        k += 1;
    }
    k
}

/// Tag every document with its keyword frequency and group them into
/// `[k·w, (k+1)·w)` bins from 0 up to the bin holding the largest value.
/// Bins with fewer than `min_count` documents are marked excluded.
pub fn tag_and_bin(
    docs: &mut [Document],
    keywords: &[impl AsRef<str> + Sync],
    bin_width: f64,
    min_count: usize,
) -> Result<Vec<FrequencyBin>> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::Validation(format!("bin_width must be > 0, got {bin_width}")));
    }
    let set = keyword_set(keywords);
    docs.par_iter_mut()
        .for_each(|d| d.topic_freq = topic_frequency(&d.text, &set));
    let max_k = docs.iter().map(|d| bin_index(d.topic_freq, bin_width)).max().unwrap_or(0);
    let mut bins: Vec<FrequencyBin> = (0..=max_k)
        .map(|k| {
            let (lo, hi) = (k as f64 * bin_width, (k + 1) as f64 * bin_width);
            FrequencyBin {
                label: format!("[{lo:.4}, {hi:.4})"),
                lo,
                hi,
                hi_inclusive: false,
                documents: Vec::new(),
                min_count,
                excluded: false,
            }
        })
        .collect();
    for d in docs.iter() {
        bins[bin_index(d.topic_freq, bin_width)].documents.push(d.id.clone());
    }
    for b in &mut bins {
        b.excluded = b.documents.len() < min_count;
    }
    Ok(bins)
}

/// Two groups: `unrelated` for `f_w < threshold`, `related` for the rest.
/// Requires documents already tagged by [`tag_and_bin`] or
/// [`tag_documents`].
pub fn related_split(docs: &[Document], threshold: f64, min_count: usize) -> Vec<FrequencyBin> {
    let mut unrelated = FrequencyBin {
        label: "unrelated".into(),
        lo: 0.0,
        hi: threshold,
        hi_inclusive: false,
        documents: Vec::new(),
        min_count,
        excluded: false,
    };
    let mut related = FrequencyBin {
        label: "related".into(),
        lo: threshold,
        hi: 1.0,
        hi_inclusive: true,
        documents: Vec::new(),
        min_count,
        excluded: false,
    };
    for d in docs {
        if d.topic_freq < threshold {
            unrelated.documents.push(d.id.clone());
        } else {
            related.documents.push(d.id.clone());
        }
    }
    let mut bins = vec![unrelated, related];
    for b in &mut bins {
        b.excluded = b.documents.len() < min_count;
    }
    bins
}

pub fn tag_documents(docs: &mut [Document], keywords: &[impl AsRef<str> + Sync]) {
    let set = keyword_set(keywords);
    docs.par_iter_mut()
        .for_each(|d| d.topic_freq = topic_frequency(&d.text, &set));
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeItem {
    pub prompt: String,
    pub target: String,
    pub target_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeSet {
    pub items: Vec<KnowledgeItem>,
    /// Entries whose target is not a single token.
    pub dropped: usize,
}

#[derive(Deserialize)]
struct RawKnowledge {
    prompt: String,
    target: String,
}

pub fn parse_knowledge_set(content: &str, vocab: &BpeVocab) -> Result<KnowledgeSet> {
    let mut items = Vec::new();
    let mut dropped = 0;
    let mut seen = 0;
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        seen += 1;
        let raw: RawKnowledge = serde_json::from_str(line)
            .map_err(|e| Error::Corpus(format!("knowledge set line {}: {e}", i + 1)))?;
        let ids = vocab.encode(&normalize_steering_prompt(&raw.target), false).ids;
        if ids.len() == 1 {
            items.push(KnowledgeItem {
                prompt: raw.prompt,
                target: raw.target,
                target_id: ids[0],
            });
        } else {
            dropped += 1;
        }
    }
    if seen == 0 {
        return Err(Error::Corpus("knowledge set is empty".into()));
    }
    if dropped > 0 {
        log::info!("knowledge set: dropped {dropped} multi-token targets");
    }
    Ok(KnowledgeSet { items, dropped })
}

pub fn load_knowledge_set(path: impl AsRef<Path>, vocab: &BpeVocab) -> Result<KnowledgeSet> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_knowledge_set(&content, vocab)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_splits() {
        assert_eq!(split_sentences("Hello there. It works."), vec!["Hello there.", "It works."]);
        assert_eq!(split_sentences("Dr. Smith left."), vec!["Dr. Smith left."]);
        assert_eq!(split_sentences("Wait... What?! Yes."), vec!["Wait...", "What?!", "Yes."]);
        assert_eq!(split_sentences("pi is 3.14 today. ok"), vec!["pi is 3.14 today. ok"]);
        assert_eq!(split_sentences("  "), Vec::<String>::new());
        assert_eq!(split_sentences("He said \"Go.\" Then left"), vec!["He said \"Go.\"", "Then left"]);
    }

    #[test]
    fn frequency_examples() {
        let kw = keyword_set(WEDDING_KEYWORDS);
        assert_eq!(topic_frequency("the bride and groom", &kw), 0.5);
        assert_eq!(topic_frequency("The Bride, and GROOM!", &kw), 0.5);
        assert_eq!(topic_frequency("a wedge of wedgewood weddingcake", &kw), 0.0);
        assert_eq!(topic_frequency("", &kw), 0.0);
    }

    #[test]
    fn keyword_spans_agree_with_counts() {
        let kw = keyword_set(WEDDING_KEYWORDS);
        let text = "The Bride, and \u{e9}t\u{e9} \"GROOM!\" wed-ding weddings\u{2026}";
        let spans = keyword_spans(text, &kw);
        let chars: Vec<char> = text.chars().collect();
        let found: Vec<String> = spans.iter().map(|[a, b]| chars[*a..*b].iter().collect()).collect();
        assert_eq!(found, ["Bride", "GROOM", "weddings"]);
        assert_eq!(spans.len(), count_keywords(text, &kw));
    }

    #[test]
    fn null_characters_are_stripped() {
        assert_eq!(Document::new("x", "a\0\0b").text, "ab");
    }

    #[test]
    fn bin_index_is_exact_at_edges() {
        let w = 0.005;
        assert_eq!(bin_index(0.0, w), 0);
        assert_eq!(bin_index(0.005, w), 1);
        assert_eq!(bin_index(0.016, w), 3);
        let k = bin_index(0.015, w);
        assert!(k as f64 * w <= 0.015 && 0.015 < (k + 1) as f64 * w);
        assert_eq!(bin_index(0.0149999, w), 2);
        assert_eq!(bin_index(1.0, 0.1), 10);
        for i in 0..=1000 {
            let f = i as f64 / 1000.0;
            for w in [0.005, 0.1, 0.0125, 0.3] {
                let k = bin_index(f, w);
                assert!(k as f64 * w <= f && f < (k + 1) as f64 * w, "{f} {w} {k}");
            }
        }
    }

    #[test]
    fn bins_partition_documents() {
        let mut docs = vec![
            Document::new("a", "the bride and groom"),
            Document::new("b", "nothing to see"),
            Document::new("c", "wedding"),
        ];
        let bins = tag_and_bin(&mut docs, WEDDING_KEYWORDS, 0.25, 1).unwrap();
        assert_eq!(bins.len(), 5);
        assert_eq!(bins[0].documents, vec!["b"]);
        assert_eq!(bins[2].documents, vec!["a"]);
        assert_eq!(bins[4].documents, vec!["c"]);
        assert!(bins[1].excluded && !bins[0].excluded);
        assert!(tag_and_bin(&mut docs, WEDDING_KEYWORDS, 0.0, 1).is_err());
        let split = related_split(&docs, 0.01, 1);
        assert_eq!(split[0].documents, vec!["b"]);
        assert_eq!(split[1].documents, vec!["a", "c"]);
        assert!(split[1].contains(1.0));
    }

    #[test]
    fn knowledge_filter() {
        let v = BpeVocab::byte_level();
        let set = parse_knowledge_set("{\"prompt\":\"p\",\"target\":\" \"}\n\n{\"prompt\":\"q\",\"target\":\"ab\"}\n", &v).unwrap();
        // " " is one byte token; " ab" is three.
        assert_eq!(set.items.len(), 1);
        assert_eq!(set.items[0].target_id, 32);
        assert_eq!(set.dropped, 1);
        assert!(parse_knowledge_set("", &v).is_err());
        let err = parse_knowledge_set("{\"prompt\":\"p\",\"target\":\"x\"}\nnot json\n", &v).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
