//! Byte-level BPE compatible with the published GPT-2 `vocab.json` /
//! `merges.txt` pair.
//!
//! Text is split with the GPT-2 pre-tokenization pattern, each piece is
//! mapped byte-by-byte onto printable code points, and merges are applied
//! greedily by rank. Every UTF-8 string is encodable; there is no UNK path.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use fancy_regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Text form of the end-of-text token, also used as BOS.
pub const END_OF_TEXT: &str = "<|endoftext|>";

const PRETOKENIZE_PATTERN: &str =
    r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+";

/// An ordered list of token ids.
///
/// When `has_bos` is set, `ids[0]` is the end-of-text id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub has_bos: bool,
}

impl TokenSequence {
    pub fn new(ids: Vec<u32>, has_bos: bool) -> Self {
        Self { ids, has_bos }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// The GPT-2 byte <-> printable code point bijection.
fn bytes_to_unicode() -> [char; 256] {
    let mut printable: Vec<u32> = (u32::from(b'!')..=u32::from(b'~')).collect();
    printable.extend(0xA1..=0xAC);
    printable.extend(0xAE..=0xFF);

    let mut table = ['\0'; 256];
    let mut extra = 0u32;
    for b in 0u32..256 {
        let cp = if printable.contains(&b) {
            b
        } else {
            extra += 1;
            255 + extra
        };
        table[b as usize] = char::from_u32(cp).expect("valid code point");
    }
    table
}

/// A loaded, validated byte-level BPE vocabulary. Immutable after load.
#[derive(Debug, Clone)]
pub struct BpeVocab {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
    merges: Vec<(String, String)>,
    /// (left id, right id) -> (rank, merged id)
    merge_table: HashMap<(u32, u32), (u32, u32)>,
    byte_encoder: [char; 256],
    byte_decoder: HashMap<char, u8>,
    byte_ids: [u32; 256],
    special: u32,
    pattern: Regex,
}

impl BpeVocab {
    /// Load the published `vocab.json` and `merges.txt` files.
    pub fn load(vocab_path: impl AsRef<Path>, merges_path: impl AsRef<Path>) -> Result<Self> {
        let vocab_path = vocab_path.as_ref();
        let merges_path = merges_path.as_ref();
        let vocab_text =
            fs::read_to_string(vocab_path).map_err(|e| Error::io(vocab_path, e))?;
        let merges_text =
            fs::read_to_string(merges_path).map_err(|e| Error::io(merges_path, e))?;
        Self::from_strs(&vocab_text, &merges_text)
    }

    /// Parse vocabulary JSON and merges text already in memory.
    pub fn from_strs(vocab_json: &str, merges_text: &str) -> Result<Self> {
        if vocab_json.trim().is_empty() {
            return Err(Error::Vocab("empty vocabulary".into()));
        }
        let token_to_id: HashMap<String, u32> = serde_json::from_str(vocab_json)
            .map_err(|e| Error::Vocab(format!("malformed vocabulary JSON: {e}")))?;

        let mut merges = Vec::new();
        for (lineno, line) in merges_text.lines().enumerate() {
            if lineno == 0 && line.starts_with("#version") {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => {
                    merges.push((a.to_string(), b.to_string(), lineno + 1));
                }
                _ => {
                    return Err(Error::Vocab(format!(
                        "merges line {}: expected `tokenA tokenB`, got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Self::build(token_to_id, merges)
    }

    /// A merge-free vocabulary: one token per byte plus end-of-text (id 256).
    pub fn byte_level() -> Self {
        let encoder = bytes_to_unicode();
        let mut token_to_id: HashMap<String, u32> = encoder
            .iter()
            .enumerate()
            .map(|(b, c)| (c.to_string(), b as u32))
            .collect();
        token_to_id.insert(END_OF_TEXT.to_string(), 256);
        Self::build(token_to_id, Vec::new()).expect("byte-level vocabulary is valid")
    }

    fn build(
        token_to_id: HashMap<String, u32>,
        merges: Vec<(String, String, usize)>,
    ) -> Result<Self> {
        if token_to_id.is_empty() {
            return Err(Error::Vocab("empty vocabulary".into()));
        }
        let size = token_to_id.len();
        let mut id_to_token: Vec<Option<String>> = vec![None; size];
        // Sorted for a deterministic choice of which duplicate pair to report.
        let mut entries: Vec<(&String, &u32)> = token_to_id.iter().collect();
        entries.sort();
        for (token, &id) in entries {
            let slot = id_to_token.get_mut(id as usize).ok_or_else(|| {
                Error::Vocab(format!(
                    "token {token:?} has id {id}, outside 0..{size} (ids must be dense)"
                ))
            })?;
            if let Some(existing) = slot {
                return Err(Error::Vocab(format!(
                    "duplicate id {id} shared by tokens {existing:?} and {token:?}"
                )));
            }
            *slot = Some(token.clone());
        }
        let id_to_token: Vec<String> = id_to_token.into_iter().map(Option::unwrap).collect();

        let byte_encoder = bytes_to_unicode();
        let byte_decoder = byte_encoder
            .iter()
            .enumerate()
            .map(|(b, &c)| (c, b as u8))
            .collect();
        let mut byte_ids = [0u32; 256];
        for (b, c) in byte_encoder.iter().enumerate() {
            byte_ids[b] = *token_to_id.get(&c.to_string()).ok_or_else(|| {
                Error::Vocab(format!("vocabulary lacks the symbol for byte {b:#04x}"))
            })?;
        }
        let special = *token_to_id
            .get(END_OF_TEXT)
            .ok_or_else(|| Error::Vocab(format!("vocabulary lacks {END_OF_TEXT}")))?;

        let mut merge_table = HashMap::with_capacity(merges.len());
        let mut merge_pairs = Vec::with_capacity(merges.len());
        for (rank, (a, b, line)) in merges.into_iter().enumerate() {
            let lookup = |t: &str| {
                token_to_id.get(t).copied().ok_or_else(|| {
                    Error::Vocab(format!("merges line {line}: unknown token {t:?}"))
                })
            };
            let left = lookup(&a)?;
            let right = lookup(&b)?;
            let merged = lookup(&format!("{a}{b}"))?;
            merge_table.entry((left, right)).or_insert((rank as u32, merged));
            merge_pairs.push((a, b));
        }

        Ok(Self {
            token_to_id,
            id_to_token,
            merges: merge_pairs,
            merge_table,
            byte_encoder,
            byte_decoder,
            byte_ids,
            special,
            pattern: Regex::new(PRETOKENIZE_PATTERN).expect("static pattern compiles"),
        })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    /// Id of the end-of-text token.
    pub fn end_of_text(&self) -> u32 {
        self.special
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    /// The byte-level token string for `id` (e.g. `"Ġweddings"`).
    pub fn token_str(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn byte_encoder(&self) -> &[char; 256] {
        &self.byte_encoder
    }

    /// Id of the single-space token, if the vocabulary has one.
    pub fn space_id(&self) -> Option<u32> {
        self.token_id(&self.byte_encoder[b' ' as usize].to_string())
    }

    /// Encode text; with `prepend_bos` the end-of-text id is placed first.
    pub fn encode(&self, text: &str, prepend_bos: bool) -> TokenSequence {
        let mut ids = Vec::with_capacity(text.len() / 3 + 2);
        if prepend_bos {
            ids.push(self.special);
        }
        let mut consumed = 0;
        for piece in self.pattern.find_iter(text) {
            match piece {
                Ok(m) => {
                    self.bpe_piece(m.as_str().as_bytes(), &mut ids);
                    consumed = m.end();
                }
                // Backtrack-limit failure: encode the remainder as one piece
                // so encoding stays total and lossless.
                Err(_) => break,
            }
        }
        if consumed < text.len() {
            self.bpe_piece(&text.as_bytes()[consumed..], &mut ids);
        }
        TokenSequence::new(ids, prepend_bos)
    }

    fn bpe_piece(&self, bytes: &[u8], out: &mut Vec<u32>) {
        let mut symbols: Vec<u32> = bytes.iter().map(|&b| self.byte_ids[b as usize]).collect();
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.merge_table.get(&(w[0], w[1])).map(|&(rank, _)| (rank, w[0], w[1])))
                .min();
            let Some((_, left, right)) = best else { break };
            let merged = self.merge_table[&(left, right)].1;
            let mut next = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
                    next.push(merged);
                    i += 2;
                } else {
                    next.push(symbols[i]);
                    i += 1;
                }
            }
            symbols = next;
        }
        out.extend_from_slice(&symbols);
    }

    /// Decode ids back to text. A BOS decodes to `<|endoftext|>`; invalid
    /// UTF-8 (possible for arbitrary id lists) is replaced lossily.
    pub fn decode(&self, seq: &TokenSequence) -> Result<String> {
        self.decode_ids(&seq.ids)
    }

    pub fn decode_ids(&self, ids: &[u32]) -> Result<String> {
        let mut bytes = Vec::with_capacity(ids.len() * 4);
        for (position, &id) in ids.iter().enumerate() {
            let token = self.token_str(id).ok_or(Error::TokenOutOfRange {
                id,
                position,
                vocab_size: self.len(),
            })?;
            for c in token.chars() {
                match self.byte_decoder.get(&c) {
                    Some(&b) => bytes.push(b),
                    None => {
                        let mut buf = [0u8; 4];
                        bytes.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
                    }
                }
            }
        }
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }

    /// Decode for display: end-of-text tokens are dropped.
    pub fn decode_display(&self, ids: &[u32]) -> Result<String> {
        let kept: Vec<u32> = ids.iter().copied().filter(|&id| id != self.special).collect();
        self.decode_ids(&kept)
    }
}

/// Prepend a single space to non-empty text that does not already start with one.
pub fn normalize_steering_prompt(text: &str) -> String {
    if text.is_empty() || text.starts_with(' ') {
        text.to_string()
    } else {
        format!(" {text}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_vocab() -> BpeVocab {
        let mut vocab: HashMap<String, u32> = HashMap::new();
        for (b, c) in bytes_to_unicode().iter().enumerate() {
            vocab.insert(c.to_string(), b as u32);
        }
        vocab.insert("Ġw".into(), 256);
        vocab.insert("ed".into(), 257);
        vocab.insert("Ġwed".into(), 258);
        vocab.insert(END_OF_TEXT.into(), 259);
        let json = serde_json::to_string(&vocab).unwrap();
        BpeVocab::from_strs(&json, "#version: 0.2\nĠ w\ne d\nĠw ed\n").unwrap()
    }

    #[test]
    fn byte_encoder_is_bijection() {
        let enc = bytes_to_unicode();
        let mut seen: Vec<char> = enc.to_vec();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 256);
        assert_eq!(enc[b'A' as usize], 'A');
        assert_eq!(enc[b' ' as usize], 'Ġ');
        assert_eq!(enc[b'\n' as usize], 'Ċ');
    }

    #[test]
    fn merges_apply_by_rank() {
        let v = tiny_vocab();
        let seq = v.encode(" wed", false);
        assert_eq!(seq.ids, vec![258]);
        let seq = v.encode(" wedding", true);
        assert_eq!(seq.ids[0], 259);
        assert_eq!(seq.ids[1], 258);
        assert_eq!(v.decode(&seq).unwrap(), "<|endoftext|> wedding");
    }

    #[test]
    fn empty_text_with_bos_is_single_token() {
        let v = tiny_vocab();
        let seq = v.encode("", true);
        assert_eq!(seq.ids, vec![259]);
        assert!(seq.has_bos);
    }

    #[test]
    fn empty_vocab_is_rejected() {
        let err = BpeVocab::from_strs("", "#version: 0.2\n").unwrap_err();
        assert!(err.to_string().contains("empty vocabulary"), "{err}");
        let err = BpeVocab::from_strs("{}", "").unwrap_err();
        assert!(err.to_string().contains("empty vocabulary"), "{err}");
    }

    #[test]
    fn duplicate_id_names_both_tokens() {
        let err = BpeVocab::from_strs(r#"{"alpha": 0, "beta": 0}"#, "").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpha") && msg.contains("beta"), "{msg}");
    }

    #[test]
    fn malformed_json_is_rejected() {
        let err = BpeVocab::from_strs("{\"a\": ", "").unwrap_err();
        assert!(err.to_string().contains("malformed"), "{err}");
    }

    #[test]
    fn unknown_merge_token_names_line() {
        let mut vocab: HashMap<String, u32> = HashMap::new();
        for (b, c) in bytes_to_unicode().iter().enumerate() {
            vocab.insert(c.to_string(), b as u32);
        }
        vocab.insert(END_OF_TEXT.into(), 256);
        let json = serde_json::to_string(&vocab).unwrap();
        let err = BpeVocab::from_strs(&json, "#version: 0.2\na b\nzz q\n").unwrap_err();
        // "ab" is not in the vocabulary, so line 2 fails first.
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn decode_out_of_range_names_id_and_position() {
        let v = BpeVocab::byte_level();
        let err = v.decode_ids(&[65, 66, 9999]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("9999") && msg.contains("position 2"), "{msg}");
    }

    #[test]
    fn byte_level_round_trip() {
        let v = BpeVocab::byte_level();
        assert_eq!(v.len(), 257);
        let s = "héllo 🎉\n\t wörld";
        let seq = v.encode(s, false);
        assert_eq!(seq.len(), s.len());
        assert_eq!(v.decode(&seq).unwrap(), s);
    }

    #[test]
    fn normalize_prepends_single_space() {
        assert_eq!(normalize_steering_prompt("weddings"), " weddings");
        assert_eq!(normalize_steering_prompt(" weddings"), " weddings");
        assert_eq!(normalize_steering_prompt(""), "");
        let once = normalize_steering_prompt("Anger");
        assert_eq!(normalize_steering_prompt(&once), once);
    }
}
