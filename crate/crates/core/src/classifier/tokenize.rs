//! Fixed-length token sequences for the encoders.

use serde::{Deserialize, Serialize};

use super::config::EncoderKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedInput {
    pub token_ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
}

impl TokenizedInput {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Number of positions with mask 1.
    pub fn active_len(&self) -> usize {
        self.attention_mask.iter().filter(|&&m| m == 1).count()
    }

    pub fn active_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.token_ids.iter().zip(&self.attention_mask).filter(|(_, &m)| m == 1).map(|(&t, _)| t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialTokens {
    pub bos: u32,
    pub eos: u32,
    pub pad: u32,
}

/// RoBERTa-style sentinels for the hybrid encoder, BERT-style for the
/// general one.
pub fn special_tokens(kind: EncoderKind) -> SpecialTokens {
    match kind {
        EncoderKind::HybridCodeNl => SpecialTokens { bos: 0, eos: 2, pad: 1 },
        EncoderKind::GeneralNl => SpecialTokens { bos: 101, eos: 102, pad: 0 },
    }
}

pub fn vocab_size(kind: EncoderKind) -> usize {
    match kind {
        EncoderKind::HybridCodeNl => 50265,
        EncoderKind::GeneralNl => 30522,
    }
}

/// Wraps content ids with the sentinels, keeps the head when too long and
/// pads to exactly `max_len`.
pub fn frame(content: impl IntoIterator<Item = u32>, special: SpecialTokens, max_len: usize) -> TokenizedInput {
    let budget = max_len.saturating_sub(2);
    let mut ids = Vec::with_capacity(max_len);
    ids.push(special.bos);
    ids.extend(content.into_iter().take(budget));
    ids.push(special.eos);
    let active = ids.len();
    ids.resize(max_len, special.pad);
    let mut mask = vec![1u8; active];
    mask.resize(max_len, 0);
    TokenizedInput { token_ids: ids, attention_mask: mask }
}

fn fnv1a(salt: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ salt;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Maps a piece to a vocabulary id outside the reserved low range.
pub fn piece_id(kind: EncoderKind, piece: &str) -> u32 {
    const RESERVED: u64 = 1000;
    let salt = match kind {
        EncoderKind::HybridCodeNl => 0x5eed_c0de,
        EncoderKind::GeneralNl => 0x5eed_7e47,
    };
    let span = vocab_size(kind) as u64 - RESERVED;
    (RESERVED + fnv1a(salt, piece.as_bytes()) % span) as u32
}

/// Code-aware pieces: identifier runs split at case and underscore
/// boundaries into chunks of at most eight characters, number runs,
/// single punctuation characters and newlines. A preceding space is folded
/// into the next piece as a `Ġ` marker.
pub fn hybrid_pieces(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut space = false;
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            out.push("\n".to_string());
            space = false;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            space = true;
            i += 1;
            continue;
        }
        let start = i;
        if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
        } else {
            i += 1;
        }
        let word: String = chars[start..i].iter().collect();
        for (n, sub) in split_identifier(&word).into_iter().enumerate() {
            let marked = if n == 0 && space { format!("Ġ{sub}") } else { sub };
            out.push(marked);
        }
        space = false;
    }
    out
}

fn split_identifier(word: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut cur = String::new();
    let mut prev_lower = false;
    for c in word.chars() {
        let boundary = (c.is_uppercase() && prev_lower) || cur.chars().count() >= 8;
        if boundary && !cur.is_empty() {
            parts.push(std::mem::take(&mut cur));
        }
        cur.push(c);
        prev_lower = c.is_lowercase() || c.is_ascii_digit();
        if c == '_' {
            parts.push(std::mem::take(&mut cur));
            prev_lower = false;
        }
    }
    if !cur.is_empty() {
        parts.push(cur);
    }
    parts
}

/// Word-piece style: lowercased words, punctuation as separate pieces,
/// long words cut into `##`-continued chunks of six characters.
pub fn general_pieces(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let lower = text.to_lowercase();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut Vec<String>| {
        if word.is_empty() {
            return;
        }
        let chars: Vec<char> = word.chars().collect();
        for (n, chunk) in chars.chunks(6).enumerate() {
            let s: String = chunk.iter().collect();
            out.push(if n == 0 { s } else { format!("##{s}") });
        }
        word.clear();
    };
    for c in lower.chars() {
        if c.is_alphanumeric() {
            word.push(c);
        } else {
            flush(&mut word, &mut out);
            if !c.is_whitespace() {
                out.push(c.to_string());
            }
        }
    }
    flush(&mut word, &mut out);
    out
}

/// Deterministic tokenization used by the stub encoders.
pub fn stub_tokenize(kind: EncoderKind, text: &str, max_len: usize) -> TokenizedInput {
    let pieces = match kind {
        EncoderKind::HybridCodeNl => hybrid_pieces(text),
        EncoderKind::GeneralNl => general_pieces(text),
    };
    frame(pieces.iter().map(|p| piece_id(kind, p)), special_tokens(kind), max_len)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_sentinels_and_padding() {
        let t = stub_tokenize(EncoderKind::HybridCodeNl, "", 512);
        assert_eq!(t.len(), 512);
        assert_eq!(&t.token_ids[..3], &[0, 2, 1]);
        assert_eq!(t.active_len(), 2);
        assert!(t.attention_mask[2..].iter().all(|&m| m == 0));
        assert!(t.token_ids[2..].iter().all(|&id| id == 1));
    }

    #[test]
    fn long_input_is_head_kept() {
        let code = "x = compute_value(alpha, beta)\n".repeat(400);
        assert!(code.len() >= 10_000);
        let t = stub_tokenize(EncoderKind::HybridCodeNl, &code, 512);
        assert_eq!(t.len(), 512);
        assert_eq!(t.active_len(), 512);
        assert_eq!(t.token_ids[511], 2);
        let short = stub_tokenize(EncoderKind::HybridCodeNl, "x = compute_value(alpha, beta)\n", 512);
        assert_eq!(&t.token_ids[..5], &short.token_ids[..5]);
    }

    #[test]
    fn deterministic_and_encoder_specific() {
        let a = stub_tokenize(EncoderKind::GeneralNl, "Please rename this variable.", 32);
        assert_eq!(a, stub_tokenize(EncoderKind::GeneralNl, "Please rename this variable.", 32));
        let b = stub_tokenize(EncoderKind::HybridCodeNl, "Please rename this variable.", 32);
        assert_ne!(a.token_ids, b.token_ids);
        assert_eq!(a.token_ids[0], 101);
    }

    #[test]
    fn piece_rules() {
        assert_eq!(hybrid_pieces("getUserName(x)"), ["get", "User", "Name", "(", "x", ")"]);
        assert_eq!(hybrid_pieces("a  = 10\n"), ["a", "Ġ=", "Ġ10", "\n"]);
        assert_eq!(hybrid_pieces("max_retry_count"), ["max_", "retry_", "count"]);
        assert_eq!(general_pieces("Why not reuse?"), ["why", "not", "reuse", "?"]);
        assert_eq!(general_pieces("internationalization"), ["intern", "##ationa", "##lizati", "##on"]);
    }
}
