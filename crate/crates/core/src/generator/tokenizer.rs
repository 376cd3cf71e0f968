//! Word-level tokenizer with byte fallback.
//!
//! Words and punctuation seen often enough in training text get their own id,
//! with separate entries for the "preceded by a space" variant (stored with a
//! leading `▁`). Anything else is spelled out as UTF-8 byte tokens, so encoding
//! never loses information. Newlines are their own token.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::TokenCounter;
use crate::text::{split_pieces, PieceKind};

pub const PAD: &str = "<|pad|>";
pub const EOS: &str = "<|endoftext|>";
pub const CTX_CTRL: &str = "<|ctx_ctrl|>";
pub const CW: &str = "<|cw|>";
pub const RESP: &str = "<|resp|>";

pub const PAD_ID: u32 = 0;
pub const EOS_ID: u32 = 1;
pub const CTX_CTRL_ID: u32 = 2;
pub const CW_ID: u32 = 3;
pub const RESP_ID: u32 = 4;
const SPACE_ID: u32 = 5;
const NEWLINE_ID: u32 = 6;
const BYTE_BASE: u32 = 7;
const FIRST_WORD_ID: u32 = BYTE_BASE + 256;

const SPACE_MARK: char = '▁';
const SPECIALS: [&str; 5] = [PAD, EOS, CTX_CTRL, CW, RESP];

pub const TOKENIZER_ID: &str = "words-bytes-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tokenizer {
    id: String,
    /// Learned word entries, in id order starting at the first word id.
    words: Vec<String>,
    #[serde(skip)]
    lookup: HashMap<String, u32>,
}

impl Tokenizer {
    /// Builds the vocabulary from training text. Entries are ranked by count,
    /// ties broken lexicographically, so the result is independent of input order
    /// beyond the counts themselves.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, min_count: usize, max_words: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for piece in split_pieces(text) {
                if piece.kind == PieceKind::Newline {
                    continue;
                }
                *counts.entry(piece_key(piece.text(text), piece.space_before)).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_words);
        Self::from_words(ranked.into_iter().map(|(w, _)| w).collect())
    }

    pub fn from_words(words: Vec<String>) -> Self {
        let mut tok = Tokenizer {
            id: TOKENIZER_ID.to_string(),
            words,
            lookup: HashMap::new(),
        };
        tok.reindex();
        tok
    }

    fn reindex(&mut self) {
        self.lookup = self
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), FIRST_WORD_ID + i as u32))
            .collect();
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn vocab_size(&self) -> usize {
        FIRST_WORD_ID as usize + self.words.len()
    }

    pub fn is_special(&self, id: u32) -> bool {
        id < SPACE_ID
    }

    /// Encodes text that is known not to contain special-token literals.
    pub fn encode_plain(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        for piece in split_pieces(text) {
            if piece.kind == PieceKind::Newline {
                out.push(NEWLINE_ID);
                continue;
            }
            let s = piece.text(text);
            match self.lookup.get(&piece_key(s, piece.space_before)) {
                Some(&id) => out.push(id),
                None => {
                    if piece.space_before {
                        out.push(SPACE_ID);
                    }
                    out.extend(s.bytes().map(|b| BYTE_BASE + u32::from(b)));
                }
            }
        }
        out
    }

    /// Encodes text, recognising special-token literals. Whitespace around a
    /// special token carries no information.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        let mut rest = text;
        let mut after_special = false;
        loop {
            let next = SPECIALS
                .iter()
                .enumerate()
                .filter_map(|(id, lit)| rest.find(lit).map(|pos| (pos, id as u32, lit.len())))
                .min();
            let (segment, special) = match next {
                Some((pos, id, len)) => {
                    let seg = &rest[..pos];
                    rest = &rest[pos + len..];
                    (seg, Some(id))
                }
                None => (rest, None),
            };
            let segment = if after_special {
                segment.trim_start_matches([' ', '\t'])
            } else {
                segment
            };
            out.extend(self.encode_plain(segment));
            match special {
                Some(id) => {
                    out.push(id);
                    after_special = true;
                }
                None => break,
            }
        }
        out
    }

    pub fn decode(&self, ids: &[u32]) -> String {
        let mut out = String::new();
        let mut bytes: Vec<u8> = Vec::new();
        let mut need_space = false;
        let flush = |out: &mut String, bytes: &mut Vec<u8>| {
            if !bytes.is_empty() {
                out.push_str(&String::from_utf8_lossy(bytes));
                bytes.clear();
            }
        };
        for &id in ids {
            if (BYTE_BASE..FIRST_WORD_ID).contains(&id) {
                if need_space {
                    out.push(' ');
                    need_space = false;
                }
                bytes.push((id - BYTE_BASE) as u8);
                continue;
            }
            flush(&mut out, &mut bytes);
            if id < SPACE_ID {
                if !out.is_empty() && !out.ends_with([' ', '\n']) {
                    out.push(' ');
                }
                out.push_str(SPECIALS[id as usize]);
                need_space = true;
            } else if id == SPACE_ID {
                out.push(' ');
                need_space = false;
            } else if id == NEWLINE_ID {
                out.push('\n');
                need_space = false;
            } else if let Some(word) = self.words.get((id - FIRST_WORD_ID) as usize) {
                match word.strip_prefix(SPACE_MARK) {
                    Some(w) => {
                        out.push(' ');
                        out.push_str(w);
                    }
                    None => {
                        if need_space {
                            out.push(' ');
                        }
                        out.push_str(word);
                    }
                }
                need_space = false;
            }
        }
        flush(&mut out, &mut bytes);
        out
    }

    pub fn token_str(&self, id: u32) -> String {
        match id {
            id if id < SPACE_ID => SPECIALS[id as usize].to_string(),
            SPACE_ID => SPACE_MARK.to_string(),
            NEWLINE_ID => "\n".to_string(),
            id if id < FIRST_WORD_ID => format!("<0x{:02X}>", id - BYTE_BASE),
            id => self.words.get((id - FIRST_WORD_ID) as usize).cloned().unwrap_or_default(),
        }
    }

    /// Id of a whole-word token (no leading space), if it is in the vocabulary.
    pub fn word_id(&self, word: &str) -> Option<u32> {
        self.lookup.get(word).copied()
    }

    pub fn save(&self, path: &std::path::Path) -> crate::Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: &std::path::Path) -> crate::Result<Self> {
        let mut tok: Tokenizer = crate::io::read_json(path)?;
        if tok.id != TOKENIZER_ID {
            return Err(crate::Error::invalid(format!("unsupported tokenizer id {}", tok.id)));
        }
        tok.reindex();
        Ok(tok)
    }
}

fn piece_key(s: &str, space_before: bool) -> String {
    if space_before {
        format!("{SPACE_MARK}{s}")
    } else {
        s.to_string()
    }
}

impl TokenCounter for Tokenizer {
    fn count_tokens(&self, text: &str) -> usize {
        self.encode_plain(text).len()
    }
}
