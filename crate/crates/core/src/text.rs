//! Low-level text handling shared by the tokenizer, tagger and metrics.

/// What kind of surface unit a [`Piece`] is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PieceKind {
    Word,
    Punct,
    Newline,
}

/// A span of the input: a word (alphanumerics with internal apostrophes),
/// a single punctuation character, or a newline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Piece {
    pub start: usize,
    pub end: usize,
    /// Whether at least one space or tab separated this piece from the previous one.
    pub space_before: bool,
    pub kind: PieceKind,
}

impl Piece {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Splits text into pieces with byte offsets.
pub fn split_pieces(text: &str) -> Vec<Piece> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    let mut space_before = false;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c == '\n' {
            out.push(Piece {
                start: pos,
                end: pos + 1,
                space_before,
                kind: PieceKind::Newline,
            });
            space_before = false;
            i += 1;
        } else if c.is_whitespace() {
            space_before = true;
            i += 1;
        } else if c.is_alphanumeric() {
            let mut j = i + 1;
            while j < chars.len() {
                let cj = chars[j].1;
                if cj.is_alphanumeric() {
                    j += 1;
                } else if is_apostrophe(cj) && j + 1 < chars.len() && chars[j + 1].1.is_alphanumeric() {
                    j += 2;
                } else {
                    break;
                }
            }
            let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
            out.push(Piece {
                start: pos,
                end,
                space_before,
                kind: PieceKind::Word,
            });
            space_before = false;
            i = j;
        } else {
            out.push(Piece {
                start: pos,
                end: pos + c.len_utf8(),
                space_before,
                kind: PieceKind::Punct,
            });
            space_before = false;
            i += 1;
        }
    }
    out
}

/// Collapses runs of whitespace (including newlines) into single spaces and trims.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercased word and punctuation tokens, newlines dropped. This is the
/// `lower-punct-v1` rule used by BLEU and the hash-based embedders.
pub fn simple_tokens(text: &str) -> Vec<String> {
    split_pieces(text)
        .into_iter()
        .filter(|p| p.kind != PieceKind::Newline)
        .map(|p| p.text(text).to_lowercase())
        .collect()
}

pub fn is_punctuation_only(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| !c.is_alphanumeric())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_words_punct_and_newlines() {
        let s = "Hi, I'm here.\nwait  now";
        let pieces = split_pieces(s);
        let texts: Vec<_> = pieces.iter().map(|p| p.text(s)).collect();
        assert_eq!(texts, ["Hi", ",", "I'm", "here", ".", "\n", "wait", "now"]);
        assert!(!pieces[0].space_before);
        assert!(!pieces[1].space_before);
        assert!(pieces[2].space_before);
        assert!(!pieces[6].space_before);
        assert!(pieces[7].space_before);
    }

    #[test]
    fn trailing_apostrophe_is_punctuation() {
        let s = "customers' order";
        let texts: Vec<_> = split_pieces(s).iter().map(|p| p.text(s).to_string()).collect();
        assert_eq!(texts, ["customers", "'", "order"]);
    }

    #[test]
    fn simple_tokens_lowercase() {
        assert_eq!(simple_tokens("The Cat, sat."), ["the", "cat", ",", "sat", "."]);
        assert!(simple_tokens("   ").is_empty());
    }
}
