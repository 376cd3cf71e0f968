//! A small lexicon-plus-rules part-of-speech tagger producing Penn Treebank tags.
//!
//! It knows closed-class words, a few hundred common open-class words from
//! the customer-support domain, and falls back on suffix and context rules
//! for everything else. Unknown words default to `NN`.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::text::{split_pieces, PieceKind};
use crate::Result;

pub const LEXRULES_NAME: &str = "lexrules";
pub const LEXRULES_VERSION: &str = "1.0";

/// A token with its tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tagged {
    pub word: String,
    pub tag: &'static str,
}

pub trait PosTagger: Send + Sync {
    /// `name@version`; recorded with every extraction.
    fn id(&self) -> String;
    fn tag(&self, text: &str) -> Result<Vec<Tagged>>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct LexRulesTagger;

/// Resolves a tagger by its name (with or without version).
pub fn tagger_by_name(name: &str) -> Option<Box<dyn PosTagger>> {
    match name {
        "lexrules" | "lexrules@1.0" => Some(Box::new(LexRulesTagger)),
        _ => None,
    }
}

const DET: &[&str] = &[
    "the", "a", "an", "this", "these", "those", "some", "any", "every", "each", "all", "another", "both",
    "either", "neither", "no",
];
const PRON: &[&str] = &[
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "us", "them", "myself", "yourself", "ourselves",
    "themselves", "itself", "someone", "anyone", "everyone", "something", "anything", "nothing", "everything",
];
const POSS: &[&str] = &["my", "your", "his", "its", "our", "their", "her"];
const PREP: &[&str] = &[
    "for", "on", "in", "at", "by", "with", "from", "of", "about", "as", "into", "through", "after", "before",
    "over", "under", "between", "during", "without", "within", "since", "until", "if", "because", "while",
    "than", "like", "per", "via", "upon", "regarding", "towards", "toward", "against", "across", "around",
    "unless", "whether", "that",
];
const CONJ: &[&str] = &["and", "or", "but", "nor", "yet"];
const MODAL: &[&str] = &["will", "would", "shall", "should", "can", "could", "may", "might", "must", "ll", "'ll"];
const ADV: &[&str] = &[
    "not", "n't", "just", "very", "definitely", "also", "only", "already", "still", "now", "then", "soon",
    "really", "here", "again", "always", "never", "too", "even", "back", "away", "actually", "kindly", "once",
    "ago", "however", "almost", "so", "surely", "certainly", "quickly", "shortly", "meanwhile", "further",
    "instead", "maybe", "perhaps", "currently", "immediately", "exactly", "truly", "unfortunately", "else",
    "there", "ever", "rather", "quite", "much", "more", "most", "less", "well", "up", "out", "down", "off",
];
const WH: &[(&str, &str)] = &[
    ("how", "WRB"),
    ("when", "WRB"),
    ("where", "WRB"),
    ("why", "WRB"),
    ("what", "WP"),
    ("who", "WP"),
    ("whom", "WP"),
    ("which", "WDT"),
];
const INTERJ: &[&str] = &["hi", "hello", "hey", "thanks", "yes", "ok", "okay", "oh", "wow", "bye", "yeah"];
const ADJ: &[&str] = &[
    "same", "sorry", "happy", "sure", "new", "good", "great", "other", "late", "next", "last", "senior", "big",
    "small", "able", "possible", "available", "wrong", "right", "cold", "hot", "fresh", "full", "extra", "long",
    "free", "glad", "kind", "bad", "few", "many", "own", "best", "better", "worst", "worse", "sad", "only",
    "correct", "due", "urgent", "unable", "fine", "nice", "quick", "real", "old", "whole", "several", "such",
    "first", "second", "final", "additional", "complete", "missing", "pending", "valid", "alternate", "necessary",
];
/// Auxiliary and copula forms, with their tags.
const AUX: &[(&str, &str)] = &[
    ("be", "VB"),
    ("am", "VBP"),
    ("'m", "VBP"),
    ("is", "VBZ"),
    ("'s", "VBZ"),
    ("are", "VBP"),
    ("'re", "VBP"),
    ("was", "VBD"),
    ("were", "VBD"),
    ("been", "VBN"),
    ("being", "VBG"),
    ("have", "VBP"),
    ("'ve", "VBP"),
    ("has", "VBZ"),
    ("had", "VBD"),
    ("having", "VBG"),
    ("do", "VBP"),
    ("does", "VBZ"),
    ("did", "VBD"),
    ("done", "VBN"),
    ("doing", "VBG"),
    ("get", "VB"),
    ("got", "VBD"),
    ("gets", "VBZ"),
    ("getting", "VBG"),
];
/// Words that are usually verbs but can be nouns.
const VERBS: &[&str] = &[
    "help", "wait", "please", "proceed", "check", "confirm", "cancel", "deliver", "transfer", "call", "assist",
    "apologize", "apologise", "understand", "know", "see", "go", "come", "make", "take", "give", "share",
    "provide", "let", "need", "want", "try", "inform", "process", "arrange", "ensure", "connect", "reach",
    "resolve", "escalate", "assure", "tell", "ask", "receive", "send", "refund", "update", "look", "hold",
    "keep", "place", "pay", "expect", "contact", "track", "change", "share", "wish", "hope", "feel", "think",
    "believe", "find", "eat", "order", "request", "reply", "respond", "guide", "verify", "mention", "raise",
    "replace", "return", "pick", "drop", "book", "start", "stop", "close", "open", "say", "add", "remove",
    "allow", "apply", "use", "bring", "reorder", "reach", "stay", "remain", "mind", "note", "appreciate",
    "accept", "complain", "like", "love", "prepare", "reassign", "assign", "credit", "process", "review",
];
/// Words that are usually nouns.
const NOUNS: &[&str] = &[
    "today", "tomorrow", "tonight", "yesterday", "food", "restaurant", "word", "time", "chat", "team", "partner",
    "delivery", "payment", "account", "coupon", "issue", "problem", "number", "minute", "minutes", "rider",
    "address", "money", "cancellation", "support", "customer", "agent", "desk", "management", "amount",
    "item", "items", "meal", "dish", "app", "phone", "email", "day", "days", "hour", "hours", "option",
    "inconvenience", "experience", "feedback", "details", "detail", "status", "location", "way", "area",
    "concern", "kitchen", "bank", "card", "wallet", "source", "case", "ticket", "name", "side", "end",
    "rupees", "rs", "pizza", "burger", "biryani", "rice", "drink", "drinks", "quantity", "taste", "quality",
    "package", "packet", "bill", "charge", "charges", "fee", "offer", "discount", "code", "week", "moment",
    "patience", "query", "information", "apology", "apologies", "assistance", "matter", "thing", "things",
    "person", "people", "sir", "madam", "ma'am", "team", "executive", "manager", "callback", "escalation",
];

struct Lexicon {
    entries: HashMap<&'static str, &'static [&'static str]>,
}

fn lexicon() -> &'static Lexicon {
    static LEX: OnceLock<Lexicon> = OnceLock::new();
    LEX.get_or_init(|| {
        let mut entries: HashMap<&'static str, &'static [&'static str]> = HashMap::new();
        for &w in NOUNS {
            entries.insert(w, &["NN", "VB"]);
        }
        for &w in VERBS {
            entries.insert(w, &["VB", "NN"]);
        }
        for &w in ADJ {
            entries.insert(w, &["JJ"]);
        }
        for &w in INTERJ {
            entries.insert(w, &["UH"]);
        }
        entries.insert("please", &["VB", "UH"]);
        for &w in ADV {
            entries.insert(w, &["RB"]);
        }
        for &w in PREP {
            entries.insert(w, &["IN"]);
        }
        for &w in CONJ {
            entries.insert(w, &["CC"]);
        }
        for &w in DET {
            entries.insert(w, &["DT"]);
        }
        for &w in POSS {
            entries.insert(w, &["PRP$"]);
        }
        for &w in PRON {
            entries.insert(w, &["PRP"]);
        }
        for &w in MODAL {
            entries.insert(w, &["MD"]);
        }
        for &(w, t) in WH {
            entries.insert(w, leak_tag(t));
        }
        for &(w, t) in AUX {
            entries.insert(w, leak_tag(t));
        }
        entries.insert("to", &["TO"]);
        entries.insert("there", &["EX", "RB"]);
        Lexicon { entries }
    })
}

fn leak_tag(tag: &'static str) -> &'static [&'static str] {
    match tag {
        "VB" => &["VB"],
        "VBP" => &["VBP"],
        "VBZ" => &["VBZ"],
        "VBD" => &["VBD"],
        "VBN" => &["VBN"],
        "VBG" => &["VBG"],
        "WRB" => &["WRB"],
        "WP" => &["WP"],
        "WDT" => &["WDT"],
        _ => &["NN"],
    }
}

fn is_be_or_have(word: &str) -> bool {
    matches!(
        word,
        "be" | "am" | "is" | "are" | "was" | "were" | "been" | "being" | "'m" | "'s" | "'re" | "have" | "has"
            | "had" | "'ve" | "get" | "got" | "gets" | "getting"
    )
}

fn is_noun_tag(t: &str) -> bool {
    t.starts_with("NN")
}

fn is_verb_capable(entry: &[&str]) -> bool {
    entry.iter().any(|t| t.starts_with("VB"))
}

fn punct_tag(s: &str) -> &'static str {
    match s {
        "." | "!" | "?" => ".",
        "," => ",",
        ":" | ";" | "-" | "..." => ":",
        "(" | "[" | "{" => "(",
        ")" | "]" | "}" => ")",
        "\"" | "'" | "`" => "''",
        "$" | "₹" => "$",
        "#" => "#",
        _ => "SYM",
    }
}

/// Base form for an inflected word, if the base is a known open-class word.
fn known_base(lw: &str) -> Option<(&'static [&'static str], &'static str)> {
    let lex = lexicon();
    let candidates: Vec<(String, &'static str)> = {
        let mut c = Vec::new();
        if let Some(b) = lw.strip_suffix("ies") {
            c.push((format!("{b}y"), "s"));
        }
        if let Some(b) = lw.strip_suffix("es") {
            c.push((b.to_string(), "s"));
        }
        if let Some(b) = lw.strip_suffix('s') {
            c.push((b.to_string(), "s"));
        }
        if let Some(b) = lw.strip_suffix("ed") {
            c.push((b.to_string(), "ed"));
            c.push((format!("{b}e"), "ed"));
        }
        if let Some(b) = lw.strip_suffix("ing") {
            c.push((b.to_string(), "ing"));
            c.push((format!("{b}e"), "ing"));
        }
        c
    };
    candidates.into_iter().find_map(|(base, kind)| {
        lex.entries
            .get(base.as_str())
            .filter(|e| e.iter().any(|t| t.starts_with("VB") || t.starts_with("NN")))
            .map(|e| (*e, kind))
    })
}

impl LexRulesTagger {
    fn tag_words(&self, words: &[(String, bool)]) -> Vec<&'static str> {
        let lex = lexicon();
        let mut tags: Vec<&'static str> = Vec::with_capacity(words.len());
        for (i, (word, is_punct)) in words.iter().enumerate() {
            if *is_punct {
                tags.push(punct_tag(word));
                continue;
            }
            let lw = word.to_lowercase();
            // Previous tag, skipping adverbs, and the one before that.
            let mut k = i;
            let mut prev: Option<(&'static str, &str)> = None;
            let mut prev2: Option<&'static str> = None;
            while k > 0 {
                k -= 1;
                if tags[k] == "RB" {
                    continue;
                }
                prev = Some((tags[k], words[k].0.as_str()));
                prev2 = (0..k).rev().find(|&m| tags[m] != "RB").map(|m| tags[m]);
                break;
            }
            let prev_tag = prev.map(|p| p.0);
            let prev_word = prev.map(|p| p.1.to_lowercase());
            let after_aux = prev_word.as_deref().is_some_and(is_be_or_have);
            let sentence_start = i == 0 || matches!(tags[i - 1], "." | ":");

            if word.chars().all(|c| c.is_ascii_digit()) {
                tags.push("CD");
                continue;
            }

            if let Some(entry) = lex.entries.get(lw.as_str()) {
                let tag = if entry.len() == 1 {
                    entry[0]
                } else {
                    resolve_ambiguous(entry, prev_tag, prev2, sentence_start)
                };
                tags.push(tag);
                continue;
            }

            let capitalized = word.chars().next().is_some_and(char::is_uppercase);
            if capitalized && !sentence_start {
                tags.push("NNP");
                continue;
            }

            if let Some((entry, kind)) = known_base(&lw) {
                let tag = match kind {
                    "ed" => ed_tag(after_aux, prev_tag),
                    "ing" => {
                        if matches!(prev_tag, Some("DT" | "PRP$" | "JJ")) {
                            "NN"
                        } else {
                            "VBG"
                        }
                    }
                    _ => {
                        let third_person_subject = matches!(prev_word.as_deref(), Some("he" | "she" | "it" | "this" | "that"))
                            || prev_tag.is_some_and(is_noun_tag) && !matches!(prev_tag, Some("NNS"));
                        if is_verb_capable(entry) && third_person_subject {
                            "VBZ"
                        } else {
                            "NNS"
                        }
                    }
                };
                tags.push(tag);
                continue;
            }

            if capitalized {
                // sentence-initial unknown capitalized word
                tags.push("NNP");
                continue;
            }

            let tag = if matches!(prev_tag, Some("TO" | "MD")) {
                "VB"
            } else if lw.ends_with("ly") {
                "RB"
            } else if lw.ends_with("ed") {
                ed_tag(after_aux, prev_tag)
            } else if lw.ends_with("ing") {
                "VBG"
            } else if ["ous", "ful", "able", "ible", "ive", "less", "ic", "al"].iter().any(|s| lw.ends_with(s)) {
                "JJ"
            } else if lw.ends_with('s') && !lw.ends_with("ss") && lw.len() > 3 {
                "NNS"
            } else {
                "NN"
            };
            tags.push(tag);
        }
        tags
    }
}

fn ed_tag(after_aux: bool, prev_tag: Option<&str>) -> &'static str {
    if after_aux {
        "VBN"
    } else if matches!(prev_tag, Some("DT" | "PRP$")) {
        "JJ"
    } else {
        "VBD"
    }
}

fn resolve_ambiguous(
    entry: &'static [&'static str],
    prev: Option<&'static str>,
    prev2: Option<&'static str>,
    sentence_start: bool,
) -> &'static str {
    let noun = entry.iter().copied().find(|t| t.starts_with("NN"));
    let verb = entry.iter().copied().find(|t| t.starts_with("VB"));
    match (prev, noun, verb) {
        (Some("TO" | "MD"), _, Some(_)) => "VB",
        // inverted question: "shall I proceed"
        (Some("PRP"), _, Some(_)) if prev2 == Some("MD") => "VB",
        (Some("PRP"), _, Some(_)) => "VBP",
        (Some("DT" | "PRP$" | "JJ" | "IN" | "CD" | "POS"), Some(n), _) => n,
        (None, _, Some(_)) if sentence_start => "VB",
        _ => entry[0],
    }
}

impl PosTagger for LexRulesTagger {
    fn id(&self) -> String {
        format!("{LEXRULES_NAME}@{LEXRULES_VERSION}")
    }

    fn tag(&self, text: &str) -> Result<Vec<Tagged>> {
        let words: Vec<(String, bool)> = split_pieces(text)
            .into_iter()
            .filter(|p| p.kind != PieceKind::Newline)
            .map(|p| (p.text(text).to_string(), p.kind == PieceKind::Punct))
            .collect();
        let tags = self.tag_words(&words);
        Ok(words
            .into_iter()
            .zip(tags)
            .map(|((word, _), tag)| Tagged { word, tag })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(s: &str) -> Vec<(String, &'static str)> {
        LexRulesTagger.tag(s).unwrap().into_iter().map(|t| (t.word, t.tag)).collect()
    }

    fn tag_of(s: &str, word: &str) -> &'static str {
        tags(s).into_iter().find(|(w, _)| w == word).unwrap().1
    }

    #[test]
    fn modal_and_to_force_base_verbs() {
        assert_eq!(tag_of("I will help you.", "help"), "VB");
        assert_eq!(tag_of("I want to order pizza.", "order"), "VB");
        assert_eq!(tag_of("Your order is late.", "order"), "NN");
    }

    #[test]
    fn participles_after_be_and_have() {
        assert_eq!(tag_of("It will be delivered soon.", "delivered"), "VBN");
        assert_eq!(tag_of("We have processed it.", "processed"), "VBN");
        assert_eq!(tag_of("The rider delivered it.", "delivered"), "VBD");
    }

    #[test]
    fn inverted_question_verb() {
        assert_eq!(tag_of("shall I proceed?", "proceed"), "VB");
        assert_eq!(tag_of("I proceed.", "proceed"), "VBP");
    }

    #[test]
    fn unknown_capitalized_is_proper_noun() {
        assert_eq!(tag_of("Upendra, hello.", "Upendra"), "NNP");
        assert_eq!(tag_of("talk to Ravi today", "Ravi"), "NNP");
    }

    #[test]
    fn punctuation_and_numbers() {
        let t = tags("Call 100, now!");
        assert_eq!(t[1].1, "CD");
        assert_eq!(t[2].1, ",");
        assert_eq!(t[4].1, ".");
    }

    #[test]
    fn by_name() {
        assert!(tagger_by_name("lexrules").is_some());
        assert!(tagger_by_name("lexrules@1.0").is_some());
        assert!(tagger_by_name("nltk").is_none());
        assert_eq!(LexRulesTagger.id(), "lexrules@1.0");
    }
}
