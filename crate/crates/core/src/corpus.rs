//! Transcript ingestion and sample construction.
//!
//! A conversation is turned into one [`Sample`] per agent turn that has at
//! least one preceding message. The context is the `window` most recent
//! messages (both speakers), flattened as `"<speaker>: <text>"` lines and
//! trimmed to a token budget, oldest material first.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed::rng_from_seed;
use crate::text::{normalize_whitespace, split_pieces};
use crate::{Error, Result};

pub const DEFAULT_WINDOW: usize = 6;

/// Anything that can count tokens the way the generator will see them.
pub trait TokenCounter {
    fn count_tokens(&self, text: &str) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Agent,
    Customer,
}

impl Speaker {
    pub fn prefix(self) -> &'static str {
        match self {
            Speaker::Agent => "agent: ",
            Speaker::Customer => "customer: ",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    pub index: usize,
}

impl Turn {
    /// The canonical flattened form, e.g. `customer: where is my order`.
    pub fn prefixed(&self) -> String {
        format!("{}{}", self.speaker.prefix(), self.text)
    }

    pub fn parse_prefixed(line: &str, index: usize) -> Result<Turn> {
        for speaker in [Speaker::Agent, Speaker::Customer] {
            if let Some(text) = line.strip_prefix(speaker.prefix()) {
                return Ok(Turn {
                    speaker,
                    text: text.to_string(),
                    index,
                });
            }
        }
        Err(Error::invalid(format!("context line lacks a speaker prefix: {line:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversation {
    pub id: String,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    conversations: Vec<Conversation>,
}

impl Corpus {
    pub fn conversations(&self) -> &[Conversation] {
        &self.conversations
    }

    pub fn len(&self) -> usize {
        self.conversations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conversations.is_empty()
    }

    pub fn num_turns(&self) -> usize {
        self.conversations.iter().map(|c| c.turns.len()).sum()
    }

    /// Serializes back to the transcript JSONL format.
    pub fn to_jsonl(&self) -> Result<Vec<u8>> {
        let records: Vec<TranscriptRecord> = self
            .conversations
            .iter()
            .map(|c| TranscriptRecord {
                id: c.id.clone(),
                turns: c
                    .turns
                    .iter()
                    .map(|t| TurnRecord {
                        speaker: t.speaker,
                        text: t.text.clone(),
                    })
                    .collect(),
            })
            .collect();
        crate::io::to_jsonl(&records)
    }

    pub fn subset(&self, ids: &HashSet<String>) -> Corpus {
        Corpus {
            conversations: self.conversations.iter().filter(|c| ids.contains(&c.id)).cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TurnRecord {
    speaker: Speaker,
    text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TranscriptRecord {
    id: String,
    turns: Vec<TurnRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub records: usize,
    pub conversations: usize,
    pub turns: usize,
    /// (line, turn position) of whitespace-only turns that were dropped.
    pub dropped_empty_turns: Vec<(usize, usize)>,
    pub errors: Vec<RecordError>,
}

/// Reads transcript JSONL. Malformed records are collected in the summary;
/// ingestion fails only when nothing usable remains.
pub fn ingest_transcripts(reader: impl BufRead) -> Result<(Corpus, IngestSummary)> {
    let mut summary = IngestSummary::default();
    let mut conversations = Vec::new();
    let mut seen_ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        summary.records += 1;
        match parse_record(&line, line_no, &mut summary.dropped_empty_turns) {
            Ok(conv) => {
                if !seen_ids.insert(conv.id.clone()) {
                    summary.errors.push(RecordError {
                        line: line_no,
                        message: format!("duplicate conversation id {:?}", conv.id),
                    });
                    continue;
                }
                summary.turns += conv.turns.len();
                conversations.push(conv);
            }
            Err(message) => summary.errors.push(RecordError { line: line_no, message }),
        }
    }
    for (line, pos) in &summary.dropped_empty_turns {
        log::warn!("line {line}: dropped empty turn at position {pos}");
    }
    summary.conversations = conversations.len();
    if conversations.is_empty() {
        return Err(match summary.errors.first() {
            Some(e) => Error::Ingest {
                line: e.line,
                message: e.message.clone(),
            },
            None => Error::EmptyCorpus,
        });
    }
    Ok((Corpus { conversations }, summary))
}

fn parse_record(line: &str, line_no: usize, dropped: &mut Vec<(usize, usize)>) -> Result<Conversation, String> {
    let record: TranscriptRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if record.id.trim().is_empty() {
        return Err("field `id` is empty".into());
    }
    let mut turns = Vec::with_capacity(record.turns.len());
    for (pos, t) in record.turns.into_iter().enumerate() {
        let text = normalize_whitespace(&t.text);
        if text.is_empty() {
            dropped.push((line_no, pos));
            continue;
        }
        turns.push(Turn {
            speaker: t.speaker,
            text,
            index: turns.len(),
        });
    }
    if turns.len() < 2 {
        return Err(format!("conversation {:?} has fewer than 2 non-empty turns", record.id));
    }
    if !turns.iter().any(|t| t.speaker == Speaker::Agent) {
        return Err(format!("conversation {:?} has no agent turn", record.id));
    }
    Ok(Conversation { id: record.id, turns })
}

/// One (context, control words, response) triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub id: String,
    pub conversation_id: String,
    /// Most recent last.
    pub context: Vec<Turn>,
    pub control_words: Vec<String>,
    pub response: String,
    /// Index of the response turn in its conversation.
    pub response_index: usize,
}

impl Sample {
    pub fn context_lines(&self) -> Vec<String> {
        self.context.iter().map(Turn::prefixed).collect()
    }

    pub fn context_text(&self) -> String {
        flatten_context(&self.context)
    }
}

pub fn flatten_context(turns: &[Turn]) -> String {
    turns.iter().map(Turn::prefixed).collect::<Vec<_>>().join("\n")
}

/// On-disk form of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub conversation_id: String,
    pub context: Vec<String>,
    pub control_words: Vec<String>,
    pub response: String,
}

fn sample_id(conversation_id: &str, response_index: usize) -> String {
    format!("{conversation_id}:{response_index}")
}

impl From<&Sample> for SampleRecord {
    fn from(s: &Sample) -> Self {
        SampleRecord {
            id: s.id.clone(),
            conversation_id: s.conversation_id.clone(),
            context: s.context_lines(),
            control_words: s.control_words.clone(),
            response: s.response.clone(),
        }
    }
}

impl TryFrom<SampleRecord> for Sample {
    type Error = Error;

    fn try_from(r: SampleRecord) -> Result<Sample> {
        let response_index = r
            .id
            .rsplit_once(':')
            .and_then(|(_, idx)| idx.parse::<usize>().ok())
            .unwrap_or(r.context.len());
        let first = response_index.saturating_sub(r.context.len());
        let context = r
            .context
            .iter()
            .enumerate()
            .map(|(k, line)| Turn::parse_prefixed(line, first + k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Sample {
            id: r.id,
            conversation_id: r.conversation_id,
            context,
            control_words: r.control_words,
            response: r.response,
            response_index,
        })
    }
}

pub fn read_samples(path: &std::path::Path) -> Result<Vec<Sample>> {
    crate::io::read_jsonl::<SampleRecord>(path)?
        .into_iter()
        .map(Sample::try_from)
        .collect()
}

pub fn write_samples(path: &std::path::Path, samples: &[Sample]) -> Result<()> {
    let records: Vec<SampleRecord> = samples.iter().map(SampleRecord::from).collect();
    crate::io::write_jsonl(path, &records)
}

/// Token count of a context as the generator sees it: lines joined by newlines.
pub fn context_token_count(turns: &[Turn], tokenizer: &dyn TokenCounter) -> usize {
    tokenizer.count_tokens(&flatten_context(turns))
}

/// Builds one sample per agent turn with at least one preceding turn.
///
/// Contexts that exceed `max_context_tokens` lose whole turns oldest-first;
/// if a single turn still does not fit, its text is cut from the start at a
/// word boundary. If not even the speaker prefix fits, the context is empty.
pub fn build_samples(
    corpus: &Corpus,
    window: usize,
    max_context_tokens: usize,
    tokenizer: &dyn TokenCounter,
) -> Vec<Sample> {
    assert!(window >= 1, "window must be positive");
    let mut out = Vec::new();
    for conv in &corpus.conversations {
        for (j, turn) in conv.turns.iter().enumerate() {
            if turn.speaker != Speaker::Agent || j == 0 {
                continue;
            }
            let start = j.saturating_sub(window);
            let context = fit_context(conv.turns[start..j].to_vec(), max_context_tokens, tokenizer);
            out.push(Sample {
                id: sample_id(&conv.id, j),
                conversation_id: conv.id.clone(),
                context,
                control_words: Vec::new(),
                response: turn.text.clone(),
                response_index: j,
            });
        }
    }
    out
}

fn fit_context(mut context: Vec<Turn>, max_tokens: usize, tokenizer: &dyn TokenCounter) -> Vec<Turn> {
    while context.len() > 1 && context_token_count(&context, tokenizer) > max_tokens {
        context.remove(0);
    }
    if context_token_count(&context, tokenizer) <= max_tokens {
        return context;
    }
    let mut turn = context.remove(0);
    let cuts: Vec<usize> = split_pieces(&turn.text).iter().map(|p| p.start).skip(1).collect();
    for cut in cuts {
        let candidate = Turn {
            text: turn.text[cut..].to_string(),
            ..turn.clone()
        };
        if tokenizer.count_tokens(&candidate.prefixed()) <= max_tokens {
            turn = candidate;
            return vec![turn];
        }
    }
    Vec::new()
}

/// Partitions conversation ids. Deterministic for a fixed seed.
pub fn split_conversation_ids(ids: &[String], train_fraction: f64, seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Split(format!("train_fraction must be in (0, 1), got {train_fraction}")));
    }
    let mut unique: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    for id in ids {
        if seen.insert(id.as_str()) {
            unique.push(id.clone());
        }
    }
    if unique.len() < 2 {
        return Err(Error::Split(format!("need at least 2 conversations, got {}", unique.len())));
    }
    let n = unique.len();
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut rng = rng_from_seed(seed);
    unique.shuffle(&mut rng);
    let val = unique.split_off(n_train);
    Ok((unique, val))
}

/// Conversation-level split of samples: no conversation appears on both sides.
pub fn split(samples: &[Sample], train_fraction: f64, seed: u64) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let ids: Vec<String> = samples.iter().map(|s| s.conversation_id.clone()).collect();
    let (train_ids, _) = split_conversation_ids(&ids, train_fraction, seed)?;
    let train_set: HashSet<&str> = train_ids.iter().map(String::as_str).collect();
    let (train, val) = samples
        .iter()
        .cloned()
        .partition(|s| train_set.contains(s.conversation_id.as_str()));
    Ok((train, val))
}

/// A positive (context, response) pair for entailment training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntailmentPair {
    pub context_text: String,
    pub response_text: String,
}

pub fn build_entailment_pairs(corpus: &Corpus) -> Vec<EntailmentPair> {
    build_entailment_pairs_with_window(corpus, DEFAULT_WINDOW)
}

pub fn build_entailment_pairs_with_window(corpus: &Corpus, window: usize) -> Vec<EntailmentPair> {
    let mut out = Vec::new();
    for conv in &corpus.conversations {
        for (j, turn) in conv.turns.iter().enumerate() {
            if turn.speaker == Speaker::Agent && j > 0 {
                out.push(EntailmentPair {
                    context_text: flatten_context(&conv.turns[j.saturating_sub(window)..j]),
                    response_text: turn.text.clone(),
                });
            }
        }
    }
    out
}

/// Counts samples per conversation; handy for reporting split balance.
pub fn samples_per_conversation(samples: &[Sample]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for s in samples {
        *m.entry(s.conversation_id.as_str()).or_default() += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct WordCount;
    impl TokenCounter for WordCount {
        fn count_tokens(&self, text: &str) -> usize {
            split_pieces(text).len()
        }
    }

    fn conv_line(id: &str, turns: &[(&str, &str)]) -> String {
        let turns: Vec<_> = turns
            .iter()
            .map(|(s, t)| serde_json::json!({"speaker": s, "text": t}))
            .collect();
        serde_json::json!({"id": id, "turns": turns}).to_string()
    }

    fn corpus_of(lines: &[String]) -> Corpus {
        ingest_transcripts(lines.join("\n").as_bytes()).unwrap().0
    }

    #[test]
    fn ingests_one_record() {
        let line = conv_line(
            "c1",
            &[("customer", "hi"), ("agent", "hello"), ("customer", "order?"), ("agent", "on its way")],
        );
        let (corpus, summary) = ingest_transcripts(line.as_bytes()).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.conversations()[0].turns.len(), 4);
        assert_eq!(summary.turns, 4);
        assert!(summary.errors.is_empty());
    }

    #[test]
    fn missing_speaker_names_field_and_line() {
        let good = conv_line("ok", &[("customer", "a"), ("agent", "b")]);
        let bad = r#"{"id": "x", "turns": [{"text": "hi"}, {"speaker": "agent", "text": "yo"}]}"#;
        let input = format!("{good}\n{bad}\n");
        let (_, summary) = ingest_transcripts(input.as_bytes()).unwrap();
        assert_eq!(summary.errors.len(), 1);
        assert_eq!(summary.errors[0].line, 2);
        assert!(summary.errors[0].message.contains("speaker"), "{}", summary.errors[0].message);

        let err = ingest_transcripts(bad.as_bytes()).unwrap_err();
        match err {
            Error::Ingest { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("speaker"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(ingest_transcripts("".as_bytes()), Err(Error::EmptyCorpus)));
        assert!(matches!(ingest_transcripts("\n  \n".as_bytes()), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn whitespace_turns_dropped_with_record() {
        let line = conv_line("c", &[("customer", "  "), ("customer", "hi  there"), ("agent", "hey")]);
        let (corpus, summary) = ingest_transcripts(line.as_bytes()).unwrap();
        assert_eq!(summary.dropped_empty_turns, vec![(1, 0)]);
        let turns = &corpus.conversations()[0].turns;
        assert_eq!(turns[0].text, "hi there");
        assert_eq!(turns[0].index, 0);
        assert_eq!(turns[1].index, 1);
    }

    #[test]
    fn rejects_conversations_without_agent() {
        let line = conv_line("c", &[("customer", "a"), ("customer", "b")]);
        assert!(ingest_transcripts(line.as_bytes()).is_err());
    }

    #[test]
    fn minimal_sample() {
        let corpus = corpus_of(&[conv_line("c", &[("customer", "c1"), ("agent", "a1")])]);
        let samples = build_samples(&corpus, 6, 512, &WordCount);
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].context_lines(), ["customer: c1"]);
        assert_eq!(samples[0].response, "a1");
    }

    #[test]
    fn window_takes_most_recent_turns() {
        let turns: Vec<(&str, &str)> = vec![
            ("customer", "t1"),
            ("agent", "t2"),
            ("customer", "t3"),
            ("agent", "t4"),
            ("customer", "t5"),
            ("customer", "t6"),
            ("customer", "t7"),
            ("agent", "t8"),
        ];
        let corpus = corpus_of(&[conv_line("c", &turns)]);
        let samples = build_samples(&corpus, 6, 512, &WordCount);
        let last = samples.iter().find(|s| s.response == "t8").unwrap();
        let texts: Vec<_> = last.context.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["t2", "t3", "t4", "t5", "t6", "t7"]);
    }

    #[test]
    fn over_budget_context_drops_oldest_turns() {
        let long = vec!["word"; 99].join(" ");
        let turns: Vec<(&str, &str)> = (0..6)
            .map(|i| (if i % 2 == 0 { "customer" } else { "agent" }, long.as_str()))
            .chain(std::iter::once(("agent", "done")))
            .collect();
        let corpus = corpus_of(&[conv_line("c", &turns)]);
        let samples = build_samples(&corpus, 6, 512, &WordCount);
        let s = samples.iter().find(|s| s.response == "done").unwrap();
        // each line: 2 prefix pieces + 99 words = 101, plus newlines between lines
        assert_eq!(context_token_count(&s.context, &WordCount), 5 * 101 + 4);
        assert!(context_token_count(&s.context, &WordCount) <= 512);
        assert_eq!(s.context.len(), 5);
        assert_eq!(s.context[0].index, 1);
    }

    #[test]
    fn single_long_turn_truncated_from_start() {
        let text = (0..20).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let corpus = corpus_of(&[conv_line("c", &[("customer", &text), ("agent", "ok")])]);
        let samples = build_samples(&corpus, 6, 7, &WordCount);
        let ctx = &samples[0].context;
        assert_eq!(ctx.len(), 1);
        assert_eq!(ctx[0].text, "w15 w16 w17 w18 w19");
        assert_eq!(context_token_count(ctx, &WordCount), 7);
    }

    #[test]
    fn split_is_deterministic_partition() {
        let lines: Vec<String> = (0..10)
            .map(|i| conv_line(&format!("c{i}"), &[("customer", "q"), ("agent", "a"), ("customer", "q2"), ("agent", "a2")]))
            .collect();
        let corpus = corpus_of(&lines);
        let samples = build_samples(&corpus, 6, 512, &WordCount);
        let (train, val) = split(&samples, 0.8, 7).unwrap();
        let (train2, val2) = split(&samples, 0.8, 7).unwrap();
        assert_eq!(train, train2);
        assert_eq!(val, val2);
        let train_convs: HashSet<_> = train.iter().map(|s| s.conversation_id.clone()).collect();
        let val_convs: HashSet<_> = val.iter().map(|s| s.conversation_id.clone()).collect();
        assert_eq!(train_convs.len(), 8);
        assert!(train_convs.is_disjoint(&val_convs));
        assert_eq!(train.len() + val.len(), samples.len());

        let (t8, v8) = split(&samples, 0.8, 8).unwrap();
        let t8c: HashSet<_> = t8.iter().map(|s| s.conversation_id.clone()).collect();
        let v8c: HashSet<_> = v8.iter().map(|s| s.conversation_id.clone()).collect();
        assert!(t8c.is_disjoint(&v8c));
    }

    #[test]
    fn split_fraction_within_one_conversation() {
        let ids: Vec<String> = (0..100).map(|i| format!("c{i}")).collect();
        let (train, val) = split_conversation_ids(&ids, 0.933, 3).unwrap();
        let frac = train.len() as f64 / (train.len() + val.len()) as f64;
        assert!((frac - 0.933).abs() <= 1.0 / 100.0, "{frac}");
    }

    #[test]
    fn split_errors() {
        assert!(split_conversation_ids(&["a".into()], 0.5, 1).is_err());
        assert!(split_conversation_ids(&["a".into(), "b".into()], 1.0, 1).is_err());
        assert!(split_conversation_ids(&["a".into(), "b".into()], 0.0, 1).is_err());
    }

    #[test]
    fn entailment_pairs_follow_adjacency() {
        let corpus = corpus_of(&[conv_line("c", &[("customer", "c1"), ("agent", "a1")])]);
        let pairs = build_entailment_pairs(&corpus);
        assert_eq!(
            pairs,
            vec![EntailmentPair {
                context_text: "customer: c1".into(),
                response_text: "a1".into()
            }]
        );
        let corpus = corpus_of(&[conv_line("c", &[("customer", "c1"), ("agent", "a1"), ("customer", "c2"), ("agent", "a2")])]);
        assert_eq!(build_entailment_pairs(&corpus).len(), 2);
    }

    #[test]
    fn sample_record_round_trip() {
        let corpus = corpus_of(&[conv_line("c", &[("customer", "c1"), ("agent", "a1"), ("customer", "c2"), ("agent", "a2")])]);
        for s in build_samples(&corpus, 6, 512, &WordCount) {
            let back = Sample::try_from(SampleRecord::from(&s)).unwrap();
            assert_eq!(back, s);
        }
    }

    fn arb_conversation() -> impl Strategy<Value = Vec<(bool, String)>> {
        proptest::collection::vec((any::<bool>(), "[a-z]{1,5}( [a-z]{1,5}){0,8}"), 2..12)
    }

    proptest! {
        #[test]
        fn ingest_serialize_ingest_is_fixed_point(convs in proptest::collection::vec(arb_conversation(), 1..5)) {
            let lines: Vec<String> = convs.iter().enumerate().map(|(i, turns)| {
                let mut turns: Vec<(&str, &str)> = turns.iter().map(|(a, t)| (if *a {"agent"} else {"customer"}, t.as_str())).collect();
                turns.push(("agent", "final answer"));
                conv_line(&format!("c{i}"), &turns)
            }).collect();
            let corpus = corpus_of(&lines);
            let again = ingest_transcripts(corpus.to_jsonl().unwrap().as_slice()).unwrap().0;
            prop_assert_eq!(&again, &corpus);
        }

        #[test]
        fn samples_are_contiguous_and_within_budget(turns in arb_conversation(), budget in 3usize..40, window in 1usize..8) {
            let mut t: Vec<(&str, &str)> = turns.iter().map(|(a, t)| (if *a {"agent"} else {"customer"}, t.as_str())).collect();
            t.push(("agent", "final answer"));
            let corpus = corpus_of(&[conv_line("c", &t)]);
            let conv = &corpus.conversations()[0];
            for s in build_samples(&corpus, window, budget, &WordCount) {
                prop_assert!(s.context.len() <= window);
                prop_assert!(context_token_count(&s.context, &WordCount) <= budget);
                prop_assert_eq!(&conv.turns[s.response_index].text, &s.response);
                prop_assert_eq!(conv.turns[s.response_index].speaker, Speaker::Agent);
                // every kept turn is a suffix of the source turn at its position, contiguous up to the response
                for (k, turn) in s.context.iter().enumerate() {
                    let expected_index = s.response_index - s.context.len() + k;
                    prop_assert_eq!(turn.index, expected_index);
                    prop_assert!(conv.turns[turn.index].text.ends_with(&turn.text));
                    if k > 0 {
                        prop_assert_eq!(&conv.turns[turn.index].text, &turn.text);
                    }
                }
            }
        }
    }
}
