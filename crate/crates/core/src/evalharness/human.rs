//! Human ratings: CSV ingestion, per-approach summaries and agreement with
//! the automatic scores.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::stats::{mean, pearson, population_std, spearman};
use crate::metrics::ScoreBreakdown;
use crate::{Error, Result};

pub const HUMAN_COLUMNS: [&str; 7] = [
    "sample_id",
    "annotator_id",
    "approach",
    "semantic_similarity",
    "textual_entailment",
    "expression_diversity",
    "fluency",
];

pub const DIMENSIONS: [&str; 4] = ["semantic_similarity", "textual_entailment", "expression_diversity", "fluency"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanRecord {
    pub sample_id: String,
    pub annotator_id: String,
    pub approach: String,
    /// Ratings 1–5 in [`DIMENSIONS`] order.
    pub ratings: [u8; 4],
}

impl HumanRecord {
    /// Mean of the four ratings.
    pub fn overall(&self) -> f64 {
        self.ratings.iter().map(|&r| r as f64).sum::<f64>() / 4.0
    }
}

/// Reads the label CSV; every malformed row is reported with its line number.
pub fn ingest_human_labels(reader: impl Read) -> Result<Vec<HumanRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers != HUMAN_COLUMNS {
        return Err(Error::Validation(vec![format!(
            "expected header {}, found {}",
            HUMAN_COLUMNS.join(","),
            headers.join(",")
        )]));
    }
    let mut records = Vec::new();
    let mut problems = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("row {line}: {e}"));
                continue;
            }
        };
        let mut ratings = [0u8; 4];
        let mut ok = true;
        for (k, dim) in DIMENSIONS.iter().enumerate() {
            let cell = &row[3 + k];
            match cell.parse::<u8>() {
                Ok(v) if (1..=5).contains(&v) => ratings[k] = v,
                _ => {
                    problems.push(format!("row {line}: {dim} rating {cell:?} is not an integer in 1..=5"));
                    ok = false;
                }
            }
        }
        if row[0].is_empty() || row[1].is_empty() || row[2].is_empty() {
            problems.push(format!("row {line}: sample_id, annotator_id and approach are required"));
            ok = false;
        }
        if ok {
            records.push(HumanRecord {
                sample_id: row[0].to_string(),
                annotator_id: row[1].to_string(),
                approach: row[2].to_string(),
                ratings,
            });
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    if records.is_empty() {
        return Err(Error::Validation(vec!["no rating rows".into()]));
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        MeanStd {
            mean: mean(xs),
            std: population_std(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanRow {
    pub approach: String,
    pub records: usize,
    pub semantic_similarity: MeanStd,
    pub textual_entailment: MeanStd,
    pub expression_diversity: MeanStd,
    pub fluency: MeanStd,
    pub overall: MeanStd,
}

/// One row per approach, pooled over samples and annotators, sorted by name.
pub fn human_report(records: &[HumanRecord]) -> Vec<HumanRow> {
    let mut by: BTreeMap<&str, Vec<&HumanRecord>> = BTreeMap::new();
    for r in records {
        by.entry(r.approach.as_str()).or_default().push(r);
    }
    by.into_iter()
        .map(|(approach, rs)| {
            let dim = |k: usize| MeanStd::of(&rs.iter().map(|r| r.ratings[k] as f64).collect::<Vec<_>>());
            HumanRow {
                approach: approach.to_string(),
                records: rs.len(),
                semantic_similarity: dim(0),
                textual_entailment: dim(1),
                expression_diversity: dim(2),
                fluency: dim(3),
                overall: MeanStd::of(&rs.iter().map(|r| r.overall()).collect::<Vec<_>>()),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub dimension: String,
    pub pairs: usize,
    /// `None` when either series is constant.
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

/// Correlates automatic component scores with per-sample mean human ratings
/// for one approach, per dimension and for the overall score.
pub fn auto_human_agreement(auto: &[ScoreBreakdown], human: &[HumanRecord], approach: &str) -> Result<Vec<Agreement>> {
    let mut per_sample: HashMap<&str, Vec<&HumanRecord>> = HashMap::new();
    for r in human.iter().filter(|r| r.approach == approach) {
        per_sample.entry(r.sample_id.as_str()).or_default().push(r);
    }
    let paired: Vec<(&ScoreBreakdown, Vec<&HumanRecord>)> = auto
        .iter()
        .filter_map(|s| per_sample.get(s.sample_id.as_str()).map(|h| (s, h.clone())))
        .collect();
    if paired.len() < 3 {
        return Err(Error::invalid(format!(
            "approach {approach}: {} paired samples, need at least 3",
            paired.len()
        )));
    }
    let mut out = Vec::new();
    for k in 0..5 {
        let auto_v: Vec<f64> = paired
            .iter()
            .map(|(s, _)| if k < 4 { s.components()[k] } else { s.composite })
            .collect();
        let human_v: Vec<f64> = paired
            .iter()
            .map(|(_, h)| {
                mean(
                    &h.iter()
                        .map(|r| if k < 4 { r.ratings[k] as f64 } else { r.overall() })
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        out.push(Agreement {
            dimension: if k < 4 { DIMENSIONS[k].to_string() } else { "overall".into() },
            pairs: paired.len(),
            pearson: pearson(&auto_v, &human_v),
            spearman: spearman(&auto_v, &human_v),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "sample_id,annotator_id,approach,semantic_similarity,textual_entailment,expression_diversity,fluency\n";

    #[test]
    fn accepts_valid_rows() {
        let csv = format!("{HEADER}s1,a1,rl_finetuned,5,5,5,5\ns1,a2,rl_finetuned,3,4,4,5\n");
        let recs = ingest_human_labels(csv.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].overall(), 4.0);
    }

    #[test]
    fn rejects_out_of_range_with_row_numbers() {
        let csv = format!("{HEADER}s1,a1,x,5,5,5,5\ns2,a1,x,6,5,0,5\n");
        match ingest_human_labels(csv.as_bytes()) {
            Err(Error::Validation(p)) => {
                assert_eq!(p.len(), 2);
                assert!(p.iter().all(|m| m.starts_with("row 3:")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn report_rows() {
        let rec = |r: u8| HumanRecord {
            sample_id: "s".into(),
            annotator_id: "a".into(),
            approach: "x".into(),
            ratings: [r, 4, 4, 4],
        };
        let rows = human_report(&[rec(3), rec(5)]);
        assert_eq!(rows[0].semantic_similarity, MeanStd { mean: 4.0, std: 1.0 });
        assert_eq!(rows[0].textual_entailment, MeanStd { mean: 4.0, std: 0.0 });
    }
}
