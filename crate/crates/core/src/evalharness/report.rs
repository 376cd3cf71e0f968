//! Aggregated score tables with significance and human-evaluation blocks.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::human::{Agreement, HumanRow};
use super::stats::{t_test, TTest};
use crate::metrics::ScoreBreakdown;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub approach: String,
    pub samples: usize,
    pub semantic_similarity: f64,
    pub textual_entailment: f64,
    pub expression_diversity: f64,
    pub fluency: f64,
    pub overall: f64,
}

/// Column means; `overall` is the mean of the per-sample composites.
pub fn aggregate(approach: &str, scores: &[ScoreBreakdown]) -> Result<ReportRow> {
    if scores.is_empty() {
        return Err(Error::invalid(format!("no scores for approach {approach}")));
    }
    let n = scores.len() as f64;
    let col = |f: fn(&ScoreBreakdown) -> f64| scores.iter().map(f).sum::<f64>() / n;
    Ok(ReportRow {
        approach: approach.to_string(),
        samples: scores.len(),
        semantic_similarity: col(|s| s.semantic_similarity),
        textual_entailment: col(|s| s.textual_entailment),
        expression_diversity: col(|s| s.expression_diversity),
        fluency: col(|s| s.fluency),
        overall: col(|s| s.composite),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub best: String,
    pub second_best: String,
    pub test: TTest,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub significance: Option<Significance>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub human: Vec<HumanRow>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub agreement: BTreeMap<String, Vec<Agreement>>,
}

impl EvalReport {
    /// Rows in the given order; the significance block compares the two
    /// approaches with the highest overall score on their per-sample composites.
    pub fn from_scores(per_approach: &[(String, Vec<ScoreBreakdown>)]) -> Result<Self> {
        let rows: Vec<ReportRow> = per_approach
            .iter()
            .map(|(name, s)| aggregate(name, s))
            .collect::<Result<_>>()?;
        let mut ranked: Vec<usize> = (0..rows.len()).collect();
        ranked.sort_by(|&a, &b| rows[b].overall.total_cmp(&rows[a].overall).then(a.cmp(&b)));
        let significance = if ranked.len() >= 2 {
            let (a, b) = (ranked[0], ranked[1]);
            let comp = |i: usize| per_approach[i].1.iter().map(|s| s.composite).collect::<Vec<_>>();
            match t_test(&comp(a), &comp(b)) {
                Ok(test) => Some(Significance {
                    best: rows[a].approach.clone(),
                    second_best: rows[b].approach.clone(),
                    test,
                }),
                Err(e) => {
                    log::warn!("significance test skipped: {e}");
                    None
                }
            }
        } else {
            None
        };
        Ok(EvalReport {
            rows,
            significance,
            human: Vec::new(),
            agreement: BTreeMap::new(),
        })
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.into_inner().map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        s.push_str("| Approach | Semantic Similarity | Textual Entailment | Expression Diversity | Fluency | Overall Score | n |\n");
        s.push_str("|---|---|---|---|---|---|---|\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "| {} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} | {} |",
                r.approach, r.semantic_similarity, r.textual_entailment, r.expression_diversity, r.fluency, r.overall, r.samples
            );
        }
        if let Some(sig) = &self.significance {
            let _ = writeln!(
                s,
                "\n{} vs {}: t({}) = {:.3}, p = {:.3e}",
                sig.best, sig.second_best, sig.test.df, sig.test.t, sig.test.p
            );
        }
        if !self.human.is_empty() {
            s.push_str("\n| Approach | Semantic Similarity | Textual Entailment | Expression Diversity | Fluency | Overall | records |\n");
            s.push_str("|---|---|---|---|---|---|---|\n");
            for h in &self.human {
                let f = |m: super::human::MeanStd| format!("{:.2} ± {:.2}", m.mean, m.std);
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} | {} |",
                    h.approach,
                    f(h.semantic_similarity),
                    f(h.textual_entailment),
                    f(h.expression_diversity),
                    f(h.fluency),
                    f(h.overall),
                    h.records
                );
            }
        }
        for (approach, rows) in &self.agreement {
            let _ = writeln!(s, "\nAgreement with human ratings ({approach}):");
            for a in rows {
                let f = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "undefined".into());
                let _ = writeln!(
                    s,
                    "- {}: pearson {}, spearman {} (n = {})",
                    a.dimension,
                    f(a.pearson),
                    f(a.spearman),
                    a.pairs
                );
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(c: f64) -> ScoreBreakdown {
        ScoreBreakdown::new("s", c, c, c, c)
    }

    #[test]
    fn aggregate_means() {
        let r = aggregate("x", &[b(0.2), b(0.8)]).unwrap();
        assert!((r.overall - 0.5).abs() < 1e-12);
        assert!(aggregate("x", &[]).is_err());
        let single = ScoreBreakdown::new("s", 0.1, 0.2, 0.3, 0.4);
        let r = aggregate("x", std::slice::from_ref(&single)).unwrap();
        assert_eq!(r.semantic_similarity, 0.1);
        assert_eq!(r.overall, single.composite);
    }

    #[test]
    fn significance_compares_top_two() {
        let data = vec![
            ("low".to_string(), vec![b(0.1), b(0.2), b(0.15)]),
            ("high".to_string(), vec![b(0.8), b(0.9), b(0.85)]),
            ("mid".to_string(), vec![b(0.5), b(0.6), b(0.55)]),
        ];
        let rep = EvalReport::from_scores(&data).unwrap();
        let sig = rep.significance.clone().unwrap();
        assert_eq!((sig.best.as_str(), sig.second_best.as_str()), ("high", "mid"));
        assert!(sig.test.t > 0.0);
        assert!(rep.to_markdown().contains("| high |"));
    }
}
