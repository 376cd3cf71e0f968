//! Linguistic-acceptability classifier used as the fluency component, and the
//! Matthews correlation coefficient used to evaluate it.
//!
//! The classifier is logistic regression over hashed unigram and bigram
//! presence features (with sentence boundary markers), trained full-batch.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::seed::fnv1a;
use crate::text::simple_tokens;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    InDomain,
    OutOfDomain,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptabilityExample {
    pub text: String,
    pub acceptable: bool,
    pub domain: Domain,
}

/// Reads CoLA-style TSV rows: `source, label, original annotation, sentence`.
/// Blank lines are skipped; any malformed row is an error naming its line.
pub fn read_cola_tsv(reader: impl BufRead, domain: Domain) -> Result<Vec<AcceptabilityExample>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Ingest { line: i + 1, message };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad(format!("expected 4 tab-separated columns, found {}", cols.len())));
        }
        let acceptable = match cols[1].trim() {
            "1" => true,
            "0" => false,
            other => return Err(bad(format!("label must be 0 or 1, found {other:?}"))),
        };
        let text = cols[3].trim();
        if text.is_empty() {
            return Err(bad("empty sentence".into()));
        }
        out.push(AcceptabilityExample {
            text: text.to_string(),
            acceptable,
            domain,
        });
    }
    Ok(out)
}

pub fn load_cola_tsv(path: &Path, domain: Domain) -> Result<Vec<AcceptabilityExample>> {
    read_cola_tsv(std::io::BufReader::new(std::fs::File::open(path)?), domain)
}

/// Probability that a text is fluent, in [0, 1].
pub trait FluencyScorer: Send + Sync {
    fn fluency(&self, text: &str) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluencyConfig {
    pub n_buckets: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub threshold: f64,
}

impl Default for FluencyConfig {
    fn default() -> Self {
        FluencyConfig {
            n_buckets: 4096,
            steps: 300,
            learning_rate: 0.5,
            l2: 1e-4,
            threshold: 0.5,
        }
    }
}

pub fn fluency_features(text: &str, n_buckets: usize) -> Vec<usize> {
    let mut toks = vec!["<s>".to_string()];
    toks.extend(simple_tokens(text));
    toks.push("</s>".to_string());
    let mut f: Vec<usize> = toks
        .iter()
        .map(|t| format!("u:{t}"))
        .chain(toks.windows(2).map(|w| format!("b:{} {}", w[0], w[1])))
        .map(|k| (fnv1a(k.as_bytes()) % n_buckets as u64) as usize)
        .collect();
    f.sort_unstable();
    f.dedup();
    f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluencyClassifier {
    pub n_buckets: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl FluencyClassifier {
    /// All-zero weights: every text scores 0.5.
    pub fn untrained(n_buckets: usize, threshold: f64) -> Self {
        FluencyClassifier {
            n_buckets,
            weights: vec![0.0; n_buckets],
            bias: 0.0,
            threshold,
        }
    }

    pub fn logit(&self, text: &str) -> Result<f64> {
        if simple_tokens(text).is_empty() {
            return Err(Error::invalid("cannot score empty text for fluency"));
        }
        Ok(self.bias + fluency_features(text, self.n_buckets).iter().map(|&b| self.weights[b]).sum::<f64>())
    }

    pub fn predict(&self, text: &str) -> Result<bool> {
        Ok(self.fluency(text)? >= self.threshold)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        crate::io::write_json(&dir.join("classifier.json"), self)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let c: FluencyClassifier = crate::io::read_json(&dir.join("classifier.json")).map_err(|e| Error::Checkpoint {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
        if c.weights.len() != c.n_buckets {
            return Err(Error::Checkpoint {
                path: dir.to_path_buf(),
                message: "weight vector size does not match n_buckets".into(),
            });
        }
        Ok(c)
    }
}

impl FluencyScorer for FluencyClassifier {
    fn fluency(&self, text: &str) -> Result<f64> {
        Ok(sigmoid(self.logit(text)?))
    }
}

/// Full-batch gradient descent on mean log-loss plus an L2 penalty.
pub fn train_fluency(train: &[AcceptabilityExample], cfg: &FluencyConfig) -> Result<FluencyClassifier> {
    if !(train.iter().any(|e| e.acceptable) && train.iter().any(|e| !e.acceptable)) {
        return Err(Error::invalid("fluency training data must contain both labels"));
    }
    if cfg.n_buckets == 0 {
        return Err(Error::invalid("n_buckets must be positive"));
    }
    let feats: Vec<Vec<usize>> = train.iter().map(|e| fluency_features(&e.text, cfg.n_buckets)).collect();
    let mut clf = FluencyClassifier::untrained(cfg.n_buckets, cfg.threshold);
    let n = train.len() as f64;
    for step in 0..cfg.steps {
        let mut gw = vec![0.0; cfg.n_buckets];
        let mut gb = 0.0;
        let mut loss = 0.0;
        for (f, e) in feats.iter().zip(train) {
            let z = clf.bias + f.iter().map(|&b| clf.weights[b]).sum::<f64>();
            let p = sigmoid(z);
            let y = if e.acceptable { 1.0 } else { 0.0 };
            loss -= y * p.max(1e-300).ln() + (1.0 - y) * (1.0 - p).max(1e-300).ln();
            let d = (p - y) / n;
            gb += d;
            for &b in f {
                gw[b] += d;
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                step: step + 1,
                batch: 0,
                detail: "fluency log-loss".into(),
            });
        }
        for (w, g) in clf.weights.iter_mut().zip(&gw) {
            *w -= cfg.learning_rate * (g + cfg.l2 * *w);
        }
        clf.bias -= cfg.learning_rate * gb;
    }
    Ok(clf)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn from_predictions(predictions: &[bool], labels: &[bool]) -> Result<Self> {
        if predictions.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} predictions for {} labels",
                predictions.len(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::invalid("no predictions to evaluate"));
        }
        let mut c = Confusion::default();
        for (&p, &l) in predictions.iter().zip(labels) {
            match (p, l) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    /// Zero when any marginal is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, tn, fp, fn_) = (self.tp as f64, self.tn as f64, self.fp as f64, self.fn_ as f64);
        let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if den == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / den.sqrt()
        }
    }
}

pub fn mcc(predictions: &[bool], labels: &[bool]) -> Result<f64> {
    Ok(Confusion::from_predictions(predictions, labels)?.mcc())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluencyEval {
    pub mcc: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
    pub examples: usize,
}

pub fn evaluate_fluency(clf: &FluencyClassifier, data: &[AcceptabilityExample]) -> Result<FluencyEval> {
    let preds: Vec<bool> = data.iter().map(|e| clf.predict(&e.text)).collect::<Result<_>>()?;
    let labels: Vec<bool> = data.iter().map(|e| e.acceptable).collect();
    let confusion = Confusion::from_predictions(&preds, &labels)?;
    Ok(FluencyEval {
        mcc: confusion.mcc(),
        accuracy: (confusion.tp + confusion.tn) as f64 / data.len() as f64,
        confusion,
        examples: data.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(text: &str, acceptable: bool) -> AcceptabilityExample {
        AcceptabilityExample {
            text: text.into(),
            acceptable,
            domain: Domain::InDomain,
        }
    }

    #[test]
    fn mcc_cases() {
        let labels = [true, false, true, false];
        assert_eq!(mcc(&labels, &labels).unwrap(), 1.0);
        let inv: Vec<bool> = labels.iter().map(|l| !l).collect();
        assert_eq!(mcc(&inv, &labels).unwrap(), -1.0);
        assert_eq!(mcc(&[true; 4], &labels).unwrap(), 0.0);
        let c = Confusion {
            tp: 3,
            tn: 2,
            fp: 1,
            fn_: 2,
        };
        assert!((c.mcc() - 4.0 / 240f64.sqrt()).abs() < 1e-12);
        assert!(mcc(&[true], &[true, false]).is_err());
    }

    #[test]
    fn untrained_scores_half() {
        let c = FluencyClassifier::untrained(16, 0.5);
        assert_eq!(c.fluency("anything at all").unwrap(), 0.5);
        assert!(c.fluency(" ").is_err());
    }

    #[test]
    fn separable_data_is_learned() {
        let data = vec![
            ex("the order arrived", true),
            ex("arrived order the", false),
            ex("we sent a refund", true),
            ex("refund a sent we", false),
        ];
        let clf = train_fluency(&data, &FluencyConfig::default()).unwrap();
        assert_eq!(evaluate_fluency(&clf, &data).unwrap().accuracy, 1.0);
    }

    #[test]
    fn single_class_is_error() {
        assert!(train_fluency(&[ex("a", true), ex("b", true)], &FluencyConfig::default()).is_err());
    }

    #[test]
    fn tsv_parsing() {
        let tsv = "gj04\t1\t\tThe cat sat.\n\ngj04\t0\t*\tCat the sat.\n";
        let rows = read_cola_tsv(tsv.as_bytes(), Domain::OutOfDomain).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].acceptable && !rows[1].acceptable);
        let err = read_cola_tsv("x\t2\t\ty\n".as_bytes(), Domain::Unknown).unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 1, .. }));
    }
}
