//! Scoring relevance judgments against gold labels.
//!
//! Relevant is the positive class. Gold pairs without a judgment lower
//! coverage but are left out of the confusion counts; judgments without a
//! gold pair are ignored. Ratios with a zero denominator are reported as 0.

mod mcnemar;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ArticleId;
use crate::digest;
use crate::parsing::{Label, RelevanceJudgment};
use crate::prompting::PromptVariant;

pub use mcnemar::mcnemar_exact;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("duplicate judgment for pair ({0}, {1})")]
    DuplicateJudgment(ArticleId, ArticleId),
    #[error("duplicate gold label for pair ({0}, {1})")]
    DuplicateGold(ArticleId, ArticleId),
    #[error("reports were computed over different gold sets")]
    GoldMismatch,
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub target_id: ArticleId,
    pub context_id: ArticleId,
    pub label: Label,
}

type Pair = (ArticleId, ArticleId);

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Gold file: JSON-lines of `{target_id, context_id, label}` with label
/// `"relevant"` or `"irrelevant"`. Pairs must be unique.
pub fn load_gold(path: &Path) -> Result<Vec<GoldLabel>, EvalError> {
    let gold: Vec<GoldLabel> = read_jsonl(path)?;
    check_unique_gold(&gold)?;
    Ok(gold)
}

pub fn load_judgments(path: &Path) -> Result<Vec<RelevanceJudgment>, EvalError> {
    read_jsonl(path)
}

fn check_unique_gold(gold: &[GoldLabel]) -> Result<(), EvalError> {
    let mut seen = HashSet::new();
    for g in gold {
        if !seen.insert((&g.target_id, &g.context_id)) {
            return Err(EvalError::DuplicateGold(
                g.target_id.clone(),
                g.context_id.clone(),
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub coverage: f64,
}

fn index_judgments(judgments: &[RelevanceJudgment]) -> Result<HashMap<Pair, Label>, EvalError> {
    let mut by_pair = HashMap::with_capacity(judgments.len());
    for j in judgments {
        let key = (j.target_id.clone(), j.context_id.clone());
        if by_pair.insert(key, j.label).is_some() {
            return Err(EvalError::DuplicateJudgment(
                j.target_id.clone(),
                j.context_id.clone(),
            ));
        }
    }
    Ok(by_pair)
}

pub fn confusion(
    judgments: &[RelevanceJudgment],
    gold: &[GoldLabel],
) -> Result<Confusion, EvalError> {
    check_unique_gold(gold)?;
    let by_pair = index_judgments(judgments)?;
    let mut c = Confusion {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
        coverage: 0.0,
    };
    let mut judged = 0usize;
    for g in gold {
        let Some(&pred) = by_pair.get(&(g.target_id.clone(), g.context_id.clone())) else {
            continue;
        };
        judged += 1;
        match (pred, g.label) {
            (Label::Relevant, Label::Relevant) => c.tp += 1,
            (Label::Relevant, Label::Irrelevant) => c.fp += 1,
            (Label::Irrelevant, Label::Relevant) => c.fn_ += 1,
            (Label::Irrelevant, Label::Irrelevant) => c.tn += 1,
        }
    }
    c.coverage = ratio(judged as u64, gold.len() as u64);
    Ok(c)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn score(tp: u64, fp: u64, fn_: u64) -> Scores {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Scores {
        precision,
        recall,
        f1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub target_id: ArticleId,
    pub context_id: ArticleId,
    pub gold: Label,
    pub predicted: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: PromptVariant,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub coverage: f64,
    pub parser_failure_rate: f64,
    /// Digest of the gold set the report was computed against.
    pub gold_fingerprint: String,
    /// Judged gold pairs, sorted by (target_id, context_id).
    pub outcomes: Vec<PairOutcome>,
}

pub fn gold_fingerprint(gold: &[GoldLabel]) -> String {
    let mut lines: Vec<String> = gold
        .iter()
        .map(|g| format!("{} {} {:?}", g.target_id, g.context_id, g.label))
        .collect();
    lines.sort();
    digest::digest_fields(&lines)
}

/// Share of judgments that fell back to the unparsed default.
pub fn parser_failure_rate(judgments: &[RelevanceJudgment]) -> f64 {
    let failed = judgments.iter().filter(|j| j.is_defaulted()).count();
    ratio(failed as u64, judgments.len() as u64)
}

pub fn evaluate(
    variant: PromptVariant,
    judgments: &[RelevanceJudgment],
    gold: &[GoldLabel],
) -> Result<EvalReport, EvalError> {
    let c = confusion(judgments, gold)?;
    let s = score(c.tp, c.fp, c.fn_);
    let by_pair = index_judgments(judgments)?;
    let mut outcomes: Vec<PairOutcome> = gold
        .iter()
        .filter_map(|g| {
            by_pair
                .get(&(g.target_id.clone(), g.context_id.clone()))
                .map(|&predicted| PairOutcome {
                    target_id: g.target_id.clone(),
                    context_id: g.context_id.clone(),
                    gold: g.label,
                    predicted,
                })
        })
        .collect();
    outcomes.sort_by(|a, b| (&a.target_id, &a.context_id).cmp(&(&b.target_id, &b.context_id)));
    Ok(EvalReport {
        variant,
        tp: c.tp,
        fp: c.fp,
        fn_: c.fn_,
        tn: c.tn,
        precision: s.precision,
        recall: s.recall,
        f1: s.f1,
        coverage: c.coverage,
        parser_failure_rate: parser_failure_rate(judgments),
        gold_fingerprint: gold_fingerprint(gold),
        outcomes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub target_id: ArticleId,
    pub context_id: ArticleId,
    pub gold: Label,
    pub baseline: Label,
    pub extended: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantComparison {
    pub delta_precision: f64,
    pub delta_recall: f64,
    pub delta_f1: f64,
    /// Pairs the baseline got right and the extended variant got wrong.
    pub baseline_only_correct: u64,
    /// Pairs the extended variant got right and the baseline got wrong.
    pub extended_only_correct: u64,
    pub mcnemar_p_value: f64,
    pub disagreements: Vec<Disagreement>,
}

/// Extended minus baseline, with an exact McNemar test over pairs judged by
/// both variants.
pub fn compare_variants(
    baseline: &EvalReport,
    extended: &EvalReport,
) -> Result<VariantComparison, EvalError> {
    if baseline.gold_fingerprint != extended.gold_fingerprint {
        return Err(EvalError::GoldMismatch);
    }
    let ext: BTreeMap<(&ArticleId, &ArticleId), &PairOutcome> = extended
        .outcomes
        .iter()
        .map(|o| ((&o.target_id, &o.context_id), o))
        .collect();
    let (mut b, mut c) = (0u64, 0u64);
    let mut disagreements = Vec::new();
    for base in &baseline.outcomes {
        let Some(e) = ext.get(&(&base.target_id, &base.context_id)) else {
            continue;
        };
        let base_ok = base.predicted == base.gold;
        let ext_ok = e.predicted == e.gold;
        match (base_ok, ext_ok) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
        if base.predicted != e.predicted {
            disagreements.push(Disagreement {
                target_id: base.target_id.clone(),
                context_id: base.context_id.clone(),
                gold: base.gold,
                baseline: base.predicted,
                extended: e.predicted,
            });
        }
    }
    Ok(VariantComparison {
        delta_precision: extended.precision - baseline.precision,
        delta_recall: extended.recall - baseline.recall,
        delta_f1: extended.f1 - baseline.f1,
        baseline_only_correct: b,
        extended_only_correct: c,
        mcnemar_p_value: mcnemar_exact(b, c),
        disagreements,
    })
}

/// Plain-text table of both reports and the comparison.
pub fn format_table(
    baseline: &EvalReport,
    extended: &EvalReport,
    cmp: &VariantComparison,
) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>5} {:>5} {:>5} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "variant", "tp", "fp", "fn", "tn", "precision", "recall", "f1", "coverage", "parse_err"
    );
    for r in [baseline, extended] {
        let _ = writeln!(
            s,
            "{:<10} {:>5} {:>5} {:>5} {:>5} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            r.variant.tag(),
            r.tp,
            r.fp,
            r.fn_,
            r.tn,
            r.precision,
            r.recall,
            r.f1,
            r.coverage,
            r.parser_failure_rate
        );
    }
    let _ = writeln!(
        s,
        "delta (extended - baseline): precision {:+.4}  recall {:+.4}  f1 {:+.4}",
        cmp.delta_precision, cmp.delta_recall, cmp.delta_f1
    );
    let _ = writeln!(
        s,
        "mcnemar exact: b={} c={} p={:.6}  disagreements={}",
        cmp.baseline_only_correct,
        cmp.extended_only_correct,
        cmp.mcnemar_p_value,
        cmp.disagreements.len()
    );
    s
}
