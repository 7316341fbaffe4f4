//! Ranking-quality metrics over labeled users.
//!
//! Unlabeled users are dropped from the ranking before any metric is
//! computed; order among the remaining entries is preserved. AP is the
//! non-interpolated variant; AUC gives tied scores half credit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::review::LabelSet;
use crate::scoring::SpamicityRanking;

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub ap: f64,
    pub auc: f64,
    pub precision_at: BTreeMap<usize, f64>,
    pub ndcg_at: BTreeMap<usize, f64>,
    pub n_positive: usize,
    pub n_negative: usize,
}

/// Ranking restricted to labeled users: `(label, score)` in rank order.
fn filtered(ranking: &SpamicityRanking, labels: &LabelSet) -> Vec<(bool, f64)> {
    ranking
        .entries()
        .iter()
        .filter_map(|(user, score)| labels.get(user).map(|l| (l, *score)))
        .collect()
}

fn ap_of(entries: &[(bool, f64)]) -> Result<f64> {
    let total_pos = entries.iter().filter(|e| e.0).count();
    if total_pos == 0 {
        return Err(Error::UndefinedMetric(
            "average precision needs a labeled positive".to_string(),
        ));
    }
    let mut seen_pos = 0usize;
    let mut sum = 0.0;
    for (idx, &(label, _)) in entries.iter().enumerate() {
        if label {
            seen_pos += 1;
            sum += seen_pos as f64 / (idx + 1) as f64;
        }
    }
    Ok(sum / total_pos as f64)
}

fn auc_of(entries: &[(bool, f64)]) -> Result<f64> {
    let n_pos = entries.iter().filter(|e| e.0).count();
    let n_neg = entries.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "auc needs both labeled classes".to_string(),
        ));
    }
    // Mann-Whitney with midranks over ascending scores.
    let mut sorted: Vec<(f64, bool)> = entries.iter().map(|&(l, s)| (s, l)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        // 1-based ranks i+1..=j share the midrank
        let midrank = (i + 1 + j) as f64 / 2.0;
        for e in &sorted[i..j] {
            if e.1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

fn precision_at_of(entries: &[(bool, f64)], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("precision@k needs k >= 1".to_string()));
    }
    let avail = k.min(entries.len());
    if avail < k {
        log::warn!("precision@{k}: only {avail} labeled entries available");
    }
    if avail == 0 {
        return Err(Error::UndefinedMetric(
            "precision@k needs a labeled entry".to_string(),
        ));
    }
    let hits = entries[..avail].iter().filter(|e| e.0).count();
    Ok(hits as f64 / avail as f64)
}

fn ndcg_at_of(entries: &[(bool, f64)], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("ndcg@k needs k >= 1".to_string()));
    }
    let total_pos = entries.iter().filter(|e| e.0).count();
    if total_pos == 0 {
        return Err(Error::UndefinedMetric(
            "ndcg@k needs a labeled positive".to_string(),
        ));
    }
    let gain = |pos: usize| 1.0 / ((pos + 1) as f64).log2();
    let dcg: f64 = entries
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, e)| e.0)
        .map(|(idx, _)| gain(idx + 1))
        .sum();
    let ideal: f64 = (1..=total_pos.min(k)).map(gain).sum();
    Ok(dcg / ideal)
}

pub fn average_precision(ranking: &SpamicityRanking, labels: &LabelSet) -> Result<f64> {
    ap_of(&filtered(ranking, labels))
}

pub fn auc(ranking: &SpamicityRanking, labels: &LabelSet) -> Result<f64> {
    auc_of(&filtered(ranking, labels))
}

pub fn precision_at_k(ranking: &SpamicityRanking, labels: &LabelSet, k: usize) -> Result<f64> {
    precision_at_of(&filtered(ranking, labels), k)
}

pub fn ndcg_at_k(ranking: &SpamicityRanking, labels: &LabelSet, k: usize) -> Result<f64> {
    ndcg_at_of(&filtered(ranking, labels), k)
}

/// All metrics in one pass over the label-filtered ranking.
pub fn evaluate(ranking: &SpamicityRanking, labels: &LabelSet, ks: &[usize]) -> Result<EvalReport> {
    let entries = filtered(ranking, labels);
    let n_positive = entries.iter().filter(|e| e.0).count();
    let n_negative = entries.len() - n_positive;
    let mut precision_at = BTreeMap::new();
    let mut ndcg_at = BTreeMap::new();
    for &k in ks {
        precision_at.insert(k, precision_at_of(&entries, k)?);
        ndcg_at.insert(k, ndcg_at_of(&entries, k)?);
    }
    Ok(EvalReport {
        ap: ap_of(&entries)?,
        auc: auc_of(&entries)?,
        precision_at,
        ndcg_at,
        n_positive,
        n_negative,
    })
}

impl EvalReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "labeled positives    {}", self.n_positive);
        let _ = writeln!(out, "labeled negatives    {}", self.n_negative);
        let _ = writeln!(out, "average precision    {:.6}  (non-interpolated)", self.ap);
        let _ = writeln!(out, "auc                  {:.6}", self.auc);
        for (k, v) in &self.precision_at {
            let _ = writeln!(out, "precision@{k:<10} {v:.6}");
        }
        for (k, v) in &self.ndcg_at {
            let _ = writeln!(out, "ndcg@{k:<15} {v:.6}");
        }
        out
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.set("ap", format!("{}", self.ap));
        kv.set("ap_variant", "non-interpolated");
        kv.set("auc", format!("{}", self.auc));
        kv.set("counts.positives", format!("{}", self.n_positive));
        kv.set("counts.negatives", format!("{}", self.n_negative));
        for (k, v) in &self.precision_at {
            kv.set(&format!("precision_at.{k}"), format!("{v}"));
        }
        for (k, v) in &self.ndcg_at {
            kv.set(&format!("ndcg_at.{k}"), format!("{v}"));
        }
        kv
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Ranking with the given labels in order, scores strictly decreasing.
    fn ranked(labels_in_order: &[Option<bool>]) -> (SpamicityRanking, LabelSet) {
        let entries: Vec<(String, f64)> = labels_in_order
            .iter()
            .enumerate()
            .map(|(i, _)| (format!("u{i}"), 1.0 - i as f64 * 0.01))
            .collect();
        let labels = LabelSet::from_pairs(labels_in_order.iter().enumerate().filter_map(
            |(i, l)| l.map(|v| (format!("u{i}"), v)),
        ));
        (ranking_from(entries), labels)
    }

    fn ranking_from(entries: Vec<(String, f64)>) -> SpamicityRanking {
        // round-trip through the persistence format to build the struct
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.tsv");
        let mut text = String::new();
        for (rank, (u, s)) in entries.iter().enumerate() {
            text.push_str(&format!("{}\t{u}\t{s}\n", rank + 1));
        }
        std::fs::write(&path, text).unwrap();
        SpamicityRanking::load(&path).unwrap()
    }

    #[test]
    fn ap_examples() {
        let (r, l) = ranked(&[Some(true), Some(true), Some(false), Some(false)]);
        assert_eq!(average_precision(&r, &l).unwrap(), 1.0);

        let (r, l) = ranked(&[Some(true), Some(false), Some(true)]);
        assert_relative_eq!(
            average_precision(&r, &l).unwrap(),
            (1.0 + 2.0 / 3.0) / 2.0,
            max_relative = 1e-15
        );

        let (r, l) = ranked(&[Some(false), Some(false), Some(true)]);
        assert_relative_eq!(
            average_precision(&r, &l).unwrap(),
            1.0 / 3.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn auc_examples() {
        let (r, l) = ranked(&[Some(true), Some(true), Some(false)]);
        assert_eq!(auc(&r, &l).unwrap(), 1.0);

        let (r, l) = ranked(&[Some(false), Some(false), Some(true)]);
        assert_eq!(auc(&r, &l).unwrap(), 0.0);

        // pos scores {0.9, 0.4}, neg {0.6}
        let r = ranking_from(vec![
            ("a".into(), 0.9),
            ("b".into(), 0.6),
            ("c".into(), 0.4),
        ]);
        let l = LabelSet::from_pairs([
            ("a".to_string(), true),
            ("b".to_string(), false),
            ("c".to_string(), true),
        ]);
        assert_eq!(auc(&r, &l).unwrap(), 0.5);
    }

    #[test]
    fn auc_gives_ties_half_credit() {
        let r = ranking_from(vec![("a".into(), 0.5), ("b".into(), 0.5)]);
        let l = LabelSet::from_pairs([("a".to_string(), true), ("b".to_string(), false)]);
        assert_eq!(auc(&r, &l).unwrap(), 0.5);
    }

    #[test]
    fn precision_examples() {
        let (r, l) = ranked(&[Some(true), Some(true), Some(false), Some(false)]);
        assert_eq!(precision_at_k(&r, &l, 4).unwrap(), 0.5);
        assert_eq!(precision_at_k(&r, &l, 2).unwrap(), 1.0);

        let (r, l) = ranked(&[Some(false), Some(true)]);
        assert_eq!(precision_at_k(&r, &l, 1).unwrap(), 0.0);
        // k beyond the labeled count computes over what exists
        assert_eq!(precision_at_k(&r, &l, 10).unwrap(), 0.5);
        assert!(precision_at_k(&r, &l, 0).is_err());
    }

    #[test]
    fn precision_at_labeled_count_is_base_rate() {
        let (r, l) = ranked(&[Some(true), Some(false), Some(true), Some(false), Some(false)]);
        assert_eq!(precision_at_k(&r, &l, 5).unwrap(), 2.0 / 5.0);
    }

    #[test]
    fn ndcg_examples() {
        let (r, l) = ranked(&[Some(true), Some(true), Some(false)]);
        assert_eq!(ndcg_at_k(&r, &l, 3).unwrap(), 1.0);

        let (r, l) = ranked(&[Some(false), Some(true)]);
        assert_relative_eq!(
            ndcg_at_k(&r, &l, 2).unwrap(),
            1.0 / 3.0f64.log2(),
            max_relative = 1e-15
        );

        let (r, l) = ranked(&[Some(true), Some(false), Some(false), Some(false)]);
        assert_eq!(ndcg_at_k(&r, &l, 4).unwrap(), 1.0);
    }

    #[test]
    fn unlabeled_users_are_invisible() {
        let (r_with, l) = ranked(&[Some(true), None, Some(false), None, Some(true)]);
        let (r_without, l2) = ranked(&[Some(true), Some(false), Some(true)]);
        // same labeled sequence (+,-,+)
        assert_eq!(
            average_precision(&r_with, &l).unwrap(),
            average_precision(&r_without, &l2).unwrap()
        );
        assert_eq!(auc(&r_with, &l).unwrap(), auc(&r_without, &l2).unwrap());
        assert_eq!(
            ndcg_at_k(&r_with, &l, 3).unwrap(),
            ndcg_at_k(&r_without, &l2, 3).unwrap()
        );
    }

    #[test]
    fn metrics_survive_monotone_rescaling() {
        let entries = vec![
            ("a".to_string(), 0.95),
            ("b".to_string(), 0.60),
            ("c".to_string(), 0.59),
            ("d".to_string(), 0.10),
        ];
        let squashed: Vec<(String, f64)> = entries
            .iter()
            .map(|(u, s)| (u.clone(), s / 2.0 + 0.1))
            .collect();
        let l = LabelSet::from_pairs([
            ("a".to_string(), true),
            ("b".to_string(), false),
            ("c".to_string(), true),
            ("d".to_string(), false),
        ]);
        let r1 = ranking_from(entries);
        let r2 = ranking_from(squashed);
        let e1 = evaluate(&r1, &l, &[2, 4]).unwrap();
        let e2 = evaluate(&r2, &l, &[2, 4]).unwrap();
        assert_eq!(e1.ap, e2.ap);
        assert_eq!(e1.auc, e2.auc);
        assert_eq!(e1.precision_at, e2.precision_at);
        assert_eq!(e1.ndcg_at, e2.ndcg_at);
    }

    #[test]
    fn degenerate_labelings_are_errors() {
        let (r, l) = ranked(&[Some(false), Some(false)]);
        assert!(matches!(
            average_precision(&r, &l),
            Err(Error::UndefinedMetric(_))
        ));
        let (r, l) = ranked(&[Some(true), Some(true)]);
        assert!(matches!(auc(&r, &l), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn report_renders_every_metric() {
        let (r, l) = ranked(&[Some(true), Some(false), Some(true), Some(false)]);
        let report = evaluate(&r, &l, &[2]).unwrap();
        let text = report.render_text();
        assert!(text.contains("average precision"));
        assert!(text.contains("non-interpolated"));
        let kv = report.to_kv();
        assert!(kv.get("ap").is_some());
        assert!(kv.get("precision_at.2").is_some());
        assert_eq!(kv.get("counts.positives"), Some("2"));
    }
}
