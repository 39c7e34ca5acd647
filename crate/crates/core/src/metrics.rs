//! Offline evaluation: NDCG@K, MRR@K, AUC.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("AUC needs at least one positive and one negative label")]
    DegenerateClasses,
}

/// Indices sorted by descending score, ties broken by original index.
pub fn ranked_indices(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Exponential gain 2^label − 1; equals the linear gain for binary labels.
pub fn gain(label: f64) -> f64 {
    label.exp2() - 1.0
}

/// Log discount at 0-based rank position.
pub fn discount(position: usize) -> f64 {
    1.0 / ((position + 2) as f64).log2()
}

fn dcg_at_k(ordered_labels: impl Iterator<Item = f64>, k: usize) -> f64 {
    ordered_labels
        .take(k)
        .enumerate()
        .map(|(pos, l)| gain(l) * discount(pos))
        .sum()
}

/// Normalized discounted cumulative gain at cutoff k; 0 when the ideal DCG
/// is 0 (all labels zero).
pub fn ndcg_at_k(scores: &[f64], labels: &[f64], k: usize) -> f64 {
    assert_eq!(scores.len(), labels.len(), "scores/labels length mismatch");
    assert!(k >= 1, "k must be at least 1");
    let order = ranked_indices(scores);
    let dcg = dcg_at_k(order.iter().map(|&i| labels[i]), k);
    let mut ideal = labels.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg_at_k(ideal.into_iter(), k);
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Reciprocal rank of the highest-ranked positive (label > 0) if it lands
/// within the top k, else 0.
pub fn mrr_at_k(scores: &[f64], labels: &[f64], k: usize) -> f64 {
    assert_eq!(scores.len(), labels.len(), "scores/labels length mismatch");
    for (pos, &i) in ranked_indices(scores).iter().take(k).enumerate() {
        if labels[i] > 0.0 {
            return 1.0 / (pos + 1) as f64;
        }
    }
    0.0
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting
/// one half. Computed by rank sums so ties are exact.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64, MetricsError> {
    assert_eq!(scores.len(), labels.len(), "scores/labels length mismatch");
    let positives = labels.iter().filter(|&&l| l > 0.0).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::DegenerateClasses);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // average ranks across tied scores (1-based ranks)
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg_rank = ((i + 1 + j + 1) as f64) / 2.0;
        for &d in &idx[i..=j] {
            if labels[d] > 0.0 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let p = positives as f64;
    let n = negatives as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// One evaluated query.
#[derive(Debug, Clone)]
pub struct QueryEval {
    pub query_id: String,
    pub ndcg: f64,
    pub mrr: f64,
}

/// Mean NDCG@K / MRR@K over queries plus AUC pooled over all documents.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub k: usize,
    pub query_count: usize,
    pub ndcg: f64,
    pub mrr: f64,
    pub auc: Option<f64>,
    pub per_query: Option<Vec<QueryEval>>,
}

/// Evaluate scored queries: `(query_id, scores, labels)` per query.
pub fn evaluate(queries: &[(String, Vec<f64>, Vec<f64>)], k: usize, keep_per_query: bool) -> EvalReport {
    let mut per_query = Vec::with_capacity(queries.len());
    let mut pooled_scores = Vec::new();
    let mut pooled_labels = Vec::new();
    for (qid, scores, labels) in queries {
        per_query.push(QueryEval {
            query_id: qid.clone(),
            ndcg: ndcg_at_k(scores, labels, k),
            mrr: mrr_at_k(scores, labels, k),
        });
        pooled_scores.extend_from_slice(scores);
        pooled_labels.extend_from_slice(labels);
    }
    let n = per_query.len().max(1) as f64;
    let ndcg = per_query.iter().map(|q| q.ndcg).sum::<f64>() / n;
    let mrr = per_query.iter().map(|q| q.mrr).sum::<f64>() / n;
    let auc = auc(&pooled_scores, &pooled_labels).ok();
    EvalReport {
        k,
        query_count: per_query.len(),
        ndcg,
        mrr,
        auc,
        per_query: keep_per_query.then_some(per_query),
    }
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        let _ = writeln!(out, "queries,{}", self.query_count);
        let _ = writeln!(out, "ndcg@{},{:.6}", self.k, self.ndcg);
        let _ = writeln!(out, "mrr@{},{:.6}", self.k, self.mrr);
        match self.auc {
            Some(a) => {
                let _ = writeln!(out, "auc,{a:.6}");
            }
            None => {
                let _ = writeln!(out, "auc,");
            }
        }
        out
    }

    pub fn per_query_csv(&self) -> Option<String> {
        let rows = self.per_query.as_ref()?;
        let mut out = String::from("query_id,ndcg,mrr\n");
        for q in rows {
            let _ = writeln!(out, "{},{:.6},{:.6}", q.query_id, q.ndcg, q.mrr);
        }
        Some(out)
    }

    pub fn render_table(&self) -> String {
        let auc = self
            .auc
            .map(|a| format!("{a:.4}"))
            .unwrap_or_else(|| "n/a".to_string());
        format!(
            "+-----------+----------+\n\
             | metric    | value    |\n\
             +-----------+----------+\n\
             | queries   | {:<8} |\n\
             | ndcg@{:<3}  | {:<8.4} |\n\
             | mrr@{:<3}   | {:<8.4} |\n\
             | auc       | {:<8} |\n\
             +-----------+----------+",
            self.query_count, self.k, self.ndcg, self.k, self.mrr, auc
        )
    }
}
