//! Clustering agreement (homogeneity, completeness, v-measure) and detection
//! metrics (ROC-AUC, average precision).

use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};

/// Class × cluster counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    counts: Vec<Vec<usize>>,
    total: usize,
}

impl ContingencyTable {
    pub fn new(classes: &[usize], clusters: &[usize]) -> Result<Self> {
        if classes.len() != clusters.len() {
            return Err(Error::Shape(format!(
                "label vectors differ in length: {} vs {}",
                classes.len(),
                clusters.len()
            )));
        }
        if classes.is_empty() {
            return invalid("cannot compare empty labelings");
        }
        let class_ids = dense_ids(classes);
        let cluster_ids = dense_ids(clusters);
        let mut counts = vec![vec![0; cluster_ids.len()]; class_ids.len()];
        for (c, k) in classes.iter().zip(clusters) {
            counts[class_ids[c]][cluster_ids[k]] += 1;
        }
        Ok(Self { counts, total: classes.len() })
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.total
    }

    fn class_totals(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    fn cluster_totals(&self) -> Vec<usize> {
        let mut t = vec![0; self.counts.first().map_or(0, Vec::len)];
        for row in &self.counts {
            for (a, b) in t.iter_mut().zip(row) {
                *a += b;
            }
        }
        t
    }
}

fn dense_ids(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut ids = BTreeMap::new();
    for &l in labels {
        let next = ids.len();
        ids.entry(l).or_insert(next);
    }
    ids
}

fn entropy(totals: &[usize], n: f64) -> f64 {
    totals
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / n;
            -q * q.ln()
        })
        .sum()
}

/// Homogeneity, completeness and v-measure (natural-log entropies).
pub fn h_c_v(true_labels: &[usize], pred_labels: &[usize]) -> Result<(f64, f64, f64)> {
    let table = ContingencyTable::new(true_labels, pred_labels)?;
    let n = table.total as f64;
    let class_t = table.class_totals();
    let cluster_t = table.cluster_totals();
    let h_class = entropy(&class_t, n);
    let h_cluster = entropy(&cluster_t, n);

    let mut h_class_given_cluster = 0.0;
    let mut h_cluster_given_class = 0.0;
    for (c, row) in table.counts.iter().enumerate() {
        for (k, &nck) in row.iter().enumerate() {
            if nck == 0 {
                continue;
            }
            let joint = nck as f64 / n;
            h_class_given_cluster -= joint * (nck as f64 / cluster_t[k] as f64).ln();
            h_cluster_given_class -= joint * (nck as f64 / class_t[c] as f64).ln();
        }
    }
    let h = if h_class == 0.0 { 1.0 } else { 1.0 - h_class_given_cluster / h_class };
    let c = if h_cluster == 0.0 { 1.0 } else { 1.0 - h_cluster_given_class / h_cluster };
    let v = if h + c == 0.0 { 0.0 } else { 2.0 * h * c / (h + c) };
    Ok((h, c, v))
}

fn check_binary(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return invalid("scores contain NaN");
    }
    let pos = labels.iter().filter(|&&l| l).count();
    Ok((pos, labels.len() - pos))
}

/// Probability that a random positive outscores a random negative, ties
/// counted one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    if pos == 0 || neg == 0 {
        return invalid("ROC-AUC needs both positive and negative samples");
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks over groups of tied scores
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += order[i..=j].iter().filter(|&&o| labels[o]).count() as f64 * mid;
        i = j + 1;
    }
    let (p, q) = (pos as f64, neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q))
}

/// Step-wise average precision `sum_k (R_k - R_{k-1}) P_k` over descending
/// score thresholds; tied scores enter together.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = check_binary(scores, labels)?;
    if pos == 0 {
        return invalid("average precision needs at least one positive sample");
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        tp += order[i..=j].iter().filter(|&&o| labels[o]).count();
        seen += j - i + 1;
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / seen as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    Ok(ap)
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}
