//! Evaluation metrics: AUC-ROC, average precision, NMI and pairwise F1.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

fn check_binary(scores: &[f64], labels: &[i64]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::InvalidArgument(format!("score {i} is NaN")));
    }
    let mut pos = 0;
    for &l in labels {
        match l {
            0 => {}
            1 => pos += 1,
            other => return Err(Error::InvalidArgument(format!("binary label must be 0 or 1, got {other}"))),
        }
    }
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half (Mann–Whitney U over midranks).
pub fn auc_roc(scores: &[f64], labels: &[i64]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("NaN rejected"));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share their mean
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        let tied_pos = idx[start..end].iter().filter(|&&i| labels[i] == 1).count();
        rank_sum += mid_rank * tied_pos as f64;
        start = end;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Average precision: mean over positives of the precision at their rank.
///
/// Points are ranked by descending score; tied scores keep input order, so
/// earlier rows rank higher.
pub fn auc_pr(scores: &[f64], labels: &[i64]) -> Result<f64> {
    let (pos, _) = check_binary(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("NaN rejected"));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, &i) in idx.iter().enumerate() {
        if labels[i] == 1 {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    Ok(sum / pos as f64)
}

/// Dense ids in order of first appearance.
fn dense_ids<T: Hash + Eq>(labels: &[T]) -> (Vec<usize>, usize) {
    let mut seen: HashMap<&T, usize> = HashMap::new();
    let ids = labels
        .iter()
        .map(|l| {
            let next = seen.len();
            *seen.entry(l).or_insert(next)
        })
        .collect();
    (ids, seen.len())
}

struct Contingency {
    n: usize,
    table: Vec<Vec<usize>>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

fn contingency<A: Hash + Eq, B: Hash + Eq>(a: &[A], b: &[B]) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("partitions must be nonempty".into()));
    }
    let (ia, ka) = dense_ids(a);
    let (ib, kb) = dense_ids(b);
    let mut table = vec![vec![0usize; kb]; ka];
    let mut rows = vec![0usize; ka];
    let mut cols = vec![0usize; kb];
    for (&x, &y) in ia.iter().zip(&ib) {
        table[x][y] += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    Ok(Contingency {
        n: a.len(),
        table,
        rows,
        cols,
    })
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// How mutual information is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NmiNormalization {
    /// `I / √(H(A)·H(B))`
    #[default]
    Geometric,
    /// `I / ((H(A) + H(B)) / 2)`
    Arithmetic,
}

/// Normalized mutual information (geometric mean of entropies).
pub fn nmi<A: Hash + Eq, B: Hash + Eq>(a: &[A], b: &[B]) -> Result<f64> {
    nmi_with(a, b, NmiNormalization::Geometric)
}

/// NMI under the chosen normalization. Two single-cluster partitions score 1;
/// if exactly one side has zero entropy the score is 0.
pub fn nmi_with<A: Hash + Eq, B: Hash + Eq>(a: &[A], b: &[B], norm: NmiNormalization) -> Result<f64> {
    let c = contingency(a, b)?;
    let n = c.n as f64;
    let (ha, hb) = (entropy(&c.rows, c.n), entropy(&c.cols, c.n));
    if c.rows.len() == 1 && c.cols.len() == 1 {
        return Ok(1.0);
    }
    if c.rows.len() == 1 || c.cols.len() == 1 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (c.rows[i] as f64 * c.cols[j] as f64)).ln();
            }
        }
    }
    let denom = match norm {
        NmiNormalization::Geometric => (ha * hb).sqrt(),
        NmiNormalization::Arithmetic => 0.5 * (ha + hb),
    };
    Ok((mi / denom).clamp(0.0, 1.0))
}

fn pairs(c: usize) -> u64 {
    let c = c as u64;
    c * c.saturating_sub(1) / 2
}

/// F1 over co-clustered point pairs. Symmetric in its arguments.
///
/// Returns 1 when neither partition co-clusters any pair, and 0 when only one
/// of them does.
pub fn pairwise_f<A: Hash + Eq, B: Hash + Eq>(truth: &[A], predicted: &[B]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    if truth.len() < 2 {
        return Err(Error::InvalidArgument("pairwise F needs at least two points".into()));
    }
    let c = contingency(truth, predicted)?;
    let tp: u64 = c.table.iter().flatten().map(|&v| pairs(v)).sum();
    let true_pairs: u64 = c.rows.iter().map(|&v| pairs(v)).sum();
    let pred_pairs: u64 = c.cols.iter().map(|&v| pairs(v)).sum();
    if true_pairs == 0 && pred_pairs == 0 {
        return Ok(1.0);
    }
    if true_pairs == 0 || pred_pairs == 0 || tp == 0 {
        return Ok(0.0);
    }
    // 2PR/(P+R) with P = tp/pred, R = tp/true
    Ok(2.0 * tp as f64 / (true_pairs + pred_pairs) as f64)
}
