//! Reference computations for the integration suites.
//!
//! Everything here recomputes values through a different route than the
//! library: dense matmuls instead of CSR accumulation, rank counting
//! instead of sorting. Agreement between the two is the point of the
//! tests, so nothing in this module may call into the code it checks.

#![allow(dead_code)]

use std::path::PathBuf;

use ndarray::Array2;

/// Dense symmetric-normalized bipartite adjacency: entry (i, j) is
/// `1/sqrt(d_i d_j)` iff the edge exists, with services occupying node
/// ids `num_users..num_users+num_services`. Zero-degree rows stay zero.
pub fn dense_normalized(
    num_users: usize,
    num_services: usize,
    edges: &[(usize, usize)],
) -> Array2<f64> {
    let n = num_users + num_services;
    let mut adj = Array2::<f64>::zeros((n, n));
    for &(u, s) in edges {
        let j = num_users + s;
        adj[[u, j]] = 1.0;
        adj[[j, u]] = 1.0;
    }
    let deg: Vec<f64> = (0..n).map(|i| adj.row(i).sum()).collect();
    let mut out = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if adj[[i, j]] > 0.0 {
                out[[i, j]] = 1.0 / (deg[i] * deg[j]).sqrt();
            }
        }
    }
    out
}

/// Weighted hop sum `w_0 E + w_1 AE + w_2 A^2 E + ...` via dense matmul.
pub fn dense_readout(adj: &Array2<f64>, e0: &Array2<f64>, weights: &[f64]) -> Array2<f64> {
    let mut acc = e0.mapv(|v| v * weights[0]);
    let mut cur = e0.clone();
    for &w in &weights[1..] {
        cur = adj.dot(&cur);
        acc.scaled_add(w, &cur);
    }
    acc
}

/// Largest absolute elementwise difference.
pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteMetrics {
    pub recall: f64,
    pub ndcg: f64,
}

/// Recall@K and NDCG@K for one user, recomputed by counting ranks rather
/// than building a sorted list. `scores[s]` is the user's score for
/// service `s`, `in_train[s]` removes train positives from the candidate
/// pool, and `test` holds the held-out positives.
///
/// A candidate outranks test positive `s` when its score is strictly
/// higher, or equal with a smaller id; that is the same total order the
/// evaluator sorts by, expressed as a count.
pub fn brute_metrics(scores: &[f64], in_train: &[bool], test: &[usize], k: usize) -> BruteMetrics {
    if test.is_empty() {
        return BruteMetrics {
            recall: 0.0,
            ndcg: 0.0,
        };
    }
    let mut hits = 0usize;
    let mut dcg = 0.0;
    for &s in test {
        let mut rank = 1usize;
        for c in 0..scores.len() {
            if c == s || in_train[c] {
                continue;
            }
            if scores[c] > scores[s] || (scores[c] == scores[s] && c < s) {
                rank += 1;
            }
        }
        if rank <= k {
            hits += 1;
            dcg += 1.0 / ((rank + 1) as f64).log2();
        }
    }
    let ideal = k.min(test.len());
    let idcg: f64 = (1..=ideal).map(|r| 1.0 / ((r + 1) as f64).log2()).sum();
    BruteMetrics {
        recall: hits as f64 / ideal as f64,
        ndcg: if idcg == 0.0 { 0.0 } else { dcg / idcg },
    }
}

/// Locates a raw WSDream corpus: `$QAGCL_WSDREAM_DIR`, then
/// `data/wsdream` relative to the crate and to the workspace root. The
/// directory must hold rtMatrix.txt, userlist.txt, and wslist.txt.
pub fn wsdream_dir() -> Option<PathBuf> {
    let mut candidates = Vec::new();
    if let Ok(d) = std::env::var("QAGCL_WSDREAM_DIR") {
        candidates.push(PathBuf::from(d));
    }
    candidates.push(PathBuf::from("data/wsdream"));
    candidates.push(PathBuf::from("../../data/wsdream"));
    candidates.into_iter().find(|d| {
        ["rtMatrix.txt", "userlist.txt", "wslist.txt"]
            .iter()
            .all(|f| d.join(f).is_file())
    })
}
