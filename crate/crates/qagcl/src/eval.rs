//! Full-ranking evaluation and baselines.
//!
//! For every user with at least one test positive, all services outside
//! the user's train positives are scored and sorted (descending score,
//! ascending id on ties). Recall@K divides hits by `min(K, positives)`,
//! NDCG@K uses binary relevance with logarithmic position discounts and
//! ideal-list normalization. Reported numbers are macro averages over
//! evaluable users.

use std::time::Instant;

use ndarray::Array2;

use crate::config::{ModelKind, TrainConfig};
use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::graph::service_node;
use crate::training;

/// Anything that can score a user-service pair.
pub trait Scorer {
    fn score(&self, u: usize, s: usize) -> f64;
}

/// Scores via dot products of final embedding rows.
pub struct EmbeddingScorer<'a> {
    pub finals: &'a Array2<f64>,
    pub num_users: usize,
}

impl Scorer for EmbeddingScorer<'_> {
    fn score(&self, u: usize, s: usize) -> f64 {
        self.finals
            .row(u)
            .dot(&self.finals.row(service_node(self.num_users, s)))
    }
}

/// Owning variant used by trained baselines.
pub struct OwnedEmbeddingScorer {
    pub finals: Array2<f64>,
    pub num_users: usize,
}

impl Scorer for OwnedEmbeddingScorer {
    fn score(&self, u: usize, s: usize) -> f64 {
        self.finals
            .row(u)
            .dot(&self.finals.row(service_node(self.num_users, s)))
    }
}

/// Constant per-user score: negated mean train response time. Rankings
/// degenerate to the ascending-id tiebreak by design.
pub struct UMeanScorer {
    per_user: Vec<f64>,
}

/// Per-service score: negated mean observed train response time, with the
/// global train mean standing in for services never observed in train.
pub struct IMeanScorer {
    per_service: Vec<f64>,
}

impl Scorer for UMeanScorer {
    fn score(&self, u: usize, _s: usize) -> f64 {
        self.per_user[u]
    }
}

impl Scorer for IMeanScorer {
    fn score(&self, _u: usize, s: usize) -> f64 {
        self.per_service[s]
    }
}

pub fn umean_scorer(dataset: &InteractionDataset) -> UMeanScorer {
    let mut sum = vec![0.0; dataset.num_users];
    let mut cnt = vec![0usize; dataset.num_users];
    for (k, &(u, _)) in dataset.train_edges.iter().enumerate() {
        sum[u] += dataset.train_qos[k];
        cnt[u] += 1;
    }
    let per_user = sum
        .iter()
        .zip(&cnt)
        .map(|(&s, &c)| if c > 0 { -s / c as f64 } else { 0.0 })
        .collect();
    UMeanScorer { per_user }
}

pub fn imean_scorer(dataset: &InteractionDataset) -> IMeanScorer {
    let mut sum = vec![0.0; dataset.num_services];
    let mut cnt = vec![0usize; dataset.num_services];
    let mut all = 0.0;
    for (k, &(_, s)) in dataset.train_edges.iter().enumerate() {
        sum[s] += dataset.train_qos[k];
        cnt[s] += 1;
        all += dataset.train_qos[k];
    }
    let global = if dataset.train_edges.is_empty() {
        0.0
    } else {
        all / dataset.train_edges.len() as f64
    };
    let per_service = sum
        .iter()
        .zip(&cnt)
        .map(|(&s, &c)| if c > 0 { -s / c as f64 } else { -global })
        .collect();
    IMeanScorer { per_service }
}

/// Builds a scorer for any model kind. The mean baselines come straight
/// from train QoS values; BPR-MF and LightGCN run the training loop under
/// the documented config reductions.
pub fn baseline_scores(
    kind: ModelKind,
    dataset: &InteractionDataset,
    config: &TrainConfig,
) -> Result<Box<dyn Scorer>> {
    match kind {
        ModelKind::UMean => Ok(Box::new(umean_scorer(dataset))),
        ModelKind::IMean => Ok(Box::new(imean_scorer(dataset))),
        ModelKind::Qagcl | ModelKind::LightGcn | ModelKind::BprMf => {
            let mut cfg = config.clone();
            cfg.apply_model_preset(kind);
            let outcome = training::train(dataset, &cfg)?;
            let views = training::build_views(dataset, &cfg)?;
            let finals = crate::encoder::readout(
                &views.graphs.main,
                &outcome.state.e0,
                &outcome.state.layer_weights,
            )?;
            Ok(Box::new(OwnedEmbeddingScorer {
                finals,
                num_users: dataset.num_users,
            }))
        }
    }
}

/// Ranks all candidate services for one user: train positives are removed
/// from the pool, order is by descending score with ascending-id ties.
pub fn rank_services(
    scorer: &dyn Scorer,
    num_services: usize,
    u: usize,
    train_positives: &[usize],
) -> Vec<usize> {
    let mut scored: Vec<(usize, f64)> = (0..num_services)
        .filter(|s| train_positives.binary_search(s).is_err())
        .map(|s| (s, scorer.score(u, s)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.into_iter().map(|(s, _)| s).collect()
}

/// Hits in the top K over `min(K, |test_positives|)`. Zero when the user
/// has no test positives; such users are excluded upstream.
/// `test_positives` must be ascending (as produced by the user indexes).
pub fn recall_at_k(ranked: &[usize], test_positives: &[usize], k: usize) -> f64 {
    if test_positives.is_empty() {
        return 0.0;
    }
    let hits = ranked
        .iter()
        .take(k)
        .filter(|s| test_positives.binary_search(s).is_ok())
        .count();
    hits as f64 / k.min(test_positives.len()) as f64
}

/// Binary-relevance NDCG: each hit at 1-based rank i contributes
/// `1 / log2(i + 1)`, normalized by the ideal list with all
/// `min(K, |pos|)` hits up front.
pub fn ndcg_at_k(ranked: &[usize], test_positives: &[usize], k: usize) -> f64 {
    if test_positives.is_empty() {
        return 0.0;
    }
    let mut dcg = 0.0;
    for (i, s) in ranked.iter().take(k).enumerate() {
        if test_positives.binary_search(s).is_ok() {
            dcg += 1.0 / ((i + 2) as f64).log2();
        }
    }
    let ideal = k.min(test_positives.len());
    let idcg: f64 = (0..ideal).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Metrics for one user at each requested K.
#[derive(Debug, Clone)]
pub struct UserMetrics {
    pub user: usize,
    pub test_count: usize,
    /// Aligned with the report's `ks`.
    pub recalls: Vec<f64>,
    pub ndcgs: Vec<f64>,
}

/// Macro-averaged evaluation output.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub ks: Vec<usize>,
    pub recalls: Vec<f64>,
    pub ndcgs: Vec<f64>,
    pub users_evaluated: usize,
    pub per_user: Vec<UserMetrics>,
    pub config_hash: String,
    pub wall_secs: f64,
}

impl MetricsReport {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.recalls[i])
    }

    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.ndcgs[i])
    }

    /// Human-readable aligned table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:>6}  {:>10}  {:>10}\n", "K", "Recall", "NDCG"));
        for (i, k) in self.ks.iter().enumerate() {
            out.push_str(&format!(
                "{:>6}  {:>10.4}  {:>10.4}\n",
                k, self.recalls[i], self.ndcgs[i]
            ));
        }
        out.push_str(&format!(
            "users evaluated: {}  (config {})\n",
            self.users_evaluated, self.config_hash
        ));
        out
    }

    /// Machine-readable rows: `model,dataset,K,recall,ndcg,seed,config_hash`.
    pub fn csv_rows(&self, model: &str, dataset_name: &str, seed: u64) -> String {
        let mut out = String::new();
        for (i, k) in self.ks.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                model, dataset_name, k, self.recalls[i], self.ndcgs[i], seed, self.config_hash
            ));
        }
        out
    }
}

pub const METRICS_CSV_HEADER: &str = "model,dataset,K,recall,ndcg,seed,config_hash\n";

/// Evaluates a scorer over every user with test positives.
pub fn evaluate_scorer(
    scorer: &dyn Scorer,
    dataset: &InteractionDataset,
    ks: &[usize],
) -> Result<MetricsReport> {
    if ks.is_empty() || ks.iter().any(|&k| k == 0) {
        return Err(Error::Config("evaluation needs positive K values".into()));
    }
    let started = Instant::now();
    let train_index = dataset.user_train_index();
    let test_index = dataset.user_test_index();
    let mut per_user = Vec::new();
    let mut sums_r = vec![0.0; ks.len()];
    let mut sums_n = vec![0.0; ks.len()];
    for u in 0..dataset.num_users {
        let test = &test_index[u];
        if test.is_empty() {
            continue;
        }
        let ranked = rank_services(scorer, dataset.num_services, u, &train_index[u]);
        let recalls: Vec<f64> = ks.iter().map(|&k| recall_at_k(&ranked, test, k)).collect();
        let ndcgs: Vec<f64> = ks.iter().map(|&k| ndcg_at_k(&ranked, test, k)).collect();
        for i in 0..ks.len() {
            sums_r[i] += recalls[i];
            sums_n[i] += ndcgs[i];
        }
        per_user.push(UserMetrics {
            user: u,
            test_count: test.len(),
            recalls,
            ndcgs,
        });
    }
    if per_user.is_empty() {
        return Err(Error::Config(
            "no user has a test positive; nothing to evaluate".into(),
        ));
    }
    let n = per_user.len() as f64;
    Ok(MetricsReport {
        ks: ks.to_vec(),
        recalls: sums_r.iter().map(|s| s / n).collect(),
        ndcgs: sums_n.iter().map(|s| s / n).collect(),
        users_evaluated: per_user.len(),
        per_user,
        config_hash: String::new(),
        wall_secs: started.elapsed().as_secs_f64(),
    })
}

/// Evaluates final embeddings directly.
pub fn evaluate(
    finals: &Array2<f64>,
    dataset: &InteractionDataset,
    ks: &[usize],
) -> Result<MetricsReport> {
    let scorer = EmbeddingScorer {
        finals,
        num_users: dataset.num_users,
    };
    evaluate_scorer(&scorer, dataset, ks)
}
