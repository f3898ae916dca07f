//! Experiment drivers: multi-seed named runs, the augmentation-pair
//! ablation, and the layer-count sweep.
//!
//! All drivers evaluate against one shared prepared split so that row
//! differences isolate the treatment. Per-seed rows carry the exact config
//! hash of that run; the markdown renderings aggregate seed means.

use crate::augment::AugOp;
use crate::config::{ConfigFile, ModelKind, TrainConfig};
use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::eval::{baseline_scores, evaluate_scorer, MetricsReport};

/// A named run: one model on one prepared dataset over a seed list.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub name: String,
    pub model: ModelKind,
    pub config: TrainConfig,
    pub seeds: Vec<u64>,
}

impl ExperimentPlan {
    /// Lifts a parsed config file into a plan, defaulting the extras.
    pub fn from_config_file(file: ConfigFile) -> ExperimentPlan {
        ExperimentPlan {
            name: file.name.unwrap_or_else(|| "run".into()),
            model: file.model.unwrap_or(ModelKind::Qagcl),
            seeds: file.seeds.unwrap_or_else(|| vec![file.config.seed]),
            config: file.config,
        }
    }
}

/// Trains (when the kind needs it) and evaluates one model; the report's
/// config hash reflects the preset-adjusted config actually used.
pub fn run_model(
    dataset: &InteractionDataset,
    config: &TrainConfig,
    kind: ModelKind,
) -> Result<MetricsReport> {
    let mut effective = config.clone();
    effective.apply_model_preset(kind);
    let scorer = baseline_scores(kind, dataset, config)?;
    let mut report = evaluate_scorer(scorer.as_ref(), dataset, &effective.ks)?;
    report.config_hash = effective.config_hash();
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub report: MetricsReport,
}

/// Runs the plan's model once per seed.
pub fn run_plan(dataset: &InteractionDataset, plan: &ExperimentPlan) -> Result<Vec<SeedRun>> {
    if plan.seeds.is_empty() {
        return Err(Error::Config("plan has an empty seed list".into()));
    }
    plan.seeds
        .iter()
        .map(|&seed| {
            let mut cfg = plan.config.clone();
            cfg.seed = seed;
            Ok(SeedRun {
                seed,
                report: run_model(dataset, &cfg, plan.model)?,
            })
        })
        .collect()
}

/// Mean recall and NDCG across runs, aligned with the shared K list.
pub fn mean_over_seeds(runs: &[SeedRun]) -> Result<(Vec<usize>, Vec<f64>, Vec<f64>)> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Config("no runs to average".into()))?;
    let ks = first.report.ks.clone();
    let mut recalls = vec![0.0; ks.len()];
    let mut ndcgs = vec![0.0; ks.len()];
    for run in runs {
        if run.report.ks != ks {
            return Err(Error::Config("runs disagree on K values".into()));
        }
        for i in 0..ks.len() {
            recalls[i] += run.report.recalls[i];
            ndcgs[i] += run.report.ndcgs[i];
        }
    }
    let n = runs.len() as f64;
    recalls.iter_mut().for_each(|v| *v /= n);
    ndcgs.iter_mut().for_each(|v| *v /= n);
    Ok((ks, recalls, ndcgs))
}

/// One seed-level result of the augmentation ablation at a single K.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub pair: (AugOp, AugOp),
    pub seed: u64,
    pub recall: f64,
    pub ndcg: f64,
    pub config_hash: String,
}

impl AblationRow {
    pub fn label(&self) -> String {
        format!("{} & {}", self.pair.0, self.pair.1)
    }
}

/// Trains one model per augmentation pair and seed. When both views use
/// edge dropout the two masks draw from independent per-slot seed
/// streams, so ED & ED is a genuine two-sample contrast.
pub fn run_ablation(
    dataset: &InteractionDataset,
    pairs: &[(AugOp, AugOp)],
    config: &TrainConfig,
    seeds: &[u64],
    k: usize,
) -> Result<Vec<AblationRow>> {
    if pairs.is_empty() || seeds.is_empty() {
        return Err(Error::Config("ablation needs pairs and seeds".into()));
    }
    let mut rows = Vec::new();
    for &(a, b) in pairs {
        for &seed in seeds {
            let mut cfg = config.clone();
            cfg.aug_a = a;
            cfg.aug_b = b;
            cfg.seed = seed;
            cfg.ks = vec![k];
            let report = run_model(dataset, &cfg, ModelKind::Qagcl)?;
            rows.push(AblationRow {
                pair: (a, b),
                seed,
                recall: report.recalls[0],
                ndcg: report.ndcgs[0],
                config_hash: report.config_hash,
            });
        }
    }
    Ok(rows)
}

pub fn ablation_csv(rows: &[AblationRow], k: usize) -> String {
    let mut out = String::from("pair,K,recall,ndcg,seed,config_hash\n");
    for r in rows {
        out.push_str(&format!(
            "{}&{},{},{},{},{},{}\n",
            r.pair.0, r.pair.1, k, r.recall, r.ndcg, r.seed, r.config_hash
        ));
    }
    out
}

/// Markdown table of seed means, one row per pair in input order.
pub fn ablation_markdown(rows: &[AblationRow], k: usize) -> String {
    let mut out = format!("| Pair | Recall@{k} | NDCG@{k} |\n|---|---|---|\n");
    let mut seen: Vec<String> = Vec::new();
    for r in rows {
        let label = r.label();
        if seen.contains(&label) {
            continue;
        }
        let group: Vec<&AblationRow> = rows.iter().filter(|x| x.label() == label).collect();
        let n = group.len() as f64;
        let recall: f64 = group.iter().map(|x| x.recall).sum::<f64>() / n;
        let ndcg: f64 = group.iter().map(|x| x.ndcg).sum::<f64>() / n;
        out.push_str(&format!("| {label} | {recall:.4} | {ndcg:.4} |\n"));
        seen.push(label);
    }
    out
}

/// One seed-level result of the layer sweep, covering every requested K.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub layers: usize,
    pub seed: u64,
    pub ks: Vec<usize>,
    pub recalls: Vec<f64>,
    pub ndcgs: Vec<f64>,
    pub config_hash: String,
}

/// Trains one model per layer count and seed, reporting all metrics.
pub fn run_layer_sweep(
    dataset: &InteractionDataset,
    layer_counts: &[usize],
    config: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if layer_counts.is_empty() || seeds.is_empty() {
        return Err(Error::Config("sweep needs layer counts and seeds".into()));
    }
    if let Some(&bad) = layer_counts.iter().find(|&&l| l == 0) {
        return Err(Error::Config(format!(
            "layer sweep requires depths >= 1, got {bad}"
        )));
    }
    let mut rows = Vec::new();
    for &layers in layer_counts {
        for &seed in seeds {
            let mut cfg = config.clone();
            cfg.layers = layers;
            cfg.seed = seed;
            let report = run_model(dataset, &cfg, ModelKind::Qagcl)?;
            rows.push(SweepRow {
                layers,
                seed,
                ks: report.ks,
                recalls: report.recalls,
                ndcgs: report.ndcgs,
                config_hash: report.config_hash,
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("layers,K,recall,ndcg,seed,config_hash\n");
    for r in rows {
        for (i, k) in r.ks.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.layers, k, r.recalls[i], r.ndcgs[i], r.seed, r.config_hash
            ));
        }
    }
    out
}

/// Markdown grid of seed means: one row per layer count, one
/// recall/NDCG column pair per K.
pub fn sweep_markdown(rows: &[SweepRow]) -> String {
    let Some(first) = rows.first() else {
        return String::new();
    };
    let mut out = String::from("| L |");
    for k in &first.ks {
        out.push_str(&format!(" Recall@{k} | NDCG@{k} |"));
    }
    out.push('\n');
    out.push_str("|---|");
    out.push_str(&"---|---|".repeat(first.ks.len()));
    out.push('\n');
    let mut seen = Vec::new();
    for r in rows {
        if seen.contains(&r.layers) {
            continue;
        }
        let group: Vec<&SweepRow> = rows.iter().filter(|x| x.layers == r.layers).collect();
        let n = group.len() as f64;
        out.push_str(&format!("| {} |", r.layers));
        for i in 0..first.ks.len() {
            let recall: f64 = group.iter().map(|x| x.recalls[i]).sum::<f64>() / n;
            let ndcg: f64 = group.iter().map(|x| x.ndcgs[i]).sum::<f64>() / n;
            out.push_str(&format!(" {recall:.4} | {ndcg:.4} |"));
        }
        out.push('\n');
        seen.push(r.layers);
    }
    out
}
