//! Scores every model kind on one synthetic split: the two mean-value
//! floors, BPR-MF, LightGCN, and the full model.
//!
//! The baselines are exact config reductions of the same trainer, so the
//! comparison isolates what each added ingredient buys. Expect the
//! graph-based models to clear the mean-value floors by a wide margin;
//! the QAGCL-vs-LightGCN gap is small on easy synthetic data.
//!
//! Run with: `cargo run --example compare_baselines`

use qagcl::config::{ModelKind, TrainConfig};
use qagcl::dataset::{prepare, PrepareParams};
use qagcl::experiments::run_model;
use qagcl::synthetic::{generate, SyntheticSpec};

fn main() -> qagcl::Result<()> {
    let (qos, gu, gs) = generate(&SyntheticSpec::default())?;
    let params = PrepareParams {
        gamma: 0.05,
        core: 10,
        split_ratio: 0.2,
        seed: 42,
    };
    let ds = prepare(&qos, &gu, &gs, &params)?;
    println!(
        "synthetic split: {} users, {} services, {} train + {} test edges\n",
        ds.num_users,
        ds.num_services,
        ds.train_edges.len(),
        ds.test_edges.len()
    );

    let cfg = TrainConfig {
        layers: 2,
        embed_dim: 32,
        epochs: 40,
        batch_size: 512,
        lr: 5e-3,
        ks: vec![10, 20],
        ..TrainConfig::default()
    };

    println!(
        "{:<10} {:>10} {:>10} {:>10} {:>10}",
        "model", "Recall@10", "NDCG@10", "Recall@20", "NDCG@20"
    );
    for kind in [
        ModelKind::UMean,
        ModelKind::IMean,
        ModelKind::BprMf,
        ModelKind::LightGcn,
        ModelKind::Qagcl,
    ] {
        let report = run_model(&ds, &cfg, kind)?;
        println!(
            "{:<10} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            kind.to_string(),
            report.recalls[0],
            report.ndcgs[0],
            report.recalls[1],
            report.ndcgs[1]
        );
    }
    Ok(())
}
