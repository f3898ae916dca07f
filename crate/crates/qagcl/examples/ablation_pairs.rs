//! Runs the augmentation-pair ablation on a synthetic split: which pair
//! of graph views makes the contrastive signal most useful?
//!
//! The ED & ED pair uses two independent dropout seeds, so it is a real
//! two-sample contrast rather than a view compared against itself.
//!
//! Run with: `cargo run --example ablation_pairs`

use qagcl::augment::AugOp;
use qagcl::config::TrainConfig;
use qagcl::dataset::{prepare, PrepareParams};
use qagcl::experiments::{ablation_markdown, run_ablation};
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

    let cfg = TrainConfig {
        layers: 2,
        embed_dim: 32,
        epochs: 30,
        batch_size: 512,
        lr: 5e-3,
        ks: vec![20],
        ..TrainConfig::default()
    };
    let pairs = [
        (AugOp::Hd, AugOp::Ed),
        (AugOp::Hd, AugOp::Nd),
        (AugOp::Ed, AugOp::Ed),
    ];
    let seeds = [1, 2, 3];
    let rows = run_ablation(&ds, &pairs, &cfg, &seeds, 20)?;
    println!(
        "augmentation ablation, mean of {} seeds on {} users:\n",
        seeds.len(),
        ds.num_users
    );
    print!("{}", ablation_markdown(&rows, 20));
    Ok(())
}
