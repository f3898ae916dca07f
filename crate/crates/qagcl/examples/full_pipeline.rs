//! The whole artifact pipeline through the library API, end to end in a
//! temp directory: generate raw files, prepare, train, checkpoint,
//! re-load, evaluate, and recommend.
//!
//! This mirrors what the CLI does command by command; every intermediate
//! is a plain text file you can inspect afterwards.
//!
//! Run with: `cargo run --example full_pipeline`

use std::fs;

use qagcl::config::TrainConfig;
use qagcl::dataset::{
    dataset_hash, load_prepared, parse_geo_list, parse_qos_matrix, prepare, write_prepared,
    PrepareParams,
};
use qagcl::encoder::{read_checkpoint, readout, write_checkpoint, CheckpointMeta};
use qagcl::eval::{evaluate, rank_services, EmbeddingScorer};
use qagcl::graph::build_normalized;
use qagcl::synthetic;
use qagcl::training::{history_csv, train};

fn main() -> qagcl::Result<()> {
    let root = std::env::temp_dir().join(format!("qagcl-pipeline-{}", std::process::id()));
    let raw = root.join("raw");
    let prepared = root.join("prepared");
    let run = root.join("run");
    fs::create_dir_all(&run).map_err(|e| qagcl::Error::io(&run, e))?;

    // 1. Raw corpus on disk.
    let (qos, gu, gs) = synthetic::generate(&synthetic::SyntheticSpec::default())?;
    synthetic::write_raw_files(&raw, &qos, &gu, &gs)?;
    println!("1. raw files in {}", raw.display());

    // 2. Parse + prepare + persist the split.
    let qos = parse_qos_matrix(&raw.join(synthetic::RT_MATRIX_FILE))?;
    let geo_users = parse_geo_list(
        &raw.join(synthetic::USER_LIST_FILE),
        synthetic::USER_LAT_COL,
        synthetic::USER_LON_COL,
    )?;
    let geo_services = parse_geo_list(
        &raw.join(synthetic::WS_LIST_FILE),
        synthetic::WS_LAT_COL,
        synthetic::WS_LON_COL,
    )?;
    let params = PrepareParams {
        gamma: 0.05,
        core: 10,
        split_ratio: 0.2,
        seed: 42,
    };
    let ds = prepare(&qos, &geo_users, &geo_services, &params)?;
    write_prepared(&prepared, &ds)?;
    println!("2. prepared split in {} ({})", prepared.display(), dataset_hash(&prepared)?);

    // 3. Train and write the checkpoint plus loss history.
    let cfg = TrainConfig {
        layers: 2,
        embed_dim: 32,
        epochs: 40,
        batch_size: 512,
        lr: 5e-3,
        ..TrainConfig::default()
    };
    let ds = load_prepared(&prepared)?;
    let outcome = train(&ds, &cfg)?;
    let ckpt = run.join("checkpoint.txt");
    write_checkpoint(
        &ckpt,
        &outcome.state,
        &CheckpointMeta {
            seed: cfg.seed,
            config_hash: cfg.config_hash(),
            dataset_hash: dataset_hash(&prepared)?,
        },
    )?;
    let history = run.join("loss_history.csv");
    fs::write(&history, history_csv(&outcome.history)).map_err(|e| qagcl::Error::io(&history, e))?;
    println!(
        "3. {} epochs trained, checkpoint at {}",
        outcome.history.len(),
        ckpt.display()
    );

    // 4. Re-load the checkpoint and evaluate on the held-out split.
    let (state, meta) = read_checkpoint(&ckpt)?;
    assert_eq!(meta.dataset_hash, dataset_hash(&prepared)?);
    let main = build_normalized(ds.num_users, ds.num_services, &ds.train_edges)?;
    let finals = readout(&main, &state.e0, &state.layer_weights)?;
    let mut report = evaluate(&finals, &ds, &[10, 20])?;
    report.config_hash = meta.config_hash.clone();
    println!("4. evaluation:\n{}", report.table());

    // 5. Top-5 recommendations for one user, in original service ids.
    let user = 0;
    let scorer = EmbeddingScorer {
        finals: &finals,
        num_users: ds.num_users,
    };
    let train_index = ds.user_train_index();
    let top: Vec<usize> = rank_services(&scorer, ds.num_services, user, &train_index[user])
        .into_iter()
        .take(5)
        .map(|s| ds.service_map[s])
        .collect();
    println!(
        "5. top-5 unseen services for original user {}: {:?}",
        ds.user_map[user], top
    );

    fs::remove_dir_all(&root).ok();
    Ok(())
}
