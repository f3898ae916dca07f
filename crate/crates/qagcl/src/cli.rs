//! Command-line entry point: `prepare`, `train`, `evaluate`, `recommend`,
//! `ablate`, `sweep-layers`.
//!
//! Config resolution is flag > file > default. A `--model` preset (from
//! flag or file) is applied between the file and the explicit flags, so a
//! flag can still override what the preset pinned. Every command writes a
//! run manifest next to its artifacts; `--deterministic` drops the
//! manifest timestamps so identical runs are byte-identical.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 missing input,
//! 3 non-finite loss, 4 stale checkpoint, 5 unknown user.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::augment::{write_mask_file, AugOp};
use crate::config::{parse_config_file, parse_u64_list, parse_usize_list, ModelKind, TrainConfig};
use crate::dataset::{
    self, dataset_hash, load_prepared, parse_geo_list, parse_qos_matrix, prepare, write_prepared,
    InteractionDataset, PrepareParams,
};
use crate::encoder::{read_checkpoint, readout, write_checkpoint, CheckpointMeta};
use crate::error::{Error, Result};
use crate::eval::{
    baseline_scores, evaluate_scorer, rank_services, EmbeddingScorer, MetricsReport, Scorer,
    METRICS_CSV_HEADER,
};
use crate::experiments::{
    ablation_csv, ablation_markdown, run_ablation, run_layer_sweep, sweep_csv, sweep_markdown,
};
use crate::graph::build_normalized;
use crate::manifest::{file_hash, RunManifest};
use crate::synthetic::{
    RT_MATRIX_FILE, USER_LAT_COL, USER_LIST_FILE, USER_LON_COL, WS_LAT_COL, WS_LIST_FILE,
    WS_LON_COL,
};
use crate::training;

#[derive(Parser, Debug)]
#[command(
    name = "qagcl",
    version,
    about = "QoS-aware graph contrastive recommendation over WSDream-style data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Threshold, core-filter, and split a raw dataset directory.
    Prepare(PrepareArgs),
    /// Train a model on a prepared dataset and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint (or a mean baseline) on the held-out split.
    Evaluate(EvaluateArgs),
    /// Print the top-K unseen services for one user.
    Recommend(RecommendArgs),
    /// Compare augmentation-operator pairs on one prepared dataset.
    Ablate(AblateArgs),
    /// Train once per propagation depth and tabulate all metrics.
    SweepLayers(SweepLayersArgs),
}

/// Flags shared by every subcommand: config sourcing plus one override
/// flag per config key.
#[derive(Args, Debug, Clone, Default)]
pub struct CommonOpts {
    /// Flat `key = value` config file; unknown keys are errors.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master RNG seed; overrides the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (command-specific default).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Omit manifest timestamps so re-runs are byte-identical.
    #[arg(long)]
    pub deterministic: bool,
    /// Model preset: qagcl, lightgcn, bprmf, umean, imean.
    #[arg(long)]
    pub model: Option<String>,

    /// Response-time threshold in seconds.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Minimum interactions per user kept by core filtering.
    #[arg(long)]
    pub core: Option<usize>,
    /// Held-out fraction of each user's positives.
    #[arg(long)]
    pub split_ratio: Option<f64>,
    /// Propagation depth L.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Embedding width D.
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// InfoNCE temperature.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Contrastive loss weight.
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// L2 weight on batch-touched embedding rows.
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Distance cutoff for the HD view, fraction of the longest edge.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Dropout rate for ED and ND views.
    #[arg(long)]
    pub rho: Option<f64>,
    /// First augmentation operator: hd, ed, or nd.
    #[arg(long)]
    pub aug_a: Option<String>,
    /// Second augmentation operator: hd, ed, or nd.
    #[arg(long)]
    pub aug_b: Option<String>,
    /// Rebuild stochastic masks every epoch (true/false).
    #[arg(long, value_name = "BOOL")]
    pub resample_ed_per_epoch: Option<bool>,
    /// Pool users and services into one contrast set (true/false).
    #[arg(long, value_name = "BOOL")]
    pub infonce_mixed: Option<bool>,
    /// Comma-separated evaluation cutoffs, e.g. 20,40.
    #[arg(long, value_name = "LIST")]
    pub ks: Option<String>,
}

/// Fully resolved run settings after file, preset, and flag layering.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: TrainConfig,
    pub model: ModelKind,
    pub name: Option<String>,
    pub seeds: Vec<u64>,
    pub config_path: Option<PathBuf>,
    pub deterministic: bool,
}

impl CommonOpts {
    pub fn resolve(&self) -> Result<Resolved> {
        let mut config = TrainConfig::default();
        let mut name = None;
        let mut model = ModelKind::Qagcl;
        let mut seeds = None;
        if let Some(path) = &self.config {
            let file = parse_config_file(path)?;
            config = file.config;
            name = file.name;
            if let Some(m) = file.model {
                model = m;
            }
            seeds = file.seeds;
        }
        if let Some(m) = &self.model {
            model = m.parse()?;
        }
        config.apply_model_preset(model);
        macro_rules! flag {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { config.$field = v; })*
            };
        }
        flag!(
            gamma, core, split_ratio, layers, embed_dim, lr, epochs, batch_size, tau, lambda1,
            lambda2, kappa, rho, resample_ed_per_epoch, infonce_mixed
        );
        if let Some(v) = &self.aug_a {
            config.aug_a = v.parse()?;
        }
        if let Some(v) = &self.aug_b {
            config.aug_b = v.parse()?;
        }
        if let Some(v) = &self.ks {
            config.ks =
                parse_usize_list(v).ok_or_else(|| Error::Config(format!("bad ks list {v:?}")))?;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        config.validate()?;
        let seeds = seeds.unwrap_or_else(|| vec![config.seed]);
        Ok(Resolved {
            config,
            model,
            name,
            seeds,
            config_path: self.config.clone(),
            deterministic: self.deterministic,
        })
    }
}

#[derive(Args, Debug)]
pub struct PrepareArgs {
    /// Directory holding rtMatrix.txt, userlist.txt, and wslist.txt.
    #[arg(long, value_name = "DIR")]
    pub raw: PathBuf,
    /// Override the response-time matrix path.
    #[arg(long, value_name = "FILE")]
    pub rt_matrix: Option<PathBuf>,
    /// Override the user side-table path.
    #[arg(long, value_name = "FILE")]
    pub user_list: Option<PathBuf>,
    /// Override the service side-table path.
    #[arg(long, value_name = "FILE")]
    pub ws_list: Option<PathBuf>,
    /// Zero-based latitude column of the user table.
    #[arg(long, default_value_t = USER_LAT_COL)]
    pub user_lat_col: usize,
    /// Zero-based longitude column of the user table.
    #[arg(long, default_value_t = USER_LON_COL)]
    pub user_lon_col: usize,
    /// Zero-based latitude column of the service table.
    #[arg(long, default_value_t = WS_LAT_COL)]
    pub ws_lat_col: usize,
    /// Zero-based longitude column of the service table.
    #[arg(long, default_value_t = WS_LON_COL)]
    pub ws_lon_col: usize,
    #[command(flatten)]
    pub opts: CommonOpts,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory written by `prepare`.
    #[arg(long, value_name = "DIR")]
    pub prepared: PathBuf,
    #[command(flatten)]
    pub opts: CommonOpts,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Checkpoint written by `train`; required unless --baseline is given.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Directory written by `prepare`.
    #[arg(long, value_name = "DIR")]
    pub prepared: PathBuf,
    /// Training-free baseline to score instead: umean or imean.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Dataset label for the CSV rows; defaults to the prepared dir name.
    #[arg(long, value_name = "NAME")]
    pub dataset_name: Option<String>,
    #[command(flatten)]
    pub opts: CommonOpts,
}

#[derive(Args, Debug)]
pub struct RecommendArgs {
    /// Checkpoint written by `train`.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Directory written by `prepare`.
    #[arg(long, value_name = "DIR")]
    pub prepared: PathBuf,
    /// Original (raw-matrix) user row index.
    #[arg(long)]
    pub user: usize,
    /// Number of services to print.
    #[arg(short, long, default_value_t = 10)]
    pub k: usize,
    #[command(flatten)]
    pub opts: CommonOpts,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    /// Directory written by `prepare`.
    #[arg(long, value_name = "DIR")]
    pub prepared: PathBuf,
    /// Comma-separated operator pairs, each `a-b` with ops hd/ed/nd.
    #[arg(long, default_value = "hd-ed,hd-nd,ed-ed", value_name = "PAIRS")]
    pub pairs: String,
    /// Comma-separated seed list; defaults to the resolved seed(s).
    #[arg(long, value_name = "LIST")]
    pub seeds: Option<String>,
    #[command(flatten)]
    pub opts: CommonOpts,
}

#[derive(Args, Debug)]
pub struct SweepLayersArgs {
    /// Directory written by `prepare`.
    #[arg(long, value_name = "DIR")]
    pub prepared: PathBuf,
    /// Comma-separated propagation depths to train.
    #[arg(long, default_value = "1,2,3,4", value_name = "LIST")]
    pub sweep: String,
    /// Comma-separated seed list; defaults to the resolved seed(s).
    #[arg(long, value_name = "LIST")]
    pub seeds: Option<String>,
    #[command(flatten)]
    pub opts: CommonOpts,
}

/// Parses args, dispatches, and maps any error onto the exit-code table.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Prepare(args) => {
            let summary = cmd_prepare(&args)?.summary();
            print!("{summary}");
            Ok(())
        }
        Command::Train(args) => {
            let (outcome, out_dir) = cmd_train(&args)?;
            let last = outcome.history.last();
            match last {
                Some(e) => println!(
                    "trained {} epochs{}; final loss {:.6}",
                    outcome.history.len(),
                    if outcome.stopped_early {
                        " (stopped early)"
                    } else {
                        ""
                    },
                    e.total
                ),
                None => println!("trained 0 epochs; checkpoint equals initialization"),
            }
            println!("checkpoint: {}", out_dir.join(CHECKPOINT_FILE).display());
            Ok(())
        }
        Command::Evaluate(args) => {
            let (report, _) = cmd_evaluate(&args)?;
            print!("{}", report.table());
            Ok(())
        }
        Command::Recommend(args) => {
            for (rank, service, score) in cmd_recommend(&args)? {
                println!("{rank}\t{service}\t{score}");
            }
            Ok(())
        }
        Command::Ablate(args) => {
            let (rows, k) = cmd_ablate(&args)?;
            print!("{}", ablation_markdown(&rows, k));
            Ok(())
        }
        Command::SweepLayers(args) => {
            let rows = cmd_sweep_layers(&args)?;
            print!("{}", sweep_markdown(&rows));
            Ok(())
        }
    }
}

pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const LOSS_HISTORY_FILE: &str = "loss_history.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const METRICS_TABLE_FILE: &str = "metrics.txt";
pub const METRICS_CSV_FILE: &str = "metrics.csv";
pub const MASK_A_FILE: &str = "mask_a.tsv";
pub const MASK_B_FILE: &str = "mask_b.tsv";
pub const ABLATION_CSV_FILE: &str = "ablation.csv";
pub const ABLATION_MD_FILE: &str = "ablation.md";
pub const SWEEP_CSV_FILE: &str = "sweep.csv";
pub const SWEEP_MD_FILE: &str = "sweep.md";

fn out_dir(opts: &CommonOpts, default: &str) -> Result<PathBuf> {
    let dir = opts
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(default));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write_artifact(dir: &Path, name: &str, body: &str, manifest: &mut RunManifest) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    manifest.output(&path);
    Ok(())
}

pub fn cmd_prepare(args: &PrepareArgs) -> Result<InteractionDataset> {
    let resolved = args.opts.resolve()?;
    let dir = out_dir(&args.opts, "prepared")?;
    let pick = |explicit: &Option<PathBuf>, name: &str| -> PathBuf {
        explicit.clone().unwrap_or_else(|| args.raw.join(name))
    };
    let rt_path = pick(&args.rt_matrix, RT_MATRIX_FILE);
    let user_path = pick(&args.user_list, USER_LIST_FILE);
    let ws_path = pick(&args.ws_list, WS_LIST_FILE);

    let mut manifest = RunManifest::start("prepare", resolved.deterministic);
    manifest.config_path = resolved.config_path.clone();
    manifest.resolved_config = resolved.config.canonical_lines();
    for (label, path) in [
        ("rt_matrix", &rt_path),
        ("user_list", &user_path),
        ("ws_list", &ws_path),
    ] {
        manifest.input(label, file_hash(path)?);
    }

    let qos = parse_qos_matrix(&rt_path)?;
    let geo_users = parse_geo_list(&user_path, args.user_lat_col, args.user_lon_col)?;
    let geo_services = parse_geo_list(&ws_path, args.ws_lat_col, args.ws_lon_col)?;
    let params = PrepareParams {
        gamma: resolved.config.gamma,
        core: resolved.config.core,
        split_ratio: resolved.config.split_ratio,
        seed: resolved.config.seed,
    };
    let ds = prepare(&qos, &geo_users, &geo_services, &params)?;
    write_prepared(&dir, &ds)?;
    for name in [
        dataset::SPLIT_FILE,
        dataset::QOS_FILE,
        dataset::USER_MAP_FILE,
        dataset::SERVICE_MAP_FILE,
        dataset::GEO_USERS_FILE,
        dataset::GEO_SERVICES_FILE,
        dataset::META_FILE,
        dataset::SUMMARY_FILE,
    ] {
        manifest.output(&dir.join(name));
    }
    manifest.finish(&dir.join(MANIFEST_FILE))?;
    Ok(ds)
}

pub fn cmd_train(args: &TrainArgs) -> Result<(training::TrainOutcome, PathBuf)> {
    let resolved = args.opts.resolve()?;
    if !resolved.model.is_trained() {
        return Err(Error::Config(format!(
            "model {} has no training phase; evaluate it directly with `evaluate --baseline {}`",
            resolved.model, resolved.model
        )));
    }
    let dir = out_dir(&args.opts, "run")?;
    let ds = load_prepared(&args.prepared)?;
    let split_hash = dataset_hash(&args.prepared)?;

    let mut manifest = RunManifest::start("train", resolved.deterministic);
    manifest.config_path = resolved.config_path.clone();
    manifest.resolved_config = resolved.config.canonical_lines();
    manifest.input("split.tsv", split_hash.clone());

    let outcome = training::train(&ds, &resolved.config)?;
    let meta = CheckpointMeta {
        seed: resolved.config.seed,
        config_hash: resolved.config.config_hash(),
        dataset_hash: split_hash,
    };
    let ckpt_path = dir.join(CHECKPOINT_FILE);
    write_checkpoint(&ckpt_path, &outcome.state, &meta)?;
    manifest.output(&ckpt_path);
    write_artifact(
        &dir,
        LOSS_HISTORY_FILE,
        &training::history_csv(&outcome.history),
        &mut manifest,
    )?;
    // Masks as built for the first epoch; resampling mode re-derives
    // per-epoch masks from the recorded seed.
    let views = training::build_views(&ds, &resolved.config)?;
    let mask_a_path = dir.join(MASK_A_FILE);
    write_mask_file(&mask_a_path, &ds.train_edges, &views.mask_a)?;
    manifest.output(&mask_a_path);
    let mask_b_path = dir.join(MASK_B_FILE);
    write_mask_file(&mask_b_path, &ds.train_edges, &views.mask_b)?;
    manifest.output(&mask_b_path);
    manifest.finish(&dir.join(MANIFEST_FILE))?;
    Ok((outcome, dir))
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(MetricsReport, PathBuf)> {
    let resolved = args.opts.resolve()?;
    let dir = out_dir(&args.opts, "eval")?;
    let ds = load_prepared(&args.prepared)?;
    let split_hash = dataset_hash(&args.prepared)?;
    let dataset_label = args.dataset_name.clone().unwrap_or_else(|| {
        args.prepared
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });

    let mut manifest = RunManifest::start("evaluate", resolved.deterministic);
    manifest.config_path = resolved.config_path.clone();
    manifest.resolved_config = resolved.config.canonical_lines();
    manifest.input("split.tsv", split_hash.clone());

    let (mut report, model_label, seed) = if let Some(kind) = &args.baseline {
        let kind: ModelKind = kind.parse()?;
        if kind.is_trained() {
            return Err(Error::Config(format!(
                "baseline {kind} needs training; run `train --model {kind}` and evaluate its checkpoint"
            )));
        }
        let scorer = baseline_scores(kind, &ds, &resolved.config)?;
        let mut report = evaluate_scorer(scorer.as_ref(), &ds, &resolved.config.ks)?;
        report.config_hash = resolved.config.config_hash();
        (report, kind.to_string(), resolved.config.seed)
    } else {
        let ckpt_path = args.checkpoint.as_ref().ok_or_else(|| {
            Error::Config("evaluate needs --checkpoint or --baseline".into())
        })?;
        let (state, meta) = read_checkpoint(ckpt_path)?;
        manifest.input("checkpoint", file_hash(ckpt_path)?);
        if meta.dataset_hash != split_hash {
            return Err(Error::StaleCheckpoint {
                field: "dataset_hash",
                expected: split_hash,
                found: meta.dataset_hash,
            });
        }
        let nodes = ds.num_users + ds.num_services;
        if state.num_nodes() != nodes {
            return Err(Error::StaleCheckpoint {
                field: "nodes",
                expected: nodes.to_string(),
                found: state.num_nodes().to_string(),
            });
        }
        // Only enforce config lineage when the caller pinned a config;
        // bare evaluation may legitimately change eval-time keys like ks.
        if args.opts.config.is_some() {
            let want = resolved.config.config_hash();
            if meta.config_hash != want {
                return Err(Error::StaleCheckpoint {
                    field: "config_hash",
                    expected: want,
                    found: meta.config_hash,
                });
            }
        }
        let main = build_normalized(ds.num_users, ds.num_services, &ds.train_edges)?;
        let finals = readout(&main, &state.e0, &state.layer_weights)?;
        let scorer = EmbeddingScorer {
            finals: &finals,
            num_users: ds.num_users,
        };
        let mut report = evaluate_scorer(&scorer, &ds, &resolved.config.ks)?;
        report.config_hash = meta.config_hash.clone();
        (report, resolved.model.to_string(), meta.seed)
    };
    report.wall_secs = if resolved.deterministic {
        0.0
    } else {
        report.wall_secs
    };

    write_artifact(&dir, METRICS_TABLE_FILE, &report.table(), &mut manifest)?;
    let csv = format!(
        "{}{}",
        METRICS_CSV_HEADER,
        report.csv_rows(&model_label, &dataset_label, seed)
    );
    write_artifact(&dir, METRICS_CSV_FILE, &csv, &mut manifest)?;
    manifest.finish(&dir.join(MANIFEST_FILE))?;
    Ok((report, dir))
}

/// Ranks one user's unseen services. Takes and returns original raw-matrix
/// ids; the prepared id maps translate in both directions.
pub fn cmd_recommend(args: &RecommendArgs) -> Result<Vec<(usize, usize, f64)>> {
    if args.k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let ds = load_prepared(&args.prepared)?;
    let (state, meta) = read_checkpoint(&args.checkpoint)?;
    let split_hash = dataset_hash(&args.prepared)?;
    if meta.dataset_hash != split_hash {
        return Err(Error::StaleCheckpoint {
            field: "dataset_hash",
            expected: split_hash,
            found: meta.dataset_hash,
        });
    }
    let local_user = ds
        .user_map
        .iter()
        .position(|&orig| orig == args.user)
        .ok_or(Error::UnknownUser {
            user: args.user,
            num_users: ds.num_users,
        })?;
    let main = build_normalized(ds.num_users, ds.num_services, &ds.train_edges)?;
    let finals = readout(&main, &state.e0, &state.layer_weights)?;
    let scorer = EmbeddingScorer {
        finals: &finals,
        num_users: ds.num_users,
    };
    let train_index = ds.user_train_index();
    let ranked = rank_services(
        &scorer,
        ds.num_services,
        local_user,
        &train_index[local_user],
    );
    Ok(ranked
        .into_iter()
        .take(args.k)
        .enumerate()
        .map(|(i, s)| (i + 1, ds.service_map[s], scorer.score(local_user, s)))
        .collect())
}

/// Parses `a-b` (or `a&b`) comma-separated operator pairs.
pub fn parse_pairs(raw: &str) -> Result<Vec<(AugOp, AugOp)>> {
    raw.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let (a, b) = tok
                .split_once(['-', '&'])
                .ok_or_else(|| Error::Config(format!("bad pair {tok:?}, expected like hd-ed")))?;
            Ok((a.trim().parse()?, b.trim().parse()?))
        })
        .collect()
}

fn resolve_seeds(flag: &Option<String>, resolved: &Resolved) -> Result<Vec<u64>> {
    match flag {
        Some(raw) => parse_u64_list(raw)
            .ok_or_else(|| Error::Config(format!("bad seed list {raw:?}"))),
        None => Ok(resolved.seeds.clone()),
    }
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<(Vec<crate::experiments::AblationRow>, usize)> {
    let resolved = args.opts.resolve()?;
    let dir = out_dir(&args.opts, "ablation")?;
    let ds = load_prepared(&args.prepared)?;
    let pairs = parse_pairs(&args.pairs)?;
    let seeds = resolve_seeds(&args.seeds, &resolved)?;
    let k = resolved.config.ks[0];

    let mut manifest = RunManifest::start("ablate", resolved.deterministic);
    manifest.config_path = resolved.config_path.clone();
    manifest.resolved_config = resolved.config.canonical_lines();
    manifest.input("split.tsv", dataset_hash(&args.prepared)?);

    let rows = run_ablation(&ds, &pairs, &resolved.config, &seeds, k)?;
    write_artifact(&dir, ABLATION_CSV_FILE, &ablation_csv(&rows, k), &mut manifest)?;
    write_artifact(
        &dir,
        ABLATION_MD_FILE,
        &ablation_markdown(&rows, k),
        &mut manifest,
    )?;
    manifest.finish(&dir.join(MANIFEST_FILE))?;
    Ok((rows, k))
}

pub fn cmd_sweep_layers(args: &SweepLayersArgs) -> Result<Vec<crate::experiments::SweepRow>> {
    let resolved = args.opts.resolve()?;
    let dir = out_dir(&args.opts, "sweep")?;
    let ds = load_prepared(&args.prepared)?;
    let layer_counts = parse_usize_list(&args.sweep)
        .ok_or_else(|| Error::Config(format!("bad layer list {:?}", args.sweep)))?;
    let seeds = resolve_seeds(&args.seeds, &resolved)?;

    let mut manifest = RunManifest::start("sweep-layers", resolved.deterministic);
    manifest.config_path = resolved.config_path.clone();
    manifest.resolved_config = resolved.config.canonical_lines();
    manifest.input("split.tsv", dataset_hash(&args.prepared)?);

    let rows = run_layer_sweep(&ds, &layer_counts, &resolved.config, &seeds)?;
    write_artifact(&dir, SWEEP_CSV_FILE, &sweep_csv(&rows), &mut manifest)?;
    write_artifact(&dir, SWEEP_MD_FILE, &sweep_markdown(&rows), &mut manifest)?;
    manifest.finish(&dir.join(MANIFEST_FILE))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn precedence_is_flag_over_file_over_default() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "tau = 0.1\nlayers = 2\nseed = 5").unwrap();
        let opts = CommonOpts {
            config: Some(f.path().to_path_buf()),
            tau: Some(0.4),
            ..CommonOpts::default()
        };
        let r = opts.resolve().unwrap();
        assert_eq!(r.config.tau, 0.4, "flag wins");
        assert_eq!(r.config.layers, 2, "file wins over default");
        assert_eq!(r.config.gamma, 0.05, "default survives");
        assert_eq!(r.seeds, vec![5], "seed list defaults to the seed");
    }

    #[test]
    fn model_preset_applies_between_file_and_flags() {
        let opts = CommonOpts {
            model: Some("lightgcn".into()),
            lambda1: Some(0.25),
            ..CommonOpts::default()
        };
        let r = opts.resolve().unwrap();
        assert_eq!(r.model, ModelKind::LightGcn);
        // Preset pinned kappa and rho, but the explicit flag reopens lambda1.
        assert_eq!(r.config.kappa, 1.0);
        assert_eq!(r.config.rho, 0.0);
        assert_eq!(r.config.lambda1, 0.25);
    }

    #[test]
    fn file_model_is_overridden_by_flag() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "model = bprmf\nseeds = 1,2").unwrap();
        let opts = CommonOpts {
            config: Some(f.path().to_path_buf()),
            model: Some("qagcl".into()),
            ..CommonOpts::default()
        };
        let r = opts.resolve().unwrap();
        assert_eq!(r.model, ModelKind::Qagcl);
        assert_eq!(r.config.layers, TrainConfig::default().layers);
        assert_eq!(r.seeds, vec![1, 2]);
    }

    #[test]
    fn resolve_validates_the_merged_config() {
        let opts = CommonOpts {
            rho: Some(1.0),
            ..CommonOpts::default()
        };
        assert!(opts.resolve().is_err());
    }

    #[test]
    fn pair_lists_parse_both_separator_styles() {
        let pairs = parse_pairs("hd-ed, HD&ND,ed-ed").unwrap();
        assert_eq!(
            pairs,
            vec![
                (AugOp::Hd, AugOp::Ed),
                (AugOp::Hd, AugOp::Nd),
                (AugOp::Ed, AugOp::Ed)
            ]
        );
        assert!(parse_pairs("hd").is_err());
        assert!(parse_pairs("hd-xx").is_err());
    }

    #[test]
    fn cli_help_parses_for_every_subcommand() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
