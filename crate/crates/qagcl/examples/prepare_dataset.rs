//! Parses a raw corpus and walks it through the preparation pipeline at
//! three threshold/filter settings, printing what each step keeps.
//!
//! Run with: `cargo run --example prepare_dataset [-- RAW_DIR]`
//! (generates a synthetic corpus in a temp dir when RAW_DIR is omitted).

use std::path::PathBuf;

use qagcl::dataset::{binarize, core_filter, parse_geo_list, parse_qos_matrix, prepare, PrepareParams};
use qagcl::synthetic;

fn main() -> qagcl::Result<()> {
    let tmp = tempdir()?;
    let raw: PathBuf = match std::env::args().nth(1) {
        Some(dir) => dir.into(),
        None => {
            let spec = synthetic::SyntheticSpec::default();
            let (qos, gu, gs) = synthetic::generate(&spec)?;
            synthetic::write_raw_files(&tmp, &qos, &gu, &gs)?;
            println!("no RAW_DIR given; generated a synthetic corpus in {}\n", tmp.display());
            tmp.clone()
        }
    };

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
    println!(
        "raw matrix: {} users x {} services; {} users and {} services carry coordinates",
        qos.num_users,
        qos.num_services,
        geo_users.iter().filter(|r| r.valid).count(),
        geo_services.iter().filter(|r| r.valid).count(),
    );

    // The three dataset variants differ only in threshold and core filter.
    for (label, gamma, core) in [
        ("warm-start   ", 0.05, 10),
        ("cold-start   ", 0.02, 2),
        ("cold-start-ex", 0.01, 2),
    ] {
        let edges = binarize(&qos, gamma)?;
        let filtered = core_filter(&edges, core);
        let params = PrepareParams {
            gamma,
            core,
            split_ratio: 0.2,
            seed: 42,
        };
        match prepare(&qos, &geo_users, &geo_services, &params) {
            Ok(ds) => println!(
                "{label} gamma={gamma:<5} core={core:>2}: {} raw edges -> {} users, {} services, \
                 {} train + {} test, density {:.2}%",
                edges.len(),
                ds.num_users,
                ds.num_services,
                ds.train_edges.len(),
                ds.test_edges.len(),
                100.0 * ds.density()
            ),
            Err(e) => println!(
                "{label} gamma={gamma:<5} core={core:>2}: {} raw edges, {} after filtering; {e}",
                edges.len(),
                filtered.edges.len()
            ),
        }
    }
    std::fs::remove_dir_all(&tmp).ok();
    Ok(())
}

fn tempdir() -> qagcl::Result<PathBuf> {
    let dir = std::env::temp_dir().join(format!("qagcl-prepare-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| qagcl::Error::io(&dir, e))?;
    Ok(dir)
}
