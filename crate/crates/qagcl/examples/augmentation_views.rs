//! Builds the three augmentation masks over one synthetic train split and
//! prints what each keeps.
//!
//! HD is deterministic (distance cutoff), ED and ND are seeded dropout.
//! The mask files written at the end round-trip through the same reader
//! the training pipeline uses.
//!
//! Run with: `cargo run --example augmentation_views`

use qagcl::augment::{apply_mask, make_mask, read_mask_file, write_mask_file, AugOp};
use qagcl::dataset::{prepare, PrepareParams};
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
    let m = ds.train_edges.len();
    println!(
        "train split: {} users, {} services, {m} edges\n",
        ds.num_users, ds.num_services
    );

    println!("{:<28} {:>8} {:>8}", "mask", "kept", "dropped");
    for (op, kappa, rho) in [
        (AugOp::Hd, 0.3, 0.0),
        (AugOp::Hd, 0.05, 0.0),
        (AugOp::Ed, 0.0, 0.2),
        (AugOp::Ed, 0.0, 0.5),
        (AugOp::Nd, 0.0, 0.2),
    ] {
        let mask = make_mask(
            op,
            &ds.train_edges,
            &ds.geo_users,
            &ds.geo_services,
            ds.num_users,
            ds.num_services,
            kappa,
            rho,
            7,
        )?;
        let label = match op {
            AugOp::Hd => format!("{op} kappa={kappa}"),
            _ => format!("{op} rho={rho} seed=7"),
        };
        println!(
            "{label:<28} {:>8} {:>8}",
            mask.kept_count(),
            m - mask.kept_count()
        );
    }

    // ED drops exactly floor(rho * m) edges; the kept list stays sorted.
    let mask = make_mask(
        AugOp::Ed,
        &ds.train_edges,
        &ds.geo_users,
        &ds.geo_services,
        ds.num_users,
        ds.num_services,
        0.3,
        0.3,
        7,
    )?;
    let kept = apply_mask(&ds.train_edges, &mask)?;
    assert_eq!(kept.len(), m - (0.3 * m as f64).floor() as usize);
    assert!(kept.windows(2).all(|w| w[0] < w[1]));

    let path = std::env::temp_dir().join("qagcl-example-mask.tsv");
    write_mask_file(&path, &ds.train_edges, &mask)?;
    let (op, param, seed, edges) = read_mask_file(&path)?;
    println!(
        "\nwrote and re-read {}: op={op} param={param} seed={:?}, {} surviving edges",
        path.display(),
        seed,
        edges.len()
    );
    assert_eq!(edges, kept);
    std::fs::remove_file(&path).ok();
    Ok(())
}
