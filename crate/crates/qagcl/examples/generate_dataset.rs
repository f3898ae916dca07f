//! Writes a synthetic WSDream-shaped corpus to disk.
//!
//! The output directory (default `data/synthetic`) ends up with the three
//! raw files the `prepare` command expects: `rtMatrix.txt`,
//! `userlist.txt`, and `wslist.txt`. Entities live in geographic clusters
//! and response time grows with user-service distance, so the corpus has
//! the structure the distance-based augmentation banks on.
//!
//! Run with: `cargo run --example generate_dataset [-- OUT_DIR [SEED]]`

use std::path::PathBuf;

use qagcl::synthetic::{generate, write_raw_files, SyntheticSpec};

fn main() -> qagcl::Result<()> {
    let mut args = std::env::args().skip(1);
    let out: PathBuf = args
        .next()
        .map(Into::into)
        .unwrap_or_else(|| "data/synthetic".into());
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);

    let spec = SyntheticSpec {
        seed,
        ..SyntheticSpec::default()
    };
    let (qos, geo_users, geo_services) = generate(&spec)?;
    write_raw_files(&out, &qos, &geo_users, &geo_services)?;

    let observed = (0..qos.num_users)
        .flat_map(|u| (0..qos.num_services).map(move |s| (u, s)))
        .filter(|&(u, s)| qos.get(u, s) >= 0.0)
        .count();
    println!(
        "wrote {} users x {} services to {} ({} observed invocations, seed {})",
        qos.num_users,
        qos.num_services,
        out.display(),
        observed,
        seed
    );
    println!("next: qagcl prepare --raw {} --out prepared", out.display());
    Ok(())
}
