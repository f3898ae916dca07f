//! Synthetic WSDream-shaped data for tests, examples, and offline runs.
//!
//! The generator plants geographic cluster structure: entities belong to
//! well-separated city clusters and response time grows with the
//! user-service great-circle distance, so thresholding recovers mostly
//! intra-cluster edges. That is exactly the signal the distance-based
//! augmentation is meant to exploit, which makes the synthetic corpus a
//! meaningful stand-in when the real dataset is absent.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::augment::haversine_km;
use crate::dataset::{GeoRecord, InteractionDataset, PrepareParams, QoSMatrix};
use crate::error::{Error, Result};

/// Well-separated anchor coordinates (pairwise ~3000 km or more apart).
const ANCHORS: [(f64, f64); 8] = [
    (37.77, -122.42),
    (48.86, 2.35),
    (-33.87, 151.21),
    (35.68, 139.69),
    (-23.55, -46.63),
    (28.61, 77.21),
    (-33.92, 18.42),
    (61.22, -149.90),
];

const BASE_RT: f64 = 0.012;
const DISTANCE_SLOPE: f64 = 0.5;
const HALF_CIRCUMFERENCE_KM: f64 = 20015.0;
const NOISE_STD: f64 = 0.01;

#[derive(Debug, Clone, Copy)]
pub struct SyntheticSpec {
    pub num_users: usize,
    pub num_services: usize,
    pub num_clusters: usize,
    /// Probability an invocation is unobserved (`-1.0` in the matrix).
    pub missing_rate: f64,
    /// Probability an entity's location is withheld from the side tables.
    pub invalid_geo_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_users: 60,
            num_services: 120,
            num_clusters: 4,
            missing_rate: 0.3,
            invalid_geo_rate: 0.05,
            seed: 7,
        }
    }
}

/// Generates a dense response-time matrix plus user/service geo tables.
///
/// Every entity has a true location near its cluster anchor; the returned
/// geo records hide it for an `invalid_geo_rate` fraction, mirroring the
/// `null` rows of the public side tables. Response times still follow the
/// hidden location, so invalid-geo entities behave like their cluster.
pub fn generate(spec: &SyntheticSpec) -> Result<(QoSMatrix, Vec<GeoRecord>, Vec<GeoRecord>)> {
    if spec.num_users == 0 || spec.num_services == 0 {
        return Err(Error::Config("synthetic dataset must be non-empty".into()));
    }
    if spec.num_clusters == 0 || spec.num_clusters > ANCHORS.len() {
        return Err(Error::Config(format!(
            "num_clusters must be in 1..={}",
            ANCHORS.len()
        )));
    }
    for (name, rate) in [
        ("missing_rate", spec.missing_rate),
        ("invalid_geo_rate", spec.invalid_geo_rate),
    ] {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Config(format!("{name} must be in [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, NOISE_STD).expect("constant std");

    let place = |count: usize, rng: &mut ChaCha8Rng| -> (Vec<(f64, f64)>, Vec<GeoRecord>) {
        let mut coords = Vec::with_capacity(count);
        let mut records = Vec::with_capacity(count);
        for id in 0..count {
            let (clat, clon) = ANCHORS[rng.random_range(0..spec.num_clusters)];
            let lat = clat + rng.random_range(-2.0..2.0);
            let lon = clon + rng.random_range(-2.0..2.0);
            coords.push((lat, lon));
            let published = rng.random::<f64>() >= spec.invalid_geo_rate;
            records.push(if published {
                GeoRecord {
                    entity_id: id,
                    latitude: lat,
                    longitude: lon,
                    valid: true,
                }
            } else {
                GeoRecord::invalid(id)
            });
        }
        (coords, records)
    };
    let (user_coords, geo_users) = place(spec.num_users, &mut rng);
    let (service_coords, geo_services) = place(spec.num_services, &mut rng);

    let mut values = Vec::with_capacity(spec.num_users * spec.num_services);
    for &(ulat, ulon) in &user_coords {
        for &(slat, slon) in &service_coords {
            if rng.random::<f64>() < spec.missing_rate {
                values.push(-1.0);
                continue;
            }
            let d = haversine_km(ulat, ulon, slat, slon);
            let rt = BASE_RT + DISTANCE_SLOPE * d / HALF_CIRCUMFERENCE_KM + noise.sample(&mut rng);
            values.push(rt.max(0.001));
        }
    }
    let qos = QoSMatrix::new(spec.num_users, spec.num_services, values)?;
    Ok((qos, geo_users, geo_services))
}

pub const RT_MATRIX_FILE: &str = "rtMatrix.txt";
pub const USER_LIST_FILE: &str = "userlist.txt";
pub const WS_LIST_FILE: &str = "wslist.txt";

/// Default zero-based geo columns of the side tables.
pub const USER_LAT_COL: usize = 5;
pub const USER_LON_COL: usize = 6;
pub const WS_LAT_COL: usize = 7;
pub const WS_LON_COL: usize = 8;

/// Writes the three raw files in the layout the `prepare` parser expects:
/// a whitespace-separated matrix and tab-separated side tables with one
/// header line, latitude/longitude in the standard column positions.
pub fn write_raw_files(
    dir: &Path,
    qos: &QoSMatrix,
    geo_users: &[GeoRecord],
    geo_services: &[GeoRecord],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut matrix = String::new();
    for u in 0..qos.num_users {
        let row: Vec<String> = (0..qos.num_services)
            .map(|s| qos.get(u, s).to_string())
            .collect();
        matrix.push_str(&row.join(" "));
        matrix.push('\n');
    }
    let rt_path = dir.join(RT_MATRIX_FILE);
    fs::write(&rt_path, matrix).map_err(|e| Error::io(&rt_path, e))?;

    let coord = |r: &GeoRecord, f: fn(&GeoRecord) -> f64| -> String {
        if r.valid {
            f(r).to_string()
        } else {
            "null".to_string()
        }
    };
    let mut users = String::from(
        "[User ID]\t[IP Address]\t[Country]\t[IP No.]\t[AS]\t[Latitude]\t[Longitude]\n",
    );
    for r in geo_users {
        users.push_str(&format!(
            "{}\t0.0.0.{}\tZZ\t{}\tAS0\t{}\t{}\n",
            r.entity_id,
            r.entity_id % 256,
            r.entity_id,
            coord(r, |r| r.latitude),
            coord(r, |r| r.longitude)
        ));
    }
    let user_path = dir.join(USER_LIST_FILE);
    fs::write(&user_path, users).map_err(|e| Error::io(&user_path, e))?;

    let mut services = String::from(
        "[Service ID]\t[WSDL Address]\t[Service Provider]\t[IP Address]\t[Country]\t[IP No.]\t[AS]\t[Latitude]\t[Longitude]\n",
    );
    for r in geo_services {
        services.push_str(&format!(
            "{}\thttp://svc{}.example/ws?wsdl\tprovider{}\t0.0.1.{}\tZZ\t{}\tAS1\t{}\t{}\n",
            r.entity_id,
            r.entity_id,
            r.entity_id % 7,
            r.entity_id % 256,
            r.entity_id,
            coord(r, |r| r.latitude),
            coord(r, |r| r.longitude)
        ));
    }
    let ws_path = dir.join(WS_LIST_FILE);
    fs::write(&ws_path, services).map_err(|e| Error::io(&ws_path, e))
}

/// Builds a tiny block-diagonal dataset directly, skipping the raw-file
/// pipeline: users and services split into aligned blocks, every in-block
/// pair interacts, and one in-block service per user is held out for test.
///
/// Recovering the held-out services is the planted-structure sanity check:
/// a sound trainer must rank a user's test service above every
/// out-of-block service.
pub fn planted_dataset(
    num_blocks: usize,
    users_per_block: usize,
    services_per_block: usize,
    seed: u64,
) -> Result<InteractionDataset> {
    if num_blocks == 0 || num_blocks > ANCHORS.len() {
        return Err(Error::Config(format!(
            "num_blocks must be in 1..={}",
            ANCHORS.len()
        )));
    }
    if users_per_block == 0 || services_per_block < 2 {
        return Err(Error::Config(
            "each block needs at least one user and two services".into(),
        ));
    }
    let num_users = num_blocks * users_per_block;
    let num_services = num_blocks * services_per_block;
    let mut train_edges = Vec::new();
    let mut train_qos = Vec::new();
    let mut test_edges = Vec::new();
    for u in 0..num_users {
        let b = u / users_per_block;
        let held_out = b * services_per_block + (u % services_per_block);
        for j in 0..services_per_block {
            let s = b * services_per_block + j;
            if s == held_out {
                test_edges.push((u, s));
            } else {
                train_edges.push((u, s));
                train_qos.push(0.02 + 0.001 * (j as f64));
            }
        }
    }
    let geo = |count: usize, per_block: usize, offset: f64| -> Vec<GeoRecord> {
        (0..count)
            .map(|id| {
                let (clat, clon) = ANCHORS[id / per_block];
                GeoRecord {
                    entity_id: id,
                    latitude: clat + offset + 0.01 * (id % per_block) as f64,
                    longitude: clon + offset,
                    valid: true,
                }
            })
            .collect()
    };
    Ok(InteractionDataset {
        num_users,
        num_services,
        user_map: (0..num_users).collect(),
        service_map: (0..num_services).collect(),
        train_edges,
        train_qos,
        test_edges,
        geo_users: geo(num_users, users_per_block, 0.0),
        geo_services: geo(num_services, services_per_block, 0.3),
        params: PrepareParams {
            gamma: 0.05,
            core: 1,
            split_ratio: 1.0 / services_per_block as f64,
            seed,
        },
    })
}

/// Training config under which the planted blocks are reliably recovered.
///
/// The elevated weight decay is load-bearing: with only eight services,
/// each user's held-out positive is drawn as a BPR negative roughly every
/// fifth triple, and at the default `lambda2` a long run has enough
/// capacity to memorize those pushes and bury the held-out service below
/// the out-of-block ones. Decay keeps the block-level signal dominant.
pub fn planted_config() -> crate::config::TrainConfig {
    crate::config::TrainConfig {
        layers: 2,
        embed_dim: 16,
        epochs: 200,
        batch_size: 24,
        lr: 0.05,
        lambda2: 1e-2,
        kappa: 1.0,
        ks: vec![1],
        ..crate::config::TrainConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_geo_list, parse_qos_matrix, prepare};

    #[test]
    fn generation_is_deterministic_per_seed() {
        let spec = SyntheticSpec {
            num_users: 10,
            num_services: 14,
            ..SyntheticSpec::default()
        };
        let (a, _, _) = generate(&spec).unwrap();
        let (b, _, _) = generate(&spec).unwrap();
        assert_eq!(a.values(), b.values());
        let (c, _, _) = generate(&SyntheticSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn clusters_separate_response_times() {
        let spec = SyntheticSpec {
            num_users: 30,
            num_services: 60,
            missing_rate: 0.0,
            invalid_geo_rate: 0.0,
            ..SyntheticSpec::default()
        };
        let (qos, gu, gs) = generate(&spec).unwrap();
        let near = |a: &GeoRecord, c: (f64, f64)| haversine_km(a.latitude, a.longitude, c.0, c.1) < 500.0;
        let cluster_of = |r: &GeoRecord| ANCHORS.iter().position(|&c| near(r, c)).unwrap();
        let (mut same, mut cross) = (Vec::new(), Vec::new());
        for (u, gu) in gu.iter().enumerate() {
            for (s, gs) in gs.iter().enumerate() {
                let rt = qos.get(u, s);
                if cluster_of(gu) == cluster_of(gs) {
                    same.push(rt);
                } else {
                    cross.push(rt);
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&same) + 0.02 < mean(&cross), "clusters must drive rt");
        // The default threshold keeps mostly intra-cluster edges.
        let kept_cross = cross.iter().filter(|&&rt| rt < 0.05).count();
        assert!((kept_cross as f64) < 0.05 * cross.len() as f64);
        let kept_same = same.iter().filter(|&&rt| rt < 0.05).count();
        assert!((kept_same as f64) > 0.5 * same.len() as f64);
    }

    #[test]
    fn raw_files_round_trip_through_the_parsers() {
        let spec = SyntheticSpec {
            num_users: 8,
            num_services: 11,
            invalid_geo_rate: 0.3,
            ..SyntheticSpec::default()
        };
        let (qos, gu, gs) = generate(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_raw_files(dir.path(), &qos, &gu, &gs).unwrap();
        let qos2 = parse_qos_matrix(&dir.path().join(RT_MATRIX_FILE)).unwrap();
        assert_eq!(qos.values(), qos2.values());
        let gu2 = parse_geo_list(&dir.path().join(USER_LIST_FILE), USER_LAT_COL, USER_LON_COL)
            .unwrap();
        let gs2 =
            parse_geo_list(&dir.path().join(WS_LIST_FILE), WS_LAT_COL, WS_LON_COL).unwrap();
        assert!(gu2.iter().any(|r| !r.valid), "seeded invalids must appear");
        for (a, b) in gu.iter().zip(&gu2).chain(gs.iter().zip(&gs2)) {
            assert_eq!(a.valid, b.valid);
            if a.valid {
                assert_eq!((a.latitude, a.longitude), (b.latitude, b.longitude));
            }
        }
    }

    #[test]
    fn synthetic_corpus_survives_default_preparation() {
        let (qos, gu, gs) = generate(&SyntheticSpec::default()).unwrap();
        let params = PrepareParams {
            gamma: 0.05,
            core: 10,
            split_ratio: 0.2,
            seed: 3,
        };
        let ds = prepare(&qos, &gu, &gs, &params).unwrap();
        assert!(ds.num_users >= 30, "{} users survived", ds.num_users);
        assert!(ds.num_services >= 30);
        assert!(!ds.test_edges.is_empty());
    }

    #[test]
    fn planted_blocks_are_block_diagonal_with_one_holdout() {
        let ds = planted_dataset(2, 4, 4, 1).unwrap();
        assert_eq!((ds.num_users, ds.num_services), (8, 8));
        assert_eq!(ds.train_edges.len(), 8 * 3);
        assert_eq!(ds.test_edges.len(), 8);
        let block = |u: usize, s: usize| u / 4 == s / 4;
        assert!(ds.train_edges.iter().all(|&(u, s)| block(u, s)));
        assert!(ds.test_edges.iter().all(|&(u, s)| block(u, s)));
        for &(u, s) in &ds.test_edges {
            assert!(!ds.train_edges.contains(&(u, s)));
            let _ = (u, s);
        }
        let mut sorted = ds.train_edges.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, ds.train_edges, "edges must come out sorted");
        assert!(ds.geo_users.iter().all(|r| r.valid));
        assert!(planted_dataset(1, 1, 1, 0).is_err());
    }
}
