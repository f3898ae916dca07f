//! Structure augmentation: distance-based and stochastic edge masks.
//!
//! Each operator produces an [`AugmentationMask`] aligned with a fixed edge
//! list. HD keeps an edge when the great-circle distance between its
//! endpoints, normalized by the longest observed link, stays at or below a
//! cutoff; edges with unknown coordinates are always kept. ED drops a fixed
//! fraction of edges uniformly at random, ND drops a fraction of nodes and
//! removes every edge touching them. HD is deterministic, ED and ND are
//! pure functions of their seed.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::GeoRecord;
use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Great-circle distance in kilometers on a sphere of radius
/// [`EARTH_RADIUS_KM`], via the haversine formula. The arcsine argument is
/// clamped into [0, 1] so antipodal round-off cannot produce NaN.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let p1 = lat1.to_radians();
    let p2 = lat2.to_radians();
    let half_dlat = (lat2 - lat1).to_radians() / 2.0;
    let half_dlon = (lon2 - lon1).to_radians() / 2.0;
    let h = half_dlat.sin().powi(2) + p1.cos() * p2.cos() * half_dlon.sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.max(0.0).sqrt().min(1.0).asin()
}

/// Augmentation operator kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AugOp {
    /// Haversine-distance edge filter with cutoff `kappa`.
    Hd,
    /// Uniform edge dropout with rate `rho`.
    Ed,
    /// Node dropout with rate `rho`.
    Nd,
}

impl fmt::Display for AugOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AugOp::Hd => "HD",
            AugOp::Ed => "ED",
            AugOp::Nd => "ND",
        })
    }
}

impl FromStr for AugOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hd" => Ok(AugOp::Hd),
            "ed" => Ok(AugOp::Ed),
            "nd" => Ok(AugOp::Nd),
            other => Err(Error::Config(format!(
                "unknown augmentation operator {other:?}, expected hd, ed or nd"
            ))),
        }
    }
}

/// Keep/drop decision per edge of some fixed edge list.
#[derive(Debug, Clone)]
pub struct AugmentationMask {
    pub op: AugOp,
    pub param: f64,
    /// None for the deterministic HD operator.
    pub seed: Option<u64>,
    pub keep: Vec<bool>,
}

impl AugmentationMask {
    pub fn kept_count(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }
}

/// Haversine-distance mask: drop `(u, s)` iff both endpoints have valid
/// coordinates and `dist / max_dist > kappa`, where `max_dist` is taken over
/// the edges of this list with two valid endpoints.
///
/// `kappa = 1` keeps every edge and never needs the normalizer, so it works
/// without geolocation (that is the identity augmentation the LightGCN
/// reduction relies on). Any smaller cutoff fails when no edge has valid
/// coordinates on both sides, because the normalizer would be undefined.
pub fn hd_mask(
    edges: &[(usize, usize)],
    geo_users: &[GeoRecord],
    geo_services: &[GeoRecord],
    kappa: f64,
) -> Result<AugmentationMask> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::Config(format!(
            "kappa must be in [0, 1], got {kappa}"
        )));
    }
    if kappa == 1.0 {
        return Ok(AugmentationMask {
            op: AugOp::Hd,
            param: kappa,
            seed: None,
            keep: vec![true; edges.len()],
        });
    }
    let mut dist = vec![f64::NAN; edges.len()];
    let mut max_dist = f64::NEG_INFINITY;
    for (k, &(u, s)) in edges.iter().enumerate() {
        let gu = geo_users.get(u);
        let gs = geo_services.get(s);
        if let (Some(gu), Some(gs)) = (gu, gs) {
            if gu.valid && gs.valid {
                let d = haversine_km(gu.latitude, gu.longitude, gs.latitude, gs.longitude);
                dist[k] = d;
                max_dist = max_dist.max(d);
            }
        }
    }
    if !max_dist.is_finite() {
        return Err(Error::Config(
            "hd augmentation needs at least one edge with valid coordinates on both endpoints"
                .into(),
        ));
    }
    let keep = dist
        .iter()
        .map(|&d| {
            if d.is_nan() {
                true
            } else if max_dist == 0.0 {
                true
            } else {
                d / max_dist <= kappa
            }
        })
        .collect();
    Ok(AugmentationMask {
        op: AugOp::Hd,
        param: kappa,
        seed: None,
        keep,
    })
}

/// Edge dropout: exactly `floor(rho * m)` edges drop, chosen uniformly
/// without replacement from a generator seeded with `seed`.
pub fn ed_mask(edges: &[(usize, usize)], rho: f64, seed: u64) -> Result<AugmentationMask> {
    check_rho(rho)?;
    let m = edges.len();
    let n_drop = (rho * m as f64).floor() as usize;
    let mut keep = vec![true; m];
    let mut idx: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (dropped, _) = idx.partial_shuffle(&mut rng, n_drop);
    for &k in dropped.iter() {
        keep[k] = false;
    }
    Ok(AugmentationMask {
        op: AugOp::Ed,
        param: rho,
        seed: Some(seed),
        keep,
    })
}

/// Node dropout: exactly `floor(rho * (num_users + num_services))` nodes
/// drop; an edge survives iff both endpoints survive.
pub fn nd_mask(
    edges: &[(usize, usize)],
    num_users: usize,
    num_services: usize,
    rho: f64,
    seed: u64,
) -> Result<AugmentationMask> {
    check_rho(rho)?;
    let n = num_users + num_services;
    let n_drop = (rho * n as f64).floor() as usize;
    let mut alive = vec![true; n];
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (dropped, _) = idx.partial_shuffle(&mut rng, n_drop);
    for &node in dropped.iter() {
        alive[node] = false;
    }
    let keep = edges
        .iter()
        .map(|&(u, s)| alive[u] && alive[num_users + s])
        .collect();
    Ok(AugmentationMask {
        op: AugOp::Nd,
        param: rho,
        seed: Some(seed),
        keep,
    })
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Config(format!(
            "dropout rate must be in [0, 1), got {rho}"
        )));
    }
    Ok(())
}

/// Builds a mask for any operator; `kappa` feeds HD, `rho` and `seed` feed
/// the stochastic operators.
#[allow(clippy::too_many_arguments)]
pub fn make_mask(
    op: AugOp,
    edges: &[(usize, usize)],
    geo_users: &[GeoRecord],
    geo_services: &[GeoRecord],
    num_users: usize,
    num_services: usize,
    kappa: f64,
    rho: f64,
    seed: u64,
) -> Result<AugmentationMask> {
    match op {
        AugOp::Hd => hd_mask(edges, geo_users, geo_services, kappa),
        AugOp::Ed => ed_mask(edges, rho, seed),
        AugOp::Nd => nd_mask(edges, num_users, num_services, rho, seed),
    }
}

/// Filters an edge list by a mask built for it. Order is preserved, so a
/// sorted input stays sorted.
pub fn apply_mask(edges: &[(usize, usize)], mask: &AugmentationMask) -> Result<Vec<(usize, usize)>> {
    if edges.len() != mask.keep.len() {
        return Err(Error::Shape {
            expected: format!("mask over {} edges", edges.len()),
            got: format!("{}", mask.keep.len()),
        });
    }
    Ok(edges
        .iter()
        .zip(&mask.keep)
        .filter(|&(_, &k)| k)
        .map(|(&e, _)| e)
        .collect())
}

/// Writes a mask file: a header comment with operator, parameter and seed,
/// then one `u<TAB>s` line per kept edge.
pub fn write_mask_file(
    path: &Path,
    edges: &[(usize, usize)],
    mask: &AugmentationMask,
) -> Result<()> {
    let kept = apply_mask(edges, mask)?;
    let seed_repr = match mask.seed {
        Some(s) => s.to_string(),
        None => "-".to_string(),
    };
    let mut out = format!("# op={} param={} seed={}\n", mask.op, mask.param, seed_repr);
    for (u, s) in kept {
        out.push_str(&format!("{u}\t{s}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a mask file back as `(op, param, seed, kept_edges)`.
pub fn read_mask_file(path: &Path) -> Result<(AugOp, f64, Option<u64>, Vec<(usize, usize)>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, 1, "empty mask file"))?;
    let mut op = None;
    let mut param = None;
    let mut seed = None;
    for tok in header.trim_start_matches('#').split_whitespace() {
        if let Some(v) = tok.strip_prefix("op=") {
            op = Some(v.parse::<AugOp>()?);
        } else if let Some(v) = tok.strip_prefix("param=") {
            param = v.parse::<f64>().ok();
        } else if let Some(v) = tok.strip_prefix("seed=") {
            seed = if v == "-" { None } else { v.parse::<u64>().ok() };
        }
    }
    let (op, param) = match (op, param) {
        (Some(o), Some(p)) => (o, p),
        _ => return Err(Error::format(path, 1, "mask header missing op or param")),
    };
    let mut edges = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let parse = |t: Option<&str>| t.and_then(|x| x.trim().parse::<usize>().ok());
        match (parse(parts.next()), parse(parts.next())) {
            (Some(u), Some(s)) => edges.push((u, s)),
            _ => return Err(Error::format(path, i + 2, "expected u<TAB>s")),
        }
    }
    Ok((op, param, seed, edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn geo(id: usize, lat: f64, lon: f64) -> GeoRecord {
        GeoRecord {
            entity_id: id,
            latitude: lat,
            longitude: lon,
            valid: true,
        }
    }

    #[test]
    fn haversine_matches_reference_distances() {
        assert_eq!(haversine_km(10.0, 20.0, 10.0, 20.0), 0.0);
        // Daejeon to Seoul, checked against an external geodesic calculator.
        let d = haversine_km(36.3504, 127.3845, 37.5665, 126.9780);
        assert!((d - 139.96425339684944).abs() < 1e-9, "{d}");
        // Antipodal points reach exactly half the circumference.
        let anti = haversine_km(0.0, 0.0, 0.0, 180.0);
        assert!((anti - std::f64::consts::PI * EARTH_RADIUS_KM).abs() < 1e-9);
        assert!((anti - 20015.086796020572).abs() < 1e-9);
    }

    #[test]
    fn haversine_is_symmetric_and_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let a = rng.random_range(-90.0..90.0);
            let b = rng.random_range(-180.0..180.0);
            let c = rng.random_range(-90.0..90.0);
            let d = rng.random_range(-180.0..180.0);
            let fwd = haversine_km(a, b, c, d);
            let rev = haversine_km(c, d, a, b);
            assert!(fwd.is_finite() && fwd >= 0.0);
            assert!((fwd - rev).abs() < 1e-9);
        }
    }

    #[test]
    fn hd_keeps_short_and_unknown_edges() {
        let users = vec![geo(0, 0.0, 0.0), GeoRecord::invalid(1)];
        let services = vec![geo(0, 0.0, 1.0), geo(1, 0.0, 120.0)];
        let edges = vec![(0, 0), (0, 1), (1, 0), (1, 1)];
        let mask = hd_mask(&edges, &users, &services, 0.3).unwrap();
        // Edge (0,1) is the normalizer, ratio 1 > 0.3, dropped; edge (0,0)
        // is short; user 1 edges have no coordinates and always stay.
        assert_eq!(mask.keep, vec![true, false, true, true]);
        assert_eq!(mask.seed, None);
        let full = hd_mask(&edges, &users, &services, 1.0).unwrap();
        assert!(full.keep.iter().all(|&k| k));
    }

    #[test]
    fn hd_without_any_valid_pair_is_a_config_error() {
        let users = vec![GeoRecord::invalid(0)];
        let services = vec![geo(0, 1.0, 1.0)];
        let err = hd_mask(&[(0, 0)], &users, &services, 0.5).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        // The identity cutoff has no normalizer to compute and still works.
        let mask = hd_mask(&[(0, 0)], &users, &services, 1.0).unwrap();
        assert_eq!(mask.keep, vec![true]);
    }

    #[test]
    fn hd_is_monotone_in_kappa() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let users: Vec<GeoRecord> = (0..6)
            .map(|i| {
                geo(
                    i,
                    rng.random_range(-80.0..80.0),
                    rng.random_range(-170.0..170.0),
                )
            })
            .collect();
        let services: Vec<GeoRecord> = (0..6)
            .map(|i| {
                geo(
                    i,
                    rng.random_range(-80.0..80.0),
                    rng.random_range(-170.0..170.0),
                )
            })
            .collect();
        let mut edges = Vec::new();
        for u in 0..6 {
            for s in 0..6 {
                if (u + s) % 2 == 0 {
                    edges.push((u, s));
                }
            }
        }
        let grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        for w in grid.windows(2) {
            let lo = hd_mask(&edges, &users, &services, w[0]).unwrap();
            let hi = hd_mask(&edges, &users, &services, w[1]).unwrap();
            for k in 0..edges.len() {
                assert!(!lo.keep[k] || hi.keep[k], "kept set must grow with kappa");
            }
        }
    }

    #[test]
    fn haversine_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..300 {
            let p: Vec<(f64, f64)> = (0..3)
                .map(|_| {
                    (
                        rng.random_range(-90.0..90.0),
                        rng.random_range(-180.0..180.0),
                    )
                })
                .collect();
            let ab = haversine_km(p[0].0, p[0].1, p[1].0, p[1].1);
            let bc = haversine_km(p[1].0, p[1].1, p[2].0, p[2].1);
            let ac = haversine_km(p[0].0, p[0].1, p[2].0, p[2].1);
            assert!(ac <= ab + bc + 1e-6, "{ac} vs {ab} + {bc}");
        }
    }

    #[test]
    fn hd_with_all_zero_distances_keeps_everything() {
        let users = vec![geo(0, 10.0, 10.0)];
        let services = vec![geo(0, 10.0, 10.0)];
        let mask = hd_mask(&[(0, 0)], &users, &services, 0.0).unwrap();
        assert_eq!(mask.keep, vec![true]);
    }

    #[test]
    fn ed_drops_exactly_floor_rho_m() {
        let edges: Vec<(usize, usize)> = (0..10).map(|i| (i, i)).collect();
        let mask = ed_mask(&edges, 0.25, 7).unwrap();
        assert_eq!(mask.kept_count(), 10 - 2);
        let again = ed_mask(&edges, 0.25, 7).unwrap();
        assert_eq!(mask.keep, again.keep);
        let other = ed_mask(&edges, 0.25, 8).unwrap();
        assert_ne!(mask.keep, other.keep);
        let none = ed_mask(&edges, 0.0, 7).unwrap();
        assert_eq!(none.kept_count(), 10);
        assert!(ed_mask(&edges, 1.0, 7).is_err());
    }

    #[test]
    fn nd_removes_edges_of_dropped_nodes() {
        let edges = vec![(0, 0), (0, 1), (1, 0), (1, 1)];
        let mask = nd_mask(&edges, 2, 2, 0.5, 3).unwrap();
        // floor(0.5 * 4) = 2 nodes drop; recompute survivors and check
        // every edge decision against them.
        let mut alive = vec![true; 4];
        let mut idx: Vec<usize> = (0..4).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (dropped, _) = idx.partial_shuffle(&mut rng, 2);
        for &n in dropped.iter() {
            alive[n] = false;
        }
        for (k, &(u, s)) in edges.iter().enumerate() {
            assert_eq!(mask.keep[k], alive[u] && alive[2 + s]);
        }
    }

    #[test]
    fn apply_mask_preserves_order_and_checks_len() {
        let edges = vec![(0, 0), (0, 1), (1, 0)];
        let mask = AugmentationMask {
            op: AugOp::Ed,
            param: 0.3,
            seed: Some(1),
            keep: vec![true, false, true],
        };
        assert_eq!(apply_mask(&edges, &mask).unwrap(), vec![(0, 0), (1, 0)]);
        assert!(apply_mask(&edges[..2], &mask).is_err());
    }

    #[test]
    fn mask_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.tsv");
        let edges = vec![(0, 0), (0, 1), (2, 1)];
        let mask = ed_mask(&edges, 0.34, 11).unwrap();
        write_mask_file(&path, &edges, &mask).unwrap();
        let (op, param, seed, kept) = read_mask_file(&path).unwrap();
        assert_eq!(op, AugOp::Ed);
        assert_eq!(param, 0.34);
        assert_eq!(seed, Some(11));
        assert_eq!(kept, apply_mask(&edges, &mask).unwrap());
    }

    #[test]
    fn op_names_round_trip() {
        for op in [AugOp::Hd, AugOp::Ed, AugOp::Nd] {
            assert_eq!(op.to_string().parse::<AugOp>().unwrap(), op);
        }
        assert!("xd".parse::<AugOp>().is_err());
    }
}
