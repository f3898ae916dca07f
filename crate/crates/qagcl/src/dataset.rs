//! WSDream-style input parsing and dataset assembly.
//!
//! The raw inputs are a dense response-time matrix (whitespace separated,
//! `-1.0` marking unobserved invocations) and two tab-separated side tables
//! with per-entity latitude and longitude. The pipeline turns these into a
//! bipartite implicit-feedback dataset: threshold the matrix, core-filter,
//! reindex densely, then split each user's positives into train and test.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense QoS matrix, row per user, column per service.
#[derive(Debug, Clone)]
pub struct QoSMatrix {
    pub num_users: usize,
    pub num_services: usize,
    values: Vec<f64>,
}

impl QoSMatrix {
    pub fn new(num_users: usize, num_services: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_users * num_services {
            return Err(Error::Shape {
                expected: format!("{} values", num_users * num_services),
                got: format!("{}", values.len()),
            });
        }
        Ok(QoSMatrix {
            num_users,
            num_services,
            values,
        })
    }

    pub fn get(&self, u: usize, s: usize) -> f64 {
        self.values[u * self.num_services + s]
    }

    /// Row-major backing storage.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Geographic side information for one user or service.
///
/// `valid` is false when the source row was absent, unparsable, or out of
/// coordinate bounds; such records never force an edge drop downstream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoRecord {
    pub entity_id: usize,
    pub latitude: f64,
    pub longitude: f64,
    pub valid: bool,
}

impl GeoRecord {
    pub fn invalid(entity_id: usize) -> Self {
        GeoRecord {
            entity_id,
            latitude: 0.0,
            longitude: 0.0,
            valid: false,
        }
    }
}

/// Parses a dense response-time matrix file.
///
/// Every non-empty line is one user row of whitespace-separated decimals;
/// all rows must have the same width and the file must contain at least one
/// row. `-1.0` entries pass through untouched and are interpreted later.
pub fn parse_qos_matrix(path: &Path) -> Result<QoSMatrix> {
    let text = read_input(path)?;
    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let start = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| {
                Error::format(path, lineno + 1, format!("not a number: {tok:?}"))
            })?;
            values.push(v);
        }
        let n = values.len() - start;
        match width {
            None => width = Some(n),
            Some(w) if w != n => {
                return Err(Error::format(
                    path,
                    lineno + 1,
                    format!("row has {n} columns, expected {w}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::format(path, 1, "matrix file has no rows"));
    }
    QoSMatrix::new(rows, width.unwrap(), values)
}

/// Parses a tab-separated side table with a single header line.
///
/// `lat_col` and `lon_col` are zero-based column positions. Rows whose
/// coordinates are missing, unparsable, or outside `[-90, 90] x [-180, 180]`
/// become invalid records rather than errors, matching how the public
/// WSDream lists mark unknown locations with `null`.
pub fn parse_geo_list(path: &Path, lat_col: usize, lon_col: usize) -> Result<Vec<GeoRecord>> {
    let text = read_input(path)?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let entity_id = records.len();
        let lat = cols.get(lat_col).and_then(|t| t.trim().parse::<f64>().ok());
        let lon = cols.get(lon_col).and_then(|t| t.trim().parse::<f64>().ok());
        let rec = match (lat, lon) {
            (Some(a), Some(b)) if in_coord_bounds(a, b) => GeoRecord {
                entity_id,
                latitude: a,
                longitude: b,
                valid: true,
            },
            _ => GeoRecord::invalid(entity_id),
        };
        records.push(rec);
    }
    Ok(records)
}

fn in_coord_bounds(lat: f64, lon: f64) -> bool {
    lat.is_finite() && lon.is_finite() && lat.abs() <= 90.0 && lon.abs() <= 180.0
}

fn read_input(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Thresholds response times into implicit-feedback edges.
///
/// An edge `(u, s)` exists iff `0 <= rt < gamma`, strictly below the
/// threshold; the `-1.0` sentinel and any other negative value count as
/// missing. Output is sorted by `(u, s)`.
pub fn binarize(qos: &QoSMatrix, gamma: f64) -> Result<Vec<(usize, usize)>> {
    if !(gamma > 0.0) {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    let mut edges = Vec::new();
    for u in 0..qos.num_users {
        for s in 0..qos.num_services {
            let t = qos.get(u, s);
            if t >= 0.0 && t < gamma {
                edges.push((u, s));
            }
        }
    }
    Ok(edges)
}

/// Result of core filtering: reindexed edges plus new-to-old id maps.
#[derive(Debug, Clone)]
pub struct CoreFiltered {
    pub edges: Vec<(usize, usize)>,
    pub user_map: Vec<usize>,
    pub service_map: Vec<usize>,
}

/// Drops users with fewer than `core` interactions, then services left with
/// none, repeating until stable, and reindexes both sides densely in
/// ascending original-id order.
pub fn core_filter(edges: &[(usize, usize)], core: usize) -> CoreFiltered {
    let max_u = edges.iter().map(|&(u, _)| u + 1).max().unwrap_or(0);
    let max_s = edges.iter().map(|&(_, s)| s + 1).max().unwrap_or(0);
    let mut user_alive = vec![true; max_u];
    let mut service_alive = vec![true; max_s];
    loop {
        let mut user_deg = vec![0usize; max_u];
        let mut service_deg = vec![0usize; max_s];
        for &(u, s) in edges {
            if user_alive[u] && service_alive[s] {
                user_deg[u] += 1;
                service_deg[s] += 1;
            }
        }
        let mut changed = false;
        for u in 0..max_u {
            if user_alive[u] && user_deg[u] < core {
                user_alive[u] = false;
                changed = true;
            }
        }
        let mut service_deg = service_deg;
        if changed {
            service_deg = vec![0usize; max_s];
            for &(u, s) in edges {
                if user_alive[u] && service_alive[s] {
                    service_deg[s] += 1;
                }
            }
        }
        for s in 0..max_s {
            if service_alive[s] && service_deg[s] == 0 {
                service_alive[s] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let user_map: Vec<usize> = (0..max_u).filter(|&u| user_alive[u]).collect();
    let service_map: Vec<usize> = (0..max_s).filter(|&s| service_alive[s]).collect();
    let mut user_new = vec![usize::MAX; max_u];
    for (new, &old) in user_map.iter().enumerate() {
        user_new[old] = new;
    }
    let mut service_new = vec![usize::MAX; max_s];
    for (new, &old) in service_map.iter().enumerate() {
        service_new[old] = new;
    }
    let fresh: Vec<(usize, usize)> = edges
        .iter()
        .filter(|&&(u, s)| user_alive[u] && service_alive[s])
        .map(|&(u, s)| (user_new[u], service_new[s]))
        .collect();
    CoreFiltered {
        edges: fresh,
        user_map,
        service_map,
    }
}

/// Per-user stratified split into train and test edge sets.
///
/// Each user contributes `ceil(ratio * degree)` positives to test, capped so
/// at least one train positive always remains; degree-1 users keep their
/// only edge in train. Sampling is without replacement from a seeded
/// generator, users visited in ascending order, so the split is a pure
/// function of `(edges, ratio, seed)`.
pub fn split_edges(
    edges: &[(usize, usize)],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<(usize, usize)>, Vec<(usize, usize)>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!(
            "split ratio must be in (0, 1), got {ratio}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut i = 0;
    while i < edges.len() {
        let u = edges[i].0;
        let mut services = Vec::new();
        while i < edges.len() && edges[i].0 == u {
            services.push(edges[i].1);
            i += 1;
        }
        let deg = services.len();
        let n_test = ceil_count(ratio, deg).min(deg.saturating_sub(1));
        let (picked, _) = services.partial_shuffle(&mut rng, n_test);
        let mut picked: Vec<usize> = picked.to_vec();
        picked.sort_unstable();
        let picked_set = picked;
        for &s in &services {
            if picked_set.binary_search(&s).is_ok() {
                test.push((u, s));
            } else {
                train.push((u, s));
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// `ceil(ratio * deg)` with a snap against floating-point residue, so exact
/// products like 0.2 * 5 do not round up to 2.
fn ceil_count(ratio: f64, deg: usize) -> usize {
    let raw = ratio * deg as f64;
    let snapped = if (raw - raw.round()).abs() < 1e-9 {
        raw.round()
    } else {
        raw.ceil()
    };
    snapped as usize
}

/// Fully prepared bipartite dataset in dense local ids.
#[derive(Debug, Clone)]
pub struct InteractionDataset {
    pub num_users: usize,
    pub num_services: usize,
    /// New local id to original row index, both sides.
    pub user_map: Vec<usize>,
    pub service_map: Vec<usize>,
    pub train_edges: Vec<(usize, usize)>,
    /// Response time of each train edge, aligned with `train_edges`.
    pub train_qos: Vec<f64>,
    pub test_edges: Vec<(usize, usize)>,
    pub geo_users: Vec<GeoRecord>,
    pub geo_services: Vec<GeoRecord>,
    /// Construction parameters, kept so splits are replayable.
    pub params: PrepareParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepareParams {
    pub gamma: f64,
    pub core: usize,
    pub split_ratio: f64,
    pub seed: u64,
}

/// Runs the full preparation pipeline on parsed raw inputs.
pub fn prepare(
    qos: &QoSMatrix,
    geo_users: &[GeoRecord],
    geo_services: &[GeoRecord],
    params: &PrepareParams,
) -> Result<InteractionDataset> {
    let edges = binarize(qos, params.gamma)?;
    let filtered = core_filter(&edges, params.core);
    if filtered.edges.is_empty() {
        return Err(Error::Config(format!(
            "no interactions survive gamma={} core={}",
            params.gamma, params.core
        )));
    }
    let (train_edges, test_edges) = split_edges(&filtered.edges, params.split_ratio, params.seed)?;
    let train_qos = train_edges
        .iter()
        .map(|&(u, s)| qos.get(filtered.user_map[u], filtered.service_map[s]))
        .collect();
    let remap = |map: &[usize], source: &[GeoRecord]| -> Vec<GeoRecord> {
        map.iter()
            .enumerate()
            .map(|(new, &old)| match source.get(old) {
                Some(r) => GeoRecord {
                    entity_id: new,
                    ..*r
                },
                None => GeoRecord::invalid(new),
            })
            .collect()
    };
    Ok(InteractionDataset {
        num_users: filtered.user_map.len(),
        num_services: filtered.service_map.len(),
        geo_users: remap(&filtered.user_map, geo_users),
        geo_services: remap(&filtered.service_map, geo_services),
        user_map: filtered.user_map,
        service_map: filtered.service_map,
        train_edges,
        train_qos,
        test_edges,
        params: *params,
    })
}

impl InteractionDataset {
    /// Train positives per user, each list ascending.
    pub fn user_train_index(&self) -> Vec<Vec<usize>> {
        group_by_user(self.num_users, &self.train_edges)
    }

    /// Test positives per user, each list ascending.
    pub fn user_test_index(&self) -> Vec<Vec<usize>> {
        group_by_user(self.num_users, &self.test_edges)
    }

    pub fn density(&self) -> f64 {
        let cells = (self.num_users * self.num_services) as f64;
        if cells == 0.0 {
            return 0.0;
        }
        (self.train_edges.len() + self.test_edges.len()) as f64 / cells
    }

    pub fn summary(&self) -> String {
        format!(
            "users\t{}\nservices\t{}\ntrain_edges\t{}\ntest_edges\t{}\ndensity\t{:.6}\n",
            self.num_users,
            self.num_services,
            self.train_edges.len(),
            self.test_edges.len(),
            self.density()
        )
    }
}

fn group_by_user(num_users: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut index = vec![Vec::new(); num_users];
    for &(u, s) in edges {
        index[u].push(s);
    }
    index
}

pub const SPLIT_FILE: &str = "split.tsv";
pub const QOS_FILE: &str = "qos_train.tsv";
pub const USER_MAP_FILE: &str = "user_map.tsv";
pub const SERVICE_MAP_FILE: &str = "service_map.tsv";
pub const GEO_USERS_FILE: &str = "geo_users.tsv";
pub const GEO_SERVICES_FILE: &str = "geo_services.tsv";
pub const META_FILE: &str = "meta.tsv";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Serializes a prepared dataset into a directory of small TSV files.
///
/// `split.tsv` interleaves train and test edges in one (user, service)
/// sorted stream so the file is a canonical fingerprint of the split.
pub fn write_prepared(dir: &Path, ds: &InteractionDataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))
    };
    write(SPLIT_FILE, render_split(ds))?;
    let mut qos = String::new();
    for (&(u, s), &rt) in ds.train_edges.iter().zip(&ds.train_qos) {
        qos.push_str(&format!("{u}\t{s}\t{rt}\n"));
    }
    write(QOS_FILE, qos)?;
    let render_map = |map: &[usize]| {
        map.iter()
            .enumerate()
            .map(|(new, old)| format!("{new}\t{old}\n"))
            .collect::<String>()
    };
    write(USER_MAP_FILE, render_map(&ds.user_map))?;
    write(SERVICE_MAP_FILE, render_map(&ds.service_map))?;
    write(GEO_USERS_FILE, render_geo(&ds.geo_users))?;
    write(GEO_SERVICES_FILE, render_geo(&ds.geo_services))?;
    let p = &ds.params;
    write(
        META_FILE,
        format!(
            "gamma\t{}\ncore\t{}\nsplit_ratio\t{}\nseed\t{}\nnum_users\t{}\nnum_services\t{}\n",
            p.gamma, p.core, p.split_ratio, p.seed, ds.num_users, ds.num_services
        ),
    )?;
    write(SUMMARY_FILE, ds.summary())
}

fn render_split(ds: &InteractionDataset) -> String {
    let mut rows: Vec<(usize, usize, &str)> = ds
        .train_edges
        .iter()
        .map(|&(u, s)| (u, s, "train"))
        .chain(ds.test_edges.iter().map(|&(u, s)| (u, s, "test")))
        .collect();
    rows.sort_unstable();
    rows.iter()
        .map(|(u, s, tag)| format!("{u}\t{s}\t{tag}\n"))
        .collect()
}

fn render_geo(records: &[GeoRecord]) -> String {
    records
        .iter()
        .map(|r| {
            format!(
                "{}\t{}\t{}\t{}\n",
                r.entity_id,
                u8::from(r.valid),
                r.latitude,
                r.longitude
            )
        })
        .collect()
}

/// Fingerprint of a prepared directory: truncated SHA-256 of `split.tsv`.
///
/// Checkpoints store this so evaluation can refuse a stale pairing.
pub fn dataset_hash(dir: &Path) -> Result<String> {
    crate::manifest::file_hash(&dir.join(SPLIT_FILE))
}

/// Reads a directory written by [`write_prepared`] back into memory.
pub fn load_prepared(dir: &Path) -> Result<InteractionDataset> {
    let meta = read_kv(&dir.join(META_FILE))?;
    let field = |key: &str| -> Result<&str> {
        meta.iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::format(dir.join(META_FILE), 0, format!("missing key {key}")))
    };
    let parse_meta = |key: &str| -> Result<f64> {
        let raw = field(key)?;
        raw.parse()
            .map_err(|_| Error::format(dir.join(META_FILE), 0, format!("bad value for {key}: {raw}")))
    };
    let num_users = parse_meta("num_users")? as usize;
    let num_services = parse_meta("num_services")? as usize;
    let params = PrepareParams {
        gamma: parse_meta("gamma")?,
        core: parse_meta("core")? as usize,
        split_ratio: parse_meta("split_ratio")?,
        seed: parse_meta("seed")? as u64,
    };

    let split_path = dir.join(SPLIT_FILE);
    let mut train_edges = Vec::new();
    let mut test_edges = Vec::new();
    for (idx, line) in read_input(&split_path)?.lines().enumerate() {
        let mut cols = line.split('\t');
        let (u, s, tag) = match (cols.next(), cols.next(), cols.next(), cols.next()) {
            (Some(u), Some(s), Some(tag), None) => (u, s, tag),
            _ => return Err(Error::format(&split_path, idx + 1, "expected 3 columns")),
        };
        let u: usize = u
            .parse()
            .map_err(|_| Error::format(&split_path, idx + 1, "bad user id"))?;
        let s: usize = s
            .parse()
            .map_err(|_| Error::format(&split_path, idx + 1, "bad service id"))?;
        if u >= num_users || s >= num_services {
            return Err(Error::format(&split_path, idx + 1, "edge out of range"));
        }
        match tag {
            "train" => train_edges.push((u, s)),
            "test" => test_edges.push((u, s)),
            other => {
                return Err(Error::format(
                    &split_path,
                    idx + 1,
                    format!("unknown tag {other}"),
                ))
            }
        }
    }

    let qos_path = dir.join(QOS_FILE);
    let mut train_qos = Vec::with_capacity(train_edges.len());
    for (idx, line) in read_input(&qos_path)?.lines().enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::format(&qos_path, idx + 1, "expected 3 columns"));
        }
        let edge = match (cols[0].parse(), cols[1].parse()) {
            (Ok(u), Ok(s)) => (u, s),
            _ => return Err(Error::format(&qos_path, idx + 1, "bad edge")),
        };
        if train_edges.get(idx) != Some(&edge) {
            return Err(Error::format(
                &qos_path,
                idx + 1,
                "edge does not match split.tsv train order",
            ));
        }
        let rt: f64 = cols[2]
            .parse()
            .map_err(|_| Error::format(&qos_path, idx + 1, "bad response time"))?;
        train_qos.push(rt);
    }
    if train_qos.len() != train_edges.len() {
        return Err(Error::format(
            &qos_path,
            0,
            format!(
                "{} rows but split has {} train edges",
                train_qos.len(),
                train_edges.len()
            ),
        ));
    }

    let user_map = read_id_map(&dir.join(USER_MAP_FILE), num_users)?;
    let service_map = read_id_map(&dir.join(SERVICE_MAP_FILE), num_services)?;
    let geo_users = read_geo(&dir.join(GEO_USERS_FILE), num_users)?;
    let geo_services = read_geo(&dir.join(GEO_SERVICES_FILE), num_services)?;

    Ok(InteractionDataset {
        num_users,
        num_services,
        user_map,
        service_map,
        train_edges,
        train_qos,
        test_edges,
        geo_users,
        geo_services,
        params,
    })
}

fn read_kv(path: &Path) -> Result<Vec<(String, String)>> {
    read_input(path)?
        .lines()
        .enumerate()
        .map(|(idx, line)| {
            line.split_once('\t')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::format(path, idx + 1, "expected key\\tvalue"))
        })
        .collect()
}

fn read_id_map(path: &Path, expected_len: usize) -> Result<Vec<usize>> {
    let mut map = Vec::with_capacity(expected_len);
    for (idx, line) in read_input(path)?.lines().enumerate() {
        let (new, old) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(path, idx + 1, "expected new\\told"))?;
        if new.parse() != Ok(idx) {
            return Err(Error::format(path, idx + 1, "ids must be dense and sorted"));
        }
        let old: usize = old
            .parse()
            .map_err(|_| Error::format(path, idx + 1, "bad original id"))?;
        map.push(old);
    }
    if map.len() != expected_len {
        return Err(Error::format(
            path,
            0,
            format!("{} rows, expected {expected_len}", map.len()),
        ));
    }
    Ok(map)
}

fn read_geo(path: &Path, expected_len: usize) -> Result<Vec<GeoRecord>> {
    let mut records = Vec::with_capacity(expected_len);
    for (idx, line) in read_input(path)?.lines().enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::format(path, idx + 1, "expected 4 columns"));
        }
        let parse_f = |raw: &str| -> Result<f64> {
            raw.parse()
                .map_err(|_| Error::format(path, idx + 1, "bad coordinate"))
        };
        if cols[0].parse() != Ok(idx) {
            return Err(Error::format(path, idx + 1, "ids must be dense and sorted"));
        }
        records.push(GeoRecord {
            entity_id: idx,
            valid: cols[1] == "1",
            latitude: parse_f(cols[2])?,
            longitude: parse_f(cols[3])?,
        });
    }
    if records.len() != expected_len {
        return Err(Error::format(
            path,
            0,
            format!("{} rows, expected {expected_len}", records.len()),
        ));
    }
    Ok(records)
}
