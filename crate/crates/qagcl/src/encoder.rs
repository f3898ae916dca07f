//! Linear graph-convolution encoder over three graph views.
//!
//! One learnable embedding table `E0` of shape N x D covers users and
//! services jointly. Propagation is purely linear: layer l+1 is the
//! normalized adjacency times layer l, with no transforms and no
//! nonlinearity, and the readout is a weighted sum of all L+1 layer
//! outputs. The main, distance-filtered and dropout views share the same
//! `E0` and layer weights but propagate over their own graphs.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::NormalizedGraph;

/// Entry scale for embedding initialization.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct EmbeddingState {
    /// Shared layer-0 table, users then services.
    pub e0: Array2<f64>,
    /// Propagation depth L; the readout mixes L+1 terms.
    pub layers: usize,
    /// Readout weights, length L+1. Uniform by default.
    pub layer_weights: Vec<f64>,
}

impl EmbeddingState {
    pub fn num_nodes(&self) -> usize {
        self.e0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.e0.ncols()
    }
}

/// Fresh embedding table with zero-mean normal entries of scale
/// [`INIT_SCALE`] and uniform layer weights `1 / (L + 1)`.
pub fn init_embeddings(num_nodes: usize, dim: usize, layers: usize, seed: u64) -> EmbeddingState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_SCALE).unwrap();
    let e0 = Array2::from_shape_fn((num_nodes, dim), |_| normal.sample(&mut rng));
    EmbeddingState {
        e0,
        layers,
        layer_weights: uniform_weights(layers),
    }
}

pub fn uniform_weights(layers: usize) -> Vec<f64> {
    vec![1.0 / (layers + 1) as f64; layers + 1]
}

/// The three normalized graphs the encoder propagates over.
#[derive(Debug, Clone)]
pub struct GraphViews {
    pub main: NormalizedGraph,
    pub hd: NormalizedGraph,
    pub ed: NormalizedGraph,
}

/// Final embeddings per view after readout.
#[derive(Debug, Clone)]
pub struct ViewEmbeddings {
    pub main_final: Array2<f64>,
    pub hd_final: Array2<f64>,
    pub ed_final: Array2<f64>,
}

/// Weighted sum of propagation layers: `sum_i w_i * A_hat^i * e`.
///
/// Because propagation is linear and the normalized adjacency symmetric,
/// this same routine maps loss gradients taken at the readout back to
/// layer 0, which the trainer exploits.
pub fn readout(graph: &NormalizedGraph, e: &Array2<f64>, weights: &[f64]) -> Result<Array2<f64>> {
    if weights.is_empty() {
        return Err(Error::Config("layer weights must not be empty".into()));
    }
    let mut acc = e * weights[0];
    if weights.len() == 1 {
        return Ok(acc);
    }
    let mut cur = e.clone();
    for &w in &weights[1..] {
        cur = graph.propagate(&cur)?;
        acc.scaled_add(w, &cur);
    }
    Ok(acc)
}

/// Propagates the shared table through all three views.
pub fn forward(state: &EmbeddingState, views: &GraphViews) -> Result<ViewEmbeddings> {
    if state.layer_weights.len() != state.layers + 1 {
        return Err(Error::Shape {
            expected: format!("{} layer weights", state.layers + 1),
            got: format!("{}", state.layer_weights.len()),
        });
    }
    Ok(ViewEmbeddings {
        main_final: readout(&views.main, &state.e0, &state.layer_weights)?,
        hd_final: readout(&views.hd, &state.e0, &state.layer_weights)?,
        ed_final: readout(&views.ed, &state.e0, &state.layer_weights)?,
    })
}

/// Preference score: inner product of the user row and the service row of a
/// final embedding matrix.
pub fn score(finals: &Array2<f64>, num_users: usize, u: usize, s: usize) -> Result<f64> {
    let num_services = finals.nrows().saturating_sub(num_users);
    if u >= num_users {
        return Err(Error::UnknownUser {
            user: u,
            num_users,
        });
    }
    if s >= num_services {
        return Err(Error::Index {
            what: "service",
            index: s,
            len: num_services,
        });
    }
    Ok(finals.row(u).dot(&finals.row(num_users + s)))
}

/// Lineage fields carried alongside the raw table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub config_hash: String,
    pub dataset_hash: String,
}

const CHECKPOINT_MAGIC: &str = "qagcl-checkpoint v1";

/// Writes the layer-0 table with a small self-describing header. Values are
/// printed with Rust's shortest round-trip formatting, so reading the file
/// back reproduces every bit.
pub fn write_checkpoint(path: &Path, state: &EmbeddingState, meta: &CheckpointMeta) -> Result<()> {
    let mut out = String::new();
    out.push_str(CHECKPOINT_MAGIC);
    out.push('\n');
    out.push_str(&format!("nodes {}\n", state.num_nodes()));
    out.push_str(&format!("dim {}\n", state.dim()));
    out.push_str(&format!("layers {}\n", state.layers));
    out.push_str(&format!("seed {}\n", meta.seed));
    out.push_str(&format!("config_hash {}\n", meta.config_hash));
    out.push_str(&format!("dataset_hash {}\n", meta.dataset_hash));
    let weights: Vec<String> = state.layer_weights.iter().map(|w| w.to_string()).collect();
    out.push_str(&format!("weights {}\n", weights.join(" ")));
    for row in state.e0.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<(EmbeddingState, CheckpointMeta)> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let mut expect = |label: &str| -> Result<String> {
        match lines.next() {
            Some((i, line)) => {
                if label.is_empty() {
                    return Ok(line.to_string());
                }
                match line.strip_prefix(label).map(|r| r.trim().to_string()) {
                    Some(rest) => Ok(rest),
                    None => Err(Error::format(
                        path,
                        i + 1,
                        format!("expected {label:?} line, got {line:?}"),
                    )),
                }
            }
            None => Err(Error::format(path, 0, format!("missing {label:?} line"))),
        }
    };
    let magic = expect("")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::format(path, 1, format!("bad magic {magic:?}")));
    }
    let nodes: usize = parse_field(path, &expect("nodes ")?, "nodes")?;
    let dim: usize = parse_field(path, &expect("dim ")?, "dim")?;
    let layers: usize = parse_field(path, &expect("layers ")?, "layers")?;
    let seed: u64 = parse_field(path, &expect("seed ")?, "seed")?;
    let config_hash = expect("config_hash ")?;
    let dataset_hash = expect("dataset_hash ")?;
    let weights_line = expect("weights ")?;
    let mut layer_weights = Vec::new();
    for tok in weights_line.split_whitespace() {
        layer_weights.push(parse_field::<f64>(path, tok, "weight")?);
    }
    if layer_weights.len() != layers + 1 {
        return Err(Error::format(
            path,
            8,
            format!("{} weights for {layers} layers", layer_weights.len()),
        ));
    }
    let mut values = Vec::with_capacity(nodes * dim);
    let mut rows = 0usize;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let start = values.len();
        for tok in line.split_whitespace() {
            values.push(parse_field::<f64>(path, tok, "value")?);
        }
        if values.len() - start != dim {
            return Err(Error::format(
                path,
                i + 1,
                format!("row has {} values, expected {dim}", values.len() - start),
            ));
        }
        rows += 1;
    }
    if rows != nodes {
        return Err(Error::format(
            path,
            0,
            format!("{rows} embedding rows, header says {nodes}"),
        ));
    }
    let e0 = Array2::from_shape_vec((nodes, dim), values).expect("counted shape");
    Ok((
        EmbeddingState {
            e0,
            layers,
            layer_weights,
        },
        CheckpointMeta {
            seed,
            config_hash,
            dataset_hash,
        },
    ))
}

fn parse_field<T: std::str::FromStr>(path: &Path, tok: &str, what: &str) -> Result<T> {
    tok.trim()
        .parse()
        .map_err(|_| Error::format(path, 0, format!("bad {what}: {tok:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_normalized;
    use ndarray::array;

    #[test]
    fn init_is_seed_deterministic_with_right_moments() {
        let a = init_embeddings(200, 32, 3, 7);
        let b = init_embeddings(200, 32, 3, 7);
        assert_eq!(a.e0, b.e0);
        let c = init_embeddings(200, 32, 3, 8);
        assert_ne!(a.e0, c.e0);
        let n = (200 * 32) as f64;
        let mean = a.e0.sum() / n;
        let var = a.e0.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 3.0 * INIT_SCALE / n.sqrt(), "mean {mean}");
        assert!((var.sqrt() - INIT_SCALE).abs() < 0.005, "std {}", var.sqrt());
        assert_eq!(a.layer_weights, vec![0.25; 4]);
    }

    #[test]
    fn zero_layers_reads_out_e0() {
        let g = build_normalized(1, 1, &[(0, 0)]).unwrap();
        let state = EmbeddingState {
            e0: array![[1.0, 2.0], [3.0, 4.0]],
            layers: 0,
            layer_weights: vec![1.0],
        };
        let out = readout(&g, &state.e0, &state.layer_weights).unwrap();
        assert_eq!(out, state.e0);
    }

    #[test]
    fn two_layer_readout_on_single_edge_matches_hand_result() {
        // A_hat swaps the two rows, A_hat^2 is the identity, so uniform
        // readout over L=2 is (2 * E + swapped E) / 3.
        let g = build_normalized(1, 1, &[(0, 0)]).unwrap();
        let e0 = array![[3.0, 0.0], [0.0, 6.0]];
        let out = readout(&g, &e0, &[1.0 / 3.0; 3]).unwrap();
        let want = array![[2.0, 2.0], [1.0, 4.0]];
        for (a, b) in out.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_zero_weight_only_ignores_the_graph() {
        let g = build_normalized(2, 2, &[(0, 0), (1, 1)]).unwrap();
        let e0 = array![[1.0], [2.0], [3.0], [4.0]];
        let out = readout(&g, &e0, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(out, e0);
    }

    #[test]
    fn isolated_nodes_keep_only_their_layer_zero_share() {
        let g = build_normalized(2, 2, &[(0, 0)]).unwrap();
        let e0 = array![[2.0], [4.0], [6.0], [8.0]];
        let out = readout(&g, &e0, &[0.5, 0.5]).unwrap();
        // Node 1 (user) and node 3 (service) are isolated.
        assert!((out[[1, 0]] - 2.0).abs() < 1e-12);
        assert!((out[[3, 0]] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn forward_shares_e0_across_views() {
        let main = build_normalized(2, 2, &[(0, 0), (0, 1), (1, 1)]).unwrap();
        let hd = build_normalized(2, 2, &[(0, 0), (1, 1)]).unwrap();
        let ed = build_normalized(2, 2, &[(0, 1), (1, 1)]).unwrap();
        let state = init_embeddings(4, 3, 2, 1);
        let views = GraphViews { main, hd, ed };
        let out = forward(&state, &views).unwrap();
        assert_ne!(out.main_final, out.hd_final);
        assert_eq!(out.main_final.dim(), (4, 3));
    }

    #[test]
    fn score_is_the_row_dot_product() {
        let finals = array![[1.0, 2.0], [0.5, -1.0], [3.0, 1.0]];
        let v = score(&finals, 1, 0, 1).unwrap();
        assert!((v - (1.0 * 3.0 + 2.0 * 1.0)).abs() < 1e-12);
        assert_eq!(score(&finals, 1, 1, 0).unwrap_err().exit_code(), 5);
        assert!(score(&finals, 1, 0, 2).is_err());
    }

    #[test]
    fn checkpoint_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.txt");
        let state = init_embeddings(7, 5, 2, 3);
        let meta = CheckpointMeta {
            seed: 3,
            config_hash: "0011223344556677".into(),
            dataset_hash: "8899aabbccddeeff".into(),
        };
        write_checkpoint(&path, &state, &meta).unwrap();
        let (back, back_meta) = read_checkpoint(&path).unwrap();
        assert_eq!(back.e0, state.e0);
        assert_eq!(back.layers, state.layers);
        assert_eq!(back.layer_weights, state.layer_weights);
        assert_eq!(back_meta, meta);
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.txt");
        let state = init_embeddings(3, 2, 1, 0);
        let meta = CheckpointMeta {
            seed: 0,
            config_hash: "x".into(),
            dataset_hash: "y".into(),
        };
        write_checkpoint(&path, &state, &meta).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let truncated: String = text.lines().take(9).collect::<Vec<_>>().join("\n");
        std::fs::write(&path, truncated).unwrap();
        assert!(read_checkpoint(&path).is_err());
        std::fs::write(&path, text.replace(CHECKPOINT_MAGIC, "other v9")).unwrap();
        assert!(read_checkpoint(&path).is_err());
        assert_eq!(
            read_checkpoint(Path::new("/no/such/ckpt")).unwrap_err().exit_code(),
            2
        );
    }
}
