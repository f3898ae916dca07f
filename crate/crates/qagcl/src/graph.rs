//! Bipartite interaction graph with symmetric degree normalization.
//!
//! Users occupy node ids `0..num_users`, services occupy
//! `num_users..num_users + num_services`. The adjacency is stored in
//! compressed-row form over the full node set, with every undirected
//! user-service edge appearing once per direction. Entry weights are
//! `1 / sqrt(deg(i) * deg(j))`, so the stored matrix is exactly
//! `D^(-1/2) A D^(-1/2)` with no self loops.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Node id of service `s` in the joint node space.
pub fn service_node(num_users: usize, s: usize) -> usize {
    num_users + s
}

#[derive(Debug, Clone)]
pub struct NormalizedGraph {
    num_users: usize,
    num_services: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<usize>,
    num_edges: usize,
}

/// Builds the normalized adjacency from a bipartite edge list.
///
/// `edges` holds `(user, service)` pairs in local index space and must be
/// strictly sorted; duplicates or out-of-range endpoints are rejected.
/// Zero-degree nodes are allowed and simply get empty rows.
pub fn build_normalized(
    num_users: usize,
    num_services: usize,
    edges: &[(usize, usize)],
) -> Result<NormalizedGraph> {
    let n = num_users + num_services;
    let mut degrees = vec![0usize; n];
    for (k, &(u, s)) in edges.iter().enumerate() {
        if u >= num_users {
            return Err(Error::Index {
                what: "user",
                index: u,
                len: num_users,
            });
        }
        if s >= num_services {
            return Err(Error::Index {
                what: "service",
                index: s,
                len: num_services,
            });
        }
        if k > 0 && edges[k - 1] >= (u, s) {
            return Err(Error::Config(format!(
                "edge list must be strictly sorted, violated at position {k}"
            )));
        }
        degrees[u] += 1;
        degrees[service_node(num_users, s)] += 1;
    }

    let mut row_ptr = vec![0usize; n + 1];
    for i in 0..n {
        row_ptr[i + 1] = row_ptr[i] + degrees[i];
    }
    let nnz = row_ptr[n];
    let mut col_idx = vec![0usize; nnz];
    let mut weights = vec![0.0f64; nnz];
    let mut cursor = row_ptr.clone();
    // Edges are sorted by (u, s), so user rows fill with ascending service
    // neighbors and service rows with ascending user neighbors.
    for &(u, s) in edges {
        let sv = service_node(num_users, s);
        let w = 1.0 / ((degrees[u] * degrees[sv]) as f64).sqrt();
        col_idx[cursor[u]] = sv;
        weights[cursor[u]] = w;
        cursor[u] += 1;
        col_idx[cursor[sv]] = u;
        weights[cursor[sv]] = w;
        cursor[sv] += 1;
    }

    Ok(NormalizedGraph {
        num_users,
        num_services,
        row_ptr,
        col_idx,
        weights,
        degrees,
        num_edges: edges.len(),
    })
}

impl NormalizedGraph {
    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_services(&self) -> usize {
        self.num_services
    }

    pub fn num_nodes(&self) -> usize {
        self.num_users + self.num_services
    }

    /// Count of undirected bipartite edges.
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn degree(&self, node: usize) -> usize {
        self.degrees[node]
    }

    /// All stored matrix entries as `(row, col, weight)`, both directions.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.num_nodes()).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |k| (i, self.col_idx[k], self.weights[k]))
        })
    }

    /// One propagation step: `out = D^(-1/2) A D^(-1/2) * e`.
    ///
    /// Rows of isolated nodes come out all zero.
    pub fn propagate(&self, e: &Array2<f64>) -> Result<Array2<f64>> {
        let n = self.num_nodes();
        if e.nrows() != n {
            return Err(Error::Shape {
                expected: format!("{n} embedding rows"),
                got: format!("{}", e.nrows()),
            });
        }
        let mut out = Array2::<f64>::zeros(e.raw_dim());
        for i in 0..n {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            if lo == hi {
                continue;
            }
            let mut row = out.row_mut(i);
            for k in lo..hi {
                row.scaled_add(self.weights[k], &e.row(self.col_idx[k]));
            }
        }
        Ok(out)
    }
}
