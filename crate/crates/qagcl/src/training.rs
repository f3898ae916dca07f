//! Joint BPR + contrastive training on the shared embedding table.
//!
//! The objective is `L = L_bpr + lambda1 * L_cl + lambda2 * ||E0_B||^2`
//! where `L_bpr` sums pairwise ranking losses over sampled triples on the
//! main view, `L_cl` is an InfoNCE term contrasting the two augmented
//! views per node type, and the regularizer covers only the rows the batch
//! touches. Gradients are exact and hand-derived: every view's readout is
//! a linear map `P = sum_i w_i * A_hat^i` of `E0`, and since `A_hat` is
//! symmetric, `P` is self-adjoint, so gradients at the readout pull back
//! to layer 0 through the same readout routine.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augment::{apply_mask, make_mask, AugmentationMask};
use crate::config::TrainConfig;
use crate::dataset::InteractionDataset;
use crate::encoder::{
    forward, init_embeddings, readout, EmbeddingState, GraphViews, ViewEmbeddings,
};
use crate::error::{Error, Result};
use crate::graph::{build_normalized, service_node};

const COSINE_EPS: f64 = 1e-12;

// Sub-seeds for the independent random streams of one run.
const SALT_INIT: u64 = 1;
const SALT_AUG_A: u64 = 2;
const SALT_AUG_B: u64 = 3;
const SALT_BATCH: u64 = 4;

/// Splitmix64-style mixer giving decorrelated streams from one run seed.
fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mini-batch of (user, positive service, negative service) triples.
#[derive(Debug, Clone)]
pub struct TripletBatch {
    pub triples: Vec<(usize, usize, usize)>,
}

impl TripletBatch {
    /// Distinct users, ascending.
    pub fn users(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.triples.iter().map(|t| t.0).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Distinct positive services, ascending.
    pub fn pos_services(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.triples.iter().map(|t| t.1).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Distinct E0 rows the batch touches: users plus positive and negative
    /// service nodes, each counted once.
    pub fn touched_rows(&self, num_users: usize) -> Vec<usize> {
        let mut v: Vec<usize> = Vec::with_capacity(self.triples.len() * 3);
        for &(u, p, n) in &self.triples {
            v.push(u);
            v.push(service_node(num_users, p));
            v.push(service_node(num_users, n));
        }
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Samples `batch_size` triples: positives uniform over train edges,
/// negatives uniform over services with rejection against the user's train
/// positives.
pub fn sample_batch(
    train_edges: &[(usize, usize)],
    train_index: &[Vec<usize>],
    num_services: usize,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TripletBatch> {
    if train_edges.is_empty() {
        return Err(Error::Config("cannot sample from an empty train set".into()));
    }
    let mut triples = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let (u, s_pos) = train_edges[rng.random_range(0..train_edges.len())];
        let positives = &train_index[u];
        if positives.len() >= num_services {
            return Err(Error::Config(format!(
                "user {u} interacts with every service; no negative exists"
            )));
        }
        let s_neg = loop {
            let c = rng.random_range(0..num_services);
            if positives.binary_search(&c).is_err() {
                break c;
            }
        };
        triples.push((u, s_pos, s_neg));
    }
    Ok(TripletBatch { triples })
}

/// `ln(1 + e^x)` without overflow for any argument.
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid, stable on both tails.
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Pairwise ranking loss, summed over the batch: `-sum log sigmoid(margin)`
/// with margin = score(u, s+) - score(u, s-) on the main view.
pub fn bpr_loss(main_final: &Array2<f64>, num_users: usize, batch: &TripletBatch) -> f64 {
    let mut loss = 0.0;
    for &(u, p, n) in &batch.triples {
        let eu = main_final.row(u);
        let ep = main_final.row(service_node(num_users, p));
        let en = main_final.row(service_node(num_users, n));
        let margin = eu.dot(&ep) - eu.dot(&en);
        loss += softplus(-margin);
    }
    loss
}

/// InfoNCE over one node set: rows of `a` come from the first augmented
/// view, rows of `b` from the second, index-aligned. Returns the loss; when
/// `grads` is given, also accumulates d(loss)/da and d(loss)/db into it.
fn infonce_set(
    a: &Array2<f64>,
    b: &Array2<f64>,
    tau: f64,
    mut grads: Option<(&mut Array2<f64>, &mut Array2<f64>)>,
) -> f64 {
    let m = a.nrows();
    if m == 0 {
        return 0.0;
    }
    let na: Vec<f64> = a.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let nb: Vec<f64> = b.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let raw = a.dot(&b.t());
    let mut cos = raw;
    for i in 0..m {
        for j in 0..m {
            cos[[i, j]] /= (na[i] * nb[j]).max(COSINE_EPS);
        }
    }
    let mut loss = 0.0;
    let mut p = cos.clone();
    p.mapv_inplace(|c| c / tau);
    let mut lse = Array1::<f64>::zeros(m);
    for i in 0..m {
        let row = p.row(i);
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|z| (z - mx).exp()).sum();
        lse[i] = mx + sum.ln();
        loss += lse[i] - p[[i, i]];
    }
    if let Some((ga, gb)) = grads.as_mut() {
        // p becomes the softmax matrix, then g = dL/d(cos).
        for i in 0..m {
            let l = lse[i];
            let mut row = p.row_mut(i);
            row.mapv_inplace(|z| (z - l).exp());
        }
        let mut g = p;
        for i in 0..m {
            g[[i, i]] -= 1.0;
        }
        g.mapv_inplace(|v| v / tau);
        // First term of each gradient is a matrix product with the
        // denominator folded into g elementwise.
        let mut gt = g.clone();
        for i in 0..m {
            for j in 0..m {
                gt[[i, j]] /= (na[i] * nb[j]).max(COSINE_EPS);
            }
        }
        let mut da = gt.dot(b);
        let db_t = gt.t().dot(a);
        let gc = &g * &cos;
        for i in 0..m {
            let coef = gc.row(i).sum() / (na[i] * na[i]).max(COSINE_EPS);
            let src = a.row(i);
            let mut dst = da.row_mut(i);
            dst.scaled_add(-coef, &src);
        }
        let mut db = db_t;
        for j in 0..m {
            let coef = gc.column(j).sum() / (nb[j] * nb[j]).max(COSINE_EPS);
            let src = b.row(j);
            let mut dst = db.row_mut(j);
            dst.scaled_add(-coef, &src);
        }
        **ga += &da;
        **gb += &db;
    }
    loss
}

fn gather_rows(matrix: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), matrix.ncols()));
    for (k, &r) in rows.iter().enumerate() {
        out.row_mut(k).assign(&matrix.row(r));
    }
    out
}

/// Node sets the contrastive term ranges over, as node ids.
fn contrast_sets(batch: &TripletBatch, num_users: usize, mixed: bool) -> Vec<Vec<usize>> {
    let users = batch.users();
    let services: Vec<usize> = batch
        .pos_services()
        .into_iter()
        .map(|s| service_node(num_users, s))
        .collect();
    if mixed {
        let mut pooled = users;
        pooled.extend(services);
        vec![pooled]
    } else {
        vec![users, services]
    }
}

/// Contrastive loss between the two augmented views, summed per node type
/// (distinct batch users, distinct batch positive services), or over one
/// pooled set in mixed mode.
pub fn infonce_loss(
    hd_final: &Array2<f64>,
    ed_final: &Array2<f64>,
    num_users: usize,
    batch: &TripletBatch,
    tau: f64,
    mixed: bool,
) -> f64 {
    contrast_sets(batch, num_users, mixed)
        .iter()
        .map(|set| {
            let a = gather_rows(hd_final, set);
            let b = gather_rows(ed_final, set);
            infonce_set(&a, &b, tau, None)
        })
        .sum()
}

/// The three weighted components. `cl` and `reg` carry their lambda factors
/// so the parts sum to the total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub bpr: f64,
    pub cl: f64,
    pub reg: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.bpr + self.cl + self.reg
    }
}

/// Evaluates the joint objective on already-propagated views.
pub fn joint_loss(
    views: &ViewEmbeddings,
    e0: &Array2<f64>,
    num_users: usize,
    batch: &TripletBatch,
    cfg: &TrainConfig,
) -> LossParts {
    let bpr = bpr_loss(&views.main_final, num_users, batch);
    let cl = if cfg.lambda1 > 0.0 {
        cfg.lambda1
            * infonce_loss(
                &views.hd_final,
                &views.ed_final,
                num_users,
                batch,
                cfg.tau,
                cfg.infonce_mixed,
            )
    } else {
        0.0
    };
    let mut sq = 0.0;
    for r in batch.touched_rows(num_users) {
        let row = e0.row(r);
        sq += row.dot(&row);
    }
    LossParts {
        bpr,
        cl,
        reg: cfg.lambda2 * sq,
    }
}

/// One forward pass plus reverse-mode accumulation of d(total)/d(E0).
pub fn loss_and_gradient(
    state: &EmbeddingState,
    graphs: &GraphViews,
    batch: &TripletBatch,
    cfg: &TrainConfig,
    num_users: usize,
) -> Result<(LossParts, Array2<f64>)> {
    let views = forward(state, graphs)?;
    let dims = state.e0.raw_dim();

    // BPR on the main view.
    let mut bpr = 0.0;
    let mut g_main = Array2::<f64>::zeros(dims);
    for &(u, p, n) in &batch.triples {
        let pi = service_node(num_users, p);
        let ni = service_node(num_users, n);
        let eu = views.main_final.row(u).to_owned();
        let ep = views.main_final.row(pi).to_owned();
        let en = views.main_final.row(ni).to_owned();
        let margin = eu.dot(&ep) - eu.dot(&en);
        bpr += softplus(-margin);
        let c = sigmoid(-margin);
        {
            let mut gu = g_main.row_mut(u);
            gu.scaled_add(-c, &ep);
            gu.scaled_add(c, &en);
        }
        g_main.row_mut(pi).scaled_add(-c, &eu);
        g_main.row_mut(ni).scaled_add(c, &eu);
    }

    // InfoNCE between the augmented views.
    let mut cl_raw = 0.0;
    let mut g_hd = Array2::<f64>::zeros(dims);
    let mut g_ed = Array2::<f64>::zeros(dims);
    if cfg.lambda1 > 0.0 {
        for set in contrast_sets(batch, num_users, cfg.infonce_mixed) {
            let a = gather_rows(&views.hd_final, &set);
            let b = gather_rows(&views.ed_final, &set);
            let mut da = Array2::<f64>::zeros(a.raw_dim());
            let mut db = Array2::<f64>::zeros(b.raw_dim());
            cl_raw += infonce_set(&a, &b, cfg.tau, Some((&mut da, &mut db)));
            for (k, &node) in set.iter().enumerate() {
                let mut h = g_hd.row_mut(node);
                h += &da.row(k);
                let mut e = g_ed.row_mut(node);
                e += &db.row(k);
            }
        }
    }

    // Pull the readout-level gradients back to E0. The readout is linear
    // and self-adjoint per view, so this reuses the forward routine.
    let mut grad = readout(&graphs.main, &g_main, &state.layer_weights)?;
    if cfg.lambda1 > 0.0 {
        grad.scaled_add(
            cfg.lambda1,
            &readout(&graphs.hd, &g_hd, &state.layer_weights)?,
        );
        grad.scaled_add(
            cfg.lambda1,
            &readout(&graphs.ed, &g_ed, &state.layer_weights)?,
        );
    }

    // L2 on touched rows only.
    let mut sq = 0.0;
    for r in batch.touched_rows(num_users) {
        let row = state.e0.row(r).to_owned();
        sq += row.dot(&row);
        grad.row_mut(r).scaled_add(2.0 * cfg.lambda2, &row);
    }

    let parts = LossParts {
        bpr,
        cl: cfg.lambda1 * cl_raw,
        reg: cfg.lambda2 * sq,
    };
    Ok((parts, grad))
}

/// Gradient of the joint objective with respect to E0.
pub fn gradient(
    state: &EmbeddingState,
    graphs: &GraphViews,
    batch: &TripletBatch,
    cfg: &TrainConfig,
    num_users: usize,
) -> Result<Array2<f64>> {
    Ok(loss_and_gradient(state, graphs, batch, cfg, num_users)?.1)
}

/// Adam with standard constants and bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Array2<f64>,
    v: Array2<f64>,
}

impl Adam {
    pub fn new(lr: f64, shape: (usize, usize)) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
        }
    }

    pub fn step(&mut self, params: &mut Array2<f64>, grad: &Array2<f64>) {
        self.t += 1;
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let b1c = 1.0 - b1.powi(self.t);
        let b2c = 1.0 - b2.powi(self.t);
        ndarray::Zip::from(params)
            .and(&mut self.m)
            .and(&mut self.v)
            .and(grad)
            .for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let mh = *m / b1c;
                let vh = *v / b2c;
                *p -= lr * mh / (vh.sqrt() + eps);
            });
    }
}

/// The three graphs of a run plus the masks that produced the augmented
/// two, kept for manifest writing.
#[derive(Debug, Clone)]
pub struct BuiltViews {
    pub graphs: GraphViews,
    pub mask_a: AugmentationMask,
    pub mask_b: AugmentationMask,
}

/// Builds main and augmented graphs from the train split. The two view
/// slots get independent derived seeds, so an ED&ED ablation pair draws
/// different masks.
pub fn build_views(dataset: &InteractionDataset, cfg: &TrainConfig) -> Result<BuiltViews> {
    build_views_salted(dataset, cfg, None)
}

fn build_views_salted(
    dataset: &InteractionDataset,
    cfg: &TrainConfig,
    epoch: Option<usize>,
) -> Result<BuiltViews> {
    let (u, s) = (dataset.num_users, dataset.num_services);
    let edges = &dataset.train_edges;
    let slot_seed = |slot_salt: u64| -> u64 {
        let base = derive_seed(cfg.seed, slot_salt);
        match epoch {
            Some(e) => derive_seed(base, e as u64 + 1),
            None => base,
        }
    };
    let mask_a = make_mask(
        cfg.aug_a,
        edges,
        &dataset.geo_users,
        &dataset.geo_services,
        u,
        s,
        cfg.kappa,
        cfg.rho,
        slot_seed(SALT_AUG_A),
    )?;
    let mask_b = make_mask(
        cfg.aug_b,
        edges,
        &dataset.geo_users,
        &dataset.geo_services,
        u,
        s,
        cfg.kappa,
        cfg.rho,
        slot_seed(SALT_AUG_B),
    )?;
    let graphs = GraphViews {
        main: build_normalized(u, s, edges)?,
        hd: build_normalized(u, s, &apply_mask(edges, &mask_a)?)?,
        ed: build_normalized(u, s, &apply_mask(edges, &mask_b)?)?,
    };
    Ok(BuiltViews {
        graphs,
        mask_a,
        mask_b,
    })
}

/// Per-epoch mean-over-batches loss record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub bpr: f64,
    pub cl: f64,
    pub reg: f64,
    pub total: f64,
}

/// Loss history in `epoch,bpr,cl,reg,total` CSV form.
pub fn history_csv(history: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,bpr,cl,reg,total\n");
    for h in history {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            h.epoch, h.bpr, h.cl, h.reg, h.total
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: EmbeddingState,
    pub history: Vec<EpochLoss>,
    pub stopped_early: bool,
}

const EARLY_STOP_REL: f64 = 1e-5;

/// Full training loop: seeded initialization, per-epoch mini-batches,
/// Adam updates, early stop when the mean epoch loss stops moving
/// relatively. Everything derives from `cfg.seed`, so identical inputs
/// give bitwise-identical history and state.
pub fn train(dataset: &InteractionDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.train_edges.is_empty() {
        return Err(Error::Config("train split has no edges".into()));
    }
    let num_users = dataset.num_users;
    let n = num_users + dataset.num_services;
    let base_views = build_views(dataset, cfg)?;
    let mut state = init_embeddings(n, cfg.embed_dim, cfg.layers, derive_seed(cfg.seed, SALT_INIT));
    let mut adam = Adam::new(cfg.lr, (n, cfg.embed_dim));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, SALT_BATCH));
    let train_index = dataset.user_train_index();
    let n_batches = dataset.train_edges.len().div_ceil(cfg.batch_size);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut stopped_early = false;
    let mut prev_mean: Option<f64> = None;
    let mut epoch_views: Option<BuiltViews>;
    for epoch in 1..=cfg.epochs {
        let graphs = if cfg.resample_ed_per_epoch {
            epoch_views = Some(build_views_salted(dataset, cfg, Some(epoch))?);
            &epoch_views.as_ref().unwrap().graphs
        } else {
            &base_views.graphs
        };
        let (mut bpr, mut cl, mut reg, mut total) = (0.0, 0.0, 0.0, 0.0);
        for b in 0..n_batches {
            let batch = sample_batch(
                &dataset.train_edges,
                &train_index,
                dataset.num_services,
                cfg.batch_size,
                &mut rng,
            )?;
            let (parts, grad) = loss_and_gradient(&state, graphs, &batch, cfg, num_users)?;
            let t = parts.total();
            if !t.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    bpr: parts.bpr,
                    cl: parts.cl,
                    reg: parts.reg,
                });
            }
            adam.step(&mut state.e0, &grad);
            bpr += parts.bpr;
            cl += parts.cl;
            reg += parts.reg;
            total += t;
        }
        let nb = n_batches as f64;
        let mean = total / nb;
        history.push(EpochLoss {
            epoch,
            bpr: bpr / nb,
            cl: cl / nb,
            reg: reg / nb,
            total: mean,
        });
        if let Some(prev) = prev_mean {
            if (mean - prev).abs() / prev.abs().max(1e-12) < EARLY_STOP_REL {
                stopped_early = true;
                break;
            }
        }
        prev_mean = Some(mean);
    }
    Ok(TrainOutcome {
        state,
        history,
        stopped_early,
    })
}
