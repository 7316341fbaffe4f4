//! User-user signed network construction and Laplacian assembly.
//!
//! Candidate pairs are enumerated through the product inverted index, so a
//! pair is considered only if it co-reviewed at least `min_co_reviews`
//! products; every skipped pair would have weight 0 anyway. Edges keep the
//! signed weight `(ħ − ζ)·η`; weight-0 pairs are dropped.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{self, FeatureConfig, PairFeatures, ZetaMode};
use crate::review::Dataset;

/// One undirected weighted edge; `i < j` always.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct SignedNetwork {
    users: Vec<String>,
    edges: Vec<Edge>,
    /// Per user: number of incident positive edges.
    positive_degree: Vec<usize>,
    /// Resolved threshold the weights were computed with.
    zeta: f64,
}

impl SignedNetwork {
    /// Assemble a network from explicit edges. Weight-0 edges are dropped,
    /// edges sorted, degrees computed. `zeta` records the threshold used to
    /// derive the weights (NaN when unknown).
    pub fn from_edges(users: Vec<String>, mut edges: Vec<Edge>, zeta: f64) -> Self {
        edges.retain(|e| e.weight != 0.0);
        edges.sort_unstable_by_key(|e| (e.i, e.j));
        let mut positive_degree = vec![0; users.len()];
        for e in &edges {
            if e.weight > 0.0 {
                positive_degree[e.i] += 1;
                positive_degree[e.j] += 1;
            }
        }
        Self {
            users,
            edges,
            positive_degree,
            zeta,
        }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// User ids in row order; embedding row k belongs to `users()[k]`.
    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn positive_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.weight > 0.0)
    }

    pub fn negative_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.weight < 0.0)
    }

    pub fn positive_degree(&self, user: usize) -> usize {
        self.positive_degree[user]
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Positive neighbor lists `(neighbor, weight)`, sorted by neighbor.
    pub fn positive_adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.users.len()];
        for e in self.positive_edges() {
            adj[e.i].push((e.j, e.weight));
            adj[e.j].push((e.i, e.weight));
        }
        for list in &mut adj {
            list.sort_unstable_by_key(|&(j, _)| j);
        }
        adj
    }

    /// Write the edge list (`user_i\tuser_j\tweight`) and the user-order
    /// manifest that fixes embedding row order.
    pub fn save(&self, edges_path: &Path, users_path: &Path) -> Result<()> {
        let mut out = String::new();
        for e in &self.edges {
            let _ = writeln!(out, "{}\t{}\t{}", self.users[e.i], self.users[e.j], e.weight);
        }
        std::fs::write(edges_path, out)?;
        std::fs::write(users_path, self.users.join("\n") + "\n")?;
        Ok(())
    }

    pub fn load(edges_path: &Path, users_path: &Path) -> Result<Self> {
        let users_text = std::fs::read_to_string(users_path)?;
        let users: Vec<String> = users_text.lines().map(str::to_string).collect();
        if users.len() < 2 {
            return Err(Error::DegenerateNetwork(users.len()));
        }
        let index: HashMap<&str, usize> = users
            .iter()
            .enumerate()
            .map(|(i, u)| (u.as_str(), i))
            .collect();
        let origin = edges_path.display().to_string();
        let text = std::fs::read_to_string(edges_path)?;
        let mut edges = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let parse_user = |f: Option<&str>| -> Result<usize> {
                let id = f.ok_or_else(|| Error::Parse {
                    path: origin.clone(),
                    line: idx + 1,
                    msg: "expected `user_i\\tuser_j\\tweight`".to_string(),
                })?;
                index.get(id).copied().ok_or_else(|| Error::Validation {
                    path: origin.clone(),
                    line: idx + 1,
                    msg: format!("user {id:?} missing from manifest"),
                })
            };
            let i = parse_user(fields.next())?;
            let j = parse_user(fields.next())?;
            let weight: f64 = fields
                .next()
                .and_then(|w| w.parse().ok())
                .ok_or_else(|| Error::Parse {
                    path: origin.clone(),
                    line: idx + 1,
                    msg: "bad weight field".to_string(),
                })?;
            edges.push(Edge {
                i: i.min(j),
                j: i.max(j),
                weight,
            });
        }
        Ok(Self::from_edges(users, edges, f64::NAN))
    }
}

/// Build the signed network. Pair weights come from [`features::pair_features`];
/// only pairs co-reviewing at least `min_co_reviews` products are scored.
pub fn build_network(
    dataset: &Dataset,
    config: &FeatureConfig,
    min_co_reviews: usize,
) -> Result<SignedNetwork> {
    build_network_with_features(dataset, config, min_co_reviews).map(|(n, _)| n)
}

/// As [`build_network`], also returning the per-pair features of every
/// materialized pair (including weight-0 pairs that stored no edge).
pub fn build_network_with_features(
    dataset: &Dataset,
    config: &FeatureConfig,
    min_co_reviews: usize,
) -> Result<(SignedNetwork, Vec<PairFeatures>)> {
    config.validate()?;
    if min_co_reviews < 1 {
        return Err(Error::Config(format!(
            "min_co_reviews must be >= 1, got {min_co_reviews}"
        )));
    }
    if dataset.n_users() < 2 {
        return Err(Error::DegenerateNetwork(dataset.n_users()));
    }

    // Count co-reviews per pair through the inverted index.
    let mut co_counts: HashMap<(u32, u32), u32> = HashMap::new();
    for p in 0..dataset.n_products() {
        let reviewers = dataset.reviewers_of(p);
        for (a, &u) in reviewers.iter().enumerate() {
            for &v in &reviewers[a + 1..] {
                *co_counts.entry((u, v)).or_insert(0) += 1;
            }
        }
    }
    let mut candidates: Vec<(u32, u32)> = co_counts
        .into_iter()
        .filter(|&(_, c)| c as usize >= min_co_reviews)
        .map(|(pair, _)| pair)
        .collect();
    candidates.sort_unstable();

    let provisional_zeta = match config.zeta {
        ZetaMode::Fixed(z) => z,
        ZetaMode::MeanAgreement => 0.0,
    };
    let mut pairs: Vec<PairFeatures> = candidates
        .into_par_iter()
        .map(|(u, v)| features::pair_features(dataset, u as usize, v as usize, config, provisional_zeta))
        .collect::<Result<_>>()?;

    let zeta = match config.zeta {
        ZetaMode::Fixed(z) => z,
        ZetaMode::MeanAgreement => {
            let mean = pairs.iter().map(|p| p.h_bar).sum::<f64>() / pairs.len().max(1) as f64;
            for p in &mut pairs {
                p.weight = features::edge_weight(p.h_bar, p.eta_pi, mean);
            }
            mean
        }
    };

    let edges = pairs
        .iter()
        .map(|p| Edge {
            i: p.i,
            j: p.j,
            weight: p.weight,
        })
        .collect();
    let network = SignedNetwork::from_edges(dataset.users().to_vec(), edges, zeta);
    Ok((network, pairs))
}

/// Negative edges currently gated out of the direct loss.
#[derive(Debug, Clone, Default)]
pub struct IndicatorState {
    deactivated: HashSet<(u32, u32)>,
}

impl IndicatorState {
    /// Every edge active; valid before the first training iteration.
    pub fn all_active() -> Self {
        Self::default()
    }

    pub fn is_active(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j) as u32, i.max(j) as u32);
        !self.deactivated.contains(&key)
    }

    pub fn deactivated_count(&self) -> usize {
        self.deactivated.len()
    }
}

/// Squared Euclidean distance between rows `i` and `j`.
pub(crate) fn row_dist2(u: &Array2<f64>, i: usize, j: usize) -> f64 {
    let (ri, rj) = (u.row(i), u.row(j));
    ri.iter()
        .zip(rj.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Re-evaluate the gate: a negative edge is deactivated once the embedded
/// distance exceeds its margin `−δ/w`. Positive edges are never gated.
pub fn update_indicator(
    network: &SignedNetwork,
    u: &Array2<f64>,
    delta: f64,
) -> Result<IndicatorState> {
    if delta <= 0.0 {
        return Err(Error::Config(format!("delta must be > 0, got {delta}")));
    }
    let deactivated = network
        .negative_edges()
        .filter(|e| row_dist2(u, e.i, e.j) > -delta / e.weight)
        .map(|e| (e.i as u32, e.j as u32))
        .collect();
    Ok(IndicatorState { deactivated })
}

/// Row-sorted sparse matrix; only the operations the trainer needs.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n: usize,
    /// Per row: `(col, value)` sorted by col.
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// `self · x` for dense `x`.
    pub fn mul_dense(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, x.ncols()));
        for (i, row) in self.rows.iter().enumerate() {
            for &(col, v) in row {
                let src = x.row(col);
                let mut dst = out.row_mut(i);
                dst.zip_mut_with(&src, |d, s| *d += v * s);
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for (i, row) in self.rows.iter().enumerate() {
            for &(col, v) in row {
                out[[i, col]] = v;
            }
        }
        out
    }
}

/// Graph Laplacian `L = D − W̃` over active edges, `D` the active-weight row
/// sums. Deactivated edges contribute nothing.
pub fn laplacian(network: &SignedNetwork, indicator: &IndicatorState) -> SparseMatrix {
    let n = network.n_users();
    let mut diag = vec![0.0; n];
    let mut off: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in network.edges() {
        if !indicator.is_active(e.i, e.j) {
            continue;
        }
        diag[e.i] += e.weight;
        diag[e.j] += e.weight;
        off[e.i].push((e.j, -e.weight));
        off[e.j].push((e.i, -e.weight));
    }
    let rows = off
        .into_iter()
        .enumerate()
        .map(|(i, mut row)| {
            if diag[i] != 0.0 {
                row.push((i, diag[i]));
            }
            row.sort_unstable_by_key(|&(c, _)| c);
            row
        })
        .collect();
    SparseMatrix { n, rows }
}
