//! Positive-link random walks, skip-gram context pairs, and the
//! degree-weighted negative-sampling table.

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::SignedNetwork;

#[derive(Debug, Clone)]
pub struct WalkConfig {
    /// Walks started from each user.
    pub walks_per_node: usize,
    /// Maximum sequence length, counted in nodes.
    pub walk_length: usize,
    /// Skip-gram window; positions i, j pair up when |i-j| < window.
    pub window: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walks_per_node: 30,
            walk_length: 8,
            window: 5,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("walks_per_node", self.walks_per_node),
            ("walk_length", self.walk_length),
            ("window", self.window),
        ] {
            if v < 1 {
                return Err(Error::Config(format!("{name} must be >= 1, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    /// User-index sequences, walker-major order: all walks of user 0, then
    /// user 1, and so on.
    pub sequences: Vec<Vec<u32>>,
    /// `(center, context)` pairs extracted with the generating window.
    pub context_pairs: Vec<(u32, u32)>,
}

/// splitmix64 finalizer; decorrelates consecutive seeds.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Each walk owns an RNG stream derived from (seed, user, walk index), so the
/// corpus is identical however generation is scheduled.
fn walk_seed(seed: u64, user: u64, walk: u64) -> u64 {
    mix64(mix64(mix64(seed) ^ user) ^ walk)
}

/// Run `walks_per_node` truncated random walks from every user. Steps follow
/// positive edges only, drawn proportionally to edge weight; a walk stops
/// early at a node without positive neighbors.
pub fn generate_walks(network: &SignedNetwork, config: &WalkConfig) -> Result<WalkCorpus> {
    config.validate()?;
    let adj = network.positive_adjacency();
    let samplers: Vec<Option<WeightedIndex<f64>>> = adj
        .iter()
        .map(|list| {
            if list.is_empty() {
                None
            } else {
                Some(WeightedIndex::new(list.iter().map(|&(_, w)| w)).expect("positive weights"))
            }
        })
        .collect();

    let n = network.n_users();
    let r = config.walks_per_node;
    let sequences: Vec<Vec<u32>> = (0..n * r)
        .into_par_iter()
        .map(|flat| {
            let (user, walk) = (flat / r, flat % r);
            let mut rng =
                ChaCha8Rng::seed_from_u64(walk_seed(config.seed, user as u64, walk as u64));
            let mut seq = Vec::with_capacity(config.walk_length);
            seq.push(user as u32);
            while seq.len() < config.walk_length {
                let cur = *seq.last().unwrap() as usize;
                match &samplers[cur] {
                    Some(dist) => seq.push(adj[cur][dist.sample(&mut rng)].0 as u32),
                    None => break,
                }
            }
            seq
        })
        .collect();

    let context_pairs = extract_context_pairs(&sequences, config.window);
    Ok(WalkCorpus {
        sequences,
        context_pairs,
    })
}

/// One space-separated user-id sequence per line.
pub fn save_corpus(
    corpus: &WalkCorpus,
    users: &[String],
    path: &std::path::Path,
) -> Result<()> {
    let mut out = String::new();
    for seq in &corpus.sequences {
        let mut first = true;
        for &node in seq {
            if !first {
                out.push(' ');
            }
            out.push_str(&users[node as usize]);
            first = false;
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// All (center, context) pairs with `|i - j| < window`, `i != j`, clipped at
/// sequence ends; emitted center-major in sequence order.
pub fn extract_context_pairs(sequences: &[Vec<u32>], window: usize) -> Vec<(u32, u32)> {
    let mut pairs = Vec::new();
    for seq in sequences {
        for i in 0..seq.len() {
            let lo = i.saturating_sub(window - 1);
            let hi = (i + window).min(seq.len());
            for j in lo..hi {
                if j != i {
                    pairs.push((seq[i], seq[j]));
                }
            }
        }
    }
    pairs
}

/// Noise distribution for negative sampling: P(u) proportional to
/// positive-degree(u)^(3/4).
#[derive(Debug, Clone)]
pub struct NegativeSamplingTable {
    probs: Vec<f64>,
    dist: WeightedIndex<f64>,
}

pub fn build_sampling_table(network: &SignedNetwork) -> Result<NegativeSamplingTable> {
    let weights: Vec<f64> = (0..network.n_users())
        .map(|u| (network.positive_degree(u) as f64).powf(0.75))
        .collect();
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(Error::EmptySamplingTable);
    }
    let dist = WeightedIndex::new(&weights).expect("nonzero total");
    let probs = weights.iter().map(|w| w / total).collect();
    Ok(NegativeSamplingTable { probs, dist })
}

impl NegativeSamplingTable {
    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        self.dist.sample(rng)
    }

    pub fn probability(&self, user: usize) -> f64 {
        self.probs[user]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}
