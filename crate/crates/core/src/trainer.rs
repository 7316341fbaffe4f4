//! Joint training of the direct embedding matrix U and the indirect (context)
//! embedding matrix Φ.
//!
//! Each epoch runs, in order: re-evaluate the negative-edge gate, rebuild the
//! Laplacian, take one full-matrix step on the direct loss, one on the
//! regularizer, then stream every skip-gram context pair through a
//! negative-sampling update. The direct and indirect terms are weighted
//! `β` / `1−β` at the step level.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::distr::Uniform;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{
    laplacian, row_dist2, update_indicator, IndicatorState, SignedNetwork, SparseMatrix,
};
use crate::walks::{build_sampling_table, NegativeSamplingTable, WalkCorpus};

/// Direct (`u`) and context (`phi`) embeddings, one row per network user.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingState {
    pub u: Array2<f64>,
    pub phi: Array2<f64>,
}

impl EmbeddingState {
    pub fn n_users(&self) -> usize {
        self.u.nrows()
    }

    pub fn k(&self) -> usize {
        self.u.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    /// Linear decay from `initial` at the first epoch to `floor` at the last.
    Decay { initial: f64, floor: f64 },
    Constant(f64),
}

impl LearningRate {
    fn at(&self, epoch: usize, epochs: usize) -> f64 {
        match *self {
            LearningRate::Constant(lr) => lr,
            LearningRate::Decay { initial, floor } => {
                if epochs <= 1 {
                    initial
                } else {
                    initial + (floor - initial) * epoch as f64 / (epochs - 1) as f64
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            LearningRate::Constant(lr) => lr > 0.0,
            LearningRate::Decay { initial, floor } => floor > 0.0 && floor <= initial,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("bad learning rate {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Weight of the direct term; the indirect term gets `1 − beta`.
    pub beta: f64,
    /// Coefficient of the Frobenius regularizer on U.
    pub psi_reg: f64,
    /// Margin constant of the negative-edge gate; the gate trips at
    /// distance² > −delta/w.
    pub delta: f64,
    /// Negative samples per context pair.
    pub kappa: usize,
    pub learning_rate: LearningRate,
    pub epochs: usize,
    /// Embedding dimension.
    pub k: usize,
    pub seed: u64,
    /// 1 = deterministic; >1 shards skip-gram updates lock-free.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            beta: 0.6,
            psi_reg: 0.01,
            delta: 1.0,
            kappa: 8,
            learning_rate: LearningRate::Decay {
                initial: 0.025,
                floor: 1e-4,
            },
            epochs: 100,
            k: 64,
            seed: 0,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must be in [0,1], got {}", self.beta)));
        }
        if self.psi_reg < 0.0 {
            return Err(Error::Config(format!(
                "psi_reg must be >= 0, got {}",
                self.psi_reg
            )));
        }
        if self.delta <= 0.0 {
            return Err(Error::Config(format!("delta must be > 0, got {}", self.delta)));
        }
        if self.epochs < 1 || self.k < 1 || self.workers < 1 {
            return Err(Error::Config(
                "epochs, k and workers must all be >= 1".to_string(),
            ));
        }
        self.learning_rate.validate()
    }
}

const DIVERGENCE_LIMIT: f64 = 1e6;

/// Uniform initialization on [−0.5/K, 0.5/K] for both matrices.
pub fn init_embeddings(user_count: usize, k: usize, seed: u64) -> EmbeddingState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-0.5 / k as f64, 0.5 / k as f64).expect("valid range");
    let mut fill = |_| dist.sample(&mut rng);
    let u = Array2::from_shape_fn((user_count, k), &mut fill);
    let phi = Array2::from_shape_fn((user_count, k), &mut fill);
    EmbeddingState { u, phi }
}

/// Sum of `w·‖u_i−u_j‖²` over active edges, doubled so it equals
/// `2·trace(UᵀLU)` for the Laplacian over the same active edges.
pub fn direct_loss(network: &SignedNetwork, indicator: &IndicatorState, u: &Array2<f64>) -> f64 {
    let acc: f64 = network
        .edges()
        .iter()
        .filter(|e| indicator.is_active(e.i, e.j))
        .map(|e| e.weight * row_dist2(u, e.i, e.j))
        .sum();
    2.0 * acc
}

/// Gradient of [`direct_loss`]: `2(L+Lᵀ)U = 4LU` for the symmetric Laplacian.
pub fn direct_gradient(
    network: &SignedNetwork,
    indicator: &IndicatorState,
    u: &Array2<f64>,
) -> Array2<f64> {
    direct_gradient_from(&laplacian(network, indicator), u)
}

pub fn direct_gradient_from(lap: &SparseMatrix, u: &Array2<f64>) -> Array2<f64> {
    let mut g = lap.mul_dense(u);
    g.mapv_inplace(|x| 4.0 * x);
    g
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// ln σ(x), computed without overflow for large negative x.
fn ln_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(1.0 + (-x).exp()).ln()
    } else {
        x - (1.0 + x.exp()).ln()
    }
}

/// One skip-gram update with an explicit negative set. The center row of `u`
/// moves by the accumulated residual over {context} ∪ negatives; each touched
/// Φ row moves immediately. Returns the pair's negative log likelihood at the
/// pre-update point.
///
/// Safety: `u` and `phi` must point at `rows·k` valid f64s each; indices must
/// be < rows. Lock-free workers may race on rows; updates are plain
/// read-modify-write like word2vec's.
unsafe fn pair_update_raw(
    u: *mut f64,
    phi: *mut f64,
    k: usize,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
) -> f64 {
    let cu = u.add(center * k);
    let mut du = vec![0.0; k];
    let mut nll = 0.0;
    let mut one = |z: usize, target: f64, nll: &mut f64| {
        let pz = phi.add(z * k);
        let mut dot = 0.0;
        for d in 0..k {
            dot += *cu.add(d) * *pz.add(d);
        }
        let s = if target == 1.0 { dot } else { -dot };
        *nll -= ln_sigmoid(s);
        let res = target - sigmoid(dot);
        for (d, g) in du.iter_mut().enumerate() {
            *g += res * *pz.add(d);
            *pz.add(d) += lr * res * *cu.add(d);
        }
    };
    one(context, 1.0, &mut nll);
    for &neg in negatives {
        one(neg, 0.0, &mut nll);
    }
    for (d, &g) in du.iter().enumerate() {
        *cu.add(d) += lr * g;
    }
    nll
}

/// [`indirect_pair_update`] with the negative set fixed by the caller.
pub fn indirect_update_with_negatives(
    state: &mut EmbeddingState,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
) -> f64 {
    let k = state.k();
    unsafe {
        pair_update_raw(
            state.u.as_mut_ptr(),
            state.phi.as_mut_ptr(),
            k,
            center,
            context,
            negatives,
            lr,
        )
    }
}

/// Draw `kappa` negatives from the table (redrawing any that hit the context
/// node) and apply one skip-gram update. Returns the sampled pair NLL.
pub fn indirect_pair_update(
    state: &mut EmbeddingState,
    center: usize,
    context: usize,
    table: &NegativeSamplingTable,
    kappa: usize,
    lr: f64,
    rng: &mut impl Rng,
) -> f64 {
    let negatives = draw_negatives(table, context, kappa, rng);
    indirect_update_with_negatives(state, center, context, &negatives, lr)
}

fn draw_negatives(
    table: &NegativeSamplingTable,
    context: usize,
    kappa: usize,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let mut negatives = Vec::with_capacity(kappa);
    for _ in 0..kappa {
        for _attempt in 0..100 {
            let z = table.sample(rng);
            if z != context {
                negatives.push(z);
                break;
            }
        }
    }
    negatives
}

#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    /// Direct loss at epoch start, after the gate update.
    pub direct: f64,
    /// Sampled negative-log-likelihood accumulated over the epoch's pairs.
    pub indirect: f64,
    /// `psi_reg·‖U‖²_F` at epoch start.
    pub reg: f64,
    /// `β·direct + (1−β)·indirect + reg`.
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub state: EmbeddingState,
    pub epochs: Vec<EpochStats>,
}

struct SharedState {
    u: *mut f64,
    phi: *mut f64,
    k: usize,
}

unsafe impl Send for SharedState {}
unsafe impl Sync for SharedState {}

/// Run the full training loop over a built network and walk corpus.
pub fn train(
    network: &SignedNetwork,
    corpus: &WalkCorpus,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    let n = network.n_users();
    if n == 0 {
        return Err(Error::DegenerateNetwork(0));
    }
    let mut state = init_embeddings(n, config.k, config.seed);

    let indirect_on = config.beta < 1.0 && !corpus.context_pairs.is_empty();
    if config.beta < 1.0 && corpus.context_pairs.is_empty() {
        log::warn!("empty walk corpus: indirect term skipped, training direct only");
    }
    let table = if indirect_on {
        Some(build_sampling_table(network)?)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9E37_79B9));

    let mut stats = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = config.learning_rate.at(epoch, config.epochs);

        let indicator = update_indicator(network, &state.u, config.delta)?;
        let lap = laplacian(network, &indicator);
        let direct = direct_loss(network, &indicator, &state.u);
        let reg = config.psi_reg * state.u.iter().map(|x| x * x).sum::<f64>();

        if config.beta > 0.0 {
            let grad = direct_gradient_from(&lap, &state.u);
            state.u.zip_mut_with(&grad, |u, g| *u -= lr * config.beta * g);
        }
        if config.psi_reg > 0.0 {
            let shrink = 1.0 - 2.0 * lr * config.psi_reg;
            state.u.mapv_inplace(|x| x * shrink);
        }

        let mut indirect = 0.0;
        if indirect_on {
            let table = table.as_ref().unwrap();
            let pair_lr = lr * (1.0 - config.beta);
            if config.workers <= 1 {
                for &(center, context) in &corpus.context_pairs {
                    indirect += indirect_pair_update(
                        &mut state,
                        center as usize,
                        context as usize,
                        table,
                        config.kappa,
                        pair_lr,
                        &mut rng,
                    );
                }
            } else {
                indirect = parallel_indirect_pass(
                    &mut state,
                    &corpus.context_pairs,
                    table,
                    config,
                    pair_lr,
                    epoch,
                );
            }
        }

        if let Some(bad) = state
            .u
            .iter()
            .chain(state.phi.iter())
            .find(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT)
        {
            log::error!("entry {bad} out of range at epoch {epoch}");
            return Err(Error::Divergence { epoch });
        }

        let total = config.beta * direct + (1.0 - config.beta) * indirect + reg;
        log::info!(
            "epoch {epoch}: lr {lr:.6} direct {direct:.6} indirect {indirect:.6} reg {reg:.6} total {total:.6}"
        );
        stats.push(EpochStats {
            epoch,
            lr,
            direct,
            indirect,
            reg,
            total,
        });
    }
    Ok(TrainOutput {
        state,
        epochs: stats,
    })
}

/// Lock-free sharded skip-gram pass; row updates may race (word2vec-style),
/// so results are not bit-reproducible across runs.
fn parallel_indirect_pass(
    state: &mut EmbeddingState,
    pairs: &[(u32, u32)],
    table: &NegativeSamplingTable,
    config: &TrainConfig,
    pair_lr: f64,
    epoch: usize,
) -> f64 {
    let shared = SharedState {
        u: state.u.as_mut_ptr(),
        phi: state.phi.as_mut_ptr(),
        k: config.k,
    };
    let chunk = pairs.len().div_ceil(config.workers);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (w, slice) in pairs.chunks(chunk).enumerate() {
            let shared = &shared;
            handles.push(scope.spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    config
                        .seed
                        .wrapping_add(0x5851_F42D)
                        .wrapping_add((epoch * config.workers + w) as u64),
                );
                let mut nll = 0.0;
                for &(center, context) in slice {
                    let negatives = draw_negatives(table, context as usize, config.kappa, &mut rng);
                    nll += unsafe {
                        pair_update_raw(
                            shared.u,
                            shared.phi,
                            shared.k,
                            center as usize,
                            context as usize,
                            &negatives,
                            pair_lr,
                        )
                    };
                }
                nll
            }));
        }
        handles.into_iter().map(|h| h.join().unwrap()).sum()
    })
}

/// Write a matrix as text: header `user_count K`, then `user_id v_1 ... v_K`
/// per row. Values round-trip exactly.
pub fn save_embedding_text(m: &Array2<f64>, users: &[String], path: &Path) -> Result<()> {
    assert_eq!(m.nrows(), users.len(), "row/user count mismatch");
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for (row, user) in m.rows().into_iter().zip(users) {
        out.push_str(user);
        for v in row {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_embedding_text(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: origin.clone(),
        line: 1,
        msg: "missing header".to_string(),
    })?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: origin.clone(),
        line,
        msg,
    };
    let mut head = header.split_whitespace();
    let n: usize = head
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| parse_err(1, "bad user count".to_string()))?;
    let k: usize = head
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| parse_err(1, "bad dimension".to_string()))?;
    let mut users = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * k);
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        users.push(
            fields
                .next()
                .ok_or_else(|| parse_err(idx + 1, "missing user id".to_string()))?
                .to_string(),
        );
        let before = data.len();
        for f in fields {
            data.push(
                f.parse::<f64>()
                    .map_err(|_| parse_err(idx + 1, format!("bad value {f:?}")))?,
            );
        }
        if data.len() - before != k {
            return Err(parse_err(
                idx + 1,
                format!("expected {k} values, got {}", data.len() - before),
            ));
        }
    }
    if users.len() != n {
        return Err(parse_err(1, format!("expected {n} rows, got {}", users.len())));
    }
    let m = Array2::from_shape_vec((n, k), data).expect("validated shape");
    Ok((users, m))
}

/// Binary variant: two u32 LE (rows, cols), then row-major f32 LE values.
/// User order comes from the side manifest, as with the network edge list.
pub fn save_embedding_binary(m: &Array2<f64>, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&(m.nrows() as u32).to_le_bytes())?;
    f.write_all(&(m.ncols() as u32).to_le_bytes())?;
    for v in m.iter() {
        f.write_all(&(*v as f32).to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

pub fn load_embedding_binary(path: &Path) -> Result<Array2<f64>> {
    let origin = path.display().to_string();
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut word = [0u8; 4];
    let mut read_u32 = |f: &mut dyn Read| -> Result<u32> {
        f.read_exact(&mut word).map_err(Error::Io)?;
        Ok(u32::from_le_bytes(word))
    };
    let n = read_u32(&mut f)? as usize;
    let k = read_u32(&mut f)? as usize;
    let mut data = vec![0u8; n * k * 4];
    f.read_exact(&mut data).map_err(|_| Error::Parse {
        path: origin,
        line: 0,
        msg: format!("truncated: expected {n}x{k} f32 values"),
    })?;
    let values = data
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(Array2::from_shape_vec((n, k), values).expect("sized above"))
}
