//! Spamicity scoring and ranking over the trained direct embeddings.
//!
//! A pair scores `exp(−‖u_i−u_j‖²)`; a user's spamicity is the mean of their
//! `n` best pair scores. Colluders sit in tight embedding clusters, so their
//! nearest peers are very near and the mean stays close to 1.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::row_dist2;

#[derive(Debug, Clone)]
pub struct SpamicityRanking {
    /// `(user_id, score)`, descending score, ties by ascending id.
    entries: Vec<(String, f64)>,
    /// Top-n parameter used to produce the scores; None when loaded from disk.
    n: Option<usize>,
}

impl SpamicityRanking {
    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn top_n(&self) -> Option<usize> {
        self.n
    }

    /// `rank\tuser_id\tscore` lines, rank starting at 1.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (rank, (user, score)) in self.entries.iter().enumerate() {
            let _ = writeln!(out, "{}\t{user}\t{score}", rank + 1);
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let bad = |msg: &str| Error::Parse {
                path: origin.clone(),
                line: idx + 1,
                msg: msg.to_string(),
            };
            fields.next().ok_or_else(|| bad("missing rank"))?;
            let user = fields.next().ok_or_else(|| bad("missing user id"))?;
            let score: f64 = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad score"))?;
            entries.push((user.to_string(), score));
        }
        Ok(Self { entries, n: None })
    }
}

/// `exp(−‖u_i−u_j‖²)`, in (0,1]; 1 exactly when the rows are equal.
pub fn pair_score(u: &Array2<f64>, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Err(Error::SelfPair(i));
    }
    Ok((-row_dist2(u, i, j)).exp())
}

/// Mean of the top-n pair scores of user `i` against all other users.
pub fn spamicity(u: &Array2<f64>, i: usize, n: usize) -> Result<f64> {
    let others = u.nrows() - 1;
    if others == 0 {
        return Err(Error::UndefinedScore);
    }
    let n_eff = if n > others {
        log::warn!("top-n {n} clamped to {others} available peers");
        others
    } else {
        n.max(1)
    };
    Ok(spamicity_clamped(u, i, n_eff))
}

/// `n` must already be within [1, rows−1].
fn spamicity_clamped(u: &Array2<f64>, i: usize, n: usize) -> f64 {
    let mut dists: Vec<f64> = (0..u.nrows())
        .filter(|&j| j != i)
        .map(|j| row_dist2(u, i, j))
        .collect();
    // smallest distances = largest scores; summed in ascending-distance order
    // so a full-sort reimplementation lands on the same floats.
    if n < dists.len() {
        dists.select_nth_unstable_by(n - 1, f64::total_cmp);
        dists.truncate(n);
    }
    dists.sort_unstable_by(f64::total_cmp);
    dists.iter().map(|d| (-d).exp()).sum::<f64>() / n as f64
}

/// Score every user and sort descending; ties break by ascending user id.
pub fn rank_users(u: &Array2<f64>, users: &[String], n: usize) -> Result<SpamicityRanking> {
    assert_eq!(u.nrows(), users.len(), "row/user count mismatch");
    let others = match u.nrows() {
        0 | 1 => return Err(Error::UndefinedScore),
        rows => rows - 1,
    };
    let n_eff = if n > others {
        log::warn!("top-n {n} clamped to {others} available peers");
        others
    } else {
        n.max(1)
    };
    let mut entries: Vec<(String, f64)> = (0..u.nrows())
        .into_par_iter()
        .map(|i| (users[i].clone(), spamicity_clamped(u, i, n_eff)))
        .collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(SpamicityRanking {
        entries,
        n: Some(n_eff),
    })
}
