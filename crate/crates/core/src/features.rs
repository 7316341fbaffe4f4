//! Pairwise behavioral proximities and the signed edge weight.
//!
//! For a candidate user pair the module scores four proximities, each in
//! (0,1]: rating and timing agreement over co-reviewed products, and the same
//! two at category granularity. Their convex combination is the agreement
//! score ħ; the edge weight is `(ħ − ζ)` scaled by an overlap confidence.

use crate::error::{Error, Result};
use crate::review::Dataset;

/// How raw per-second time deviations are normalized before the temporal
/// kernel is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeUnit {
    /// Divide by the dataset's observed time-span length; deviations land in
    /// [0,1]. A dataset with a single distinct timestamp yields deviation 0.
    Span,
    /// Divide by a fixed number of seconds.
    Fixed(f64),
}

/// Threshold splitting agreement into positive and negative edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZetaMode {
    Fixed(f64),
    /// Use the mean of ħ over all materialized pairs.
    MeanAgreement,
}

#[derive(Debug, Clone)]
pub struct FeatureConfig {
    /// Convex weights over (product-rating, product-time, category-rating,
    /// category-time), in that order.
    pub alpha: [f64; 4],
    pub zeta: ZetaMode,
    /// Trade-off constant in the temporal kernel `1/(C + γ·Γ)`.
    pub gamma_tradeoff: f64,
    /// Smoothing constant C in the same kernel.
    pub smoothing_c: f64,
    pub time_unit: TimeUnit,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            alpha: [0.25; 4],
            zeta: ZetaMode::Fixed(0.35),
            gamma_tradeoff: 20.0,
            smoothing_c: 1.0,
            time_unit: TimeUnit::Span,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        validate_alpha(&self.alpha)?;
        if self.gamma_tradeoff <= 0.0 {
            return Err(Error::Config(format!(
                "gamma_tradeoff must be > 0, got {}",
                self.gamma_tradeoff
            )));
        }
        if self.smoothing_c <= 0.0 {
            return Err(Error::Config(format!(
                "smoothing_c must be > 0, got {}",
                self.smoothing_c
            )));
        }
        if let TimeUnit::Fixed(s) = self.time_unit {
            if s <= 0.0 {
                return Err(Error::Config(format!("time unit must be > 0, got {s}")));
            }
        }
        if let ZetaMode::Fixed(z) = self.zeta {
            if !z.is_finite() {
                return Err(Error::Config(format!("zeta must be finite, got {z}")));
            }
        }
        Ok(())
    }
}

fn validate_alpha(alpha: &[f64; 4]) -> Result<()> {
    if alpha.iter().any(|&a| a < 0.0) || (alpha.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "alpha {alpha:?} must be non-negative and sum to 1"
        )));
    }
    Ok(())
}

/// Everything computed for one materialized user pair.
#[derive(Debug, Clone, Copy)]
pub struct PairFeatures {
    pub i: usize,
    pub j: usize,
    pub psi_pr: f64,
    pub psi_pt: f64,
    pub psi_cr: f64,
    pub psi_ct: f64,
    pub h_bar: f64,
    pub eta_pi: f64,
    pub weight: f64,
    /// Number of co-reviewed products.
    pub co_reviewed: usize,
}

fn rating_kernel(gamma: f64) -> f64 {
    2.0 / (1.0 + gamma.exp())
}

fn time_kernel(gamma: f64, smoothing_c: f64, gamma_tradeoff: f64) -> f64 {
    1.0 / (smoothing_c + gamma_tradeoff * gamma)
}

/// Normalization divisor for time deviations; 0 means "all deviations are 0".
fn time_scale(dataset: &Dataset, unit: TimeUnit) -> f64 {
    match unit {
        TimeUnit::Span => dataset.span_seconds() as f64,
        TimeUnit::Fixed(s) => s,
    }
}

/// Sum of |Δ mean rating| and |Δ mean time| over co-reviewed products,
/// plus the co-review count.
fn product_deviations(dataset: &Dataset, i: usize, j: usize) -> (usize, f64, f64) {
    let (mut a, mut b) = (
        dataset.user_group_list(i).iter().peekable(),
        dataset.user_group_list(j).iter().peekable(),
    );
    let (mut n, mut dr, mut dt) = (0usize, 0.0, 0.0);
    while let (Some(&&(pa, ga)), Some(&&(pb, gb))) = (a.peek(), b.peek()) {
        match pa.cmp(&pb) {
            std::cmp::Ordering::Less => {
                a.next();
            }
            std::cmp::Ordering::Greater => {
                b.next();
            }
            std::cmp::Ordering::Equal => {
                let (gi, gj) = (dataset.group_by_id(ga), dataset.group_by_id(gb));
                n += 1;
                dr += (gi.mean_rating - gj.mean_rating).abs();
                dt += (gi.mean_time - gj.mean_time).abs();
                a.next();
                b.next();
            }
        }
    }
    (n, dr, dt)
}

/// As [`product_deviations`] over shared categories, using category means.
fn category_deviations(dataset: &Dataset, i: usize, j: usize) -> (usize, f64, f64) {
    let (mut a, mut b) = (
        dataset.user_category_list(i).iter().peekable(),
        dataset.user_category_list(j).iter().peekable(),
    );
    let (mut n, mut dr, mut dt) = (0usize, 0.0, 0.0);
    while let (Some(&sa), Some(&sb)) = (a.peek(), b.peek()) {
        match sa.category.cmp(&sb.category) {
            std::cmp::Ordering::Less => {
                a.next();
            }
            std::cmp::Ordering::Greater => {
                b.next();
            }
            std::cmp::Ordering::Equal => {
                n += 1;
                dr += (sa.mean_rating - sb.mean_rating).abs();
                dt += (sa.mean_time - sb.mean_time).abs();
                a.next();
                b.next();
            }
        }
    }
    (n, dr, dt)
}

fn no_overlap(dataset: &Dataset, i: usize, j: usize) -> Error {
    Error::NoOverlap(dataset.users()[i].clone(), dataset.users()[j].clone())
}

/// Rating agreement over co-reviewed products: `2/(1+exp(Γ))` where Γ is the
/// mean absolute difference of per-product mean ratings.
pub fn product_rating_proximity(dataset: &Dataset, i: usize, j: usize) -> Result<f64> {
    let (n, dr, _) = product_deviations(dataset, i, j);
    if n == 0 {
        return Err(no_overlap(dataset, i, j));
    }
    Ok(rating_kernel(dr / n as f64))
}

/// Timing agreement over co-reviewed products: `1/(C + γ·Γ)` where Γ is the
/// mean normalized absolute difference of per-product mean timestamps.
pub fn product_time_proximity(
    dataset: &Dataset,
    i: usize,
    j: usize,
    config: &FeatureConfig,
) -> Result<f64> {
    let (n, _, dt) = product_deviations(dataset, i, j);
    if n == 0 {
        return Err(no_overlap(dataset, i, j));
    }
    let scale = time_scale(dataset, config.time_unit);
    let gamma = if scale > 0.0 { dt / scale / n as f64 } else { 0.0 };
    Ok(time_kernel(gamma, config.smoothing_c, config.gamma_tradeoff))
}

/// Rating agreement at category granularity, over shared categories.
pub fn category_rating_proximity(dataset: &Dataset, i: usize, j: usize) -> Result<f64> {
    let (n, dr, _) = category_deviations(dataset, i, j);
    if n == 0 {
        return Err(no_overlap(dataset, i, j));
    }
    Ok(rating_kernel(dr / n as f64))
}

/// Timing agreement at category granularity, over shared categories.
pub fn category_time_proximity(
    dataset: &Dataset,
    i: usize,
    j: usize,
    config: &FeatureConfig,
) -> Result<f64> {
    let (n, _, dt) = category_deviations(dataset, i, j);
    if n == 0 {
        return Err(no_overlap(dataset, i, j));
    }
    let scale = time_scale(dataset, config.time_unit);
    let gamma = if scale > 0.0 { dt / scale / n as f64 } else { 0.0 };
    Ok(time_kernel(gamma, config.smoothing_c, config.gamma_tradeoff))
}

/// Agreement score ħ: convex combination of the four proximities.
pub fn combine(features: [f64; 4], alpha: [f64; 4]) -> Result<f64> {
    validate_alpha(&alpha)?;
    Ok(features.iter().zip(&alpha).map(|(f, a)| f * a).sum())
}

/// Overlap confidence: `|P_i ∩ P_j| / (√|P_i|·√|P_j|)`.
pub fn confidence(dataset: &Dataset, i: usize, j: usize) -> Result<f64> {
    let (pi, pj) = (dataset.products_of(i), dataset.products_of(j));
    if pi == 0 || pj == 0 {
        let who = if pi == 0 { i } else { j };
        return Err(Error::UndefinedConfidence(dataset.users()[who].clone()));
    }
    let (shared, _, _) = product_deviations(dataset, i, j);
    Ok(shared as f64 / ((pi * pj) as f64).sqrt())
}

/// Signed edge weight `(ħ − ζ)·η`.
pub fn edge_weight(h_bar: f64, eta_pi: f64, zeta: f64) -> f64 {
    (h_bar - zeta) * eta_pi
}

/// Compute every pair feature in one pass over the two users' indexes.
/// `zeta` must already be resolved to a number.
pub fn pair_features(
    dataset: &Dataset,
    i: usize,
    j: usize,
    config: &FeatureConfig,
    zeta: f64,
) -> Result<PairFeatures> {
    if i == j {
        return Err(Error::SelfPair(i));
    }
    let (np, dr_p, dt_p) = product_deviations(dataset, i, j);
    if np == 0 {
        return Err(no_overlap(dataset, i, j));
    }
    // A shared product implies its category is shared, so nc >= 1 here.
    let (nc, dr_c, dt_c) = category_deviations(dataset, i, j);
    debug_assert!(nc >= 1);
    let scale = time_scale(dataset, config.time_unit);
    let norm = |dt: f64, n: usize| {
        if scale > 0.0 {
            dt / scale / n as f64
        } else {
            0.0
        }
    };

    let psi_pr = rating_kernel(dr_p / np as f64);
    let psi_pt = time_kernel(norm(dt_p, np), config.smoothing_c, config.gamma_tradeoff);
    let psi_cr = rating_kernel(dr_c / nc as f64);
    let psi_ct = time_kernel(norm(dt_c, nc), config.smoothing_c, config.gamma_tradeoff);
    let h_bar = combine([psi_pr, psi_pt, psi_cr, psi_ct], config.alpha)?;
    let eta_pi = np as f64 / ((dataset.products_of(i) * dataset.products_of(j)) as f64).sqrt();
    Ok(PairFeatures {
        i,
        j,
        psi_pr,
        psi_pt,
        psi_cr,
        psi_ct,
        h_bar,
        eta_pi,
        weight: edge_weight(h_bar, eta_pi, zeta),
        co_reviewed: np,
    })
}

/// Comma-separated dump, one line per pair, exact round-trip formatting.
pub fn save_pair_features(
    pairs: &[PairFeatures],
    users: &[String],
    path: &std::path::Path,
) -> Result<()> {
    use std::fmt::Write;
    let mut out = String::from("user_i,user_j,psi_pr,psi_pt,psi_cr,psi_ct,h_bar,eta_pi,weight\n");
    for p in pairs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            users[p.i], users[p.j], p.psi_pr, p.psi_pt, p.psi_cr, p.psi_ct, p.h_bar, p.eta_pi,
            p.weight
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::review::{Dataset, ReviewRecord};
    use approx::assert_relative_eq;

    fn rec(u: &str, p: &str, c: &str, r: f64, t: i64) -> ReviewRecord {
        ReviewRecord {
            user_id: u.into(),
            product_id: p.into(),
            category_id: c.into(),
            rating: r,
            timestamp: t,
        }
    }

    fn dataset(records: Vec<ReviewRecord>) -> Dataset {
        Dataset::from_records(records, 1.0, 5.0, "<test>").unwrap()
    }

    #[test]
    fn identical_mean_ratings_give_unit_proximity() {
        let ds = dataset(vec![
            rec("a", "p1", "c1", 4.0, 0),
            rec("b", "p1", "c1", 4.0, 100),
        ]);
        assert_eq!(product_rating_proximity(&ds, 0, 1).unwrap(), 1.0);
    }

    #[test]
    fn extreme_rating_deviation() {
        let ds = dataset(vec![
            rec("a", "p1", "c1", 1.0, 0),
            rec("b", "p1", "c1", 5.0, 0),
        ]);
        assert_relative_eq!(
            product_rating_proximity(&ds, 0, 1).unwrap(),
            2.0 / (1.0 + 4f64.exp()),
            max_relative = 1e-15
        );
    }

    #[test]
    fn rating_deviations_average_over_shared_products() {
        // deviations {0, 2} -> gamma 1
        let ds = dataset(vec![
            rec("a", "p1", "c1", 3.0, 0),
            rec("a", "p2", "c1", 1.0, 0),
            rec("b", "p1", "c1", 3.0, 0),
            rec("b", "p2", "c1", 3.0, 0),
        ]);
        assert_relative_eq!(
            product_rating_proximity(&ds, 0, 1).unwrap(),
            2.0 / (1.0 + 1f64.exp()),
            max_relative = 1e-15
        );
    }

    #[test]
    fn time_proximity_at_fractions_of_the_span() {
        // span 1000s via a's second product; shared product deviation 50s.
        let cfg = FeatureConfig::default();
        let ds = dataset(vec![
            rec("a", "p1", "c1", 3.0, 0),
            rec("a", "pad", "c1", 3.0, 1000),
            rec("b", "p1", "c1", 3.0, 50),
        ]);
        assert_relative_eq!(
            product_time_proximity(&ds, 0, 1, &cfg).unwrap(),
            0.5,
            max_relative = 1e-15
        );

        // full-span deviation -> 1/(1+20)
        let ds = dataset(vec![
            rec("a", "p1", "c1", 3.0, 0),
            rec("b", "p1", "c1", 3.0, 1000),
        ]);
        assert_relative_eq!(
            product_time_proximity(&ds, 0, 1, &cfg).unwrap(),
            1.0 / 21.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn identical_times_give_unit_proximity_even_on_wide_spans() {
        let cfg = FeatureConfig::default();
        let ds = dataset(vec![
            rec("a", "p1", "c1", 3.0, 500),
            rec("b", "p1", "c1", 3.0, 500),
            rec("c", "p2", "c1", 3.0, 0),
            rec("c", "p3", "c1", 3.0, 99999),
        ]);
        assert_eq!(product_time_proximity(&ds, 0, 1, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn category_rating_proximity_needs_no_shared_product() {
        // distinct products, same category; category means 1 vs 4.
        let ds = dataset(vec![
            rec("a", "p1", "c1", 1.0, 0),
            rec("b", "p2", "c1", 4.0, 0),
        ]);
        assert!(product_rating_proximity(&ds, 0, 1).is_err());
        assert_relative_eq!(
            category_rating_proximity(&ds, 0, 1).unwrap(),
            2.0 / (1.0 + 3f64.exp()),
            max_relative = 1e-15
        );
    }

    #[test]
    fn category_rating_deviations_average_over_shared_categories() {
        // deviations {1, 3} -> gamma 2
        let ds = dataset(vec![
            rec("a", "p1", "c1", 2.0, 0),
            rec("a", "p2", "c2", 1.0, 0),
            rec("b", "p3", "c1", 3.0, 0),
            rec("b", "p4", "c2", 4.0, 0),
        ]);
        assert_relative_eq!(
            category_rating_proximity(&ds, 0, 1).unwrap(),
            2.0 / (1.0 + 2f64.exp()),
            max_relative = 1e-15
        );
    }

    #[test]
    fn category_time_proximity_fractions() {
        let cfg = FeatureConfig::default();
        // span 1000, category mean times 0 vs 50 -> gamma 0.05 -> 0.5
        let ds = dataset(vec![
            rec("a", "p1", "c1", 3.0, 0),
            rec("a", "pad", "c2", 3.0, 1000),
            rec("b", "p2", "c1", 3.0, 50),
        ]);
        assert_relative_eq!(
            category_time_proximity(&ds, 0, 1, &cfg).unwrap(),
            0.5,
            max_relative = 1e-15
        );

        // gamma 0.5 -> 1/11
        let ds = dataset(vec![
            rec("a", "p1", "c1", 3.0, 0),
            rec("a", "pad", "c2", 3.0, 1000),
            rec("b", "p2", "c1", 3.0, 500),
        ]);
        assert_relative_eq!(
            category_time_proximity(&ds, 0, 1, &cfg).unwrap(),
            1.0 / 11.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn combine_examples() {
        let uniform = [0.25; 4];
        assert_eq!(combine([1.0; 4], uniform).unwrap(), 1.0);
        assert_eq!(combine([1.0, 0.0, 0.0, 0.0], uniform).unwrap(), 0.25);
        assert_relative_eq!(
            combine([0.8, 0.6, 0.4, 0.2], uniform).unwrap(),
            0.5,
            max_relative = 1e-15
        );
        assert!(combine([1.0; 4], [0.5, 0.5, 0.5, 0.5]).is_err());
        assert!(combine([1.0; 4], [-0.5, 0.5, 0.5, 0.5]).is_err());
    }

    #[test]
    fn confidence_examples() {
        // identical 3-product sets
        let ds = dataset(vec![
            rec("a", "p1", "c1", 3.0, 0),
            rec("a", "p2", "c1", 3.0, 0),
            rec("a", "p3", "c1", 3.0, 0),
            rec("b", "p1", "c1", 3.0, 0),
            rec("b", "p2", "c1", 3.0, 0),
            rec("b", "p3", "c1", 3.0, 0),
        ]);
        assert_eq!(confidence(&ds, 0, 1).unwrap(), 1.0);

        // disjoint
        let ds = dataset(vec![
            rec("a", "p1", "c1", 3.0, 0),
            rec("b", "p2", "c1", 3.0, 0),
        ]);
        assert_eq!(confidence(&ds, 0, 1).unwrap(), 0.0);

        // |P_a|=4, |P_b|=9, overlap 3 -> 0.5
        let mut recs = Vec::new();
        for p in ["s1", "s2", "s3", "a4"] {
            recs.push(rec("a", p, "c1", 3.0, 0));
        }
        for p in ["s1", "s2", "s3", "b4", "b5", "b6", "b7", "b8", "b9"] {
            recs.push(rec("b", p, "c1", 3.0, 0));
        }
        let ds = dataset(recs);
        assert_relative_eq!(confidence(&ds, 0, 1).unwrap(), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn edge_weight_examples() {
        assert_eq!(edge_weight(0.35, 0.7, 0.35), 0.0);
        assert_relative_eq!(edge_weight(0.9, 0.5, 0.35), 0.275, max_relative = 1e-15);
        assert_relative_eq!(edge_weight(0.1, 1.0, 0.35), -0.25, max_relative = 1e-15);
        assert_eq!(edge_weight(0.9, 0.0, 0.35), 0.0);
    }

    #[test]
    fn pair_features_agrees_with_individual_operations() {
        let cfg = FeatureConfig::default();
        let ds = dataset(vec![
            rec("a", "p1", "c1", 5.0, 100),
            rec("a", "p2", "c2", 2.0, 400),
            rec("a", "p3", "c1", 4.0, 900),
            rec("b", "p1", "c1", 4.0, 150),
            rec("b", "p2", "c2", 2.0, 300),
            rec("b", "p4", "c3", 1.0, 0),
        ]);
        let pf = pair_features(&ds, 0, 1, &cfg, 0.35).unwrap();
        assert_eq!(pf.psi_pr, product_rating_proximity(&ds, 0, 1).unwrap());
        assert_eq!(pf.psi_pt, product_time_proximity(&ds, 0, 1, &cfg).unwrap());
        assert_eq!(pf.psi_cr, category_rating_proximity(&ds, 0, 1).unwrap());
        assert_eq!(pf.psi_ct, category_time_proximity(&ds, 0, 1, &cfg).unwrap());
        assert_eq!(pf.eta_pi, confidence(&ds, 0, 1).unwrap());
        assert_eq!(pf.h_bar, combine([pf.psi_pr, pf.psi_pt, pf.psi_cr, pf.psi_ct], cfg.alpha).unwrap());
        assert_eq!(pf.weight, edge_weight(pf.h_bar, pf.eta_pi, 0.35));
        assert_eq!(pf.co_reviewed, 2);

        // symmetry
        let pf_swapped = pair_features(&ds, 1, 0, &cfg, 0.35).unwrap();
        assert_eq!(pf.psi_pr, pf_swapped.psi_pr);
        assert_eq!(pf.psi_pt, pf_swapped.psi_pt);
        assert_eq!(pf.psi_cr, pf_swapped.psi_cr);
        assert_eq!(pf.psi_ct, pf_swapped.psi_ct);
        assert_eq!(pf.h_bar, pf_swapped.h_bar);
        assert_eq!(pf.eta_pi, pf_swapped.eta_pi);
        assert_eq!(pf.weight, pf_swapped.weight);
    }

    #[test]
    fn self_pair_and_no_overlap_are_errors() {
        let cfg = FeatureConfig::default();
        let ds = dataset(vec![
            rec("a", "p1", "c1", 3.0, 0),
            rec("b", "p2", "c2", 3.0, 0),
        ]);
        assert!(matches!(
            pair_features(&ds, 0, 0, &cfg, 0.35),
            Err(Error::SelfPair(0))
        ));
        assert!(matches!(
            pair_features(&ds, 0, 1, &cfg, 0.35),
            Err(Error::NoOverlap(_, _))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(FeatureConfig::default().validate().is_ok());
        let bad = FeatureConfig {
            gamma_tradeoff: 0.0,
            ..FeatureConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FeatureConfig {
            alpha: [0.5, 0.5, 0.5, -0.5],
            ..FeatureConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FeatureConfig {
            time_unit: TimeUnit::Fixed(0.0),
            ..FeatureConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn kernels_decrease_in_gamma() {
        let cfg = FeatureConfig::default();
        let mut prev_r = f64::INFINITY;
        let mut prev_t = f64::INFINITY;
        for k in 0..20 {
            let g = k as f64 * 0.1;
            let r = rating_kernel(g);
            let t = time_kernel(g, cfg.smoothing_c, cfg.gamma_tradeoff);
            assert!(r < prev_r && t < prev_t);
            assert!(r > 0.0 && r <= 1.0 && t > 0.0 && t <= 1.0);
            prev_r = r;
            prev_t = t;
        }
    }

    #[test]
    fn feature_dump_round_trips_each_value() {
        let ds = dataset(vec![
            rec("a", "p1", "c1", 4.0, 0),
            rec("a", "p2", "c1", 2.0, 50),
            rec("b", "p1", "c1", 4.0, 100),
            rec("b", "p2", "c1", 3.0, 60),
        ]);
        let pf = pair_features(&ds, 0, 1, &FeatureConfig::default(), 0.35).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        save_pair_features(&[pf], ds.users(), &path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "user_i,user_j,psi_pr,psi_pt,psi_cr,psi_ct,h_bar,eta_pi,weight"
        );
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields[0], "a");
        assert_eq!(fields[1], "b");
        let parsed: Vec<f64> = fields[2..].iter().map(|f| f.parse().unwrap()).collect();
        assert_eq!(
            parsed,
            vec![pf.psi_pr, pf.psi_pt, pf.psi_cr, pf.psi_ct, pf.h_bar, pf.eta_pi, pf.weight]
        );
        assert!(lines.next().is_none());
    }
}
