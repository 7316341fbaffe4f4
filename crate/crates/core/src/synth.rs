//! Labeled synthetic review datasets with planted spam campaigns.
//!
//! Normal users rate random products around per-product base ratings at
//! uniform times. Each campaign picks target products, a time window, and a
//! policy rating; its colluders each review a `workload_balance` fraction of
//! the targets inside the window, plus camouflage reviews shaped exactly like
//! normal ones. Normal users are kept out of every campaign's
//! (target, window, policy-rating) envelope by resampling, so labels are
//! sound by construction.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;

use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::review::{Dataset, LabelSet, ReviewRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatingPolicy {
    /// Campaign reviews use the scale maximum.
    Promote,
    /// Campaign reviews use the scale minimum.
    Demote,
}

impl std::str::FromStr for RatingPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "promote" => Ok(RatingPolicy::Promote),
            "demote" => Ok(RatingPolicy::Demote),
            other => Err(format!("rating policy must be promote|demote, got {other:?}")),
        }
    }
}

impl std::fmt::Display for RatingPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RatingPolicy::Promote => "promote",
            RatingPolicy::Demote => "demote",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CampaignSpec {
    pub n_normal_users: usize,
    pub n_colluders: usize,
    pub n_campaigns: usize,
    pub targets_per_campaign: usize,
    /// Seconds each campaign stays active.
    pub campaign_window: i64,
    /// Fraction of its campaign's targets each colluder reviews (at least 1).
    pub workload_balance: f64,
    /// Expected camouflage (normal-looking) reviews per colluder.
    pub camouflage_rate: f64,
    pub rating_policy: RatingPolicy,
    pub n_products: usize,
    pub n_categories: usize,
    /// Seconds covered by the whole dataset.
    pub observation_span: i64,
    /// Reviews posted by each normal user.
    pub reviews_per_normal_user: usize,
    pub rating_min: f64,
    pub rating_max: f64,
    pub seed: u64,
}

const DAY: i64 = 86_400;

impl Default for CampaignSpec {
    fn default() -> Self {
        Self {
            n_normal_users: 160,
            n_colluders: 40,
            n_campaigns: 4,
            targets_per_campaign: 10,
            campaign_window: 7 * DAY,
            workload_balance: 0.5,
            camouflage_rate: 5.0,
            rating_policy: RatingPolicy::Promote,
            n_products: 400,
            n_categories: 20,
            observation_span: 365 * DAY,
            reviews_per_normal_user: 10,
            rating_min: 1.0,
            rating_max: 5.0,
            seed: 0,
        }
    }
}

impl CampaignSpec {
    pub fn validate(&self) -> Result<()> {
        let bail = |msg: String| Err(Error::Config(msg));
        if self.n_normal_users + self.n_colluders == 0 {
            return bail("need at least one user".to_string());
        }
        if self.n_products == 0 || self.n_categories == 0 {
            return bail("need at least one product and category".to_string());
        }
        if self.n_colluders > 0 {
            if self.n_campaigns == 0 {
                return bail("colluders need at least one campaign".to_string());
            }
            if self.targets_per_campaign == 0 {
                return bail("campaigns need at least one target".to_string());
            }
            if self.targets_per_campaign > self.n_products {
                return bail(format!(
                    "targets_per_campaign {} exceeds n_products {}",
                    self.targets_per_campaign, self.n_products
                ));
            }
            if self.campaign_window <= 0 || self.campaign_window > self.observation_span {
                return bail(format!(
                    "campaign_window {} must lie in (0, observation_span {}]",
                    self.campaign_window, self.observation_span
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.workload_balance) {
            return bail(format!(
                "workload_balance {} outside [0,1]",
                self.workload_balance
            ));
        }
        if self.camouflage_rate < 0.0 {
            return bail(format!("camouflage_rate {} negative", self.camouflage_rate));
        }
        if self.observation_span <= 0 {
            return bail(format!("observation_span {} must be > 0", self.observation_span));
        }
        if self.n_normal_users > 0 && self.reviews_per_normal_user == 0 {
            return bail("normal users need at least one review".to_string());
        }
        if self.rating_min >= self.rating_max {
            return bail(format!(
                "rating scale [{}, {}] is empty",
                self.rating_min, self.rating_max
            ));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.set("n_normal_users", self.n_normal_users);
        kv.set("n_colluders", self.n_colluders);
        kv.set("n_campaigns", self.n_campaigns);
        kv.set("targets_per_campaign", self.targets_per_campaign);
        kv.set("campaign_window_secs", self.campaign_window);
        kv.set("workload_balance", self.workload_balance);
        kv.set("camouflage_rate", self.camouflage_rate);
        kv.set("rating_policy", self.rating_policy);
        kv.set("n_products", self.n_products);
        kv.set("n_categories", self.n_categories);
        kv.set("observation_span_secs", self.observation_span);
        kv.set("reviews_per_normal_user", self.reviews_per_normal_user);
        kv.set("rating_min", self.rating_min);
        kv.set("rating_max", self.rating_max);
        kv.set("seed", self.seed);
        kv
    }

    /// Read a spec from key-value text; missing keys keep their defaults.
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let d = Self::default();
        let policy = match kv.get("rating_policy") {
            Some(s) => s.parse().map_err(Error::Config)?,
            None => d.rating_policy,
        };
        let spec = Self {
            n_normal_users: kv.get_parsed("n_normal_users")?.unwrap_or(d.n_normal_users),
            n_colluders: kv.get_parsed("n_colluders")?.unwrap_or(d.n_colluders),
            n_campaigns: kv.get_parsed("n_campaigns")?.unwrap_or(d.n_campaigns),
            targets_per_campaign: kv
                .get_parsed("targets_per_campaign")?
                .unwrap_or(d.targets_per_campaign),
            campaign_window: kv
                .get_parsed("campaign_window_secs")?
                .unwrap_or(d.campaign_window),
            workload_balance: kv
                .get_parsed("workload_balance")?
                .unwrap_or(d.workload_balance),
            camouflage_rate: kv
                .get_parsed("camouflage_rate")?
                .unwrap_or(d.camouflage_rate),
            rating_policy: policy,
            n_products: kv.get_parsed("n_products")?.unwrap_or(d.n_products),
            n_categories: kv.get_parsed("n_categories")?.unwrap_or(d.n_categories),
            observation_span: kv
                .get_parsed("observation_span_secs")?
                .unwrap_or(d.observation_span),
            reviews_per_normal_user: kv
                .get_parsed("reviews_per_normal_user")?
                .unwrap_or(d.reviews_per_normal_user),
            rating_min: kv.get_parsed("rating_min")?.unwrap_or(d.rating_min),
            rating_max: kv.get_parsed("rating_max")?.unwrap_or(d.rating_max),
            seed: kv.get_parsed("seed")?.unwrap_or(d.seed),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn policy_rating(&self) -> f64 {
        match self.rating_policy {
            RatingPolicy::Promote => self.rating_max,
            RatingPolicy::Demote => self.rating_min,
        }
    }
}

struct Campaign {
    targets: Vec<usize>,
    window_start: i64,
    window_end: i64,
}

/// Generate the labeled dataset. Identical seeds give byte-identical output.
pub fn generate(spec: &CampaignSpec) -> Result<(Dataset, LabelSet)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total_users = spec.n_colluders + spec.n_normal_users;

    // Scatter display ids over the internal order so labels do not correlate
    // with the id sort used for tie-breaking.
    let mut id_perm: Vec<usize> = (0..total_users).collect();
    id_perm.shuffle(&mut rng);
    let user_id = |internal: usize| format!("u{:05}", id_perm[internal]);
    let product_id = |p: usize| format!("p{p:05}");
    let category_id = |p: usize, spec: &CampaignSpec| format!("c{:03}", p % spec.n_categories);

    // Per-product base ratings on the integer scale.
    let lo = spec.rating_min.ceil() as i64;
    let hi = spec.rating_max.floor() as i64;
    let base: Vec<i64> = (0..spec.n_products)
        .map(|_| rng.random_range(lo..=hi))
        .collect();

    let campaigns: Vec<Campaign> = if spec.n_colluders > 0 {
        (0..spec.n_campaigns)
            .map(|_| {
                let targets = rand::seq::index::sample(
                    &mut rng,
                    spec.n_products,
                    spec.targets_per_campaign,
                )
                .into_vec();
                let start = rng.random_range(0..=spec.observation_span - spec.campaign_window);
                Campaign {
                    targets,
                    window_start: start,
                    window_end: start + spec.campaign_window,
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    let policy = spec.policy_rating();

    let in_envelope = |product: usize, time: i64, rating: f64| {
        rating == policy
            && campaigns.iter().any(|c| {
                time >= c.window_start && time <= c.window_end && c.targets.contains(&product)
            })
    };

    let mut records = Vec::new();
    let mut push = |internal: usize, product: usize, rating: f64, time: i64, spec: &CampaignSpec| {
        records.push(ReviewRecord {
            user_id: user_id(internal),
            product_id: product_id(product),
            category_id: category_id(product, spec),
            rating,
            timestamp: time,
        });
    };

    // Colluders first (internal 0..n_colluders), round-robin over campaigns.
    let per_colluder = ((spec.workload_balance * spec.targets_per_campaign as f64).round()
        as usize)
        .clamp(1, spec.targets_per_campaign);
    for colluder in 0..spec.n_colluders {
        let campaign = &campaigns[colluder % spec.n_campaigns];
        let chosen =
            rand::seq::index::sample(&mut rng, campaign.targets.len(), per_colluder).into_vec();
        for t in chosen {
            let time = rng.random_range(campaign.window_start..=campaign.window_end);
            push(colluder, campaign.targets[t], policy, time, spec);
        }
        let n_camouflage = if spec.camouflage_rate > 0.0 {
            Poisson::new(spec.camouflage_rate)
                .expect("positive rate")
                .sample(&mut rng) as usize
        } else {
            0
        };
        for _ in 0..n_camouflage {
            let (product, rating, time) = normal_review(spec, &base, &mut rng);
            push(colluder, product, rating, time, spec);
        }
    }

    // Normal users, resampling anything that lands in a campaign envelope.
    for normal in 0..spec.n_normal_users {
        let internal = spec.n_colluders + normal;
        for _ in 0..spec.reviews_per_normal_user {
            let mut attempts = 0;
            let (product, rating, time) = loop {
                let cand = normal_review(spec, &base, &mut rng);
                if !in_envelope(cand.0, cand.2, cand.1) {
                    break cand;
                }
                attempts += 1;
                if attempts > 1000 {
                    return Err(Error::Config(
                        "campaign envelopes leave no room for normal reviews".to_string(),
                    ));
                }
            };
            push(internal, product, rating, time, spec);
        }
    }

    let labels = LabelSet::from_pairs(
        (0..total_users).map(|internal| (user_id(internal), internal < spec.n_colluders)),
    );
    let dataset = Dataset::from_records(records, spec.rating_min, spec.rating_max, "<synthetic>")?;
    Ok((dataset, labels))
}

/// One normal-shaped review: uniform product, base rating ± 1 clipped to the
/// scale, uniform time.
fn normal_review(spec: &CampaignSpec, base: &[i64], rng: &mut ChaCha8Rng) -> (usize, f64, i64) {
    let product = rng.random_range(0..spec.n_products);
    let noise = rng.random_range(-1..=1);
    let rating = (base[product] + noise) as f64;
    let rating = rating.clamp(spec.rating_min, spec.rating_max);
    let time = rng.random_range(0..=spec.observation_span);
    (product, rating, time)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureConfig;
    use crate::network::build_network_with_features;

    fn small_spec() -> CampaignSpec {
        CampaignSpec {
            n_normal_users: 30,
            n_colluders: 10,
            n_campaigns: 2,
            targets_per_campaign: 5,
            n_products: 40,
            n_categories: 5,
            reviews_per_normal_user: 6,
            camouflage_rate: 2.0,
            seed: 1,
            ..CampaignSpec::default()
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let spec = small_spec();
        let (a, _) = generate(&spec).unwrap();
        let (b, _) = generate(&spec).unwrap();
        assert_eq!(a.records(), b.records());
        let (c, _) = generate(&CampaignSpec { seed: 2, ..spec }).unwrap();
        assert_ne!(a.records(), c.records());
    }

    #[test]
    fn labels_cover_all_users_with_expected_positives() {
        let spec = small_spec();
        let (ds, labels) = generate(&spec).unwrap();
        assert_eq!(ds.n_users(), 40);
        assert_eq!(labels.len(), 40);
        assert_eq!(labels.n_colluders(), 10);
        for user in ds.users() {
            assert!(labels.get(user).is_some());
        }
    }

    #[test]
    fn no_colluders_means_all_negative() {
        let spec = CampaignSpec {
            n_colluders: 0,
            ..small_spec()
        };
        let (ds, labels) = generate(&spec).unwrap();
        assert_eq!(labels.n_colluders(), 0);
        assert_eq!(ds.n_users(), 30);
    }

    #[test]
    fn colluders_post_policy_reviews_and_normals_stay_outside() {
        let spec = small_spec();
        let (ds, labels) = generate(&spec).unwrap();
        let policy = spec.policy_rating();

        // regenerate the campaign plan indirectly: every colluder must hold
        // at least one policy-rating review, normal users none that look
        // campaign-shaped at policy rating co-timed with a colluder burst.
        let mut colluder_policy_counts = 0;
        for rec in ds.records() {
            let is_colluder = labels.get(&rec.user_id).unwrap();
            if is_colluder && rec.rating == policy {
                colluder_policy_counts += 1;
            }
        }
        assert!(colluder_policy_counts >= spec.n_colluders * 2);

        for user in ds.users() {
            if labels.get(user).unwrap() {
                let any_policy = ds
                    .records()
                    .iter()
                    .any(|r| &r.user_id == user && r.rating == policy);
                assert!(any_policy, "colluder {user} posted no campaign review");
            }
        }
    }

    #[test]
    fn workload_subsets_have_hypergeometric_overlap() {
        // two independent 5-subsets of 10: E|A∩B| = 2.5
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut total = 0usize;
        let draws = 10_000;
        for _ in 0..draws {
            let a = rand::seq::index::sample(&mut rng, 10, 5).into_vec();
            let b = rand::seq::index::sample(&mut rng, 10, 5).into_vec();
            total += a.iter().filter(|x| b.contains(x)).count();
        }
        let mean = total as f64 / draws as f64;
        assert!((mean - 2.5).abs() < 0.125, "mean overlap {mean}");
    }

    #[test]
    fn full_overlap_campaigns_dominate_agreement() {
        let spec = CampaignSpec {
            workload_balance: 1.0,
            camouflage_rate: 0.0,
            ..small_spec()
        };
        let (ds, labels) = generate(&spec).unwrap();
        let (_, pairs) = build_network_with_features(&ds, &FeatureConfig::default(), 1).unwrap();
        let (mut cc, mut ncnc) = ((0.0, 0usize), (0.0, 0usize));
        for p in &pairs {
            let a = labels.get(&ds.users()[p.i]).unwrap();
            let b = labels.get(&ds.users()[p.j]).unwrap();
            match (a, b) {
                (true, true) => cc = (cc.0 + p.h_bar, cc.1 + 1),
                (false, false) => ncnc = (ncnc.0 + p.h_bar, ncnc.1 + 1),
                _ => {}
            }
        }
        assert!(cc.1 > 0 && ncnc.1 > 0);
        let (cc_mean, ncnc_mean) = (cc.0 / cc.1 as f64, ncnc.0 / ncnc.1 as f64);
        assert!(
            cc_mean > ncnc_mean,
            "colluder agreement {cc_mean} not above normal {ncnc_mean}"
        );
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let bad = CampaignSpec {
            targets_per_campaign: 50,
            n_products: 10,
            ..CampaignSpec::default()
        };
        assert!(matches!(generate(&bad), Err(Error::Config(_))));
        let bad = CampaignSpec {
            workload_balance: 1.5,
            ..CampaignSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = CampaignSpec {
            campaign_window: 0,
            ..CampaignSpec::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn kv_round_trip() {
        let spec = CampaignSpec {
            rating_policy: RatingPolicy::Demote,
            seed: 123,
            ..small_spec()
        };
        let kv = spec.to_kv();
        let back = CampaignSpec::from_kv(&kv).unwrap();
        assert_eq!(back.n_normal_users, spec.n_normal_users);
        assert_eq!(back.rating_policy, RatingPolicy::Demote);
        assert_eq!(back.seed, 123);
        assert_eq!(back.campaign_window, spec.campaign_window);

        // empty kv falls back to defaults
        let d = CampaignSpec::from_kv(&KvFile::new()).unwrap();
        assert_eq!(d.n_normal_users, CampaignSpec::default().n_normal_users);
    }
}
