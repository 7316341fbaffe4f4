//! Pipeline configuration: flat key-value file, every key overridable by a
//! command-line flag. Flags are overlaid onto the loaded file before parsing
//! so both sources go through the same conversions.

use std::path::PathBuf;

use clap::Args;

use collurank::kv::KvFile;
use collurank::trainer::LearningRate;
use collurank::walks::WalkConfig;
use collurank::{Error, FeatureConfig, Result, Schema, TimeUnit, TrainConfig, ZetaMode};

#[derive(Args, Debug, Default, Clone)]
pub struct Overrides {
    /// Configuration file (key = value lines, dotted section prefixes).
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,

    /// Review log to ingest.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Ground-truth labels; optional, enables evaluation and histogram classes.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Directory holding every produced artifact.
    #[arg(long)]
    pub workdir: Option<PathBuf>,

    /// Column order in the review log, e.g. user,product,category,rating,timestamp.
    #[arg(long)]
    pub columns: Option<String>,
    /// Field delimiter in the review log.
    #[arg(long)]
    pub delimiter: Option<char>,
    #[arg(long)]
    pub rating_min: Option<f64>,
    #[arg(long)]
    pub rating_max: Option<f64>,

    /// Four comma-separated convex weights for the proximity combination.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Agreement threshold, a number or "mean".
    #[arg(long)]
    pub zeta: Option<String>,
    /// Trade-off constant in the temporal kernel.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Smoothing constant in the temporal kernel.
    #[arg(long)]
    pub smoothing: Option<f64>,
    /// Time normalization: "span" or a fixed number of seconds.
    #[arg(long)]
    pub time_unit: Option<String>,
    /// Minimum co-reviewed products before a pair is scored.
    #[arg(long)]
    pub min_co_reviews: Option<usize>,

    #[arg(long)]
    pub walks_per_node: Option<usize>,
    #[arg(long)]
    pub walk_length: Option<usize>,
    /// Skip-gram context window.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub walk_seed: Option<u64>,

    /// Mixing weight of the direct term, in [0,1].
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub psi_reg: Option<f64>,
    /// Margin constant for the negative-edge gate.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Negative samples per context pair.
    #[arg(long)]
    pub kappa: Option<usize>,
    /// Learning-rate schedule: "decay" or "constant".
    #[arg(long)]
    pub lr_schedule: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Terminal rate of the decay schedule.
    #[arg(long)]
    pub lr_floor: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Embedding dimension.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub train_seed: Option<u64>,
    /// Skip-gram worker threads; 0 means machine parallelism, 1 is deterministic.
    #[arg(long)]
    pub workers: Option<usize>,

    /// Neighbors averaged into each spamicity score.
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Comma-separated cutoffs for precision@k and NDCG@k.
    #[arg(long)]
    pub ks: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub dataset: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub workdir: PathBuf,
    pub schema: Schema,
    pub features: FeatureConfig,
    pub min_co_reviews: usize,
    pub walks: WalkConfig,
    pub train: TrainConfig,
    pub top_n: usize,
    pub ks: Vec<usize>,
}

impl PipelineConfig {
    pub fn resolve(overrides: &Overrides) -> Result<Self> {
        let mut kv = match &overrides.config {
            Some(path) => KvFile::load(path)?,
            None => KvFile::new(),
        };
        overlay(&mut kv, overrides);
        from_kv(&kv)
    }

    /// Resolved values worth keeping next to the artifacts, seeds included.
    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        if let Some(p) = &self.dataset {
            kv.set("dataset", p.display());
        }
        if let Some(p) = &self.labels {
            kv.set("labels", p.display());
        }
        kv.set("workdir", self.workdir.display());
        kv.set(
            "features.alpha",
            self.features
                .alpha
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        match self.features.zeta {
            ZetaMode::Fixed(z) => kv.set("features.zeta", z),
            ZetaMode::MeanAgreement => kv.set("features.zeta", "mean"),
        }
        kv.set("features.gamma", self.features.gamma_tradeoff);
        kv.set("features.smoothing", self.features.smoothing_c);
        match self.features.time_unit {
            TimeUnit::Span => kv.set("features.time_unit", "span"),
            TimeUnit::Fixed(s) => kv.set("features.time_unit", s),
        }
        kv.set("network.min_co_reviews", self.min_co_reviews);
        kv.set("walks.per_node", self.walks.walks_per_node);
        kv.set("walks.length", self.walks.walk_length);
        kv.set("walks.window", self.walks.window);
        kv.set("walks.seed", self.walks.seed);
        kv.set("train.beta", self.train.beta);
        kv.set("train.psi_reg", self.train.psi_reg);
        kv.set("train.delta", self.train.delta);
        kv.set("train.kappa", self.train.kappa);
        match self.train.learning_rate {
            LearningRate::Decay { initial, floor } => {
                kv.set("train.lr_schedule", "decay");
                kv.set("train.lr", initial);
                kv.set("train.lr_floor", floor);
            }
            LearningRate::Constant(rate) => {
                kv.set("train.lr_schedule", "constant");
                kv.set("train.lr", rate);
            }
        }
        kv.set("train.epochs", self.train.epochs);
        kv.set("train.k", self.train.k);
        kv.set("train.seed", self.train.seed);
        kv.set("train.workers", self.train.workers);
        kv.set("scoring.n", self.top_n);
        kv.set(
            "eval.ks",
            self.ks
                .iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv
    }
}

fn overlay(kv: &mut KvFile, o: &Overrides) {
    macro_rules! put {
        ($key:literal, $field:ident) => {
            if let Some(v) = &o.$field {
                kv.set($key, v);
            }
        };
    }
    if let Some(v) = &o.dataset {
        kv.set("dataset", v.display());
    }
    if let Some(v) = &o.labels {
        kv.set("labels", v.display());
    }
    if let Some(v) = &o.workdir {
        kv.set("workdir", v.display());
    }
    put!("data.columns", columns);
    put!("data.delimiter", delimiter);
    put!("data.rating_min", rating_min);
    put!("data.rating_max", rating_max);
    put!("features.alpha", alpha);
    put!("features.zeta", zeta);
    put!("features.gamma", gamma);
    put!("features.smoothing", smoothing);
    put!("features.time_unit", time_unit);
    put!("network.min_co_reviews", min_co_reviews);
    put!("walks.per_node", walks_per_node);
    put!("walks.length", walk_length);
    put!("walks.window", window);
    put!("walks.seed", walk_seed);
    put!("train.beta", beta);
    put!("train.psi_reg", psi_reg);
    put!("train.delta", delta);
    put!("train.kappa", kappa);
    put!("train.lr_schedule", lr_schedule);
    put!("train.lr", lr);
    put!("train.lr_floor", lr_floor);
    put!("train.epochs", epochs);
    put!("train.k", k);
    put!("train.seed", train_seed);
    put!("train.workers", workers);
    put!("scoring.n", top_n);
    put!("eval.ks", ks);
}

fn from_kv(kv: &KvFile) -> Result<PipelineConfig> {
    let mut schema = Schema::default();
    if let Some(cols) = kv.get("data.columns") {
        schema = schema.with_columns(cols)?;
    }
    if let Some(d) = kv.get("data.delimiter") {
        let mut chars = d.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => schema.delimiter = c,
            _ => {
                return Err(Error::Config(format!(
                    "data.delimiter must be a single character, got {d:?}"
                )))
            }
        }
    }
    if let Some(v) = kv.get_parsed::<f64>("data.rating_min")? {
        schema.rating_min = v;
    }
    if let Some(v) = kv.get_parsed::<f64>("data.rating_max")? {
        schema.rating_max = v;
    }

    let mut features = FeatureConfig::default();
    if let Some(list) = kv.get_list::<f64>("features.alpha")? {
        features.alpha = <[f64; 4]>::try_from(list).map_err(|bad| {
            Error::Config(format!("features.alpha needs 4 weights, got {}", bad.len()))
        })?;
    }
    if let Some(z) = kv.get("features.zeta") {
        features.zeta = parse_zeta(z)?;
    }
    if let Some(v) = kv.get_parsed::<f64>("features.gamma")? {
        features.gamma_tradeoff = v;
    }
    if let Some(v) = kv.get_parsed::<f64>("features.smoothing")? {
        features.smoothing_c = v;
    }
    if let Some(t) = kv.get("features.time_unit") {
        features.time_unit = parse_time_unit(t)?;
    }

    let mut walks = WalkConfig::default();
    if let Some(v) = kv.get_parsed("walks.per_node")? {
        walks.walks_per_node = v;
    }
    if let Some(v) = kv.get_parsed("walks.length")? {
        walks.walk_length = v;
    }
    if let Some(v) = kv.get_parsed("walks.window")? {
        walks.window = v;
    }
    if let Some(v) = kv.get_parsed("walks.seed")? {
        walks.seed = v;
    }

    let mut train = TrainConfig::default();
    if let Some(v) = kv.get_parsed("train.beta")? {
        train.beta = v;
    }
    if let Some(v) = kv.get_parsed("train.psi_reg")? {
        train.psi_reg = v;
    }
    if let Some(v) = kv.get_parsed("train.delta")? {
        train.delta = v;
    }
    if let Some(v) = kv.get_parsed("train.kappa")? {
        train.kappa = v;
    }
    train.learning_rate = parse_learning_rate(kv, train.learning_rate)?;
    if let Some(v) = kv.get_parsed("train.epochs")? {
        train.epochs = v;
    }
    if let Some(v) = kv.get_parsed("train.k")? {
        train.k = v;
    }
    if let Some(v) = kv.get_parsed("train.seed")? {
        train.seed = v;
    }
    // absent or 0: use the machine; 1 keeps runs reproducible
    train.workers = match kv.get_parsed::<usize>("train.workers")? {
        Some(0) | None => machine_parallelism(),
        Some(v) => v,
    };

    let top_n = kv.get_parsed("scoring.n")?.unwrap_or(25);
    let ks = kv
        .get_list::<usize>("eval.ks")?
        .unwrap_or_else(|| vec![10, 50, 100]);
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config("eval.ks must be nonempty positive cutoffs".into()));
    }

    Ok(PipelineConfig {
        dataset: kv.get("dataset").map(PathBuf::from),
        labels: kv.get("labels").map(PathBuf::from),
        workdir: kv.get("workdir").map(PathBuf::from).unwrap_or_else(|| ".".into()),
        schema,
        features,
        min_co_reviews: kv.get_parsed("network.min_co_reviews")?.unwrap_or(1),
        walks,
        train,
        top_n,
        ks,
    })
}

fn parse_zeta(text: &str) -> Result<ZetaMode> {
    if text.eq_ignore_ascii_case("mean") {
        return Ok(ZetaMode::MeanAgreement);
    }
    text.parse()
        .map(ZetaMode::Fixed)
        .map_err(|_| Error::Config(format!("features.zeta must be a number or \"mean\", got {text:?}")))
}

fn parse_time_unit(text: &str) -> Result<TimeUnit> {
    if text.eq_ignore_ascii_case("span") {
        return Ok(TimeUnit::Span);
    }
    text.parse()
        .map(TimeUnit::Fixed)
        .map_err(|_| Error::Config(format!("features.time_unit must be \"span\" or seconds, got {text:?}")))
}

fn parse_learning_rate(kv: &KvFile, default: LearningRate) -> Result<LearningRate> {
    let schedule = kv.get("train.lr_schedule");
    let rate = kv.get_parsed::<f64>("train.lr")?;
    let floor = kv.get_parsed::<f64>("train.lr_floor")?;
    match schedule.unwrap_or("decay") {
        s if s.eq_ignore_ascii_case("constant") => Ok(LearningRate::Constant(
            rate.ok_or_else(|| Error::Config("constant schedule needs train.lr".into()))?,
        )),
        s if s.eq_ignore_ascii_case("decay") => {
            if schedule.is_none() && rate.is_none() && floor.is_none() {
                return Ok(default);
            }
            let (d_init, d_floor) = match default {
                LearningRate::Decay { initial, floor } => (initial, floor),
                LearningRate::Constant(r) => (r, r),
            };
            Ok(LearningRate::Decay {
                initial: rate.unwrap_or(d_init),
                floor: floor.unwrap_or(d_floor),
            })
        }
        other => Err(Error::Config(format!(
            "train.lr_schedule must be \"decay\" or \"constant\", got {other:?}"
        ))),
    }
}

pub fn machine_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve_text(text: &str, overrides: &Overrides) -> Result<PipelineConfig> {
        let mut kv = KvFile::parse(text, "<test>").unwrap();
        overlay(&mut kv, overrides);
        from_kv(&kv)
    }

    #[test]
    fn defaults_without_any_source() {
        let cfg = resolve_text("", &Overrides::default()).unwrap();
        assert_eq!(cfg.train.k, 64);
        assert_eq!(cfg.walks.walks_per_node, 30);
        assert_eq!(cfg.top_n, 25);
        assert_eq!(cfg.ks, vec![10, 50, 100]);
        assert!(matches!(cfg.features.zeta, ZetaMode::Fixed(z) if z == 0.35));
    }

    #[test]
    fn flag_overrides_file() {
        let overrides = Overrides {
            epochs: Some(7),
            zeta: Some("mean".into()),
            ..Overrides::default()
        };
        let cfg = resolve_text("train.epochs = 100\nfeatures.zeta = 0.5\n", &overrides).unwrap();
        assert_eq!(cfg.train.epochs, 7);
        assert!(matches!(cfg.features.zeta, ZetaMode::MeanAgreement));
    }

    #[test]
    fn bad_alpha_arity_rejected() {
        let err = resolve_text("features.alpha = 0.5,0.5\n", &Overrides::default());
        assert!(err.is_err());
    }

    #[test]
    fn constant_schedule_needs_rate() {
        assert!(resolve_text("train.lr_schedule = constant\n", &Overrides::default()).is_err());
        let cfg =
            resolve_text("train.lr_schedule = constant\ntrain.lr = 0.01\n", &Overrides::default())
                .unwrap();
        assert!(matches!(cfg.train.learning_rate, LearningRate::Constant(r) if r == 0.01));
    }

    #[test]
    fn workers_zero_or_absent_means_machine() {
        for text in ["train.workers = 0\n", ""] {
            let cfg = resolve_text(text, &Overrides::default()).unwrap();
            assert!(cfg.train.workers >= 1);
        }
        let cfg = resolve_text("train.workers = 3\n", &Overrides::default()).unwrap();
        assert_eq!(cfg.train.workers, 3);
    }

    #[test]
    fn round_trip_through_kv() {
        let cfg = resolve_text(
            "dataset = d.csv\nworkdir = w\ntrain.beta = 0.4\neval.ks = 5,10\n",
            &Overrides::default(),
        )
        .unwrap();
        let kv = cfg.to_kv();
        assert_eq!(kv.get("train.beta"), Some("0.4"));
        assert_eq!(kv.get("eval.ks"), Some("5,10"));
        let again = from_kv(&kv).unwrap();
        assert_eq!(again.train.beta, 0.4);
        assert_eq!(again.ks, vec![5, 10]);
    }
}
