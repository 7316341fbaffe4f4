//! One function per subcommand. Every stage reads and writes fixed file names
//! inside the workdir so the stages compose without manual moves:
//!
//!   dataset.csv, labels.csv, synth_spec.kv        (synth)
//!   network.tsv, users.txt, hbar_histogram.tsv    (network)
//!   embeddings_u.txt, embeddings_phi.txt, loss_log.txt  (train)
//!   ranking.tsv                                   (score)
//!   eval_report.txt, eval_report.kv               (eval)
//!   manifest.txt                                  (all, resolved settings)
//!   pair_features.csv, walks.txt                  (opt-in dumps)

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};

use collurank::features::save_pair_features;
use collurank::kv::KvFile;
use collurank::metrics::evaluate;
use collurank::network::build_network_with_features;
use collurank::scoring::{rank_users, SpamicityRanking};
use collurank::synth;
use collurank::trainer::{load_embedding_text, save_embedding_text, train};
use collurank::walks::{generate_walks, save_corpus};
use collurank::{
    CampaignSpec, Dataset, Error, LabelSet, PairFeatures, Result, SignedNetwork,
};

use crate::config::PipelineConfig;

pub const DATASET_FILE: &str = "dataset.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const SPEC_FILE: &str = "synth_spec.kv";
pub const NETWORK_FILE: &str = "network.tsv";
pub const USERS_FILE: &str = "users.txt";
pub const HISTOGRAM_FILE: &str = "hbar_histogram.tsv";
pub const FEATURES_FILE: &str = "pair_features.csv";
pub const WALKS_FILE: &str = "walks.txt";
pub const EMBEDDING_U_FILE: &str = "embeddings_u.txt";
pub const EMBEDDING_PHI_FILE: &str = "embeddings_phi.txt";
pub const LOSS_LOG_FILE: &str = "loss_log.txt";
pub const RANKING_FILE: &str = "ranking.tsv";
pub const REPORT_TEXT_FILE: &str = "eval_report.txt";
pub const REPORT_KV_FILE: &str = "eval_report.kv";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn cmd_synth(spec_path: &Path, out_dir: &Path, force: bool, seed: Option<u64>) -> Result<()> {
    let mut spec = CampaignSpec::from_kv(&KvFile::load(spec_path)?)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }

    let dataset_path = out_dir.join(DATASET_FILE);
    let labels_path = out_dir.join(LABELS_FILE);
    if !force {
        for path in [&dataset_path, &labels_path] {
            if path.exists() {
                return Err(Error::Config(format!(
                    "{} exists; pass --force to overwrite",
                    path.display()
                )));
            }
        }
    }

    let (dataset, labels) = synth::generate(&spec)?;
    fs::create_dir_all(out_dir)?;
    dataset.save_csv(&dataset_path, &collurank::Schema::default())?;
    labels.save(&labels_path)?;
    spec.to_kv().save(&out_dir.join(SPEC_FILE))?;

    let mut manifest = load_manifest(out_dir)?;
    manifest.set("synth.seed", spec.seed);
    manifest.set("synth.spec", spec_path.display());
    manifest.save(&out_dir.join(MANIFEST_FILE))?;

    info!(
        "wrote {} reviews, {} users ({} colluders) into {}",
        dataset.records().len(),
        dataset.n_users(),
        labels.n_colluders(),
        out_dir.display()
    );
    Ok(())
}

pub fn cmd_network(cfg: &PipelineConfig, dump_features: bool) -> Result<()> {
    let dataset = load_dataset(cfg)?;
    let labels = load_labels(cfg, &dataset)?;

    let (network, pairs) =
        build_network_with_features(&dataset, &cfg.features, cfg.min_co_reviews)?;
    fs::create_dir_all(&cfg.workdir)?;
    network.save(
        &cfg.workdir.join(NETWORK_FILE),
        &cfg.workdir.join(USERS_FILE),
    )?;
    let histogram = agreement_histogram(&dataset, &pairs, labels.as_ref());
    fs::write(cfg.workdir.join(HISTOGRAM_FILE), histogram)?;
    if dump_features {
        save_pair_features(&pairs, dataset.users(), &cfg.workdir.join(FEATURES_FILE))?;
    }

    let mut manifest = load_manifest(&cfg.workdir)?;
    for (key, value) in cfg.to_kv().entries() {
        manifest.set(key, value);
    }
    manifest.set("network.zeta_applied", network.zeta());
    manifest.save(&cfg.workdir.join(MANIFEST_FILE))?;

    info!(
        "network: {} users, {} edges ({} positive), zeta {}",
        network.n_users(),
        network.edges().len(),
        network.positive_edges().count(),
        network.zeta()
    );
    Ok(())
}

pub fn cmd_train(cfg: &PipelineConfig, dump_walks: bool) -> Result<()> {
    let network = SignedNetwork::load(
        &cfg.workdir.join(NETWORK_FILE),
        &cfg.workdir.join(USERS_FILE),
    )?;
    let corpus = generate_walks(&network, &cfg.walks)?;
    info!(
        "walk corpus: {} sequences, {} context pairs",
        corpus.sequences.len(),
        corpus.context_pairs.len()
    );
    if dump_walks {
        save_corpus(&corpus, network.users(), &cfg.workdir.join(WALKS_FILE))?;
    }

    let out = train(&network, &corpus, &cfg.train)?;
    save_embedding_text(
        &out.state.u,
        network.users(),
        &cfg.workdir.join(EMBEDDING_U_FILE),
    )?;
    save_embedding_text(
        &out.state.phi,
        network.users(),
        &cfg.workdir.join(EMBEDDING_PHI_FILE),
    )?;

    let mut log_text = String::new();
    for e in &out.epochs {
        writeln!(
            log_text,
            "{}\t{}\t{}\t{}\t{}\t{}",
            e.epoch, e.lr, e.direct, e.indirect, e.reg, e.total
        )
        .expect("string write");
    }
    fs::write(cfg.workdir.join(LOSS_LOG_FILE), log_text)?;

    let mut manifest = load_manifest(&cfg.workdir)?;
    for (key, value) in cfg.to_kv().entries() {
        manifest.set(key, value);
    }
    manifest.save(&cfg.workdir.join(MANIFEST_FILE))?;
    Ok(())
}

pub fn cmd_score(cfg: &PipelineConfig) -> Result<()> {
    let (users, u) = load_embedding_text(&cfg.workdir.join(EMBEDDING_U_FILE))?;
    let ranking = rank_users(&u, &users, cfg.top_n)?;
    ranking.save(&cfg.workdir.join(RANKING_FILE))?;
    info!("ranked {} users, top-n {}", users.len(), cfg.top_n);
    Ok(())
}

pub fn cmd_eval(cfg: &PipelineConfig) -> Result<()> {
    let ranking = SpamicityRanking::load(&cfg.workdir.join(RANKING_FILE))?;
    if cfg.labels.is_none() {
        warn!("no labels configured; evaluation skipped");
        println!("no labels configured; evaluation skipped");
        return Ok(());
    }
    let dataset = load_dataset(cfg)?;
    let labels = load_labels(cfg, &dataset)?.expect("labels checked above");
    let report = evaluate(&ranking, &labels, &cfg.ks)?;
    let text = report.render_text();
    fs::write(cfg.workdir.join(REPORT_TEXT_FILE), &text)?;
    report.to_kv().save(&cfg.workdir.join(REPORT_KV_FILE))?;
    print!("{text}");
    Ok(())
}

pub fn cmd_report(cfg: &PipelineConfig) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "workdir {}", cfg.workdir.display()).expect("string write");
    for name in [
        DATASET_FILE,
        LABELS_FILE,
        NETWORK_FILE,
        USERS_FILE,
        HISTOGRAM_FILE,
        EMBEDDING_U_FILE,
        EMBEDDING_PHI_FILE,
        LOSS_LOG_FILE,
        RANKING_FILE,
        REPORT_TEXT_FILE,
    ] {
        let path = cfg.workdir.join(name);
        match fs::metadata(&path) {
            Ok(meta) => writeln!(out, "  {name}: {} bytes", meta.len()),
            Err(_) => writeln!(out, "  {name}: missing"),
        }
        .expect("string write");
    }
    // Dumps are opt-in, so absence is not worth reporting.
    for name in [FEATURES_FILE, WALKS_FILE] {
        if let Ok(meta) = fs::metadata(cfg.workdir.join(name)) {
            writeln!(out, "  {name}: {} bytes", meta.len()).expect("string write");
        }
    }
    print!("{out}");

    let report_path = cfg.workdir.join(REPORT_TEXT_FILE);
    if report_path.exists() {
        print!("\n{}", fs::read_to_string(report_path)?);
    } else {
        println!("\nno evaluation report yet; run `network`, `train`, `score`, `eval` first");
    }
    Ok(())
}

fn load_dataset(cfg: &PipelineConfig) -> Result<Dataset> {
    let path = cfg.dataset.as_ref().ok_or_else(|| {
        Error::Config("no dataset configured; set `dataset` or pass --dataset".into())
    })?;
    Dataset::load(path, &cfg.schema)
}

fn load_labels(cfg: &PipelineConfig, dataset: &Dataset) -> Result<Option<LabelSet>> {
    match &cfg.labels {
        Some(path) => Ok(Some(LabelSet::load(path, dataset)?)),
        None => Ok(None),
    }
}

fn load_manifest(dir: &Path) -> Result<KvFile> {
    let path: PathBuf = dir.join(MANIFEST_FILE);
    if path.exists() {
        KvFile::load(&path)
    } else {
        Ok(KvFile::new())
    }
}

const HIST_BINS: usize = 50;

fn bin_of(value: f64) -> usize {
    ((value * HIST_BINS as f64) as usize).min(HIST_BINS - 1)
}

/// Pair-agreement histogram, 50 equal-width bins over [0,1]. With labels the
/// pairs split into colluder-colluder, mixed, and normal-normal classes;
/// pairs touching an unlabeled user get their own column.
fn agreement_histogram(
    dataset: &Dataset,
    pairs: &[PairFeatures],
    labels: Option<&LabelSet>,
) -> String {
    let width = 1.0 / HIST_BINS as f64;
    let mut out = String::new();
    match labels {
        None => {
            let mut bins = vec![0u64; HIST_BINS];
            for p in pairs {
                bins[bin_of(p.h_bar)] += 1;
            }
            out.push_str("# lo\thi\tall\n");
            for (b, count) in bins.iter().enumerate() {
                writeln!(out, "{}\t{}\t{}", b as f64 * width, (b + 1) as f64 * width, count)
                    .expect("string write");
            }
        }
        Some(labels) => {
            // columns: c-c, nc-c, nc-nc, unlabeled
            let mut bins = vec![[0u64; 4]; HIST_BINS];
            for p in pairs {
                let class = match (
                    labels.get(&dataset.users()[p.i]),
                    labels.get(&dataset.users()[p.j]),
                ) {
                    (Some(true), Some(true)) => 0,
                    (Some(true), Some(false)) | (Some(false), Some(true)) => 1,
                    (Some(false), Some(false)) => 2,
                    _ => 3,
                };
                bins[bin_of(p.h_bar)][class] += 1;
            }
            out.push_str("# lo\thi\tc-c\tnc-c\tnc-nc\tunlabeled\n");
            for (b, counts) in bins.iter().enumerate() {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    b as f64 * width,
                    (b + 1) as f64 * width,
                    counts[0],
                    counts[1],
                    counts[2],
                    counts[3]
                )
                .expect("string write");
            }
        }
    }
    out
}
