//! Whole-pipeline integration through the persisted artifact formats: every
//! stage output survives a save/load round trip and the reloaded artifacts
//! drive the next stage to identical results.

use collurank::metrics::evaluate;
use collurank::network::build_network;
use collurank::scoring::{rank_users, SpamicityRanking};
use collurank::synth::{generate, CampaignSpec};
use collurank::trainer::{
    load_embedding_text, save_embedding_text, train, TrainConfig,
};
use collurank::walks::{generate_walks, WalkConfig};
use collurank::{Dataset, FeatureConfig, LabelSet, Schema, SignedNetwork};

#[test]
fn every_stage_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CampaignSpec {
        n_normal_users: 40,
        n_colluders: 10,
        n_campaigns: 2,
        targets_per_campaign: 6,
        n_products: 40,
        n_categories: 8,
        reviews_per_normal_user: 6,
        camouflage_rate: 2.0,
        seed: 9,
        ..CampaignSpec::default()
    };
    let (dataset, labels) = generate(&spec).unwrap();

    let schema = Schema::default();
    let dataset_path = dir.path().join("dataset.csv");
    let labels_path = dir.path().join("labels.csv");
    dataset.save_csv(&dataset_path, &schema).unwrap();
    labels.save(&labels_path).unwrap();
    let dataset2 = Dataset::load(&dataset_path, &schema).unwrap();
    assert_eq!(dataset.records(), dataset2.records());
    assert_eq!(dataset.users(), dataset2.users());
    let labels2 = LabelSet::load(&labels_path, &dataset2).unwrap();
    assert_eq!(labels.n_colluders(), labels2.n_colluders());

    let network = build_network(&dataset2, &FeatureConfig::default(), 1).unwrap();
    let edges_path = dir.path().join("network.tsv");
    let users_path = dir.path().join("users.txt");
    network.save(&edges_path, &users_path).unwrap();
    let network2 = SignedNetwork::load(&edges_path, &users_path).unwrap();
    assert_eq!(network.users(), network2.users());
    assert_eq!(network.edges().len(), network2.edges().len());
    for (a, b) in network.edges().iter().zip(network2.edges()) {
        assert_eq!((a.i, a.j), (b.i, b.j));
        assert_eq!(a.weight, b.weight, "weight drifted through text round trip");
    }

    let walks = WalkConfig {
        walks_per_node: 8,
        walk_length: 6,
        window: 3,
        seed: 21,
    };
    let corpus = generate_walks(&network2, &walks).unwrap();
    let config = TrainConfig {
        epochs: 15,
        k: 8,
        seed: 4,
        ..TrainConfig::default()
    };
    let out = train(&network2, &corpus, &config).unwrap();
    assert_eq!(out.epochs.len(), 15);

    let u_path = dir.path().join("embeddings_u.txt");
    save_embedding_text(&out.state.u, network2.users(), &u_path).unwrap();
    let (emb_users, u2) = load_embedding_text(&u_path).unwrap();
    assert_eq!(&emb_users, network2.users());
    assert_eq!(out.state.u, u2, "embedding text format must round-trip exactly");

    let ranking = rank_users(&u2, &emb_users, 6).unwrap();
    let ranking_path = dir.path().join("ranking.tsv");
    ranking.save(&ranking_path).unwrap();
    let ranking2 = SpamicityRanking::load(&ranking_path).unwrap();
    assert_eq!(ranking.entries(), ranking2.entries());

    let report = evaluate(&ranking2, &labels2, &[5, 10]).unwrap();
    let report2 = evaluate(&ranking, &labels, &[5, 10]).unwrap();
    assert_eq!(report.ap, report2.ap);
    assert_eq!(report.auc, report2.auc);
    assert_eq!(report.n_positive, 10);
}

#[test]
fn reruns_are_bit_identical() {
    let spec = CampaignSpec {
        n_normal_users: 30,
        n_colluders: 8,
        n_campaigns: 2,
        targets_per_campaign: 5,
        n_products: 30,
        n_categories: 6,
        reviews_per_normal_user: 5,
        seed: 33,
        ..CampaignSpec::default()
    };
    let run = || {
        let (dataset, _) = generate(&spec).unwrap();
        let network = build_network(&dataset, &FeatureConfig::default(), 1).unwrap();
        let corpus = generate_walks(
            &network,
            &WalkConfig { walks_per_node: 6, walk_length: 5, window: 3, seed: 1 },
        )
        .unwrap();
        let config = TrainConfig { epochs: 10, k: 8, seed: 2, ..TrainConfig::default() };
        train(&network, &corpus, &config).unwrap().state
    };
    let (a, b) = (run(), run());
    assert_eq!(a.u, b.u);
    assert_eq!(a.phi, b.phi);
}
