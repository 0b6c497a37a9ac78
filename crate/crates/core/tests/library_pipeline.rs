//! Library-level pipeline on a small synthetic corpus, plus cross-module
//! properties of the trained encoder.

use std::collections::BTreeMap;

use author2vec_core::author2vec::{pretrain, Checkpoint, ModelConfig, PretrainConfig};
use author2vec_core::embedstore::{
    decode_embeddings, encode_embeddings, PostEmbeddingMatrix, StubEmbedder,
};
use author2vec_core::evalharness::{run_benchmark, shuffled_labels, FoldPlan, ProbeSpec};
use author2vec_core::nnkernel::AdamConfig;
use author2vec_core::synth::{generate_corpus, SynthConfig};
use proptest::prelude::*;

fn small_corpus(authors: usize, seed: u64) -> (Vec<PostEmbeddingMatrix>, BTreeMap<String, String>) {
    let config = SynthConfig {
        authors,
        posts_per_author: 40,
        seed,
        ..SynthConfig::default()
    };
    let corpus = generate_corpus(&config);
    let mut stub = StubEmbedder::new(32, seed);
    let matrices = corpus
        .iter()
        .map(|a| stub.embed_author(a).unwrap())
        .collect();
    let labels = corpus
        .iter()
        .map(|a| (a.author_id.clone(), a.labels["depressed"].clone()))
        .collect();
    (matrices, labels)
}

fn model_config() -> ModelConfig {
    ModelConfig {
        input_dim: 32,
        hidden: 16,
        code_dim: 48,
        k_train: 8,
        k_infer: 12,
        head_hidden: vec![32],
        ..ModelConfig::default()
    }
}

fn pretrain_config(seed: u64) -> PretrainConfig {
    PretrainConfig {
        epochs: 6,
        seed,
        holdout_posts: 10,
        posts_per_sample: [5, 20],
        posts_per_draw: 10,
        adam: AdamConfig {
            learning_rate: 3e-3,
            ..AdamConfig::default()
        },
        ..PretrainConfig::default()
    }
}

#[test]
fn pretrain_embed_and_probe() {
    let (matrices, labels) = small_corpus(30, 5);
    let out = pretrain(&matrices, &model_config(), &pretrain_config(5)).unwrap();
    assert_eq!(out.model.classes.len(), 30);
    let best = &out.log[out.best_epoch];
    let top5 = best.heldout_top5.unwrap();
    // 30 classes: chance top-5 is 1/6.
    assert!(top5 > 0.5, "held-out top-5 {top5}");

    let encoder = out.model.clone().strip_head();
    assert!(!encoder.has_head());
    let embeddings = encoder.embed_authors(&matrices).unwrap();
    assert_eq!(embeddings.len(), 30);
    for e in &embeddings {
        assert_eq!(e.vector.len(), 48);
        assert!(e.nonzeros() <= 12);
    }
    // The head does not take part in inference.
    assert_eq!(out.model.embed_authors(&matrices).unwrap(), embeddings);

    let table: BTreeMap<String, Vec<f64>> = embeddings
        .iter()
        .map(|e| {
            (
                e.author_id.clone(),
                e.vector.iter().map(|&v| v as f64).collect(),
            )
        })
        .collect();
    let plan = FoldPlan::kfold(5, 5);
    let report = run_benchmark(
        "author2vec",
        "depressed",
        &table,
        &labels,
        &plan,
        &ProbeSpec::logreg(),
    )
    .unwrap();
    assert_eq!(report.fold_f1.len(), 5);
    let shuffled = shuffled_labels(&labels, 5);
    assert_eq!(
        shuffled.values().filter(|v| *v == "yes").count(),
        labels.values().filter(|v| *v == "yes").count()
    );
    run_benchmark(
        "shuffled",
        "depressed",
        &table,
        &shuffled,
        &plan,
        &ProbeSpec::logreg(),
    )
    .unwrap();
}

#[test]
fn checkpoint_restores_identical_embeddings() {
    let (matrices, _) = small_corpus(12, 9);
    let mut cfg = pretrain_config(9);
    cfg.epochs = 2;
    let out = pretrain(&matrices, &model_config(), &cfg).unwrap();
    let bytes = Checkpoint {
        model: out.model.clone(),
        optimizer: Some(out.optimizer.clone()),
    }
    .to_bytes();
    let restored = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(restored.model, out.model);
    assert_eq!(
        restored.model.embed_authors(&matrices).unwrap(),
        out.model.embed_authors(&matrices).unwrap()
    );
}

#[test]
fn same_seed_same_model() {
    let (matrices, _) = small_corpus(10, 3);
    let mut cfg = pretrain_config(3);
    cfg.epochs = 2;
    let a = pretrain(&matrices, &model_config(), &cfg).unwrap();
    let b = pretrain(&matrices, &model_config(), &cfg).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.log, b.log);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stub_corpus_round_trips_through_the_store(authors in 2usize..8, seed in any::<u64>()) {
        let config = SynthConfig { authors, posts_per_author: 6, seed, ..SynthConfig::default() };
        let corpus = generate_corpus(&config);
        let mut stub = StubEmbedder::new(8, seed);
        let matrices: Vec<_> = corpus.iter().map(|a| stub.embed_author(a).unwrap()).collect();
        prop_assert!(matrices.iter().all(|m| m.rows() == 6 && m.dim() == 8));
        let back = decode_embeddings(&encode_embeddings(&matrices).unwrap()).unwrap();
        prop_assert_eq!(back, matrices);
    }

    #[test]
    fn untrained_embeddings_respect_k_infer(seed in any::<u64>(), k in 1usize..8) {
        let (matrices, _) = small_corpus(2, seed % 1000);
        let config = ModelConfig { k_train: k, k_infer: k + 4, ..model_config() };
        let model = author2vec_core::AuthorVecModel::new_headless(config, seed).unwrap();
        for e in model.embed_authors(&matrices).unwrap() {
            prop_assert!(e.nonzeros() <= k + 4);
            prop_assert!(e.vector.iter().all(|v| v.is_finite()));
        }
    }
}
