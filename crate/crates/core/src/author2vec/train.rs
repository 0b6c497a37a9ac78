//! Authorship-classification pre-training.

use std::collections::HashMap;

use log::{debug, info};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{A2vError, AuthorVecModel, ModelConfig, Network};
use crate::corpus::holdout_indices;
use crate::embedstore::PostEmbeddingMatrix;
use crate::nnkernel::{
    clip_global_norm, softmax_xent, AdamConfig, AdamState, Params, SparsityMode,
};
use crate::seeding::derive_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Multiply the rate by `factor` every `every` epochs.
    Step {
        every: usize,
        factor: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    /// Use at most this many qualifying authors (corpus order).
    pub authors: Option<usize>,
    /// Inclusive `[min, max]` number of posts per training sequence.
    pub posts_per_sample: [usize; 2],
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub lr_schedule: LrSchedule,
    /// Train on every post; no held-out evaluation or early stopping.
    pub use_all_posts: bool,
    /// Posts per author held out for evaluation.
    pub holdout_posts: usize,
    /// Epochs without held-out improvement before stopping.
    pub patience: Option<usize>,
    pub clip_norm: f64,
    /// One training draw per this many training posts of an author.
    pub posts_per_draw: usize,
    /// Samples per gradient work unit. Fixed so the reduction order does not
    /// depend on the thread count.
    pub chunk_size: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            authors: None,
            posts_per_sample: [10, 40],
            batch_size: 16,
            epochs: 30,
            seed: 0,
            adam: AdamConfig::default(),
            lr_schedule: LrSchedule::Constant,
            use_all_posts: false,
            holdout_posts: 20,
            patience: Some(5),
            clip_norm: 5.0,
            posts_per_draw: 25,
            chunk_size: 4,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<(), A2vError> {
        let [lo, hi] = self.posts_per_sample;
        let bad = |m: &str| Err(A2vError::InvalidConfig(m.to_string()));
        if lo < 1 || hi < lo {
            return bad("posts_per_sample needs 1 <= min <= max");
        }
        if self.batch_size == 0 || self.chunk_size == 0 || self.posts_per_draw == 0 {
            return bad("batch_size, chunk_size and posts_per_draw must be positive");
        }
        if !self.use_all_posts && self.holdout_posts == 0 {
            return bad("holdout_posts must be positive unless use_all_posts is set");
        }
        if !(self.clip_norm > 0.0) || !(self.adam.learning_rate > 0.0) {
            return bad("clip_norm and learning_rate must be positive");
        }
        if let LrSchedule::Step { every, factor } = self.lr_schedule {
            if every == 0 || !(factor > 0.0) {
                return bad("step schedule needs every > 0 and factor > 0");
            }
        }
        Ok(())
    }

    fn learning_rate(&self, epoch: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.adam.learning_rate,
            LrSchedule::Step { every, factor } => {
                self.adam.learning_rate * factor.powi((epoch / every) as i32)
            }
        }
    }

    /// Posts an author needs to take part in pre-training.
    pub fn required_posts(&self) -> usize {
        self.posts_per_sample[0]
            + if self.use_all_posts {
                0
            } else {
                self.holdout_posts
            }
    }
}

/// Post rows (ascending, i.e. chronological) and the target class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingExample {
    pub rows: Vec<usize>,
    pub class: usize,
}

/// Draws a size uniformly from `[min, min(max, rows)]`, then that many
/// distinct rows uniformly, kept in chronological order.
pub fn sample_training_example<R: Rng + ?Sized>(
    author: &PostEmbeddingMatrix,
    class: usize,
    config: &PretrainConfig,
    rng: &mut R,
) -> Result<TrainingExample, A2vError> {
    let rows: Vec<usize> = (0..author.rows()).collect();
    sample_from(author.author_id(), &rows, class, config, rng)
}

fn sample_from<R: Rng + ?Sized>(
    author_id: &str,
    pool: &[usize],
    class: usize,
    config: &PretrainConfig,
    rng: &mut R,
) -> Result<TrainingExample, A2vError> {
    let [lo, hi] = config.posts_per_sample;
    if pool.len() < lo {
        return Err(A2vError::TooFewPosts {
            author: author_id.to_string(),
            have: pool.len(),
            need: lo,
        });
    }
    let size = rng.random_range(lo..=hi.min(pool.len()));
    let mut picked: Vec<usize> = sample(rng, pool.len(), size)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();
    Ok(TrainingExample {
        rows: picked,
        class,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub train_top1: f64,
    pub heldout_loss: Option<f64>,
    pub heldout_top1: Option<f64>,
    pub heldout_top5: Option<f64>,
}

pub struct PretrainOutput {
    /// Best model by held-out top-5 (ties: lower held-out loss), or the final
    /// model without a held-out split.
    pub model: AuthorVecModel,
    pub optimizer: AdamState<f32>,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

struct AuthorData<'a> {
    matrix: &'a PostEmbeddingMatrix,
    class: usize,
    train: Vec<usize>,
    heldout: Vec<usize>,
}

/// Selects qualifying authors, builds a fresh model over them and trains it.
pub fn pretrain(
    corpus: &[PostEmbeddingMatrix],
    model_config: &ModelConfig,
    config: &PretrainConfig,
) -> Result<PretrainOutput, A2vError> {
    let model = initial_model(corpus, model_config, config)?;
    pretrain_from(model, None, corpus, config, &mut |_, _, _| Ok(()))
}

/// Fresh model whose classes are the corpus authors with enough posts for
/// `config`, in corpus order, capped at `config.authors`.
pub fn initial_model(
    corpus: &[PostEmbeddingMatrix],
    model_config: &ModelConfig,
    config: &PretrainConfig,
) -> Result<AuthorVecModel, A2vError> {
    config.validate()?;
    let need = config.required_posts();
    let mut classes: Vec<String> = corpus
        .iter()
        .filter(|m| m.rows() >= need)
        .map(|m| m.author_id().to_string())
        .collect();
    let skipped = corpus.len() - classes.len();
    if skipped > 0 {
        info!("skipping {skipped} authors with fewer than {need} posts");
    }
    if let Some(n) = config.authors {
        classes.truncate(n);
    }
    AuthorVecModel::new(model_config.clone(), classes, config.seed)
}

/// Callback run after every epoch with the current model and optimizer,
/// e.g. to write a checkpoint.
pub type EpochObserver<'a> =
    dyn FnMut(&EpochRecord, &AuthorVecModel, &AdamState<f32>) -> Result<(), A2vError> + 'a;

/// Trains an existing model. Its `classes` fix the author → class mapping;
/// corpus authors outside that list are ignored.
pub fn pretrain_from(
    mut model: AuthorVecModel,
    optimizer: Option<AdamState<f32>>,
    corpus: &[PostEmbeddingMatrix],
    config: &PretrainConfig,
    observer: &mut EpochObserver<'_>,
) -> Result<PretrainOutput, A2vError> {
    config.validate()?;
    if !model.has_head() {
        return Err(A2vError::NoHead);
    }
    let class_of: HashMap<&str, usize> = model.class_index();
    let mut authors = Vec::with_capacity(class_of.len());
    for m in corpus {
        let Some(&class) = class_of.get(m.author_id()) else {
            continue;
        };
        model.check_dim(m)?;
        let (train, heldout): (Vec<usize>, Vec<usize>) = if config.use_all_posts {
            ((0..m.rows()).collect(), Vec::new())
        } else {
            let held = holdout_indices(m.rows(), config.holdout_posts, config.seed, m.author_id());
            let train = (0..m.rows())
                .filter(|i| held.binary_search(i).is_err())
                .collect();
            (train, held)
        };
        if train.len() < config.posts_per_sample[0] || (!config.use_all_posts && heldout.is_empty())
        {
            return Err(A2vError::TooFewPosts {
                author: m.author_id().to_string(),
                have: m.rows(),
                need: config.required_posts(),
            });
        }
        authors.push(AuthorData {
            matrix: m,
            class,
            train,
            heldout,
        });
    }
    if authors.len() != class_of.len() {
        let present: std::collections::HashSet<usize> = authors.iter().map(|a| a.class).collect();
        let missing = (0..model.classes.len())
            .find(|c| !present.contains(c))
            .unwrap();
        return Err(A2vError::MissingClass(model.classes[missing].clone()));
    }

    let mut adam = optimizer.unwrap_or_else(|| AdamState::new(config.adam, &model.net));
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, f64, usize, AuthorVecModel, AdamState<f32>)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;
    let mut last_good = model.clone();

    for epoch in 0..config.epochs {
        let lr = config.learning_rate(epoch);
        adam.config.learning_rate = lr;
        let mut rng = derive_rng(config.seed, &format!("epoch:{epoch}"));
        let mut order: Vec<usize> = authors
            .iter()
            .enumerate()
            .flat_map(|(i, a)| {
                std::iter::repeat_n(i, a.train.len().div_ceil(config.posts_per_draw))
            })
            .collect();
        order.shuffle(&mut rng);
        let mut examples = Vec::with_capacity(order.len());
        for &i in &order {
            let a = &authors[i];
            examples.push((
                i,
                sample_from(a.matrix.author_id(), &a.train, a.class, config, &mut rng)?,
            ));
        }

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in examples.chunks(config.batch_size) {
            let (mut grads, batch_loss, batch_correct) =
                batch_gradients(&model.net, &authors, batch, config.chunk_size)?;
            if !batch_loss.is_finite() {
                return Err(A2vError::NonFinite {
                    epoch,
                    last_good: Box::new(last_good),
                });
            }
            grads.scale_params(1.0 / batch.len() as f32);
            clip_global_norm(&mut grads, config.clip_norm as f32);
            if adam.step(&mut model.net, &grads).is_err() {
                return Err(A2vError::NonFinite {
                    epoch,
                    last_good: Box::new(last_good),
                });
            }
            loss_sum += batch_loss;
            correct += batch_correct;
        }

        let mut record = EpochRecord {
            epoch,
            learning_rate: lr,
            train_loss: loss_sum / examples.len().max(1) as f64,
            train_top1: correct as f64 / examples.len().max(1) as f64,
            heldout_loss: None,
            heldout_top1: None,
            heldout_top5: None,
        };
        if !config.use_all_posts {
            let (loss, top1, top5) = evaluate_heldout(&model.net, &authors)?;
            record.heldout_loss = Some(loss);
            record.heldout_top1 = Some(top1);
            record.heldout_top5 = Some(top5);
        }
        info!(
            "epoch {epoch}: loss {:.4} train@1 {:.3} heldout@1 {:?} heldout@5 {:?}",
            record.train_loss, record.train_top1, record.heldout_top1, record.heldout_top5
        );
        if !model
            .net
            .params()
            .iter()
            .all(|p| p.data.iter().all(|v| v.is_finite()))
        {
            return Err(A2vError::NonFinite {
                epoch,
                last_good: Box::new(last_good),
            });
        }
        observer(&record, &model, &adam)?;
        last_good = model.clone();
        log.push(record.clone());

        if let (Some(top5), Some(loss)) = (record.heldout_top5, record.heldout_loss) {
            let improved = match &best {
                None => true,
                Some((b5, bl, ..)) => top5 > *b5 || (top5 == *b5 && loss < *bl),
            };
            if improved {
                best = Some((top5, loss, epoch, model.clone(), adam.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                debug!("no held-out improvement for {since_best} epochs");
                if config.patience.is_some_and(|p| since_best >= p) {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    let (model, optimizer, best_epoch) = match best {
        Some((_, _, e, m, a)) => (m, a, e),
        None => (model, adam, log.len().saturating_sub(1)),
    };
    Ok(PretrainOutput {
        model,
        optimizer,
        log,
        best_epoch,
        stopped_early,
    })
}

/// Summed gradients, summed loss and correct top-1 count for one batch.
/// Work is split into fixed chunks and reduced in chunk order.
fn batch_gradients(
    net: &Network<f32>,
    authors: &[AuthorData<'_>],
    batch: &[(usize, TrainingExample)],
    chunk_size: usize,
) -> Result<(Network<f32>, f64, usize), A2vError> {
    let partials: Result<Vec<_>, A2vError> = batch
        .par_chunks(chunk_size)
        .map(|chunk| {
            let mut grads = net.zeros_like();
            let mut loss = 0.0f64;
            let mut correct = 0;
            for (i, ex) in chunk {
                let seq = authors[*i].matrix.select(&ex.rows);
                let (l, fw) = net.loss_and_grad(&seq, ex.class, SparsityMode::Train, &mut grads)?;
                loss += l as f64;
                correct += usize::from(rank_of(fw.logits(), ex.class) == 0);
            }
            Ok((grads, loss, correct))
        })
        .collect();
    let mut parts = partials?.into_iter();
    let (mut total, mut loss, mut correct) = parts.next().expect("batch is never empty");
    for (g, l, c) in parts {
        total.add_assign_params(&g);
        loss += l;
        correct += c;
    }
    Ok((total, loss, correct))
}

/// Position of `target` when classes are ordered by descending score, ties
/// broken toward the lower index.
fn rank_of(scores: &[f32], target: usize) -> usize {
    let t = scores[target];
    scores
        .iter()
        .enumerate()
        .filter(|&(i, &s)| s > t || (s == t && i < target))
        .count()
}

/// Each author's held-out posts form one chronological sequence.
fn evaluate_heldout(
    net: &Network<f32>,
    authors: &[AuthorData<'_>],
) -> Result<(f64, f64, f64), A2vError> {
    let results: Result<Vec<(f64, usize)>, A2vError> = authors
        .par_iter()
        .map(|a| {
            let seq = a.matrix.select(&a.heldout);
            let fw = net.forward(&seq, SparsityMode::Train, None)?;
            let (loss, _) = softmax_xent(fw.logits(), a.class);
            Ok((loss as f64, rank_of(fw.logits(), a.class)))
        })
        .collect();
    let results = results?;
    let n = results.len() as f64;
    let loss = results.iter().map(|r| r.0).sum::<f64>() / n;
    let top1 = results.iter().filter(|r| r.1 < 1).count() as f64 / n;
    let top5 = results.iter().filter(|r| r.1 < 5).count() as f64 / n;
    Ok((loss, top1, top5))
}
