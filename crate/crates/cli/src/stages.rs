//! One function per command. Each reads its upstream artifacts through the
//! manifests in the output root and writes a fresh stage directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use author2vec_core::author2vec::{
    initial_model, pretrain_from, read_author_embeddings, write_author_embeddings,
    write_sparse_csv, A2vError, AuthorEmbedding, Checkpoint, EpochRecord,
};
use author2vec_core::baselines::{
    build_dictionary, fit_lda, fit_lsi, lda_user_embedding, lsi_user_embedding,
    wordvec_user_embedding, BaselineVector, WordVectorTable,
};
use author2vec_core::corpus::{
    attach_labels, basic_split, filter_authors, filter_posts_with_stats, load_corpus, load_labels,
    AuthorRecord, FilterStats, LabelTable, LoadStats, TokenizerVocab,
};
use author2vec_core::embedstore::{
    read_embeddings, write_embeddings, PostEmbeddingMatrix, StubEmbedder,
};
use author2vec_core::evalharness::{
    comparison_table, mbti_axis_benchmark, run_benchmark, shuffled_labels, EvalReport, MbtiReport,
};
use author2vec_core::linalg::Mat;
use author2vec_core::synth::{generate_corpus, synthetic_word_vectors};
use author2vec_core::viz::{export_scatter, tsne_project};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{CorpusSource, EmbedderKind, ExperimentConfig};
use crate::error::CliError;
use crate::manifest::{StageWriter, Workspace};

pub const SYNTH: &str = "synth";
pub const INGEST: &str = "ingest";
pub const EXPERIMENT: &str = "experiment";

const CORPUS_FILE: &str = "corpus.jsonl";
const LABELS_FILE: &str = "labels.csv";
const VOCAB_FILE: &str = "vocab.txt";
const WORDVEC_FILE: &str = "wordvec.txt";
const POST_EMBEDDINGS: &str = "post_embeddings.av1e";
const MODEL_FILE: &str = "model.ckpt";
const LAST_CKPT: &str = "last.ckpt";
const AUTHOR_EMBEDDINGS: &str = "author_embeddings.av1e";
const USER_VECTORS: &str = "user_vectors.av1e";
const POST_VECTORS: &str = "post_vectors.av1e";

/// Sequence input for pre-training: post embeddings, or per-post LSI
/// vectors from the `baseline lsi` stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PretrainInput {
    Posts,
    Lsi,
}

impl PretrainInput {
    fn suffix(self) -> &'static str {
        match self {
            PretrainInput::Posts => "",
            PretrainInput::Lsi => "-lsi",
        }
    }

    pub fn pretrain_stage(self) -> String {
        format!("pretrain{}", self.suffix())
    }

    pub fn embed_stage(self) -> String {
        format!("embed{}", self.suffix())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum BaselineKind {
    Lsi,
    Lda,
    Wordvec,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Lsi => "lsi",
            BaselineKind::Lda => "lda",
            BaselineKind::Wordvec => "wordvec",
        }
    }

    pub fn stage(self) -> String {
        format!("baseline-{}", self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalTask {
    Gender,
    Depression,
    Mbti,
    Custom(String),
}

impl EvalTask {
    pub fn stage(&self) -> String {
        match self {
            EvalTask::Gender => "eval-gender".into(),
            EvalTask::Depression => "eval-depression".into(),
            EvalTask::Mbti => "eval-mbti".into(),
            EvalTask::Custom(a) => format!("eval-custom-{}", sanitize(a)),
        }
    }

    pub fn attribute<'a>(&'a self, config: &'a ExperimentConfig) -> &'a str {
        match self {
            EvalTask::Gender => &config.eval.gender_attribute,
            EvalTask::Depression => &config.eval.depression_attribute,
            EvalTask::Mbti => &config.eval.mbti_attribute,
            EvalTask::Custom(a) => a,
        }
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Stage directory and file holding the author vectors of a named embedding.
fn embedding_source(name: &str) -> Result<(String, &'static str), CliError> {
    Ok(match name {
        "author2vec" => (PretrainInput::Posts.embed_stage(), AUTHOR_EMBEDDINGS),
        "author2vec-lsi" => (PretrainInput::Lsi.embed_stage(), AUTHOR_EMBEDDINGS),
        "lsi" => (BaselineKind::Lsi.stage(), USER_VECTORS),
        "lda" => (BaselineKind::Lda.stage(), USER_VECTORS),
        "wordvec" => (BaselineKind::Wordvec.stage(), USER_VECTORS),
        other => return Err(CliError::Config(format!("unknown embedding `{other}`"))),
    })
}

pub struct Context {
    pub config: ExperimentConfig,
    pub workspace: Workspace,
}

impl Context {
    pub fn new(config: ExperimentConfig) -> Self {
        let workspace = Workspace::new(config.output.clone());
        Self { config, workspace }
    }

    fn finish(&self, w: StageWriter, command: &str) -> Result<(), CliError> {
        let stage = w.stage().to_string();
        w.finish(command, self.config.snapshot())?;
        info!(
            "{command}: wrote {}",
            self.workspace.stage_dir(&stage).display()
        );
        Ok(())
    }
}

fn write_labels_csv(records: &[AuthorRecord]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["author_id", "attribute", "value"])
        .map_err(io)?;
    for r in records {
        for (k, v) in &r.labels {
            w.write_record([r.author_id.as_str(), k, v]).map_err(io)?;
        }
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn corpus_bytes(records: &[AuthorRecord]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    author2vec_core::corpus::write_corpus(records, &mut buf)?;
    Ok(buf)
}

/// Writes a synthetic corpus with planted labels, its vocabulary and word
/// vectors.
pub fn cmd_synth(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let mut w = ctx.workspace.begin(SYNTH)?;
    let corpus = generate_corpus(&cfg.synth);
    w.write(CORPUS_FILE, &corpus_bytes(&corpus)?)?;
    w.write(LABELS_FILE, &write_labels_csv(&corpus)?)?;
    w.write(VOCAB_FILE, cfg.synth.tokenizer_vocab().to_text().as_bytes())?;
    let wv = synthetic_word_vectors(&cfg.synth, cfg.baselines.wordvec_dim);
    w.write(WORDVEC_FILE, wv.to_text().as_bytes())?;
    ctx.finish(w, "synth")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IngestStats {
    pub load: LoadStats,
    pub filter: FilterStats,
    pub authors: usize,
    pub posts: usize,
    /// attribute → value → author count, over kept authors.
    pub label_histograms: BTreeMap<String, BTreeMap<String, usize>>,
}

/// Loads, labels and filters the corpus; with the stub embedder it also
/// writes the post embeddings.
pub fn cmd_ingest(ctx: &Context) -> Result<IngestStats, CliError> {
    let cfg = &ctx.config;
    let mut w = ctx.workspace.begin(INGEST)?;
    let (corpus_path, labels_path, vocab_path) = match cfg.corpus.source {
        CorpusSource::Synthetic => (
            w.require(&ctx.workspace, SYNTH, CORPUS_FILE)?,
            Some(w.require(&ctx.workspace, SYNTH, LABELS_FILE)?),
            w.require(&ctx.workspace, SYNTH, VOCAB_FILE)?,
        ),
        CorpusSource::Files => {
            let corpus = configured(&cfg.corpus.path, "corpus.path")?;
            let vocab = configured(&cfg.corpus.vocab, "corpus.vocab")?;
            w.external("corpus.path", &corpus)?;
            w.external("corpus.vocab", &vocab)?;
            let labels = match &cfg.corpus.labels {
                Some(p) => {
                    w.external("corpus.labels", p)?;
                    Some(p.clone())
                }
                None => None,
            };
            (corpus, labels, vocab)
        }
    };
    let (mut corpus, load) = load_corpus(&corpus_path)?;
    if let Some(p) = labels_path {
        attach_labels(&mut corpus, &load_labels(&p)?);
    }
    let vocab = TokenizerVocab::load(&vocab_path, &cfg.corpus.unk_token)?;
    let mut filter = FilterStats::default();
    let filtered: Vec<AuthorRecord> = corpus
        .iter()
        .map(|a| filter_posts_with_stats(a, &vocab, &cfg.corpus.filter, &mut filter))
        .collect();
    let before = filtered.len();
    let kept = filter_authors(filtered, &cfg.corpus.filter);
    filter.dropped_authors = before - kept.len();
    if kept.is_empty() {
        return Err(CliError::Data("no author survives filtering".into()));
    }

    let mut label_histograms: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for a in &kept {
        for (k, v) in &a.labels {
            *label_histograms
                .entry(k.clone())
                .or_default()
                .entry(v.clone())
                .or_default() += 1;
        }
    }
    let stats = IngestStats {
        load,
        filter,
        authors: kept.len(),
        posts: kept.iter().map(|a| a.posts.len()).sum(),
        label_histograms,
    };
    w.write(CORPUS_FILE, &corpus_bytes(&kept)?)?;
    w.write(LABELS_FILE, &write_labels_csv(&kept)?)?;
    w.write_json("stats.json", &stats)?;
    if cfg.embedder.kind == EmbedderKind::Stub {
        let mut stub = StubEmbedder::new(cfg.embedder.dim, cfg.seed);
        let mats = kept
            .iter()
            .map(|a| stub.embed_author(a))
            .collect::<Result<Vec<_>, _>>()?;
        write_embeddings(&mats, &w.path(POST_EMBEDDINGS))?;
        w.record(POST_EMBEDDINGS)?;
    }
    ctx.finish(w, "ingest")?;
    Ok(stats)
}

fn configured(p: &Option<PathBuf>, key: &str) -> Result<PathBuf, CliError> {
    let p = p
        .clone()
        .ok_or_else(|| CliError::Config(format!("{key} is not set")))?;
    if !p.exists() {
        return Err(CliError::Config(format!(
            "{key}: {} does not exist",
            p.display()
        )));
    }
    Ok(p)
}

fn ingested_corpus(ctx: &Context, w: &mut StageWriter) -> Result<Vec<AuthorRecord>, CliError> {
    let path = w.require(&ctx.workspace, INGEST, CORPUS_FILE)?;
    Ok(load_corpus(&path)?.0)
}

fn ingested_labels(ctx: &Context, w: &mut StageWriter) -> Result<LabelTable, CliError> {
    let path = w.require(&ctx.workspace, INGEST, LABELS_FILE)?;
    Ok(load_labels(&path)?)
}

/// Post embeddings of every ingested author, in corpus order.
fn post_embeddings(
    ctx: &Context,
    w: &mut StageWriter,
) -> Result<Vec<PostEmbeddingMatrix>, CliError> {
    match ctx.config.embedder.kind {
        EmbedderKind::Stub => Ok(read_embeddings(
            &w.require(&ctx.workspace, INGEST, POST_EMBEDDINGS)?,
            None,
        )?),
        EmbedderKind::File => {
            let corpus = ingested_corpus(ctx, w)?;
            let path = configured(&ctx.config.embedder.path, "embedder.path")?;
            w.external("embedder.path", &path)?;
            let ids: Vec<String> = corpus.iter().map(|a| a.author_id.clone()).collect();
            let mats = read_embeddings(&path, Some(&ids))?;
            for (a, m) in corpus.iter().zip(&mats) {
                if a.posts.len() != m.rows() {
                    return Err(CliError::Data(format!(
                        "author {:?}: {} posts but {} embedding rows",
                        a.author_id,
                        a.posts.len(),
                        m.rows()
                    )));
                }
            }
            Ok(mats)
        }
    }
}

fn sequence_input(
    ctx: &Context,
    w: &mut StageWriter,
    input: PretrainInput,
) -> Result<Vec<PostEmbeddingMatrix>, CliError> {
    match input {
        PretrainInput::Posts => post_embeddings(ctx, w),
        PretrainInput::Lsi => {
            let path = w.require(&ctx.workspace, &BaselineKind::Lsi.stage(), POST_VECTORS)?;
            Ok(read_embeddings(&path, None)?)
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PretrainSummary {
    pub authors: usize,
    pub input_dim: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub best: EpochRecord,
}

/// Trains the encoder on author identity. `last.ckpt` is rewritten after
/// every epoch; `model.ckpt` holds the selected model.
pub fn cmd_pretrain(ctx: &Context, input: PretrainInput) -> Result<PretrainSummary, CliError> {
    let cfg = &ctx.config;
    let mut w = ctx.workspace.begin(&input.pretrain_stage())?;
    let mats = sequence_input(ctx, &mut w, input)?;
    let mut model_config = cfg.model.clone();
    model_config.input_dim = mats.first().map(|m| m.dim()).unwrap_or(0);
    let model = initial_model(&mats, &model_config, &cfg.pretrain)?;
    let authors = model.classes.len();
    let last = w.path(LAST_CKPT);
    let mut log_lines = String::new();
    let result = pretrain_from(model, None, &mats, &cfg.pretrain, &mut |rec, model, opt| {
        info!(
            "epoch {} loss {:.4} top1 {:.3} heldout top1 {:?} top5 {:?}",
            rec.epoch, rec.train_loss, rec.train_top1, rec.heldout_top1, rec.heldout_top5
        );
        log_lines.push_str(&serde_json::to_string(rec).expect("record serializes"));
        log_lines.push('\n');
        Checkpoint {
            model: model.clone(),
            optimizer: Some(opt.clone()),
        }
        .save(&last)
    });
    w.write("log.jsonl", log_lines.as_bytes())?;
    let out = match result {
        Ok(out) => out,
        Err(A2vError::NonFinite { epoch, last_good }) => {
            Checkpoint {
                model: *last_good,
                optimizer: None,
            }
            .save(&w.path("last_good.ckpt"))?;
            w.record("last_good.ckpt")?;
            if last.exists() {
                w.record(LAST_CKPT)?;
            }
            ctx.finish(w, "pretrain")?;
            return Err(CliError::Numeric(format!(
                "non-finite loss in epoch {epoch}; last good model saved"
            )));
        }
        Err(e) => return Err(e.into()),
    };
    w.record(LAST_CKPT)?;
    Checkpoint {
        model: out.model,
        optimizer: Some(out.optimizer),
    }
    .save(&w.path(MODEL_FILE))?;
    w.record(MODEL_FILE)?;
    let summary = PretrainSummary {
        authors,
        input_dim: model_config.input_dim,
        best_epoch: out.best_epoch,
        stopped_early: out.stopped_early,
        best: out.log[out.best_epoch].clone(),
    };
    w.write_json("summary.json", &summary)?;
    ctx.finish(w, "pretrain")?;
    Ok(summary)
}

/// Author vectors for every ingested author from the pretrained encoder.
pub fn cmd_embed_authors(ctx: &Context, input: PretrainInput) -> Result<(), CliError> {
    let mut w = ctx.workspace.begin(&input.embed_stage())?;
    let ckpt =
        Checkpoint::load(&w.require(&ctx.workspace, &input.pretrain_stage(), MODEL_FILE)?)?;
    let mats = sequence_input(ctx, &mut w, input)?;
    let model = ckpt.model.strip_head();
    let embeddings = model.embed_authors(&mats)?;
    write_author_embeddings(&embeddings, &w.path(AUTHOR_EMBEDDINGS))?;
    w.record(AUTHOR_EMBEDDINGS)?;
    write_sparse_csv(&embeddings, &w.path("author_embeddings.csv"))?;
    w.record("author_embeddings.csv")?;
    ctx.finish(w, "embed-authors")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub dim: usize,
    pub dictionary_terms: Option<usize>,
    /// Authors none of whose tokens reached the model.
    pub no_evidence: Vec<String>,
}

fn to_author_embeddings(ids: &[String], vectors: &[BaselineVector]) -> Vec<AuthorEmbedding> {
    ids.iter()
        .zip(vectors)
        .map(|(id, v)| AuthorEmbedding {
            author_id: id.clone(),
            vector: v.values.iter().map(|&x| x as f32).collect(),
        })
        .collect()
}

/// Fits one comparison embedder on the ingested corpus.
pub fn cmd_baseline(ctx: &Context, kind: BaselineKind) -> Result<BaselineSummary, CliError> {
    let cfg = &ctx.config.baselines;
    let mut w = ctx.workspace.begin(&kind.stage())?;
    let corpus = ingested_corpus(ctx, &mut w)?;
    let ids: Vec<String> = corpus.iter().map(|a| a.author_id.clone()).collect();
    let posts: Vec<Vec<Vec<String>>> = corpus
        .iter()
        .map(|a| a.posts.iter().map(|p| basic_split(&p.text)).collect())
        .collect();
    let docs: Vec<Vec<String>> = posts.iter().map(|ps| ps.concat()).collect();
    let dictionary = || {
        let flat: Vec<Vec<String>> = posts.iter().flatten().cloned().collect();
        build_dictionary(&flat, cfg.dictionary.min_df, cfg.dictionary.max_df_frac)
    };
    let (vectors, terms): (Vec<BaselineVector>, Option<usize>) = match kind {
        BaselineKind::Lsi => {
            let dict = dictionary()?;
            let terms = dict.len();
            let tfidf = dict.tfidf_matrix(&docs);
            let model = fit_lsi(dict, &tfidf, cfg.lsi_rank, &cfg.svd, ctx.config.seed)?;
            w.write("lsi.model", &model.to_bytes())?;
            let post_vectors = ids
                .iter()
                .zip(&posts)
                .map(|(id, ps)| {
                    let rows: Vec<Vec<f32>> = ps
                        .iter()
                        .map(|p| {
                            model
                                .project_tokens(p)
                                .into_iter()
                                .map(|v| v as f32)
                                .collect()
                        })
                        .collect();
                    PostEmbeddingMatrix::from_rows(id.clone(), &rows)
                })
                .collect::<Result<Vec<_>, _>>()?;
            write_embeddings(&post_vectors, &w.path(POST_VECTORS))?;
            w.record(POST_VECTORS)?;
            (
                posts
                    .iter()
                    .map(|p| lsi_user_embedding(p, &model, cfg.lsi_mode))
                    .collect(),
                Some(terms),
            )
        }
        BaselineKind::Lda => {
            let dict = dictionary()?;
            let terms = dict.len();
            let counts = dict.count_matrix(&docs);
            let model = fit_lda(dict, &counts, &cfg.lda, ctx.config.seed)?;
            w.write("lda.model", &model.to_bytes())?;
            (
                posts
                    .iter()
                    .map(|p| lda_user_embedding(p, &model))
                    .collect(),
                Some(terms),
            )
        }
        BaselineKind::Wordvec => {
            let path = match ctx.config.corpus.source {
                CorpusSource::Synthetic => w.require(&ctx.workspace, SYNTH, WORDVEC_FILE)?,
                CorpusSource::Files => {
                    let p = configured(&cfg.wordvec_path, "baselines.wordvec_path")?;
                    w.external("baselines.wordvec_path", &p)?;
                    p
                }
            };
            let table = WordVectorTable::load(&path)?;
            (
                posts
                    .iter()
                    .map(|p| wordvec_user_embedding(p, &table))
                    .collect(),
                None,
            )
        }
    };
    write_author_embeddings(&to_author_embeddings(&ids, &vectors), &w.path(USER_VECTORS))?;
    w.record(USER_VECTORS)?;
    let summary = BaselineSummary {
        dim: vectors.first().map_or(0, |v| v.values.len()),
        dictionary_terms: terms,
        no_evidence: ids
            .iter()
            .zip(&vectors)
            .filter(|(_, v)| v.no_evidence)
            .map(|(id, _)| id.clone())
            .collect(),
    };
    w.write_json("summary.json", &summary)?;
    ctx.finish(w, &format!("baseline {}", kind.name()))?;
    Ok(summary)
}

fn load_vectors(
    ctx: &Context,
    w: &mut StageWriter,
    name: &str,
) -> Result<BTreeMap<String, Vec<f64>>, CliError> {
    let (stage, file) = embedding_source(name)?;
    let path = w.require(&ctx.workspace, &stage, file)?;
    Ok(read_author_embeddings(&path)?
        .into_iter()
        .map(|e| (e.author_id, e.vector.into_iter().map(f64::from).collect()))
        .collect())
}

/// Label-shuffled control: chance level and the binomial standard error of
/// an accuracy-like score at chance over `n` authors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShuffledControl {
    pub embedding: String,
    pub f1_avg: f64,
    pub chance: f64,
    pub sigma: f64,
    pub within_3_sigma: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalSummary {
    pub task: String,
    pub attribute: String,
    pub reports: Vec<EvalReport>,
    pub shuffled: Option<ShuffledControl>,
}

/// Cross-validated probes of every configured embedding on one attribute.
pub fn cmd_eval(ctx: &Context, task: &EvalTask) -> Result<EvalSummary, CliError> {
    let cfg = &ctx.config.eval;
    let attribute = task.attribute(&ctx.config).to_string();
    let mut w = ctx.workspace.begin(&task.stage())?;
    let table = ingested_labels(ctx, &mut w)?;
    let labels: BTreeMap<String, String> = table
        .iter()
        .filter_map(|(author, attrs)| attrs.get(&attribute).map(|v| (author.clone(), v.clone())))
        .collect();
    if labels.is_empty() {
        return Err(CliError::Data(format!(
            "no author has a `{attribute}` label"
        )));
    }
    if cfg.embeddings.is_empty() {
        return Err(CliError::Config("eval.embeddings is empty".into()));
    }
    let mut vectors = Vec::new();
    for name in &cfg.embeddings {
        vectors.push((name.clone(), load_vectors(ctx, &mut w, name)?));
    }

    let mut reports = Vec::new();
    let mut shuffled = None;
    if *task == EvalTask::Mbti {
        let mut mbti = Vec::new();
        for (name, v) in &vectors {
            for probe in &cfg.probes {
                let r: MbtiReport = mbti_axis_benchmark(name, v, &labels, &cfg.plan, probe)?;
                w.write(
                    &format!(
                        "confusion-{}-{}.csv",
                        sanitize(name),
                        sanitize(&probe.label())
                    ),
                    r.confusion.to_csv(&r.types, true).as_bytes(),
                )?;
                reports.extend(r.axes.iter().cloned());
                mbti.push(r);
            }
        }
        w.write_json("mbti.json", &mbti)?;
    } else {
        for (name, v) in &vectors {
            for probe in &cfg.probes {
                let r = run_benchmark(name, &attribute, v, &labels, &cfg.plan, probe)?;
                w.write(
                    &format!(
                        "confusion-{}-{}.csv",
                        sanitize(name),
                        sanitize(&probe.label())
                    ),
                    r.confusion_csv(true).as_bytes(),
                )?;
                reports.push(r);
            }
        }
        if cfg.shuffled_control {
            let (name, v) = &vectors[0];
            let control_name = format!("{name}-shuffled");
            let r = run_benchmark(
                &control_name,
                &attribute,
                v,
                &shuffled_labels(&labels, ctx.config.seed),
                &cfg.plan,
                &cfg.probes[0],
            )?;
            let classes = r.classes.len() as f64;
            let chance = 1.0 / classes;
            let sigma = (chance * (1.0 - chance) / r.n_authors as f64).sqrt();
            shuffled = Some(ShuffledControl {
                embedding: control_name,
                f1_avg: r.f1_avg,
                chance,
                sigma,
                within_3_sigma: (r.f1_avg - chance).abs() <= 3.0 * sigma,
            });
            reports.push(r);
        }
    }
    w.write_json("reports.json", &reports)?;
    w.write("table.txt", comparison_table(&reports).as_bytes())?;
    let summary = EvalSummary {
        task: task.stage(),
        attribute,
        reports,
        shuffled,
    };
    w.write_json("summary.json", &summary)?;
    ctx.finish(
        w,
        &format!("eval {}", task.stage().trim_start_matches("eval-")),
    )?;
    Ok(summary)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VizSummary {
    pub embedding: String,
    pub points: usize,
    pub final_kl: Option<f64>,
    pub max_perplexity_error: f64,
}

/// Two-dimensional t-SNE map of one embedding, as CSV and SVG.
pub fn cmd_viz(ctx: &Context) -> Result<VizSummary, CliError> {
    let cfg = &ctx.config.viz;
    let mut w = ctx.workspace.begin("viz")?;
    let vectors = load_vectors(ctx, &mut w, &cfg.embedding)?;
    let labels = match &cfg.color_by {
        Some(attr) => {
            let table = ingested_labels(ctx, &mut w)?;
            vectors
                .keys()
                .map(|id| table.get(id).and_then(|a| a.get(attr)).cloned())
                .collect::<Vec<_>>()
        }
        None => vec![None; vectors.len()],
    };
    let ids: Vec<String> = vectors.keys().cloned().collect();
    let dim = vectors.values().next().map_or(0, Vec::len);
    let data: Vec<f64> = vectors.values().flatten().copied().collect();
    let out = tsne_project(&Mat::from_vec(ids.len(), dim, data), &cfg.tsne)?;
    export_scatter(&ids, &out.coords, &labels, &w.path("scatter"))?;
    w.record("scatter.csv")?;
    w.record("scatter.svg")?;
    let summary = VizSummary {
        embedding: cfg.embedding.clone(),
        points: ids.len(),
        final_kl: out.kl_trace.last().copied(),
        max_perplexity_error: out
            .perplexities
            .iter()
            .map(|p| (p - cfg.tsne.perplexity).abs())
            .fold(0.0, f64::max),
    };
    w.write_json("summary.json", &summary)?;
    ctx.finish(w, "viz")?;
    Ok(summary)
}

/// Headline numbers of the synthetic end-to-end run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub pretrain: PretrainSummary,
    pub pretrain_lsi_input: PretrainSummary,
    /// embedding → mean weighted F1 of the first probe.
    pub f1: BTreeMap<String, f64>,
    pub shuffled: Option<ShuffledControl>,
    pub viz: VizSummary,
    /// Every stage manifest digest, by stage name.
    pub manifests: BTreeMap<String, String>,
}

/// synth → ingest → baselines → pretrain/embed (post and LSI inputs) →
/// depression eval → viz, all in one output root.
pub fn cmd_synthetic(ctx: &Context) -> Result<ExperimentSummary, CliError> {
    if ctx.config.corpus.source != CorpusSource::Synthetic {
        return Err(CliError::Config(
            "the synthetic experiment needs corpus.source = \"synthetic\"".into(),
        ));
    }
    cmd_synth(ctx)?;
    cmd_ingest(ctx)?;
    for kind in [BaselineKind::Lsi, BaselineKind::Lda, BaselineKind::Wordvec] {
        cmd_baseline(ctx, kind)?;
    }
    let pretrain = cmd_pretrain(ctx, PretrainInput::Posts)?;
    cmd_embed_authors(ctx, PretrainInput::Posts)?;
    let pretrain_lsi_input = cmd_pretrain(ctx, PretrainInput::Lsi)?;
    cmd_embed_authors(ctx, PretrainInput::Lsi)?;
    let eval = cmd_eval(ctx, &EvalTask::Depression)?;
    let viz = cmd_viz(ctx)?;

    let first_probe = ctx.config.eval.probes[0].label();
    let f1 = eval
        .reports
        .iter()
        .filter(|r| r.probe.label() == first_probe && !r.embedding.ends_with("-shuffled"))
        .map(|r| (r.embedding.clone(), r.f1_avg))
        .collect();
    let mut w = ctx.workspace.begin(EXPERIMENT)?;
    let mut stages: BTreeSet<String> = [SYNTH, INGEST, "viz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for kind in [BaselineKind::Lsi, BaselineKind::Lda, BaselineKind::Wordvec] {
        stages.insert(kind.stage());
    }
    for input in [PretrainInput::Posts, PretrainInput::Lsi] {
        stages.insert(input.pretrain_stage());
        stages.insert(input.embed_stage());
    }
    stages.insert(EvalTask::Depression.stage());
    let mut manifests = BTreeMap::new();
    for s in &stages {
        manifests.insert(s.clone(), ctx.workspace.manifest(s)?.digest());
    }
    let summary = ExperimentSummary {
        pretrain,
        pretrain_lsi_input,
        f1,
        shuffled: eval.shuffled,
        viz,
        manifests,
    };
    w.write_json("summary.json", &summary)?;
    ctx.finish(w, "synthetic")?;
    Ok(summary)
}
