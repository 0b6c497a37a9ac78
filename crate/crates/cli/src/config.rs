//! Experiment configuration: one TOML document, with `--set a.b=value`
//! overrides applied to the raw tree before it is deserialized.

use std::path::{Path, PathBuf};

use author2vec_core::author2vec::{ModelConfig, PretrainConfig};
use author2vec_core::baselines::{DictionaryConfig, LdaConfig, LsiMode, SvdConfig};
use author2vec_core::corpus::FilterPolicy;
use author2vec_core::evalharness::{FoldPlan, ProbeSpec};
use author2vec_core::synth::SynthConfig;
use author2vec_core::viz::TsneConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Copied into every stage's own seed field by [`ExperimentConfig::resolve`].
    pub seed: u64,
    pub output: PathBuf,
    pub corpus: CorpusConfig,
    pub embedder: EmbedderConfig,
    pub model: ModelConfig,
    pub pretrain: PretrainConfig,
    pub baselines: BaselineConfig,
    pub eval: EvalConfig,
    pub viz: VizConfig,
    pub synth: SynthConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output: PathBuf::from("runs/default"),
            corpus: CorpusConfig::default(),
            embedder: EmbedderConfig::default(),
            model: ModelConfig::default(),
            pretrain: PretrainConfig::default(),
            baselines: BaselineConfig::default(),
            eval: EvalConfig::default(),
            viz: VizConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    /// `corpus.path`, `corpus.labels` and `corpus.vocab` on disk.
    #[default]
    Files,
    /// The outputs of the `synth` command in the same output directory.
    Synthetic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub source: CorpusSource,
    pub path: Option<PathBuf>,
    /// `author_id,attribute,value` CSV.
    pub labels: Option<PathBuf>,
    /// One WordPiece token per line.
    pub vocab: Option<PathBuf>,
    pub unk_token: String,
    pub filter: FilterPolicy,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            source: CorpusSource::Files,
            path: None,
            labels: None,
            vocab: None,
            unk_token: "[UNK]".into(),
            filter: FilterPolicy::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    #[default]
    Stub,
    /// A precomputed AV1EMBED file (e.g. from the BERT extractor).
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    /// Stub embedding width.
    pub dim: usize,
    /// Input file when `kind = "file"`.
    pub path: Option<PathBuf>,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            kind: EmbedderKind::Stub,
            dim: 256,
            path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub dictionary: DictionaryConfig,
    pub lsi_rank: usize,
    pub lsi_mode: LsiMode,
    pub svd: SvdConfig,
    pub lda: LdaConfig,
    /// Word2vec-style text file; the synthetic source supplies its own.
    pub wordvec_path: Option<PathBuf>,
    pub wordvec_dim: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            dictionary: DictionaryConfig::default(),
            lsi_rank: 100,
            lsi_mode: LsiMode::ConcatDoc,
            svd: SvdConfig::default(),
            lda: LdaConfig::default(),
            wordvec_path: None,
            wordvec_dim: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub plan: FoldPlan,
    pub probes: Vec<ProbeSpec>,
    /// Embedding names to compare: `author2vec`, `author2vec-lsi`, `lsi`,
    /// `lda`, `wordvec`.
    pub embeddings: Vec<String>,
    /// Adds a label-permuted run of the first embedding and probe.
    pub shuffled_control: bool,
    /// Attribute names behind the fixed tasks.
    pub gender_attribute: String,
    pub depression_attribute: String,
    pub mbti_attribute: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            plan: FoldPlan::default(),
            probes: vec![ProbeSpec::logreg(), ProbeSpec::mlp(vec![256])],
            embeddings: vec![
                "author2vec".into(),
                "lsi".into(),
                "lda".into(),
                "wordvec".into(),
            ],
            shuffled_control: true,
            gender_attribute: "gender".into(),
            depression_attribute: "depressed".into(),
            mbti_attribute: "mbti".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VizConfig {
    pub embedding: String,
    /// Attribute used for point colors; unlabeled authors are grey.
    pub color_by: Option<String>,
    pub tsne: TsneConfig,
}

impl Default for VizConfig {
    fn default() -> Self {
        Self {
            embedding: "author2vec".into(),
            color_by: None,
            tsne: TsneConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML, applies `key=value` overrides, then resolves.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut tree: Table = text.parse().map_err(|e| CliError::Config(format!("{e}")))?;
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let mut config: ExperimentConfig = Value::Table(tree)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        config.resolve()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", p.display()))
            })?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    /// Pushes the global seed into every stage and checks cross-field rules.
    pub fn resolve(&mut self) -> Result<(), CliError> {
        let seed = self.seed;
        self.pretrain.seed = seed;
        self.eval.plan.seed = seed;
        for p in &mut self.eval.probes {
            p.seed = seed;
        }
        self.viz.tsne.seed = seed;
        self.synth.seed = seed;
        if self.embedder.kind == EmbedderKind::Stub && self.embedder.dim == 0 {
            return Err(CliError::Config("embedder.dim must be positive".into()));
        }
        if self.eval.probes.is_empty() {
            return Err(CliError::Config("eval.probes is empty".into()));
        }
        self.corpus.filter.validate()?;
        self.pretrain.validate()?;
        Ok(())
    }

    /// Snapshot stored in manifests. `output` is left out so that identical
    /// runs into different directories record identical manifests.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output");
        }
        v
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Sets `a.b.c = value`, creating tables on the way. The value is parsed as
/// a TOML literal and falls back to a bare string.
pub fn apply_override(tree: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key `{key}`")));
    }
    let value = parse_literal(raw.trim());
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut node = tree;
    for p in parents {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn parse_literal(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = ExperimentConfig::from_toml("", &[]).unwrap();
        assert_eq!(c.model, ModelConfig::default());
        assert_eq!(c.eval.probes.len(), 2);
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let c = ExperimentConfig::from_toml(
            "[model]\nhidden = 64\n",
            &[
                "model.hidden=32".into(),
                "pretrain.adam.learning_rate=0.003".into(),
                "viz.color_by=depressed".into(),
                "corpus.filter.exclude_keywords=[\"depress\"]".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.model.hidden, 32);
        assert_eq!(c.pretrain.adam.learning_rate, 0.003);
        assert_eq!(c.viz.color_by.as_deref(), Some("depressed"));
        assert_eq!(
            c.corpus.filter.exclude_keywords,
            vec!["depress".to_string()]
        );
    }

    #[test]
    fn seed_reaches_every_stage() {
        let c = ExperimentConfig::from_toml("seed = 9\n", &[]).unwrap();
        assert_eq!(c.pretrain.seed, 9);
        assert_eq!(c.eval.plan.seed, 9);
        assert!(c.eval.probes.iter().all(|p| p.seed == 9));
        assert_eq!(c.viz.tsne.seed, 9);
        assert_eq!(c.synth.seed, 9);
    }

    #[test]
    fn unknown_keys_and_bad_overrides_are_config_errors() {
        for (doc, o) in [
            ("bogus = 1\n", vec![]),
            ("", vec!["model.hidden".to_string()]),
            ("", vec!["seed.x=1".into()]),
        ] {
            let e = ExperimentConfig::from_toml(doc, &o).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{e}");
        }
    }

    #[test]
    fn snapshot_omits_output_and_round_trips() {
        let c = ExperimentConfig::from_toml("output = \"/tmp/x\"\n", &[]).unwrap();
        assert!(c.snapshot().get("output").is_none());
        let back = ExperimentConfig::from_toml(&c.to_toml(), &[]).unwrap();
        assert_eq!(back, c);
    }
}
