//! Experiment orchestration: configuration, seeded fold-by-run execution,
//! aggregation, and report emission.
//!
//! Every (fold, run) cell derives its own seed as
//! `seed + run * 10007 + fold`, so any single cell can be replayed in
//! isolation. Cells execute in parallel but results are assembled in a fixed
//! order, making whole reports byte-reproducible.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernmix::{build_count_h2, build_h1, represent_concepts, EmConfig, MixtureConfig};
use crate::bitm::{
    build_pseudo_corpus, build_pseudo_corpus_components, gibbs_train, BitmBernmixH2, GibbsConfig,
    TopicHyper,
};
use crate::count::{train_count_model, BaselineModel, CountMode, CountPriors};
use crate::data::{OccurrenceTable, PropertyInventory, PropertyNorms};
use crate::error::{Error, Result};
use crate::eval::{
    eval_multishot, eval_oneshot, map_by_type, oracle_topk, read_type_map, spearman, topk_mean_by,
    InformativityScorer, OneShotRecord, ScoredCase, TypeMap,
};
use crate::ingest::{extract_contexts, parse_norms, read_pairs, ContextSpec, QuantifierMap};
use crate::predict::Predictor;
use crate::util::{mean, seeded_rng, std_dev};

/// The model variants the runner knows how to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Baseline,
    CountInd,
    CountMult,
    CountBernmixH1,
    CountBernmixH2,
    Bitm,
    BitmBernmixH2,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Baseline,
        ModelKind::CountInd,
        ModelKind::CountMult,
        ModelKind::CountBernmixH1,
        ModelKind::CountBernmixH2,
        ModelKind::Bitm,
        ModelKind::BitmBernmixH2,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Baseline => "baseline",
            ModelKind::CountInd => "count-ind",
            ModelKind::CountMult => "count-mult",
            ModelKind::CountBernmixH1 => "count-bernmix-h1",
            ModelKind::CountBernmixH2 => "count-bernmix-h2",
            ModelKind::Bitm => "bitm",
            ModelKind::BitmBernmixH2 => "bitm-bernmix-h2",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .iter()
            .find(|m| m.as_str() == s)
            .copied()
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown model `{s}` (expected one of: {})",
                    ModelKind::ALL.map(|m| m.as_str()).join(", ")
                ))
            })
    }
}

/// Which evaluation protocols to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalTask {
    Multishot,
    Oneshot,
    Both,
}

impl EvalTask {
    pub fn multishot(&self) -> bool {
        matches!(self, EvalTask::Multishot | EvalTask::Both)
    }

    pub fn oneshot(&self) -> bool {
        matches!(self, EvalTask::Oneshot | EvalTask::Both)
    }
}

impl FromStr for EvalTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multishot" => Ok(EvalTask::Multishot),
            "oneshot" => Ok(EvalTask::Oneshot),
            "both" => Ok(EvalTask::Both),
            _ => Err(Error::Config(format!(
                "unknown eval task `{s}` (expected multishot, oneshot or both)"
            ))),
        }
    }
}

/// Context extraction choice exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextChoice {
    Syn,
    Bow2,
    Bow5,
}

impl ContextChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            ContextChoice::Syn => "syn",
            ContextChoice::Bow2 => "bow2",
            ContextChoice::Bow5 => "bow5",
        }
    }

    pub fn spec(&self) -> ContextSpec {
        match self {
            ContextChoice::Syn => ContextSpec::syn(),
            ContextChoice::Bow2 => ContextSpec::bow(2).expect("window 2 is valid"),
            ContextChoice::Bow5 => ContextSpec::bow(5).expect("window 5 is valid"),
        }
    }
}

impl FromStr for ContextChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "syn" => Ok(ContextChoice::Syn),
            "bow2" => Ok(ContextChoice::Bow2),
            "bow5" => Ok(ContextChoice::Bow5),
            _ => Err(Error::Config(format!(
                "unknown context `{s}` (expected syn, bow2 or bow5)"
            ))),
        }
    }
}

/// Model hyperparameters shared by training entry points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub topics: usize,
    pub burn_in: usize,
    pub post_samples: usize,
    pub k: usize,
    pub n_samples: usize,
    pub priors: CountPriors,
    pub hyper: TopicHyper,
    pub em: EmConfig,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            topics: 50,
            burn_in: 500,
            post_samples: 10,
            k: 50,
            n_samples: 100,
            priors: CountPriors::default(),
            hyper: TopicHyper::default(),
            em: EmConfig::default(),
        }
    }
}

impl TrainSettings {
    pub fn gibbs_config(&self) -> GibbsConfig {
        GibbsConfig {
            topics: self.topics,
            burn_in: self.burn_in,
            post_samples: self.post_samples,
            hyper: self.hyper,
        }
    }

    pub fn mixture_config(&self) -> MixtureConfig {
        MixtureConfig {
            k: self.k,
            n_samples: self.n_samples,
            em: self.em,
        }
    }
}

/// Full experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub folds: usize,
    pub runs: usize,
    pub seed: u64,
    pub train: TrainSettings,
    pub min_prop_concepts: usize,
    pub min_ctx_freq: u64,
    pub eval: EvalTask,
    pub context: ContextChoice,
    pub norms_path: PathBuf,
    pub corpus_path: Option<PathBuf>,
    pub pairs_path: Option<PathBuf>,
    pub type_map_path: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelKind::Baseline,
            folds: 5,
            runs: 5,
            seed: 42,
            train: TrainSettings::default(),
            min_prop_concepts: 5,
            min_ctx_freq: 5,
            eval: EvalTask::Both,
            context: ContextChoice::Syn,
            norms_path: PathBuf::new(),
            corpus_path: None,
            pairs_path: None,
            type_map_path: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Applies one `key=value` setting (config-file line or CLI override).
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
        }
        match key {
            "model" => self.model = value.parse()?,
            "folds" => self.folds = num(key, value)?,
            "runs" => self.runs = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "topics" => self.train.topics = num(key, value)?,
            "burnin" => self.train.burn_in = num(key, value)?,
            "post-samples" => self.train.post_samples = num(key, value)?,
            "k" | "K" => self.train.k = num(key, value)?,
            "n-samples" => self.train.n_samples = num(key, value)?,
            "prior" => {
                let p: f64 = num(key, value)?;
                self.train.priors = CountPriors {
                    beta_alpha: p,
                    beta_beta: p,
                    dirichlet: p,
                };
            }
            "alpha" => self.train.hyper.alpha = num(key, value)?,
            "beta" => self.train.hyper.beta = num(key, value)?,
            "gamma" => self.train.hyper.gamma = num(key, value)?,
            "min-prop-concepts" => self.min_prop_concepts = num(key, value)?,
            "min-ctx-freq" => self.min_ctx_freq = num(key, value)?,
            "eval" => self.eval = value.parse()?,
            "context" => self.context = value.parse()?,
            "norms" => self.norms_path = PathBuf::from(value),
            "corpus" => self.corpus_path = Some(PathBuf::from(value)),
            "pairs" => self.pairs_path = Some(PathBuf::from(value)),
            "type-map" => self.type_map_path = Some(PathBuf::from(value)),
            "out" => self.out_dir = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be >= 2".into()));
        }
        if self.norms_path.as_os_str().is_empty() {
            return Err(Error::Config("a norms file is required".into()));
        }
        if !self.norms_path.exists() {
            return Err(Error::Config(format!(
                "norms file `{}` does not exist",
                self.norms_path.display()
            )));
        }
        match (&self.corpus_path, &self.pairs_path) {
            (None, None) => {
                return Err(Error::Config(
                    "either a corpus or a pairs file is required".into(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "corpus and pairs files are mutually exclusive".into(),
                ))
            }
            _ => {}
        }
        for path in [&self.corpus_path, &self.pairs_path, &self.type_map_path]
            .into_iter()
            .flatten()
        {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "input file `{}` does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

/// Reads a `key=value` configuration file (one pair per line, `#` comments).
pub fn parse_config_file(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| {
            Error::parse(&display, lineno + 1, "expected `key=value`")
        })?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Per-cell seed derivation, documented so external tools can replay one
/// cell: `seed + run * 10007 + fold`.
pub fn derive_seed(seed: u64, run: usize, fold: usize) -> u64 {
    seed.wrapping_add(run as u64 * 10007).wrapping_add(fold as u64)
}

/// Any of the trainable models, behind one enum for snapshots and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum TrainedModel {
    Baseline(BaselineModel),
    Count(crate::count::CountModel),
    CountBernmixH1(crate::bernmix::CountBernmixH1),
    CountBernmixH2(crate::bernmix::CountBernmixH2),
    Bitm(crate::bitm::TopicModel),
    BitmBernmixH2(BitmBernmixH2),
}

impl TrainedModel {
    pub fn predictor(&self) -> &dyn Predictor {
        match self {
            TrainedModel::Baseline(m) => m,
            TrainedModel::Count(m) => m,
            TrainedModel::CountBernmixH1(m) => m,
            TrainedModel::CountBernmixH2(m) => m,
            TrainedModel::Bitm(m) => m,
            TrainedModel::BitmBernmixH2(m) => m,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Baseline(_) => ModelKind::Baseline,
            TrainedModel::Count(m) => match m.mode() {
                CountMode::Independent => ModelKind::CountInd,
                CountMode::Multinomial => ModelKind::CountMult,
            },
            TrainedModel::CountBernmixH1(_) => ModelKind::CountBernmixH1,
            TrainedModel::CountBernmixH2(_) => ModelKind::CountBernmixH2,
            TrainedModel::Bitm(_) => ModelKind::Bitm,
            TrainedModel::BitmBernmixH2(_) => ModelKind::BitmBernmixH2,
        }
    }

    /// Restores internal indexes after deserialization.
    pub fn restore(self) -> Self {
        match self {
            TrainedModel::Baseline(m) => TrainedModel::Baseline(m),
            TrainedModel::Count(m) => TrainedModel::Count(m.restore()),
            TrainedModel::CountBernmixH1(m) => TrainedModel::CountBernmixH1(m.restore()),
            TrainedModel::CountBernmixH2(m) => TrainedModel::CountBernmixH2(m.restore()),
            TrainedModel::Bitm(m) => TrainedModel::Bitm(m.restore()),
            TrainedModel::BitmBernmixH2(m) => TrainedModel::BitmBernmixH2(m.restore()),
        }
    }
}

/// Trains one model variant on the given training fold.
pub fn train_model(
    kind: ModelKind,
    train_table: &OccurrenceTable,
    inventory: &PropertyInventory,
    train_norms: &[PropertyNorms],
    settings: &TrainSettings,
    rng: &mut dyn RngCore,
) -> Result<TrainedModel> {
    let items: Vec<String> = train_table.items().map(|(w, _)| w.to_string()).collect();
    Ok(match kind {
        ModelKind::Baseline => TrainedModel::Baseline(BaselineModel::fit(train_norms)?),
        ModelKind::CountInd => TrainedModel::Count(train_count_model(
            train_table,
            &items,
            inventory,
            train_norms,
            CountMode::Independent,
            &settings.priors,
            rng,
        )?),
        ModelKind::CountMult => TrainedModel::Count(train_count_model(
            train_table,
            &items,
            inventory,
            train_norms,
            CountMode::Multinomial,
            &settings.priors,
            rng,
        )?),
        ModelKind::CountBernmixH1 => {
            let independent = train_count_model(
                train_table,
                &items,
                inventory,
                train_norms,
                CountMode::Independent,
                &settings.priors,
                rng,
            )?;
            TrainedModel::CountBernmixH1(build_h1(
                &independent,
                train_table,
                inventory,
                train_norms,
                &settings.mixture_config(),
                rng,
            )?)
        }
        ModelKind::CountBernmixH2 => TrainedModel::CountBernmixH2(build_count_h2(
            train_table,
            &items,
            train_norms,
            &settings.mixture_config(),
            &settings.priors,
            rng,
        )?),
        ModelKind::Bitm => {
            let corpus = build_pseudo_corpus(train_table, inventory, train_norms, rng)?;
            TrainedModel::Bitm(gibbs_train(&corpus, &settings.gibbs_config(), rng)?)
        }
        ModelKind::BitmBernmixH2 => {
            let concept_mixture =
                represent_concepts(train_norms, &settings.mixture_config(), rng)?;
            let corpus = build_pseudo_corpus_components(
                train_table,
                &concept_mixture.reps,
                settings.k,
                rng,
            )?;
            let model = gibbs_train(&corpus, &settings.gibbs_config(), rng)?;
            TrainedModel::BitmBernmixH2(BitmBernmixH2::new(model, concept_mixture.mixture)?)
        }
    })
}

/// One (fold, run) cell of the experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub fold: usize,
    pub run: usize,
    pub seed: u64,
    pub multishot_map: Option<f64>,
    pub multishot_gap: Option<f64>,
    pub oneshot_map: Option<f64>,
    pub oneshot_records: usize,
    pub evaluated_concepts: usize,
    pub skipped_no_contexts: usize,
    pub skipped_occurrences: u64,
    pub skipped_low_freq: u64,
    pub skipped_oov: u64,
}

/// Spearman correlations of the informativity measures against one-shot AP,
/// averaged over runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InformativityReport {
    pub freq_rho: f64,
    pub freq_p: f64,
    pub entropy_rho: f64,
    pub entropy_p: f64,
    pub avgcos_rho: f64,
    pub avgcos_p: f64,
    pub records: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std_dev: f64,
}

/// Everything an experiment produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsReport {
    pub model: ModelKind,
    pub context: ContextChoice,
    pub folds: usize,
    pub runs: usize,
    pub seed: u64,
    pub concepts: usize,
    pub properties: usize,
    pub rows: Vec<CellRow>,
    pub multishot_map: Option<Aggregate>,
    pub multishot_gap: Option<Aggregate>,
    /// One-shot MAP over all records, aggregated per run.
    pub oneshot_map: Option<Aggregate>,
    pub oracle_top20: Option<Aggregate>,
    pub avgcos_top20: Option<Aggregate>,
    pub informativity: Option<InformativityReport>,
    pub by_type_multishot: Option<BTreeMap<String, f64>>,
    pub by_type_oneshot_top20: Option<BTreeMap<String, f64>>,
    pub records_file: Option<String>,
}

struct CellOutcome {
    row: CellRow,
    records: Vec<OneShotRecord>,
    scored: Vec<ScoredCase>,
    test_norms: Vec<PropertyNorms>,
}

/// Runs the full cross-validated experiment described by the configuration
/// and writes `results.csv`, `summary.txt`, `report.json` and (for one-shot
/// evaluation) `oneshot_records.csv` into the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultsReport> {
    config.validate()?;
    let (inventory, norms) = parse_norms(
        &config.norms_path,
        &QuantifierMap::standard(),
        config.min_prop_concepts,
    )?;
    let table = match (&config.pairs_path, &config.corpus_path) {
        (Some(pairs), _) => read_pairs(pairs)?,
        (None, Some(corpus)) => {
            let concepts: BTreeSet<String> =
                norms.iter().map(|n| n.concept().to_string()).collect();
            let (_, table, stats) = extract_contexts(corpus, &config.context.spec(), &concepts)?;
            log::info!(
                "extracted {} pairs from {} sentences ({} blocks skipped)",
                stats.pairs,
                stats.sentences,
                stats.skipped_blocks
            );
            table
        }
        (None, None) => unreachable!("validated above"),
    };
    let type_map = match &config.type_map_path {
        Some(path) => Some(read_type_map(path)?),
        None => None,
    };
    run_experiment_on(config, &inventory, &norms, &table, type_map.as_ref())
}

/// As [`run_experiment`] but over already-loaded data.
pub fn run_experiment_on(
    config: &ExperimentConfig,
    inventory: &PropertyInventory,
    norms: &[PropertyNorms],
    table: &OccurrenceTable,
    type_map: Option<&TypeMap>,
) -> Result<ResultsReport> {
    let norms_by: BTreeMap<&str, &PropertyNorms> =
        norms.iter().map(|n| (n.concept(), n)).collect();
    for concept in table.concepts() {
        if !norms_by.contains_key(concept) {
            return Err(Error::UnknownConcept(concept.to_string()));
        }
    }
    let concepts: Vec<String> = norms.iter().map(|n| n.concept().to_string()).collect();
    let folds = crate::eval::cross_validate(&concepts, config.folds, config.seed)?;
    let keep_scores = type_map.is_some();

    let jobs: Vec<(usize, usize)> = (0..config.runs)
        .flat_map(|run| (0..config.folds).map(move |fold| (run, fold)))
        .collect();
    let outcomes: Vec<CellOutcome> = jobs
        .par_iter()
        .map(|&(run, fold)| {
            run_cell(
                config, inventory, norms, &norms_by, table, &folds[fold], run, fold, keep_scores,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let report = assemble_report(config, inventory, norms.len(), &outcomes, type_map)?;
    write_reports(config, &report, &outcomes)?;
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    config: &ExperimentConfig,
    inventory: &PropertyInventory,
    norms: &[PropertyNorms],
    norms_by: &BTreeMap<&str, &PropertyNorms>,
    table: &OccurrenceTable,
    fold: &crate::eval::Fold,
    run: usize,
    fold_idx: usize,
    keep_scores: bool,
) -> Result<CellOutcome> {
    let cell_seed = derive_seed(config.seed, run, fold_idx);
    let mut rng = seeded_rng(cell_seed);

    let train_set: BTreeSet<String> = fold.train.iter().cloned().collect();
    let train_table = table.restrict_concepts(&train_set);
    let train_norms: Vec<PropertyNorms> = norms
        .iter()
        .filter(|n| train_set.contains(n.concept()))
        .cloned()
        .collect();
    let mut test_norms: Vec<PropertyNorms> = fold
        .test
        .iter()
        .map(|c| (*norms_by[c.as_str()]).clone())
        .collect();
    test_norms.sort_by(|a, b| a.concept().cmp(b.concept()));

    let model = train_model(
        config.model,
        &train_table,
        inventory,
        &train_norms,
        &config.train,
        &mut rng,
    )?;

    let mut row = CellRow {
        fold: fold_idx,
        run,
        seed: cell_seed,
        multishot_map: None,
        multishot_gap: None,
        oneshot_map: None,
        oneshot_records: 0,
        evaluated_concepts: 0,
        skipped_no_contexts: 0,
        skipped_occurrences: 0,
        skipped_low_freq: 0,
        skipped_oov: 0,
    };
    let mut scored = Vec::new();
    let mut records = Vec::new();

    if config.eval.multishot() {
        let eval = eval_multishot(model.predictor(), &test_norms, table, keep_scores, &mut rng)?;
        row.multishot_map = Some(eval.map);
        row.multishot_gap = Some(eval.gap);
        row.evaluated_concepts = eval.evaluated;
        row.skipped_no_contexts = eval.skipped_no_contexts;
        row.skipped_occurrences = eval.skipped_occurrences;
        scored = eval.scored;
    }

    if config.eval.oneshot() {
        // The entropy measure always comes from an independent-condition
        // count model; reuse the trained one when possible.
        let aux;
        let count_ind = match &model {
            TrainedModel::Count(m) if m.mode() == CountMode::Independent => m,
            _ => {
                let mut aux_rng = seeded_rng(cell_seed.wrapping_add(7919));
                let items: Vec<String> =
                    train_table.items().map(|(w, _)| w.to_string()).collect();
                aux = train_count_model(
                    &train_table,
                    &items,
                    inventory,
                    &train_norms,
                    CountMode::Independent,
                    &config.train.priors,
                    &mut aux_rng,
                )?;
                &aux
            }
        };
        let scorer = InformativityScorer::new(count_ind, table, &train_table, &train_norms);
        let eval = eval_oneshot(
            model.predictor(),
            &test_norms,
            table,
            config.min_ctx_freq,
            Some(&scorer),
            keep_scores,
            &mut rng,
        )?;
        if !eval.records.is_empty() {
            row.oneshot_map = Some(eval.map_all);
        }
        row.oneshot_records = eval.records.len();
        row.skipped_low_freq = eval.skipped_low_freq;
        row.skipped_oov = eval.skipped_oov;
        records = eval.records;
    }

    Ok(CellOutcome {
        row,
        records,
        scored,
        test_norms,
    })
}

fn aggregate(values: &[f64]) -> Option<Aggregate> {
    if values.is_empty() {
        return None;
    }
    Some(Aggregate {
        mean: mean(values),
        std_dev: std_dev(values),
    })
}

fn assemble_report(
    config: &ExperimentConfig,
    inventory: &PropertyInventory,
    n_concepts: usize,
    outcomes: &[CellOutcome],
    type_map: Option<&TypeMap>,
) -> Result<ResultsReport> {
    let mut rows: Vec<CellRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    rows.sort_by_key(|r| (r.run, r.fold));

    let multishot_vals: Vec<f64> = rows.iter().filter_map(|r| r.multishot_map).collect();
    let gap_vals: Vec<f64> = rows.iter().filter_map(|r| r.multishot_gap).collect();

    // Per-run one-shot aggregates: pool each run's folds so every test
    // concept contributes exactly once per run.
    let mut per_run_records: BTreeMap<usize, Vec<&OneShotRecord>> = BTreeMap::new();
    for o in outcomes {
        per_run_records
            .entry(o.row.run)
            .or_default()
            .extend(o.records.iter());
    }
    let mut oneshot_maps = Vec::new();
    let mut oracle20 = Vec::new();
    let mut avgcos20 = Vec::new();
    let mut rho_rows: Vec<[f64; 6]> = Vec::new();
    let mut total_records = 0usize;
    for records in per_run_records.values() {
        if records.is_empty() {
            continue;
        }
        total_records += records.len();
        let owned: Vec<OneShotRecord> = records.iter().map(|r| (*r).clone()).collect();
        oneshot_maps.push(owned.iter().map(|r| r.ap).sum::<f64>() / owned.len() as f64);
        oracle20.push(oracle_topk(&owned, 20)?);
        if owned.iter().all(|r| r.avgcos.is_some()) {
            avgcos20.push(topk_mean_by(&owned, 20, |r| {
                r.avgcos.expect("checked above")
            })?);
            let ap: Vec<f64> = owned.iter().map(|r| r.ap).collect();
            let freq: Vec<f64> = owned.iter().map(|r| r.freq as f64).collect();
            let entropy: Vec<f64> = owned
                .iter()
                .map(|r| r.entropy.expect("scored records"))
                .collect();
            let avgcos: Vec<f64> = owned
                .iter()
                .map(|r| r.avgcos.expect("scored records"))
                .collect();
            // Degenerate runs (constant series) simply drop out of the
            // correlation report.
            if let (Ok((fr, fp)), Ok((er, ep)), Ok((ar, ap_))) = (
                spearman(&freq, &ap),
                spearman(&entropy, &ap),
                spearman(&avgcos, &ap),
            ) {
                rho_rows.push([fr, fp, er, ep, ar, ap_]);
            }
        }
    }
    let informativity = if rho_rows.is_empty() {
        None
    } else {
        let col = |i: usize| rho_rows.iter().map(|r| r[i]).sum::<f64>() / rho_rows.len() as f64;
        Some(InformativityReport {
            freq_rho: col(0),
            freq_p: col(1),
            entropy_rho: col(2),
            entropy_p: col(3),
            avgcos_rho: col(4),
            avgcos_p: col(5),
            records: total_records,
        })
    };

    // Property-type breakdowns.
    let mut by_type_multishot = None;
    let mut by_type_oneshot_top20 = None;
    if let Some(tm) = type_map {
        let groups = tm.group_vector(inventory);
        let all_scored: Vec<ScoredCase> = outcomes.iter().flat_map(|o| o.scored.clone()).collect();
        if !all_scored.is_empty() {
            by_type_multishot = Some(map_by_type(&all_scored, &groups)?);
        }
        // One-shot: restrict to each concept's oracle top-20 records.
        let mut top_cases = Vec::new();
        for o in outcomes {
            let gold_by: BTreeMap<&str, Vec<bool>> = o
                .test_norms
                .iter()
                .map(|n| (n.concept(), crate::eval::binarize_gold(n)))
                .collect();
            let mut by_concept: BTreeMap<&str, Vec<&OneShotRecord>> = BTreeMap::new();
            for r in &o.records {
                if r.scores.is_some() {
                    by_concept.entry(&r.concept).or_default().push(r);
                }
            }
            for (concept, mut rs) in by_concept {
                rs.sort_by(|a, b| b.ap.partial_cmp(&a.ap).unwrap());
                for r in rs.into_iter().take(20) {
                    top_cases.push(ScoredCase {
                        concept: concept.to_string(),
                        scores: r.scores.clone().expect("filtered above"),
                        gold: gold_by[concept].clone(),
                    });
                }
            }
        }
        if !top_cases.is_empty() {
            by_type_oneshot_top20 = Some(map_by_type(&top_cases, &groups)?);
        }
    }

    Ok(ResultsReport {
        model: config.model,
        context: config.context,
        folds: config.folds,
        runs: config.runs,
        seed: config.seed,
        concepts: n_concepts,
        properties: inventory.len(),
        rows,
        multishot_map: aggregate(&multishot_vals),
        multishot_gap: aggregate(&gap_vals),
        oneshot_map: aggregate(&oneshot_maps),
        oracle_top20: aggregate(&oracle20),
        avgcos_top20: aggregate(&avgcos20),
        informativity,
        by_type_multishot,
        by_type_oneshot_top20,
        records_file: config
            .eval
            .oneshot()
            .then(|| "oneshot_records.csv".to_string()),
    })
}

fn write_reports(
    config: &ExperimentConfig,
    report: &ResultsReport,
    outcomes: &[CellOutcome],
) -> Result<()> {
    fs::create_dir_all(&config.out_dir)?;

    // results.csv: one row per (run, fold) cell.
    let mut csv = String::from(
        "model,context,run,fold,seed,multishot_map,multishot_gap,oneshot_map,oneshot_records,evaluated_concepts,skipped_no_contexts,skipped_occurrences,skipped_low_freq,skipped_oov\n",
    );
    for r in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            report.model.as_str(),
            report.context.as_str(),
            r.run,
            r.fold,
            r.seed,
            opt(r.multishot_map),
            opt(r.multishot_gap),
            opt(r.oneshot_map),
            r.oneshot_records,
            r.evaluated_concepts,
            r.skipped_no_contexts,
            r.skipped_occurrences,
            r.skipped_low_freq,
            r.skipped_oov
        );
    }
    fs::write(config.out_dir.join("results.csv"), csv)?;

    // oneshot_records.csv, pooled over cells in deterministic order.
    if config.eval.oneshot() {
        let mut csv = String::from("run,fold,concept,context_item,ap,freq,entropy,avgcos\n");
        let mut ordered: Vec<&CellOutcome> = outcomes.iter().collect();
        ordered.sort_by_key(|o| (o.row.run, o.row.fold));
        for o in ordered {
            for r in &o.records {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    o.row.run,
                    o.row.fold,
                    r.concept,
                    r.item,
                    r.ap,
                    r.freq,
                    opt(r.entropy),
                    opt(r.avgcos)
                );
            }
        }
        fs::write(config.out_dir.join("oneshot_records.csv"), csv)?;
    }

    fs::write(config.out_dir.join("summary.txt"), render_summary(report))?;
    fs::write(
        config.out_dir.join("report.json"),
        serde_json::to_string_pretty(report)?,
    )?;
    Ok(())
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn render_summary(report: &ResultsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "model={} context={} folds={} runs={} seed={}",
        report.model.as_str(),
        report.context.as_str(),
        report.folds,
        report.runs,
        report.seed
    );
    let _ = writeln!(
        s,
        "data: {} concepts, {} properties",
        report.concepts, report.properties
    );
    let line = |name: &str, a: &Option<Aggregate>| match a {
        Some(a) => format!("{name:<22} mean {:.4}  std {:.4}\n", a.mean, a.std_dev),
        None => format!("{name:<22} n/a\n"),
    };
    s.push_str(&line("multi-shot MAP", &report.multishot_map));
    s.push_str(&line("multi-shot GAP", &report.multishot_gap));
    s.push_str(&line("one-shot MAP (all)", &report.oneshot_map));
    s.push_str(&line("one-shot oracle top-20", &report.oracle_top20));
    s.push_str(&line("one-shot avgcos top-20", &report.avgcos_top20));
    if let Some(inf) = &report.informativity {
        let _ = writeln!(
            s,
            "informativity over {} records (Spearman rho, p):",
            inf.records
        );
        let _ = writeln!(s, "  freq     rho {:+.4}  p {:.4}", inf.freq_rho, inf.freq_p);
        let _ = writeln!(
            s,
            "  entropy  rho {:+.4}  p {:.4}",
            inf.entropy_rho, inf.entropy_p
        );
        let _ = writeln!(
            s,
            "  avgcos   rho {:+.4}  p {:.4}",
            inf.avgcos_rho, inf.avgcos_p
        );
    }
    if let Some(bt) = &report.by_type_multishot {
        let _ = writeln!(s, "multi-shot MAP by property type:");
        for (group, map) in bt {
            let _ = writeln!(s, "  {group:<16} {map:.4}");
        }
    }
    if let Some(bt) = &report.by_type_oneshot_top20 {
        let _ = writeln!(s, "one-shot (oracle top-20) MAP by property type:");
        for (group, map) in bt {
            let _ = writeln!(s, "  {group:<16} {map:.4}");
        }
    }
    s
}
