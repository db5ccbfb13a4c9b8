//! Command-line front end. All real work lives in the library; this binary
//! parses arguments, wires files to the pipeline entry points and maps
//! errors to exit codes (0 success, 1 usage error, 2 data error, 3 runtime
//! failure).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use proplearn::count::{train_count_model, CountMode};
use proplearn::data::{OccurrenceTable, PropertyNorms};
use proplearn::error::{Error, Result};
use proplearn::eval::{
    eval_multishot, eval_oneshot, oracle_topk, spearman, topk_mean_by, InformativityScorer,
    OneShotRecord,
};
use proplearn::experiment::{
    derive_seed, parse_config_file, run_experiment, train_model, ExperimentConfig, TrainedModel,
};
use proplearn::ingest::{
    extract_contexts, filter_vocabulary, parse_norms, read_pairs, write_norms, write_pairs,
    QuantifierMap,
};
use proplearn::seeded_rng;
use proplearn::snapshot::{load_model, save_model};
use proplearn::synth::{generate, SynthSpec};

#[derive(Parser)]
#[command(
    name = "proplearn",
    about = "Learn definitional-property distributions for unknown words from co-occurrence data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract (concept, context item) pairs from a parsed corpus.
    Ingest(IngestArgs),
    /// Generate a synthetic dataset in the same file formats.
    Synth(SynthArgs),
    /// Train one model on a full dataset and write a snapshot.
    Train(TrainArgs),
    /// Evaluate a snapshot on held-out concepts using all their contexts.
    EvalMultishot(EvalArgs),
    /// Evaluate a snapshot one context occurrence at a time.
    EvalOneshot(EvalArgs),
    /// Correlate informativity measures with one-shot AP from a records file.
    Informativity(InformativityArgs),
    /// Run the full cross-validated, multi-run experiment pipeline.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Quantified norms file (concept<TAB>property<TAB>value).
    #[arg(long)]
    norms: PathBuf,
    /// Parsed corpus file (mutually exclusive with --pairs).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Pre-extracted pairs file (concept<TAB>item<TAB>count).
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Context mode for corpus extraction.
    #[arg(long, default_value = "syn")]
    context: String,
    /// Drop properties named by fewer concepts than this.
    #[arg(long, default_value_t = 5)]
    min_prop_concepts: usize,
}

impl DataArgs {
    fn load(&self) -> Result<(proplearn::data::PropertyInventory, Vec<PropertyNorms>, OccurrenceTable)> {
        let (inventory, norms) = parse_norms(
            &self.norms,
            &QuantifierMap::standard(),
            self.min_prop_concepts,
        )?;
        let table = match (&self.pairs, &self.corpus) {
            (Some(pairs), None) => read_pairs(pairs)?,
            (None, Some(corpus)) => {
                let choice: proplearn::experiment::ContextChoice = self.context.parse()?;
                let concepts: BTreeSet<String> =
                    norms.iter().map(|n| n.concept().to_string()).collect();
                let (_, table, stats) = extract_contexts(corpus, &choice.spec(), &concepts)?;
                log::info!(
                    "extracted {} pairs from {} sentences ({} blocks skipped)",
                    stats.pairs,
                    stats.sentences,
                    stats.skipped_blocks
                );
                table
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "--pairs and --corpus are mutually exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config("either --pairs or --corpus is required".into()))
            }
        };
        Ok((inventory, norms, table))
    }
}

#[derive(Args)]
struct IngestArgs {
    /// Parsed corpus file.
    #[arg(long)]
    corpus: PathBuf,
    /// Quantified norms file defining the concept set.
    #[arg(long)]
    norms: PathBuf,
    /// Context mode: syn, bow2 or bow5.
    #[arg(long, default_value = "syn")]
    context: String,
    #[arg(long, default_value_t = 5)]
    min_prop_concepts: usize,
    /// Drop context items with fewer total occurrences (1 keeps everything).
    #[arg(long, default_value_t = 5)]
    min_ctx_freq: u64,
    /// Output directory (receives pairs.tsv).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    topics: usize,
    #[arg(long, default_value_t = 50)]
    concepts: usize,
    #[arg(long, default_value_t = 100)]
    items: usize,
    #[arg(long, default_value_t = 40)]
    props: usize,
    #[arg(long, default_value_t = 200)]
    tokens_per_concept: usize,
    #[arg(long, default_value_t = SynthSpec::default().theta_conc)]
    theta_conc: f64,
    #[arg(long, default_value_t = SynthSpec::default().phi_conc)]
    phi_conc: f64,
    #[arg(long, default_value_t = SynthSpec::default().psi_conc)]
    psi_conc: f64,
    #[arg(long, default_value_t = SynthSpec::default().sharpness)]
    sharpness: f64,
    /// Output directory (receives norms.tsv, pairs.tsv, truth.json).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model to train: baseline, count-ind, count-mult, count-bernmix-h1,
    /// count-bernmix-h2, bitm or bitm-bernmix-h2.
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    topics: usize,
    #[arg(long, default_value_t = 500)]
    burnin: usize,
    #[arg(long = "K", default_value_t = 50)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    n_samples: usize,
    /// Output directory (receives model.json).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Model snapshot written by `train`.
    #[arg(long)]
    model_file: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// File with one test concept per line (defaults to all concepts absent
    /// from the snapshot's training list).
    #[arg(long)]
    test_concepts: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Context items with fewer corpus occurrences are excluded (one-shot).
    #[arg(long, default_value_t = 5)]
    min_ctx_freq: u64,
    /// Optional output directory for per-record CSVs.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InformativityArgs {
    /// One-shot records CSV produced by `eval-oneshot` or `experiment`.
    #[arg(long)]
    records: PathBuf,
    /// Optional output directory (receives informativity.txt).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// key=value configuration file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    topics: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    min_prop_concepts: Option<usize>,
    #[arg(long)]
    min_ctx_freq: Option<u64>,
    /// syn, bow2 or bow5.
    #[arg(long)]
    context: Option<String>,
    /// multishot, oneshot or both.
    #[arg(long)]
    eval: Option<String>,
    #[arg(long)]
    norms: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long)]
    type_map: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap reports --help/--version through its error type.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Parse { .. }
        | Error::Invalid(_)
        | Error::UnknownConcept(_)
        | Error::UnknownItem(_) => 2,
        Error::Io(_) | Error::Json(_) | Error::Snapshot(_) => 3,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => ingest(args),
        Command::Synth(args) => synth(args),
        Command::Train(args) => train(args),
        Command::EvalMultishot(args) => eval_multi(args),
        Command::EvalOneshot(args) => eval_one(args),
        Command::Informativity(args) => informativity(args),
        Command::Experiment(args) => experiment(args),
    }
}

fn ingest(args: IngestArgs) -> Result<()> {
    let (_, norms) = parse_norms(
        &args.norms,
        &QuantifierMap::standard(),
        args.min_prop_concepts,
    )?;
    let choice: proplearn::experiment::ContextChoice = args.context.parse()?;
    let concepts: BTreeSet<String> = norms.iter().map(|n| n.concept().to_string()).collect();
    let (_, table, stats) = extract_contexts(&args.corpus, &choice.spec(), &concepts)?;
    let table = if args.min_ctx_freq > 1 {
        filter_vocabulary(&table, args.min_ctx_freq)?
    } else {
        table
    };
    fs::create_dir_all(&args.out)?;
    let out = args.out.join("pairs.tsv");
    write_pairs(&table, &out)?;
    println!(
        "{} sentences, {} skipped blocks, {} concept tokens, {} pairs",
        stats.sentences, stats.skipped_blocks, stats.concept_tokens, stats.pairs
    );
    println!(
        "wrote {} ({} concepts x {} items, {} occurrences)",
        out.display(),
        table.n_concepts(),
        table.n_items(),
        table.total()
    );
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        topics: args.topics,
        concepts: args.concepts,
        items: args.items,
        properties: args.props,
        tokens_per_concept: args.tokens_per_concept,
        theta_conc: args.theta_conc,
        phi_conc: args.phi_conc,
        psi_conc: args.psi_conc,
        sharpness: args.sharpness,
        seed: args.seed,
        ..SynthSpec::default()
    };
    let data = generate(&spec)?;
    fs::create_dir_all(&args.out)?;
    write_norms(&data.inventory, &data.norms, args.out.join("norms.tsv"))?;
    write_pairs(&data.table, args.out.join("pairs.tsv"))?;
    fs::write(
        args.out.join("truth.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "spec": spec,
            "truth": data.truth,
        }))?,
    )?;
    println!(
        "wrote synthetic dataset to {} ({} concepts, {} items, {} properties, {} tokens)",
        args.out.display(),
        spec.concepts,
        data.table.n_items(),
        spec.properties,
        data.table.total()
    );
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let kind: proplearn::experiment::ModelKind = args.model.parse()?;
    let (inventory, norms, table) = args.data.load()?;
    let settings = proplearn::experiment::TrainSettings {
        topics: args.topics,
        burn_in: args.burnin,
        k: args.k,
        n_samples: args.n_samples,
        ..Default::default()
    };
    let mut rng = seeded_rng(args.seed);
    let model = train_model(kind, &table, &inventory, &norms, &settings, &mut rng)?;
    fs::create_dir_all(&args.out)?;
    let path = args.out.join("model.json");
    let trained: Vec<String> = norms.iter().map(|n| n.concept().to_string()).collect();
    save_model(&path, &inventory, &trained, &model)?;
    println!("trained {} and wrote {}", kind.as_str(), path.display());
    Ok(())
}

struct EvalData {
    model: TrainedModel,
    inventory: proplearn::data::PropertyInventory,
    train_norms: Vec<PropertyNorms>,
    test_norms: Vec<PropertyNorms>,
    table: OccurrenceTable,
}

/// Loads the snapshot plus evaluation data and resolves the test set.
fn load_eval(args: &EvalArgs) -> Result<EvalData> {
    let loaded = load_model(&args.model_file)?;
    let (inventory, norms, table) = args.data.load()?;
    if inventory != loaded.inventory {
        return Err(Error::Snapshot(
            "the norms file's property inventory does not match the snapshot".into(),
        ));
    }
    let trained: BTreeSet<&str> = loaded.trained_concepts.iter().map(String::as_str).collect();
    let test_set: BTreeSet<String> = match &args.test_concepts {
        Some(path) => fs::read_to_string(path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect(),
        None => norms
            .iter()
            .filter(|n| !trained.contains(n.concept()))
            .map(|n| n.concept().to_string())
            .collect(),
    };
    if test_set.is_empty() {
        return Err(Error::Config(
            "no test concepts: every concept in the norms file was used in training; \
             pass --test-concepts"
                .into(),
        ));
    }
    let test_norms: Vec<PropertyNorms> = norms
        .iter()
        .filter(|n| test_set.contains(n.concept()))
        .cloned()
        .collect();
    let train_norms: Vec<PropertyNorms> = norms
        .iter()
        .filter(|n| trained.contains(n.concept()))
        .cloned()
        .collect();
    Ok(EvalData {
        model: loaded.model,
        inventory,
        train_norms,
        test_norms,
        table,
    })
}

fn eval_multi(args: EvalArgs) -> Result<()> {
    let EvalData {
        model,
        test_norms,
        table,
        ..
    } = load_eval(&args)?;
    let mut rng = seeded_rng(args.seed);
    let eval = eval_multishot(model.predictor(), &test_norms, &table, false, &mut rng)?;
    println!(
        "multi-shot MAP {:.4}  GAP {:.4}  ({} concepts evaluated, {} without contexts)",
        eval.map, eval.gap, eval.evaluated, eval.skipped_no_contexts
    );
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        let mut csv = String::from("concept,ap\n");
        for (concept, ap) in &eval.per_concept_ap {
            let _ = writeln!(csv, "{concept},{ap}");
        }
        fs::write(out.join("multishot_ap.csv"), csv)?;
    }
    Ok(())
}

fn eval_one(args: EvalArgs) -> Result<()> {
    let EvalData {
        model,
        inventory,
        train_norms,
        test_norms,
        table,
    } = load_eval(&args)?;
    let train_set: BTreeSet<String> =
        train_norms.iter().map(|n| n.concept().to_string()).collect();
    let train_table = table.restrict_concepts(&train_set);

    // Entropy scoring always uses an independent count model.
    let aux;
    let count_ind = match &model {
        TrainedModel::Count(m) if m.mode() == CountMode::Independent => m,
        _ => {
            let items: Vec<String> = train_table.items().map(|(w, _)| w.to_string()).collect();
            let mut aux_rng = seeded_rng(derive_seed(args.seed, 0, 0).wrapping_add(7919));
            aux = train_count_model(
                &train_table,
                &items,
                &inventory,
                &train_norms,
                CountMode::Independent,
                &proplearn::count::CountPriors::default(),
                &mut aux_rng,
            )?;
            &aux
        }
    };
    let scorer = InformativityScorer::new(count_ind, &table, &train_table, &train_norms);
    let mut rng = seeded_rng(args.seed);
    let eval = eval_oneshot(
        model.predictor(),
        &test_norms,
        &table,
        args.min_ctx_freq,
        Some(&scorer),
        false,
        &mut rng,
    )?;
    println!(
        "one-shot MAP (all) {:.4} over {} records ({} low-frequency and {} OOV occurrences skipped)",
        eval.map_all,
        eval.records.len(),
        eval.skipped_low_freq,
        eval.skipped_oov
    );
    if !eval.records.is_empty() {
        println!("oracle top-20 {:.4}", oracle_topk(&eval.records, 20)?);
        if eval.records.iter().all(|r| r.avgcos.is_some()) {
            println!(
                "avgcos top-20 {:.4}",
                topk_mean_by(&eval.records, 20, |r| r.avgcos.unwrap())?
            );
        }
    }
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        let mut csv = String::from("run,fold,concept,context_item,ap,freq,entropy,avgcos\n");
        for r in &eval.records {
            let _ = writeln!(
                csv,
                "0,0,{},{},{},{},{},{}",
                r.concept,
                r.item,
                r.ap,
                r.freq,
                r.entropy.map_or_else(String::new, |v| v.to_string()),
                r.avgcos.map_or_else(String::new, |v| v.to_string()),
            );
        }
        fs::write(out.join("oneshot_records.csv"), csv)?;
    }
    Ok(())
}

fn informativity(args: InformativityArgs) -> Result<()> {
    let records = read_records_csv(&args.records)?;
    if records.len() < 3 {
        return Err(Error::Invalid(
            "need at least 3 records to correlate".into(),
        ));
    }
    let ap: Vec<f64> = records.iter().map(|r| r.ap).collect();
    let mut report = format!("informativity over {} records\n", records.len());
    let mut correlate = |name: &str, xs: Vec<f64>| {
        match spearman(&xs, &ap) {
            Ok((rho, p)) => {
                let _ = writeln!(report, "{name:<8} rho {rho:+.4}  p {p:.4}");
            }
            Err(e) => {
                let _ = writeln!(report, "{name:<8} n/a ({e})");
            }
        };
    };
    correlate("freq", records.iter().map(|r| r.freq as f64).collect());
    if records.iter().all(|r| r.entropy.is_some()) {
        correlate(
            "entropy",
            records.iter().map(|r| r.entropy.unwrap()).collect(),
        );
    }
    if records.iter().all(|r| r.avgcos.is_some()) {
        correlate("avgcos", records.iter().map(|r| r.avgcos.unwrap()).collect());
    }
    print!("{report}");
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("informativity.txt"), report)?;
    }
    Ok(())
}

fn read_records_csv(path: &PathBuf) -> Result<Vec<OneShotRecord>> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| Error::Invalid(format!("{display} is empty")))?
        .1;
    if header.trim() != "run,fold,concept,context_item,ap,freq,entropy,avgcos" {
        return Err(Error::parse(&display, 1, "unexpected records header"));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::parse(&display, lineno + 1, "expected 8 fields"));
        }
        let parse_f64 = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>()
                .map(Some)
                .map_err(|_| Error::parse(&display, lineno + 1, format!("bad number `{s}`")))
        };
        out.push(OneShotRecord {
            concept: f[2].to_string(),
            item: f[3].to_string(),
            ap: parse_f64(f[4])?
                .ok_or_else(|| Error::parse(&display, lineno + 1, "missing ap"))?,
            freq: f[5]
                .parse()
                .map_err(|_| Error::parse(&display, lineno + 1, "bad freq"))?,
            entropy: parse_f64(f[6])?,
            avgcos: parse_f64(f[7])?,
            scores: None,
        });
    }
    Ok(out)
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &args.config {
        for (k, v) in parse_config_file(path)? {
            cfg.apply(&k, &v)?;
        }
    }
    let overrides: Vec<(&str, Option<String>)> = vec![
        ("model", args.model.clone()),
        ("folds", args.folds.map(|v| v.to_string())),
        ("runs", args.runs.map(|v| v.to_string())),
        ("seed", args.seed.map(|v| v.to_string())),
        ("topics", args.topics.map(|v| v.to_string())),
        ("burnin", args.burnin.map(|v| v.to_string())),
        ("k", args.k.map(|v| v.to_string())),
        ("n-samples", args.n_samples.map(|v| v.to_string())),
        (
            "min-prop-concepts",
            args.min_prop_concepts.map(|v| v.to_string()),
        ),
        ("min-ctx-freq", args.min_ctx_freq.map(|v| v.to_string())),
        ("context", args.context.clone()),
        ("eval", args.eval.clone()),
        ("norms", args.norms.as_ref().map(|p| p.display().to_string())),
        ("corpus", args.corpus.as_ref().map(|p| p.display().to_string())),
        ("pairs", args.pairs.as_ref().map(|p| p.display().to_string())),
        (
            "type-map",
            args.type_map.as_ref().map(|p| p.display().to_string()),
        ),
        ("out", args.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.apply(key, &v)?;
        }
    }
    let report = run_experiment(&cfg)?;
    let summary = fs::read_to_string(cfg.out_dir.join("summary.txt"))?;
    print!("{summary}");
    println!(
        "{} cells written to {}",
        report.rows.len(),
        cfg.out_dir.display()
    );
    Ok(())
}
