//! Bayesian learners that infer which definitional properties apply to an
//! unknown word from the textual contexts it occurs in, in both multi-shot
//! (all corpus occurrences) and one-shot (a single occurrence) regimes.
//!
//! Known concepts come with quantified property norms, vectors of
//! probabilities over a shared property inventory (e.g. `dangerous` with
//! probability 0.95). The library learns per-context-item selectional
//! profiles from concept/context co-occurrences and uses them to predict the
//! property distribution of a held-out concept. Several model families are
//! implemented on top of the same data model:
//!
//! * [`count`] — conjugate count models (independent Beta profiles or a
//!   Dirichlet-multinomial variant) and the property-frequency baseline;
//! * [`bernmix`] — Bernoulli-mixture clustering of context items (hard) or
//!   concepts (soft), layered onto the count models;
//! * [`bitm`] — a bimodal topic model whose topics jointly emit context
//!   items and properties, trained by collapsed Gibbs sampling, with fold-in
//!   inference for unknown concepts;
//! * [`eval`] — average precision, its graded generalization, seeded
//!   cross-validation, multi-shot/one-shot protocols, informativity measures
//!   (frequency, entropy, average pairwise cosine) and Spearman correlation;
//! * [`synth`] — a generator that mirrors the topic model's generative story
//!   and serves as a recovery oracle;
//! * [`experiment`] — the cross-validated, multi-run pipeline behind the
//!   `proplearn` binary.
//!
//! Every training and evaluation entry point takes a caller-supplied random
//! source; run them with [`seeded_rng`] and identical seeds to get
//! bit-identical models and reports.
//!
//! ```
//! use proplearn::data::{OccurrenceTable, PropertyInventory, PropertyNorms};
//! use proplearn::count::{train_count_model, CountMode, CountPriors};
//! use proplearn::seeded_rng;
//!
//! let inventory = PropertyInventory::new(["an_animal", "dangerous"]).unwrap();
//! let norms = vec![PropertyNorms::new("alligator", vec![1.0, 0.95]).unwrap()];
//! let mut table = OccurrenceTable::new();
//! table.add("alligator", "swim-nsubj", 3);
//!
//! let mut rng = seeded_rng(1);
//! let items = vec!["swim-nsubj".to_string()];
//! let model = train_count_model(
//!     &table, &items, &inventory, &norms,
//!     CountMode::Independent, &CountPriors::default(), &mut rng,
//! ).unwrap();
//! let (probs, _) = model.learn_unknown(&[("swim-nsubj", 1)], &mut rng);
//! assert_eq!(probs.len(), 2);
//! ```

pub mod bernmix;
pub mod bitm;
pub mod count;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod ingest;
pub mod predict;
pub mod snapshot;
pub mod synth;
mod util;

pub use error::{Error, Result};
pub use predict::Predictor;
pub use util::seeded_rng;
