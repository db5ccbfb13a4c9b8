//! A common prediction surface over all trained models, used by the
//! evaluation protocols.

use rand::RngCore;

use crate::bernmix::{CountBernmixH1, CountBernmixH2};
use crate::bitm::{BitmBernmixH2, FoldInConfig, TopicModel};
use crate::count::{BaselineModel, CountModel};
use crate::error::{Error, Result};

/// Anything that can score properties for an unknown concept, either from a
/// bag of context occurrences (multi-shot) or from one context item
/// (one-shot). Higher scores mean the property is more likely to apply.
pub trait Predictor: Send + Sync {
    /// Length of the returned score vectors.
    fn n_outputs(&self) -> usize;

    /// Whether the model has an estimate for this context item.
    fn knows_item(&self, item: &str) -> bool;

    /// Scores from all given context occurrences. Unknown items are skipped;
    /// the second value counts the skipped occurrences.
    fn predict_contexts(
        &self,
        contexts: &[(&str, u64)],
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<f64>, u64)>;

    /// Scores from a single context occurrence. Errors on unknown items so
    /// callers can decide to skip them.
    fn predict_single(&self, item: &str, rng: &mut dyn RngCore) -> Result<(Vec<f64>, u64)>;
}

impl Predictor for BaselineModel {
    fn n_outputs(&self) -> usize {
        self.probs().len()
    }

    fn knows_item(&self, _item: &str) -> bool {
        true
    }

    fn predict_contexts(
        &self,
        _contexts: &[(&str, u64)],
        _rng: &mut dyn RngCore,
    ) -> Result<(Vec<f64>, u64)> {
        Ok((self.probs().to_vec(), 0))
    }

    fn predict_single(&self, _item: &str, _rng: &mut dyn RngCore) -> Result<(Vec<f64>, u64)> {
        Ok((self.probs().to_vec(), 0))
    }
}

impl Predictor for CountModel {
    fn n_outputs(&self) -> usize {
        self.n_symbols()
    }

    fn knows_item(&self, item: &str) -> bool {
        self.knows(item)
    }

    fn predict_contexts(
        &self,
        contexts: &[(&str, u64)],
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<f64>, u64)> {
        Ok(self.learn_unknown(contexts, rng))
    }

    fn predict_single(&self, item: &str, rng: &mut dyn RngCore) -> Result<(Vec<f64>, u64)> {
        if !self.knows(item) {
            return Err(Error::UnknownItem(item.to_string()));
        }
        Ok(self.learn_unknown(&[(item, 1)], rng))
    }
}

impl Predictor for CountBernmixH1 {
    fn n_outputs(&self) -> usize {
        self.clusters().n_symbols()
    }

    fn knows_item(&self, item: &str) -> bool {
        self.knows(item)
    }

    fn predict_contexts(
        &self,
        contexts: &[(&str, u64)],
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<f64>, u64)> {
        Ok(self.learn_unknown(contexts, rng))
    }

    fn predict_single(&self, item: &str, rng: &mut dyn RngCore) -> Result<(Vec<f64>, u64)> {
        if !self.knows(item) {
            return Err(Error::UnknownItem(item.to_string()));
        }
        Ok(self.learn_unknown(&[(item, 1)], rng))
    }
}

impl Predictor for CountBernmixH2 {
    fn n_outputs(&self) -> usize {
        self.mixture.dim()
    }

    fn knows_item(&self, item: &str) -> bool {
        self.knows(item)
    }

    fn predict_contexts(
        &self,
        contexts: &[(&str, u64)],
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<f64>, u64)> {
        Ok(self.learn_unknown(contexts, rng))
    }

    fn predict_single(&self, item: &str, rng: &mut dyn RngCore) -> Result<(Vec<f64>, u64)> {
        if !self.knows(item) {
            return Err(Error::UnknownItem(item.to_string()));
        }
        Ok(self.learn_unknown(&[(item, 1)], rng))
    }
}

impl Predictor for TopicModel {
    fn n_outputs(&self) -> usize {
        self.n_symbols()
    }

    fn knows_item(&self, item: &str) -> bool {
        self.knows(item)
    }

    fn predict_contexts(
        &self,
        contexts: &[(&str, u64)],
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<f64>, u64)> {
        TopicModel::predict_contexts(self, contexts, &FoldInConfig::default(), rng)
    }

    fn predict_single(&self, item: &str, _rng: &mut dyn RngCore) -> Result<(Vec<f64>, u64)> {
        Ok((self.predict_single_item(item)?, 0))
    }
}

impl Predictor for BitmBernmixH2 {
    fn n_outputs(&self) -> usize {
        self.mixture.dim()
    }

    fn knows_item(&self, item: &str) -> bool {
        self.knows(item)
    }

    fn predict_contexts(
        &self,
        contexts: &[(&str, u64)],
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<f64>, u64)> {
        BitmBernmixH2::predict_contexts(self, contexts, &FoldInConfig::default(), rng)
    }

    fn predict_single(&self, item: &str, _rng: &mut dyn RngCore) -> Result<(Vec<f64>, u64)> {
        Ok((self.predict_single_item(item)?, 0))
    }
}
