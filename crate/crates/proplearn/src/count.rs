//! Count-based learners: per-context-item Beta profiles (independent
//! Bernoulli condition), Dirichlet profiles (multinomial condition), and the
//! property-frequency baseline.
//!
//! Training walks the co-occurrence table in lexicographic order; for every
//! observed (concept, item) occurrence one instance (independent mode) or one
//! property (multinomial mode) is sampled from the concept and the item's
//! profile is conjugately updated. An unknown concept is then learned by
//! sampling imagined observations from the profiles of the context items it
//! occurs with.

use std::collections::{BTreeMap, HashMap};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::data::{Instance, OccurrenceTable, PropertyInventory, PropertyNorms};
use crate::error::{Error, Result};
use crate::util::sample_categorical;

/// Paired Beta parameters over the property inventory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaProfile {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl BetaProfile {
    /// Symmetric prior Beta(a0, b0) for every property.
    pub fn with_prior(len: usize, a0: f64, b0: f64) -> Result<Self> {
        if a0 <= 0.0 || b0 <= 0.0 {
            return Err(Error::Invalid(format!(
                "Beta prior parameters must be positive, got ({a0}, {b0})"
            )));
        }
        Ok(BetaProfile {
            alpha: vec![a0; len],
            beta: vec![b0; len],
        })
    }

    /// Uniform Beta(1, 1) prior.
    pub fn uniform(len: usize) -> Self {
        BetaProfile::with_prior(len, 1.0, 1.0).expect("1.0 is positive")
    }

    pub fn from_parts(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::Invalid(format!(
                "alpha/beta length mismatch: {} vs {}",
                alpha.len(),
                beta.len()
            )));
        }
        if alpha.iter().chain(beta.iter()).any(|&x| x <= 0.0) {
            return Err(Error::Invalid(
                "Beta parameters must be strictly positive".into(),
            ));
        }
        Ok(BetaProfile { alpha, beta })
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Conjugate update from one observed instance: set bits increment alpha,
    /// unset bits increment beta. Exact and order-independent over a batch.
    pub fn observe(&mut self, instance: &Instance) -> Result<()> {
        if instance.len() != self.alpha.len() {
            return Err(Error::Invalid(format!(
                "instance length {} does not match profile length {}",
                instance.len(),
                self.alpha.len()
            )));
        }
        for (i, &bit) in instance.bits().iter().enumerate() {
            if bit {
                self.alpha[i] += 1.0;
            } else {
                self.beta[i] += 1.0;
            }
        }
        Ok(())
    }

    /// Posterior predictive probabilities alpha / (alpha + beta).
    pub fn predictive(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.beta)
            .map(|(&a, &b)| a / (a + b))
            .collect()
    }
}

/// Dirichlet parameters over the property inventory (or any symbol space).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletProfile {
    counts: Vec<f64>,
}

impl DirichletProfile {
    pub fn symmetric(len: usize, c0: f64) -> Result<Self> {
        if c0 <= 0.0 {
            return Err(Error::Invalid(format!(
                "Dirichlet prior must be positive, got {c0}"
            )));
        }
        Ok(DirichletProfile {
            counts: vec![c0; len],
        })
    }

    pub fn from_counts(counts: Vec<f64>) -> Result<Self> {
        if counts.iter().any(|&c| c <= 0.0) {
            return Err(Error::Invalid(
                "Dirichlet parameters must be strictly positive".into(),
            ));
        }
        Ok(DirichletProfile { counts })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn observe(&mut self, symbol: usize) {
        self.counts[symbol] += 1.0;
    }

    /// Dirichlet mean counts / sum(counts).
    pub fn mean(&self) -> Vec<f64> {
        let total = self.total();
        self.counts.iter().map(|&c| c / total).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    Independent,
    Multinomial,
}

/// Prior settings for count-based models. Defaults to 1 everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountPriors {
    pub beta_alpha: f64,
    pub beta_beta: f64,
    pub dirichlet: f64,
}

impl Default for CountPriors {
    fn default() -> Self {
        CountPriors {
            beta_alpha: 1.0,
            beta_beta: 1.0,
            dirichlet: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Profiles {
    Independent(Vec<BetaProfile>),
    Multinomial(Vec<DirichletProfile>),
}

/// A trained count-based model: one profile per context item.
///
/// `symbols` is the dimension of the profiles; for property-level models it
/// equals the inventory size, for mixture-component models it equals the
/// number of components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountModel {
    items: Vec<String>,
    profiles: Profiles,
    symbols: usize,
    priors: CountPriors,
    #[serde(skip)]
    item_index: HashMap<String, usize>,
}

impl CountModel {
    fn assemble(
        items: Vec<String>,
        profiles: Profiles,
        symbols: usize,
        priors: CountPriors,
    ) -> Result<Self> {
        let mut item_index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if item_index.insert(item.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate context item `{item}`")));
            }
        }
        Ok(CountModel {
            items,
            profiles,
            symbols,
            priors,
            item_index,
        })
    }

    pub fn from_beta_profiles(
        items: Vec<String>,
        profiles: Vec<BetaProfile>,
        priors: CountPriors,
    ) -> Result<Self> {
        if items.len() != profiles.len() {
            return Err(Error::Invalid("one profile per item required".into()));
        }
        let symbols = profiles.first().map_or(0, BetaProfile::len);
        if profiles.iter().any(|p| p.len() != symbols) {
            return Err(Error::Invalid("profiles must share one length".into()));
        }
        CountModel::assemble(items, Profiles::Independent(profiles), symbols, priors)
    }

    pub fn from_dirichlet_profiles(
        items: Vec<String>,
        profiles: Vec<DirichletProfile>,
        priors: CountPriors,
    ) -> Result<Self> {
        if items.len() != profiles.len() {
            return Err(Error::Invalid("one profile per item required".into()));
        }
        let symbols = profiles.first().map_or(0, DirichletProfile::len);
        if profiles.iter().any(|p| p.len() != symbols) {
            return Err(Error::Invalid("profiles must share one length".into()));
        }
        CountModel::assemble(items, Profiles::Multinomial(profiles), symbols, priors)
    }

    /// Restores internal indexes after deserialization.
    pub fn restore(mut self) -> Self {
        self.item_index = self
            .items
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        self
    }

    pub fn mode(&self) -> CountMode {
        match self.profiles {
            Profiles::Independent(_) => CountMode::Independent,
            Profiles::Multinomial(_) => CountMode::Multinomial,
        }
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn n_symbols(&self) -> usize {
        self.symbols
    }

    pub fn priors(&self) -> &CountPriors {
        &self.priors
    }

    pub fn knows(&self, item: &str) -> bool {
        self.item_index.contains_key(item)
    }

    pub fn beta_profile(&self, item: &str) -> Option<&BetaProfile> {
        let idx = self.item_index.get(item)?;
        match &self.profiles {
            Profiles::Independent(ps) => Some(&ps[*idx]),
            Profiles::Multinomial(_) => None,
        }
    }

    /// The item's predictive distribution over symbols: Beta posterior
    /// predictive in independent mode, Dirichlet mean in multinomial mode.
    pub fn item_predictive(&self, item: &str) -> Result<Vec<f64>> {
        let idx = self
            .item_index
            .get(item)
            .ok_or_else(|| Error::UnknownItem(item.to_string()))?;
        Ok(match &self.profiles {
            Profiles::Independent(ps) => ps[*idx].predictive(),
            Profiles::Multinomial(ps) => ps[*idx].mean(),
        })
    }

    /// Learns an unknown concept from a bag of context occurrences and
    /// returns its predicted symbol probabilities. Context items missing from
    /// the model are skipped; the second value counts the skipped
    /// occurrences. An empty bag yields the prior prediction.
    pub fn learn_unknown(
        &self,
        contexts: &[(&str, u64)],
        rng: &mut dyn RngCore,
    ) -> (Vec<f64>, u64) {
        let mut skipped = 0;
        match &self.profiles {
            Profiles::Independent(_) => {
                let mut unknown =
                    BetaProfile::with_prior(self.symbols, self.priors.beta_alpha, self.priors.beta_beta)
                        .expect("priors validated at construction");
                for &(item, n) in contexts {
                    let predictive = match self.item_predictive(item) {
                        Ok(p) => p,
                        Err(_) => {
                            log::warn!("skipping unknown context item `{item}`");
                            skipped += n;
                            continue;
                        }
                    };
                    for _ in 0..n {
                        let imagined = Instance::sample(&predictive, rng);
                        unknown
                            .observe(&imagined)
                            .expect("profile lengths agree by construction");
                    }
                }
                (unknown.predictive(), skipped)
            }
            Profiles::Multinomial(_) => {
                let mut unknown = DirichletProfile::symmetric(self.symbols, self.priors.dirichlet)
                    .expect("priors validated at construction");
                for &(item, n) in contexts {
                    let mean = match self.item_predictive(item) {
                        Ok(p) => p,
                        Err(_) => {
                            log::warn!("skipping unknown context item `{item}`");
                            skipped += n;
                            continue;
                        }
                    };
                    for _ in 0..n {
                        let symbol = sample_categorical(&mean, 1.0, rng);
                        unknown.observe(symbol);
                    }
                }
                (unknown.mean(), skipped)
            }
        }
    }
}

/// Trains the profiles of every item in `items` from the co-occurrence
/// table. Each (concept, item) occurrence triggers one sampled observation
/// from the concept's norms. Items never observed keep their prior profile.
pub fn train_count_model(
    table: &OccurrenceTable,
    items: &[String],
    inventory: &PropertyInventory,
    norms: &[PropertyNorms],
    mode: CountMode,
    priors: &CountPriors,
    rng: &mut dyn RngCore,
) -> Result<CountModel> {
    let norms_by = norms_by_concept(inventory, norms)?;
    match mode {
        CountMode::Independent => {
            let mut model = CountModel::from_beta_profiles(
                items.to_vec(),
                (0..items.len())
                    .map(|_| {
                        BetaProfile::with_prior(
                            inventory.len(),
                            priors.beta_alpha,
                            priors.beta_beta,
                        )
                    })
                    .collect::<Result<_>>()?,
                *priors,
            )?;
            for (concept, item, n) in table.entries() {
                let concept_norms = norms_by
                    .get(concept)
                    .ok_or_else(|| Error::UnknownConcept(concept.to_string()))?;
                let idx = *model
                    .item_index
                    .get(item)
                    .ok_or_else(|| Error::UnknownItem(item.to_string()))?;
                let Profiles::Independent(profiles) = &mut model.profiles else {
                    unreachable!()
                };
                for _ in 0..n {
                    let instance = concept_norms.sample_instance(rng);
                    profiles[idx].observe(&instance)?;
                }
            }
            Ok(model)
        }
        CountMode::Multinomial => train_multinomial_with(
            table,
            items,
            inventory.len(),
            priors,
            |concept, rng| {
                norms_by
                    .get(concept)
                    .ok_or_else(|| Error::UnknownConcept(concept.to_string()))?
                    .sample_property(rng)
            },
            rng,
        ),
    }
}

/// Multinomial-condition training with an arbitrary per-concept symbol
/// sampler. Shared by property-level training and the mixture-component
/// variants.
pub(crate) fn train_multinomial_with<F>(
    table: &OccurrenceTable,
    items: &[String],
    symbols: usize,
    priors: &CountPriors,
    mut draw: F,
    rng: &mut dyn RngCore,
) -> Result<CountModel>
where
    F: FnMut(&str, &mut dyn RngCore) -> Result<usize>,
{
    let mut model = CountModel::from_dirichlet_profiles(
        items.to_vec(),
        (0..items.len())
            .map(|_| DirichletProfile::symmetric(symbols, priors.dirichlet))
            .collect::<Result<_>>()?,
        *priors,
    )?;
    for (concept, item, n) in table.entries() {
        let idx = *model
            .item_index
            .get(item)
            .ok_or_else(|| Error::UnknownItem(item.to_string()))?;
        let Profiles::Multinomial(profiles) = &mut model.profiles else {
            unreachable!()
        };
        for _ in 0..n {
            let symbol = draw(concept, rng)?;
            profiles[idx].observe(symbol);
        }
    }
    Ok(model)
}

fn norms_by_concept<'a>(
    inventory: &PropertyInventory,
    norms: &'a [PropertyNorms],
) -> Result<BTreeMap<&'a str, &'a PropertyNorms>> {
    let mut map = BTreeMap::new();
    for n in norms {
        if n.len() != inventory.len() {
            return Err(Error::Invalid(format!(
                "norms for `{}` have length {}, inventory has {}",
                n.concept(),
                n.len(),
                inventory.len()
            )));
        }
        map.insert(n.concept(), n);
    }
    Ok(map)
}

/// Per-property mean probability over the training concepts.
pub fn frequency_baseline(norms: &[PropertyNorms]) -> Result<Vec<f64>> {
    let first = norms
        .first()
        .ok_or_else(|| Error::Invalid("baseline needs at least one training concept".into()))?;
    let mut sums = vec![0.0; first.len()];
    for n in norms {
        if n.len() != sums.len() {
            return Err(Error::Invalid("norms have inconsistent lengths".into()));
        }
        for (s, &p) in sums.iter_mut().zip(n.probs()) {
            *s += p;
        }
    }
    let k = norms.len() as f64;
    Ok(sums.into_iter().map(|s| s / k).collect())
}

/// The frequency baseline wrapped as a model: it predicts the same vector for
/// every input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    probs: Vec<f64>,
}

impl BaselineModel {
    pub fn fit(norms: &[PropertyNorms]) -> Result<Self> {
        Ok(BaselineModel {
            probs: frequency_baseline(norms)?,
        })
    }

    pub fn from_probs(probs: Vec<f64>) -> Self {
        BaselineModel { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}
