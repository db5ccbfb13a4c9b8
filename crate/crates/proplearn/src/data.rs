//! Core domain types: the property inventory, per-concept property norms,
//! binary instances, the context-item vocabulary, and the sparse
//! concept/context co-occurrence table.
//!
//! Everything here is immutable after construction and safe to share across
//! threads. Randomness is always supplied by the caller.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How many times an all-zero instance is redrawn in
/// [`PropertyNorms::sample_property`] before giving up.
const MAX_RESAMPLES: usize = 1000;

/// Ordered set of definitional property identifiers.
///
/// Positions are contiguous from 0 and stable for the lifetime of the value,
/// so vectors indexed by property can be exchanged between models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct PropertyInventory {
    properties: Vec<String>,
    index: HashMap<String, usize>,
}

impl PropertyInventory {
    pub fn new<I, S>(properties: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let properties: Vec<String> = properties.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(properties.len());
        for (i, p) in properties.iter().enumerate() {
            if index.insert(p.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate property `{p}`")));
            }
        }
        Ok(PropertyInventory { properties, index })
    }

    pub fn len(&self) -> usize {
        self.properties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.properties.is_empty()
    }

    pub fn position(&self, property: &str) -> Option<usize> {
        self.index.get(property).copied()
    }

    pub fn name(&self, position: usize) -> &str {
        &self.properties[position]
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.properties.iter().map(String::as_str)
    }

    pub fn as_slice(&self) -> &[String] {
        &self.properties
    }
}

impl TryFrom<Vec<String>> for PropertyInventory {
    type Error = Error;

    fn try_from(v: Vec<String>) -> Result<Self> {
        PropertyInventory::new(v)
    }
}

impl From<PropertyInventory> for Vec<String> {
    fn from(inv: PropertyInventory) -> Vec<String> {
        inv.properties
    }
}

/// A concept's vector of independent Bernoulli probabilities, one per
/// property in the inventory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyNorms {
    concept: String,
    probs: Vec<f64>,
}

impl PropertyNorms {
    pub fn new(concept: impl Into<String>, probs: Vec<f64>) -> Result<Self> {
        let concept = concept.into();
        for (i, &p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Invalid(format!(
                    "norm probability {p} out of [0,1] for `{concept}` at position {i}"
                )));
            }
        }
        Ok(PropertyNorms { concept, probs })
    }

    pub fn concept(&self) -> &str {
        &self.concept
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// True if at least one property has positive probability.
    pub fn has_positive(&self) -> bool {
        self.probs.iter().any(|&p| p > 0.0)
    }

    /// Draws a binary instance: bit `i` is an independent Bernoulli draw with
    /// probability `probs[i]`.
    pub fn sample_instance(&self, rng: &mut dyn RngCore) -> Instance {
        Instance::sample(&self.probs, rng)
    }

    /// Draws one applicable property: first samples an instance, then picks
    /// uniformly among its set bits. All-zero instances are redrawn (the
    /// two-stage scheme assumes a nonempty property set); after
    /// `MAX_RESAMPLES` failures this errors.
    pub fn sample_property(&self, rng: &mut dyn RngCore) -> Result<usize> {
        if !self.has_positive() {
            return Err(Error::Invalid(format!(
                "cannot sample a property for `{}`: all norm probabilities are 0",
                self.concept
            )));
        }
        for _ in 0..MAX_RESAMPLES {
            let inst = self.sample_instance(rng);
            let set: Vec<usize> = inst
                .bits
                .iter()
                .enumerate()
                .filter_map(|(i, &b)| b.then_some(i))
                .collect();
            if !set.is_empty() {
                let pick = (rng.random::<f64>() * set.len() as f64) as usize;
                return Ok(set[pick.min(set.len() - 1)]);
            }
        }
        Err(Error::Invalid(format!(
            "no non-empty instance of `{}` after {MAX_RESAMPLES} draws",
            self.concept
        )))
    }
}

/// One observed instance of a concept: a binary vector over the inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    bits: Vec<bool>,
}

impl Instance {
    pub fn new(bits: Vec<bool>) -> Self {
        Instance { bits }
    }

    /// Draws a binary vector with independent Bernoulli bits.
    pub fn sample(probs: &[f64], rng: &mut dyn RngCore) -> Instance {
        Instance {
            bits: probs.iter().map(|&p| rng.random::<f64>() < p).collect(),
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

impl From<Vec<bool>> for Instance {
    fn from(bits: Vec<bool>) -> Self {
        Instance { bits }
    }
}

/// Context-item vocabulary with total corpus frequencies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    items: Vec<String>,
    counts: Vec<u64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(entries: Vec<(String, u64)>) -> Result<Self> {
        let mut items = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for (item, count) in entries {
            if count == 0 {
                return Err(Error::Invalid(format!("zero count for item `{item}`")));
            }
            if index.insert(item.clone(), items.len()).is_some() {
                return Err(Error::Invalid(format!("duplicate item `{item}`")));
            }
            items.push(item);
            counts.push(count);
        }
        Ok(Vocabulary {
            items,
            counts,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn position(&self, item: &str) -> Option<usize> {
        self.index.get(item).copied()
    }

    pub fn name(&self, position: usize) -> &str {
        &self.items[position]
    }

    pub fn count(&self, item: &str) -> Option<u64> {
        self.position(item).map(|i| self.counts[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.items
            .iter()
            .map(String::as_str)
            .zip(self.counts.iter().copied())
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .items
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
    }

    /// Restores the item index after deserialization.
    pub fn restore(mut self) -> Self {
        self.rebuild_index();
        self
    }
}

/// Sparse counts of (concept, context item) co-occurrences, with cached
/// marginals per concept and per item. Iteration order is lexicographic, so
/// anything that walks the table consumes randomness in a stable order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccurrenceTable {
    by_concept: BTreeMap<String, BTreeMap<String, u64>>,
    item_totals: BTreeMap<String, u64>,
    concept_totals: BTreeMap<String, u64>,
    total: u64,
}

impl OccurrenceTable {
    pub fn new() -> Self {
        OccurrenceTable::default()
    }

    /// Accumulates `count` occurrences of `concept` with `item`. Zero counts
    /// are ignored so the table never stores empty entries.
    pub fn add(&mut self, concept: &str, item: &str, count: u64) {
        if count == 0 {
            return;
        }
        *self
            .by_concept
            .entry(concept.to_string())
            .or_default()
            .entry(item.to_string())
            .or_insert(0) += count;
        *self.item_totals.entry(item.to_string()).or_insert(0) += count;
        *self.concept_totals.entry(concept.to_string()).or_insert(0) += count;
        self.total += count;
    }

    pub fn count(&self, concept: &str, item: &str) -> u64 {
        self.by_concept
            .get(concept)
            .and_then(|row| row.get(item).copied())
            .unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn n_concepts(&self) -> usize {
        self.by_concept.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_totals.len()
    }

    pub fn concepts(&self) -> impl Iterator<Item = &str> {
        self.by_concept.keys().map(String::as_str)
    }

    pub fn items(&self) -> impl Iterator<Item = (&str, u64)> {
        self.item_totals.iter().map(|(s, &c)| (s.as_str(), c))
    }

    pub fn item_total(&self, item: &str) -> u64 {
        self.item_totals.get(item).copied().unwrap_or(0)
    }

    pub fn concept_total(&self, concept: &str) -> u64 {
        self.concept_totals.get(concept).copied().unwrap_or(0)
    }

    /// The contexts a concept was observed with, in lexicographic order.
    pub fn contexts_of(&self, concept: &str) -> impl Iterator<Item = (&str, u64)> {
        self.by_concept
            .get(concept)
            .into_iter()
            .flat_map(|row| row.iter().map(|(s, &c)| (s.as_str(), c)))
    }

    /// All (concept, item, count) entries in lexicographic order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.by_concept.iter().flat_map(|(c, row)| {
            row.iter()
                .map(move |(w, &n)| (c.as_str(), w.as_str(), n))
        })
    }

    /// Sub-table containing only the given concepts.
    pub fn restrict_concepts(&self, keep: &BTreeSet<String>) -> OccurrenceTable {
        let mut out = OccurrenceTable::new();
        for (c, w, n) in self.entries() {
            if keep.contains(c) {
                out.add(c, w, n);
            }
        }
        out
    }

    /// Derives the vocabulary (items with their total counts) from the table.
    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::new(
            self.item_totals
                .iter()
                .map(|(s, &c)| (s.clone(), c))
                .collect(),
        )
        .expect("marginals are positive and unique by construction")
    }

    /// Recomputes the marginals from the entries and checks they match the
    /// cached ones. Used by tests and debug assertions.
    pub fn audit(&self) -> bool {
        let mut item_totals: BTreeMap<&str, u64> = BTreeMap::new();
        let mut concept_totals: BTreeMap<&str, u64> = BTreeMap::new();
        let mut total = 0;
        for (c, w, n) in self.entries() {
            if n == 0 {
                return false;
            }
            *item_totals.entry(w).or_insert(0) += n;
            *concept_totals.entry(c).or_insert(0) += n;
            total += n;
        }
        total == self.total
            && item_totals.len() == self.item_totals.len()
            && concept_totals.len() == self.concept_totals.len()
            && item_totals
                .iter()
                .all(|(w, &n)| self.item_total(w) == n)
            && concept_totals
                .iter()
                .all(|(c, &n)| self.concept_total(c) == n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::seeded_rng;

    #[test]
    fn inventory_round_trips_positions() {
        let inv = PropertyInventory::new(["a_animal", "dangerous", "green"]).unwrap();
        for i in 0..inv.len() {
            assert_eq!(inv.position(inv.name(i)), Some(i));
        }
        assert!(PropertyInventory::new(["x", "x"]).is_err());
    }

    #[test]
    fn degenerate_instances_are_deterministic() {
        let mut rng = seeded_rng(1);
        let ones = PropertyNorms::new("c", vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(ones.sample_instance(&mut rng).bits(), &[true, true, true]);
        let zeros = PropertyNorms::new("c", vec![0.0, 0.0]).unwrap();
        assert_eq!(zeros.sample_instance(&mut rng).bits(), &[false, false]);
    }

    #[test]
    fn instance_marginals_converge_to_norms() {
        let mut rng = seeded_rng(2);
        let n = 10_000;
        let norms = PropertyNorms::new("c", vec![0.5; 64]).unwrap();
        let mut sums = vec![0u32; 64];
        for _ in 0..n {
            let inst = norms.sample_instance(&mut rng);
            for (s, &b) in sums.iter_mut().zip(inst.bits()) {
                *s += b as u32;
            }
        }
        let sigma = (0.25f64 / n as f64).sqrt();
        for &s in &sums {
            let mean = s as f64 / n as f64;
            assert!((mean - 0.5).abs() <= 3.0 * sigma, "mean {mean}");
        }
    }

    #[test]
    fn property_sampling_is_one_hot_for_one_hot_norms() {
        let mut rng = seeded_rng(3);
        let norms = PropertyNorms::new("c", vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        for _ in 0..100 {
            assert_eq!(norms.sample_property(&mut rng).unwrap(), 2);
        }
    }

    #[test]
    fn property_sampling_symmetric_pair() {
        let mut rng = seeded_rng(4);
        let norms = PropertyNorms::new("c", vec![1.0, 1.0]).unwrap();
        let n = 10_000;
        let mut hits = [0usize; 2];
        for _ in 0..n {
            hits[norms.sample_property(&mut rng).unwrap()] += 1;
        }
        let sigma = (0.25f64 / n as f64).sqrt();
        let f0 = hits[0] as f64 / n as f64;
        assert!((f0 - 0.5).abs() <= 3.0 * sigma, "f0 {f0}");
    }

    // Exact enumeration of the two-stage draw over all four instances of a
    // two-property concept, used as the oracle for the skewed case.
    fn enumerate_two_stage(p: [f64; 2]) -> [f64; 2] {
        let mut marginal = [0.0f64; 2];
        let mut nonempty_mass = 0.0;
        for b0 in [false, true] {
            for b1 in [false, true] {
                if !b0 && !b1 {
                    continue; // redrawn
                }
                let prob = (if b0 { p[0] } else { 1.0 - p[0] })
                    * (if b1 { p[1] } else { 1.0 - p[1] });
                nonempty_mass += prob;
                let set = [b0, b1].iter().filter(|&&b| b).count() as f64;
                if b0 {
                    marginal[0] += prob / set;
                }
                if b1 {
                    marginal[1] += prob / set;
                }
            }
        }
        [marginal[0] / nonempty_mass, marginal[1] / nonempty_mass]
    }

    #[test]
    fn property_sampling_matches_enumeration_oracle() {
        let mut rng = seeded_rng(5);
        let norms = PropertyNorms::new("c", vec![0.9, 0.1]).unwrap();
        let expected = enumerate_two_stage([0.9, 0.1]);
        let n = 20_000;
        let mut hits = [0usize; 2];
        for _ in 0..n {
            hits[norms.sample_property(&mut rng).unwrap()] += 1;
        }
        for q in 0..2 {
            let f = hits[q] as f64 / n as f64;
            let sigma = (expected[q] * (1.0 - expected[q]) / n as f64).sqrt();
            assert!(
                (f - expected[q]).abs() <= 3.0 * sigma,
                "property {q}: {f} vs {}",
                expected[q]
            );
        }
    }

    #[test]
    fn property_sampling_rejects_all_zero_norms() {
        let mut rng = seeded_rng(6);
        let norms = PropertyNorms::new("c", vec![0.0, 0.0]).unwrap();
        assert!(norms.sample_property(&mut rng).is_err());
    }

    #[test]
    fn property_sampling_never_returns_zero_probability_property() {
        let mut rng = seeded_rng(7);
        let norms = PropertyNorms::new("c", vec![0.3, 0.0, 0.7]).unwrap();
        for _ in 0..2000 {
            assert_ne!(norms.sample_property(&mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn table_marginals_stay_consistent() {
        let mut t = OccurrenceTable::new();
        t.add("gown", "undo-dobj", 2);
        t.add("gown", "wear-dobj", 1);
        t.add("apple", "eat-dobj", 3);
        t.add("gown", "undo-dobj", 1);
        t.add("apple", "eat-dobj", 0); // ignored
        assert_eq!(t.count("gown", "undo-dobj"), 3);
        assert_eq!(t.item_total("undo-dobj"), 3);
        assert_eq!(t.concept_total("gown"), 4);
        assert_eq!(t.total(), 7);
        assert!(t.audit());

        let keep: BTreeSet<String> = ["apple".to_string()].into();
        let sub = t.restrict_concepts(&keep);
        assert_eq!(sub.total(), 3);
        assert_eq!(sub.n_concepts(), 1);
        assert!(sub.audit());
    }

    #[test]
    fn norms_reject_out_of_range() {
        assert!(PropertyNorms::new("c", vec![1.2]).is_err());
        assert!(PropertyNorms::new("c", vec![-0.1]).is_err());
    }
}
