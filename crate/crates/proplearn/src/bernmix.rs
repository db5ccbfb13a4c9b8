//! Bernoulli mixtures over binary property instances, fitted with EM, and the
//! two clustering constructions built on top of them:
//!
//! * item clustering (hard): context items are mapped to their closest
//!   mixture component, and a multinomial count model is retrained over the
//!   component pseudo-vocabulary;
//! * concept representation (soft): each known concept becomes a multinomial
//!   over components, and predictions over components are mapped back to
//!   properties through the component Bernoulli vectors.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::count::{train_count_model, train_multinomial_with, CountModel, CountMode, CountPriors};
use crate::data::{Instance, OccurrenceTable, PropertyInventory, PropertyNorms};
use crate::error::{Error, Result};
use crate::util::{logsumexp, sample_categorical};

/// Component probabilities are clamped to [EPS, 1 - EPS] to avoid
/// zero-likelihood degeneracies.
pub const PROB_CLAMP: f64 = 1e-6;

/// A mixture of Bernoulli components: `weights` on the simplex and one
/// probability vector per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliMixture {
    weights: Vec<f64>,
    components: Vec<Vec<f64>>,
}

impl BernoulliMixture {
    pub fn new(weights: Vec<f64>, components: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::Invalid(
                "mixture needs one weight per component".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Invalid(format!(
                "mixture weights must form a simplex (sum {sum})"
            )));
        }
        let dim = components[0].len();
        if dim == 0 || components.iter().any(|c| c.len() != dim) {
            return Err(Error::Invalid(
                "mixture components must share one positive length".into(),
            ));
        }
        if components
            .iter()
            .flatten()
            .any(|&p| !(0.0..=1.0).contains(&p))
        {
            return Err(Error::Invalid(
                "component probabilities must lie in [0,1]".into(),
            ));
        }
        let components = components
            .into_iter()
            .map(|c| {
                c.into_iter()
                    .map(|p| p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
                    .collect()
            })
            .collect();
        Ok(BernoulliMixture {
            weights,
            components,
        })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &[f64] {
        &self.components[k]
    }

    /// log(p(k) * p(x|k)) for every component.
    fn log_joint(&self, x: &Instance) -> Vec<f64> {
        self.components
            .iter()
            .zip(&self.weights)
            .map(|(comp, &w)| {
                let mut ll = if w > 0.0 { w.ln() } else { f64::NEG_INFINITY };
                for (&p, &bit) in comp.iter().zip(x.bits()) {
                    ll += if bit { p.ln() } else { (1.0 - p).ln() };
                }
                ll
            })
            .collect()
    }

    pub fn log_likelihood(&self, x: &Instance) -> f64 {
        logsumexp(&self.log_joint(x))
    }

    pub fn total_log_likelihood(&self, samples: &[Instance]) -> f64 {
        samples.iter().map(|x| self.log_likelihood(x)).sum()
    }

    /// Posterior component probabilities p(k | x), proportional to
    /// p(k) * prod_i p_k(x_i). Always a simplex.
    pub fn responsibilities(&self, x: &Instance) -> Vec<f64> {
        let log_joint = self.log_joint(x);
        let norm = logsumexp(&log_joint);
        log_joint.into_iter().map(|l| (l - norm).exp()).collect()
    }
}

/// EM settings. The defaults follow the rest of the crate: 5 random restarts,
/// component entries initialized uniformly in (0.25, 0.75).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iter: 200,
            tol: 1e-6,
            restarts: 5,
        }
    }
}

/// Result of an EM fit, including the log-likelihood trace of the winning
/// restart (one entry per iteration, non-decreasing).
#[derive(Debug, Clone)]
pub struct EmFit {
    pub mixture: BernoulliMixture,
    pub log_likelihood: f64,
    pub trace: Vec<f64>,
}

/// Fits a K-component Bernoulli mixture by EM with random restarts. Restarts
/// run on independent seeded generators (in parallel) and the best final
/// log-likelihood wins, ties broken by restart order.
pub fn em_fit(
    samples: &[Instance],
    k: usize,
    cfg: &EmConfig,
    rng: &mut dyn RngCore,
) -> Result<EmFit> {
    if samples.is_empty() {
        return Err(Error::Invalid("EM needs at least one sample".into()));
    }
    if k == 0 {
        return Err(Error::Invalid("EM needs at least one component".into()));
    }
    if k > samples.len() {
        return Err(Error::Invalid(format!(
            "K = {k} exceeds the number of samples ({})",
            samples.len()
        )));
    }
    let dim = samples[0].len();
    if dim == 0 || samples.iter().any(|s| s.len() != dim) {
        return Err(Error::Invalid(
            "samples must share one positive length".into(),
        ));
    }

    let restarts = cfg.restarts.max(1);
    let seeds: Vec<u64> = (0..restarts).map(|_| rng.next_u64()).collect();
    let runs: Vec<(BernoulliMixture, Vec<f64>)> = seeds
        .par_iter()
        .map(|&seed| {
            let mut local = ChaCha8Rng::seed_from_u64(seed);
            em_once(samples, k, dim, cfg, &mut local)
        })
        .collect();

    let mut best: Option<(BernoulliMixture, Vec<f64>)> = None;
    for run in runs {
        let better = match &best {
            None => true,
            Some((_, trace)) => run.1.last() > trace.last(),
        };
        if better {
            best = Some(run);
        }
    }
    let (mixture, trace) = best.expect("at least one restart ran");
    Ok(EmFit {
        log_likelihood: *trace.last().expect("trace has at least one entry"),
        mixture,
        trace,
    })
}

fn em_once(
    samples: &[Instance],
    k: usize,
    dim: usize,
    cfg: &EmConfig,
    rng: &mut dyn RngCore,
) -> (BernoulliMixture, Vec<f64>) {
    let n = samples.len();
    let mut weights = vec![1.0 / k as f64; k];
    let mut components: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..dim).map(|_| rng.random_range(0.25..0.75)).collect())
        .collect();

    let mut trace = Vec::new();
    let mut resp = vec![vec![0.0f64; k]; n];

    for _ in 0..cfg.max_iter.max(1) {
        // E step: responsibilities and the current log-likelihood.
        let log_w: Vec<f64> = weights.iter().map(|&w| w.ln()).collect();
        let log_p: Vec<Vec<f64>> = components
            .iter()
            .map(|c| c.iter().map(|&p| p.ln()).collect())
            .collect();
        let log_1mp: Vec<Vec<f64>> = components
            .iter()
            .map(|c| c.iter().map(|&p| (1.0 - p).ln()).collect())
            .collect();

        let mut ll_total = 0.0;
        for (j, x) in samples.iter().enumerate() {
            let mut log_joint = vec![0.0f64; k];
            for (c, lj) in log_joint.iter_mut().enumerate() {
                let mut acc = log_w[c];
                for (i, &bit) in x.bits().iter().enumerate() {
                    acc += if bit { log_p[c][i] } else { log_1mp[c][i] };
                }
                *lj = acc;
            }
            let norm = logsumexp(&log_joint);
            ll_total += norm;
            for c in 0..k {
                resp[j][c] = (log_joint[c] - norm).exp();
            }
        }
        let converged = trace
            .last()
            .is_some_and(|&prev: &f64| ll_total - prev < cfg.tol);
        trace.push(ll_total);
        if converged {
            break;
        }

        // M step: weight = mean responsibility, component = responsibility-
        // weighted bit mean, clamped away from 0 and 1.
        for (c, component) in components.iter_mut().enumerate() {
            let nk: f64 = resp.iter().map(|r| r[c]).sum();
            weights[c] = nk / n as f64;
            if nk > 0.0 {
                component.iter_mut().for_each(|p| *p = 0.0);
                for (x, r) in samples.iter().zip(&resp) {
                    for (p, &bit) in component.iter_mut().zip(x.bits()) {
                        if bit {
                            *p += r[c];
                        }
                    }
                }
                for p in component.iter_mut() {
                    *p = (*p / nk).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                }
            }
        }
    }

    let mixture = BernoulliMixture::new(weights, components)
        .expect("EM maintains simplex weights and clamped components");
    (mixture, trace)
}

/// Assigns a context item to the component with the highest summed posterior
/// over that item's samples; ties go to the lowest index.
pub fn assign_hard(mix: &BernoulliMixture, samples: &[Instance]) -> Result<usize> {
    if samples.is_empty() {
        return Err(Error::Invalid("cannot assign an item without samples".into()));
    }
    let mut sums = vec![0.0f64; mix.k()];
    for x in samples {
        for (s, r) in sums.iter_mut().zip(mix.responsibilities(x)) {
            *s += r;
        }
    }
    let mut best = 0;
    for (k, &s) in sums.iter().enumerate() {
        if s > sums[best] {
            best = k;
        }
    }
    Ok(best)
}

/// A concept's soft representation: its mean posterior over components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftConceptRep {
    pub concept: String,
    pub comp_probs: Vec<f64>,
}

/// Mean responsibility vector over the concept's samples; a simplex.
pub fn soft_represent(
    mix: &BernoulliMixture,
    concept: &str,
    samples: &[Instance],
) -> Result<SoftConceptRep> {
    if samples.is_empty() {
        return Err(Error::Invalid(format!(
            "cannot represent `{concept}` without samples"
        )));
    }
    let mut sums = vec![0.0f64; mix.k()];
    for x in samples {
        for (s, r) in sums.iter_mut().zip(mix.responsibilities(x)) {
            *s += r;
        }
    }
    let n = samples.len() as f64;
    Ok(SoftConceptRep {
        concept: concept.to_string(),
        comp_probs: sums.into_iter().map(|s| s / n).collect(),
    })
}

/// Maps a distribution over mixture components back to per-property
/// probabilities: P(q) = sum_k P(k) * p_k(q). Entries lie in [0,1] but do not
/// form a simplex.
pub fn components_to_properties(comp_dist: &[f64], mix: &BernoulliMixture) -> Result<Vec<f64>> {
    if comp_dist.len() != mix.k() {
        return Err(Error::Invalid(format!(
            "component distribution has length {}, mixture has {} components",
            comp_dist.len(),
            mix.k()
        )));
    }
    let mut out = vec![0.0f64; mix.dim()];
    for (k, &pk) in comp_dist.iter().enumerate() {
        for (o, &p) in out.iter_mut().zip(mix.component(k)) {
            *o += pk * p;
        }
    }
    Ok(out)
}

/// Settings shared by both mixture constructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureConfig {
    /// Number of mixture components.
    pub k: usize,
    /// Instances sampled per item (or per concept) when fitting.
    pub n_samples: usize,
    pub em: EmConfig,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        MixtureConfig {
            k: 50,
            n_samples: 100,
            em: EmConfig::default(),
        }
    }
}

/// Hard clustering of context items into mixture components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemClustering {
    pub mixture: BernoulliMixture,
    pub assignments: BTreeMap<String, usize>,
}

/// Fits a mixture on instances imagined from every item's independent
/// predictive distribution, then hard-assigns each item using its own
/// samples.
pub fn cluster_items(
    independent: &CountModel,
    cfg: &MixtureConfig,
    rng: &mut dyn RngCore,
) -> Result<ItemClustering> {
    if independent.mode() != CountMode::Independent {
        return Err(Error::Invalid(
            "item clustering needs an independent-condition count model".into(),
        ));
    }
    if cfg.n_samples == 0 {
        return Err(Error::Invalid("n_samples must be >= 1".into()));
    }
    let mut per_item: Vec<(String, Vec<Instance>)> = Vec::with_capacity(independent.items().len());
    let mut pool = Vec::with_capacity(independent.items().len() * cfg.n_samples);
    for item in independent.items() {
        let predictive = independent.item_predictive(item)?;
        let samples: Vec<Instance> = (0..cfg.n_samples)
            .map(|_| Instance::sample(&predictive, rng))
            .collect();
        pool.extend(samples.iter().cloned());
        per_item.push((item.clone(), samples));
    }
    let fit = em_fit(&pool, cfg.k, &cfg.em, rng)?;
    let mut assignments = BTreeMap::new();
    for (item, samples) in &per_item {
        assignments.insert(item.clone(), assign_hard(&fit.mixture, samples)?);
    }
    Ok(ItemClustering {
        mixture: fit.mixture,
        assignments,
    })
}

pub(crate) fn cluster_name(k: usize) -> String {
    format!("bm{k:06}")
}

/// Count model over the item clusters: every occurrence of a concept with
/// item `w` is retrained as an occurrence with `w`'s component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountBernmixH1 {
    pub clustering: ItemClustering,
    clusters: CountModel,
}

impl CountBernmixH1 {
    pub fn clusters(&self) -> &CountModel {
        &self.clusters
    }

    pub fn knows(&self, item: &str) -> bool {
        self.clustering.assignments.contains_key(item)
    }

    /// Maps context items to their clusters and learns the unknown concept
    /// at the cluster level. Unassigned items are skipped and counted.
    pub fn learn_unknown(&self, contexts: &[(&str, u64)], rng: &mut dyn RngCore) -> (Vec<f64>, u64) {
        let mut skipped = 0;
        let mut grouped: BTreeMap<String, u64> = BTreeMap::new();
        for &(item, n) in contexts {
            match self.clustering.assignments.get(item) {
                Some(&k) => *grouped.entry(cluster_name(k)).or_insert(0) += n,
                None => {
                    log::warn!("skipping unclustered context item `{item}`");
                    skipped += n;
                }
            }
        }
        let mapped: Vec<(&str, u64)> = grouped.iter().map(|(s, &n)| (s.as_str(), n)).collect();
        let (pred, inner_skipped) = self.clusters.learn_unknown(&mapped, rng);
        (pred, skipped + inner_skipped)
    }

    pub fn restore(mut self) -> Self {
        self.clusters = self.clusters.restore();
        self
    }
}

/// Regroups a table by replacing items with their assigned cluster names.
pub fn regroup_by_cluster(
    table: &OccurrenceTable,
    assignments: &BTreeMap<String, usize>,
) -> Result<OccurrenceTable> {
    let mut out = OccurrenceTable::new();
    for (concept, item, n) in table.entries() {
        let k = assignments
            .get(item)
            .ok_or_else(|| Error::UnknownItem(item.to_string()))?;
        out.add(concept, &cluster_name(*k), n);
    }
    Ok(out)
}

/// Builds the item-clustered count model from a trained independent model.
pub fn build_h1(
    independent: &CountModel,
    table: &OccurrenceTable,
    inventory: &PropertyInventory,
    norms: &[PropertyNorms],
    cfg: &MixtureConfig,
    rng: &mut dyn RngCore,
) -> Result<CountBernmixH1> {
    let clustering = cluster_items(independent, cfg, rng)?;
    let grouped = regroup_by_cluster(table, &clustering.assignments)?;
    let cluster_items: Vec<String> = (0..cfg.k).map(cluster_name).collect();
    let clusters = train_count_model(
        &grouped,
        &cluster_items,
        inventory,
        norms,
        CountMode::Multinomial,
        independent.priors(),
        rng,
    )?;
    Ok(CountBernmixH1 {
        clustering,
        clusters,
    })
}

/// Soft concept representations over a shared mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptMixture {
    pub mixture: BernoulliMixture,
    pub reps: Vec<SoftConceptRep>,
}

/// Fits a mixture on instances sampled from every concept's norms and
/// returns each concept's mean posterior over components.
pub fn represent_concepts(
    norms: &[PropertyNorms],
    cfg: &MixtureConfig,
    rng: &mut dyn RngCore,
) -> Result<ConceptMixture> {
    if norms.is_empty() {
        return Err(Error::Invalid("no concepts to represent".into()));
    }
    if cfg.n_samples == 0 {
        return Err(Error::Invalid("n_samples must be >= 1".into()));
    }
    let mut per_concept: Vec<(&str, Vec<Instance>)> = Vec::with_capacity(norms.len());
    let mut pool = Vec::with_capacity(norms.len() * cfg.n_samples);
    for n in norms {
        let samples: Vec<Instance> = (0..cfg.n_samples)
            .map(|_| n.sample_instance(rng))
            .collect();
        pool.extend(samples.iter().cloned());
        per_concept.push((n.concept(), samples));
    }
    let fit = em_fit(&pool, cfg.k, &cfg.em, rng)?;
    let reps = per_concept
        .iter()
        .map(|(concept, samples)| soft_represent(&fit.mixture, concept, samples))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConceptMixture {
        mixture: fit.mixture,
        reps,
    })
}

/// Count model where concepts are multinomials over mixture components;
/// predictions over components are mapped back through the component
/// Bernoulli vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountBernmixH2 {
    pub mixture: BernoulliMixture,
    model: CountModel,
}

impl CountBernmixH2 {
    pub fn model(&self) -> &CountModel {
        &self.model
    }

    pub fn knows(&self, item: &str) -> bool {
        self.model.knows(item)
    }

    /// Learns the unknown concept's component distribution, then maps it to
    /// property probabilities.
    pub fn learn_unknown(&self, contexts: &[(&str, u64)], rng: &mut dyn RngCore) -> (Vec<f64>, u64) {
        let (comp_dist, skipped) = self.model.learn_unknown(contexts, rng);
        let props = components_to_properties(&comp_dist, &self.mixture)
            .expect("model symbols equal mixture components by construction");
        (props, skipped)
    }

    pub fn restore(mut self) -> Self {
        self.model = self.model.restore();
        self
    }
}

/// Builds the concept-level mixture variant of the count model.
pub fn build_count_h2(
    table: &OccurrenceTable,
    items: &[String],
    norms: &[PropertyNorms],
    cfg: &MixtureConfig,
    priors: &CountPriors,
    rng: &mut dyn RngCore,
) -> Result<CountBernmixH2> {
    let concept_mixture = represent_concepts(norms, cfg, rng)?;
    let rep_by: BTreeMap<&str, &SoftConceptRep> = concept_mixture
        .reps
        .iter()
        .map(|r| (r.concept.as_str(), r))
        .collect();
    let model = train_multinomial_with(
        table,
        items,
        cfg.k,
        priors,
        |concept, rng| {
            let rep = rep_by
                .get(concept)
                .ok_or_else(|| Error::UnknownConcept(concept.to_string()))?;
            Ok(sample_categorical(&rep.comp_probs, 1.0, rng))
        },
        rng,
    )?;
    Ok(CountBernmixH2 {
        mixture: concept_mixture.mixture,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::count::BetaProfile;
    use crate::util::seeded_rng;

    fn block_instances(
        n: usize,
        p_high: f64,
        p_low: f64,
        high_first: bool,
        dim: usize,
        rng: &mut dyn RngCore,
    ) -> Vec<Instance> {
        let half = dim / 2;
        let probs: Vec<f64> = (0..dim)
            .map(|i| {
                if (i < half) == high_first {
                    p_high
                } else {
                    p_low
                }
            })
            .collect();
        (0..n).map(|_| Instance::sample(&probs, rng)).collect()
    }

    #[test]
    fn single_component_fit_is_the_sample_mean() {
        let mut rng = seeded_rng(41);
        let samples = block_instances(80, 0.9, 0.2, true, 10, &mut rng);
        let fit = em_fit(&samples, 1, &EmConfig::default(), &mut rng).unwrap();
        assert_eq!(fit.mixture.weights(), &[1.0]);
        for i in 0..10 {
            let mean = samples.iter().filter(|x| x.bits()[i]).count() as f64 / 80.0;
            let expected = mean.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            assert!((fit.mixture.component(0)[i] - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn em_recovers_two_separated_clusters() {
        let mut rng = seeded_rng(42);
        let dim = 20;
        let mut samples = block_instances(250, 0.95, 0.05, true, dim, &mut rng);
        samples.extend(block_instances(250, 0.95, 0.05, false, dim, &mut rng));
        let fit = em_fit(&samples, 2, &EmConfig::default(), &mut rng).unwrap();

        let gen_a: Vec<f64> = (0..dim)
            .map(|i| if i < dim / 2 { 0.95 } else { 0.05 })
            .collect();
        let gen_b: Vec<f64> = (0..dim)
            .map(|i| if i < dim / 2 { 0.05 } else { 0.95 })
            .collect();
        let linf = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        // Best alignment of the two components to the two generators.
        let direct = linf(fit.mixture.component(0), &gen_a)
            .max(linf(fit.mixture.component(1), &gen_b));
        let swapped = linf(fit.mixture.component(0), &gen_b)
            .max(linf(fit.mixture.component(1), &gen_a));
        assert!(direct.min(swapped) <= 0.1, "error {}", direct.min(swapped));
    }

    #[test]
    fn em_trace_is_monotone() {
        let mut rng = seeded_rng(43);
        for trial in 0..10 {
            let dim = 5 + trial;
            let samples = block_instances(60, 0.8, 0.3, trial % 2 == 0, dim, &mut rng);
            let fit = em_fit(&samples, 3, &EmConfig::default(), &mut rng).unwrap();
            for w in fit.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "trace decreased: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn em_rejects_bad_inputs() {
        let mut rng = seeded_rng(44);
        let samples = block_instances(3, 0.5, 0.5, true, 4, &mut rng);
        assert!(em_fit(&[], 1, &EmConfig::default(), &mut rng).is_err());
        assert!(em_fit(&samples, 0, &EmConfig::default(), &mut rng).is_err());
        assert!(em_fit(&samples, 4, &EmConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn responsibilities_trivial_cases() {
        let single = BernoulliMixture::new(vec![1.0], vec![vec![0.4, 0.6]]).unwrap();
        let x = Instance::new(vec![true, false]);
        assert_eq!(single.responsibilities(&x), vec![1.0]);

        let symmetric = BernoulliMixture::new(
            vec![0.5, 0.5],
            vec![vec![0.8, 0.2], vec![0.2, 0.8]],
        )
        .unwrap();
        let equidistant = Instance::new(vec![true, true]);
        let r = symmetric.responsibilities(&equidistant);
        assert!((r[0] - 0.5).abs() < 1e-12);
        assert!((r[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn responsibilities_match_direct_products() {
        let mut rng = seeded_rng(45);
        let mix = BernoulliMixture::new(
            vec![0.5, 0.3, 0.2],
            vec![
                vec![0.9, 0.2, 0.4, 0.7],
                vec![0.1, 0.8, 0.5, 0.3],
                vec![0.6, 0.6, 0.1, 0.9],
            ],
        )
        .unwrap();
        for _ in 0..20 {
            let x = Instance::sample(&[0.5, 0.5, 0.5, 0.5], &mut rng);
            // Direct unnormalized products, no logs.
            let mut direct: Vec<f64> = mix
                .components()
                .iter()
                .zip(mix.weights())
                .map(|(comp, &w)| {
                    comp.iter().zip(x.bits()).fold(w, |acc, (&p, &bit)| {
                        acc * if bit { p } else { 1.0 - p }
                    })
                })
                .collect();
            let total: f64 = direct.iter().sum();
            for d in &mut direct {
                *d /= total;
            }
            let r = mix.responsibilities(&x);
            for (a, b) in r.iter().zip(&direct) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn responsibilities_sum_to_one() {
        let mut rng = seeded_rng(46);
        let samples = block_instances(30, 0.9, 0.1, true, 8, &mut rng);
        let fit = em_fit(&samples, 3, &EmConfig::default(), &mut rng).unwrap();
        for x in &samples {
            let r = fit.mixture.responsibilities(x);
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(r.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn hard_assignment_rules() {
        let mix = BernoulliMixture::new(
            vec![0.5, 0.5],
            vec![vec![0.9, 0.1], vec![0.1, 0.9]],
        )
        .unwrap();
        let ones = vec![Instance::new(vec![true, false]); 5];
        assert_eq!(assign_hard(&mix, &ones).unwrap(), 0);

        let single = BernoulliMixture::new(vec![1.0], vec![vec![0.5]]).unwrap();
        let xs = vec![Instance::new(vec![true])];
        assert_eq!(assign_hard(&single, &xs).unwrap(), 0);
        assert!(assign_hard(&single, &[]).is_err());
    }

    #[test]
    fn hard_assignment_matches_brute_force_and_permutation() {
        let mut rng = seeded_rng(47);
        let mix = BernoulliMixture::new(
            vec![0.4, 0.35, 0.25],
            vec![
                vec![0.9, 0.2, 0.4],
                vec![0.1, 0.8, 0.5],
                vec![0.5, 0.5, 0.5],
            ],
        )
        .unwrap();
        let samples: Vec<Instance> = (0..20)
            .map(|_| Instance::sample(&[0.5, 0.5, 0.5], &mut rng))
            .collect();
        let assigned = assign_hard(&mix, &samples).unwrap();

        let mut sums = [0.0; 3];
        for x in &samples {
            for (s, r) in sums.iter_mut().zip(mix.responsibilities(x)) {
                *s += r;
            }
        }
        let brute = sums
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(assigned, brute);

        let mut reversed = samples.clone();
        reversed.reverse();
        assert_eq!(assign_hard(&mix, &reversed).unwrap(), assigned);
    }

    #[test]
    fn soft_representation_is_mean_responsibility() {
        let mix = BernoulliMixture::new(
            vec![0.6, 0.4],
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        )
        .unwrap();
        let x = Instance::new(vec![true, false]);
        let rep = soft_represent(&mix, "c", std::slice::from_ref(&x)).unwrap();
        assert_eq!(rep.comp_probs, mix.responsibilities(&x));

        let single = BernoulliMixture::new(vec![1.0], vec![vec![0.5, 0.5]]).unwrap();
        let rep = soft_represent(&single, "c", std::slice::from_ref(&x)).unwrap();
        assert_eq!(rep.comp_probs, vec![1.0]);

        let mut rng = seeded_rng(48);
        let samples: Vec<Instance> = (0..50)
            .map(|_| Instance::sample(&[0.5, 0.5], &mut rng))
            .collect();
        let rep = soft_represent(&mix, "c", &samples).unwrap();
        let mut mean = vec![0.0; 2];
        for x in &samples {
            for (m, r) in mean.iter_mut().zip(mix.responsibilities(x)) {
                *m += r / 50.0;
            }
        }
        for (a, b) in rep.comp_probs.iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((rep.comp_probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn component_mapping_bounds_and_errors() {
        let mix = BernoulliMixture::new(
            vec![0.5, 0.5],
            vec![vec![0.9, 0.1, 0.5], vec![0.2, 0.8, 0.5]],
        )
        .unwrap();
        let mapped = components_to_properties(&[0.25, 0.75], &mix).unwrap();
        for &p in &mapped {
            assert!((0.0..=1.0).contains(&p));
        }
        // One-hot distribution returns the component itself.
        let one_hot = components_to_properties(&[1.0, 0.0], &mix).unwrap();
        assert_eq!(one_hot, mix.component(0).to_vec());
        assert!(components_to_properties(&[1.0], &mix).is_err());
    }

    fn independent_model_with_predictives(preds: &[(&str, Vec<f64>)]) -> CountModel {
        // Encode an exact predictive p as Beta(p * s, (1 - p) * s) with a
        // large scale so sampled instances follow p closely.
        let s = 1e9;
        let items: Vec<String> = preds.iter().map(|(n, _)| n.to_string()).collect();
        let profiles: Vec<BetaProfile> = preds
            .iter()
            .map(|(_, p)| {
                let alpha: Vec<f64> = p.iter().map(|&v| (v * s).max(1e-12)).collect();
                let beta: Vec<f64> = p.iter().map(|&v| ((1.0 - v) * s).max(1e-12)).collect();
                BetaProfile::from_parts(alpha, beta).unwrap()
            })
            .collect();
        CountModel::from_beta_profiles(items, profiles, CountPriors::default()).unwrap()
    }

    #[test]
    fn identical_items_share_a_cluster() {
        let mut rng = seeded_rng(49);
        let model = independent_model_with_predictives(&[
            ("wa", vec![0.95, 0.95, 0.05, 0.05]),
            ("wb", vec![0.95, 0.95, 0.05, 0.05]),
            ("wc", vec![0.05, 0.05, 0.95, 0.95]),
            ("wd", vec![0.05, 0.05, 0.95, 0.95]),
        ]);
        let cfg = MixtureConfig {
            k: 2,
            n_samples: 60,
            em: EmConfig::default(),
        };
        let clustering = cluster_items(&model, &cfg, &mut rng).unwrap();
        assert_eq!(
            clustering.assignments["wa"], clustering.assignments["wb"],
            "identical predictives must share a component"
        );
        assert_eq!(clustering.assignments["wc"], clustering.assignments["wd"]);
        assert_ne!(clustering.assignments["wa"], clustering.assignments["wc"]);
    }

    #[test]
    fn regrouped_counts_match_brute_force() {
        let mut table = OccurrenceTable::new();
        table.add("c1", "w1", 2);
        table.add("c1", "w2", 3);
        table.add("c2", "w2", 1);
        table.add("c2", "w3", 4);
        let assignments: BTreeMap<String, usize> =
            [("w1".to_string(), 0), ("w2".to_string(), 0), ("w3".to_string(), 1)].into();
        let grouped = regroup_by_cluster(&table, &assignments).unwrap();
        assert_eq!(grouped.count("c1", &cluster_name(0)), 5);
        assert_eq!(grouped.count("c2", &cluster_name(0)), 1);
        assert_eq!(grouped.count("c2", &cluster_name(1)), 4);
        assert_eq!(grouped.total(), table.total());
    }

    #[test]
    fn identity_clustering_equals_plain_multinomial() {
        // With every item its own cluster (in order-preserving names), the
        // regrouped model must match plain multinomial training exactly.
        let inv = PropertyInventory::new(["q0", "q1", "q2"]).unwrap();
        let norms = vec![
            PropertyNorms::new("a", vec![0.9, 0.3, 0.1]).unwrap(),
            PropertyNorms::new("b", vec![0.1, 0.6, 0.8]).unwrap(),
        ];
        let mut table = OccurrenceTable::new();
        table.add("a", "w0", 3);
        table.add("a", "w1", 2);
        table.add("b", "w1", 4);

        // Plain model over the items, renamed so iteration order matches the
        // cluster names exactly.
        let mut renamed = OccurrenceTable::new();
        for (c, w, n) in table.entries() {
            let k: usize = w.trim_start_matches('w').parse().unwrap();
            renamed.add(c, &cluster_name(k), n);
        }
        let names: Vec<String> = (0..2).map(cluster_name).collect();
        let mut rng_a = seeded_rng(50);
        let plain = train_count_model(
            &renamed,
            &names,
            &inv,
            &norms,
            CountMode::Multinomial,
            &CountPriors::default(),
            &mut rng_a,
        )
        .unwrap();

        let assignments: BTreeMap<String, usize> =
            [("w0".to_string(), 0), ("w1".to_string(), 1)].into();
        let grouped = regroup_by_cluster(&table, &assignments).unwrap();
        let mut rng_b = seeded_rng(50);
        let clustered = train_count_model(
            &grouped,
            &names,
            &inv,
            &norms,
            CountMode::Multinomial,
            &CountPriors::default(),
            &mut rng_b,
        )
        .unwrap();
        assert_eq!(plain, clustered);
    }

    #[test]
    fn concentrated_concept_gets_one_hot_representation() {
        let mix = BernoulliMixture::new(
            vec![0.5, 0.5],
            vec![vec![0.999999, 0.000001], vec![0.000001, 0.999999]],
        )
        .unwrap();
        let samples = vec![Instance::new(vec![false, true]); 30];
        let rep = soft_represent(&mix, "c", &samples).unwrap();
        assert!(rep.comp_probs[1] > 1.0 - 1e-6);
        assert!(rep.comp_probs[0] < 1e-6);
    }

    #[test]
    fn count_h2_single_component_predicts_that_component() {
        let mut rng = seeded_rng(51);
        let norms = vec![
            PropertyNorms::new("a", vec![0.9, 0.1]).unwrap(),
            PropertyNorms::new("b", vec![0.8, 0.2]).unwrap(),
        ];
        let mut table = OccurrenceTable::new();
        table.add("a", "w0", 2);
        table.add("b", "w0", 2);
        let cfg = MixtureConfig {
            k: 1,
            n_samples: 40,
            em: EmConfig::default(),
        };
        let h2 = build_count_h2(
            &table,
            &["w0".to_string()],
            &norms,
            &cfg,
            &CountPriors::default(),
            &mut rng,
        )
        .unwrap();
        let (pred, _) = h2.learn_unknown(&[("w0", 1)], &mut rng);
        assert_eq!(pred, h2.mixture.component(0).to_vec());
        // Every concept rep is [1.0] when K = 1.
        let reps = represent_concepts(&norms, &cfg, &mut rng).unwrap();
        for rep in reps.reps {
            assert_eq!(rep.comp_probs, vec![1.0]);
        }
    }
}
