//! Bimodal topic model: every topic jointly emits a context item and a
//! property symbol. Known concepts become pseudo-documents of
//! (item, property) tokens; training is collapsed Gibbs sampling over the
//! token-topic assignments; unknown concepts are folded in with the topic
//! rows frozen.
//!
//! The per-token conditional used throughout is
//!
//! ```text
//! p(z | rest) ∝ (n(c,z) + α) · (n(z,w) + β) / (n(z) + V·β)
//!                            · (n(z,q) + γ) / (n(z) + S·γ)
//! ```
//!
//! with all counts excluding the token being resampled.

use std::collections::{BTreeMap, HashMap};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::bernmix::{components_to_properties, BernoulliMixture, SoftConceptRep};
use crate::data::{OccurrenceTable, PropertyInventory, PropertyNorms};
use crate::error::{Error, Result};
use crate::util::{normalize_in_place, sample_categorical};

/// Dirichlet hyperparameters: `alpha` for concept-topic mixtures, `beta` for
/// topic-item rows, `gamma` for topic-symbol rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopicHyper {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for TopicHyper {
    fn default() -> Self {
        TopicHyper {
            alpha: 0.1,
            beta: 0.1,
            gamma: 0.1,
        }
    }
}

/// Gibbs training settings: 50 topics, 500 burn-in sweeps, posterior means
/// averaged over 10 consecutive post-burn-in sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub topics: usize,
    pub burn_in: usize,
    pub post_samples: usize,
    pub hyper: TopicHyper,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            topics: 50,
            burn_in: 500,
            post_samples: 10,
            hyper: TopicHyper::default(),
        }
    }
}

/// Fold-in settings: 50 sweeps with the topic distribution averaged over the
/// last 20.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldInConfig {
    pub iters: usize,
    pub avg_samples: usize,
}

impl Default for FoldInConfig {
    fn default() -> Self {
        FoldInConfig {
            iters: 50,
            avg_samples: 20,
        }
    }
}

/// A concept's bag of tokens. Known-concept documents carry a symbol on every
/// token; unknown-concept documents carry none.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoDocument {
    pub concept: String,
    /// (item index, optional symbol index), one entry per occurrence.
    pub tokens: Vec<(usize, Option<usize>)>,
}

/// Pseudo-documents plus the item list their indices refer to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoCorpus {
    pub items: Vec<String>,
    /// Size of the symbol space (properties, or mixture components).
    pub symbols: usize,
    pub docs: Vec<PseudoDocument>,
}

/// Builds one pseudo-document per concept in the table: every (concept, item)
/// occurrence becomes a token pairing the item with a property sampled from
/// the concept's norms.
pub fn build_pseudo_corpus(
    table: &OccurrenceTable,
    inventory: &PropertyInventory,
    norms: &[PropertyNorms],
    rng: &mut dyn RngCore,
) -> Result<PseudoCorpus> {
    let norms_by: BTreeMap<&str, &PropertyNorms> =
        norms.iter().map(|n| (n.concept(), n)).collect();
    build_corpus_with(table, inventory.len(), |concept, rng| {
        norms_by
            .get(concept)
            .ok_or_else(|| Error::UnknownConcept(concept.to_string()))?
            .sample_property(rng)
    }, rng)
}

/// As [`build_pseudo_corpus`], but tokens carry mixture-component symbols
/// drawn from each concept's soft representation.
pub fn build_pseudo_corpus_components(
    table: &OccurrenceTable,
    reps: &[SoftConceptRep],
    k: usize,
    rng: &mut dyn RngCore,
) -> Result<PseudoCorpus> {
    let rep_by: BTreeMap<&str, &SoftConceptRep> =
        reps.iter().map(|r| (r.concept.as_str(), r)).collect();
    build_corpus_with(table, k, |concept, rng| {
        let rep = rep_by
            .get(concept)
            .ok_or_else(|| Error::UnknownConcept(concept.to_string()))?;
        Ok(sample_categorical(&rep.comp_probs, 1.0, rng))
    }, rng)
}

fn build_corpus_with<F>(
    table: &OccurrenceTable,
    symbols: usize,
    mut draw: F,
    rng: &mut dyn RngCore,
) -> Result<PseudoCorpus>
where
    F: FnMut(&str, &mut dyn RngCore) -> Result<usize>,
{
    let items: Vec<String> = table.items().map(|(w, _)| w.to_string()).collect();
    let item_index: HashMap<&str, usize> = items
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut docs = Vec::with_capacity(table.n_concepts());
    for concept in table.concepts() {
        let mut tokens = Vec::new();
        for (item, n) in table.contexts_of(concept) {
            let w = item_index[item];
            for _ in 0..n {
                tokens.push((w, Some(draw(concept, rng)?)));
            }
        }
        docs.push(PseudoDocument {
            concept: concept.to_string(),
            tokens,
        });
    }
    Ok(PseudoCorpus {
        items,
        symbols,
        docs,
    })
}

/// Collapsed Gibbs sampler state: topic assignments and the four count
/// tables. Exposed so tests can audit the tables directly.
pub struct GibbsSampler {
    topics: usize,
    n_items: usize,
    n_symbols: usize,
    hyper: TopicHyper,
    /// (item, symbol) per token, per document.
    tokens: Vec<Vec<(u32, u32)>>,
    assignments: Vec<Vec<u32>>,
    n_cz: Vec<Vec<u32>>,
    n_zw: Vec<Vec<u32>>,
    n_zq: Vec<Vec<u32>>,
    n_z: Vec<u32>,
    total_tokens: u64,
    weights: Vec<f64>,
}

impl GibbsSampler {
    pub fn new(corpus: &PseudoCorpus, cfg: &GibbsConfig, rng: &mut dyn RngCore) -> Result<Self> {
        if corpus.docs.is_empty() {
            return Err(Error::Invalid("no pseudo-documents to train on".into()));
        }
        if corpus.items.is_empty() || corpus.symbols == 0 {
            return Err(Error::Invalid("empty item or symbol space".into()));
        }
        if cfg.topics == 0 {
            return Err(Error::Invalid("topic count must be >= 1".into()));
        }
        let topics = cfg.topics;
        let mut tokens = Vec::with_capacity(corpus.docs.len());
        for doc in &corpus.docs {
            let mut doc_tokens = Vec::with_capacity(doc.tokens.len());
            for &(w, q) in &doc.tokens {
                let q = q.ok_or_else(|| {
                    Error::Invalid(format!(
                        "training document `{}` has a token without a property",
                        doc.concept
                    ))
                })?;
                if w >= corpus.items.len() || q >= corpus.symbols {
                    return Err(Error::Invalid("token index out of range".into()));
                }
                doc_tokens.push((w as u32, q as u32));
            }
            tokens.push(doc_tokens);
        }
        let total_tokens: u64 = tokens.iter().map(|t| t.len() as u64).sum();
        if total_tokens == 0 {
            return Err(Error::Invalid("pseudo-documents contain no tokens".into()));
        }

        let mut sampler = GibbsSampler {
            topics,
            n_items: corpus.items.len(),
            n_symbols: corpus.symbols,
            hyper: cfg.hyper,
            assignments: tokens.iter().map(|t| vec![0u32; t.len()]).collect(),
            tokens,
            n_cz: vec![vec![0; topics]; corpus.docs.len()],
            n_zw: vec![vec![0; corpus.items.len()]; topics],
            n_zq: vec![vec![0; corpus.symbols]; topics],
            n_z: vec![0; topics],
            total_tokens,
            weights: vec![0.0; topics],
        };
        // Uniform random initial assignments.
        use rand::Rng;
        for d in 0..sampler.tokens.len() {
            for i in 0..sampler.tokens[d].len() {
                let z = rng.random_range(0..topics) as u32;
                sampler.assignments[d][i] = z;
                sampler.increment(d, i, z);
            }
        }
        Ok(sampler)
    }

    fn increment(&mut self, d: usize, i: usize, z: u32) {
        let (w, q) = self.tokens[d][i];
        self.n_cz[d][z as usize] += 1;
        self.n_zw[z as usize][w as usize] += 1;
        self.n_zq[z as usize][q as usize] += 1;
        self.n_z[z as usize] += 1;
    }

    fn decrement(&mut self, d: usize, i: usize, z: u32) {
        let (w, q) = self.tokens[d][i];
        self.n_cz[d][z as usize] -= 1;
        self.n_zw[z as usize][w as usize] -= 1;
        self.n_zq[z as usize][q as usize] -= 1;
        self.n_z[z as usize] -= 1;
    }

    /// One full sweep: resamples every token's topic from its collapsed
    /// conditional.
    pub fn sweep(&mut self, rng: &mut dyn RngCore) {
        let v_beta = self.n_items as f64 * self.hyper.beta;
        let s_gamma = self.n_symbols as f64 * self.hyper.gamma;
        for d in 0..self.tokens.len() {
            for i in 0..self.tokens[d].len() {
                let old = self.assignments[d][i];
                self.decrement(d, i, old);
                let (w, q) = self.tokens[d][i];
                let mut total = 0.0;
                for z in 0..self.topics {
                    let nz = self.n_z[z] as f64;
                    let weight = (self.n_cz[d][z] as f64 + self.hyper.alpha)
                        * (self.n_zw[z][w as usize] as f64 + self.hyper.beta)
                        / (nz + v_beta)
                        * (self.n_zq[z][q as usize] as f64 + self.hyper.gamma)
                        / (nz + s_gamma);
                    self.weights[z] = weight;
                    total += weight;
                }
                let new = sample_categorical(&self.weights, total, rng) as u32;
                self.assignments[d][i] = new;
                self.increment(d, i, new);
            }
        }
        debug_assert!(self.audit(), "count tables diverged from assignments");
    }

    /// Recounts every table from the raw assignments and compares exactly.
    pub fn audit(&self) -> bool {
        let mut n_cz = vec![vec![0u32; self.topics]; self.tokens.len()];
        let mut n_zw = vec![vec![0u32; self.n_items]; self.topics];
        let mut n_zq = vec![vec![0u32; self.n_symbols]; self.topics];
        let mut n_z = vec![0u32; self.topics];
        for (d, doc) in self.tokens.iter().enumerate() {
            for (i, &(w, q)) in doc.iter().enumerate() {
                let z = self.assignments[d][i] as usize;
                n_cz[d][z] += 1;
                n_zw[z][w as usize] += 1;
                n_zq[z][q as usize] += 1;
                n_z[z] += 1;
            }
        }
        n_cz == self.n_cz && n_zw == self.n_zw && n_zq == self.n_zq && n_z == self.n_z
    }

    fn smoothed_phi(&self) -> Vec<Vec<f64>> {
        let v_beta = self.n_items as f64 * self.hyper.beta;
        (0..self.topics)
            .map(|z| {
                let nz = self.n_z[z] as f64;
                self.n_zw[z]
                    .iter()
                    .map(|&n| (n as f64 + self.hyper.beta) / (nz + v_beta))
                    .collect()
            })
            .collect()
    }

    fn smoothed_psi(&self) -> Vec<Vec<f64>> {
        let s_gamma = self.n_symbols as f64 * self.hyper.gamma;
        (0..self.topics)
            .map(|z| {
                let nz = self.n_z[z] as f64;
                self.n_zq[z]
                    .iter()
                    .map(|&n| (n as f64 + self.hyper.gamma) / (nz + s_gamma))
                    .collect()
            })
            .collect()
    }

    fn smoothed_theta(&self) -> Vec<Vec<f64>> {
        let t_alpha = self.topics as f64 * self.hyper.alpha;
        self.n_cz
            .iter()
            .map(|row| {
                let nd: u32 = row.iter().sum();
                row.iter()
                    .map(|&n| (n as f64 + self.hyper.alpha) / (nd as f64 + t_alpha))
                    .collect()
            })
            .collect()
    }

    fn smoothed_topic_weights(&self) -> Vec<f64> {
        let t_alpha = self.topics as f64 * self.hyper.alpha;
        let total = self.total_tokens as f64;
        self.n_z
            .iter()
            .map(|&n| (n as f64 + self.hyper.alpha) / (total + t_alpha))
            .collect()
    }
}

/// A trained topic model: posterior-mean estimates of the topic rows, the
/// per-concept topic mixtures, and the corpus-level topic weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    topics: usize,
    items: Vec<String>,
    symbols: usize,
    hyper: TopicHyper,
    phi: Vec<Vec<f64>>,
    psi: Vec<Vec<f64>>,
    topic_weights: Vec<f64>,
    theta: Vec<(String, Vec<f64>)>,
    #[serde(skip)]
    item_index: HashMap<String, usize>,
}

impl TopicModel {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        items: Vec<String>,
        symbols: usize,
        hyper: TopicHyper,
        phi: Vec<Vec<f64>>,
        psi: Vec<Vec<f64>>,
        topic_weights: Vec<f64>,
        theta: Vec<(String, Vec<f64>)>,
    ) -> Result<Self> {
        let topics = phi.len();
        if topics == 0 || psi.len() != topics || topic_weights.len() != topics {
            return Err(Error::Invalid(
                "phi, psi and topic weights must agree on the topic count".into(),
            ));
        }
        if phi.iter().any(|r| r.len() != items.len()) {
            return Err(Error::Invalid("phi rows must cover the item list".into()));
        }
        if psi.iter().any(|r| r.len() != symbols) {
            return Err(Error::Invalid("psi rows must cover the symbol space".into()));
        }
        let mut model = TopicModel {
            topics,
            items,
            symbols,
            hyper,
            phi,
            psi,
            topic_weights,
            theta,
            item_index: HashMap::new(),
        };
        model.rebuild_index();
        Ok(model)
    }

    fn rebuild_index(&mut self) {
        self.item_index = self
            .items
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
    }

    /// Restores internal indexes after deserialization.
    pub fn restore(mut self) -> Self {
        self.rebuild_index();
        self
    }

    pub fn topics(&self) -> usize {
        self.topics
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn n_symbols(&self) -> usize {
        self.symbols
    }

    pub fn hyper(&self) -> &TopicHyper {
        &self.hyper
    }

    pub fn phi(&self) -> &[Vec<f64>] {
        &self.phi
    }

    pub fn psi(&self) -> &[Vec<f64>] {
        &self.psi
    }

    pub fn topic_weights(&self) -> &[f64] {
        &self.topic_weights
    }

    pub fn theta(&self) -> &[(String, Vec<f64>)] {
        &self.theta
    }

    pub fn knows(&self, item: &str) -> bool {
        self.item_index.contains_key(item)
    }

    /// Builds an unknown-concept document (no symbols) from context
    /// occurrences, dropping items outside the training vocabulary. Returns
    /// the document and the number of dropped occurrences.
    pub fn unknown_document(&self, contexts: &[(&str, u64)]) -> (PseudoDocument, u64) {
        let mut tokens = Vec::new();
        let mut skipped = 0;
        for &(item, n) in contexts {
            match self.item_index.get(item) {
                Some(&w) => {
                    for _ in 0..n {
                        tokens.push((w, None));
                    }
                }
                None => {
                    log::warn!("dropping out-of-vocabulary context item `{item}`");
                    skipped += n;
                }
            }
        }
        (
            PseudoDocument {
                concept: String::new(),
                tokens,
            },
            skipped,
        )
    }

    /// Infers the unknown document's topic distribution with the topic rows
    /// frozen: only the document's own assignments are resampled, using the
    /// item factor `(n_u(z) + alpha) * phi_z[w]`, and the smoothed
    /// distribution is averaged over the last `avg_samples` sweeps.
    pub fn fold_in(
        &self,
        doc: &PseudoDocument,
        cfg: &FoldInConfig,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>> {
        let t_alpha = self.topics as f64 * self.hyper.alpha;
        if doc.tokens.is_empty() {
            return Ok(vec![1.0 / self.topics as f64; self.topics]);
        }
        let mut word_ids = Vec::with_capacity(doc.tokens.len());
        for &(w, q) in &doc.tokens {
            if q.is_some() {
                return Err(Error::Invalid(
                    "fold-in documents must not carry properties".into(),
                ));
            }
            if w >= self.items.len() {
                return Err(Error::Invalid("token index out of range".into()));
            }
            word_ids.push(w);
        }

        let n = word_ids.len() as f64;
        let mut counts = vec![0u32; self.topics];
        let mut assignments = vec![0u32; word_ids.len()];
        let mut weights = vec![0.0f64; self.topics];

        // Sequential initial draw from the same conditional.
        for (i, &w) in word_ids.iter().enumerate() {
            let mut total = 0.0;
            for z in 0..self.topics {
                let wt = (counts[z] as f64 + self.hyper.alpha) * self.phi[z][w];
                weights[z] = wt;
                total += wt;
            }
            let z = sample_categorical(&weights, total, rng) as u32;
            assignments[i] = z;
            counts[z as usize] += 1;
        }

        let iters = cfg.iters.max(1);
        let avg_from = iters.saturating_sub(cfg.avg_samples.max(1));
        let mut acc = vec![0.0f64; self.topics];
        let mut n_acc = 0usize;
        for it in 0..iters {
            for (i, &w) in word_ids.iter().enumerate() {
                let old = assignments[i] as usize;
                counts[old] -= 1;
                let mut total = 0.0;
                for z in 0..self.topics {
                    let wt = (counts[z] as f64 + self.hyper.alpha) * self.phi[z][w];
                    weights[z] = wt;
                    total += wt;
                }
                let new = sample_categorical(&weights, total, rng);
                assignments[i] = new as u32;
                counts[new] += 1;
            }
            if it >= avg_from {
                for (a, &c) in acc.iter_mut().zip(&counts) {
                    *a += (c as f64 + self.hyper.alpha) / (n + t_alpha);
                }
                n_acc += 1;
            }
        }
        for a in acc.iter_mut() {
            *a /= n_acc as f64;
        }
        Ok(acc)
    }

    /// P(q | theta) = sum_z theta_z * psi_z[q]; a simplex over symbols.
    pub fn predict_from_theta(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.topics {
            return Err(Error::Invalid(format!(
                "topic distribution has length {}, model has {} topics",
                theta.len(),
                self.topics
            )));
        }
        let mut out = vec![0.0f64; self.symbols];
        for (z, &t) in theta.iter().enumerate() {
            for (o, &p) in out.iter_mut().zip(&self.psi[z]) {
                *o += t * p;
            }
        }
        Ok(out)
    }

    /// Single-item prediction: P(q | w) = sum_z P(z | w) * psi_z[q], with
    /// P(z | w) proportional to phi_z[w] times the corpus-level topic weight.
    pub fn predict_single_item(&self, item: &str) -> Result<Vec<f64>> {
        let w = *self
            .item_index
            .get(item)
            .ok_or_else(|| Error::UnknownItem(item.to_string()))?;
        let mut pzw: Vec<f64> = (0..self.topics)
            .map(|z| self.phi[z][w] * self.topic_weights[z])
            .collect();
        normalize_in_place(&mut pzw);
        self.predict_from_theta(&pzw)
    }

    /// Convenience: folds in the contexts and applies `predict_from_theta`.
    /// Returns the scores and the number of dropped occurrences.
    pub fn predict_contexts(
        &self,
        contexts: &[(&str, u64)],
        fold_cfg: &FoldInConfig,
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<f64>, u64)> {
        let (doc, skipped) = self.unknown_document(contexts);
        let theta = self.fold_in(&doc, fold_cfg, rng)?;
        Ok((self.predict_from_theta(&theta)?, skipped))
    }
}

/// Trains the topic model: burn-in sweeps followed by `post_samples`
/// consecutive sweeps whose smoothed estimates are averaged.
pub fn gibbs_train(
    corpus: &PseudoCorpus,
    cfg: &GibbsConfig,
    rng: &mut dyn RngCore,
) -> Result<TopicModel> {
    if cfg.post_samples == 0 {
        return Err(Error::Invalid("post_samples must be >= 1".into()));
    }
    let mut sampler = GibbsSampler::new(corpus, cfg, rng)?;
    for _ in 0..cfg.burn_in {
        sampler.sweep(rng);
    }

    let topics = cfg.topics;
    let mut phi = vec![vec![0.0f64; corpus.items.len()]; topics];
    let mut psi = vec![vec![0.0f64; corpus.symbols]; topics];
    let mut theta = vec![vec![0.0f64; topics]; corpus.docs.len()];
    let mut topic_weights = vec![0.0f64; topics];
    for _ in 0..cfg.post_samples {
        sampler.sweep(rng);
        accumulate(&mut phi, &sampler.smoothed_phi());
        accumulate(&mut psi, &sampler.smoothed_psi());
        accumulate(&mut theta, &sampler.smoothed_theta());
        for (a, b) in topic_weights.iter_mut().zip(sampler.smoothed_topic_weights()) {
            *a += b;
        }
    }
    let k = cfg.post_samples as f64;
    scale(&mut phi, k);
    scale(&mut psi, k);
    scale(&mut theta, k);
    for w in topic_weights.iter_mut() {
        *w /= k;
    }

    let theta = corpus
        .docs
        .iter()
        .zip(theta)
        .map(|(doc, row)| (doc.concept.clone(), row))
        .collect();
    TopicModel::from_parts(
        corpus.items.clone(),
        corpus.symbols,
        cfg.hyper,
        phi,
        psi,
        topic_weights,
        theta,
    )
}

fn accumulate(acc: &mut [Vec<f64>], add: &[Vec<f64>]) {
    for (a_row, b_row) in acc.iter_mut().zip(add) {
        for (a, &b) in a_row.iter_mut().zip(b_row) {
            *a += b;
        }
    }
}

fn scale(m: &mut [Vec<f64>], k: f64) {
    for row in m.iter_mut() {
        for x in row.iter_mut() {
            *x /= k;
        }
    }
}

/// Topic model trained over mixture-component symbols, with prediction
/// mapped back to properties through the component Bernoulli vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitmBernmixH2 {
    model: TopicModel,
    pub mixture: BernoulliMixture,
}

impl BitmBernmixH2 {
    pub fn new(model: TopicModel, mixture: BernoulliMixture) -> Result<Self> {
        if model.n_symbols() != mixture.k() {
            return Err(Error::Invalid(format!(
                "topic model has {} symbols, mixture has {} components",
                model.n_symbols(),
                mixture.k()
            )));
        }
        Ok(BitmBernmixH2 { model, mixture })
    }

    pub fn model(&self) -> &TopicModel {
        &self.model
    }

    pub fn knows(&self, item: &str) -> bool {
        self.model.knows(item)
    }

    pub fn predict_contexts(
        &self,
        contexts: &[(&str, u64)],
        fold_cfg: &FoldInConfig,
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<f64>, u64)> {
        let (comp_dist, skipped) = self.model.predict_contexts(contexts, fold_cfg, rng)?;
        Ok((components_to_properties(&comp_dist, &self.mixture)?, skipped))
    }

    pub fn predict_single_item(&self, item: &str) -> Result<Vec<f64>> {
        let comp_dist = self.model.predict_single_item(item)?;
        components_to_properties(&comp_dist, &self.mixture)
    }

    pub fn restore(mut self) -> Self {
        self.model = self.model.restore();
        self
    }
}
