//! Synthetic dataset generator mirroring the topic model's generative story.
//! Used as a ground-truth oracle: every token draws a topic from its
//! concept's mixture and then an item and a property from that topic's rows.
//! Concept norms are derived from the analytic per-concept property marginal,
//! scaled and snapped onto the quantifier probability grid.

use rand::RngCore;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::data::{OccurrenceTable, PropertyInventory, PropertyNorms, Vocabulary};
use crate::error::{Error, Result};
use crate::ingest::QuantifierMap;
use crate::util::{sample_categorical, seeded_rng};

/// Generator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub topics: usize,
    pub concepts: usize,
    pub items: usize,
    pub properties: usize,
    pub tokens_per_concept: usize,
    /// Dirichlet concentration for concept-topic mixtures.
    pub theta_conc: f64,
    /// Dirichlet concentration for topic-item rows.
    pub phi_conc: f64,
    /// Dirichlet concentration for topic-property rows.
    pub psi_conc: f64,
    /// Multiplier applied to the property marginal before grid snapping.
    pub sharpness: f64,
    /// Minimum pairwise L1 distance between topic rows (phi and psi). Draws
    /// closer than this are rejected so the generator stays identifiable;
    /// set to 0 to disable.
    pub min_topic_sep: f64,
    /// Maximum L1 distance allowed between a topic-property row and the
    /// distribution its snapped norms can actually express. Rows the grid
    /// cannot represent are redrawn; set to 2 to disable.
    pub max_snap_distortion: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            topics: 5,
            concepts: 50,
            items: 100,
            properties: 40,
            tokens_per_concept: 200,
            theta_conc: 0.03,
            phi_conc: 0.08,
            psi_conc: 0.02,
            sharpness: 2.0,
            min_topic_sep: 1.0,
            max_snap_distortion: 0.2,
            seed: 42,
        }
    }
}

/// Exact marginal distribution of the two-stage property draw (sample a
/// Bernoulli instance from `probs`, redraw while empty, pick uniformly among
/// the set bits): `P(q)` is proportional to
/// `probs[q] * E[1 / (1 + B_q)]` with `B_q` the Poisson-binomial count of the
/// other set bits. Computed by dynamic programming, so it is an independent
/// closed-form oracle for the sampling path.
pub fn two_stage_effective(probs: &[f64]) -> Vec<f64> {
    let n = probs.len();
    let mut raw = vec![0.0f64; n];
    for q in 0..n {
        if probs[q] == 0.0 {
            continue;
        }
        // Distribution of the number of other set bits.
        let mut pb = vec![1.0f64];
        for (j, &p) in probs.iter().enumerate() {
            if j == q || p == 0.0 {
                continue;
            }
            let mut next = vec![0.0f64; pb.len() + 1];
            for (b, &mass) in pb.iter().enumerate() {
                next[b] += mass * (1.0 - p);
                next[b + 1] += mass * p;
            }
            pb = next;
        }
        let inv_mean: f64 = pb
            .iter()
            .enumerate()
            .map(|(b, &mass)| mass / (b + 1) as f64)
            .sum();
        raw[q] = probs[q] * inv_mean;
    }
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        for r in raw.iter_mut() {
            *r /= total;
        }
    }
    raw
}

/// The generating parameters and the raw token stream, kept for oracle
/// comparisons against trained models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub theta: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
    /// (concept, topic, item, property) per generated token.
    pub tokens: Vec<(usize, usize, usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub inventory: PropertyInventory,
    pub norms: Vec<PropertyNorms>,
    pub vocabulary: Vocabulary,
    pub table: OccurrenceTable,
    pub truth: SynthTruth,
}

fn validate(spec: &SynthSpec) -> Result<()> {
    if spec.topics == 0
        || spec.concepts == 0
        || spec.items == 0
        || spec.tokens_per_concept == 0
    {
        return Err(Error::Invalid("all synth counts must be >= 1".into()));
    }
    if spec.properties < 2 {
        return Err(Error::Invalid("need at least 2 properties".into()));
    }
    if spec.theta_conc <= 0.0 || spec.phi_conc <= 0.0 || spec.psi_conc <= 0.0 {
        return Err(Error::Invalid("Dirichlet concentrations must be positive".into()));
    }
    if spec.sharpness <= 0.0 {
        return Err(Error::Invalid("sharpness must be positive".into()));
    }
    if spec.min_topic_sep < 0.0 {
        return Err(Error::Invalid("min_topic_sep must be >= 0".into()));
    }
    if spec.max_snap_distortion <= 0.0 {
        return Err(Error::Invalid("max_snap_distortion must be positive".into()));
    }
    Ok(())
}

fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Snap distortion of one topic-property row: how far the two-stage draw
/// from its snapped norms lands from the row itself.
fn row_snap_distortion(row: &[f64], sharpness: f64, grid: &[f64; 5]) -> f64 {
    let snapped: Vec<f64> = row
        .iter()
        .map(|&m| snap_to_grid((m * sharpness).min(1.0), grid))
        .collect();
    let effective = two_stage_effective(&snapped);
    l1_distance(&effective, row)
}

/// Draws topic rows one by one, rejecting draws within `min_sep` L1 of an
/// already accepted row or (when a grid is given) with snap distortion above
/// `max_distortion`. Keeps the least-bad candidate if the budget runs out.
fn sample_topic_rows(
    rows: usize,
    conc: f64,
    dim: usize,
    min_sep: f64,
    realizability: Option<(f64, f64, &[f64; 5])>,
    rng: &mut dyn RngCore,
) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..500 {
            let candidate = sample_dirichlet(conc, dim, rng);
            let sep = out
                .iter()
                .map(|r| l1_distance(r, &candidate))
                .fold(f64::INFINITY, f64::min);
            let distortion_excess = match realizability {
                Some((max_distortion, sharpness, grid)) => {
                    (row_snap_distortion(&candidate, sharpness, grid) - max_distortion).max(0.0)
                }
                None => 0.0,
            };
            let penalty = (min_sep - sep).max(0.0) + distortion_excess;
            if penalty == 0.0 {
                best = Some((0.0, candidate));
                break;
            }
            if best.as_ref().is_none_or(|(p, _)| penalty < *p) {
                best = Some((penalty, candidate));
            }
        }
        out.push(best.expect("at least one candidate drawn").1);
    }
    out
}

/// Symmetric Dirichlet draw via normalized Gamma samples.
fn sample_dirichlet(conc: f64, dim: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    let gamma = Gamma::new(conc, 1.0).expect("validated concentration");
    for _ in 0..100 {
        let draws: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            return draws.into_iter().map(|x| x / sum).collect();
        }
    }
    vec![1.0 / dim as f64; dim]
}

/// Snaps a probability to the nearest quantifier grid value; ties go to the
/// smaller value.
fn snap_to_grid(p: f64, grid: &[f64; 5]) -> f64 {
    let mut best = grid[0];
    let mut best_d = (p - grid[0]).abs();
    for &g in &grid[1..] {
        let d = (p - g).abs();
        if d < best_d {
            best = g;
            best_d = d;
        }
    }
    best
}

/// Generates a full synthetic dataset. Deterministic in the spec's seed.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    validate(spec)?;
    let mut rng = seeded_rng(spec.seed);
    let grid = QuantifierMap::standard().grid();

    let theta: Vec<Vec<f64>> = (0..spec.concepts)
        .map(|_| sample_dirichlet(spec.theta_conc, spec.topics, &mut rng))
        .collect();
    let phi = sample_topic_rows(
        spec.topics,
        spec.phi_conc,
        spec.items,
        spec.min_topic_sep,
        None,
        &mut rng,
    );
    let psi = sample_topic_rows(
        spec.topics,
        spec.psi_conc,
        spec.properties,
        spec.min_topic_sep,
        Some((spec.max_snap_distortion, spec.sharpness, &grid)),
        &mut rng,
    );

    let concept_name = |c: usize| format!("c{c:04}");
    let item_name = |w: usize| format!("w{w:04}");
    let property_name = |q: usize| format!("q{q:04}");

    let mut table = OccurrenceTable::new();
    let mut tokens = Vec::with_capacity(spec.concepts * spec.tokens_per_concept);
    for (c, theta_c) in theta.iter().enumerate() {
        for _ in 0..spec.tokens_per_concept {
            let z = sample_categorical(theta_c, 1.0, &mut rng);
            let w = sample_categorical(&phi[z], 1.0, &mut rng);
            let q = sample_categorical(&psi[z], 1.0, &mut rng);
            table.add(&concept_name(c), &item_name(w), 1);
            tokens.push((c, z, w, q));
        }
    }

    let inventory = PropertyInventory::new((0..spec.properties).map(property_name))?;
    let mut norms = Vec::with_capacity(spec.concepts);
    for (c, theta_c) in theta.iter().enumerate() {
        // Analytic property marginal for the concept, sharpened and snapped.
        let mut probs = vec![0.0f64; spec.properties];
        for (psi_z, &theta_cz) in psi.iter().zip(theta_c) {
            for (p, &psi_zq) in probs.iter_mut().zip(psi_z) {
                *p += theta_cz * psi_zq;
            }
        }
        let mut best_q = 0;
        let mut best_marginal = 0.0;
        for (q, p) in probs.iter_mut().enumerate() {
            if *p > best_marginal {
                best_marginal = *p;
                best_q = q;
            }
            *p = snap_to_grid((*p * spec.sharpness).min(1.0), &grid);
        }
        // Every concept must keep at least one applicable property.
        if probs.iter().all(|&p| p == 0.0) {
            probs[best_q] = grid[1];
        }
        norms.push(PropertyNorms::new(concept_name(c), probs)?);
    }

    let vocabulary = table.vocabulary();
    Ok(SynthData {
        inventory,
        norms,
        vocabulary,
        table,
        truth: SynthTruth {
            theta,
            phi,
            psi,
            tokens,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SynthSpec {
        SynthSpec {
            topics: 3,
            concepts: 20,
            items: 15,
            properties: 8,
            tokens_per_concept: 400,
            theta_conc: 0.2,
            phi_conc: 0.3,
            psi_conc: 0.3,
            sharpness: 3.0,
            min_topic_sep: 0.3,
            max_snap_distortion: 2.0,
            seed: 91,
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let spec = small_spec();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthSpec {
            seed: 92,
            ..spec
        })
        .unwrap();
        assert_ne!(a.truth.tokens, c.truth.tokens);
    }

    #[test]
    fn single_topic_gives_shared_norms() {
        let spec = SynthSpec {
            topics: 1,
            concepts: 5,
            items: 6,
            properties: 4,
            tokens_per_concept: 10,
            ..small_spec()
        };
        let data = generate(&spec).unwrap();
        for n in &data.norms[1..] {
            assert_eq!(n.probs(), data.norms[0].probs());
        }
    }

    #[test]
    fn norms_lie_on_quantifier_grid_with_a_positive_entry() {
        let data = generate(&small_spec()).unwrap();
        let grid = QuantifierMap::standard().grid();
        for n in &data.norms {
            assert!(n.probs().iter().all(|p| grid.contains(p)));
            assert!(n.has_positive());
        }
    }

    #[test]
    fn per_concept_token_totals_match_spec() {
        let spec = small_spec();
        let data = generate(&spec).unwrap();
        for c in data.table.concepts() {
            assert_eq!(
                data.table.concept_total(c),
                spec.tokens_per_concept as u64
            );
        }
        assert_eq!(
            data.table.total(),
            (spec.concepts * spec.tokens_per_concept) as u64
        );
    }

    #[test]
    fn item_property_cooccurrence_matches_analytic_marginal() {
        let spec = small_spec();
        let data = generate(&spec).unwrap();
        let n = data.truth.tokens.len() as f64;

        // p(z) is uniform over concepts because every concept emits the same
        // number of tokens.
        let mut pz = vec![0.0f64; spec.topics];
        for theta_c in &data.truth.theta {
            for (p, &t) in pz.iter_mut().zip(theta_c) {
                *p += t / spec.concepts as f64;
            }
        }

        let mut counts = vec![vec![0u32; spec.properties]; spec.items];
        for &(_, _, w, q) in &data.truth.tokens {
            counts[w][q] += 1;
        }
        for (w, row) in counts.iter().enumerate() {
            for (q, &count) in row.iter().enumerate() {
                let expected: f64 = (0..spec.topics)
                    .map(|z| pz[z] * data.truth.phi[z][w] * data.truth.psi[z][q])
                    .sum();
                let observed = count as f64 / n;
                let sigma = (expected * (1.0 - expected) / n).sqrt();
                assert!(
                    (observed - expected).abs() <= 3.0 * sigma + 1e-12,
                    "cell ({w},{q}): {observed} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn two_stage_effective_matches_empirical_sampling() {
        use crate::util::seeded_rng;
        let probs = vec![0.9, 0.3, 0.05, 0.0, 0.6];
        let expected = two_stage_effective(&probs);
        assert!((expected.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(expected[3], 0.0);

        let norms = PropertyNorms::new("c", probs).unwrap();
        let mut rng = seeded_rng(93);
        let draws = 50_000;
        let mut counts = [0u64; 5];
        for _ in 0..draws {
            counts[norms.sample_property(&mut rng).unwrap()] += 1;
        }
        for q in 0..5 {
            let observed = counts[q] as f64 / draws as f64;
            let sigma = (expected[q] * (1.0 - expected[q]) / draws as f64).sqrt();
            assert!(
                (observed - expected[q]).abs() <= 3.0 * sigma + 1e-12,
                "q{q}: {observed} vs {}",
                expected[q]
            );
        }
    }

    #[test]
    fn topic_rows_respect_separation_and_realizability() {
        let spec = SynthSpec::default();
        let data = generate(&spec).unwrap();
        let grid = QuantifierMap::standard().grid();
        for (i, a) in data.truth.psi.iter().enumerate() {
            for b in data.truth.psi.iter().skip(i + 1) {
                let sep: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
                assert!(sep >= spec.min_topic_sep, "psi rows too close: {sep}");
            }
            let snapped: Vec<f64> = a
                .iter()
                .map(|&m| snap_to_grid((m * spec.sharpness).min(1.0), &grid))
                .collect();
            let eff = two_stage_effective(&snapped);
            let distortion: f64 = eff.iter().zip(a).map(|(x, y)| (x - y).abs()).sum();
            assert!(
                distortion <= spec.max_snap_distortion + 1e-9,
                "snap distortion {distortion}"
            );
        }
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        let mut spec = small_spec();
        spec.properties = 1;
        assert!(generate(&spec).is_err());
        let mut spec = small_spec();
        spec.theta_conc = 0.0;
        assert!(generate(&spec).is_err());
    }
}
