//! Evaluation: average precision and its graded generalization, seeded
//! cross-validation, the multi-shot and one-shot protocols, context-item
//! informativity measures with Spearman correlation, and per-property-type
//! breakdowns.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::count::CountModel;
use crate::data::{OccurrenceTable, PropertyInventory, PropertyNorms};
use crate::error::{Error, Result};
use crate::predict::Predictor;
use crate::util::seeded_rng;

/// Binary gold: a property counts as applying when its norm probability is
/// positive.
pub fn binarize_gold(norms: &PropertyNorms) -> Vec<bool> {
    norms.probs().iter().map(|&p| p > 0.0).collect()
}

fn ranking(scores: &[f64]) -> Result<Vec<usize>> {
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Invalid("scores contain NaN".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Descending score; ties broken by ascending property index for
    // reproducibility.
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    Ok(order)
}

/// Average precision of `scores` against binary gold.
pub fn average_precision(scores: &[f64], gold: &[bool]) -> Result<f64> {
    if scores.len() != gold.len() {
        return Err(Error::Invalid(format!(
            "scores ({}) and gold ({}) lengths differ",
            scores.len(),
            gold.len()
        )));
    }
    let positives = gold.iter().filter(|&&g| g).count();
    if positives == 0 {
        return Err(Error::Invalid("gold has no positive entries".into()));
    }
    let order = ranking(scores)?;
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank0, &idx) in order.iter().enumerate() {
        if gold[idx] {
            hits += 1;
            sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

/// Generalized average precision over graded gold weights in [0,1].
///
/// With `g_(i)` the weight at rank `i` and `gp@i` the mean weight over the
/// top `i` ranks, `GAP = sum_i 1[g_(i) > 0] * gp@i * g_(i) / sum_i g_i^2`.
/// The normalizer makes GAP collapse to AP exactly on binary weights and
/// yields 1.0 when a single positive weight is ranked first; on graded
/// weights GAP is not capped at 1.
pub fn gap(scores: &[f64], weights: &[f64]) -> Result<f64> {
    if scores.len() != weights.len() {
        return Err(Error::Invalid(format!(
            "scores ({}) and weights ({}) lengths differ",
            scores.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
        return Err(Error::Invalid("gold weights must lie in [0,1]".into()));
    }
    let norm: f64 = weights.iter().map(|&w| w * w).sum();
    if norm == 0.0 {
        return Err(Error::Invalid("gold weights are all zero".into()));
    }
    let order = ranking(scores)?;
    let mut cum = 0.0;
    let mut sum = 0.0;
    for (rank0, &idx) in order.iter().enumerate() {
        let g = weights[idx];
        cum += g;
        if g > 0.0 {
            sum += cum / (rank0 + 1) as f64 * g;
        }
    }
    Ok(sum / norm)
}

/// One train/test split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Deterministic seeded k-fold split. Test sets partition the concepts and
/// their sizes differ by at most one.
pub fn cross_validate(concepts: &[String], folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::Invalid("need at least 2 folds".into()));
    }
    if folds > concepts.len() {
        return Err(Error::Invalid(format!(
            "cannot split {} concepts into {folds} folds",
            concepts.len()
        )));
    }
    let mut shuffled = concepts.to_vec();
    shuffled.sort();
    shuffled.dedup();
    if shuffled.len() != concepts.len() {
        return Err(Error::Invalid("concept list contains duplicates".into()));
    }
    let mut rng = seeded_rng(seed);
    shuffled.shuffle(&mut rng);

    let n = shuffled.len();
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        let test: Vec<String> = shuffled[start..start + size].to_vec();
        let train: Vec<String> = shuffled[..start]
            .iter()
            .chain(&shuffled[start + size..])
            .cloned()
            .collect();
        out.push(Fold { train, test });
        start += size;
    }
    Ok(out)
}

/// A concept's predicted scores next to its gold labels, kept for
/// per-property-type breakdowns.
#[derive(Debug, Clone)]
pub struct ScoredCase {
    pub concept: String,
    pub scores: Vec<f64>,
    pub gold: Vec<bool>,
}

/// Multi-shot evaluation summary.
#[derive(Debug, Clone, Default)]
pub struct MultiShotEval {
    pub map: f64,
    pub gap: f64,
    pub per_concept_ap: Vec<(String, f64)>,
    pub evaluated: usize,
    /// Test concepts with no corpus contexts at all.
    pub skipped_no_contexts: usize,
    /// Test concepts whose gold has no positive property.
    pub skipped_no_gold: usize,
    /// Context occurrences the model had no estimate for.
    pub skipped_occurrences: u64,
    pub scored: Vec<ScoredCase>,
}

/// Predicts each test concept from all of its corpus contexts and averages
/// the per-concept AP (and GAP over the graded norms).
pub fn eval_multishot(
    model: &dyn Predictor,
    test_norms: &[PropertyNorms],
    table: &OccurrenceTable,
    keep_scores: bool,
    rng: &mut dyn RngCore,
) -> Result<MultiShotEval> {
    let mut out = MultiShotEval::default();
    let mut aps = Vec::new();
    let mut gaps = Vec::new();
    for norms in test_norms {
        let gold = binarize_gold(norms);
        if !gold.iter().any(|&g| g) {
            out.skipped_no_gold += 1;
            continue;
        }
        let contexts: Vec<(&str, u64)> = table.contexts_of(norms.concept()).collect();
        if contexts.is_empty() {
            out.skipped_no_contexts += 1;
            continue;
        }
        let (scores, skipped) = model.predict_contexts(&contexts, rng)?;
        out.skipped_occurrences += skipped;
        let ap = average_precision(&scores, &gold)?;
        gaps.push(gap(&scores, norms.probs())?);
        aps.push(ap);
        out.per_concept_ap.push((norms.concept().to_string(), ap));
        if keep_scores {
            out.scored.push(ScoredCase {
                concept: norms.concept().to_string(),
                scores,
                gold,
            });
        }
    }
    if aps.is_empty() {
        return Err(Error::Invalid(
            "no test concept was evaluable (missing contexts or empty gold)".into(),
        ));
    }
    out.evaluated = aps.len();
    out.map = aps.iter().sum::<f64>() / aps.len() as f64;
    out.gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    Ok(out)
}

/// One one-shot prediction record: a single (concept, context occurrence)
/// pair with its AP and the context item's informativity measures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OneShotRecord {
    pub concept: String,
    pub item: String,
    pub ap: f64,
    /// Corpus frequency of the context item.
    pub freq: u64,
    pub entropy: Option<f64>,
    pub avgcos: Option<f64>,
    #[serde(skip)]
    pub scores: Option<Vec<f64>>,
}

/// One-shot evaluation summary. `records` holds one entry per context
/// occurrence (duplicated occurrences of the same item share one prediction,
/// so their APs are identical by construction).
#[derive(Debug, Clone, Default)]
pub struct OneShotEval {
    pub map_all: f64,
    pub records: Vec<OneShotRecord>,
    pub skipped_low_freq: u64,
    pub skipped_oov: u64,
    pub skipped_no_gold: usize,
}

/// Evaluates one prediction per occurrence of each test concept, using only
/// that occurrence's context item. Items with corpus frequency below
/// `min_ctx_freq` and items unknown to the model are excluded.
pub fn eval_oneshot(
    model: &dyn Predictor,
    test_norms: &[PropertyNorms],
    table: &OccurrenceTable,
    min_ctx_freq: u64,
    scorer: Option<&InformativityScorer<'_>>,
    keep_scores: bool,
    rng: &mut dyn RngCore,
) -> Result<OneShotEval> {
    let mut out = OneShotEval::default();
    for norms in test_norms {
        let gold = binarize_gold(norms);
        if !gold.iter().any(|&g| g) {
            out.skipped_no_gold += 1;
            continue;
        }
        for (item, n) in table.contexts_of(norms.concept()) {
            if table.item_total(item) < min_ctx_freq {
                out.skipped_low_freq += n;
                continue;
            }
            if !model.knows_item(item) {
                out.skipped_oov += n;
                continue;
            }
            let (scores, _) = model.predict_single(item, rng)?;
            let ap = average_precision(&scores, &gold)?;
            let (entropy, avgcos) = match scorer {
                Some(s) => {
                    let inf = s.score(item)?;
                    (Some(inf.entropy), Some(inf.avgcos))
                }
                None => (None, None),
            };
            let record = OneShotRecord {
                concept: norms.concept().to_string(),
                item: item.to_string(),
                ap,
                freq: table.item_total(item),
                entropy,
                avgcos,
                scores: keep_scores.then(|| scores.clone()),
            };
            for _ in 0..n {
                out.records.push(record.clone());
            }
        }
    }
    if !out.records.is_empty() {
        out.map_all =
            out.records.iter().map(|r| r.ap).sum::<f64>() / out.records.len() as f64;
    }
    Ok(out)
}

/// Mean AP over each concept's `k` records with the highest value of `key`,
/// averaged across concepts.
pub fn topk_mean_by<F>(records: &[OneShotRecord], k: usize, key: F) -> Result<f64>
where
    F: Fn(&OneShotRecord) -> f64,
{
    if records.is_empty() {
        return Err(Error::Invalid("no records to rank".into()));
    }
    if k == 0 {
        return Err(Error::Invalid("k must be >= 1".into()));
    }
    let mut by_concept: BTreeMap<&str, Vec<&OneShotRecord>> = BTreeMap::new();
    for r in records {
        by_concept.entry(&r.concept).or_default().push(r);
    }
    let mut concept_means = Vec::with_capacity(by_concept.len());
    for (_, mut rs) in by_concept {
        rs.sort_by(|a, b| key(b).partial_cmp(&key(a)).unwrap_or(std::cmp::Ordering::Equal));
        let top = &rs[..k.min(rs.len())];
        concept_means.push(top.iter().map(|r| r.ap).sum::<f64>() / top.len() as f64);
    }
    Ok(concept_means.iter().sum::<f64>() / concept_means.len() as f64)
}

/// Mean of each concept's `k` highest AP values, averaged across concepts.
pub fn oracle_topk(records: &[OneShotRecord], k: usize) -> Result<f64> {
    topk_mean_by(records, k, |r| r.ap)
}

/// Informativity measures for one context item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Informativity {
    /// Corpus frequency of the item.
    pub freq: u64,
    /// Shannon entropy (natural log) of the item's normalized property
    /// distribution under the independent count model.
    pub entropy: f64,
    /// Mean pairwise cosine of the norm vectors of the known concepts the
    /// item was observed with; defined as 1.0 when only one concept was seen.
    pub avgcos: f64,
    /// True when `avgcos` came from fewer than two concepts.
    pub single_concept: bool,
}

/// Computes informativity measures from a trained independent count model,
/// the full corpus table (for frequencies) and the training-fold
/// co-occurrences (for which known concepts an item was seen with).
pub struct InformativityScorer<'a> {
    count_ind: &'a CountModel,
    corpus: &'a OccurrenceTable,
    known_norms: BTreeMap<&'a str, &'a PropertyNorms>,
    observers: BTreeMap<&'a str, Vec<&'a str>>,
}

impl<'a> InformativityScorer<'a> {
    pub fn new(
        count_ind: &'a CountModel,
        corpus: &'a OccurrenceTable,
        train_table: &'a OccurrenceTable,
        train_norms: &'a [PropertyNorms],
    ) -> Self {
        let known_norms: BTreeMap<&str, &PropertyNorms> =
            train_norms.iter().map(|n| (n.concept(), n)).collect();
        let mut observers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (concept, item, _) in train_table.entries() {
            if known_norms.contains_key(concept) {
                observers.entry(item).or_default().push(concept);
            }
        }
        InformativityScorer {
            count_ind,
            corpus,
            known_norms,
            observers,
        }
    }

    pub fn score(&self, item: &str) -> Result<Informativity> {
        let freq = self.corpus.item_total(item);
        if freq == 0 {
            return Err(Error::UnknownItem(item.to_string()));
        }
        let mut dist = self.count_ind.item_predictive(item)?;
        let total: f64 = dist.iter().sum();
        if total <= 0.0 {
            return Err(Error::Invalid(format!(
                "item `{item}` has an all-zero property distribution"
            )));
        }
        for d in dist.iter_mut() {
            *d /= total;
        }
        let entropy = -dist
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>();

        let concepts = self.observers.get(item).map_or(&[][..], Vec::as_slice);
        let (avgcos, single_concept) = if concepts.len() < 2 {
            (1.0, true)
        } else {
            let mut sum = 0.0;
            let mut pairs = 0usize;
            for i in 0..concepts.len() {
                for j in i + 1..concepts.len() {
                    let a = self.known_norms[concepts[i]].probs();
                    let b = self.known_norms[concepts[j]].probs();
                    sum += cosine(a, b);
                    pairs += 1;
                }
            }
            (sum / pairs as f64, false)
        };
        Ok(Informativity {
            freq,
            entropy,
            avgcos,
            single_concept,
        })
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // 1-based ranks, averaged over the tied run.
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average-rank tie handling; the p-value is
/// the usual two-sided t approximation on n - 2 degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::Invalid("series lengths differ".into()));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Invalid("need at least 3 observations".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Invalid("series contain NaN".into()));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let mx = rx.iter().sum::<f64>() / n as f64;
    let my = ry.iter().sum::<f64>() / n as f64;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for i in 0..n {
        let a = rx[i] - mx;
        let b = ry[i] - my;
        num += a * b;
        dx += a * a;
        dy += b * b;
    }
    if dx == 0.0 || dy == 0.0 {
        return Err(Error::Invalid("constant series have no rank correlation".into()));
    }
    let rho = (num / (dx * dy).sqrt()).clamp(-1.0, 1.0);
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df)
            .map_err(|e| Error::Invalid(format!("t distribution: {e}")))?;
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Ok((rho, p))
}

/// Property-to-group mapping for type breakdowns.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeMap {
    by_property: BTreeMap<String, String>,
}

impl TypeMap {
    pub fn new(by_property: BTreeMap<String, String>) -> Self {
        TypeMap { by_property }
    }

    /// Group label per inventory position; properties without an entry fall
    /// into "other".
    pub fn group_vector(&self, inventory: &PropertyInventory) -> Vec<String> {
        inventory
            .iter()
            .map(|p| {
                self.by_property
                    .get(p)
                    .cloned()
                    .unwrap_or_else(|| "other".to_string())
            })
            .collect()
    }
}

/// Reads a `property<TAB>group` file.
pub fn read_type_map(path: impl AsRef<Path>) -> Result<TypeMap> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = BufReader::new(File::open(path)?);
    let mut by_property = BTreeMap::new();
    for (lineno, line) in file.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                &display,
                lineno + 1,
                format!("expected 2 tab-separated fields, got {}", fields.len()),
            ));
        }
        by_property.insert(fields[0].trim().to_string(), fields[1].trim().to_string());
    }
    Ok(TypeMap::new(by_property))
}

/// MAP per property group: each case's scores and gold are restricted to the
/// group's properties, and cases whose restriction has no positive gold are
/// skipped. Groups evaluable in no case are absent from the output.
pub fn map_by_type(
    cases: &[ScoredCase],
    groups: &[String],
) -> Result<BTreeMap<String, f64>> {
    let mut distinct: Vec<&String> = groups.iter().collect();
    distinct.sort();
    distinct.dedup();

    let mut out = BTreeMap::new();
    for group in distinct {
        let idx: Vec<usize> = groups
            .iter()
            .enumerate()
            .filter_map(|(i, g)| (g == group).then_some(i))
            .collect();
        let mut aps = Vec::new();
        for case in cases {
            if case.scores.len() != groups.len() || case.gold.len() != groups.len() {
                return Err(Error::Invalid(
                    "case length does not match the group vector".into(),
                ));
            }
            let sub_scores: Vec<f64> = idx.iter().map(|&i| case.scores[i]).collect();
            let sub_gold: Vec<bool> = idx.iter().map(|&i| case.gold[i]).collect();
            if sub_gold.iter().any(|&g| g) {
                aps.push(average_precision(&sub_scores, &sub_gold)?);
            }
        }
        if !aps.is_empty() {
            out.insert(group.clone(), aps.iter().sum::<f64>() / aps.len() as f64);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::count::{BaselineModel, BetaProfile, CountPriors};
    use crate::util::seeded_rng;
    use rand::Rng;

    // Independent O(n^2) AP reference: for each positive, count how many
    // items rank at or above it by direct pairwise comparison.
    fn ap_reference(scores: &[f64], gold: &[bool]) -> f64 {
        let positives = gold.iter().filter(|&&g| g).count() as f64;
        let mut total = 0.0;
        for i in 0..scores.len() {
            if !gold[i] {
                continue;
            }
            let mut rank = 0usize;
            let mut hits = 0usize;
            for j in 0..scores.len() {
                let ahead = scores[j] > scores[i] || (scores[j] == scores[i] && j <= i);
                if ahead {
                    rank += 1;
                    if gold[j] {
                        hits += 1;
                    }
                }
            }
            total += hits as f64 / rank as f64;
        }
        total / positives
    }

    #[test]
    fn ap_trivial_cases() {
        assert_eq!(
            average_precision(&[0.2, 0.9, 0.5], &[true, true, true]).unwrap(),
            1.0
        );
        // Ranked gold sequence [1, 0, 1]: (1 + 2/3) / 2.
        let ap = average_precision(&[0.9, 0.5, 0.1], &[true, false, true]).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
        assert!(average_precision(&[0.1], &[false]).is_err());
        assert!(average_precision(&[0.1, 0.2], &[true]).is_err());
    }

    #[test]
    fn ap_is_one_iff_positives_outrank_negatives() {
        let ap = average_precision(&[0.9, 0.8, 0.3, 0.2], &[true, true, false, false]).unwrap();
        assert_eq!(ap, 1.0);
        let ap = average_precision(&[0.9, 0.8, 0.3, 0.2], &[true, false, true, false]).unwrap();
        assert!(ap < 1.0);
    }

    #[test]
    fn ap_matches_quadratic_reference() {
        let mut rng = seeded_rng(81);
        for _ in 0..300 {
            let n = rng.random_range(1..60usize);
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.random::<f64>() * 8.0).round() / 8.0)
                .collect();
            let mut gold: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.4).collect();
            if !gold.iter().any(|&g| g) {
                gold[0] = true;
            }
            let fast = average_precision(&scores, &gold).unwrap();
            let slow = ap_reference(&scores, &gold);
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn ap_invariant_under_monotone_transforms() {
        let mut rng = seeded_rng(82);
        for _ in 0..50 {
            let n = rng.random_range(2..30usize);
            let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let mut gold: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.5).collect();
            if !gold.iter().any(|&g| g) {
                gold[0] = true;
            }
            let base = average_precision(&scores, &gold).unwrap();
            let squashed: Vec<f64> = scores.iter().map(|&s| (3.0 * s + 1.0).tanh()).collect();
            assert_eq!(base, average_precision(&squashed, &gold).unwrap());
        }
    }

    #[test]
    fn gap_degenerates_to_ap_on_binary_weights() {
        let mut rng = seeded_rng(83);
        for _ in 0..200 {
            let n = rng.random_range(1..40usize);
            let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let mut gold: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.4).collect();
            if !gold.iter().any(|&g| g) {
                gold[0] = true;
            }
            let weights: Vec<f64> = gold.iter().map(|&g| if g { 1.0 } else { 0.0 }).collect();
            let g = gap(&scores, &weights).unwrap();
            let a = average_precision(&scores, &gold).unwrap();
            assert!((g - a).abs() < 1e-12, "{g} vs {a}");
        }
    }

    #[test]
    fn gap_single_positive_ranked_first() {
        let g = gap(&[0.9, 0.1, 0.2], &[0.35, 0.0, 0.0]).unwrap();
        assert!((g - 1.0).abs() < 1e-12);
        assert!(gap(&[0.9], &[0.0]).is_err());
    }

    #[test]
    fn gap_graded_fixture() {
        // Hand-computed: weights [0.95, 0.05, 0, 0.35], scores rank them as
        // [0.05, 0.35, 0, 0.95]; numerator 0.393125, normalizer 1.0275.
        let g = gap(&[0.2, 0.9, 0.5, 0.7], &[0.95, 0.05, 0.0, 0.35]).unwrap();
        assert!((g - 0.382603406326034).abs() < 1e-12, "{g}");
    }

    #[test]
    fn cross_validation_partitions() {
        let concepts: Vec<String> = (0..10).map(|i| format!("c{i}")).collect();
        let folds = cross_validate(&concepts, 5, 7).unwrap();
        assert_eq!(folds.len(), 5);
        let mut all_test: Vec<String> = Vec::new();
        for f in &folds {
            assert_eq!(f.test.len(), 2);
            assert_eq!(f.train.len(), 8);
            for t in &f.test {
                assert!(!f.train.contains(t));
            }
            all_test.extend(f.test.clone());
        }
        all_test.sort();
        let mut expected = concepts.clone();
        expected.sort();
        assert_eq!(all_test, expected);

        // Leave-one-out.
        let loo = cross_validate(&concepts, 10, 7).unwrap();
        assert!(loo.iter().all(|f| f.test.len() == 1));

        // Determinism.
        assert_eq!(folds, cross_validate(&concepts, 5, 7).unwrap());
        assert_ne!(folds, cross_validate(&concepts, 5, 8).unwrap());

        assert!(cross_validate(&concepts, 1, 7).is_err());
        assert!(cross_validate(&concepts, 11, 7).is_err());
    }

    #[test]
    fn multishot_perfect_predictor_scores_one() {
        struct Perfect(Vec<f64>);
        impl Predictor for Perfect {
            fn n_outputs(&self) -> usize {
                self.0.len()
            }
            fn knows_item(&self, _item: &str) -> bool {
                true
            }
            fn predict_contexts(
                &self,
                _c: &[(&str, u64)],
                _rng: &mut dyn RngCore,
            ) -> Result<(Vec<f64>, u64)> {
                Ok((self.0.clone(), 0))
            }
            fn predict_single(
                &self,
                _item: &str,
                _rng: &mut dyn RngCore,
            ) -> Result<(Vec<f64>, u64)> {
                Ok((self.0.clone(), 0))
            }
        }
        let norms = vec![PropertyNorms::new("c", vec![0.95, 0.0, 0.35]).unwrap()];
        let mut table = OccurrenceTable::new();
        table.add("c", "w", 2);
        let model = Perfect(vec![0.95, 0.0, 0.35]);
        let mut rng = seeded_rng(84);
        let eval = eval_multishot(&model, &norms, &table, false, &mut rng).unwrap();
        assert_eq!(eval.map, 1.0);
        assert_eq!(eval.evaluated, 1);
    }

    #[test]
    fn multishot_baseline_matches_hand_oracle() {
        // Skewed gold: the baseline ranks by global frequency, so concepts
        // whose properties are the common ones get perfect AP.
        let train = vec![
            PropertyNorms::new("t1", vec![1.0, 1.0, 0.0]).unwrap(),
            PropertyNorms::new("t2", vec![1.0, 0.0, 0.0]).unwrap(),
        ];
        // Baseline scores: [1.0, 0.5, 0.0].
        let test = vec![
            PropertyNorms::new("u1", vec![0.95, 0.0, 0.0]).unwrap(),
            PropertyNorms::new("u2", vec![0.0, 0.0, 0.35]).unwrap(),
        ];
        let mut table = OccurrenceTable::new();
        table.add("u1", "w", 1);
        table.add("u2", "w", 1);
        let model = BaselineModel::fit(&train).unwrap();
        let mut rng = seeded_rng(85);
        let eval = eval_multishot(&model, &test, &table, false, &mut rng).unwrap();
        // u1: positive ranked first, AP 1. u2: positive ranked last, AP 1/3.
        assert!((eval.map - (1.0 + 1.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn multishot_skips_unevaluable_concepts() {
        let test = vec![
            PropertyNorms::new("has_ctx", vec![1.0, 0.0]).unwrap(),
            PropertyNorms::new("no_ctx", vec![1.0, 0.0]).unwrap(),
            PropertyNorms::new("no_gold", vec![0.0, 0.0]).unwrap(),
        ];
        let mut table = OccurrenceTable::new();
        table.add("has_ctx", "w", 1);
        table.add("no_gold", "w", 1);
        let model = BaselineModel::from_probs(vec![0.6, 0.4]);
        let mut rng = seeded_rng(86);
        let eval = eval_multishot(&model, &test, &table, false, &mut rng).unwrap();
        assert_eq!(eval.evaluated, 1);
        assert_eq!(eval.skipped_no_contexts, 1);
        assert_eq!(eval.skipped_no_gold, 1);
    }

    fn fixed_count_model() -> CountModel {
        let items = vec!["wa".to_string(), "wb".to_string()];
        let profiles = vec![
            BetaProfile::from_parts(vec![9.0, 1.0], vec![1.0, 9.0]).unwrap(),
            BetaProfile::from_parts(vec![1.0, 9.0], vec![9.0, 1.0]).unwrap(),
        ];
        CountModel::from_beta_profiles(items, profiles, CountPriors::default()).unwrap()
    }

    #[test]
    fn oneshot_counts_each_occurrence() {
        let model = BaselineModel::from_probs(vec![0.9, 0.1]);
        let norms = vec![PropertyNorms::new("u", vec![0.95, 0.0]).unwrap()];
        let mut table = OccurrenceTable::new();
        table.add("u", "wa", 3);
        table.add("u", "wb", 1);
        let mut rng = seeded_rng(87);
        let eval = eval_oneshot(&model, &norms, &table, 1, None, false, &mut rng).unwrap();
        assert_eq!(eval.records.len(), 4);
        // Duplicate occurrences share one prediction, hence identical APs.
        let first: Vec<&OneShotRecord> =
            eval.records.iter().filter(|r| r.item == "wa").collect();
        assert_eq!(first.len(), 3);
        assert!(first.windows(2).all(|w| w[0].ap == w[1].ap));
        assert_eq!(eval.map_all, 1.0);
    }

    #[test]
    fn oneshot_applies_frequency_threshold_and_oov() {
        let model = fixed_count_model();
        let norms = vec![PropertyNorms::new("u", vec![0.95, 0.0]).unwrap()];
        let mut table = OccurrenceTable::new();
        table.add("u", "wa", 5); // frequent, known
        table.add("u", "rare", 2); // below threshold
        table.add("u", "novel", 7); // frequent but unknown to the model
        let mut rng = seeded_rng(88);
        let eval = eval_oneshot(&model, &norms, &table, 5, None, false, &mut rng).unwrap();
        assert_eq!(eval.records.len(), 5);
        assert_eq!(eval.skipped_low_freq, 2);
        assert_eq!(eval.skipped_oov, 7);
    }

    #[test]
    fn oneshot_matches_loopfree_recomputation() {
        let model = fixed_count_model();
        let norms = vec![
            PropertyNorms::new("u1", vec![0.95, 0.0]).unwrap(),
            PropertyNorms::new("u2", vec![0.0, 0.35]).unwrap(),
        ];
        let mut table = OccurrenceTable::new();
        table.add("u1", "wa", 2);
        table.add("u1", "wb", 1);
        table.add("u2", "wb", 3);
        let mut rng = seeded_rng(89);
        let eval = eval_oneshot(&model, &norms, &table, 1, None, false, &mut rng).unwrap();
        // Weighted mean over occurrences, computed independently.
        let mut rng2 = seeded_rng(89);
        let mut expected = Vec::new();
        for n in &norms {
            let gold = binarize_gold(n);
            for (item, count) in table.contexts_of(n.concept()) {
                let (scores, _) = model.predict_single(item, &mut rng2).unwrap();
                let ap = average_precision(&scores, &gold).unwrap();
                for _ in 0..count {
                    expected.push(ap);
                }
            }
        }
        let expected_map = expected.iter().sum::<f64>() / expected.len() as f64;
        assert_eq!(eval.records.len(), expected.len());
        assert!((eval.map_all - expected_map).abs() < 1e-12);
    }

    fn record(concept: &str, ap: f64, avgcos: f64) -> OneShotRecord {
        OneShotRecord {
            concept: concept.to_string(),
            item: format!("i{ap}"),
            ap,
            freq: 1,
            entropy: Some(0.0),
            avgcos: Some(avgcos),
            scores: None,
        }
    }

    #[test]
    fn topk_selection_rules() {
        let records = vec![
            record("a", 0.9, 0.1),
            record("a", 0.5, 0.9),
            record("a", 0.1, 0.5),
            record("b", 0.4, 0.2),
        ];
        // k covers everything: per-concept plain means.
        let all = oracle_topk(&records, 10).unwrap();
        assert!((all - ((0.9 + 0.5 + 0.1) / 3.0 + 0.4) / 2.0).abs() < 1e-12);
        // k = 1: max AP per concept.
        let top1 = oracle_topk(&records, 1).unwrap();
        assert!((top1 - (0.9 + 0.4) / 2.0).abs() < 1e-12);
        // Random slice matches a sort-and-slice oracle.
        let top2 = oracle_topk(&records, 2).unwrap();
        assert!((top2 - ((0.9 + 0.5) / 2.0 + 0.4) / 2.0).abs() < 1e-12);
        // Ranking by avgcos instead selects different records.
        let by_cos = topk_mean_by(&records, 1, |r| r.avgcos.unwrap()).unwrap();
        assert!((by_cos - (0.5 + 0.4) / 2.0).abs() < 1e-12);
        assert!(oracle_topk(&[], 5).is_err());
    }

    #[test]
    fn informativity_measures() {
        let count_ind = fixed_count_model();
        let train_norms = vec![
            PropertyNorms::new("c1", vec![1.0, 0.0]).unwrap(),
            PropertyNorms::new("c2", vec![1.0, 0.0]).unwrap(),
            PropertyNorms::new("c3", vec![0.0, 1.0]).unwrap(),
        ];
        let mut table = OccurrenceTable::new();
        table.add("c1", "wa", 4);
        table.add("c2", "wa", 1);
        table.add("c1", "wb", 2);
        table.add("c3", "wb", 2);
        table.add("c2", "wc", 3);
        // "wc" is not in the count model, but frequency still works; entropy
        // errors, so score() errors.
        let scorer = InformativityScorer::new(&count_ind, &table, &table, &train_norms);

        // wa: two observers with identical vectors -> avgcos 1.0.
        let inf = scorer.score("wa").unwrap();
        assert_eq!(inf.freq, 5);
        assert!(!inf.single_concept);
        assert!((inf.avgcos - 1.0).abs() < 1e-12);

        // wb: orthogonal observers -> avgcos 0.0.
        let inf = scorer.score("wb").unwrap();
        assert!((inf.avgcos - 0.0).abs() < 1e-12);

        assert!(scorer.score("wc").is_err());
        assert!(scorer.score("unseen").is_err());
    }

    #[test]
    fn entropy_of_uniform_distribution() {
        let items = vec!["w".to_string()];
        let profiles = vec![BetaProfile::from_parts(vec![3.0, 3.0], vec![3.0, 3.0]).unwrap()];
        let count_ind =
            CountModel::from_beta_profiles(items, profiles, CountPriors::default()).unwrap();
        let norms = vec![PropertyNorms::new("c", vec![1.0, 1.0]).unwrap()];
        let mut table = OccurrenceTable::new();
        table.add("c", "w", 1);
        let scorer = InformativityScorer::new(&count_ind, &table, &table, &norms);
        let inf = scorer.score("w").unwrap();
        assert!((inf.entropy - (2.0f64).ln()).abs() < 1e-12);
        assert!(inf.single_concept);
        assert_eq!(inf.avgcos, 1.0);
    }

    #[test]
    fn spearman_perfect_and_inverse() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let (rho, p) = spearman(&x, &x).unwrap();
        assert_eq!(rho, 1.0);
        assert_eq!(p, 0.0);
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        let (rho, _) = spearman(&x, &y).unwrap();
        assert_eq!(rho, -1.0);
    }

    #[test]
    fn spearman_matches_reference_with_ties() {
        // Frozen from an independent statistical reference computation.
        let x = [1.0, 2.0, 2.0, 3.0, 5.0, 4.0, 4.0, 4.0];
        let y = [2.1, 0.5, 0.5, 3.0, 4.0, 3.0, 2.5, 6.0];
        let (rho, p) = spearman(&x, &y).unwrap();
        assert!((rho - 0.782744595365922).abs() < 1e-6, "rho {rho}");
        assert!((p - 0.021640408272445).abs() < 1e-6, "p {p}");

        let x2 = [3.0, 1.0, 4.0, 1.5, 9.0, 2.6];
        let y2 = [2.0, 0.5, 5.0, 1.0, 7.5, 2.2];
        let (rho2, p2) = spearman(&x2, &y2).unwrap();
        assert!((rho2 - 0.942857142857143).abs() < 1e-6);
        assert!((p2 - 0.004804664723032).abs() < 1e-6);
    }

    #[test]
    fn spearman_is_symmetric() {
        let x = [0.3, 0.8, 0.1, 0.9, 0.4];
        let y = [1.0, 0.2, 0.5, 0.7, 0.7];
        let (a, pa) = spearman(&x, &y).unwrap();
        let (b, pb) = spearman(&y, &x).unwrap();
        assert_eq!(a, b);
        assert_eq!(pa, pb);
        assert!(spearman(&x[..2], &y[..2]).is_err());
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn type_breakdown_restricts_gold_and_scores() {
        let groups: Vec<String> = ["visual", "visual", "function", "function"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let cases = vec![
            ScoredCase {
                concept: "c1".to_string(),
                scores: vec![0.9, 0.1, 0.8, 0.2],
                gold: vec![true, false, false, true],
            },
            ScoredCase {
                concept: "c2".to_string(),
                scores: vec![0.3, 0.7, 0.6, 0.4],
                gold: vec![false, true, false, false],
            },
        ];
        let by_type = map_by_type(&cases, &groups).unwrap();
        // visual: c1 restricted scores [0.9, 0.1], gold [1, 0] -> AP 1;
        //         c2 restricted scores [0.3, 0.7], gold [0, 1] -> AP 1.
        assert_eq!(by_type["visual"], 1.0);
        // function: only c1 has positive restricted gold; scores [0.8, 0.2],
        // gold [0, 1] -> AP 1/2.
        assert!((by_type["function"] - 0.5).abs() < 1e-12);

        // Single group covering everything equals the overall MAP.
        let one_group: Vec<String> = vec!["all".to_string(); 4];
        let by_one = map_by_type(&cases, &one_group).unwrap();
        let overall = (average_precision(&cases[0].scores, &cases[0].gold).unwrap()
            + average_precision(&cases[1].scores, &cases[1].gold).unwrap())
            / 2.0;
        assert!((by_one["all"] - overall).abs() < 1e-12);

        // A group with no positive gold anywhere is absent.
        let cases_no_pos = vec![ScoredCase {
            concept: "c".to_string(),
            scores: vec![0.5, 0.5, 0.5, 0.5],
            gold: vec![true, true, false, false],
        }];
        let by_type = map_by_type(&cases_no_pos, &groups).unwrap();
        assert!(by_type.contains_key("visual"));
        assert!(!by_type.contains_key("function"));
    }

    #[test]
    fn map_decomposes_as_weighted_mean() {
        let mut rng = seeded_rng(90);
        let all: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
        let (a, b) = all.split_at(12);
        let map_all = all.iter().sum::<f64>() / all.len() as f64;
        let map_a = a.iter().sum::<f64>() / a.len() as f64;
        let map_b = b.iter().sum::<f64>() / b.len() as f64;
        let weighted = (map_a * a.len() as f64 + map_b * b.len() as f64) / all.len() as f64;
        assert!((map_all - weighted).abs() < 1e-12);
    }
}
