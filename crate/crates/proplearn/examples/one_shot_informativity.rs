//! One-shot evaluation and context-item informativity: every occurrence of a
//! held-out concept yields one prediction from that context alone, and the
//! frequency / entropy / average-cosine measures are correlated with the
//! per-occurrence AP.
//!
//! ```bash
//! cargo run --example one_shot_informativity
//! ```

use std::collections::BTreeSet;

use proplearn::bitm::{build_pseudo_corpus, gibbs_train, GibbsConfig, TopicHyper};
use proplearn::count::{train_count_model, CountMode, CountPriors};
use proplearn::eval::{
    cross_validate, eval_oneshot, oracle_topk, spearman, topk_mean_by, InformativityScorer,
};
use proplearn::seeded_rng;
use proplearn::synth::{generate, SynthSpec};

fn main() -> proplearn::Result<()> {
    let spec = SynthSpec {
        concepts: 30,
        items: 40,
        properties: 16,
        tokens_per_concept: 100,
        topics: 4,
        seed: 31,
        ..SynthSpec::default()
    };
    let data = generate(&spec)?;

    // Hold out one fold of concepts.
    let concepts: Vec<String> = data.norms.iter().map(|n| n.concept().to_string()).collect();
    let folds = cross_validate(&concepts, 5, 31)?;
    let train_set: BTreeSet<String> = folds[0].train.iter().cloned().collect();
    let train_table = data.table.restrict_concepts(&train_set);
    let train_norms: Vec<_> = data
        .norms
        .iter()
        .filter(|n| train_set.contains(n.concept()))
        .cloned()
        .collect();
    let test_norms: Vec<_> = data
        .norms
        .iter()
        .filter(|n| !train_set.contains(n.concept()))
        .cloned()
        .collect();

    let mut rng = seeded_rng(32);
    let corpus = build_pseudo_corpus(&train_table, &data.inventory, &train_norms, &mut rng)?;
    let model = gibbs_train(
        &corpus,
        &GibbsConfig {
            topics: 4,
            burn_in: 200,
            post_samples: 10,
            hyper: TopicHyper::default(),
        },
        &mut rng,
    )?;

    // Informativity needs an independent-condition count model for entropy.
    let items: Vec<String> = train_table.items().map(|(w, _)| w.to_string()).collect();
    let count_ind = train_count_model(
        &train_table,
        &items,
        &data.inventory,
        &train_norms,
        CountMode::Independent,
        &CountPriors::default(),
        &mut rng,
    )?;
    let scorer = InformativityScorer::new(&count_ind, &data.table, &train_table, &train_norms);

    let eval = eval_oneshot(&model, &test_norms, &data.table, 5, Some(&scorer), false, &mut rng)?;
    println!(
        "{} one-shot records over {} held-out concepts",
        eval.records.len(),
        test_norms.len()
    );
    println!("MAP over all occurrences: {:.3}", eval.map_all);
    println!("oracle top-20:            {:.3}", oracle_topk(&eval.records, 20)?);
    println!(
        "avgcos-selected top-20:   {:.3}",
        topk_mean_by(&eval.records, 20, |r| r.avgcos.unwrap())?
    );

    let ap: Vec<f64> = eval.records.iter().map(|r| r.ap).collect();
    let freq: Vec<f64> = eval.records.iter().map(|r| r.freq as f64).collect();
    let entropy: Vec<f64> = eval.records.iter().map(|r| r.entropy.unwrap()).collect();
    let avgcos: Vec<f64> = eval.records.iter().map(|r| r.avgcos.unwrap()).collect();
    println!("\ninformativity correlations with AP (Spearman rho, p):");
    for (name, xs) in [("freq", freq), ("entropy", entropy), ("avgcos", avgcos)] {
        match spearman(&xs, &ap) {
            Ok((rho, p)) => println!("  {name:<8} rho {rho:+.3}  p {p:.4}"),
            Err(e) => println!("  {name:<8} n/a ({e})"),
        }
    }
    Ok(())
}
