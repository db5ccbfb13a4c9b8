//! Bernoulli mixture estimation with EM, and the two clustering
//! constructions: hard item clustering (retrained at the cluster level) and
//! soft concept representations over components.
//!
//! ```bash
//! cargo run --example bernoulli_mixture
//! ```

use proplearn::bernmix::{
    assign_hard, build_count_h2, em_fit, soft_represent, EmConfig, MixtureConfig,
};
use proplearn::count::CountPriors;
use proplearn::data::{Instance, OccurrenceTable, PropertyNorms};
use proplearn::seeded_rng;

fn main() -> proplearn::Result<()> {
    let mut rng = seeded_rng(11);

    // Two planted clusters of binary vectors.
    let gen_a = [0.9, 0.9, 0.9, 0.1, 0.1, 0.1];
    let gen_b = [0.1, 0.1, 0.1, 0.9, 0.9, 0.9];
    let mut samples: Vec<Instance> =
        (0..150).map(|_| Instance::sample(&gen_a, &mut rng)).collect();
    samples.extend((0..150).map(|_| Instance::sample(&gen_b, &mut rng)));

    let fit = em_fit(&samples, 2, &EmConfig::default(), &mut rng)?;
    println!("log-likelihood trace (first/last): {:.1} -> {:.1} over {} iterations",
        fit.trace.first().unwrap(), fit.log_likelihood, fit.trace.len());
    for (k, comp) in fit.mixture.components().iter().enumerate() {
        println!(
            "component {k} (weight {:.2}): {}",
            fit.mixture.weights()[k],
            comp.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>().join(" ")
        );
    }

    // Posterior responsibilities for one ambiguous vector.
    let x = Instance::new(vec![true, true, true, true, false, false]);
    println!(
        "responsibilities for a mixed vector: {:?}",
        fit.mixture
            .responsibilities(&x)
            .iter()
            .map(|r| (r * 100.0).round() / 100.0)
            .collect::<Vec<_>>()
    );

    // Hard assignment sums posteriors over an item's samples.
    let item_samples: Vec<Instance> =
        (0..30).map(|_| Instance::sample(&gen_a, &mut rng)).collect();
    println!(
        "hard assignment of an a-like item: component {}",
        assign_hard(&fit.mixture, &item_samples)?
    );

    // Soft representation: mean posterior per component.
    let rep = soft_represent(&fit.mixture, "some-concept", &item_samples)?;
    println!(
        "soft representation: {:?}",
        rep.comp_probs.iter().map(|r| (r * 100.0).round() / 100.0).collect::<Vec<_>>()
    );

    // The concept-level construction end to end: concepts become multinomials
    // over components, and predictions map back to properties.
    let norms = vec![
        PropertyNorms::new("alligator", vec![0.9, 0.9, 0.9, 0.1, 0.1, 0.1])?,
        PropertyNorms::new("crocodile", vec![0.9, 0.9, 0.8, 0.1, 0.1, 0.2])?,
        PropertyNorms::new("gown", vec![0.1, 0.1, 0.1, 0.9, 0.9, 0.9])?,
    ];
    let mut table = OccurrenceTable::new();
    table.add("alligator", "swim-nsubj", 5);
    table.add("crocodile", "swim-nsubj", 4);
    table.add("gown", "wear-dobj", 6);
    let items: Vec<String> = table.items().map(|(w, _)| w.to_string()).collect();
    let cfg = MixtureConfig {
        k: 2,
        n_samples: 50,
        em: EmConfig::default(),
    };
    let h2 = build_count_h2(&table, &items, &norms, &cfg, &CountPriors::default(), &mut rng)?;
    let (probs, _) = h2.learn_unknown(&[("swim-nsubj", 2)], &mut rng);
    println!(
        "\nconcept-mixture model, unknown word seen with swim-nsubj:\n  {}",
        probs.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>().join(" ")
    );
    Ok(())
}
