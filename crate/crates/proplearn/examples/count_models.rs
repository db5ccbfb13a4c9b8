//! The conjugate count models: training per-item Beta/Dirichlet profiles
//! from co-occurrences, then learning an unknown concept from the contexts
//! it appears with.
//!
//! ```bash
//! cargo run --example count_models
//! ```

use proplearn::count::{
    frequency_baseline, train_count_model, CountMode, CountPriors,
};
use proplearn::data::{OccurrenceTable, PropertyInventory, PropertyNorms};
use proplearn::seeded_rng;

fn main() -> proplearn::Result<()> {
    let inventory = PropertyInventory::new([
        "an_animal",
        "dangerous",
        "clothing",
        "has_sleeves",
        "is_long",
    ])?;
    let norms = vec![
        PropertyNorms::new("alligator", vec![1.0, 0.95, 0.0, 0.0, 0.95])?,
        PropertyNorms::new("crocodile", vec![1.0, 0.95, 0.0, 0.0, 0.95])?,
        PropertyNorms::new("gown", vec![0.0, 0.0, 1.0, 0.35, 0.35])?,
        PropertyNorms::new("robe", vec![0.0, 0.0, 1.0, 0.35, 0.95])?,
    ];
    let mut table = OccurrenceTable::new();
    for c in ["alligator", "crocodile"] {
        table.add(c, "feed-dobj", 6);
        table.add(c, "swim-nsubj", 8);
    }
    for c in ["gown", "robe"] {
        table.add(c, "wear-dobj", 9);
        table.add(c, "undo-dobj", 4);
    }
    table.add("gown", "feed-dobj", 1); // a noisy co-occurrence

    let items: Vec<String> = table.items().map(|(w, _)| w.to_string()).collect();
    let mut rng = seeded_rng(7);

    let independent = train_count_model(
        &table,
        &items,
        &inventory,
        &norms,
        CountMode::Independent,
        &CountPriors::default(),
        &mut rng,
    )?;
    println!("independent-condition profiles (posterior predictive):");
    for item in independent.items() {
        let p = independent.item_predictive(item)?;
        println!(
            "  {item:<12} {}",
            p.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" ")
        );
    }

    // An unknown word seen three times with "wear-dobj" and once with
    // "undo-dobj" should look like clothing.
    let contexts = [("wear-dobj", 3u64), ("undo-dobj", 1u64)];
    let (probs, _) = independent.learn_unknown(&contexts, &mut rng);
    println!("\nunknown word in {contexts:?}:");
    let mut ranked: Vec<(usize, f64)> = probs.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    for (q, p) in ranked {
        println!("  {:<12} {p:.3}", inventory.name(q));
    }

    // The multinomial condition models competing properties instead.
    let multinomial = train_count_model(
        &table,
        &items,
        &inventory,
        &norms,
        CountMode::Multinomial,
        &CountPriors::default(),
        &mut rng,
    )?;
    let (mult_probs, _) = multinomial.learn_unknown(&contexts, &mut rng);
    println!(
        "\nmultinomial condition for the same contexts: {}",
        mult_probs.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" ")
    );

    // The frequency baseline ignores the contexts entirely.
    println!(
        "frequency baseline:                          {}",
        frequency_baseline(&norms)?
            .iter()
            .map(|v| format!("{v:.3}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(())
}
