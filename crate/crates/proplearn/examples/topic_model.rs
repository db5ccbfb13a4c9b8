//! The bimodal topic model: pseudo-document construction, collapsed Gibbs
//! training, fold-in inference for an unknown concept, and one-shot
//! prediction from a single context item.
//!
//! ```bash
//! cargo run --example topic_model
//! ```

use proplearn::bitm::{build_pseudo_corpus, gibbs_train, FoldInConfig, GibbsConfig, TopicHyper};
use proplearn::seeded_rng;
use proplearn::synth::{generate, SynthSpec};

fn main() -> proplearn::Result<()> {
    // A small synthetic world with known ground truth.
    let spec = SynthSpec {
        topics: 3,
        concepts: 24,
        items: 30,
        properties: 12,
        tokens_per_concept: 80,
        seed: 21,
        ..SynthSpec::default()
    };
    let data = generate(&spec)?;
    let mut rng = seeded_rng(22);

    // Known concepts become pseudo-documents of (item, property) tokens.
    let corpus = build_pseudo_corpus(&data.table, &data.inventory, &data.norms, &mut rng)?;
    println!(
        "{} pseudo-documents, {} tokens total",
        corpus.docs.len(),
        corpus.docs.iter().map(|d| d.tokens.len()).sum::<usize>()
    );

    let cfg = GibbsConfig {
        topics: 3,
        burn_in: 200,
        post_samples: 10,
        hyper: TopicHyper::default(),
    };
    let model = gibbs_train(&corpus, &cfg, &mut rng)?;
    for (z, psi_row) in model.psi().iter().enumerate() {
        let mut top: Vec<(usize, f64)> = psi_row.iter().copied().enumerate().collect();
        top.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        println!(
            "topic {z}: top properties {}",
            top.iter()
                .take(3)
                .map(|(q, p)| format!("{} ({p:.2})", data.inventory.name(*q)))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }

    // Multi-shot: fold in all contexts of a held-out concept.
    let unknown = data.norms.last().unwrap();
    let contexts: Vec<(&str, u64)> = data.table.contexts_of(unknown.concept()).collect();
    let (doc, _) = model.unknown_document(&contexts);
    let theta = model.fold_in(&doc, &FoldInConfig::default(), &mut rng)?;
    println!(
        "\nfold-in of `{}` ({} tokens): theta = {:?}",
        unknown.concept(),
        doc.tokens.len(),
        theta.iter().map(|t| (t * 100.0).round() / 100.0).collect::<Vec<_>>()
    );
    let scores = model.predict_from_theta(&theta)?;
    let mut ranked: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    println!("multi-shot top properties:");
    for (q, s) in ranked.iter().take(4) {
        let gold = unknown.probs()[*q];
        println!(
            "  {:<8} score {s:.3} (gold probability {gold:.2})",
            data.inventory.name(*q)
        );
    }

    // One-shot: a single context item, closed form.
    let (item, _) = contexts[0];
    let one = model.predict_single_item(item)?;
    let mut ranked: Vec<(usize, f64)> = one.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    println!(
        "\none-shot from `{item}` alone: top property {} ({:.3})",
        data.inventory.name(ranked[0].0),
        ranked[0].1
    );
    Ok(())
}
