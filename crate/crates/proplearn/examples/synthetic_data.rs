//! The synthetic-data generator: topic-driven concept/context/property
//! co-occurrences with ground-truth parameters, and norms snapped onto the
//! quantifier probability grid. Writes the same TSV formats the ingestion
//! readers consume.
//!
//! ```bash
//! cargo run --example synthetic_data
//! ```

use proplearn::ingest::{parse_norms, read_pairs, write_norms, write_pairs, QuantifierMap};
use proplearn::synth::{generate, two_stage_effective, SynthSpec};

fn main() -> proplearn::Result<()> {
    let spec = SynthSpec {
        topics: 3,
        concepts: 10,
        items: 12,
        properties: 8,
        tokens_per_concept: 50,
        seed: 41,
        ..SynthSpec::default()
    };
    let data = generate(&spec)?;

    println!("ground-truth topic-property rows:");
    for (z, row) in data.truth.psi.iter().enumerate() {
        println!(
            "  topic {z}: {}",
            row.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>().join(" ")
        );
    }
    println!("\nderived norms (snapped onto {:?}):", QuantifierMap::standard().grid());
    for n in data.norms.iter().take(4) {
        println!(
            "  {:<6} {}",
            n.concept(),
            n.probs().iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>().join(" ")
        );
    }

    // The exact two-stage draw distribution is available as an oracle.
    let eff = two_stage_effective(data.norms[0].probs());
    println!(
        "\ntwo-stage property distribution of {}: {}",
        data.norms[0].concept(),
        eff.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>().join(" ")
    );

    // Round-trip through the ingestion formats. The norms file lists only
    // positive entries, so properties that apply to no concept at all drop
    // out of the written inventory.
    let dir = tempfile::tempdir()?;
    write_norms(&data.inventory, &data.norms, dir.path().join("norms.tsv"))?;
    write_pairs(&data.table, dir.path().join("pairs.tsv"))?;
    let (inventory, norms) = parse_norms(
        dir.path().join("norms.tsv"),
        &QuantifierMap::standard(),
        1,
    )?;
    let table = read_pairs(dir.path().join("pairs.tsv"))?;
    println!(
        "\nTSV round-trip: {} of {} properties are positive somewhere and survive the file format",
        inventory.len(),
        data.inventory.len()
    );
    let values_match = norms.iter().all(|back| {
        let original = data
            .norms
            .iter()
            .find(|n| n.concept() == back.concept())
            .expect("same concepts");
        inventory.iter().enumerate().all(|(i, p)| {
            original.probs()[data.inventory.position(p).unwrap()] == back.probs()[i]
        })
    });
    println!(
        "norm values preserved = {values_match}, occurrence table equal = {}",
        table == data.table
    );
    Ok(())
}
