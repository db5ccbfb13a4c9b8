//! Model persistence: snapshots carry the property inventory with a hash, so
//! a loaded model can never silently predict against the wrong property
//! space, and loading reproduces predictions bit for bit.
//!
//! ```bash
//! cargo run --example model_snapshots
//! ```

use proplearn::experiment::{train_model, ModelKind, TrainSettings};
use proplearn::seeded_rng;
use proplearn::snapshot::{load_model, save_model};
use proplearn::synth::{generate, SynthSpec};

fn main() -> proplearn::Result<()> {
    let data = generate(&SynthSpec {
        concepts: 12,
        items: 15,
        properties: 8,
        tokens_per_concept: 40,
        topics: 3,
        seed: 61,
        ..SynthSpec::default()
    })?;
    let settings = TrainSettings {
        topics: 3,
        burn_in: 100,
        ..Default::default()
    };

    let mut rng = seeded_rng(62);
    let model = train_model(
        ModelKind::Bitm,
        &data.table,
        &data.inventory,
        &data.norms,
        &settings,
        &mut rng,
    )?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.json");
    let trained: Vec<String> = data.norms.iter().map(|n| n.concept().to_string()).collect();
    save_model(&path, &data.inventory, &trained, &model)?;
    println!("saved {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());

    let loaded = load_model(&path)?;
    let item = data.table.items().next().unwrap().0.to_string();
    let mut rng_a = seeded_rng(63);
    let mut rng_b = seeded_rng(63);
    let (before, _) = model.predictor().predict_single(&item, &mut rng_a)?;
    let (after, _) = loaded.model.predictor().predict_single(&item, &mut rng_b)?;
    println!(
        "prediction through the snapshot is bitwise identical: {}",
        before == after
    );

    // Tampering with the stored inventory is caught by the hash check.
    let text = std::fs::read_to_string(&path)?;
    let first_property = data.inventory.name(0);
    std::fs::write(
        &path,
        text.replacen(&format!("\"{first_property}\""), "\"tampered\"", 1),
    )?;
    match load_model(&path) {
        Err(e) => println!("tampered snapshot rejected: {e}"),
        Ok(_) => println!("unexpected: tampered snapshot loaded"),
    }
    Ok(())
}
