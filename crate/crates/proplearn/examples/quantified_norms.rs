//! Parsing quantified property norms: quantifier tokens map onto fixed
//! probabilities, rare properties are dropped, and every concept gets a
//! dense probability vector over the shared inventory.
//!
//! ```bash
//! cargo run --example quantified_norms
//! ```

use proplearn::ingest::{parse_norms, QuantifierMap};

const NORMS: &str = "\
# concept<TAB>property<TAB>quantifier-or-decimal
alligator\tan_animal\tall
alligator\tdangerous\tmost
alligator\tis_long\tmost
crocodile\tan_animal\tall
crocodile\tdangerous\tmost
gown\tclothing\tall
gown\tis_long\tsome
gown\tis_red\tfew
gown\thas_sleeves\t0.35
apple\ta_fruit\tall
apple\tis_red\tsome
hammer\ta_tool\tall
hammer\tis_long\tfew
";

fn main() -> proplearn::Result<()> {
    let file = tempfile::NamedTempFile::new()?;
    std::fs::write(file.path(), NORMS)?;

    let quantifiers = QuantifierMap::standard();
    println!("quantifier grid: {:?}", quantifiers.grid());

    // Keep properties named by at least two concepts.
    let (inventory, norms) = parse_norms(file.path(), &quantifiers, 2)?;
    println!(
        "\n{} concepts, {} properties after filtering (min 2 concepts per property):",
        norms.len(),
        inventory.len()
    );
    print!("{:<12}", "");
    for p in inventory.iter() {
        print!("{p:>12}");
    }
    println!();
    for n in &norms {
        print!("{:<12}", n.concept());
        for &v in n.probs() {
            print!("{v:>12.2}");
        }
        println!();
    }
    println!("\nnote: `has_sleeves`, `clothing`, `a_fruit` and `a_tool` were dropped");
    println!("because only one concept names each of them.");
    Ok(())
}
