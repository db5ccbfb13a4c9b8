//! Extracting (concept, context item) co-occurrences from a dependency-parsed
//! corpus, in both syntactic and bag-of-words modes.
//!
//! ```bash
//! cargo run --example corpus_contexts
//! ```

use std::collections::BTreeSet;

use proplearn::ingest::{extract_contexts, filter_vocabulary, ContextSpec};

// Token rows: index, form, lemma, upos, head index (0 = root), deprel.
const CORPUS: &str = "\
1\tShe\tshe\tPRON\t2\tnsubj
2\tundoes\tundo\tVERB\t0\troot
3\tthe\tthe\tDET\t4\tdet
4\tgown\tgown\tNOUN\t2\tdobj

1\tHe\the\tPRON\t2\tnsubj
2\twears\twear\tVERB\t0\troot
3\ta\ta\tDET\t5\tdet
4\tsilk\tsilk\tNOUN\t5\tcompound
5\tgown\tgown\tNOUN\t2\tdobj

1\tShe\tshe\tPRON\t2\tnsubj
2\teats\teat\tVERB\t0\troot
3\tan\ta\tDET\t4\tdet
4\tapple\tapple\tNOUN\t2\tdobj

1\tThe\tthe\tDET\t2\tdet
2\tapple\tapple\tNOUN\t3\tnsubj
3\tfell\tfall\tVERB\t0\troot
";

fn main() -> proplearn::Result<()> {
    let file = tempfile::NamedTempFile::new()?;
    std::fs::write(file.path(), CORPUS)?;
    let concepts: BTreeSet<String> = ["gown", "apple"].iter().map(|s| s.to_string()).collect();

    // Syntactic contexts: head lemma + dependency relation of the concept.
    let (vocab, table, stats) = extract_contexts(file.path(), &ContextSpec::syn(), &concepts)?;
    println!(
        "syn mode: {} sentences, {} pairs, {} context items",
        stats.sentences,
        stats.pairs,
        vocab.len()
    );
    for (concept, item, count) in table.entries() {
        println!("  {concept:<8} {item:<12} x{count}");
    }

    // Bag-of-words contexts within a window of 2, stopwords removed.
    let (_, bow_table, _) = extract_contexts(file.path(), &ContextSpec::bow(2)?, &concepts)?;
    println!("\nbow2 mode:");
    for (concept, item, count) in bow_table.entries() {
        println!("  {concept:<8} {item:<12} x{count}");
    }

    // Frequency filtering drops rare context items everywhere.
    let filtered = filter_vocabulary(&table, 2)?;
    println!("\nsyn items occurring at least twice:");
    for (item, total) in filtered.items() {
        println!("  {item:<12} x{total}");
    }
    Ok(())
}
