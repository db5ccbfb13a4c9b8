//! Input parsing: quantified property norms, dependency-parsed corpora, and
//! the pre-extracted pairs shortcut.
//!
//! File formats (all UTF-8, `#` starts a comment line):
//!
//! * norms: `concept<TAB>property<TAB>value` where `value` is a quantifier
//!   token (`all`, `most`, `some`, `few`, `none`) or a decimal in [0,1];
//! * corpus: sentence blocks separated by blank lines, token rows
//!   `index<TAB>form<TAB>lemma<TAB>upos<TAB>head-index<TAB>deprel` with head
//!   index 0 for the root;
//! * pairs: `concept<TAB>context_item<TAB>count`, read directly into an
//!   [`OccurrenceTable`].

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::data::{OccurrenceTable, PropertyInventory, PropertyNorms, Vocabulary};
use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../assets/stopwords_en.txt");
const DEFAULT_CONTENT_POS: &str = include_str!("../assets/content_pos.txt");

/// The fixed quantifier-to-probability mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantifierMap {
    pairs: [(&'static str, f64); 5],
}

impl QuantifierMap {
    pub fn standard() -> Self {
        QuantifierMap {
            pairs: [
                ("all", 1.0),
                ("most", 0.95),
                ("some", 0.35),
                ("few", 0.05),
                ("none", 0.0),
            ],
        }
    }

    pub fn value(&self, token: &str) -> Option<f64> {
        self.pairs.iter().find(|(t, _)| *t == token).map(|&(_, v)| v)
    }

    /// The quantifier token for a grid value, if the value is on the grid.
    pub fn token_for(&self, value: f64) -> Option<&'static str> {
        self.pairs.iter().find(|&&(_, v)| v == value).map(|&(t, _)| t)
    }

    /// The probability grid, ascending.
    pub fn grid(&self) -> [f64; 5] {
        let mut g = [0.0; 5];
        for (slot, &(_, v)) in g.iter_mut().zip(self.pairs.iter()) {
            *slot = v;
        }
        g.sort_by(|a, b| a.partial_cmp(b).unwrap());
        g
    }
}

impl Default for QuantifierMap {
    fn default() -> Self {
        QuantifierMap::standard()
    }
}

/// Context extraction mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextMode {
    /// Syntactic contexts `head-lemma + "-" + deprel` for concepts governed
    /// by a content-word, non-stopword head.
    Syn,
    /// Bag-of-words contexts: non-stopword lemmas within the window.
    Bow,
}

/// Configuration for context extraction.
#[derive(Debug, Clone)]
pub struct ContextSpec {
    pub mode: ContextMode,
    /// Window size in tokens on each side; ignored in `Syn` mode.
    pub window: usize,
    pub stopwords: HashSet<String>,
    pub content_pos: HashSet<String>,
}

impl ContextSpec {
    pub fn syn() -> Self {
        ContextSpec {
            mode: ContextMode::Syn,
            window: 0,
            stopwords: default_stopwords(),
            content_pos: default_content_pos(),
        }
    }

    pub fn bow(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Invalid("BOW window must be >= 1".into()));
        }
        Ok(ContextSpec {
            mode: ContextMode::Bow,
            window,
            stopwords: default_stopwords(),
            content_pos: default_content_pos(),
        })
    }
}

/// The built-in stopword list (editable by supplying your own set).
pub fn default_stopwords() -> HashSet<String> {
    parse_word_list(DEFAULT_STOPWORDS)
}

/// The built-in content-word POS tags (NOUN, VERB, ADJ, ADV).
pub fn default_content_pos() -> HashSet<String> {
    parse_word_list(DEFAULT_CONTENT_POS)
}

/// Reads a one-token-per-line word list, skipping comments and blanks.
pub fn read_word_list(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_word_list(&text))
}

fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Parses a quantified norms file.
///
/// Properties named by fewer than `min_concepts` distinct concepts are
/// dropped. The returned inventory and concept list are sorted, and each
/// concept gets a dense probability vector (unnamed property means 0.0), so
/// the same file always produces identical output.
pub fn parse_norms(
    path: impl AsRef<Path>,
    quantifiers: &QuantifierMap,
    min_concepts: usize,
) -> Result<(PropertyInventory, Vec<PropertyNorms>)> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = BufReader::new(File::open(path)?);

    let mut rows: Vec<(String, String, f64)> = Vec::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    let mut concepts_per_property: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();

    for (lineno, line) in file.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                &display,
                lineno,
                format!("expected 3 tab-separated fields, got {}", fields.len()),
            ));
        }
        let concept = fields[0].trim();
        let property = fields[1].trim();
        let raw = fields[2].trim();
        if concept.is_empty() || property.is_empty() {
            return Err(Error::parse(&display, lineno, "empty concept or property"));
        }
        let value = match quantifiers.value(raw) {
            Some(v) => v,
            None => match raw.parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => v,
                Ok(v) => {
                    return Err(Error::parse(
                        &display,
                        lineno,
                        format!("value {v} outside [0,1]"),
                    ))
                }
                Err(_) => {
                    return Err(Error::parse(
                        &display,
                        lineno,
                        format!("unknown quantifier token `{raw}`"),
                    ))
                }
            },
        };
        if !seen.insert((concept.to_string(), property.to_string())) {
            return Err(Error::parse(
                &display,
                lineno,
                format!("duplicate rating for ({concept}, {property}); reduce multi-rater files to one value per pair first"),
            ));
        }
        concepts_per_property
            .entry(property.to_string())
            .or_default()
            .insert(concept.to_string());
        rows.push((concept.to_string(), property.to_string(), value));
    }

    if rows.is_empty() {
        return Err(Error::Invalid(format!("no norm rows in {display}")));
    }

    let kept: Vec<String> = concepts_per_property
        .iter()
        .filter(|(_, cs)| cs.len() >= min_concepts)
        .map(|(p, _)| p.clone())
        .collect();
    if kept.is_empty() {
        return Err(Error::Invalid(format!(
            "no property is named by at least {min_concepts} concepts"
        )));
    }
    let inventory = PropertyInventory::new(kept)?;

    let mut vectors: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (concept, property, value) in rows {
        let entry = vectors
            .entry(concept)
            .or_insert_with(|| vec![0.0; inventory.len()]);
        if let Some(pos) = inventory.position(&property) {
            entry[pos] = value;
        }
    }

    let norms = vectors
        .into_iter()
        .map(|(concept, probs)| PropertyNorms::new(concept, probs))
        .collect::<Result<Vec<_>>>()?;
    Ok((inventory, norms))
}

#[derive(Debug, Clone, Copy)]
struct TokenRow<'a> {
    lemma: &'a str,
    upos: &'a str,
    head: usize,
    deprel: &'a str,
}

/// Counters reported by [`extract_contexts`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractStats {
    pub sentences: usize,
    pub skipped_blocks: usize,
    pub concept_tokens: usize,
    pub pairs: u64,
}

/// Extracts (concept, context item) co-occurrences from a parsed corpus.
///
/// Every token whose lemma is in `concepts` counts as one occurrence; a
/// sentence can contribute several. Malformed sentence blocks are skipped and
/// counted in the stats rather than aborting the run.
pub fn extract_contexts(
    path: impl AsRef<Path>,
    spec: &ContextSpec,
    concepts: &BTreeSet<String>,
) -> Result<(Vocabulary, OccurrenceTable, ExtractStats)> {
    let path = path.as_ref();
    let file = BufReader::new(File::open(path)?);

    let mut table = OccurrenceTable::new();
    let mut stats = ExtractStats::default();
    let mut block: Vec<String> = Vec::new();

    for line in file.lines() {
        let line = line?;
        if line.trim().is_empty() {
            if !block.is_empty() {
                process_block(&block, spec, concepts, &mut table, &mut stats);
                block.clear();
            }
        } else if !line.trim_start().starts_with('#') {
            block.push(line);
        }
    }
    if !block.is_empty() {
        process_block(&block, spec, concepts, &mut table, &mut stats);
    }

    if stats.pairs == 0 {
        return Err(Error::Invalid(format!(
            "no (concept, context) pairs extracted from {}",
            path.display()
        )));
    }
    let vocabulary = table.vocabulary();
    Ok((vocabulary, table, stats))
}

fn process_block(
    block: &[String],
    spec: &ContextSpec,
    concepts: &BTreeSet<String>,
    table: &mut OccurrenceTable,
    stats: &mut ExtractStats,
) {
    let tokens = match parse_block(block) {
        Some(t) => t,
        None => {
            stats.skipped_blocks += 1;
            return;
        }
    };
    stats.sentences += 1;

    for (pos, token) in tokens.iter().enumerate() {
        if !concepts.contains(token.lemma) {
            continue;
        }
        stats.concept_tokens += 1;
        match spec.mode {
            ContextMode::Syn => {
                // head index is 1-based; 0 is the root.
                if token.head == 0 || token.head > tokens.len() {
                    continue;
                }
                let head = &tokens[token.head - 1];
                let head_lemma = head.lemma.to_lowercase();
                if !spec.content_pos.contains(head.upos) || spec.stopwords.contains(&head_lemma) {
                    continue;
                }
                let item = format!("{}-{}", head_lemma, token.deprel.to_lowercase());
                table.add(token.lemma, &item, 1);
                stats.pairs += 1;
            }
            ContextMode::Bow => {
                let lo = pos.saturating_sub(spec.window);
                let hi = (pos + spec.window).min(tokens.len() - 1);
                for (other_pos, other) in tokens.iter().enumerate().take(hi + 1).skip(lo) {
                    if other_pos == pos {
                        continue;
                    }
                    let lemma = other.lemma.to_lowercase();
                    if spec.stopwords.contains(&lemma) {
                        continue;
                    }
                    table.add(token.lemma, &lemma, 1);
                    stats.pairs += 1;
                }
            }
        }
    }
}

/// Parses one sentence block; `None` marks the block unparseable. Tokens must
/// be listed in order with contiguous 1-based indices so that positions and
/// head references agree.
fn parse_block(block: &[String]) -> Option<Vec<TokenRow<'_>>> {
    let mut tokens = Vec::with_capacity(block.len());
    for (i, line) in block.iter().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return None;
        }
        let index: usize = fields[0].trim().parse().ok()?;
        if index != i + 1 {
            return None;
        }
        let head: usize = fields[4].trim().parse().ok()?;
        let lemma = fields[2].trim();
        if lemma.is_empty() {
            return None;
        }
        tokens.push(TokenRow {
            lemma,
            upos: fields[3].trim(),
            head,
            deprel: fields[5].trim(),
        });
    }
    for t in &tokens {
        if t.head > tokens.len() {
            return None;
        }
    }
    Some(tokens)
}

/// Removes context items whose total corpus count is below `min_freq`.
pub fn filter_vocabulary(table: &OccurrenceTable, min_freq: u64) -> Result<OccurrenceTable> {
    let mut out = OccurrenceTable::new();
    for (concept, item, count) in table.entries() {
        if table.item_total(item) >= min_freq {
            out.add(concept, item, count);
        }
    }
    if out.total() == 0 {
        return Err(Error::Invalid(format!(
            "no context item occurs at least {min_freq} times"
        )));
    }
    Ok(out)
}

/// Reads a pre-extracted `concept<TAB>item<TAB>count` file.
pub fn read_pairs(path: impl AsRef<Path>) -> Result<OccurrenceTable> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = BufReader::new(File::open(path)?);
    let mut table = OccurrenceTable::new();
    for (lineno, line) in file.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                &display,
                lineno,
                format!("expected 3 tab-separated fields, got {}", fields.len()),
            ));
        }
        let count: u64 = fields[2].trim().parse().map_err(|_| {
            Error::parse(&display, lineno, format!("bad count `{}`", fields[2]))
        })?;
        if count == 0 {
            return Err(Error::parse(&display, lineno, "zero count"));
        }
        table.add(fields[0].trim(), fields[1].trim(), count);
    }
    if table.total() == 0 {
        return Err(Error::Invalid(format!("no pairs in {display}")));
    }
    Ok(table)
}

/// Writes an [`OccurrenceTable`] in the pairs format read by [`read_pairs`].
pub fn write_pairs(table: &OccurrenceTable, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (concept, item, count) in table.entries() {
        writeln!(out, "{concept}\t{item}\t{count}")?;
    }
    Ok(())
}

/// Writes norms in the format read by [`parse_norms`]. Zero entries are
/// omitted; grid values are written as quantifier tokens, anything else as a
/// decimal.
pub fn write_norms(
    inventory: &PropertyInventory,
    norms: &[PropertyNorms],
    path: impl AsRef<Path>,
) -> Result<()> {
    let quantifiers = QuantifierMap::standard();
    let mut out = BufWriter::new(File::create(path)?);
    for n in norms {
        for (pos, &p) in n.probs().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            match quantifiers.token_for(p) {
                Some(tok) => writeln!(out, "{}\t{}\t{}", n.concept(), inventory.name(pos), tok)?,
                None => writeln!(out, "{}\t{}\t{}", n.concept(), inventory.name(pos), p)?,
            }
        }
    }
    Ok(())
}
