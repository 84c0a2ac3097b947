//! CoNLL column ingestion, BIO validation and the labeled/unlabeled pools.
//!
//! Input is pre-tokenized: one token per line, whitespace-separated columns,
//! the tag in a configurable column (last by default), blank lines between
//! sentences. `-DOCSTART-` lines are document markers and never become
//! sentences.
//!
//! Tag indices are assigned by a [`TagSet`], whose canonical order is `O`
//! followed by `B-E`, `I-E` for each entity type `E`.
//!
//! Gold tags of unlabeled sentences live inside [`UnlabeledPool`] and are
//! only released through [`UnlabeledPool::take_labeled`], the simulated
//! annotator. Acquisition code receives `&[Sentence]` and cannot see them.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::metrics;
use crate::{Error, Result};

const OUTSIDE: &str = "O";
const DOCSTART: &str = "-DOCSTART-";

/// Role of a class in the BIO scheme. Entity types are indices into
/// [`TagSet::entity_types`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagKind {
    Outside,
    Begin(usize),
    Inside(usize),
}

/// Ordered class inventory.
#[derive(Debug, Clone)]
pub struct TagSet {
    classes: Vec<String>,
    kinds: Vec<TagKind>,
    entity_types: Vec<String>,
    outside: usize,
    index: HashMap<String, usize>,
}

impl PartialEq for TagSet {
    fn eq(&self, other: &Self) -> bool {
        self.classes == other.classes
    }
}

impl Eq for TagSet {}

impl TagSet {
    /// Builds a tag set from explicit class names, in the given order.
    ///
    /// Requires exactly one `O`, unique names, only `B-`/`I-` prefixed entity
    /// classes, and both `B-E` and `I-E` for every entity type `E`.
    pub fn new<S: AsRef<str>>(classes: &[S]) -> Result<Self> {
        let classes: Vec<String> = classes.iter().map(|c| c.as_ref().to_string()).collect();
        let mut index = HashMap::with_capacity(classes.len());
        let mut outside = None;
        let mut entity_types: Vec<String> = Vec::new();
        let mut parsed = Vec::with_capacity(classes.len());

        for (i, name) in classes.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::TagSet(format!("duplicate class {name:?}")));
            }
            let raw = RawTag::parse(name)
                .ok_or_else(|| Error::TagSet(format!("{name:?} is not a BIO tag")))?;
            match raw {
                RawTag::Outside => {
                    if outside.replace(i).is_some() {
                        return Err(Error::TagSet("more than one O class".into()));
                    }
                }
                RawTag::Begin(t) | RawTag::Inside(t) => {
                    if !entity_types.iter().any(|e| e == t) {
                        entity_types.push(t.to_string());
                    }
                }
            }
            parsed.push(raw);
        }

        let outside = outside.ok_or_else(|| Error::TagSet("missing O class".into()))?;
        let kinds = parsed
            .iter()
            .map(|raw| match raw {
                RawTag::Outside => TagKind::Outside,
                RawTag::Begin(t) => TagKind::Begin(type_position(&entity_types, t)),
                RawTag::Inside(t) => TagKind::Inside(type_position(&entity_types, t)),
            })
            .collect::<Vec<_>>();

        for (e, name) in entity_types.iter().enumerate() {
            for (prefix, kind) in [("B", TagKind::Begin(e)), ("I", TagKind::Inside(e))] {
                if !kinds.contains(&kind) {
                    return Err(Error::TagSet(format!("entity type {name:?} lacks {prefix}-{name}")));
                }
            }
        }

        Ok(Self { classes, kinds, entity_types, outside, index })
    }

    /// Canonical tag set: `O`, then `B-E`, `I-E` per entity type in order.
    pub fn from_entity_types<S: AsRef<str>>(types: &[S]) -> Result<Self> {
        let mut classes = vec![OUTSIDE.to_string()];
        for t in types {
            let t = t.as_ref();
            classes.push(format!("B-{t}"));
            classes.push(format!("I-{t}"));
        }
        Self::new(&classes)
    }

    /// Number of classes `C`.
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn entity_types(&self) -> &[String] {
        &self.entity_types
    }

    /// Index of the `O` class.
    pub fn outside(&self) -> usize {
        self.outside
    }

    pub fn index_of(&self, class: &str) -> Option<usize> {
        self.index.get(class).copied()
    }

    pub fn name(&self, class: usize) -> &str {
        &self.classes[class]
    }

    pub fn kind(&self, class: usize) -> TagKind {
        self.kinds[class]
    }

    pub fn begin_of(&self, entity_type: usize) -> usize {
        self.kinds.iter().position(|k| *k == TagKind::Begin(entity_type)).expect("validated tag set")
    }

    pub fn inside_of(&self, entity_type: usize) -> usize {
        self.kinds.iter().position(|k| *k == TagKind::Inside(entity_type)).expect("validated tag set")
    }
}

fn type_position(types: &[String], t: &str) -> usize {
    types.iter().position(|e| e == t).expect("type collected above")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RawTag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> RawTag<'a> {
    fn parse(tag: &'a str) -> Option<Self> {
        if tag == OUTSIDE {
            return Some(RawTag::Outside);
        }
        let (prefix, ty) = tag.split_once('-')?;
        if ty.is_empty() {
            return None;
        }
        match prefix {
            "B" => Some(RawTag::Begin(ty)),
            "I" => Some(RawTag::Inside(ty)),
            _ => None,
        }
    }

    fn entity_type(self) -> Option<&'a str> {
        match self {
            RawTag::Outside => None,
            RawTag::Begin(t) | RawTag::Inside(t) => Some(t),
        }
    }
}

/// A pre-tokenized sentence. `id` is its ordinal in the source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub id: usize,
    tokens: Vec<String>,
}

impl Sentence {
    pub fn new<S: Into<String>>(id: usize, tokens: impl IntoIterator<Item = S>) -> Result<Self> {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(Error::InvalidInput(format!("sentence {id} has no tokens")));
        }
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(Error::InvalidInput(format!("sentence {id} has an empty token")));
        }
        Ok(Self { id, tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Sentence length `T` (always at least 1).
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSentence {
    pub sentence: Sentence,
    tags: Vec<usize>,
}

impl LabeledSentence {
    pub fn new(sentence: Sentence, tags: Vec<usize>) -> Result<Self> {
        if tags.len() != sentence.len() {
            return Err(Error::InvalidInput(format!(
                "sentence {}: {} tags for {} tokens",
                sentence.id,
                tags.len(),
                sentence.len()
            )));
        }
        Ok(Self { sentence, tags })
    }

    pub fn tags(&self) -> &[usize] {
        &self.tags
    }
}

/// Per-class token counts `m_k` and their total `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts {
    pub per_class: Vec<usize>,
    pub total: usize,
}

impl ClassCounts {
    pub fn zeros(classes: usize) -> Self {
        Self { per_class: vec![0; classes], total: 0 }
    }

    pub fn add_tags(&mut self, tags: &[usize]) {
        for &t in tags {
            self.per_class[t] += 1;
        }
        self.total += tags.len();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    items: Vec<LabeledSentence>,
    tagset: TagSet,
}

impl LabeledCorpus {
    pub fn new(tagset: TagSet, items: Vec<LabeledSentence>) -> Result<Self> {
        let c = tagset.len();
        for item in &items {
            if let Some(&bad) = item.tags.iter().find(|&&t| t >= c) {
                return Err(Error::InvalidInput(format!(
                    "sentence {}: tag index {bad} outside tag set of {c} classes",
                    item.sentence.id
                )));
            }
        }
        Ok(Self { items, tagset })
    }

    pub fn empty(tagset: TagSet) -> Self {
        Self { items: Vec::new(), tagset }
    }

    pub fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    pub fn items(&self) -> &[LabeledSentence] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.items.iter().map(|s| s.tags.len()).sum()
    }

    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.items.iter().map(|s| &s.sentence)
    }

    pub fn push(&mut self, item: LabeledSentence) -> Result<()> {
        if let Some(&bad) = item.tags.iter().find(|&&t| t >= self.tagset.len()) {
            return Err(Error::InvalidInput(format!("tag index {bad} outside tag set")));
        }
        self.items.push(item);
        Ok(())
    }

    /// Token count per class over the whole corpus.
    pub fn class_counts(&self) -> ClassCounts {
        let mut counts = ClassCounts::zeros(self.tagset.len());
        for item in &self.items {
            counts.add_tags(&item.tags);
        }
        counts
    }

    /// Dataset statistics: sizes, B/I/O proportions and imbalance ratio.
    pub fn stats(&self) -> Result<CorpusStats> {
        if self.is_empty() {
            return Err(Error::NoSentences);
        }
        let counts = self.class_counts();
        let (mut b, mut i, mut o) = (0usize, 0usize, 0usize);
        for (class, &n) in counts.per_class.iter().enumerate() {
            match self.tagset.kind(class) {
                TagKind::Outside => o += n,
                TagKind::Begin(_) => b += n,
                TagKind::Inside(_) => i += n,
            }
        }
        let total = counts.total as f64;
        let all = vec![true; counts.per_class.len()];
        let gamma = metrics::imbalance_ratio_clamped(&counts.per_class, &all);
        Ok(CorpusStats {
            sentence_count: self.len(),
            token_count: counts.total,
            average_length: total / self.len() as f64,
            proportions: BioProportions {
                begin: b as f64 / total,
                inside: i as f64 / total,
                outside: o as f64 / total,
            },
            imbalance_ratio: gamma.gamma,
            absent_classes: gamma.absent_classes,
            class_counts: counts,
        })
    }

    /// Writes the corpus back out as two-column CoNLL (`token tag`).
    pub fn write_conll<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (n, item) in self.items.iter().enumerate() {
            if n > 0 {
                writeln!(out)?;
            }
            for (tok, &tag) in item.sentence.tokens.iter().zip(&item.tags) {
                writeln!(out, "{tok} {}", self.tagset.name(tag))?;
            }
        }
        Ok(())
    }
}

/// Fractions of B-, I- and O-tagged tokens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BioProportions {
    pub begin: f64,
    pub inside: f64,
    pub outside: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub sentence_count: usize,
    pub token_count: usize,
    pub average_length: f64,
    pub proportions: BioProportions,
    /// Imbalance ratio over all classes, with the minimum count clamped to 1.
    pub imbalance_ratio: f64,
    /// Set when some class has no tokens (the ratio is then clamped).
    pub absent_classes: bool,
    pub class_counts: ClassCounts,
}

/// Unlabeled sentences plus their withheld gold tags.
#[derive(Debug, Clone)]
pub struct UnlabeledPool {
    items: Vec<Sentence>,
    hidden: Option<Vec<Vec<usize>>>,
    tagset: TagSet,
}

impl UnlabeledPool {
    /// A pool whose gold tags are held back for the simulated annotator.
    pub fn with_oracle(tagset: TagSet, labeled: Vec<LabeledSentence>) -> Self {
        let (items, hidden) = labeled.into_iter().map(|l| (l.sentence, l.tags)).unzip();
        Self { items, hidden: Some(hidden), tagset }
    }

    /// A pool with no gold tags; it can be scored but not annotated.
    pub fn unannotated(tagset: TagSet, items: Vec<Sentence>) -> Self {
        Self { items, hidden: None, tagset }
    }

    /// The sentences visible to acquisition scoring.
    pub fn sentences(&self) -> &[Sentence] {
        &self.items
    }

    pub fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn has_oracle(&self) -> bool {
        self.hidden.is_some()
    }

    /// Asks the annotator for the gold tags of the sentences at `positions`
    /// and removes them from the pool. Returned in the order requested.
    pub fn take_labeled(&mut self, positions: &[usize]) -> Result<Vec<LabeledSentence>> {
        if self.hidden.is_none() {
            return Err(Error::InvalidInput("pool has no annotator".into()));
        }
        self.check_positions(positions)?;
        let hidden = self.hidden.as_ref().expect("checked above");
        let out = positions
            .iter()
            .map(|&p| LabeledSentence { sentence: self.items[p].clone(), tags: hidden[p].clone() })
            .collect();
        self.remove_positions(positions);
        Ok(out)
    }

    /// Removes the sentences at `positions` without labeling them.
    pub fn remove(&mut self, positions: &[usize]) -> Result<Vec<Sentence>> {
        self.check_positions(positions)?;
        let out = positions.iter().map(|&p| self.items[p].clone()).collect();
        self.remove_positions(positions);
        Ok(out)
    }

    /// Gold class counts over the remaining pool, if it has an annotator.
    /// Used for experiment bookkeeping only.
    pub fn oracle_class_counts(&self) -> Option<ClassCounts> {
        let hidden = self.hidden.as_ref()?;
        let mut counts = ClassCounts::zeros(self.tagset.len());
        for tags in hidden {
            counts.add_tags(tags);
        }
        Some(counts)
    }

    fn check_positions(&self, positions: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.items.len()];
        for &p in positions {
            if p >= self.items.len() {
                return Err(Error::InvalidInput(format!(
                    "pool position {p} out of range for {} sentences",
                    self.items.len()
                )));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidInput(format!("pool position {p} requested twice")));
            }
        }
        Ok(())
    }

    fn remove_positions(&mut self, positions: &[usize]) {
        let mut keep = vec![true; self.items.len()];
        for &p in positions {
            keep[p] = false;
        }
        let mut k = keep.iter();
        self.items.retain(|_| *k.next().unwrap());
        if let Some(hidden) = self.hidden.as_mut() {
            let mut k = keep.iter();
            hidden.retain(|_| *k.next().unwrap());
        }
    }
}

/// What to do with an `I-E` tag that does not continue an `E` span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BioPolicy {
    /// Rewrite the orphan `I-E` as `B-E`.
    #[default]
    Repair,
    /// Reject the file, listing every violation.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BioViolation {
    pub line: usize,
    pub tag: String,
    pub previous: String,
}

impl fmt::Display for BioViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {} follows {}", self.line, self.tag, self.previous)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Zero-based tag column; `None` means the last column.
    pub tag_column: Option<usize>,
    /// Fixed class inventory. Inferred from the data when absent.
    pub tagset: Option<TagSet>,
    pub bio: BioPolicy,
}

/// Result of [`parse_conll`]: the corpus plus any BIO repairs applied.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub corpus: LabeledCorpus,
    pub repairs: Vec<BioViolation>,
}

struct RawLine {
    line: usize,
    token: String,
    tag: String,
}

/// Reads CoNLL column data.
pub fn parse_conll<R: BufRead>(reader: R, options: &ParseOptions) -> Result<Parsed> {
    let mut raw_sentences: Vec<Vec<RawLine>> = Vec::new();
    let mut current: Vec<RawLine> = Vec::new();

    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(DOCSTART) {
            if !current.is_empty() {
                raw_sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        let columns: Vec<&str> = trimmed.split_whitespace().collect();
        let tag_col = match options.tag_column {
            Some(c) => c,
            None => columns.len() - 1,
        };
        if columns.len() < 2 || tag_col >= columns.len() || tag_col == 0 {
            let need = options.tag_column.map_or(2, |c| (c + 1).max(2));
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected at least {need} columns, found {}", columns.len()),
            });
        }
        current.push(RawLine { line: line_no, token: columns[0].to_string(), tag: columns[tag_col].to_string() });
    }
    if !current.is_empty() {
        raw_sentences.push(current);
    }
    if raw_sentences.is_empty() {
        return Err(Error::NoSentences);
    }

    // Syntax check and BIO repair on the raw strings.
    let mut repairs = Vec::new();
    for sentence in &mut raw_sentences {
        let mut previous: Option<String> = None;
        for raw in sentence.iter_mut() {
            let parsed = RawTag::parse(&raw.tag).ok_or_else(|| Error::UnknownTag { line: raw.line, tag: raw.tag.clone() })?;
            if let RawTag::Inside(ty) = parsed {
                let continues = previous
                    .as_deref()
                    .and_then(|p| RawTag::parse(p).and_then(RawTag::entity_type))
                    .is_some_and(|prev_ty| prev_ty == ty);
                if !continues {
                    repairs.push(BioViolation {
                        line: raw.line,
                        tag: raw.tag.clone(),
                        previous: previous.clone().unwrap_or_else(|| "sentence start".into()),
                    });
                    if options.bio == BioPolicy::Repair {
                        raw.tag = format!("B-{ty}");
                    }
                }
            }
            previous = Some(raw.tag.clone());
        }
    }
    if options.bio == BioPolicy::Strict && !repairs.is_empty() {
        return Err(Error::InvalidBio(repairs));
    }

    let tagset = match &options.tagset {
        Some(t) => t.clone(),
        None => infer_tagset(&raw_sentences)?,
    };

    let mut items = Vec::with_capacity(raw_sentences.len());
    for (id, sentence) in raw_sentences.into_iter().enumerate() {
        let mut tokens = Vec::with_capacity(sentence.len());
        let mut tags = Vec::with_capacity(sentence.len());
        for raw in sentence {
            let idx = tagset.index_of(&raw.tag).ok_or(Error::UnknownTag { line: raw.line, tag: raw.tag })?;
            tokens.push(raw.token);
            tags.push(idx);
        }
        items.push(LabeledSentence { sentence: Sentence { id, tokens }, tags });
    }
    Ok(Parsed { corpus: LabeledCorpus { items, tagset }, repairs })
}

/// Convenience wrapper over [`parse_conll`] for in-memory text.
pub fn parse_conll_str(text: &str, options: &ParseOptions) -> Result<Parsed> {
    parse_conll(text.as_bytes(), options)
}

fn infer_tagset(sentences: &[Vec<RawLine>]) -> Result<TagSet> {
    let mut types: Vec<&str> = Vec::new();
    for raw in sentences.iter().flatten() {
        if let Some(t) = RawTag::parse(&raw.tag).and_then(RawTag::entity_type) {
            if !types.contains(&t) {
                types.push(t);
            }
        }
    }
    TagSet::from_entity_types(&types)
}

/// Seeded uniform split into an initial labeled pool of `init_size`
/// sentences and an unlabeled pool holding the rest. Both sides keep the
/// corpus order.
pub fn split_pools(corpus: &LabeledCorpus, init_size: usize, seed: u64) -> Result<(LabeledCorpus, UnlabeledPool)> {
    if init_size > corpus.len() {
        return Err(Error::InvalidInput(format!(
            "initial pool size {init_size} exceeds corpus of {} sentences",
            corpus.len()
        )));
    }
    if init_size == 0 {
        log::warn!("initial labeled pool is empty; the tagger cannot be trained from a cold start");
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chosen = vec![false; corpus.len()];
    for &i in &order[..init_size] {
        chosen[i] = true;
    }
    let (mut labeled, mut unlabeled) = (Vec::with_capacity(init_size), Vec::new());
    for (item, &pick) in corpus.items.iter().zip(&chosen) {
        if pick {
            labeled.push(item.clone());
        } else {
            unlabeled.push(item.clone());
        }
    }
    let tagset = corpus.tagset.clone();
    Ok((
        LabeledCorpus { items: labeled, tagset: tagset.clone() },
        UnlabeledPool::with_oracle(tagset, unlabeled),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Parsed> {
        parse_conll_str(text, &ParseOptions::default())
    }

    #[test]
    fn two_line_sentence() {
        let p = parse("EU B-ORG\nrejects O\n\n").unwrap();
        assert_eq!(p.corpus.len(), 1);
        let s = &p.corpus.items()[0];
        assert_eq!(s.sentence.tokens(), ["EU", "rejects"]);
        let ts = p.corpus.tagset();
        assert_eq!(s.tags(), [ts.index_of("B-ORG").unwrap(), ts.index_of("O").unwrap()]);
    }

    #[test]
    fn empty_stream_has_no_sentences() {
        assert!(matches!(parse(""), Err(Error::NoSentences)));
        assert!(matches!(parse("\n\n-DOCSTART- -X- -X- O\n\n"), Err(Error::NoSentences)));
    }

    #[test]
    fn docstart_skipped_and_conll2003_columns() {
        let text = "-DOCSTART- -X- -X- O\n\nEU NNP B-NP B-ORG\nrejects VBZ B-VP O\n\nPeter NNP B-NP B-PER\nBlackburn NNP I-NP I-PER\n";
        let p = parse(text).unwrap();
        assert_eq!(p.corpus.len(), 2);
        assert_eq!(p.corpus.items()[0].sentence.id, 0);
        assert_eq!(p.corpus.items()[1].sentence.id, 1);
        assert_eq!(p.corpus.token_count(), 4);
        assert_eq!(p.corpus.tagset().classes(), ["O", "B-ORG", "I-ORG", "B-PER", "I-PER"]);
    }

    #[test]
    fn configurable_tag_column() {
        let text = "EU B-ORG NNP\nrejects O VBZ\n";
        let opts = ParseOptions { tag_column: Some(1), ..Default::default() };
        let p = parse_conll_str(text, &opts).unwrap();
        assert_eq!(p.corpus.items()[0].tags().len(), 2);
    }

    #[test]
    fn short_line_reports_line_number() {
        let err = parse("EU B-ORG\nrejects\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let opts = ParseOptions { tag_column: Some(3), ..Default::default() };
        let err = parse_conll_str("EU NNP B-ORG\n", &opts).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn unknown_tag_with_fixed_tagset() {
        let tagset = TagSet::from_entity_types(&["PER"]).unwrap();
        let opts = ParseOptions { tagset: Some(tagset), ..Default::default() };
        let err = parse_conll_str("EU B-ORG\n", &opts).unwrap_err();
        assert!(matches!(err, Error::UnknownTag { line: 1, .. }), "{err}");
        assert!(matches!(parse("EU X-ORG\n"), Err(Error::UnknownTag { .. })));
    }

    #[test]
    fn bio_repair_and_strict() {
        let text = "a I-PER\nb I-PER\nc O\nd I-LOC\n\ne B-PER\nf I-LOC\n";
        let p = parse(text).unwrap();
        assert_eq!(p.repairs.len(), 3);
        let ts = p.corpus.tagset();
        let names: Vec<&str> = p.corpus.items()[0].tags().iter().map(|&t| ts.name(t)).collect();
        assert_eq!(names, ["B-PER", "I-PER", "O", "B-LOC"]);
        let names: Vec<&str> = p.corpus.items()[1].tags().iter().map(|&t| ts.name(t)).collect();
        assert_eq!(names, ["B-PER", "B-LOC"]);

        let opts = ParseOptions { bio: BioPolicy::Strict, ..Default::default() };
        match parse_conll_str(text, &opts) {
            Err(Error::InvalidBio(v)) => {
                assert_eq!(v.iter().map(|v| v.line).collect::<Vec<_>>(), [1, 4, 7]);
            }
            other => panic!("expected InvalidBio, got {other:?}"),
        }
    }

    #[test]
    fn tagset_invariants() {
        let ts = TagSet::from_entity_types(&["LOC", "MISC", "PER", "ORG"]).unwrap();
        assert_eq!(ts.len(), 9);
        assert_eq!(ts.outside(), 0);
        assert_eq!(ts.kind(ts.begin_of(2)), TagKind::Begin(2));
        assert!(TagSet::new(&["O", "B-PER"]).is_err());
        assert!(TagSet::new(&["B-PER", "I-PER"]).is_err());
        assert!(TagSet::new(&["O", "O"]).is_err());
        assert!(TagSet::new(&["O", "B-PER", "I-PER", "B-PER"]).is_err());
        assert!(TagSet::new(&["O", "S-PER"]).is_err());
        assert_eq!(TagSet::new(&["O", "I-X", "B-X"]).unwrap().len(), 3);
    }

    #[test]
    fn class_counts_direct() {
        let p = parse("EU B-ORG\nrejects O\n").unwrap();
        let counts = p.corpus.class_counts();
        assert_eq!(counts.total, 2);
        assert_eq!(counts.per_class, [1, 1, 0]);
        let empty = LabeledCorpus::empty(p.corpus.tagset().clone());
        assert_eq!(empty.class_counts(), ClassCounts::zeros(3));
    }

    #[test]
    fn stats_balanced_and_empty() {
        let ts = TagSet::from_entity_types(&["PER"]).unwrap();
        let items = (0..4)
            .map(|i| LabeledSentence::new(Sentence::new(i, ["a", "b", "c"]).unwrap(), vec![1, 2, 0]).unwrap())
            .collect();
        let corpus = LabeledCorpus::new(ts.clone(), items).unwrap();
        let stats = corpus.stats().unwrap();
        assert_eq!(stats.imbalance_ratio, 1.0);
        assert_eq!(stats.average_length, 3.0);
        let p = stats.proportions;
        assert!((p.begin + p.inside + p.outside - 1.0).abs() < 1e-9);
        assert!(matches!(LabeledCorpus::empty(ts).stats(), Err(Error::NoSentences)));
    }

    #[test]
    fn split_pools_contract() {
        let ts = TagSet::from_entity_types(&["PER"]).unwrap();
        let items = (0..100)
            .map(|i| LabeledSentence::new(Sentence::new(i, [format!("w{i}")]).unwrap(), vec![i % 3]).unwrap())
            .collect();
        let corpus = LabeledCorpus::new(ts, items).unwrap();
        let (l1, u1) = split_pools(&corpus, 30, 7).unwrap();
        let (l2, u2) = split_pools(&corpus, 30, 7).unwrap();
        assert_eq!((l1.len(), u1.len()), (30, 70));
        assert_eq!(l1, l2);
        assert_eq!(u1.sentences(), u2.sentences());

        let mut ids: Vec<usize> = l1.sentences().map(|s| s.id).chain(u1.sentences().iter().map(|s| s.id)).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..100).collect::<Vec<_>>());

        let (l0, u0) = split_pools(&corpus, 0, 1).unwrap();
        assert_eq!((l0.len(), u0.len()), (0, 100));
        let (la, ua) = split_pools(&corpus, 100, 1).unwrap();
        assert_eq!((la.len(), ua.len()), (100, 0));
        assert!(split_pools(&corpus, 101, 1).is_err());
        let (l3, _) = split_pools(&corpus, 30, 8).unwrap();
        assert_ne!(l1, l3);
    }

    #[test]
    fn oracle_reveals_gold_and_removes() {
        let ts = TagSet::from_entity_types(&["PER"]).unwrap();
        let gold: Vec<LabeledSentence> = (0..5)
            .map(|i| LabeledSentence::new(Sentence::new(i, ["x", "y"]).unwrap(), vec![i % 3, 0]).unwrap())
            .collect();
        let mut pool = UnlabeledPool::with_oracle(ts.clone(), gold.clone());
        let got = pool.take_labeled(&[3, 1]).unwrap();
        assert_eq!(got, vec![gold[3].clone(), gold[1].clone()]);
        assert_eq!(pool.sentences().iter().map(|s| s.id).collect::<Vec<_>>(), [0, 2, 4]);
        assert!(pool.take_labeled(&[3]).is_err());
        assert!(pool.take_labeled(&[0, 0]).is_err());

        let mut blind = UnlabeledPool::unannotated(ts, vec![gold[0].sentence.clone()]);
        assert!(blind.take_labeled(&[0]).is_err());
        assert_eq!(blind.remove(&[0]).unwrap().len(), 1);
    }

    #[test]
    fn sentence_rejects_empty() {
        assert!(Sentence::new(0, Vec::<String>::new()).is_err());
        assert!(Sentence::new(0, ["a", ""]).is_err());
    }
}
