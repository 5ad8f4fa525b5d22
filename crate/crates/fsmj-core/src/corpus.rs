//! Labeled sparse document-term corpora: tokenization, vocabulary pruning,
//! and the on-disk sparse corpus format.
//!
//! A corpus file holds one document per line, `<class><TAB><idx>:<count> ...`
//! with strictly increasing 0-based indices; a companion vocabulary file holds
//! one term per line (line number = index). Documents that end up with no
//! retained terms are kept with `total_count = 0` so train/test row alignment
//! never shifts.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus requires at least 2 distinct classes, got {0}")]
    TooFewClasses(usize),
    #[error("min_doc_freq must be >= 1, got {0}")]
    BadMinDocFreq(usize),
    #[error("duplicate term in vocabulary: {0:?}")]
    DuplicateTerm(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: feature index {index} out of range (vocabulary has {len} terms)")]
    IndexOutOfRange { line: usize, index: usize, len: usize },
    #[error("document entries must have strictly increasing indices")]
    UnsortedEntries,
    #[error("document entry counts must be positive")]
    ZeroCount,
    #[error("labels/documents length mismatch: {docs} docs, {labels} labels")]
    LengthMismatch { docs: usize, labels: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("class {0:?} has no documents")]
    EmptyClass(String),
    #[error("document references feature {index} but vocabulary has {len} terms")]
    FeatureOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Bidirectional term <-> index map with per-term document frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index_of: HashMap<String, usize>,
    doc_freq: Vec<u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from an ordered term list and matching doc frequencies.
    pub fn new(terms: Vec<String>, doc_freq: Vec<u32>) -> Result<Self, CorpusError> {
        assert_eq!(terms.len(), doc_freq.len(), "terms/doc_freq length mismatch");
        let mut index_of = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if index_of.insert(t.clone(), i).is_some() {
                return Err(CorpusError::DuplicateTerm(t.clone()));
            }
        }
        Ok(Self { terms, index_of, doc_freq })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index_of.get(term).copied()
    }

    pub fn doc_freq(&self, index: usize) -> u32 {
        self.doc_freq[index]
    }

    pub fn doc_freqs(&self) -> &[u32] {
        &self.doc_freq
    }
}

/// One document as sorted (feature index, count) pairs; the bag-of-words
/// count vector in sparse form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseDocument {
    entries: Vec<(usize, u32)>,
    total_count: u64,
}

impl SparseDocument {
    /// Entries must be sorted by strictly increasing index with positive counts.
    pub fn new(entries: Vec<(usize, u32)>) -> Result<Self, CorpusError> {
        for w in entries.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(CorpusError::UnsortedEntries);
            }
        }
        if entries.iter().any(|&(_, c)| c == 0) {
            return Err(CorpusError::ZeroCount);
        }
        let total_count = entries.iter().map(|&(_, c)| u64::from(c)).sum();
        Ok(Self { entries, total_count })
    }

    pub fn empty() -> Self {
        Self { entries: Vec::new(), total_count: 0 }
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    pub fn total_count(&self) -> u64 {
        self.total_count
    }

    pub fn count(&self, feature: usize) -> u32 {
        match self.entries.binary_search_by_key(&feature, |&(i, _)| i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0,
        }
    }
}

/// A set of labeled sparse documents over one shared vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    docs: Vec<SparseDocument>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    vocabulary: Vocabulary,
}

impl LabeledCorpus {
    pub fn new(
        docs: Vec<SparseDocument>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        vocabulary: Vocabulary,
    ) -> Result<Self, CorpusError> {
        if docs.len() != labels.len() {
            return Err(CorpusError::LengthMismatch { docs: docs.len(), labels: labels.len() });
        }
        let n_classes = class_names.len();
        let mut seen = vec![false; n_classes];
        for &l in &labels {
            if l >= n_classes {
                return Err(CorpusError::LabelOutOfRange { label: l, classes: n_classes });
            }
            seen[l] = true;
        }
        for (i, s) in seen.iter().enumerate() {
            if !s {
                return Err(CorpusError::EmptyClass(class_names[i].clone()));
            }
        }
        let m = vocabulary.len();
        for d in &docs {
            if let Some(&(idx, _)) = d.entries().last() {
                if idx >= m {
                    return Err(CorpusError::FeatureOutOfRange { index: idx, len: m });
                }
            }
        }
        Ok(Self { docs, labels, class_names, vocabulary })
    }

    pub fn docs(&self) -> &[SparseDocument] {
        &self.docs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_features(&self) -> usize {
        self.vocabulary.len()
    }

    /// Documents per class, in class-index order.
    pub fn class_doc_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Lowercased maximal runs of alphabetic characters, length >= 2.
pub fn tokenize(raw_text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut run = String::new();
    let mut run_len = 0usize;
    for ch in raw_text.chars() {
        if ch.is_alphabetic() {
            run.push(ch);
            run_len += 1;
        } else {
            if run_len >= 2 {
                tokens.push(run.to_lowercase());
            }
            run.clear();
            run_len = 0;
        }
    }
    if run_len >= 2 {
        tokens.push(run.to_lowercase());
    }
    tokens
}

/// Tokenizes, prunes terms below `min_doc_freq` distinct documents, and
/// vectorizes. Vocabulary is sorted lexicographically; class order follows
/// first appearance in `documents`.
pub fn build_corpus<T, C>(
    documents: &[(T, C)],
    min_doc_freq: usize,
) -> Result<LabeledCorpus, CorpusError>
where
    T: AsRef<str>,
    C: AsRef<str>,
{
    build_corpus_filtered(documents, min_doc_freq, None)
}

/// `build_corpus` with an optional stopword set applied after tokenization.
pub fn build_corpus_filtered<T, C>(
    documents: &[(T, C)],
    min_doc_freq: usize,
    stopwords: Option<&HashSet<String>>,
) -> Result<LabeledCorpus, CorpusError>
where
    T: AsRef<str>,
    C: AsRef<str>,
{
    if min_doc_freq < 1 {
        return Err(CorpusError::BadMinDocFreq(min_doc_freq));
    }

    let keep = |tok: &String| stopwords.is_none_or(|s| !s.contains(tok));
    let token_lists: Vec<Vec<String>> = documents
        .iter()
        .map(|(text, _)| tokenize(text.as_ref()).into_iter().filter(keep).collect())
        .collect();

    // Pass 1: document frequency of every token.
    let mut df: HashMap<&str, u32> = HashMap::new();
    for toks in &token_lists {
        let distinct: HashSet<&str> = toks.iter().map(String::as_str).collect();
        for t in distinct {
            *df.entry(t).or_insert(0) += 1;
        }
    }

    let mut retained: Vec<(&str, u32)> = df
        .into_iter()
        .filter(|&(_, n)| n as usize >= min_doc_freq)
        .collect();
    retained.sort_unstable_by(|a, b| a.0.cmp(b.0));
    let terms: Vec<String> = retained.iter().map(|&(t, _)| t.to_string()).collect();
    let doc_freq: Vec<u32> = retained.iter().map(|&(_, n)| n).collect();
    let vocabulary = Vocabulary::new(terms, doc_freq)?;

    // Pass 2: vectorize against the pruned vocabulary.
    let mut docs = Vec::with_capacity(documents.len());
    for toks in &token_lists {
        docs.push(vectorize_tokens(toks, &vocabulary));
    }

    let (labels, class_names) = assign_labels(documents.iter().map(|(_, c)| c.as_ref()));
    if class_names.len() < 2 {
        return Err(CorpusError::TooFewClasses(class_names.len()));
    }
    LabeledCorpus::new(docs, labels, class_names, vocabulary)
}

/// Vectorizes raw documents against a fixed, already-built vocabulary
/// (unseen terms dropped, no pruning). Used to vectorize test data with the
/// training vocabulary.
pub fn vectorize_with_vocab<T, C>(
    documents: &[(T, C)],
    vocabulary: &Vocabulary,
) -> Result<LabeledCorpus, CorpusError>
where
    T: AsRef<str>,
    C: AsRef<str>,
{
    let mut docs = Vec::with_capacity(documents.len());
    let mut df = vec![0u32; vocabulary.len()];
    for (text, _) in documents {
        let toks = tokenize(text.as_ref());
        let doc = vectorize_tokens(&toks, vocabulary);
        for &(idx, _) in doc.entries() {
            df[idx] += 1;
        }
        docs.push(doc);
    }
    let vocab = Vocabulary::new(vocabulary.terms().to_vec(), df)?;
    let (labels, class_names) = assign_labels(documents.iter().map(|(_, c)| c.as_ref()));
    if class_names.len() < 2 {
        return Err(CorpusError::TooFewClasses(class_names.len()));
    }
    LabeledCorpus::new(docs, labels, class_names, vocab)
}

fn vectorize_tokens(tokens: &[String], vocabulary: &Vocabulary) -> SparseDocument {
    let mut counts: HashMap<usize, u32> = HashMap::new();
    for t in tokens {
        if let Some(idx) = vocabulary.index_of(t) {
            *counts.entry(idx).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(usize, u32)> = counts.into_iter().collect();
    entries.sort_unstable_by_key(|&(i, _)| i);
    SparseDocument::new(entries).expect("sorted positive entries")
}

fn assign_labels<'a, I: Iterator<Item = &'a str>>(names: I) -> (Vec<usize>, Vec<String>) {
    let mut class_names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    for name in names {
        let next = class_names.len();
        let label = *index.entry(name.to_string()).or_insert_with(|| {
            class_names.push(name.to_string());
            next
        });
        labels.push(label);
    }
    (labels, class_names)
}

/// Reads a directory-per-class tree: each subdirectory of `root` is a class,
/// each `*.txt` file inside is one document. Classes and files are visited in
/// sorted order.
pub fn read_class_dirs(root: &Path) -> Result<Vec<(String, String)>, CorpusError> {
    let mut class_dirs: Vec<_> = fs::read_dir(root)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|e| e.path().is_dir())
        .collect();
    class_dirs.sort_by_key(|e| e.file_name());

    let mut documents = Vec::new();
    for dir in class_dirs {
        let class_name = dir.file_name().to_string_lossy().into_owned();
        let mut files: Vec<_> = fs::read_dir(dir.path())?
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "txt"))
            .collect();
        files.sort();
        for f in files {
            documents.push((fs::read_to_string(&f)?, class_name.clone()));
        }
    }
    Ok(documents)
}

/// Loads a stopword file: one word per line, lowercased, blank lines skipped.
pub fn read_stopwords(path: &Path) -> Result<HashSet<String>, CorpusError> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

/// Writes the corpus and its companion vocabulary file.
pub fn save_sparse(
    corpus: &LabeledCorpus,
    corpus_path: &Path,
    vocab_path: &Path,
) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(fs::File::create(corpus_path)?);
    for (doc, &label) in corpus.docs.iter().zip(&corpus.labels) {
        let name = &corpus.class_names[label];
        if doc.entries().is_empty() {
            writeln!(w, "{name}")?;
        } else {
            write!(w, "{name}\t")?;
            for (i, &(idx, cnt)) in doc.entries().iter().enumerate() {
                if i > 0 {
                    write!(w, " ")?;
                }
                write!(w, "{idx}:{cnt}")?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;

    let mut v = BufWriter::new(fs::File::create(vocab_path)?);
    for term in corpus.vocabulary.terms() {
        writeln!(v, "{term}")?;
    }
    v.flush()?;
    Ok(())
}

/// Loads a sparse corpus. With a vocabulary file, feature indices are range
/// checked against it; without one, the vocabulary is synthesized as
/// `f0..f(M-1)` with M = max index + 1. Document frequencies are recomputed
/// from the documents. Class order follows first appearance.
pub fn load_sparse(
    corpus_path: &Path,
    vocab_path: Option<&Path>,
) -> Result<LabeledCorpus, CorpusError> {
    let terms: Option<Vec<String>> = match vocab_path {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            Some(text.lines().map(str::to_string).collect())
        }
        None => None,
    };

    let reader = BufReader::new(fs::File::open(corpus_path)?);
    let mut raw_docs: Vec<(String, Vec<(usize, u32)>)> = Vec::new();
    let mut max_index: Option<usize> = None;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        if line.is_empty() {
            return Err(CorpusError::Parse { line: lineno, msg: "empty line".into() });
        }
        let (name, rest) = match line.split_once('\t') {
            Some((n, r)) => (n, r),
            None => (line.as_str(), ""),
        };
        if name.is_empty() {
            return Err(CorpusError::Parse { line: lineno, msg: "missing class name".into() });
        }
        let mut entries: Vec<(usize, u32)> = Vec::new();
        for pair in rest.split(' ').filter(|p| !p.is_empty()) {
            let (idx_s, cnt_s) = pair.split_once(':').ok_or_else(|| CorpusError::Parse {
                line: lineno,
                msg: format!("malformed pair {pair:?}, expected <idx>:<count>"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| CorpusError::Parse {
                line: lineno,
                msg: format!("bad feature index {idx_s:?}"),
            })?;
            let cnt: u32 = cnt_s.parse().map_err(|_| CorpusError::Parse {
                line: lineno,
                msg: format!("bad count {cnt_s:?}"),
            })?;
            if cnt == 0 {
                return Err(CorpusError::Parse { line: lineno, msg: "count must be positive".into() });
            }
            if let Some(t) = &terms {
                if idx >= t.len() {
                    return Err(CorpusError::IndexOutOfRange { line: lineno, index: idx, len: t.len() });
                }
            }
            if let Some(&(prev, _)) = entries.last() {
                if idx <= prev {
                    return Err(CorpusError::Parse {
                        line: lineno,
                        msg: format!("indices not strictly increasing at {idx}"),
                    });
                }
            }
            max_index = Some(max_index.map_or(idx, |m| m.max(idx)));
            entries.push((idx, cnt));
        }
        raw_docs.push((name.to_string(), entries));
    }

    let terms = terms.unwrap_or_else(|| {
        let m = max_index.map_or(0, |i| i + 1);
        (0..m).map(|i| format!("f{i}")).collect()
    });

    let mut df = vec![0u32; terms.len()];
    for (_, entries) in &raw_docs {
        for &(idx, _) in entries {
            df[idx] += 1;
        }
    }
    let vocabulary = Vocabulary::new(terms, df)?;

    let (labels, class_names) = assign_labels(raw_docs.iter().map(|(n, _)| n.as_str()));
    let docs = raw_docs
        .into_iter()
        .map(|(_, entries)| SparseDocument::new(entries))
        .collect::<Result<Vec<_>, _>>()?;
    LabeledCorpus::new(docs, labels, class_names, vocabulary)
}
