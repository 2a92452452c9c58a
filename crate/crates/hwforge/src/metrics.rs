//! Recognition and annotation metrics: Damerau-Levenshtein edit
//! distance (optimal string alignment), CER/WER, Cohen's kappa, and
//! corpus character-frequency statistics.
//!
//! CER counts Unicode codepoints after NFC normalization; WER tokens
//! are maximal non-whitespace runs compared by exact equality. Corpus
//! scores are micro-averages: summed edits over summed reference
//! lengths.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::hash::Hash;

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::pipeline::ManifestRecord;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("pair {id:?}: reference is empty")]
    EmptyReference { id: String },
    #[error("pair {id:?}: reference has no tokens")]
    NoReferenceTokens { id: String },
    #[error("label sequences differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("label sequences are empty")]
    EmptyLabels,
    #[error("raters are constant and disagree; kappa is undefined")]
    UndefinedKappa,
    #[error("no pairs supplied")]
    EmptyCorpus,
    #[error("manifest has no transcript characters")]
    EmptyTranscripts,
}

/// One reference/hypothesis pair. Both texts are NFC-normalized on
/// construction so diacritic encodings compare consistently.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalPair {
    pub id: String,
    pub reference: String,
    pub hypothesis: String,
}

impl EvalPair {
    pub fn new(
        id: impl Into<String>,
        reference: &str,
        hypothesis: &str,
    ) -> EvalPair {
        EvalPair {
            id: id.into(),
            reference: reference.nfc().collect(),
            hypothesis: hypothesis.nfc().collect(),
        }
    }
}

/// Corpus-level scores; `cer = char_edits / char_total`,
/// `wer = word_edits / word_total`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScoreReport {
    pub cer: f64,
    pub wer: f64,
    pub char_edits: usize,
    pub char_total: usize,
    pub word_edits: usize,
    pub word_total: usize,
    pub pair_count: usize,
}

/// Optimal-string-alignment Damerau-Levenshtein distance: insertions,
/// deletions, substitutions and adjacent transpositions, with no
/// substring edited twice.
pub fn damerau_levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (n, m) = (a.len(), b.len());
    if n == 0 {
        return m;
    }
    if m == 0 {
        return n;
    }
    // Three rolling rows: i-2, i-1, i.
    let mut prev2 = vec![0usize; m + 1];
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut cur = vec![0usize; m + 1];

    for i in 1..=n {
        cur[0] = i;
        for j in 1..=m {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            let mut best = (prev[j] + 1).min(cur[j - 1] + 1).min(prev[j - 1] + cost);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                best = best.min(prev2[j - 2] + 1);
            }
            cur[j] = best;
        }
        std::mem::swap(&mut prev2, &mut prev);
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

fn char_edit_counts(pair: &EvalPair) -> Result<(usize, usize), MetricsError> {
    let reference: Vec<char> = pair.reference.chars().collect();
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference {
            id: pair.id.clone(),
        });
    }
    let hypothesis: Vec<char> = pair.hypothesis.chars().collect();
    Ok((damerau_levenshtein(&reference, &hypothesis), reference.len()))
}

fn word_edit_counts(pair: &EvalPair) -> Result<(usize, usize), MetricsError> {
    let reference: Vec<&str> = pair.reference.split_whitespace().collect();
    if reference.is_empty() {
        return Err(MetricsError::NoReferenceTokens {
            id: pair.id.clone(),
        });
    }
    let hypothesis: Vec<&str> = pair.hypothesis.split_whitespace().collect();
    Ok((damerau_levenshtein(&reference, &hypothesis), reference.len()))
}

/// Character error rate: codepoint edit distance over reference length.
pub fn cer(pair: &EvalPair) -> Result<f64, MetricsError> {
    let (edits, len) = char_edit_counts(pair)?;
    Ok(edits as f64 / len as f64)
}

/// Word error rate: token edit distance over reference token count.
pub fn wer(pair: &EvalPair) -> Result<f64, MetricsError> {
    let (edits, len) = word_edit_counts(pair)?;
    Ok(edits as f64 / len as f64)
}

/// Micro-averaged corpus score: sum of edits over sum of reference
/// lengths, at both character and token granularity.
pub fn corpus_score(pairs: &[EvalPair]) -> Result<ScoreReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut char_edits = 0usize;
    let mut char_total = 0usize;
    let mut word_edits = 0usize;
    let mut word_total = 0usize;
    for pair in pairs {
        let (ce, cl) = char_edit_counts(pair)?;
        let (we, wl) = word_edit_counts(pair)?;
        char_edits += ce;
        char_total += cl;
        word_edits += we;
        word_total += wl;
    }
    Ok(ScoreReport {
        cer: char_edits as f64 / char_total as f64,
        wer: word_edits as f64 / word_total as f64,
        char_edits,
        char_total,
        word_edits,
        word_total,
        pair_count: pairs.len(),
    })
}

/// Cohen's kappa between two label sequences:
/// kappa = (p_o - p_e) / (1 - p_e). Perfect observed agreement returns
/// exactly 1 (including the degenerate case where both raters are
/// constant and identical, p_e = 1); constant disagreeing raters make
/// kappa undefined.
pub fn cohen_kappa<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(MetricsError::EmptyLabels);
    }
    let n = a.len() as f64;
    let observed = a.iter().zip(b.iter()).filter(|(x, y)| x == y).count() as f64 / n;
    if observed == 1.0 {
        return Ok(1.0);
    }

    // Categories indexed in first-appearance order so the p_e summation
    // order (and thus the exact float result) is input-determined.
    let mut index: HashMap<&T, usize> = HashMap::new();
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for x in a {
        let i = *index.entry(x).or_insert_with(|| {
            counts.push((0, 0));
            counts.len() - 1
        });
        counts[i].0 += 1;
    }
    for y in b {
        let i = *index.entry(y).or_insert_with(|| {
            counts.push((0, 0));
            counts.len() - 1
        });
        counts[i].1 += 1;
    }
    let expected: f64 = counts
        .iter()
        .map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n))
        .sum();

    if (1.0 - expected).abs() < f64::EPSILON {
        return Err(MetricsError::UndefinedKappa);
    }
    Ok((observed - expected) / (1.0 - expected))
}

/// Character class selector for [`char_frequency`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharClass {
    /// Unicode numeric characters, plus the letters of whole tokens
    /// that form Roman numerals (strict uppercase form).
    Numeric,
    /// Unicode alphabetic characters.
    Alphabetic,
    /// Every distinct non-whitespace symbol.
    All,
}

/// Frequency of a character class over all manifest transcripts:
/// occurrences divided by the total non-whitespace codepoint count.
/// `Numeric` and `Alphabetic` yield a single-entry map keyed by the
/// class name; `All` maps every distinct symbol to its frequency.
pub fn char_frequency(
    manifest: &[ManifestRecord],
    class: CharClass,
) -> Result<BTreeMap<String, f64>, MetricsError> {
    let mut total = 0usize;
    let mut numeric = 0usize;
    let mut alphabetic = 0usize;
    let mut per_symbol: BTreeMap<String, usize> = BTreeMap::new();

    for record in manifest {
        let transcript: String = record.transcript.nfc().collect();
        for ch in transcript.chars().filter(|c| !c.is_whitespace()) {
            total += 1;
            if ch.is_numeric() {
                numeric += 1;
            }
            if ch.is_alphabetic() {
                alphabetic += 1;
            }
            if class == CharClass::All {
                *per_symbol.entry(ch.to_string()).or_default() += 1;
            }
        }
        for token in transcript.split_whitespace() {
            if is_roman_numeral(token) {
                // The letters of a Roman-numeral token count as numeric.
                numeric += token.chars().count();
            }
        }
    }
    if total == 0 {
        return Err(MetricsError::EmptyTranscripts);
    }

    let mut out = BTreeMap::new();
    match class {
        CharClass::Numeric => {
            out.insert("numeric".to_string(), numeric as f64 / total as f64);
        }
        CharClass::Alphabetic => {
            out.insert("alphabetic".to_string(), alphabetic as f64 / total as f64);
        }
        CharClass::All => {
            for (symbol, count) in per_symbol {
                out.insert(symbol, count as f64 / total as f64);
            }
        }
    }
    Ok(out)
}

/// Strict uppercase Roman numeral: M{0,3}(CM|CD|D?C{0,3})(XC|XL|L?X{0,3})(IX|IV|V?I{0,3}),
/// non-empty.
fn is_roman_numeral(token: &str) -> bool {
    if token.is_empty() {
        return false;
    }
    let mut rest = token;
    let mut take = |options: &[&str]| {
        for opt in options {
            if let Some(r) = rest.strip_prefix(opt) {
                rest = r;
                return;
            }
        }
    };
    for _ in 0..3 {
        take(&["M"]);
    }
    take(&["CM", "CD"]);
    take(&["D"]);
    for _ in 0..3 {
        take(&["C"]);
    }
    take(&["XC", "XL"]);
    take(&["L"]);
    for _ in 0..3 {
        take(&["X"]);
    }
    take(&["IX", "IV"]);
    take(&["V"]);
    for _ in 0..3 {
        take(&["I"]);
    }
    rest.is_empty()
}
