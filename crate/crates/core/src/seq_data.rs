//! Trace ingestion, alphabet construction and sequence encoding.
//!
//! A trace file holds one whitespace-separated token stream (opcodes or API
//! call names). Lines whose first non-blank character is `#` are comments.
//! The alphabet keeps the most frequent tokens and folds the remainder into
//! a reserved OTHER symbol.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Token string of the reserved OTHER symbol. The NUL prefix cannot occur in
/// a whitespace-tokenized trace line produced by a disassembler or sandbox.
pub const OTHER_TOKEN: &str = "\u{0}OTHER";

const ALPHABET_HEADER: &str = "ALPHABET v1";

/// Splits trace text into tokens, skipping `#` comment lines.
pub fn parse_trace_text(text: &str, source_name: &str) -> Result<Vec<String>> {
    let tokens: Vec<String> = text
        .lines()
        .filter(|line| !line.trim_start().starts_with('#'))
        .flat_map(str::split_whitespace)
        .map(str::to_owned)
        .collect();
    if tokens.is_empty() {
        return Err(Error::EmptyTrace(source_name.to_owned()));
    }
    Ok(tokens)
}

pub fn parse_trace_file(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_trace_text(&text, &path.display().to_string())
}

/// A named raw token trace, before encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTrace {
    pub name: String,
    pub tokens: Vec<String>,
}

/// Reads every regular file in `dir` as a trace, in file-name order.
///
/// Hidden files (leading `.`) are skipped. An empty directory yields an
/// empty list; callers decide whether that is an error.
pub fn load_trace_dir(dir: &Path) -> Result<Vec<RawTrace>> {
    let io_err = |source| Error::Io {
        path: dir.to_owned(),
        source,
    };
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let entry = entry.map_err(io_err)?;
        let path = entry.path();
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if path.is_file() && !hidden {
            paths.push(path);
        }
    }
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let tokens = parse_trace_file(&path)?;
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(RawTrace { name, tokens })
        })
        .collect()
}

/// Bidirectional token/symbol-id map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
    other_id: Option<usize>,
}

impl Alphabet {
    /// Builds an alphabet from an explicit token list. Passing
    /// [`OTHER_TOKEN`] as one of the tokens marks it as the OTHER bucket.
    pub fn from_symbols<S: AsRef<str>>(symbols: &[S]) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidArgument("alphabet must have at least one symbol".into()));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        let mut other_id = None;
        let mut owned = Vec::with_capacity(symbols.len());
        for (id, token) in symbols.iter().enumerate() {
            let token = token.as_ref();
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!("invalid alphabet token {token:?}")));
            }
            if index.insert(token.to_owned(), id).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate alphabet token {token:?}")));
            }
            if token == OTHER_TOKEN {
                other_id = Some(id);
            }
            owned.push(token.to_owned());
        }
        Ok(Alphabet {
            symbols: owned,
            index,
            other_id,
        })
    }

    /// Keeps the `max_symbols` most frequent tokens (descending frequency,
    /// ties by token order) and appends OTHER if anything was dropped.
    pub fn build<S: AsRef<str>>(corpora: &[Vec<S>], max_symbols: usize) -> Result<Self> {
        if max_symbols == 0 {
            return Err(Error::InvalidArgument("max_symbols must be at least 1".into()));
        }
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for token in corpora.iter().flatten() {
            *counts.entry(token.as_ref()).or_insert(0) += 1;
        }
        if counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        // BTreeMap iteration is already in token order, so a stable sort on
        // descending count leaves ties lexicographic.
        let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
        ranked.sort_by_key(|&(_, c)| std::cmp::Reverse(c));
        let overflow = ranked.len() > max_symbols;
        let mut symbols: Vec<&str> = ranked.iter().take(max_symbols).map(|(t, _)| *t).collect();
        if overflow {
            symbols.push(OTHER_TOKEN);
        }
        Self::from_symbols(&symbols)
    }

    /// Number of symbols (including OTHER when present).
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn other_id(&self) -> Option<usize> {
        self.other_id
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Display form of a token; OTHER is shown as `<OTHER>`.
    pub fn display_token(&self, id: usize) -> &str {
        match self.token(id) {
            Some(OTHER_TOKEN) => "<OTHER>",
            Some(t) => t,
            None => "?",
        }
    }

    /// Maps tokens to ids; tokens outside the alphabet go to OTHER.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S], source_name: &str) -> Result<ObservationSequence> {
        if tokens.is_empty() {
            return Err(Error::EmptyTrace(source_name.to_owned()));
        }
        let ids = tokens
            .iter()
            .map(|t| {
                let t = t.as_ref();
                self.id_of(t)
                    .or(self.other_id)
                    .ok_or_else(|| Error::UnknownTokenWithoutOther(t.to_owned()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ObservationSequence {
            ids,
            source_name: source_name.to_owned(),
        })
    }

    pub fn decode(&self, obs: &ObservationSequence) -> Result<Vec<String>> {
        obs.ids
            .iter()
            .map(|&id| {
                self.token(id).map(str::to_owned).ok_or(Error::SymbolOutOfRange {
                    id,
                    size: self.len(),
                })
            })
            .collect()
    }

    /// Serializes to the `ALPHABET v1` text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let other = self
            .other_id
            .map_or_else(|| "none".to_owned(), |id| id.to_string());
        let _ = writeln!(out, "{ALPHABET_HEADER}");
        let _ = writeln!(out, "M {} OTHER {}", self.len(), other);
        for symbol in &self.symbols {
            let _ = writeln!(out, "{symbol}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |line, msg: &str| Error::parse("alphabet", line, msg);
        let mut lines = text.lines();
        if lines.next().map(str::trim_end) != Some(ALPHABET_HEADER) {
            return Err(perr(1, "expected header \"ALPHABET v1\""));
        }
        let meta: Vec<&str> = lines
            .next()
            .ok_or_else(|| perr(2, "missing size line"))?
            .split_whitespace()
            .collect();
        let (m, other) = match meta.as_slice() {
            ["M", m, "OTHER", other] => {
                let m: usize = m.parse().map_err(|_| perr(2, "invalid M"))?;
                let other = match *other {
                    "none" => None,
                    id => Some(id.parse::<usize>().map_err(|_| perr(2, "invalid OTHER id"))?),
                };
                (m, other)
            }
            _ => return Err(perr(2, "expected \"M <int> OTHER <id|none>\"")),
        };
        let symbols: Vec<&str> = lines.take(m).map(str::trim_end).collect();
        if symbols.len() != m {
            return Err(perr(3 + symbols.len(), "fewer tokens than M"));
        }
        let alphabet = Self::from_symbols(&symbols).map_err(|e| perr(3, &e.to_string()))?;
        if alphabet.other_id != other {
            return Err(perr(2, "OTHER id does not match the sentinel position"));
        }
        Ok(alphabet)
    }
}

/// An encoded trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationSequence {
    pub ids: Vec<usize>,
    pub source_name: String,
}

impl ObservationSequence {
    pub fn new(ids: Vec<usize>, source_name: impl Into<String>) -> Self {
        ObservationSequence {
            ids,
            source_name: source_name.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

impl AsRef<[usize]> for ObservationSequence {
    fn as_ref(&self) -> &[usize] {
        &self.ids
    }
}

/// Encoded traces belonging to one family (or the benign set).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceCorpus {
    pub family_name: String,
    pub sequences: Vec<ObservationSequence>,
}

impl TraceCorpus {
    pub fn new(family_name: impl Into<String>, sequences: Vec<ObservationSequence>) -> Result<Self> {
        let mut seen = HashSet::new();
        for seq in &sequences {
            if !seen.insert(seq.source_name.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate sequence name {:?}",
                    seq.source_name
                )));
            }
        }
        Ok(TraceCorpus {
            family_name: family_name.into(),
            sequences,
        })
    }

    pub fn encode(family_name: impl Into<String>, traces: &[RawTrace], alphabet: &Alphabet) -> Result<Self> {
        let sequences = traces
            .iter()
            .map(|t| alphabet.encode(&t.tokens, &t.name))
            .collect::<Result<Vec<_>>>()?;
        Self::new(family_name, sequences)
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn parse_splits_lines_and_skips_comments() {
        assert_eq!(parse_trace_text("A B\nA", "t").unwrap(), toks("A B A"));
        assert_eq!(
            parse_trace_text("# hdr\nNtOpenFile NtClose", "t").unwrap(),
            toks("NtOpenFile NtClose")
        );
        assert!(matches!(parse_trace_text("", "t"), Err(Error::EmptyTrace(_))));
        assert!(matches!(parse_trace_text("# only\n  \n", "t"), Err(Error::EmptyTrace(_))));
    }

    #[test]
    fn build_truncates_with_other() {
        let corpus = vec![toks("A A A B C A B A B")];
        let a = Alphabet::build(&corpus, 2).unwrap();
        assert_eq!(a.symbols(), &["A", "B", OTHER_TOKEN]);
        assert_eq!(a.len(), 3);
        assert_eq!(a.other_id(), Some(2));
    }

    #[test]
    fn build_without_overflow_has_no_other() {
        let a = Alphabet::build(&[toks("B A B A")], 4).unwrap();
        assert_eq!(a.symbols(), &["A", "B"]);
        assert_eq!(a.other_id(), None);
    }

    #[test]
    fn build_rejects_empty() {
        let empty: Vec<Vec<String>> = vec![vec![]];
        assert!(matches!(Alphabet::build(&empty, 3), Err(Error::EmptyCorpus)));
        assert!(Alphabet::build(&[toks("A")], 0).is_err());
    }

    #[test]
    fn encode_maps_unknown_to_other() {
        let a = Alphabet::from_symbols(&["A", "B", OTHER_TOKEN]).unwrap();
        assert_eq!(a.encode(&toks("A C B"), "s").unwrap().ids, vec![0, 2, 1]);

        let b = Alphabet::from_symbols(&["A", "B"]).unwrap();
        assert_eq!(b.encode(&toks("A B A"), "s").unwrap().ids, vec![0, 1, 0]);
        assert!(matches!(
            b.encode(&toks("A Z"), "s"),
            Err(Error::UnknownTokenWithoutOther(t)) if t == "Z"
        ));
    }

    #[test]
    fn text_round_trip() {
        let a = Alphabet::build(&[toks("x y z x y x")], 2).unwrap();
        let text = a.to_text();
        assert!(text.starts_with("ALPHABET v1\nM 3 OTHER 2\n"));
        assert_eq!(Alphabet::from_text(&text).unwrap(), a);

        let plain = Alphabet::from_symbols(&["p", "q"]).unwrap();
        assert!(plain.to_text().contains("OTHER none"));
        assert_eq!(Alphabet::from_text(&plain.to_text()).unwrap(), plain);
    }

    #[test]
    fn from_text_reports_line() {
        let err = Alphabet::from_text("ALPHABET v1\nM 3 OTHER none\na\nb\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }), "{err}");
        assert!(Alphabet::from_text("HMM v1\n").is_err());
    }

    #[test]
    fn duplicate_corpus_names_rejected() {
        let s = ObservationSequence::new(vec![0], "a");
        assert!(TraceCorpus::new("f", vec![s.clone(), s]).is_err());
    }
}
