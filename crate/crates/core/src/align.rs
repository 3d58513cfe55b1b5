//! Pairwise alignment by dynamic programming with a substitution matrix and
//! an affine gap penalty (Gotoh's three-state recursion).
//!
//! Two modes are provided. [`global_align`] scores every column.
//! [`semi_local_align`] lets both sequences drop a prefix and a suffix for
//! free: the scored core runs from the first to the last aligned symbol
//! pair, and everything outside it is emitted as free gap columns so that
//! both rows still spell out their full input.

use std::fmt::Write as _;

use crate::error::{Error, Result};

type ColumnPair = (Option<usize>, Option<usize>);

pub type Score = i64;

const NEG: Score = Score::MIN / 4;

/// Default score for aligning a symbol with itself.
pub const DEFAULT_MATCH: Score = 2;
/// Default score for aligning two different symbols (and anything with OTHER).
pub const DEFAULT_MISMATCH: Score = -1;
pub const DEFAULT_GAP_OPEN: Score = 3;
pub const DEFAULT_GAP_EXTEND: Score = 1;

const SUBST_HEADER: &str = "SUBST v1";

/// Symmetric score matrix over symbol ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstitutionMatrix {
    size: usize,
    scores: Vec<Score>,
}

impl SubstitutionMatrix {
    pub fn new(rows: Vec<Vec<Score>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 || rows.iter().any(|r| r.len() != size) {
            return Err(Error::InvalidArgument("substitution matrix must be square and non-empty".into()));
        }
        for i in 0..size {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::InvalidArgument(format!(
                        "substitution matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(SubstitutionMatrix {
            size,
            scores: rows.into_iter().flatten().collect(),
        })
    }

    /// +2 on the diagonal, -1 elsewhere; the OTHER symbol scores -1 against
    /// everything including itself.
    pub fn identity_default(size: usize, other_id: Option<usize>) -> Self {
        let scores = (0..size)
            .flat_map(|i| {
                (0..size).map(move |j| {
                    if i == j && Some(i) != other_id {
                        DEFAULT_MATCH
                    } else {
                        DEFAULT_MISMATCH
                    }
                })
            })
            .collect();
        SubstitutionMatrix { size, scores }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn score(&self, a: usize, b: usize) -> Score {
        self.scores[a * self.size + b]
    }

    /// Adds `delta` to every diagonal entry.
    pub fn with_diagonal_bonus(&self, delta: Score) -> Self {
        let mut out = self.clone();
        for i in 0..self.size {
            out.scores[i * self.size + i] += delta;
        }
        out
    }

    pub(crate) fn check(&self, seq: &[usize]) -> Result<()> {
        match seq.iter().find(|&&s| s >= self.size) {
            Some(&s) => Err(Error::AlphabetMismatch(format!(
                "symbol {s} outside a {}-symbol substitution matrix",
                self.size
            ))),
            None => Ok(()),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{SUBST_HEADER}\n{}\n", self.size);
        for row in self.scores.chunks(self.size) {
            let cells: Vec<String> = row.iter().map(Score::to_string).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |line, msg: &str| Error::parse("substitution matrix", line, msg);
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, SUBST_HEADER)) => {}
            Some((ln, _)) => return Err(perr(ln, "expected header \"SUBST v1\"")),
            None => return Err(perr(1, "empty file")),
        }
        let (ln, size) = lines.next().ok_or_else(|| perr(2, "missing size"))?;
        let size: usize = size.parse().map_err(|_| perr(ln, "invalid size"))?;
        let mut rows = Vec::with_capacity(size);
        for _ in 0..size {
            let (ln, row) = lines.next().ok_or_else(|| perr(ln, "fewer rows than declared"))?;
            let row = row
                .split_whitespace()
                .map(str::parse::<Score>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| perr(ln, "invalid integer"))?;
            if row.len() != size {
                return Err(perr(ln, &format!("expected {size} entries")));
            }
            rows.push(row);
        }
        Self::new(rows).map_err(|e| perr(0, &e.to_string()))
    }
}

/// Affine gap cost: a run of `k` gaps costs `open + extend * (k - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapPenalty {
    open: Score,
    extend: Score,
}

impl GapPenalty {
    pub fn new(open: Score, extend: Score) -> Result<Self> {
        if extend < 0 || open < extend {
            return Err(Error::InvalidArgument(format!(
                "gap penalty needs open >= extend >= 0 (got open {open}, extend {extend})"
            )));
        }
        Ok(GapPenalty { open, extend })
    }

    pub fn open(&self) -> Score {
        self.open
    }

    pub fn extend(&self) -> Score {
        self.extend
    }

    pub fn run_cost(&self, len: usize) -> Score {
        if len == 0 {
            0
        } else {
            self.open + self.extend * (len as Score - 1)
        }
    }
}

impl Default for GapPenalty {
    fn default() -> Self {
        GapPenalty {
            open: DEFAULT_GAP_OPEN,
            extend: DEFAULT_GAP_EXTEND,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignMode {
    Global,
    SemiLocal,
}

/// Two equal-length rows where `None` is a gap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairwiseAlignment {
    pub row_a: Vec<Option<usize>>,
    pub row_b: Vec<Option<usize>>,
    /// Columns outside the scored core (semi-local mode only).
    pub free: Vec<bool>,
    pub score: Score,
    pub mode: AlignMode,
}

impl PairwiseAlignment {
    pub fn width(&self) -> usize {
        self.row_a.len()
    }

    /// Number of scored columns.
    pub fn core_width(&self) -> usize {
        self.free.iter().filter(|f| !**f).count()
    }

    /// Columns holding the same symbol in both rows.
    pub fn identical_columns(&self) -> usize {
        self.row_a
            .iter()
            .zip(&self.row_b)
            .filter(|(a, b)| a.is_some() && a == b)
            .count()
    }

    /// Recomputes the score column by column.
    pub fn rescore(&self, subst: &SubstitutionMatrix, gap: GapPenalty) -> Score {
        score_columns(&self.row_a, &self.row_b, &self.free, subst, gap)
    }
}

/// Scores an alignment given as rows, skipping columns flagged free.
pub fn score_columns(
    row_a: &[Option<usize>],
    row_b: &[Option<usize>],
    free: &[bool],
    subst: &SubstitutionMatrix,
    gap: GapPenalty,
) -> Score {
    let mut total = 0;
    let mut prev: Option<(bool, bool)> = None;
    for ((a, b), &is_free) in row_a.iter().zip(row_b).zip(free) {
        if is_free {
            prev = None;
            continue;
        }
        match (a, b) {
            (Some(x), Some(y)) => total += subst.score(*x, *y),
            (Some(_), None) => {
                total -= if prev == Some((false, true)) { gap.extend } else { gap.open };
            }
            (None, Some(_)) => {
                total -= if prev == Some((true, false)) { gap.extend } else { gap.open };
            }
            (None, None) => {}
        }
        prev = Some((a.is_none(), b.is_none()));
    }
    total
}

// Gotoh states. X: gap in row b (a advances), Y: gap in row a (b advances).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Pair,
    GapB,
    GapA,
    Start,
}

struct Lattice {
    cols: usize,
    score: [Vec<Score>; 3],
    from: [Vec<State>; 3],
}

impl Lattice {
    fn new(rows: usize, cols: usize) -> Self {
        let len = rows * cols;
        Lattice {
            cols,
            score: [vec![NEG; len], vec![NEG; len], vec![NEG; len]],
            from: [vec![State::Start; len], vec![State::Start; len], vec![State::Start; len]],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.cols + j
    }

    /// Best predecessor among the three states at `idx`, each adjusted by
    /// its own cost. Earlier entries win ties.
    #[inline]
    fn best(&self, idx: usize, costs: [Score; 3]) -> (Score, State) {
        let mut best = (NEG, State::Start);
        for (k, state) in [State::Pair, State::GapB, State::GapA].into_iter().enumerate() {
            let s = self.score[k][idx];
            if s > NEG && s - costs[k] > best.0 {
                best = (s - costs[k], state);
            }
        }
        best
    }
}

fn validate(a: &[usize], b: &[usize], subst: &SubstitutionMatrix) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("cannot align an empty sequence".into()));
    }
    subst.check(a)?;
    subst.check(b)
}

fn fill(a: &[usize], b: &[usize], subst: &SubstitutionMatrix, gap: GapPenalty, mode: AlignMode) -> Lattice {
    let (n, m) = (a.len(), b.len());
    let mut lat = Lattice::new(n + 1, m + 1);
    if mode == AlignMode::Global {
        let origin = lat.at(0, 0);
        lat.score[0][origin] = 0;
    }
    let (open, ext) = (gap.open, gap.extend);
    for i in 0..=n {
        for j in 0..=m {
            let here = lat.at(i, j);
            if i > 0 && j > 0 {
                let (mut best, mut from) = lat.best(lat.at(i - 1, j - 1), [0, 0, 0]);
                if mode == AlignMode::SemiLocal && best < 0 {
                    // Dropping both prefixes beats any continuation.
                    best = 0;
                    from = State::Start;
                }
                if best > NEG {
                    lat.score[0][here] = best + subst.score(a[i - 1], b[j - 1]);
                    lat.from[0][here] = from;
                }
            }
            if i > 0 {
                let (best, from) = lat.best(lat.at(i - 1, j), [open, ext, open]);
                if best > NEG {
                    lat.score[1][here] = best;
                    lat.from[1][here] = from;
                }
            }
            if j > 0 {
                let (best, from) = lat.best(lat.at(i, j - 1), [open, open, ext]);
                if best > NEG {
                    lat.score[2][here] = best;
                    lat.from[2][here] = from;
                }
            }
        }
    }
    lat
}

/// Walks back from `(i, j)` in `state`; returns the core columns and the
/// cell where the walk stopped.
fn traceback(
    lat: &Lattice,
    a: &[usize],
    b: &[usize],
    mut i: usize,
    mut j: usize,
    mut state: State,
) -> (Vec<ColumnPair>, usize, usize) {
    let mut cols = Vec::with_capacity(i + j);
    while i > 0 || j > 0 {
        let idx = lat.at(i, j);
        let prev = match state {
            State::Pair => {
                cols.push((Some(a[i - 1]), Some(b[j - 1])));
                let p = lat.from[0][idx];
                i -= 1;
                j -= 1;
                p
            }
            State::GapB => {
                cols.push((Some(a[i - 1]), None));
                let p = lat.from[1][idx];
                i -= 1;
                p
            }
            State::GapA => {
                cols.push((None, Some(b[j - 1])));
                let p = lat.from[2][idx];
                j -= 1;
                p
            }
            State::Start => break,
        };
        state = prev;
    }
    cols.reverse();
    (cols, i, j)
}

/// Optimal global alignment. Traceback prefers a substitution over a gap in
/// `b` over a gap in `a`.
pub fn global_align(a: &[usize], b: &[usize], subst: &SubstitutionMatrix, gap: GapPenalty) -> Result<PairwiseAlignment> {
    validate(a, b, subst)?;
    let lat = fill(a, b, subst, gap, AlignMode::Global);
    let end = lat.at(a.len(), b.len());
    let (score, state) = [State::Pair, State::GapB, State::GapA]
        .into_iter()
        .enumerate()
        .fold((NEG, State::Start), |best, (k, st)| {
            if lat.score[k][end] > best.0 {
                (lat.score[k][end], st)
            } else {
                best
            }
        });
    let (cols, _, _) = traceback(&lat, a, b, a.len(), b.len(), state);
    let (row_a, row_b): (Vec<_>, Vec<_>) = cols.into_iter().unzip();
    let free = vec![false; row_a.len()];
    Ok(PairwiseAlignment {
        row_a,
        row_b,
        free,
        score,
        mode: AlignMode::Global,
    })
}

/// Optimal alignment where leading and trailing unaligned stretches of
/// either sequence cost nothing. Among equal-scoring cores the longest
/// ending (largest `i`, then `j`) is kept.
pub fn semi_local_align(
    a: &[usize],
    b: &[usize],
    subst: &SubstitutionMatrix,
    gap: GapPenalty,
) -> Result<PairwiseAlignment> {
    validate(a, b, subst)?;
    let lat = fill(a, b, subst, gap, AlignMode::SemiLocal);
    let mut end = (NEG, 1, 1);
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let s = lat.score[0][lat.at(i, j)];
            if s >= end.0 {
                end = (s, i, j);
            }
        }
    }
    let (score, i_end, j_end) = end;
    let (core, i_start, j_start) = traceback(&lat, a, b, i_end, j_end, State::Pair);

    let mut row_a = Vec::with_capacity(a.len() + b.len());
    let mut row_b = Vec::with_capacity(a.len() + b.len());
    let mut free = Vec::with_capacity(a.len() + b.len());
    let mut push = |x: Option<usize>, y: Option<usize>, is_free: bool| {
        row_a.push(x);
        row_b.push(y);
        free.push(is_free);
    };
    a[..i_start].iter().for_each(|&s| push(Some(s), None, true));
    b[..j_start].iter().for_each(|&s| push(None, Some(s), true));
    core.into_iter().for_each(|(x, y)| push(x, y, false));
    a[i_end..].iter().for_each(|&s| push(Some(s), None, true));
    b[j_end..].iter().for_each(|&s| push(None, Some(s), true));

    Ok(PairwiseAlignment {
        row_a,
        row_b,
        free,
        score,
        mode: AlignMode::SemiLocal,
    })
}
