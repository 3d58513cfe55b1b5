//! Progressive multiple sequence alignment guided by a maximum-score
//! spanning tree over pairwise alignment scores.
//!
//! 1. Score every pair with [`semi_local_align`].
//! 2. Pick `n - 1` pairs connecting all sequences with maximum total score
//!    (Prim's algorithm on the score graph).
//! 3. Walk the tree from its highest-scoring edge, adding one new sequence
//!    per step by aligning it against the MSA row of its tree neighbour.
//!    Columns required by the new sequence are inserted across all existing
//!    rows; existing gaps are never removed.

use std::fmt::Write as _;

use crate::align::{semi_local_align, GapPenalty, Score, SubstitutionMatrix};
use crate::error::{Error, Result};
use crate::seq_data::Alphabet;

const MSA_HEADER: &str = "MSA v1";

/// Symmetric table of pairwise alignment scores. The diagonal is unused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairScoreTable {
    n: usize,
    scores: Vec<Vec<Score>>,
}

impl PairScoreTable {
    pub fn from_rows(scores: Vec<Vec<Score>>) -> Result<Self> {
        let n = scores.len();
        if scores.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("score table must be square".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if scores[i][j] != scores[j][i] {
                    return Err(Error::InvalidArgument(format!("score table not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(PairScoreTable { n, scores })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> Score {
        self.scores[i][j]
    }
}

/// Semi-local alignment score for every pair of sequences.
pub fn pair_score_table<S: AsRef<[usize]>>(
    sequences: &[S],
    subst: &SubstitutionMatrix,
    gap: GapPenalty,
) -> Result<PairScoreTable> {
    let n = sequences.len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two sequences".into()));
    }
    let mut scores = vec![vec![0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let s = semi_local_align(sequences[i].as_ref(), sequences[j].as_ref(), subst, gap)?.score;
            scores[i][j] = s;
            scores[j][i] = s;
        }
    }
    Ok(PairScoreTable { n, scores })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpanningEdge {
    /// Endpoint already in the tree when the edge was chosen.
    pub from: usize,
    pub to: usize,
    pub score: Score,
}

impl SpanningEdge {
    /// Endpoints as `(min, max)`.
    pub fn key(&self) -> (usize, usize) {
        (self.from.min(self.to), self.from.max(self.to))
    }
}

/// `n - 1` edges forming a spanning tree, in the order Prim added them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanningEdgeSet {
    pub n: usize,
    pub edges: Vec<SpanningEdge>,
}

impl SpanningEdgeSet {
    pub fn total_score(&self) -> Score {
        self.edges.iter().map(|e| e.score).sum()
    }
}

/// Maximum-score spanning tree by Prim's algorithm, grown from the lower
/// endpoint of the best-scoring pair. Ties go to the lower new index, then
/// the lower tree endpoint.
pub fn select_spanning_edges(table: &PairScoreTable) -> Result<SpanningEdgeSet> {
    let n = table.n;
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two sequences".into()));
    }
    let mut start = (0, 1);
    for i in 0..n {
        for j in i + 1..n {
            if table.get(i, j) > table.get(start.0, start.1) {
                start = (i, j);
            }
        }
    }

    let mut in_tree = vec![false; n];
    let mut best: Vec<Option<(Score, usize)>> = vec![None; n];
    let mut edges = Vec::with_capacity(n - 1);
    let add = |v: usize, in_tree: &mut Vec<bool>, best: &mut Vec<Option<(Score, usize)>>| {
        in_tree[v] = true;
        for u in (0..n).filter(|&u| !in_tree[u]) {
            let s = table.get(v, u);
            let better = match best[u] {
                None => true,
                Some((bs, bp)) => s > bs || (s == bs && v < bp),
            };
            if better {
                best[u] = Some((s, v));
            }
        }
    };
    add(start.0, &mut in_tree, &mut best);
    for _ in 1..n {
        let (v, (score, parent)) = (0..n)
            .filter(|&v| !in_tree[v])
            .filter_map(|v| best[v].map(|b| (v, b)))
            .fold(None::<(usize, (Score, usize))>, |acc, cand| match acc {
                Some(a) if a.1 .0 >= cand.1 .0 => Some(a),
                _ => Some(cand),
            })
            .expect("graph is complete");
        edges.push(SpanningEdge { from: parent, to: v, score });
        add(v, &mut in_tree, &mut best);
    }
    Ok(SpanningEdgeSet { n, edges })
}

/// Order in which tree edges are merged: the best edge first, then always
/// the best-scoring edge with exactly one endpoint already merged (ties by
/// lower new index). Each pair is `(already_merged, new)`; the root pair is
/// oriented so its first element is where the walk continues.
pub fn merge_order(tree: &SpanningEdgeSet) -> Result<Vec<(usize, usize)>> {
    let n = tree.n;
    if tree.edges.len() + 1 != n {
        return Err(Error::InvalidArgument("edge set is not a spanning tree".into()));
    }
    let root = tree
        .edges
        .iter()
        .copied()
        .reduce(|a, b| if b.score > a.score || (b.score == a.score && b.key() < a.key()) { b } else { a })
        .ok_or_else(|| Error::InvalidArgument("empty edge set".into()))?;
    let (lo, hi) = root.key();

    let mut merged = vec![false; n];
    merged[lo] = true;
    merged[hi] = true;
    let mut used = vec![false; tree.edges.len()];
    used[tree.edges.iter().position(|e| e.key() == root.key()).expect("root is a tree edge")] = true;

    let next = |merged: &[bool], used: &[bool]| -> Option<(usize, usize, usize)> {
        let mut pick: Option<(usize, usize, usize, Score)> = None;
        for (k, e) in tree.edges.iter().enumerate().filter(|(k, _)| !used[*k]) {
            let (inside, new) = match (merged[e.from], merged[e.to]) {
                (true, false) => (e.from, e.to),
                (false, true) => (e.to, e.from),
                _ => continue,
            };
            let better = match pick {
                None => true,
                Some((_, _, pn, ps)) => e.score > ps || (e.score == ps && new < pn),
            };
            if better {
                pick = Some((k, inside, new, e.score));
            }
        }
        pick.map(|(k, inside, new, _)| (k, inside, new))
    };

    let mut order = Vec::with_capacity(n - 1);
    let first = match next(&merged, &used) {
        Some((_, inside, _)) if inside == hi => (hi, lo),
        _ => (lo, hi),
    };
    order.push(first);
    while let Some((k, inside, new)) = next(&merged, &used) {
        used[k] = true;
        merged[new] = true;
        order.push((inside, new));
    }
    if order.len() != n - 1 {
        return Err(Error::InvalidArgument("edge set is not connected".into()));
    }
    Ok(order)
}

/// One MSA cell. `InsertedGap` marks gaps created when a later sequence
/// forced a new column (shown as `+` in intermediate views).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsaCell {
    Symbol(usize),
    Gap,
    InsertedGap,
}

impl MsaCell {
    pub fn symbol(self) -> Option<usize> {
        match self {
            MsaCell::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_gap(self) -> bool {
        !matches!(self, MsaCell::Symbol(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Msa {
    rows: Vec<Vec<MsaCell>>,
    row_order: Vec<usize>,
}

impl Msa {
    /// Builds an MSA from rows of optional symbols (`None` = gap).
    pub fn from_rows(rows: Vec<Vec<Option<usize>>>, row_order: Vec<usize>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(|c| c.map_or(MsaCell::Gap, MsaCell::Symbol)).collect())
            .collect();
        let msa = Msa { rows, row_order };
        msa.validate()?;
        Ok(msa)
    }

    fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::InvalidArgument("MSA has no rows".into()));
        }
        if self.row_order.len() != self.rows.len() {
            return Err(Error::LengthMismatch {
                expected: self.rows.len(),
                actual: self.row_order.len(),
            });
        }
        let width = self.width();
        if width == 0 || self.rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidArgument("MSA rows must be non-empty and of equal width".into()));
        }
        if let Some(col) = (0..width).find(|&c| self.rows.iter().all(|r| r[c].is_gap())) {
            return Err(Error::InvalidArgument(format!("MSA column {col} contains only gaps")));
        }
        Ok(())
    }

    pub fn rows(&self) -> &[Vec<MsaCell>] {
        &self.rows
    }

    pub fn row_order(&self) -> &[usize] {
        &self.row_order
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = MsaCell> + '_ {
        self.rows.iter().map(move |r| r[c])
    }

    /// Row `k` with gaps removed.
    pub fn ungapped(&self, k: usize) -> Vec<usize> {
        self.rows[k].iter().filter_map(|c| c.symbol()).collect()
    }

    /// Renders rows; inserted gaps are shown as `+` when `mark_inserted`.
    pub fn render(&self, alphabet: &Alphabet, mark_inserted: bool) -> Vec<String> {
        let spaced = alphabet.symbols().iter().any(|t| t.chars().count() != 1);
        self.rows
            .iter()
            .map(|row| {
                let cells: Vec<&str> = row
                    .iter()
                    .map(|c| match c {
                        MsaCell::Symbol(s) => alphabet.token(*s).unwrap_or("?"),
                        MsaCell::InsertedGap if mark_inserted => "+",
                        _ => "-",
                    })
                    .collect();
                cells.join(if spaced { " " } else { "" })
            })
            .collect()
    }

    /// `MSA v1` text: header, row count, width, then one row per line.
    pub fn to_text(&self, alphabet: &Alphabet) -> Result<String> {
        if alphabet.id_of("-").is_some() {
            return Err(Error::AlphabetMismatch("alphabet uses the gap token \"-\"".into()));
        }
        let mut out = String::new();
        let _ = writeln!(out, "{MSA_HEADER}\n{}\n{}", self.n_rows(), self.width());
        for line in self.render(alphabet, false) {
            let _ = writeln!(out, "{line}");
        }
        Ok(out)
    }

    /// Parses `MSA v1` text. Rows are numbered in file order.
    pub fn from_text(text: &str, alphabet: &Alphabet) -> Result<Self> {
        let perr = |line, msg: &str| Error::parse("msa", line, msg);
        let spaced = alphabet.symbols().iter().any(|t| t.chars().count() != 1);
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
        if lines.next().map(|l| l.1) != Some(MSA_HEADER) {
            return Err(perr(1, "expected header \"MSA v1\""));
        }
        let mut number = |what: &str| -> Result<usize> {
            let (ln, l) = lines.next().ok_or_else(|| perr(0, &format!("missing {what}")))?;
            l.trim().parse().map_err(|_| perr(ln, &format!("invalid {what}")))
        };
        let n = number("row count")?;
        let width = number("width")?;
        let mut rows = Vec::with_capacity(n);
        for (ln, line) in lines.take(n) {
            let tokens: Vec<String> = if spaced {
                line.split_whitespace().map(str::to_owned).collect()
            } else {
                line.chars().filter(|c| !c.is_whitespace()).map(String::from).collect()
            };
            if tokens.len() != width {
                return Err(perr(ln, &format!("expected {width} cells, found {}", tokens.len())));
            }
            let row = tokens
                .iter()
                .map(|t| match t.as_str() {
                    "-" | "+" => Ok(None),
                    tok => alphabet
                        .id_of(tok)
                        .map(Some)
                        .ok_or_else(|| perr(ln, &format!("token {tok:?} not in alphabet"))),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        if rows.len() != n {
            return Err(perr(0, "fewer rows than declared"));
        }
        Msa::from_rows(rows, (0..n).collect())
    }
}

/// Score used when a new symbol is placed against an existing gap in the
/// guide row.
pub const GUIDE_GAP_SCORE: Score = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GuideState {
    Pair,
    /// Guide symbol opposite a gap in the new sequence.
    SkipGuide,
    /// New sequence symbol in a freshly inserted column.
    NewColumn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GuideMove {
    Origin,
    Pair(GuideState),
    SkipGuide(GuideState),
    /// Passing over an existing gap column of the guide row at no cost.
    Transparent,
    NewColumn(GuideState),
}

enum Placement {
    Existing(usize, Option<usize>),
    New(usize),
}

/// Global alignment of `seq` against a guide row that may contain gaps.
fn align_to_guide(
    guide: &[MsaCell],
    seq: &[usize],
    subst: &SubstitutionMatrix,
    gap: GapPenalty,
) -> Vec<Placement> {
    const NEG: Score = Score::MIN / 4;
    let (w, l) = (guide.len(), seq.len());
    let cols = l + 1;
    let at = |p: usize, j: usize| p * cols + j;
    let mut score = [vec![NEG; (w + 1) * cols], vec![NEG; (w + 1) * cols], vec![NEG; (w + 1) * cols]];
    let mut from = [
        vec![GuideMove::Origin; (w + 1) * cols],
        vec![GuideMove::Origin; (w + 1) * cols],
        vec![GuideMove::Origin; (w + 1) * cols],
    ];
    let states = [GuideState::Pair, GuideState::SkipGuide, GuideState::NewColumn];
    score[0][at(0, 0)] = 0;

    let best_of = |score: &[Vec<Score>; 3], idx: usize, costs: [Score; 3]| -> (Score, GuideState) {
        let mut best = (NEG, GuideState::Pair);
        for k in 0..3 {
            let s = score[k][idx];
            if s > NEG && s - costs[k] > best.0 {
                best = (s - costs[k], states[k]);
            }
        }
        best
    };
    let (open, ext) = (gap.open(), gap.extend());

    for p in 0..=w {
        for j in 0..=l {
            let here = at(p, j);
            if p > 0 {
                let cell = guide[p - 1];
                if j > 0 {
                    let (b, st) = best_of(&score, at(p - 1, j - 1), [0, 0, 0]);
                    if b > NEG {
                        let pair = match cell.symbol() {
                            Some(g) => subst.score(g, seq[j - 1]),
                            None => GUIDE_GAP_SCORE,
                        };
                        score[0][here] = b + pair;
                        from[0][here] = GuideMove::Pair(st);
                    }
                }
                if cell.is_gap() {
                    for k in 0..3 {
                        let carried = score[k][at(p - 1, j)];
                        if carried > score[k][here] {
                            score[k][here] = carried;
                            from[k][here] = GuideMove::Transparent;
                        }
                    }
                } else {
                    let (b, st) = best_of(&score, at(p - 1, j), [open, ext, open]);
                    if b > NEG {
                        score[1][here] = b;
                        from[1][here] = GuideMove::SkipGuide(st);
                    }
                }
            }
            if j > 0 {
                let (b, st) = best_of(&score, at(p, j - 1), [open, open, ext]);
                if b > score[2][here] {
                    score[2][here] = b;
                    from[2][here] = GuideMove::NewColumn(st);
                }
            }
        }
    }

    let end = at(w, l);
    let mut state = best_of(&score, end, [0, 0, 0]).1;
    let (mut p, mut j) = (w, l);
    let mut plan = Vec::with_capacity(w + l);
    while p > 0 || j > 0 {
        let k = states.iter().position(|s| *s == state).expect("known state");
        match from[k][at(p, j)] {
            GuideMove::Pair(prev) => {
                plan.push(Placement::Existing(p - 1, Some(seq[j - 1])));
                p -= 1;
                j -= 1;
                state = prev;
            }
            GuideMove::SkipGuide(prev) => {
                plan.push(Placement::Existing(p - 1, None));
                p -= 1;
                state = prev;
            }
            GuideMove::Transparent => {
                plan.push(Placement::Existing(p - 1, None));
                p -= 1;
            }
            GuideMove::NewColumn(prev) => {
                plan.push(Placement::New(seq[j - 1]));
                j -= 1;
                state = prev;
            }
            GuideMove::Origin => unreachable!("origin reached before (0, 0)"),
        }
    }
    plan.reverse();
    plan
}

/// Builds the MSA by merging sequences in `order` (from [`merge_order`]).
pub fn progressive_msa<S: AsRef<[usize]>>(
    sequences: &[S],
    order: &[(usize, usize)],
    subst: &SubstitutionMatrix,
    gap: GapPenalty,
) -> Result<Msa> {
    let n = sequences.len();
    let (&(r0, r1), rest) = order
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("merge order is empty".into()))?;
    if r0 >= n || r1 >= n || r0 == r1 {
        return Err(Error::InvalidArgument("invalid root pair".into()));
    }
    let root = semi_local_align(sequences[r0].as_ref(), sequences[r1].as_ref(), subst, gap)?;
    let to_cells = |row: &[Option<usize>]| -> Vec<MsaCell> {
        row.iter().map(|c| c.map_or(MsaCell::Gap, MsaCell::Symbol)).collect()
    };
    let mut rows = vec![to_cells(&root.row_a), to_cells(&root.row_b)];
    let mut row_order = vec![r0, r1];
    let mut row_of = vec![None; n];
    row_of[r0] = Some(0);
    row_of[r1] = Some(1);

    for &(guide_seq, new_seq) in rest {
        let guide_row = row_of
            .get(guide_seq)
            .copied()
            .flatten()
            .ok_or_else(|| Error::InvalidArgument(format!("sequence {guide_seq} merged before it was added")))?;
        if new_seq >= n || row_of[new_seq].is_some() {
            return Err(Error::InvalidArgument(format!("sequence {new_seq} is not a new sequence")));
        }
        let seq = sequences[new_seq].as_ref();
        subst.check(seq)?;
        if seq.is_empty() {
            return Err(Error::InvalidArgument("cannot align an empty sequence".into()));
        }
        let plan = align_to_guide(&rows[guide_row], seq, subst, gap);

        let mut new_rows: Vec<Vec<MsaCell>> = vec![Vec::with_capacity(plan.len()); rows.len() + 1];
        for placement in &plan {
            match *placement {
                Placement::Existing(col, sym) => {
                    for (r, row) in rows.iter().enumerate() {
                        new_rows[r].push(row[col]);
                    }
                    new_rows[rows.len()].push(sym.map_or(MsaCell::Gap, MsaCell::Symbol));
                }
                Placement::New(sym) => {
                    for r in 0..rows.len() {
                        new_rows[r].push(MsaCell::InsertedGap);
                    }
                    new_rows[rows.len()].push(MsaCell::Symbol(sym));
                }
            }
        }
        row_of[new_seq] = Some(rows.len());
        row_order.push(new_seq);
        rows = new_rows;
    }

    let msa = Msa { rows, row_order };
    msa.validate()?;
    Ok(msa)
}

/// Full pipeline: pair scores, spanning tree, merge order, progressive merge.
/// A single sequence yields a one-row MSA.
pub fn build_msa<S: AsRef<[usize]>>(sequences: &[S], subst: &SubstitutionMatrix, gap: GapPenalty) -> Result<Msa> {
    match sequences {
        [] => Err(Error::InvalidArgument("no sequences to align".into())),
        [only] => {
            subst.check(only.as_ref())?;
            Msa::from_rows(vec![only.as_ref().iter().map(|&s| Some(s)).collect()], vec![0])
        }
        _ => {
            let table = pair_score_table(sequences, subst, gap)?;
            let tree = select_spanning_edges(&table)?;
            let order = merge_order(&tree)?;
            progressive_msa(sequences, &order, subst, gap)
        }
    }
}
