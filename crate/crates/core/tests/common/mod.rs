//! Worked-example fixtures and exhaustive oracles shared by the test targets.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeSet;

use birthmark_core::align::SubstitutionMatrix;
use birthmark_core::hmm::HmmModel;
use birthmark_core::msa::Msa;
use birthmark_core::phmm::{EmissionTables, PhmmModel, TransitionTables};
use birthmark_core::seq_data::Alphabet;
use rand::Rng;

// ---------------------------------------------------------------- fixtures

/// Pairwise alignment scores of ten sequences, upper triangle, 1-based rows.
const TEN_SEQUENCE_UPPER: [&[i64]; 9] = [
    &[85, 63, 74, 70, 84, 61, 57, 62, 70],
    &[79, 73, 66, 59, 94, 61, 59, 51],
    &[75, 68, 60, 55, 85, 52, 65],
    &[105, 54, 60, 78, 59, 53],
    &[40, 61, 79, 58, 39],
    &[68, 45, 75, 78],
    &[64, 72, 42],
    &[50, 70],
    &[81],
];

/// Full symmetric 10x10 matrix (0-based) with zero diagonal.
pub fn ten_sequence_scores() -> Vec<Vec<i64>> {
    let mut m = vec![vec![0; 10]; 10];
    for (i, row) in TEN_SEQUENCE_UPPER.iter().enumerate() {
        for (k, &s) in row.iter().enumerate() {
            let j = i + 1 + k;
            m[i][j] = s;
            m[j][i] = s;
        }
    }
    m
}

/// Expected maximum spanning tree, 1-based, total 770.
pub const TEN_SEQUENCE_TREE: [(usize, usize); 9] = [(4, 5), (2, 7), (1, 2), (3, 8), (1, 6), (9, 10), (2, 3), (5, 8), (6, 10)];
pub const TEN_SEQUENCE_TREE_TOTAL: i64 = 770;
pub const TEN_SEQUENCE_MERGE_ORDER: [(usize, usize); 9] =
    [(5, 4), (5, 8), (8, 3), (3, 2), (2, 7), (2, 1), (1, 6), (6, 10), (10, 9)];

pub const PROFILE_MSA_ROWS: [&str; 5] = ["EC----", "EC-E-G", "-CGEJG", "EG--JG", "EG---G"];

pub fn letters_alphabet(letters: &str) -> Alphabet {
    let symbols: Vec<String> = letters.chars().map(String::from).collect();
    Alphabet::from_symbols(&symbols).unwrap()
}

pub fn encode(alphabet: &Alphabet, text: &str) -> Vec<usize> {
    text.chars().map(|c| alphabet.id_of(&c.to_string()).unwrap()).collect()
}

pub fn gapped_rows(alphabet: &Alphabet, rows: &[&str]) -> Vec<Vec<Option<usize>>> {
    rows.iter()
        .map(|r| {
            r.chars()
                .map(|c| if c == '-' { None } else { Some(alphabet.id_of(&c.to_string()).unwrap()) })
                .collect()
        })
        .collect()
}

pub fn profile_msa() -> (Msa, Alphabet) {
    let alphabet = letters_alphabet("CEGJ");
    let rows = gapped_rows(&alphabet, &PROFILE_MSA_ROWS);
    let order = (0..rows.len()).collect();
    (Msa::from_rows(rows, order).unwrap(), alphabet)
}

/// Match emissions (state, symbol, numerator, denominator).
pub const PROFILE_MATCH_EMISSIONS: [(usize, char, u32, u32); 12] = [
    (1, 'E', 5, 8),
    (1, 'G', 1, 8),
    (1, 'C', 1, 8),
    (1, 'J', 1, 8),
    (2, 'E', 1, 9),
    (2, 'G', 3, 9),
    (2, 'C', 4, 9),
    (2, 'J', 1, 9),
    (3, 'E', 1, 8),
    (3, 'G', 5, 8),
    (3, 'C', 1, 8),
    (3, 'J', 1, 8),
];

/// Insert emissions for I1..I3.
pub const PROFILE_INSERT_EMISSIONS: [(usize, char, u32, u32); 12] = [
    (1, 'E', 1, 4),
    (1, 'G', 1, 4),
    (1, 'C', 1, 4),
    (1, 'J', 1, 4),
    (2, 'E', 3, 9),
    (2, 'G', 2, 9),
    (2, 'C', 1, 9),
    (2, 'J', 3, 9),
    (3, 'E', 1, 4),
    (3, 'G', 1, 4),
    (3, 'C', 1, 4),
    (3, 'J', 1, 4),
];

/// Transitions as (from, to, numerator, denominator). States are written
/// `B`, `M1`, `I0`, `D1`, ... and `E` for End.
pub const PROFILE_TRANSITIONS: [(&str, &str, u32, u32); 30] = [
    ("B", "M1", 5, 8),
    ("B", "I0", 1, 8),
    ("B", "D1", 2, 8),
    ("I0", "M1", 1, 3),
    ("I0", "I0", 1, 3),
    ("I0", "D1", 1, 3),
    ("M1", "M2", 5, 7),
    ("M1", "I1", 1, 7),
    ("M1", "D2", 1, 7),
    ("I1", "M2", 1, 3),
    ("I1", "I1", 1, 3),
    ("I1", "D2", 1, 3),
    ("D1", "M2", 2, 4),
    ("D1", "I1", 1, 4),
    ("D1", "D2", 1, 4),
    ("M2", "M3", 2, 8),
    ("M2", "I2", 4, 8),
    ("M2", "D3", 2, 8),
    ("I2", "M3", 4, 8),
    ("I2", "I2", 3, 8),
    ("I2", "D3", 1, 8),
    ("D2", "M3", 1, 3),
    ("D2", "I2", 1, 3),
    ("D2", "D3", 1, 3),
    ("M3", "E", 5, 6),
    ("M3", "I3", 1, 6),
    ("I3", "E", 1, 2),
    ("I3", "I3", 1, 2),
    ("D3", "E", 2, 3),
    ("D3", "I3", 1, 3),
];

/// Looks up a transition probability by state labels.
pub fn transition(model: &PhmmModel, from: &str, to: &str) -> f64 {
    use birthmark_core::phmm::{TO_DELETE, TO_INSERT, TO_MATCH};
    let t = model.transitions();
    let (row, col) = match from {
        "B" => (t.from_match[0], 0),
        _ => {
            let idx: usize = from[1..].parse().unwrap();
            match &from[..1] {
                "M" => (t.from_match[idx], idx),
                "I" => (t.from_insert[idx], idx),
                "D" => (t.from_delete[idx], idx),
                _ => panic!("bad state {from}"),
            }
        }
    };
    let dest = match &to[..1] {
        "E" => {
            assert_eq!(col, model.n_match());
            TO_MATCH
        }
        "M" => TO_MATCH,
        "I" => TO_INSERT,
        "D" => TO_DELETE,
        _ => panic!("bad state {to}"),
    };
    if to != "E" {
        let idx: usize = to[1..].parse().unwrap();
        let expected = if dest == TO_INSERT { col } else { col + 1 };
        assert_eq!(idx, expected, "{from} -> {to} is not a profile transition");
    }
    row[dest]
}

pub const PAIR_A: &str = "CBCBJILIIJEJE";
pub const PAIR_B: &str = "GCBJIIIJJEG";
pub const PAIR_DISPLAYED_GLOBAL: [&str; 2] = ["-CBCBJILIIJEJE-", "GC--BJI-IIJ-JEG"];
/// Local alignment with `*` marking omitted symbols.
pub const PAIR_DISPLAYED_LOCAL: [&str; 2] = ["***CBJILII-JE**", "***CBJI-IIJJE**"];

// ------------------------------------------------------- alignment oracle

pub type Column = (Option<usize>, Option<usize>);

/// Every alignment of `a` and `b` as a list of columns.
pub fn all_alignments(a: &[usize], b: &[usize]) -> Vec<Vec<Column>> {
    fn rec(a: &[usize], b: &[usize], prefix: &mut Vec<Column>, out: &mut Vec<Vec<Column>>) {
        if a.is_empty() && b.is_empty() {
            out.push(prefix.clone());
            return;
        }
        if !a.is_empty() && !b.is_empty() {
            prefix.push((Some(a[0]), Some(b[0])));
            rec(&a[1..], &b[1..], prefix, out);
            prefix.pop();
        }
        if !a.is_empty() {
            prefix.push((Some(a[0]), None));
            rec(&a[1..], b, prefix, out);
            prefix.pop();
        }
        if !b.is_empty() {
            prefix.push((None, Some(b[0])));
            rec(a, &b[1..], prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(a, b, &mut Vec::new(), &mut out);
    out
}

fn gap_kind(c: &Column) -> u8 {
    match c {
        (Some(_), Some(_)) => 0,
        (Some(_), None) => 1,
        (None, Some(_)) => 2,
        (None, None) => unreachable!("empty column"),
    }
}

/// Affine score of a column run: each gap run costs `open` for its first
/// column and `extend` for every further column.
pub fn affine_score(cols: &[Column], subst: &SubstitutionMatrix, open: i64, extend: i64) -> i64 {
    let mut total = 0;
    let mut prev = 0u8;
    for c in cols {
        let kind = gap_kind(c);
        total += match *c {
            (Some(x), Some(y)) => subst.score(x, y),
            _ if kind == prev => -extend,
            _ => -open,
        };
        prev = kind;
    }
    total
}

pub fn brute_global(a: &[usize], b: &[usize], subst: &SubstitutionMatrix, open: i64, extend: i64) -> i64 {
    all_alignments(a, b)
        .iter()
        .map(|cols| affine_score(cols, subst, open, extend))
        .max()
        .unwrap()
}

/// Best score of any contiguous core that starts and ends with an aligned
/// pair. Every core sits inside some full alignment, so scanning windows of
/// all full alignments covers all of them.
pub fn brute_semi_local(a: &[usize], b: &[usize], subst: &SubstitutionMatrix, open: i64, extend: i64) -> i64 {
    let mut best = i64::MIN;
    for cols in all_alignments(a, b) {
        for start in 0..cols.len() {
            if gap_kind(&cols[start]) != 0 {
                continue;
            }
            for end in start..cols.len() {
                if gap_kind(&cols[end]) == 0 {
                    best = best.max(affine_score(&cols[start..=end], subst, open, extend));
                }
            }
        }
    }
    best
}

// --------------------------------------------------- spanning tree oracle

/// Decodes a Pruefer sequence (linear-time algorithm), calling `edge` for
/// each tree edge.
#[inline(always)]
fn prufer_decode(seq: &[u8], degree: &mut [u8], mut edge: impl FnMut(usize, usize)) {
    let n = degree.len();
    degree.fill(1);
    for &v in seq {
        degree[v as usize] += 1;
    }
    let mut ptr = 0;
    while degree[ptr] != 1 {
        ptr += 1;
    }
    let mut leaf = ptr;
    for &v in seq {
        let v = v as usize;
        edge(leaf, v);
        degree[leaf] = 0;
        degree[v] -= 1;
        if degree[v] == 1 && v < ptr {
            leaf = v;
        } else {
            ptr += 1;
            while degree[ptr] != 1 {
                ptr += 1;
            }
            leaf = ptr;
        }
    }
    edge(leaf, n - 1);
}

/// Walks every labelled spanning tree of the complete graph (all `n^(n-2)`
/// Pruefer sequences). Returns the best total and every tree reaching it,
/// plus the number of trees visited.
pub fn brute_max_spanning_trees(scores: &[Vec<i64>]) -> (i64, Vec<BTreeSet<(usize, usize)>>, u64) {
    let n = scores.len();
    assert!((2..=255).contains(&n));
    if n == 2 {
        return (scores[0][1], vec![BTreeSet::from([(0, 1)])], 1);
    }
    let flat: Vec<i64> = scores.iter().flatten().copied().collect();
    let mut seq = vec![0u8; n - 2];
    let mut degree = vec![0u8; n];
    let mut best = i64::MIN;
    let mut winners = Vec::new();
    let mut visited = 0u64;
    loop {
        let mut total = 0;
        prufer_decode(&seq, &mut degree, |u, v| total += flat[u * n + v]);
        visited += 1;
        if total >= best {
            if total > best {
                best = total;
                winners.clear();
            }
            let mut edges = BTreeSet::new();
            prufer_decode(&seq, &mut degree, |u, v| {
                edges.insert((u.min(v), u.max(v)));
            });
            winners.push(edges);
        }
        let mut pos = 0;
        loop {
            if pos == seq.len() {
                return (best, winners, visited);
            }
            seq[pos] += 1;
            if (seq[pos] as usize) < n {
                break;
            }
            seq[pos] = 0;
            pos += 1;
        }
    }
}

// ------------------------------------------------------------ HMM oracle

pub struct PathEnumeration {
    pub likelihood: f64,
    pub gammas: Vec<Vec<f64>>,
    pub digammas: Vec<Vec<Vec<f64>>>,
}

/// Sums the joint probability of every state path, accumulating the
/// per-step state and transition posteriors along the way.
pub fn enumerate_hmm_paths(model: &HmmModel, obs: &[usize]) -> PathEnumeration {
    let n = model.n_states();
    let t_len = obs.len();
    let mut gammas = vec![vec![0.0; n]; t_len];
    let mut digammas = vec![vec![vec![0.0; n]; n]; t_len.saturating_sub(1)];
    let mut likelihood = 0.0;
    let mut path = vec![0usize; t_len];
    loop {
        let mut p = model.pi()[path[0]] * model.b()[path[0]][obs[0]];
        for t in 1..t_len {
            p *= model.a()[path[t - 1]][path[t]] * model.b()[path[t]][obs[t]];
        }
        likelihood += p;
        for t in 0..t_len {
            gammas[t][path[t]] += p;
            if t + 1 < t_len {
                digammas[t][path[t]][path[t + 1]] += p;
            }
        }
        let mut pos = 0;
        loop {
            if pos == t_len {
                for row in &mut gammas {
                    row.iter_mut().for_each(|g| *g /= likelihood);
                }
                for mat in &mut digammas {
                    mat.iter_mut().flatten().for_each(|g| *g /= likelihood);
                }
                return PathEnumeration {
                    likelihood,
                    gammas,
                    digammas,
                };
            }
            path[pos] += 1;
            if path[pos] < n {
                break;
            }
            path[pos] = 0;
            pos += 1;
        }
    }
}

// ------------------------------------------------------- random instances

pub fn random_distribution<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

pub fn random_hmm<R: Rng>(rng: &mut R, n: usize, m: usize) -> HmmModel {
    HmmModel::new(
        random_distribution(rng, n),
        (0..n).map(|_| random_distribution(rng, n)).collect(),
        (0..n).map(|_| random_distribution(rng, m)).collect(),
    )
    .unwrap()
}

/// A profile HMM with arbitrary (not MSA-derived) parameters.
pub fn random_phmm<R: Rng>(rng: &mut R, n: usize, m: usize) -> PhmmModel {
    let mut row = |i: usize| -> [f64; 3] {
        if i == n {
            let d = random_distribution(rng, 2);
            [d[0], d[1], 0.0]
        } else {
            let d = random_distribution(rng, 3);
            [d[0], d[1], d[2]]
        }
    };
    let from_match = (0..=n).map(&mut row).collect();
    let from_insert = (0..=n).map(&mut row).collect();
    let mut from_delete: Vec<[f64; 3]> = (0..=n).map(&mut row).collect();
    from_delete[0] = [0.0; 3];
    let emissions = EmissionTables {
        match_rows: (0..n).map(|_| random_distribution(rng, m)).collect(),
        insert_rows: (0..=n).map(|_| random_distribution(rng, m)).collect(),
    };
    PhmmModel::new(
        emissions,
        TransitionTables {
            from_match,
            from_insert,
            from_delete,
        },
    )
    .unwrap()
}

/// Random symmetric substitution matrix with a positive diagonal.
pub fn random_subst<R: Rng>(rng: &mut R, m: usize) -> SubstitutionMatrix {
    let mut rows = vec![vec![0i64; m]; m];
    for i in 0..m {
        rows[i][i] = rng.gen_range(1..=4);
        for j in 0..i {
            let s = rng.gen_range(-3..=1);
            rows[i][j] = s;
            rows[j][i] = s;
        }
    }
    SubstitutionMatrix::new(rows).unwrap()
}

pub fn relative_error(x: f64, y: f64) -> f64 {
    if x == y {
        0.0
    } else {
        (x - y).abs() / x.abs().max(y.abs())
    }
}
