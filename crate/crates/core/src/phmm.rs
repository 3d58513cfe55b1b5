//! Profile hidden Markov models estimated directly from an MSA.
//!
//! Columns with at most half gaps become match states `M1..MN`; each maximal
//! run of other columns becomes one insert state, numbered after the match
//! state it follows (`I0` precedes `M1`). Delete states `D1..DN` are silent.
//! Emission and transition counts are smoothed with the add-one rule.
//!
//! Transitions out of column `i` (Begin counts as `M0`) go to
//! `M(i+1)`, `I(i)` and `D(i+1)`. States in the last column go to End or
//! `I(N)` only.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::msa::Msa;
use crate::seq_data::Alphabet;

pub const TO_MATCH: usize = 0;
pub const TO_INSERT: usize = 1;
pub const TO_DELETE: usize = 2;

const MODEL_HEADER: &str = "PHMM v1";

/// Refuse path enumeration above these sizes.
pub const BRUTEFORCE_MAX_MATCH_STATES: usize = 3;
pub const BRUTEFORCE_MAX_LENGTH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnTag {
    /// Match state index, 1-based.
    Match(usize),
    /// Insert region, numbered by the match state it follows.
    Insert(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnClassification {
    pub tags: Vec<ColumnTag>,
    pub n_match: usize,
}

pub fn classify_columns(msa: &Msa) -> ColumnClassification {
    let rows = msa.n_rows();
    let mut n_match = 0;
    let tags = (0..msa.width())
        .map(|c| {
            let gaps = msa.column(c).filter(|cell| cell.is_gap()).count();
            if 2 * gaps <= rows {
                n_match += 1;
                ColumnTag::Match(n_match)
            } else {
                ColumnTag::Insert(n_match)
            }
        })
        .collect();
    ColumnClassification { tags, n_match }
}

/// Add-one smoothed emission tables: `match_rows[k - 1]` for `Mk` and
/// `insert_rows[k]` for `Ik`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionTables {
    pub match_rows: Vec<Vec<f64>>,
    pub insert_rows: Vec<Vec<f64>>,
}

pub fn estimate_emissions(msa: &Msa, classes: &ColumnClassification, n_symbols: usize) -> Result<EmissionTables> {
    let n = classes.n_match;
    let mut match_counts = vec![vec![0u64; n_symbols]; n];
    let mut insert_counts = vec![vec![0u64; n_symbols]; n + 1];
    for (c, tag) in classes.tags.iter().enumerate() {
        let counts = match *tag {
            ColumnTag::Match(k) => &mut match_counts[k - 1],
            ColumnTag::Insert(k) => &mut insert_counts[k],
        };
        for sym in msa.column(c).filter_map(|cell| cell.symbol()) {
            *counts.get_mut(sym).ok_or(Error::SymbolOutOfRange {
                id: sym,
                size: n_symbols,
            })? += 1;
        }
    }
    let smooth = |counts: Vec<u64>| -> Vec<f64> {
        let total: u64 = counts.iter().sum();
        let denom = (total + n_symbols as u64) as f64;
        counts.into_iter().map(|c| (c + 1) as f64 / denom).collect()
    };
    Ok(EmissionTables {
        match_rows: match_counts.into_iter().map(smooth).collect(),
        insert_rows: insert_counts.into_iter().map(smooth).collect(),
    })
}

/// Transition rows indexed by column: `from_match[0]` is Begin,
/// `from_match[i]` is `Mi`, `from_insert[i]` is `Ii` and `from_delete[i]` is
/// `Di` (`from_delete[0]` is unused and zero). Entries are ordered
/// [`TO_MATCH`], [`TO_INSERT`], [`TO_DELETE`]; in the last column
/// `TO_MATCH` means End and `TO_DELETE` is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTables {
    pub from_match: Vec<[f64; 3]>,
    pub from_insert: Vec<[f64; 3]>,
    pub from_delete: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PathState {
    Match(usize),
    Insert(usize),
    Delete(usize),
}

pub fn estimate_transitions(msa: &Msa, classes: &ColumnClassification) -> TransitionTables {
    let n = classes.n_match;
    let mut counts = [vec![[0u64; 3]; n + 1], vec![[0u64; 3]; n + 1], vec![[0u64; 3]; n + 1]];
    let mut record = |from: PathState, dest: usize| {
        let (table, i) = match from {
            PathState::Match(i) => (0, i),
            PathState::Insert(i) => (1, i),
            PathState::Delete(i) => (2, i),
        };
        counts[table][i][dest] += 1;
    };

    for row in msa.rows() {
        let mut prev = PathState::Match(0);
        for (cell, tag) in row.iter().zip(&classes.tags) {
            let next = match (*tag, cell.is_gap()) {
                (ColumnTag::Match(k), false) => PathState::Match(k),
                (ColumnTag::Match(k), true) => PathState::Delete(k),
                (ColumnTag::Insert(k), false) => PathState::Insert(k),
                (ColumnTag::Insert(_), true) => continue,
            };
            let dest = match next {
                PathState::Match(_) => TO_MATCH,
                PathState::Insert(_) => TO_INSERT,
                PathState::Delete(_) => TO_DELETE,
            };
            record(prev, dest);
            prev = next;
        }
        record(prev, TO_MATCH);
    }

    let smooth = |rows: Vec<[u64; 3]>| -> Vec<[f64; 3]> {
        rows.into_iter()
            .enumerate()
            .map(|(i, c)| {
                if i == n {
                    let denom = (c[TO_MATCH] + c[TO_INSERT] + 2) as f64;
                    [(c[TO_MATCH] + 1) as f64 / denom, (c[TO_INSERT] + 1) as f64 / denom, 0.0]
                } else {
                    let denom = (c.iter().sum::<u64>() + 3) as f64;
                    c.map(|x| (x + 1) as f64 / denom)
                }
            })
            .collect()
    };
    let [m, ins, del] = counts;
    let mut from_delete = smooth(del);
    from_delete[0] = [0.0; 3];
    TransitionTables {
        from_match: smooth(m),
        from_insert: smooth(ins),
        from_delete,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhmmModel {
    n_match: usize,
    n_symbols: usize,
    emissions: EmissionTables,
    transitions: TransitionTables,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhmmScore {
    pub log_probability: f64,
    pub per_symbol: f64,
}

pub fn build_phmm(msa: &Msa, n_symbols: usize) -> Result<PhmmModel> {
    if n_symbols == 0 {
        return Err(Error::InvalidArgument("alphabet is empty".into()));
    }
    let classes = classify_columns(msa);
    let emissions = estimate_emissions(msa, &classes, n_symbols)?;
    let transitions = estimate_transitions(msa, &classes);
    PhmmModel::new(emissions, transitions)
}

impl PhmmModel {
    /// Assembles a model from tables, checking shapes and normalization.
    pub fn new(emissions: EmissionTables, transitions: TransitionTables) -> Result<Self> {
        let n = emissions.match_rows.len();
        let n_symbols = emissions.insert_rows.first().map_or(0, Vec::len);
        let bad = |msg: &str| Err(Error::InvalidModel(msg.to_owned()));
        if n_symbols == 0 || emissions.insert_rows.len() != n + 1 {
            return bad("emission tables need N match rows and N+1 insert rows");
        }
        for row in emissions.match_rows.iter().chain(&emissions.insert_rows) {
            if row.len() != n_symbols || !is_distribution(row) {
                return bad("emission row is not a distribution over the alphabet");
            }
        }
        let t = &transitions;
        if t.from_match.len() != n + 1 || t.from_insert.len() != n + 1 || t.from_delete.len() != n + 1 {
            return bad("transition tables need N+1 rows");
        }
        for i in 0..=n {
            let rows: &[&[f64; 3]] = if i == 0 {
                &[&t.from_match[i], &t.from_insert[i]]
            } else {
                &[&t.from_match[i], &t.from_insert[i], &t.from_delete[i]]
            };
            for row in rows {
                if !is_distribution(&row[..]) || (i == n && row[TO_DELETE] != 0.0) {
                    return bad("transition row is not a distribution");
                }
            }
        }
        Ok(PhmmModel {
            n_match: n,
            n_symbols,
            emissions,
            transitions,
        })
    }

    pub fn n_match(&self) -> usize {
        self.n_match
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn emissions(&self) -> &EmissionTables {
        &self.emissions
    }

    pub fn transitions(&self) -> &TransitionTables {
        &self.transitions
    }

    /// `P(emit symbol | Mk)`, `k` 1-based.
    pub fn match_emission(&self, k: usize, symbol: usize) -> f64 {
        self.emissions.match_rows[k - 1][symbol]
    }

    pub fn insert_emission(&self, k: usize, symbol: usize) -> f64 {
        self.emissions.insert_rows[k][symbol]
    }

    fn check_observations(&self, obs: &[usize]) -> Result<()> {
        if obs.is_empty() {
            return Err(Error::EmptyObservation);
        }
        match obs.iter().find(|&&o| o >= self.n_symbols) {
            Some(&id) => Err(Error::SymbolOutOfRange {
                id,
                size: self.n_symbols,
            }),
            None => Ok(()),
        }
    }

    pub fn to_text(&self, alphabet: &Alphabet) -> Result<String> {
        if alphabet.len() != self.n_symbols {
            return Err(Error::AlphabetMismatch(format!(
                "model has {} symbols, alphabet has {}",
                self.n_symbols,
                alphabet.len()
            )));
        }
        let n = self.n_match;
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_HEADER}\nN {n}\nM {}", self.n_symbols);
        out.push_str(&alphabet.to_text());
        let fmt = |row: &[f64]| row.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(" ");
        for (k, row) in self.emissions.match_rows.iter().enumerate() {
            let _ = writeln!(out, "E M{} {}", k + 1, fmt(row));
        }
        for (k, row) in self.emissions.insert_rows.iter().enumerate() {
            let _ = writeln!(out, "E I{k} {}", fmt(row));
        }
        let width = |i: usize| if i == n { 2 } else { 3 };
        for (i, row) in self.transitions.from_match.iter().enumerate() {
            let label = if i == 0 { "B".to_owned() } else { format!("M{i}") };
            let _ = writeln!(out, "T {label} {}", fmt(&row[..width(i)]));
        }
        for (i, row) in self.transitions.from_insert.iter().enumerate() {
            let _ = writeln!(out, "T I{i} {}", fmt(&row[..width(i)]));
        }
        for (i, row) in self.transitions.from_delete.iter().enumerate().skip(1) {
            let _ = writeln!(out, "T D{i} {}", fmt(&row[..width(i)]));
        }
        Ok(out)
    }

    /// Parses the `PHMM v1` format; returns the model and its alphabet.
    pub fn from_text(text: &str) -> Result<(Self, Alphabet)> {
        let perr = |line: usize, msg: &str| Error::parse("phmm model", line, msg);
        let lines: Vec<&str> = text.lines().collect();
        if lines.first().map(|l| l.trim()) != Some(MODEL_HEADER) {
            return Err(perr(1, "expected header \"PHMM v1\""));
        }
        let field = |idx: usize, key: &str| -> Result<usize> {
            let line = lines.get(idx).ok_or_else(|| perr(idx + 1, "unexpected end of file"))?;
            match line.split_whitespace().collect::<Vec<_>>().as_slice() {
                [k, v] if *k == key => v.parse().map_err(|_| perr(idx + 1, &format!("invalid {key}"))),
                _ => Err(perr(idx + 1, &format!("expected \"{key} <int>\""))),
            }
        };
        let n = field(1, "N")?;
        let m = field(2, "M")?;
        let alpha_end = 3 + 2 + m;
        if lines.len() < alpha_end {
            return Err(perr(lines.len(), "truncated alphabet block"));
        }
        let mut alpha_text = lines[3..alpha_end].join("\n");
        alpha_text.push('\n');
        let alphabet = Alphabet::from_text(&alpha_text).map_err(|e| perr(4, &e.to_string()))?;
        if alphabet.len() != m {
            return Err(perr(4, "alphabet size differs from M"));
        }

        let mut rest = lines.iter().enumerate().skip(alpha_end);
        let mut next_row = |kind: &str, label: &str, len: usize| -> Result<Vec<f64>> {
            let (idx, line) = rest.next().ok_or_else(|| perr(idx_hint(&lines), "unexpected end of file"))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(kind) || parts.next() != Some(label) {
                return Err(perr(idx + 1, &format!("expected row \"{kind} {label}\"")));
            }
            let values = parts
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| perr(idx + 1, "invalid number"))?;
            if values.len() != len {
                return Err(perr(idx + 1, &format!("expected {len} values")));
            }
            Ok(values)
        };

        let match_rows = (1..=n).map(|k| next_row("E", &format!("M{k}"), m)).collect::<Result<Vec<_>>>()?;
        let insert_rows = (0..=n).map(|k| next_row("E", &format!("I{k}"), m)).collect::<Result<Vec<_>>>()?;
        let mut triple = |label: String, i: usize| -> Result<[f64; 3]> {
            let v = next_row("T", &label, if i == n { 2 } else { 3 })?;
            Ok([v[0], v[1], v.get(2).copied().unwrap_or(0.0)])
        };
        let from_match = (0..=n)
            .map(|i| triple(if i == 0 { "B".into() } else { format!("M{i}") }, i))
            .collect::<Result<Vec<_>>>()?;
        let from_insert = (0..=n).map(|i| triple(format!("I{i}"), i)).collect::<Result<Vec<_>>>()?;
        let mut from_delete = vec![[0.0; 3]];
        for i in 1..=n {
            from_delete.push(triple(format!("D{i}"), i)?);
        }
        let model = PhmmModel::new(
            EmissionTables { match_rows, insert_rows },
            TransitionTables {
                from_match,
                from_insert,
                from_delete,
            },
        )?;
        Ok((model, alphabet))
    }
}

fn idx_hint(lines: &[&str]) -> usize {
    lines.len() + 1
}

fn is_distribution(row: &[f64]) -> bool {
    row.iter().all(|v| v.is_finite() && *v >= 0.0 && *v <= 1.0) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log probability that the model emits exactly `obs` on some Begin-to-End
/// path (forward algorithm over match, insert and delete lanes).
pub fn phmm_forward_score(model: &PhmmModel, obs: &[usize]) -> Result<PhmmScore> {
    model.check_observations(obs)?;
    let n = model.n_match;
    let len = obs.len();
    let t = &model.transitions;
    let ln = f64::ln;
    let neg = f64::NEG_INFINITY;

    // lanes[j][i]: after emitting obs[..i], in column-j state.
    let mut f_m = vec![vec![neg; len + 1]; n + 1];
    let mut f_i = vec![vec![neg; len + 1]; n + 1];
    let mut f_d = vec![vec![neg; len + 1]; n + 1];
    f_m[0][0] = 0.0;

    for i in 0..=len {
        for j in 0..=n {
            if i > 0 {
                let sym = obs[i - 1];
                if j > 0 {
                    let mut terms = vec![
                        f_m[j - 1][i - 1] + ln(t.from_match[j - 1][TO_MATCH]),
                        f_i[j - 1][i - 1] + ln(t.from_insert[j - 1][TO_MATCH]),
                    ];
                    if j > 1 {
                        terms.push(f_d[j - 1][i - 1] + ln(t.from_delete[j - 1][TO_MATCH]));
                    }
                    f_m[j][i] = ln(model.match_emission(j, sym)) + log_sum_exp(&terms);
                }
                let mut terms = vec![
                    f_m[j][i - 1] + ln(t.from_match[j][TO_INSERT]),
                    f_i[j][i - 1] + ln(t.from_insert[j][TO_INSERT]),
                ];
                if j > 0 {
                    terms.push(f_d[j][i - 1] + ln(t.from_delete[j][TO_INSERT]));
                }
                f_i[j][i] = ln(model.insert_emission(j, sym)) + log_sum_exp(&terms);
            }
            if j > 0 {
                let mut terms = vec![
                    f_m[j - 1][i] + ln(t.from_match[j - 1][TO_DELETE]),
                    f_i[j - 1][i] + ln(t.from_insert[j - 1][TO_DELETE]),
                ];
                if j > 1 {
                    terms.push(f_d[j - 1][i] + ln(t.from_delete[j - 1][TO_DELETE]));
                }
                f_d[j][i] = log_sum_exp(&terms);
            }
        }
    }

    let mut end = vec![
        f_m[n][len] + ln(t.from_match[n][TO_MATCH]),
        f_i[n][len] + ln(t.from_insert[n][TO_MATCH]),
    ];
    if n > 0 {
        end.push(f_d[n][len] + ln(t.from_delete[n][TO_MATCH]));
    }
    let log_probability = log_sum_exp(&end);
    Ok(PhmmScore {
        log_probability,
        per_symbol: log_probability / len as f64,
    })
}

/// Sums the probability of every state path that emits exactly `obs`.
/// Oracle for [`phmm_forward_score`]; limited to tiny instances.
pub fn phmm_bruteforce_score(model: &PhmmModel, obs: &[usize]) -> Result<f64> {
    model.check_observations(obs)?;
    if model.n_match > BRUTEFORCE_MAX_MATCH_STATES || obs.len() > BRUTEFORCE_MAX_LENGTH {
        return Err(Error::InstanceTooLarge(format!(
            "N = {}, length = {} (limits {BRUTEFORCE_MAX_MATCH_STATES}, {BRUTEFORCE_MAX_LENGTH})",
            model.n_match,
            obs.len()
        )));
    }
    let total = enumerate_paths(model, obs, PathState::Match(0), 0, 1.0);
    Ok(total.ln())
}

fn enumerate_paths(model: &PhmmModel, obs: &[usize], state: PathState, emitted: usize, prob: f64) -> f64 {
    let n = model.n_match;
    let t = &model.transitions;
    let (col, row) = match state {
        PathState::Match(i) => (i, t.from_match[i]),
        PathState::Insert(i) => (i, t.from_insert[i]),
        PathState::Delete(i) => (i, t.from_delete[i]),
    };
    let mut total = 0.0;
    // End
    if col == n && emitted == obs.len() {
        total += prob * row[TO_MATCH];
    }
    if emitted < obs.len() {
        let sym = obs[emitted];
        total += enumerate_paths(
            model,
            obs,
            PathState::Insert(col),
            emitted + 1,
            prob * row[TO_INSERT] * model.insert_emission(col, sym),
        );
        if col < n {
            total += enumerate_paths(
                model,
                obs,
                PathState::Match(col + 1),
                emitted + 1,
                prob * row[TO_MATCH] * model.match_emission(col + 1, sym),
            );
        }
    }
    if col < n {
        total += enumerate_paths(model, obs, PathState::Delete(col + 1), emitted, prob * row[TO_DELETE]);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msa::Msa;

    fn msa_from(rows: &[&str], alphabet: &Alphabet) -> Msa {
        let rows: Vec<Vec<Option<usize>>> = rows
            .iter()
            .map(|r| {
                r.chars()
                    .map(|c| if c == '-' { None } else { alphabet.id_of(&c.to_string()) })
                    .collect()
            })
            .collect();
        let order = (0..rows.len()).collect();
        Msa::from_rows(rows, order).unwrap()
    }

    #[test]
    fn gap_free_msa_is_all_match() {
        let a = Alphabet::from_symbols(&["x", "y"]).unwrap();
        let msa = msa_from(&["xyx", "yyx"], &a);
        let c = classify_columns(&msa);
        assert_eq!(c.n_match, 3);
        assert_eq!(c.tags, vec![ColumnTag::Match(1), ColumnTag::Match(2), ColumnTag::Match(3)]);
    }

    #[test]
    fn half_gap_column_is_match() {
        let a = Alphabet::from_symbols(&["x", "y"]).unwrap();
        let msa = msa_from(&["xy", "x-", "y-", "xy"], &a);
        assert_eq!(classify_columns(&msa).tags[1], ColumnTag::Match(2));
        let msa = msa_from(&["xy", "x-", "y-"], &a);
        assert_eq!(classify_columns(&msa).tags[1], ColumnTag::Insert(1));
    }

    #[test]
    fn single_row_emissions() {
        let a = Alphabet::from_symbols(&["x", "y", "z"]).unwrap();
        let model = build_phmm(&msa_from(&["xz"], &a), 3).unwrap();
        assert_eq!(model.n_match(), 2);
        assert_eq!(model.match_emission(1, 0), 2.0 / 4.0);
        assert_eq!(model.match_emission(2, 2), 2.0 / 4.0);
        assert_eq!(model.match_emission(2, 1), 1.0 / 4.0);
    }

    #[test]
    fn two_identical_rows_match_transition() {
        let a = Alphabet::from_symbols(&["x", "y"]).unwrap();
        let model = build_phmm(&msa_from(&["xyx", "xyx"], &a), 2).unwrap();
        let t = model.transitions();
        assert_eq!(t.from_match[1][TO_MATCH], 3.0 / 5.0);
        assert_eq!(t.from_match[0][TO_MATCH], 3.0 / 5.0);
        assert_eq!(t.from_match[3], [3.0 / 4.0, 1.0 / 4.0, 0.0]);
    }

    #[test]
    fn all_insert_msa_has_no_match_states() {
        let a = Alphabet::from_symbols(&["x", "y"]).unwrap();
        let model = build_phmm(&msa_from(&["x--", "-y-", "--x"], &a), 2).unwrap();
        assert_eq!(model.n_match(), 0);
        let s = phmm_forward_score(&model, &[0, 1]).unwrap();
        let b = phmm_bruteforce_score(&model, &[0, 1]).unwrap();
        assert!((s.log_probability - b).abs() < 1e-12);
    }

    #[test]
    fn scoring_errors() {
        let a = Alphabet::from_symbols(&["x", "y"]).unwrap();
        let model = build_phmm(&msa_from(&["xy"], &a), 2).unwrap();
        assert!(matches!(phmm_forward_score(&model, &[]), Err(Error::EmptyObservation)));
        assert!(matches!(phmm_bruteforce_score(&model, &[]), Err(Error::EmptyObservation)));
        assert!(matches!(phmm_forward_score(&model, &[3]), Err(Error::SymbolOutOfRange { .. })));
        assert!(matches!(
            phmm_bruteforce_score(&model, &[0; 5]),
            Err(Error::InstanceTooLarge(_))
        ));
        assert!(build_phmm(&msa_from(&["xy"], &a), 1).is_err());
    }

    #[test]
    fn text_round_trip() {
        let a = Alphabet::from_symbols(&["x", "y", "z"]).unwrap();
        let model = build_phmm(&msa_from(&["xz-y", "x-zy", "yzz-"], &a), 3).unwrap();
        let text = model.to_text(&a).unwrap();
        assert!(text.starts_with("PHMM v1\nN "));
        let (back, alpha) = PhmmModel::from_text(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(alpha, a);
        assert!(model.to_text(&Alphabet::from_symbols(&["x"]).unwrap()).is_err());
    }
}
