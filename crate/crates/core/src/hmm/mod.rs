//! Discrete hidden Markov models: representation, scaled forward/backward
//! passes, state posteriors, Baum-Welch re-estimation and scoring.
//!
//! A model is the triple (pi, A, B) over `n_states` hidden states and
//! `n_symbols` observation symbols. All public likelihoods are natural logs.

mod inference;
mod train;

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

pub use inference::{
    backward, forward, forward_strict, likelihood_bruteforce, posterior_decode, posteriors, score,
    ForwardResult, PosteriorSet, BRUTEFORCE_PATH_LIMIT,
};
pub use train::{baum_welch, train_multi, TrainReport, TrainWarning, CONVERGENCE_TOLERANCE};

/// Rows must sum to one within this slack to be accepted by [`HmmModel::new`].
const INPUT_ROW_TOLERANCE: f64 = 1e-6;
/// Rows further than this from one are rescaled on construction.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

const MODEL_HEADER: &str = "HMM v1";

/// Default number of hidden states.
pub const DEFAULT_STATES: usize = 2;
/// Default Baum-Welch iteration cap.
pub const DEFAULT_ITERATIONS: usize = 800;

#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    pi: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

impl HmmModel {
    /// Builds a model from row-stochastic parameters.
    ///
    /// `a` must be `N x N` and `b` must be `N x M` with `N = pi.len()`.
    pub fn new(pi: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Result<Self> {
        let n = pi.len();
        if n == 0 {
            return Err(Error::InvalidModel("model needs at least one state".into()));
        }
        if a.len() != n || a.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidModel(format!("A must be {n}x{n}")));
        }
        let m = b.first().map_or(0, Vec::len);
        if m == 0 || b.len() != n || b.iter().any(|row| row.len() != m) {
            return Err(Error::InvalidModel(format!("B must be {n}xM with M >= 1")));
        }
        let mut model = HmmModel { pi, a, b };
        let HmmModel { pi, a, b } = &mut model;
        for (name, row) in std::iter::once(("pi", pi))
            .chain(a.iter_mut().map(|r| ("A", r)))
            .chain(b.iter_mut().map(|r| ("B", r)))
        {
            normalize_checked(name, row)?;
        }
        Ok(model)
    }

    /// Random near-uniform model: each row is `1/dim` perturbed by at most
    /// 10% of `1/dim`, with the noise centred so the row still sums to one.
    pub fn init_random(n_states: usize, n_symbols: usize, seed: u64) -> Result<Self> {
        if n_states == 0 || n_symbols == 0 {
            return Err(Error::InvalidArgument("N and M must be at least 1".into()));
        }
        let mut rng = seeded_rng(seed);
        let mut row = |dim: usize| random_row(&mut rng, dim);
        let pi = row(n_states);
        let a = (0..n_states).map(|_| row(n_states)).collect();
        let b = (0..n_states).map(|_| row(n_symbols)).collect();
        Ok(HmmModel { pi, a, b })
    }

    pub fn n_states(&self) -> usize {
        self.pi.len()
    }

    pub fn n_symbols(&self) -> usize {
        self.b[0].len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn a(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn b(&self) -> &[Vec<f64>] {
        &self.b
    }

    /// Largest deviation of any row sum from one.
    pub fn max_row_deviation(&self) -> f64 {
        std::iter::once(&self.pi)
            .chain(&self.a)
            .chain(&self.b)
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Relabels states: new state `k` is old state `perm[k]`.
    pub fn permute_states(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_states();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument("not a permutation of the states".into()));
        }
        Ok(HmmModel {
            pi: perm.iter().map(|&p| self.pi[p]).collect(),
            a: perm
                .iter()
                .map(|&p| perm.iter().map(|&q| self.a[p][q]).collect())
                .collect(),
            b: perm.iter().map(|&p| self.b[p].clone()).collect(),
        })
    }

    pub(crate) fn check_observations(&self, obs: &[usize]) -> Result<()> {
        if obs.is_empty() {
            return Err(Error::EmptyObservation);
        }
        let m = self.n_symbols();
        match obs.iter().find(|&&o| o >= m) {
            Some(&id) => Err(Error::SymbolOutOfRange { id, size: m }),
            None => Ok(()),
        }
    }

    /// Serializes to the `HMM v1` text format with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_HEADER}");
        let _ = writeln!(out, "N {} M {}", self.n_states(), self.n_symbols());
        let mut line = |row: &[f64]| {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        };
        line(&self.pi);
        self.a.iter().for_each(|r| line(r));
        self.b.iter().for_each(|r| line(r));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |line, msg: &str| Error::parse("hmm model", line, msg);
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, MODEL_HEADER)) => {}
            _ => return Err(perr(1, "expected header \"HMM v1\"")),
        }
        let (n, m) = match lines.next() {
            Some((_, dims)) => match dims.split_whitespace().collect::<Vec<_>>().as_slice() {
                ["N", n, "M", m] => (
                    n.parse::<usize>().map_err(|_| perr(2, "invalid N"))?,
                    m.parse::<usize>().map_err(|_| perr(2, "invalid M"))?,
                ),
                _ => return Err(perr(2, "expected \"N <int> M <int>\"")),
            },
            None => return Err(perr(2, "missing dimension line")),
        };
        let mut row = |len: usize| -> Result<Vec<f64>> {
            let (ln, text) = lines.next().ok_or_else(|| perr(0, "unexpected end of file"))?;
            let values = text
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| perr(ln, "invalid number"))?;
            if values.len() != len {
                return Err(perr(ln, &format!("expected {len} values, found {}", values.len())));
            }
            Ok(values)
        };
        let pi = row(n)?;
        let a = (0..n).map(|_| row(n)).collect::<Result<Vec<_>>>()?;
        let b = (0..n).map(|_| row(m)).collect::<Result<Vec<_>>>()?;
        HmmModel::new(pi, a, b)
    }
}

fn normalize_checked(name: &str, row: &mut [f64]) -> Result<()> {
    if row.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
        return Err(Error::InvalidModel(format!("{name} has an entry outside [0, 1]")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > INPUT_ROW_TOLERANCE {
        return Err(Error::InvalidModel(format!("{name} row sums to {sum}, not 1")));
    }
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(())
}

fn random_row<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    let base = 1.0 / dim as f64;
    if dim == 1 {
        return vec![1.0];
    }
    loop {
        // Centred draws from [-0.05, 0.05] stay within [-0.1, 0.1].
        let noise: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.05..0.05)).collect();
        let mean = noise.iter().sum::<f64>() / dim as f64;
        let mut row: Vec<f64> = noise.iter().map(|u| base * (1.0 + u - mean)).collect();
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= sum);
        if row.iter().all(|&v| v != base) {
            return row;
        }
    }
}
