use super::inference::{backward, forward_strict};
use super::HmmModel;
use crate::error::{Error, Result};
use crate::seq_data::ObservationSequence;

/// Training stops once an iteration improves the log-likelihood by less than this.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainWarning {
    /// The state's expected occupancy underflowed to zero, so its rows were
    /// carried over unchanged from the previous iteration.
    DegenerateState { iteration: usize, state: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Log-likelihood of the initial model followed by one entry per
    /// re-estimation.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations_run: usize,
    pub final_model: HmmModel,
    pub warnings: Vec<TrainWarning>,
}

impl TrainReport {
    pub fn final_log_likelihood(&self) -> f64 {
        *self.log_likelihood_trace.last().expect("trace holds the initial likelihood")
    }
}

/// Baum-Welch re-estimation on a single observation sequence.
///
/// Runs until `max_iterations` re-estimations or until the improvement drops
/// below [`CONVERGENCE_TOLERANCE`].
pub fn baum_welch(model: &HmmModel, obs: &[usize], max_iterations: usize) -> Result<TrainReport> {
    if obs.len() < 2 {
        return Err(Error::InvalidArgument(
            "Baum-Welch needs an observation sequence of length >= 2".into(),
        ));
    }
    if max_iterations == 0 {
        return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
    }
    let mut current = model.clone();
    let mut fwd = forward_strict(&current, obs)?;
    let mut trace = vec![fwd.log_likelihood];
    let mut warnings = Vec::new();
    let mut iterations_run = 0;

    while iterations_run < max_iterations {
        iterations_run += 1;
        let betas = backward(&current, obs, &fwd.scales)?;
        let degenerate = reestimate(&mut current, obs, &fwd.alphas, &betas);
        warnings.extend(degenerate.into_iter().map(|state| TrainWarning::DegenerateState {
            iteration: iterations_run,
            state,
        }));

        let prev = fwd.log_likelihood;
        fwd = forward_strict(&current, obs)?;
        trace.push(fwd.log_likelihood);
        if fwd.log_likelihood - prev < CONVERGENCE_TOLERANCE {
            break;
        }
    }

    Ok(TrainReport {
        log_likelihood_trace: trace,
        iterations_run,
        final_model: current,
        warnings,
    })
}

/// Replaces the model parameters with their expected-count estimates.
/// Returns the states whose rows were left unchanged.
fn reestimate(model: &mut HmmModel, obs: &[usize], alphas: &[Vec<f64>], betas: &[Vec<f64>]) -> Vec<usize> {
    let n = model.n_states();
    let m = model.n_symbols();
    let t_len = obs.len();

    let mut trans_num = vec![vec![0.0; n]; n];
    let mut trans_den = vec![0.0; n];
    let mut emit_num = vec![vec![0.0; m]; n];
    let mut emit_den = vec![0.0; n];
    let mut first_gamma = vec![0.0; n];
    let mut digamma = vec![0.0; n];

    for t in 0..t_len - 1 {
        let next_obs = obs[t + 1];
        for i in 0..n {
            let mut gamma = 0.0;
            for j in 0..n {
                digamma[j] = alphas[t][i] * model.a[i][j] * model.b[j][next_obs] * betas[t + 1][j];
                gamma += digamma[j];
            }
            for j in 0..n {
                trans_num[i][j] += digamma[j];
            }
            trans_den[i] += gamma;
            emit_num[i][obs[t]] += gamma;
            emit_den[i] += gamma;
            if t == 0 {
                first_gamma[i] = gamma;
            }
        }
    }
    let last = &alphas[t_len - 1];
    for i in 0..n {
        emit_num[i][obs[t_len - 1]] += last[i];
        emit_den[i] += last[i];
    }

    let mut degenerate = Vec::new();
    model.pi = first_gamma;
    renormalize(&mut model.pi);
    for i in 0..n {
        if trans_den[i] > 0.0 && emit_den[i] > 0.0 {
            for j in 0..n {
                model.a[i][j] = trans_num[i][j] / trans_den[i];
            }
            for k in 0..m {
                model.b[i][k] = emit_num[i][k] / emit_den[i];
            }
            renormalize(&mut model.a[i]);
            renormalize(&mut model.b[i]);
        } else {
            degenerate.push(i);
        }
    }
    degenerate
}

fn renormalize(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        row.iter_mut().for_each(|v| *v /= sum);
    }
}

/// Trains one model on several sequences by concatenating them into a
/// single observation stream, starting from [`HmmModel::init_random`].
pub fn train_multi(
    sequences: &[ObservationSequence],
    n_states: usize,
    n_symbols: usize,
    iterations: usize,
    seed: u64,
) -> Result<TrainReport> {
    if sequences.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let stream: Vec<usize> = sequences.iter().flat_map(|s| s.ids.iter().copied()).collect();
    let init = HmmModel::init_random(n_states, n_symbols, seed)?;
    baum_welch(&init, &stream, iterations)
}
