use super::HmmModel;
use crate::error::{Error, Result};

/// Exhaustive enumeration is refused above this many state paths.
pub const BRUTEFORCE_PATH_LIMIT: u64 = 10_000_000;

/// Output of the scaled forward pass.
///
/// `alphas[t]` is the forward row at step `t` normalized to sum to one and
/// `scales[t]` is the factor `c_t` that normalized it. If the model assigns
/// the sequence probability zero, `log_likelihood` is `-inf` and both vectors
/// stop at the step where the mass vanished.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardResult {
    pub log_likelihood: f64,
    pub alphas: Vec<Vec<f64>>,
    pub scales: Vec<f64>,
}

impl ForwardResult {
    pub fn is_zero_probability(&self) -> bool {
        self.log_likelihood == f64::NEG_INFINITY
    }
}

/// State posteriors. `gammas[t][i]` is P(state i at t | obs) and
/// `digammas[t][i][j]` is P(state i at t, state j at t+1 | obs).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSet {
    pub gammas: Vec<Vec<f64>>,
    pub digammas: Vec<Vec<Vec<f64>>>,
}

/// Scaled forward algorithm, O(N^2 T).
pub fn forward(model: &HmmModel, obs: &[usize]) -> Result<ForwardResult> {
    model.check_observations(obs)?;
    let n = model.n_states();
    let mut alphas: Vec<Vec<f64>> = Vec::with_capacity(obs.len());
    let mut scales = Vec::with_capacity(obs.len());

    for &o in obs {
        let mut row: Vec<f64> = match alphas.last() {
            None => (0..n).map(|i| model.pi[i] * model.b[i][o]).collect(),
            Some(prev) => (0..n)
                .map(|i| {
                    let into: f64 = (0..n).map(|j| prev[j] * model.a[j][i]).sum();
                    into * model.b[i][o]
                })
                .collect(),
        };
        let total: f64 = row.iter().sum();
        if total <= 0.0 {
            return Ok(ForwardResult {
                log_likelihood: f64::NEG_INFINITY,
                alphas,
                scales,
            });
        }
        let c = 1.0 / total;
        row.iter_mut().for_each(|v| *v *= c);
        alphas.push(row);
        scales.push(c);
    }

    let log_likelihood = -scales.iter().map(|c| c.ln()).sum::<f64>();
    Ok(ForwardResult {
        log_likelihood,
        alphas,
        scales,
    })
}

/// Like [`forward`] but a zero-probability sequence is an error.
pub fn forward_strict(model: &HmmModel, obs: &[usize]) -> Result<ForwardResult> {
    let result = forward(model, obs)?;
    if result.is_zero_probability() {
        return Err(Error::ZeroProbabilitySequence {
            step: result.scales.len(),
        });
    }
    Ok(result)
}

/// Scaled backward pass using the forward scale factors, so that
/// `alphas[t][i] * betas[t][i] / scales[t]` is the state posterior.
pub fn backward(model: &HmmModel, obs: &[usize], scales: &[f64]) -> Result<Vec<Vec<f64>>> {
    model.check_observations(obs)?;
    if scales.len() != obs.len() {
        return Err(Error::LengthMismatch {
            expected: obs.len(),
            actual: scales.len(),
        });
    }
    let n = model.n_states();
    let t_len = obs.len();
    let mut betas = vec![vec![0.0; n]; t_len];
    betas[t_len - 1] = vec![scales[t_len - 1]; n];
    for t in (0..t_len - 1).rev() {
        let next_obs = obs[t + 1];
        for i in 0..n {
            let s: f64 = (0..n)
                .map(|j| model.a[i][j] * model.b[j][next_obs] * betas[t + 1][j])
                .sum();
            betas[t][i] = scales[t] * s;
        }
    }
    Ok(betas)
}

pub fn posteriors(model: &HmmModel, obs: &[usize]) -> Result<PosteriorSet> {
    let fwd = forward_strict(model, obs)?;
    let betas = backward(model, obs, &fwd.scales)?;
    Ok(posteriors_from(model, obs, &fwd.alphas, &betas))
}

pub(super) fn posteriors_from(
    model: &HmmModel,
    obs: &[usize],
    alphas: &[Vec<f64>],
    betas: &[Vec<f64>],
) -> PosteriorSet {
    let n = model.n_states();
    let t_len = obs.len();
    let mut gammas = Vec::with_capacity(t_len);
    let mut digammas = Vec::with_capacity(t_len.saturating_sub(1));
    for t in 0..t_len - 1 {
        let next_obs = obs[t + 1];
        let di: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| alphas[t][i] * model.a[i][j] * model.b[j][next_obs] * betas[t + 1][j])
                    .collect()
            })
            .collect();
        gammas.push(di.iter().map(|row| row.iter().sum()).collect());
        digammas.push(di);
    }
    gammas.push(alphas[t_len - 1].clone());
    PosteriorSet { gammas, digammas }
}

/// Most likely state at each step taken individually (argmax of gamma,
/// ties toward the lower state index).
pub fn posterior_decode(model: &HmmModel, obs: &[usize]) -> Result<Vec<usize>> {
    let post = posteriors(model, obs)?;
    Ok(post
        .gammas
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &g)| if g > best.1 { (i, g) } else { best })
                .0
        })
        .collect())
}

/// Log-likelihood per observation symbol.
pub fn score(model: &HmmModel, obs: &[usize]) -> Result<f64> {
    let fwd = forward(model, obs)?;
    Ok(fwd.log_likelihood / obs.len() as f64)
}

/// P(obs | model) by summing over every state path. Oracle only.
pub fn likelihood_bruteforce(model: &HmmModel, obs: &[usize]) -> Result<f64> {
    model.check_observations(obs)?;
    let n = model.n_states();
    let t_len = obs.len();
    let paths = u32::try_from(t_len)
        .ok()
        .and_then(|t| (n as u64).checked_pow(t))
        .filter(|&p| p <= BRUTEFORCE_PATH_LIMIT)
        .ok_or_else(|| Error::InstanceTooLarge(format!("{n}^{t_len} state paths")))?;

    let mut path = vec![0usize; t_len];
    let mut total = 0.0;
    for _ in 0..paths {
        let mut p = model.pi[path[0]] * model.b[path[0]][obs[0]];
        for t in 1..t_len {
            p *= model.a[path[t - 1]][path[t]] * model.b[path[t]][obs[t]];
        }
        total += p;
        // odometer increment
        for digit in path.iter_mut().rev() {
            *digit += 1;
            if *digit < n {
                break;
            }
            *digit = 0;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_state(b: Vec<f64>) -> HmmModel {
        HmmModel::new(vec![1.0], vec![vec![1.0]], vec![b]).unwrap()
    }

    #[test]
    fn bruteforce_small_cases() {
        let m = single_state(vec![0.5, 0.5]);
        assert!((likelihood_bruteforce(&m, &[0, 1]).unwrap() - 0.25).abs() < 1e-15);

        let sym = HmmModel::new(
            vec![0.5, 0.5],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        assert!((likelihood_bruteforce(&sym, &[0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bruteforce_refuses_large_instances() {
        let m = HmmModel::init_random(10, 2, 0).unwrap();
        let obs = vec![0; 8];
        assert!(matches!(likelihood_bruteforce(&m, &obs), Err(Error::InstanceTooLarge(_))));
    }

    #[test]
    fn forward_single_state() {
        let m = single_state(vec![0.5, 0.5]);
        let f = forward(&m, &[0, 1]).unwrap();
        assert!((f.log_likelihood - 0.25f64.ln()).abs() < 1e-15);
        assert_eq!(f.scales.len(), 2);
    }

    #[test]
    fn forward_zero_probability_is_neg_infinity() {
        let m = single_state(vec![0.0, 1.0]);
        let f = forward(&m, &[0]).unwrap();
        assert_eq!(f.log_likelihood, f64::NEG_INFINITY);
        assert!(f.alphas.is_empty());
        assert!(matches!(
            forward_strict(&m, &[1, 0]),
            Err(Error::ZeroProbabilitySequence { step: 1 })
        ));
        assert_eq!(score(&m, &[1, 1, 0]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn forward_rejects_bad_observations() {
        let m = single_state(vec![0.5, 0.5]);
        assert!(matches!(forward(&m, &[]), Err(Error::EmptyObservation)));
        assert!(matches!(forward(&m, &[2]), Err(Error::SymbolOutOfRange { id: 2, size: 2 })));
    }

    #[test]
    fn backward_base_case_and_length_check() {
        let m = HmmModel::init_random(3, 2, 5).unwrap();
        let f = forward(&m, &[1]).unwrap();
        let betas = backward(&m, &[1], &f.scales).unwrap();
        assert_eq!(betas, vec![vec![f.scales[0]; 3]]);
        assert!(matches!(
            backward(&m, &[1, 0], &f.scales),
            Err(Error::LengthMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn single_state_posteriors_are_one() {
        let m = single_state(vec![0.2, 0.8]);
        let p = posteriors(&m, &[0, 1, 1, 0]).unwrap();
        assert!(p.gammas.iter().flatten().all(|&g| (g - 1.0).abs() < 1e-12));
        assert!(p.digammas.iter().flatten().flatten().all(|&g| (g - 1.0).abs() < 1e-12));
        assert_eq!(posterior_decode(&m, &[0, 1, 1]).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn decode_deterministic_emissions() {
        let m = HmmModel::new(
            vec![1.0, 0.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        assert_eq!(posterior_decode(&m, &[0, 0]).unwrap(), vec![0, 0]);
    }

    #[test]
    fn score_is_per_symbol() {
        let m = single_state(vec![0.5, 0.5]);
        for obs in [vec![0], vec![0, 1, 1], vec![1; 40]] {
            assert!((score(&m, &obs).unwrap() - 0.5f64.ln()).abs() < 1e-14);
        }
        let r = HmmModel::init_random(2, 2, 3).unwrap();
        let f = forward(&r, &[1]).unwrap();
        assert_eq!(score(&r, &[1]).unwrap(), f.log_likelihood);
    }
}
