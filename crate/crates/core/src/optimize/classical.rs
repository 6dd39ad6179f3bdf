//! Adam search over d-state classical machines.
//!
//! π_j = r_j² / Σ r², and column i of the stacked [T₀; T₁] is s_i² / Σ s_i².

use nalgebra::{DMatrix, DVector};

use super::adam::{self, AdamConfig, GradientMethod, TrialLog};
use super::params::{central_difference_with, default_step};
use crate::error::{Error, Result};
use crate::model::{ClassicalModel, Sequence};
use crate::prob::classical_sequence_prob;

#[derive(Clone, Debug)]
pub struct ClassicalOptimum {
    pub model: ClassicalModel,
    pub prob: f64,
    pub params: Vec<f64>,
    pub best_trial: usize,
    pub trials: Vec<TrialLog>,
}

pub fn parameter_count(d: usize) -> usize {
    d + 2 * d * d
}

fn normalized_squares(raw: &[f64]) -> Result<(Vec<f64>, f64)> {
    let total: f64 = raw.iter().map(|x| x * x).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Degenerate("zero parameter block".into()));
    }
    Ok((raw.iter().map(|x| x * x / total).collect(), total))
}

pub fn decode(d: usize, params: &[f64]) -> Result<ClassicalModel> {
    if params.len() != parameter_count(d) {
        return Err(Error::Dimension(format!(
            "expected {} parameters, got {}",
            parameter_count(d),
            params.len()
        )));
    }
    let (pi, _) = normalized_squares(&params[..d])?;
    let mut t = [DMatrix::zeros(d, d), DMatrix::zeros(d, d)];
    for i in 0..d {
        let block = &params[d + 2 * d * i..d + 2 * d * (i + 1)];
        let (col, _) = normalized_squares(block)?;
        for a in 0..2 {
            for j in 0..d {
                t[a][(j, i)] = col[a * d + j];
            }
        }
    }
    let [t0, t1] = t;
    ClassicalModel::new(DVector::from_vec(pi), t0, t1)
}

pub fn objective(d: usize, params: &[f64], seq: &Sequence) -> Result<f64> {
    Ok(classical_sequence_prob(&decode(d, params)?, seq))
}

/// Objective and exact gradient. For q_k = s_k²/N the chain rule gives
/// ∂p/∂s_l = 2 s_l/N · (g_l − Σ_k g_k q_k).
pub fn value_and_gradient(d: usize, params: &[f64], seq: &Sequence) -> Result<(f64, Vec<f64>)> {
    let model = decode(d, params)?;
    let t = [model.transition(0), model.transition(1)];
    let mut forward = vec![model.pi().clone()];
    for &a in seq.outcomes() {
        let next = t[a as usize] * forward.last().unwrap();
        forward.push(next);
    }
    let value = forward.last().unwrap().sum();

    let mut grad_t = [DMatrix::<f64>::zeros(d, d), DMatrix::<f64>::zeros(d, d)];
    let mut w = DVector::from_element(d, 1.0);
    for (step, &a) in seq.outcomes().iter().enumerate().rev() {
        grad_t[a as usize] += &w * forward[step].transpose();
        w = t[a as usize].tr_mul(&w);
    }

    let mut grad = vec![0.0; params.len()];
    let chain = |raw: &[f64], g: &[f64], out: &mut [f64]| {
        let total: f64 = raw.iter().map(|x| x * x).sum();
        let mean: f64 = raw.iter().zip(g).map(|(x, gk)| gk * x * x).sum::<f64>() / total;
        for ((o, x), gk) in out.iter_mut().zip(raw).zip(g) {
            *o = 2.0 * x / total * (gk - mean);
        }
    };
    chain(&params[..d], w.as_slice(), &mut grad[..d]);
    for i in 0..d {
        let range = d + 2 * d * i..d + 2 * d * (i + 1);
        let g: Vec<f64> = (0..2 * d).map(|k| grad_t[k / d][(k % d, i)]).collect();
        chain(&params[range.clone()], &g, &mut grad[range]);
    }
    Ok((value, grad))
}

/// Adam search for the most likely d-state machine emitting `seq`.
pub fn classical_maximize(config: &AdamConfig, seq: &Sequence, d: usize) -> Result<ClassicalOptimum> {
    config.validate()?;
    if d == 0 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    let n = parameter_count(d);
    let outcomes = match config.gradient {
        GradientMethod::Analytic => adam::run_trials(config, n, |x| value_and_gradient(d, x, seq)),
        GradientMethod::FiniteDifference => adam::run_trials(config, n, |x| {
            let f = |y: &[f64]| objective(d, y, seq);
            Ok((f(x)?, central_difference_with(f, x, default_step)?))
        }),
    };
    let best = adam::best_trial(&outcomes)
        .ok_or_else(|| Error::Degenerate("every trial hit a degenerate iterate".into()))?;
    let params = outcomes[best].best_params.clone();
    let model = decode(d, &params)?;
    let prob = classical_sequence_prob(&model, seq);
    Ok(ClassicalOptimum {
        model,
        prob,
        params,
        best_trial: best,
        trials: outcomes.into_iter().map(|o| o.log).collect(),
    })
}
