//! Numerical maximization of one-sequence probabilities over EB-channel
//! models and over classical machines.

pub mod adam;
pub mod classical;
pub mod params;

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::model::{validate_quantum, EbChannel, Instrument, QuantumModel, Sequence, ValidationReport};
use crate::prob::{format_sig17, quantum_sequence_prob};

pub use adam::{AdamConfig, GradientMethod, TrialLog};
pub use classical::{classical_maximize, ClassicalOptimum};
pub use params::{ParamLayout, ParamMode};

/// Tolerance the returned model is re-validated with.
pub const RESULT_TOL: f64 = 1e-6;

/// Best model of an optimization run.
#[derive(Clone, Debug)]
pub struct QuantumOptimum {
    pub layout: ParamLayout,
    /// Raw parameters of the best iterate.
    pub params: Vec<f64>,
    /// Objective of the decoded best iterate, before completion.
    pub raw_prob: f64,
    /// Completed model with Σ E = 𝟙 and Σ K†K = 𝟙.
    pub model: QuantumModel,
    /// Probability of the completed model; never below `raw_prob`.
    pub prob: f64,
    pub best_trial: usize,
    pub trials: Vec<TrialLog>,
    pub report: ValidationReport,
}

impl QuantumOptimum {
    pub fn log_csv(&self) -> String {
        trial_log_csv(&self.trials)
    }
}

/// Run log with one row per trial.
pub fn trial_log_csv(trials: &[TrialLog]) -> String {
    let mut out = String::from("trial,final_objective,best_objective,plateau_iteration\n");
    for t in trials {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            t.trial,
            format_sig17(t.final_objective),
            format_sig17(t.best_objective),
            t.plateau_iteration
        );
    }
    out
}

/// Summary fit for JSON output.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub sequence: String,
    pub d: usize,
    pub m: usize,
    pub prob: f64,
    pub raw_prob: f64,
    pub best_trial: usize,
    pub trials: usize,
    pub max_residual: f64,
}

impl QuantumOptimum {
    pub fn summary(&self, seq: &Sequence) -> RunSummary {
        RunSummary {
            sequence: seq.to_string(),
            d: self.layout.d,
            m: self.layout.m,
            prob: self.prob,
            raw_prob: self.raw_prob,
            best_trial: self.best_trial,
            trials: self.trials.len(),
            max_residual: self.report.max_residual(),
        }
    }
}

/// Adam search over rank-1 models of dimension `d` with `m` branches and one
/// Kraus operator per outcome.
pub fn adam_maximize(config: &AdamConfig, seq: &Sequence, d: usize, m: usize) -> Result<QuantumOptimum> {
    adam_maximize_with(config, seq, &ParamLayout::new(d, m))
}

pub fn adam_maximize_with(
    config: &AdamConfig,
    seq: &Sequence,
    layout: &ParamLayout,
) -> Result<QuantumOptimum> {
    config.validate()?;
    if layout.d == 0 || layout.m == 0 || layout.kraus_per_outcome == 0 {
        return Err(Error::InvalidArgument(format!("empty layout {layout:?}")));
    }
    let outcomes = match config.gradient {
        GradientMethod::Analytic => adam::run_trials(config, layout.len(), |x| {
            params::value_and_gradient(layout, x, seq)
        }),
        GradientMethod::FiniteDifference => adam::run_trials(config, layout.len(), |x| {
            let f = |y: &[f64]| params::objective(layout, y, seq);
            let value = f(x)?;
            Ok((value, params::central_difference_with(f, x, params::default_step)?))
        }),
    };
    let best = adam::best_trial(&outcomes)
        .ok_or_else(|| Error::Degenerate("every trial hit a degenerate iterate".into()))?;
    let best_params = outcomes[best].best_params.clone();
    let raw_prob = params::objective(layout, &best_params, seq)?;
    let raw_model = params::decode(layout, &best_params)?.to_model();
    let (model, prob) = complete_model(&raw_model, seq);
    let report = validate_quantum(&model, RESULT_TOL);
    if !report.is_valid() {
        return Err(Error::Validation(report));
    }
    Ok(QuantumOptimum {
        layout: *layout,
        params: best_params,
        raw_prob,
        model,
        prob,
        best_trial: best,
        trials: outcomes.into_iter().map(|o| o.log).collect(),
        report,
    })
}

/// Turns a model with Σ E ≤ 𝟙 and Σ K†K ≤ 𝟙 into a valid one.
///
/// The POVM deficit 𝟙 − Σ E is added to one effect and √(𝟙 − Σ K†K) becomes an
/// extra Kraus operator of one outcome. Both only add nonnegative terms to the
/// transfer matrices, so the probability cannot drop; the placement with the
/// largest probability is kept.
pub fn complete_model(model: &QuantumModel, seq: &Sequence) -> (QuantumModel, f64) {
    let d = model.dim();
    let channel = model.channel();
    let inst = model.instrument();
    let effect_sum = channel
        .effects()
        .iter()
        .fold(linalg::zeros(d), |acc, e| acc + e);
    let povm_gap = linalg::psd_sqrt(&linalg::hermitian_part(&(linalg::identity(d) - effect_sum)));
    let povm_gap = &povm_gap * &povm_gap;
    let kraus_gap = linalg::psd_sqrt(&linalg::hermitian_part(&(linalg::identity(d) - inst.kraus_sum())));

    let mut best: Option<(QuantumModel, f64)> = None;
    for j in 0..channel.branches() {
        let mut effects: Vec<ComplexMatrix> = channel.effects().to_vec();
        effects[j] = linalg::hermitian_part(&(&effects[j] + &povm_gap));
        let completed = EbChannel::new(effects, channel.preps().to_vec()).expect("shapes kept");
        for a in [0u8, 1] {
            let mut kraus = [inst.kraus(0).to_vec(), inst.kraus(1).to_vec()];
            kraus[a as usize].push(kraus_gap.clone());
            let [k0, k1] = kraus;
            let candidate = QuantumModel::new(
                model.rho0().clone(),
                completed.clone(),
                Instrument::new(k0, k1).expect("shapes kept"),
            )
            .expect("shapes kept");
            let p = quantum_sequence_prob(&candidate, seq, true);
            if best.as_ref().is_none_or(|(_, q)| p > *q) {
                best = Some((candidate, p));
            }
        }
    }
    best.expect("at least one branch")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DEFAULT_TOL;
    use crate::optimize::params::{decode, objective};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn completion_is_valid_and_never_lowers_the_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let seq = Sequence::one_tick(4).unwrap();
        for _ in 0..20 {
            let layout = ParamLayout::new(3, 4);
            let p: Vec<f64> = (0..layout.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let raw = decode(&layout, &p).unwrap().to_model();
            let before = objective(&layout, &p, &seq).unwrap();
            let (model, after) = complete_model(&raw, &seq);
            assert!(validate_quantum(&model, DEFAULT_TOL).is_valid());
            assert!(after >= before - 1e-15, "{after} < {before}");
            assert!((after - quantum_sequence_prob(&model, &seq, true)).abs() < 1e-15);
        }
    }

    #[test]
    fn short_run_is_reproducible_and_valid() {
        let cfg = AdamConfig::ci().with_iterations(300).with_trials(3).with_seed(9);
        let seq = Sequence::one_tick(3).unwrap();
        let a = adam_maximize(&cfg, &seq, 2, 3).unwrap();
        let b = adam_maximize(&cfg, &seq, 2, 3).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.log_csv(), b.log_csv());
        assert!(a.report.is_valid());
        assert!(a.prob >= a.raw_prob);
        assert!(a.trials.iter().all(|t| t.max_objective <= 1.0 + 1e-9));
        assert_eq!(a.log_csv().lines().count(), 4);
    }

    #[test]
    fn finite_difference_mode_runs() {
        let cfg = AdamConfig::ci()
            .with_iterations(100)
            .with_trials(2)
            .with_gradient(GradientMethod::FiniteDifference);
        let seq = Sequence::one_tick(3).unwrap();
        let fd = adam_maximize(&cfg, &seq, 2, 3).unwrap();
        assert!(fd.report.is_valid());
        assert!(fd.raw_prob > 0.0 && fd.prob >= fd.raw_prob);
    }
}
