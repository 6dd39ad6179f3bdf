//! Adam ascent with an exponentially decaying learning rate and seeded,
//! independent random restarts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    /// Exact reverse-mode gradient.
    #[default]
    Analytic,
    /// Central differences with step 1e-6·max(1, |x_j|).
    FiniteDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub iterations: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    pub gradient: GradientMethod,
    /// Record the best-so-far value every this many iterations.
    pub envelope_stride: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            iterations: 50_000,
            lr_start: 0.07,
            lr_end: 1e-12,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            trials: 64,
            seed: 0,
            gradient: GradientMethod::Analytic,
            envelope_stride: 500,
        }
    }
}

impl AdamConfig {
    /// Shorter profile for quick checks: the first 5 000 iterations of the
    /// default schedule, 16 trials.
    pub fn ci() -> Self {
        Self {
            trials: 16,
            envelope_stride: 50,
            ..Self::default().truncated(5_000)
        }
    }

    /// Stops the current schedule after `iterations` steps, keeping its
    /// per-iteration decay.
    pub fn truncated(self, iterations: usize) -> Self {
        Self {
            lr_end: self.learning_rate(iterations),
            iterations,
            ..self
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_gradient(mut self, gradient: GradientMethod) -> Self {
        self.gradient = gradient;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if self.trials == 0 {
            return bad("trials must be positive");
        }
        if !(self.lr_start > 0.0 && self.lr_end > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        Ok(())
    }

    /// Multiplicative learning-rate decay per iteration.
    pub fn decay(&self) -> f64 {
        (self.lr_end / self.lr_start).powf(1.0 / self.iterations as f64)
    }

    /// lr(t) = lr_start · (lr_end / lr_start)^(t / iterations).
    pub fn learning_rate(&self, t: usize) -> f64 {
        self.lr_start * (self.lr_end / self.lr_start).powf(t as f64 / self.iterations as f64)
    }
}

/// Moment estimates of one Adam run.
#[derive(Clone, Debug)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: i32,
}

impl Adam {
    pub fn new(config: &AdamConfig, dim: usize) -> Self {
        Self {
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            first: vec![0.0; dim],
            second: vec![0.0; dim],
            steps: 0,
        }
    }

    /// One bias-corrected ascent step along `grad`.
    pub fn ascend(&mut self, x: &mut [f64], grad: &[f64], lr: f64) {
        self.steps += 1;
        let c1 = 1.0 - self.beta1.powi(self.steps);
        let c2 = 1.0 - self.beta2.powi(self.steps);
        for (((xi, &g), m), v) in x
            .iter_mut()
            .zip(grad)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *xi += lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Outcome of one random restart.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialLog {
    pub trial: usize,
    /// Objective at the last iterate.
    pub final_objective: f64,
    /// Best objective seen at any iterate.
    pub best_objective: f64,
    /// Last iteration at which the best value improved.
    pub plateau_iteration: usize,
    /// Largest objective value evaluated (a sanity bound, ≤ 1 for
    /// probabilities).
    pub max_objective: f64,
    /// Best-so-far value sampled every `envelope_stride` iterations.
    pub envelope: Vec<f64>,
    /// Set when the trial stopped early on a degenerate iterate.
    pub aborted: bool,
}

/// Best iterate of a trial together with its log.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub best_params: Vec<f64>,
    pub log: TrialLog,
}

/// Runs a single Adam ascent from `x0`; `eval` returns the objective and its
/// gradient.
pub fn run_trial<F>(config: &AdamConfig, trial: usize, x0: Vec<f64>, mut eval: F) -> TrialOutcome
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let stride = config.envelope_stride.max(1);
    let mut x = x0;
    let mut adam = Adam::new(config, x.len());
    let mut best = f64::NEG_INFINITY;
    let mut best_params = x.clone();
    let mut max_objective = f64::NEG_INFINITY;
    let mut plateau_iteration = 0;
    let mut envelope = Vec::with_capacity(config.iterations / stride + 1);
    let mut last = f64::NEG_INFINITY;
    let mut aborted = false;
    let mut lr = config.lr_start;
    let decay = config.decay();

    for it in 0..=config.iterations {
        let (value, grad) = match eval(&x) {
            Ok(vg) if vg.0.is_finite() => vg,
            _ => {
                aborted = true;
                break;
            }
        };
        last = value;
        max_objective = max_objective.max(value);
        if value > best {
            if value - best > 1e-12 {
                plateau_iteration = it;
            }
            best = value;
            best_params.copy_from_slice(&x);
        }
        if it % stride == 0 {
            envelope.push(best);
        }
        if it == config.iterations {
            break;
        }
        adam.ascend(&mut x, &grad, lr);
        lr *= decay;
    }

    TrialOutcome {
        best_params,
        log: TrialLog {
            trial,
            final_objective: last,
            best_objective: best,
            plateau_iteration,
            max_objective,
            envelope,
            aborted,
        },
    }
}

/// Reproducible generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Standard-normal starting point.
pub fn random_start(seed: u64, trial: usize, dim: usize) -> Vec<f64> {
    let mut rng = trial_rng(seed, trial);
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Runs `config.trials` independent restarts in parallel and returns them in
/// trial order.
pub fn run_trials<F>(config: &AdamConfig, dim: usize, eval: F) -> Vec<TrialOutcome>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)> + Sync,
{
    (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(config, trial, random_start(config.seed, trial, dim), &eval))
        .collect()
}

/// Index of the best trial; ties go to the lowest index.
pub fn best_trial(outcomes: &[TrialOutcome]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (n, o) in outcomes.iter().enumerate() {
        let v = o.log.best_objective;
        if v.is_finite() && best.is_none_or(|b| v > outcomes[b].log.best_objective) {
            best = Some(n);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        let cfg = AdamConfig::default();
        assert_eq!(cfg.learning_rate(0), 0.07);
        let end = cfg.learning_rate(cfg.iterations);
        assert!((end - 1e-12).abs() <= 1e-15 * 1e-12, "{end}");
        let mut lr = cfg.lr_start;
        for _ in 0..cfg.iterations {
            lr *= cfg.decay();
        }
        assert!((lr - 1e-12).abs() <= 1e-9 * 1e-12);
    }

    #[test]
    fn truncation_keeps_the_decay() {
        let full = AdamConfig::default();
        let ci = AdamConfig::ci();
        assert_eq!(ci.iterations, 5_000);
        assert!((ci.decay() / full.decay() - 1.0).abs() < 1e-12);
        assert!((ci.learning_rate(1234) / full.learning_rate(1234) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maximizes_a_concave_quadratic() {
        let cfg = AdamConfig::default().with_iterations(4000);
        let eval = |x: &[f64]| {
            let v = -(x[0] - 1.5).powi(2) - 2.0 * (x[1] + 0.5).powi(2);
            Ok((v, vec![-2.0 * (x[0] - 1.5), -4.0 * (x[1] + 0.5)]))
        };
        let out = run_trial(&cfg, 0, vec![0.0, 0.0], eval);
        assert!((out.best_params[0] - 1.5).abs() < 1e-6);
        assert!((out.best_params[1] + 0.5).abs() < 1e-6);
        assert!(out.log.envelope.windows(2).all(|w| w[0] <= w[1]));
        assert!(!out.log.aborted);
    }

    #[test]
    fn trials_are_reproducible_and_independent() {
        let a = random_start(42, 3, 5);
        let b = random_start(42, 3, 5);
        let c = random_start(42, 4, 5);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn failing_objective_aborts_trial() {
        let cfg = AdamConfig::default().with_iterations(10);
        let out = run_trial(&cfg, 0, vec![0.0], |_| Err(Error::Degenerate("x".into())));
        assert!(out.log.aborted);
        assert_eq!(best_trial(std::slice::from_ref(&out)), None);
    }

    #[test]
    fn config_validation() {
        assert!(AdamConfig::default().validate().is_ok());
        assert!(AdamConfig::default().with_trials(0).validate().is_err());
        assert!(AdamConfig { beta1: 1.0, ..AdamConfig::default() }.validate().is_err());
    }
}
