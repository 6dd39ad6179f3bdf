//! Unconstrained parametrization of EB-channel models.
//!
//! Raw real parameters are decoded as
//!
//! * states   σ_i = Ã_i / Tr Ã_i with Ã_i = a_i a_i† (rank-1), A_i†A_i (full)
//!   or diag(x_i²) (commuting),
//! * effects  E_j = B̃_j / λ_max(Σ_j B̃_j) with B̃_j = b_j b_j† or B_j†B_j,
//! * Kraus    K_{a,k} = C_{a,k} / √λ_max(Σ C†C),
//!
//! so every decoded model satisfies Σ E ≤ 𝟙 and Σ K†K ≤ 𝟙 by construction.
//! The initial state is fixed to |0⟩⟨0|.
//!
//! Layout of the flat vector: all state blocks, then all effect blocks, then
//! the Kraus blocks ordered (outcome, index). Complex numbers occupy two
//! consecutive slots (re, im); matrices are row-major.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, c, ComplexMatrix, ComplexVector};
use crate::model::{EbChannel, Instrument, QuantumModel, Sequence};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ParamMode {
    /// Rank-1 states and effects.
    #[default]
    Rank1,
    /// Arbitrary-rank states and effects.
    Full,
    /// States diagonal in the computational basis (hence commuting); rank-1
    /// effects.
    CommutingStates,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub d: usize,
    pub m: usize,
    pub mode: ParamMode,
    pub kraus_per_outcome: usize,
}

impl ParamLayout {
    /// Rank-1 layout with one Kraus operator per outcome.
    pub fn new(d: usize, m: usize) -> Self {
        Self {
            d,
            m,
            mode: ParamMode::Rank1,
            kraus_per_outcome: 1,
        }
    }

    pub fn with_mode(mut self, mode: ParamMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_kraus_per_outcome(mut self, n: usize) -> Self {
        self.kraus_per_outcome = n;
        self
    }

    fn state_block(&self) -> usize {
        match self.mode {
            ParamMode::Rank1 => 2 * self.d,
            ParamMode::Full => 2 * self.d * self.d,
            ParamMode::CommutingStates => self.d,
        }
    }

    fn effect_block(&self) -> usize {
        match self.mode {
            ParamMode::Rank1 | ParamMode::CommutingStates => 2 * self.d,
            ParamMode::Full => 2 * self.d * self.d,
        }
    }

    fn kraus_block(&self) -> usize {
        2 * self.d * self.d
    }

    fn kraus_count(&self) -> usize {
        2 * self.kraus_per_outcome
    }

    fn effects_offset(&self) -> usize {
        self.m * self.state_block()
    }

    fn kraus_offset(&self) -> usize {
        self.effects_offset() + self.m * self.effect_block()
    }

    pub fn len(&self) -> usize {
        self.kraus_offset() + self.kraus_count() * self.kraus_block()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, params: &[f64]) -> Result<()> {
        if self.d == 0 || self.m == 0 || self.kraus_per_outcome == 0 {
            return Err(Error::InvalidArgument(format!("empty layout {self:?}")));
        }
        if params.len() != self.len() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.len(),
                params.len()
            )));
        }
        Ok(())
    }
}

fn read_vector(p: &[f64], d: usize) -> ComplexVector {
    ComplexVector::from_fn(d, |k, _| c(p[2 * k], p[2 * k + 1]))
}

fn read_matrix(p: &[f64], d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |r, s| {
        let k = r * d + s;
        c(p[2 * k], p[2 * k + 1])
    })
}

fn write_vector(out: &mut [f64], v: &ComplexVector) {
    for (k, z) in v.iter().enumerate() {
        out[2 * k] = z.re;
        out[2 * k + 1] = z.im;
    }
}

fn write_matrix(out: &mut [f64], m: &ComplexMatrix) {
    let d = m.nrows();
    for r in 0..d {
        for s in 0..d {
            let k = r * d + s;
            out[2 * k] = m[(r, s)].re;
            out[2 * k + 1] = m[(r, s)].im;
        }
    }
}

/// A decoded parameter vector, keeping the intermediates the gradient needs.
#[derive(Clone, Debug)]
pub struct Decoded {
    layout: ParamLayout,
    raw_states: Vec<ComplexMatrix>,
    state_traces: Vec<f64>,
    states: Vec<ComplexMatrix>,
    raw_effects: Vec<ComplexMatrix>,
    effect_scale: f64,
    effect_top: ComplexVector,
    effects: Vec<ComplexMatrix>,
    raw_kraus: Vec<ComplexMatrix>,
    kraus_scale: f64,
    kraus_top: ComplexVector,
    kraus: Vec<ComplexMatrix>,
}

pub fn decode(layout: &ParamLayout, params: &[f64]) -> Result<Decoded> {
    layout.check(params)?;
    let ParamLayout { d, m, mode, .. } = *layout;

    let sb = layout.state_block();
    let raw_states: Vec<ComplexMatrix> = (0..m)
        .map(|i| {
            let p = &params[i * sb..(i + 1) * sb];
            match mode {
                ParamMode::Rank1 => linalg::projector(&read_vector(p, d)),
                ParamMode::Full => {
                    let a = read_matrix(p, d);
                    a.adjoint() * a
                }
                ParamMode::CommutingStates => {
                    let sq: Vec<f64> = p.iter().map(|x| x * x).collect();
                    linalg::diag_real(&sq)
                }
            }
        })
        .collect();
    let state_traces: Vec<f64> = raw_states.iter().map(linalg::real_trace).collect();
    if let Some(i) = state_traces.iter().position(|&t| !(t > 0.0)) {
        return Err(Error::Degenerate(format!("state block {i} is zero")));
    }
    let states = raw_states
        .iter()
        .zip(&state_traces)
        .map(|(a, &t)| a.scale(1.0 / t))
        .collect();

    let eb = layout.effect_block();
    let off = layout.effects_offset();
    let raw_effects: Vec<ComplexMatrix> = (0..m)
        .map(|j| {
            let p = &params[off + j * eb..off + (j + 1) * eb];
            match mode {
                ParamMode::Rank1 | ParamMode::CommutingStates => {
                    linalg::projector(&read_vector(p, d))
                }
                ParamMode::Full => {
                    let b = read_matrix(p, d);
                    b.adjoint() * b
                }
            }
        })
        .collect();
    let effect_sum = raw_effects.iter().fold(linalg::zeros(d), |acc, b| acc + b);
    let (effect_scale, effect_top) = linalg::max_eigenpair(&effect_sum);
    if !(effect_scale > 0.0) {
        return Err(Error::Degenerate("all effect blocks are zero".into()));
    }
    let effects = raw_effects
        .iter()
        .map(|b| b.scale(1.0 / effect_scale))
        .collect();

    let kb = layout.kraus_block();
    let off = layout.kraus_offset();
    let raw_kraus: Vec<ComplexMatrix> = (0..layout.kraus_count())
        .map(|n| read_matrix(&params[off + n * kb..off + (n + 1) * kb], d))
        .collect();
    let gram = raw_kraus
        .iter()
        .fold(linalg::zeros(d), |acc, k| acc + k.adjoint() * k);
    let (kraus_scale, kraus_top) = linalg::max_eigenpair(&gram);
    if !(kraus_scale > 0.0) {
        return Err(Error::Degenerate("all Kraus blocks are zero".into()));
    }
    let t = kraus_scale.sqrt();
    let kraus = raw_kraus.iter().map(|k| k.scale(1.0 / t)).collect();

    Ok(Decoded {
        layout: *layout,
        raw_states,
        state_traces,
        states,
        raw_effects,
        effect_scale,
        effect_top,
        effects,
        raw_kraus,
        kraus_scale,
        kraus_top,
        kraus,
    })
}

impl Decoded {
    pub fn states(&self) -> &[ComplexMatrix] {
        &self.states
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    /// Kraus operators of outcome `a`.
    pub fn kraus(&self, a: u8) -> &[ComplexMatrix] {
        let n = self.layout.kraus_per_outcome;
        &self.kraus[a as usize * n..(a as usize + 1) * n]
    }

    pub fn to_model(&self) -> QuantumModel {
        let d = self.layout.d;
        let channel = EbChannel::new(self.effects.clone(), self.states.clone())
            .expect("decoded shapes agree");
        let instrument = Instrument::new(self.kraus(0).to_vec(), self.kraus(1).to_vec())
            .expect("decoded shapes agree");
        QuantumModel::new(linalg::basis_projector(d, 0), channel, instrument)
            .expect("decoded shapes agree")
    }

    /// Σ_k K_{a,k} σ_i K_{a,k}† for every (a, i).
    fn evolved_states(&self) -> [Vec<ComplexMatrix>; 2] {
        [0u8, 1].map(|a| {
            self.states
                .iter()
                .map(|s| {
                    self.kraus(a)
                        .iter()
                        .fold(linalg::zeros(self.layout.d), |acc, k| acc + k * s * k.adjoint())
                })
                .collect()
        })
    }

    fn transfer(&self, evolved: &[Vec<ComplexMatrix>; 2]) -> ([DMatrix<f64>; 2], DVector<f64>) {
        let m = self.layout.m;
        let t = [0usize, 1].map(|a| {
            DMatrix::from_fn(m, m, |j, i| {
                linalg::real_trace_product(&self.effects[j], &evolved[a][i])
            })
        });
        let pi = DVector::from_fn(m, |j, _| self.effects[j][(0, 0)].re);
        (t, pi)
    }
}

/// Sequence probability of the decoded model under the channel protocol.
pub fn objective(layout: &ParamLayout, params: &[f64], seq: &Sequence) -> Result<f64> {
    let dec = decode(layout, params)?;
    let evolved = dec.evolved_states();
    let (t, pi) = dec.transfer(&evolved);
    let (last, init) = seq.outcomes().split_last().expect("sequences are non-empty");
    let v = init.iter().fold(pi, |v, &a| &t[a as usize] * v);
    Ok(final_traces(&evolved, *last).dot(&v))
}

/// η_i = Tr Σ_k K_{a,k} σ_i K_{a,k}†, the weight of the last step.
fn final_traces(evolved: &[Vec<ComplexMatrix>; 2], a: u8) -> DVector<f64> {
    DVector::from_iterator(
        evolved[a as usize].len(),
        evolved[a as usize].iter().map(linalg::real_trace),
    )
}

/// Objective and its exact gradient by reverse-mode differentiation through
/// the sequence product, the trace pairings and the normalizations.
pub fn value_and_gradient(
    layout: &ParamLayout,
    params: &[f64],
    seq: &Sequence,
) -> Result<(f64, Vec<f64>)> {
    let dec = decode(layout, params)?;
    let ParamLayout { d, m, mode, .. } = *layout;
    let evolved = dec.evolved_states();
    let (t, pi) = dec.transfer(&evolved);

    // Forward vectors v_0 = π, v_t = T_{a_t} v_{t-1}; the last outcome only
    // contributes the trace weights η.
    let (&last, init) = seq.outcomes().split_last().expect("sequences are non-empty");
    let mut forward = Vec::with_capacity(init.len() + 1);
    forward.push(pi);
    for &a in init {
        let next = &t[a as usize] * forward.last().unwrap();
        forward.push(next);
    }
    let eta = final_traces(&evolved, last);
    let value = eta.dot(forward.last().unwrap());

    // Backward: ∂p/∂T_a accumulates w_t v_{t-1}ᵀ over steps with a_t = a.
    let mut grad_t = [DMatrix::<f64>::zeros(m, m), DMatrix::<f64>::zeros(m, m)];
    let grad_eta = forward.last().unwrap().clone();
    let mut w = eta;
    for (step, &a) in init.iter().enumerate().rev() {
        grad_t[a as usize] += &w * forward[step].transpose();
        w = t[a as usize].tr_mul(&w);
    }
    let grad_pi = w;

    // Adjoints of the decoded operators.
    let mut bar_effects: Vec<ComplexMatrix> = (0..m)
        .map(|j| linalg::basis_projector(d, 0).scale(grad_pi[j]))
        .collect();
    let mut bar_states = vec![linalg::zeros(d); m];
    let mut bar_kraus = vec![linalg::zeros(d); 2 * layout.kraus_per_outcome];
    for a in 0..2usize {
        for i in 0..m {
            let mut bar_x = if a == last as usize {
                linalg::identity(d).scale(grad_eta[i])
            } else {
                linalg::zeros(d)
            };
            for j in 0..m {
                let g = grad_t[a][(j, i)];
                bar_effects[j] += evolved[a][i].scale(g);
                bar_x += dec.effects[j].scale(g);
            }
            for (k, kr) in dec.kraus(a as u8).iter().enumerate() {
                bar_states[i] += kr.adjoint() * &bar_x * kr;
                bar_kraus[a * layout.kraus_per_outcome + k] +=
                    (&bar_x * kr * &dec.states[i]).scale(2.0);
            }
        }
    }

    let mut grad = vec![0.0; layout.len()];

    // States: Ã̄ = σ̄/τ − Re Tr(σ̄ Ã)/τ² 𝟙.
    let sb = layout.state_block();
    for i in 0..m {
        let tau = dec.state_traces[i];
        let shift = linalg::real_trace_product(&bar_states[i], &dec.raw_states[i]) / (tau * tau);
        let bar_raw = bar_states[i].scale(1.0 / tau) - linalg::identity(d).scale(shift);
        let p = &params[i * sb..(i + 1) * sb];
        let out = &mut grad[i * sb..(i + 1) * sb];
        match mode {
            ParamMode::Rank1 => {
                let a = read_vector(p, d);
                write_vector(out, &(&bar_raw * a).scale(2.0));
            }
            ParamMode::Full => {
                let a = read_matrix(p, d);
                write_matrix(out, &(a * &bar_raw).scale(2.0));
            }
            ParamMode::CommutingStates => {
                for k in 0..d {
                    out[k] = 2.0 * p[k] * bar_raw[(k, k)].re;
                }
            }
        }
    }

    // Effects: B̃̄_j = Ē_j/λ − κ v v†, κ = Σ_j Re Tr(Ē_j B̃_j)/λ².
    let lambda = dec.effect_scale;
    let kappa: f64 = (0..m)
        .map(|j| linalg::real_trace_product(&bar_effects[j], &dec.raw_effects[j]))
        .sum::<f64>()
        / (lambda * lambda);
    let top = linalg::projector(&dec.effect_top);
    let eb = layout.effect_block();
    let off = layout.effects_offset();
    for j in 0..m {
        let bar_raw = bar_effects[j].scale(1.0 / lambda) - top.scale(kappa);
        let p = &params[off + j * eb..off + (j + 1) * eb];
        let out = &mut grad[off + j * eb..off + (j + 1) * eb];
        match mode {
            ParamMode::Rank1 | ParamMode::CommutingStates => {
                let b = read_vector(p, d);
                write_vector(out, &(&bar_raw * b).scale(2.0));
            }
            ParamMode::Full => {
                let b = read_matrix(p, d);
                write_matrix(out, &(b * &bar_raw).scale(2.0));
            }
        }
    }

    // Kraus: C̄ = K̄/t − 2κ' C u u†, κ' = Σ Re Tr(K̄† C)/(2t³).
    let tk = dec.kraus_scale.sqrt();
    let kappa_k: f64 = bar_kraus
        .iter()
        .zip(&dec.raw_kraus)
        .map(|(bar, raw)| linalg::real_trace_product(&bar.adjoint(), raw))
        .sum::<f64>()
        / (2.0 * tk * tk * tk);
    let top = linalg::projector(&dec.kraus_top);
    let kb = layout.kraus_block();
    let off = layout.kraus_offset();
    for (n, (bar, raw)) in bar_kraus.iter().zip(&dec.raw_kraus).enumerate() {
        let g = bar.scale(1.0 / tk) - (raw * &top).scale(2.0 * kappa_k);
        write_matrix(&mut grad[off + n * kb..off + (n + 1) * kb], &g);
    }

    Ok((value, grad))
}

/// Central differences (f(x + h e_j) − f(x − h e_j)) / 2h with a fixed step.
pub fn central_difference<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    central_difference_with(f, x, |_| h)
}

/// Central differences with a per-coordinate step `step(x_j)`.
pub fn central_difference_with<F, S>(f: F, x: &[f64], step: S) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
    S: Fn(f64) -> f64,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let h = step(x[j]);
        probe[j] = x[j] + h;
        let up = f(&probe)?;
        probe[j] = x[j] - h;
        let down = f(&probe)?;
        probe[j] = x[j];
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Default finite-difference step 1e-6·max(1, |x|).
pub fn default_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

/// Finite-difference gradient of [`objective`] with step `h`.
pub fn gradient(layout: &ParamLayout, params: &[f64], seq: &Sequence, h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    central_difference(|x| objective(layout, x, seq), params, h)
}

/// Encodes a rank-1 model given by unit vectors: `prep_vectors[i]` for σ_i,
/// `effect_vectors[j]` for E_j, and equally many Kraus matrices per outcome.
/// Decoding returns exactly these operators when Σ E_j and Σ K†K have top
/// eigenvalue one.
pub fn encode_rank1(
    prep_vectors: &[ComplexVector],
    effect_vectors: &[ComplexVector],
    kraus0: &[ComplexMatrix],
    kraus1: &[ComplexMatrix],
) -> Result<(ParamLayout, Vec<f64>)> {
    let m = prep_vectors.len();
    if m == 0 || effect_vectors.len() != m {
        return Err(Error::Dimension("need m prepared states and m effects".into()));
    }
    if kraus0.is_empty() || kraus0.len() != kraus1.len() {
        return Err(Error::Dimension("need equally many Kraus operators per outcome".into()));
    }
    let d = prep_vectors[0].len();
    let layout = ParamLayout::new(d, m).with_kraus_per_outcome(kraus0.len());
    let mut params = vec![0.0; layout.len()];
    let sb = layout.state_block();
    for (i, v) in prep_vectors.iter().enumerate() {
        write_vector(&mut params[i * sb..(i + 1) * sb], v);
    }
    let off = layout.effects_offset();
    for (j, v) in effect_vectors.iter().enumerate() {
        write_vector(&mut params[off + j * sb..off + (j + 1) * sb], v);
    }
    let off = layout.kraus_offset();
    let kb = layout.kraus_block();
    for (n, k) in kraus0.iter().chain(kraus1).enumerate() {
        write_matrix(&mut params[off + n * kb..off + (n + 1) * kb], k);
    }
    Ok((layout, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{etf_quantum_model, etf_states, one_way_classical, diagonal_quantum_from_classical};
    use crate::model::{validate_quantum, Sequence};
    use crate::prob::quantum_sequence_prob;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_params(layout: &ParamLayout, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..layout.len()).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn orthonormal_effects_decode_to_projectors() {
        let d = 3;
        let basis: Vec<_> = (0..d).map(|k| linalg::ket(d, k)).collect();
        let k0 = linalg::diag_real(&[1.0, 1.0, 0.0]);
        let k1 = linalg::diag_real(&[0.0, 0.0, 1.0]);
        let (layout, params) = encode_rank1(&basis, &basis, &[k0.clone()], &[k1.clone()]).unwrap();
        let dec = decode(&layout, &params).unwrap();
        assert!((dec.effect_scale - 1.0).abs() < 1e-14);
        for k in 0..d {
            let diff = linalg::max_abs_diff(&dec.effects()[k], &linalg::basis_projector(d, k));
            assert!(diff < 1e-14);
        }
        // C₀ = diag(1,1,0), C₁ = diag(0,0,1): K₀, K₁ come back unchanged.
        assert!(linalg::max_abs_diff(&dec.kraus(0)[0], &k0) < 1e-14);
        assert!(linalg::max_abs_diff(&dec.kraus(1)[0], &k1) < 1e-14);
    }

    #[test]
    fn zero_blocks_are_degenerate() {
        let layout = ParamLayout::new(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = random_params(&layout, &mut rng);
        p[..4].iter_mut().for_each(|x| *x = 0.0);
        assert!(matches!(decode(&layout, &p), Err(Error::Degenerate(_))));
        assert!(decode(&layout, &p[1..]).is_err());
    }

    #[test]
    fn objective_matches_simulation_for_all_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let seq: Sequence = "00101".parse().unwrap();
        for mode in [ParamMode::Rank1, ParamMode::Full, ParamMode::CommutingStates] {
            for kraus in 1..=2 {
                let layout = ParamLayout::new(3, 4).with_mode(mode).with_kraus_per_outcome(kraus);
                let p = random_params(&layout, &mut rng);
                let model = decode(&layout, &p).unwrap().to_model();
                let direct = quantum_sequence_prob(&model, &seq, true);
                let fast = objective(&layout, &p, &seq).unwrap();
                assert!((direct - fast).abs() < 1e-13, "{mode:?}: {direct} vs {fast}");
            }
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (mode, seq) in [
            (ParamMode::Rank1, "0001"),
            (ParamMode::Full, "0110"),
            (ParamMode::CommutingStates, "001"),
        ] {
            for kraus in 1..=2 {
                let seq: Sequence = seq.parse().unwrap();
                let layout = ParamLayout::new(3, 4).with_mode(mode).with_kraus_per_outcome(kraus);
                let p = random_params(&layout, &mut rng);
                let (v, g) = value_and_gradient(&layout, &p, &seq).unwrap();
                assert!((v - objective(&layout, &p, &seq).unwrap()).abs() < 1e-15);
                let fd = gradient(&layout, &p, &seq, 1e-6).unwrap();
                let scale = fd.iter().map(|x| x.abs()).fold(1e-3, f64::max);
                for (j, (a, b)) in g.iter().zip(&fd).enumerate() {
                    assert!((a - b).abs() < 1e-6 * scale, "{mode:?} slot {j}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn global_phase_of_a_state_vector_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let layout = ParamLayout::new(3, 4);
        let seq = Sequence::one_tick(4).unwrap();
        let p = random_params(&layout, &mut rng);
        let (_, g) = value_and_gradient(&layout, &p, &seq).unwrap();
        let fd = gradient(&layout, &p, &seq, 1e-5).unwrap();
        // Direction i·a_0 rotates the phase of the first state vector.
        let mut dir = vec![0.0; layout.len()];
        for k in 0..3 {
            dir[2 * k] = -p[2 * k + 1];
            dir[2 * k + 1] = p[2 * k];
        }
        let along = |grad: &[f64]| grad.iter().zip(&dir).map(|(x, y)| x * y).sum::<f64>();
        assert!(along(&g).abs() < 1e-8);
        assert!(along(&fd).abs() < 1e-8);
    }

    #[test]
    fn directional_derivative_agrees_with_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layout = ParamLayout::new(4, 5);
        let seq = Sequence::one_tick(5).unwrap();
        let p = random_params(&layout, &mut rng);
        let dir = random_params(&layout, &mut rng);
        let fd = gradient(&layout, &p, &seq, 1e-5).unwrap();
        let h = 1e-5;
        let shifted = |s: f64| -> Vec<f64> { p.iter().zip(&dir).map(|(x, u)| x + s * u).collect() };
        let directional = (objective(&layout, &shifted(h), &seq).unwrap()
            - objective(&layout, &shifted(-h), &seq).unwrap())
            / (2.0 * h);
        let dot: f64 = fd.iter().zip(&dir).map(|(g, u)| g * u).sum();
        assert!((directional - dot).abs() < 1e-6, "{directional} vs {dot}");
    }

    #[test]
    fn quadratic_derivative_is_exact_to_second_order() {
        let f = |x: &[f64]| Ok(3.0 * x[0] * x[0] - 2.0 * x[0] * x[1] + x[1]);
        let g = central_difference(f, &[0.7, -1.3], 1e-4).unwrap();
        assert!((g[0] - (6.0 * 0.7 + 2.6)).abs() < 1e-8);
        assert!((g[1] - (-1.4 + 1.0)).abs() < 1e-8);
        assert!(gradient(&ParamLayout::new(2, 2), &[0.0; 4], &"0".parse().unwrap(), 0.0).is_err());
    }

    #[test]
    fn etf_parameters_reproduce_the_etf_value() {
        let d = 3;
        let frame = etf_states(d).unwrap();
        let mut preps: Vec<ComplexVector> = frame.vectors().to_vec();
        preps.push(linalg::ket(d, 0));
        let w = ((d as f64 - 1.0) / d as f64).sqrt();
        let mut effects = vec![linalg::ket(d, 0)];
        effects.extend(frame.vectors().iter().map(|v| v.scale(w)));
        let k0 = linalg::diag_real(&[0.0, 1.0, 1.0]);
        let k1 = linalg::diag_real(&[1.0, 0.0, 0.0]);
        let (layout, params) = encode_rank1(&preps, &effects, &[k0], &[k1]).unwrap();
        let seq = Sequence::one_tick(4).unwrap();
        let via_params = objective(&layout, &params, &seq).unwrap();
        let direct = quantum_sequence_prob(&etf_quantum_model(d).unwrap(), &seq, true);
        assert!((via_params - direct).abs() < 1e-14);
    }

    #[test]
    fn diagonal_one_way_parameters_reach_the_classical_bound() {
        // One-way L=4 machine as a dephased qutrit: K₀ₐ = √(1/4) 𝟙 stays,
        // K₀ᵦ = √(3/4)(|1⟩⟨0| + |2⟩⟨1|) steps forward, K₁ = √(3/4)|0⟩⟨2|.
        let d = 3;
        let basis: Vec<_> = (0..d).map(|k| linalg::ket(d, k)).collect();
        let (stay, go) = (0.25f64.sqrt(), 0.75f64.sqrt());
        let mut forward = linalg::zeros(d);
        forward[(1, 0)] = c(go, 0.0);
        forward[(2, 1)] = c(go, 0.0);
        let mut tick = linalg::zeros(d);
        tick[(0, 2)] = c(go, 0.0);
        let kraus0 = [linalg::identity(d).scale(stay), forward];
        let kraus1 = [tick, linalg::zeros(d)];
        let (layout, params) = encode_rank1(&basis, &basis, &kraus0, &kraus1).unwrap();
        let seq = Sequence::one_tick(4).unwrap();
        let p = objective(&layout, &params, &seq).unwrap();
        assert!((p - 0.31640625).abs() < 1e-15, "{p}");
        let model = decode(&layout, &params).unwrap().to_model();
        assert!(validate_quantum(&model, 1e-12).is_valid());
        let classical = one_way_classical(4).unwrap();
        let embedded = diagonal_quantum_from_classical(&classical).unwrap();
        assert!((quantum_sequence_prob(&embedded, &seq, true) - p).abs() < 1e-15);
    }
}
