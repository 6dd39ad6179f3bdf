//! Random valid models for property checks.
//!
//! POVMs and instruments are made exactly complete by conjugating with
//! S^{-1/2}, where S is the sum of the raw positive operators.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, c, ComplexMatrix, ComplexVector};
use crate::model::{ClassicalModel, EbChannel, Instrument, QuantumModel};

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |_, _| c(normal(rng), normal(rng)))
}

pub fn gaussian_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexVector {
    ComplexVector::from_fn(d, |_, _| c(normal(rng), normal(rng)))
}

/// Random probability vector (normalized squares of Gaussians).
pub fn probability_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|_| normal(rng).powi(2)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Mixed state G G† / Tr(G G†).
pub fn density_matrix<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let g = gaussian_matrix(d, rng);
    let rho = &g * g.adjoint();
    let tr = linalg::real_trace(&rho);
    linalg::hermitian_part(&rho.scale(1.0 / tr))
}

pub fn pure_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let v = gaussian_vector(d, rng);
    let v = v.scale(1.0 / v.norm());
    linalg::projector(&v)
}

/// Haar-ish unitary from the eigenvectors of a random Hermitian matrix.
pub fn unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let g = gaussian_matrix(d, rng);
    linalg::hermitian_eigen(&(&g + g.adjoint())).1
}

/// m-outcome POVM with Σ E_i = 𝟙 up to round-off.
pub fn povm<R: Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> Vec<ComplexMatrix> {
    let raw: Vec<ComplexMatrix> = (0..m)
        .map(|_| {
            let g = gaussian_matrix(d, rng);
            g.adjoint() * g
        })
        .collect();
    let total = raw.iter().fold(linalg::zeros(d), |acc, b| acc + b);
    let w = linalg::inverse_sqrt(&total);
    raw.iter()
        .map(|b| linalg::hermitian_part(&(&w * b * &w)))
        .collect()
}

pub fn eb_channel<R: Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> EbChannel {
    let effects = povm(d, m, rng);
    let preps = (0..m).map(|_| density_matrix(d, rng)).collect();
    EbChannel::new(effects, preps).expect("consistent shapes")
}

/// Channel whose prepared states are all diagonal in one random basis.
pub fn commuting_states_channel<R: Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> EbChannel {
    let u = unitary(d, rng);
    let preps = (0..m)
        .map(|_| {
            let p = probability_vector(d, rng);
            linalg::hermitian_part(&(&u * linalg::diag_real(&p) * u.adjoint()))
        })
        .collect();
    EbChannel::new(povm(d, m, rng), preps).expect("consistent shapes")
}

/// Channel whose POVM elements are all diagonal in one random basis.
pub fn commuting_povm_channel<R: Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> EbChannel {
    let u = unitary(d, rng);
    // weights[i][l] ≥ 0 with Σ_i weights[i][l] = 1 for every l.
    let columns: Vec<Vec<f64>> = (0..d).map(|_| probability_vector(m, rng)).collect();
    let effects = (0..m)
        .map(|i| {
            let diag: Vec<f64> = (0..d).map(|l| columns[l][i]).collect();
            linalg::hermitian_part(&(&u * linalg::diag_real(&diag) * u.adjoint()))
        })
        .collect();
    let preps = (0..m).map(|_| density_matrix(d, rng)).collect();
    EbChannel::new(effects, preps).expect("consistent shapes")
}

/// Instrument with `kraus_per_outcome` operators per outcome and
/// Σ K†K = 𝟙.
pub fn instrument<R: Rng + ?Sized>(d: usize, kraus_per_outcome: usize, rng: &mut R) -> Instrument {
    let raw: Vec<ComplexMatrix> = (0..2 * kraus_per_outcome)
        .map(|_| gaussian_matrix(d, rng))
        .collect();
    let total = raw
        .iter()
        .fold(linalg::zeros(d), |acc, k| acc + k.adjoint() * k);
    let w = linalg::inverse_sqrt(&total);
    let mut ops = raw.into_iter().map(|k| k * &w);
    let k0 = ops.by_ref().take(kraus_per_outcome).collect();
    let k1 = ops.collect();
    Instrument::new(k0, k1).expect("consistent shapes")
}

pub fn quantum_model<R: Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> QuantumModel {
    let kraus = rng.random_range(1..=2);
    QuantumModel::new(
        density_matrix(d, rng),
        eb_channel(d, m, rng),
        instrument(d, kraus, rng),
    )
    .expect("consistent shapes")
}

/// Random d-state machine; a fraction of transition entries is zeroed so
/// that sparse structure is exercised too.
pub fn classical_model<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ClassicalModel {
    let pi = DVector::from_vec(probability_vector(d, rng));
    let mut t0 = DMatrix::zeros(d, d);
    let mut t1 = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut raw: Vec<f64> = (0..2 * d)
            .map(|_| {
                if rng.random_bool(0.25) {
                    0.0
                } else {
                    normal(rng).powi(2)
                }
            })
            .collect();
        if raw.iter().all(|&x| x == 0.0) {
            raw[0] = 1.0;
        }
        let total: f64 = raw.iter().sum();
        for j in 0..d {
            t0[(j, i)] = raw[j] / total;
            t1[(j, i)] = raw[d + j] / total;
        }
    }
    ClassicalModel::new(pi, t0, t1).expect("consistent shapes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_channel, validate_classical, validate_quantum, DEFAULT_TOL};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_models_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let d = rng.random_range(1..=4);
            let m = rng.random_range(1..=6);
            let q = quantum_model(d, m, &mut rng);
            let r = validate_quantum(&q, DEFAULT_TOL);
            assert!(r.is_valid(), "{r}");
            let cm = classical_model(d, &mut rng);
            assert!(validate_classical(&cm, DEFAULT_TOL).is_valid());
            assert!(validate_channel(&commuting_states_channel(d, m, &mut rng), DEFAULT_TOL).is_valid());
            assert!(validate_channel(&commuting_povm_channel(d, m, &mut rng), DEFAULT_TOL).is_valid());
        }
    }

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = unitary(4, &mut rng);
        assert!(linalg::max_abs_diff(&(u.adjoint() * &u), &linalg::identity(4)) < 1e-12);
    }
}
