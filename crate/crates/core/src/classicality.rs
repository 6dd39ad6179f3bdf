//! Sufficient conditions for an EB channel to act classically at its own
//! dimension: if the prepared states commute, or the POVM elements commute,
//! the channel can be rewritten with only d branches.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, c, ComplexMatrix, ComplexVector};
use crate::model::EbChannel;
use crate::prob::apply_channel;
use crate::random;

/// Attempts at finding a non-degenerate random combination.
const DIAGONALIZATION_ATTEMPTS: usize = 5;
const PROBE_SEED: u64 = 0x70_726f_6265;
const RANDOM_PROBES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    CommutingStates,
    CommutingPovm,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::CommutingStates => "commuting-states",
            Route::CommutingPovm => "commuting-povm",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ReductionResult {
    /// Equivalent channel with exactly d branches.
    pub reduced: EbChannel,
    /// Unitary whose columns are the common eigenbasis.
    pub basis: ComplexMatrix,
    pub route: Route,
    /// `weights[(i, l)]` is s_i^ℓ (states route) or e_i^ℓ (POVM route).
    pub weights: DMatrix<f64>,
    /// Largest deviation between the original and reduced channel outputs
    /// over the probe set.
    pub max_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommuteCheck {
    /// Largest spectral norm of [A, B] over all pairs.
    pub max_norm: f64,
    pub commuting: bool,
}

pub fn commute_check(ops: &[ComplexMatrix], tol: f64) -> Result<CommuteCheck> {
    if let Some(first) = ops.first() {
        let d = first.nrows();
        if ops.iter().any(|a| a.nrows() != d || a.ncols() != d) {
            return Err(Error::Dimension(
                "commutator check needs square operators of equal size".into(),
            ));
        }
    }
    let mut max_norm = 0.0_f64;
    for (n, a) in ops.iter().enumerate() {
        for b in &ops[n + 1..] {
            max_norm = max_norm.max(linalg::spectral_norm(&linalg::commutator(a, b)));
        }
    }
    Ok(CommuteCheck {
        max_norm,
        commuting: max_norm <= tol,
    })
}

/// Common eigenbasis of a commuting Hermitian family, found by
/// diagonalizing a random real combination and checking every member.
pub fn simultaneous_eigenbasis(ops: &[ComplexMatrix], tol: f64) -> Result<ComplexMatrix> {
    let d = ops
        .first()
        .map(|a| a.nrows())
        .ok_or_else(|| Error::InvalidArgument("empty operator family".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xd1a6);
    let mut worst = f64::INFINITY;
    for _ in 0..DIAGONALIZATION_ATTEMPTS {
        let combo = ops.iter().fold(linalg::zeros(d), |acc, a| {
            acc + linalg::hermitian_part(a).scale(rng.random_range(-1.0..1.0))
        });
        let (_, basis) = linalg::hermitian_eigen(&combo);
        worst = ops
            .iter()
            .map(|a| off_diagonal(&(basis.adjoint() * a * &basis)))
            .fold(0.0, f64::max);
        if worst <= tol {
            return Ok(basis);
        }
    }
    Err(Error::NotCommuting {
        family: "operators",
        residual: worst,
        tol,
    })
}

fn off_diagonal(a: &ComplexMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if i != j {
                worst = worst.max(a[(i, j)].norm());
            }
        }
    }
    worst
}

fn require_commuting(family: &'static str, ops: &[ComplexMatrix], tol: f64) -> Result<()> {
    let check = commute_check(ops, tol)?;
    if check.commuting {
        Ok(())
    } else {
        Err(Error::NotCommuting {
            family,
            residual: check.max_norm,
            tol,
        })
    }
}

/// Commuting σ_i = Σ_ℓ s_i^ℓ |ℓ⟩⟨ℓ|: effects F_ℓ = Σ_i s_i^ℓ E_i, states |ℓ⟩⟨ℓ|.
pub fn reduce_commuting_states(channel: &EbChannel, tol: f64) -> Result<ReductionResult> {
    require_commuting("prepared states", channel.preps(), tol)?;
    let basis = simultaneous_eigenbasis(channel.preps(), tol)?;
    let d = channel.dim();
    let weights = diagonal_weights(channel.preps(), &basis);
    let effects = (0..d)
        .map(|l| {
            channel
                .effects()
                .iter()
                .enumerate()
                .fold(linalg::zeros(d), |acc, (i, e)| acc + e.scale(weights[(i, l)]))
        })
        .collect();
    let preps = basis_projectors(&basis);
    finish(channel, EbChannel::new(effects, preps)?, basis, Route::CommutingStates, weights)
}

/// Commuting E_i = Σ_ℓ e_i^ℓ |ℓ⟩⟨ℓ|: effects |ℓ⟩⟨ℓ|, states σ̃_ℓ = Σ_i e_i^ℓ σ_i.
pub fn reduce_commuting_povm(channel: &EbChannel, tol: f64) -> Result<ReductionResult> {
    require_commuting("POVM elements", channel.effects(), tol)?;
    let basis = simultaneous_eigenbasis(channel.effects(), tol)?;
    let d = channel.dim();
    let weights = diagonal_weights(channel.effects(), &basis);
    let preps = (0..d)
        .map(|l| {
            channel
                .preps()
                .iter()
                .enumerate()
                .fold(linalg::zeros(d), |acc, (i, s)| acc + s.scale(weights[(i, l)]))
        })
        .collect();
    let effects = basis_projectors(&basis);
    finish(channel, EbChannel::new(effects, preps)?, basis, Route::CommutingPovm, weights)
}

/// Tries the states route, then the POVM route.
pub fn reduce(channel: &EbChannel, tol: f64) -> Result<ReductionResult> {
    reduce_commuting_states(channel, tol).or_else(|_| reduce_commuting_povm(channel, tol))
}

fn diagonal_weights(ops: &[ComplexMatrix], basis: &ComplexMatrix) -> DMatrix<f64> {
    let d = basis.ncols();
    let mut w = DMatrix::zeros(ops.len(), d);
    for (i, a) in ops.iter().enumerate() {
        for l in 0..d {
            let u = basis.column(l);
            w[(i, l)] = (u.adjoint() * a * u)[(0, 0)].re;
        }
    }
    w
}

fn basis_projectors(basis: &ComplexMatrix) -> Vec<ComplexMatrix> {
    (0..basis.ncols())
        .map(|l| linalg::projector(&basis.column(l).into_owned()))
        .collect()
}

fn finish(
    original: &EbChannel,
    reduced: EbChannel,
    basis: ComplexMatrix,
    route: Route,
    weights: DMatrix<f64>,
) -> Result<ReductionResult> {
    let max_residual = action_residual(original, &reduced)?;
    Ok(ReductionResult {
        reduced,
        basis,
        route,
        weights,
        max_residual,
    })
}

/// Largest entrywise difference of the two channels' outputs over
/// [`probe_states`].
pub fn action_residual(a: &EbChannel, b: &EbChannel) -> Result<f64> {
    let mut worst = 0.0_f64;
    for rho in probe_states(a.dim()) {
        let diff = linalg::max_abs_diff(&apply_channel(a, &rho)?, &apply_channel(b, &rho)?);
        worst = worst.max(diff);
    }
    Ok(worst)
}

/// Tomographically complete probes: every |k⟩⟨k|, the superpositions
/// (|k⟩+|l⟩)/√2 and (|k⟩+i|l⟩)/√2, plus a fixed set of random mixed states.
pub fn probe_states(d: usize) -> Vec<ComplexMatrix> {
    let mut probes: Vec<ComplexMatrix> = (0..d).map(|k| linalg::basis_projector(d, k)).collect();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..d {
        for l in k + 1..d {
            for phase in [c(1.0, 0.0), c(0.0, 1.0)] {
                let mut v = ComplexVector::zeros(d);
                v[k] = c(h, 0.0);
                v[l] = phase * h;
                probes.push(linalg::projector(&v));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    probes.extend((0..RANDOM_PROBES).map(|_| random::density_matrix(d, &mut rng)));
    probes
}
