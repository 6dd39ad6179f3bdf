//! Explicit model families: one-way and cyclic classical machines, the
//! harmonic ETF quantum model, the diagonal embedding of a classical machine,
//! and a search for the deterministic complexity of a sequence.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, c, ComplexMatrix, ComplexVector};
use crate::model::{ClassicalModel, EbChannel, Instrument, QuantumModel, Sequence};

/// One-way machine on `len − 1` states: stay with probability 1/L emitting 0,
/// step forward with probability 1 − 1/L emitting 0, and from the last state
/// emit 1 and return to the first.
///
/// Its one-tick probability is (1 − 1/L)^L.
pub fn one_way_classical(len: usize) -> Result<ClassicalModel> {
    if len < 2 {
        return Err(Error::InvalidArgument(format!(
            "one-way model needs L ≥ 2, got {len}"
        )));
    }
    let d = len - 1;
    let stay = 1.0 / len as f64;
    let go = 1.0 - stay;
    let mut t0 = DMatrix::zeros(d, d);
    let mut t1 = DMatrix::zeros(d, d);
    for i in 0..d {
        t0[(i, i)] = stay;
        if i + 1 < d {
            t0[(i + 1, i)] = go;
        }
    }
    t1[(0, d - 1)] = go;
    let mut pi = DVector::zeros(d);
    pi[0] = 1.0;
    ClassicalModel::new(pi, t0, t1)
}

/// Deterministic cycle on `m` states that emits `0…01` (length m) with
/// certainty.
pub fn cyclic_deterministic(m: usize) -> Result<ClassicalModel> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "cyclic model needs m ≥ 2, got {m}"
        )));
    }
    let mut t0 = DMatrix::zeros(m, m);
    let mut t1 = DMatrix::zeros(m, m);
    for i in 0..m - 1 {
        t0[(i + 1, i)] = 1.0;
    }
    t1[(0, m - 1)] = 1.0;
    let mut pi = DVector::zeros(m);
    pi[0] = 1.0;
    ClassicalModel::new(pi, t0, t1)
}

/// The harmonic frame |ψ_n⟩ = (d−1)^{-1/2} Σ_{k=1}^{d−1} ζ^{nk} |k⟩,
/// n = 1…d, ζ = e^{2πi/d}, living in the complement of |0⟩.
#[derive(Clone, Debug)]
pub struct EtfFrame {
    dim: usize,
    vectors: Vec<ComplexVector>,
    /// Set for d = 2, where every vector is ±|1⟩.
    pub degenerate: bool,
}

impl EtfFrame {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[ComplexVector] {
        &self.vectors
    }

    pub fn max_norm_error(&self) -> f64 {
        self.vectors
            .iter()
            .map(|v| (v.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Max deviation of ⟨ψ_n|ψ_n'⟩ (n ≠ n') from −1/(d−1).
    pub fn max_overlap_error(&self) -> f64 {
        let target = c(-1.0 / (self.dim as f64 - 1.0), 0.0);
        let mut worst = 0.0_f64;
        for (n, u) in self.vectors.iter().enumerate() {
            for (k, v) in self.vectors.iter().enumerate() {
                if n != k {
                    worst = worst.max((u.dotc(v) - target).norm());
                }
            }
        }
        worst
    }

    /// ‖Σ_n |ψ_n⟩⟨ψ_n| − d/(d−1) P⊥‖ entrywise max, P⊥ = 𝟙 − |0⟩⟨0|.
    pub fn tight_frame_residual(&self) -> f64 {
        let d = self.dim;
        let sum = self
            .vectors
            .iter()
            .fold(linalg::zeros(d), |acc, v| acc + linalg::projector(v));
        let complement = linalg::identity(d) - linalg::basis_projector(d, 0);
        let scale = d as f64 / (d as f64 - 1.0);
        linalg::max_abs_diff(&sum, &complement.scale(scale))
    }
}

pub fn etf_states(d: usize) -> Result<EtfFrame> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("ETF needs d ≥ 2, got {d}")));
    }
    let norm = 1.0 / ((d - 1) as f64).sqrt();
    let vectors = (1..=d)
        .map(|n| {
            let mut v = ComplexVector::zeros(d);
            for k in 1..d {
                // Reduce the exponent first so the phase stays exact-ish.
                let angle = 2.0 * PI * ((n * k) % d) as f64 / d as f64;
                v[k] = c(angle.cos() * norm, angle.sin() * norm);
            }
            v
        })
        .collect();
    Ok(EtfFrame {
        dim: d,
        vectors,
        degenerate: d == 2,
    })
}

/// Where K₀ = 𝟙 − K₁ puts its single zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KrausConvention {
    /// K₀ = diag(0, 1, …, 1): outcome 1 fires on |0⟩, matching ρ₀ = σ_m = |0⟩⟨0|.
    #[default]
    ZeroFirst,
    /// K₀ = diag(1, …, 1, 0).
    ZeroLast,
}

impl KrausConvention {
    /// Diagonal of K₀ in dimension `d`.
    pub fn k0_diagonal(self, d: usize) -> Vec<f64> {
        let mut diag = vec![1.0; d];
        match self {
            KrausConvention::ZeroFirst => diag[0] = 0.0,
            KrausConvention::ZeroLast => diag[d - 1] = 0.0,
        }
        diag
    }

    /// Diagonal projector pair (K₀, K₁ = 𝟙 − K₀).
    pub fn instrument(self, d: usize) -> Instrument {
        let k0 = self.k0_diagonal(d);
        let k1: Vec<f64> = k0.iter().map(|x| 1.0 - x).collect();
        Instrument::new(vec![linalg::diag_real(&k0)], vec![linalg::diag_real(&k1)])
            .expect("square diagonal operators")
    }
}

/// ETF model with the default [`KrausConvention::ZeroFirst`] instrument.
pub fn etf_quantum_model(d: usize) -> Result<QuantumModel> {
    etf_quantum_model_with(d, KrausConvention::default())
}

/// m = d + 1 branches: branch 1 measures |0⟩⟨0| and prepares σ₁; branch n+1
/// measures (d−1)/d σ_n and prepares σ_{n+1}, with σ_m = |0⟩⟨0| = ρ₀.
pub fn etf_quantum_model_with(d: usize, convention: KrausConvention) -> Result<QuantumModel> {
    let frame = etf_states(d)?;
    let ground = linalg::basis_projector(d, 0);
    let sigmas: Vec<ComplexMatrix> = frame.vectors().iter().map(linalg::projector).collect();
    let weight = (d as f64 - 1.0) / d as f64;

    let mut effects = vec![ground.clone()];
    effects.extend(sigmas.iter().map(|s| s.scale(weight)));
    let mut preps = sigmas;
    preps.push(ground.clone());

    let channel = EbChannel::new(effects, preps)?;
    QuantumModel::new(ground, channel, convention.instrument(d))
}

/// Embeds a d-state machine as a d-dimensional quantum model that is
/// diagonal in the computational basis: E_i = σ_i = |i⟩⟨i|, one Kraus
/// operator √[T_a]_{ji} |j⟩⟨i| per non-zero entry, ρ₀ = Σ π_i |i⟩⟨i|.
pub fn diagonal_quantum_from_classical(model: &ClassicalModel) -> Result<QuantumModel> {
    let d = model.dim();
    let basis: Vec<ComplexMatrix> = (0..d).map(|k| linalg::basis_projector(d, k)).collect();
    let channel = EbChannel::new(basis.clone(), basis)?;
    let kraus = |a: u8| {
        let t = model.transition(a);
        let mut ops = Vec::new();
        for i in 0..d {
            for j in 0..d {
                let p = t[(j, i)];
                if p > 0.0 {
                    let mut k = linalg::zeros(d);
                    k[(j, i)] = c(p.sqrt(), 0.0);
                    ops.push(k);
                }
            }
        }
        ops
    };
    let instrument = Instrument::new(kraus(0), kraus(1))?;
    let rho0 = linalg::diag_real(model.pi().as_slice());
    QuantumModel::new(rho0, channel, instrument)
}

/// Longest sequence accepted by [`deterministic_complexity`].
pub const MAX_DC_LEN: usize = 12;
/// Largest machine size searched by [`deterministic_complexity`].
pub const MAX_DC_STATES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Complexity {
    Exact(usize),
    /// No machine with at most this many states emits the sequence.
    ExceedsMax(usize),
}

/// Smallest number of states of a deterministic machine (each state has one
/// successor and one output) that emits `seq` from some start state.
pub fn deterministic_complexity(seq: &Sequence, d_max: usize) -> Result<Complexity> {
    if seq.len() > MAX_DC_LEN {
        return Err(Error::Resource {
            what: format!("sequence length {}", seq.len()),
            limit: MAX_DC_LEN,
        });
    }
    if d_max > MAX_DC_STATES {
        return Err(Error::Resource {
            what: format!("state bound {d_max}"),
            limit: MAX_DC_STATES,
        });
    }
    for d in 1..=d_max {
        let mut table = vec![None; d];
        if emits(seq.outcomes(), 0, 1, d, &mut table) {
            return Ok(Complexity::Exact(d));
        }
    }
    Ok(Complexity::ExceedsMax(d_max))
}

// Backtracking over partially specified machines. States are introduced in
// order of first use, which removes relabelings without losing any machine.
fn emits(
    rest: &[u8],
    state: usize,
    used: usize,
    d: usize,
    table: &mut Vec<Option<(u8, usize)>>,
) -> bool {
    let Some((&a, tail)) = rest.split_first() else {
        return true;
    };
    if let Some((out, next)) = table[state] {
        return out == a && emits(tail, next, used, d, table);
    }
    if tail.is_empty() {
        return true;
    }
    for next in 0..used.min(d - 1) + 1 {
        table[state] = Some((a, next));
        let used_after = used.max(next + 1);
        if emits(tail, next, used_after, d, table) {
            return true;
        }
    }
    table[state] = None;
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_classical;
    use crate::prob::classical_sequence_prob;

    fn seq(s: &str) -> Sequence {
        s.parse().unwrap()
    }

    #[test]
    fn one_way_values() {
        for (len, expected) in [(3, 8.0 / 27.0), (4, 0.31640625), (5, 0.32768)] {
            let m = one_way_classical(len).unwrap();
            let p = classical_sequence_prob(&m, &Sequence::one_tick(len).unwrap());
            assert!((p - expected).abs() <= 1e-15 * expected, "L={len}: {p}");
            assert_eq!(validate_classical(&m, 0.0).max_residual(), 0.0);
        }
        assert!(one_way_classical(1).is_err());
    }

    #[test]
    fn cyclic_is_deterministic() {
        let m = cyclic_deterministic(4).unwrap();
        assert_eq!(classical_sequence_prob(&m, &seq("0001")), 1.0);
        assert_eq!(classical_sequence_prob(&m, &seq("0010")), 0.0);
        let m2 = cyclic_deterministic(2).unwrap();
        assert_eq!(classical_sequence_prob(&m2, &seq("01")), 1.0);
        assert!(cyclic_deterministic(1).is_err());
    }

    #[test]
    fn etf_small_cases() {
        let f3 = etf_states(3).unwrap();
        let ip = f3.vectors()[0].dotc(&f3.vectors()[1]);
        assert!((ip - c(-0.5, 0.0)).norm() < 1e-12);
        let f4 = etf_states(4).unwrap();
        for n in 0..4 {
            for k in 0..4 {
                if n != k {
                    let o = f4.vectors()[n].dotc(&f4.vectors()[k]).norm_sqr();
                    assert!((o - 1.0 / 9.0).abs() < 1e-12);
                }
            }
        }
        assert!(!f3.degenerate);
        let f2 = etf_states(2).unwrap();
        assert!(f2.degenerate);
        assert!(etf_states(1).is_err());
    }

    #[test]
    fn kraus_conventions() {
        assert_eq!(KrausConvention::ZeroFirst.k0_diagonal(3), vec![0.0, 1.0, 1.0]);
        assert_eq!(KrausConvention::ZeroLast.k0_diagonal(3), vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn dc_small() {
        assert_eq!(deterministic_complexity(&seq("0001"), 8).unwrap(), Complexity::Exact(4));
        assert_eq!(deterministic_complexity(&seq("01"), 8).unwrap(), Complexity::Exact(2));
        assert_eq!(deterministic_complexity(&seq("00"), 8).unwrap(), Complexity::Exact(1));
        assert_eq!(deterministic_complexity(&seq("0001"), 3).unwrap(), Complexity::ExceedsMax(3));
        // 0101… is periodic, so two states suffice whatever the length.
        assert_eq!(deterministic_complexity(&seq("010101"), 8).unwrap(), Complexity::Exact(2));
        assert!(deterministic_complexity(&Sequence::one_tick(13).unwrap(), 8).is_err());
        assert!(deterministic_complexity(&seq("01"), 9).is_err());
    }

    // Enumerates every (output, successor) table and every start state.
    fn dc_brute_force(seq: &Sequence, d_max: usize) -> Option<usize> {
        for d in 1..=d_max {
            let tables = (d * 2).pow(d as u32);
            for code in 0..tables {
                let mut c = code;
                let table: Vec<(u8, usize)> = (0..d)
                    .map(|_| {
                        let x = c % (2 * d);
                        c /= 2 * d;
                        ((x % 2) as u8, x / 2)
                    })
                    .collect();
                for start in 0..d {
                    let mut s = start;
                    if seq.outcomes().iter().all(|&a| {
                        let (out, next) = table[s];
                        s = next;
                        out == a
                    }) {
                        return Some(d);
                    }
                }
            }
        }
        None
    }

    #[test]
    fn dc_matches_brute_force_on_all_short_sequences() {
        for len in 1..=6 {
            for s in Sequence::all(len) {
                let fast = match deterministic_complexity(&s, 4).unwrap() {
                    Complexity::Exact(d) => Some(d),
                    Complexity::ExceedsMax(_) => None,
                };
                assert_eq!(fast, dc_brute_force(&s, 4), "sequence {s}");
            }
        }
    }
}
