//! Sequence probabilities for classical machines, bare quantum instruments and
//! the protocol with an entanglement-breaking channel before every
//! measurement, plus extraction of the equivalent classical machine.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::model::{ClassicalModel, EbChannel, QuantumModel, Sequence};

/// Largest L accepted by [`full_distribution`] for classical models.
pub const MAX_CLASSICAL_LEN: usize = 20;
/// Largest L accepted by [`full_distribution`] for quantum models.
pub const MAX_QUANTUM_LEN: usize = 12;

/// E(ρ) = Σ_i Tr(ρ E_i) σ_i.
pub fn apply_channel(channel: &EbChannel, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = channel.dim();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::Dimension(format!(
            "state is {}x{}, channel acts on dimension {d}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    Ok(channel
        .effects()
        .iter()
        .zip(channel.preps())
        .fold(linalg::zeros(d), |acc, (e, s)| {
            acc + s.scale(linalg::real_trace_product(rho, e))
        }))
}

/// η T_{a_L} ⋯ T_{a_1} π.
pub fn classical_sequence_prob(model: &ClassicalModel, seq: &Sequence) -> f64 {
    let v = seq
        .outcomes()
        .iter()
        .fold(model.pi().clone(), |v, &a| model.transition(a) * v);
    v.sum()
}

/// Tr[I_{a_L} ∘ E ∘ ⋯ ∘ I_{a_1} ∘ E(ρ₀)] when `use_channel` is set, otherwise
/// Tr[I_{a_L} ∘ ⋯ ∘ I_{a_1}(ρ₀)].
pub fn quantum_sequence_prob(model: &QuantumModel, seq: &Sequence, use_channel: bool) -> f64 {
    let rho = seq
        .outcomes()
        .iter()
        .fold(model.rho0().clone(), |rho, &a| quantum_step(model, &rho, a, use_channel));
    linalg::real_trace(&rho)
}

fn quantum_step(model: &QuantumModel, rho: &ComplexMatrix, a: u8, use_channel: bool) -> ComplexMatrix {
    if use_channel {
        let prepared = apply_channel(model.channel(), rho).expect("dimensions checked at construction");
        model.instrument().apply(a, &prepared)
    } else {
        model.instrument().apply(a, rho)
    }
}

/// The m-state classical machine with `[T_a]_{ji} = Tr(I_a(σ_i) E_j)` and
/// `π_i = Tr(ρ₀ E_i)`, which reproduces the channel protocol exactly.
pub fn effective_classical_model(model: &QuantumModel) -> ClassicalModel {
    let channel = model.channel();
    let m = channel.branches();
    let pi = DVector::from_iterator(
        m,
        channel
            .effects()
            .iter()
            .map(|e| linalg::real_trace_product(model.rho0(), e)),
    );
    let block = |a: u8| {
        let mut t = DMatrix::zeros(m, m);
        for (i, sigma) in channel.preps().iter().enumerate() {
            let out = model.instrument().apply(a, sigma);
            for (j, e) in channel.effects().iter().enumerate() {
                t[(j, i)] = linalg::real_trace_product(&out, e);
            }
        }
        t
    };
    ClassicalModel::new(pi, block(0), block(1)).expect("shapes agree by construction")
}

/// Either kind of model, for whole-distribution enumeration.
#[derive(Clone, Copy, Debug)]
pub enum ModelRef<'a> {
    Classical(&'a ClassicalModel),
    /// The channel protocol (E before every measurement).
    Quantum(&'a QuantumModel),
}

/// Probabilities of all 2^L sequences, keyed in lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    len: usize,
    probs: Vec<f64>,
}

impl Distribution {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, seq: &Sequence) -> Option<f64> {
        if seq.len() != self.len {
            return None;
        }
        let k = seq
            .outcomes()
            .iter()
            .fold(0usize, |k, &a| (k << 1) | a as usize);
        self.probs.get(k).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Sequence, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, &p)| (Sequence::from_index(self.len, k), p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `sequence,probability` rows with 17 significant digits, values
    /// clamped to [0, 1].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sequence,probability\n");
        for (seq, p) in self.iter() {
            let _ = writeln!(out, "{seq},{}", format_sig17(p.clamp(0.0, 1.0)));
        }
        out
    }
}

pub fn full_distribution(model: ModelRef<'_>, len: usize) -> Result<Distribution> {
    if len == 0 {
        return Err(Error::InvalidArgument("sequence length must be ≥ 1".into()));
    }
    let mut probs = Vec::with_capacity(1 << len.min(MAX_CLASSICAL_LEN));
    match model {
        ModelRef::Classical(m) => {
            if len > MAX_CLASSICAL_LEN {
                return Err(Error::Resource {
                    what: format!("classical enumeration length {len}"),
                    limit: MAX_CLASSICAL_LEN,
                });
            }
            enumerate_classical(m, m.pi().clone(), len, &mut probs);
        }
        ModelRef::Quantum(m) => {
            if len > MAX_QUANTUM_LEN {
                return Err(Error::Resource {
                    what: format!("quantum enumeration length {len}"),
                    limit: MAX_QUANTUM_LEN,
                });
            }
            enumerate_quantum(m, m.rho0().clone(), len, &mut probs);
        }
    }
    Ok(Distribution { len, probs })
}

// Depth-first over prefixes; outcome 0 before 1 keeps lexicographic order.
fn enumerate_classical(model: &ClassicalModel, v: DVector<f64>, remaining: usize, out: &mut Vec<f64>) {
    if remaining == 0 {
        out.push(v.sum());
        return;
    }
    for a in 0..2u8 {
        enumerate_classical(model, model.transition(a) * &v, remaining - 1, out);
    }
}

fn enumerate_quantum(model: &QuantumModel, rho: ComplexMatrix, remaining: usize, out: &mut Vec<f64>) {
    if remaining == 0 {
        out.push(linalg::real_trace(&rho));
        return;
    }
    let prepared = apply_channel(model.channel(), &rho).expect("dimensions checked at construction");
    for a in 0..2u8 {
        enumerate_quantum(model, model.instrument().apply(a, &prepared), remaining - 1, out);
    }
}

/// Decimal rendering with 17 significant digits.
pub fn format_sig17(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    if (-5..17).contains(&exponent) {
        let decimals = (16 - exponent).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.16e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{basis_projector, c, identity, ComplexVector};
    use crate::model::Instrument;

    fn dephasing(d: usize) -> EbChannel {
        let p: Vec<_> = (0..d).map(|k| basis_projector(d, k)).collect();
        EbChannel::new(p.clone(), p).unwrap()
    }

    #[test]
    fn dephasing_kills_coherences() {
        let plus = ComplexVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]).scale(1.0 / 2f64.sqrt());
        let out = apply_channel(&dephasing(2), &linalg::projector(&plus)).unwrap();
        assert!(linalg::max_abs_diff(&out, &identity(2).scale(0.5)) < 1e-15);
    }

    #[test]
    fn constant_channel_outputs_its_state() {
        let tau = linalg::diag_real(&[0.3, 0.7]);
        let ch = EbChannel::new(vec![identity(2)], vec![tau.clone()]).unwrap();
        let rho = linalg::diag_real(&[0.9, 0.1]);
        let out = apply_channel(&ch, &rho).unwrap();
        assert!(linalg::max_abs_diff(&out, &tau) < 1e-15);
    }

    #[test]
    fn channel_rejects_wrong_dimension() {
        assert!(apply_channel(&dephasing(2), &identity(3)).is_err());
    }

    #[test]
    fn bare_instrument_ignores_channel() {
        // Channel always prepares |1⟩, instrument is the identity on outcome 0.
        let ch = EbChannel::new(vec![identity(2)], vec![basis_projector(2, 1)]).unwrap();
        let inst = Instrument::new(vec![basis_projector(2, 0)], vec![basis_projector(2, 1)]).unwrap();
        let model = QuantumModel::new(basis_projector(2, 0), ch, inst).unwrap();
        let seq: Sequence = "00".parse().unwrap();
        assert!((quantum_sequence_prob(&model, &seq, false) - 1.0).abs() < 1e-15);
        assert!(quantum_sequence_prob(&model, &seq, true).abs() < 1e-15);
    }

    #[test]
    fn csv_rendering() {
        assert_eq!(format_sig17(0.31640625), "0.31640625000000000");
        assert_eq!(format_sig17(1.0), "1.0000000000000000");
        assert_eq!(format_sig17(0.0), "0");
        let x = 0.1 + 0.2;
        assert_eq!(format_sig17(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn guards() {
        let m = ClassicalModel::new(
            DVector::from_vec(vec![1.0]),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        assert!(matches!(
            full_distribution(ModelRef::Classical(&m), MAX_CLASSICAL_LEN + 1),
            Err(Error::Resource { .. })
        ));
        assert!(full_distribution(ModelRef::Classical(&m), 0).is_err());
        let d = full_distribution(ModelRef::Classical(&m), 3).unwrap();
        assert_eq!(d.prob(&"000".parse().unwrap()), Some(1.0));
        assert_eq!(d.prob(&"00".parse().unwrap()), None);
    }
}
