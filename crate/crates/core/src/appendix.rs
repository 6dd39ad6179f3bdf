//! The published best models for the one-tick sequences of length 4 and 5.
//!
//! The vectors are stored verbatim, with five significant digits, in
//! `data/appendix_d.json`; the file is checked against a SHA-256 digest when
//! loaded.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{self, c, ComplexVector};
use crate::model::{EbChannel, Instrument, QuantumModel, Sequence};
use crate::prob::quantum_sequence_prob;

pub const DATA: &str = include_str!("../data/appendix_d.json");
pub const DATA_SHA256: &str = "701cb20fa0a7fd70c0d3d8cb027450017262fdd0ee40e991e0be8fd7a854ff2f";

/// Default residual budget for the truncated data.
pub const RESIDUAL_TOL: f64 = 1e-3;
/// Allowed distance of the recomputed probability from the tabulated one.
pub const PROB_TOL: f64 = 2e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BuiltinLabel {
    L4,
    L5,
}

impl BuiltinLabel {
    pub const ALL: [BuiltinLabel; 2] = [BuiltinLabel::L4, BuiltinLabel::L5];

    pub fn sequence_len(self) -> usize {
        match self {
            BuiltinLabel::L4 => 4,
            BuiltinLabel::L5 => 5,
        }
    }
}

impl fmt::Display for BuiltinLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BuiltinLabel::L4 => "L4",
            BuiltinLabel::L5 => "L5",
        })
    }
}

impl FromStr for BuiltinLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L4" | "4" => Ok(BuiltinLabel::L4),
            "L5" | "5" => Ok(BuiltinLabel::L5),
            _ => Err(Error::InvalidArgument(format!("unknown builtin model {s:?}"))),
        }
    }
}

/// One model as stored in the data file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuiltinData {
    pub label: BuiltinLabel,
    pub sequence: String,
    pub effect_vectors: Vec<Vec<[f64; 2]>>,
    pub prep_vectors: Vec<Vec<[f64; 2]>>,
    pub k0_diagonal: Vec<f64>,
    pub k1_diagonal: Vec<f64>,
    pub table_prob: f64,
    pub table_ratio: f64,
    pub classical_bound: f64,
}

#[derive(Debug, Deserialize)]
struct DataFile {
    precision_digits: usize,
    models: Vec<BuiltinData>,
}

#[derive(Clone, Debug)]
pub struct BuiltinModel {
    pub label: BuiltinLabel,
    pub sequence: Sequence,
    pub effect_vectors: Vec<ComplexVector>,
    pub prep_vectors: Vec<ComplexVector>,
    pub model: QuantumModel,
    /// Tabulated lower bound on the optimal probability.
    pub expected_prob: f64,
    pub expected_ratio: f64,
    pub classical_bound: f64,
    pub print_precision: usize,
}

fn vector(entries: &[[f64; 2]]) -> ComplexVector {
    ComplexVector::from_iterator(entries.len(), entries.iter().map(|z| c(z[0], z[1])))
}

impl BuiltinModel {
    /// Assembles E_i = |e_i⟩⟨e_i|, σ_i = |φ_i⟩⟨φ_i|, diagonal Kraus operators
    /// and ρ₀ = |0⟩⟨0| from the stored entries, without renormalizing.
    pub fn from_data(data: &BuiltinData, print_precision: usize) -> Result<Self> {
        let effect_vectors: Vec<ComplexVector> = data.effect_vectors.iter().map(|v| vector(v)).collect();
        let prep_vectors: Vec<ComplexVector> = data.prep_vectors.iter().map(|v| vector(v)).collect();
        let d = data.k0_diagonal.len();
        if effect_vectors.iter().chain(&prep_vectors).any(|v| v.len() != d) || data.k1_diagonal.len() != d {
            return Err(Error::DataIntegrity(format!("{}: inconsistent dimensions", data.label)));
        }
        let channel = EbChannel::new(
            effect_vectors.iter().map(linalg::projector).collect(),
            prep_vectors.iter().map(linalg::projector).collect(),
        )
        .map_err(|e| Error::DataIntegrity(format!("{}: {e}", data.label)))?;
        let instrument = Instrument::new(
            vec![linalg::diag_real(&data.k0_diagonal)],
            vec![linalg::diag_real(&data.k1_diagonal)],
        )?;
        let model = QuantumModel::new(linalg::basis_projector(d, 0), channel, instrument)?;
        Ok(Self {
            label: data.label,
            sequence: data.sequence.parse()?,
            effect_vectors,
            prep_vectors,
            model,
            expected_prob: data.table_prob,
            expected_ratio: data.table_ratio,
            classical_bound: data.classical_bound,
            print_precision,
        })
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn branches(&self) -> usize {
        self.model.channel().branches()
    }

    /// Residuals, probability and margins; fails with a data-integrity error
    /// when a residual exceeds `tol` or the probability misses the table.
    pub fn verify(&self, tol: f64) -> Result<VerifyReport> {
        let report = self.report();
        let mut problems = Vec::new();
        for (name, r) in [
            ("POVM sum", report.povm_residual),
            ("state trace", report.trace_residual),
            ("Kraus sum", report.kraus_residual),
        ] {
            if !(r <= tol) {
                problems.push(format!("{name} residual {r:.3e} exceeds {tol:.1e}"));
            }
        }
        if !((report.prob - report.expected_prob).abs() <= PROB_TOL) {
            problems.push(format!(
                "probability {} is not within {PROB_TOL} of {}",
                report.prob, report.expected_prob
            ));
        }
        if !(report.margin > 0.0) {
            problems.push(format!("probability does not exceed the classical bound {}", report.classical_bound));
        }
        if problems.is_empty() {
            Ok(report)
        } else {
            Err(Error::DataIntegrity(format!("{}: {}", self.label, problems.join("; "))))
        }
    }

    /// The same quantities as [`verify`](Self::verify), without judging them.
    pub fn report(&self) -> VerifyReport {
        let d = self.dim();
        let channel = self.model.channel();
        let effect_sum = channel.effects().iter().fold(linalg::zeros(d), |acc, e| acc + e);
        let povm_residual = linalg::spectral_norm(&(effect_sum - linalg::identity(d)));
        let trace_residual = channel
            .preps()
            .iter()
            .map(|s| (linalg::real_trace(s) - 1.0).abs())
            .fold(0.0, f64::max);
        let kraus_residual =
            linalg::spectral_norm(&(self.model.instrument().kraus_sum() - linalg::identity(d)));
        let prob = quantum_sequence_prob(&self.model, &self.sequence, true);
        VerifyReport {
            label: self.label,
            sequence: self.sequence.to_string(),
            d,
            m: self.branches(),
            povm_residual,
            trace_residual,
            kraus_residual,
            prob,
            expected_prob: self.expected_prob,
            classical_bound: self.classical_bound,
            margin: prob - self.classical_bound,
            ratio: prob / self.classical_bound,
            expected_ratio: self.expected_ratio,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub label: BuiltinLabel,
    pub sequence: String,
    pub d: usize,
    pub m: usize,
    /// ‖Σ E_i − 𝟙‖.
    pub povm_residual: f64,
    /// max_i |Tr σ_i − 1|.
    pub trace_residual: f64,
    /// ‖Σ K†K − 𝟙‖.
    pub kraus_residual: f64,
    pub prob: f64,
    pub expected_prob: f64,
    pub classical_bound: f64,
    /// prob − classical bound.
    pub margin: f64,
    pub ratio: f64,
    pub expected_ratio: f64,
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model {} (sequence {}, d = {}, m = {})", self.label, self.sequence, self.d, self.m)?;
        writeln!(f, "  POVM sum residual     {:.3e}", self.povm_residual)?;
        writeln!(f, "  state trace residual  {:.3e}", self.trace_residual)?;
        writeln!(f, "  Kraus sum residual    {:.3e}", self.kraus_residual)?;
        writeln!(f, "  probability           {:.10} (table {})", self.prob, self.expected_prob)?;
        writeln!(f, "  classical bound       {}", self.classical_bound)?;
        writeln!(f, "  margin                {:.6}", self.margin)?;
        write!(f, "  ratio                 {:.6} (table {})", self.ratio, self.expected_ratio)
    }
}

pub fn data_checksum(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn parse_data(text: &str) -> Result<DataFile> {
    let digest = data_checksum(text);
    if digest != DATA_SHA256 {
        return Err(Error::DataIntegrity(format!(
            "model data checksum {digest} does not match {DATA_SHA256}"
        )));
    }
    serde_json::from_str(text).map_err(|e| Error::DataIntegrity(format!("model data: {e}")))
}

/// Raw stored entries of one model.
pub fn builtin_data(label: BuiltinLabel) -> Result<BuiltinData> {
    let file = parse_data(DATA)?;
    file.models
        .into_iter()
        .find(|m| m.label == label)
        .ok_or_else(|| Error::DataIntegrity(format!("model {label} missing from data")))
}

pub fn load_builtin(label: BuiltinLabel) -> Result<BuiltinModel> {
    let file = parse_data(DATA)?;
    let data = file
        .models
        .iter()
        .find(|m| m.label == label)
        .ok_or_else(|| Error::DataIntegrity(format!("model {label} missing from data")))?;
    BuiltinModel::from_data(data, file.precision_digits)
}

pub fn verify_builtin(label: BuiltinLabel, tol: f64) -> Result<VerifyReport> {
    load_builtin(label)?.verify(tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{classical_sequence_prob, effective_classical_model};
    use crate::model::validate_classical;

    #[test]
    fn checksum_matches_the_embedded_file() {
        assert_eq!(data_checksum(DATA), DATA_SHA256);
        assert!(matches!(parse_data(&DATA.replace("0.74404", "0.74405")), Err(Error::DataIntegrity(_))));
    }

    #[test]
    fn shapes_and_printed_entries() {
        let l4 = load_builtin(BuiltinLabel::L4).unwrap();
        assert_eq!((l4.dim(), l4.branches()), (3, 4));
        assert_eq!(l4.effect_vectors[0], linalg::ket(3, 0));
        assert_eq!(l4.effect_vectors[1][1], c(-0.09692, -0.41924));
        assert_eq!(l4.print_precision, 5);
        for a in [0, 1] {
            let k = &l4.model.instrument().kraus(a)[0];
            assert!(k.iter().all(|z| z.im == 0.0 && (z.re == 0.0 || z.re == 1.0)));
        }
        let l5 = load_builtin(BuiltinLabel::L5).unwrap();
        assert_eq!((l5.dim(), l5.branches()), (4, 5));
        assert_eq!(l5.prep_vectors[4], linalg::ket(4, 0));
        assert_eq!(l5.prep_vectors[1][3], c(-0.02481, 0.45209));
    }

    #[test]
    fn both_models_verify() {
        for label in BuiltinLabel::ALL {
            let r = verify_builtin(label, RESIDUAL_TOL).unwrap();
            assert!(r.margin > 0.04, "{r}");
            assert!((r.ratio - r.expected_ratio).abs() < 1e-2, "{r}");
        }
    }

    #[test]
    fn effective_models_are_nearly_stochastic_and_exact() {
        for label in BuiltinLabel::ALL {
            let b = load_builtin(label).unwrap();
            let eff = effective_classical_model(&b.model);
            assert!(validate_classical(&eff, 1e-3).is_valid());
            let q = quantum_sequence_prob(&b.model, &b.sequence, true);
            let cl = classical_sequence_prob(&eff, &b.sequence);
            assert!((q - cl).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbed_entry_is_a_data_integrity_error() {
        let mut data = builtin_data(BuiltinLabel::L4).unwrap();
        data.effect_vectors[1][2][0] += 0.1;
        let sabotaged = BuiltinModel::from_data(&data, 5).unwrap();
        assert!(matches!(sabotaged.verify(RESIDUAL_TOL), Err(Error::DataIntegrity(_))));
    }

    #[test]
    fn labels_parse() {
        assert_eq!("l4".parse::<BuiltinLabel>().unwrap(), BuiltinLabel::L4);
        assert_eq!("5".parse::<BuiltinLabel>().unwrap(), BuiltinLabel::L5);
        assert!("L6".parse::<BuiltinLabel>().is_err());
    }
}
