//! Classical and quantum finite-memory models.
//!
//! Transition matrices use the column convention: `[T_a]_{ji}` is the
//! probability of moving from state `i` to state `j` while emitting outcome
//! `a`. Probability vectors are columns and matrices act on them from the
//! left, so a sequence `a_1 … a_L` has probability `η T_{a_L} ⋯ T_{a_1} π`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};

/// Default tolerance for generated models.
pub const DEFAULT_TOL: f64 = 1e-9;

/// A non-empty string of binary measurement outcomes.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sequence(Vec<u8>);

impl Sequence {
    pub fn new(outcomes: Vec<u8>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::InvalidSequence("sequence must be non-empty".into()));
        }
        if let Some(bad) = outcomes.iter().find(|&&a| a > 1) {
            return Err(Error::InvalidSequence(format!(
                "outcome {bad} is not a binary label"
            )));
        }
        Ok(Self(outcomes))
    }

    /// `0…01` of length `len`.
    pub fn one_tick(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidSequence("one-tick length must be ≥ 1".into()));
        }
        let mut v = vec![0; len];
        v[len - 1] = 1;
        Ok(Self(v))
    }

    /// The `k`-th sequence of length `len` in lexicographic order.
    pub fn from_index(len: usize, k: usize) -> Self {
        Self(
            (0..len)
                .map(|t| ((k >> (len - 1 - t)) & 1) as u8)
                .collect(),
        )
    }

    /// Every sequence of length `len`, in lexicographic order.
    pub fn all(len: usize) -> impl Iterator<Item = Sequence> {
        (0..1usize << len).map(move |k| Sequence::from_index(len, k))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn outcomes(&self) -> &[u8] {
        &self.0
    }

    /// This sequence followed by one more outcome.
    pub fn extended(&self, a: u8) -> Result<Self> {
        let mut v = self.0.clone();
        v.push(a);
        Self::new(v)
    }
}

impl FromStr for Sequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let outcomes = s
            .trim()
            .chars()
            .map(|ch| match ch {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::InvalidSequence(format!(
                    "unexpected character {other:?} in {s:?}"
                ))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(outcomes)
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.0 {
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// A classical finite-state machine with binary outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalModel {
    pi: DVector<f64>,
    transitions: [DMatrix<f64>; 2],
}

impl ClassicalModel {
    /// Checks shapes only; physicality is the job of [`validate_classical`].
    pub fn new(pi: DVector<f64>, t0: DMatrix<f64>, t1: DMatrix<f64>) -> Result<Self> {
        let d = pi.len();
        if d == 0 {
            return Err(Error::Dimension("classical model needs at least one state".into()));
        }
        for (a, t) in [&t0, &t1].into_iter().enumerate() {
            if t.nrows() != d || t.ncols() != d {
                return Err(Error::Dimension(format!(
                    "T{a} is {}x{} but pi has length {d}",
                    t.nrows(),
                    t.ncols()
                )));
            }
        }
        Ok(Self {
            pi,
            transitions: [t0, t1],
        })
    }

    pub fn dim(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn transition(&self, a: u8) -> &DMatrix<f64> {
        &self.transitions[a as usize]
    }
}

/// A measure-and-prepare channel ρ ↦ Σ_i Tr(ρ E_i) σ_i.
#[derive(Clone, Debug, PartialEq)]
pub struct EbChannel {
    effects: Vec<ComplexMatrix>,
    preps: Vec<ComplexMatrix>,
}

impl EbChannel {
    pub fn new(effects: Vec<ComplexMatrix>, preps: Vec<ComplexMatrix>) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::Dimension("channel needs at least one branch".into()));
        }
        if effects.len() != preps.len() {
            return Err(Error::Dimension(format!(
                "{} effects but {} prepared states",
                effects.len(),
                preps.len()
            )));
        }
        let d = effects[0].nrows();
        check_square_family("effect", &effects, d)?;
        check_square_family("prepared state", &preps, d)?;
        Ok(Self { effects, preps })
    }

    pub fn dim(&self) -> usize {
        self.effects[0].nrows()
    }

    /// Number of measure-and-prepare branches.
    pub fn branches(&self) -> usize {
        self.effects.len()
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn preps(&self) -> &[ComplexMatrix] {
        &self.preps
    }
}

/// A two-outcome quantum instrument given by Kraus operators per outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Instrument {
    kraus: [Vec<ComplexMatrix>; 2],
}

impl Instrument {
    pub fn new(kraus0: Vec<ComplexMatrix>, kraus1: Vec<ComplexMatrix>) -> Result<Self> {
        let d = kraus0
            .first()
            .or_else(|| kraus1.first())
            .map(|k| k.nrows())
            .ok_or_else(|| Error::Dimension("instrument has no Kraus operators".into()))?;
        check_square_family("Kraus operator", &kraus0, d)?;
        check_square_family("Kraus operator", &kraus1, d)?;
        Ok(Self {
            kraus: [kraus0, kraus1],
        })
    }

    pub fn dim(&self) -> usize {
        self.kraus
            .iter()
            .flatten()
            .next()
            .map(|k| k.nrows())
            .unwrap_or(0)
    }

    pub fn kraus(&self, a: u8) -> &[ComplexMatrix] {
        &self.kraus[a as usize]
    }

    /// Applies the CP map I_a(ρ) = Σ_k K_{a,k} ρ K_{a,k}†.
    pub fn apply(&self, a: u8, rho: &ComplexMatrix) -> ComplexMatrix {
        let d = rho.nrows();
        self.kraus(a)
            .iter()
            .fold(linalg::zeros(d), |acc, k| acc + k * rho * k.adjoint())
    }

    /// Σ_{a,k} K_{a,k}† K_{a,k}.
    pub fn kraus_sum(&self) -> ComplexMatrix {
        let d = self.dim();
        self.kraus
            .iter()
            .flatten()
            .fold(linalg::zeros(d), |acc, k| acc + k.adjoint() * k)
    }
}

/// Initial state, EB channel and instrument of the sequential protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumModel {
    rho0: ComplexMatrix,
    channel: EbChannel,
    instrument: Instrument,
}

impl QuantumModel {
    pub fn new(rho0: ComplexMatrix, channel: EbChannel, instrument: Instrument) -> Result<Self> {
        let d = rho0.nrows();
        if rho0.ncols() != d {
            return Err(Error::Dimension("initial state is not square".into()));
        }
        if channel.dim() != d || instrument.dim() != d {
            return Err(Error::Dimension(format!(
                "initial state has dim {d}, channel {}, instrument {}",
                channel.dim(),
                instrument.dim()
            )));
        }
        Ok(Self {
            rho0,
            channel,
            instrument,
        })
    }

    pub fn dim(&self) -> usize {
        self.rho0.nrows()
    }

    pub fn rho0(&self) -> &ComplexMatrix {
        &self.rho0
    }

    pub fn channel(&self) -> &EbChannel {
        &self.channel
    }

    pub fn instrument(&self) -> &Instrument {
        &self.instrument
    }
}

fn check_square_family(what: &str, family: &[ComplexMatrix], d: usize) -> Result<()> {
    for (i, m) in family.iter().enumerate() {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::Dimension(format!(
                "{what} {i} is {}x{}, expected {d}x{d}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    Ok(())
}

/// One measured constraint of a validation pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub constraint: String,
    pub residual: f64,
    pub tol: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.residual <= self.tol
    }
}

/// Residuals of every physicality constraint of a model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn push(&mut self, constraint: impl Into<String>, residual: f64, tol: f64) {
        self.checks.push(Check {
            constraint: constraint.into(),
            residual,
            tol,
        });
    }

    pub fn violations(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }

    pub fn is_valid(&self) -> bool {
        self.violations().next().is_none()
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }

    /// Residual of the first check whose name starts with `prefix`.
    pub fn residual(&self, prefix: &str) -> Option<f64> {
        self.checks
            .iter()
            .filter(|c| c.constraint.starts_with(prefix))
            .map(|c| c.residual)
            .reduce(f64::max)
    }

    /// Turns an invalid report into an error.
    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::Validation(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bad: Vec<_> = self.violations().collect();
        if bad.is_empty() {
            return write!(f, "valid (max residual {:.3e})", self.max_residual());
        }
        for (n, c) in bad.iter().enumerate() {
            if n > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{} (residual {:.3e} > {:.1e})", c.constraint, c.residual, c.tol)?;
        }
        Ok(())
    }
}

pub fn validate_classical(model: &ClassicalModel, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    let negativity = |xs: &mut dyn Iterator<Item = &f64>| {
        xs.fold(0.0_f64, |acc, &x| acc.max(-x))
    };
    report.push("pi nonnegative", negativity(&mut model.pi.iter()), tol);
    let pi_sum: f64 = model.pi.iter().sum();
    report.push(
        format!("pi sums to {pi_sum}"),
        (pi_sum - 1.0).abs(),
        tol,
    );
    for a in 0..2u8 {
        report.push(
            format!("T{a} nonnegative"),
            negativity(&mut model.transition(a).iter()),
            tol,
        );
    }
    let total = model.transition(0) + model.transition(1);
    let col_residual = total
        .column_iter()
        .map(|col| (col.sum() - 1.0).abs())
        .fold(0.0, f64::max);
    report.push("T0+T1 column stochastic", col_residual, tol);
    report
}

/// Residuals of the channel constraints alone.
pub fn validate_channel(channel: &EbChannel, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    channel_checks(&mut report, channel, tol);
    report
}

fn channel_checks(report: &mut ValidationReport, channel: &EbChannel, tol: f64) {
    let d = channel.dim();
    for (i, e) in channel.effects().iter().enumerate() {
        report.push(format!("E{} hermitian", i + 1), linalg::hermiticity_residual(e), tol);
        report.push(format!("E{} PSD", i + 1), linalg::psd_residual(e), tol);
    }
    let sum = channel
        .effects()
        .iter()
        .fold(linalg::zeros(d), |acc, e| acc + e);
    report.push(
        "POVM sum",
        linalg::spectral_norm(&(sum - linalg::identity(d))),
        tol,
    );
    for (i, s) in channel.preps().iter().enumerate() {
        report.push(format!("sigma{} hermitian", i + 1), linalg::hermiticity_residual(s), tol);
        report.push(format!("sigma{} PSD", i + 1), linalg::psd_residual(s), tol);
        report.push(
            format!("sigma{} trace", i + 1),
            (s.trace() - linalg::ONE).norm(),
            tol,
        );
    }
}

pub fn validate_quantum(model: &QuantumModel, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    let rho = model.rho0();
    report.push("rho0 hermitian", linalg::hermiticity_residual(rho), tol);
    report.push("rho0 PSD", linalg::psd_residual(rho), tol);
    report.push("rho0 trace", (rho.trace() - linalg::ONE).norm(), tol);
    channel_checks(&mut report, model.channel(), tol);
    let d = model.dim();
    report.push(
        "instrument Kraus sum",
        linalg::spectral_norm(&(model.instrument().kraus_sum() - linalg::identity(d))),
        tol,
    );
    report
}

/// Choi matrix (1/d) Σ_i σ_i ⊗ E_iᵀ of the channel, i.e. (E ⊗ id)(|Φ⟩⟨Φ|).
pub fn choi_matrix(channel: &EbChannel) -> ComplexMatrix {
    let d = channel.dim();
    let mut choi = ComplexMatrix::zeros(d * d, d * d);
    for (e, s) in channel.effects().iter().zip(channel.preps()) {
        choi += linalg::kron(s, &e.transpose());
    }
    choi.scale(1.0 / d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{basis_projector, c, diag_real, identity};

    fn dephasing(d: usize) -> EbChannel {
        let p: Vec<_> = (0..d).map(|k| basis_projector(d, k)).collect();
        EbChannel::new(p.clone(), p).unwrap()
    }

    #[test]
    fn sequence_parsing() {
        let s: Sequence = "0001".parse().unwrap();
        assert_eq!(s.outcomes(), &[0, 0, 0, 1]);
        assert_eq!(s.to_string(), "0001");
        assert_eq!(Sequence::one_tick(4).unwrap(), s);
        assert!("".parse::<Sequence>().is_err());
        assert!("012".parse::<Sequence>().is_err());
        assert!(Sequence::new(vec![2]).is_err());
    }

    #[test]
    fn sequences_are_enumerated_lexicographically() {
        let all: Vec<String> = Sequence::all(3).map(|s| s.to_string()).collect();
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
        assert_eq!(all.len(), 8);
        assert_eq!(all[1], "001");
    }

    #[test]
    fn uniform_split_is_valid() {
        let half = DMatrix::identity(2, 2) * 0.5;
        let m = ClassicalModel::new(DVector::from_vec(vec![1.0, 0.0]), half.clone(), half).unwrap();
        let report = validate_classical(&m, 1e-12);
        assert!(report.is_valid(), "{report}");
        assert_eq!(report.max_residual(), 0.0);
    }

    #[test]
    fn unnormalized_pi_is_reported() {
        let half = DMatrix::identity(2, 2) * 0.5;
        let m = ClassicalModel::new(DVector::from_vec(vec![0.5, 0.6]), half.clone(), half).unwrap();
        let report = validate_classical(&m, 1e-9);
        assert!(!report.is_valid());
        let bad: Vec<_> = report.violations().collect();
        assert_eq!(bad.len(), 1);
        assert!(bad[0].constraint.contains("pi sums to 1.1"), "{}", bad[0].constraint);
        assert!((bad[0].residual - 0.1).abs() < 1e-12);
    }

    #[test]
    fn mismatched_classical_shapes_are_structural_errors() {
        let t = DMatrix::identity(3, 3);
        let err = ClassicalModel::new(DVector::from_vec(vec![1.0, 0.0]), t.clone(), t);
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn doubled_effect_reports_unit_povm_residual() {
        let ch = EbChannel::new(vec![identity(2) * c(2.0, 0.0)], vec![basis_projector(2, 0)]).unwrap();
        let report = validate_channel(&ch, 1e-9);
        assert!(!report.is_valid());
        assert!((report.residual("POVM sum").unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_channel_shapes_are_structural_errors() {
        let err = EbChannel::new(vec![identity(2)], vec![identity(3)]);
        assert!(matches!(err, Err(Error::Dimension(_))));
        let err = EbChannel::new(vec![identity(2)], vec![]);
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn quantum_model_rejects_dimension_mismatch() {
        let ch = dephasing(2);
        let inst = Instrument::new(vec![identity(3)], vec![]).unwrap();
        assert!(QuantumModel::new(basis_projector(2, 0), ch, inst).is_err());
    }

    #[test]
    fn choi_of_single_branch_channel() {
        let ch = EbChannel::new(vec![identity(2)], vec![basis_projector(2, 0)]).unwrap();
        let choi = choi_matrix(&ch);
        let expected = kron_ref(&basis_projector(2, 0), &identity(2)).scale(0.5);
        assert!(linalg::max_abs_diff(&choi, &expected) < 1e-15);
    }

    #[test]
    fn choi_of_dephasing_channel() {
        let choi = choi_matrix(&dephasing(2));
        let expected = diag_real(&[0.5, 0.0, 0.0, 0.5]);
        assert!(linalg::max_abs_diff(&choi, &expected) < 1e-15);
    }

    #[test]
    fn validation_is_pure() {
        let ch = dephasing(3);
        let inst = Instrument::new(vec![diag_real(&[1.0, 1.0, 0.0])], vec![diag_real(&[0.0, 0.0, 1.0])]).unwrap();
        let model = QuantumModel::new(basis_projector(3, 0), ch, inst).unwrap();
        let a = validate_quantum(&model, 1e-9);
        let b = validate_quantum(&model, 1e-9);
        assert_eq!(a, b);
        assert!(a.is_valid(), "{a}");
    }

    // Independent Kronecker product for cross-checking nalgebra's.
    fn kron_ref(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        let (n, m) = (a.nrows(), b.nrows());
        ComplexMatrix::from_fn(n * m, n * m, |r, s| a[(r / m, s / m)] * b[(r % m, s % m)])
    }
}
