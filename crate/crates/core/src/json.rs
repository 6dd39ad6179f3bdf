//! JSON model files.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested
//! arrays. A file holds any of a `classical` machine, a `quantum` model or a
//! bare `channel`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix};
use crate::model::{ClassicalModel, EbChannel, Instrument, QuantumModel};

pub type ComplexJson = [f64; 2];
pub type MatrixJson = Vec<Vec<ComplexJson>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalJson {
    pub pi: Vec<f64>,
    pub t0: Vec<Vec<f64>>,
    pub t1: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelJson {
    pub effects: Vec<MatrixJson>,
    pub preps: Vec<MatrixJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumJson {
    pub rho0: MatrixJson,
    pub channel: ChannelJson,
    pub kraus0: Vec<MatrixJson>,
    pub kraus1: Vec<MatrixJson>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum: Option<QuantumJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelJson>,
}

pub fn matrix_to_json(m: &ComplexMatrix) -> MatrixJson {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|s| [m[(r, s)].re, m[(r, s)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &MatrixJson) -> Result<ComplexMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("matrix must be square and non-empty".into()));
    }
    Ok(ComplexMatrix::from_fn(n, n, |r, s| c(rows[r][s][0], rows[r][s][1])))
}

fn real_to_json(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|s| m[(r, s)]).collect())
        .collect()
}

fn real_from_json(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension(format!("transition matrix must be {n}x{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |r, s| rows[r][s]))
}

impl From<&ClassicalModel> for ClassicalJson {
    fn from(m: &ClassicalModel) -> Self {
        Self {
            pi: m.pi().iter().copied().collect(),
            t0: real_to_json(m.transition(0)),
            t1: real_to_json(m.transition(1)),
        }
    }
}

impl ClassicalJson {
    pub fn to_model(&self) -> Result<ClassicalModel> {
        let d = self.pi.len();
        ClassicalModel::new(
            DVector::from_vec(self.pi.clone()),
            real_from_json(&self.t0, d)?,
            real_from_json(&self.t1, d)?,
        )
    }
}

fn matrices(list: &[MatrixJson]) -> Result<Vec<ComplexMatrix>> {
    list.iter().map(matrix_from_json).collect()
}

impl From<&EbChannel> for ChannelJson {
    fn from(ch: &EbChannel) -> Self {
        Self {
            effects: ch.effects().iter().map(matrix_to_json).collect(),
            preps: ch.preps().iter().map(matrix_to_json).collect(),
        }
    }
}

impl ChannelJson {
    pub fn to_channel(&self) -> Result<EbChannel> {
        EbChannel::new(matrices(&self.effects)?, matrices(&self.preps)?)
    }
}

impl From<&QuantumModel> for QuantumJson {
    fn from(q: &QuantumModel) -> Self {
        Self {
            rho0: matrix_to_json(q.rho0()),
            channel: q.channel().into(),
            kraus0: q.instrument().kraus(0).iter().map(matrix_to_json).collect(),
            kraus1: q.instrument().kraus(1).iter().map(matrix_to_json).collect(),
        }
    }
}

impl QuantumJson {
    pub fn to_model(&self) -> Result<QuantumModel> {
        QuantumModel::new(
            matrix_from_json(&self.rho0)?,
            self.channel.to_channel()?,
            Instrument::new(matrices(&self.kraus0)?, matrices(&self.kraus1)?)?,
        )
    }
}

impl ModelFile {
    pub fn classical(model: &ClassicalModel) -> Self {
        Self {
            classical: Some(model.into()),
            ..Self::default()
        }
    }

    pub fn quantum(model: &QuantumModel) -> Self {
        Self {
            quantum: Some(model.into()),
            ..Self::default()
        }
    }

    pub fn channel(channel: &EbChannel) -> Self {
        Self {
            channel: Some(channel.into()),
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text)?;
        if file.classical.is_none() && file.quantum.is_none() && file.channel.is_none() {
            return Err(Error::InvalidArgument(
                "model file needs a classical, quantum or channel entry".into(),
            ));
        }
        Ok(file)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn classical_model(&self) -> Result<Option<ClassicalModel>> {
        self.classical.as_ref().map(ClassicalJson::to_model).transpose()
    }

    pub fn quantum_model(&self) -> Result<Option<QuantumModel>> {
        self.quantum.as_ref().map(QuantumJson::to_model).transpose()
    }

    /// The bare channel, or the channel of the quantum model.
    pub fn eb_channel(&self) -> Result<Option<EbChannel>> {
        match (&self.channel, &self.quantum) {
            (Some(ch), _) => ch.to_channel().map(Some),
            (None, Some(q)) => q.channel.to_channel().map(Some),
            (None, None) => Ok(None),
        }
    }
}
