//! The three periodic spin-chain drives: transverse-field Ising (TFIC),
//! quantum XY (QXYC) and mixed-field Ising (MFIC).

use std::fmt;
use std::str::FromStr;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{add_pauli_string, HermitianOperator, Pauli};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tfic,
    Qxyc,
    Mfic,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Tfic, ModelKind::Qxyc, ModelKind::Mfic];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Tfic => "tfic",
            ModelKind::Qxyc => "qxyc",
            ModelKind::Mfic => "mfic",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tfic" => Ok(ModelKind::Tfic),
            "qxyc" => Ok(ModelKind::Qxyc),
            "mfic" => Ok(ModelKind::Mfic),
            other => Err(Error::InvalidModel(format!(
                "unknown model kind '{other}' (expected tfic, qxyc or mfic)"
            ))),
        }
    }
}

/// Width of the excluded windows around B = 0 and B = ±2J, in units of J.
pub const FIELD_EXCLUSION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinChainModel {
    kind: ModelKind,
    n_sites: usize,
    j: f64,
    b: f64,
}

impl SpinChainModel {
    /// `b` is required for MFIC and ignored otherwise.
    pub fn new(kind: ModelKind, n_sites: usize, j: f64, b: Option<f64>) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidModel(format!(
                "n_sites must be at least 2, got {n_sites}"
            )));
        }
        if n_sites > 16 {
            return Err(Error::InvalidModel(format!(
                "n_sites = {n_sites} is beyond dense exact diagonalization"
            )));
        }
        if !(j.is_finite() && j > 0.0) {
            return Err(Error::InvalidModel(format!("J must be positive, got {j}")));
        }
        let b = match kind {
            ModelKind::Mfic => {
                let b = b.ok_or_else(|| {
                    Error::InvalidModel("MFIC requires a longitudinal field B".into())
                })?;
                if !b.is_finite() {
                    return Err(Error::InvalidModel(format!("B must be finite, got {b}")));
                }
                b
            }
            _ => 0.0,
        };
        Ok(Self { kind, n_sites, j, b })
    }

    pub fn tfic(n_sites: usize, j: f64) -> Result<Self> {
        Self::new(ModelKind::Tfic, n_sites, j, None)
    }

    pub fn qxyc(n_sites: usize, j: f64) -> Result<Self> {
        Self::new(ModelKind::Qxyc, n_sites, j, None)
    }

    pub fn mfic(n_sites: usize, j: f64, b: f64) -> Result<Self> {
        Self::new(ModelKind::Mfic, n_sites, j, Some(b))
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn coupling(&self) -> f64 {
        self.j
    }

    /// Longitudinal field; zero for TFIC and QXYC.
    pub fn field(&self) -> f64 {
        self.b
    }

    /// Whether B avoids 0 and ±2J, where the MFIC closed forms divide by zero.
    pub fn mfic_field_admissible(&self) -> bool {
        let w = FIELD_EXCLUSION_TOL * self.j;
        self.b.abs() > w && (self.b.abs() - 2.0 * self.j).abs() > w
    }
}

fn next_site(site: usize, n: usize) -> usize {
    site % n + 1
}

/// −J Σ Z_j Z_{j+1} (periodic), plus B Σ Z_j for MFIC. Diagonal.
pub fn build_h0(model: &SpinChainModel) -> HermitianOperator {
    let n = model.n_sites;
    let d = model.dim();
    let mut diag = vec![0.0; d];
    for (b, e) in diag.iter_mut().enumerate() {
        let s = |site: usize| -> f64 {
            if (b >> (n - site)) & 1 == 0 {
                1.0
            } else {
                -1.0
            }
        };
        let mut acc = 0.0;
        for site in 1..=n {
            acc -= model.j * s(site) * s(next_site(site, n));
        }
        if model.kind == ModelKind::Mfic {
            for site in 1..=n {
                acc += model.b * s(site);
            }
        }
        *e = acc;
    }
    HermitianOperator::from_diagonal(n, &diag).expect("dimension matches by construction")
}

/// −J Σ X_j for TFIC and MFIC; −J Σ (X_j X_{j+1} − Z_j Z_{j+1}) for QXYC.
pub fn build_v(model: &SpinChainModel) -> HermitianOperator {
    let n = model.n_sites;
    let d = model.dim();
    let mut mat = Mat::<c64>::zeros(d, d);
    let minus_j = c64::new(-model.j, 0.0);
    for site in 1..=n {
        let res = match model.kind {
            ModelKind::Tfic | ModelKind::Mfic => {
                add_pauli_string(&mut mat, n, minus_j, &[(site, Pauli::X)])
            }
            ModelKind::Qxyc => {
                let nb = next_site(site, n);
                add_pauli_string(&mut mat, n, minus_j, &[(site, Pauli::X), (nb, Pauli::X)])
                    .and_then(|_| {
                        add_pauli_string(&mut mat, n, -minus_j, &[(site, Pauli::Z), (nb, Pauli::Z)])
                    })
            }
        };
        res.expect("sites are in range and distinct for N >= 2");
    }
    HermitianOperator::from_matrix_unchecked(n, mat)
}

/// Ĥ₀ + λ V̂. Negative λ is accepted so that symmetric finite differences
/// about λ = 0 can be taken.
pub fn hamiltonian_at(model: &SpinChainModel, lambda: f64) -> HermitianOperator {
    ModelOperators::new(model).at(lambda)
}

/// Ĥ₀ and V̂ built once for repeated evaluation of Ĥ_λ.
#[derive(Clone, Debug)]
pub struct ModelOperators {
    pub model: SpinChainModel,
    pub h0: HermitianOperator,
    pub v: HermitianOperator,
}

impl ModelOperators {
    pub fn new(model: &SpinChainModel) -> Self {
        Self {
            model: *model,
            h0: build_h0(model),
            v: build_v(model),
        }
    }

    pub fn at(&self, lambda: f64) -> HermitianOperator {
        if lambda == 0.0 {
            return self.h0.clone();
        }
        self.h0
            .add_scaled(lambda, &self.v)
            .expect("H0 and V share a dimension")
    }
}
