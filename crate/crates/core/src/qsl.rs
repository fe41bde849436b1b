//! Wigner–Yanase skew information, the speed-limit radius and the two
//! fidelity bounds derived from it.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use faer::{c64, Mat};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{ModelOperators, SpinChainModel};
use crate::operator::{DensityMatrix, HermitianOperator};
use crate::thermal::escort_state;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QslRadius {
    pub lambda: f64,
    pub value: f64,
    pub clamped_half_pi: f64,
    pub clamped_quarter_pi: f64,
}

impl QslRadius {
    pub fn new(lambda: f64, value: f64) -> Self {
        let value = value.max(0.0);
        Self {
            lambda,
            value,
            clamped_half_pi: value.min(FRAC_PI_2),
            clamped_quarter_pi: value.min(FRAC_PI_4),
        }
    }
}

/// Square roots of the escort spectrum and the eigenbasis, with PSD dust
/// clipped to zero.
struct SqrtSpectrum {
    sqrt_q: Vec<f64>,
    basis: Mat<c64>,
}

impl SqrtSpectrum {
    fn new(rho: &DensityMatrix) -> Result<Self> {
        let spec = rho.spectrum()?;
        let sqrt_q = spec.eigenvalues.iter().map(|&q| q.max(0.0).sqrt()).collect();
        Ok(Self {
            sqrt_q,
            basis: spec.eigenvectors,
        })
    }

    fn transform(&self, h: &HermitianOperator) -> Mat<c64> {
        self.basis.adjoint() * (h.matrix() * &self.basis)
    }

    /// ½ Σ_{kl} (√q_k − √q_l)² |H_kl|² for H already in the eigenbasis.
    fn skew(&self, h_eig: &Mat<c64>) -> f64 {
        let d = self.sqrt_q.len();
        let mut acc = 0.0;
        for l in 0..d {
            for k in 0..l {
                let diff = self.sqrt_q[k] - self.sqrt_q[l];
                if diff != 0.0 {
                    acc += diff * diff * h_eig[(k, l)].norm_sqr();
                }
            }
        }
        acc
    }
}

/// I_WY = Tr(ρ̃H²) − Tr(ρ̃^½ H ρ̃^½ H), evaluated as the equivalent
/// non-negative spectral sum ½ Σ (√q_k − √q_l)² |H_kl|² in the eigenbasis of ρ̃.
pub fn wy_skew_info(rho_escort: &DensityMatrix, h: &HermitianOperator) -> Result<f64> {
    if rho_escort.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            left: rho_escort.dim(),
            right: h.dim(),
        });
    }
    let s = SqrtSpectrum::new(rho_escort)?;
    Ok(s.skew(&s.transform(h)).max(0.0))
}

/// δV = √(2 I_WY(ρ̃₀, V̂)).
pub fn delta_v(rho0: &DensityMatrix, v: &HermitianOperator) -> Result<f64> {
    let escort = escort_state(rho0)?;
    Ok((2.0 * wy_skew_info(&escort, v)?).sqrt())
}

/// R(λ) = λ² δV / (2Γ) for a constant rate Γ.
pub fn qsl_radius_constant_rate(delta_v: f64, lambda: f64, gamma: f64) -> Result<QslRadius> {
    if !(gamma > 0.0) {
        return Err(Error::NonPositiveRate { rate: gamma, lambda });
    }
    Ok(QslRadius::new(lambda, lambda * lambda * delta_v / (2.0 * gamma)))
}

fn simpson(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, panels: usize) -> Result<f64> {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a)? + f(b)?;
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64)?;
    }
    Ok(acc * h / 3.0)
}

/// R(λ) = ∫₀^λ √(2 I_WY(ρ̃₀, Ĥ_λ′)) / Γ(λ′) dλ′ by composite Simpson,
/// doubling the panel count until successive values differ by < 1e-9.
pub fn qsl_radius_general(
    model: &SpinChainModel,
    rho0: &DensityMatrix,
    lambda: f64,
    rate_fn: &dyn Fn(f64) -> f64,
    n_quad: usize,
) -> Result<QslRadius> {
    const MAX_DOUBLINGS: usize = 16;
    if lambda == 0.0 {
        return Ok(QslRadius::new(0.0, 0.0));
    }
    let ops = ModelOperators::new(model);
    let escort = escort_state(rho0)?;
    let s = SqrtSpectrum::new(&escort)?;
    let h0e = s.transform(&ops.h0);
    let ve = s.transform(&ops.v);
    let integrand = |lam: f64| -> Result<f64> {
        let rate = rate_fn(lam);
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::NonPositiveRate { rate, lambda: lam });
        }
        let h = Mat::from_fn(h0e.nrows(), h0e.ncols(), |i, j| h0e[(i, j)] + ve[(i, j)] * lam);
        Ok((2.0 * s.skew(&h)).max(0.0).sqrt() / rate)
    };
    let mut n = n_quad.max(2);
    let mut prev = simpson(&integrand, 0.0, lambda, n)?;
    let mut last_change = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        n *= 2;
        let next = simpson(&integrand, 0.0, lambda, n)?;
        last_change = (next - prev).abs();
        prev = next;
        if last_change < 1e-9 {
            return Ok(QslRadius::new(lambda, prev));
        }
    }
    Err(Error::QuadratureNonConvergence {
        doublings: MAX_DOUBLINGS,
        last_change,
    })
}

/// sin R̃.
pub fn bound_weak(r: &QslRadius) -> f64 {
    r.clamped_half_pi.sin()
}

/// g = sin²(R̃)|1 − 2C| + sin(2R̃̃)√C√(1 − C).
pub fn bound_strong(r: &QslRadius, overlap_c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&overlap_c) {
        return Err(Error::InvalidParameter(format!(
            "thermal overlap must lie in [0, 1], got {overlap_c}"
        )));
    }
    let s = r.clamped_half_pi.sin();
    let g1 = s * s * (1.0 - 2.0 * overlap_c).abs();
    let g2 = (2.0 * r.clamped_quarter_pi).sin() * overlap_c.sqrt() * (1.0 - overlap_c).sqrt();
    Ok(g1 + g2)
}
