//! Fidelity susceptibility, its low- and high-temperature coefficients,
//! and the threshold driving rate.

use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{ModelOperators, SpinChainModel};
use crate::operator::{commutator_hs_norm, eigh, HermitianOperator, SpectralDecomposition};
use crate::qsl::delta_v;
use crate::thermal::gibbs_state;

/// Matrix elements below this magnitude count as uncoupled.
pub const COUPLING_TOL: f64 = 1e-10;

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must be finite and non-negative, got {beta}"
        )));
    }
    Ok(())
}

/// |V_mn|² in the eigenbasis of `spec`.
fn coupling_weights(spec: &SpectralDecomposition, v: &HermitianOperator) -> Result<Mat<f64>> {
    let vt = spec.to_eigenbasis(v)?;
    Ok(Mat::from_fn(vt.nrows(), vt.ncols(), |i, j| vt[(i, j)].norm_sqr()))
}

fn chi_from_weights(energies: &[f64], v2: &Mat<f64>, tol: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    let e0 = energies[0];
    let p: Vec<f64> = energies.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z2: f64 = p.iter().map(|x| x * x).sum();
    let d = energies.len();
    let mut acc = 0.0;
    for n in 0..d {
        let mut row = 0.0;
        for m in 0..n {
            let gap = energies[n] - energies[m];
            if gap.abs() < tol || v2[(m, n)] == 0.0 {
                continue;
            }
            // p_m − p_n without cancellation; energies ascend so m is lower.
            let dp = p[m] * -(-beta * gap).exp_m1();
            row += dp * dp * v2[(m, n)] / (gap * gap);
        }
        acc += row;
    }
    // Each unordered pair appears twice in the ordered sum.
    4.0 * acc / z2
}

/// χ_F = (2/Z₀(2β)) Σ_{m≠n} (e^{−βE_m} − e^{−βE_n})² |V_mn|² / (E_m − E_n)²,
/// with pairs inside a degenerate block excluded.
pub fn chi_f_thermal(spec: &SpectralDecomposition, v: &HermitianOperator, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let v2 = coupling_weights(spec, v)?;
    Ok(chi_from_weights(
        &spec.eigenvalues,
        &v2,
        spec.degeneracy_tolerance(),
        beta,
    ))
}

/// 4 Σ_{n>0} |V_n0|²/Δ_n² for a non-degenerate ground state.
pub fn chi_f_ground(spec: &SpectralDecomposition, v: &HermitianOperator) -> Result<f64> {
    let g = spec.ground_multiplicity();
    if g != 1 {
        return Err(Error::DegenerateGroundState { multiplicity: g });
    }
    chi_f_zero_temperature(spec, v)
}

/// β → ∞ limit of χ_F: (4/g) Σ_{m∈G, n∉G} |V_mn|²/(E_n − E_0)² over the
/// g-fold ground manifold G. Equals `chi_f_ground` when g = 1.
pub fn chi_f_zero_temperature(spec: &SpectralDecomposition, v: &HermitianOperator) -> Result<f64> {
    let v2 = coupling_weights(spec, v)?;
    let g = spec.ground_multiplicity();
    let e = &spec.eigenvalues;
    let mut acc = 0.0;
    for n in g..spec.dim() {
        let gap = e[n] - e[0];
        let w: f64 = (0..g).map(|m| v2[(m, n)]).sum();
        acc += w / (gap * gap);
    }
    Ok(4.0 * acc / g as f64)
}

/// β → ∞ limit of δV: √((2/g) Σ_{m∈G, n∉G} |V_mn|²), the δV of the
/// maximally mixed state on the ground manifold.
pub fn delta_v_zero_temperature(spec: &SpectralDecomposition, v: &HermitianOperator) -> Result<f64> {
    let v2 = coupling_weights(spec, v)?;
    let g = spec.ground_multiplicity();
    let mut acc = 0.0;
    for n in g..spec.dim() {
        acc += (0..g).map(|m| v2[(m, n)]).sum::<f64>();
    }
    Ok((2.0 * acc / g as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LowTempCoefficients {
    pub a: f64,
    pub b: f64,
    pub w: f64,
    pub c1: f64,
    /// Lowest excitation energy coupled to the ground state by V.
    pub gap_delta: f64,
    /// Next coupled excitation energy, when one exists.
    pub next_gap: Option<f64>,
    /// Size of the pooled multiplet at E₀ + Δ.
    pub multiplet_size: usize,
}

/// a = |V₁₀|²/δV⁽⁰⁾², b = |V₁₀|²/(χ_F⁽⁰⁾ Δ²), W = −a + 4b, c₁ = 2W, with |V₁₀|²
/// pooled over the degenerate multiplet at the lowest coupled excitation.
pub fn low_temp_coefficients(
    spec: &SpectralDecomposition,
    v: &HermitianOperator,
) -> Result<LowTempCoefficients> {
    let g = spec.ground_multiplicity();
    if g != 1 {
        return Err(Error::DegenerateGroundState { multiplicity: g });
    }
    let v2 = coupling_weights(spec, v)?;
    let e = &spec.eigenvalues;
    let tol = spec.degeneracy_tolerance();
    let coupled: Vec<usize> = (1..spec.dim())
        .filter(|&n| v2[(n, 0)].sqrt() > COUPLING_TOL)
        .collect();
    let first = *coupled.first().ok_or(Error::NoCoupledExcitation)?;
    let e1 = e[first];
    let multiplet: Vec<usize> = (1..spec.dim()).filter(|&n| (e[n] - e1).abs() <= tol).collect();
    let v10: f64 = multiplet.iter().map(|&n| v2[(n, 0)]).sum();
    let next_gap = coupled
        .iter()
        .find(|&&n| e[n] - e1 > tol)
        .map(|&n| e[n] - e[0]);
    let gap = e1 - e[0];

    let dv0_sq: f64 = (1..spec.dim()).map(|n| v2[(n, 0)]).sum::<f64>() * 2.0;
    let chi0: f64 = 4.0
        * (1..spec.dim())
            .map(|n| v2[(n, 0)] / (e[n] - e[0]).powi(2))
            .sum::<f64>();
    let a = v10 / dv0_sq;
    let b = v10 / (chi0 * gap * gap);
    let w = -a + 4.0 * b;
    Ok(LowTempCoefficients {
        a,
        b,
        w,
        c1: 2.0 * w,
        gap_delta: gap,
        next_gap,
        multiplet_size: multiplet.len(),
    })
}

/// Σ_{m≠n} |V_mn|² in the block-resolved eigenbasis, computed as
/// Tr V² − Σ_n V_nn².
pub fn off_diagonal_weight(spec: &SpectralDecomposition, v: &HermitianOperator) -> Result<f64> {
    let resolved = spec.resolve_degenerate_blocks(v)?;
    let vt = resolved.to_eigenbasis(v)?;
    let total = v.hs_norm().powi(2);
    let diag: f64 = (0..vt.nrows()).map(|n| vt[(n, n)].re.powi(2)).sum();
    Ok(total - diag)
}

/// c₂ such that f(β) ≈ c₂/β at high temperature:
/// [d^{−½}‖[Ĥ₀,V̂]‖/δV⁽⁰⁾] / [(2/d)Σ_{m≠n}|V_mn|² / χ_F⁽⁰⁾].
/// Zero-temperature quantities are taken over the ground manifold.
pub fn high_temp_coefficient(
    spec: &SpectralDecomposition,
    v: &HermitianOperator,
    h0: &HermitianOperator,
) -> Result<f64> {
    let d = spec.dim() as f64;
    let shifted = h0.add_scaled(-h0.trace() / d, &HermitianOperator::identity(h0.n_sites()))?;
    let comm = commutator_hs_norm(&shifted, v)?;
    let off = off_diagonal_weight(spec, v)?;
    if !(off > COUPLING_TOL * COUPLING_TOL) {
        return Err(Error::VanishingOffDiagonal);
    }
    let dv0 = delta_v_zero_temperature(spec, v)?;
    let chi0 = chi_f_zero_temperature(spec, v)?;
    let num = comm / d.sqrt() / dv0;
    let den = (2.0 / d) * off / chi0;
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdStatus {
    Defined,
    /// β = 0: δV and χ_F both vanish and Γ_th is unbounded.
    UndefinedAtInfiniteTemperature,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub beta: f64,
    pub alpha: f64,
    pub delta_v: f64,
    pub chi_f: f64,
    /// None when undefined at infinite temperature.
    pub gamma_th: Option<f64>,
    pub gamma_n: f64,
    pub f_n: Option<f64>,
    pub delta_v_zero: f64,
    pub chi_f_zero: f64,
    pub status: ThresholdStatus,
}

/// Model operators and Ĥ₀ spectrum shared by threshold reports across a β sweep.
#[derive(Clone, Debug)]
pub struct ThresholdContext {
    pub ops: ModelOperators,
    pub spec: SpectralDecomposition,
    pub delta_v_zero: f64,
    pub chi_f_zero: f64,
}

impl ThresholdContext {
    pub fn new(model: &SpinChainModel) -> Result<Self> {
        let ops = ModelOperators::new(model);
        let spec = eigh(&ops.h0)?;
        let delta_v_zero = delta_v_zero_temperature(&spec, &ops.v)?;
        let chi_f_zero = chi_f_zero_temperature(&spec, &ops.v)?;
        Ok(Self {
            ops,
            spec,
            delta_v_zero,
            chi_f_zero,
        })
    }

    /// Γ_N = α δV⁽⁰⁾/χ_F⁽⁰⁾.
    pub fn gamma_n(&self, alpha: f64) -> f64 {
        alpha * self.delta_v_zero / self.chi_f_zero
    }

    pub fn report(&self, beta: f64, alpha: f64) -> Result<ThresholdReport> {
        check_beta(beta)?;
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        let rho0 = gibbs_state(&self.spec, beta)?;
        let dv = delta_v(&rho0, &self.ops.v)?;
        let chi = chi_f_thermal(&self.spec, &self.ops.v, beta)?;
        let gamma_n = self.gamma_n(alpha);
        let (gamma_th, f_n, status) = if beta == 0.0 || chi == 0.0 {
            (None, None, ThresholdStatus::UndefinedAtInfiniteTemperature)
        } else {
            let g = alpha * dv / chi;
            (Some(g), Some(g / gamma_n), ThresholdStatus::Defined)
        };
        Ok(ThresholdReport {
            beta,
            alpha,
            delta_v: dv,
            chi_f: chi,
            gamma_th,
            gamma_n,
            f_n,
            delta_v_zero: self.delta_v_zero,
            chi_f_zero: self.chi_f_zero,
            status,
        })
    }
}

/// δV, χ_F, Γ_th = αδV/χ_F, Γ_N = αδV⁽⁰⁾/χ_F⁽⁰⁾ and f_N = Γ_th/Γ_N.
pub fn threshold_report(model: &SpinChainModel, beta: f64, alpha: f64) -> Result<ThresholdReport> {
    ThresholdContext::new(model)?.report(beta, alpha)
}
