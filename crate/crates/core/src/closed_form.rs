//! Transfer-matrix closed forms for δV, χ_F and the temperature factor f.
//!
//! TFIC and QXYC share one set of formulas in t = tanh(2βJ). The MFIC
//! results are built from the two-eigenvalue trace identity for the
//! field-dependent transfer matrix T^(B).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::FIELD_EXCLUSION_TOL;

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must be finite and non-negative, got {beta}"
        )));
    }
    Ok(())
}

fn check_positive_beta(beta: f64) -> Result<()> {
    check_beta(beta)?;
    if beta == 0.0 {
        return Err(Error::InvalidParameter(
            "the temperature factor is undefined at beta = 0".into(),
        ));
    }
    Ok(())
}

/// ln Z₀ of the periodic classical Ising ring: N ln(2cosh βJ) + ln(1 + tanh^N βJ).
pub fn ln_z0_ising(n: usize, beta: f64, j: f64) -> f64 {
    let x = beta * j;
    let ln_2cosh = x.abs() + (-2.0 * x.abs()).exp().ln_1p();
    n as f64 * ln_2cosh + x.tanh().powi(n as i32).ln_1p()
}

/// Z₀ = 2^N (cosh^N βJ + sinh^N βJ), through the log-space evaluation.
pub fn z0_ising(n: usize, beta: f64, j: f64) -> f64 {
    ln_z0_ising(n, beta, j).exp()
}

/// Z₀ evaluated directly as a sum of powers; overflows for large N·βJ.
pub fn z0_ising_direct(n: usize, beta: f64, j: f64) -> f64 {
    let x = beta * j;
    let p = n as i32;
    2f64.powi(p) * (x.cosh().powi(p) + x.sinh().powi(p))
}

/// Open-chain partition function Q_{N−1}(2β) = 2 (2cosh 2βJ)^{N−2}.
pub fn q_open_chain(n: usize, two_beta_j: f64) -> f64 {
    2.0 * (2.0 * two_beta_j.cosh()).powi(n as i32 - 2)
}

/// t^{N−2} and t^N for t = tanh(2βJ), from y = e^{−4βJ}.
fn tfic_powers(n: usize, beta: f64, j: f64) -> (f64, f64, f64) {
    let y = (-4.0 * beta * j).exp();
    let ln_t = -(2.0 * y / (1.0 - y)).ln_1p();
    let t = (2.0 * beta * j).tanh();
    (t, ((n as f64 - 2.0) * ln_t).exp(), (n as f64 * ln_t).exp())
}

/// √(2N) J tanh(2βJ) [(1 + t^{N−2})/(1 + t^N)]^½.
pub fn delta_v_tfic_closed(n: usize, beta: f64, j: f64) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    let (t, tn2, tn) = tfic_powers(n, beta, j);
    (2.0 * n as f64).sqrt() * j * t * ((1.0 + tn2) / (1.0 + tn)).sqrt()
}

/// (N/4) tanh²(2βJ) (1 + t^{N−2})/(1 + t^N).
pub fn chi_f_tfic_closed(n: usize, beta: f64, j: f64) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    let (t, tn2, tn) = tfic_powers(n, beta, j);
    n as f64 / 4.0 * t * t * (1.0 + tn2) / (1.0 + tn)
}

/// ln f_N for TFIC, accurate when f_N is close to one.
fn ln_f_n_tfic(n: usize, beta: f64, j: f64) -> f64 {
    let y = (-4.0 * beta * j).exp();
    let ln_coth = (2.0 * y / (1.0 - y)).ln_1p();
    let (_, tn2, _) = tfic_powers(n, beta, j);
    let sech2 = 4.0 * y / ((1.0 + y) * (1.0 + y));
    ln_coth + 0.5 * (-tn2 * sech2 / (1.0 + tn2)).ln_1p()
}

/// f_N = coth(2βJ) [(1 + t^N)/(1 + t^{N−2})]^½.
pub fn f_n_tfic(n: usize, beta: f64, j: f64) -> Result<f64> {
    check_positive_beta(beta)?;
    Ok(ln_f_n_tfic(n, beta, j).exp())
}

/// f_N − 1 without cancellation.
pub fn f_n_tfic_excess(n: usize, beta: f64, j: f64) -> Result<f64> {
    check_positive_beta(beta)?;
    Ok(ln_f_n_tfic(n, beta, j).exp_m1())
}

/// Thermodynamic limit f(β) = coth(2βJ).
pub fn f_tfic_thermodynamic(beta: f64, j: f64) -> Result<f64> {
    check_positive_beta(beta)?;
    Ok(1.0 / (2.0 * beta * j).tanh())
}

/// Zero-temperature threshold rate 4√2 J α/√N for TFIC and QXYC.
pub fn gamma_n_tfic(n: usize, j: f64, alpha: f64) -> f64 {
    4.0 * 2f64.sqrt() * j * alpha / (n as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Low,
    High,
}

/// f ≈ 1 + c₁ e^{−βΔ} at low temperature and f ≈ c₂/β at high temperature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AsymptoticConstants {
    pub c1: f64,
    pub gap: f64,
    pub c2: f64,
}

pub fn tfic_asymptotic_constants(j: f64) -> AsymptoticConstants {
    AsymptoticConstants {
        c1: 2.0,
        gap: 4.0 * j,
        c2: 1.0 / (2.0 * j),
    }
}

/// Leading low- or high-temperature form of the thermodynamic TFIC factor.
pub fn f_tfic_asymptotics(beta: f64, j: f64, regime: Regime) -> f64 {
    let c = tfic_asymptotic_constants(j);
    match regime {
        Regime::Low => 1.0 + c.c1 * (-beta * c.gap).exp(),
        Regime::High => c.c2 / beta,
    }
}

/// Symmetric 2×2 transfer matrix with its two eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransferMatrix2 {
    pub entries: [[f64; 2]; 2],
    pub eigen_plus: f64,
    pub eigen_minus: f64,
}

impl TransferMatrix2 {
    pub fn new(entries: [[f64; 2]; 2]) -> Result<Self> {
        let [[a, b], [b2, d]] = entries;
        if b != b2 {
            return Err(Error::InvalidParameter("transfer matrix must be symmetric".into()));
        }
        if !(a > 0.0 && b > 0.0 && d > 0.0) || !(a.is_finite() && b.is_finite() && d.is_finite()) {
            return Err(Error::InvalidParameter(
                "transfer matrix entries must be positive and finite".into(),
            ));
        }
        let half_tr = 0.5 * (a + d);
        let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        let eigen_plus = half_tr + disc;
        let eigen_minus = (a * d - b * b) / eigen_plus;
        Ok(Self {
            entries,
            eigen_plus,
            eigen_minus,
        })
    }

    /// T_{ss′} = e^{K s s′} with K = βJ (zero field).
    pub fn ising(k: f64) -> Result<Self> {
        Self::new([[k.exp(), (-k).exp()], [(-k).exp(), k.exp()]])
    }

    /// T^(B) = [[e^{K−H}, e^{−K}], [e^{−K}, e^{K+H}]], with Λ± in the
    /// closed form e^K cosh H ± √(e^{2K} sinh²H + e^{−2K}).
    pub fn mixed_field(k: f64, h: f64) -> Result<Self> {
        let entries = [[(k - h).exp(), (-k).exp()], [(-k).exp(), (k + h).exp()]];
        let mut t = Self::new(entries)?;
        let r = ((2.0 * k).exp() * h.sinh().powi(2) + (-2.0 * k).exp()).sqrt();
        t.eigen_plus = k.exp() * h.cosh() + r;
        t.eigen_minus = 2.0 * (2.0 * k).sinh() / t.eigen_plus;
        if !t.eigen_plus.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "transfer matrix overflows at K = {k}, H = {h}"
            )));
        }
        Ok(t)
    }

    pub fn trace(&self) -> f64 {
        self.entries[0][0] + self.entries[1][1]
    }

    pub fn determinant(&self) -> f64 {
        self.entries[0][0] * self.entries[1][1] - self.entries[0][1] * self.entries[1][0]
    }

    fn check_split(&self) -> Result<()> {
        let (p, m) = (self.eigen_plus, self.eigen_minus);
        if (p - m).abs() <= 1e-12 * p.abs().max(m.abs()) {
            return Err(Error::DegenerateTransferEigenvalues(p, m));
        }
        Ok(())
    }

    /// (a₊, a₋) with Tr(Tⁿ M) = a₊Λ₊ⁿ + a₋Λ₋ⁿ:
    /// a₊ = (Tr(TM) − Λ₋ Tr M)/(Λ₊ − Λ₋), a₋ = (Λ₊ Tr M − Tr(TM))/(Λ₊ − Λ₋).
    pub fn trace_coefficients(&self, m: &[[f64; 2]; 2]) -> Result<(f64, f64)> {
        self.check_split()?;
        let t = &self.entries;
        let tr_m = m[0][0] + m[1][1];
        let tr_tm = t[0][0] * m[0][0] + t[0][1] * m[1][0] + t[1][0] * m[0][1] + t[1][1] * m[1][1];
        let (p, q) = (self.eigen_plus, self.eigen_minus);
        Ok(((tr_tm - q * tr_m) / (p - q), (p * tr_m - tr_tm) / (p - q)))
    }
}

/// Tr(Tⁿ M) = Λ₊ⁿ (a₊ + a₋ (Λ₋/Λ₊)ⁿ), returned as (ln|value|, sign).
pub fn two_eig_trace_ln(t: &TransferMatrix2, m: &[[f64; 2]; 2], n: u32) -> Result<(f64, f64)> {
    let (ap, am) = t.trace_coefficients(m)?;
    let rho = t.eigen_minus / t.eigen_plus;
    let mant = ap + am * rho.powi(n as i32);
    Ok((n as f64 * t.eigen_plus.ln() + mant.abs().ln(), mant.signum()))
}

/// Tr(Tⁿ M) via the two-eigenvalue identity in log space.
pub fn two_eig_trace(t: &TransferMatrix2, m: &[[f64; 2]; 2], n: u32) -> Result<f64> {
    if n == 0 {
        return Ok(m[0][0] + m[1][1]);
    }
    let (ln_abs, sign) = two_eig_trace_ln(t, m, n)?;
    Ok(sign * ln_abs.exp())
}

/// Tr(Tⁿ M) = a₊Λ₊ⁿ + a₋Λ₋ⁿ with plain powers.
pub fn two_eig_trace_direct(t: &TransferMatrix2, m: &[[f64; 2]; 2], n: u32) -> Result<f64> {
    let (ap, am) = t.trace_coefficients(m)?;
    Ok(ap * t.eigen_plus.powi(n as i32) + am * t.eigen_minus.powi(n as i32))
}

/// (a₊ + a₋ρ^{N−2}) / (Λ₊² (1 + ρ^N)) with ρ = Λ₋/Λ₊: the ratio
/// Tr(T^{N−2}M)/Tr(T^N) without forming either power.
fn trace_ratio(t: &TransferMatrix2, a: (f64, f64), n: usize) -> f64 {
    let rho = t.eigen_minus / t.eigen_plus;
    let num = a.0 + a.1 * rho.powi(n as i32 - 2);
    let den = t.eigen_plus * t.eigen_plus * (1.0 + rho.powi(n as i32));
    num / den
}

/// Transfer-matrix coefficients of the mixed-field chain at K = 2βJ, H = 2βB.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MficCoefficients {
    pub k: f64,
    pub h: f64,
    pub transfer: TransferMatrix2,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub d_plus: f64,
    pub d_minus: f64,
    pub m_pp: f64,
    pub m_mm: f64,
    pub m_pm: f64,
}

fn check_field(j: f64, b: f64) -> Result<()> {
    let w = FIELD_EXCLUSION_TOL * j;
    if b.abs() <= w || (b.abs() - 2.0 * j).abs() <= w {
        return Err(Error::ExcludedField { b, j });
    }
    Ok(())
}

pub fn mfic_coefficients(beta: f64, j: f64, b: f64) -> Result<MficCoefficients> {
    check_beta(beta)?;
    if !(j > 0.0) {
        return Err(Error::InvalidParameter(format!("J must be positive, got {j}")));
    }
    check_field(j, b)?;
    let k = 2.0 * beta * j;
    let h = 2.0 * beta * b;
    let transfer = TransferMatrix2::mixed_field(k, h)?;

    let u = [(-h / 2.0).exp(), (h / 2.0).exp()];
    let u_mat = [[u[0] * u[0], u[0] * u[1]], [u[1] * u[0], u[1] * u[1]]];
    let (c_plus, c_minus) = transfer.trace_coefficients(&u_mat)?;

    let sq = |x: f64| x * x;
    let m_pp = 8.0 * (-2.0 * beta * b).exp() * sq((beta * (b - 2.0 * j)).sinh()) / sq(b - 2.0 * j);
    let m_mm = 8.0 * (2.0 * beta * b).exp() * sq((beta * (b + 2.0 * j)).sinh()) / sq(b + 2.0 * j);
    let m_pm = 8.0 * sq((beta * b).sinh()) / sq(b);
    let m_mat = [[m_pp, m_pm], [m_pm, m_mm]];
    let (d_plus, d_minus) = transfer.trace_coefficients(&m_mat)?;

    let all = [c_plus, c_minus, d_plus, d_minus, m_pp, m_mm, m_pm];
    if all.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "mixed-field coefficients overflow at beta = {beta}"
        )));
    }
    Ok(MficCoefficients {
        k,
        h,
        transfer,
        lambda_plus: transfer.eigen_plus,
        lambda_minus: transfer.eigen_minus,
        c_plus,
        c_minus,
        d_plus,
        d_minus,
        m_pp,
        m_mm,
        m_pm,
    })
}

impl MficCoefficients {
    /// Q^(B)_{N−1}(2β)/Z₀(2β).
    fn open_over_closed(&self, n: usize) -> f64 {
        trace_ratio(&self.transfer, (self.c_plus, self.c_minus), n)
    }

    /// Tr(T^{N−2}M)/Z₀(2β).
    fn m_over_closed(&self, n: usize) -> f64 {
        trace_ratio(&self.transfer, (self.d_plus, self.d_minus), n)
    }
}

fn check_chain(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "closed forms require N >= 3, got {n}"
        )));
    }
    Ok(())
}

/// √(2N) J (1 − 2Q^(B)/Z₀(2β))^½.
pub fn delta_v_mfic_closed(n: usize, beta: f64, j: f64, b: f64) -> Result<f64> {
    check_chain(n)?;
    let c = mfic_coefficients(beta, j, b)?;
    let bracket = (1.0 - 2.0 * c.open_over_closed(n)).max(0.0);
    Ok((2.0 * n as f64).sqrt() * j * bracket.sqrt())
}

/// (NJ²/2) (d₊Λ₊^{N−2} + d₋Λ₋^{N−2})/(Λ₊^N + Λ₋^N).
pub fn chi_f_mfic_closed(n: usize, beta: f64, j: f64, b: f64) -> Result<f64> {
    check_chain(n)?;
    let c = mfic_coefficients(beta, j, b)?;
    Ok(n as f64 * j * j / 2.0 * c.m_over_closed(n))
}

/// Zero-temperature MFIC threshold rate √2 α (2J + |B|)²/(√N J), the
/// β → ∞ limit of α δV/χ_F.
pub fn gamma_n_mfic(n: usize, j: f64, b: f64, alpha: f64) -> f64 {
    2f64.sqrt() * alpha * (2.0 * j + b.abs()).powi(2) / ((n as f64).sqrt() * j)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SystemSize {
    Finite(usize),
    Thermodynamic,
}

/// f = Γ_th/Γ_N for the mixed-field chain. The thermodynamic limit is
/// 2Λ₊²/((2J+|B|)² d₊) · (1 − 2c₊/Λ₊²)^½.
pub fn f_mfic(size: SystemSize, beta: f64, j: f64, b: f64) -> Result<f64> {
    check_positive_beta(beta)?;
    match size {
        SystemSize::Finite(n) => {
            let dv = delta_v_mfic_closed(n, beta, j, b)?;
            let chi = chi_f_mfic_closed(n, beta, j, b)?;
            Ok(dv / chi / gamma_n_mfic(n, j, b, 1.0))
        }
        SystemSize::Thermodynamic => {
            let c = mfic_coefficients(beta, j, b)?;
            let lp2 = c.lambda_plus * c.lambda_plus;
            let bracket = (1.0 - 2.0 * c.c_plus / lp2).max(0.0);
            Ok(2.0 * lp2 / ((2.0 * j + b.abs()).powi(2) * c.d_plus) * bracket.sqrt())
        }
    }
}

/// c₁ = 1, Δ = 2(2J + |B|), c₂ = √(2 + (B/J)²)/(√2 (2 + |B|/J)² J).
pub fn mfic_asymptotic_constants(j: f64, b: f64) -> AsymptoticConstants {
    let r = b.abs() / j;
    AsymptoticConstants {
        c1: 1.0,
        gap: 2.0 * (2.0 * j + b.abs()),
        c2: (2.0 + r * r).sqrt() / (2f64.sqrt() * (2.0 + r).powi(2) * j),
    }
}

pub fn f_mfic_asymptotics(beta: f64, j: f64, b: f64, regime: Regime) -> f64 {
    let c = mfic_asymptotic_constants(j, b);
    match regime {
        Regime::Low => 1.0 + c.c1 * (-beta * c.gap).exp(),
        Regime::High => c.c2 / beta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a / b - 1.0).abs()
    }

    fn ring_configurations(n: usize) -> impl Iterator<Item = Vec<f64>> {
        (0..1usize << n).map(move |b| {
            (0..n)
                .map(|i| if (b >> i) & 1 == 0 { 1.0 } else { -1.0 })
                .collect()
        })
    }

    fn mat_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let mut c = [[0.0; 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                for j in 0..2 {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        c
    }

    fn power_trace(t: &[[f64; 2]; 2], m: &[[f64; 2]; 2], n: u32) -> f64 {
        let mut p = [[1.0, 0.0], [0.0, 1.0]];
        for _ in 0..n {
            p = mat_mul(&p, t);
        }
        let q = mat_mul(&p, m);
        q[0][0] + q[1][1]
    }

    #[test]
    fn z0_examples() {
        assert_abs_diff_eq!(z0_ising(2, 0.0, 1.0), 4.0, epsilon = 1e-14);
        let k = 0.5;
        let brute: f64 = ring_configurations(3)
            .map(|s| (k * (s[0] * s[1] + s[1] * s[2] + s[2] * s[0])).exp())
            .sum();
        assert!(rel(z0_ising(3, k, 1.0), brute) < 1e-14);
        assert!(rel(z0_ising(20, 1.0, 1.0), z0_ising_direct(20, 1.0, 1.0)) < 1e-12);
        assert!(ln_z0_ising(2000, 3.0, 1.0).is_finite());
    }

    #[test]
    fn q_open_examples() {
        assert_eq!(q_open_chain(3, 0.0), 4.0);
        // Open chain of three spins with coupling 2K.
        let k2 = 2.0 * 0.3;
        let brute: f64 = ring_configurations(3)
            .map(|s| (k2 * (s[0] * s[1] + s[1] * s[2])).exp())
            .sum();
        assert!(rel(q_open_chain(4, k2), brute) < 1e-14);
        for n in 3..10 {
            for beta in [0.1, 1.0, 3.0] {
                let r = 2.0 * q_open_chain(n, 2.0 * beta) / z0_ising(n, 2.0 * beta, 1.0);
                assert!(r > 0.0 && r < 1.0);
            }
        }
    }

    #[test]
    fn tfic_closed_limits() {
        assert_eq!(delta_v_tfic_closed(6, 0.0, 1.0), 0.0);
        assert_eq!(chi_f_tfic_closed(6, 0.0, 1.0), 0.0);
        assert_abs_diff_eq!(delta_v_tfic_closed(6, 40.0, 1.0), 12f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(chi_f_tfic_closed(8, 40.0, 1.0), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn tfic_delta_v_matches_partition_function_route() {
        // δV² = 2NJ² (1 − 2Q_{N−1}(2β)/Z₀(2β)).
        for n in [3usize, 5, 8] {
            for beta in [0.2, 0.9] {
                let q = q_open_chain(n, 2.0 * beta);
                let z = z0_ising(n, 2.0 * beta, 1.0);
                let want = (2.0 * n as f64 * (1.0 - 2.0 * q / z)).sqrt();
                assert!(rel(delta_v_tfic_closed(n, beta, 1.0), want) < 1e-12);
            }
        }
    }

    #[test]
    fn f_n_tfic_examples() {
        assert!(f_n_tfic(6, 0.0, 1.0).is_err());
        assert_abs_diff_eq!(f_n_tfic(400, 0.5, 1.0).unwrap(), 1.3130352854993313, epsilon = 1e-12);
        for n in [3usize, 6, 9] {
            for beta in [0.1, 0.7, 2.0] {
                let ratio = delta_v_tfic_closed(n, beta, 1.0) / chi_f_tfic_closed(n, beta, 1.0);
                let f = ratio / gamma_n_tfic(n, 1.0, 1.0);
                assert!(rel(f_n_tfic(n, beta, 1.0).unwrap(), f) < 1e-13);
                let ex = f_n_tfic_excess(n, beta, 1.0).unwrap();
                assert!(rel(1.0 + ex, f) < 1e-13);
            }
        }
    }

    #[test]
    fn f_n_tfic_fixed_n_series() {
        // Five-term low-T series of f_N at fixed N in x = e^{−4βJ}:
        // 1 + x + (N−½)x² + (N−½)x³ − (N³/3 − 3N²/2 + 7N/6 − 3/8)x⁴.
        for n in [4usize, 6, 8] {
            let nf = n as f64;
            let beta = 2.5;
            let x = (-4.0f64 * beta).exp();
            let series = x + (nf - 0.5) * x * x + (nf - 0.5) * x.powi(3)
                - (nf.powi(3) / 3.0 - 1.5 * nf * nf + 7.0 * nf / 6.0 - 0.375) * x.powi(4);
            let got = f_n_tfic_excess(n, beta, 1.0).unwrap();
            assert!((got - series).abs() <= 10.0 * nf.powi(4) * x.powi(5), "N={n}");
        }
    }

    #[test]
    fn f_tfic_asymptotic_examples() {
        let c = tfic_asymptotic_constants(1.0);
        assert_eq!((c.c1, c.gap, c.c2), (2.0, 4.0, 0.5));
        let b = 2.0;
        let f = f_tfic_thermodynamic(b, 1.0).unwrap();
        let y = (-4.0 * b).exp();
        // coth(2β) − (1 + 2y) = 2y²/(1 − y) exactly.
        assert!((f - f_tfic_asymptotics(b, 1.0, Regime::Low)).abs() <= 2.0 * y * y / (1.0 - y) * (1.0 + 1e-6));
        for b in [0.001, 0.01, 0.05] {
            let x = 2.0 * b;
            let f = f_tfic_thermodynamic(b, 1.0).unwrap();
            assert!((f - f_tfic_asymptotics(b, 1.0, Regime::High)).abs() <= x / 3.0);
        }
    }

    #[test]
    fn f_tfic_thermodynamic_decreasing() {
        let fs: Vec<f64> = (1..200)
            .map(|i| f_tfic_thermodynamic(i as f64 * 0.02, 1.0).unwrap())
            .collect();
        assert!(fs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn two_eig_trace_small_powers() {
        let t = TransferMatrix2::ising(0.7).unwrap();
        let m = [[0.3, -1.2], [0.4, 2.0]];
        assert_abs_diff_eq!(two_eig_trace(&t, &m, 0).unwrap(), 2.3, epsilon = 1e-14);
        assert!(rel(two_eig_trace(&t, &m, 1).unwrap(), power_trace(&t.entries, &m, 1)) < 1e-13);
    }

    #[test]
    fn two_eig_trace_random_matches_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = rng.random::<f64>() + 0.1;
            let b = rng.random::<f64>() + 0.1;
            let d = rng.random::<f64>() + 0.1;
            let t = TransferMatrix2::new([[a, b], [b, d]]).unwrap();
            let m = [
                [rng.random::<f64>(), rng.random::<f64>()],
                [rng.random::<f64>(), rng.random::<f64>()],
            ];
            assert!(rel(two_eig_trace(&t, &m, 7).unwrap(), power_trace(&t.entries, &m, 7)) < 1e-12);
        }
    }

    #[test]
    fn two_eig_trace_log_path_matches_direct_at_large_n() {
        let t = TransferMatrix2::ising(2.0).unwrap();
        let m = [[1.0, 0.5], [0.5, 2.0]];
        let a = two_eig_trace(&t, &m, 200).unwrap();
        let b = two_eig_trace_direct(&t, &m, 200).unwrap();
        assert!(rel(a, b) < 1e-10);
        let (ln_abs, sign) = two_eig_trace_ln(&t, &m, 5000).unwrap();
        assert!(ln_abs.is_finite() && sign == 1.0);
    }

    #[test]
    fn transfer_matrix_invariants() {
        let t = TransferMatrix2::mixed_field(1.3, 0.8).unwrap();
        assert!(t.eigen_plus > t.eigen_minus && t.eigen_minus >= 0.0);
        assert!((t.eigen_plus + t.eigen_minus - t.trace()).abs() <= 1e-12 * t.trace());
        assert!(rel(t.eigen_plus * t.eigen_minus, t.determinant()) <= 1e-12);
        let flat = TransferMatrix2::new([[1.0, 1e-300], [1e-300, 1.0]]).unwrap();
        assert!(matches!(
            flat.trace_coefficients(&[[1.0, 0.0], [0.0, 1.0]]),
            Err(Error::DegenerateTransferEigenvalues(..))
        ));
    }

    #[test]
    fn mfic_coefficient_identities() {
        let c = mfic_coefficients(0.8, 1.0, 0.7).unwrap();
        let (k, h) = (c.k, c.h);
        let det = (2.0 * k).exp() - (-2.0 * k).exp();
        assert!(rel(c.lambda_plus * c.lambda_minus, det) < 1e-12);
        let tr = 2.0 * k.exp() * h.cosh();
        assert!(rel(c.lambda_plus + c.lambda_minus, tr) < 1e-12);
        // Tr U = uᵀu = 2 cosh H, and c₊ + c₋ = Tr U.
        assert!(rel(c.c_plus + c.c_minus, 2.0 * h.cosh()) < 1e-12);
    }

    #[test]
    fn mfic_small_field_reduces_to_tfic() {
        let b = 1e-6;
        for beta in [0.3, 1.0] {
            let c = mfic_coefficients(beta, 1.0, b).unwrap();
            assert!((c.lambda_plus - 2.0 * c.k.cosh()).abs() < 1e-5);
            assert!((c.c_plus - 2.0).abs() < 1e-5);
            let dv = delta_v_mfic_closed(6, beta, 1.0, b).unwrap();
            assert!(rel(dv, delta_v_tfic_closed(6, beta, 1.0)) < 1e-5);
        }
        // Γ_N at B → 0 equals the TFIC rate.
        assert!(rel(gamma_n_mfic(6, 1.0, 1e-12, 1.0), gamma_n_tfic(6, 1.0, 1.0)) < 1e-10);
    }

    #[test]
    fn mfic_excluded_fields() {
        for b in [0.0, 2.0, -2.0, 1e-12] {
            assert!(matches!(
                mfic_coefficients(1.0, 1.0, b),
                Err(Error::ExcludedField { .. })
            ));
        }
        assert!(delta_v_mfic_closed(6, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn mfic_closed_values() {
        // Frozen from a brute-force spin-flip sum over 64 configurations.
        let dv = delta_v_mfic_closed(6, 1.0, 1.0, 0.7).unwrap();
        let chi = chi_f_mfic_closed(6, 1.0, 1.0, 0.7).unwrap();
        assert!(rel(dv, 3.4483839644532) < 1e-12);
        assert!(rel(chi, 0.8158753375843) < 1e-12);
        assert_eq!(delta_v_mfic_closed(6, 0.0, 1.0, 0.7).unwrap(), 0.0);
        assert_eq!(chi_f_mfic_closed(6, 0.0, 1.0, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn mfic_temperature_factor_limits() {
        for b in [0.3, 0.7, 1.3, -0.7] {
            let f = f_mfic(SystemSize::Thermodynamic, 30.0, 1.0, b).unwrap();
            assert!((f - 1.0).abs() < 1e-12);
            let f6 = f_mfic(SystemSize::Finite(6), 30.0, 1.0, b).unwrap();
            assert!((f6 - 1.0).abs() < 1e-12);
        }
        let c = mfic_asymptotic_constants(1.0, 0.7);
        assert_eq!(c.c1, 1.0);
        assert_abs_diff_eq!(c.gap, 5.4, epsilon = 1e-15);
    }

    #[test]
    fn mfic_low_temperature_leading_term() {
        for beta in [3.0, 4.0] {
            let f = f_mfic(SystemSize::Thermodynamic, beta, 1.0, 0.7).unwrap();
            let x = (-beta * 5.4f64).exp();
            assert!(rel(f - 1.0, x) < 1e-3);
        }
    }

    #[test]
    fn mfic_high_temperature_law() {
        let c2 = mfic_asymptotic_constants(1.0, 0.7).c2;
        let f = f_mfic(SystemSize::Thermodynamic, 0.001, 1.0, 0.7).unwrap();
        assert!(rel(f * 0.001, c2) < 2e-3);
    }

    #[test]
    fn mfic_non_monotonic_window_sweep() {
        // f need not be monotone at intermediate temperatures; record any
        // windows where it increases with β.
        for b in [0.3, 0.7, 1.3] {
            let betas: Vec<f64> = (1..=300).map(|i| i as f64 * 0.01).collect();
            let fs: Vec<f64> = betas
                .iter()
                .map(|&x| f_mfic(SystemSize::Thermodynamic, x, 1.0, b).unwrap())
                .collect();
            let rising: Vec<f64> = fs
                .windows(2)
                .zip(&betas)
                .filter(|(w, _)| w[1] > w[0])
                .map(|(_, &x)| x)
                .collect();
            if let (Some(lo), Some(hi)) = (rising.first(), rising.last()) {
                eprintln!("MFIC B={b}: f increases with beta on part of [{lo}, {hi}]");
            }
            assert!(fs.iter().all(|f| f.is_finite() && *f > 0.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn tfic_ratio_identity(n in 3usize..40, beta in 0.01f64..5.0) {
            let ratio = delta_v_tfic_closed(n, beta, 1.0) / chi_f_tfic_closed(n, beta, 1.0);
            let f = f_n_tfic(n, beta, 1.0).unwrap();
            prop_assert!(rel(ratio / gamma_n_tfic(n, 1.0, 1.0), f) < 1e-12);
        }

        #[test]
        fn mfic_bracket_in_unit_interval(n in 3usize..30, beta in 0.01f64..5.0, b in 0.05f64..1.9) {
            let c = mfic_coefficients(beta, 1.0, b).unwrap();
            let r = 2.0 * c.open_over_closed(n);
            prop_assert!(r > 0.0 && r < 1.0);
        }
    }
}
