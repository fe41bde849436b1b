//! Gibbs states, the order-2 escort state, and quasi-Gibbs targets built
//! on an adiabatically continued eigenbasis.

use faer::{c64, Mat};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{ModelOperators, SpinChainModel};
use crate::operator::{eigh, eigh_matrix, hs_fidelity, DensityMatrix, SpectralDecomposition};

/// Above β·(E_max − E_min) = this value the ground-manifold projector is
/// returned instead of exponentiated weights.
pub const BETA_SPAN_CAP: f64 = 700.0;

/// Overlap gap below which a continuation match is flagged as ambiguous.
pub const AMBIGUITY_TOL: f64 = 1e-6;

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must be finite and non-negative, got {beta}"
        )));
    }
    Ok(())
}

/// Normalized Boltzmann weights e^{−β(E_n − E_min)}/Z for an arbitrary list
/// of energies. Past the span cap, uniform weight on the lowest level.
pub fn boltzmann_weights(energies: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    let lo = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut w: Vec<f64> = if beta * span > BETA_SPAN_CAP {
        let tol = 1e-9 * span;
        energies
            .iter()
            .map(|&e| if e - lo <= tol { 1.0 } else { 0.0 })
            .collect()
    } else {
        energies.iter().map(|&e| (-beta * (e - lo)).exp()).collect()
    };
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    Ok(w)
}

/// ln Z(β) = −βE_min + ln Σ e^{−β(E_n − E_min)}.
pub fn ln_partition_function(energies: &[f64], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let lo = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let s: f64 = energies.iter().map(|&e| (-beta * (e - lo)).exp()).sum();
    Ok(-beta * lo + s.ln())
}

/// ρ₀ = e^{−βĤ₀}/Z₀.
pub fn gibbs_state(h0_spec: &SpectralDecomposition, beta: f64) -> Result<DensityMatrix> {
    let w = boltzmann_weights(&h0_spec.eigenvalues, beta)?;
    Ok(DensityMatrix::from_weights(&w, h0_spec.eigenvectors.as_ref()))
}

/// ρ²/Tr ρ².
pub fn escort_state(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let sq = rho.matrix() * rho.matrix();
    let tr: f64 = (0..sq.nrows()).map(|i| sq[(i, i)].re).sum();
    if !(tr > 0.0) {
        return Err(Error::InvalidDensityMatrix("zero purity".into()));
    }
    let d = sq.nrows();
    let m = Mat::from_fn(d, d, |i, j| {
        if i == j {
            c64::new(sq[(i, i)].re / tr, 0.0)
        } else {
            (sq[(i, j)] + sq[(j, i)].conj()) * (0.5 / tr)
        }
    });
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuationWarning {
    /// λ at which the ambiguous match occurred.
    pub lambda: f64,
    /// Column whose assignment was ambiguous.
    pub new_index: usize,
    pub chosen_origin: f64,
    pub competing_origin: f64,
    pub overlap_gap: f64,
}

/// Eigenvectors of Ĥ_λ labelled by the Ĥ₀ eigenvalue each descends from.
/// Column k always carries `origin_energies[k]`.
#[derive(Clone, Debug)]
pub struct LabeledEigenbasis {
    pub lambda: f64,
    pub vectors: Mat<c64>,
    pub origin_energies: Vec<f64>,
    pub warnings: Vec<ContinuationWarning>,
}

/// Incremental continuation of the Ĥ₀ eigenbasis along λ.
#[derive(Clone, Debug)]
pub struct EigenbasisContinuation {
    ops: ModelOperators,
    lambda: f64,
    vectors: Mat<c64>,
    origin: Vec<f64>,
    origin_tol: f64,
    warnings: Vec<ContinuationWarning>,
}

impl EigenbasisContinuation {
    /// Eigenbasis of Ĥ₀ with each degenerate block rotated to diagonalize P V̂ P.
    pub fn start(model: &SpinChainModel) -> Result<Self> {
        let ops = ModelOperators::new(model);
        let spec = eigh(&ops.h0)?.resolve_degenerate_blocks(&ops.v)?;
        let origin_tol = spec.degeneracy_tolerance();
        Ok(Self {
            ops,
            lambda: 0.0,
            vectors: spec.eigenvectors,
            origin: spec.eigenvalues,
            origin_tol,
            warnings: Vec::new(),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn warnings(&self) -> &[ContinuationWarning] {
        &self.warnings
    }

    /// Diagonalizes Ĥ_λ and relabels its eigenvectors by maximal overlap
    /// with the current basis.
    pub fn step(&mut self, lambda: f64) -> Result<()> {
        if lambda == self.lambda {
            return Ok(());
        }
        let h = self.ops.at(lambda);
        let spec = eigh_matrix(h.matrix())?;
        let w = spec.eigenvectors;
        let d = w.ncols();
        let overlap = self.vectors.adjoint() * &w;

        let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(d * d);
        for l in 0..d {
            for k in 0..d {
                entries.push((overlap[(k, l)].norm(), k, l));
            }
        }
        entries.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut label_of_new = vec![usize::MAX; d];
        let mut new_of_label = vec![usize::MAX; d];
        let mut assigned = 0;
        for &(_, k, l) in &entries {
            if new_of_label[k] == usize::MAX && label_of_new[l] == usize::MAX {
                new_of_label[k] = l;
                label_of_new[l] = k;
                assigned += 1;
                if assigned == d {
                    break;
                }
            }
        }

        for l in 0..d {
            let k = label_of_new[l];
            let chosen = overlap[(k, l)].norm();
            let competitor = (0..d)
                .filter(|&k2| k2 != k && (self.origin[k2] - self.origin[k]).abs() > self.origin_tol)
                .map(|k2| (overlap[(k2, l)].norm(), k2))
                .max_by(|a, b| a.0.total_cmp(&b.0));
            if let Some((other, k2)) = competitor {
                if other > 1e-3 && (chosen - other).abs() < AMBIGUITY_TOL {
                    let warning = ContinuationWarning {
                        lambda,
                        new_index: l,
                        chosen_origin: self.origin[k],
                        competing_origin: self.origin[k2],
                        overlap_gap: (chosen - other).abs(),
                    };
                    log::warn!(
                        "ambiguous eigenbasis continuation at lambda = {lambda}: origin energies \
                         {} and {} compete for one eigenvector (overlap gap {:e})",
                        warning.chosen_origin,
                        warning.competing_origin,
                        warning.overlap_gap
                    );
                    self.warnings.push(warning);
                }
            }
        }

        let mut next = Mat::<c64>::zeros(d, d);
        for k in 0..d {
            let l = new_of_label[k];
            let o = overlap[(k, l)];
            let phase = if o.norm() > 0.0 { o.conj() / o.norm() } else { c64::new(1.0, 0.0) };
            for i in 0..d {
                next[(i, k)] = w[(i, l)] * phase;
            }
        }
        self.vectors = next;
        self.lambda = lambda;
        Ok(())
    }

    /// Advances to `target` in `n_steps` equal increments.
    pub fn advance(&mut self, target: f64, n_steps: usize) -> Result<()> {
        let n = n_steps.max(1);
        let start = self.lambda;
        for s in 1..=n {
            let lam = if s == n {
                target
            } else {
                start + (target - start) * s as f64 / n as f64
            };
            self.step(lam)?;
        }
        Ok(())
    }

    pub fn basis(&self) -> LabeledEigenbasis {
        LabeledEigenbasis {
            lambda: self.lambda,
            vectors: self.vectors.clone(),
            origin_energies: self.origin.clone(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn quasi_gibbs(&self, beta: f64) -> Result<DensityMatrix> {
        let w = boltzmann_weights(&self.origin, beta)?;
        Ok(DensityMatrix::from_weights(&w, self.vectors.as_ref()))
    }
}

/// Number of continuation steps used when none is requested.
pub fn default_continuation_steps(lambda_target: f64) -> usize {
    50usize.max((2000.0 * lambda_target.abs()).ceil() as usize)
}

pub fn continued_eigenbasis(
    model: &SpinChainModel,
    lambda_target: f64,
    n_steps: usize,
) -> Result<LabeledEigenbasis> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be at least 1".into()));
    }
    if !lambda_target.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite, got {lambda_target}"
        )));
    }
    let mut c = EigenbasisContinuation::start(model)?;
    if lambda_target != 0.0 {
        c.advance(lambda_target, n_steps)?;
    }
    Ok(c.basis())
}

/// σ_λ = Σ_n e^{−βE_n^(0)} |E_n(λ)⟩⟨E_n(λ)| / Z₀.
pub fn quasi_gibbs(basis: &LabeledEigenbasis, beta: f64) -> Result<DensityMatrix> {
    let w = boltzmann_weights(&basis.origin_energies, beta)?;
    Ok(DensityMatrix::from_weights(&w, basis.vectors.as_ref()))
}

/// Quasi-Gibbs state at `lambda`, doubling the step count from the default
/// until successive states agree to 1e-8 in HS norm. Returns the state and
/// the step count used.
pub fn converged_quasi_gibbs(
    model: &SpinChainModel,
    lambda: f64,
    beta: f64,
) -> Result<(DensityMatrix, usize)> {
    const MAX_DOUBLINGS: usize = 6;
    let mut n = default_continuation_steps(lambda);
    let mut prev = quasi_gibbs(&continued_eigenbasis(model, lambda, n)?, beta)?;
    for _ in 0..MAX_DOUBLINGS {
        let next = quasi_gibbs(&continued_eigenbasis(model, lambda, 2 * n)?, beta)?;
        let change = prev.hs_distance(&next)?;
        n *= 2;
        prev = next;
        if change < 1e-8 {
            return Ok((prev, n));
        }
    }
    log::warn!("quasi-Gibbs state at lambda = {lambda} not stable to 1e-8 after {n} steps");
    Ok((prev, n))
}

/// C(λ) = F_HS(ρ₀, σ_λ).
pub fn thermal_overlap(
    model: &SpinChainModel,
    beta: f64,
    lambda: f64,
    n_steps: usize,
) -> Result<f64> {
    let ops = ModelOperators::new(model);
    let rho0 = gibbs_state(&eigh(&ops.h0)?, beta)?;
    let sigma = quasi_gibbs(&continued_eigenbasis(model, lambda, n_steps)?, beta)?;
    hs_fidelity(&rho0, &sigma)
}
