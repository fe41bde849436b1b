//! Unitary evolution of the Gibbs state under the linear ramp λ = Γt and
//! the bound-trace records along it.

use faer::{c64, Mat, MatRef};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{ModelOperators, SpinChainModel};
use crate::operator::{
    eigh, eigh_matrix, eigh_real, hs_angle, hs_fidelity, is_real_matrix, DensityMatrix,
};
use crate::qsl::{bound_strong, bound_weak, delta_v, qsl_radius_constant_rate};
use crate::thermal::{default_continuation_steps, gibbs_state, ContinuationWarning, EigenbasisContinuation};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub lambda: f64,
    pub adiabatic_fidelity: f64,
    pub thermal_overlap: f64,
    pub qsl_radius: f64,
    pub hs_angle: f64,
    pub bound_weak: f64,
    pub bound_strong: f64,
    pub purity: f64,
    pub trace_defect: f64,
    pub hermiticity_defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundTrace {
    pub beta: f64,
    pub gamma: f64,
    pub lambda_max: f64,
    pub delta_v: f64,
    pub records: Vec<TraceRecord>,
    /// Propagation steps between consecutive records at the accepted resolution.
    pub substeps_per_record: usize,
    pub halvings: usize,
    /// Change in the final-record fidelity at the last halving.
    pub final_change: f64,
    pub warnings: Vec<ContinuationWarning>,
}

impl BoundTrace {
    pub fn initial_purity(&self) -> f64 {
        self.records[0].purity
    }

    /// max |F − C| over records.
    pub fn max_fidelity_gap(&self) -> f64 {
        self.records
            .iter()
            .map(|r| (r.adiabatic_fidelity - r.thermal_overlap).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_purity_drift(&self) -> f64 {
        let p0 = self.initial_purity();
        self.records
            .iter()
            .map(|r| (r.purity - p0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_trace_drift(&self) -> f64 {
        self.records.iter().map(|r| r.trace_defect).fold(0.0, f64::max)
    }

    pub fn max_hermiticity_defect(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.hermiticity_defect)
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    pub initial_dlambda: f64,
    pub fidelity_tol: f64,
    pub max_halvings: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            initial_dlambda: 1e-3,
            fidelity_tol: 1e-8,
            max_halvings: 12,
        }
    }
}

/// exp(−i Ĥ dt) from one eigendecomposition; real Hamiltonians keep the
/// products in real arithmetic.
fn step_unitary(m: MatRef<'_, c64>, real: bool, dt: f64) -> Result<Mat<c64>> {
    let d = m.nrows();
    if real {
        let re = Mat::from_fn(d, d, |i, j| m[(i, j)].re);
        let (e, q) = eigh_real(re.as_ref())?;
        let (sin, cos): (Vec<f64>, Vec<f64>) = e.iter().map(|&x| (x * dt).sin_cos()).unzip();
        let qc = Mat::from_fn(d, d, |i, k| q[(i, k)] * cos[k]);
        let qs = Mat::from_fn(d, d, |i, k| q[(i, k)] * sin[k]);
        let ur = &qc * q.transpose();
        let ui = &qs * q.transpose();
        return Ok(Mat::from_fn(d, d, |i, j| c64::new(ur[(i, j)], -ui[(i, j)])));
    }
    let spec = eigh_matrix(m)?;
    let q = &spec.eigenvectors;
    let phases: Vec<c64> = spec
        .eigenvalues
        .iter()
        .map(|&x| {
            let (s, c) = (-x * dt).sin_cos();
            c64::new(c, s)
        })
        .collect();
    let phased = Mat::from_fn(d, d, |i, k| q[(i, k)] * phases[k]);
    Ok(&phased * q.adjoint())
}

/// Normalized Hadamard transform on every site. Real, symmetric and its own inverse.
fn hadamard_frame(n_sites: usize) -> Mat<c64> {
    let d = 1usize << n_sites;
    let amp = (d as f64).sqrt().recip();
    Mat::from_fn(d, d, |a, b| {
        let sign = if (a & b).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        c64::new(sign * amp, 0.0)
    })
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Basis index sets that no operator in `mats` connects.
fn components(mats: &[MatRef<'_, c64>]) -> Vec<Vec<usize>> {
    let d = mats[0].nrows();
    let mut parent: Vec<usize> = (0..d).collect();
    for m in mats {
        let tol = 1e-13 * m.norm_max().max(f64::MIN_POSITIVE);
        for j in 0..d {
            for i in 0..j {
                if m[(i, j)].norm() > tol || m[(j, i)].norm() > tol {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; d];
    for i in 0..d {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[r]].push(i);
    }
    blocks
}

fn sub_block(m: MatRef<'_, c64>, idx: &[usize]) -> Mat<c64> {
    Mat::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Ĥ₀, V̂ and ρ₀ split into decoupled sectors, found either in the
/// computational basis or after a Hadamard rotation of every site. Parity
/// symmetric chains split in two, which cuts the cost of each step about
/// fourfold.
struct Sectors {
    frame: Option<Mat<c64>>,
    blocks: Vec<Vec<usize>>,
    h0: Vec<Mat<c64>>,
    v: Vec<Mat<c64>>,
    rho0: Vec<Mat<c64>>,
    real: bool,
}

impl Sectors {
    fn new(ops: &ModelOperators, rho0: &DensityMatrix) -> Self {
        let plain = [ops.h0.matrix(), ops.v.matrix(), rho0.matrix()];
        let mut frame = None;
        let mut blocks = components(&plain);
        let mut rotated = None;
        if blocks.len() == 1 {
            let w = hadamard_frame(ops.model.n_sites());
            let rot = plain.map(|m| &w * m * &w);
            let b = components(&[rot[0].as_ref(), rot[1].as_ref(), rot[2].as_ref()]);
            if b.len() > 1 {
                blocks = b;
                frame = Some(w);
                rotated = Some(rot);
            }
        }
        let pick = |k: usize, idx: &[usize]| match &rotated {
            Some(rot) => sub_block(rot[k].as_ref(), idx),
            None => sub_block(plain[k], idx),
        };
        let h0: Vec<Mat<c64>> = blocks.iter().map(|b| pick(0, b)).collect();
        let v: Vec<Mat<c64>> = blocks.iter().map(|b| pick(1, b)).collect();
        let rho0 = blocks.iter().map(|b| pick(2, b)).collect();
        let real = h0.iter().chain(&v).all(|m| is_real_matrix(m.as_ref()));
        log::debug!("evolve: {} sectors, rotated frame {}", blocks.len(), frame.is_some());
        Self {
            frame,
            blocks,
            h0,
            v,
            rho0,
            real,
        }
    }

    fn step(&self, rho: &mut [Mat<c64>], lambda: f64, dt: f64) -> Result<()> {
        for (k, r) in rho.iter_mut().enumerate() {
            let h = &self.h0[k] + faer::Scale(c64::new(lambda, 0.0)) * &self.v[k];
            let u = step_unitary(h.as_ref(), self.real, dt)?;
            let ur = &u * &*r;
            *r = &ur * u.adjoint();
        }
        Ok(())
    }

    /// The full density matrix in the computational basis.
    fn assemble(&self, rho: &[Mat<c64>], d: usize) -> Mat<c64> {
        let mut full = Mat::<c64>::zeros(d, d);
        for (idx, r) in self.blocks.iter().zip(rho) {
            for (j, &bj) in idx.iter().enumerate() {
                for (i, &bi) in idx.iter().enumerate() {
                    full[(bi, bj)] = r[(i, j)];
                }
            }
        }
        match &self.frame {
            Some(w) => w * &full * w,
            None => full,
        }
    }
}

fn record_lambdas(lambda_max: f64, n_records: usize) -> Vec<f64> {
    if lambda_max == 0.0 {
        return vec![0.0];
    }
    (0..n_records)
        .map(|k| {
            if k + 1 == n_records {
                lambda_max
            } else {
                lambda_max * k as f64 / (n_records - 1) as f64
            }
        })
        .collect()
}

/// Quasi-Gibbs targets on the record grid from one continuation pass.
struct Targets {
    sigma: Vec<DensityMatrix>,
    overlap: Vec<f64>,
    warnings: Vec<ContinuationWarning>,
}

fn targets(
    model: &SpinChainModel,
    rho0: &DensityMatrix,
    beta: f64,
    lambdas: &[f64],
    substeps: usize,
) -> Result<Targets> {
    let mut cont = EigenbasisContinuation::start(model)?;
    let mut sigma = Vec::with_capacity(lambdas.len());
    let mut overlap = Vec::with_capacity(lambdas.len());
    for (idx, &lam) in lambdas.iter().enumerate() {
        if idx > 0 {
            cont.advance(lam, substeps)?;
        }
        let s = cont.quasi_gibbs(beta)?;
        overlap.push(hs_fidelity(rho0, &s)?);
        sigma.push(s);
    }
    Ok(Targets {
        sigma,
        overlap,
        warnings: cont.warnings().to_vec(),
    })
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    sectors: &Sectors,
    rho0: &DensityMatrix,
    gamma: f64,
    dv: f64,
    lambdas: &[f64],
    targets: &Targets,
    substeps: usize,
) -> Result<Vec<TraceRecord>> {
    let d = rho0.dim();
    let mut rho = sectors.rho0.clone();
    let mut records = Vec::with_capacity(lambdas.len());
    let mut prev = 0.0;
    for (idx, &lam) in lambdas.iter().enumerate() {
        if idx > 0 {
            let dl = (lam - prev) / substeps as f64;
            for s in 0..substeps {
                let mid = prev + (s as f64 + 0.5) * dl;
                sectors.step(&mut rho, mid, dl / gamma)?;
            }
        }
        prev = lam;
        // ρ is deliberately not re-symmetrized so the defects below are honest.
        let state = DensityMatrix::from_matrix_unchecked(sectors.assemble(&rho, d));
        let c = targets.overlap[idx];
        let r = qsl_radius_constant_rate(dv, lam, gamma)?;
        records.push(TraceRecord {
            lambda: lam,
            adiabatic_fidelity: hs_fidelity(&targets.sigma[idx], &state)?,
            thermal_overlap: c,
            qsl_radius: r.value,
            hs_angle: hs_angle(rho0, &state)?,
            bound_weak: bound_weak(&r),
            bound_strong: bound_strong(&r, c)?,
            purity: state.purity(),
            trace_defect: (state.trace() - 1.0).abs(),
            hermiticity_defect: state.hermiticity_defect(),
        });
    }
    Ok(records)
}

/// Evolves the Gibbs state of Ĥ₀ under Ĥ_{Γt} with exactly unitary
/// midpoint-exponential steps, recording F, C, R, Θ and both bounds at
/// `n_records` equally spaced λ in [0, λ_max].
pub fn evolve(
    model: &SpinChainModel,
    beta: f64,
    gamma: f64,
    lambda_max: f64,
    n_records: usize,
) -> Result<BoundTrace> {
    evolve_with(model, beta, gamma, lambda_max, n_records, EvolveOptions::default())
}

pub fn evolve_with(
    model: &SpinChainModel,
    beta: f64,
    gamma: f64,
    lambda_max: f64,
    n_records: usize,
    opts: EvolveOptions,
) -> Result<BoundTrace> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::NonPositiveRate { rate: gamma, lambda: 0.0 });
    }
    if !(lambda_max >= 0.0 && lambda_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda_max must be finite and non-negative, got {lambda_max}"
        )));
    }
    if lambda_max > 0.0 && n_records < 2 {
        return Err(Error::InvalidParameter(
            "at least two records are needed for a non-trivial ramp".into(),
        ));
    }
    let ops = ModelOperators::new(model);
    let rho0 = gibbs_state(&eigh(&ops.h0)?, beta)?;
    let dv = delta_v(&rho0, &ops.v)?;
    let lambdas = record_lambdas(lambda_max, n_records);
    let intervals = lambdas.len().saturating_sub(1).max(1);
    let spacing = lambda_max / intervals as f64;
    let cont_sub = default_continuation_steps(lambda_max).div_ceil(intervals);

    let targets = targets(model, &rho0, beta, &lambdas, cont_sub)?;
    let warnings = targets.warnings.clone();
    let mut substeps = ((spacing / opts.initial_dlambda).ceil() as usize).max(1);
    let sectors = Sectors::new(&ops, &rho0);
    let run = |substeps| sweep(&sectors, &rho0, gamma, dv, &lambdas, &targets, substeps);
    let mut current = run(substeps)?;
    if lambda_max == 0.0 {
        return Ok(BoundTrace {
            beta,
            gamma,
            lambda_max,
            delta_v: dv,
            records: current,
            substeps_per_record: 0,
            halvings: 0,
            final_change: 0.0,
            warnings,
        });
    }
    let final_f = |s: &[TraceRecord]| s.last().map(|r| r.adiabatic_fidelity).unwrap_or(1.0);
    let mut last_change = f64::INFINITY;
    for halving in 1..=opts.max_halvings {
        substeps *= 2;
        let next = run(substeps)?;
        last_change = (final_f(&next) - final_f(&current)).abs();
        current = next;
        log::debug!(
            "evolve: {substeps} substeps per record, final fidelity change {last_change:e}"
        );
        if last_change < opts.fidelity_tol {
            return Ok(BoundTrace {
                beta,
                gamma,
                lambda_max,
                delta_v: dv,
                records: current,
                substeps_per_record: substeps,
                halvings: halving,
                final_change: last_change,
                warnings,
            });
        }
    }
    Err(Error::IntegratorNonConvergence {
        halvings: opts.max_halvings,
        last_change,
        step: spacing / substeps as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "lambda", rename_all = "lowercase")]
pub enum MeanFreePath {
    /// F first drops below e⁻¹ at this λ (linearly interpolated).
    Crossed(f64),
    /// F stays at or above e⁻¹ up to λ_max.
    Censored(f64),
}

impl MeanFreePath {
    pub fn lambda(&self) -> f64 {
        match *self {
            MeanFreePath::Crossed(l) | MeanFreePath::Censored(l) => l,
        }
    }
}

/// Largest λ* with F(λ) ≥ e⁻¹ on every record up to λ*.
pub fn adiabatic_mean_free_path(trace: &BoundTrace) -> MeanFreePath {
    let threshold = (-1.0f64).exp();
    let recs = &trace.records;
    for k in 1..recs.len() {
        let (a, b) = (&recs[k - 1], &recs[k]);
        if b.adiabatic_fidelity < threshold {
            let frac = (a.adiabatic_fidelity - threshold) / (a.adiabatic_fidelity - b.adiabatic_fidelity);
            return MeanFreePath::Crossed(a.lambda + frac * (b.lambda - a.lambda));
        }
    }
    MeanFreePath::Censored(recs.last().map(|r| r.lambda).unwrap_or(0.0))
}
