//! Acceptance criteria as runnable checks, shared by the `acceptance`
//! integration test and the `verify` command.

use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use serde::Serialize;

use crate::closed_form::{
    chi_f_mfic_closed, chi_f_tfic_closed, delta_v_mfic_closed, delta_v_tfic_closed, f_mfic,
    f_n_tfic, f_n_tfic_excess, f_tfic_thermodynamic, mfic_asymptotic_constants, SystemSize,
};
use crate::dynamics::{evolve, BoundTrace};
use crate::error::Result;
use crate::models::{ModelKind, ModelOperators, SpinChainModel};
use crate::operator::{commutator_hs_norm, eigh, SpectralDecomposition};
use crate::qsl::delta_v;
use crate::susceptibility::{chi_f_thermal, low_temp_coefficients, off_diagonal_weight};
use crate::thermal::{continued_eigenbasis, escort_state, gibbs_state, quasi_gibbs};

pub const CRITERION_IDS: [&str; 13] = [
    "AC-1", "AC-2", "AC-3", "AC-4", "AC-5", "AC-6", "AC-7", "AC-8", "AC-9", "AC-10", "AC-11",
    "AC-12", "AC-13",
];

#[derive(Clone, Debug, Serialize)]
pub struct CaseResult {
    pub label: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: String,
    pub title: String,
    pub passed: bool,
    /// Largest measured/tolerance ratio over all cases.
    pub worst_ratio: f64,
    pub cases: Vec<CaseResult>,
    pub runtime_s: f64,
    pub runtime_limit_s: Option<f64>,
    /// Set when a case could not be evaluated at all.
    pub error: Option<String>,
}

impl CriterionResult {
    pub fn summary_line(&self) -> String {
        let worst = self
            .cases
            .iter()
            .filter(|c| c.tolerance > 0.0)
            .max_by(|a, b| (a.measured / a.tolerance).total_cmp(&(b.measured / b.tolerance)));
        let detail = match (&self.error, worst) {
            (Some(e), _) => format!("error: {e}"),
            (None, Some(c)) => format!(
                "worst {} measured {:.3e} tol {:.3e}",
                c.label, c.measured, c.tolerance
            ),
            (None, None) if self.cases.is_empty() => "no cases".to_string(),
            (None, None) => format!(
                "{} of {} conditions hold",
                self.cases.iter().filter(|c| c.passed).count(),
                self.cases.len()
            ),
        };
        let limit = self
            .runtime_limit_s
            .map(|l| format!(" (limit {l:.0} s)"))
            .unwrap_or_default();
        format!(
            "{} {}: {} | {} | {:.1} s{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            detail,
            self.runtime_s,
            limit
        )
    }
}

/// Accumulates measured-versus-tolerance cases for one criterion.
struct Checker {
    id: &'static str,
    title: &'static str,
    cases: Vec<CaseResult>,
    start: Instant,
    limit: Option<f64>,
}

impl Checker {
    fn new(id: &'static str, title: &'static str) -> Self {
        Self {
            id,
            title,
            cases: Vec::new(),
            start: Instant::now(),
            limit: None,
        }
    }

    fn with_limit(mut self, seconds: f64) -> Self {
        self.limit = Some(seconds);
        self
    }

    fn with_start(mut self, start: Instant) -> Self {
        self.start = start;
        self
    }

    /// Passes when measured ≤ tolerance; NaN fails.
    fn le(&mut self, label: impl Into<String>, measured: f64, tolerance: f64) {
        self.cases.push(CaseResult {
            label: label.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
        });
    }

    /// A boolean condition recorded with its witness value.
    fn holds(&mut self, label: impl Into<String>, ok: bool, witness: f64) {
        self.cases.push(CaseResult {
            label: label.into(),
            measured: witness,
            tolerance: 0.0,
            passed: ok,
        });
    }

    fn finish(self, outcome: Result<()>) -> CriterionResult {
        let runtime_s = self.start.elapsed().as_secs_f64();
        let error = outcome.err().map(|e| e.to_string());
        let in_time = self.limit.map_or(true, |l| runtime_s < l);
        let worst_ratio = self
            .cases
            .iter()
            .map(|c| {
                if c.tolerance > 0.0 {
                    c.measured / c.tolerance
                } else if c.passed {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max);
        let passed =
            error.is_none() && in_time && !self.cases.is_empty() && self.cases.iter().all(|c| c.passed);
        CriterionResult {
            id: self.id.to_string(),
            title: self.title.to_string(),
            passed,
            worst_ratio,
            cases: self.cases,
            runtime_s,
            runtime_limit_s: self.limit,
            error,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

struct Ed {
    ops: ModelOperators,
    spec: SpectralDecomposition,
}

impl Ed {
    fn new(model: &SpinChainModel) -> Result<Self> {
        let ops = ModelOperators::new(model);
        let spec = eigh(&ops.h0)?;
        Ok(Self { ops, spec })
    }

    fn delta_v(&self, beta: f64) -> Result<f64> {
        delta_v(&gibbs_state(&self.spec, beta)?, &self.ops.v)
    }

    fn chi_f(&self, beta: f64) -> Result<f64> {
        chi_f_thermal(&self.spec, &self.ops.v, beta)
    }
}

const TFIC_SIZES: [usize; 4] = [3, 4, 6, 8];
const TFIC_BETAS: [f64; 4] = [0.1, 0.3, 1.0, 3.0];
const MFIC_FIELDS: [f64; 3] = [0.3, 0.7, 1.3];

pub fn criterion_1() -> CriterionResult {
    let mut c = Checker::new("AC-1", "ED vs closed-form delta_v and chi_F (TFIC)").with_limit(30.0);
    let outcome = (|| {
        for n in TFIC_SIZES {
            let ed = Ed::new(&SpinChainModel::tfic(n, 1.0)?)?;
            for beta in TFIC_BETAS {
                c.le(
                    format!("N={n} beta={beta} delta_v"),
                    rel(ed.delta_v(beta)?, delta_v_tfic_closed(n, beta, 1.0)),
                    1e-9,
                );
                c.le(
                    format!("N={n} beta={beta} chi_F"),
                    rel(ed.chi_f(beta)?, chi_f_tfic_closed(n, beta, 1.0)),
                    1e-8,
                );
            }
        }
        Ok(())
    })();
    c.finish(outcome)
}

pub fn criterion_2() -> CriterionResult {
    let mut c = Checker::new("AC-2", "QXYC and TFIC share delta_v and chi_F");
    let outcome = (|| {
        for n in TFIC_SIZES {
            let t = Ed::new(&SpinChainModel::tfic(n, 1.0)?)?;
            let q = Ed::new(&SpinChainModel::qxyc(n, 1.0)?)?;
            for beta in TFIC_BETAS {
                c.le(
                    format!("N={n} beta={beta} delta_v"),
                    rel(q.delta_v(beta)?, t.delta_v(beta)?),
                    1e-9,
                );
                c.le(
                    format!("N={n} beta={beta} chi_F"),
                    rel(q.chi_f(beta)?, t.chi_f(beta)?),
                    1e-9,
                );
            }
        }
        Ok(())
    })();
    c.finish(outcome)
}

pub fn criterion_3() -> CriterionResult {
    let mut c = Checker::new("AC-3", "ED vs closed-form delta_v and chi_F (MFIC)").with_limit(60.0);
    let outcome = (|| {
        for n in [3usize, 4, 6] {
            for b in MFIC_FIELDS {
                let ed = Ed::new(&SpinChainModel::mfic(n, 1.0, b)?)?;
                for beta in [0.2, 1.0, 3.0] {
                    c.le(
                        format!("N={n} B={b} beta={beta} delta_v"),
                        rel(ed.delta_v(beta)?, delta_v_mfic_closed(n, beta, 1.0, b)?),
                        1e-8,
                    );
                    c.le(
                        format!("N={n} B={b} beta={beta} chi_F"),
                        rel(ed.chi_f(beta)?, chi_f_mfic_closed(n, beta, 1.0, b)?),
                        1e-8,
                    );
                }
            }
        }
        Ok(())
    })();
    c.finish(outcome)
}

pub fn criterion_4() -> CriterionResult {
    let mut c = Checker::new("AC-4", "f_N(N=64) approaches coth(2 beta J)");
    let outcome = (|| {
        for beta in [0.5, 1.0, 2.0] {
            let t = (2.0f64 * beta).tanh();
            c.le(
                format!("beta={beta}"),
                (f_n_tfic(64, beta, 1.0)? - 1.0 / t).abs(),
                2.0 * t.powi(62),
            );
        }
        Ok(())
    })();
    c.finish(outcome)
}

pub fn criterion_5() -> CriterionResult {
    let mut c = Checker::new("AC-5", "low- and high-temperature asymptotics of f");
    let outcome = (|| {
        for beta in [1.5, 2.0, 3.0] {
            let y = (-4.0f64 * beta).exp();
            c.le(
                format!("TFIC low-T beta={beta}"),
                (f_tfic_thermodynamic(beta, 1.0)? - (1.0 + 2.0 * y)).abs(),
                3.0 * y * y,
            );
        }
        for beta in [0.01, 0.05] {
            c.le(
                format!("TFIC high-T beta={beta}"),
                (f_tfic_thermodynamic(beta, 1.0)? - 1.0 / (2.0 * beta)).abs(),
                beta,
            );
        }
        let b = 0.7;
        let gap = 2.0 * (2.0 + b);
        for beta in [2.0, 3.0] {
            let f = f_mfic(SystemSize::Thermodynamic, beta, 1.0, b)?;
            c.le(
                format!("MFIC low-T beta={beta}"),
                (f - (1.0 + (-beta * gap).exp())).abs(),
                // Ten times the 5e^{−2βΔ} next-order envelope.
                50.0 * (-2.0 * beta * gap).exp(),
            );
        }
        let beta = 0.01;
        let c2 = mfic_asymptotic_constants(1.0, b).c2;
        c.le(
            format!("MFIC high-T beta={beta}"),
            rel(f_mfic(SystemSize::Thermodynamic, beta, 1.0, b)?, c2 / beta),
            0.05,
        );
        Ok(())
    })();
    c.finish(outcome)
}

/// The criterion-6 trajectories: TFIC N=8, βJ ∈ {0.5, 5}, Γ/J ∈ {0.5, 2},
/// λ ∈ [0, 0.2] with 200 records.
pub struct FidelityTraces {
    pub traces: Vec<(String, BoundTrace)>,
    pub start: Instant,
    pub outcome: Result<()>,
}

pub fn fidelity_traces(n_sites: usize) -> FidelityTraces {
    let start = Instant::now();
    let mut traces = Vec::new();
    let outcome = (|| {
        let m = SpinChainModel::tfic(n_sites, 1.0)?;
        for beta in [0.5, 5.0] {
            for gamma in [0.5, 2.0] {
                let t = evolve(&m, beta, gamma, 0.2, 200)?;
                traces.push((format!("N={n_sites} beta={beta} Gamma={gamma}"), t));
            }
        }
        Ok(())
    })();
    FidelityTraces {
        traces,
        start,
        outcome,
    }
}

fn copy_outcome(o: &Result<()>) -> Result<()> {
    match o {
        Ok(()) => Ok(()),
        Err(e) => Err(e.clone()),
    }
}

pub fn criterion_6(t: &FidelityTraces) -> CriterionResult {
    let mut c = Checker::new("AC-6", "fidelity bounds along TFIC trajectories")
        .with_limit(600.0)
        .with_start(t.start);
    for (label, trace) in &t.traces {
        let mut qsl = f64::NEG_INFINITY;
        let mut strong = f64::NEG_INFINITY;
        let mut nested = f64::NEG_INFINITY;
        for r in &trace.records {
            qsl = qsl.max(r.hs_angle - r.qsl_radius);
            strong = strong.max((r.adiabatic_fidelity - r.thermal_overlap).abs() - r.bound_strong);
            nested = nested.max(r.bound_strong - r.qsl_radius.min(FRAC_PI_2).sin());
        }
        c.le(format!("{label} max(theta - R)"), qsl, 1e-9);
        c.le(format!("{label} max(|F - C| - g)"), strong, 1e-9);
        c.le(format!("{label} max(g - sin R~)"), nested, 1e-9);
    }
    c.finish(copy_outcome(&t.outcome))
}

pub fn criterion_7(t: &FidelityTraces) -> CriterionResult {
    let mut c = Checker::new("AC-7", "purity and trace conservation along trajectories")
        .with_start(t.start);
    for (label, trace) in &t.traces {
        c.le(format!("{label} purity drift"), trace.max_purity_drift(), 1e-9);
        c.le(format!("{label} trace drift"), trace.max_trace_drift(), 1e-9);
    }
    c.finish(copy_outcome(&t.outcome))
}

pub fn criterion_8() -> CriterionResult {
    let mut c = Checker::new("AC-8", "escort of rho0(beta) equals rho0(2 beta)");
    let outcome = (|| {
        for kind in ModelKind::ALL {
            let m = SpinChainModel::new(kind, 6, 1.0, (kind == ModelKind::Mfic).then_some(0.7))?;
            let spec = eigh(&ModelOperators::new(&m).h0)?;
            for beta in [0.3, 1.0, 5.0] {
                let e = escort_state(&gibbs_state(&spec, beta)?)?;
                let want = gibbs_state(&spec, 2.0 * beta)?;
                c.le(format!("{kind} N=6 beta={beta}"), e.hs_distance(&want)?, 1e-12);
            }
        }
        Ok(())
    })();
    c.finish(outcome)
}

pub fn criterion_9() -> CriterionResult {
    let mut c = Checker::new("AC-9", "spectral inequalities 0 <= a <= 2b <= 1/2, 0 < W <= 1 (MFIC)");
    // Slack for rounding in the spectral sums only.
    const EPS: f64 = 1e-12;
    let outcome = (|| {
        for n in [4usize, 6, 8] {
            for b in MFIC_FIELDS {
                let ed = Ed::new(&SpinChainModel::mfic(n, 1.0, b)?)?;
                let k = low_temp_coefficients(&ed.spec, &ed.ops.v)?;
                let tag = format!("N={n} B={b}");
                c.holds(format!("{tag} a >= 0"), k.a >= -EPS, k.a);
                c.holds(format!("{tag} a <= 2b"), k.a <= 2.0 * k.b + EPS, k.a - 2.0 * k.b);
                c.holds(format!("{tag} 2b <= 1/2"), 2.0 * k.b <= 0.5 + EPS, 2.0 * k.b);
                c.holds(format!("{tag} 0 < W <= 1"), k.w > 0.0 && k.w <= 1.0 + EPS, k.w);
                c.holds(format!("{tag} c1 in (0, 2]"), k.c1 > 0.0 && k.c1 <= 2.0 + EPS, k.c1);
            }
        }
        Ok(())
    })();
    c.finish(outcome)
}

pub fn criterion_10() -> CriterionResult {
    let mut c = Checker::new("AC-10", "high-temperature laws for chi_F and delta_v at beta J = 0.01");
    let outcome = (|| {
        let beta = 0.01;
        for kind in ModelKind::ALL {
            let m = SpinChainModel::new(kind, 6, 1.0, (kind == ModelKind::Mfic).then_some(0.7))?;
            let ed = Ed::new(&m)?;
            let d = m.dim() as f64;
            let off = off_diagonal_weight(&ed.spec, &ed.ops.v)?;
            c.le(
                format!("{kind} chi_F"),
                rel(ed.chi_f(beta)?, beta * beta * 2.0 / d * off),
                1e-3,
            );
            let comm = commutator_hs_norm(&ed.ops.h0, &ed.ops.v)?;
            c.le(
                format!("{kind} delta_v"),
                rel(ed.delta_v(beta)?, beta * comm / d.sqrt()),
                1e-3,
            );
        }
        Ok(())
    })();
    c.finish(outcome)
}

pub fn criterion_11() -> CriterionResult {
    let mut c = Checker::new("AC-11", "chi_F equals -2 d^2 ln S by finite difference");
    let outcome = (|| {
        let h = 1e-3;
        for m in [SpinChainModel::tfic(4, 1.0)?, SpinChainModel::mfic(4, 1.0, 0.7)?] {
            let beta = 1.0;
            let ed = Ed::new(&m)?;
            let rho0 = gibbs_state(&ed.spec, beta)?;
            let s = |lam: f64| -> Result<f64> {
                let sigma = quasi_gibbs(&continued_eigenbasis(&m, lam, 50)?, beta)?;
                rho0.overlap(&sigma)
            };
            let fd = -2.0 * (s(h)?.ln() - 2.0 * s(0.0)?.ln() + s(-h)?.ln()) / (h * h);
            c.le(format!("{} N=4 beta={beta}", m.kind()), rel(fd, ed.chi_f(beta)?), 1e-3);
        }
        Ok(())
    })();
    c.finish(outcome)
}

pub fn criterion_12() -> CriterionResult {
    let mut c = Checker::new("AC-12", "zero-temperature reference rates Gamma_N");
    let outcome = (|| {
        let beta = 40.0;
        let alpha = 1.0;
        for n in [4usize, 6] {
            let nf = n as f64;
            for kind in [ModelKind::Tfic, ModelKind::Qxyc] {
                let ed = Ed::new(&SpinChainModel::new(kind, n, 1.0, None)?)?;
                let got = alpha * ed.delta_v(beta)? / ed.chi_f(beta)?;
                let want = 4.0 * 2f64.sqrt() * alpha / nf.sqrt();
                c.le(format!("{kind} N={n}"), rel(got, want), 1e-6);
            }
            for b in MFIC_FIELDS {
                let ed = Ed::new(&SpinChainModel::mfic(n, 1.0, b)?)?;
                let got = alpha * ed.delta_v(beta)? / ed.chi_f(beta)?;
                let want = 2.0 * 2f64.sqrt() * alpha / nf.sqrt() * (2.0 + b).powi(2);
                c.le(format!("mfic N={n} B={b}"), rel(got, want), 1e-6);
            }
        }
        Ok(())
    })();
    c.finish(outcome)
}

pub fn criterion_13() -> CriterionResult {
    let mut c = Checker::new("AC-13", "fixed-N low-temperature series of f_N (TFIC)");
    let outcome = (|| {
        let (n, beta) = (6usize, 3.0);
        let nf = n as f64;
        let y = (-4.0f64 * beta).exp();
        // Compared through f_N − 1 to keep the residual above rounding.
        let residual = (f_n_tfic_excess(n, beta, 1.0)? - (y + (nf - 0.5) * y * y)).abs();
        c.le(
            format!("N={n} beta={beta}"),
            residual,
            10.0 * nf.powi(3) * (-16.0 * beta).exp(),
        );
        Ok(())
    })();
    c.finish(outcome)
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Criterion ids to run; all when empty.
    pub only: Vec<String>,
    /// Chain length for the trajectory criteria (6 and 7).
    pub dynamics_n_sites: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            only: Vec::new(),
            dynamics_n_sites: 8,
        }
    }
}

type Criterion = fn() -> CriterionResult;

/// Runs the selected criteria in id order.
pub fn run(opts: &VerifyOptions) -> Vec<CriterionResult> {
    let wanted = |id: &str| opts.only.is_empty() || opts.only.iter().any(|o| o == id);
    let mut out = Vec::new();
    let singles: [(&str, Criterion); 5] = [
        ("AC-1", criterion_1),
        ("AC-2", criterion_2),
        ("AC-3", criterion_3),
        ("AC-4", criterion_4),
        ("AC-5", criterion_5),
    ];
    for (id, f) in singles {
        if wanted(id) {
            out.push(f());
        }
    }
    if wanted("AC-6") || wanted("AC-7") {
        let traces = fidelity_traces(opts.dynamics_n_sites);
        if wanted("AC-6") {
            out.push(criterion_6(&traces));
        }
        if wanted("AC-7") {
            out.push(criterion_7(&traces));
        }
    }
    let rest: [(&str, Criterion); 6] = [
        ("AC-8", criterion_8),
        ("AC-9", criterion_9),
        ("AC-10", criterion_10),
        ("AC-11", criterion_11),
        ("AC-12", criterion_12),
        ("AC-13", criterion_13),
    ];
    for (id, f) in rest {
        if wanted(id) {
            out.push(f());
        }
    }
    out
}
