use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use thermoqsl::closed_form::{
    chi_f_mfic_closed, chi_f_tfic_closed, delta_v_mfic_closed, delta_v_tfic_closed, f_mfic,
    f_n_tfic, f_tfic_thermodynamic, SystemSize,
};
use thermoqsl::dynamics::{adiabatic_mean_free_path, evolve, BoundTrace, MeanFreePath};
use thermoqsl::operator::eigh;
use thermoqsl::susceptibility::{ThresholdContext, ThresholdStatus};
use thermoqsl::verify::{self, CriterionResult, VerifyOptions};
use thermoqsl::{ModelKind, ModelOperators, SpinChainModel};

use crate::config::{Format, RunConfig};
use crate::output::{emit, metadata, render, Cell, Table};

pub const SPECTRUM_COLUMNS: [&str; 3] = ["lambda", "index", "energy"];

pub const THRESHOLD_COLUMNS: [&str; 13] = [
    "beta",
    "delta_v_ed",
    "delta_v_closed",
    "chi_f_ed",
    "chi_f_closed",
    "gamma_th",
    "gamma_n",
    "f_n_ed",
    "f_n_closed",
    "f_inf",
    "rel_err_delta_v",
    "rel_err_chi_f",
    "reason",
];

pub const DYNAMICS_COLUMNS: [&str; 8] = [
    "lambda",
    "F",
    "C",
    "R",
    "theta",
    "bound_weak",
    "bound_strong",
    "purity",
];

pub fn spectrum(cfg: &RunConfig) -> Result<String> {
    let model = cfg.model()?;
    let ops = ModelOperators::new(&model);
    let mut lambdas = vec![0.0];
    lambdas.extend(cfg.lambda.points().iter().copied().filter(|&l| l != 0.0));
    let spectra: Vec<Vec<f64>> = lambdas
        .par_iter()
        .map(|&l| eigh(&ops.at(l)).map(|s| s.eigenvalues))
        .collect::<thermoqsl::Result<_>>()?;
    let mut t = Table::new(&SPECTRUM_COLUMNS);
    for (&l, energies) in lambdas.iter().zip(&spectra) {
        for (k, &e) in energies.iter().enumerate() {
            t.push(vec![Cell::Num(l), Cell::Int(k), Cell::Num(e)]);
        }
    }
    Ok(render(&t, &metadata("spectrum", &cfg.echo(), &[]), cfg.format))
}

struct ClosedForms {
    delta_v: f64,
    chi_f: f64,
    f_n: Option<f64>,
}

fn closed_forms(model: &SpinChainModel, beta: f64) -> Result<ClosedForms, String> {
    let n = model.n_sites();
    if n < 3 {
        return Err("closed forms need N >= 3".into());
    }
    let j = model.coupling();
    match model.kind() {
        ModelKind::Tfic | ModelKind::Qxyc => Ok(ClosedForms {
            delta_v: delta_v_tfic_closed(n, beta, j),
            chi_f: chi_f_tfic_closed(n, beta, j),
            f_n: (beta > 0.0).then(|| f_n_tfic(n, beta, j).ok()).flatten(),
        }),
        ModelKind::Mfic => {
            let b = model.field();
            let run = || -> thermoqsl::Result<ClosedForms> {
                Ok(ClosedForms {
                    delta_v: delta_v_mfic_closed(n, beta, j, b)?,
                    chi_f: chi_f_mfic_closed(n, beta, j, b)?,
                    f_n: if beta > 0.0 {
                        Some(f_mfic(SystemSize::Finite(n), beta, j, b)?)
                    } else {
                        None
                    },
                })
            };
            run().map_err(|e| e.to_string())
        }
    }
}

fn f_inf(model: &SpinChainModel, beta: f64) -> Option<f64> {
    if beta <= 0.0 {
        return None;
    }
    match model.kind() {
        ModelKind::Tfic | ModelKind::Qxyc => f_tfic_thermodynamic(beta, model.coupling()).ok(),
        ModelKind::Mfic => {
            f_mfic(SystemSize::Thermodynamic, beta, model.coupling(), model.field()).ok()
        }
    }
}

fn rel_err(ed: f64, closed: f64) -> f64 {
    if ed == closed {
        0.0
    } else {
        (ed / closed - 1.0).abs()
    }
}

pub fn threshold(cfg: &RunConfig) -> Result<String> {
    let model = cfg.model()?;
    cfg.validate_grids()?;
    let ctx = ThresholdContext::new(&model).map_err(|e| anyhow!("{e}"))?;
    let rows: Vec<Vec<Cell>> = cfg
        .beta
        .points()
        .par_iter()
        .map(|&beta| -> Result<Vec<Cell>> {
            let r = ctx
                .report(beta, cfg.alpha)
                .with_context(|| format!("threshold at beta = {beta}"))?;
            let mut reasons = Vec::new();
            if r.status == ThresholdStatus::UndefinedAtInfiniteTemperature {
                reasons.push("undefined at infinite temperature".to_string());
            }
            let closed = closed_forms(&model, beta).map_err(|e| reasons.push(e)).ok();
            let (dvc, chic, fnc) = match &closed {
                Some(c) => (Some(c.delta_v), Some(c.chi_f), c.f_n),
                None => (None, None, None),
            };
            Ok(vec![
                Cell::Num(beta),
                Cell::Num(r.delta_v),
                dvc.into(),
                Cell::Num(r.chi_f),
                chic.into(),
                r.gamma_th.into(),
                Cell::Num(r.gamma_n),
                r.f_n.into(),
                fnc.into(),
                f_inf(&model, beta).into(),
                dvc.map(|c| rel_err(r.delta_v, c)).into(),
                chic.map(|c| rel_err(r.chi_f, c)).into(),
                Cell::Text(reasons.join("; ")),
            ])
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(&THRESHOLD_COLUMNS);
    for row in rows {
        t.push(row);
    }
    let extra = [format!(
        "zero-temperature references: delta_v0 = {:.16e}, chi_f0 = {:.16e}",
        ctx.delta_v_zero, ctx.chi_f_zero
    )];
    Ok(render(&t, &metadata("threshold", &cfg.echo(), &extra), cfg.format))
}

fn trace_table(trace: &BoundTrace) -> Table {
    let mut t = Table::new(&DYNAMICS_COLUMNS);
    for r in &trace.records {
        t.push(vec![
            r.lambda.into(),
            r.adiabatic_fidelity.into(),
            r.thermal_overlap.into(),
            r.qsl_radius.into(),
            r.hs_angle.into(),
            r.bound_weak.into(),
            r.bound_strong.into(),
            r.purity.into(),
        ]);
    }
    t
}

fn trace_metadata(trace: &BoundTrace) -> Vec<String> {
    let mfp = match adiabatic_mean_free_path(trace) {
        MeanFreePath::Crossed(l) => format!("adiabatic mean free path: {l:.16e}"),
        MeanFreePath::Censored(l) => format!("adiabatic mean free path: censored at {l:.16e}"),
    };
    vec![
        format!("trajectory: beta = {}, gamma = {}", trace.beta, trace.gamma),
        format!("delta_v = {:.16e}", trace.delta_v),
        mfp,
        format!("max |F - C| = {:.16e}", trace.max_fidelity_gap()),
        format!(
            "step control: {} steps per record after {} halvings, final change {:e}",
            trace.substeps_per_record, trace.halvings, trace.final_change
        ),
        format!("continuation warnings: {}", trace.warnings.len()),
    ]
}

/// `out.csv` becomes `out_beta0.5_gamma2.csv` for one point of a grid.
pub fn point_path(base: &Path, beta: f64, gamma: f64, format: Format) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dynamics".into());
    let ext = base
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| format.to_string());
    base.with_file_name(format!("{stem}_beta{beta}_gamma{gamma}.{ext}"))
}

/// Returns (path, contents) pairs; a single point keeps the configured path.
pub fn dynamics(cfg: &RunConfig) -> Result<Vec<(Option<PathBuf>, String)>> {
    let model = cfg.model()?;
    cfg.validate_grids()?;
    let points: Vec<(f64, f64)> = cfg
        .beta
        .points()
        .iter()
        .flat_map(|&b| cfg.gamma.points().iter().map(move |&g| (b, g)))
        .collect();
    if points.len() > 1 && cfg.out.is_none() {
        return Err(anyhow!("a beta/gamma grid needs --out for its per-point files"));
    }
    let traces: Vec<BoundTrace> = points
        .par_iter()
        .map(|&(beta, gamma)| {
            evolve(&model, beta, gamma, cfg.lambda_max, cfg.n_records)
                .with_context(|| format!("evolution at beta = {beta}, gamma = {gamma}"))
        })
        .collect::<Result<_>>()?;
    let echo = cfg.echo();
    Ok(points
        .iter()
        .zip(&traces)
        .map(|(&(beta, gamma), trace)| {
            let path = match (&cfg.out, points.len()) {
                (Some(p), 1) => Some(p.clone()),
                (Some(p), _) => Some(point_path(p, beta, gamma, cfg.format)),
                (None, _) => None,
            };
            let body = render(
                &trace_table(trace),
                &metadata("dynamics", &echo, &trace_metadata(trace)),
                cfg.format,
            );
            (path, body)
        })
        .collect())
}

pub struct VerifyOutcome {
    pub results: Vec<CriterionResult>,
    pub report: String,
}

impl VerifyOutcome {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }
}

pub fn verify(cfg: &RunConfig) -> Result<VerifyOutcome> {
    // The suite has fixed parameters, but a configured model must still be valid.
    cfg.model()?;
    for id in &cfg.verify_only {
        if !verify::CRITERION_IDS.contains(&id.as_str()) {
            return Err(anyhow!("unknown criterion {id:?}"));
        }
    }
    let opts = VerifyOptions {
        only: cfg.verify_only.clone(),
        dynamics_n_sites: cfg.verify_dynamics_n_sites,
    };
    let results = verify::run(&opts);
    let doc = serde_json::json!({
        "tool": format!("thermoqsl {}", env!("CARGO_PKG_VERSION")),
        "passed": results.iter().all(|r| r.passed),
        "criteria": results,
    });
    let mut report = serde_json::to_string_pretty(&doc)?;
    report.push('\n');
    Ok(VerifyOutcome { results, report })
}

pub fn write_all(outputs: &[(Option<PathBuf>, String)]) -> Result<()> {
    for (path, body) in outputs {
        emit(path.as_deref(), body)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lines: &str) -> RunConfig {
        let mut c = RunConfig::default();
        c.apply_text(lines).unwrap();
        c
    }

    fn rows(csv: &str) -> Vec<Vec<String>> {
        csv.lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect()
    }

    #[test]
    fn tfic_three_site_spectrum() {
        let out = spectrum(&cfg("model.n_sites = 3")).unwrap();
        let e: Vec<f64> = rows(&out).iter().map(|r| r[2].parse().unwrap()).collect();
        assert_eq!(e, [-3.0, -3.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn mfic_two_site_spectrum() {
        // Doubled bond: E = −2J s₁s₂ + B(s₁ + s₂) at B = J.
        let out = spectrum(&cfg("model.kind = mfic\nmodel.n_sites = 2\nmodel.B = 1")).unwrap();
        let e: Vec<f64> = rows(&out).iter().map(|r| r[2].parse().unwrap()).collect();
        assert_eq!(e, [-4.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn spectrum_with_lambdas() {
        let out = spectrum(&cfg("model.n_sites = 3\nsweep.lambda = 0, 0.5")).unwrap();
        let r = rows(&out);
        assert_eq!(r.len(), 16);
        assert_eq!(r[8][0].parse::<f64>().unwrap(), 0.5);
    }

    #[test]
    fn threshold_rows() {
        let out = threshold(&cfg("model.n_sites = 6\nsweep.beta = 0, 1")).unwrap();
        let r = rows(&out);
        assert_eq!(r[0][12], "undefined at infinite temperature");
        assert!(r[0][5].is_empty() && r[0][7].is_empty());
        let err_dv: f64 = r[1][10].parse().unwrap();
        let err_chi: f64 = r[1][11].parse().unwrap();
        assert!(err_dv <= 1e-9 && err_chi <= 1e-9);
        let f_inf: f64 = r[1][9].parse().unwrap();
        assert_eq!(f_inf, 1.0 / 2f64.tanh());
        assert!(r[1][12].is_empty());
    }

    #[test]
    fn threshold_excluded_field_has_reason() {
        let out = threshold(&cfg("model.kind = mfic\nmodel.n_sites = 4\nmodel.B = 2")).unwrap();
        let r = rows(&out);
        assert!(r[0][2].is_empty() && r[0][4].is_empty());
        assert!(r[0][12].contains("B != 0"), "{}", r[0][12]);
        assert!(!r[0][1].is_empty());
    }

    #[test]
    fn dynamics_infinite_temperature() {
        let out = dynamics(&cfg(
            "model.n_sites = 3\nsweep.beta = 0\nsweep.lambda_max = 0.05\nsweep.n_records = 6",
        ))
        .unwrap();
        assert_eq!(out.len(), 1);
        for r in rows(&out[0].1) {
            assert!((r[1].parse::<f64>().unwrap() - 1.0).abs() < 1e-14);
            assert!((r[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn dynamics_grid_needs_out() {
        let c = cfg("model.n_sites = 3\nsweep.gamma = 1, 2\nsweep.lambda_max = 0.02\nsweep.n_records = 3");
        assert!(dynamics(&c).is_err());
    }

    #[test]
    fn point_paths() {
        let p = point_path(Path::new("/tmp/run/out.csv"), 0.5, 2.0, Format::Csv);
        assert_eq!(p, Path::new("/tmp/run/out_beta0.5_gamma2.csv"));
        let p = point_path(Path::new("traj"), 1.0, 1.0, Format::Json);
        assert_eq!(p, Path::new("traj_beta1_gamma1.json"));
    }

    #[test]
    fn verify_rejects_bad_model_and_ids() {
        let mut c = RunConfig::default();
        c.set("model.J", "-1").unwrap();
        let err = verify(&c).err().unwrap().to_string();
        assert!(err.contains("invalid model"), "{err}");
        let c = cfg("verify.only = AC-99");
        assert!(verify(&c).is_err());
    }
}
