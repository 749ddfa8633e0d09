//! Experiment configuration, runners and machine-readable outputs.

pub mod concentration;
pub mod config;
mod grid;
mod output;
mod selftest;

use serde::Serialize;
use serde_json::json;

pub use config::{ExperimentBlock, ExperimentConfig, ExperimentKind, SCHEMA_VERSION};
pub use grid::{adjacent_pairs, midpoint_triples};
pub use output::{emit_outputs, run_document, write_csv, RUN_SCHEMA};
pub use selftest::selftest;

use concentration::{run_concentration, sample_seed, Centering, ConcentrationParams};
use config::{TargetName, TiltSourceName};

use crate::duality::{
    build_tilt_table, legendre_usc, perron_legendre, rate_function, rwre_point_prob_rate, velocity_grid, TiltGrid,
    TiltSource,
};
use crate::entropy::{maximize_variational, total_variation, VariationalOptions};
use crate::environment::{Environment, PotentialSpec};
use crate::error::{Error, Result};
use crate::geometry::{ConvexRep, StepGeometry, Velocity};
use crate::l2::{simulate_w, verify_weak_disorder, AveragedMgf, Direction, GibbsPair};
use crate::transfer::{
    default_extrapolation, estimate_many, perron_free_energy, DpEngine, DpOptions, FiniteModel, Target,
};

/// One named pass/fail check of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    /// Passes when `value <= threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), passed: value <= threshold, value, threshold }
    }

    /// Passes when `value > threshold`.
    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), passed: value > threshold, value, threshold }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Check { name: name.into(), passed: ok, value: ok as u8 as f64, threshold: 1.0 }
    }
}

/// Rows of numbers under declared column names.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(headers: &[&str]) -> Self {
        Table { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    fn with_zeta(dim: usize, rest: &[&str]) -> Self {
        let mut headers: Vec<String> = (0..dim).map(|i| format!("zeta_{i}")).collect();
        headers.extend(rest.iter().map(|h| h.to_string()));
        Table { headers, rows: Vec::new() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutput {
    pub kind: ExperimentKind,
    #[serde(skip)]
    pub table: Option<Table>,
    pub metrics: serde_json::Value,
    pub checks: Vec<Check>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs a config; defaults are resolved first, so the caller may pass the
/// raw config.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let cfg = cfg.resolved()?;
    let (geom, env, spec) = cfg.model()?;
    let ctx = Ctx { cfg: &cfg, geom: &geom, env: &env, spec: &spec };
    match cfg.experiment.kind {
        ExperimentKind::Geometry => Ok(RunOutput {
            kind: ExperimentKind::Geometry,
            table: None,
            metrics: geom.describe(),
            checks: Vec::new(),
        }),
        ExperimentKind::Dp => ctx.dp(),
        ExperimentKind::Duality => ctx.rate_table(true),
        ExperimentKind::Rate => ctx.rate_table(false),
        ExperimentKind::L2 => ctx.l2(),
        ExperimentKind::Entropy => ctx.entropy(),
        ExperimentKind::Concentration => ctx.concentration(),
        ExperimentKind::Continuity => ctx.continuity(),
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    geom: &'a StepGeometry,
    env: &'a Environment,
    spec: &'a PotentialSpec,
}

fn missing(name: &str) -> Error {
    Error::Config(format!("experiment needs `{name}`"))
}

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

impl Ctx<'_> {
    fn block(&self) -> &ExperimentBlock {
        &self.cfg.experiment
    }

    fn schedule(&self) -> Result<&[usize]> {
        self.block().n_schedule.as_deref().ok_or_else(|| missing("n_schedule"))
    }

    fn zeta(&self) -> Result<Velocity> {
        self.block().zeta.as_deref().ok_or_else(|| missing("zeta"))?.parse()
    }

    fn engine(&self) -> Result<DpEngine<'_>> {
        let b = self.block();
        let mut opts = DpOptions { prune: b.prune, ..Default::default() };
        if let Some(budget) = b.budget {
            opts.budget = budget;
        }
        DpEngine::with_options(self.geom, self.env, self.spec, opts)
    }

    fn representation(&self) -> Result<ConvexRep> {
        match &self.block().representation {
            Some(coeffs) => {
                let exact = coeffs
                    .iter()
                    .map(|c| match c.parse::<Velocity>()? {
                        Velocity::Exact(mut v) if v.len() == 1 => Ok(v.remove(0)),
                        _ => Err(Error::Config(format!("representation coefficient '{c}' is not an exact number"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                self.geom.representation_from_coeffs(exact)
            }
            None => Ok(self.geom.face_of(&self.zeta()?)?.1),
        }
    }

    /// `Λ(g)` with an error bar: Perron on periodic models, else the
    /// extrapolated point-to-line series.
    fn lambda_line(&self) -> Result<(f64, f64)> {
        if self.env.is_periodic() {
            let t = vec![0.0; self.geom.dim()];
            let p = FiniteModel::build(self.geom, self.env, self.spec)?.perron(&t)?;
            Ok((p.log_rho, p.residual * p.log_rho.abs().max(1.0)))
        } else {
            let s = estimate_many(&self.engine()?, self.geom, &[(Target::PointToLine, default_extrapolation(self.geom, &Target::PointToLine))], self.schedule()?)?
                .remove(0);
            Ok((s.extrapolated, if s.residual.is_finite() { s.residual } else { 0.0 }))
        }
    }

    fn velocities(&self) -> Result<Vec<Velocity>> {
        let b = self.block();
        match (&b.zetas, b.zeta_grid) {
            (Some(z), _) => z.iter().map(|s| s.parse()).collect(),
            (None, Some(k)) => Ok(velocity_grid(self.geom, k)),
            (None, None) => Err(missing("zetas or zeta_grid")),
        }
    }

    fn dp(&self) -> Result<RunOutput> {
        let b = self.block();
        let target = match b.target.unwrap_or(TargetName::Line) {
            TargetName::Line => Target::PointToLine,
            TargetName::Point => Target::PointToPoint(self.representation()?),
        };
        let model = default_extrapolation(self.geom, &target);
        let series = estimate_many(&self.engine()?, self.geom, &[(target, model)], self.schedule()?)?.remove(0);
        let mut table = Table::new(&["n", "logZ", "F_over_n"]);
        table.rows = series.points.iter().map(|p| vec![p.n as f64, p.log_z, p.f_over_n]).collect();
        let mut metrics = to_json(&series)?;
        let mut checks = Vec::new();
        if self.env.is_periodic() && series.target == "line" {
            let rho = perron_free_energy(self.env, self.spec, self.geom, &vec![0.0; self.geom.dim()])?;
            metrics["perron_log_rho"] = json!(rho);
            if let Some(tol) = b.tolerance {
                checks.push(Check::at_most("extrapolation_vs_perron", (series.extrapolated - rho).abs(), tol));
            }
        }
        Ok(RunOutput { kind: ExperimentKind::Dp, table: Some(table), metrics, checks })
    }

    /// Legendre-based rate table; `duality` adds the point-to-point
    /// cross-check, otherwise the sanity checks of `I^g` run.
    fn rate_table(&self, duality: bool) -> Result<RunOutput> {
        let b = self.block();
        let tol = b.tolerance.unwrap_or(2e-2);
        let grid = TiltGrid::new(self.geom, b.tilt_radius.unwrap_or(3.0), b.tilt_step.unwrap_or(0.15))?;
        let source = match b.tilt_source.unwrap_or(TiltSourceName::Estimate) {
            TiltSourceName::Perron => TiltSource::Perron,
            TiltSourceName::Estimate => TiltSource::Estimate { schedule: self.schedule()?.to_vec() },
        };
        let tilts = build_tilt_table(self.env, self.spec, self.geom, &grid, &source)?;
        let zetas = self.velocities()?;
        let rates = rate_function(&tilts, self.geom, self.lambda_line()?, &zetas)?;
        let mut table = Table::with_zeta(self.geom.dim(), &["lambda_usc", "I", "err"]);
        for r in &rates.rows {
            let mut row = r.zeta.clone();
            row.extend([r.lambda_usc, r.rate, r.err]);
            table.rows.push(row);
        }
        let mut metrics = json!({
            "tilts": tilts.entries.len(),
            "tilt_radius": grid.radius,
            "tilt_step": grid.step,
            "rates": rates,
        });
        let mut checks = Vec::new();
        let interior: Vec<usize> =
            (0..rates.rows.len()).filter(|&i| rates.rows[i].relative_interior && rates.rows[i].interior).collect();
        if duality {
            let targets: Vec<(Target, _)> = interior
                .iter()
                .map(|&i| {
                    let rep = self.geom.face_of(&zetas[i])?.1;
                    let t = Target::PointToPoint(rep);
                    let m = default_extrapolation(self.geom, &t);
                    Ok((t, m))
                })
                .collect::<Result<_>>()?;
            let series = estimate_many(&self.engine()?, self.geom, &targets, self.schedule()?)?;
            let diffs: Vec<f64> =
                interior.iter().zip(&series).map(|(&i, s)| (rates.rows[i].lambda_usc - s.extrapolated).abs()).collect();
            let worst = diffs.iter().copied().fold(0.0, f64::max);
            metrics["point_to_point"] = json!(interior
                .iter()
                .zip(&series)
                .map(|(&i, s)| json!({ "zeta": rates.rows[i].zeta, "extrapolated": s.extrapolated, "residual": s.residual }))
                .collect::<Vec<_>>());
            metrics["max_abs_diff"] = json!(worst);
            checks.push(Check::at_most("legendre_vs_point_to_point", worst, tol));
        } else {
            let convexity = midpoint_triples(&zetas)
                .into_iter()
                .map(|(a, c, m)| rates.rows[m].rate - 0.5 * (rates.rows[a].rate + rates.rows[c].rate))
                .fold(0.0, f64::max);
            metrics["convexity_residual"] = json!(convexity);
            checks.push(Check::above("min_rate_lower", rates.min_rate, -tol - f64::EPSILON));
            checks.push(Check::at_most("min_rate_near_zero", rates.min_rate.abs(), tol));
            checks.push(Check::at_most("midpoint_convexity", convexity, 1e-12));
            if self.spec.is_rwre() {
                let mut worst: f64 = 0.0;
                let mut rows = Vec::new();
                for &i in &interior {
                    let rep = self.geom.face_of(&zetas[i])?.1;
                    let pr = rwre_point_prob_rate(self.env, self.spec, self.geom, &rep, self.schedule()?)?;
                    worst = worst.max((pr.value - rates.rows[i].rate).abs());
                    rows.push(json!({ "zeta": rates.rows[i].zeta, "point_rate": pr.value, "residual": pr.residual }));
                }
                metrics["rwre_point_rates"] = json!(rows);
                checks.push(Check::at_most("rwre_point_rate_vs_legendre", worst, tol));
            }
        }
        let kind = if duality { ExperimentKind::Duality } else { ExperimentKind::Rate };
        Ok(RunOutput { kind, table: Some(table), metrics, checks })
    }

    fn l2(&self) -> Result<RunOutput> {
        let b = self.block();
        let zeta = self.zeta()?;
        let samples = b.samples.unwrap_or(20);
        let seeds: Vec<u64> = (0..samples).map(|i| sample_seed(self.cfg.seed, i)).collect();
        let report = verify_weak_disorder(self.env, self.spec, self.geom, &zeta, self.schedule()?, &seeds)?;
        let mut table = Table::new(&["n", "mean_F_over_n", "mean_W", "var_W"]);
        for i in 0..report.schedule.len() {
            table.rows.push(vec![
                report.schedule[i] as f64,
                report.mean_f_over_n[i],
                report.mean_w[i],
                report.var_trace[i],
            ]);
        }
        let mut checks = vec![Check::at_most("dp_vs_minus_lambda_star", report.gap.abs(), b.tolerance.unwrap_or(5e-2))];
        let mut metrics = json!({ "weak_disorder": report });
        let w_samples = b.w_samples.unwrap_or(0);
        if w_samples > 0 {
            let n = b.n.unwrap_or(100);
            let mgf = AveragedMgf::from_env(self.geom, self.env, self.spec)?;
            let theta = report.theta.clone();
            let one = |i: usize| {
                let e = self.env.with_seed(sample_seed(self.cfg.seed, i));
                simulate_w(&e, self.spec, self.geom, &mgf, &theta, n, Direction::Forward).map(|s| s.w)
            };
            #[cfg(feature = "parallel")]
            let ws: Vec<f64> = {
                use rayon::prelude::*;
                (0..w_samples).into_par_iter().map(one).collect::<Result<_>>()?
            };
            #[cfg(not(feature = "parallel"))]
            let ws: Vec<f64> = (0..w_samples).map(one).collect::<Result<_>>()?;
            let k = ws.len() as f64;
            let mean = ws.iter().sum::<f64>() / k;
            let var = ws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
            let se = (var / k).sqrt();
            metrics["martingale"] = json!({ "n": n, "samples": w_samples, "mean_w": mean, "se": se });
            checks.push(Check::at_most("mean_w_within_4se", (mean - 1.0).abs(), 4.0 * se));
        }
        Ok(RunOutput { kind: ExperimentKind::L2, table: Some(table), metrics, checks })
    }

    fn entropy(&self) -> Result<RunOutput> {
        let b = self.block();
        let model = FiniteModel::build(self.geom, self.env, self.spec)?;
        let gap = b.gap.unwrap_or(1e-6);
        let tol = b.tolerance.unwrap_or(1e-3);
        let zeta = match &b.zeta {
            Some(z) => Some(z.parse::<Velocity>()?.to_f64()),
            None => None,
        };
        let basis = zeta.as_ref().map(|_| {
            self.geom.direction_basis().iter().map(|v| v.iter().map(|&x| x as f64).collect()).collect()
        });
        let opts = VariationalOptions {
            zeta: zeta.clone(),
            truncation: b.truncation,
            gap_tol: gap.min(1e-9),
            kkt_tol: gap.min(1e-9),
            basis,
        };
        let sol = maximize_variational(&model, &opts)?;
        let (reference, tilt) = match &zeta {
            Some(z) => perron_legendre(&model, self.geom, z)?,
            None => {
                let t = vec![0.0; self.geom.dim()];
                (model.perron(&t)?.log_rho, t)
            }
        };
        let pair = GibbsPair::from_model(&model, &tilt)?;
        let doob = pair.occupation();
        let tv = total_variation(&sol.nu, &doob);
        let k = model.num_steps();
        let mut table = Table::new(&["state", "step", "nu", "doob_nu"]);
        for (i, (nu, d)) in sol.nu.iter().zip(&doob).enumerate() {
            table.rows.push(vec![(i / k) as f64, (i % k) as f64, *nu, *d]);
        }
        let metrics = json!({
            "states": model.num_states(),
            "value": sol.value,
            "dual_bound": sol.dual_bound,
            "gap": sol.gap,
            "kkt_residual": sol.kkt_residual,
            "iterations": sol.iterations,
            "perron_value": reference,
            "perron_tilt": tilt,
            "total_variation": tv,
        });
        let checks = vec![
            Check::at_most("value_vs_perron", (sol.value - reference).abs(), tol),
            Check::at_most("duality_gap", sol.gap, gap),
            Check::at_most("optimizer_vs_doob_tv", tv, tol),
        ];
        Ok(RunOutput { kind: ExperimentKind::Entropy, table: Some(table), metrics, checks })
    }

    fn concentration(&self) -> Result<RunOutput> {
        let b = self.block();
        let p = ConcentrationParams {
            schedule: self.schedule()?.to_vec(),
            epsilon: b.epsilon.unwrap_or(0.1),
            samples: b.samples.unwrap_or(500),
            zeta: self.zeta()?,
            centering: b.centering.unwrap_or(Centering::EmpiricalMean),
            seed: self.cfg.seed,
        };
        let r = run_concentration(self.env, self.spec, self.geom, &p)?;
        let mut table = Table::new(&["n", "tail_freq", "fit_envelope"]);
        for i in 0..r.schedule.len() {
            table.rows.push(vec![r.schedule[i] as f64, r.tail_freq[i], r.fit_envelope[i]]);
        }
        let checks = vec![
            Check::flag("strictly_decreasing", r.strictly_decreasing),
            Check::above("b_hat_positive", r.b_hat.unwrap_or(f64::NAN), 0.0),
            Check::flag("below_envelope", r.below_envelope),
        ];
        Ok(RunOutput { kind: ExperimentKind::Concentration, table: Some(table), metrics: to_json(&r)?, checks })
    }

    /// Point-to-point free energies over a barycentric `ζ`-grid from one DP.
    fn continuity(&self) -> Result<RunOutput> {
        let k = self.block().zeta_grid.unwrap_or(8);
        let zetas = velocity_grid(self.geom, k);
        let mut faces = Vec::with_capacity(zetas.len());
        let targets: Vec<(Target, _)> = zetas
            .iter()
            .map(|z| {
                let (face, rep) = self.geom.face_of(z)?;
                faces.push(face);
                let t = Target::PointToPoint(rep);
                let m = default_extrapolation(self.geom, &t);
                Ok((t, m))
            })
            .collect::<Result<_>>()?;
        let series = estimate_many(&self.engine()?, self.geom, &targets, self.schedule()?)?;
        let values: Vec<f64> = series.iter().map(|s| s.extrapolated).collect();
        let jump = adjacent_pairs(self.geom, &zetas, k)
            .into_iter()
            .map(|(a, c)| (values[a] - values[c]).abs())
            .fold(0.0, f64::max);
        let concavity = midpoint_triples(&zetas)
            .into_iter()
            .map(|(a, c, m)| 0.5 * (values[a] + values[c]) - values[m])
            .fold(0.0, f64::max);
        let mut table = Table::with_zeta(self.geom.dim(), &["lambda", "err", "face_dim"]);
        for ((z, s), &f) in zetas.iter().zip(&series).zip(&faces) {
            let mut row = z.to_f64();
            row.extend([s.extrapolated, s.residual, self.geom.faces()[f].dim as f64]);
            table.rows.push(row);
        }
        let mut metrics = json!({
            "grid": k,
            "points": zetas.len(),
            "max_adjacent_jump": jump,
            "max_concavity_residual": concavity,
        });
        if self.env.is_periodic() {
            let grid = TiltGrid::new(self.geom, 3.0, 0.15)?;
            let tilts = build_tilt_table(self.env, self.spec, self.geom, &grid, &TiltSource::Perron)?;
            let mut worst: f64 = 0.0;
            for ((z, &f), v) in zetas.iter().zip(&faces).zip(&values) {
                if f == self.geom.hull_face() {
                    let l = legendre_usc(&tilts, self.geom, &z.to_f64())?;
                    if l.interior {
                        worst = worst.max((l.value - v).abs());
                    }
                }
            }
            metrics["max_abs_diff_vs_perron_legendre"] = json!(worst);
        }
        Ok(RunOutput { kind: ExperimentKind::Continuity, table: Some(table), metrics, checks: Vec::new() })
    }
}
