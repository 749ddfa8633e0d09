//! Quenched partition functions: the layered DP, its brute-force and Perron
//! oracles, and finite-`n` free energy series with extrapolation.

mod brute;
mod dp;
mod finite;

use std::collections::BTreeMap;

use serde::Serialize;

pub use brute::{brute_force_endpoints, brute_force_log_partition, PATH_LIMIT};
pub use dp::{DpEngine, DpLayer, DpOptions, MemoryMode, DEFAULT_PRUNE};
pub use finite::{perron_free_energy, FiniteModel, Perron, TorusState};

use crate::environment::{Environment, PotentialSpec};
use crate::error::{Error, Result};
use crate::geometry::{ConvexRep, PathPlan, StepGeometry};

/// Log mass at a prescribed endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointValue {
    Finite(f64),
    /// The endpoint is not in `D_n`: no admissible path reaches it.
    Unreachable,
}

impl PointValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            PointValue::Finite(v) => Some(v),
            PointValue::Unreachable => None,
        }
    }
}

/// Final layer after `n` steps.
pub fn run_dp(env: &Environment, spec: &PotentialSpec, geom: &StepGeometry, n: usize) -> Result<DpLayer> {
    DpEngine::new(geom, env, spec)?.run(n)
}

/// `log Z_n`.
pub fn log_partition_line(env: &Environment, spec: &PotentialSpec, geom: &StepGeometry, n: usize) -> Result<f64> {
    Ok(run_dp(env, spec, geom, n)?.log_total())
}

/// `F_n(x̂_n(ζ))`, the log mass of paths ending at the plan's endpoint.
pub fn log_partition_point(
    env: &Environment,
    spec: &PotentialSpec,
    geom: &StepGeometry,
    n: usize,
    plan: &PathPlan,
) -> Result<PointValue> {
    if plan.n != n as u64 {
        return Err(Error::InvalidModel(format!("path plan is for n = {}, not {n}", plan.n)));
    }
    let layer = run_dp(env, spec, geom, n)?;
    Ok(layer.endpoint_log_mass(&plan.endpoint).map_or(PointValue::Unreachable, PointValue::Finite))
}

/// Law of `X_n` under the polymer measure.
pub fn endpoint_distribution(
    env: &Environment,
    spec: &PotentialSpec,
    geom: &StepGeometry,
    n: usize,
) -> Result<BTreeMap<Vec<i64>, f64>> {
    let layer = run_dp(env, spec, geom, n)?;
    Ok(distribution_of(&layer))
}

pub fn distribution_of(layer: &DpLayer) -> BTreeMap<Vec<i64>, f64> {
    let total = layer.log_total();
    layer.endpoints().into_iter().map(|(x, v)| (x, (v - total).exp())).collect()
}

/// `log Σ_x exp(F_n(x) + t · x)`, the tilted point-to-line partition
/// function recovered from an untilted layer.
pub fn tilted_log_partition(layer: &DpLayer, t: &[f64]) -> f64 {
    let vals: Vec<f64> = layer
        .endpoints()
        .into_iter()
        .map(|(x, v)| v + x.iter().zip(t).map(|(&a, b)| a as f64 * b).sum::<f64>())
        .collect();
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone)]
pub enum Target {
    PointToLine,
    PointToPoint(ConvexRep),
}

/// Finite-size model used to extrapolate `F_n / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Extrapolation {
    /// `a + b/n`.
    Linear,
    /// `a + b/n - (m/2) log(n)/n`, the local limit correction of an
    /// `m`-dimensional point-to-point sum.
    LocalClt { dim: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesPoint {
    pub n: usize,
    #[serde(rename = "logZ")]
    pub log_z: f64,
    #[serde(rename = "F_over_n")]
    pub f_over_n: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FreeEnergySeries {
    pub target: String,
    pub points: Vec<SeriesPoint>,
    pub model: Extrapolation,
    pub extrapolated: f64,
    /// Largest absolute residual of the fit; a heuristic error bar.
    pub residual: f64,
    pub states_max: usize,
}

/// Least-squares fit of `y_n + c log(n)/n = a + b/n`; returns `(a, max residual)`.
pub fn extrapolate(ns: &[usize], ys: &[f64], model: Extrapolation) -> (f64, f64) {
    let c = match model {
        Extrapolation::Linear => 0.0,
        Extrapolation::LocalClt { dim } => dim as f64 / 2.0,
    };
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(ys)
        .map(|(&n, &y)| {
            let n = n.max(1) as f64;
            (1.0 / n, y + c * n.ln() / n)
        })
        .collect();
    match pts.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (pts[0].1, f64::NAN),
        len => {
            let len = len as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
            let a = my - b * mx;
            let res = pts.iter().map(|p| (p.1 - a - b * p.0).abs()).fold(0.0, f64::max);
            (a, res)
        }
    }
}

/// Default extrapolation for a target: local limit correction for
/// point-to-point sums on faces of positive dimension.
pub fn default_extrapolation(geom: &StepGeometry, target: &Target) -> Extrapolation {
    match target {
        Target::PointToLine => Extrapolation::Linear,
        Target::PointToPoint(rep) => {
            let dim = geom.faces()[rep.face].dim;
            if dim == 0 {
                Extrapolation::Linear
            } else {
                Extrapolation::LocalClt { dim }
            }
        }
    }
}

fn target_label(t: &Target) -> String {
    match t {
        Target::PointToLine => "line".into(),
        Target::PointToPoint(rep) => format!("point:{}", rep.velocity),
    }
}

/// Free energy series for several targets from a single DP run to the
/// largest `n` of the schedule.
pub fn estimate_many(
    engine: &DpEngine<'_>,
    geom: &StepGeometry,
    targets: &[(Target, Extrapolation)],
    schedule: &[usize],
) -> Result<Vec<FreeEnergySeries>> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("n schedule must be nonempty and strictly increasing".into()));
    }
    let n_max = *schedule.last().unwrap();
    let mut points: Vec<Vec<SeriesPoint>> = vec![Vec::new(); targets.len()];
    let mut states_max = 0;
    engine.run_with(n_max, |layer| {
        states_max = states_max.max(layer.num_states());
        let n = layer.stage();
        if !schedule.contains(&n) {
            return Ok(());
        }
        let total = layer.log_total();
        for ((target, _), out) in targets.iter().zip(points.iter_mut()) {
            let log_z = match target {
                Target::PointToLine => total,
                Target::PointToPoint(rep) => {
                    let plan = geom.path_endpoint(rep, n as u64);
                    layer.endpoint_log_mass(&plan.endpoint).ok_or_else(|| {
                        Error::Infeasible(format!("endpoint {:?} unreachable at n = {n}", plan.endpoint))
                    })?
                }
            };
            let f_over_n = if n == 0 { log_z } else { log_z / n as f64 };
            out.push(SeriesPoint { n, log_z, f_over_n });
        }
        Ok(())
    })?;
    Ok(targets
        .iter()
        .zip(points)
        .map(|((target, model), pts)| {
            let ns: Vec<usize> = pts.iter().map(|p| p.n).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.f_over_n).collect();
            let (extrapolated, residual) = extrapolate(&ns, &ys, *model);
            FreeEnergySeries {
                target: target_label(target),
                points: pts,
                model: *model,
                extrapolated,
                residual,
                states_max,
            }
        })
        .collect())
}

pub fn estimate_free_energy(
    env: &Environment,
    spec: &PotentialSpec,
    geom: &StepGeometry,
    target: Target,
    schedule: &[usize],
) -> Result<FreeEnergySeries> {
    let engine = DpEngine::new(geom, env, spec)?;
    let model = default_extrapolation(geom, &target);
    Ok(estimate_many(&engine, geom, &[(target, model)], schedule)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Velocity;

    #[test]
    fn extrapolation_recovers_exact_models() {
        let ns = [10, 20, 40, 80];
        let ys: Vec<f64> = ns.iter().map(|&n| 1.5 + 2.0 / n as f64).collect();
        let (a, r) = extrapolate(&ns, &ys, Extrapolation::Linear);
        assert!((a - 1.5).abs() < 1e-12 && r < 1e-12);
        let ys: Vec<f64> = ns.iter().map(|&n| 1.5 + 2.0 / n as f64 - (n as f64).ln() / n as f64).collect();
        let (a, _) = extrapolate(&ns, &ys, Extrapolation::LocalClt { dim: 2 });
        assert!((a - 1.5).abs() < 1e-12);
    }

    #[test]
    fn point_values_and_distributions() {
        let g = StepGeometry::uniform(1, vec![vec![1], vec![2]]).unwrap();
        let env = Environment::constant(0.0);
        let spec = PotentialSpec::zero();
        let plan = g.endpoint_for(&"3/2".parse::<Velocity>().unwrap(), 4).unwrap();
        let v = log_partition_point(&env, &spec, &g, 4, &plan).unwrap();
        assert!((v.finite().unwrap() - (6.0f64 / 16.0).ln()).abs() < 1e-14);
        let mut far = plan.clone();
        far.endpoint = vec![9];
        assert_eq!(log_partition_point(&env, &spec, &g, 4, &far).unwrap(), PointValue::Unreachable);
        let d0 = endpoint_distribution(&env, &spec, &g, 0).unwrap();
        assert_eq!(d0.len(), 1);
        assert_eq!(d0[&vec![0]], 1.0);
    }

    #[test]
    fn rwre_two_step_distribution() {
        use crate::environment::RwreKernel;
        let g = StepGeometry::uniform(1, vec![vec![1], vec![2]]).unwrap();
        let env = Environment::constant(0.0);
        let spec = PotentialSpec::rwre(RwreKernel::Fixed { probs: vec![0.3, 0.7] });
        let d = endpoint_distribution(&env, &spec, &g, 2).unwrap();
        for (x, p) in [(2, 0.09), (3, 0.42), (4, 0.49)] {
            assert!((d[&vec![x]] - p).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_velocity_of_free_walk_extrapolates_to_zero() {
        let g = StepGeometry::uniform(1, vec![vec![1], vec![2]]).unwrap();
        let env = Environment::constant(0.0);
        let spec = PotentialSpec::zero();
        let (_, rep) = g.face_of(&"3/2".parse::<Velocity>().unwrap()).unwrap();
        let s = estimate_free_energy(&env, &spec, &g, Target::PointToPoint(rep), &[100, 200, 400, 800]).unwrap();
        assert!(s.extrapolated.abs() < 1e-2, "{}", s.extrapolated);
    }
}
