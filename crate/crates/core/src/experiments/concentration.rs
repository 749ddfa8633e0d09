//! Tail frequencies of `|F_n − nΛ̂| ≥ nε` over independent environments.

use serde::{Deserialize, Serialize};

use crate::environment::{site_key, Environment, PotentialSpec};
use crate::error::{Error, Result};
use crate::geometry::{StepGeometry, Velocity};
use crate::transfer::{estimate_free_energy, DpEngine, Target};

/// How `Λ̂` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Centering {
    /// Mean of `F_n / n` over the sampled environments, per `n`.
    #[default]
    EmpiricalMean,
    /// Extrapolated free energy of the base environment; the fit residual
    /// is subtracted from `ε`.
    Extrapolated,
    /// A value supplied by the caller, e.g. from the Perron pipeline.
    Value { lambda: f64 },
}

#[derive(Debug, Clone)]
pub struct ConcentrationParams {
    pub schedule: Vec<usize>,
    pub epsilon: f64,
    pub samples: usize,
    pub zeta: Velocity,
    pub centering: Centering,
    pub seed: u64,
}

pub const CONCENTRATION_CAVEAT: &str =
    "the constants B and c of the bound are existential; only the exponential decay shape is tested";

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub schedule: Vec<usize>,
    pub epsilon: f64,
    /// `ε` actually used for counting, after any slack.
    pub epsilon_effective: f64,
    pub samples: usize,
    pub centering: Centering,
    pub lambda_hat: Vec<f64>,
    pub tail_freq: Vec<f64>,
    /// Least-squares fit `log tail ≈ intercept + slope n` over positive tails.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
    /// `B̂ = −slope / ε²`.
    pub b_hat: Option<f64>,
    /// `2 exp(−B̂ ε² n)`.
    pub fit_envelope: Vec<f64>,
    pub strictly_decreasing: bool,
    pub below_envelope: bool,
    pub caveat: &'static str,
}

/// Seed of the `i`-th sampled environment.
pub fn sample_seed(seed: u64, i: usize) -> u64 {
    site_key(seed, &[i as i64])
}

/// `F_n(x̂_n(ζ))` at every `n` of the schedule, for one environment.
fn point_series(
    env: &Environment,
    spec: &PotentialSpec,
    geom: &StepGeometry,
    plans: &[Vec<i64>],
    schedule: &[usize],
) -> Result<Vec<f64>> {
    let engine = DpEngine::new(geom, env, spec)?;
    let mut out = Vec::with_capacity(schedule.len());
    engine.run_with(*schedule.last().unwrap(), |layer| {
        if let Some(i) = schedule.iter().position(|&n| n == layer.stage()) {
            let x = &plans[i];
            out.push(
                layer
                    .endpoint_log_mass(x)
                    .ok_or_else(|| Error::Infeasible(format!("endpoint {x:?} unreachable")))?,
            );
        }
        Ok(())
    })?;
    Ok(out)
}

pub fn run_concentration(
    env: &Environment,
    spec: &PotentialSpec,
    geom: &StepGeometry,
    p: &ConcentrationParams,
) -> Result<ConcentrationReport> {
    if p.schedule.is_empty() || p.schedule.windows(2).any(|w| w[0] >= w[1]) || p.schedule[0] == 0 {
        return Err(Error::Config("n schedule must be positive and strictly increasing".into()));
    }
    if !(p.epsilon > 0.0) || p.samples == 0 {
        return Err(Error::Config("need ε > 0 and at least one sample".into()));
    }
    if env.bounds().is_none() || spec.unbounded_above(env) || spec.needs_view() {
        return Err(Error::InvalidModel(
            "the concentration bound assumes a bounded potential; use a bounded marginal".into(),
        ));
    }
    let (face, rep) = geom.face_of(&p.zeta)?;
    if geom.faces()[face].contains_origin {
        return Err(Error::InvalidModel("the concentration bound assumes 0 ∉ U₀ for the face of ζ".into()));
    }
    let plans: Vec<Vec<i64>> = p.schedule.iter().map(|&n| geom.path_endpoint(&rep, n as u64).endpoint).collect();
    let seeds: Vec<u64> = (0..p.samples).map(|i| sample_seed(p.seed, i)).collect();
    let run = |s: &u64| point_series(&env.with_seed(*s), spec, geom, &plans, &p.schedule);
    #[cfg(feature = "parallel")]
    let series: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        seeds.par_iter().map(run).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let series: Vec<Vec<f64>> = seeds.iter().map(run).collect::<Result<_>>()?;

    let k = p.samples as f64;
    let (lambda_hat, eps) = match p.centering {
        Centering::EmpiricalMean => {
            let lh = (0..p.schedule.len())
                .map(|i| series.iter().map(|s| s[i]).sum::<f64>() / k / p.schedule[i] as f64)
                .collect();
            (lh, p.epsilon)
        }
        Centering::Extrapolated => {
            let est = estimate_free_energy(env, spec, geom, Target::PointToPoint(rep.clone()), &p.schedule)?;
            let r = if est.residual.is_finite() { est.residual } else { 0.0 };
            (vec![est.extrapolated; p.schedule.len()], (p.epsilon - r).max(0.0))
        }
        Centering::Value { lambda } => (vec![lambda; p.schedule.len()], p.epsilon),
    };
    let tail_freq: Vec<f64> = p
        .schedule
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let n = n as f64;
            series.iter().filter(|s| (s[i] - n * lambda_hat[i]).abs() >= n * eps).count() as f64 / k
        })
        .collect();

    let pts: Vec<(f64, f64)> = p
        .schedule
        .iter()
        .zip(&tail_freq)
        .filter(|(_, &t)| t > 0.0)
        .map(|(&n, &t)| (n as f64, t.ln()))
        .collect();
    let fit = (pts.len() >= 2).then(|| linear_fit(&pts));
    let b_hat = fit.map(|(_, slope, _)| -slope / (p.epsilon * p.epsilon));
    let fit_envelope: Vec<f64> = match b_hat {
        Some(b) => p.schedule.iter().map(|&n| 2.0 * (-b * p.epsilon * p.epsilon * n as f64).exp()).collect(),
        None => vec![f64::NAN; p.schedule.len()],
    };
    let strictly_decreasing = tail_freq.iter().all(|&t| t > 0.0) && tail_freq.windows(2).all(|w| w[1] < w[0]);
    let below_envelope = b_hat.is_some() && tail_freq.iter().zip(&fit_envelope).all(|(t, e)| t <= e);
    Ok(ConcentrationReport {
        schedule: p.schedule.clone(),
        epsilon: p.epsilon,
        epsilon_effective: eps,
        samples: p.samples,
        centering: p.centering,
        lambda_hat,
        tail_freq,
        slope: fit.map(|f| f.1),
        intercept: fit.map(|f| f.0),
        r_squared: fit.map(|f| f.2),
        b_hat,
        fit_envelope,
        strictly_decreasing,
        below_envelope,
        caveat: CONCENTRATION_CAVEAT,
    })
}

/// `(intercept, slope, r²)` of an ordinary least-squares line.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if sxx > 0.0 && syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (my - slope * mx, slope, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Marginal;

    fn space_time() -> StepGeometry {
        StepGeometry::uniform(2, vec![vec![0, 1], vec![1, 1]]).unwrap()
    }

    #[test]
    fn deterministic_environment_has_no_tail() {
        let g = space_time();
        let env = Environment::constant(1.0);
        let p = ConcentrationParams {
            schedule: vec![10, 20, 40],
            epsilon: 0.1,
            samples: 5,
            zeta: Velocity::from_ratios(&[(1, 2), (1, 1)]),
            centering: Centering::EmpiricalMean,
            seed: 1,
        };
        let r = run_concentration(&env, &PotentialSpec::site(1.0), &g, &p).unwrap();
        assert!(r.tail_freq.iter().all(|&t| t == 0.0));
        assert!(r.b_hat.is_none());
    }

    #[test]
    fn large_epsilon_kills_tail() {
        let g = space_time();
        let env = Environment::iid(Marginal::Bernoulli { p: 0.5, low: -1.0, high: 1.0 }, 3).unwrap();
        let p = ConcentrationParams {
            schedule: vec![10, 20],
            epsilon: 2.5,
            samples: 20,
            zeta: Velocity::from_ratios(&[(1, 2), (1, 1)]),
            centering: Centering::EmpiricalMean,
            seed: 1,
        };
        let r = run_concentration(&env, &PotentialSpec::site(1.0), &g, &p).unwrap();
        assert!(r.tail_freq.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn unbounded_potential_is_rejected() {
        let g = space_time();
        let env = Environment::iid(Marginal::Gaussian { mean: 0.0, std_dev: 1.0 }, 3).unwrap();
        let p = ConcentrationParams {
            schedule: vec![10],
            epsilon: 0.1,
            samples: 2,
            zeta: Velocity::from_ratios(&[(1, 2), (1, 1)]),
            centering: Centering::EmpiricalMean,
            seed: 1,
        };
        assert!(run_concentration(&env, &PotentialSpec::site(1.0), &g, &p).is_err());
    }
}
