//! A few seconds of built-in consistency checks for `rwrp selftest`.

use super::Check;
use crate::duality::{free_walk_table, legendre_usc, TiltGrid};
use crate::environment::{Environment, Marginal, PotentialSpec};
use crate::error::Result;
use crate::geometry::{StepGeometry, Velocity};
use crate::transfer::{brute_force_log_partition, perron_free_energy, run_dp, DpEngine};

fn brute_vs_dp() -> Result<f64> {
    let env = Environment::iid(Marginal::Gaussian { mean: 0.0, std_dev: 1.0 }, 11)?;
    let cases = [
        (StepGeometry::uniform(1, vec![vec![1], vec![2]])?, PotentialSpec::site(0.7)),
        (StepGeometry::uniform(2, vec![vec![1, 0], vec![0, 1], vec![1, 1]])?, PotentialSpec::site(0.4).with_ell(1)),
        (StepGeometry::uniform(2, vec![vec![-1, 1], vec![1, 1]])?, PotentialSpec::site(1.1).with_ell(2)),
    ];
    let mut worst: f64 = 0.0;
    for (g, spec) in &cases {
        let n = 6;
        let layer = run_dp(&env, spec, g, n)?;
        worst = worst.max((layer.log_total() - brute_force_log_partition(&env, spec, g, n, None, None)?).abs());
        for (x, v) in layer.endpoints() {
            worst = worst.max((v - brute_force_log_partition(&env, spec, g, n, None, Some(&x))?).abs());
        }
    }
    Ok(worst)
}

fn tilt_identity() -> Result<f64> {
    let g = StepGeometry::uniform(2, vec![vec![1, 0], vec![0, 1], vec![1, 1]])?;
    let env = Environment::iid(Marginal::Bernoulli { p: 0.3, low: -1.0, high: 2.0 }, 5)?;
    let spec = PotentialSpec::site(0.8);
    let t = [0.37, -0.21];
    let plain = DpEngine::new(&g, &env, &spec)?.run(40)?;
    let tilted = DpEngine::new(&g, &env, &spec)?.with_tilt(&t)?.run(40)?;
    let mut worst: f64 = 0.0;
    for (x, v) in plain.endpoints() {
        let shift: f64 = x.iter().zip(&t).map(|(&a, b)| a as f64 * b).sum();
        let w = tilted.endpoint_log_mass(&x).unwrap_or(f64::NAN);
        worst = worst.max((w - v - shift).abs());
    }
    Ok(worst)
}

fn perron_vs_dp() -> Result<f64> {
    let g = StepGeometry::uniform(1, vec![vec![1], vec![2]])?;
    let env = Environment::periodic(vec![3], vec![0.0, 1.0, -0.5])?;
    let spec = PotentialSpec::site(1.0);
    let rho = perron_free_energy(&env, &spec, &g, &[0.0])?;
    let n = 400;
    let f = run_dp(&env, &spec, &g, n)?.log_total() / n as f64;
    Ok((f - rho).abs() * n as f64)
}

fn free_walk_legendre() -> Result<f64> {
    let g = StepGeometry::uniform(1, vec![vec![1], vec![2]])?;
    let table = free_walk_table(&g, &TiltGrid::new(&g, 2.0, 0.1)?);
    let mean: Velocity = "3/2".parse()?;
    Ok(legendre_usc(&table, &g, &mean.to_f64())?.value.abs())
}

/// Runs every check; an error inside one check marks it failed.
pub fn selftest() -> Vec<Check> {
    let run = |name: &str, f: fn() -> Result<f64>, tol: f64| match f() {
        Ok(v) => Check::at_most(name, v, tol),
        Err(e) => {
            log::error!("selftest {name}: {e}");
            Check { name: name.into(), passed: false, value: f64::NAN, threshold: tol }
        }
    };
    vec![
        run("dp_vs_enumeration", brute_vs_dp, 1e-9),
        run("tilt_identity", tilt_identity, 1e-9),
        // n |F_n/n − log ρ| stays bounded on a periodic model
        run("perron_vs_dp_scaled", perron_vs_dp, 5.0),
        run("free_walk_legendre_at_mean", free_walk_legendre, 1e-12),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn selftest_passes() {
        for c in super::selftest() {
            assert!(c.passed, "{c:?}");
        }
    }
}
