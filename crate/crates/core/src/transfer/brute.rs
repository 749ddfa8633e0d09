//! Path enumeration, the reference every DP result is checked against.

use std::collections::BTreeMap;

use crate::environment::{Environment, PotentialSpec};
use crate::error::{Error, Result};
use crate::geometry::StepGeometry;

/// Largest number of step sequences `brute_force_log_partition` will visit.
pub const PATH_LIMIT: f64 = 1e7;

/// `log Σ` over admissible paths of length `n` of their weights, optionally
/// restricted to paths ending at `endpoint`. A path carries `n + ℓ - 1`
/// steps (`n` when `ℓ = 0`): the potential at stage `k` reads the endpoint
/// after `k` steps and the steps `k+1 ..= k+ℓ`. The tilt `t · z_{k+1}` is
/// added at every stage.
pub fn brute_force_log_partition(
    env: &Environment,
    spec: &PotentialSpec,
    geom: &StepGeometry,
    n: usize,
    tilt: Option<&[f64]>,
    endpoint: Option<&[i64]>,
) -> Result<f64> {
    let mut terms = Vec::new();
    enumerate(env, spec, geom, n, tilt, |x, w| {
        if endpoint.is_none_or(|e| e == x) {
            terms.push(w);
        }
    })?;
    Ok(log_sum(&terms))
}

/// The same sums for every reachable endpoint from a single enumeration.
pub fn brute_force_endpoints(
    env: &Environment,
    spec: &PotentialSpec,
    geom: &StepGeometry,
    n: usize,
    tilt: Option<&[f64]>,
) -> Result<BTreeMap<Vec<i64>, f64>> {
    let mut terms: BTreeMap<Vec<i64>, Vec<f64>> = BTreeMap::new();
    enumerate(env, spec, geom, n, tilt, |x, w| terms.entry(x.to_vec()).or_default().push(w))?;
    Ok(terms.into_iter().map(|(x, t)| (x, log_sum(&t))).collect())
}

fn log_sum(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Calls `visit(endpoint, log weight)` once per step sequence.
fn enumerate(
    env: &Environment,
    spec: &PotentialSpec,
    geom: &StepGeometry,
    n: usize,
    tilt: Option<&[f64]>,
    mut visit: impl FnMut(&[i64], f64),
) -> Result<()> {
    spec.validate(geom, env)?;
    let k = geom.num_steps();
    let len = if spec.ell == 0 { n } else { n + spec.ell - 1 };
    let paths = (k as f64).powi(len as i32);
    if paths > PATH_LIMIT {
        return Err(Error::GuardExceeded { paths, limit: PATH_LIMIT });
    }
    let d = geom.dim();
    let steps = geom.steps();
    let weights = geom.weights();
    let mut seq = vec![0usize; len];
    loop {
        let mut x = vec![0i64; d];
        let mut w: f64 = seq.iter().map(|&z| weights[z].ln()).sum();
        for stage in 0..n {
            let window = &seq[stage..stage + spec.ell.min(len - stage)];
            w += spec.eval(env, geom, &x, window)?;
            let z = &steps[seq[stage]];
            if let Some(t) = tilt {
                w += t.iter().zip(z).map(|(a, &b)| a * b as f64).sum::<f64>();
            }
            for (xi, zi) in x.iter_mut().zip(z) {
                *xi += zi;
            }
        }
        visit(&x, w);
        // odometer
        let mut i = len;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            seq[i] += 1;
            if seq[i] < k {
                break;
            }
            seq[i] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_point_mass() {
        let g = StepGeometry::uniform(1, vec![vec![1], vec![2]]).unwrap();
        let env = Environment::constant(0.0);
        let v = brute_force_log_partition(&env, &PotentialSpec::zero(), &g, 4, None, Some(&[6])).unwrap();
        assert!((v - (6.0f64 / 16.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn guard() {
        let g = StepGeometry::uniform(1, vec![vec![1], vec![2]]).unwrap();
        let env = Environment::constant(0.0);
        assert!(brute_force_log_partition(&env, &PotentialSpec::zero(), &g, 40, None, None).is_err());
    }
}
