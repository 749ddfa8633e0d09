//! The weak disorder solution for directed polymers with a one-step
//! potential `βg(ω₀, z)`: the averaged log-mgf `λ(β, θ)`, its dual `λ*`, the
//! normalized partition functions `W_n^±`, and the Gibbs pair of a periodic
//! model.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::environment::{
    Environment, EnvironmentModel, GeneralPotential, LocalView, Marginal, PotentialKind, PotentialSpec,
};
use crate::error::{Error, Result};
use crate::geometry::{StepGeometry, Velocity};
use crate::transfer::{extrapolate, DpEngine, Extrapolation, FiniteModel};

/// `λ(β, θ) = log Σ_z a_z e^{θ·z}` with `a_z = p_z E[e^{βg(ω₀,z)}]`.
#[derive(Debug, Clone, Serialize)]
pub struct AveragedMgf {
    pub beta: f64,
    pub steps: Vec<Vec<f64>>,
    pub log_a: Vec<f64>,
    /// Basis of `span(R − R)`, the gauge subspace for `θ`.
    pub basis: Vec<Vec<f64>>,
}

/// Site marginal of an environment: the i.i.d. marginal, or the empirical
/// law of one period.
pub fn site_marginal(env: &Environment) -> Marginal {
    match env.model() {
        EnvironmentModel::Iid { marginal, .. } => marginal.clone(),
        EnvironmentModel::Periodic { table, .. } => {
            let mut values: Vec<f64> = table.to_vec();
            values.sort_by(f64::total_cmp);
            values.dedup();
            let n = table.len() as f64;
            let probs = values.iter().map(|v| table.iter().filter(|&&t| t == *v).count() as f64 / n).collect();
            Marginal::Discrete { values, probs }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl AveragedMgf {
    /// `β` is the inverse temperature of `spec`; the potential must be a
    /// one-step function of `ω₀`.
    pub fn new(geom: &StepGeometry, marginal: &Marginal, spec: &PotentialSpec) -> Result<Self> {
        marginal.validate()?;
        let b = spec.beta;
        let steps = geom.steps();
        let log_a = steps
            .iter()
            .enumerate()
            .zip(geom.weights())
            .map(|((z, step), p)| {
                let m = match &spec.kind {
                    PotentialKind::Site => marginal.log_mgf(b),
                    PotentialKind::Step { coeffs, offsets } => b * offsets[z] + marginal.log_mgf(b * coeffs[z]),
                    PotentialKind::Stretched { h } => {
                        b * h.iter().zip(step).map(|(a, &c)| a * c as f64).sum::<f64>() + marginal.log_mgf(b)
                    }
                    PotentialKind::Rwre(_) => marginal.expect(|w| spec.eval_local(w, &[z], steps).exp()).ln(),
                    PotentialKind::Window { .. } | PotentialKind::General(_) => {
                        return Err(Error::InvalidModel("averaged mgf needs a potential of (ω₀, z₁) only".into()))
                    }
                };
                Ok(p.ln() + m)
            })
            .collect::<Result<Vec<f64>>>()?;
        if log_a.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidModel(format!("E[e^(βg)] is not finite at β = {b}")));
        }
        Ok(AveragedMgf {
            beta: b,
            steps: steps.iter().map(|z| z.iter().map(|&c| c as f64).collect()).collect(),
            log_a,
            basis: geom
                .direction_basis()
                .iter()
                .map(|v| v.iter().map(|&c| c as f64).collect())
                .collect(),
        })
    }

    pub fn from_env(geom: &StepGeometry, env: &Environment, spec: &PotentialSpec) -> Result<Self> {
        Self::new(geom, &site_marginal(env), spec)
    }

    fn exponents(&self, theta: &[f64]) -> Vec<f64> {
        self.log_a.iter().zip(&self.steps).map(|(a, z)| a + dot(theta, z)).collect()
    }

    /// Softmax weights `a_z e^{θ·z − λ}` and `λ`.
    fn weights(&self, theta: &[f64]) -> (Vec<f64>, f64) {
        let e = self.exponents(theta);
        let m = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = e.iter().map(|v| (v - m).exp()).sum();
        let lam = m + s.ln();
        (e.iter().map(|v| (v - lam).exp()).collect(), lam)
    }

    pub fn lambda(&self, theta: &[f64]) -> f64 {
        self.weights(theta).1
    }

    pub fn grad(&self, theta: &[f64]) -> Vec<f64> {
        let (w, _) = self.weights(theta);
        let d = self.steps[0].len();
        let mut g = vec![0.0; d];
        for (wz, z) in w.iter().zip(&self.steps) {
            for (gi, zi) in g.iter_mut().zip(z) {
                *gi += wz * zi;
            }
        }
        g
    }

    /// Covariance of the step under the softmax weights.
    pub fn hess(&self, theta: &[f64]) -> DMatrix<f64> {
        let (w, _) = self.weights(theta);
        let mean = self.grad(theta);
        let d = mean.len();
        let mut h = DMatrix::zeros(d, d);
        for (wz, z) in w.iter().zip(&self.steps) {
            for i in 0..d {
                for j in 0..d {
                    h[(i, j)] += wz * (z[i] - mean[i]) * (z[j] - mean[j]);
                }
            }
        }
        h
    }

    fn theta_of(&self, c: &[f64]) -> Vec<f64> {
        let mut t = vec![0.0; self.steps[0].len()];
        for (ci, b) in c.iter().zip(&self.basis) {
            for (ti, bi) in t.iter_mut().zip(b) {
                *ti += ci * bi;
            }
        }
        t
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TiltSolution {
    pub zeta: Vec<f64>,
    pub theta: Vec<f64>,
    pub lambda: f64,
    pub lambda_star: f64,
    /// `|∇_θλ(β, θ) − ζ|_∞`.
    pub residual: f64,
    pub iterations: usize,
    /// Condition number of the Hessian restricted to the gauge subspace.
    pub condition: f64,
}

/// Solves `∇_θλ(β, θ) = ζ` for `ζ ∈ ri U` with `θ ∈ span(R − R)`.
pub fn solve_tilt(mgf: &AveragedMgf, geom: &StepGeometry, zeta: &Velocity) -> Result<TiltSolution> {
    let (face, _) = geom.face_of(zeta)?;
    if face != geom.hull_face() {
        return Err(Error::OutsideHull(format!("{zeta} is on the relative boundary of U")));
    }
    let zf = zeta.to_f64();
    let r = mgf.basis.len();
    let reduced = |c: &[f64]| -> (f64, DVector<f64>, DMatrix<f64>) {
        let th = mgf.theta_of(c);
        let lam = mgf.lambda(&th);
        let g = mgf.grad(&th);
        let h = mgf.hess(&th);
        let diff: Vec<f64> = g.iter().zip(&zf).map(|(a, b)| a - b).collect();
        let gc = DVector::from_iterator(r, mgf.basis.iter().map(|b| dot(b, &diff)));
        let mut hc = DMatrix::zeros(r, r);
        for i in 0..r {
            for j in 0..r {
                let hb = &h * DVector::from_column_slice(&mgf.basis[j]);
                hc[(i, j)] = dot(&mgf.basis[i], hb.as_slice());
            }
        }
        (lam - dot(&th, &zf), gc, hc)
    };
    let resid = |c: &[f64]| -> f64 {
        let g = mgf.grad(&mgf.theta_of(c));
        g.iter().zip(&zf).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let mut c = vec![0.0; r];
    let mut iterations = 0;
    while iterations < 100 {
        if resid(&c) <= 1e-13 {
            break;
        }
        iterations += 1;
        let (f, g, h) = reduced(&c);
        let dir = h.clone().cholesky().map(|ch| ch.solve(&g)).unwrap_or_else(|| g.clone());
        let mut step = 1.0;
        loop {
            let cand: Vec<f64> = c.iter().zip(dir.iter()).map(|(a, d)| a - step * d).collect();
            let (fc, _, _) = reduced(&cand);
            if fc <= f + 1e-15 * f.abs().max(1.0) || step < 1e-10 {
                c = cand;
                break;
            }
            step *= 0.5;
        }
    }
    let residual = resid(&c);
    if residual > 1e-10 {
        return Err(Error::NotConverged { what: "tilt newton", iterations, residual });
    }
    let theta = mgf.theta_of(&c);
    let lambda = mgf.lambda(&theta);
    let (_, _, hc) = reduced(&c);
    let eig = SymmetricEigen::new(hc).eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(0.0, f64::max);
    Ok(TiltSolution {
        lambda_star: dot(&theta, &zf) - lambda,
        zeta: zf,
        theta,
        lambda,
        residual,
        iterations,
        condition: if r == 0 { 1.0 } else { hi / lo },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Serialize)]
pub struct MartingaleSample {
    pub direction: Direction,
    pub n: usize,
    pub seed: Option<u64>,
    pub log_w: f64,
    pub w: f64,
}

/// Dimension of the lattice generated by `R − R`; the weak disorder
/// theory assumes at least 3.
pub fn lattice_rank(geom: &StepGeometry) -> usize {
    geom.direction_basis().len()
}

fn one_step(spec: &PotentialSpec) -> Result<PotentialSpec> {
    match spec.kind {
        PotentialKind::Window { .. } | PotentialKind::General(_) => {
            Err(Error::InvalidModel("weak disorder needs a potential of (ω₀, z₁) only".into()))
        }
        // a site potential ignores the window, so no memory is needed
        PotentialKind::Site => Ok(spec.clone().with_ell(0)),
        _ => Ok(spec.clone().with_ell(spec.ell.max(1))),
    }
}

/// The backward chain as a forward one: steps `−z`, and the potential of
/// the original step read at the arrival point.
fn reflected(geom: &StepGeometry, spec: &PotentialSpec) -> Result<(StepGeometry, PotentialSpec)> {
    let orig: Vec<Vec<i64>> = geom.steps().to_vec();
    let refl: Vec<Vec<i64>> = orig.iter().map(|z| z.iter().map(|c| -c).collect()).collect();
    let rgeom = StepGeometry::new(geom.dim(), refl.clone(), geom.weights().to_vec())?;
    let radius = orig.iter().flatten().map(|c| c.abs()).max().unwrap_or(0);
    let inner = spec.clone();
    let func = move |view: &LocalView<'_>, w: &[usize]| inner.eval_local(view.at(&refl[w[0]]), &w[..1], &orig);
    let rspec = PotentialSpec { kind: PotentialKind::General(GeneralPotential { radius, func: Arc::new(func) }), ell: 1, beta: 1.0 };
    Ok((rgeom, rspec))
}

/// `W_n^± = e^{−nλ(β,θ)} Z_n^±` on one environment.
pub fn simulate_w(
    env: &Environment,
    spec: &PotentialSpec,
    geom: &StepGeometry,
    mgf: &AveragedMgf,
    theta: &[f64],
    n: usize,
    direction: Direction,
) -> Result<MartingaleSample> {
    if !geom.strictly_directed() {
        return Err(Error::InvalidModel("martingales W_n need a strictly directed step set".into()));
    }
    if lattice_rank(geom) < 3 {
        log::warn!("R − R spans a lattice of rank {} < 3; weak disorder is not expected", lattice_rank(geom));
    }
    let spec = one_step(spec)?;
    spec.validate(geom, env)?;
    let log_z = match direction {
        Direction::Forward => DpEngine::new(geom, env, &spec)?.with_tilt(theta)?.run(n)?.log_total(),
        Direction::Backward => {
            let (rg, rs) = reflected(geom, &spec)?;
            let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
            DpEngine::new(&rg, env, &rs)?.with_tilt(&neg)?.run(n)?.log_total()
        }
    };
    let log_w = log_z - n as f64 * mgf.lambda(theta);
    let seed = match env.model() {
        EnvironmentModel::Iid { seed, .. } => Some(*seed),
        EnvironmentModel::Periodic { .. } => None,
    };
    Ok(MartingaleSample { direction, n, seed, log_w, w: log_w.exp() })
}

/// Doob pair of a periodic model: `q^θ` and its invariant law `μ^θ`.
#[derive(Debug, Clone, Serialize)]
pub struct GibbsPair {
    pub log_rho: f64,
    pub mu: Vec<f64>,
    /// Row-major `|states| × |R|`.
    pub q: Vec<f64>,
    pub num_steps: usize,
    pub row_residual: f64,
    pub stationarity_residual: f64,
}

impl GibbsPair {
    pub fn from_model(model: &FiniteModel, theta: &[f64]) -> Result<Self> {
        let p = model.perron(theta)?;
        let mut q = p.doob_kernel(model);
        let mut mu = p.doob_measure();
        let k = model.num_steps();
        let ms: f64 = mu.iter().sum();
        mu.iter_mut().for_each(|m| *m /= ms);
        let mut row_residual: f64 = 0.0;
        for row in q.chunks_mut(k) {
            let s: f64 = row.iter().sum();
            row_residual = row_residual.max((s - 1.0).abs());
            row.iter_mut().for_each(|v| *v /= s);
        }
        let stationarity_residual = stationarity_residual(model, &mu, &q);
        Ok(GibbsPair { log_rho: p.log_rho, mu, q, num_steps: k, row_residual, stationarity_residual })
    }

    /// Occupation measure `ν(s, z) = μ(s) q(s, z)`.
    pub fn occupation(&self) -> Vec<f64> {
        self.q
            .iter()
            .enumerate()
            .map(|(i, q)| self.mu[i / self.num_steps] * q)
            .collect()
    }
}

/// `‖μq − μ‖₁`.
pub fn stationarity_residual(model: &FiniteModel, mu: &[f64], q: &[f64]) -> f64 {
    let k = model.num_steps();
    let mut out = vec![0.0; mu.len()];
    for s in 0..mu.len() {
        for z in 0..k {
            out[model.next(s, z)] += mu[s] * q[s * k + z];
        }
    }
    out.iter().zip(mu).map(|(a, b)| (a - b).abs()).sum()
}

pub fn build_gibbs_pair(
    env: &Environment,
    spec: &PotentialSpec,
    geom: &StepGeometry,
    theta: &[f64],
) -> Result<GibbsPair> {
    GibbsPair::from_model(&FiniteModel::build(geom, env, spec)?, theta)
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakDisorderReport {
    pub beta: f64,
    pub zeta: Vec<f64>,
    pub theta: Vec<f64>,
    pub lambda: f64,
    pub lambda_star: f64,
    /// Mean over environments of the extrapolated `F_n / n` at `x̂_n(ζ)`.
    pub dp_estimate: f64,
    pub gap: f64,
    pub se: f64,
    pub extrapolation_residual: f64,
    pub schedule: Vec<usize>,
    /// Mean of `F_n / n` over environments at each `n`.
    pub mean_f_over_n: Vec<f64>,
    /// Sample mean and variance of `W_n^+` at each `n`.
    pub mean_w: Vec<f64>,
    pub var_trace: Vec<f64>,
    pub l2_consistent: bool,
    pub samples: usize,
    pub note: &'static str,
}

pub const WEAK_DISORDER_NOTE: &str =
    "diagnostic only: a bounded variance trace is consistent with L2 boundedness but does not certify weak disorder";

/// Compares the point-to-point free energy at `ζ`, averaged over `seeds`,
/// with `−λ*(β, ζ)`. One tilted DP per environment serves both the
/// point-to-point value (untilted via `F_n(g + θ·z₁, x) = F_n(g, x) + θ·x`)
/// and `W_n^+`.
pub fn verify_weak_disorder(
    env: &Environment,
    spec: &PotentialSpec,
    geom: &StepGeometry,
    zeta: &Velocity,
    schedule: &[usize],
    seeds: &[u64],
) -> Result<WeakDisorderReport> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) || seeds.is_empty() {
        return Err(Error::Config("need a strictly increasing n schedule and at least one seed".into()));
    }
    let mgf = AveragedMgf::from_env(geom, env, spec)?;
    let sol = solve_tilt(&mgf, geom, zeta)?;
    let spec = one_step(spec)?;
    let (_, rep) = geom.face_of(zeta)?;
    let plans: Vec<_> = schedule.iter().map(|&n| geom.path_endpoint(&rep, n as u64)).collect();
    let face_dim = geom.faces()[rep.face].dim;
    let n_max = *schedule.last().unwrap();
    let mut per_env = Vec::with_capacity(seeds.len());
    let mut ws = vec![Vec::with_capacity(seeds.len()); schedule.len()];
    let mut fs = vec![Vec::with_capacity(seeds.len()); schedule.len()];
    for &seed in seeds {
        let e = env.with_seed(seed);
        let engine = DpEngine::new(geom, &e, &spec)?.with_tilt(&sol.theta)?;
        let mut ys = Vec::with_capacity(schedule.len());
        engine.run_with(n_max, |layer| {
            if let Some(i) = schedule.iter().position(|&n| n == layer.stage()) {
                let n = layer.stage() as f64;
                let x = &plans[i].endpoint;
                let shift: f64 = x.iter().zip(&sol.theta).map(|(&a, b)| a as f64 * b).sum();
                let f = layer
                    .endpoint_log_mass(x)
                    .ok_or_else(|| Error::Infeasible(format!("endpoint {x:?} unreachable")))?
                    - shift;
                ys.push(f / n.max(1.0));
                fs[i].push(f / n.max(1.0));
                ws[i].push((layer.log_total() - n * sol.lambda).exp());
            }
            Ok(())
        })?;
        let model = if face_dim == 0 { Extrapolation::Linear } else { Extrapolation::LocalClt { dim: face_dim } };
        per_env.push(extrapolate(schedule, &ys, model));
    }
    let k = seeds.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        if v.len() < 2 {
            0.0
        } else {
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        }
    };
    let ests: Vec<f64> = per_env.iter().map(|p| p.0).collect();
    let dp_estimate = mean(&ests);
    let var_trace: Vec<f64> = ws.iter().map(|w| var(w)).collect();
    let half = var_trace[var_trace.len() / 2];
    let last = *var_trace.last().unwrap();
    Ok(WeakDisorderReport {
        beta: mgf.beta,
        zeta: sol.zeta.clone(),
        theta: sol.theta.clone(),
        lambda: sol.lambda,
        lambda_star: sol.lambda_star,
        dp_estimate,
        gap: dp_estimate + sol.lambda_star,
        se: (var(&ests) / k).sqrt(),
        extrapolation_residual: per_env.iter().map(|p| p.1).filter(|r| r.is_finite()).fold(0.0, f64::max),
        schedule: schedule.to_vec(),
        mean_f_over_n: fs.iter().map(|f| mean(f)).collect(),
        mean_w: ws.iter().map(|w| mean(w)).collect(),
        l2_consistent: var_trace.iter().all(|v| v.is_finite()) && last <= 2.0 * half + 0.05,
        var_trace,
        samples: seeds.len(),
        note: WEAK_DISORDER_NOTE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space_time_1d() -> StepGeometry {
        StepGeometry::uniform(2, vec![vec![-1, 1], vec![1, 1]]).unwrap()
    }

    #[test]
    fn gaussian_mgf_adds_half_beta_squared() {
        let g = space_time_1d();
        let m = Marginal::Gaussian { mean: 0.0, std_dev: 1.0 };
        let mgf = AveragedMgf::new(&g, &m, &PotentialSpec::site(0.3)).unwrap();
        let th = [0.4, -0.2];
        let free = (0.5 * (-0.4f64 - 0.2).exp() + 0.5 * (0.4f64 - 0.2).exp()).ln();
        assert!((mgf.lambda(&th) - (0.045 + free)).abs() < 1e-14);
    }

    #[test]
    fn logistic_tilt() {
        let g = space_time_1d();
        let mgf = AveragedMgf::new(&g, &Marginal::Constant { value: 0.0 }, &PotentialSpec::site(0.0)).unwrap();
        let sol = solve_tilt(&mgf, &g, &Velocity::from_ratios(&[(3, 5), (1, 1)])).unwrap();
        assert!((sol.theta[0] - 0.6f64.atanh()).abs() < 1e-12);
        assert_eq!(sol.theta[1], 0.0);
        assert!(solve_tilt(&mgf, &g, &Velocity::from_integers(&[1, 1])).is_err());
    }

    #[test]
    fn zero_beta_martingale_is_one() {
        let g = StepGeometry::uniform(3, vec![vec![1, 0, 1], vec![-1, 0, 1], vec![0, 1, 1], vec![0, -1, 1]]).unwrap();
        let env = Environment::iid(Marginal::Gaussian { mean: 0.0, std_dev: 1.0 }, 3).unwrap();
        let spec = PotentialSpec::site(0.0);
        let mgf = AveragedMgf::from_env(&g, &env, &spec).unwrap();
        let th = [0.3, -0.1, 0.0];
        for dir in [Direction::Forward, Direction::Backward] {
            let s = simulate_w(&env, &spec, &g, &mgf, &th, 7, dir).unwrap();
            assert!((s.w - 1.0).abs() < 1e-12, "{dir:?} {}", s.w);
        }
    }

    #[test]
    fn one_step_martingales() {
        let g = space_time_1d();
        let env = Environment::iid(Marginal::Gaussian { mean: 0.0, std_dev: 1.0 }, 11).unwrap();
        let spec = PotentialSpec::site(0.7);
        let mgf = AveragedMgf::from_env(&g, &env, &spec).unwrap();
        let th = [0.2, 0.0];
        let f = simulate_w(&env, &spec, &g, &mgf, &th, 1, Direction::Forward).unwrap();
        let w0 = env.value(&[0, 0]);
        let lam = mgf.lambda(&th);
        let expect = 0.5 * ((0.7 * w0 + 0.2 - lam).exp() + (0.7 * w0 - 0.2 - lam).exp());
        assert!((f.w - expect).abs() < 1e-12);
        let b = simulate_w(&env, &spec, &g, &mgf, &th, 1, Direction::Backward).unwrap();
        // X_{-1} = -z, potential read there, weight e^{θ·z}
        let expect: f64 = [[-1i64, 1], [1, 1]]
            .iter()
            .map(|z| 0.5 * (0.7 * env.value(&[-z[0], -z[1]]) + 0.2 * z[0] as f64 - lam).exp())
            .sum();
        assert!((b.w - expect).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_gibbs_pair() {
        let g = space_time_1d();
        let env = Environment::periodic(vec![2, 2], vec![0.5; 4]).unwrap();
        let spec = PotentialSpec::site(1.0);
        let th = [0.3, 0.0];
        let pair = build_gibbs_pair(&env, &spec, &g, &th).unwrap();
        let z = 0.5 * (0.3f64.exp() + (-0.3f64).exp());
        assert!((pair.q[1] - 0.5 * 0.3f64.exp() / z).abs() < 1e-12);
        let m = pair.mu[0];
        assert!(pair.mu.iter().all(|v| (v - m).abs() < 1e-12));
        assert!(pair.stationarity_residual < 1e-12);
    }

    #[test]
    fn hessian_is_psd_with_gauge_null_space() {
        let g = StepGeometry::uniform(2, vec![vec![-1, 1], vec![0, 1], vec![2, 1]]).unwrap();
        let mgf = AveragedMgf::new(&g, &Marginal::Bernoulli { p: 0.3, low: -1.0, high: 1.0 }, &PotentialSpec::site(0.5))
            .unwrap();
        let h = mgf.hess(&[0.2, 5.0]);
        let eig = SymmetricEigen::new(h.clone()).eigenvalues;
        assert!(eig.iter().all(|&e| e > -1e-12));
        let v = DVector::from_vec(vec![0.0, 1.0]);
        assert!((&h * v).norm() < 1e-12);
    }
}
