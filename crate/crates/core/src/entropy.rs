//! Relative entropy of measure-kernel pairs on the finite chain of a
//! periodic model, and the concave programs behind the entropy variational
//! formulas.
//!
//! Both programs are solved through their duals. For `min_entropy` the dual
//! `D(h) = Σ_s μ_s [h(s) − log Σ_z p_z e^{h(S_z s)}]` is smooth and concave.
//! For `maximize_variational` the dual
//! `max_s log Σ_z p_z e^{g(s,z) + t·a(s,z) + h(S_z s) − h(s)} − t·ζ` is a max
//! over states; it is smoothed to `τ log Σ_s e^{L_s/τ}` and `τ` is driven to
//! zero with warm starts. Every iterate yields a certificate: the unsmoothed
//! dual bounds the optimum from above, and the softmax pair `ν = π q` is a
//! primal point whose infeasibility is reported as the KKT residual.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::transfer::FiniteModel;

/// `H(μ × q | μ × p)` of a pair on the model's chain.
pub fn entropy_of_pair(model: &FiniteModel, mu: &[f64], q: &[f64]) -> Result<f64> {
    let k = model.num_steps();
    check_pair(model, mu, q)?;
    let mut h = 0.0;
    for (s, &m) in mu.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let row: f64 = (0..k)
            .filter(|&z| q[s * k + z] > 0.0)
            .map(|z| q[s * k + z] * (q[s * k + z].ln() - model.log_p(z)))
            .sum();
        h += m * row;
    }
    Ok(h.max(0.0))
}

fn check_pair(model: &FiniteModel, mu: &[f64], q: &[f64]) -> Result<()> {
    let n = model.num_states();
    let k = model.num_steps();
    if mu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: mu.len() });
    }
    if q.len() != n * k {
        return Err(Error::DimensionMismatch { expected: n * k, got: q.len() });
    }
    if mu.iter().any(|&m| !(m >= 0.0)) || (mu.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidModel("μ must be a probability vector".into()));
    }
    for row in q.chunks(k) {
        if row.iter().any(|&v| !(v >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel("q must be row-stochastic".into()));
        }
    }
    Ok(())
}

/// `E^ν[g ∧ c] − H(ν | μ ⊗ p)` for a joint measure `ν(s, z)`.
pub fn objective(model: &FiniteModel, nu: &[f64], truncation: Option<f64>) -> f64 {
    let k = model.num_steps();
    let mut out = 0.0;
    for (s, row) in nu.chunks(k).enumerate() {
        let m: f64 = row.iter().sum();
        for (z, &v) in row.iter().enumerate() {
            if v > 0.0 {
                let g = truncation.map_or(model.potential(s, z), |c| model.potential(s, z).min(c));
                out += v * (g + model.log_p(z) - (v / m).ln());
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyValue {
    pub value: f64,
    /// Primal minus dual objective.
    pub gap: f64,
    /// `‖μq − μ‖₁` of the returned kernel.
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// `inf { H(μ × q | μ × p) : μq = μ }` and a minimizing kernel. Rows of
/// states outside the support of `μ` are set to `p`.
pub fn min_entropy(model: &FiniteModel, mu: &[f64]) -> Result<(EntropyValue, Vec<f64>)> {
    let n = model.num_states();
    let k = model.num_steps();
    if mu.len() != n || mu.iter().any(|&m| !(m >= 0.0)) || (mu.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidModel("μ must be a probability vector on the model's states".into()));
    }
    let support: Vec<usize> = (0..n).filter(|&s| mu[s] > 0.0).collect();
    let mut pos = vec![usize::MAX; n];
    for (i, &s) in support.iter().enumerate() {
        pos[s] = i;
    }
    let m = support.len();
    // allowed moves stay in the support
    let moves: Vec<Vec<(usize, usize)>> = support
        .iter()
        .map(|&s| (0..k).filter(|&z| pos[model.next(s, z)] != usize::MAX).map(|z| (z, pos[model.next(s, z)])).collect())
        .collect();
    if moves.iter().any(|mv| mv.is_empty()) {
        return Err(Error::Infeasible("some state of the support cannot move inside the support".into()));
    }
    let w: Vec<f64> = support.iter().map(|&s| mu[s]).collect();
    // rows of q for the potential h, with log-normalizers
    let rows = |h: &[f64]| -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut qs = Vec::with_capacity(m);
        let mut ls = Vec::with_capacity(m);
        for mv in &moves {
            let e: Vec<f64> = mv.iter().map(|&(z, j)| model.log_p(z) + h[j]).collect();
            let mx = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let l = mx + e.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
            qs.push(e.iter().map(|v| (v - l).exp()).collect());
            ls.push(l);
        }
        (qs, ls)
    };
    let dual = |h: &[f64]| -> f64 {
        let (_, ls) = rows(h);
        (0..m).map(|i| w[i] * (h[i] - ls[i])).sum()
    };
    let mut h = vec![0.0; m];
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    while iterations < 200 {
        let (qs, _) = rows(&h);
        // gradient μ_j − inflow_j and Hessian −Σ μ_s Cov_{q_s}(e_next)
        let mut g = DVector::from_column_slice(&w);
        let mut hess = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            let mut mean = vec![0.0; m];
            for (&(_, j), &qv) in moves[i].iter().zip(&qs[i]) {
                g[j] -= w[i] * qv;
                mean[j] += qv;
            }
            for (j1, &a) in mean.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                hess[(j1, j1)] += w[i] * a;
                for (j2, &b) in mean.iter().enumerate() {
                    hess[(j1, j2)] -= w[i] * a * b;
                }
            }
        }
        grad_norm = g.iter().map(|v| v.abs()).sum();
        if grad_norm < 1e-13 {
            break;
        }
        iterations += 1;
        if h.iter().any(|v| v.abs() > 500.0) {
            return Err(Error::Infeasible("μ cannot be made stationary by a kernel on the allowed moves".into()));
        }
        // gauge h[0] = 0: solve on the remaining coordinates
        let red_h = hess.view((1, 1), (m - 1, m - 1)).into_owned();
        let red_g = g.rows(1, m - 1).into_owned();
        let dir = if m == 1 {
            DVector::zeros(0)
        } else {
            (red_h.clone() + DMatrix::identity(m - 1, m - 1) * 1e-14)
                .cholesky()
                .map(|c| c.solve(&red_g))
                .unwrap_or(red_g)
        };
        let f0 = dual(&h);
        let mut step = 1.0;
        loop {
            let mut cand = h.clone();
            for (c, d) in cand.iter_mut().skip(1).zip(dir.iter()) {
                *c += step * d;
            }
            if dual(&cand) >= f0 - 1e-15 * f0.abs().max(1.0) || step < 1e-12 {
                h = cand;
                break;
            }
            step *= 0.5;
        }
    }
    let (qs, _) = rows(&h);
    let mut q = vec![0.0; n * k];
    for s in 0..n {
        for z in 0..k {
            q[s * k + z] = model.log_p(z).exp();
        }
    }
    for (i, &s) in support.iter().enumerate() {
        q[s * k..(s + 1) * k].iter_mut().for_each(|v| *v = 0.0);
        for (&(z, _), &qv) in moves[i].iter().zip(&qs[i]) {
            q[s * k + z] = qv;
        }
    }
    let primal = entropy_of_pair(model, mu, &q)?;
    let kkt = crate::l2::stationarity_residual(model, mu, &q);
    if kkt > 1e-6 {
        return Err(Error::NotConverged { what: "min entropy dual newton", iterations, residual: grad_norm });
    }
    Ok((EntropyValue { value: primal, gap: primal - dual(&h), kkt_residual: kkt, iterations }, q))
}

#[derive(Debug, Clone)]
pub struct VariationalOptions {
    /// Mean-step constraint `E^ν[Z₁] = ζ`.
    pub zeta: Option<Vec<f64>>,
    /// Truncation level `c` in `E[g ∧ c]`.
    pub truncation: Option<f64>,
    pub gap_tol: f64,
    pub kkt_tol: f64,
    /// Basis of the directions in which the mean constraint is imposed;
    /// defaults to the coordinate axes.
    pub basis: Option<Vec<Vec<f64>>>,
}

impl Default for VariationalOptions {
    fn default() -> Self {
        VariationalOptions { zeta: None, truncation: None, gap_tol: 1e-9, kkt_tol: 1e-9, basis: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationalSolution {
    /// Objective of the primal point `ν`.
    pub value: f64,
    /// Upper bound from the unsmoothed dual.
    pub dual_bound: f64,
    pub gap: f64,
    /// `‖νS − μ‖₁ + |E^ν[a] − ζ|₁` in the constrained directions.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub tau: f64,
    /// Row-major `ν(s, z)`.
    pub nu: Vec<f64>,
    pub mu: Vec<f64>,
    pub q: Vec<f64>,
    /// Dual tilt in the ambient coordinates.
    pub tilt: Vec<f64>,
    pub h: Vec<f64>,
}

struct Program<'a> {
    model: &'a FiniteModel,
    g: Vec<f64>,
    /// `b_i · a(s, z)` for every constrained direction.
    proj: Vec<Vec<f64>>,
    target: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

struct Eval {
    phi: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    pi: Vec<f64>,
}

impl Program<'_> {
    fn dim(&self) -> usize {
        self.model.num_states() - 1 + self.proj.len()
    }

    /// Splits `y` into `h` (with `h[0] = 0`) and `t`.
    fn split(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.model.num_states();
        let mut h = vec![0.0; n];
        h[1..].copy_from_slice(&y[..n - 1]);
        (h, y[n - 1..].to_vec())
    }

    fn rows(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (h, t) = self.split(y);
        let n = self.model.num_states();
        let k = self.model.num_steps();
        let mut q = vec![0.0; n * k];
        let mut ls = vec![0.0; n];
        for s in 0..n {
            let row = &mut q[s * k..(s + 1) * k];
            for (z, r) in row.iter_mut().enumerate() {
                let i = s * k + z;
                let ta: f64 = t.iter().zip(&self.proj).map(|(ti, p)| ti * p[i]).sum();
                *r = self.model.log_p(z) + self.g[i] + ta + h[self.model.next(s, z)] - h[s];
            }
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let l = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|v| *v = (*v - l).exp());
            ls[s] = l;
        }
        (ls, q)
    }

    fn value_only(&self, y: &[f64], tau: f64) -> f64 {
        let (ls, _) = self.rows(y);
        let (_, t) = self.split(y);
        let mx = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        mx + tau * ls.iter().map(|l| ((l - mx) / tau).exp()).sum::<f64>().ln() - dot(&t, &self.target)
    }

    fn eval(&self, y: &[f64], tau: f64) -> Eval {
        let n = self.model.num_states();
        let k = self.model.num_steps();
        let r = self.proj.len();
        let dim = self.dim();
        let (ls, q) = self.rows(y);
        let (_, t) = self.split(y);
        let mx = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let zs: f64 = ls.iter().map(|l| ((l - mx) / tau).exp()).sum();
        let pi: Vec<f64> = ls.iter().map(|l| ((l - mx) / tau).exp() / zs).collect();
        let phi = mx + tau * zs.ln() - dot(&t, &self.target);

        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        let mut jbar = DVector::zeros(dim);
        let mut jj = DMatrix::zeros(dim, dim);
        // coordinate of h(j) in y, if free
        let hidx = |j: usize| if j == 0 { None } else { Some(j - 1) };
        for s in 0..n {
            // J_s = E_q[v] − e_s with v_z = e_{next} ⊕ proj
            let mut js = DVector::zeros(dim);
            let mut vs: Vec<(Option<usize>, Vec<f64>, f64)> = Vec::with_capacity(k);
            for z in 0..k {
                let i = s * k + z;
                let qz = q[i];
                let hj = hidx(self.model.next(s, z));
                if let Some(c) = hj {
                    js[c] += qz;
                }
                let pv: Vec<f64> = self.proj.iter().map(|p| p[i]).collect();
                for (a, &pvi) in pv.iter().enumerate() {
                    js[n - 1 + a] += qz * pvi;
                }
                vs.push((hj, pv, qz));
            }
            // ∇²L_s = E_q[v vᵀ] − E_q[v] E_q[v]ᵀ, restricted to the v part
            let mut ev = DVector::zeros(dim);
            ev.copy_from(&js);
            let mut evv = DMatrix::zeros(dim, dim);
            for (hj, pv, qz) in &vs {
                let mut v = DVector::zeros(dim);
                if let Some(c) = hj {
                    v[*c] = 1.0;
                }
                for (a, &pvi) in pv.iter().enumerate() {
                    v[n - 1 + a] = pvi;
                }
                evv.ger(*qz, &v, &v, 1.0);
            }
            evv.ger(-1.0, &ev, &ev, 1.0);
            if let Some(c) = hidx(s) {
                js[c] -= 1.0;
            }
            hess += evv * pi[s];
            grad.axpy(pi[s], &js, 1.0);
            jbar.axpy(pi[s], &js, 1.0);
            jj.ger(pi[s], &js, &js, 1.0);
        }
        jj.ger(-1.0, &jbar, &jbar, 1.0);
        hess += jj / tau;
        for a in 0..r {
            grad[n - 1 + a] -= self.target[a];
        }
        Eval { phi, grad, hess, pi }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sup_ν { E^ν[g ∧ c] − H(ν | μ ⊗ p) }` over stationary joint measures,
/// optionally with `E^ν[Z₁] = ζ`.
pub fn maximize_variational(model: &FiniteModel, opts: &VariationalOptions) -> Result<VariationalSolution> {
    let n = model.num_states();
    let k = model.num_steps();
    let d = model.dim();
    let g: Vec<f64> = (0..n * k)
        .map(|i| {
            let v = model.potential(i / k, i % k);
            opts.truncation.map_or(v, |c| v.min(c))
        })
        .collect();
    let (basis, target) = match &opts.zeta {
        None => (Vec::new(), Vec::new()),
        Some(z) => {
            if z.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: z.len() });
            }
            let basis = opts
                .basis
                .clone()
                .unwrap_or_else(|| (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect());
            let target: Vec<f64> = basis.iter().map(|b| dot(b, z)).collect();
            (basis, target)
        }
    };
    let proj: Vec<Vec<f64>> = basis
        .iter()
        .map(|b| {
            (0..n * k)
                .map(|i| {
                    let a = model.advance(i / k, i % k);
                    a.iter().zip(b).map(|(&x, y)| x as f64 * y).sum()
                })
                .collect()
        })
        .collect();
    let prog = Program { model, g, proj, target, basis };
    let dim = prog.dim();
    let mut y = vec![0.0; dim];
    let mut tau = 1.0;
    let mut iterations = 0;
    loop {
        // Newton on the smoothed dual at this τ
        for _ in 0..100 {
            let e = prog.eval(&y, tau);
            let gn = e.grad.amax();
            if gn < 1e-12 {
                break;
            }
            iterations += 1;
            let hs = (&e.hess + e.hess.transpose()) * 0.5;
            let dir = hs
                .clone()
                .cholesky()
                .map(|c| c.solve(&e.grad))
                .or_else(|| {
                    let reg = hs.clone() + DMatrix::identity(dim, dim) * (1e-10 * hs.amax().max(1.0));
                    reg.cholesky().map(|c| c.solve(&e.grad))
                })
                .unwrap_or_else(|| e.grad.clone());
            let mut step = 1.0;
            let mut moved = false;
            while step > 1e-12 {
                let cand: Vec<f64> = y.iter().zip(dir.iter()).map(|(a, b)| a - step * b).collect();
                if prog.value_only(&cand, tau) <= e.phi + 1e-4 * step * (-e.grad.dot(&dir)).min(0.0) {
                    y = cand;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
            if y.iter().any(|v| !v.is_finite() || v.abs() > 1e6) {
                return Err(Error::Infeasible("mean-step constraint cannot be met on this model".into()));
            }
        }
        let e = prog.eval(&y, tau);
        let smoothed = certificate(&prog, &y, &e.pi, tau, iterations);
        let polished = polish(&prog, &y, &e.pi).map(|(yp, mu, its)| certificate(&prog, &yp, &mu, 0.0, iterations + its));
        let best = match polished {
            Some(p) if p.gap + p.kkt_residual <= smoothed.gap + smoothed.kkt_residual => p,
            _ => smoothed,
        };
        if best.gap <= opts.gap_tol && best.kkt_residual <= opts.kkt_tol {
            return Ok(best);
        }
        if tau <= 1e-8 {
            if best.gap <= opts.gap_tol.max(1e-6) && best.kkt_residual <= opts.kkt_tol.max(1e-6) {
                return Ok(best);
            }
            return Err(Error::NotConverged {
                what: "variational dual newton",
                iterations,
                residual: best.gap.max(best.kkt_residual),
            });
        }
        tau *= 0.1;
    }
}

/// Newton on the optimality system of the unsmoothed dual: `L_s(h, t) = c`
/// for every state, `μ` invariant under the row kernel with `Σ μ = 1`, and
/// the mean constraint. Started from a smoothed solution.
fn polish(prog: &Program<'_>, y0: &[f64], mu0: &[f64]) -> Option<(Vec<f64>, Vec<f64>, usize)> {
    let model = prog.model;
    let n = model.num_states();
    let k = model.num_steps();
    let ny = prog.dim();
    let (ls0, _) = prog.rows(y0);
    let mut x: Vec<f64> = y0.to_vec();
    x.push(ls0.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    x.extend_from_slice(mu0);
    let dim = x.len();
    let resid = |x: &[f64]| -> Vec<f64> {
        let y = &x[..ny];
        let c = x[ny];
        let mu = &x[ny + 1..];
        let (ls, q) = prog.rows(y);
        let mut out: Vec<f64> = ls.iter().map(|l| l - c).collect();
        let mut inflow = vec![0.0; n];
        for i in 0..n * k {
            inflow[model.next(i / k, i % k)] += mu[i / k] * q[i];
        }
        out.extend(inflow.iter().zip(mu).skip(1).map(|(a, b)| a - b));
        out.push(mu.iter().sum::<f64>() - 1.0);
        for (p, tgt) in prog.proj.iter().zip(&prog.target) {
            let m: f64 = (0..n * k).map(|i| mu[i / k] * q[i] * p[i]).sum();
            out.push(m - tgt);
        }
        out
    };
    debug_assert_eq!(resid(&x).len(), dim);
    let norm = |v: &[f64]| v.iter().map(|a| a.abs()).fold(0.0, f64::max);
    let mut f = resid(&x);
    let mut its = 0;
    while its < 30 && norm(&f) > 1e-14 {
        its += 1;
        let mut jac = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let hstep = 1e-7 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            xp[j] += hstep;
            let mut xm = x.clone();
            xm[j] -= hstep;
            let (fp, fm) = (resid(&xp), resid(&xm));
            for i in 0..dim {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * hstep);
            }
        }
        let dx = jac.lu().solve(&DVector::from_vec(f.clone()))?;
        let mut step = 1.0;
        let f0 = norm(&f);
        loop {
            let cand: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, b)| a - step * b).collect();
            let fc = resid(&cand);
            if norm(&fc) < f0 || step < 1e-4 {
                x = cand;
                f = fc;
                break;
            }
            step *= 0.5;
        }
        if norm(&f) >= f0 {
            break;
        }
    }
    let mu = x[ny + 1..].to_vec();
    if mu.iter().any(|&m| m < -1e-12) || !norm(&f).is_finite() {
        return None;
    }
    Some((x[..ny].to_vec(), mu.iter().map(|m| m.max(0.0)).collect(), its))
}

fn certificate(prog: &Program<'_>, y: &[f64], mu: &[f64], tau: f64, iterations: usize) -> VariationalSolution {
    let model = prog.model;
    let n = model.num_states();
    let k = model.num_steps();
    let (ls, q) = prog.rows(y);
    let (h, t) = prog.split(y);
    let nu: Vec<f64> = (0..n * k).map(|i| mu[i / k] * q[i]).collect();
    let mut inflow = vec![0.0; n];
    for (i, v) in nu.iter().enumerate() {
        inflow[model.next(i / k, i % k)] += v;
    }
    let mut kkt: f64 = inflow.iter().zip(mu).map(|(a, b)| (a - b).abs()).sum();
    kkt += (mu.iter().sum::<f64>() - 1.0).abs();
    for (p, tgt) in prog.proj.iter().zip(&prog.target) {
        kkt += (dot(p, &nu) - tgt).abs();
    }
    let value: f64 = (0..n * k)
        .filter(|&i| nu[i] > 0.0)
        .map(|i| nu[i] * (prog.g[i] + model.log_p(i % k) - q[i].ln()))
        .sum();
    let dual_bound = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max) - dot(&t, &prog.target);
    let mut tilt = vec![0.0; model.dim()];
    for (ti, b) in t.iter().zip(&prog.basis) {
        for (o, bi) in tilt.iter_mut().zip(b) {
            *o += ti * bi;
        }
    }
    VariationalSolution {
        value,
        dual_bound,
        gap: (dual_bound - value).max(0.0),
        kkt_residual: kkt,
        iterations,
        tau,
        mu: mu.to_vec(),
        q,
        nu,
        tilt,
        h,
    }
}

/// `½ Σ |ν − ν'|`.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{Environment, PotentialSpec};
    use crate::geometry::StepGeometry;
    use crate::l2::GibbsPair;

    fn line() -> StepGeometry {
        StepGeometry::uniform(1, vec![vec![1], vec![2]]).unwrap()
    }

    fn periodic_model(spec: PotentialSpec) -> FiniteModel {
        let env = Environment::periodic(vec![3], vec![0.0, 1.0, -0.5]).unwrap();
        FiniteModel::build(&line(), &env, &spec).unwrap()
    }

    #[test]
    fn reference_pair_has_zero_entropy() {
        let m = periodic_model(PotentialSpec::zero());
        let n = m.num_states();
        let mu = vec![1.0 / n as f64; n];
        let q: Vec<f64> = (0..n * 2).map(|_| 0.5).collect();
        assert_eq!(entropy_of_pair(&m, &mu, &q).unwrap(), 0.0);
        let (v, qs) = min_entropy(&m, &mu).unwrap();
        assert!(v.value < 1e-12 && v.kkt_residual < 1e-12);
        assert!(qs.iter().all(|x| (x - 0.5).abs() < 1e-9));
    }

    #[test]
    fn forced_kernel_costs_log_two() {
        // period 1: the single state loops through either step
        let env = Environment::periodic(vec![1], vec![0.0]).unwrap();
        let m = FiniteModel::build(&line(), &env, &PotentialSpec::zero()).unwrap();
        assert_eq!(m.num_states(), 1);
        let q = vec![1.0, 0.0];
        assert!((entropy_of_pair(&m, &[1.0], &q).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn free_variational_value_is_zero() {
        let m = periodic_model(PotentialSpec::zero());
        let sol = maximize_variational(&m, &VariationalOptions::default()).unwrap();
        assert!(sol.value.abs() < 1e-9 && sol.gap < 1e-9);
    }

    #[test]
    fn constrained_free_walk_gives_cramer() {
        let m = periodic_model(PotentialSpec::zero());
        let opts = VariationalOptions { zeta: Some(vec![1.25]), ..Default::default() };
        let sol = maximize_variational(&m, &opts).unwrap();
        let t = (0.25f64 / 0.75).ln();
        let cramer = 1.25 * t - (0.5 * t.exp() + 0.5 * (2.0 * t).exp()).ln();
        assert!((sol.value + cramer).abs() < 1e-8, "{} vs {}", sol.value, -cramer);
    }

    #[test]
    fn matches_perron_and_doob_pair() {
        let m = periodic_model(PotentialSpec::site(1.0));
        let sol = maximize_variational(&m, &VariationalOptions::default()).unwrap();
        let pair = GibbsPair::from_model(&m, &[0.0]).unwrap();
        assert!((sol.value - pair.log_rho).abs() < 1e-8);
        assert!(total_variation(&sol.nu, &pair.occupation()) < 1e-6);
    }
}
