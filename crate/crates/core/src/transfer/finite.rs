//! Periodic environments folded onto the torus: the chain on
//! `(x mod L, z_{1,ℓ})` is finite, and free energies become Perron roots.

use std::collections::{BTreeMap, VecDeque};

use crate::environment::{Environment, PotentialSpec};
use crate::error::{Error, Result};
use crate::geometry::StepGeometry;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TorusState {
    /// Position reduced into `[0, L_i)`.
    pub x: Vec<i64>,
    /// Upcoming steps `z_{1,ℓ}` as step indices.
    pub mem: Vec<usize>,
}

/// The environment-plus-memory chain of a periodic model. Choosing step
/// `z` in state `(x, m)` forms the window `m ++ [z]`, collects
/// `log p(z) + βg(x, window[..ℓ])`, and moves to `(x + window[0], window[1..])`.
#[derive(Debug, Clone)]
pub struct FiniteModel {
    dim: usize,
    steps: Vec<Vec<i64>>,
    states: Vec<TorusState>,
    next: Vec<usize>,
    log_p: Vec<f64>,
    potential: Vec<f64>,
    advance: Vec<usize>,
}

fn reduce(x: &[i64], period: &[usize]) -> Vec<i64> {
    x.iter().zip(period).map(|(&c, &l)| c.rem_euclid(l as i64)).collect()
}

impl FiniteModel {
    pub fn build(geom: &StepGeometry, env: &Environment, spec: &PotentialSpec) -> Result<Self> {
        let period = env.period().ok_or(Error::NotPeriodic)?.to_vec();
        spec.validate(geom, env)?;
        let k = geom.num_steps();
        let ell = spec.ell;
        let steps = geom.steps().to_vec();

        let mut index: BTreeMap<TorusState, usize> = BTreeMap::new();
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        let mut starts = vec![Vec::new()];
        for _ in 0..ell {
            starts = starts
                .into_iter()
                .flat_map(|m: Vec<usize>| {
                    (0..k).map(move |z| {
                        let mut m = m.clone();
                        m.push(z);
                        m
                    })
                })
                .collect();
        }
        for mem in starts {
            let s = TorusState { x: vec![0; geom.dim()], mem };
            index.insert(s.clone(), 0);
            queue.push_back(s.clone());
            order.push(s);
        }
        while let Some(s) = queue.pop_front() {
            for z in 0..k {
                let t = Self::successor(&s, z, &steps, &period);
                if !index.contains_key(&t) {
                    index.insert(t.clone(), 0);
                    queue.push_back(t.clone());
                    order.push(t);
                }
            }
        }
        order.sort();
        for (i, s) in order.iter().enumerate() {
            index.insert(s.clone(), i);
        }

        let mut next = Vec::with_capacity(order.len() * k);
        let mut potential = Vec::with_capacity(order.len() * k);
        let mut advance = Vec::with_capacity(order.len() * k);
        for s in &order {
            for z in 0..k {
                let mut window = s.mem.clone();
                window.push(z);
                next.push(index[&Self::successor(s, z, &steps, &period)]);
                potential.push(spec.eval(env, geom, &s.x, &window[..ell.max(1)])?);
                advance.push(window[0]);
            }
        }
        Ok(FiniteModel {
            dim: geom.dim(),
            steps,
            states: order,
            next,
            log_p: geom.weights().iter().map(|p| p.ln()).collect(),
            potential,
            advance,
        })
    }

    fn successor(s: &TorusState, z: usize, steps: &[Vec<i64>], period: &[usize]) -> TorusState {
        let a = if s.mem.is_empty() { z } else { s.mem[0] };
        let x: Vec<i64> = s.x.iter().zip(&steps[a]).map(|(p, q)| p + q).collect();
        let mut mem: Vec<usize> = s.mem.iter().skip(1).copied().collect();
        if !s.mem.is_empty() {
            mem.push(z);
        }
        TorusState { x: reduce(&x, period), mem }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn num_states(&self) -> usize {
        self.states.len()
    }
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }
    pub fn states(&self) -> &[TorusState] {
        &self.states
    }
    pub fn steps(&self) -> &[Vec<i64>] {
        &self.steps
    }
    /// `S_z⁺(s)`.
    pub fn next(&self, s: usize, z: usize) -> usize {
        self.next[s * self.steps.len() + z]
    }
    /// `log p_ref(z)`.
    pub fn log_p(&self, z: usize) -> f64 {
        self.log_p[z]
    }
    /// `βg` collected when step `z` is chosen in state `s`.
    pub fn potential(&self, s: usize, z: usize) -> f64 {
        self.potential[s * self.steps.len() + z]
    }
    /// Step by which the position moves when `z` is chosen in `s`.
    pub fn advance(&self, s: usize, z: usize) -> &[i64] {
        &self.steps[self.advance[s * self.steps.len() + z]]
    }

    /// Replaces the potential table, e.g. to truncate or rescale it.
    pub fn with_potential(mut self, f: impl Fn(usize, usize, f64) -> f64) -> Self {
        let k = self.steps.len();
        for s in 0..self.states.len() {
            for z in 0..k {
                self.potential[s * k + z] = f(s, z, self.potential[s * k + z]);
            }
        }
        self
    }

    pub fn with_reference_kernel(mut self, p: &[f64]) -> Result<Self> {
        if p.len() != self.steps.len() || p.iter().any(|&w| !(w > 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(Error::InvalidWeights("reference kernel must be a positive distribution".into()));
        }
        self.log_p = p.iter().map(|w| w.ln()).collect();
        Ok(self)
    }

    /// `log p(z) + βg + t · advance` for every `(s, z)`.
    pub fn log_weights(&self, tilt: &[f64]) -> Vec<f64> {
        let k = self.steps.len();
        (0..self.states.len() * k)
            .map(|i| {
                let z = i % k;
                let a = &self.steps[self.advance[i]];
                let t: f64 = tilt.iter().zip(a).map(|(u, &v)| u * v as f64).sum();
                self.log_p[z] + self.potential[i] + t
            })
            .collect()
    }

    /// Strongly connected components (Tarjan), in discovery order.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.states.len();
        let k = self.steps.len();
        let mut index = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut comps = Vec::new();
        let mut counter = 0;
        for root in 0..n {
            if index[root] != usize::MAX {
                continue;
            }
            let mut call: Vec<(usize, usize)> = vec![(root, 0)];
            index[root] = counter;
            low[root] = counter;
            counter += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut child)) = call.last_mut() {
                if *child < k {
                    let w = self.next[v * k + *child];
                    *child += 1;
                    if index[w] == usize::MAX {
                        index[w] = counter;
                        low[w] = counter;
                        counter += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    call.pop();
                    if let Some(&(parent, _)) = call.last() {
                        low[parent] = low[parent].min(low[v]);
                    }
                    if low[v] == index[v] {
                        let mut comp = Vec::new();
                        loop {
                            let w = stack.pop().unwrap();
                            on_stack[w] = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        comp.sort_unstable();
                        comps.push(comp);
                    }
                }
            }
        }
        comps
    }

    pub fn check_irreducible(&self) -> Result<()> {
        let comps = self.components();
        if comps.len() > 1 {
            return Err(Error::Reducible { components: comps });
        }
        Ok(())
    }

    /// Perron root and eigenvectors of `A(s → S_z⁺ s) = exp(log_weights)`.
    pub fn perron(&self, tilt: &[f64]) -> Result<Perron> {
        self.check_irreducible()?;
        let lw = self.log_weights(tilt);
        perron_from_log_weights(self, &lw)
    }
}

/// Spectral data of the tilted transfer matrix.
#[derive(Debug, Clone)]
pub struct Perron {
    pub log_rho: f64,
    /// Right eigenvector `φ`, max-normalized.
    pub right: Vec<f64>,
    /// Left eigenvector `ψ`, normalized so `Σ ψ φ = 1`.
    pub left: Vec<f64>,
    pub iterations: usize,
    /// Relative width of the final Collatz–Wielandt bracket.
    pub residual: f64,
    log_weights: Vec<f64>,
}

const PERRON_TOL: f64 = 1e-13;
const PERRON_MAX_ITER: usize = 1_000_000;

fn perron_from_log_weights(model: &FiniteModel, lw: &[f64]) -> Result<Perron> {
    let n = model.num_states();
    let k = model.num_steps();
    let scale = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a: Vec<f64> = lw.iter().map(|w| (w - scale).exp()).collect();
    let row_sums: Vec<f64> = (0..n).map(|s| a[s * k..(s + 1) * k].iter().sum()).collect();
    let shift = row_sums.iter().sum::<f64>() / n as f64;

    let mut u = vec![1.0f64; n];
    let mut nu = vec![0.0f64; n];
    let mut rho = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < PERRON_MAX_ITER {
        iterations += 1;
        for s in 0..n {
            let mut acc = shift * u[s];
            for z in 0..k {
                acc += a[s * k + z] * u[model.next[s * k + z]];
            }
            nu[s] = acc;
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for s in 0..n {
            let r = nu[s] / u[s];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let m = nu.iter().copied().fold(0.0, f64::max);
        for (x, y) in u.iter_mut().zip(&nu) {
            *x = y / m;
        }
        rho = 0.5 * (lo + hi) - shift;
        residual = (hi - lo) / rho;
        if residual <= PERRON_TOL {
            break;
        }
    }
    if residual > PERRON_TOL {
        return Err(Error::NotConverged { what: "perron right eigenvector", iterations, residual });
    }

    let mut v = vec![1.0f64; n];
    let mut left_res = f64::INFINITY;
    let mut left_iter = 0;
    while left_iter < PERRON_MAX_ITER {
        left_iter += 1;
        let mut nv: Vec<f64> = v.iter().map(|x| shift * x).collect();
        for s in 0..n {
            for z in 0..k {
                nv[model.next[s * k + z]] += v[s] * a[s * k + z];
            }
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for s in 0..n {
            let r = nv[s] / v[s];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let m = nv.iter().copied().fold(0.0, f64::max);
        for (x, y) in v.iter_mut().zip(&nv) {
            *x = y / m;
        }
        left_res = (hi - lo) / (0.5 * (lo + hi) - shift);
        if left_res <= PERRON_TOL {
            break;
        }
    }
    if left_res > PERRON_TOL {
        return Err(Error::NotConverged { what: "perron left eigenvector", iterations: left_iter, residual: left_res });
    }
    let norm: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    for x in v.iter_mut() {
        *x /= norm;
    }
    Ok(Perron {
        log_rho: rho.ln() + scale,
        right: u,
        left: v,
        iterations: iterations + left_iter,
        residual: residual.max(left_res),
        log_weights: lw.to_vec(),
    })
}

impl Perron {
    /// The Doob transform `q(s, z) = A(s,z) φ(S_z⁺ s) / (ρ φ(s))`, row-major.
    pub fn doob_kernel(&self, model: &FiniteModel) -> Vec<f64> {
        let k = model.num_steps();
        (0..model.num_states() * k)
            .map(|i| {
                let s = i / k;
                (self.log_weights[i] - self.log_rho).exp() * self.right[model.next[i]] / self.right[s]
            })
            .collect()
    }

    /// Invariant law `μ(s) = ψ(s) φ(s)` of the Doob kernel.
    pub fn doob_measure(&self) -> Vec<f64> {
        self.left.iter().zip(&self.right).map(|(a, b)| a * b).collect()
    }

    /// `∇_t log ρ(t)`: the mean advance under the Doob pair.
    pub fn mean_advance(&self, model: &FiniteModel) -> Vec<f64> {
        let q = self.doob_kernel(model);
        let mu = self.doob_measure();
        let k = model.num_steps();
        let mut out = vec![0.0; model.dim()];
        for s in 0..model.num_states() {
            for z in 0..k {
                let w = mu[s] * q[s * k + z];
                for (o, &c) in out.iter_mut().zip(model.advance(s, z)) {
                    *o += w * c as f64;
                }
            }
        }
        out
    }
}

/// `log ρ` of the transfer matrix for the potential `g + t · z₁` on a periodic environment.
pub fn perron_free_energy(env: &Environment, spec: &PotentialSpec, geom: &StepGeometry, tilt: &[f64]) -> Result<f64> {
    if tilt.len() != geom.dim() {
        return Err(Error::DimensionMismatch { expected: geom.dim(), got: tilt.len() });
    }
    Ok(FiniteModel::build(geom, env, spec)?.perron(tilt)?.log_rho)
}
