//! Layered transfer recursion over `(endpoint, memory)` states.
//!
//! A layer stores, for every lattice row of its bounding box, the contiguous
//! range of cells that can hold mass, so sparse geometries (space-time walks
//! fill an octahedron, not a cube) do not pay for the whole box. Each target
//! cell pulls from its `|R|` predecessors in scaled linear space; a cell whose
//! scaled sum would underflow is recomputed by an exact log-sum-exp, so `-inf`
//! only ever means "unreachable".

use std::collections::BTreeMap;

use crate::environment::{check_regularity, Environment, PotentialSpec};
use crate::error::{Error, Result};
use crate::geometry::StepGeometry;

/// How many upcoming steps a DP state carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MemoryMode {
    /// `ℓ` steps, the state of the environment-plus-memory Markov chain.
    #[default]
    Chain,
    /// `max(ℓ - 1, 0)` steps, the smallest state that still determines the weights.
    Compact,
}

#[derive(Debug, Clone)]
pub struct DpOptions {
    pub memory: MemoryMode,
    /// Maximum number of stored cells `(endpoint, memory)` per layer.
    pub budget: f64,
    /// Drop states more than this many nats below the layer maximum.
    pub prune: Option<f64>,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions { memory: MemoryMode::Chain, budget: 2.0e8, prune: None }
    }
}

/// Natural-log threshold used by `--prune` (60 decimal orders).
pub const DEFAULT_PRUNE: f64 = 60.0 * std::f64::consts::LN_10;

const UNDERFLOW_GUARD: f64 = 1e-280;

#[derive(Debug, Clone, Copy)]
struct Row {
    /// First cell of the row in the flat cell array.
    start: usize,
    /// Coordinate of the first cell along the row axis.
    lo: i64,
    len: usize,
}

/// One stage `k` of the recursion.
#[derive(Debug, Clone)]
pub struct DpLayer {
    k: usize,
    lo: Vec<i64>,
    dims: Vec<usize>,
    row_axis: usize,
    /// Spacing of reachable cells along the row axis.
    stride: i64,
    prefix_axes: Vec<usize>,
    rows: Vec<Row>,
    mem_len: usize,
    mem_count: usize,
    values: Vec<f64>,
    /// Upper bound on the fraction of mass dropped by pruning so far.
    discarded: f64,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

impl DpLayer {
    pub fn stage(&self) -> usize {
        self.k
    }

    pub fn memory_len(&self) -> usize {
        self.mem_len
    }

    /// Number of finite `(endpoint, memory)` states.
    pub fn num_states(&self) -> usize {
        self.values.iter().filter(|v| v.is_finite()).count()
    }

    pub fn discarded_fraction(&self) -> f64 {
        self.discarded
    }

    fn cell_of(&self, x: &[i64]) -> Option<usize> {
        if x.len() != self.lo.len() {
            return None;
        }
        let mut row = 0usize;
        for &a in &self.prefix_axes {
            let off = x[a] - self.lo[a];
            if off < 0 || off as usize >= self.dims[a] {
                return None;
            }
            row = row * self.dims[a] + off as usize;
        }
        let r = self.rows[row];
        let off = x[self.row_axis] - r.lo;
        if off < 0 || off % self.stride != 0 || (off / self.stride) as usize >= r.len {
            return None;
        }
        Some(r.start + (off / self.stride) as usize)
    }

    /// `log` weight of one state, `-inf` when unreachable.
    pub fn log_weight(&self, x: &[i64], mem_code: usize) -> f64 {
        match self.cell_of(x) {
            Some(c) if mem_code < self.mem_count => self.values[c * self.mem_count + mem_code],
            _ => f64::NEG_INFINITY,
        }
    }

    /// `F_k(x)`: log mass at endpoint `x` summed over memory, `None` if `x ∉ D_k`.
    pub fn endpoint_log_mass(&self, x: &[i64]) -> Option<f64> {
        let c = self.cell_of(x)?;
        let mc = self.mem_count;
        let v = log_sum_exp(self.values[c * mc..(c + 1) * mc].iter().copied());
        v.is_finite().then_some(v)
    }

    /// `log Z_k`.
    pub fn log_total(&self) -> f64 {
        log_sum_exp(self.values.iter().copied())
    }

    fn row_prefix(&self, mut row: usize) -> Vec<i64> {
        let mut x = vec![0i64; self.lo.len()];
        for &a in self.prefix_axes.iter().rev() {
            x[a] = self.lo[a] + (row % self.dims[a]) as i64;
            row /= self.dims[a];
        }
        x
    }

    /// All reachable endpoints with their log masses, sorted lexicographically.
    pub fn endpoints(&self) -> BTreeMap<Vec<i64>, f64> {
        let mc = self.mem_count;
        let mut out = BTreeMap::new();
        for (ri, r) in self.rows.iter().enumerate() {
            if r.len == 0 {
                continue;
            }
            let mut x = self.row_prefix(ri);
            for j in 0..r.len {
                let c = r.start + j;
                let v = log_sum_exp(self.values[c * mc..(c + 1) * mc].iter().copied());
                if v.is_finite() {
                    x[self.row_axis] = r.lo + j as i64 * self.stride;
                    out.insert(x.clone(), v);
                }
            }
        }
        out
    }

    /// Every finite state `(x, memory code, log weight)`.
    pub fn states(&self) -> Vec<(Vec<i64>, usize, f64)> {
        let mc = self.mem_count;
        let mut out = Vec::new();
        for (ri, r) in self.rows.iter().enumerate() {
            let mut x = self.row_prefix(ri);
            for j in 0..r.len {
                x[self.row_axis] = r.lo + j as i64 * self.stride;
                for m in 0..mc {
                    let v = self.values[(r.start + j) * mc + m];
                    if v.is_finite() {
                        out.push((x.clone(), m, v));
                    }
                }
            }
        }
        out
    }
}

/// Transfer recursion for a fixed geometry, environment and potential, with
/// an optional linear tilt `t · z₁` added to every step.
pub struct DpEngine<'a> {
    geom: &'a StepGeometry,
    env: &'a Environment,
    spec: &'a PotentialSpec,
    options: DpOptions,
    log_p: Vec<f64>,
    tilt_dot: Vec<f64>,
    mem_len: usize,
    mem_count: usize,
    /// Size of the per-site potential table, `|R|^ℓ`.
    pot_count: usize,
    /// For every `(a, target memory)`: source memory, potential window code,
    /// and the newly drawn step.
    trans: Vec<(usize, usize, usize)>,
    smin: Vec<i64>,
    smax: Vec<i64>,
    row_axis: usize,
    stride: i64,
    prefix_axes: Vec<usize>,
}

impl<'a> DpEngine<'a> {
    pub fn new(geom: &'a StepGeometry, env: &'a Environment, spec: &'a PotentialSpec) -> Result<Self> {
        Self::with_options(geom, env, spec, DpOptions::default())
    }

    pub fn with_options(
        geom: &'a StepGeometry,
        env: &'a Environment,
        spec: &'a PotentialSpec,
        options: DpOptions,
    ) -> Result<Self> {
        spec.validate(geom, env)?;
        for w in check_regularity(geom, env, spec)? {
            log::warn!("{w}");
        }
        let k = geom.num_steps();
        let d = geom.dim();
        let ell = spec.ell;
        let mem_len = match options.memory {
            MemoryMode::Chain => ell,
            MemoryMode::Compact => ell.saturating_sub(1),
        };
        let too_big = || Error::BudgetExceeded { estimate: f64::INFINITY, budget: options.budget };
        let mem_count = k.checked_pow(mem_len as u32).ok_or_else(too_big)?;
        let pot_count = k.checked_pow(ell as u32).ok_or_else(too_big)?;
        let mut trans = Vec::with_capacity(k * mem_count);
        for a in 0..k {
            for mt in 0..mem_count {
                if mem_len == 0 {
                    trans.push((0, 0, a));
                } else {
                    let sm = a * k.pow(mem_len as u32 - 1) + mt / k;
                    let vcode = if ell == 0 { 0 } else { a * k.pow(ell as u32 - 1) + mt / k.pow((mem_len + 1 - ell) as u32) };
                    trans.push((sm, vcode, mt % k));
                }
            }
        }
        let smin: Vec<i64> = (0..d).map(|i| geom.steps().iter().map(|z| z[i]).min().unwrap()).collect();
        let smax: Vec<i64> = (0..d).map(|i| geom.steps().iter().map(|z| z[i]).max().unwrap()).collect();
        let row_axis = (0..d).max_by_key(|&i| (smax[i] - smin[i], std::cmp::Reverse(i))).unwrap();
        let prefix_axes: Vec<usize> = (0..d).filter(|&i| i != row_axis).collect();
        let stride = row_stride(geom.steps(), &prefix_axes, row_axis);
        Ok(DpEngine {
            geom,
            env,
            spec,
            log_p: geom.weights().iter().map(|w| w.ln()).collect(),
            tilt_dot: vec![0.0; k],
            options,
            mem_len,
            mem_count,
            pot_count,
            trans,
            smin,
            smax,
            row_axis,
            stride,
            prefix_axes,
        })
    }

    /// Adds `t · z₁` to the weight of every step.
    pub fn with_tilt(mut self, t: &[f64]) -> Result<Self> {
        if t.len() != self.geom.dim() {
            return Err(Error::DimensionMismatch { expected: self.geom.dim(), got: t.len() });
        }
        self.tilt_dot = self
            .geom
            .steps()
            .iter()
            .map(|z| z.iter().zip(t).map(|(&a, b)| a as f64 * b).sum())
            .collect();
        Ok(self)
    }

    pub fn memory_len(&self) -> usize {
        self.mem_len
    }

    /// Decodes a memory code into step indices (first step most significant).
    pub fn decode_memory(&self, mut code: usize) -> Vec<usize> {
        let k = self.geom.num_steps();
        let mut mem = vec![0; self.mem_len];
        for slot in mem.iter_mut().rev() {
            *slot = code % k;
            code /= k;
        }
        mem
    }

    pub fn initial_layer(&self) -> DpLayer {
        let d = self.geom.dim();
        let values = (0..self.mem_count)
            .map(|c| self.decode_memory(c).iter().map(|&z| self.log_p[z]).sum())
            .collect();
        DpLayer {
            k: 0,
            lo: vec![0; d],
            dims: vec![1; d],
            row_axis: self.row_axis,
            stride: self.stride,
            prefix_axes: self.prefix_axes.clone(),
            rows: vec![Row { start: 0, lo: 0, len: 1 }],
            mem_len: self.mem_len,
            mem_count: self.mem_count,
            values,
            discarded: 0.0,
        }
    }

    /// `βg(T_xω, w)` for every potential window `w ∈ R^ℓ`.
    fn potential_table(&self, x: &[i64], out: &mut [f64]) {
        let k = self.geom.num_steps();
        let ell = self.spec.ell;
        let mut window = vec![0usize; ell];
        let omega = if self.spec.needs_view() { f64::NAN } else { self.env.value(x) };
        for (w, slot) in out.iter_mut().enumerate() {
            let mut code = w;
            for s in window.iter_mut().rev() {
                *s = code % k;
                code /= k;
            }
            *slot = if self.spec.needs_view() {
                self.spec.eval_view(self.env, x, &window)
            } else {
                self.spec.eval_local(omega, &window, self.geom.steps())
            };
        }
    }

    /// One transition `k → k + 1`.
    pub fn step(&self, src: &DpLayer) -> Result<DpLayer> {
        let steps = self.geom.steps();
        let k = steps.len();
        let d = self.geom.dim();
        let mc = self.mem_count;
        let pc = self.pot_count;
        let stage = src.k + 1;
        let lo: Vec<i64> = (0..d).map(|i| stage as i64 * self.smin[i]).collect();
        let dims: Vec<usize> = (0..d)
            .map(|i| (stage as i64 * (self.smax[i] - self.smin[i])) as usize + 1)
            .collect();
        let num_rows: usize = self.prefix_axes.iter().map(|&a| dims[a]).product();
        if num_rows as f64 > self.options.budget {
            return Err(Error::BudgetExceeded { estimate: num_rows as f64, budget: self.options.budget });
        }

        // predecessor rows and the extent of every target row
        let mut links: Vec<(usize, usize)> = Vec::with_capacity(num_rows * k);
        let mut link_off = Vec::with_capacity(num_rows + 1);
        let mut rows = Vec::with_capacity(num_rows);
        let mut total_cells = 0usize;
        let mut digits = vec![0usize; self.prefix_axes.len()];
        for ri in 0..num_rows {
            link_off.push(links.len());
            let mut rem = ri;
            for (j, &a) in self.prefix_axes.iter().enumerate().rev() {
                digits[j] = rem % dims[a];
                rem /= dims[a];
            }
            let mut ext: Option<(i64, i64)> = None;
            'steps: for (a, z) in steps.iter().enumerate() {
                let mut srow = 0usize;
                for (j, &ax) in self.prefix_axes.iter().enumerate() {
                    let off = digits[j] as i64 + self.smin[ax] - z[ax];
                    if off < 0 || off as usize >= src.dims[ax] {
                        continue 'steps;
                    }
                    srow = srow * src.dims[ax] + off as usize;
                }
                let sr = src.rows[srow];
                if sr.len == 0 {
                    continue;
                }
                links.push((a, srow));
                let s = sr.lo + z[self.row_axis];
                let e = s + (sr.len as i64 - 1) * self.stride;
                ext = Some(match ext {
                    None => (s, e),
                    Some((a0, b0)) => (a0.min(s), b0.max(e)),
                });
            }
            let (rlo, len) = ext.map_or((0, 0), |(a, b)| (a, ((b - a) / self.stride + 1) as usize));
            rows.push(Row { start: total_cells, lo: rlo, len });
            total_cells += len;
        }
        link_off.push(links.len());
        let estimate = total_cells as f64 * mc as f64;
        if estimate > self.options.budget {
            return Err(Error::BudgetExceeded { estimate, budget: self.options.budget });
        }

        // source side: potential tables, their maxima, scaled masses
        let src_cells = src.values.len() / mc;
        let mut vlog = vec![0.0f64; src_cells * pc];
        let mut vmax = vec![f64::NEG_INFINITY; src_cells];
        let mut shift = f64::NEG_INFINITY;
        let site_beta = self.spec.site_beta();
        for (ri, r) in src.rows.iter().enumerate() {
            if r.len == 0 {
                continue;
            }
            let mut x = src.row_prefix(ri);
            for j in 0..r.len {
                let c = r.start + j;
                let best = src.values[c * mc..(c + 1) * mc].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if best == f64::NEG_INFINITY {
                    continue;
                }
                x[src.row_axis] = r.lo + j as i64 * src.stride;
                let table = &mut vlog[c * pc..(c + 1) * pc];
                match site_beta {
                    Some(b) if b == 0.0 => table.fill(0.0),
                    Some(b) => table.fill(b * self.env.value(&x)),
                    None => self.potential_table(&x, table),
                }
                let vm = table.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                vmax[c] = vm;
                shift = shift.max(best + vm);
            }
        }
        let mut fac = vec![1.0f64; if pc > 1 { src_cells * pc } else { 0 }];
        let mut lin = vec![0.0f64; src.values.len()];
        for c in 0..src_cells {
            if vmax[c] == f64::NEG_INFINITY {
                continue;
            }
            if pc > 1 {
                for w in 0..pc {
                    fac[c * pc + w] = (vlog[c * pc + w] - vmax[c]).exp();
                }
            }
            for m in 0..mc {
                let v = src.values[c * mc + m];
                if v > f64::NEG_INFINITY {
                    lin[c * mc + m] = (v + vmax[c] - shift).exp();
                }
            }
        }
        let tmax = self.tilt_dot.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_step: Vec<f64> = (0..k * k).map(|i| self.tilt_dot[i / k] + self.log_p[i % k]).collect();
        let step_fac: Vec<f64> = log_step.iter().map(|w| (w - tmax).exp()).collect();

        let ctx = PullContext {
            src,
            steps,
            k,
            mc,
            pc,
            row_axis: self.row_axis,
            stride: self.stride,
            trans: &self.trans,
            log_step: &log_step,
            step_fac: &step_fac,
            vlog: &vlog,
            fac: &fac,
            lin: &lin,
            offset: shift + tmax,
        };
        let mut values = vec![0.0f64; total_cells * mc];
        fill_rows(&ctx, &rows, &links, &link_off, &mut values);

        let mut layer = DpLayer {
            k: stage,
            lo,
            dims,
            row_axis: self.row_axis,
            stride: self.stride,
            prefix_axes: self.prefix_axes.clone(),
            rows,
            mem_len: self.mem_len,
            mem_count: mc,
            values,
            discarded: src.discarded,
        };
        if let Some(delta) = self.options.prune {
            prune_layer(&mut layer, delta);
        }
        Ok(layer)
    }

    /// Runs `n` transitions, handing every layer (including layer 0) to `visit`.
    pub fn run_with<F: FnMut(&DpLayer) -> Result<()>>(&self, n: usize, mut visit: F) -> Result<DpLayer> {
        let mut layer = self.initial_layer();
        visit(&layer)?;
        for _ in 0..n {
            layer = self.step(&layer)?;
            visit(&layer)?;
        }
        Ok(layer)
    }

    pub fn run(&self, n: usize) -> Result<DpLayer> {
        self.run_with(n, |_| Ok(()))
    }
}

struct PullContext<'c> {
    src: &'c DpLayer,
    steps: &'c [Vec<i64>],
    k: usize,
    mc: usize,
    pc: usize,
    row_axis: usize,
    stride: i64,
    trans: &'c [(usize, usize, usize)],
    /// `t · z_a + log p(z)` at index `a * k + z`.
    log_step: &'c [f64],
    step_fac: &'c [f64],
    vlog: &'c [f64],
    fac: &'c [f64],
    lin: &'c [f64],
    offset: f64,
}

impl PullContext<'_> {
    /// Accumulates every predecessor range into the row, then converts the
    /// scaled sums back to logs.
    fn fill_row(&self, row: Row, links: &[(usize, usize)], out: &mut [f64], hit: &mut Vec<bool>) {
        let (k, mc, pc) = (self.k, self.mc, self.pc);
        hit.clear();
        hit.resize(out.len(), false);
        let values = &self.src.values;
        for &(a, srow) in links {
            let sr = self.src.rows[srow];
            let j0 = ((sr.lo + self.steps[a][self.row_axis] - row.lo) / self.stride) as usize;
            if mc == 1 && pc == 1 {
                let f = self.step_fac[a * k + a];
                let lin = &self.lin[sr.start..sr.start + sr.len];
                let src = &values[sr.start..sr.start + sr.len];
                let acc = &mut out[j0..j0 + sr.len];
                let h = &mut hit[j0..j0 + sr.len];
                for i in 0..sr.len {
                    acc[i] += lin[i] * f;
                    h[i] |= src[i] > f64::NEG_INFINITY;
                }
                continue;
            }
            let trans = &self.trans[a * mc..(a + 1) * mc];
            for i in 0..sr.len {
                let c = sr.start + i;
                let base = (j0 + i) * mc;
                for (mt, &(sm, vcode, z)) in trans.iter().enumerate() {
                    if values[c * mc + sm] == f64::NEG_INFINITY {
                        continue;
                    }
                    let f = if pc > 1 { self.fac[c * pc + vcode] } else { 1.0 };
                    out[base + mt] += self.lin[c * mc + sm] * f * self.step_fac[a * k + z];
                    hit[base + mt] = true;
                }
            }
        }
        for idx in 0..out.len() {
            out[idx] = if !hit[idx] {
                f64::NEG_INFINITY
            } else if out[idx] >= UNDERFLOW_GUARD {
                self.offset + out[idx].ln()
            } else {
                self.exact(row.lo + (idx / mc) as i64 * self.stride, idx % mc, links)
            };
        }
    }

    fn exact(&self, y: i64, mt: usize, links: &[(usize, usize)]) -> f64 {
        let (k, mc, pc) = (self.k, self.mc, self.pc);
        let term = |&(a, srow): &(usize, usize)| -> Option<f64> {
            let sr = self.src.rows[srow];
            let off = y - self.steps[a][self.row_axis] - sr.lo;
            if off < 0 || off % self.stride != 0 || (off / self.stride) as usize >= sr.len {
                return None;
            }
            let c = sr.start + (off / self.stride) as usize;
            let (sm, vcode, z) = self.trans[a * mc + mt];
            let v = self.src.values[c * mc + sm];
            (v > f64::NEG_INFINITY).then(|| v + self.vlog[c * pc + vcode] + self.log_step[a * k + z])
        };
        let m = links.iter().filter_map(term).fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + links.iter().filter_map(term).map(|t| (t - m).exp()).sum::<f64>().ln()
    }
}

fn split_rows<'v>(rows: &[Row], mc: usize, mut values: &'v mut [f64]) -> Vec<&'v mut [f64]> {
    let mut out = Vec::with_capacity(rows.len());
    for r in rows {
        let (head, tail) = values.split_at_mut(r.len * mc);
        out.push(head);
        values = tail;
    }
    out
}

#[cfg(feature = "parallel")]
fn fill_rows(ctx: &PullContext<'_>, rows: &[Row], links: &[(usize, usize)], link_off: &[usize], values: &mut [f64]) {
    use rayon::prelude::*;
    let chunks = split_rows(rows, ctx.mc, values);
    chunks
        .into_par_iter()
        .zip(rows.par_iter())
        .zip(link_off.par_windows(2))
        .for_each_init(Vec::new, |hit, ((out, &row), w)| ctx.fill_row(row, &links[w[0]..w[1]], out, hit));
}

#[cfg(not(feature = "parallel"))]
fn fill_rows(ctx: &PullContext<'_>, rows: &[Row], links: &[(usize, usize)], link_off: &[usize], values: &mut [f64]) {
    let chunks = split_rows(rows, ctx.mc, values);
    let mut hit = Vec::new();
    for ((out, &row), w) in chunks.into_iter().zip(rows).zip(link_off.windows(2)) {
        ctx.fill_row(row, &links[w[0]..w[1]], out, &mut hit);
    }
}

/// Spacing along the row axis of the lattice spanned by `R − R`, restricted
/// to vectors with zero prefix coordinates (integer echelon elimination).
fn row_stride(steps: &[Vec<i64>], prefix_axes: &[usize], row_axis: usize) -> i64 {
    let mut vecs: Vec<Vec<i64>> = steps[1..]
        .iter()
        .map(|z| {
            prefix_axes
                .iter()
                .chain(std::iter::once(&row_axis))
                .map(|&i| z[i] - steps[0][i])
                .collect()
        })
        .collect();
    for col in 0..prefix_axes.len() {
        loop {
            let Some(p) = (0..vecs.len()).filter(|&i| vecs[i][col] != 0).min_by_key(|&i| vecs[i][col].abs()) else {
                break;
            };
            let pivot = vecs[p].clone();
            let mut done = true;
            for (i, v) in vecs.iter_mut().enumerate() {
                if i != p && v[col] != 0 {
                    let q = v[col] / pivot[col];
                    for (a, b) in v.iter_mut().zip(&pivot) {
                        *a -= q * b;
                    }
                    done &= v[col] == 0;
                }
            }
            if done {
                vecs.swap_remove(p);
                break;
            }
        }
    }
    let last = prefix_axes.len();
    let g = vecs.iter().fold(0i64, |g, v| num_integer::gcd(g, v[last]));
    g.max(1)
}

fn prune_layer(layer: &mut DpLayer, delta: f64) {
    let total = layer.log_total();
    let vmax = layer.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut dropped = Vec::new();
    for v in layer.values.iter_mut() {
        if v.is_finite() && *v < vmax - delta {
            dropped.push(*v);
            *v = f64::NEG_INFINITY;
        }
    }
    if !dropped.is_empty() {
        layer.discarded += (log_sum_exp(dropped.into_iter()) - total).exp();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{Marginal, PotentialKind};

    #[test]
    fn free_walk_distribution() {
        let g = StepGeometry::uniform(1, vec![vec![1], vec![2]]).unwrap();
        let env = Environment::constant(0.0);
        let spec = PotentialSpec::zero();
        let layer = DpEngine::new(&g, &env, &spec).unwrap().run(2).unwrap();
        let e = layer.endpoints();
        assert_eq!(e.len(), 3);
        assert!((e[&vec![2]].exp() - 0.25).abs() < 1e-15);
        assert!((e[&vec![3]].exp() - 0.5).abs() < 1e-15);
        assert!((layer.log_total()).abs() < 1e-15);
    }

    #[test]
    fn deep_tails_stay_finite() {
        // extreme endpoints at n = 1500 carry mass 2^-1500, far below f64 range
        let g = StepGeometry::uniform(1, vec![vec![1], vec![2]]).unwrap();
        let env = Environment::constant(0.0);
        let spec = PotentialSpec::zero();
        let layer = DpEngine::new(&g, &env, &spec).unwrap().run(1500).unwrap();
        let v = layer.endpoint_log_mass(&[1500]).unwrap();
        assert!((v - 1500.0 * 0.5f64.ln()).abs() < 1e-9);
        assert_eq!(layer.endpoint_log_mass(&[1499]), None);
    }

    #[test]
    fn memory_modes_agree() {
        let g = StepGeometry::uniform(2, vec![vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let env = Environment::iid(Marginal::Gaussian { mean: 0.0, std_dev: 1.0 }, 3).unwrap();
        let spec = PotentialSpec {
            kind: PotentialKind::Window {
                coeffs: (0..9).map(|i| 0.1 * i as f64).collect(),
                offsets: (0..9).map(|i| 0.05 * (i % 4) as f64).collect(),
            },
            ell: 2,
            beta: 0.8,
        };
        let chain = DpEngine::new(&g, &env, &spec).unwrap().run(12).unwrap();
        let compact = DpEngine::with_options(
            &g,
            &env,
            &spec,
            DpOptions { memory: MemoryMode::Compact, ..Default::default() },
        )
        .unwrap()
        .run(12)
        .unwrap();
        let a = chain.endpoints();
        let b = compact.endpoints();
        assert_eq!(a.len(), b.len());
        for (x, v) in &a {
            assert!((v - b[x]).abs() < 1e-10);
        }
    }

    #[test]
    fn site_potential_with_memory_matches_enumeration() {
        let g = StepGeometry::uniform(2, vec![vec![-1, 1], vec![1, 1]]).unwrap();
        let env = Environment::iid(Marginal::Gaussian { mean: 0.0, std_dev: 1.0 }, 11).unwrap();
        for ell in 0..3 {
            let spec = PotentialSpec::site(0.7).with_ell(ell);
            let t = [0.2, -0.1];
            let dp = DpEngine::new(&g, &env, &spec).unwrap().with_tilt(&t).unwrap().run(5).unwrap().log_total();
            let b = crate::transfer::brute_force_log_partition(&env, &spec, &g, 5, Some(&t), None).unwrap();
            assert!((dp - b).abs() < 1e-12, "ell {ell}: {dp} vs {b}");
        }
    }

    #[test]
    fn budget_is_enforced() {
        let g = StepGeometry::uniform(2, vec![vec![1, 0], vec![0, 1], vec![-1, 0], vec![0, -1]]).unwrap();
        let env = Environment::constant(0.0);
        let spec = PotentialSpec::zero();
        let engine =
            DpEngine::with_options(&g, &env, &spec, DpOptions { budget: 100.0, ..Default::default() }).unwrap();
        assert!(matches!(engine.run(20), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn pruning_reports_dropped_mass() {
        let g = StepGeometry::uniform(1, vec![vec![1], vec![2]]).unwrap();
        let env = Environment::constant(0.0);
        let spec = PotentialSpec::zero();
        let engine =
            DpEngine::with_options(&g, &env, &spec, DpOptions { prune: Some(20.0), ..Default::default() }).unwrap();
        let layer = engine.run(200).unwrap();
        assert!(layer.discarded_fraction() > 0.0 && layer.discarded_fraction() < 1e-6);
        assert!(layer.log_total().abs() < 1e-6);
    }
}
