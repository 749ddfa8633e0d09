//! Random environments `ω` on `Z^d` and the potentials `g(T_xω, z_{1,ℓ})`
//! evaluated along paths.
//!
//! I.i.d. site values are generated from a counter-based stream keyed by
//! `(seed, x)`, so `ω_x` is a pure function of the site and never stored.
//! Periodic environments are the exact-oracle class: every free energy on
//! them reduces to a finite spectral problem.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::StepGeometry;

/// Marginal law of a single site under the i.i.d. product measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Gaussian { mean: f64, std_dev: f64 },
    Bernoulli { p: f64, low: f64, high: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
    Constant { value: f64 },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        match self {
            Marginal::Gaussian { std_dev, mean } => {
                if !(std_dev.is_finite() && *std_dev >= 0.0 && mean.is_finite()) {
                    return Err(Error::InvalidModel("gaussian needs finite mean and std_dev >= 0".into()));
                }
            }
            Marginal::Bernoulli { p, low, high } => {
                if !(0.0..=1.0).contains(p) || !low.is_finite() || !high.is_finite() {
                    return Err(Error::InvalidModel("bernoulli needs p in [0,1] and finite values".into()));
                }
            }
            Marginal::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::InvalidModel("discrete marginal needs matching values/probs".into()));
                }
                if probs.iter().any(|&p| !(p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidModel("discrete probabilities must be a distribution".into()));
                }
            }
            Marginal::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidModel("constant must be finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Marginal::Gaussian { mean, std_dev } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + std_dev * z
            }
            Marginal::Bernoulli { p, low, high } => {
                if rng.gen::<f64>() < *p {
                    *high
                } else {
                    *low
                }
            }
            Marginal::Discrete { values, probs } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("validated nonempty")
            }
            Marginal::Constant { value } => *value,
        }
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn variance(&self) -> f64 {
        match self {
            Marginal::Gaussian { std_dev, .. } => std_dev * std_dev,
            _ => {
                let m = self.mean();
                self.expect(|x| (x - m) * (x - m))
            }
        }
    }

    /// Finite support, when there is one.
    pub fn support(&self) -> Option<Vec<f64>> {
        match self {
            Marginal::Gaussian { std_dev, mean } if *std_dev == 0.0 => Some(vec![*mean]),
            Marginal::Gaussian { .. } => None,
            Marginal::Bernoulli { low, high, .. } => Some(vec![*low, *high]),
            Marginal::Discrete { values, .. } => Some(values.clone()),
            Marginal::Constant { value } => Some(vec![*value]),
        }
    }

    /// `E[f(ω)]`: exact for finitely supported laws, closed form for the
    /// identity on Gaussians, composite Simpson quadrature otherwise.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        match self {
            Marginal::Gaussian { mean, std_dev } => {
                if *std_dev == 0.0 {
                    return f(*mean);
                }
                let half_width = 14.0;
                let intervals = 8000;
                let h = 2.0 * half_width / intervals as f64;
                let density = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let mut acc = 0.0;
                for i in 0..=intervals {
                    let u = -half_width + i as f64 * h;
                    let w = if i == 0 || i == intervals {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    acc += w * f(mean + std_dev * u) * density(u);
                }
                acc * h / 3.0
            }
            Marginal::Bernoulli { p, low, high } => p * f(*high) + (1.0 - p) * f(*low),
            Marginal::Discrete { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| p * f(*v)).sum()
            }
            Marginal::Constant { value } => f(*value),
        }
    }

    /// `log E[e^{sω}]` in closed form.
    pub fn log_mgf(&self, s: f64) -> f64 {
        match self {
            Marginal::Gaussian { mean, std_dev } => s * mean + 0.5 * s * s * std_dev * std_dev,
            Marginal::Constant { value } => s * value,
            Marginal::Bernoulli { p, low, high } => {
                let a = (1.0 - p).ln() + s * low;
                let b = p.ln() + s * high;
                log_add_exp(a, b)
            }
            Marginal::Discrete { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(_, &p)| p > 0.0)
                .map(|(v, p)| p.ln() + s * v)
                .fold(f64::NEG_INFINITY, log_add_exp),
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.support().map(|s| {
            (
                s.iter().cloned().fold(f64::INFINITY, f64::min),
                s.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            )
        })
    }
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvironmentModel {
    Iid { marginal: Marginal, seed: u64 },
    /// Values indexed by `x mod period`, first coordinate fastest.
    Periodic { period: Vec<usize>, table: Arc<[f64]> },
}

/// An environment together with a shift `T_y` realized as index translation.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    model: EnvironmentModel,
    shift: Vec<i64>,
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key of the counter-based stream for site `x`.
pub fn site_key(seed: u64, x: &[i64]) -> u64 {
    let mut h = mix64(seed ^ 0x5851_f42d_4c95_7f2d);
    for &c in x {
        h = mix64(h ^ (c as u64));
    }
    h
}

impl Environment {
    pub fn iid(marginal: Marginal, seed: u64) -> Result<Self> {
        marginal.validate()?;
        Ok(Environment { model: EnvironmentModel::Iid { marginal, seed }, shift: Vec::new() })
    }

    pub fn constant(value: f64) -> Self {
        Environment {
            model: EnvironmentModel::Iid { marginal: Marginal::Constant { value }, seed: 0 },
            shift: Vec::new(),
        }
    }

    pub fn periodic(period: Vec<usize>, table: Vec<f64>) -> Result<Self> {
        if period.is_empty() || period.contains(&0) {
            return Err(Error::InvalidModel("period entries must be positive".into()));
        }
        let size: usize = period.iter().product();
        if table.len() != size {
            return Err(Error::InvalidModel(format!(
                "periodic table has {} values, period needs {size}",
                table.len()
            )));
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("periodic table values must be finite".into()));
        }
        Ok(Environment { model: EnvironmentModel::Periodic { period, table: table.into() }, shift: Vec::new() })
    }

    pub fn model(&self) -> &EnvironmentModel {
        &self.model
    }

    /// Same environment with a different i.i.d. seed (no-op for periodic).
    pub fn with_seed(&self, seed: u64) -> Self {
        let model = match &self.model {
            EnvironmentModel::Iid { marginal, .. } => EnvironmentModel::Iid { marginal: marginal.clone(), seed },
            m => m.clone(),
        };
        Environment { model, shift: self.shift.clone() }
    }

    /// `T_y ω`: the environment seen from `y`.
    pub fn shifted(&self, y: &[i64]) -> Self {
        let mut shift = self.shift.clone();
        shift.resize(y.len().max(shift.len()), 0);
        for (s, v) in shift.iter_mut().zip(y) {
            *s += v;
        }
        Environment { model: self.model.clone(), shift }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.model, EnvironmentModel::Periodic { .. })
    }

    pub fn period(&self) -> Option<&[usize]> {
        match &self.model {
            EnvironmentModel::Periodic { period, .. } => Some(period),
            _ => None,
        }
    }

    /// `(lower, upper)` bounds of the site values, if bounded.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match &self.model {
            EnvironmentModel::Iid { marginal, .. } => marginal.bounds(),
            EnvironmentModel::Periodic { table, .. } => Some((
                table.iter().cloned().fold(f64::INFINITY, f64::min),
                table.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            )),
        }
    }

    /// Every value a site can take, when finite.
    pub fn support(&self) -> Option<Vec<f64>> {
        match &self.model {
            EnvironmentModel::Iid { marginal, .. } => marginal.support(),
            EnvironmentModel::Periodic { table, .. } => Some(table.to_vec()),
        }
    }

    /// `ω_x`.
    pub fn value(&self, x: &[i64]) -> f64 {
        if self.shift.is_empty() {
            self.value_unshifted(x)
        } else {
            let y: Vec<i64> = x
                .iter()
                .enumerate()
                .map(|(i, &c)| c + self.shift.get(i).copied().unwrap_or(0))
                .collect();
            self.value_unshifted(&y)
        }
    }

    fn value_unshifted(&self, x: &[i64]) -> f64 {
        match &self.model {
            EnvironmentModel::Iid { marginal, seed } => match marginal {
                Marginal::Constant { value } => *value,
                m => {
                    let mut rng = SplitMix64::seed_from_u64(site_key(*seed, x));
                    m.sample(&mut rng)
                }
            },
            EnvironmentModel::Periodic { period, table } => {
                assert_eq!(x.len(), period.len(), "site dimension must match the period");
                let mut idx = 0usize;
                let mut stride = 1usize;
                for (&c, &l) in x.iter().zip(period) {
                    idx += c.rem_euclid(l as i64) as usize * stride;
                    stride *= l;
                }
                table[idx]
            }
        }
    }
}

/// The environment around a site, handed to general potentials.
pub struct LocalView<'a> {
    env: &'a Environment,
    center: &'a [i64],
    radius: i64,
}

impl LocalView<'_> {
    /// `ω_{x+offset}`; offsets must stay within the declared radius.
    pub fn at(&self, offset: &[i64]) -> f64 {
        debug_assert!(offset.iter().all(|c| c.abs() <= self.radius), "read outside locality radius");
        let y: Vec<i64> = self.center.iter().zip(offset).map(|(a, b)| a + b).collect();
        self.env.value(&y)
    }

    pub fn center(&self) -> f64 {
        self.env.value(self.center)
    }
}

pub type PotentialFn = dyn Fn(&LocalView<'_>, &[usize]) -> f64 + Send + Sync;

/// A user supplied local potential of finite radius.
#[derive(Clone)]
pub struct GeneralPotential {
    pub radius: i64,
    pub func: Arc<PotentialFn>,
}

impl fmt::Debug for GeneralPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralPotential").field("radius", &self.radius).finish_non_exhaustive()
    }
}

/// RWRE transition probabilities `p_z(ω)` as a function of the site value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RwreKernel {
    /// Same probability vector at every site.
    Fixed { probs: Vec<f64> },
    /// `p_z(ω) ∝ exp(c_z ω)`.
    Softmax { coeffs: Vec<f64> },
    /// Lookup of the probability vector by exact site value.
    ByValue { values: Vec<f64>, probs: Vec<Vec<f64>> },
}

impl RwreKernel {
    fn log_prob(&self, omega: f64, z: usize) -> Result<f64> {
        match self {
            RwreKernel::Fixed { probs } => checked_log_prob(probs, z, omega),
            RwreKernel::Softmax { coeffs } => {
                let lse = coeffs.iter().map(|c| c * omega).fold(f64::NEG_INFINITY, log_add_exp);
                Ok(coeffs[z] * omega - lse)
            }
            RwreKernel::ByValue { values, probs } => {
                let i = values
                    .iter()
                    .position(|&v| v == omega)
                    .ok_or_else(|| Error::InvalidModel(format!("no RWRE kernel for site value {omega}")))?;
                checked_log_prob(&probs[i], z, omega)
            }
        }
    }

    fn probs_at(&self, omega: f64, k: usize) -> Result<Vec<f64>> {
        (0..k).map(|z| self.log_prob(omega, z).map(f64::exp)).collect()
    }
}

fn checked_log_prob(probs: &[f64], z: usize, omega: f64) -> Result<f64> {
    let total: f64 = probs.iter().sum();
    if probs.iter().any(|&p| !(p > 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidModel(format!(
            "RWRE kernel at site value {omega} is not a positive probability vector: {probs:?}"
        )));
    }
    Ok(probs[z].ln())
}

#[derive(Debug, Clone)]
pub enum PotentialKind {
    /// `g = ω_x`.
    Site,
    /// `g = c_{z₁} ω_x + o_{z₁}`.
    Step { coeffs: Vec<f64>, offsets: Vec<f64> },
    /// `g = ω_x + h · z₁`.
    Stretched { h: Vec<f64> },
    /// `g = log p_{z₁}(ω_x)`.
    Rwre(RwreKernel),
    /// `g = c_w ω_x + o_w` for the window `w = z_{1,ℓ}` (mixed radix, `z₁` most significant).
    Window { coeffs: Vec<f64>, offsets: Vec<f64> },
    General(GeneralPotential),
}

/// `β · g(T_xω, z_{1,ℓ})`.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub ell: usize,
    pub beta: f64,
}

impl PotentialSpec {
    pub fn site(beta: f64) -> Self {
        PotentialSpec { kind: PotentialKind::Site, ell: 0, beta }
    }

    pub fn zero() -> Self {
        PotentialSpec::site(0.0)
    }

    pub fn rwre(kernel: RwreKernel) -> Self {
        PotentialSpec { kind: PotentialKind::Rwre(kernel), ell: 1, beta: 1.0 }
    }

    pub fn with_ell(mut self, ell: usize) -> Self {
        self.ell = ell;
        self
    }

    pub fn is_rwre(&self) -> bool {
        matches!(self.kind, PotentialKind::Rwre(_))
    }

    /// Locality radius `r₀`.
    pub fn radius(&self) -> i64 {
        match &self.kind {
            PotentialKind::General(g) => g.radius,
            _ => 0,
        }
    }

    /// Minimal memory the kind needs.
    pub fn required_ell(&self, num_steps: usize) -> usize {
        match &self.kind {
            PotentialKind::Site | PotentialKind::General(_) => 0,
            PotentialKind::Step { .. } | PotentialKind::Stretched { .. } | PotentialKind::Rwre(_) => 1,
            PotentialKind::Window { coeffs, .. } => {
                let mut ell = 0;
                let mut size = 1;
                while size < coeffs.len() {
                    size *= num_steps.max(2);
                    ell += 1;
                }
                ell
            }
        }
    }

    /// Structural checks against the geometry and environment. After this
    /// succeeds, evaluation at any site cannot fail.
    pub fn validate(&self, geom: &StepGeometry, env: &Environment) -> Result<()> {
        let k = geom.num_steps();
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::InvalidModel("inverse temperature must be finite and >= 0".into()));
        }
        if self.ell < self.required_ell(k) {
            return Err(Error::InvalidModel(format!(
                "potential needs memory length >= {}",
                self.required_ell(k)
            )));
        }
        if let Some(p) = env.period() {
            if p.len() != geom.dim() {
                return Err(Error::DimensionMismatch { expected: geom.dim(), got: p.len() });
            }
        }
        match &self.kind {
            PotentialKind::Step { coeffs, offsets } => {
                if coeffs.len() != k || offsets.len() != k {
                    return Err(Error::InvalidModel("step potential needs one coefficient per step".into()));
                }
            }
            PotentialKind::Stretched { h } => {
                if h.len() != geom.dim() {
                    return Err(Error::DimensionMismatch { expected: geom.dim(), got: h.len() });
                }
            }
            PotentialKind::Window { coeffs, offsets } => {
                let size = k.pow(self.ell as u32);
                let need = k.pow(self.required_ell(k) as u32);
                if coeffs.len() != offsets.len() || coeffs.len() != need || need > size {
                    return Err(Error::InvalidModel(format!(
                        "window potential needs {need} coefficients and offsets"
                    )));
                }
            }
            PotentialKind::Rwre(kernel) => {
                match kernel {
                    RwreKernel::Fixed { probs } => {
                        if probs.len() != k {
                            return Err(Error::InvalidModel("RWRE kernel needs one probability per step".into()));
                        }
                        kernel.probs_at(0.0, k)?;
                    }
                    RwreKernel::Softmax { coeffs } => {
                        if coeffs.len() != k {
                            return Err(Error::InvalidModel("RWRE softmax needs one coefficient per step".into()));
                        }
                    }
                    RwreKernel::ByValue { values, probs } => {
                        if values.len() != probs.len() || probs.iter().any(|p| p.len() != k) {
                            return Err(Error::InvalidModel("RWRE lookup table is malformed".into()));
                        }
                        for &v in values {
                            kernel.probs_at(v, k)?;
                        }
                        match env.support() {
                            Some(support) => {
                                for v in support {
                                    kernel.probs_at(v, k)?;
                                }
                            }
                            None => {
                                return Err(Error::InvalidModel(
                                    "RWRE lookup kernel needs a finitely supported environment".into(),
                                ))
                            }
                        }
                    }
                }
            }
            PotentialKind::Site | PotentialKind::General(_) => {}
        }
        Ok(())
    }

    /// Whether the potential can grow without bound above.
    pub fn unbounded_above(&self, env: &Environment) -> bool {
        let bounded = env.bounds().is_some();
        match &self.kind {
            PotentialKind::Rwre(_) => false,
            PotentialKind::Site | PotentialKind::Stretched { .. } => !bounded && self.beta > 0.0,
            PotentialKind::Step { coeffs, .. } | PotentialKind::Window { coeffs, .. } => {
                !bounded && self.beta > 0.0 && coeffs.iter().any(|&c| c != 0.0)
            }
            PotentialKind::General(_) => !bounded,
        }
    }

    /// `β g` from the site value `ω_x` and the window (radius-0 kinds only).
    #[inline]
    pub(crate) fn eval_local(&self, omega: f64, window: &[usize], steps: &[Vec<i64>]) -> f64 {
        let g = match &self.kind {
            PotentialKind::Site => omega,
            PotentialKind::Step { coeffs, offsets } => coeffs[window[0]] * omega + offsets[window[0]],
            PotentialKind::Stretched { h } => {
                omega + h.iter().zip(&steps[window[0]]).map(|(a, &b)| a * b as f64).sum::<f64>()
            }
            PotentialKind::Rwre(kernel) => kernel
                .log_prob(omega, window[0])
                .expect("RWRE kernel validated before evaluation"),
            PotentialKind::Window { coeffs, offsets } => {
                let k = steps.len();
                let ell = self.required_ell(k);
                let idx = window[..ell].iter().fold(0usize, |acc, &z| acc * k + z);
                coeffs[idx] * omega + offsets[idx]
            }
            PotentialKind::General(_) => unreachable!("general potentials are evaluated with a view"),
        };
        self.beta * g
    }

    /// `β g(T_xω, z_{1,ℓ})`; `window` holds at least `ℓ` step indices.
    pub fn eval(&self, env: &Environment, geom: &StepGeometry, x: &[i64], window: &[usize]) -> Result<f64> {
        if window.len() < self.ell {
            return Err(Error::InvalidModel(format!(
                "window of length {} for memory {}",
                window.len(),
                self.ell
            )));
        }
        if let Some(&z) = window.iter().find(|&&z| z >= geom.num_steps()) {
            return Err(Error::InvalidModel(format!("step index {z} out of range")));
        }
        match &self.kind {
            PotentialKind::General(g) => {
                let view = LocalView { env, center: x, radius: g.radius };
                Ok(self.beta * (g.func)(&view, window))
            }
            PotentialKind::Rwre(kernel) => {
                let omega = env.value(x);
                let probs = kernel.probs_at(omega, geom.num_steps())?;
                let _ = probs;
                Ok(self.beta * kernel.log_prob(omega, window[0])?)
            }
            _ => Ok(self.eval_local(env.value(x), window, geom.steps())),
        }
    }

    /// `Some(β)` when the potential is `β ω_x`.
    #[inline]
    pub(crate) fn site_beta(&self) -> Option<f64> {
        matches!(self.kind, PotentialKind::Site).then_some(self.beta)
    }

    #[inline]
    pub(crate) fn needs_view(&self) -> bool {
        matches!(self.kind, PotentialKind::General(_))
    }

    #[inline]
    pub(crate) fn eval_view(&self, env: &Environment, x: &[i64], window: &[usize]) -> f64 {
        match &self.kind {
            PotentialKind::General(g) => {
                let view = LocalView { env, center: x, radius: g.radius };
                self.beta * (g.func)(&view, window)
            }
            _ => unreachable!(),
        }
    }
}

/// Syntactic check of the finiteness conditions used throughout: bounded
/// potentials are always accepted; unbounded-above potentials need a
/// strictly directed step set and an i.i.d. local environment with all
/// moments. Returns human-readable warnings for accepted-but-unchecked cases.
pub fn check_regularity(geom: &StepGeometry, env: &Environment, spec: &PotentialSpec) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    if spec.unbounded_above(env) && !geom.strictly_directed() {
        return Err(Error::InvalidModel(
            "potential is unbounded above and 0 lies in the hull of the steps; the free energy may be +inf".into(),
        ));
    }
    if let PotentialKind::General(_) = spec.kind {
        warnings.push("general potential: moment and locality conditions are not verified".into());
    }
    Ok(warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line() -> StepGeometry {
        StepGeometry::uniform(1, vec![vec![1], vec![2]]).unwrap()
    }

    #[test]
    fn constant_and_periodic_values() {
        let c = Environment::constant(2.0);
        assert_eq!(c.value(&[17]), 2.0);
        let p = Environment::periodic(vec![2], vec![0.25, 0.75]).unwrap();
        assert_eq!(p.value(&[5]), 0.75);
        assert_eq!(p.value(&[-1]), 0.75);
        assert_eq!(p.value(&[4]), 0.25);
    }

    #[test]
    fn iid_values_are_deterministic() {
        let e = Environment::iid(Marginal::Gaussian { mean: 0.0, std_dev: 1.0 }, 7).unwrap();
        assert_eq!(e.value(&[3, -4]), e.value(&[3, -4]));
        assert_ne!(e.value(&[3, -4]), e.value(&[4, -3]));
        assert_ne!(e.value(&[3, -4]), e.with_seed(8).value(&[3, -4]));
    }

    #[test]
    fn iid_moments_match_marginal() {
        for m in [
            Marginal::Gaussian { mean: 0.5, std_dev: 2.0 },
            Marginal::Bernoulli { p: 0.3, low: -1.0, high: 1.0 },
            Marginal::Discrete { values: vec![0.0, 1.0, 5.0], probs: vec![0.2, 0.5, 0.3] },
        ] {
            let e = Environment::iid(m.clone(), 11).unwrap();
            let n = 100_000;
            let xs: Vec<f64> = (0..n).map(|i| e.value(&[i, i / 7])).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            let se_mean = (m.variance() / n as f64).sqrt();
            assert!((mean - m.mean()).abs() < 4.0 * se_mean, "{m:?}: mean {mean}");
            let fourth = m.expect(|x| (x - m.mean()).powi(4));
            let se_var = ((fourth - m.variance().powi(2)) / n as f64).sqrt();
            assert!((var - m.variance()).abs() < 4.0 * se_var, "{m:?}: var {var}");
        }
    }

    #[test]
    fn marginal_expectations() {
        let g = Marginal::Gaussian { mean: 0.0, std_dev: 1.0 };
        assert!((g.expect(|x| (0.7 * x).exp()) - (0.245f64).exp()).abs() < 1e-10);
        assert!((g.log_mgf(0.7) - 0.245).abs() < 1e-15);
        let b = Marginal::Bernoulli { p: 0.5, low: -1.0, high: 1.0 };
        assert!((b.log_mgf(1.0) - 1.0f64.cosh().ln()).abs() < 1e-15);
    }

    #[test]
    fn potential_examples() {
        let g = line();
        let c = Environment::constant(2.0);
        assert_eq!(PotentialSpec::site(1.0).eval(&c, &g, &[9], &[]).unwrap(), 2.0);

        let stretched = PotentialSpec {
            kind: PotentialKind::Stretched { h: vec![1.0] },
            ell: 1,
            beta: 1.0,
        };
        let zero = Environment::constant(0.0);
        assert_eq!(stretched.eval(&zero, &g, &[0], &[1]).unwrap(), 2.0);

        let rwre = PotentialSpec::rwre(RwreKernel::Fixed { probs: vec![0.5, 0.5] });
        let v = rwre.eval(&zero, &g, &[3], &[0]).unwrap();
        assert!((v + std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn rwre_kernel_errors() {
        let g = line();
        let env = Environment::periodic(vec![1], vec![0.0]).unwrap();
        let bad = PotentialSpec::rwre(RwreKernel::Fixed { probs: vec![0.6, 0.6] });
        assert!(bad.validate(&g, &env).is_err());
        assert!(bad.eval(&env, &g, &[0], &[0]).is_err());
        let missing = PotentialSpec::rwre(RwreKernel::ByValue { values: vec![1.0], probs: vec![vec![0.5, 0.5]] });
        assert!(missing.validate(&g, &env).is_err());
    }

    #[test]
    fn unbounded_potential_rejected_when_origin_in_hull() {
        let g = StepGeometry::uniform(1, vec![vec![-1], vec![1]]).unwrap();
        let env = Environment::iid(Marginal::Gaussian { mean: 0.0, std_dev: 1.0 }, 1).unwrap();
        assert!(check_regularity(&g, &env, &PotentialSpec::site(1.0)).is_err());
        assert!(check_regularity(&line(), &env, &PotentialSpec::site(1.0)).is_ok());
    }

    proptest! {
        #[test]
        fn shift_covariance(x in -50i64..50, y in -50i64..50, x2 in -50i64..50, y2 in -50i64..50, z in 0usize..2, seed in 0u64..1000) {
            let g = StepGeometry::uniform(2, vec![vec![1, 0], vec![0, 1]]).unwrap();
            let env = Environment::iid(Marginal::Gaussian { mean: 0.0, std_dev: 1.0 }, seed).unwrap();
            let spec = PotentialSpec { kind: PotentialKind::Step { coeffs: vec![1.0, -0.5], offsets: vec![0.1, 0.2] }, ell: 1, beta: 0.7 };
            let direct = spec.eval(&env, &g, &[x + y, x2 + y2], &[z]).unwrap();
            let shifted = spec.eval(&env.shifted(&[y, y2]), &g, &[x, x2], &[z]).unwrap();
            prop_assert_eq!(direct, shifted);
        }

        #[test]
        fn periodic_values_repeat(x in -100i64..100, k1 in -5i64..5, k2 in -5i64..5) {
            let env = Environment::periodic(vec![2, 3], (0..6).map(|v| v as f64).collect()).unwrap();
            prop_assert_eq!(env.value(&[x, x + 1]), env.value(&[x + 2 * k1, x + 1 + 3 * k2]));
        }
    }
}
