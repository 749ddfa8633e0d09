//! Tilted free energies `Λ(g + t·z₁)`, their Legendre transforms, and the
//! rate function `I^g(ζ) = Λ(g) − Λ^usc(g, ζ)`.
//!
//! Tilts live in `span(R − R)`: adding a direction orthogonal to it shifts
//! `t·z` by a constant over `R`, which cancels in `Λ(g + t·z₁) − t·ζ` for
//! every `ζ ∈ aff U`.

use num_rational::BigRational;
use serde::Serialize;

use crate::environment::{Environment, PotentialSpec};
use crate::error::{Error, Result};
use crate::geometry::{ConvexRep, StepGeometry, Velocity};
use crate::transfer::{
    default_extrapolation, estimate_many, extrapolate, tilted_log_partition, DpEngine, Extrapolation, FiniteModel,
    FreeEnergySeries, Target,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Perron root of the periodic transfer matrix.
    Perron,
    /// Extrapolated DP estimate on a sampled environment.
    Estimate,
    /// Closed form `log Σ p̂_z e^{t·z}` of the free walk.
    FreeWalk,
}

#[derive(Debug, Clone, Serialize)]
pub struct TiltEntry {
    pub t: Vec<f64>,
    /// Coordinates of `t` in the tilt basis.
    pub coords: Vec<f64>,
    pub value: f64,
    pub err: f64,
    pub provenance: Provenance,
}

/// Axis-aligned tilt lattice in the coordinates of a basis of `span(R − R)`.
#[derive(Debug, Clone, Serialize)]
pub struct TiltGrid {
    pub basis: Vec<Vec<f64>>,
    pub radius: f64,
    pub step: f64,
    pub points: Vec<Vec<f64>>,
}

impl TiltGrid {
    pub fn new(geom: &StepGeometry, radius: f64, step: f64) -> Result<Self> {
        if !(radius >= 0.0 && step > 0.0) {
            return Err(Error::Config("tilt grid needs radius >= 0 and step > 0".into()));
        }
        let basis: Vec<Vec<f64>> = geom
            .direction_basis()
            .iter()
            .map(|b| b.iter().map(|&x| x as f64).collect())
            .collect();
        let m = (radius / step).round() as i64;
        let axis: Vec<f64> = (-m..=m).map(|i| i as f64 * step).collect();
        let mut points = vec![Vec::new()];
        for _ in 0..basis.len() {
            points = points
                .into_iter()
                .flat_map(|p: Vec<f64>| {
                    axis.iter().map(move |&c| {
                        let mut p = p.clone();
                        p.push(c);
                        p
                    })
                })
                .collect();
        }
        Ok(TiltGrid { basis, radius: m as f64 * step, step, points })
    }

    pub fn tilt(&self, coords: &[f64]) -> Vec<f64> {
        let d = self.basis.first().map_or(0, |b| b.len());
        let mut t = vec![0.0; d];
        for (c, b) in coords.iter().zip(&self.basis) {
            for (ti, bi) in t.iter_mut().zip(b) {
                *ti += c * bi;
            }
        }
        t
    }

    fn on_boundary(&self, coords: &[f64]) -> bool {
        coords.iter().any(|c| (c.abs() - self.radius).abs() < 1e-9 * self.radius.max(1.0))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TiltedFreeEnergyTable {
    pub grid: TiltGrid,
    pub entries: Vec<TiltEntry>,
}

/// How tilted free energies are obtained.
#[derive(Debug, Clone)]
pub enum TiltSource {
    Perron,
    /// One DP to the largest `n`, every tilt read off through
    /// `Λ_n(g + t·z₁) = log Σ_x e^{F_n(x) + t·x}`.
    Estimate { schedule: Vec<usize> },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn build_tilt_table(
    env: &Environment,
    spec: &PotentialSpec,
    geom: &StepGeometry,
    grid: &TiltGrid,
    source: &TiltSource,
) -> Result<TiltedFreeEnergyTable> {
    let tilts: Vec<Vec<f64>> = grid.points.iter().map(|c| grid.tilt(c)).collect();
    let entries = match source {
        TiltSource::Perron => {
            let model = FiniteModel::build(geom, env, spec)?;
            tilts
                .iter()
                .zip(&grid.points)
                .map(|(t, c)| {
                    let p = model.perron(t)?;
                    Ok(TiltEntry {
                        t: t.clone(),
                        coords: c.clone(),
                        value: p.log_rho,
                        err: p.residual * p.log_rho.abs().max(1.0),
                        provenance: Provenance::Perron,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        TiltSource::Estimate { schedule } => {
            if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) || schedule[0] == 0 {
                return Err(Error::Config("n schedule must be positive and strictly increasing".into()));
            }
            let engine = DpEngine::new(geom, env, spec)?;
            let mut series = vec![Vec::new(); tilts.len()];
            engine.run_with(*schedule.last().unwrap(), |layer| {
                if schedule.contains(&layer.stage()) {
                    let n = layer.stage() as f64;
                    for (s, t) in series.iter_mut().zip(&tilts) {
                        s.push(tilted_log_partition(layer, t) / n);
                    }
                }
                Ok(())
            })?;
            tilts
                .iter()
                .zip(&grid.points)
                .zip(series)
                .map(|((t, c), ys)| {
                    let (value, residual) = extrapolate(schedule, &ys, Extrapolation::Linear);
                    TiltEntry {
                        t: t.clone(),
                        coords: c.clone(),
                        value,
                        err: if residual.is_nan() { 0.0 } else { residual },
                        provenance: Provenance::Estimate,
                    }
                })
                .collect()
        }
    };
    Ok(TiltedFreeEnergyTable { grid: grid.clone(), entries })
}

/// `log Σ p̂_z e^{t·z}` on the grid: the table of the free walk.
pub fn free_walk_table(geom: &StepGeometry, grid: &TiltGrid) -> TiltedFreeEnergyTable {
    let entries = grid
        .points
        .iter()
        .map(|c| {
            let t = grid.tilt(c);
            TiltEntry {
                value: free_walk_log_mgf(geom, &t),
                t,
                coords: c.clone(),
                err: 0.0,
                provenance: Provenance::FreeWalk,
            }
        })
        .collect();
    TiltedFreeEnergyTable { grid: grid.clone(), entries }
}

pub fn free_walk_log_mgf(geom: &StepGeometry, t: &[f64]) -> f64 {
    let vals: Vec<f64> = geom
        .steps()
        .iter()
        .zip(geom.weights())
        .map(|(z, p)| p.ln() + z.iter().zip(t).map(|(&a, b)| a as f64 * b).sum::<f64>())
        .collect();
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Serialize)]
pub struct LegendreValue {
    pub value: f64,
    pub err: f64,
    /// Minimizing tilt.
    pub t: Vec<f64>,
    /// `false` when the minimizer sits on the grid boundary, so the value is
    /// only an upper bound that a wider grid may lower.
    pub interior: bool,
}

/// `Λ^usc(g, ζ) ≈ min over grid tilts of Λ(g + t·z₁) − t·ζ`.
pub fn legendre_usc(table: &TiltedFreeEnergyTable, geom: &StepGeometry, zeta: &[f64]) -> Result<LegendreValue> {
    if zeta.len() != geom.dim() {
        return Err(Error::DimensionMismatch { expected: geom.dim(), got: zeta.len() });
    }
    if !geom.contains_velocity(&Velocity::Real(zeta.to_vec())) {
        return Err(Error::OutsideHull(format!("{zeta:?}")));
    }
    Ok(legendre_unchecked(table, zeta))
}

fn legendre_unchecked(table: &TiltedFreeEnergyTable, zeta: &[f64]) -> LegendreValue {
    let mut best: Option<&TiltEntry> = None;
    let mut best_val = f64::INFINITY;
    for e in &table.entries {
        let v = e.value - dot(&e.t, zeta);
        if v < best_val {
            best_val = v;
            best = Some(e);
        }
    }
    let e = best.expect("tilt table is nonempty");
    LegendreValue { value: best_val, err: e.err, t: e.t.clone(), interior: !table.grid.on_boundary(&e.coords) }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub zeta: Vec<f64>,
    pub lambda_usc: f64,
    #[serde(rename = "I")]
    pub rate: f64,
    pub err: f64,
    pub interior: bool,
    pub relative_interior: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFunctionTable {
    pub lambda_line: f64,
    pub rows: Vec<RateRow>,
    pub min_rate: f64,
    /// Set when `min I` exceeds the combined error: `Λ(g)` and the tilt
    /// table disagree.
    pub inconsistent: bool,
}

pub fn rate_function(
    table: &TiltedFreeEnergyTable,
    geom: &StepGeometry,
    lambda_line: (f64, f64),
    zetas: &[Velocity],
) -> Result<RateFunctionTable> {
    let mut rows = Vec::with_capacity(zetas.len());
    for z in zetas {
        let zf = z.to_f64();
        let l = legendre_usc(table, geom, &zf)?;
        let (face, _) = geom.face_of(z)?;
        rows.push(RateRow {
            rate: lambda_line.0 - l.value,
            err: lambda_line.1 + l.err,
            lambda_usc: l.value,
            zeta: zf,
            interior: l.interior,
            relative_interior: face == geom.hull_face(),
        });
    }
    let min = rows.iter().map(|r| r.rate).fold(f64::INFINITY, f64::min);
    let slack = rows.iter().map(|r| r.err).fold(0.0, f64::max);
    Ok(RateFunctionTable { lambda_line: lambda_line.0, inconsistent: min > slack.max(1e-12), min_rate: min, rows })
}

/// Rational grid over `U`: all points `Σ_v (c_v / k) v` over the vertices of
/// the hull with nonnegative integers `c_v` summing to `k`, deduplicated and
/// sorted.
pub fn velocity_grid(geom: &StepGeometry, k: usize) -> Vec<Velocity> {
    let verts: Vec<&Vec<i64>> = geom.vertices().iter().map(|&i| &geom.steps()[i]).collect();
    let k = k.max(1);
    let mut out: Vec<Vec<BigRational>> = Vec::new();
    let mut counts = vec![0usize; verts.len()];
    fn rec(
        i: usize,
        left: usize,
        k: usize,
        counts: &mut Vec<usize>,
        verts: &[&Vec<i64>],
        out: &mut Vec<Vec<BigRational>>,
    ) {
        if i + 1 == verts.len() {
            counts[i] = left;
            let d = verts[0].len();
            let p: Vec<BigRational> = (0..d)
                .map(|c| {
                    let num: i64 = counts.iter().zip(verts).map(|(&w, v)| w as i64 * v[c]).sum();
                    BigRational::new(num.into(), (k as i64).into())
                })
                .collect();
            out.push(p);
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            rec(i + 1, left - c, k, counts, verts, out);
        }
    }
    rec(0, k, k, &mut counts, &verts, &mut out);
    out.sort();
    out.dedup();
    out.into_iter().map(Velocity::Exact).collect()
}

/// Exact `Λ^usc(g, ζ)` on a periodic model: minimizes `log ρ(t) − t·ζ` over
/// `t ∈ span(R − R)` by Newton's method, with the gradient (mean advance of
/// the Doob pair) exact and the Hessian by central differences of it.
pub fn perron_legendre(model: &FiniteModel, geom: &StepGeometry, zeta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let basis: Vec<Vec<f64>> = geom
        .direction_basis()
        .iter()
        .map(|b| b.iter().map(|&x| x as f64).collect())
        .collect();
    let r = basis.len();
    let to_t = |c: &[f64]| -> Vec<f64> {
        let mut t = vec![0.0; geom.dim()];
        for (ci, b) in c.iter().zip(&basis) {
            for (ti, bi) in t.iter_mut().zip(b) {
                *ti += ci * bi;
            }
        }
        t
    };
    let eval = |c: &[f64]| -> Result<(f64, Vec<f64>)> {
        let t = to_t(c);
        let p = model.perron(&t)?;
        let g = p.mean_advance(model);
        let diff: Vec<f64> = g.iter().zip(zeta).map(|(a, b)| a - b).collect();
        let grad = basis.iter().map(|b| dot(b, &diff)).collect();
        Ok((p.log_rho - dot(&t, zeta), grad))
    };
    let mut c = vec![0.0; r];
    let (mut f, mut g) = eval(&c)?;
    for _ in 0..100 {
        if g.iter().map(|x| x.abs()).fold(0.0, f64::max) < 1e-11 {
            return Ok((f, to_t(&c)));
        }
        let h = 1e-5;
        let mut hess = nalgebra::DMatrix::zeros(r, r);
        for j in 0..r {
            let mut cp = c.clone();
            cp[j] += h;
            let mut cm = c.clone();
            cm[j] -= h;
            let gp = eval(&cp)?.1;
            let gm = eval(&cm)?.1;
            for i in 0..r {
                hess[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        let hess = (&hess + hess.transpose()) * 0.5;
        let rhs = nalgebra::DVector::from_vec(g.clone());
        let dir = hess
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&rhs))
            .unwrap_or_else(|| rhs.clone());
        let mut step = 1.0;
        loop {
            let cand: Vec<f64> = c.iter().zip(dir.iter()).map(|(a, d)| a - step * d).collect();
            let (fc, gc) = eval(&cand)?;
            if fc <= f + 1e-14 * f.abs().max(1.0) || step < 1e-8 {
                c = cand;
                f = fc;
                g = gc;
                break;
            }
            step *= 0.5;
        }
    }
    let residual = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if residual < 1e-8 {
        Ok((f, to_t(&c)))
    } else {
        Err(Error::NotConverged { what: "perron legendre newton", iterations: 100, residual })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointRate {
    pub value: f64,
    pub residual: f64,
    pub series: FreeEnergySeries,
}

/// `−lim n⁻¹ log Q₀^ω{X_n = x̂_n(ζ)}` for an RWRE potential.
///
/// Under the uniform reference walk the point-to-point sum is
/// `|R|^{-n} Q₀^ω{X_n = x}`, so `log |R|` is added back. Reference weights of
/// `geom` are ignored since `Q₀^ω` does not depend on them.
pub fn rwre_point_prob_rate(
    env: &Environment,
    spec: &PotentialSpec,
    geom: &StepGeometry,
    rep: &ConvexRep,
    schedule: &[usize],
) -> Result<PointRate> {
    if !spec.is_rwre() {
        return Err(Error::InvalidModel("point probability rates need an RWRE potential".into()));
    }
    let uniform = StepGeometry::uniform(geom.dim(), geom.steps().to_vec())?;
    let engine = DpEngine::new(&uniform, env, spec)?;
    let target = Target::PointToPoint(rep.clone());
    let model = default_extrapolation(&uniform, &target);
    let series = estimate_many(&engine, &uniform, &[(target, model)], schedule)?.remove(0);
    let log_k = (geom.num_steps() as f64).ln();
    Ok(PointRate { value: -(series.extrapolated + log_k), residual: series.residual, series })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> StepGeometry {
        StepGeometry::uniform(1, vec![vec![1], vec![2]]).unwrap()
    }

    #[test]
    fn fixed_kernel_point_rate_vanishes_at_its_mean() {
        // weighted reference walk on purpose: Q does not depend on it
        let g = StepGeometry::new(1, vec![vec![1], vec![2]], vec![0.9, 0.1]).unwrap();
        let spec = PotentialSpec::rwre(crate::environment::RwreKernel::Fixed { probs: vec![0.3, 0.7] });
        let env = Environment::constant(0.0);
        let at = |s: &str| {
            let rep = g.face_of(&s.parse().unwrap()).unwrap().1;
            rwre_point_prob_rate(&env, &spec, &g, &rep, &[100, 200, 400, 800]).unwrap().value
        };
        assert!(at("17/10").abs() < 1e-3);
        // Cramér rate of the Bernoulli step count: H(1/2 | 0.7) at velocity 3/2
        let h = 0.5 * (0.5f64 / 0.3).ln() + 0.5 * (0.5f64 / 0.7).ln();
        assert!((at("3/2") - h).abs() < 1e-3);
    }

    #[test]
    fn free_walk_legendre_at_mean_is_zero() {
        let g = line();
        let grid = TiltGrid::new(&g, 4.0, 0.05).unwrap();
        let table = free_walk_table(&g, &grid);
        let l = legendre_usc(&table, &g, &[1.5]).unwrap();
        assert!(l.value.abs() < 1e-12 && l.interior);
        let edge = legendre_usc(&table, &g, &[1.0]).unwrap();
        assert!(!edge.interior);
        assert!(edge.value > -std::f64::consts::LN_2);
        assert!(edge.value + std::f64::consts::LN_2 < 0.02);
        assert!(legendre_usc(&table, &g, &[2.5]).is_err());
    }

    #[test]
    fn perron_table_matches_free_walk_when_potential_vanishes() {
        let g = line();
        let env = Environment::periodic(vec![2], vec![0.0, 0.0]).unwrap();
        let grid = TiltGrid::new(&g, 1.0, 0.25).unwrap();
        let a = build_tilt_table(&env, &PotentialSpec::zero(), &g, &grid, &TiltSource::Perron).unwrap();
        let b = free_walk_table(&g, &grid);
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert!((x.value - y.value).abs() < 1e-11);
        }
    }

    #[test]
    fn perron_legendre_matches_cramer() {
        let g = line();
        let env = Environment::periodic(vec![1], vec![0.0]).unwrap();
        let model = FiniteModel::build(&g, &env, &PotentialSpec::zero()).unwrap();
        let (v, t) = perron_legendre(&model, &g, &[1.25]).unwrap();
        // e^t = (ζ - 1)/(2 - ζ)
        let t_exact = (0.25f64 / 0.75).ln();
        assert!((t[0] - t_exact).abs() < 1e-8);
        let cramer = free_walk_log_mgf(&g, &[t_exact]) - 1.25 * t_exact;
        assert!((v - cramer).abs() < 1e-12);
    }

    #[test]
    fn velocity_grid_covers_segment() {
        let g = line();
        let z = velocity_grid(&g, 4);
        assert_eq!(z.len(), 5);
        assert_eq!(z[1], Velocity::from_ratios(&[(5, 4)]));
    }
}
