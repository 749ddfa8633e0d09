//! Exact geometry of the admissible step set: the hull `U = conv R`, its
//! faces, convex representations of velocities and the lattice endpoints
//! `x̂_n(ζ)` used by point-to-point partition functions.
//!
//! Everything is computed in arbitrary precision rationals from the integer
//! steps. Velocities may be supplied exactly (`Velocity::Exact`, the normal
//! case; decimal strings parse exactly) or as floats, in which case face
//! membership uses an absolute tolerance of `1e-12`.

pub mod scalar;
mod transport;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::error::{Error, Result};
use scalar::{dot, lift, null_space, primitive_integer, rank, rref, solve_unique, subsets, to_i64_vec, Scalar};

pub use transport::{coefficient_transport, TransportOutput};

/// Tolerance on `Σ p̂_z = 1` for real kernel weights.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

/// Inequality `normal · x <= offset`, valid for every point of `U`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Facet {
    pub normal: Vec<i64>,
    pub offset: i64,
}

impl Facet {
    fn slack<S: Scalar>(&self, x: &[S]) -> S {
        S::from_i64(self.offset) - dot(&lift::<S>(&self.normal), x)
    }
}

/// Affine equality `normal · x = offset` satisfied on `aff U`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Equality {
    pub normal: Vec<i64>,
    pub offset: i64,
}

/// A face `U₀` of the hull together with `R₀ = R ∩ U₀`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Face {
    /// Indices into [`StepGeometry::steps`], ascending.
    pub steps: Vec<usize>,
    /// Facets of `U` that contain the whole face.
    pub tight_facets: Vec<usize>,
    /// Dimension of the affine hull of the face.
    pub dim: usize,
    pub contains_origin: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepGeometry {
    dim: usize,
    steps: Vec<Vec<i64>>,
    weights: Vec<f64>,
    max_norm: f64,
    affine_dim: usize,
    direction_basis: Vec<Vec<i64>>,
    equalities: Vec<Equality>,
    facets: Vec<Facet>,
    vertices: Vec<usize>,
    faces: Vec<Face>,
    origin_in_hull: bool,
    origin_in_relative_interior: bool,
    /// Some `û` with `û · z > 0` for all steps, when one exists.
    direction: Option<Vec<i64>>,
}

/// A velocity `ζ`, exact when it came from rational or decimal input.
#[derive(Debug, Clone, PartialEq)]
pub enum Velocity {
    Exact(Vec<BigRational>),
    Real(Vec<f64>),
}

impl Velocity {
    pub fn from_ratios(parts: &[(i64, i64)]) -> Self {
        Velocity::Exact(
            parts
                .iter()
                .map(|&(n, d)| BigRational::new(n.into(), d.into()))
                .collect(),
        )
    }

    pub fn from_integers(v: &[i64]) -> Self {
        Velocity::Exact(lift(v))
    }

    pub fn dim(&self) -> usize {
        match self {
            Velocity::Exact(v) => v.len(),
            Velocity::Real(v) => v.len(),
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            Velocity::Exact(v) => v.iter().map(Scalar::to_f64).collect(),
            Velocity::Real(v) => v.clone(),
        }
    }
}

impl fmt::Display for Velocity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = match self {
            Velocity::Exact(v) => v.iter().map(|x| x.to_string()).collect(),
            Velocity::Real(v) => v.iter().map(|x| x.to_string()).collect(),
        };
        write!(f, "({})", parts.join(","))
    }
}

fn parse_exact(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).ok()?;
        let d = BigInt::from_str(d.trim()).ok()?;
        if d == BigInt::from(0) {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let num = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).ok()?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    let q = BigRational::new(num, den);
    Some(if neg { -q } else { q })
}

impl FromStr for Velocity {
    type Err = Error;

    /// Comma separated components; fractions (`3/2`) and decimals parse
    /// exactly, anything else (exponents, `inf`) falls back to floats.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
        if parts.is_empty() {
            return Err(Error::Config(format!("empty velocity '{s}'")));
        }
        if let Some(exact) = parts.iter().map(|p| parse_exact(p)).collect::<Option<Vec<_>>>() {
            return Ok(Velocity::Exact(exact));
        }
        let real = parts
            .iter()
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(format!("bad velocity '{s}': {e}")))?;
        Ok(Velocity::Real(real))
    }
}

/// Convex representation `ζ = Σ β_z z`, coefficients indexed by step.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexRep {
    pub velocity: Velocity,
    /// Index of the face whose relative interior contains `ζ`.
    pub face: usize,
    pub coeffs: Vec<f64>,
    pub exact: Option<Vec<BigRational>>,
}

/// Step counts of the lattice approximation `x̂_n(ζ)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathPlan {
    pub n: u64,
    pub counts: Vec<u64>,
    pub endpoint: Vec<i64>,
}

impl StepGeometry {
    /// Builds the geometry for `steps` with kernel weights `p̂_z`.
    pub fn new(dim: usize, steps: Vec<Vec<i64>>, weights: Vec<f64>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::EmptySteps);
        }
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        for s in &steps {
            if s.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: s.len() });
            }
        }
        let mut seen = BTreeSet::new();
        for s in &steps {
            if !seen.insert(s.clone()) {
                return Err(Error::DuplicateStep(s.clone()));
            }
        }
        if weights.len() != steps.len() {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {} steps",
                weights.len(),
                steps.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidWeights("weights must be positive and finite".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        if dim > 4 {
            log::warn!("exact hull in dimension {dim}; cost grows combinatorially with the step count");
        }

        let max_norm = steps
            .iter()
            .map(|s| s.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt())
            .fold(0.0, f64::max);

        let pts: Vec<Vec<BigRational>> = steps.iter().map(|s| lift(s)).collect();
        let base = pts[0].clone();
        let mut dirs: Vec<Vec<BigRational>> = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&base).map(|(a, b)| a - b).collect())
            .collect();
        let pivots = if dirs.is_empty() { Vec::new() } else { rref(&mut dirs) };
        let affine_dim = pivots.len();
        let direction_basis: Vec<Vec<i64>> = dirs[..affine_dim.min(dirs.len())]
            .iter()
            .map(|r| to_i64_vec(&primitive_integer(r)))
            .collect();

        let eq_rows: Vec<Vec<BigRational>> = direction_basis.iter().map(|r| lift(r)).collect();
        let equalities = null_space(&eq_rows, dim)
            .iter()
            .map(|v| {
                let normal = to_i64_vec(&primitive_integer(v));
                let offset = normal.iter().zip(&steps[0]).map(|(a, b)| a * b).sum();
                Equality { normal, offset }
            })
            .collect();

        let facets = compute_facets(&steps, &pivots, affine_dim);

        let mut geom = StepGeometry {
            dim,
            steps,
            weights,
            max_norm,
            affine_dim,
            direction_basis,
            equalities,
            facets,
            vertices: Vec::new(),
            faces: Vec::new(),
            origin_in_hull: false,
            origin_in_relative_interior: false,
            direction: None,
        };
        geom.faces = geom.enumerate_faces();
        geom.vertices = geom
            .faces
            .iter()
            .filter(|f| f.steps.len() == 1)
            .map(|f| f.steps[0])
            .collect();
        geom.vertices.sort_unstable();

        let origin = vec![<BigRational as Scalar>::zero(); dim];
        geom.origin_in_hull = geom.contains(&origin);
        geom.origin_in_relative_interior =
            geom.origin_in_hull && geom.tight_facets(&origin).is_empty();
        geom.direction = geom.find_direction();
        Ok(geom)
    }

    /// Uniform kernel `p̂_z = 1/|R|`.
    pub fn uniform(dim: usize, steps: Vec<Vec<i64>>) -> Result<Self> {
        let w = vec![1.0 / steps.len().max(1) as f64; steps.len()];
        let mut w = w;
        // absorb rounding so that the weights sum to one within tolerance
        if let Some(last) = w.last_mut() {
            let rest: f64 = 1.0 - (steps.len() - 1) as f64 / steps.len() as f64;
            *last = rest;
        }
        Self::new(dim, steps, w)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn steps(&self) -> &[Vec<i64>] {
        &self.steps
    }
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    /// `M = max |z|` (Euclidean).
    pub fn max_norm(&self) -> f64 {
        self.max_norm
    }
    pub fn affine_dim(&self) -> usize {
        self.affine_dim
    }
    /// Integer basis of `span(R − R)`.
    pub fn direction_basis(&self) -> &[Vec<i64>] {
        &self.direction_basis
    }
    pub fn equalities(&self) -> &[Equality] {
        &self.equalities
    }
    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }
    /// Indices of the steps that are extreme points of `U`.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }
    pub fn faces(&self) -> &[Face] {
        &self.faces
    }
    pub fn origin_in_hull(&self) -> bool {
        self.origin_in_hull
    }
    pub fn origin_in_relative_interior(&self) -> bool {
        self.origin_in_relative_interior
    }
    pub fn strictly_directed(&self) -> bool {
        self.direction.is_some()
    }
    pub fn direction(&self) -> Option<&[i64]> {
        self.direction.as_deref()
    }

    /// Index of the full hull among [`faces`](Self::faces).
    pub fn hull_face(&self) -> usize {
        0
    }

    pub fn mean_velocity(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (s, w) in self.steps.iter().zip(&self.weights) {
            for (acc, &x) in m.iter_mut().zip(s) {
                *acc += w * x as f64;
            }
        }
        m
    }

    pub fn step_index(&self, step: &[i64]) -> Option<usize> {
        self.steps.iter().position(|s| s == step)
    }

    /// Membership in `U` (exact for rationals, tolerance for reals).
    pub fn contains<S: Scalar>(&self, x: &[S]) -> bool {
        if x.len() != self.dim {
            return false;
        }
        self.equalities
            .iter()
            .all(|e| (S::from_i64(e.offset) - dot(&lift::<S>(&e.normal), x)).is_zero())
            && self.facets.iter().all(|f| !f.slack(x).is_negative())
    }

    pub fn contains_velocity(&self, v: &Velocity) -> bool {
        match v {
            Velocity::Exact(x) => self.contains(x),
            Velocity::Real(x) => self.contains(x),
        }
    }

    fn tight_facets<S: Scalar>(&self, x: &[S]) -> Vec<usize> {
        (0..self.facets.len())
            .filter(|&i| self.facets[i].slack(x).is_zero())
            .collect()
    }

    fn enumerate_faces(&self) -> Vec<Face> {
        let all: Vec<usize> = (0..self.steps.len()).collect();
        let mut sets: Vec<Vec<usize>> = vec![all];
        let mut i = 0;
        while i < sets.len() {
            for f in &self.facets {
                let next: Vec<usize> = sets[i]
                    .iter()
                    .copied()
                    .filter(|&s| f.slack(&lift::<BigRational>(&self.steps[s])).is_zero())
                    .collect();
                if !next.is_empty() && !sets.contains(&next) {
                    sets.push(next);
                }
            }
            i += 1;
        }
        sets.into_iter()
            .map(|steps| {
                let tight_facets: Vec<usize> = (0..self.facets.len())
                    .filter(|&f| {
                        steps.iter().all(|&s| {
                            self.facets[f].slack(&lift::<BigRational>(&self.steps[s])).is_zero()
                        })
                    })
                    .collect();
                let pts: Vec<Vec<BigRational>> =
                    steps.iter().map(|&s| lift(&self.steps[s])).collect();
                let dim = affine_rank(&pts);
                let contains_origin = self.origin_contained_in(&tight_facets);
                Face { steps, tight_facets, dim, contains_origin }
            })
            .collect()
    }

    fn origin_contained_in(&self, tight: &[usize]) -> bool {
        let origin = vec![<BigRational as Scalar>::zero(); self.dim];
        self.contains(&origin) && tight.iter().all(|&f| self.facets[f].offset == 0)
    }

    fn find_direction(&self) -> Option<Vec<i64>> {
        if let Some(e) = self.equalities.iter().find(|e| e.offset != 0) {
            let s = e.offset.signum();
            return Some(e.normal.iter().map(|x| x * s).collect());
        }
        self.facets
            .iter()
            .find(|f| f.offset < 0)
            .map(|f| f.normal.iter().map(|x| -x).collect())
    }

    /// The unique face `U₀` with `ζ ∈ ri U₀` and a representation of `ζ`
    /// strictly positive on `R₀`.
    pub fn face_of(&self, zeta: &Velocity) -> Result<(usize, ConvexRep)> {
        if zeta.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: zeta.dim() });
        }
        if !self.contains_velocity(zeta) {
            return Err(Error::OutsideHull(zeta.to_string()));
        }
        let tight = match zeta {
            Velocity::Exact(x) => self.tight_facets(x),
            Velocity::Real(x) => self.tight_facets(x),
        };
        let face = self
            .faces
            .iter()
            .position(|f| f.tight_facets == tight)
            .expect("every tight facet set of a hull point is a face");
        let steps = &self.faces[face].steps;
        let mut coeffs = vec![0.0; self.steps.len()];
        let exact = match zeta {
            Velocity::Exact(x) => {
                let pts: Vec<Vec<BigRational>> = steps.iter().map(|&s| lift(&self.steps[s])).collect();
                let beta = average_vertex_representation(&pts, x).ok_or_else(|| {
                    Error::InvalidRepresentation(format!("no representation of {zeta}"))
                })?;
                let mut full = vec![<BigRational as Scalar>::zero(); self.steps.len()];
                for (&s, b) in steps.iter().zip(beta) {
                    coeffs[s] = Scalar::to_f64(&b);
                    full[s] = b;
                }
                Some(full)
            }
            Velocity::Real(x) => {
                let pts: Vec<Vec<f64>> = steps.iter().map(|&s| lift(&self.steps[s])).collect();
                let beta = average_vertex_representation(&pts, x).ok_or_else(|| {
                    Error::InvalidRepresentation(format!("no representation of {zeta}"))
                })?;
                for (&s, b) in steps.iter().zip(beta) {
                    coeffs[s] = b.max(0.0);
                }
                None
            }
        };
        Ok((face, ConvexRep { velocity: zeta.clone(), face, coeffs, exact }))
    }

    /// Validates a user supplied representation (any `β ≥ 0`, `Σβ = 1`,
    /// `Σβ_z z = ζ`).
    pub fn representation_from_coeffs(&self, coeffs: Vec<BigRational>) -> Result<ConvexRep> {
        if coeffs.len() != self.steps.len() {
            return Err(Error::InvalidRepresentation(format!(
                "{} coefficients for {} steps",
                coeffs.len(),
                self.steps.len()
            )));
        }
        if coeffs.iter().any(|c| c.is_negative()) {
            return Err(Error::InvalidRepresentation("negative coefficient".into()));
        }
        let total: BigRational = coeffs.iter().cloned().sum();
        if total != Scalar::one() {
            return Err(Error::InvalidRepresentation(format!("coefficients sum to {total}")));
        }
        let mut zeta = vec![<BigRational as Scalar>::zero(); self.dim];
        for (c, s) in coeffs.iter().zip(&self.steps) {
            for (z, &x) in zeta.iter_mut().zip(s) {
                *z += c * BigRational::from_integer(x.into());
            }
        }
        let velocity = Velocity::Exact(zeta);
        let (face, _) = self.face_of(&velocity)?;
        Ok(ConvexRep {
            velocity,
            face,
            coeffs: coeffs.iter().map(Scalar::to_f64).collect(),
            exact: Some(coeffs),
        })
    }

    /// `x̂_n(ζ)`: `⌊nβ_z⌋` copies of each step plus the deficit distributed by
    /// largest remainder, ties broken by lexicographic step order.
    pub fn path_endpoint(&self, rep: &ConvexRep, n: u64) -> PathPlan {
        let k = self.steps.len();
        let (floors, remainders): (Vec<u64>, Vec<f64>) = match &rep.exact {
            Some(beta) => {
                let nn = BigRational::from_integer(n.into());
                let mut fl = Vec::with_capacity(k);
                let mut rem = Vec::with_capacity(k);
                let mut exact_rem = Vec::with_capacity(k);
                for b in beta {
                    let v = &nn * b;
                    let f = v.floor();
                    fl.push(f.to_integer().to_u64().expect("count fits in u64"));
                    let r = v - f;
                    rem.push(Scalar::to_f64(&r));
                    exact_rem.push(r);
                }
                // exact ordering of remainders, encoded as ranks so the shared
                // assignment below can compare plain floats
                let mut order: Vec<usize> = (0..k).collect();
                order.sort_by(|&a, &b| exact_rem[a].cmp(&exact_rem[b]));
                let mut rank = vec![0.0; k];
                let mut r = 0.0;
                for (i, &idx) in order.iter().enumerate() {
                    if i > 0 && exact_rem[idx] != exact_rem[order[i - 1]] {
                        r += 1.0;
                    }
                    rank[idx] = if exact_rem[idx].is_zero() { 0.0 } else { r + 1.0 };
                }
                (fl, rank)
            }
            None => {
                let mut fl = Vec::with_capacity(k);
                let mut rem = Vec::with_capacity(k);
                for &b in &rep.coeffs {
                    let v = n as f64 * b;
                    let f = v.floor_i64().max(0) as u64;
                    fl.push(f);
                    let r = v - f as f64;
                    rem.push(if b == 0.0 || r <= 1e-9 { 0.0 } else { r });
                }
                (fl, rem)
            }
        };
        let assigned: u64 = floors.iter().sum();
        let deficit = n.saturating_sub(assigned) as usize;
        let mut order: Vec<usize> = (0..k).filter(|&i| remainders[i] > 0.0).collect();
        order.sort_by(|&a, &b| {
            remainders[b]
                .partial_cmp(&remainders[a])
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.steps[a].cmp(&self.steps[b]))
        });
        let mut counts = floors;
        for &i in order.iter().take(deficit) {
            counts[i] += 1;
        }
        let mut endpoint = vec![0i64; self.dim];
        for (c, s) in counts.iter().zip(&self.steps) {
            for (e, &x) in endpoint.iter_mut().zip(s) {
                *e += *c as i64 * x;
            }
        }
        PathPlan { n, counts, endpoint }
    }

    /// Convenience: `face_of` followed by `path_endpoint`.
    pub fn endpoint_for(&self, zeta: &Velocity, n: u64) -> Result<PathPlan> {
        let (_, rep) = self.face_of(zeta)?;
        Ok(self.path_endpoint(&rep, n))
    }

    /// JSON description used by `rwrp geometry describe`.
    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "dim": self.dim,
            "steps": self.steps,
            "weights": self.weights,
            "max_norm": self.max_norm,
            "affine_dim": self.affine_dim,
            "extreme_points": self.vertices.iter().map(|&i| &self.steps[i]).collect::<Vec<_>>(),
            "equalities": self.equalities,
            "facets": self.facets,
            "faces": self.faces.iter().map(|f| serde_json::json!({
                "steps": f.steps.iter().map(|&i| &self.steps[i]).collect::<Vec<_>>(),
                "dim": f.dim,
                "contains_origin": f.contains_origin,
            })).collect::<Vec<_>>(),
            "origin_in_hull": self.origin_in_hull,
            "origin_in_relative_interior": self.origin_in_relative_interior,
            "strictly_directed": self.strictly_directed(),
            "direction": self.direction,
        })
    }
}

pub(crate) fn affine_rank<S: Scalar>(pts: &[Vec<S>]) -> usize {
    if pts.len() <= 1 {
        return 0;
    }
    let diffs: Vec<Vec<S>> = pts[1..]
        .iter()
        .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| a.clone() - b.clone()).collect())
        .collect();
    rank(&diffs)
}

/// Barycentric coordinates of `target` relative to affinely independent `pts`.
pub(crate) fn barycentric<S: Scalar>(pts: &[&Vec<S>], target: &[S]) -> Option<Vec<S>> {
    let dim = target.len();
    let mut a: Vec<Vec<S>> = (0..dim)
        .map(|c| pts.iter().map(|p| p[c].clone()).collect())
        .collect();
    a.push(vec![S::one(); pts.len()]);
    let mut b = target.to_vec();
    b.push(S::one());
    solve_unique(&a, &b)
}

/// Average of all vertices of `{β ≥ 0 : Σβ = 1, Σβ_i p_i = target}`. The
/// vertices are the nonnegative barycentric solutions on affinely
/// independent subsets, so the average is strictly positive on every point
/// that appears in some representation.
pub(crate) fn average_vertex_representation<S: Scalar>(
    pts: &[Vec<S>],
    target: &[S],
) -> Option<Vec<S>> {
    let r = affine_rank(pts);
    let mut vertices: Vec<Vec<S>> = Vec::new();
    for size in 1..=(r + 1).min(pts.len()) {
        for subset in subsets(pts.len(), size) {
            let chosen: Vec<&Vec<S>> = subset.iter().map(|&i| &pts[i]).collect();
            let owned: Vec<Vec<S>> = chosen.iter().map(|p| (*p).clone()).collect();
            if affine_rank(&owned) + 1 != size {
                continue;
            }
            let Some(lam) = barycentric(&chosen, target) else { continue };
            if lam.iter().any(|l| l.is_negative()) {
                continue;
            }
            let mut full = vec![S::zero(); pts.len()];
            for (&i, l) in subset.iter().zip(lam) {
                full[i] = if l.is_zero() { S::zero() } else { l };
            }
            let dup = vertices.iter().any(|v| {
                v.iter().zip(&full).all(|(a, b)| (a.clone() - b.clone()).is_zero())
            });
            if !dup {
                vertices.push(full);
            }
        }
    }
    if vertices.is_empty() {
        return None;
    }
    let count = S::from_i64(vertices.len() as i64);
    let mut avg = vec![S::zero(); pts.len()];
    for v in &vertices {
        for (a, x) in avg.iter_mut().zip(v) {
            *a = a.clone() + x.clone();
        }
    }
    Some(avg.into_iter().map(|a| a / count.clone()).collect())
}

fn compute_facets(steps: &[Vec<i64>], pivots: &[usize], r: usize) -> Vec<Facet> {
    if r == 0 {
        return Vec::new();
    }
    let dim = steps[0].len();
    let proj: Vec<Vec<BigRational>> = steps
        .iter()
        .map(|s| pivots.iter().map(|&c| BigRational::from_integer(s[c].into())).collect())
        .collect();
    let mut facets: Vec<Facet> = Vec::new();
    for subset in subsets(steps.len(), r) {
        let p0 = &proj[subset[0]];
        let m: Vec<Vec<BigRational>> = subset[1..]
            .iter()
            .map(|&i| proj[i].iter().zip(p0).map(|(a, b)| a - b).collect())
            .collect();
        // generalized cross product: cofactors of the (r-1) x r matrix
        let normal: Vec<BigRational> = (0..r)
            .map(|c| {
                let minor: Vec<Vec<BigRational>> = m
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, x)| x.clone()).collect())
                    .collect();
                let det = if minor.is_empty() { Scalar::one() } else { scalar::determinant(&minor) };
                if c % 2 == 0 { det } else { -det }
            })
            .collect();
        if normal.iter().all(|x| x.is_zero()) {
            continue;
        }
        let normal = primitive_integer(&normal);
        let nq: Vec<BigRational> = normal.iter().map(|x| BigRational::from_integer(x.clone())).collect();
        let offset = dot(&nq, p0);
        let vals: Vec<BigRational> = proj.iter().map(|p| dot(&nq, p) - &offset).collect();
        let sign: i64 = if vals.iter().all(|v| !v.is_positive()) {
            1
        } else if vals.iter().all(|v| !v.is_negative()) {
            -1
        } else {
            continue;
        };
        let mut lifted = vec![0i64; dim];
        for (k, &c) in pivots.iter().enumerate() {
            lifted[c] = sign * normal[k].to_i64().expect("facet normal fits in i64");
        }
        let off = sign * offset.to_integer().to_i64().expect("facet offset fits in i64");
        let f = Facet { normal: lifted, offset: off };
        if !facets.contains(&f) {
            facets.push(f);
        }
    }
    facets
}
