//! Transporting a positive convex representation of `ζ` along a sequence
//! `ξ_n → ζ`: pick an affinely independent spanning subset `I₀`, write
//! `β = [β̄ 0] + y` with `y` in the kernel of the barycentric change of
//! basis, and set `α^n = [ᾱ^n 0] + y` where `ᾱ^n` are the barycentric
//! coordinates of `ξ_n`. Rational inputs give rational outputs.

use crate::error::{Error, Result};

use super::scalar::{rref, subsets, Scalar};
use super::{affine_rank, average_vertex_representation, barycentric};

#[derive(Debug, Clone)]
pub struct TransportOutput<S> {
    /// Indices of the affinely independent subset `I₀`.
    pub base: Vec<usize>,
    /// One representation per input point, indexed like the point set.
    pub alphas: Vec<Vec<S>>,
    /// `‖α^n − β‖∞ ≤ lipschitz · ‖ξ_n − ζ‖∞` whenever the affine
    /// construction is used.
    pub lipschitz: f64,
    /// `true` where the affine construction went negative and a generic
    /// representation of `ξ_n` was substituted.
    pub fallback: Vec<bool>,
}

pub fn coefficient_transport<S: Scalar>(
    points: &[Vec<S>],
    beta: &[S],
    xis: &[Vec<S>],
) -> Result<TransportOutput<S>> {
    if points.is_empty() {
        return Err(Error::EmptySteps);
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
    }
    if beta.len() != points.len() {
        return Err(Error::InvalidRepresentation(format!(
            "{} coefficients for {} points",
            beta.len(),
            points.len()
        )));
    }
    if beta.iter().any(|b| !b.is_positive()) {
        return Err(Error::InvalidRepresentation("coefficients must be strictly positive".into()));
    }
    let total = beta.iter().cloned().fold(S::zero(), |a, b| a + b);
    if !(total - S::one()).is_zero() {
        return Err(Error::InvalidRepresentation("coefficients must sum to one".into()));
    }

    let r = affine_rank(points);
    let pivots = {
        let mut diffs: Vec<Vec<S>> = points[1..]
            .iter()
            .map(|p| p.iter().zip(&points[0]).map(|(a, b)| a.clone() - b.clone()).collect())
            .collect();
        if diffs.is_empty() { Vec::new() } else { rref(&mut diffs) }
    };

    // best conditioned spanning simplex, measured by the projected volume
    let mut best: Option<(f64, Vec<usize>)> = None;
    for subset in subsets(points.len(), r + 1) {
        let m: Vec<Vec<S>> = subset[1..]
            .iter()
            .map(|&i| {
                pivots
                    .iter()
                    .map(|&c| points[i][c].clone() - points[subset[0]][c].clone())
                    .collect()
            })
            .collect();
        let vol = if m.is_empty() { 1.0 } else { super::scalar::determinant(&m).to_f64().abs() };
        if vol > 1e-12 && best.as_ref().is_none_or(|(b, _)| vol > *b) {
            best = Some((vol, subset));
        }
    }
    let (_, base) = best.expect("a spanning affinely independent subset exists");
    let base_pts: Vec<&Vec<S>> = base.iter().map(|&i| &points[i]).collect();

    // β̄ = A β with A = [I | γ]
    let mut beta_bar: Vec<S> = base.iter().map(|&i| beta[i].clone()).collect();
    for (j, p) in points.iter().enumerate() {
        if base.contains(&j) {
            continue;
        }
        let gamma = barycentric(&base_pts, p).expect("points lie in their own affine hull");
        for (bb, g) in beta_bar.iter_mut().zip(gamma) {
            *bb = bb.clone() + g * beta[j].clone();
        }
    }
    let mut y = beta.to_vec();
    for (k, &i) in base.iter().enumerate() {
        y[i] = y[i].clone() - beta_bar[k].clone();
    }

    let lipschitz = barycentric_lipschitz(points, &base, &pivots);

    let mut alphas = Vec::with_capacity(xis.len());
    let mut fallback = Vec::with_capacity(xis.len());
    for xi in xis {
        if xi.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: xi.len() });
        }
        let bary = barycentric(&base_pts, xi)
            .ok_or_else(|| Error::OutsideHull(format!("{xi:?} is not in the affine hull")))?;
        let mut alpha = y.clone();
        for (k, &i) in base.iter().enumerate() {
            alpha[i] = alpha[i].clone() + bary[k].clone();
        }
        if alpha.iter().any(|a| a.is_negative()) {
            let generic = average_vertex_representation(points, xi)
                .ok_or_else(|| Error::OutsideHull(format!("{xi:?} is not in the convex hull")))?;
            alphas.push(generic);
            fallback.push(true);
        } else {
            alphas.push(alpha.into_iter().map(|a| if a.is_zero() { S::zero() } else { a }).collect());
            fallback.push(false);
        }
    }
    Ok(TransportOutput { base, alphas, lipschitz, fallback })
}

/// Operator bound of `ξ ↦ barycentric(ξ)` in the ∞-norm, from the inverse of
/// the projected simplex matrix.
fn barycentric_lipschitz<S: Scalar>(points: &[Vec<S>], base: &[usize], pivots: &[usize]) -> f64 {
    let r = base.len() - 1;
    if r == 0 {
        return 0.0;
    }
    // columns: projected edge vectors p_j - p_0
    let m: Vec<Vec<f64>> = (0..r)
        .map(|c| {
            (1..=r)
                .map(|j| points[base[j]][pivots[c]].to_f64() - points[base[0]][pivots[c]].to_f64())
                .collect()
        })
        .collect();
    let mat = nalgebra::DMatrix::from_fn(r, r, |i, j| m[i][j]);
    let inv = mat.try_inverse().expect("simplex matrix is invertible");
    let mut max_row = 0.0f64;
    let mut total = 0.0f64;
    for i in 0..r {
        let row: f64 = (0..r).map(|j| inv[(i, j)].abs()).sum();
        max_row = max_row.max(row);
        total += row;
    }
    max_row.max(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn constant_sequence_keeps_beta() {
        let pts = vec![vec![q(0, 1)], vec![q(1, 1)]];
        let beta = vec![q(1, 2), q(1, 2)];
        let xis = vec![vec![q(1, 2)]; 5];
        let out = coefficient_transport(&pts, &beta, &xis).unwrap();
        for a in out.alphas {
            assert_eq!(a, beta);
        }
    }

    /// Closest representation in the sup norm, by scanning the one free
    /// parameter of representations over {0, 1, 2}.
    fn closest_rep_oracle(xi: f64, beta: &[f64; 3]) -> f64 {
        let mut best = f64::INFINITY;
        let steps = 200_000;
        for k in 0..=steps {
            let s = k as f64 / steps as f64;
            let a = [1.0 - xi + s, xi - 2.0 * s, s];
            if a.iter().any(|&x| x < 0.0) {
                continue;
            }
            let d = a.iter().zip(beta).map(|(x, b)| (x - b).abs()).fold(0.0, f64::max);
            best = best.min(d);
        }
        best
    }

    #[test]
    fn converges_like_the_direct_optimum() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let beta = [0.25, 0.5, 0.25];
        let ns = [10usize, 100, 1000];
        let xis: Vec<Vec<f64>> = ns.iter().map(|&n| vec![1.0 + 1.0 / n as f64]).collect();
        let out = coefficient_transport(&pts, &beta, &xis).unwrap();
        let mut prev = f64::INFINITY;
        for (a, xi) in out.alphas.iter().zip(&xis) {
            let sum: f64 = a.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!((a[1] + 2.0 * a[2] - xi[0]).abs() < 1e-12);
            let gap = a.iter().zip(&beta).map(|(x, b)| (x - b).abs()).fold(0.0, f64::max);
            let oracle = closest_rep_oracle(xi[0], &beta);
            assert!(oracle <= gap + 1e-9);
            assert!(gap < prev);
            assert!(gap <= out.lipschitz * (xi[0] - 1.0) + 1e-12);
            prev = gap;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn rational_points_give_rational_coefficients() {
        let pts = vec![vec![q(1, 1), q(0, 1)], vec![q(0, 1), q(1, 1)], vec![q(1, 1), q(1, 1)]];
        let beta = vec![q(1, 3), q(1, 3), q(1, 3)];
        let xis: Vec<Vec<BigRational>> = (1..20)
            .map(|n| vec![q(2, 3) + q(1, 7 * n), q(2, 3) - q(1, 11 * n)])
            .collect();
        let out = coefficient_transport(&pts, &beta, &xis).unwrap();
        for (a, xi) in out.alphas.iter().zip(&xis) {
            let sum: BigRational = a.iter().cloned().sum();
            assert_eq!(sum, q(1, 1));
            for c in 0..2 {
                let comb: BigRational = a.iter().zip(&pts).map(|(x, p)| x * &p[c]).sum();
                assert_eq!(&comb, &xi[c]);
            }
        }
    }

    #[test]
    fn rejects_invalid_inputs() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(coefficient_transport(&pts, &[0.0, 1.0], &[]).is_err());
        assert!(coefficient_transport(&pts, &[0.5, 0.6], &[]).is_err());
        assert!(coefficient_transport(&pts, &[0.5, 0.5], &[vec![3.0]]).is_err());
    }
}
