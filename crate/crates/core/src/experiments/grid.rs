//! Neighbour and midpoint structure of exact velocity grids.

use std::collections::HashMap;

use num_rational::BigRational;

use crate::geometry::{StepGeometry, Velocity};

fn exact(v: &Velocity) -> Option<&[BigRational]> {
    match v {
        Velocity::Exact(x) => Some(x),
        Velocity::Real(_) => None,
    }
}

/// Triples `(a, c, m)` with `ζ_m = (ζ_a + ζ_c) / 2`, `a < c`. Real-valued
/// velocities never take part.
pub fn midpoint_triples(zetas: &[Velocity]) -> Vec<(usize, usize, usize)> {
    let index: HashMap<&[BigRational], usize> =
        zetas.iter().enumerate().filter_map(|(i, z)| exact(z).map(|x| (x, i))).collect();
    let two = BigRational::from_integer(2.into());
    let mut out = Vec::new();
    for a in 0..zetas.len() {
        let Some(xa) = exact(&zetas[a]) else { continue };
        for c in a + 1..zetas.len() {
            let Some(xc) = exact(&zetas[c]) else { continue };
            let mid: Vec<BigRational> = xa.iter().zip(xc).map(|(p, q)| (p + q) / &two).collect();
            if let Some(&m) = index.get(mid.as_slice()) {
                out.push((a, c, m));
            }
        }
    }
    out
}

/// Pairs of grid points one move apart on the barycentric grid of
/// resolution `k`: `ζ_a − ζ_c = (v − w) / k` for two extreme points.
pub fn adjacent_pairs(geom: &StepGeometry, zetas: &[Velocity], k: usize) -> Vec<(usize, usize)> {
    let verts: Vec<&Vec<i64>> = geom.vertices().iter().map(|&i| &geom.steps()[i]).collect();
    let k = BigRational::from_integer((k.max(1) as i64).into());
    let moves: Vec<Vec<BigRational>> = verts
        .iter()
        .flat_map(|v| verts.iter().map(move |w| (v, w)))
        .filter(|(v, w)| v != w)
        .map(|(v, w)| v.iter().zip(w.iter()).map(|(a, b)| BigRational::from_integer((a - b).into()) / &k).collect())
        .collect();
    let mut out = Vec::new();
    for a in 0..zetas.len() {
        let Some(xa) = exact(&zetas[a]) else { continue };
        for c in a + 1..zetas.len() {
            let Some(xc) = exact(&zetas[c]) else { continue };
            let diff: Vec<BigRational> = xa.iter().zip(xc).map(|(p, q)| p - q).collect();
            if moves.contains(&diff) {
                out.push((a, c));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duality::velocity_grid;

    #[test]
    fn segment_grid_structure() {
        let g = StepGeometry::uniform(1, vec![vec![1], vec![2]]).unwrap();
        let zs = velocity_grid(&g, 4);
        assert_eq!(zs.len(), 5);
        assert_eq!(adjacent_pairs(&g, &zs, 4).len(), 4);
        // midpoints of (0,2), (1,3), (2,4), (0,4)
        assert_eq!(midpoint_triples(&zs).len(), 4);
    }
}
