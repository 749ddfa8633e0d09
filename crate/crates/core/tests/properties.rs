//! Property tests for the invariants of each module.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use rwrp_core::duality::{build_tilt_table, legendre_usc, velocity_grid, TiltGrid, TiltSource, TiltedFreeEnergyTable};
use rwrp_core::entropy::{entropy_of_pair, maximize_variational, min_entropy, objective, VariationalOptions};
use rwrp_core::environment::{Environment, Marginal, PotentialKind, PotentialSpec};
use rwrp_core::geometry::{coefficient_transport, StepGeometry, Velocity};
use rwrp_core::l2::{solve_tilt, stationarity_residual, AveragedMgf, GibbsPair};
use rwrp_core::transfer::{distribution_of, tilted_log_partition, DpEngine, FiniteModel};

fn tri() -> StepGeometry {
    StepGeometry::uniform(2, vec![vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap()
}

fn space_time() -> StepGeometry {
    StepGeometry::uniform(2, vec![vec![-1, 1], vec![0, 1], vec![2, 1]]).unwrap()
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// A rational point `Σ β_z z` with positive `β` over the given step indices.
fn rational_point(geom: &StepGeometry, idx: &[usize], raw: &[i64]) -> Vec<BigRational> {
    let total: i64 = raw.iter().sum();
    (0..geom.dim())
        .map(|c| idx.iter().zip(raw).map(|(&i, &r)| q(r * geom.steps()[i][c], total)).sum())
        .collect()
}

fn log_sum_exp(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn sup_dist(a: &[i64], b: &[BigRational]) -> BigRational {
    a.iter().zip(b).map(|(&x, y)| (BigRational::from_integer(x.into()) - y).abs()).max().unwrap()
}

// ---------------------------------------------------------------- geometry

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lattice_endpoints_track_n_zeta(raw in prop::collection::vec(1i64..20, 3), n in 0u64..500) {
        let g = tri();
        let zeta = Velocity::Exact(rational_point(&g, &[0, 1, 2], &raw));
        let plan = g.endpoint_for(&zeta, n).unwrap();
        prop_assert_eq!(plan.counts.iter().sum::<u64>(), n);
        let nz: Vec<BigRational> = match &zeta {
            Velocity::Exact(z) => z.iter().map(|c| c * BigRational::from_integer(BigInt::from(n))).collect(),
            _ => unreachable!(),
        };
        let m = g.max_norm() as i64;
        prop_assert!(sup_dist(&plan.endpoint, &nz) <= q(3 * m, 1));
    }

    #[test]
    fn integral_multiples_hit_n_zeta(raw in prop::collection::vec(1i64..12, 3), m in 0u64..6) {
        let g = tri();
        let total: i64 = raw.iter().sum();
        let zeta = Velocity::Exact(rational_point(&g, &[0, 1, 2], &raw));
        let n = m * total as u64;
        let plan = g.endpoint_for(&zeta, n).unwrap();
        let expect: Vec<i64> = (0..2).map(|c| raw.iter().zip(g.steps()).map(|(r, z)| r * z[c]).sum::<i64>() * m as i64).collect();
        prop_assert_eq!(plan.endpoint, expect);
    }

    #[test]
    fn face_of_is_idempotent_on_relative_interiors(face_pick in 0usize..16, raw in prop::collection::vec(1i64..30, 4)) {
        let g = StepGeometry::uniform(2, vec![vec![1, 0], vec![0, 1], vec![-1, 0], vec![0, -1]]).unwrap();
        let faces = g.faces();
        let f = face_pick % faces.len();
        let idx = &faces[f].steps;
        let zeta = Velocity::Exact(rational_point(&g, idx, &raw[..idx.len()]));
        let (got, rep) = g.face_of(&zeta).unwrap();
        prop_assert_eq!(&faces[got].steps, idx);
        prop_assert!(rep.coeffs.iter().enumerate().all(|(i, &c)| (c > 0.0) == idx.contains(&i)));
    }

    #[test]
    fn transport_outputs_are_exact_representations(
        raw in prop::collection::vec(1i64..9, 4),
        dir in prop::collection::vec(-3i64..=3, 4),
        e in 3u32..10,
    ) {
        let pts: Vec<Vec<BigRational>> = [[0, 0], [2, 0], [0, 2], [1, 1]]
            .iter()
            .map(|p| p.iter().map(|&c| q(c, 1)).collect())
            .collect();
        let total: i64 = raw.iter().sum();
        let beta: Vec<BigRational> = raw.iter().map(|&r| q(r, total)).collect();
        // α = β + h v with Σ v = 0 stays a positive representation
        let h = BigRational::new(1.into(), BigInt::from(10).pow(e));
        let sum: i64 = dir.iter().sum();
        let alpha: Vec<BigRational> = beta.iter().zip(&dir).map(|(b, &v)| b + &h * q(4 * v - sum, 4)).collect();
        let xi: Vec<BigRational> = (0..2).map(|c| pts.iter().zip(&alpha).map(|(p, a)| &p[c] * a).sum()).collect();
        let out = coefficient_transport(&pts, &beta, std::slice::from_ref(&xi)).unwrap();
        let a = &out.alphas[0];
        prop_assert_eq!(a.iter().sum::<BigRational>(), q(1, 1));
        prop_assert!(a.iter().all(|x| x >= &q(0, 1)));
        for c in 0..2 {
            prop_assert_eq!(a.iter().zip(&pts).map(|(x, p)| x * &p[c]).sum::<BigRational>(), xi[c].clone());
        }
    }
}

// ---------------------------------------------------------------- transfer

fn periodic(table: &[f64]) -> Environment {
    Environment::periodic(vec![2, 2], table.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn line_total_is_the_sum_of_endpoints(seed in 0u64..1000, n in 0usize..40, beta in 0.0f64..2.0) {
        let g = space_time();
        let env = Environment::iid(Marginal::Gaussian { mean: 0.0, std_dev: 1.0 }, seed).unwrap();
        let layer = DpEngine::new(&g, &env, &PotentialSpec::site(beta)).unwrap().run(n).unwrap();
        let lse = log_sum_exp(layer.endpoints().into_values());
        prop_assert!((layer.log_total() - lse).abs() <= 1e-10);
        let mass: f64 = distribution_of(&layer).values().sum();
        prop_assert!((mass - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn constant_shift_adds_n_c(table in prop::collection::vec(-1.0f64..1.0, 4), c in -2.0f64..2.0, n in 1usize..60) {
        let g = tri();
        let shifted: Vec<f64> = table.iter().map(|v| v + c).collect();
        let spec = PotentialSpec::site(1.0);
        let a = DpEngine::new(&g, &periodic(&table), &spec).unwrap().run(n).unwrap().log_total();
        let b = DpEngine::new(&g, &periodic(&shifted), &spec).unwrap().run(n).unwrap().log_total();
        prop_assert!((b - a - n as f64 * c).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn larger_potential_larger_partition_function(
        table in prop::collection::vec(-1.0f64..1.0, 4),
        bump in prop::collection::vec(0.0f64..0.5, 4),
        n in 1usize..60,
    ) {
        let g = tri();
        let up: Vec<f64> = table.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let spec = PotentialSpec::site(1.0);
        let a = DpEngine::new(&g, &periodic(&table), &spec).unwrap().run(n).unwrap().log_total();
        let b = DpEngine::new(&g, &periodic(&up), &spec).unwrap().run(n).unwrap().log_total();
        prop_assert!(a <= b + 1e-12);
    }
}

// ---------------------------------------------------------------- duality

fn perron_table(radius: f64, step: f64) -> (StepGeometry, TiltedFreeEnergyTable) {
    let g = tri();
    let env = periodic(&[0.4, -0.8, 1.0, 0.1]);
    let grid = TiltGrid::new(&g, radius, step).unwrap();
    let table = build_tilt_table(&env, &PotentialSpec::site(1.0), &g, &grid, &TiltSource::Perron).unwrap();
    (g, table)
}

fn hull_point(a: f64, b: f64) -> Vec<f64> {
    // barycentric (a, b, 1 − a − b) after folding into the simplex
    let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
    vec![a + (1.0 - a - b), b + (1.0 - a - b)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn legendre_is_midpoint_concave(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.0f64..1.0) {
        let (g, table) = perron_table(2.0, 0.25);
        let (x, y) = (hull_point(a, b), hull_point(c, d));
        let m: Vec<f64> = x.iter().zip(&y).map(|(u, v)| 0.5 * (u + v)).collect();
        let l = |z: &[f64]| legendre_usc(&table, &g, z).unwrap().value;
        prop_assert!(0.5 * (l(&x) + l(&y)) - l(&m) <= 1e-12);
    }

    #[test]
    fn refining_the_grid_never_raises_legendre(a in 0.0f64..1.0, b in 0.0f64..1.0, keep in 2usize..5) {
        let (g, fine) = perron_table(2.0, 0.25);
        let mut coarse = fine.clone();
        coarse.entries = fine.entries.iter().step_by(keep).cloned().collect();
        let z = hull_point(a, b);
        let lf = legendre_usc(&fine, &g, &z).unwrap().value;
        let lc = legendre_usc(&coarse, &g, &z).unwrap().value;
        prop_assert!(lf <= lc + 1e-15);
    }

    #[test]
    fn finite_n_fenchel_inequality(
        raw in prop::collection::vec(1i64..10, 3),
        t in prop::collection::vec(-1.5f64..1.5, 2),
        seed in 0u64..100,
        n in 1usize..80,
    ) {
        let g = tri();
        let env = Environment::iid(Marginal::Bernoulli { p: 0.5, low: -1.0, high: 1.0 }, seed).unwrap();
        let layer = DpEngine::new(&g, &env, &PotentialSpec::site(1.0)).unwrap().run(n).unwrap();
        let zeta = Velocity::Exact(rational_point(&g, &[0, 1, 2], &raw));
        let x = g.endpoint_for(&zeta, n as u64).unwrap().endpoint;
        let f = layer.endpoint_log_mass(&x).unwrap();
        let zf = zeta.to_f64();
        let nf = n as f64;
        let slack = 3.0 * g.max_norm() * t.iter().map(|v| v.abs()).sum::<f64>();
        let rhs = tilted_log_partition(&layer, &t) / nf - zf[0] * t[0] - zf[1] * t[1] + slack / nf;
        prop_assert!(f / nf <= rhs + 1e-12);
    }
}

// ---------------------------------------------------------------- l2

fn z4() -> StepGeometry {
    let mut steps = Vec::new();
    for i in 0..3 {
        for s in [1, -1] {
            let mut z = vec![0i64; 4];
            z[i] = s;
            z[3] = 1;
            steps.push(z);
        }
    }
    StepGeometry::uniform(4, steps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn hessian_of_lambda_is_psd(theta in prop::collection::vec(-2.0f64..2.0, 4), beta in 0.0f64..1.0) {
        let g = z4();
        let env = Environment::iid(Marginal::Gaussian { mean: 0.0, std_dev: 1.0 }, 0).unwrap();
        let mgf = AveragedMgf::from_env(&g, &env, &PotentialSpec::site(beta)).unwrap();
        let h = mgf.hess(&theta);
        let min = h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(min >= -1e-10);
    }

    #[test]
    fn fenchel_equality_at_solved_tilts(a in 1i64..6, b in 1i64..6, c in 1i64..6, beta in 0.0f64..1.0) {
        let g = z4();
        let env = Environment::iid(Marginal::Gaussian { mean: 0.0, std_dev: 1.0 }, 0).unwrap();
        let mgf = AveragedMgf::from_env(&g, &env, &PotentialSpec::site(beta)).unwrap();
        let total = 2 * (a + b + c);
        let zeta = Velocity::from_ratios(&[(a - b, total), (b - c, total), (c - a, total), (1, 1)]);
        let sol = solve_tilt(&mgf, &g, &zeta).unwrap();
        let zf = zeta.to_f64();
        let dual: f64 = sol.theta.iter().zip(&zf).map(|(t, z)| t * z).sum::<f64>() - mgf.lambda(&sol.theta);
        prop_assert!((sol.lambda_star - dual).abs() <= 1e-10);
        let grad = mgf.grad(&sol.theta);
        prop_assert!(grad.iter().zip(&zf).all(|(u, v)| (u - v).abs() <= 1e-10));
    }

    #[test]
    fn gibbs_pair_is_gauge_invariant(
        table in prop::collection::vec(-1.0f64..1.0, 6),
        theta in -1.0f64..1.0,
        shift in -2.0f64..2.0,
    ) {
        let g = space_time();
        let env = Environment::periodic(vec![3, 2], table).unwrap();
        let model = FiniteModel::build(&g, &env, &PotentialSpec::site(0.8)).unwrap();
        // η = (0, c) has η·z = c on every step
        let a = GibbsPair::from_model(&model, &[theta, 0.0]).unwrap();
        let b = GibbsPair::from_model(&model, &[theta, shift]).unwrap();
        prop_assert!((b.log_rho - a.log_rho - shift).abs() <= 1e-12);
        prop_assert!(a.q.iter().zip(&b.q).all(|(x, y)| (x - y).abs() <= 1e-12));
        prop_assert!(a.mu.iter().zip(&b.mu).all(|(x, y)| (x - y).abs() <= 1e-12));
        prop_assert!(a.row_residual <= 1e-12 && a.stationarity_residual <= 1e-12);
    }
}

// ---------------------------------------------------------------- entropy

fn entropy_model(table: &[f64]) -> FiniteModel {
    let g = tri();
    let spec = PotentialSpec { kind: PotentialKind::Step { coeffs: vec![1.0, 0.5, -0.5], offsets: vec![0.0, 0.1, 0.2] }, ell: 1, beta: 1.0 };
    FiniteModel::build(&g, &periodic(table), &spec).unwrap()
}

/// Random stationary occupation measures near `nu`: mass is pushed around
/// closed cycles of the chain, which preserves inflow = outflow.
fn perturb_along_cycles(model: &FiniteModel, nu: &[f64], rng: &mut Xoshiro256PlusPlus) -> Vec<f64> {
    let k = model.num_steps();
    let mut out = nu.to_vec();
    for _ in 0..4 {
        let start = rng.gen_range(0..model.num_states());
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut s = start;
        let cycle = loop {
            let z = rng.gen_range(0..k);
            path.push((s, z));
            s = model.next(s, z);
            if let Some(i) = path.iter().position(|&(t, _)| t == s) {
                break path[i..].to_vec();
            }
        };
        let room = cycle.iter().map(|&(s, z)| out[s * k + z]).fold(f64::INFINITY, f64::min);
        let eps = rng.gen_range(-0.9..1.0) * room;
        for (s, z) in cycle {
            out[s * k + z] += eps;
        }
    }
    out
}

fn split(nu: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let total: f64 = nu.iter().sum();
    let mu: Vec<f64> = nu.chunks(k).map(|r| r.iter().sum::<f64>() / total).collect();
    let nu: Vec<f64> = nu.iter().map(|v| v / total).collect();
    let q = nu.iter().enumerate().map(|(i, v)| v / mu[i / k]).collect();
    (mu, q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn min_entropy_is_below_every_feasible_kernel(table in prop::collection::vec(-1.0f64..1.0, 4), seed in 0u64..1000) {
        let model = entropy_model(&table);
        let k = model.num_steps();
        let base = GibbsPair::from_model(&model, &[0.2, -0.1]).unwrap().occupation();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        for _ in 0..100 {
            let (mu, q) = split(&perturb_along_cycles(&model, &base, &mut rng), k);
            prop_assert!(stationarity_residual(&model, &mu, &q) <= 1e-12);
            let h = entropy_of_pair(&model, &mu, &q).unwrap();
            let (best, _) = min_entropy(&model, &mu).unwrap();
            prop_assert!(h >= 0.0);
            prop_assert!(best.value <= h + 1e-9);
        }
    }

    #[test]
    fn objective_is_midpoint_concave(table in prop::collection::vec(-1.0f64..1.0, 4), seed in 0u64..1000) {
        let model = entropy_model(&table);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        for _ in 0..100 {
            let t0 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let t1 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let a = GibbsPair::from_model(&model, &t0).unwrap().occupation();
            let b = GibbsPair::from_model(&model, &t1).unwrap().occupation();
            let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let gap = 0.5 * (objective(&model, &a, None) + objective(&model, &b, None)) - objective(&model, &m, None);
            prop_assert!(gap <= 1e-12);
        }
    }
}

#[test]
fn unconstrained_value_is_the_max_over_velocities() {
    let g = tri();
    let model = FiniteModel::build(&g, &periodic(&[0.4, -0.8, 1.0, 0.1]), &PotentialSpec::site(1.0)).unwrap();
    let free = maximize_variational(&model, &VariationalOptions::default()).unwrap().value;
    let mut best = f64::NEG_INFINITY;
    for zeta in velocity_grid(&g, 8) {
        if g.face_of(&zeta).unwrap().0 != g.hull_face() {
            continue;
        }
        let opts = VariationalOptions { zeta: Some(zeta.to_f64()), ..Default::default() };
        let v = maximize_variational(&model, &opts).unwrap().value;
        assert!(v <= free + 1e-9, "{zeta}: {v} > {free}");
        best = best.max(v);
    }
    // grid modulus of a smooth concave function at spacing 1/8
    assert!(free - best < 1e-2, "{free} vs {best}");
}
