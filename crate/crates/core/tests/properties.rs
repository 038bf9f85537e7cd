use std::f64::consts::PI;

use lamesolve::besov::{besov_norm, make_basis, multiplier_apply, QIndex};
use lamesolve::grid::Grid;
use lamesolve::halfspace::boundary_coeffs_at;
use lamesolve::laplace::{contour_nodes, decay_fit, dyadic_l1, invert_scalar, TimeTrace};
use lamesolve::symbols::{kernel_m_ab, roots_at, Material, KERNEL_M_SWITCH};
use lamesolve::wholespace::{residual, solve_wholespace};
use lamesolve::symbols::SectorPoint;
use lamesolve::C64;
use proptest::prelude::*;

const EPS: f64 = PI / 6.0;

fn material() -> impl Strategy<Value = Material> {
    (0.5f64..2.0, 0.0f64..2.0, 0.5f64..2.0, 0.5f64..2.0).prop_map(|(a, b, r, p)| Material::new(a, b, r, p).unwrap())
}

/// lambda in the sector with |lambda| log-uniform on [1, 10^4].
fn sector_lambda() -> impl Strategy<Value = C64> {
    (0.0f64..4.0, -(PI - EPS)..(PI - EPS)).prop_map(|(e, arg)| C64::from_polar(10f64.powf(e), arg))
}

fn c64() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| C64::new(re, im))
}

fn trig_field(grid: &Grid, coeffs: &[(i32, i32, C64)]) -> Vec<C64> {
    let w = 2.0 * PI / grid.extent;
    grid.sample(|x| coeffs.iter().map(|&(k1, k2, c)| c * C64::from_polar(1.0, w * (k1 as f64 * x[0] + k2 as f64 * x[1]))).sum())
}

fn trig_coeffs(max_k: i32) -> impl Strategy<Value = Vec<(i32, i32, C64)>> {
    prop::collection::vec((-max_k..=max_k, -max_k..=max_k, c64()), 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roots_have_positive_real_part(lam in sector_lambda(), xi in 0.0f64..100.0, mat in material()) {
        let r = roots_at(lam, xi, &mat).unwrap();
        prop_assert!(r.a.re > 0.0 && r.b.re > 0.0);
        // both roots scale like |lambda|^1/2 + |xi'|
        let w = lam.norm().sqrt() + xi;
        for e in [r.a, r.b] {
            prop_assert!(e.norm() <= 2.0 * w && e.re >= 0.1 * w, "E = {e}, weight {w}");
        }
    }

    #[test]
    fn kernel_identity(a in c64(), b in c64(), x in 0.0f64..5.0) {
        // shift into the right half plane and keep the roots apart
        let (a, b) = (a + 1.5, b + 4.0);
        let m = kernel_m_ab(a, b, x);
        let (ea, eb) = ((-a * x).exp(), (-b * x).exp());
        let dm = (-b * eb + a * ea) / (b - a);
        let res = dm + eb + a * m;
        prop_assert!(res.norm() <= 1e-12 * (dm.norm() + eb.norm() + (a * m).norm()));
    }

    #[test]
    fn kernel_continuous_across_switch(b in c64(), x in 0.5f64..3.0, dir in -PI..PI) {
        let b = b + 2.0;
        let below = kernel_m_ab(b + C64::from_polar(0.9 * KERNEL_M_SWITCH / x, dir), b, x);
        let above = kernel_m_ab(b + C64::from_polar(1.1 * KERNEL_M_SWITCH / x, dir), b, x);
        // the exact kernel moves by about |dA| x^2 |e^{-Bx}| / 2 across the gap
        let drift = 0.2 * KERNEL_M_SWITCH * x * (-b * x).exp().norm();
        prop_assert!((below - above).norm() <= 1e-10 * below.norm() + drift);
    }

    #[test]
    fn halfspace_mode_identities(lam in sector_lambda(), xi in prop::collection::vec(-100.0f64..100.0, 1..3), h in prop::collection::vec(c64(), 3), zero in any::<bool>(), mat in material()) {
        let xi: Vec<f64> = if zero { vec![0.0; xi.len()] } else { xi };
        let st = boundary_coeffs_at(lam, &xi, &h[..xi.len() + 1], &mat).unwrap();
        let (name, res) = st.max_identity_residual();
        prop_assert!(res < 1e-12, "{name}: {res:e}");
        prop_assert!(st.bc_residual() < 1e-12);
    }

    #[test]
    fn wholespace_solve_is_linear_and_exact(lam in sector_lambda(), g1 in trig_coeffs(4), g2 in trig_coeffs(4), a in c64(), b in c64()) {
        let grid = Grid::new(2, 16, 2.0 * PI).unwrap();
        let mat = Material::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let pt = SectorPoint::new(lam, EPS, 1.0).unwrap();
        let f1 = vec![trig_field(&grid, &g1), trig_field(&grid, &g2)];
        let f2 = vec![trig_field(&grid, &g2), trig_field(&grid, &g1)];
        let comb: Vec<Vec<C64>> = f1.iter().zip(&f2).map(|(x, y)| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect()).collect();
        let u1 = solve_wholespace(&f1, &pt, &mat, &grid).unwrap();
        let u2 = solve_wholespace(&f2, &pt, &mat, &grid).unwrap();
        let u = solve_wholespace(&comb, &pt, &mat, &grid).unwrap();
        prop_assert!(residual(&u, &comb, lam, &mat, &grid) < 1e-10);
        let diff: Vec<Vec<C64>> = (0..2).map(|c| (0..grid.len()).map(|i| u[c][i] - a * u1[c][i] - b * u2[c][i]).collect()).collect();
        prop_assert!(grid.vec_l2_norm(&diff) <= 1e-12 * grid.vec_l2_norm(&u).max(1e-300));
    }

    #[test]
    fn partition_of_unity(n in prop::sample::select(vec![16usize, 32, 64]), extent in 1.0f64..40.0, dim in 1usize..=2) {
        let basis = make_basis(&Grid::new(dim, n, extent).unwrap());
        // very small boxes host too few blocks and are rejected
        if let Ok(basis) = basis {
            prop_assert!(basis.partition_error() < 1e-12);
        }
    }

    #[test]
    fn besov_norm_orderings(c in trig_coeffs(12), s1 in -0.9f64..0.9, ds in 0.0f64..1.0, p in 1.5f64..4.0) {
        let grid = Grid::new(2, 32, 2.0 * PI).unwrap();
        let basis = make_basis(&grid).unwrap();
        let f = trig_field(&grid, &c);
        let lo = besov_norm(&f, s1, p, QIndex::One, &basis).unwrap();
        let hi = besov_norm(&f, s1 + ds, p, QIndex::One, &basis).unwrap();
        let inf = besov_norm(&f, s1, p, QIndex::Inf, &basis).unwrap();
        prop_assert!(lo.total <= hi.total * (1.0 + 1e-12));
        prop_assert!(inf.total <= lo.total * (1.0 + 1e-12));
        prop_assert!(lo.block_norms.iter().all(|&b| b >= 0.0));
        let sum: f64 = lo.block_norms.iter().sum();
        prop_assert!((lo.total - lo.low_block - sum).abs() <= 1e-12 * lo.total);
    }

    #[test]
    fn multipliers_compose(c in trig_coeffs(12), a in c64(), b in c64()) {
        let grid = Grid::new(2, 32, 2.0 * PI).unwrap();
        let f = trig_field(&grid, &c);
        let m1 = |k: &[f64; 3]| a + C64::new(0.0, k[0]) / (1.0 + k[0] * k[0] + k[1] * k[1]).sqrt();
        let m2 = |k: &[f64; 3]| b * (-(k[0] * k[0] + k[1] * k[1]) / 50.0).exp();
        let seq = multiplier_apply(m2, &multiplier_apply(m1, &f, &grid).unwrap(), &grid).unwrap();
        let once = multiplier_apply(|k: &[f64; 3]| m1(k) * m2(k), &f, &grid).unwrap();
        let diff: Vec<C64> = seq.iter().zip(&once).map(|(x, y)| x - y).collect();
        prop_assert!(grid.l2_norm(&diff) <= 1e-12 * grid.l2_norm(&f));
    }

    #[test]
    fn contour_nodes_on_rays(gamma in 0.1f64..10.0, eps in 0.1f64..1.5, r_max in 10.0f64..1e4) {
        let spec = contour_nodes(gamma, eps, r_max, 16).unwrap();
        let dir = C64::from_polar(1.0, PI - eps);
        for (lam, _) in &spec.nodes {
            // distance from the ray pair, relative to the node size
            let off = ((lam - gamma) * dir.conj()).im.abs().min(((lam - gamma) * dir).im.abs());
            prop_assert!(off <= 1e-14 * lam.norm());
            prop_assert!(((lam - gamma) * dir.conj()).re.max(((lam - gamma) * dir).re) > 0.0);
        }
    }

    #[test]
    fn decay_fit_recovers_power(p in -1.5f64..0.5, c in 0.1f64..10.0) {
        let times: Vec<f64> = (0..=80).map(|i| 2f64.powf(-5.0 + i as f64 / 8.0)).collect();
        let values = times.iter().map(|t| c * t.powf(p)).collect();
        let tr = TimeTrace { times, values, gamma: 0.0, norm_name: "synthetic".into() };
        prop_assert!((decay_fit(&tr, 2f64.powi(-5), 32.0).unwrap() - p).abs() < 1e-10);
    }

    #[test]
    fn dyadic_sum_is_linear(p in -0.95f64..-0.05, c in 0.5f64..3.0, k in prop::sample::select(vec![2.0f64, 4.0])) {
        // t^p (1 + t)^{-2} is integrable against dt/t at both ends
        let times: Vec<f64> = (0..=96).map(|i| 2f64.powf(-6.0 + i as f64 / 8.0)).collect();
        let trace = |scale: f64| TimeTrace {
            values: times.iter().map(|t| scale * c * t.powf(p) / (1.0 + t).powi(2)).collect(),
            times: times.clone(),
            gamma: 0.0,
            norm_name: "synthetic".into(),
        };
        let one = dyadic_l1(&trace(1.0)).unwrap();
        let many = dyadic_l1(&trace(k)).unwrap();
        prop_assert!((many.total - k * one.total).abs() <= 1e-12 * many.total);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn known_transform_pairs(t in 0.1f64..10.0, a in 0.25f64..1.0) {
        let spec = contour_nodes(1.0, EPS, 32.2 / (0.1 * EPS.cos()), 20).unwrap();
        let got = invert_scalar(t, &|l: C64| 1.0 / (l + a), &spec).unwrap();
        let want = (-a * t).exp();
        prop_assert!((got.re - want).abs() <= 1e-6 * want && got.im.abs() <= 1e-6 * want);
        let got = invert_scalar(t, &|l: C64| l.powf(-1.5), &spec).unwrap();
        let want = 2.0 * (t / PI).sqrt();
        prop_assert!((got.re - want).abs() <= 1e-6 * want);
    }
}
