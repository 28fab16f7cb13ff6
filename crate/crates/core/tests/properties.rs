use proptest::prelude::*;
use qplap_core::*;

fn grid() -> Grid {
    Grid::interval(0.0, 1.0, 24).unwrap()
}

fn density() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 24).prop_map(|v| v.into_iter().map(|e| 10f64.powf(e)).collect())
}

fn lambda1(g: &Grid, rho: &[f64], q: f64) -> f64 {
    let b = NodalField::constant(g, 1.0);
    principal_eigenpair(g, &CellField::new(rho.to_vec()), &b, q, &EigSolverConfig::default()).unwrap().lambda1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn homogeneous_of_degree_one(rho in density(), t in 0.1f64..10.0, cubic in any::<bool>()) {
        let q = if cubic { 3.0 } else { 2.0 };
        let g = grid();
        let l = lambda1(&g, &rho, q);
        let scaled: Vec<f64> = rho.iter().map(|r| t * r).collect();
        prop_assert!((lambda1(&g, &scaled, q) - t * l).abs() < 1e-9 * t * l);
    }

    #[test]
    fn monotone_in_density(rho in density(), bump in prop::collection::vec(0.0f64..2.0, 24)) {
        let g = grid();
        let bigger: Vec<f64> = rho.iter().zip(&bump).map(|(r, d)| r + d).collect();
        for q in [2.0, 3.0] {
            prop_assert!(lambda1(&g, &bigger, q) >= lambda1(&g, &rho, q) * (1.0 - 1e-11));
        }
    }

    #[test]
    fn superadditive(r1 in density(), r2 in density()) {
        let g = grid();
        let sum: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| a + b).collect();
        let l = lambda1(&g, &sum, 2.0);
        prop_assert!(l >= (lambda1(&g, &r1, 2.0) + lambda1(&g, &r2, 2.0)) * (1.0 - 1e-11));
    }

    #[test]
    fn concave_along_segments(r1 in density(), r2 in density(), t in 0.0f64..1.0) {
        let g = grid();
        let mix: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let lhs = lambda1(&g, &mix, 3.0);
        let rhs = t * lambda1(&g, &r1, 3.0) + (1.0 - t) * lambda1(&g, &r2, 3.0);
        prop_assert!(lhs >= rhs - 2e-12 * lhs.max(rhs) * 10.0);
    }

    #[test]
    fn eigenfunction_is_positive_and_normalized(rho in density()) {
        let g = grid();
        let b = NodalField::constant(&g, 1.0);
        let pair = principal_eigenpair(&g, &CellField::new(rho), &b, 2.0, &EigSolverConfig::default()).unwrap();
        prop_assert!(pair.phi1.iter().all(|&v| v >= 0.0));
        prop_assert!((g.nodal_norm(&pair.phi1, 2.0).unwrap() - 1.0).abs() < 1e-12);
    }
}
