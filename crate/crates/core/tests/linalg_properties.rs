use aam_core::linalg::{
    pseudo_inverse_solve, qr_least_squares, regularized_solve, singular_values, singular_values_small, Matrix, Vector,
};
use proptest::prelude::*;

/// `(R, rhs)` with `R` of shape `n x p`, `1 <= p <= n <= 8`.
fn tall_system() -> impl Strategy<Value = (Matrix, Vector)> {
    (1usize..=8)
        .prop_flat_map(|n| (Just(n), 1usize..=n))
        .prop_flat_map(|(n, p)| {
            (
                prop::collection::vec(-1.0f64..1.0, n * p),
                prop::collection::vec(-1.0f64..1.0, n),
            )
                .prop_map(move |(data, rhs)| (Matrix::new(n, p, data).unwrap(), Vector::from(rhs)))
        })
}

fn well_conditioned(r: &Matrix) -> bool {
    let s = singular_values(r);
    s[0] > 0.0 && *s.last().unwrap() / s[0] > 1e-3
}

fn rel_diff(a: &Vector, b: &Vector) -> f64 {
    a.sub(b).norm() / b.norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn qr_matches_pseudo_inverse((r, rhs) in tall_system()) {
        prop_assume!(well_conditioned(&r));
        // qr minimizes ||R a + rhs||, the other two solve R b ~ rhs
        let a = qr_least_squares(&r, &rhs).unwrap().scale(-1.0);
        let b = pseudo_inverse_solve(&r, &rhs).unwrap();
        prop_assert!(rel_diff(&a, &b) <= 1e-10, "qr {:?} pinv {:?}", a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn pseudo_inverse_satisfies_normal_equations((r, rhs) in tall_system(), drop in any::<bool>()) {
        // optionally duplicate a column to make R rank deficient
        let r = if drop && r.cols() >= 2 {
            let mut cols: Vec<Vector> = (0..r.cols()).map(|j| r.column(j)).collect();
            cols[1] = cols[0].clone();
            Matrix::from_columns(r.rows(), &cols)
        } else {
            r
        };
        let beta = pseudo_inverse_solve(&r, &rhs).unwrap();
        let rt_rhs = r.tr_matvec(&rhs);
        let lhs = r.tr_matvec(&r.matvec(&beta));
        prop_assert!(lhs.sub(&rt_rhs).norm() <= 1e-10 * rt_rhs.norm().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn diagonal_singular_values(d in prop::collection::vec(-10.0f64..10.0, 1..=8)) {
        let s = singular_values_small(&Matrix::diag(&d)).unwrap();
        let lo = d.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        let hi = d.iter().map(|x| x.abs()).fold(0.0, f64::max);
        prop_assert!((s.sigma_min - lo).abs() <= 1e-14);
        prop_assert!((s.sigma_max - hi).abs() <= 1e-14);
        prop_assert!(0.0 <= s.sigma_min && s.sigma_min <= s.sigma_max);
    }

    #[test]
    fn regularized_approaches_pseudo_inverse((r, rhs) in tall_system()) {
        prop_assume!(well_conditioned(&r));
        let target = pseudo_inverse_solve(&r, &rhs).unwrap();
        let errs: Vec<f64> = [1e-1, 1e-3, 1e-5, 1e-7, 1e-9, 1e-11, 1e-13]
            .iter()
            .map(|l| rel_diff(&regularized_solve(&r, &rhs, *l).unwrap(), &target))
            .collect();
        for w in errs.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-9, "not monotone: {:?}", errs);
        }
        prop_assert!(errs[errs.len() - 1] <= 1e-6, "{:?}", errs);
    }
}

#[test]
fn tiny_relative_lambda_matches_qr() {
    let r = Matrix::from_rows(&[vec![2.0, 0.5], vec![0.1, 1.0], vec![-0.3, 0.7]]).unwrap();
    let rhs = Vector::from(vec![1.0, -1.0, 0.5]);
    let scale = (0..2).map(|j| r.column(j).dot(&r.column(j))).fold(0.0, f64::max);
    let reg = regularized_solve(&r, &rhs, 1e-16 * scale).unwrap();
    let qr = qr_least_squares(&r, &rhs).unwrap().scale(-1.0);
    assert!(rel_diff(&reg, &qr) <= 1e-6);
}
