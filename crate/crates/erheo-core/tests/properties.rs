//! Property tests over randomized fields.

use erheo_core::{
    luxembourg_norm, modular, sym_skew_split, Centering, Field, Grid, Rank, VariableExponent,
    Weight,
};
use proptest::prelude::*;

fn field_from_values(values: Vec<f64>, rank: Rank) -> Field {
    let g = Grid::unit(4);
    let mut f = Field::zeros(g, rank, Centering::Node);
    let n = f.data().len();
    for (i, v) in values.into_iter().cycle().take(n).enumerate() {
        f.data_mut()[i] = v;
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_reassembles_and_projects(values in prop::collection::vec(-1e3f64..1e3, 25)) {
        let t = field_from_values(values, Rank::Tensor2x2);
        let (s, k) = sym_skew_split(&t).unwrap();
        let mut sum = s.clone();
        sum.axpy(1.0, &k).unwrap();
        let mut diff = sum;
        diff.axpy(-1.0, &t).unwrap();
        prop_assert!(diff.max_abs() <= 1e-12 * t.max_abs().max(1.0));
        let (ss, sk) = sym_skew_split(&s).unwrap();
        prop_assert_eq!(ss, s);
        prop_assert_eq!(sk.max_abs(), 0.0);
    }

    #[test]
    fn luxembourg_norm_is_homogeneous_and_consistent(
        values in prop::collection::vec(-10f64..10.0, 25),
        p_val in 1.1f64..4.0,
        t in -8f64..8.0,
    ) {
        let u = field_from_values(values, Rank::Scalar);
        let g = *u.grid();
        let p = VariableExponent::constant(g, Centering::Node, p_val).unwrap();
        let w = Weight::unit(g, Centering::Node);
        let n0 = luxembourg_norm(&u, &p, &w).unwrap();
        let n1 = luxembourg_norm(&u.scaled(t), &p, &w).unwrap();
        prop_assert!((n1 - t.abs() * n0).abs() <= 1e-8 * (1.0 + n0));
        // nonnegative modular, zero iff the field is null on the weight
        let rho = modular(&u, &p, &w).unwrap();
        prop_assert!(rho >= 0.0);
        if rho == 0.0 {
            prop_assert_eq!(n0, 0.0);
        }
        // constant-exponent closed form
        let exact = rho.powf(1.0 / p_val);
        prop_assert!((n0 - exact).abs() <= 1e-8 * (1.0 + exact));
    }

    #[test]
    fn gradient_kills_constants(c in -1e6f64..1e6) {
        let g = Grid::unit(5);
        let u = Field::scalar_from_fn(g, Centering::Node, |_, _| c);
        let du = erheo_core::discrete_gradient(&u).unwrap();
        prop_assert!(du.max_abs() <= 1e-10 * c.abs().max(1.0));
    }
}
