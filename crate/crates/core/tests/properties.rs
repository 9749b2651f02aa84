use expvar_core::{report, subspace_var, DataMatrix, Definition, Loadings};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-3.0..3.0f64, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn inputs(m: usize) -> impl Strategy<Value = (DataMatrix, Loadings)> {
    (matrix(7, 5), matrix(5, m)).prop_filter_map("full rank", |(a, z)| {
        let a = DataMatrix::new(a).ok()?;
        if a.rank() < 5 || z.column_iter().any(|c| c.norm() < 1e-3) {
            return None;
        }
        let z = Loadings::normalized(z).ok()?;
        let y = a.values() * z.matrix();
        let s = y.singular_values();
        (s.min() > 1e-3 * s.max()).then_some((a, z))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projected_definitions_are_ordered((a, z) in inputs(3)) {
        let r = report(&a, &z).unwrap();
        let y = a.values() * z.matrix();
        let total_y = y.norm_squared();
        let bound = a.svd().pca_bound(3);
        let slack = 1e-8 * bound.max(1.0);
        let opt = r.value(Definition::OptProj);
        prop_assert!(r.value(Definition::UpProj) <= opt + slack);
        prop_assert!(r.value(Definition::QrProj) <= opt + slack);
        prop_assert!(opt <= total_y + slack);
        prop_assert!(opt <= bound + slack);
        prop_assert!(r.value(Definition::Subspace) <= bound + slack);
    }

    #[test]
    fn subspace_var_depends_only_on_the_span((a, z) in inputs(2), mix in matrix(2, 2)) {
        prop_assume!(mix.determinant().abs() > 0.1);
        let mixed = Loadings::normalized(z.matrix() * &mix).unwrap();
        let before = subspace_var(&a, &z).unwrap();
        let after = subspace_var(&a, &mixed).unwrap();
        prop_assert!((before - after).abs() <= 1e-9 * before.max(1.0), "{before} vs {after}");
    }

    #[test]
    fn single_component_definitions_coincide((a, z) in inputs(1)) {
        let r = report(&a, &z).unwrap();
        let y = a.values() * z.matrix();
        let target = y.norm_squared();
        for def in Definition::ALL {
            prop_assert!((r.value(def) - target).abs() <= 1e-10 * target, "{}", def.short_name());
        }
    }
}
