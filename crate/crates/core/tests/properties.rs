//! Randomized property tests for the module contracts.

use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;

use hypersplit::chebyshev::u2_eval;
use hypersplit::dense::DenseOperator;
use hypersplit::splitting::{Splitting, SubOperator};
use hypersplit::GridFunction;

/// Random SPD matrix: G G^T + dim * I scaled into a tame range.
fn spd_matrix(entries: Vec<f64>, dim: usize) -> DMatrix<f64> {
    let g = DMatrix::from_vec(dim, dim, entries);
    &g * g.transpose() + DMatrix::identity(dim, dim).scale(0.5)
}

proptest! {
    #[test]
    fn shifted_solve_inverts_apply(
        entries in proptest::collection::vec(-1.0..1.0_f64, 9),
        values in proptest::collection::vec(-5.0..5.0_f64, 3),
        shift in 0.0..50.0_f64,
    ) {
        let op = DenseOperator::new(spd_matrix(entries, 3)).unwrap();
        let u = DenseOperator::field(values);
        // w = (I + shift A) u, then solve back
        let mut w = u.clone();
        w.axpy(shift, &op.apply(&u)).unwrap();
        let back = op.solve_shifted(shift, &w).unwrap();
        let err = back.sub(&u).unwrap().norm();
        prop_assert!(err <= 1e-9 * u.norm().max(1.0), "round-trip error {err}");
    }

    #[test]
    fn quadratic_form_respects_alpha(
        entries in proptest::collection::vec(-1.0..1.0_f64, 9),
        values in proptest::collection::vec(-5.0..5.0_f64, 3),
    ) {
        let op = DenseOperator::new(spd_matrix(entries, 3)).unwrap();
        let u = DenseOperator::field(values);
        let quad = op.apply(&u).inner_product(&u).unwrap();
        let floor = op.alpha() * u.inner_product(&u).unwrap();
        prop_assert!(quad >= floor - 1e-10 * floor.abs().max(1.0));
    }

    #[test]
    fn inner_product_is_symmetric_bilinear(
        a in proptest::collection::vec(-10.0..10.0_f64, 12),
        b in proptest::collection::vec(-10.0..10.0_f64, 12),
        c in proptest::collection::vec(-10.0..10.0_f64, 12),
        s in -3.0..3.0_f64,
    ) {
        let dims = [4, 3];
        let spacing = [0.2, 0.25];
        let u = GridFunction::new(a, dims, spacing);
        let v = GridFunction::new(b, dims, spacing);
        let w = GridFunction::new(c, dims, spacing);
        let uv = u.inner_product(&v).unwrap();
        prop_assert!((uv - v.inner_product(&u).unwrap()).abs() <= 1e-12 * uv.abs().max(1.0));
        let comb = GridFunction::lin_comb(1.0, &u, s, &w).unwrap();
        let lhs = comb.inner_product(&v).unwrap();
        let rhs = uv + s * w.inner_product(&v).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn chebyshev_two_variable_homogeneity(
        k in 0usize..60,
        x in -1.5..1.5_f64,
        y in 0.05..3.0_f64,
    ) {
        // U~_k(x, y) = y^{k/2} U~_k(x / sqrt(y), 1)
        let direct = u2_eval(k, x, y);
        let scaled = y.powf(k as f64 / 2.0) * u2_eval(k, x / y.sqrt(), 1.0);
        let scale = direct.abs().max(scaled.abs()).max(1.0);
        prop_assert!((direct - scaled).abs() <= 1e-9 * scale, "{direct} vs {scaled}");
    }

    #[test]
    fn weight_simplex_validation(raw in proptest::collection::vec(0.05..1.0_f64, 2..5)) {
        let m = raw.len();
        let parts: Vec<Arc<dyn SubOperator>> = (0..m)
            .map(|_| Arc::new(DenseOperator::new(DMatrix::identity(2, 2)).unwrap()) as Arc<_>)
            .collect();
        let sum: f64 = raw.iter().sum();
        // normalized weights are accepted...
        let mut etas: Vec<f64> = raw.iter().map(|v| v / sum).collect();
        let partial: f64 = etas.iter().take(m - 1).sum();
        etas[m - 1] = 1.0 - partial;
        prop_assert!(Splitting::new(parts.clone(), etas.clone()).is_ok());
        // ...and any clear violation of the unit sum is rejected
        let mut bad = etas;
        bad[0] += 0.01;
        prop_assert!(Splitting::new(parts, bad).is_err());
    }

    #[test]
    fn weighted_average_of_sub_solves_is_convex(
        values in proptest::collection::vec(-2.0..2.0_f64, 4),
        eta0 in 0.1..0.9_f64,
        tau in 0.01..1.0_f64,
    ) {
        // one scheme step from a constant state with no forcing keeps the
        // next layer inside the range spanned by the sub-solutions
        use hypersplit::scheme::{initialize, step, SchemeConfig};
        use hypersplit::splitting::ProblemSpec;
        let mk = |a: f64| -> Arc<dyn SubOperator> {
            Arc::new(DenseOperator::new(DMatrix::identity(4, 4).scale(a)).unwrap())
        };
        let s = Splitting::new(vec![mk(1.0), mk(3.0)], vec![eta0, 1.0 - eta0]).unwrap();
        let p = ProblemSpec::homogeneous(
            DenseOperator::field(values.clone()),
            DenseOperator::field(vec![0.0; 4]),
        );
        let cfg = SchemeConfig::new(tau, 2).unwrap();
        let st = initialize(&p, &cfg);
        let next = step(&s, &p, &cfg, &st).unwrap();
        // with zero initial velocity both sub-solutions contract the same
        // constant state, so each next-layer entry stays within the initial bound
        let bound = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for v in next.v_curr.values() {
            prop_assert!(v.abs() <= bound + 1e-12, "escaped: {v} vs {bound}");
        }
    }
}
