//! Property tests for the algebraic invariants of the core types and
//! operators.

use nalgebra::DMatrix;
use proptest::prelude::*;

use covsel::estimate::{Method, PrecisionEstimate};
use covsel::linalg::{
    edge_set, sample_covariance, spd_inverse, sym_eigen, to_correlation,
};
use covsel::mat::{DataMatrix, EdgeSet, SymMat};
use covsel::metrics::{confusion, f1};
use covsel::select::hard_threshold;

fn data_matrix(n: usize, p: usize) -> impl Strategy<Value = DataMatrix> {
    prop::collection::vec(prop::collection::vec(-50.0..50.0f64, p), n)
        .prop_map(|rows| DataMatrix::from_rows(&rows).unwrap())
}

fn sym_mat(p: usize) -> impl Strategy<Value = SymMat> {
    prop::collection::vec(-10.0..10.0f64, p * (p + 1) / 2).prop_map(move |vals| {
        let mut it = vals.into_iter();
        let mut m = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let v = it.next().unwrap();
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMat::symmetrized(&m).unwrap()
    })
}

fn spd_mat(p: usize) -> impl Strategy<Value = SymMat> {
    prop::collection::vec(-1.0..1.0f64, p * p).prop_map(move |vals| {
        let a = DMatrix::from_fn(p, p, |i, j| vals[i * p + j]);
        SymMat::symmetrized(&(a.transpose() * &a / p as f64 + DMatrix::identity(p, p))).unwrap()
    })
}

fn edges(dim: usize) -> impl Strategy<Value = EdgeSet> {
    let pairs: Vec<(usize, usize)> =
        (0..dim).flat_map(|i| ((i + 1)..dim).map(move |j| (i, j))).collect();
    prop::collection::vec(prop::bool::ANY, pairs.len()).prop_map(move |mask| {
        EdgeSet::from_pairs(
            dim,
            pairs.iter().zip(&mask).filter(|(_, &m)| m).map(|(&p, _)| p),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sample_covariance_is_psd(data in data_matrix(6, 4)) {
        let cov = sample_covariance(&data, true).unwrap();
        prop_assert!(sym_eigen(&cov).min() >= -1e-10);
    }

    #[test]
    fn correlation_is_idempotent(m in spd_mat(5)) {
        let once = to_correlation(&m).unwrap();
        let twice = to_correlation(&once).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                prop_assert!((once.get(i, j) - twice.get(i, j)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn edge_set_ignores_sign(m in sym_mat(5)) {
        prop_assert_eq!(edge_set(&m, 0.0), edge_set(&m.scale(-1.0), 0.0));
    }

    #[test]
    fn spd_inverse_is_an_involution(m in spd_mat(6)) {
        let back = spd_inverse(&spd_inverse(&m).unwrap()).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                prop_assert!((back.get(i, j) - m.get(i, j)).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn f1_swap_symmetry_and_range(a in edges(6), b in edges(6)) {
        let ab = f1(&confusion(&a, &b).unwrap());
        let ba = f1(&confusion(&b, &a).unwrap());
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn confusion_is_relabel_invariant(a in edges(5), b in edges(5), shift in 0usize..5) {
        // Cyclic relabeling applied to both sets.
        let relabel = |e: &EdgeSet| {
            EdgeSet::from_pairs(5, e.iter().map(|(i, j)| ((i + shift) % 5, (j + shift) % 5))).unwrap()
        };
        let before = confusion(&a, &b).unwrap();
        let after = confusion(&relabel(&a), &relabel(&b)).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn threshold_supports_nest(m in sym_mat(6), t1 in 0.0..5.0f64, t2 in 0.0..5.0f64) {
        let base = PrecisionEstimate {
            theta: m,
            lambda: 0.1,
            method: Method::Glasso,
            iterations: 1,
            converged: true,
            objective: None,
        };
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = hard_threshold(&base, lo).unwrap();
        let b = hard_threshold(&base, hi).unwrap();
        prop_assert!(b.edges.is_subset(&a.edges));
        // Never creates a nonzero where the base had zero.
        for (i, j, v) in a.theta_tilde.upper_triangle() {
            if v != 0.0 {
                prop_assert!(base_entry(&a, i, j) != 0.0);
            }
        }
    }
}

fn base_entry(t: &covsel::select::ThresholdedEstimate, i: usize, j: usize) -> f64 {
    t.base.theta.get(i, j)
}
