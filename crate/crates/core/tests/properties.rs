use atnmf_core::datasets::{format_dense, parse_dense};
use atnmf_core::eval::{holdout_size, holdout_split, run_experiment};
use atnmf_core::matrix::{Matrix, NonnegMatrix, ObservationMask};
use atnmf_core::solver::{mm_update_h, mm_update_w, objective, update_r, FactorPair, Perturbation};
use atnmf_core::synthgen::{generate_synthetic_seeded, SyntheticSpec};
use atnmf_core::{Method, RngState, SolverConfig};
use proptest::prelude::*;

fn nonneg(rows: usize, cols: usize) -> impl Strategy<Value = NonnegMatrix> {
    prop::collection::vec(0.0f64..10.0, rows * cols)
        .prop_map(move |d| NonnegMatrix::new(Matrix::from_vec(rows, cols, d).unwrap()).unwrap())
}

fn mask(rows: usize, cols: usize) -> impl Strategy<Value = ObservationMask> {
    prop::collection::vec(any::<bool>(), rows * cols).prop_map(move |b| ObservationMask::from_bits(rows, cols, b).unwrap())
}

/// (V, V̂, mask) of a shared random shape.
fn triple() -> impl Strategy<Value = (NonnegMatrix, Matrix, ObservationMask)> {
    (1usize..8, 1usize..8).prop_flat_map(|(f, n)| (nonneg(f, n), nonneg(f, n).prop_map(NonnegMatrix::into_matrix), mask(f, n)))
}

fn factors() -> impl Strategy<Value = (NonnegMatrix, ObservationMask, FactorPair)> {
    (1usize..8, 1usize..8, 1usize..4).prop_flat_map(|(f, n, k)| {
        let zeroed = |m: NonnegMatrix, z: Vec<bool>| {
            let d = m.as_slice().iter().zip(z).map(|(&x, z)| if z { 0.0 } else { x + 0.01 }).collect();
            NonnegMatrix::new(Matrix::from_vec(m.rows(), m.cols(), d).unwrap()).unwrap()
        };
        (
            nonneg(f, n),
            mask(f, n),
            nonneg(f, k),
            prop::collection::vec(prop::bool::weighted(0.2), f * k),
            nonneg(k, n),
            prop::collection::vec(prop::bool::weighted(0.2), k * n),
        )
            .prop_map(move |(v, m, w, wz, h, hz)| (v, m, FactorPair::new(zeroed(w, wz), zeroed(h, hz)).unwrap()))
    })
}

proptest! {
    #[test]
    fn dense_text_round_trips_exactly(m in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), -1e3f64..1e3], r * c)
            .prop_map(move |d| Matrix::from_vec(r, c, d).unwrap())
    })) {
        let back = parse_dense(&format_dense(&m)).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn perturbation_keeps_observed_entries_feasible((v, vhat, m) in triple(), lambda in 1.0001f64..50.0) {
        let r = update_r(&v, &vhat, &m, lambda).unwrap();
        prop_assert!(r.min_observed_sum(&v, &m) >= -1e-12);
        for i in 0..v.rows() {
            for j in 0..v.cols() {
                if !m.is_observed(i, j) {
                    prop_assert_eq!(r.as_matrix().get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn perturbation_norm_shrinks_as_lambda_grows((v, vhat, m) in triple(), l1 in 1.01f64..20.0, dl in 0.0f64..100.0) {
        let small = update_r(&v, &vhat, &m, l1).unwrap().norm_sq();
        let large = update_r(&v, &vhat, &m, l1 + dl).unwrap().norm_sq();
        prop_assert!(large <= small * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn perturbation_maximizes_the_inner_objective(
        (v, m, f) in factors(),
        lambda in 1.1f64..10.0,
        nudge in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let vhat = f.reconstruct().unwrap();
        let r = update_r(&v, &vhat, &m, lambda).unwrap();
        let best = objective(&v, &r, &f, &m, lambda).unwrap();
        // Any other feasible R scores no higher.
        let other: Vec<f64> = r
            .as_matrix()
            .as_slice()
            .iter()
            .zip(v.as_slice())
            .zip(nudge.iter().cycle())
            .map(|((&x, &vv), &d)| (x + d).max(-vv))
            .collect();
        let other = Perturbation::from(Matrix::from_vec(v.rows(), v.cols(), other).unwrap());
        let alt = objective(&v, &other, &f, &m, lambda).unwrap();
        prop_assert!(alt <= best + 1e-9 * best.abs().max(1.0));
    }

    #[test]
    fn mm_updates_preserve_zeros_and_sign((u, m, f) in factors()) {
        let h = mm_update_h(&u, &m, &f, 1e-12).unwrap();
        for (&old, &new) in f.h.as_slice().iter().zip(h.as_slice()) {
            prop_assert!(new >= 0.0);
            if old == 0.0 {
                prop_assert_eq!(new, 0.0);
            }
        }
        let w = mm_update_w(&u, &m, &f, 1e-12).unwrap();
        for (&old, &new) in f.w.as_slice().iter().zip(w.as_slice()) {
            prop_assert!(new >= 0.0);
            if old == 0.0 {
                prop_assert_eq!(new, 0.0);
            }
        }
    }

    #[test]
    fn holdout_partitions_the_matrix(f in 1usize..20, n in 1usize..20, alpha in 0.01f64..0.99, seed in any::<u64>()) {
        let size = holdout_size(f, n, alpha);
        prop_assume!(size > 0 && size < f * n);
        let split = holdout_split(f, n, alpha, &mut RngState::new(seed)).unwrap();
        prop_assert_eq!(split.gamma_set.len(), size);
        prop_assert_eq!(split.mask.observed_count(), f * n - size);
        for &(i, j) in &split.gamma_set {
            prop_assert!(!split.mask.is_observed(i, j));
        }
    }
}

#[test]
fn synthetic_data_has_exact_rank_k() {
    for seed in [0, 1, 2] {
        let v = generate_synthetic_seeded(&SyntheticSpec::default(), seed).unwrap().v;
        let dm = nalgebra::DMatrix::from_row_slice(v.rows(), v.cols(), v.as_slice());
        let mut s: Vec<f64> = dm.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        assert!(s[4] / s[0] > 1e-6, "seed {seed}: fifth singular value collapsed");
        assert!(s[5] / s[0] < 1e-10, "seed {seed}: ratio {}", s[5] / s[0]);
    }
}

#[test]
fn held_out_values_never_reach_the_solver() {
    let v = generate_synthetic_seeded(&SyntheticSpec { f: 20, n: 15, k: 3, ..SyntheticSpec::default() }, 4).unwrap().v;
    let split = holdout_split(20, 15, 0.4, &mut RngState::new(4)).unwrap();
    let mut d = v.as_slice().to_vec();
    for &(i, j) in &split.gamma_set {
        d[i * 15 + j] *= 1000.0;
    }
    let poisoned = NonnegMatrix::new(Matrix::from_vec(20, 15, d).unwrap()).unwrap();
    let cfg = SolverConfig::new(2.5, 3).unwrap();
    for method in [Method::Nmf, Method::AtNmf] {
        let a = method.solve(&v, &split.mask, &cfg, &mut RngState::new(8)).unwrap();
        let b = method.solve(&poisoned, &split.mask, &cfg, &mut RngState::new(8)).unwrap();
        assert_eq!(a.factors, b.factors, "{method}");
        assert_eq!(a.trace, b.trace, "{method}");
    }
}

#[test]
fn experiments_are_reproducible() {
    let v = generate_synthetic_seeded(&SyntheticSpec { f: 30, n: 20, k: 3, ..SyntheticSpec::default() }, 5).unwrap().v;
    let cfg = SolverConfig::new(3.0, 3).unwrap();
    for method in [Method::Nmf, Method::AtNmf] {
        let a = run_experiment(&v, 0.5, method, &cfg, 4, 11).unwrap();
        let b = run_experiment(&v, 0.5, method, &cfg, 4, 11).unwrap();
        assert_eq!(a.rmses, b.rmses);
        assert_eq!(a.streams, vec![0, 1, 2, 3]);
        let c = run_experiment(&v, 0.5, method, &cfg, 4, 12).unwrap();
        assert_ne!(a.rmses, c.rmses);
    }
}

#[test]
fn huge_lambda_tracks_standard_nmf() {
    let v = generate_synthetic_seeded(&SyntheticSpec { f: 30, n: 20, k: 3, ..SyntheticSpec::default() }, 6).unwrap().v;
    let split = holdout_split(30, 20, 0.3, &mut RngState::new(6)).unwrap();
    let nmf = Method::Nmf.solve(&v, &split.mask, &SolverConfig::new(2.0, 3).unwrap(), &mut RngState::new(1)).unwrap();
    let at = Method::AtNmf.solve(&v, &split.mask, &SolverConfig::new(1e9, 3).unwrap(), &mut RngState::new(1)).unwrap();
    assert!(at.perturbation.norm_sq() < 1e-12);
    let (a, b) = (nmf.reconstruct().unwrap(), at.reconstruct().unwrap());
    let gap = atnmf_core::matrix::masked_sq_dist(&a, &b, &split.mask).unwrap().sqrt();
    let scale = atnmf_core::matrix::frobenius_sq(&a).sqrt();
    assert!(gap / scale < 0.05, "relative gap {}", gap / scale);
}
