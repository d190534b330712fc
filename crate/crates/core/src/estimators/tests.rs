use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::hermitian::{matrix_exp, matrix_sqrt, symmetrize};
use crate::sample::Field;
use crate::testutil::{complex_gaussian, random_hermitian, random_matrix, random_pd, real_gaussian, real_vector};
use crate::toeplitz::{toeplitz_covariance, SchurModel};

fn tight() -> IterationControl {
    IterationControl {
        eps: 1e-24,
        max_iter: 2000,
        diagonal_loading: 0.0,
    }
}

fn complex_set(seed: u64, d: usize, n: usize) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cov = random_pd(&mut rng, d);
    SampleSet::new(Field::Complex, complex_gaussian(&mut rng, cov.cholesky(), n)).unwrap()
}

fn real_set(seed: u64, d: usize, n: usize) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMatrix::from_fn(d, d, |i, j| C64::new(if i == j { 1.0 } else { rng.gen_range(-0.5..0.5) }, 0.0));
    SampleSet::new(Field::Real, real_gaussian(&mut rng, &a, n)).unwrap()
}

fn rel_frobenius(a: &HermitianPD, b: &HermitianPD) -> f64 {
    (a.matrix() - b.matrix()).norm() / b.matrix().norm()
}

/// Central difference of `f` along `R + hH`, projected back onto unit determinant.
fn unit_det_derivative(r: &HermitianPD, h: &CMatrix, f: impl Fn(&HermitianPD) -> f64) -> f64 {
    let step = 1e-5;
    let at = |s: f64| {
        let m = HermitianPD::new(symmetrize(&(r.matrix() + h.scale(s)))).unwrap();
        f(&normalize(&m, Normalization::UnitDet))
    };
    (at(step) - at(-step)) / (2.0 * step)
}

fn free_derivative(r: &HermitianPD, h: &CMatrix, f: impl Fn(&HermitianPD) -> f64) -> f64 {
    let step = 1e-5;
    let at = |s: f64| f(&HermitianPD::new(symmetrize(&(r.matrix() + h.scale(s)))).unwrap());
    (at(step) - at(-step)) / (2.0 * step)
}

fn real_symmetric<R: Rng>(rng: &mut R, d: usize) -> CMatrix {
    let h = random_hermitian(rng, d).map(|z| C64::new(z.re, 0.0));
    h.unscale(h.norm())
}

#[test]
fn tyler_orthogonal_frame_is_identity() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x = SampleSet::from_real(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s], vec![s, -s]]).unwrap();
    let est = tyler_fixed_point(&x, &IterationControl::default(), Normalization::UnitDet).unwrap();
    assert!((est.matrix.matrix() - CMatrix::identity(2, 2)).norm() <= 1e-12);
    assert_eq!(est.iterations, 1);
}

#[test]
fn tyler_is_scale_invariant() {
    let x = complex_set(3, 4, 30);
    let base = tyler_fixed_point(&x, &tight(), Normalization::UnitTraceMean).unwrap();
    for c in [1e-6, 1.0, 1e6] {
        let scaled = tyler_fixed_point(&x.scaled(c).unwrap(), &tight(), Normalization::UnitTraceMean).unwrap();
        assert!(geodesic_dist2(&base.matrix, &scaled.matrix).unwrap() <= 1e-10);
    }
}

#[test]
fn tyler_matches_brute_force_likelihood_maximum() {
    let x = real_set(11, 2, 8);
    let chart = |a: f64, b: f64| {
        HermitianPD::with_normalization(
            CMatrix::from_fn(2, 2, |i, j| {
                C64::new(
                    match (i, j) {
                        (0, 0) => a,
                        (1, 1) => (1.0 + b * b) / a,
                        _ => b,
                    },
                    0.0,
                )
            }),
            Normalization::UnitDet,
        )
        .unwrap()
    };
    let objective = |la: f64, b: f64| loglik_concentrated(&chart(la.exp(), b), &x).unwrap();

    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..=160 {
        let la = -4.0 + 8.0 * i as f64 / 160.0;
        for j in 0..=240 {
            let b = -6.0 + 12.0 * j as f64 / 240.0;
            let v = objective(la, b);
            if v > best.0 {
                best = (v, la, b);
            }
        }
    }
    // Pattern search from the best grid point.
    let (mut v, mut la, mut b) = best;
    let mut step = 0.05;
    while step > 1e-10 {
        let mut moved = false;
        for (da, db) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let w = objective(la + da, b + db);
            if w > v {
                (v, la, b) = (w, la + da, b + db);
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    let oracle = chart(la.exp(), b);
    let est = tyler_fixed_point(&x, &tight(), Normalization::UnitDet).unwrap();
    assert!(rel_frobenius(&est.matrix, &oracle) <= 1e-3, "{}", rel_frobenius(&est.matrix, &oracle));
}

#[test]
fn tyler_is_stationary_for_concentrated_likelihood() {
    for (seed, x) in [(21, real_set(21, 3, 12)), (22, complex_set(22, 4, 15))] {
        let est = tyler_fixed_point(&x, &tight(), Normalization::UnitDet).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let h = if x.field() == Field::Real {
                real_symmetric(&mut rng, x.dim())
            } else {
                random_hermitian(&mut rng, x.dim())
            };
            let h = h.unscale(h.trace().re.abs().max(1.0));
            let grad = unit_det_derivative(&est.matrix, &h, |r| loglik_concentrated(r, &x).unwrap());
            assert!(grad.abs() <= 1e-4, "directional derivative {grad}");
        }
    }
}

#[test]
fn tyler_residual_history_is_monotone() {
    for seed in 30..35 {
        let est = tyler_fixed_point(&complex_set(seed, 4, 20), &tight(), Normalization::UnitDet).unwrap();
        let rises = est
            .history
            .windows(2)
            .filter(|w| w[1] > w[0] * (1.0 + 1e-6) && w[0] > 1e-26)
            .count();
        if rises > 0 {
            eprintln!("seed {seed}: Tyler residual increased {rises} time(s)");
        }
        assert!(est.history.iter().all(|r| r.is_finite()));
    }
}

#[test]
fn tyler_rejects_degenerate_sets() {
    let x = complex_set(4, 4, 3);
    assert!(matches!(
        tyler_fixed_point(&x, &IterationControl::default(), Normalization::UnitDet),
        Err(Error::DegenerateSampleSet { .. })
    ));
    let flat = SampleSet::from_real(&[vec![1.0, 1.0, 0.0], vec![1.0, -1.0, 0.0], vec![2.0, 1.0, 0.0]]).unwrap();
    assert!(matches!(scm(&flat), Err(Error::DegenerateSampleSet { .. })));
    let loaded = IterationControl {
        diagonal_loading: 0.1,
        ..tight()
    };
    assert!(tyler_fixed_point(&x, &loaded, Normalization::UnitDet).is_ok());
}

#[test]
fn tyler_reports_partial_on_no_convergence() {
    let x = complex_set(5, 4, 20);
    let ctrl = IterationControl::new(1e-30, 2).unwrap();
    match tyler_fixed_point(&x, &ctrl, Normalization::UnitDet) {
        Err(Error::NoConvergence {
            iterations: 2,
            partial: Some(r),
            ..
        }) => assert_eq!(r.normalization(), Normalization::UnitDet),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn tyler_of_scm_matches_tyler() {
    let x = complex_set(6, 4, 25);
    let scm_est = estimator_by_name("scm", tight()).unwrap();
    let via = tyler_of(scm_est.as_ref(), &x, &tight()).unwrap();
    let direct = tyler_fixed_point(&x, &tight(), Normalization::UnitTraceMean).unwrap();
    assert!(geodesic_dist2(&via.matrix, &direct.matrix).unwrap() <= 1e-8);
    assert!(tyler_residual(&via.matrix, &x).unwrap() <= 1e-12);
}

#[test]
fn tyler_of_on_whitened_data_starts_at_fixed_point() {
    let x = complex_set(7, 3, 20);
    let r = tyler_fixed_point(&x, &tight(), Normalization::UnitTraceMean).unwrap().matrix;
    let white = x
        .with_columns(x.iter().map(|c| r.whiten(c).unwrap()).collect())
        .unwrap();
    let scm_est = estimator_by_name("scm", IterationControl::default()).unwrap();
    let est = tyler_of(scm_est.as_ref(), &white, &IterationControl::default()).unwrap();
    assert!(est.history[0] <= 1e-10, "{}", est.history[0]);
}

#[test]
fn tyler_of_constant_estimator() {
    let x = complex_set(8, 3, 10);
    let constant = |s: &SampleSet| -> Result<HermitianPD> {
        let t = scm(s)?.trace() / s.dim() as f64;
        HermitianPD::from_real_diagonal(&vec![t; s.dim()])
    };
    let est = tyler_of(&constant, &x, &IterationControl::default()).unwrap();
    assert!((est.matrix.matrix() - CMatrix::identity(3, 3)).norm() <= 1e-12);
}

#[test]
fn m_cov_gaussian_is_scm() {
    let x = complex_set(9, 4, 20);
    let g = RadialScore::gaussian(Field::Complex);
    let est = m_cov(&g, &x, &IterationControl::default()).unwrap();
    let sample = scm(&x).unwrap();
    assert!(rel_frobenius(&est.matrix, &sample) <= 1e-14);
    assert!(est.history[1] <= 1e-24);

    let scaled = m_cov(&g, &x.scaled(3.0).unwrap(), &IterationControl::default()).unwrap();
    assert!(rel_frobenius(&scaled.matrix, &sample.scaled(9.0).unwrap()) <= 1e-13);
}

#[test]
fn m_cov_student_t_is_local_maximum() {
    for x in [complex_set(10, 4, 40), real_set(10, 3, 40)] {
        let t = RadialScore::student_t(3.0, x.dim(), x.field()).unwrap();
        let est = m_cov(&t, &x, &tight()).unwrap();
        assert!(m_residual(&t, &est.matrix, &x).unwrap() <= 1e-10);
        let peak = m_loglik(&t, &est.matrix, &x).unwrap();
        let half = matrix_sqrt(&est.matrix).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..20 {
            let mut h = random_hermitian(&mut rng, x.dim());
            if x.field() == Field::Real {
                h = real_symmetric(&mut rng, x.dim());
            }
            let bump = matrix_exp(&h.scale(0.1)).unwrap().congruence(half.matrix()).unwrap();
            assert!(m_loglik(&t, &bump, &x).unwrap() <= peak);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..20 {
            let h = random_hermitian(&mut rng, x.dim());
            let h = if x.field() == Field::Real { h.map(|z| C64::new(z.re, 0.0)) } else { h };
            let grad = free_derivative(&est.matrix, &h, |s| m_loglik(&t, s, &x).unwrap());
            assert!(grad.abs() <= 1e-4, "{grad}");
        }
    }
}

#[test]
fn m_cov_rejects_sign_changing_score() {
    let x = complex_set(12, 2, 10);
    assert!(matches!(
        m_cov(&RadialScore::circular_gaussian(), &x, &IterationControl::default()),
        Err(Error::InvalidScore(_))
    ));
    let real = real_set(12, 2, 10);
    assert!(matches!(
        m_cov(&RadialScore::gaussian(Field::Complex), &real, &IterationControl::default()),
        Err(Error::FieldMismatch(_))
    ));
}

#[test]
fn m_of_scm_matches_m_cov() {
    let scm_est = estimator_by_name("scm", tight()).unwrap();
    for seed in 13..16 {
        let x = complex_set(seed, 3, 25);
        for score in [
            RadialScore::gaussian(Field::Complex),
            RadialScore::student_t(1.5, 3, Field::Complex).unwrap(),
        ] {
            let a = m_cov(&score, &x, &tight()).unwrap();
            let b = m_of(&score, scm_est.as_ref(), &x, &tight()).unwrap();
            assert!(rel_frobenius(&a.matrix, &b.matrix) <= 1e-8);
        }
    }
}

fn ar1_set(seed: u64, d: usize, n: usize, mu: f64) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![C64::new(0.0, 0.0); d - 1];
    coeffs[0] = C64::new(mu, 0.0);
    let cov = toeplitz_covariance(&SchurModel::new(1.0, coeffs).unwrap()).unwrap();
    SampleSet::new(Field::Complex, complex_gaussian(&mut rng, cov.cholesky(), n)).unwrap()
}

#[test]
fn m_of_burg_keeps_toeplitz_structure() {
    let x = ar1_set(16, 6, 50, 0.7);
    let burg = estimator_by_name("burg", IterationControl::default()).unwrap();
    let t = RadialScore::student_t(2.0, 6, Field::Complex).unwrap();
    let est = m_of(&t, burg.as_ref(), &x, &IterationControl::new(1e-12, 500).unwrap()).unwrap();
    let m = est.matrix.matrix();
    let scale = m[(0, 0)].norm();
    for lag in 0..6 {
        for i in 1..(6 - lag) {
            assert!((m[(i + lag, i)] - m[(lag, 0)]).norm() <= 1e-9 * scale);
        }
    }
}

#[test]
fn m_exp_cov_gaussian_reaches_scm() {
    let x = complex_set(17, 4, 30);
    let est = m_exp_cov(&RadialScore::gaussian(Field::Complex), &x, &tight()).unwrap();
    assert!(geodesic_dist2(&est.matrix, &scm(&x).unwrap()).unwrap() <= 1e-8);
}

#[test]
fn m_exp_cov_circular_score_in_one_dimension() {
    // Unscaled score: σ = mean(|x|² − σ/2), so σ = (2/3) mean |x|².
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let cols = complex_gaussian(&mut rng, &CMatrix::identity(1, 1).scale(1.7), 40);
    let mean = cols.iter().map(|c| c[0].norm_sqr()).sum::<f64>() / 40.0;
    let x = SampleSet::new(Field::Complex, cols).unwrap();
    let est = m_exp_cov(&RadialScore::circular_gaussian(), &x, &tight()).unwrap();
    assert!((est.matrix.matrix()[(0, 0)].re - 2.0 * mean / 3.0).abs() <= 1e-10 * mean);
}

#[test]
fn cg_cov_one_dimension_is_mean_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let cols = complex_gaussian(&mut rng, &CMatrix::identity(1, 1).scale(0.4), 25);
    let mean = cols.iter().map(|c| c[0].norm_sqr()).sum::<f64>() / 25.0;
    let x = SampleSet::new(Field::Complex, cols).unwrap();
    let est = cg_cov(&x, &tight()).unwrap();
    assert!((est.matrix.matrix()[(0, 0)].re - mean).abs() <= 1e-10 * mean);
}

#[test]
fn cg_cov_symmetric_samples_give_diagonal() {
    let i = C64::new(0.0, 1.0);
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let cols: Vec<CVector> = [
        [one, zero],
        [zero, one],
        [i, zero],
        [zero, -i],
        [one, one],
        [one, -one],
        [i, i],
        [-i, i],
    ]
    .iter()
    .map(|v| CVector::from_column_slice(v))
    .collect();
    let x = SampleSet::new(Field::Complex, cols).unwrap();
    let est = cg_cov(&x, &tight()).unwrap();
    let m = est.matrix.matrix();
    assert!(m[(0, 1)].norm() <= 1e-9);
    assert!((m[(0, 0)] - m[(1, 1)]).norm() <= 1e-9);
}

#[test]
fn cg_cov_is_consistent_for_gaussian_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let truth = random_pd(&mut rng, 4);
    let x = SampleSet::new(Field::Complex, complex_gaussian(&mut rng, truth.cholesky(), 10_000)).unwrap();
    let est = cg_cov(&x, &IterationControl::default()).unwrap();
    assert!(rel_frobenius(&est.matrix, &truth) <= 0.1);
    assert!(cg_residual(&est.matrix, &x).unwrap() <= 1e-6);
}

#[test]
fn cg_cov_is_stationary() {
    let x = complex_set(23, 3, 30);
    let est = cg_cov(&x, &tight()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..20 {
        let h = random_hermitian(&mut rng, 3);
        let grad = free_derivative(&est.matrix, &h, |s| cg_loglik(s, &x).unwrap());
        assert!(grad.abs() <= 1e-4, "{grad}");
    }
}

#[test]
fn cg_cov_needs_complex_data() {
    assert!(matches!(
        cg_cov(&real_set(25, 2, 10), &IterationControl::default()),
        Err(Error::FieldMismatch(_))
    ));
}

#[test]
fn empirical_radial_is_sorted_radii() {
    let x = SampleSet::from_real(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let r = HermitianPD::from_real_diagonal(&[1.0, 4.0]).unwrap();
    assert_eq!(empirical_radial(&r, &x).unwrap(), vec![0.5, 3.0]);
    assert!(loglik_concentrated(&r, &x).is_err());
}

#[test]
fn loglik_concentrated_example() {
    let x = SampleSet::new(Field::Complex, vec![real_vector(&[2.0, 0.0]), real_vector(&[0.0, 1.0])]).unwrap();
    let r = HermitianPD::identity(2);
    // -2 (2-1) / 4 · (ln 4 + ln 1)
    assert!((loglik_concentrated(&r, &x).unwrap() + 4f64.ln() / 2.0).abs() <= 1e-15);

    let basis = SampleSet::from_real(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert_eq!(loglik_concentrated(&r, &basis).unwrap(), 0.0);
}

/// `x†M⁻¹x` through an LU solve, independent of the Cholesky path.
fn lu_quad_form(m: &HermitianPD, x: &CVector) -> f64 {
    let y = m.matrix().clone().lu().solve(x).unwrap();
    x.dotc(&y).re
}

#[test]
fn loglik_concentrated_matches_direct_summation() {
    let x = complex_set(41, 2, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for r in [HermitianPD::identity(2), normalize(&random_pd(&mut rng, 2), Normalization::UnitDet)] {
        let direct: f64 = x.iter().map(|v| lu_quad_form(&r, v).ln()).sum::<f64>() * -2.0 / (2.0 * 9.0);
        assert!((loglik_concentrated(&r, &x).unwrap() - direct).abs() <= 1e-12);
    }
}

#[test]
fn loglik_concentrated_shifts_under_sample_scaling() {
    let r = HermitianPD::identity(3);
    for (x, c_k) in [(complex_set(43, 3, 7), 2.0), (real_set(44, 3, 7), 1.0)] {
        let base = loglik_concentrated(&r, &x).unwrap();
        for c in [1e-3, 0.5, 7.0] {
            let scaled = loglik_concentrated(&r, &x.scaled(c).unwrap()).unwrap();
            assert!((scaled - base + c_k * 2.0 * f64::ln(c)).abs() <= 1e-12);
        }
    }
}

#[test]
fn empirical_radial_examples() {
    let x = SampleSet::from_real(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
    assert_eq!(empirical_radial(&HermitianPD::identity(2), &x).unwrap(), vec![1.0, 2.0]);
    let x = SampleSet::from_real(&[vec![2.0, 0.0]]).unwrap();
    let r = HermitianPD::from_real_diagonal(&[4.0, 1.0]).unwrap();
    assert_eq!(empirical_radial(&r, &x).unwrap(), vec![1.0]);

    let x = complex_set(45, 4, 12);
    let r = random_pd(&mut ChaCha8Rng::seed_from_u64(46), 4);
    let mut want: Vec<f64> = x.iter().map(|v| lu_quad_form(&r, v).sqrt()).collect();
    want.sort_by(f64::total_cmp);
    for (a, b) in empirical_radial(&r, &x).unwrap().iter().zip(&want) {
        assert!((a - b).abs() <= 1e-12 * b);
    }
}

#[test]
fn scm_examples() {
    let x = SampleSet::from_real(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert_eq!(scm(&x).unwrap(), HermitianPD::from_real_diagonal(&[0.5, 0.5]).unwrap());
    let c = 3.0;
    let scaled = scm(&x.scaled(c).unwrap()).unwrap();
    assert!((scaled.matrix() - CMatrix::identity(2, 2).scale(c * c / 2.0)).norm() <= 1e-15);

    let x = complex_set(47, 3, 10);
    let mut direct = CMatrix::zeros(3, 3);
    for v in x.iter() {
        direct += v * v.adjoint();
    }
    direct.unscale_mut(10.0);
    assert!((scm(&x).unwrap().matrix() - &direct).norm() <= 1e-14 * direct.norm());
    let flat = SampleSet::from_real(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
    assert!(matches!(scm(&flat), Err(Error::DegenerateSampleSet { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tyler_is_affine_equivariant(seed in 0u64..1000) {
        let x = complex_set(seed, 3, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
        let a = random_matrix(&mut rng, 3) + CMatrix::identity(3, 3).scale(1.5);
        let base = tyler_fixed_point(&x, &tight(), Normalization::UnitDet).unwrap();
        let moved = tyler_fixed_point(&x.transformed(&a).unwrap(), &tight(), Normalization::UnitDet).unwrap();
        let pushed = normalize(&base.matrix.congruence(&a).unwrap(), Normalization::UnitDet);
        prop_assert!(geodesic_dist2(&pushed, &moved.matrix).unwrap() <= 1e-10);
    }

    #[test]
    fn tyler_output_carries_requested_normalization(seed in 0u64..1000, mode in 0usize..3) {
        let mode = [Normalization::UnitDet, Normalization::UnitTraceMean, Normalization::None][mode];
        let est = tyler_fixed_point(&complex_set(seed, 3, 9), &IterationControl::default(), mode).unwrap();
        prop_assert_eq!(est.matrix.normalization(), mode);
        match mode {
            Normalization::UnitDet => prop_assert!(est.matrix.log_det().abs() <= 1e-9),
            _ => prop_assert!((est.matrix.trace() - 3.0).abs() <= 1e-9),
        }
    }
}
