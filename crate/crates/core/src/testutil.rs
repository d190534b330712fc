use rand::Rng;
use rand_distr::StandardNormal;

use crate::hermitian::{symmetrize, CMatrix, CVector, HermitianPD, C64};

pub(crate) fn random_matrix<R: Rng>(rng: &mut R, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub(crate) fn random_vector<R: Rng>(rng: &mut R, d: usize) -> CVector {
    CVector::from_fn(d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub(crate) fn random_pd<R: Rng>(rng: &mut R, d: usize) -> HermitianPD {
    let a = random_matrix(rng, d);
    let m = &a * a.adjoint() + CMatrix::identity(d, d).scale(0.1);
    HermitianPD::new(symmetrize(&m)).unwrap()
}

pub(crate) fn real_vector(v: &[f64]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0)))
}

/// `n` circular complex Gaussian samples with covariance `L L†`.
pub(crate) fn complex_gaussian<R: Rng>(rng: &mut R, l: &CMatrix, n: usize) -> Vec<CVector> {
    let d = l.nrows();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let z = CVector::from_fn(d, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                C64::new(re * s, im * s)
            });
            l * z
        })
        .collect()
}

/// `n` real Gaussian samples with covariance `L Lᵀ` (`l` real).
pub(crate) fn real_gaussian<R: Rng>(rng: &mut R, l: &CMatrix, n: usize) -> Vec<CVector> {
    let d = l.nrows();
    (0..n)
        .map(|_| {
            let z = CVector::from_fn(d, |_, _| C64::new(rng.sample(StandardNormal), 0.0));
            l * z
        })
        .collect()
}

/// Random Hermitian direction of unit Frobenius norm.
pub(crate) fn random_hermitian<R: Rng>(rng: &mut R, d: usize) -> CMatrix {
    let a = random_matrix(rng, d);
    let h = symmetrize(&(&a + a.adjoint()));
    h.unscale(h.norm())
}
