//! Cross-checks of the in-house Hermitian kernels against nalgebra.

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use num_complex::Complex64;
use quantbeam::numerics::{cholesky_upper, hermitian_eigenvalues, min_eigenvalue, solve_hermitian, HermitianMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, pd: bool) -> HermitianMatrix {
    let mut h = HermitianMatrix::from_upper_fn(n, |i, j| {
        if i == j {
            Complex64::new(rng.gen_range(-1.0..1.0), 0.0)
        } else {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        }
    });
    if pd {
        h = h.shifted(2.0 * n as f64);
    }
    h
}

fn to_nalgebra(h: &HermitianMatrix) -> DMatrix<Complex64> {
    DMatrix::from_fn(h.dim(), h.dim(), |i, j| h.get(i, j))
}

#[test]
fn eigenvalues_match_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 1..=10 {
        for _ in 0..20 {
            let h = random_hermitian(&mut rng, n, false);
            let ours = hermitian_eigenvalues(&h).unwrap();
            let mut theirs: Vec<f64> = to_nalgebra(&h).symmetric_eigenvalues().iter().copied().collect();
            theirs.sort_by(f64::total_cmp);
            assert_eq!(ours.len(), n);
            for (a, b) in ours.iter().zip(&theirs) {
                assert_relative_eq!(*a, *b, epsilon = 1e-10, max_relative = 1e-10);
            }
            assert_relative_eq!(min_eigenvalue(&h).unwrap(), theirs[0], epsilon = 1e-10);
        }
    }
}

#[test]
fn cholesky_reproduces_the_matrix_and_solves() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in 1..=10 {
        let h = random_hermitian(&mut rng, n, true);
        let u = cholesky_upper(&h).unwrap();
        let back = u.gram();
        for i in 0..n {
            assert!(u.diag(i) > 0.0);
            for j in 0..n {
                assert!((back.get(i, j) - h.get(i, j)).norm() < 1e-12 * h.frobenius_norm());
            }
        }
        let b: Vec<Complex64> = (0..n).map(|k| Complex64::new(k as f64, 1.0)).collect();
        let x = solve_hermitian(&h, &b).unwrap();
        let theirs = to_nalgebra(&h).cholesky().unwrap().solve(&nalgebra::DVector::from_vec(b.clone()));
        for (a, t) in x.iter().zip(theirs.iter()) {
            assert!((a - t).norm() < 1e-10 * t.norm().max(1.0));
        }
    }
}

#[test]
fn cholesky_rejects_indefinite_input() {
    let h = HermitianMatrix::diagonal(&[1.0, -1.0, 2.0]);
    assert!(cholesky_upper(&h).is_err());
}
