use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relaysim::linalg::{
    complex_gaussian_vector, herm_inner, matvec, normalize, project_orthogonal, random_orthonormal_pair,
    rank1_mmse_direction, ComplexMatrix, ComplexVector, Lu,
};

fn gaussian(dim: usize, seed: u64) -> ComplexVector {
    complex_gaussian_vector(dim, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

proptest! {
    #[test]
    fn normalize_gives_unit_norm(dim in 1usize..9, seed in any::<u64>()) {
        let v = gaussian(dim, seed);
        let n = normalize(&v).unwrap();
        prop_assert!((n.norm() - 1.0).abs() < 1e-12);
        // same direction: |<n, v>| = ‖v‖
        prop_assert!((herm_inner(&n, &v).unwrap().norm() - v.norm()).abs() < 1e-9 * v.norm());
    }

    #[test]
    fn projection_is_orthogonal_idempotent_and_pythagorean(dim in 1usize..9, s1 in any::<u64>(), s2 in any::<u64>()) {
        let h = gaussian(dim, s1);
        let g = gaussian(dim, s2.wrapping_add(1));
        let p = project_orthogonal(&h, &g).unwrap();
        let scale = h.norm() * g.norm();
        prop_assert!(herm_inner(&g, &p).unwrap().norm() <= 1e-12 * scale.max(1.0));
        let pp = project_orthogonal(&p, &g).unwrap();
        prop_assert!(pp.distance(&p).unwrap() <= 1e-12 * h.norm().max(1.0));
        let removed = h.axpy(c(-1.0, 0.0), &p).unwrap();
        prop_assert!((removed.norm_sqr() + p.norm_sqr() - h.norm_sqr()).abs() <= 1e-10 * h.norm_sqr().max(1.0));
    }

    #[test]
    fn mmse_direction_matches_explicit_inverse(s1 in any::<u64>(), s2 in any::<u64>(), rho in 0.0f64..1e3) {
        // (I + ρ g gᴴ)⁻¹ h through the closed-form 2×2 inverse
        let g = gaussian(2, s1);
        let h = gaussian(2, s2.wrapping_add(7));
        let (g0, g1) = (g.as_slice()[0], g.as_slice()[1]);
        let a = c(1.0, 0.0) + g0 * g0.conj() * rho;
        let b = g0 * g1.conj() * rho;
        let cc = g1 * g0.conj() * rho;
        let d = c(1.0, 0.0) + g1 * g1.conj() * rho;
        let det = a * d - b * cc;
        let (h0, h1) = (h.as_slice()[0], h.as_slice()[1]);
        let expected = ComplexVector::new(vec![(d * h0 - b * h1) / det, (a * h1 - cc * h0) / det]);
        let got = rank1_mmse_direction(&g, rho, &h).unwrap();
        prop_assert!(got.distance(&expected).unwrap() <= 1e-9 * expected.norm().max(1.0));
    }

    #[test]
    fn orthonormal_pair_properties(dim in 2usize..9, seed in any::<u64>()) {
        let (u, q) = random_orthonormal_pair(dim, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!((u.norm() - 1.0).abs() <= 1e-12);
        prop_assert!((q.norm() - 1.0).abs() <= 1e-12);
        prop_assert!(herm_inner(&u, &q).unwrap().norm() <= 1e-12);
        let again = random_orthonormal_pair(dim, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!((u, q), again);
    }

    #[test]
    fn lu_solves_random_systems(dim in 1usize..9, seed in any::<u64>()) {
        let entries = gaussian(dim * dim, seed);
        let a = ComplexMatrix::from_rows(dim, dim, entries.as_slice().to_vec()).unwrap();
        let b = gaussian(dim, seed ^ 0xabcdef);
        let lu = Lu::factor(&a).unwrap();
        let cond = lu.condition_1(&a).unwrap();
        prop_assume!(cond < 1e8);
        let x = lu.solve(&b).unwrap();
        let r = matvec(&a, &x).unwrap().distance(&b).unwrap();
        prop_assert!(r <= 1e-12 * cond * b.norm().max(1.0), "residual {} cond {}", r, cond);
    }
}

#[test]
fn herm_inner_is_conjugate_linear_in_first_argument() {
    let a = ComplexVector::new(vec![c(1.0, 0.0), c(0.0, 2.0)]);
    let b = ComplexVector::new(vec![c(3.0, 0.0), c(1.0, 0.0)]);
    assert_eq!(herm_inner(&a, &b).unwrap(), c(3.0, -2.0));
    assert_eq!(herm_inner(&b, &a).unwrap(), c(3.0, 2.0));
    let scaled = a.scale(c(0.0, 1.0));
    assert_eq!(herm_inner(&scaled, &b).unwrap(), c(0.0, -1.0) * c(3.0, -2.0));
}

#[test]
fn dimension_mismatch_is_reported() {
    let a = ComplexVector::zeros(2);
    let b = ComplexVector::zeros(3);
    assert!(herm_inner(&a, &b).is_err());
    assert!(matvec(&ComplexMatrix::identity(2), &b).is_err());
    assert!(project_orthogonal(&a, &b).is_err());
}
