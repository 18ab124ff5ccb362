use proptest::prelude::*;
use radnls::identity_lab::*;
use radnls::op_functions::{commutator_expansion_matrix, fourier_moment};
use radnls::Cutoff;

#[test]
fn identities_trivial_for_identity_matrices() {
    let i = HermitianMatrix::identity(6);
    let b = HermitianMatrix::random(6, 3);
    let r = check_symmetrization(&i, &b, &i).unwrap();
    assert!(r.max_residual() < 1e-13, "{r:?}");
}

#[test]
fn identities_random_8() {
    let a = HermitianMatrix::random(8, 11);
    let b = HermitianMatrix::random(8, 12);
    let c = a.polynomial(&[0.0, 0.0, 1.0]);
    let r = check_symmetrization(&a, &b, &c).unwrap();
    assert!(r.max_residual() <= 1e-10, "{r:?}");
    assert!(r.passed());
}

#[test]
fn abba_random_16() {
    let a = HermitianMatrix::random(16, 21);
    let b = HermitianMatrix::random(16, 22);
    let c = a.polynomial(&[1.0, 0.5]);
    let r = check_symmetrization(&a, &b, &c).unwrap();
    assert!(r.abba <= 1e-10, "{r:?}");
}

#[test]
fn non_commuting_c_rejected() {
    let a = HermitianMatrix::random(5, 1);
    let b = HermitianMatrix::random(5, 2);
    let c = HermitianMatrix::random(5, 3);
    assert!(check_symmetrization(&a, &b, &c).is_err());
}

#[test]
fn tolerance_scales_cubically() {
    let a = HermitianMatrix::random(8, 31);
    let b = HermitianMatrix::random(8, 32);
    let c = a.polynomial(&[0.2, 1.0]);
    let r1 = check_symmetrization(&a, &b, &c).unwrap();
    let r3 = check_symmetrization(&a.scaled(3.0), &b.scaled(3.0), &c.scaled(3.0)).unwrap();
    assert!((r3.tolerance / r1.tolerance - 27.0).abs() < 1e-9);
    assert!(r1.passed() && r3.passed());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn identities_hold_for_seeds(seed in 0u64..10_000, d in 2usize..12) {
        let a = HermitianMatrix::random(d, seed);
        let b = HermitianMatrix::random(d, seed + 1);
        let c = a.polynomial(&[0.3, -0.5, 0.25]);
        let r = check_symmetrization(&a, &b, &c).unwrap();
        prop_assert!(r.passed(), "{:?}", r);
    }
}

#[test]
fn double_commutator_trivial_cases() {
    let a = HermitianMatrix::random(6, 5);
    let b = a.polynomial(&[1.0, 2.0]);
    let f = Cutoff::rising(1.0);
    assert!(check_double_commutator(&f, &f, &a, &b).unwrap() < 1e-10);
    // f₂ ≡ 1 on the spectrum
    let one = Cutoff::rising(4.0);
    let shifted = a.polynomial(&[10.0, 1.0]);
    let b = HermitianMatrix::random(6, 6);
    assert!(check_double_commutator(&f, &one, &shifted, &b).unwrap() < 1e-10);
}

#[test]
fn double_commutator_random() {
    let a = HermitianMatrix::random(6, 41);
    let b = HermitianMatrix::random(6, 42);
    let f1 = Cutoff::rising(1.0);
    let f2 = Cutoff::rising(2.0);
    let r = check_double_commutator(&f1, &f2, &a, &b).unwrap();
    assert!(r <= 1e-4, "{r}");
}

#[test]
fn expansion_commuting_pair() {
    let a = HermitianMatrix::diagonal(&[0.1, 0.4, 0.8, 1.5, 2.0]);
    let b = HermitianMatrix::diagonal(&[1.0, -2.0, 0.5, 0.0, 3.0]);
    let rep = commutator_expansion_matrix(&b, &a, &Cutoff::rising(1.0), 2).unwrap();
    assert!(rep.remainder_norm < 1e-14);
    assert!(rep.terms.iter().all(|t| t.norm() < 1e-14));
}

#[test]
fn expansion_random_within_bound() {
    let a = HermitianMatrix::random(8, 7).scaled(0.4);
    let b = HermitianMatrix::random(8, 8);
    let c = Cutoff::rising(1.0);
    for n in 1..=3 {
        let rep = commutator_expansion_matrix(&b, &a, &c, n).unwrap();
        assert!(rep.remainder_norm <= rep.bound, "n={n} {} {}", rep.remainder_norm, rep.bound);
        assert!(rep.slack >= 0.0);
    }
}

#[test]
fn expansion_b_function_of_a() {
    let a = HermitianMatrix::random(8, 9);
    let b = a.polynomial(&[0.0, 0.0, 1.0]);
    let rep = commutator_expansion_matrix(&b, &a, &Cutoff::rising(1.0), 1).unwrap();
    assert!(rep.remainder_norm < 1e-10, "{}", rep.remainder_norm);
}

#[test]
fn moment_divergence_flagged() {
    let c = Cutoff::rising(1.0);
    assert!(fourier_moment(&c, 4).is_err());
    assert!(fourier_moment(&c.with_order(9).unwrap(), 4).is_ok());
    let m1 = fourier_moment(&c, 1).unwrap();
    let m2 = fourier_moment(&c, 2).unwrap();
    assert!(m1 > 0.0 && m2 > 0.0);
}

#[test]
fn higher_derivatives_match_finite_differences() {
    let c = Cutoff::window(1.0, 5.0).unwrap();
    for &l in &[0.6, 0.8, 2.7, 4.1] {
        for j in 1..4u32 {
            let h = 1e-5;
            let fd = (c.derivative(j - 1, l + h) - c.derivative(j - 1, l - h)) / (2.0 * h);
            let an = c.derivative(j, l);
            assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "j={j} l={l} {fd} {an}");
        }
    }
}
