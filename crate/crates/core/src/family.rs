//! The quadratic family `f_l(z) = l/2 (z^2 - 1) + 1` with `|l| > 40`.
//!
//! Both `+1` and `-1` are sent to `1`, which is therefore a common fixed
//! point of every member. The trapping disks `U_0 = D(1, 1/3)` and
//! `U_1 = D(-1, 1/3)` absorb all backward orbits.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::param_seq::MIN_MODULUS;

pub const TRAP_RADIUS: f64 = 1.0 / 3.0;

/// Inverse branches are defined on `D(0, 2)`.
pub const BRANCH_DOMAIN_RADIUS: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BranchLabel {
    /// Principal square root, lands in `U_0`.
    Zero,
    /// Negated principal root, lands in `U_1`.
    One,
}

impl BranchLabel {
    pub fn from_bit(bit: u8) -> BranchLabel {
        if bit == 0 {
            BranchLabel::Zero
        } else {
            BranchLabel::One
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            BranchLabel::Zero => 0,
            BranchLabel::One => 1,
        }
    }

    /// Centre of the trapping disk this branch lands in.
    pub fn center(self) -> Complex64 {
        match self {
            BranchLabel::Zero => Complex64::new(1.0, 0.0),
            BranchLabel::One => Complex64::new(-1.0, 0.0),
        }
    }
}

#[inline]
pub fn apply(l: Complex64, z: Complex64) -> Complex64 {
    l * 0.5 * (z * z - 1.0) + 1.0
}

#[inline]
pub fn derivative(l: Complex64, z: Complex64) -> Complex64 {
    l * z
}

/// `|f'(z)| (1 + |z|^2) / (1 + |f(z)|^2)`.
pub fn spherical_derivative(l: Complex64, z: Complex64) -> f64 {
    let fz = apply(l, z);
    derivative(l, z).norm() * (1.0 + z.norm_sqr()) / (1.0 + fz.norm_sqr())
}

/// Inverse branch without the domain check; the hot loops of the tree
/// enumeration only ever feed points of `closure(U)` here.
#[inline]
pub fn inverse_branch_unchecked(l: Complex64, w: Complex64, label: BranchLabel) -> Complex64 {
    let root = (1.0 + 2.0 * (w - 1.0) / l).sqrt();
    match label {
        BranchLabel::Zero => root,
        BranchLabel::One => -root,
    }
}

/// `±sqrt(1 + 2(w - 1)/l)` for `|w| < 2`.
pub fn inverse_branch(l: Complex64, w: Complex64, label: BranchLabel) -> Result<Complex64> {
    if !(w.norm() < BRANCH_DOMAIN_RADIUS) {
        return Err(Error::Domain(format!("|w| = {} is outside D(0, 2)", w.norm())));
    }
    Ok(inverse_branch_unchecked(l, w, label))
}

/// Closed disk membership in `closure(U_0) ∪ closure(U_1)`, with `slack`.
pub fn in_trap_closure(z: Complex64, slack: f64) -> bool {
    (z - 1.0).norm() <= TRAP_RADIUS + slack || (z + 1.0).norm() <= TRAP_RADIUS + slack
}

/// Which disk (if any) of the closed trap contains `z`.
pub fn trap_label(z: Complex64, slack: f64) -> Option<BranchLabel> {
    if (z - 1.0).norm() <= TRAP_RADIUS + slack {
        Some(BranchLabel::Zero)
    } else if (z + 1.0).norm() <= TRAP_RADIUS + slack {
        Some(BranchLabel::One)
    } else {
        None
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateReport {
    pub modulus: f64,
    /// Sup of `|2(w - 1)/l|` over `|w - 1| <= 7/3`, i.e. `14 / (3|l|)`.
    pub radicand_bound: f64,
    /// Sup of the displacement `|f_l^{-1}(w) ∓ 1|`; bounded by the radicand
    /// bound because `|sqrt(1 + u) - 1| <= |u|` for `|u| < 1`.
    pub displacement_bound: f64,
    /// `1/3 - displacement_bound`.
    pub margin: f64,
    pub passed: bool,
    pub reason: Option<String>,
}

/// Analytic check that both inverse branches of `f_l` map `closure(U)`
/// strictly inside `U`, so that no critical value can lie in `U` and the
/// Julia set is a Cantor set inside `U`.
pub fn trapping_certificate(l: Complex64) -> CertificateReport {
    let modulus = l.norm();
    // closure(U) ⊂ closed D(1, 7/3).
    let radicand_bound = 2.0 * (7.0 / 3.0) / modulus;
    let displacement_bound = radicand_bound;
    let margin = TRAP_RADIUS - displacement_bound;
    let reason = if !(modulus > MIN_MODULUS) {
        Some(format!("modulus {modulus} ≤ {MIN_MODULUS}"))
    } else if radicand_bound >= 1.0 {
        Some(format!("radicand bound {radicand_bound} ≥ 1"))
    } else if margin <= 0.0 {
        Some(format!("displacement bound {displacement_bound} ≥ 1/3"))
    } else {
        None
    };
    CertificateReport {
        modulus,
        radicand_bound,
        displacement_bound,
        margin,
        passed: reason.is_none(),
        reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn apply_examples() {
        let l = c(50.0, 0.0);
        assert_eq!(apply(l, c(1.0, 0.0)), c(1.0, 0.0));
        assert_eq!(apply(l, c(-1.0, 0.0)), c(1.0, 0.0));
        assert_relative_eq!(apply(l, c(4.0 / 3.0, 0.0)).re, 184.0 / 9.0, max_relative = 1e-14);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(derivative(c(50.0, 0.0), c(1.0, 0.0)), c(50.0, 0.0));
        assert_eq!(derivative(c(50.0, 0.0), c(-1.0, 0.0)), c(-50.0, 0.0));
        let d = derivative(c(40.0, 30.0), c(2.0 / 3.0, 0.0));
        assert_relative_eq!(d.re, 80.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(d.im, 20.0, max_relative = 1e-15);
    }

    #[test]
    fn spherical_derivative_examples() {
        assert_relative_eq!(spherical_derivative(c(50.0, 0.0), c(1.0, 0.0)), 50.0);
        assert_relative_eq!(spherical_derivative(c(50.0, 0.0), c(-1.0, 0.0)), 50.0);
        assert_relative_eq!(apply(c(50.0, 0.0), c(0.9, 0.0)).re, -3.75, max_relative = 1e-14);
        assert_relative_eq!(
            spherical_derivative(c(50.0, 0.0), c(0.9, 0.0)),
            45.0 * 1.81 / 15.0625,
            max_relative = 1e-14
        );
    }

    #[test]
    fn inverse_branch_examples() {
        let l = c(50.0, 0.0);
        assert_eq!(inverse_branch(l, c(1.0, 0.0), BranchLabel::Zero).unwrap(), c(1.0, 0.0));
        assert_eq!(inverse_branch(l, c(1.0, 0.0), BranchLabel::One).unwrap(), c(-1.0, 0.0));
        let z = inverse_branch(l, c(1.3, 0.0), BranchLabel::Zero).unwrap();
        assert_relative_eq!(z.re, 1.012f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(apply(l, z).re, 1.3, max_relative = 1e-13);
        assert!(matches!(inverse_branch(l, c(2.0, 0.0), BranchLabel::Zero), Err(Error::Domain(_))));
        assert!(inverse_branch(l, c(f64::NAN, 0.0), BranchLabel::Zero).is_err());
    }

    #[test]
    fn certificate_examples() {
        let r = trapping_certificate(c(50.0, 0.0));
        assert!(r.passed);
        assert_relative_eq!(r.radicand_bound, 14.0 / 150.0, max_relative = 1e-15);
        let r = trapping_certificate(Complex64::from_polar(40.000001, 0.7));
        assert!(r.passed);
        assert_relative_eq!(r.radicand_bound, 14.0 / 120.0, max_relative = 1e-6);
        let r = trapping_certificate(c(10.0, 0.0));
        assert!(!r.passed);
        assert!(r.reason.unwrap().contains("modulus"));
        for l in [c(41.0, 0.0), c(40.0, 30.0), c(0.0, 100.0)] {
            let r = trapping_certificate(l);
            assert!(r.passed && r.margin > 0.0);
            assert_relative_eq!(r.radicand_bound, 14.0 / (3.0 * l.norm()), max_relative = 1e-15);
        }
    }

    fn arb_param() -> impl Strategy<Value = Complex64> {
        (40.0001f64..200.0, 0.0f64..std::f64::consts::TAU).prop_map(|(m, a)| Complex64::from_polar(m, a))
    }

    fn arb_disk(radius: f64) -> impl Strategy<Value = Complex64> {
        (0.0f64..radius, 0.0f64..std::f64::consts::TAU).prop_map(|(m, a)| Complex64::from_polar(m, a))
    }

    fn arb_label() -> impl Strategy<Value = BranchLabel> {
        prop_oneof![Just(BranchLabel::Zero), Just(BranchLabel::One)]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn round_trip(l in arb_param(), w in arb_disk(1.999_999), label in arb_label()) {
            let z = inverse_branch(l, w, label).unwrap();
            prop_assert!((apply(l, z) - w).norm() <= 1e-12 * (1.0 + w.norm()));
        }

        #[test]
        fn branches_land_in_their_disk(l in arb_param(), offset in arb_disk(TRAP_RADIUS), centre in arb_label(), label in arb_label()) {
            let w = centre.center() + offset;
            let z = inverse_branch(l, w, label).unwrap();
            prop_assert!((z - label.center()).norm() < TRAP_RADIUS);
        }

        #[test]
        fn expansion_floor(l in arb_param(), offset in arb_disk(TRAP_RADIUS), centre in arb_label()) {
            let z = centre.center() + offset;
            prop_assert!(derivative(l, z).norm() >= (2.0 / 3.0) * l.norm() - 1e-12);
            prop_assert!(derivative(l, z).norm() > 26.0);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = 1e-6;
        for (l, z) in [(c(50.0, 0.0), c(0.9, 0.1)), (c(40.0, 30.0), c(-1.1, 0.2)), (c(0.0, 100.0), c(1.2, -0.3))] {
            let fd = (apply(l, z + h) - apply(l, z - h)) / (2.0 * h);
            let exact = derivative(l, z);
            assert!((fd - exact).norm() / exact.norm() <= 1e-6);
        }
    }

    #[test]
    fn spherical_to_planar_ratio_bracket() {
        // z and f(z) both in closure(U): pull back a point of closure(U) so the
        // image stays there too.
        let lo = (1.0 + (2.0f64 / 3.0).powi(2)) / (1.0 + (4.0f64 / 3.0).powi(2));
        let hi = 1.0 / lo;
        for (l, w) in [(c(50.0, 0.0), c(1.3, 0.0)), (c(41.0, 5.0), c(-0.7, 0.1)), (c(0.0, 90.0), c(1.0, 0.33))] {
            for label in [BranchLabel::Zero, BranchLabel::One] {
                let z = inverse_branch(l, w, label).unwrap();
                let ratio = spherical_derivative(l, z) / derivative(l, z).norm();
                assert!(ratio >= lo - 1e-12 && ratio <= hi + 1e-12, "{ratio}");
            }
        }
    }
}
