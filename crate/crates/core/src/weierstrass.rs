//! Weierstrass zeta and wp functions by direct lattice summation.
//!
//! For the lattice Omega = {2 m omega1 + 2 n omega3}, zeta and wp are
//! summed over the box |m|, |n| <= B (B = 40) in the Eisenstein-style
//! regularization, and the omitted exterior is restored *exactly*
//! through the Laurent tail
//!
//! ```text
//! zeta(z) = zeta_box(z) - sum_{k odd >= 3} z^k S_{k+1}
//! wp(z)   = wp_box(z)   + sum_{k even >= 2} (k+1) z^k S_{k+2}
//! ```
//!
//! where S_m = G_m - sum_box omega^{-m} is the part of the Eisenstein
//! series G_m = sum_{omega != 0} omega^{-m} beyond the box, and G_m
//! itself comes from its Lambert series. This route is deliberately
//! independent of the theta-function code so the two can cross-check
//! each other.
//!
//! Arguments are reduced to the fundamental cell first (using the
//! quasi-periods eta1, eta3 for zeta), so any finite z is accepted as
//! long as the cell itself is not too anisotropic for the box to
//! enclose it with margin; otherwise a domain error is returned.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Half-width of the lattice summation box.
const BOX: i64 = 40;
/// Highest Laurent power restored by the tail.
const TAIL_MAX_K: usize = 30;
/// Largest |z| relative to the box boundary accepted after reduction.
const MAX_RADIUS_FRACTION: f64 = 0.2;
/// Pole guard: minimum distance from z to the lattice, relative to the
/// shorter lattice generator.
const POLE_GUARD: f64 = 1e-10;

/// A period lattice spanned by 2 omega1 and 2 omega3.
#[derive(Debug, Clone, Copy)]
pub struct Lattice {
    omega1: Complex64,
    omega3: Complex64,
}

impl Lattice {
    /// Builds a lattice from its half-periods; Im(omega3/omega1) must
    /// be positive.
    pub fn new(omega1: Complex64, omega3: Complex64) -> Result<Self> {
        if !omega1.is_finite() || !omega3.is_finite() {
            return Err(Error::NonFiniteInput("lattice half-periods"));
        }
        let ratio = omega3 / omega1;
        if !(ratio.im > 0.0) {
            return Err(Error::InvalidModularParam(format!(
                "omega3/omega1 = {ratio} must have positive imaginary part"
            )));
        }
        Ok(Self { omega1, omega3 })
    }

    /// Rectangular lattice with half-periods (w1, i w3) for real w1, w3.
    pub fn rectangular(w1: f64, w3: f64) -> Result<Self> {
        Self::new(Complex64::new(w1, 0.0), Complex64::new(0.0, w3))
    }

    pub fn omega1(&self) -> Complex64 {
        self.omega1
    }

    pub fn omega3(&self) -> Complex64 {
        self.omega3
    }

    /// Lattice coordinates of z: solves z = a (2 omega1) + b (2 omega3)
    /// for real a, b.
    fn coords(&self, z: Complex64) -> (f64, f64) {
        let (g1, g3) = (2.0 * self.omega1, 2.0 * self.omega3);
        let det = g1.re * g3.im - g1.im * g3.re;
        let a = (z.re * g3.im - z.im * g3.re) / det;
        let b = (g1.re * z.im - g1.im * z.re) / det;
        (a, b)
    }

    /// Quasi-period eta1 = zeta(omega1) from the Lambert series of the
    /// weight-2 Eisenstein series.
    pub fn eta1(&self) -> Result<Complex64> {
        let tau = self.omega3 / self.omega1;
        let sum = lambert_sum(tau, 1)?;
        Ok(PI * PI / self.omega1 * (1.0 / 12.0 - 2.0 * sum))
    }

    /// Quasi-period eta3 = zeta(omega3), via the Legendre relation
    /// eta1 omega3 - eta3 omega1 = i pi / 2.
    pub fn eta3(&self) -> Result<Complex64> {
        let eta1 = self.eta1()?;
        Ok((eta1 * self.omega3 - Complex64::i() * PI / 2.0) / self.omega1)
    }

    /// Weierstrass zeta(z).
    pub fn zeta(&self, z: Complex64) -> Result<Complex64> {
        let (z0, m, n) = self.reduce(z)?;
        let shift = 2.0 * m * self.eta1()? + 2.0 * n * self.eta3()?;
        Ok(self.zeta_reduced(z0)? + shift)
    }

    /// Weierstrass wp(z).
    pub fn wp(&self, z: Complex64) -> Result<Complex64> {
        let (z0, _, _) = self.reduce(z)?;
        self.wp_reduced(z0)
    }

    /// Shifts z by lattice vectors into the centered fundamental cell;
    /// returns the reduced point and the (real-valued) integer shifts.
    fn reduce(&self, z: Complex64) -> Result<(Complex64, f64, f64)> {
        if !z.is_finite() {
            return Err(Error::NonFiniteInput("weierstrass argument z"));
        }
        let (a, b) = self.coords(z);
        let (m, n) = (a.round(), b.round());
        let z0 = z - 2.0 * m * self.omega1 - 2.0 * n * self.omega3;
        let short = self.omega1.norm().min(self.omega3.norm());
        if z0.norm() < POLE_GUARD * short {
            return Err(Error::PoleProximity {
                distance: z0.norm(),
                guard: POLE_GUARD * short,
            });
        }
        // The tail expansion needs z0 well inside the summation box.
        let boundary = 2.0 * BOX as f64 * short;
        if z0.norm() > MAX_RADIUS_FRACTION * boundary {
            return Err(Error::DomainViolation(format!(
                "reduced |z| = {:.3e} exceeds {:.0}% of the summation box {:.3e}; \
                 lattice too anisotropic for reliable summation",
                z0.norm(),
                MAX_RADIUS_FRACTION * 100.0,
                boundary
            )));
        }
        Ok((z0, m, n))
    }

    fn zeta_reduced(&self, z: Complex64) -> Result<Complex64> {
        let mut sum = z.inv();
        for (m, n) in box_points() {
            let w = 2.0 * (m as f64) * self.omega1 + 2.0 * (n as f64) * self.omega3;
            sum += (z - w).inv() + w.inv() + z / (w * w);
        }
        // Exterior restored through z^k S_{k+1}, odd k >= 3.
        let s = self.exterior_sums()?;
        let mut zk = z * z * z;
        for k in (3..=TAIL_MAX_K).step_by(2) {
            sum -= zk * s[k + 1];
            zk *= z * z;
        }
        Ok(sum)
    }

    fn wp_reduced(&self, z: Complex64) -> Result<Complex64> {
        let mut sum = (z * z).inv();
        for (m, n) in box_points() {
            let w = 2.0 * (m as f64) * self.omega1 + 2.0 * (n as f64) * self.omega3;
            let d = z - w;
            sum += (d * d).inv() - (w * w).inv();
        }
        let s = self.exterior_sums()?;
        let mut zk = z * z;
        for k in (2..=TAIL_MAX_K).step_by(2) {
            sum += (k as f64 + 1.0) * zk * s[k + 2];
            zk *= z * z;
        }
        Ok(sum)
    }

    /// S_m = G_m - box_m for even m in 4..=TAIL_MAX_K+2, indexed by m.
    fn exterior_sums(&self) -> Result<Vec<Complex64>> {
        let mut s = vec![Complex64::new(0.0, 0.0); TAIL_MAX_K + 3];
        let tau = self.omega3 / self.omega1;
        for m in (4..=TAIL_MAX_K + 2).step_by(2) {
            let lam = lambert_sum(tau, m as i32 - 1)?;
            // (2 pi i)^m / (m-1)!
            let mut fact = 1.0;
            for j in 1..m {
                fact *= j as f64;
            }
            let g_m = (2.0 * self.omega1).powi(-(m as i32))
                * (2.0 * riemann_zeta_even(m)
                    + 2.0 * (2.0 * Complex64::i() * PI).powi(m as i32) / fact * lam);
            // Box part of the same sum.
            let mut box_m = Complex64::new(0.0, 0.0);
            for (mm, nn) in box_points() {
                let w = 2.0 * (mm as f64) * self.omega1 + 2.0 * (nn as f64) * self.omega3;
                box_m += w.powi(-(m as i32));
            }
            let diff = g_m - box_m;
            // G_m and box_m agree to many digits once the true exterior
            // drops below f64 cancellation noise; keeping the noisy
            // difference would be amplified by z^k in the tail, so clamp
            // it to zero instead (the discarded true value is smaller
            // still).
            if diff.norm() > 1e-14 * g_m.norm().max(box_m.norm()) {
                s[m] = diff;
            }
        }
        Ok(s)
    }
}

const SERIES_CAP: usize = 4000;

/// Lambert series sum_{n>=1} n^p q^{2n} / (1 - q^{2n}) for q^2 built
/// from tau; errors out instead of silently truncating.
fn lambert_sum(tau: Complex64, p: i32) -> Result<Complex64> {
    let q2 = (2.0 * Complex64::i() * PI * tau).exp();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut qn = q2;
    for n in 1..SERIES_CAP {
        let term = (n as f64).powi(p) * qn / (Complex64::new(1.0, 0.0) - qn);
        sum += term;
        if term.norm() < 1e-18 * sum.norm().max(1e-3) {
            return Ok(sum);
        }
        qn *= q2;
    }
    Err(Error::SeriesDivergence { terms: SERIES_CAP })
}

/// All (m, n) in the box except the origin.
fn box_points() -> impl Iterator<Item = (i64, i64)> {
    (-BOX..=BOX).flat_map(|m| {
        (-BOX..=BOX).filter_map(move |n| if m == 0 && n == 0 { None } else { Some((m, n)) })
    })
}

/// Riemann zeta at even integer m >= 4, by Euler-Maclaurin summation.
fn riemann_zeta_even(m: usize) -> f64 {
    let nf = 256.0_f64;
    let mf = m as f64;
    let mut sum = 0.0;
    // Ascending terms: accumulate small-to-large for full f64 accuracy.
    for n in (1..256).rev() {
        sum += (n as f64).powi(-(m as i32));
    }
    // Tail from n = 256 with three correction terms.
    sum + nf.powi(1 - m as i32) / (mf - 1.0)
        + 0.5 * nf.powi(-(m as i32))
        + mf / 12.0 * nf.powi(-(m as i32) - 1)
        - mf * (mf + 1.0) * (mf + 2.0) / 720.0 * nf.powi(-(m as i32) - 3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modular::ModularParam;
    use crate::theta;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zeta_values_known() {
        assert_relative_eq!(
            riemann_zeta_even(4),
            1.082_323_233_711_138_2,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            riemann_zeta_even(6),
            1.017_343_061_984_449_2,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            riemann_zeta_even(8),
            1.004_077_356_197_944_3,
            max_relative = 1e-15
        );
    }

    #[test]
    fn wp_is_even_zeta_is_odd_and_consistent() {
        let lat = Lattice::rectangular(1.3, 0.9).unwrap();
        let z = c(0.31, 0.17);
        let wp = lat.wp(z).unwrap();
        let wp_neg = lat.wp(-z).unwrap();
        assert_relative_eq!(wp.re, wp_neg.re, max_relative = 1e-12);
        assert_relative_eq!(wp.im, wp_neg.im, max_relative = 1e-12);
        let ze = lat.zeta(z).unwrap();
        let ze_neg = lat.zeta(-z).unwrap();
        assert_relative_eq!(ze.re, -ze_neg.re, max_relative = 1e-12);
        assert_relative_eq!(ze.im, -ze_neg.im, max_relative = 1e-12);
        // wp = -zeta' by central differences.
        let h = 1e-6;
        let fd = -(lat.zeta(z + h).unwrap() - lat.zeta(z - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(fd.re, wp.re, max_relative = 1e-8);
        assert_relative_eq!(fd.im, wp.im, max_relative = 1e-8);
    }

    #[test]
    fn periodicity_and_quasi_periodicity() {
        let lat = Lattice::rectangular(1.0, 1.4).unwrap();
        let z = c(0.4, 0.3);
        let wp = lat.wp(z).unwrap();
        let wp_shift = lat.wp(z + 2.0 * lat.omega1() + 4.0 * lat.omega3()).unwrap();
        assert_relative_eq!(wp.re, wp_shift.re, max_relative = 1e-11);
        assert_relative_eq!(wp.im, wp_shift.im, max_relative = 1e-11, epsilon = 1e-12);
        let ze = lat.zeta(z).unwrap();
        let ze_shift = lat.zeta(z + 2.0 * lat.omega1()).unwrap();
        let want = ze + 2.0 * lat.eta1().unwrap();
        assert_relative_eq!(ze_shift.re, want.re, max_relative = 1e-11);
        assert_relative_eq!(ze_shift.im, want.im, max_relative = 1e-11, epsilon = 1e-12);
    }

    #[test]
    fn legendre_relation_holds() {
        let lat = Lattice::new(c(1.1, 0.1), c(-0.2, 0.8)).unwrap();
        // Independent check of eta3: directly as zeta(omega3) via the
        // reduction path (omega3 is half a lattice vector, not on it).
        let direct = lat.zeta(lat.omega3()).unwrap();
        let from_legendre = lat.eta3().unwrap();
        assert_relative_eq!(direct.re, from_legendre.re, max_relative = 1e-10);
        assert_relative_eq!(direct.im, from_legendre.im, max_relative = 1e-10);
    }

    #[test]
    fn addition_theorem_connects_zeta_and_wp() {
        // (zeta(z+u) - zeta(z) - zeta(u))^2 = wp(z+u) + wp(z) + wp(u).
        let lat = Lattice::rectangular(0.9, 1.2).unwrap();
        let z = c(0.25, 0.31);
        let u = c(-0.4, 0.12);
        let lhs = {
            let d = lat.zeta(z + u).unwrap() - lat.zeta(z).unwrap() - lat.zeta(u).unwrap();
            d * d
        };
        let rhs = lat.wp(z + u).unwrap() + lat.wp(z).unwrap() + lat.wp(u).unwrap();
        assert_relative_eq!(lhs.re, rhs.re, max_relative = 1e-10);
        assert_relative_eq!(lhs.im, rhs.im, max_relative = 1e-10, epsilon = 1e-10);
    }

    #[test]
    fn zeta_matches_theta_log_derivative_route() {
        // zeta(x) = eta1 x / omega1 + (1/(2 omega1)) theta_1'/theta_1
        // at v = x/(2 omega1), tau = omega3/omega1: equivalently the
        // drift function identity A = zeta(x) - eta1 x / omega1.
        let (r, cal_n, t_rem) = (1.0, 3.0, 0.6);
        let lat = Lattice::new(c(PI * r, 0.0), c(0.0, cal_n * t_rem / (2.0 * r))).unwrap();
        for x in [0.4, 1.5, 2.8] {
            let a = theta::a_func(cal_n, t_rem, x, r).unwrap();
            let ze = lat.zeta(c(x, 0.0)).unwrap();
            let eta1 = lat.eta1().unwrap();
            let want = ze - eta1 * x / (PI * r);
            assert_relative_eq!(a, want.re, max_relative = 1e-10);
            assert!(want.im.abs() < 1e-12);
        }
        // The lattice quasi-period agrees with the q-series route.
        let q_series = theta::eta1(cal_n, t_rem, r).unwrap();
        assert_relative_eq!(lat.eta1().unwrap().re, q_series, max_relative = 1e-12);
    }

    #[test]
    fn guards_reject_poles_and_anisotropy() {
        let lat = Lattice::rectangular(1.0, 1.0).unwrap();
        assert!(matches!(
            lat.zeta(c(2.0, 2.0)),
            Err(Error::PoleProximity { .. })
        ));
        // Extremely anisotropic cell: reduced z can exceed the box margin.
        let thin = Lattice::rectangular(1.0, 1e4).unwrap();
        assert!(matches!(
            thin.wp(c(0.0, 4000.0)),
            Err(Error::DomainViolation(_))
        ));
    }

    #[test]
    fn modular_param_independence_of_theta_comparison() {
        // Same zeta from two equivalent lattices (scale invariance:
        // zeta(c z; c L) = zeta(z; L) / c).
        let lat = Lattice::rectangular(1.0, 0.8).unwrap();
        let scaled = Lattice::rectangular(2.0, 1.6).unwrap();
        let z = c(0.3, 0.2);
        let a = lat.zeta(z).unwrap();
        let b = scaled.zeta(2.0 * z).unwrap();
        assert_relative_eq!(a.re, 2.0 * b.re, max_relative = 1e-11);
        assert_relative_eq!(a.im, 2.0 * b.im, max_relative = 1e-11);
        let _ = ModularParam::imaginary(0.8).unwrap();
    }
}
