//! Theta-function determinant bases and the product factorization of
//! their determinants.
//!
//! Each family provides n basis functions built from theta_1 at the
//! enlarged modulus N_R tau,
//!
//! ```text
//! f_j(z) = e^{i J z / r} theta_1(J tau + N z/(2 pi r) + s; N tau)
//!          -/+ (z -> -z partner)        (single term for family A)
//! ```
//!
//! with J = J_R(j) and shift s from [`Family`]. Expanding the sine
//! series of theta_1 turns each half-term into q-powers
//! q^{N(n-1/2)^2 +- (2n-1)J} whose smallest exponent is N/4 - J; the
//! *scaled* basis divides that out, leaving series with non-negative
//! exponents only. The scaled form is exact (no truncation of the
//! scaling) and stays O(1) for arbitrarily large Im tau, which is what
//! the martingale evaluations need at long horizons.
//!
//! The determinant det[f_j(u_k)] factorizes into a configuration-free
//! constant k0, an optional center-of-mass factor (family A), one
//! single-variable factor k1 per point, and pair factors k2; this
//! module implements both sides of that identity.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::Result;
use crate::family::{Family, PairCombination};
use crate::linalg;
use crate::modular::ModularParam;
use crate::theta::{self, ThetaKind};

/// q-power with arbitrary real exponent: exp(i pi tau e).
fn q_pow(m: &ModularParam, e: f64) -> Complex64 {
    (Complex64::i() * PI * m.tau() * e).exp()
}

/// i^k for integer k of either sign.
fn i_pow(k: i64) -> Complex64 {
    match k.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Exponent of the basis scale: s_j = q^{N/4 - J(j)}, so
/// f_j = q^{scale_exponent} F_j with F_j the scaled basis element.
pub fn scale_exponent(family: Family, n: usize, j: usize) -> f64 {
    family.cal_n(n) as f64 / 4.0 - family.j_index(j)
}

/// One scaled half-term: q^{J - N/4} e^{i J z / r}
/// theta_1(J tau + N z/(2 pi r) + shift; N tau), summed with
/// non-negative q-exponents e+(n) = n (N(n-1) + 2J) and
/// e-(n) = (n-1)(N n - 2J).
fn scaled_half(
    cal_n: f64,
    j_idx: f64,
    z: f64,
    shift: f64,
    m: &ModularParam,
    r: f64,
) -> Result<Complex64> {
    let a = cal_n * z / (2.0 * PI * r) + shift;
    let e_plus = (Complex64::i() * PI * a).exp();
    let e_minus = e_plus.inv();
    let phase = (Complex64::i() * j_idx * z / r).exp();
    let mut odd_plus = e_plus; // E^{2n-1}
    let mut odd_minus = e_minus;
    let step_plus = e_plus * e_plus;
    let step_minus = e_minus * e_minus;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut streak = 0usize;
    for n in 1..=theta::SERIES_MAX_TERMS {
        let nf = n as f64;
        let ep = nf * (cal_n * (nf - 1.0) + 2.0 * j_idx);
        let em = (nf - 1.0) * (cal_n * nf - 2.0 * j_idx);
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        let term = sign * (q_pow(m, ep) * odd_plus - q_pow(m, em) * odd_minus);
        sum += term;
        let decayed = q_pow(m, ep.min(em)).norm();
        if decayed <= theta::SERIES_REL_TOL * sum.norm().max(1e-30) {
            streak += 1;
            if streak >= theta::SERIES_CONSECUTIVE {
                break;
            }
        } else {
            streak = 0;
        }
        odd_plus *= step_plus;
        odd_minus *= step_minus;
        if n == theta::SERIES_MAX_TERMS {
            return Err(crate::error::Error::SeriesDivergence { terms: n });
        }
    }
    Ok(phase * sum / Complex64::i())
}

/// Scaled basis element F_j(z) = f_j(z) q^{J - N/4}; j is 1-based.
pub fn scaled_basis_f(
    family: Family,
    n: usize,
    j: usize,
    z: f64,
    m: &ModularParam,
    r: f64,
) -> Result<Complex64> {
    let cal_n = family.cal_n(n) as f64;
    let j_idx = family.j_index(j);
    let shift = family.basis_shift(n);
    let a = scaled_half(cal_n, j_idx, z, shift, m, r)?;
    match family.combination() {
        PairCombination::Single => Ok(a),
        PairCombination::Difference => {
            let b = scaled_half(cal_n, j_idx, -z, shift, m, r)?;
            Ok(a - b)
        }
        PairCombination::Sum => {
            let b = scaled_half(cal_n, j_idx, -z, shift, m, r)?;
            Ok(a + b)
        }
    }
}

/// Raw basis element f_j(z); overflows for very large Im tau, where the
/// scaled form should be used instead.
pub fn basis_f(
    family: Family,
    n: usize,
    j: usize,
    z: f64,
    m: &ModularParam,
    r: f64,
) -> Result<Complex64> {
    let scale = q_pow(m, scale_exponent(family, n, j));
    Ok(scale * scaled_basis_f(family, n, j, z, m, r)?)
}

/// Configuration-independent factor k0 of the determinant identity.
pub fn k0(family: Family, n: usize, m: &ModularParam) -> Result<Complex64> {
    let ni = n as i64;
    let nf = n as f64;
    let q0_1 = theta::euler_q0(m)?;
    Ok(match family {
        Family::A => {
            let ipow = -(ni - 1) * (3 * ni + 1 - if n % 2 == 0 { 1 } else { -1 }) / 2;
            i_pow(ipow)
                * q_pow(m, -(nf - 1.0) * (3.0 * nf - 2.0) / 8.0)
                * q0_1.powi((-(ni - 1) * (ni - 2) / 2) as i32)
        }
        Family::B => 2.0 * q_pow(m, -nf * (nf - 1.0) / 4.0) * q0_1.powi((-ni * (ni - 1)) as i32),
        Family::BDual => {
            let q0_2 = theta::euler_q0(&m.scaled(2.0)?)?;
            2.0 * q_pow(m, -nf * (nf - 1.0) / 4.0)
                * q0_1.powi((-(ni - 1) * (ni - 1)) as i32)
                * q0_2.powi((-(ni - 1)) as i32)
        }
        Family::C => i_pow(-ni) * q_pow(m, -nf * nf / 4.0) * q0_1.powi((-ni * (ni - 1)) as i32),
        Family::CDual => {
            let q0_h = theta::euler_q0(&m.scaled(0.5)?)?;
            i_pow(-ni)
                * q_pow(m, -nf * (2.0 * nf - 1.0) / 8.0)
                * q0_1.powi((-(ni - 1) * (ni - 1)) as i32)
                * q0_h.powi((-(ni - 1)) as i32)
        }
        Family::BC => {
            let q0_2 = theta::euler_q0(&m.scaled(2.0)?)?;
            i_pow(-ni)
                * q_pow(m, -nf * (nf + 1.0) / 4.0)
                * q0_1.powi((-ni * (ni - 1)) as i32)
                * q0_2.powi((-ni) as i32)
        }
        Family::D => 4.0 * q_pow(m, -nf * (nf - 1.0) / 4.0) * q0_1.powi((-ni * (ni - 2)) as i32),
    })
}

/// Single-variable factor k1 of the determinant identity.
pub fn k1(family: Family, u: f64, m: &ModularParam, r: f64) -> Result<Complex64> {
    let tp = 2.0 * PI * r;
    let one = Complex64::new(1.0, 0.0);
    Ok(match family {
        Family::A | Family::D => one,
        Family::B => theta::theta(ThetaKind::One, Complex64::new(u / tp, 0.0), m)?,
        Family::BDual => theta::theta(
            ThetaKind::One,
            Complex64::new(u / (PI * r), 0.0),
            &m.scaled(2.0)?,
        )?,
        Family::C => theta::theta(ThetaKind::One, Complex64::new(u / (PI * r), 0.0), m)?,
        Family::CDual => {
            theta::theta(ThetaKind::One, Complex64::new(u / tp, 0.0), &m.scaled(0.5)?)?
        }
        Family::BC => {
            theta::theta(ThetaKind::One, Complex64::new(u / tp, 0.0), m)?
                * theta::theta(
                    ThetaKind::Zero,
                    Complex64::new(u / (PI * r), 0.0),
                    &m.scaled(2.0)?,
                )?
        }
    })
}

/// Pair factor k2 of the determinant identity.
pub fn k2(family: Family, u: f64, v: f64, m: &ModularParam, r: f64) -> Result<Complex64> {
    let tp = 2.0 * PI * r;
    let diff = theta::theta(ThetaKind::One, Complex64::new((u - v) / tp, 0.0), m)?;
    if family == Family::A {
        return Ok(diff);
    }
    Ok(diff * theta::theta(ThetaKind::One, Complex64::new((u + v) / tp, 0.0), m)?)
}

/// Center-of-mass factor: theta_1 at the summed configuration for
/// family A, one otherwise.
pub fn k_sym(family: Family, n: usize, u: &[f64], m: &ModularParam, r: f64) -> Result<Complex64> {
    if family != Family::A {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let total: f64 = u.iter().sum();
    let arg = (total - Family::kappa(n, r)) / (2.0 * PI * r);
    theta::theta(ThetaKind::One, Complex64::new(arg, 0.0), m)
}

/// log k1, stable at moduli where k1 itself under- or overflows.
pub fn log_k1(family: Family, u: f64, m: &ModularParam, r: f64) -> Result<Complex64> {
    let tp = 2.0 * PI * r;
    Ok(match family {
        Family::A | Family::D => Complex64::new(0.0, 0.0),
        Family::B => theta::log_theta(ThetaKind::One, u / tp, m)?,
        Family::BDual => theta::log_theta(ThetaKind::One, u / (PI * r), &m.scaled(2.0)?)?,
        Family::C => theta::log_theta(ThetaKind::One, u / (PI * r), m)?,
        Family::CDual => theta::log_theta(ThetaKind::One, u / tp, &m.scaled(0.5)?)?,
        Family::BC => {
            theta::log_theta(ThetaKind::One, u / tp, m)?
                + theta::log_theta(ThetaKind::Zero, u / (PI * r), &m.scaled(2.0)?)?
        }
    })
}

/// log k2 (see [`log_k1`]).
pub fn log_k2(family: Family, u: f64, v: f64, m: &ModularParam, r: f64) -> Result<Complex64> {
    let tp = 2.0 * PI * r;
    let diff = theta::log_theta(ThetaKind::One, (u - v) / tp, m)?;
    if family == Family::A {
        return Ok(diff);
    }
    Ok(diff + theta::log_theta(ThetaKind::One, (u + v) / tp, m)?)
}

/// log k_sym (see [`log_k1`]).
pub fn log_k_sym(
    family: Family,
    n: usize,
    u: &[f64],
    m: &ModularParam,
    r: f64,
) -> Result<Complex64> {
    if family != Family::A {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let total: f64 = u.iter().sum();
    let arg = (total - Family::kappa(n, r)) / (2.0 * PI * r);
    theta::log_theta(ThetaKind::One, arg, m)
}

/// det[f_j(u_k)] evaluated literally via LU.
pub fn basis_det(
    family: Family,
    n: usize,
    u: &[f64],
    m: &ModularParam,
    r: f64,
) -> Result<Complex64> {
    assert_eq!(u.len(), n);
    let mut a = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 1..=n {
        for (k, &uk) in u.iter().enumerate() {
            a[(j - 1) * n + k] = basis_f(family, n, j, uk, m, r)?;
        }
    }
    linalg::det(&a, n)
}

/// The same determinant through the product factorization
/// k0 k_sym prod_l k1(u_l) prod_{j<k} k2(u_k, u_j).
pub fn factorized_det(
    family: Family,
    n: usize,
    u: &[f64],
    m: &ModularParam,
    r: f64,
) -> Result<Complex64> {
    assert_eq!(u.len(), n);
    let mut d = k0(family, n, m)? * k_sym(family, n, u, m, r)?;
    for &ul in u {
        d *= k1(family, ul, m, r)?;
    }
    for k in 1..n {
        for j in 0..k {
            d *= k2(family, u[k], u[j], m, r)?;
        }
    }
    Ok(d)
}
