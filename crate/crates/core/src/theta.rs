//! Jacobi theta functions, the Dedekind eta function, and the elliptic
//! drift function built from the logarithmic derivative of theta_1.
//!
//! Convention: the nome is q = exp(i pi tau), Im(tau) > 0, and for
//! v in C the four kinds are
//!
//! ```text
//! theta_0(v; tau) = 1 + 2 sum_{n>=1} (-1)^n q^{n^2} cos(2 n pi v)
//! theta_1(v; tau) = 2 sum_{n>=1} (-1)^{n-1} q^{(n-1/2)^2} sin((2n-1) pi v)
//! theta_2(v; tau) = 2 sum_{n>=1} q^{(n-1/2)^2} cos((2n-1) pi v)
//! theta_3(v; tau) = 1 + 2 sum_{n>=1} q^{n^2} cos(2 n pi v)
//! ```
//!
//! Evaluation strategy: the defining series is summed directly when
//! Im(tau) >= 1/2. Below that the series converges too slowly, so the
//! imaginary modular transformation tau -> -1/tau is applied; folding
//! its Gaussian prefactor into the series term-by-term turns each kind
//! into a sum of shifted Gaussians
//!
//! ```text
//! theta_1(v; tau) = e^{i pi/4} tau^{-1/2} sum_n (-1)^{n+1} E(v - n + 1/2)
//! theta_0(v; tau) = e^{i pi/4} tau^{-1/2} sum_n           E(v - n + 1/2)
//! theta_2(v; tau) = e^{i pi/4} tau^{-1/2} sum_n (-1)^n    E(v - n)
//! theta_3(v; tau) = e^{i pi/4} tau^{-1/2} sum_n           E(v - n)
//! ```
//!
//! with E(w) = exp(-(i pi / tau) w^2), which keeps every intermediate
//! on the scale of the result. Both branches stop when three
//! consecutive terms fall below 1e-16 of the running partial sum and
//! fail with [`Error::SeriesDivergence`] at 10^4 terms.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::modular::ModularParam;

/// Relative size at which series terms count as negligible.
pub const SERIES_REL_TOL: f64 = 1e-16;
/// Number of consecutive negligible terms required to stop.
pub const SERIES_CONSECUTIVE: usize = 3;
/// Hard cap on series terms before reporting divergence.
pub const SERIES_MAX_TERMS: usize = 10_000;

/// Default pole guard of [`a_func`], as a fraction of the period 2 pi r.
pub const A_POLE_GUARD: f64 = 1e-12;

/// The four theta kinds; `Zero` is the function often written theta_4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaKind {
    Zero,
    One,
    Two,
    Three,
}

/// Tracks the stop rule: three consecutive small terms end the sum.
pub(crate) struct Convergence {
    small_streak: usize,
    terms: usize,
}

impl Convergence {
    pub(crate) fn new() -> Self {
        Self {
            small_streak: 0,
            terms: 0,
        }
    }

    /// Feeds one term; returns true when the series may stop.
    pub(crate) fn update(&mut self, term_norm: f64, partial_norm: f64) -> Result<bool> {
        self.terms += 1;
        if term_norm <= SERIES_REL_TOL * partial_norm {
            self.small_streak += 1;
            if self.small_streak >= SERIES_CONSECUTIVE {
                return Ok(true);
            }
        } else {
            self.small_streak = 0;
        }
        if self.terms >= SERIES_MAX_TERMS {
            return Err(Error::SeriesDivergence { terms: self.terms });
        }
        Ok(false)
    }
}

/// Value and first two v-derivatives, summed by the defining series.
fn jet_direct(kind: ThetaKind, v: Complex64, m: &ModularParam) -> Result<[Complex64; 3]> {
    let q = m.nome();
    let q2 = q * q;
    let mut jet = [Complex64::new(0.0, 0.0); 3];
    if matches!(kind, ThetaKind::Zero | ThetaKind::Three) {
        jet[0] = Complex64::new(1.0, 0.0);
    }
    // Running q-power: q^{(n-1/2)^2} for half-integer kinds, q^{n^2} for
    // integer kinds, advanced multiplicatively.
    let half = matches!(kind, ThetaKind::One | ThetaKind::Two);
    let mut c = if half {
        (Complex64::i() * PI * m.tau() * 0.25).exp() // q^{1/4}
    } else {
        q
    };
    let mut step = if half { q2 } else { q2 * q }; // c_{n+1} = c_n * step, step *= q^2
    let mut conv = Convergence::new();
    let mut n: u32 = 1;
    loop {
        // Angular frequency of the n-th term.
        let k = if half {
            (2 * n - 1) as f64
        } else {
            2.0 * n as f64
        };
        let arg = k * PI * v;
        let (s, co) = (arg.sin(), arg.cos());
        let sign = match kind {
            ThetaKind::One if n % 2 == 1 => 1.0,
            ThetaKind::One => -1.0,
            ThetaKind::Zero if n % 2 == 1 => -1.0,
            ThetaKind::Zero => 1.0,
            _ => 1.0,
        };
        let amp = 2.0 * sign * c;
        let (t0, t1, t2) = if matches!(kind, ThetaKind::One) {
            (amp * s, amp * (k * PI) * co, -amp * (k * PI) * (k * PI) * s)
        } else {
            (
                amp * co,
                -amp * (k * PI) * s,
                -amp * (k * PI) * (k * PI) * co,
            )
        };
        jet[0] += t0;
        jet[1] += t1;
        jet[2] += t2;
        // Judge all three components so derivatives stay accurate at
        // symmetry points where the value terms vanish identically.
        let term_size = t0.norm() + t1.norm() + t2.norm();
        let partial_size = jet[0].norm() + jet[1].norm() + jet[2].norm();
        if conv.update(term_size, partial_size)? {
            break;
        }
        c *= step;
        step *= q2;
        n += 1;
    }
    Ok(jet)
}

/// Value and first two v-derivatives through the imaginary transformation,
/// as a sum of shifted Gaussians exp(-(i pi / tau)(v - c_n)^2).
fn jet_transformed(kind: ThetaKind, v: Complex64, m: &ModularParam) -> Result<[Complex64; 3]> {
    let tau = m.tau();
    let pref = (Complex64::i() * PI / 4.0).exp() / tau.sqrt();
    // -i pi / tau has negative real part, so each term is a Gaussian.
    let g = -Complex64::i() * PI / tau;
    let half_shift = matches!(kind, ThetaKind::One | ThetaKind::Zero);
    let signed = matches!(kind, ThetaKind::One | ThetaKind::Two);
    let center = if half_shift { v.re + 0.5 } else { v.re };
    let n0 = center.round() as i64;
    let mut jet = [Complex64::new(0.0, 0.0); 3];
    let mut conv = Convergence::new();
    // Sweep n = n0, n0+1, n0-1, n0+2, ... so the dominant image comes first.
    for k in 0..(2 * SERIES_MAX_TERMS as i64) {
        let n = if k % 2 == 0 {
            n0 + k / 2
        } else {
            n0 - (k + 1) / 2
        };
        let c = if half_shift { n as f64 - 0.5 } else { n as f64 };
        let w = v - c;
        let e = (g * w * w).exp();
        let sign = if signed {
            // theta_1 carries (-1)^{n+1}, theta_2 carries (-1)^n.
            let flip = if matches!(kind, ThetaKind::One) { 1 } else { 0 };
            if (n + flip).rem_euclid(2) == 0 {
                1.0
            } else {
                -1.0
            }
        } else {
            1.0
        };
        let t0 = sign * e;
        let gp = 2.0 * g * w;
        let t1 = t0 * gp;
        let t2 = t0 * (2.0 * g + gp * gp);
        jet[0] += t0;
        jet[1] += t1;
        jet[2] += t2;
        // Judge convergence only once both sides of the center were seen,
        // and over all three components (see the direct branch).
        let term_size = t0.norm() + t1.norm() + t2.norm();
        let partial_size = jet[0].norm() + jet[1].norm() + jet[2].norm();
        if k >= 2 && conv.update(term_size, partial_size)? {
            break;
        }
    }
    Ok([pref * jet[0], pref * jet[1], pref * jet[2]])
}

fn use_direct(m: &ModularParam) -> bool {
    if m.tau().im >= 0.5 {
        return true;
    }
    // The transformation helps whenever -1/tau sits higher in the upper
    // half plane; for purely imaginary tau below the threshold it always
    // does. Degenerate complex cases fall back to the direct series.
    let flipped = -(m.tau().inv());
    flipped.im <= m.tau().im
}

/// Theta value with first and second derivatives in `v`.
pub fn theta_jet(kind: ThetaKind, v: Complex64, m: &ModularParam) -> Result<[Complex64; 3]> {
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(Error::NonFiniteInput("theta argument v"));
    }
    if use_direct(m) {
        jet_direct(kind, v, m)
    } else {
        jet_transformed(kind, v, m)
    }
}

/// Jacobi theta function of the given kind at argument `v`, modulus `m`.
pub fn theta(kind: ThetaKind, v: Complex64, m: &ModularParam) -> Result<Complex64> {
    Ok(theta_jet(kind, v, m)?[0])
}

/// d/dv theta_1(v; tau).
pub fn theta1_dv(v: Complex64, m: &ModularParam) -> Result<Complex64> {
    Ok(theta_jet(ThetaKind::One, v, m)?[1])
}

/// d^2/dv^2 theta_1(v; tau).
pub fn theta1_dv2(v: Complex64, m: &ModularParam) -> Result<Complex64> {
    Ok(theta_jet(ThetaKind::One, v, m)?[2])
}

/// log theta_kind(v; tau) for real v, stable for any Im tau.
///
/// The overall scale (2 q^{1/4} on the direct branch, the dominant
/// Gaussian image on the transformed branch) is split off analytically
/// and added as an exact logarithm, so ratios of theta values can be
/// formed at moduli where the values themselves under- or overflow.
/// The imaginary part is *a* branch of the logarithm, not necessarily
/// the principal one; sums of these logs exponentiate to the correct
/// product regardless.
pub fn log_theta(kind: ThetaKind, v: f64, m: &ModularParam) -> Result<Complex64> {
    if !v.is_finite() {
        return Err(Error::NonFiniteInput("log_theta argument v"));
    }
    if use_direct(m) {
        log_theta_direct(kind, v, m)
    } else {
        log_theta_transformed(kind, v, m)
    }
}

fn log_theta_direct(kind: ThetaKind, v: f64, m: &ModularParam) -> Result<Complex64> {
    let q = m.nome();
    let q2 = q * q;
    let half = matches!(kind, ThetaKind::One | ThetaKind::Two);
    // Reduced series: the half-integer kinds sum q^{n(n-1)} trig terms
    // after 2 q^{1/4} is factored out; the integer kinds start from 1.
    let (mut sum, mut c, mut step, weight) = if half {
        (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), q2, 1.0)
    } else {
        (Complex64::new(1.0, 0.0), q, q2 * q, 2.0)
    };
    let mut conv = Convergence::new();
    let mut n: u32 = 1;
    loop {
        let k = if half {
            (2 * n - 1) as f64
        } else {
            2.0 * n as f64
        };
        let arg = k * PI * v;
        let sign = match kind {
            ThetaKind::One if n % 2 == 1 => 1.0,
            ThetaKind::One => -1.0,
            ThetaKind::Zero if n % 2 == 1 => -1.0,
            ThetaKind::Zero => 1.0,
            _ => 1.0,
        };
        let angular = if matches!(kind, ThetaKind::One) {
            arg.sin()
        } else {
            arg.cos()
        };
        let t = weight * sign * angular * c;
        sum += t;
        if conv.update(t.norm(), sum.norm())? {
            break;
        }
        c *= step;
        step *= q2;
        n += 1;
    }
    let pref = if half {
        2.0f64.ln() + Complex64::i() * PI * m.tau() * 0.25
    } else {
        Complex64::new(0.0, 0.0)
    };
    Ok(pref + sum.ln())
}

fn log_theta_transformed(kind: ThetaKind, v: f64, m: &ModularParam) -> Result<Complex64> {
    let tau = m.tau();
    let g = -Complex64::i() * PI / tau;
    let half_shift = matches!(kind, ThetaKind::One | ThetaKind::Zero);
    let signed = matches!(kind, ThetaKind::One | ThetaKind::Two);
    let center = if half_shift { v + 0.5 } else { v };
    let n0 = center.round() as i64;
    let c0 = if half_shift {
        n0 as f64 - 0.5
    } else {
        n0 as f64
    };
    let w0 = v - c0;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut conv = Convergence::new();
    for k in 0..(2 * SERIES_MAX_TERMS as i64) {
        let n = if k % 2 == 0 {
            n0 + k / 2
        } else {
            n0 - (k + 1) / 2
        };
        let c = if half_shift { n as f64 - 0.5 } else { n as f64 };
        let w = v - c;
        // Each image weight is taken relative to the dominant one, so
        // no single term can overflow.
        let e = (g * (w * w - w0 * w0)).exp();
        let sign = if signed {
            let flip = if matches!(kind, ThetaKind::One) { 1 } else { 0 };
            if (n + flip).rem_euclid(2) == 0 {
                1.0
            } else {
                -1.0
            }
        } else {
            1.0
        };
        let t = sign * e;
        sum += t;
        if k >= 2 && conv.update(t.norm(), sum.norm())? {
            break;
        }
    }
    let pref = Complex64::i() * PI / 4.0 - 0.5 * tau.ln() + g * w0 * w0;
    Ok(pref + sum.ln())
}

/// Logarithmic derivative d/dv log theta_1(v; i y) for real v, y > 0.
///
/// Real-arithmetic fast path used by the SDE drift evaluations; the
/// value is periodic in v with period 1. Large common scale factors
/// (q^{1/4} for the direct branch, the dominant Gaussian for the
/// transformed branch) cancel in the ratio, so the function is stable
/// for y from ~1e-8 to infinity.
pub fn theta1_log_dv_imag(v: f64, y: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::NonFiniteInput("theta argument v"));
    }
    if !(y > 0.0) {
        return Err(Error::InvalidModularParam(format!(
            "Im(tau) = {y} must be positive"
        )));
    }
    let v = v - 2.0 * (v / 2.0).round(); // theta_1 has period 2 in v
    if y >= 0.5 || y.is_infinite() {
        // S(v) = sum (-1)^{n-1} e^{-pi y ((n-1/2)^2 - 1/4)} sin((2n-1) pi v)
        let mut s = (PI * v).sin();
        let mut ds = PI * (PI * v).cos();
        let mut streak = 0usize;
        let mut n = 2u32;
        while n < 64 {
            let e = (-PI * y * ((n as f64 - 0.5).powi(2) - 0.25)).exp();
            let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
            let k = (2 * n - 1) as f64;
            let term = sign * e * (k * PI * v).sin();
            s += term;
            ds += sign * e * k * PI * (k * PI * v).cos();
            if e <= SERIES_REL_TOL {
                streak += 1;
                if streak >= SERIES_CONSECUTIVE {
                    break;
                }
            } else {
                streak = 0;
            }
            n += 1;
        }
        Ok(ds / s)
    } else {
        // Image representation: sum of Gaussians at half-integer centers.
        let n0 = (v + 0.5).round() as i64;
        let c0 = n0 as f64 - 0.5;
        let mut num = 0.0;
        let mut den = 0.0;
        let mut streak = 0usize;
        for k in 0..64i64 {
            let n = if k % 2 == 0 {
                n0 + k / 2
            } else {
                n0 - (k + 1) / 2
            };
            let c = n as f64 - 0.5;
            let w = v - c;
            // Weight relative to the dominant image, so den is O(1).
            let e = (-PI * (w * w - (v - c0) * (v - c0)) / y).exp();
            let sign = if (n + 1).rem_euclid(2) == 0 {
                1.0
            } else {
                -1.0
            };
            den += sign * e;
            num += sign * e * (-2.0 * PI * w / y);
            // The sweep alternates sides of the dominant image, so ask for
            // consecutive small terms to be sure both tails are negligible.
            if e < SERIES_REL_TOL {
                streak += 1;
                if streak >= SERIES_CONSECUTIVE {
                    break;
                }
            } else {
                streak = 0;
            }
        }
        Ok(num / den)
    }
}

/// Elliptic drift function: the log-derivative of theta_1 scaled to the
/// circle of circumference 2 pi r,
///
/// ```text
/// A_N(t_rem, x) = (1/(2 pi r)) theta_1'(v; tau) / theta_1(v; tau),
///     v = x / (2 pi r),  tau = i N t_rem / (2 pi r^2).
/// ```
///
/// Odd and 2 pi r-periodic in x with simple poles at the lattice
/// 2 pi r Z; behaves like 1/x at 0, tends to (1/2r) cot(x/2r) as
/// t_rem -> infinity and to -(x - pi r)/(N t_rem) as t_rem -> 0.
pub fn a_func(cal_n: f64, t_rem: f64, x: f64, r: f64) -> Result<f64> {
    a_func_guarded(cal_n, t_rem, x, r, A_POLE_GUARD)
}

/// [`a_func`] with a caller-chosen pole guard (fraction of 2 pi r).
pub fn a_func_guarded(cal_n: f64, t_rem: f64, x: f64, r: f64, guard: f64) -> Result<f64> {
    if !(cal_n > 0.0) || !(r > 0.0) || r.is_infinite() {
        return Err(Error::InvalidArgument(format!(
            "a_func needs cal_n > 0 (got {cal_n}) and finite r > 0 (got {r})"
        )));
    }
    if !(t_rem > 0.0) || t_rem.is_nan() {
        return Err(Error::DomainViolation(format!(
            "t_rem = {t_rem} must be positive"
        )));
    }
    if !x.is_finite() {
        return Err(Error::NonFiniteInput("a_func argument x"));
    }
    let period = 2.0 * PI * r;
    let dist = (x / period - (x / period).round()).abs() * period;
    if dist < guard * period {
        return Err(Error::PoleProximity {
            distance: dist,
            guard: guard * period,
        });
    }
    let y = cal_n * t_rem / (period * r);
    Ok(theta1_log_dv_imag(x / period, y)? / period)
}

/// Dedekind eta function eta(tau) = e^{i pi tau / 12} prod (1 - q^{2n}).
pub fn dedekind_eta(m: &ModularParam) -> Result<Complex64> {
    Ok(log_dedekind_eta(m)?.exp())
}

/// log eta(tau), summed directly; stable for forming eta-power ratios.
pub fn log_dedekind_eta(m: &ModularParam) -> Result<Complex64> {
    let mut log = Complex64::i() * PI * m.tau() / 12.0;
    let q2 = m.nome() * m.nome();
    let mut p = q2;
    let mut conv = Convergence::new();
    loop {
        log += (Complex64::new(1.0, 0.0) - p).ln();
        if conv.update(p.norm(), 1.0)? {
            break;
        }
        p *= q2;
    }
    Ok(log)
}

/// Euler product q0(tau) = prod_{n>=1} (1 - q^{2n}).
pub fn euler_q0(m: &ModularParam) -> Result<Complex64> {
    Ok((log_dedekind_eta(m)? - Complex64::i() * PI * m.tau() / 12.0).exp())
}

/// Quasi-period lattice sum eta^1_N(t_rem): the Weierstrass eta at the
/// half-period pi r of the rectangular lattice used by the drift,
///
/// ```text
/// eta1 = (pi / r) (1/12 - 2 sum_{n>=1} n q^{2n} / (1 - q^{2n})),
///     q = exp(-N t_rem / (2 r^2)).
/// ```
pub fn eta1(cal_n: f64, t_rem: f64, r: f64) -> Result<f64> {
    if !(cal_n > 0.0) || !(r > 0.0) || !(t_rem > 0.0) {
        return Err(Error::InvalidArgument(
            "eta1 needs cal_n > 0, t_rem > 0, r > 0".into(),
        ));
    }
    let q = (-cal_n * t_rem / (2.0 * r * r)).exp();
    let q2 = q * q;
    let mut p = q2;
    let mut sum = 0.0;
    let mut conv = Convergence::new();
    let mut n = 1.0;
    loop {
        let term = n * p / (1.0 - p);
        sum += term;
        if conv.update(term.abs(), sum.abs().max(1.0 / 12.0))? {
            break;
        }
        p *= q2;
        n += 1.0;
    }
    Ok(PI / r * (1.0 / 12.0 - 2.0 * sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Brute-force reference: the defining series summed with no
    /// cleverness, adequate for Im(tau) >= 0.3.
    fn brute(kind: ThetaKind, v: Complex64, tau: Complex64) -> Complex64 {
        let q = (Complex64::i() * PI * tau).exp();
        let mut s = match kind {
            ThetaKind::Zero | ThetaKind::Three => c(1.0, 0.0),
            _ => c(0.0, 0.0),
        };
        for n in 1..200 {
            let nf = n as f64;
            match kind {
                ThetaKind::One => {
                    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                    s += 2.0
                        * sign
                        * q.powf((nf - 0.5) * (nf - 0.5))
                        * ((2.0 * nf - 1.0) * PI * v).sin();
                }
                ThetaKind::Two => {
                    s += 2.0 * q.powf((nf - 0.5) * (nf - 0.5)) * ((2.0 * nf - 1.0) * PI * v).cos();
                }
                ThetaKind::Three => {
                    s += 2.0 * q.powf(nf * nf) * (2.0 * nf * PI * v).cos();
                }
                ThetaKind::Zero => {
                    let sign = if n % 2 == 1 { -1.0 } else { 1.0 };
                    s += 2.0 * sign * q.powf(nf * nf) * (2.0 * nf * PI * v).cos();
                }
            }
        }
        s
    }

    #[test]
    fn log_theta_exponentiates_to_theta_on_both_branches() {
        for y in [0.8, 0.3] {
            let m = ModularParam::imaginary(y).unwrap();
            for kind in [
                ThetaKind::Zero,
                ThetaKind::One,
                ThetaKind::Two,
                ThetaKind::Three,
            ] {
                for v in [0.13, 0.41, 0.77, -0.29, 1.6] {
                    let want = theta(kind, c(v, 0.0), &m).unwrap();
                    let got = log_theta(kind, v, &m).unwrap().exp();
                    assert!(
                        (got - want).norm() <= 1e-12 * want.norm(),
                        "kind {kind:?} v={v} y={y}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn log_theta_is_stable_where_values_underflow() {
        // At huge Im tau, theta_1 = 2 q^{1/4} sin(pi v) up to 1e-16:
        // log = ln 2 - pi y / 4 + ln sin(pi v), far below exp range.
        let y = 3000.0;
        let m = ModularParam::imaginary(y).unwrap();
        for v in [0.2, 0.45, 0.71] {
            let got = log_theta(ThetaKind::One, v, &m).unwrap();
            let want = 2.0f64.ln() - PI * y / 4.0 + (PI * v).sin().ln();
            assert_relative_eq!(got.re, want, max_relative = 1e-13);
            assert!(got.im.abs() < 1e-13);
        }
        // Ratios of two such logs exponentiate to finite numbers. The
        // achievable accuracy is one ulp of the common -pi y/4 offset.
        let a = log_theta(ThetaKind::One, 0.2, &m).unwrap();
        let b = log_theta(ThetaKind::One, 0.45, &m).unwrap();
        let ratio = (a - b).exp().re;
        assert_relative_eq!(
            ratio,
            (PI * 0.2).sin() / (PI * 0.45).sin(),
            max_relative = 5e-12
        );
    }

    #[test]
    fn log_theta_is_stable_at_tiny_imaginary_part() {
        // Near the trigonometric end the dominant Gaussian image blows
        // past f64 range; the log form must survive and match the
        // modular transform evaluated at the flipped modulus.
        let y = 1e-3;
        let m = ModularParam::imaginary(y).unwrap();
        let v = 0.31;
        let got = log_theta(ThetaKind::One, v, &m).unwrap();
        // Modular transform: theta_1(v; iy) =
        // y^{-1/2} exp(-pi (v^2 - v + 1/4)/y) (1 - e^{-2 pi v / y}),
        // up to corrections of order e^{-2 pi / y}.
        let want_re =
            -PI * (v * v - v + 0.25) / y - 0.5 * y.ln() + (-(-2.0 * PI * v / y).exp()).ln_1p();
        assert!(got.im.abs() < 1e-12, "im = {}", got.im);
        assert_relative_eq!(got.re, want_re, max_relative = 1e-12);
    }

    #[test]
    fn theta3_at_zero_matches_high_precision_sum() {
        // Frozen from a 50-digit evaluation of 1 + 2 sum e^{-pi n^2}.
        let frozen = 1.086_434_811_213_308_014_575_316_121_5_f64;
        let m = ModularParam::imaginary(1.0).unwrap();
        let got = theta(ThetaKind::Three, c(0.0, 0.0), &m).unwrap();
        assert_relative_eq!(got.re, frozen, max_relative = 1e-12);
        assert_relative_eq!(got.im, 0.0, epsilon = 1e-15);
        // In-test brute force agrees too.
        let mut direct = 1.0;
        for n in 1..60 {
            direct += 2.0 * (-PI * (n as f64) * (n as f64)).exp();
        }
        assert_relative_eq!(got.re, direct, max_relative = 1e-14);
    }

    #[test]
    fn theta1_trivial_values() {
        let m = ModularParam::imaginary(0.8).unwrap();
        assert!(theta(ThetaKind::One, c(0.0, 0.0), &m).unwrap().norm() < 1e-15);
        let half = theta(ThetaKind::One, c(0.5, 0.0), &m).unwrap();
        let two0 = theta(ThetaKind::Two, c(0.0, 0.0), &m).unwrap();
        assert_relative_eq!(half.re, two0.re, max_relative = 1e-14);
    }

    #[test]
    fn theta2_is_shifted_theta1_everywhere() {
        for tau in [c(0.0, 0.7), c(0.3, 0.9), c(-0.2, 0.35)] {
            let m = ModularParam::new(tau).unwrap();
            for v in [c(0.17, 0.0), c(-0.4, 0.22), c(1.3, -0.5)] {
                let a = theta(ThetaKind::Two, v, &m).unwrap();
                let b = theta(ThetaKind::One, v + 0.5, &m).unwrap();
                assert_relative_eq!(a.re, b.re, max_relative = 1e-11, epsilon = 1e-13);
                assert_relative_eq!(a.im, b.im, max_relative = 1e-11, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn quasi_periodicity_in_both_periods() {
        for tau in [c(0.0, 1.1), c(0.25, 0.8), c(0.0, 0.42)] {
            let m = ModularParam::new(tau).unwrap();
            for v in [c(0.3, 0.1), c(-0.75, -0.3)] {
                let base = theta(ThetaKind::One, v, &m).unwrap();
                let shift1 = theta(ThetaKind::One, v + 1.0, &m).unwrap();
                assert_relative_eq!(shift1.re, -base.re, max_relative = 1e-11, epsilon = 1e-14);
                assert_relative_eq!(shift1.im, -base.im, max_relative = 1e-11, epsilon = 1e-14);
                let shift_tau = theta(ThetaKind::One, v + tau, &m).unwrap();
                let factor = -(-Complex64::i() * PI * (2.0 * v + tau)).exp();
                let want = factor * base;
                assert_relative_eq!(shift_tau.re, want.re, max_relative = 1e-10, epsilon = 1e-13);
                assert_relative_eq!(shift_tau.im, want.im, max_relative = 1e-10, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn modular_switch_matches_brute_force_below_threshold() {
        // Im(tau) = 0.3-0.45 uses the transformed branch; brute-force
        // direct summation still converges there and is independent.
        for kind in [
            ThetaKind::Zero,
            ThetaKind::One,
            ThetaKind::Two,
            ThetaKind::Three,
        ] {
            for y in [0.3, 0.45] {
                let m = ModularParam::imaginary(y).unwrap();
                for v in [c(0.23, 0.0), c(0.7, 0.31), c(-1.4, -0.2)] {
                    let got = theta(kind, v, &m).unwrap();
                    let want = brute(kind, v, c(0.0, y));
                    assert_relative_eq!(got.re, want.re, max_relative = 1e-11, epsilon = 1e-12);
                    assert_relative_eq!(got.im, want.im, max_relative = 1e-11, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn imaginary_transformation_identities() {
        // theta_1(v; tau) = e^{3 pi i/4} tau^{-1/2} e^{-pi i v^2/tau} theta_1(v/tau; -1/tau)
        // theta_0(v; tau) = e^{pi i/4} tau^{-1/2} e^{-pi i v^2/tau} theta_2(v/tau; -1/tau)
        // theta_3(v; tau) = e^{pi i/4} tau^{-1/2} e^{-pi i v^2/tau} theta_3(v/tau; -1/tau)
        let v = c(0.27, 0.13);
        for y in [0.37, 0.8, 2.1] {
            let tau = c(0.0, y);
            let m = ModularParam::new(tau).unwrap();
            let mflip = ModularParam::new(-tau.inv()).unwrap();
            let gauss = (-Complex64::i() * PI * v * v / tau).exp();
            let pre = |phase: f64| (Complex64::i() * phase * PI).exp() / tau.sqrt() * gauss;
            let pairs = [
                (ThetaKind::One, ThetaKind::One, 0.75),
                (ThetaKind::Zero, ThetaKind::Two, 0.25),
                (ThetaKind::Three, ThetaKind::Three, 0.25),
            ];
            for (lhs_kind, rhs_kind, phase) in pairs {
                let lhs = theta(lhs_kind, v, &m).unwrap();
                let rhs = pre(phase) * theta(rhs_kind, v / tau, &mflip).unwrap();
                assert_relative_eq!(lhs.re, rhs.re, max_relative = 1e-10, epsilon = 1e-13);
                assert_relative_eq!(lhs.im, rhs.im, max_relative = 1e-10, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn large_imaginary_tau_asymptotics() {
        // theta_1 -> 2 e^{i pi tau/4} sin(pi v), theta_0/theta_3 -> 1.
        let m = ModularParam::imaginary(10.0).unwrap();
        let v = c(0.3, 0.0);
        let got = theta(ThetaKind::One, v, &m).unwrap();
        let want = 2.0 * (-10.0 * PI / 4.0).exp() * (0.3 * PI).sin();
        assert_relative_eq!(got.re, want, max_relative = 1e-6);
        let t3 = theta(ThetaKind::Three, v, &m).unwrap();
        assert_relative_eq!(t3.re, 1.0, max_relative = 1e-6);
        let t0 = theta(ThetaKind::Zero, v, &m).unwrap();
        assert_relative_eq!(t0.re, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-5;
        for y in [0.4, 1.3] {
            let m = ModularParam::imaginary(y).unwrap();
            for v in [c(0.21, 0.0), c(0.6, 0.25)] {
                let jet = theta_jet(ThetaKind::One, v, &m).unwrap();
                let fd1 = (theta(ThetaKind::One, v + h, &m).unwrap()
                    - theta(ThetaKind::One, v - h, &m).unwrap())
                    / (2.0 * h);
                let fd2 = (theta(ThetaKind::One, v + h, &m).unwrap() - 2.0 * jet[0]
                    + theta(ThetaKind::One, v - h, &m).unwrap())
                    / (h * h);
                assert_relative_eq!(jet[1].re, fd1.re, max_relative = 1e-8, epsilon = 1e-10);
                assert_relative_eq!(jet[1].im, fd1.im, max_relative = 1e-8, epsilon = 1e-10);
                assert_relative_eq!(jet[2].re, fd2.re, max_relative = 1e-4, epsilon = 1e-7);
                assert_relative_eq!(jet[2].im, fd2.im, max_relative = 1e-4, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn heat_equation_second_derivative() {
        // d tau theta = (1/(4 pi i)) d^2_v theta, so theta1_dv2 must equal
        // 4 pi i times a centered tau-difference.
        let v = c(0.2, 0.0);
        let h = 1e-4;
        let up = theta(
            ThetaKind::One,
            v,
            &ModularParam::imaginary(0.8 + h).unwrap(),
        )
        .unwrap();
        let dn = theta(
            ThetaKind::One,
            v,
            &ModularParam::imaginary(0.8 - h).unwrap(),
        )
        .unwrap();
        // tau = i y, so d/dy = i d/dtau: dtau theta = -i (up - dn)/(2h).
        let dtau = -Complex64::i() * (up - dn) / (2.0 * h);
        let want = 4.0 * PI * Complex64::i() * dtau;
        let got = theta1_dv2(v, &ModularParam::imaginary(0.8).unwrap()).unwrap();
        assert_relative_eq!(got.re, want.re, max_relative = 1e-5, epsilon = 1e-9);
        assert_relative_eq!(got.im, want.im, max_relative = 1e-5, epsilon = 1e-9);
    }

    #[test]
    fn theta1_positive_on_unit_interval_for_imaginary_tau() {
        for y in [0.2, 0.6, 2.0] {
            let m = ModularParam::imaginary(y).unwrap();
            for k in 1..40 {
                let v = c(k as f64 / 40.0, 0.0);
                assert!(
                    theta(ThetaKind::One, v, &m).unwrap().re > 0.0,
                    "y={y} v={v}"
                );
            }
        }
    }

    #[test]
    fn log_derivative_fast_path_agrees_with_complex_jet() {
        for y in [0.07, 0.3, 0.5, 1.7, 40.0] {
            let m = ModularParam::imaginary(y).unwrap();
            for v in [0.11, 0.39, -0.27, 3.62] {
                let jet = theta_jet(ThetaKind::One, c(v, 0.0), &m).unwrap();
                let want = (jet[1] / jet[0]).re;
                let got = theta1_log_dv_imag(v, y).unwrap();
                assert_relative_eq!(got, want, max_relative = 1e-11, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn a_func_is_odd_periodic_with_inverse_pole() {
        let (n, trem, r) = (3.0, 0.4, 1.0);
        let period = 2.0 * PI * r;
        for x in [0.3, 1.1, 2.9] {
            let a = a_func(n, trem, x, r).unwrap();
            assert_relative_eq!(a_func(n, trem, -x, r).unwrap(), -a, max_relative = 1e-12);
            assert_relative_eq!(
                a_func(n, trem, x + period, r).unwrap(),
                a,
                max_relative = 1e-9,
                epsilon = 1e-12
            );
        }
        // A ~ 1/x as x -> 0.
        let x = 1e-4;
        assert_relative_eq!(a_func(n, trem, x, r).unwrap() * x, 1.0, max_relative = 1e-6);
        // A ~ -1/(2 pi r - x) close to the next pole.
        let x = period - 1e-4;
        assert_relative_eq!(
            a_func(n, trem, x, r).unwrap() * (period - x),
            -1.0,
            max_relative = 1e-6
        );
    }

    #[test]
    fn a_func_limits() {
        // Long horizon: cotangent drift.
        let (x, r): (f64, f64) = (0.7, 1.0);
        let want = 0.5 / r * (x / (2.0 * r)).tan().recip();
        assert_relative_eq!(a_func(2.0, 1e6, x, r).unwrap(), want, max_relative = 1e-8);
        assert_relative_eq!(
            a_func(2.0, f64::INFINITY, x, r).unwrap(),
            want,
            max_relative = 1e-12
        );
        // Short horizon: linear pinning profile -(x - pi r)/(N t_rem).
        let (n, trem, x) = (3.0, 1e-4, 2.0);
        let want = -(x - PI * r) / (n * trem);
        assert_relative_eq!(a_func(n, trem, x, r).unwrap(), want, max_relative = 1e-10);
    }

    #[test]
    fn a_func_pole_guard_trips() {
        let period = 2.0 * PI;
        match a_func(2.0, 0.5, 1e-13 * period, 1.0) {
            Err(Error::PoleProximity { .. }) => {}
            other => panic!("expected pole guard, got {other:?}"),
        }
        assert!(a_func(2.0, 0.5, period + 1e-13, 1.0).is_err());
        assert!(a_func(2.0, 0.5, 0.5, 1.0).is_ok());
    }

    #[test]
    fn dedekind_eta_at_i() {
        // Frozen from a 50-digit evaluation of Gamma(1/4) / (2 pi^{3/4}).
        let frozen = 0.768_225_422_326_056_659_002_594_179_6_f64;
        let m = ModularParam::imaginary(1.0).unwrap();
        let got = dedekind_eta(&m).unwrap();
        assert_relative_eq!(got.re, frozen, max_relative = 1e-13);
        assert_relative_eq!(got.im, 0.0, epsilon = 1e-16);
        // Brute-force product.
        let mut p = 1.0;
        for n in 1..40 {
            p *= 1.0 - (-2.0 * PI * n as f64).exp();
        }
        assert_relative_eq!(got.re, (-PI / 12.0).exp() * p, max_relative = 1e-14);
    }

    #[test]
    fn eta1_matches_direct_summation_at_half_nome() {
        // cal_n t_rem / (2 r^2) = ln 2 makes q = 1/2 exactly.
        let (cal_n, r) = (2.0, 1.0);
        let t_rem = 2.0_f64.ln();
        let q: f64 = 0.5;
        let mut sum = 0.0;
        for n in 1..10_000 {
            let p = q.powi(2 * n);
            sum += n as f64 * p / (1.0 - p);
        }
        let want = PI / r * (1.0 / 12.0 - 2.0 * sum);
        assert_relative_eq!(eta1(cal_n, t_rem, r).unwrap(), want, max_relative = 1e-13);
    }

    #[test]
    fn eta_log_derivative_matches_eta1() {
        // d/dt log eta(tau(t)) = N eta1_N(t* - t) / (2 pi r) for
        // tau(t) = i N (t* - t)/(2 pi r^2); checked by finite differences.
        let (cal_n, t_star, r, t) = (3usize, 1.0, 1.0, 0.35);
        let clock = crate::modular::ProcessClock::new(t_star, r).unwrap();
        let h = 1e-5;
        let up = log_dedekind_eta(&clock.tau_at(cal_n, t + h).unwrap()).unwrap();
        let dn = log_dedekind_eta(&clock.tau_at(cal_n, t - h).unwrap()).unwrap();
        let fd = (up - dn).re / (2.0 * h);
        let want = cal_n as f64 * eta1(cal_n as f64, t_star - t, r).unwrap() / (2.0 * PI * r);
        assert_relative_eq!(fd, want, max_relative = 1e-6);
    }

    #[test]
    fn euler_product_consistent_with_eta() {
        let m = ModularParam::new(c(0.2, 0.9)).unwrap();
        let eta = dedekind_eta(&m).unwrap();
        let q0 = euler_q0(&m).unwrap();
        let want = (Complex64::i() * PI * m.tau() / 12.0).exp() * q0;
        assert_relative_eq!(eta.re, want.re, max_relative = 1e-14);
        assert_relative_eq!(eta.im, want.im, max_relative = 1e-14);
    }

    proptest::proptest! {
        #[test]
        fn theta1_is_odd(v_re in -1.5f64..1.5, v_im in -0.4f64..0.4, y in 0.25f64..2.5) {
            let m = ModularParam::imaginary(y).unwrap();
            let v = c(v_re, v_im);
            let plus = theta(ThetaKind::One, v, &m).unwrap();
            let minus = theta(ThetaKind::One, -v, &m).unwrap();
            proptest::prop_assert!((plus + minus).norm() <= 1e-11 * (plus.norm() + 1.0));
        }

        #[test]
        fn log_derivative_paths_agree(v in -0.49f64..0.49, y in 0.05f64..4.0) {
            // Skip the immediate pole neighborhood.
            proptest::prop_assume!(v.abs() > 0.02);
            let m = ModularParam::imaginary(y).unwrap();
            let jet = theta_jet(ThetaKind::One, c(v, 0.0), &m).unwrap();
            let want = (jet[1] / jet[0]).re;
            let got = theta1_log_dv_imag(v, y).unwrap();
            proptest::prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }
    }
}
