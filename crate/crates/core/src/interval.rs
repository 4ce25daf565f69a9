//! Transition densities of Brownian motion on the interval [0, pi r]
//! with absorbing or reflecting walls, on the half line, on the circle,
//! and for the Bessel reference processes.
//!
//! Each interval density has two equivalent representations:
//!
//! - an image sum of Gaussian kernels phi_t(z) = e^{-z^2/2t}/sqrt(2 pi t)
//!   over shifts by the doubled period 2 pi r (sharp for small t);
//! - a spectral sum over sine/cosine modes with decay e^{-lambda t}
//!   (sharp for large t).
//!
//! Evaluation switches between the two at t = r^2, where both converge
//! to full precision in a handful of terms.

use crate::error::{Error, Result};
use crate::family::Family;
use crate::theta::Convergence;
use std::f64::consts::PI;

/// Wall behaviour of the single-particle reference process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wall {
    Absorbing,
    Reflecting,
}

/// Boundary conditions at the two ends of [0, pi r].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryCond {
    pub lower: Wall,
    pub upper: Wall,
}

impl BoundaryCond {
    pub const fn new(lower: Wall, upper: Wall) -> Self {
        Self { lower, upper }
    }

    /// Reference boundary conditions of the interval families whose
    /// correlation kernels are built from wall densities.
    pub fn for_family(family: Family) -> Option<Self> {
        match family {
            Family::B => Some(Self::new(Wall::Absorbing, Wall::Reflecting)),
            Family::C => Some(Self::new(Wall::Absorbing, Wall::Absorbing)),
            Family::D => Some(Self::new(Wall::Reflecting, Wall::Reflecting)),
            _ => None,
        }
    }
}

/// Gaussian heat kernel phi_t(z).
pub fn pdf_gauss(t: f64, z: f64) -> f64 {
    debug_assert!(t > 0.0);
    (-z * z / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// Transition density on [0, infinity) with the given wall at 0:
/// difference of images when absorbing, sum when reflecting.
pub fn p_half_line(t: f64, x: f64, y: f64, wall: Wall) -> f64 {
    match wall {
        Wall::Absorbing => pdf_gauss(t, y - x) - pdf_gauss(t, y + x),
        Wall::Reflecting => pdf_gauss(t, y - x) + pdf_gauss(t, y + x),
    }
}

/// Three-dimensional Bessel transition density (x, y > 0).
pub fn p_bes3(t: f64, x: f64, y: f64) -> f64 {
    debug_assert!(x > 0.0 && y >= 0.0);
    (y / x) * p_half_line(t, x, y, Wall::Absorbing)
}

/// One-dimensional (reflected) Bessel transition density.
pub fn p_bes1(t: f64, x: f64, y: f64) -> f64 {
    p_half_line(t, x, y, Wall::Reflecting)
}

/// Transition density on the circle of circumference 2 pi r.
pub fn p_circle(t: f64, x: f64, y: f64, r: f64) -> Result<f64> {
    check_time_scale(t, r)?;
    let period = 2.0 * PI * r;
    if t < r * r {
        let d = y - x;
        let mut sum = 0.0;
        let mut conv = Convergence::new();
        for k in image_sweep() {
            let term = pdf_gauss(t, d + period * k as f64);
            sum += term;
            if conv.update(term, sum.abs().max(DENSITY_FLOOR))? {
                break;
            }
        }
        Ok(sum)
    } else {
        let mut sum = 1.0;
        let mut conv = Convergence::new();
        for n in 1.. {
            let nf = n as f64;
            let term = 2.0 * (-nf * nf * t / (2.0 * r * r)).exp() * (nf * (y - x) / r).cos();
            sum += term;
            if conv.update(term.abs(), sum.abs().max(DENSITY_FLOOR))? {
                break;
            }
        }
        Ok(sum / period)
    }
}

/// Transition density on [0, pi r] under the given boundary conditions.
/// All four wall combinations are symmetric in x <-> y.
pub fn p_interval(bc: BoundaryCond, t: f64, x: f64, y: f64, r: f64) -> Result<f64> {
    check_time_scale(t, r)?;
    match (bc.lower, bc.upper) {
        (Wall::Absorbing, Wall::Absorbing) => p_aa(t, x, y, r),
        (Wall::Reflecting, Wall::Reflecting) => p_rr(t, x, y, r),
        (Wall::Absorbing, Wall::Reflecting) => p_ar(t, x, y, r),
        (Wall::Reflecting, Wall::Absorbing) => p_ar(t, PI * r - x, PI * r - y, r),
    }
}

/// Density floor that keeps the relative stop rule meaningful when the
/// density itself is exponentially small.
const DENSITY_FLOOR: f64 = 1e-300;

fn check_time_scale(t: f64, r: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::DomainViolation(format!(
            "transition density needs a positive finite time, got t = {t}"
        )));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::DomainViolation(format!(
            "transition density needs a positive finite radius, got r = {r}"
        )));
    }
    Ok(())
}

/// Centered sweep 0, 1, -1, 2, -2, ... over image indices.
fn image_sweep() -> impl Iterator<Item = i64> {
    (0..).map(|k: i64| if k % 2 == 0 { k / 2 } else { -(k + 1) / 2 })
}

fn p_aa(t: f64, x: f64, y: f64, r: f64) -> Result<f64> {
    let period = 2.0 * PI * r;
    if t < r * r {
        let (d, s) = (y - x, y + x);
        let mut sum = 0.0;
        let mut conv = Convergence::new();
        for k in image_sweep() {
            let shift = period * k as f64;
            let a = pdf_gauss(t, d + shift);
            let b = pdf_gauss(t, s + shift);
            sum += a - b;
            if conv.update(a + b, sum.abs().max(DENSITY_FLOOR))? {
                break;
            }
        }
        Ok(sum)
    } else {
        let mut sum = 0.0;
        let mut conv = Convergence::new();
        for n in 1.. {
            let nf = n as f64;
            let term =
                (-nf * nf * t / (2.0 * r * r)).exp() * (nf * y / r).sin() * (nf * x / r).sin();
            sum += term;
            if conv.update(term.abs(), sum.abs().max(DENSITY_FLOOR))? {
                break;
            }
        }
        Ok(sum * 2.0 / (PI * r))
    }
}

fn p_rr(t: f64, x: f64, y: f64, r: f64) -> Result<f64> {
    let period = 2.0 * PI * r;
    if t < r * r {
        let (d, s) = (y - x, y + x);
        let mut sum = 0.0;
        let mut conv = Convergence::new();
        for k in image_sweep() {
            let shift = period * k as f64;
            let a = pdf_gauss(t, d + shift);
            let b = pdf_gauss(t, s + shift);
            sum += a + b;
            if conv.update(a + b, sum.abs().max(DENSITY_FLOOR))? {
                break;
            }
        }
        Ok(sum)
    } else {
        let mut sum = 1.0;
        let mut conv = Convergence::new();
        for n in 1.. {
            let nf = n as f64;
            let term = 2.0
                * (-nf * nf * t / (2.0 * r * r)).exp()
                * (nf * y / r).cos()
                * (nf * x / r).cos();
            sum += term;
            if conv.update(term.abs(), sum.abs().max(DENSITY_FLOOR))? {
                break;
            }
        }
        Ok(sum / (PI * r))
    }
}

fn p_ar(t: f64, x: f64, y: f64, r: f64) -> Result<f64> {
    let period = 2.0 * PI * r;
    if t < r * r {
        let (d, s) = (y - x, y + x);
        let mut sum = 0.0;
        let mut conv = Convergence::new();
        for k in image_sweep() {
            let shift = period * k as f64;
            let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let a = pdf_gauss(t, d + shift);
            let b = pdf_gauss(t, s + shift);
            sum += sign * (a - b);
            if conv.update(a + b, sum.abs().max(DENSITY_FLOOR))? {
                break;
            }
        }
        Ok(sum)
    } else {
        let mut sum = 0.0;
        let mut conv = Convergence::new();
        for n in 1.. {
            let h = n as f64 - 0.5;
            let term = (-h * h * t / (2.0 * r * r)).exp() * (h * y / r).sin() * (h * x / r).sin();
            sum += term;
            if conv.update(term.abs(), sum.abs().max(DENSITY_FLOOR))? {
                break;
            }
        }
        Ok(sum * 2.0 / (PI * r))
    }
}
