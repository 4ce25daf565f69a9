//! Modular parameter and process clock.
//!
//! Theta-series arguments come in two flavors here: a free modulus
//! `tau` in the upper half plane ([`ModularParam`]), and the running
//! modulus of a pinned process ([`ProcessClock`]), which maps the time
//! remaining until the pinning horizon t* to
//! tau(t) = i N (t* - t) / (2 pi r^2) for a family-dependent level N.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Modulus in the upper half plane with its cached nome q = exp(i pi tau).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModularParam {
    tau: Complex64,
    nome: Complex64,
}

impl ModularParam {
    /// Validates Im(tau) > 0 and finiteness.
    pub fn new(tau: Complex64) -> Result<Self> {
        if !tau.re.is_finite() || !tau.im.is_finite() {
            return Err(Error::InvalidModularParam(format!("non-finite tau {tau}")));
        }
        if tau.im <= 0.0 {
            return Err(Error::InvalidModularParam(format!(
                "Im(tau) = {} must be positive",
                tau.im
            )));
        }
        Ok(Self {
            tau,
            nome: (Complex64::i() * std::f64::consts::PI * tau).exp(),
        })
    }

    /// Purely imaginary modulus tau = i y, y > 0.
    pub fn imaginary(y: f64) -> Result<Self> {
        Self::new(Complex64::new(0.0, y))
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    /// Cached nome q = exp(i pi tau); |q| < 1.
    pub fn nome(&self) -> Complex64 {
        self.nome
    }

    /// The modulus scaled by a positive rational factor (2 tau, tau/2, ...).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.tau * factor)
    }
}

/// Pinning horizon t* and circle radius r shared by all per-time operations.
///
/// Trigonometric and rational models use `t_star = f64::INFINITY` as a
/// sentinel; elliptic evaluations require a finite horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessClock {
    t_star: f64,
    r: f64,
}

impl ProcessClock {
    pub fn new(t_star: f64, r: f64) -> Result<Self> {
        if !(t_star > 0.0) || t_star.is_nan() {
            return Err(Error::DomainViolation(format!(
                "t_star = {t_star} must be > 0"
            )));
        }
        if !r.is_finite() || !(r > 0.0) {
            return Err(Error::DomainViolation(format!(
                "r = {r} must be finite and > 0"
            )));
        }
        Ok(Self { t_star, r })
    }

    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn is_elliptic(&self) -> bool {
        self.t_star.is_finite()
    }

    /// Checks 0 <= t < t*.
    pub fn validate_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t < 0.0 || t >= self.t_star {
            return Err(Error::DomainViolation(format!(
                "t = {t} outside [0, t* = {})",
                self.t_star
            )));
        }
        Ok(())
    }

    /// Running modulus tau(t) = i N (t* - t) / (2 pi r^2) at level `cal_n`.
    pub fn tau_at(&self, cal_n: usize, t: f64) -> Result<ModularParam> {
        self.validate_time(t)?;
        if !self.is_elliptic() {
            return Err(Error::DomainViolation(
                "elliptic modulus requested from an infinite-horizon clock".into(),
            ));
        }
        let y = cal_n as f64 * (self.t_star - t) / (2.0 * std::f64::consts::PI * self.r * self.r);
        ModularParam::imaginary(y)
    }
}
