//! Elliptic polynomial interpolation and the associated space-time
//! martingales and determinant-valued process.
//!
//! For a configuration u = (u_1 < ... < u_n) the interpolation
//! functions Phi_j are the unique span-of-basis functions with
//! Phi_j(u_k) = delta_jk. Two equivalent routes are implemented:
//!
//! - closed form: products of theta-function ratios (one ratio per
//!   other point, plus a family-specific single-variable ratio and,
//!   for family A, a center-of-mass ratio);
//! - coefficients: the inverse of the collocation matrix F_{jk} =
//!   f_j(u_k). The inverse is formed on the *scaled* basis (see
//!   [`crate::basis`]), which keeps the solve well-conditioned for any
//!   horizon.
//!
//! The martingale attached to point u_j is
//!
//! ```text
//! M_j(t, y) = sum_k phi_jk e^{J(k)^2 t/(2 r^2)} f_k(y; tau(t)),
//! ```
//!
//! which in scaled terms absorbs the exponential and the scale ratio
//! into one growth factor g_k(t) = exp(t (N/2 - J(k))^2 / (2 r^2)).
//! M_j(0, .) = Phi_j, and under a free Brownian motion started at u_j
//! the process t -> M_j(t, B_t) has constant expectation 1 at y = u_j
//! (delta at the others). The determinant det[M_j(t, x_k)] equals a
//! ratio of factorized determinants, evaluated here through eta-log
//! differences so long horizons cannot overflow.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::basis;
use crate::error::{Error, Result};
use crate::family::{Config, Family};
use crate::linalg;
use crate::modular::ModularParam;
use crate::theta::{self, ThetaKind};

/// Largest exponent allowed in the martingale growth factor.
const MAX_GROWTH_EXPONENT: f64 = 700.0;

/// Inverse of the scaled collocation matrix at the start modulus.
#[derive(Debug, Clone)]
pub struct InterpCoeffs {
    /// Row j = interpolation point, column k = basis index (0-based):
    /// phi[j * n + k] = [Fs^{-1}]_{jk}.
    phi: Vec<Complex64>,
    /// 1-norm condition number of the scaled collocation matrix.
    pub cond: f64,
}

impl InterpCoeffs {
    /// Coefficient phi_{jk} of basis element k in the interpolant at u_j.
    pub fn phi(&self, j: usize, k: usize, n: usize) -> Complex64 {
        self.phi[j * n + k]
    }
}

/// Interpolation + martingale evaluations for one configuration.
#[derive(Debug, Clone)]
pub struct MartingaleCtx {
    pub config: Config,
    pub coeffs: InterpCoeffs,
    tau0: ModularParam,
}

impl MartingaleCtx {
    pub fn new(config: &Config) -> Result<Self> {
        let n = config.n;
        let tau0 = config.tau_at(0.0)?;
        let r = config.clock.r();
        let mut fs = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 1..=n {
            for (k, &uk) in config.u.iter().enumerate() {
                fs[(j - 1) * n + k] = basis::scaled_basis_f(config.family, n, j, uk, &tau0, r)?;
            }
        }
        let cond = linalg::condition_1norm(&fs, n)?;
        if !cond.is_finite() || cond > 1e13 {
            return Err(Error::IllConditioned { cond });
        }
        let lu = linalg::lu_factor(&fs, n)?;
        let phi = lu.inverse();
        Ok(Self {
            config: config.clone(),
            coeffs: InterpCoeffs { phi, cond },
            tau0,
        })
    }

    fn n(&self) -> usize {
        self.config.n
    }

    /// Martingale growth factor g_k(t) = exp(t (N/2 - J(k))^2 / 2 r^2).
    fn growth(&self, k: usize, t: f64) -> Result<f64> {
        let r = self.config.clock.r();
        let cal_n = self.config.cal_n() as f64;
        let half = cal_n / 2.0 - self.config.family.j_index(k);
        let exponent = t * half * half / (2.0 * r * r);
        if exponent > MAX_GROWTH_EXPONENT {
            return Err(Error::OverflowWindow { exponent });
        }
        Ok(exponent.exp())
    }

    /// M_j(t, y) by the coefficient route (0-based j).
    pub fn martingale(&self, j: usize, t: f64, y: f64) -> Result<Complex64> {
        let n = self.n();
        let r = self.config.clock.r();
        let taut = self.config.tau_at(t)?;
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 0..n {
            let fk = basis::scaled_basis_f(self.config.family, n, k + 1, y, &taut, r)?;
            sum += self.coeffs.phi(j, k, n) * self.growth(k + 1, t)? * fk;
        }
        Ok(sum)
    }

    /// Closed-form interpolation function Phi_j(z) = M_j(0, z).
    pub fn interp(&self, j: usize, z: f64) -> Result<Complex64> {
        let n = self.n();
        let family = self.config.family;
        let r = self.config.clock.r();
        let u = &self.config.u;
        let tp = 2.0 * PI * r;
        let th1 =
            |v: f64, m: &ModularParam| theta::theta(ThetaKind::One, Complex64::new(v, 0.0), m);
        let mut p = match family {
            Family::A => {
                let total: f64 = u.iter().sum();
                let kappa = Family::kappa(n, r);
                th1((total - u[j] + z - kappa) / tp, &self.tau0)?
                    / th1((total - kappa) / tp, &self.tau0)?
            }
            Family::B | Family::BDual | Family::C | Family::CDual => {
                let (c1, c2) = family.c1c2().expect("families B, Bv, C, Cv carry (c1, c2)");
                let m2 = self.tau0.scaled(c2)?;
                th1(c1 * z / tp, &m2)? / th1(c1 * u[j] / tp, &m2)?
            }
            Family::BC => {
                let m2 = self.tau0.scaled(2.0)?;
                let th0 = |v: f64, m: &ModularParam| {
                    theta::theta(ThetaKind::Zero, Complex64::new(v, 0.0), m)
                };
                (th1(z / tp, &self.tau0)? / th1(u[j] / tp, &self.tau0)?)
                    * (th0(z / (PI * r), &m2)? / th0(u[j] / (PI * r), &m2)?)
            }
            Family::D => Complex64::new(1.0, 0.0),
        };
        for (l, &ul) in u.iter().enumerate() {
            if l == j {
                continue;
            }
            p *= th1((z - ul) / tp, &self.tau0)? / th1((u[j] - ul) / tp, &self.tau0)?;
            if family != Family::A {
                p *= th1((z + ul) / tp, &self.tau0)? / th1((u[j] + ul) / tp, &self.tau0)?;
            }
        }
        Ok(p)
    }

    /// Determinant process D(t, x) = det[M_j(t, x_k)], via the literal
    /// matrix of martingale values.
    pub fn det_process_direct(&self, t: f64, x: &[f64]) -> Result<f64> {
        let n = self.n();
        assert_eq!(x.len(), n);
        let mut mat = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for (k, &xk) in x.iter().enumerate() {
                mat[j * n + k] = self.martingale(j, t, xk)?;
            }
        }
        Ok(linalg::det(&mat, n)?.re)
    }

    /// The same determinant through the factorized ratio: eta-power
    /// prefactor, center-of-mass ratio, k1 ratios, and k2 pair ratios.
    /// Everything accumulates in log space so individual factors may
    /// under- or overflow without harming the O(1) ratio.
    pub fn det_process(&self, t: f64, x: &[f64]) -> Result<f64> {
        let n = self.n();
        assert_eq!(x.len(), n);
        let family = self.config.family;
        let r = self.config.clock.r();
        let u = &self.config.u;
        let taut = self.config.tau_at(t)?;
        let mut log_d = Complex64::new(0.0, 0.0);
        for (scale, power) in family.eta_exponents(n) {
            let lt = theta::log_dedekind_eta(&taut.scaled(scale)?)?;
            let l0 = theta::log_dedekind_eta(&self.tau0.scaled(scale)?)?;
            log_d += (power as f64) * (lt - l0);
        }
        log_d += basis::log_k_sym(family, n, x, &taut, r)?
            - basis::log_k_sym(family, n, u, &self.tau0, r)?;
        for l in 0..n {
            log_d += basis::log_k1(family, x[l], &taut, r)?
                - basis::log_k1(family, u[l], &self.tau0, r)?;
        }
        for k in 1..n {
            for j in 0..k {
                log_d += basis::log_k2(family, x[k], x[j], &taut, r)?
                    - basis::log_k2(family, u[k], u[j], &self.tau0, r)?;
            }
        }
        if log_d.re > MAX_GROWTH_EXPONENT {
            return Err(Error::OverflowWindow { exponent: log_d.re });
        }
        Ok(log_d.exp().re)
    }
}
