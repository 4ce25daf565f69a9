//! Spatio-temporal correlation kernels.
//!
//! The finite-horizon kernel for a configuration u is
//!
//! ```text
//! K(s, x; t, y) = sum_j p(s, x | u_j) M_j(t, y) - 1(s > t) p(s - t, x | y),
//! ```
//!
//! where p is the wall density of the family ([`crate::interval`]) and
//! M_j the martingale of [`crate::interp`]. The infinite-horizon
//! (trigonometric) kernels of families C and D use the sine/cosine
//! basis instead; they are evaluated here in mode-split form
//!
//! ```text
//! K = K_eq(t - s, x, y) + remainder(s, x; t, y),
//! ```
//!
//! which is an exact algebraic identity: the low modes of the wall
//! density reproduce the equilibrium kernel term by term, and the
//! remainder collects the modes above the particle number. The split
//! makes the distance to equilibrium directly computable — the naive
//! difference of two O(1) kernel values loses all significant digits
//! once e^{N^2 T / 2 r^2} passes 1/eps.
//!
//! The rational (infinite period) kernels of the noncolliding Bessel
//! processes close the chain: their martingales are polynomial heat
//! transforms evaluated exactly, and the C-family kernel equals the
//! BES(3) kernel under the gauge factor y/x.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::family::{Config, Family};
use crate::interp::MartingaleCtx;
use crate::interval::{self, BoundaryCond};
use crate::linalg;
use crate::quad;
use crate::theta::Convergence;

/// Largest exponent fed to `exp` in mode sums.
const MAX_MODE_EXPONENT: f64 = 700.0;

/// Convergence target of the Fredholm quadrature doubling.
const FREDHOLM_QUAD_TOL: f64 = 1e-8;

/// Evaluation regime of a kernel context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMode {
    /// Finite horizon t*, theta-function martingales.
    Elliptic,
    /// Infinite horizon, sine/cosine martingales (families C, D).
    Trigonometric,
    /// Stationary kernel; no initial configuration enters.
    EquilibriumTrig,
}

/// Correlation-kernel evaluator for one family and configuration.
#[derive(Debug, Clone)]
pub struct KernelContext {
    pub mode: KernelMode,
    pub bc: BoundaryCond,
    mart: Option<MartingaleCtx>,
    /// Inverse of the trigonometric collocation matrix, row j = point.
    trig_phi: Option<Vec<f64>>,
    config: Config,
}

/// Trigonometric basis element: sin(jz/r) for C, cos((j-1)z/r) for D.
pub fn trig_f(family: Family, j: usize, z: f64, r: f64) -> f64 {
    match family {
        Family::C => (j as f64 * z / r).sin(),
        Family::D => ((j as f64 - 1.0) * z / r).cos(),
        _ => panic!("trigonometric basis exists for families C and D only"),
    }
}

/// Frequency of the j-th trigonometric mode (j for C, j-1 for D).
fn trig_freq(family: Family, j: usize) -> f64 {
    match family {
        Family::C => j as f64,
        Family::D => j as f64 - 1.0,
        _ => panic!("trigonometric basis exists for families C and D only"),
    }
}

/// det[f_j(u_k)] of the trigonometric basis, evaluated literally.
pub fn trig_basis_det(family: Family, n: usize, u: &[f64], r: f64) -> Result<f64> {
    assert_eq!(u.len(), n);
    let mut a = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 1..=n {
        for (k, &uk) in u.iter().enumerate() {
            a[(j - 1) * n + k] = Complex64::new(trig_f(family, j, uk, r), 0.0);
        }
    }
    Ok(linalg::det(&a, n)?.re)
}

/// The closed product form of the same determinant: sign, power of two,
/// single-variable sines (C only), and difference/sum sine pairs.
pub fn trig_det_factorized(family: Family, n: usize, u: &[f64], r: f64) -> f64 {
    assert_eq!(u.len(), n);
    let nf = n as f64;
    let sign = if (n * (n - 1) / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    };
    let mut d = match family {
        Family::C => {
            let mut p = sign * 2.0f64.powf(nf * (nf - 1.0));
            for &ul in u {
                p *= (ul / r).sin();
            }
            p
        }
        Family::D => sign * 2.0f64.powf((nf - 1.0) * (nf - 1.0)),
        _ => panic!("trigonometric factorization exists for families C and D only"),
    };
    for k in 1..n {
        for j in 0..k {
            d *= ((u[k] - u[j]) / (2.0 * r)).sin() * ((u[k] + u[j]) / (2.0 * r)).sin();
        }
    }
    d
}

/// Trigonometric interpolation function: the closed sine-product form.
pub fn phi_check(family: Family, u: &[f64], j: usize, z: f64, r: f64) -> f64 {
    let mut p = match family {
        Family::C => (z / r).sin() / (u[j] / r).sin(),
        Family::D => 1.0,
        _ => panic!("trigonometric interpolation exists for families C and D only"),
    };
    for (l, &ul) in u.iter().enumerate() {
        if l == j {
            continue;
        }
        p *= ((z - ul) / (2.0 * r)).sin() / ((u[j] - ul) / (2.0 * r)).sin();
        p *= ((z + ul) / (2.0 * r)).sin() / ((u[j] + ul) / (2.0 * r)).sin();
    }
    p
}

/// sin(m theta) / sin(theta), stable at the removable singularities.
fn dirichlet_ratio(m: i64, theta: f64) -> f64 {
    let k = (theta / PI).round();
    let delta = theta - k * PI;
    // (-1)^{k (m-1)} from shifting both sines by k pi.
    let sign = if ((k as i64) * (m - 1)).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };
    if delta == 0.0 {
        return sign * m as f64;
    }
    sign * (m as f64 * delta).sin() / delta.sin()
}

/// Stationary kernel of the infinite-horizon C/D processes: the
/// three-branch formula in the time difference dt = t - s.
pub fn kernel_eq_trig(family: Family, dt: f64, x: f64, y: f64, n: usize, r: f64) -> Result<f64> {
    let r2 = 2.0 * r * r;
    let cutoff = match family {
        Family::C => n as i64,
        Family::D => n as i64 - 1,
        _ => {
            return Err(Error::InvalidArgument(
                "equilibrium kernels exist for families C and D only".into(),
            ))
        }
    };
    let mode = |k: f64, z: f64| match family {
        Family::C => (k * z / r).sin(),
        _ => (k * z / r).cos(),
    };
    if dt > 0.0 {
        let mut sum = 0.0;
        for k in -cutoff..=cutoff {
            let kf = k as f64;
            let e = kf * kf * dt / r2;
            if e > MAX_MODE_EXPONENT {
                return Err(Error::OverflowWindow { exponent: e });
            }
            sum += e.exp() * mode(kf, x) * mode(kf, y);
        }
        Ok(sum / (PI * r))
    } else if dt == 0.0 {
        let m = 2 * cutoff + 1;
        let diff = dirichlet_ratio(m, (y - x) / (2.0 * r));
        let total = dirichlet_ratio(m, (y + x) / (2.0 * r));
        let combined = match family {
            Family::C => diff - total,
            _ => diff + total,
        };
        Ok(combined / (2.0 * PI * r))
    } else {
        // dt < 0: the tail over modes above the cutoff, which decays.
        let mut sum = 0.0;
        let mut conv = Convergence::new();
        let mut k = cutoff + 1;
        loop {
            let kf = k as f64;
            let term = (kf * kf * dt / r2).exp() * mode(kf, x) * mode(kf, y);
            sum += term;
            if conv.update(term.abs(), sum.abs().max(f64::MIN_POSITIVE))? {
                break;
            }
            k += 1;
        }
        Ok(-2.0 * sum / (PI * r))
    }
}

/// Equilibrium density of the infinite-horizon C/D processes.
pub fn rho_eq(family: Family, x: f64, n: usize, r: f64) -> Result<f64> {
    match family {
        Family::C => {
            let mut s = 0.0;
            for k in 1..=n {
                s += (k as f64 * x / r).sin().powi(2);
            }
            Ok(2.0 * s / (PI * r))
        }
        Family::D => {
            let mut s = 0.0;
            for k in 1..n {
                s += (k as f64 * x / r).cos().powi(2);
            }
            Ok((1.0 + 2.0 * s) / (PI * r))
        }
        _ => Err(Error::InvalidArgument(
            "equilibrium densities exist for families C and D only".into(),
        )),
    }
}

impl KernelContext {
    pub fn new(config: &Config, mode: KernelMode) -> Result<Self> {
        let bc = BoundaryCond::for_family(config.family).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "no wall-density kernel for family {}",
                config.family
            ))
        })?;
        let trig_family = matches!(config.family, Family::C | Family::D);
        let mut mart = None;
        let mut trig_phi = None;
        match mode {
            KernelMode::Elliptic => {
                mart = Some(MartingaleCtx::new(config)?);
            }
            KernelMode::Trigonometric => {
                if !trig_family {
                    return Err(Error::InvalidArgument(
                        "trigonometric kernels exist for families C and D only".into(),
                    ));
                }
                trig_phi = Some(Self::solve_trig_phi(config)?);
            }
            KernelMode::EquilibriumTrig => {
                if !trig_family {
                    return Err(Error::InvalidArgument(
                        "equilibrium kernels exist for families C and D only".into(),
                    ));
                }
            }
        }
        Ok(Self {
            mode,
            bc,
            mart,
            trig_phi,
            config: config.clone(),
        })
    }

    fn solve_trig_phi(config: &Config) -> Result<Vec<f64>> {
        let n = config.n;
        let r = config.clock.r();
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 1..=n {
            for (k, &uk) in config.u.iter().enumerate() {
                a[(j - 1) * n + k] = Complex64::new(trig_f(config.family, j, uk, r), 0.0);
            }
        }
        let inv = linalg::lu_factor(&a, n)?.inverse();
        Ok(inv.iter().map(|c| c.re).collect())
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    /// Trigonometric martingale by the coefficient route.
    pub fn m_check(&self, j: usize, t: f64, y: f64) -> Result<f64> {
        let phi = self
            .trig_phi
            .as_ref()
            .expect("m_check requires Trigonometric mode");
        let n = self.config.n;
        let r = self.config.clock.r();
        let mut sum = 0.0;
        for k in 1..=n {
            let freq = trig_freq(self.config.family, k);
            let e = freq * freq * t / (2.0 * r * r);
            if e > MAX_MODE_EXPONENT {
                return Err(Error::OverflowWindow { exponent: e });
            }
            sum += phi[j * n + (k - 1)] * e.exp() * trig_f(self.config.family, k, y, r);
        }
        Ok(sum)
    }

    /// Deviation of the trigonometric kernel from equilibrium: the mode
    /// remainder, exact and free of cancellation.
    pub fn trig_remainder(&self, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
        let phi = self
            .trig_phi
            .as_ref()
            .expect("trig_remainder requires Trigonometric mode");
        let family = self.config.family;
        let n = self.config.n;
        let r = self.config.clock.r();
        let r2 = 2.0 * r * r;
        if s <= 0.0 {
            return Err(Error::DomainViolation(
                "the mode remainder needs s > 0".into(),
            ));
        }
        let mut sum = 0.0;
        let mut conv = Convergence::new();
        let mut l = n + 1;
        loop {
            let fl = trig_freq(family, l);
            let decay = -fl * fl * s / r2;
            let mut term = 0.0;
            for k in 1..=n {
                let fk = trig_freq(family, k);
                // g_{lk} = sum_j f_l(u_j) phi_{jk} vanishes for l <= n.
                let mut g = 0.0;
                for (j, &uj) in self.config.u.iter().enumerate() {
                    g += trig_f(family, l, uj, r) * phi[j * n + (k - 1)];
                }
                let e = fk * fk * t / r2 + decay;
                if e > MAX_MODE_EXPONENT {
                    return Err(Error::OverflowWindow { exponent: e });
                }
                term += e.exp() * g * trig_f(family, k, y, r);
            }
            term *= 2.0 / (PI * r) * trig_f(family, l, x, r);
            sum += term;
            if conv.update(term.abs(), sum.abs().max(f64::MIN_POSITIVE))? {
                break;
            }
            l += 1;
        }
        Ok(sum)
    }

    /// The spatio-temporal correlation kernel K(s, x; t, y).
    pub fn corr_kernel(&self, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
        let r = self.config.clock.r();
        match self.mode {
            KernelMode::Elliptic => {
                let mart = self.mart.as_ref().expect("Elliptic mode carries mart");
                let mut sum = 0.0;
                for (j, &uj) in self.config.u.iter().enumerate() {
                    let p = interval::p_interval(self.bc, s, uj, x, r)?;
                    sum += p * mart.martingale(j, t, y)?.re;
                }
                if s > t {
                    sum -= interval::p_interval(self.bc, s - t, x, y, r)?;
                }
                Ok(sum)
            }
            KernelMode::Trigonometric => {
                let eq = kernel_eq_trig(self.config.family, t - s, x, y, self.config.n, r)?;
                Ok(eq + self.trig_remainder(s, x, t, y)?)
            }
            KernelMode::EquilibriumTrig => {
                kernel_eq_trig(self.config.family, t - s, x, y, self.config.n, r)
            }
        }
    }

    /// m-point spatio-temporal correlation function: the determinant of
    /// the kernel matrix over the given (t_i, x_i).
    pub fn corr_function(&self, points: &[(f64, f64)]) -> Result<f64> {
        let m = points.len();
        let mut a = vec![Complex64::new(0.0, 0.0); m * m];
        for (i, &(ti, xi)) in points.iter().enumerate() {
            for (j, &(tj, xj)) in points.iter().enumerate() {
                a[i * m + j] = Complex64::new(self.corr_kernel(ti, xi, tj, xj)?, 0.0);
            }
        }
        Ok(linalg::det(&a, m)?.re)
    }

    /// Probability that no particle lies in (a, b) at time t, through
    /// the exact finite-rank reduction of the Fredholm determinant:
    /// det(I_N - A), A_{jk} = integral over (a,b) of psi_j phi_k where
    /// K(t,x;t,y) = sum_j phi_j(x) psi_j(y).
    pub fn fredholm_gap(&self, t: f64, a: f64, b: f64, quad_order: usize) -> Result<f64> {
        self.fredholm_gap_gauged(t, a, b, quad_order, |_| 1.0)
    }

    /// Gap probability with the kernel conjugated by
    /// K(x,y) -> gauge(y)/gauge(x) K(x,y); the result is invariant.
    pub fn fredholm_gap_gauged(
        &self,
        t: f64,
        a: f64,
        b: f64,
        quad_order: usize,
        gauge: impl Fn(f64) -> f64,
    ) -> Result<f64> {
        if quad_order < 4 {
            return Err(Error::InvalidArgument(format!(
                "fredholm quadrature order must be at least 4, got {quad_order}"
            )));
        }
        if a >= b {
            return Ok(1.0);
        }
        // Every mode factorizes the equal-time kernel at rank N: over
        // wall densities and martingales, or over the first N modes.
        let n = self.config.n;
        let r = self.config.clock.r();
        // Factor slots: phi_j carries the (s,x) dependence, psi_j the
        // (t,y) dependence of the equal-time kernel.
        let phi_f = |j: usize, z: f64| -> Result<f64> {
            match self.mode {
                KernelMode::Elliptic | KernelMode::Trigonometric => {
                    interval::p_interval(self.bc, t, self.config.u[j], z, r)
                }
                KernelMode::EquilibriumTrig => {
                    let freq = trig_freq(self.config.family, j + 1);
                    let w = if self.config.family == Family::D && freq == 0.0 {
                        1.0 / (PI * r)
                    } else {
                        2.0 / (PI * r)
                    };
                    Ok(w * trig_mode(self.config.family, freq, z, r))
                }
            }
        };
        let psi_f = |j: usize, z: f64| -> Result<f64> {
            match self.mode {
                KernelMode::Elliptic => Ok(self
                    .mart
                    .as_ref()
                    .expect("Elliptic mode carries mart")
                    .martingale(j, t, z)?
                    .re),
                KernelMode::Trigonometric => self.m_check(j, t, z),
                KernelMode::EquilibriumTrig => {
                    let freq = trig_freq(self.config.family, j + 1);
                    Ok(trig_mode(self.config.family, freq, z, r))
                }
            }
        };
        let mut mat = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for k in 0..n {
                let entry = quad::integrate_doubling(
                    |z| {
                        let pj = psi_f(j, z).unwrap_or(f64::NAN) * gauge(z);
                        let pk = phi_f(k, z).unwrap_or(f64::NAN) / gauge(z);
                        pj * pk
                    },
                    a,
                    b,
                    quad_order,
                    FREDHOLM_QUAD_TOL,
                )?;
                let delta = if j == k { 1.0 } else { 0.0 };
                mat[j * n + k] = Complex64::new(delta - entry, 0.0);
            }
        }
        Ok(linalg::det(&mat, n)?.re)
    }
}

fn trig_mode(family: Family, freq: f64, z: f64, r: f64) -> f64 {
    match family {
        Family::C => (freq * z / r).sin(),
        _ => (freq * z / r).cos(),
    }
}

/// Rational-limit kernels: noncolliding BES(3)/BES(1) on the half line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesKind {
    Bes1,
    Bes3,
}

/// Correlation kernels built from the rational interpolation
/// polynomials Phi_j(z) = prod_{l != j} (z^2 - u_l^2)/(u_j^2 - u_l^2)
/// and their exact polynomial heat transforms.
#[derive(Debug, Clone)]
pub struct RationalKernel {
    u: Vec<f64>,
    /// Coefficients of Phi_j in powers of z^2, row j.
    coeffs: Vec<Vec<f64>>,
}

/// Heat transform of the monomial z^n: the expectation of
/// (y + i W)^n with W ~ N(0, t), a polynomial in (t, y).
fn hat_monomial(n: usize, t: f64, y: f64) -> f64 {
    let mut sum = 0.0;
    let mut m = 0;
    while 2 * m <= n {
        // C(n, 2m) (2m-1)!! (-t)^m y^{n-2m}
        let mut c = 1.0;
        for i in 0..2 * m {
            c *= (n - i) as f64 / (i + 1) as f64;
        }
        let mut dfact = 1.0;
        let mut k = 2 * m as i64 - 1;
        while k >= 3 {
            dfact *= k as f64;
            k -= 2;
        }
        sum += c * dfact * (-t).powi(m as i32) * y.powi((n - 2 * m) as i32);
        m += 1;
    }
    sum
}

impl RationalKernel {
    pub fn new(u: &[f64]) -> Result<Self> {
        let n = u.len();
        if n < 1 || u.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "rational kernels need strictly positive configuration points".into(),
            ));
        }
        for w in u.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidArgument(
                    "configuration points must be strictly increasing".into(),
                ));
            }
        }
        let mut coeffs = Vec::with_capacity(n);
        for j in 0..n {
            // Polynomial in w = z^2: prod_{l != j} (w - u_l^2) / (u_j^2 - u_l^2).
            let mut poly = vec![1.0];
            let mut denom = 1.0;
            for (l, &ul) in u.iter().enumerate() {
                if l == j {
                    continue;
                }
                let ul2 = ul * ul;
                let mut next = vec![0.0; poly.len() + 1];
                for (i, &c) in poly.iter().enumerate() {
                    next[i + 1] += c;
                    next[i] -= c * ul2;
                }
                poly = next;
                denom *= u[j] * u[j] - ul2;
            }
            for c in &mut poly {
                *c /= denom;
            }
            coeffs.push(poly);
        }
        Ok(Self {
            u: u.to_vec(),
            coeffs,
        })
    }

    /// The rational Lagrange function Phi_j(z), product form.
    pub fn phi(&self, j: usize, z: f64) -> f64 {
        let mut p = 1.0;
        for (l, &ul) in self.u.iter().enumerate() {
            if l == j {
                continue;
            }
            p *= (z * z - ul * ul) / (self.u[j] * self.u[j] - ul * ul);
        }
        p
    }

    /// Heat transform of Phi_j at (t, y).
    fn hat_phi(&self, j: usize, t: f64, y: f64) -> f64 {
        let mut sum = 0.0;
        for (k, &c) in self.coeffs[j].iter().enumerate() {
            sum += c * hat_monomial(2 * k, t, y);
        }
        sum
    }

    /// Heat transform of z Phi_j(z) at (t, y).
    fn hat_zphi(&self, j: usize, t: f64, y: f64) -> f64 {
        let mut sum = 0.0;
        for (k, &c) in self.coeffs[j].iter().enumerate() {
            sum += c * hat_monomial(2 * k + 1, t, y);
        }
        sum
    }

    /// Noncolliding BES(3)/BES(1) correlation kernels.
    pub fn kernel_bes(&self, kind: BesKind, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
        if x <= 0.0 {
            return Err(Error::DomainViolation(
                "BES kernels need x > 0 for the gauge factor".into(),
            ));
        }
        let mut sum = 0.0;
        match kind {
            BesKind::Bes3 => {
                if y <= 0.0 {
                    return Err(Error::DomainViolation(
                        "the BES(3) kernel divides by y".into(),
                    ));
                }
                for (j, &uj) in self.u.iter().enumerate() {
                    sum += interval::p_bes3(s, uj, x) * self.hat_zphi(j, t, y) / y;
                }
                if s > t {
                    sum -= interval::p_bes3(s - t, y, x);
                }
            }
            BesKind::Bes1 => {
                for (j, &uj) in self.u.iter().enumerate() {
                    sum += interval::p_bes1(s, uj, x) * self.hat_phi(j, t, y);
                }
                if s > t {
                    sum -= interval::p_bes1(s - t, y, x);
                }
            }
        }
        Ok(sum)
    }

    /// Rational C-family kernel (absorbing wall at the origin); equals
    /// (y/x) times the BES(3) kernel.
    pub fn kernel_c(&self, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
        let mut sum = 0.0;
        for (j, &uj) in self.u.iter().enumerate() {
            let p = interval::p_half_line(s, uj, x, interval::Wall::Absorbing);
            sum += p * self.hat_zphi(j, t, y) / uj;
        }
        if s > t {
            sum -= interval::p_half_line(s - t, y, x, interval::Wall::Absorbing);
        }
        Ok(sum)
    }

    /// Rational D-family kernel (reflecting wall); identical to BES(1).
    pub fn kernel_d(&self, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
        self.kernel_bes(BesKind::Bes1, s, x, t, y)
    }
}
