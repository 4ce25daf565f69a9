//! Gauss-Legendre quadrature with order doubling.
//!
//! Nodes and weights are generated by Newton iteration on the Legendre
//! polynomial recurrence; orders used here (64..1024) converge in a
//! handful of iterations from the Chebyshev initial guess. The
//! doubling wrapper integrates at order n and 2n and accepts when the
//! two agree, reporting [`Error::QuadratureNonConvergence`] otherwise.

use crate::error::{Error, Result};

/// Default starting order for the doubling wrapper.
pub const DEFAULT_ORDER: usize = 64;
/// Default agreement tolerance of the doubling wrapper.
pub const DEFAULT_QUAD_TOL: f64 = 1e-8;

/// Gauss-Legendre nodes and weights on (-1, 1).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Roots come in +/- pairs; compute the lower half and mirror.
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess for the i-th root.
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence: p_k(x), k = 0..n.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            // Derivative from p_n and p_{n-1}.
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integrates f over [a, b] at fixed Gauss-Legendre order.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, order: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        sum += w * f(mid + half * x);
    }
    sum * half
}

/// Integrates f over [a, b], doubling the order from `start_order`
/// until two successive results agree to `tol` (absolute, with a
/// relative floor at the result's magnitude).
pub fn integrate_doubling<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    start_order: usize,
    tol: f64,
) -> Result<f64> {
    let mut order = start_order.max(2);
    let mut prev = integrate(&mut f, a, b, order);
    for _ in 0..5 {
        order *= 2;
        let next = integrate(&mut f, a, b, order);
        let delta = (next - prev).abs();
        if delta <= tol * next.abs().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    let final_delta = {
        let next = integrate(&mut f, a, b, order * 2);
        (next - prev).abs()
    };
    Err(Error::QuadratureNonConvergence {
        order,
        delta: final_delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nodes_are_symmetric_and_weights_sum_to_two() {
        for n in [8, 64, 65] {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
            for i in 0..n {
                assert_relative_eq!(x[i], -x[n - 1 - i], epsilon = 1e-15);
            }
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn exact_for_polynomials_below_twice_the_order() {
        // Order n integrates degree 2n-1 exactly: check x^13 and x^14 at n=8.
        let i13 = integrate(|x| x.powi(13), -0.3, 1.1, 8);
        assert_relative_eq!(
            i13,
            (1.1f64.powi(14) - (-0.3f64).powi(14)) / 14.0,
            max_relative = 1e-13
        );
        let i14 = integrate(|x| x.powi(14), 0.0, 1.0, 8);
        assert_relative_eq!(i14, 1.0 / 15.0, max_relative = 1e-12);
    }

    #[test]
    fn exponential_integral() {
        let got = integrate(f64::exp, 0.0, 2.0, 64);
        assert_relative_eq!(got, 2.0f64.exp() - 1.0, max_relative = 1e-14);
    }

    #[test]
    fn doubling_converges_and_reports_failure() {
        let got =
            integrate_doubling(|x: f64| (-x).exp() * (8.0 * x).cos(), 0.0, 3.0, 8, 1e-10).unwrap();
        // Antiderivative e^{-x}(8 sin 8x - cos 8x)/65.
        let want = ((-3.0f64).exp() * (8.0 * 24.0f64.sin() - 24.0f64.cos()) + 1.0) / 65.0;
        assert_relative_eq!(got, want, max_relative = 1e-9);
        // A discontinuous, oscillatory integrand at absurd tolerance fails.
        let err = integrate_doubling(|x: f64| (1.0 / (x + 1e-9)).sin(), 0.0, 1.0, 2, 1e-15);
        assert!(matches!(err, Err(Error::QuadratureNonConvergence { .. })));
    }
}
