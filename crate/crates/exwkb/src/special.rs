//! Special functions: complex log-gamma, the entire Bessel kernels `I_nu(sqrt z)/z^{nu/2}`,
//! the Dirichlet eta function and an integral-representation Airy function.

use crate::quad::{integrate, QuadOptions};
use crate::{c, C64};
use std::f64::consts::PI;

const BERN: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Principal-ish `ln Gamma(z)` (continuous for `Re z > 0`).
pub fn ln_gamma(z: C64) -> C64 {
    if z.re < 0.5 {
        // reflection
        let s = (PI * z).sin();
        return c(PI.ln(), 0.0) - s.ln() - ln_gamma(1.0 - z);
    }
    let mut zz = z;
    let mut shift = C64::default();
    while zz.norm() < 15.0 {
        shift += zz.ln();
        zz += 1.0;
    }
    let mut s = (zz - 0.5) * zz.ln() - zz + 0.5 * (2.0 * PI).ln();
    let z2 = zz * zz;
    let mut zp = zz;
    for (k, b) in BERN.iter().enumerate() {
        let kk = (k + 1) as f64;
        s += b / (2.0 * kk * (2.0 * kk - 1.0) * zp);
        zp *= z2;
    }
    s - shift
}

pub fn gamma(z: C64) -> C64 {
    if z.re < 0.5 {
        return PI / ((PI * z).sin() * gamma(1.0 - z));
    }
    ln_gamma(z).exp()
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

/// `B_nu(z) = I_nu(sqrt z) / z^{nu/2} = sum_k (z/4)^k / (2^nu k! (k+nu)!)`, entire in `z`.
pub fn bessel_b(nu: usize, z: C64) -> C64 {
    let mut term = c(1.0 / (2f64.powi(nu as i32) * factorial(nu)), 0.0);
    let mut sum = term;
    let q = z / 4.0;
    let mut k = 0usize;
    loop {
        k += 1;
        term = term * q / (k as f64 * (k + nu) as f64);
        sum += term;
        if (k as f64) > z.norm().sqrt() + 2.0 && term.norm() <= 1e-17 * sum.norm().max(1e-300) {
            break;
        }
        if k > 2000 {
            break;
        }
    }
    sum
}

/// Modified Bessel function `I_nu(z)` for integer order.
pub fn bessel_i(nu: usize, z: C64) -> C64 {
    bessel_b(nu, z * z) * z.powu(nu as u32)
}

/// Dirichlet eta function for real `s > 0` (alternating zeta), Cohen-Villegas-Zagier.
pub fn dirichlet_eta(s: f64) -> f64 {
    let n = 32;
    let mut d = (3.0 + 8f64.sqrt()).powi(n);
    d = 0.5 * (d + 1.0 / d);
    let mut b = -1.0;
    let mut cc = -d;
    let mut sum = 0.0;
    for k in 0..n {
        cc = b - cc;
        sum += cc / ((k + 1) as f64).powf(s);
        let kk = k as f64;
        let nn = n as f64;
        b = (kk + nn) * (kk - nn) * b / ((kk + 0.5) * (kk + 1.0));
    }
    sum / d
}

/// `Ai(z)` for `Re sqrt(z) > 0` from `(1/2 pi i) int exp(t^3/3 - z t) dt` along the vertical
/// line through the saddle `t0 = sqrt(z)`.
pub fn airy_ai(z: C64) -> C64 {
    let t0 = z.sqrt();
    let a = t0.re;
    assert!(a > 1e-3, "airy_ai: saddle too close to the imaginary axis");
    let phi0 = t0 * t0 * t0 / 3.0 - z * t0;
    let u_max = (80.0 / a).sqrt();
    let f = |u: f64| {
        let iu = c(0.0, u);
        let t = t0 + iu;
        (t * t * t / 3.0 - z * t - phi0).exp()
    };
    let opts = QuadOptions { abs_tol: 1e-16, rel_tol: 1e-14, max_panels: 2000 };
    let (v, _) = integrate(f, -u_max, u_max, opts);
    v * phi0.exp() / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_half_integers() {
        let g = gamma(c(1.5, 0.0));
        assert!((g.re / (PI.sqrt() / 2.0) - 1.0).abs() < 1e-14, "{g}");
        let g = gamma(c(10.5, 0.0));
        let exact = PI.sqrt() * (1..=10).fold(1.0, |a, k| a * (2 * k - 1) as f64) / 2f64.powi(10);
        assert!((g.re / exact - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gamma_reflection_complex() {
        let z = c(0.3, 1.2);
        let lhs = gamma(z) * gamma(1.0 - z);
        let rhs = PI / (PI * z).sin();
        assert!((lhs / rhs - 1.0).norm() < 1e-13);
    }

    #[test]
    fn bessel_i0_sqrt2() {
        let v = bessel_b(0, c(2.0, 0.0));
        assert!((v.re - 1.566_082_929_756_350_5).abs() < 1e-14, "{v}");
        assert!((bessel_b(0, C64::default()).re - 1.0).abs() < 1e-16);
    }

    #[test]
    fn eta_values() {
        assert!((dirichlet_eta(2.0) - PI * PI / 12.0).abs() < 1e-15);
        assert!((dirichlet_eta(4.0) - 7.0 * PI.powi(4) / 720.0).abs() < 1e-15);
    }

    #[test]
    fn airy_reference_values() {
        assert!((airy_ai(c(1.0, 0.0)).re - 0.135_292_416_312_881_4).abs() < 1e-14);
        assert!((airy_ai(c(5.0, 0.0)).re - 1.083_444_281_360_744e-4).abs() < 1e-17);
    }
}
