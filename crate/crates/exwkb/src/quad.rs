//! Gauss-Legendre rules, adaptive Gauss-Kronrod integration of complex-valued integrands,
//! and spectral cumulative integration on Gauss-Legendre panels.

use crate::C64;
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&n) {
        return v.clone();
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_deriv(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_deriv(n, z);
        x[n - 1 - i] = z;
        w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    let out = (x, w);
    cache.lock().unwrap().insert(n, out.clone());
    out
}

fn legendre_with_deriv(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

fn legendre_all(n: usize, z: f64) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    if n >= 1 {
        p[1] = z;
    }
    for k in 2..=n {
        p[k] = ((2 * k - 1) as f64 * z * p[k - 1] - (k - 1) as f64 * p[k - 2]) / k as f64;
    }
    p
}

/// `S[i][j] = int_{-1}^{t_i} l_j(t) dt` for the Lagrange basis on the `n` Gauss-Legendre nodes.
pub fn cumulative_matrix(n: usize) -> Vec<Vec<f64>> {
    let (t, w) = gauss_legendre(n);
    let pj: Vec<Vec<f64>> = t.iter().map(|&x| legendre_all(n, x)).collect();
    let ip: Vec<Vec<f64>> = t
        .iter()
        .map(|&x| {
            let p = legendre_all(n, x);
            (0..n)
                .map(|k| {
                    if k == 0 {
                        x + 1.0
                    } else {
                        (p[k + 1] - p[k - 1]) / (2 * k + 1) as f64
                    }
                })
                .collect()
        })
        .collect();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += (2 * k + 1) as f64 / 2.0 * pj[j][k] * ip[i][k];
            }
            s[i][j] = w[j] * acc;
        }
    }
    s
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One 15-point Kronrod panel: returns (Kronrod estimate, |K - G| error).
pub fn gk15<F: FnMut(f64) -> C64>(f: &mut F, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        rk += (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            rg += (f1 + f2) * WG[j / 2];
        }
    }
    (rk * h, ((rk - rg) * h).norm())
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-13, rel_tol: 1e-12, max_panels: 4000 }
    }
}

/// Globally adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
/// Returns (value, error estimate).
pub fn integrate<F: FnMut(f64) -> C64>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> (C64, f64) {
    let (v0, e0) = gk15(&mut f, a, b);
    let mut panels = vec![(a, b, v0, e0)];
    loop {
        let total: C64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= opts.abs_tol.max(opts.rel_tol * total.norm()) || panels.len() >= opts.max_panels {
            return (total, err);
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (pa, pb, _, _) = panels.swap_remove(idx);
        let m = 0.5 * (pa + pb);
        if m <= pa || m >= pb {
            return (total, err);
        }
        let (v1, e1) = gk15(&mut f, pa, m);
        let (v2, e2) = gk15(&mut f, m, pb);
        panels.push((pa, m, v1, e1));
        panels.push((m, pb, v2, e2));
    }
}

/// Complex line integral along the straight segment `z0 -> z1`.
pub fn segment<F: FnMut(C64) -> C64>(mut f: F, z0: C64, z1: C64, opts: QuadOptions) -> (C64, f64) {
    let d = z1 - z0;
    let (v, e) = integrate(|t| f(z0 + d * t) * d, 0.0, 1.0, opts);
    (v, e)
}

/// Fixed-order Gauss-Legendre on `[a, b]`.
pub fn gl_fixed<F: FnMut(f64) -> C64>(mut f: F, a: f64, b: f64, n: usize) -> C64 {
    let (x, w) = gauss_legendre(n);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = C64::default();
    for k in 0..n {
        s += f(c + h * x[k]) * w[k];
    }
    s * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn cumulative_matrix_exact_for_polys() {
        let n = 12;
        let (t, _) = gauss_legendre(n);
        let s = cumulative_matrix(n);
        for i in 0..n {
            let v: f64 = (0..n).map(|j| s[i][j] * t[j].powi(5)).sum();
            let exact = (t[i].powi(6) - 1.0) / 6.0;
            assert!((v - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn adaptive_handles_sqrt_endpoint() {
        let (v, _) = integrate(|x| C64::new(x.sqrt(), 0.0), 0.0, 1.0, QuadOptions::default());
        assert!((v.re - 2.0 / 3.0).abs() < 1e-11);
    }
}
