//! Truncated power series over `Complex64`.
//!
//! A series is a coefficient slice `a[k]` of `sum a_k h^k`; every operation truncates to a
//! requested length `n`.

use crate::C64;

pub fn zeros(n: usize) -> Vec<C64> {
    vec![C64::new(0.0, 0.0); n]
}

fn get(a: &[C64], k: usize) -> C64 {
    a.get(k).copied().unwrap_or_default()
}

pub fn add(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
    (0..n).map(|k| get(a, k) + get(b, k)).collect()
}

pub fn scale(a: &[C64], s: C64) -> Vec<C64> {
    a.iter().map(|x| x * s).collect()
}

pub fn mul(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
    let mut out = zeros(n);
    for (i, ai) in a.iter().enumerate().take(n) {
        if *ai == C64::default() {
            continue;
        }
        for (j, bj) in b.iter().enumerate().take(n - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// `1/a`, requires `a[0] != 0`.
pub fn inv(a: &[C64], n: usize) -> Vec<C64> {
    let mut out = zeros(n);
    let a0 = a[0];
    out[0] = a0.inv();
    for k in 1..n {
        let mut s = C64::default();
        for j in 1..=k.min(a.len() - 1) {
            s += a[j] * out[k - j];
        }
        out[k] = -s / a0;
    }
    out
}

pub fn div(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
    mul(a, &inv(b, n), n)
}

pub fn deriv(a: &[C64]) -> Vec<C64> {
    (1..a.len()).map(|k| a[k] * k as f64).collect()
}

/// Antiderivative with zero constant term, one order longer.
pub fn integ(a: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() + 1);
    out.push(C64::default());
    for (k, x) in a.iter().enumerate() {
        out.push(x / (k as f64 + 1.0));
    }
    out
}

/// `exp(a)` via the recurrence `k e_k = sum j a_j e_{k-j}`.
pub fn exp(a: &[C64], n: usize) -> Vec<C64> {
    let mut out = zeros(n);
    out[0] = get(a, 0).exp();
    for k in 1..n {
        let mut s = C64::default();
        for j in 1..=k.min(a.len().saturating_sub(1)) {
            s += a[j] * out[k - j] * j as f64;
        }
        out[k] = s / k as f64;
    }
    out
}

/// Principal `log(a)`, requires `a[0] != 0`.
pub fn log(a: &[C64], n: usize) -> Vec<C64> {
    let d = deriv(a);
    let q = div(&d, a, n.saturating_sub(1).max(1));
    let mut out = integ(&q);
    out.truncate(n);
    out[0] = a[0].ln();
    out
}

/// `a^p` with `a[0]^p` taken as `root0`.
pub fn pow_with(a: &[C64], p: f64, root0: C64, n: usize) -> Vec<C64> {
    let a0 = a[0];
    let mut out = zeros(n);
    out[0] = root0;
    // k a0 c_k = sum_{j=1..k} (p j - (k - j)) a_j c_{k-j}
    for k in 1..n {
        let mut s = C64::default();
        for j in 1..=k.min(a.len() - 1) {
            s += a[j] * out[k - j] * (p * j as f64 - (k - j) as f64);
        }
        out[k] = s / (a0 * k as f64);
    }
    out
}

pub fn sqrt_with(a: &[C64], root0: C64, n: usize) -> Vec<C64> {
    pow_with(a, 0.5, root0, n)
}

/// `f(g(h))` with `g[0] == 0`.
pub fn compose(f: &[C64], g: &[C64], n: usize) -> Vec<C64> {
    let mut out = zeros(n);
    for k in (0..f.len().min(n)).rev() {
        out = mul(&out, g, n);
        out[0] += f[k];
    }
    out
}

/// Series reversion: given `g` with `g[0]=0`, `g[1]!=0`, returns `h` with `g(h(w)) = w`.
/// Lagrange inversion: `h_k = [w^{k-1}] phi^k / k` with `phi = w/g(w)`.
pub fn revert(g: &[C64], n: usize) -> Vec<C64> {
    let mut h = zeros(n);
    if n < 2 {
        return h;
    }
    let gq: Vec<C64> = (1..n.max(2)).map(|k| get(g, k)).collect();
    let phi = inv(&gq, n - 1);
    let mut pw = vec![C64::new(1.0, 0.0)];
    for k in 1..n {
        pw = mul(&pw, &phi, n - 1);
        h[k] = pw[k - 1] / k as f64;
    }
    h
}

/// Horner evaluation.
pub fn eval(a: &[C64], h: C64) -> C64 {
    a.iter().rev().fold(C64::default(), |acc, x| acc * h + x)
}

/// Taylor coefficients of a polynomial (given by its coefficients) about `x0`.
pub fn shift_poly(p: &[C64], x0: C64) -> Vec<C64> {
    let n = p.len();
    let mut a = p.to_vec();
    // repeated synthetic division
    for k in 0..n {
        for j in (k..n - 1).rev() {
            let t = a[j + 1] * x0;
            a[j] += t;
        }
    }
    a
}
