//! Reference integrator for `psi'' = lambda^2 q(x) psi` along straight segments in the complex
//! plane, by local Taylor series (`(k+2)(k+1) c_{k+2} = lambda^2 sum_j q_j c_{k-j}`).

use crate::error::{Error, Result};
use crate::potential::Polynomial;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeState {
    pub x: C64,
    pub psi: C64,
    pub dpsi: C64,
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub order: usize,
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { order: 40, tol: 1e-16, max_steps: 200_000 }
    }
}

fn taylor_coeffs(q: &Polynomial, lambda: C64, st: &OdeState, order: usize) -> Vec<C64> {
    let qt = q.taylor_at(st.x);
    let l2 = lambda * lambda;
    let mut c = vec![C64::default(); order + 1];
    c[0] = st.psi;
    c[1] = st.dpsi;
    for k in 0..order.saturating_sub(1) {
        let mut s = C64::default();
        for (j, qj) in qt.iter().enumerate().take(k + 1) {
            s += qj * c[k - j];
        }
        c[k + 2] = l2 * s / ((k + 2) as f64 * (k + 1) as f64);
    }
    c
}

/// Integrate along the straight segment from `st.x` to `target`.
pub fn propagate_segment(q: &Polynomial, lambda: C64, st: OdeState, target: C64, opts: &OdeOptions) -> Result<OdeState> {
    let mut cur = st;
    let mut steps = 0usize;
    while cur.x != target {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::NonConvergence("ODE step budget exhausted".into()));
        }
        let c = taylor_coeffs(q, lambda, &cur, opts.order);
        let scale = cur.psi.norm().max(1e-300);
        let k = opts.order;
        // step such that the tail terms fall below tol * |psi|
        let mut h_max = f64::INFINITY;
        for j in (k - 3)..=k {
            let a = c[j].norm();
            if a > 0.0 {
                h_max = h_max.min((opts.tol * scale / a).powf(1.0 / j as f64));
            }
        }
        let dir = target - cur.x;
        let dist = dir.norm();
        let h_len = h_max.min(dist);
        if !(h_len > 0.0) || h_len < 1e-14 * (1.0 + cur.x.norm()) {
            return Err(Error::NonConvergence("ODE step size underflow".into()));
        }
        let h = if h_len >= dist { dir } else { dir * (h_len / dist) };
        let mut psi = C64::default();
        let mut dpsi = C64::default();
        let mut hp = C64::new(1.0, 0.0);
        for j in 0..=k {
            psi += c[j] * hp;
            if j + 1 <= k {
                dpsi += c[j + 1] * (j + 1) as f64 * hp;
            }
            hp *= h;
        }
        let x = if h_len >= dist { target } else { cur.x + h };
        cur = OdeState { x, psi, dpsi };
    }
    Ok(cur)
}

/// Integrate along a polyline.
pub fn propagate(q: &Polynomial, lambda: C64, st: OdeState, vertices: &[C64], opts: &OdeOptions) -> Result<OdeState> {
    let mut cur = st;
    for &v in vertices {
        if v != cur.x {
            cur = propagate_segment(q, lambda, cur, v, opts)?;
        }
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c;
    use crate::special::airy_ai;

    #[test]
    fn airy_equation() {
        // Ai'' = x Ai from x = 1 to x = 0
        let q = Polynomial::from_real(&[0.0, 1.0]).unwrap();
        let a = airy_ai(c(1.0, 0.0));
        let da = c(-0.159_147_441_296_793_28, 0.0);
        let st = OdeState { x: c(1.0, 0.0), psi: a, dpsi: da };
        let mid = propagate(&q, c(1.0, 0.0), st, &[c(0.0, 0.0)], &OdeOptions::default()).unwrap();
        assert!((mid.psi.re - 0.355_028_053_887_817_2).abs() < 1e-13, "{}", mid.psi);
        assert!((mid.dpsi.re + 0.258_819_403_792_806_8).abs() < 1e-13, "{}", mid.dpsi);
        // and back out to x = 4 along a detour
        let far = propagate(&q, c(1.0, 0.0), mid, &[c(2.0, 1.0), c(4.0, 0.0)], &OdeOptions::default()).unwrap();
        let exact = airy_ai(c(4.0, 0.0));
        assert!((far.psi / exact - 1.0).norm() < 1e-9, "{}", far.psi);
    }
}
