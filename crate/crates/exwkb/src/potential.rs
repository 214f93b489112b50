//! Polynomial potentials, turning points, `omega` and the local expansion of `omega~` at
//! turning points.

use crate::error::{Error, Result};
use crate::series;
use crate::{c, C64};
use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Complex polynomial `c_0 + c_1 x + ... + c_n x^n`, `c_n != 0`, `n >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<C64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && *coeffs.last().unwrap() == C64::default() {
            coeffs.pop();
        }
        if coeffs.len() < 2 {
            return Err(Error::InvalidInput("polynomial degree must be at least 1".into()));
        }
        if coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(Polynomial { coeffs })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&x| c(x, 0.0)).collect())
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> C64 {
        *self.coeffs.last().unwrap()
    }

    /// `q(x, E) = V(x) - E`.
    pub fn shift_energy(&self, e: C64) -> Polynomial {
        let mut co = self.coeffs.clone();
        co[0] -= e;
        Polynomial { coeffs: co }
    }

    pub fn eval(&self, x: C64) -> C64 {
        series::eval(&self.coeffs, x)
    }

    /// `(q, q', q'')` at `x`.
    pub fn eval_d2(&self, x: C64) -> (C64, C64, C64) {
        let mut p = C64::default();
        let mut dp = C64::default();
        let mut ddp = C64::default();
        for a in self.coeffs.iter().rev() {
            ddp = ddp * x + dp * 2.0;
            dp = dp * x + p;
            p = p * x + a;
        }
        (p, dp, ddp)
    }

    pub fn derivative(&self) -> Vec<C64> {
        series::deriv(&self.coeffs)
    }

    /// Taylor coefficients of `q(x0 + h)` in `h`.
    pub fn taylor_at(&self, x0: C64) -> Vec<C64> {
        series::shift_poly(&self.coeffs, x0)
    }

    /// Largest coefficient modulus, used to scale tolerances.
    pub fn scale(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Cauchy bound on the root moduli.
    pub fn root_bound(&self) -> f64 {
        let an = self.leading().norm();
        1.0 + self.coeffs[..self.degree()].iter().map(|z| z.norm() / an).fold(0.0, f64::max)
    }

    pub fn is_even(&self) -> bool {
        self.coeffs.iter().enumerate().all(|(k, z)| k % 2 == 0 || *z == C64::default())
    }
}

impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<[f64; 2]> = self.coeffs.iter().map(|z| [z.re, z.im]).collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Polynomial::new(v.into_iter().map(|p| c(p[0], p[1])).collect()).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurningPoint {
    pub location: C64,
    pub multiplicity: usize,
}

/// Tolerances for root finding.
#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    pub polish_tol: f64,
    pub cluster_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions { polish_tol: 1e-12, cluster_tol: 1e-8, max_iter: 200 }
    }
}

/// Default exclusion radius around turning points for `omega` evaluations.
pub const EXCLUSION_RADIUS: f64 = 1e-6;

pub fn eval_q(v: &Polynomial, e: C64, x: C64) -> C64 {
    v.eval(x) - e
}

fn eval_deriv_k(p: &[C64], k: usize, x: C64) -> C64 {
    let mut d = p.to_vec();
    for _ in 0..k {
        d = series::deriv(&d);
    }
    series::eval(&d, x)
}

fn companion_roots(q: &Polynomial) -> Vec<C64> {
    polynomial_roots(&q.coeffs)
}

/// Eigenvalues of the companion matrix of `p` (ascending coefficients, trailing zeros ignored).
pub fn polynomial_roots(p: &[C64]) -> Vec<C64> {
    let mut coeffs = p.to_vec();
    while coeffs.len() > 1 && coeffs.last().map_or(false, |v| v.norm() == 0.0) {
        coeffs.pop();
    }
    let n = coeffs.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    let an = coeffs[n];
    if n == 1 {
        return vec![-coeffs[0] / an];
    }
    let mut m = DMatrix::<C64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = c(1.0, 0.0);
    }
    for i in 0..n {
        m[(i, n - 1)] = -coeffs[i] / an;
    }
    match m.try_schur(f64::EPSILON, 5000) {
        Some(schur) => {
            let (_, t) = schur.unpack();
            (0..n).map(|i| t[(i, i)]).collect()
        }
        None => aberth(&coeffs),
    }
}

/// Aberth-Ehrlich simultaneous iteration, used when the QR sweep stalls.
fn aberth(p: &[C64]) -> Vec<C64> {
    let n = p.len() - 1;
    let dp = series::deriv(p);
    let r = 1.0 + p[..n].iter().map(|v| (v / p[n]).norm()).fold(0.0, f64::max);
    let mut z: Vec<C64> = (0..n).map(|k| C64::from_polar(0.5 * r, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64)).collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let f = series::eval(p, z[i]);
            let df = series::eval(&dp, z[i]);
            if f.norm() == 0.0 {
                continue;
            }
            let ratio = f / df;
            let s: C64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let w = ratio / (1.0 - ratio * s);
            z[i] -= w;
            moved = moved.max(w.norm() / (1.0 + z[i].norm()));
        }
        if moved < 1e-16 {
            break;
        }
    }
    z
}

fn newton_polish(p: &[C64], x0: C64, opts: &RootOptions) -> Option<C64> {
    let dp = series::deriv(p);
    let mut x = x0;
    let scale = 1.0 + x0.norm();
    for _ in 0..opts.max_iter {
        let f = series::eval(p, x);
        let df = series::eval(&dp, x);
        if df.norm() == 0.0 {
            return if f.norm() == 0.0 { Some(x) } else { None };
        }
        let step = f / df;
        x -= step;
        if step.norm() <= opts.polish_tol * 1e-3 * scale {
            return Some(x);
        }
    }
    let f = series::eval(p, x);
    let df = series::eval(&dp, x);
    if df.norm() > 0.0 && (f / df).norm() <= opts.polish_tol * scale {
        Some(x)
    } else {
        None
    }
}

/// All roots with multiplicities; the multiplicities add up to the degree.
pub fn turning_points(q: &Polynomial) -> Result<Vec<TurningPoint>> {
    turning_points_with(q, &RootOptions::default())
}

pub fn turning_points_with(q: &Polynomial, opts: &RootOptions) -> Result<Vec<TurningPoint>> {
    let raw = companion_roots(q);
    let p = q.coeffs();
    // polish each eigenvalue as a simple root first
    let polished: Vec<C64> = raw
        .iter()
        .map(|&r| {
            // multiple roots converge only linearly; accept the best available iterate
            newton_polish(p, r, opts).unwrap_or(r)
        })
        .collect();
    // greedy clustering, first by the tight tolerance then by multiplicity tests
    let mut clusters: Vec<Vec<C64>> = Vec::new();
    for r in polished {
        if let Some(cl) = clusters.iter_mut().find(|cl| {
            let m = mean(cl);
            (m - r).norm() <= opts.cluster_tol * (1.0 + r.norm())
        }) {
            cl.push(r);
        } else {
            clusters.push(vec![r]);
        }
    }
    // merge loose clusters that are numerically a single multiple root
    let mut merged = true;
    while merged {
        merged = false;
        'outer: for i in 0..clusters.len() {
            for j in (i + 1)..clusters.len() {
                let (mi, mj) = (mean(&clusters[i]), mean(&clusters[j]));
                if (mi - mj).norm() > 1e-4 * (1.0 + mi.norm()) {
                    continue;
                }
                let m = clusters[i].len() + clusters[j].len();
                let centre = (mi * clusters[i].len() as f64 + mj * clusters[j].len() as f64) / m as f64;
                if is_multiple_root(p, centre, m, opts) {
                    let cj = clusters.remove(j);
                    clusters[i].extend(cj);
                    merged = true;
                    break 'outer;
                }
            }
        }
    }
    let mut out = Vec::new();
    for cl in clusters {
        let m = cl.len();
        let centre = mean(&cl);
        let loc = refine_multiple(p, centre, m, opts).ok_or_else(|| {
            Error::NonConvergence(format!("root near {centre} (multiplicity {m}) failed to polish"))
        })?;
        out.push(TurningPoint { location: loc, multiplicity: m });
    }
    out.sort_by(|a, b| {
        a.location.re.total_cmp(&b.location.re).then(a.location.im.total_cmp(&b.location.im))
    });
    Ok(out)
}

fn mean(v: &[C64]) -> C64 {
    v.iter().sum::<C64>() / v.len() as f64
}

fn refine_multiple(p: &[C64], x0: C64, m: usize, opts: &RootOptions) -> Option<C64> {
    let mut d = p.to_vec();
    for _ in 0..(m - 1) {
        d = series::deriv(&d);
    }
    newton_polish(&d, x0, opts)
}

fn is_multiple_root(p: &[C64], x0: C64, m: usize, opts: &RootOptions) -> bool {
    let Some(x) = refine_multiple(p, x0, m, opts) else { return false };
    let scale = p.iter().map(|z| z.norm()).fold(0.0, f64::max) * (1.0 + x.norm()).powi(p.len() as i32);
    (0..m).all(|k| eval_deriv_k(p, k, x).norm() <= 1e-9 * scale)
}

/// `omega~(x) = omega(x) / sqrt(q(x)) = (4 q q'' - 5 q'^2) / (16 q^3)`; single valued in `x`.
#[inline]
pub fn omega_tilde_raw(q: &Polynomial, x: C64) -> C64 {
    let (v, d1, d2) = q.eval_d2(x);
    (4.0 * v * d2 - 5.0 * d1 * d1) / (16.0 * v * v * v)
}

/// `omega(x) = (1/4)[q''/q^{3/2} - (5/4) q'^2/q^{5/2}]` with the given branch of `sqrt(q)`.
#[inline]
pub fn omega_raw(q: &Polynomial, x: C64, sqrt_q: C64) -> C64 {
    omega_tilde_raw(q, x) * sqrt_q
}

fn check_proximity(q: &Polynomial, x: C64) -> Result<()> {
    for tp in turning_points(q)? {
        if (tp.location - x).norm() < EXCLUSION_RADIUS {
            return Err(Error::TurningPointProximity(format!("{x}")));
        }
    }
    Ok(())
}

/// `omega` with the principal branch of `sqrt(q)` unless a branch value is supplied.
pub fn omega(q: &Polynomial, x: C64, sqrt_q: Option<C64>) -> Result<C64> {
    check_proximity(q, x)?;
    let s = sqrt_q.unwrap_or_else(|| q.eval(x).sqrt());
    Ok(omega_raw(q, x, s))
}

pub fn omega_tilde(q: &Polynomial, x: C64) -> Result<C64> {
    check_proximity(q, x)?;
    Ok(omega_tilde_raw(q, x))
}

/// Local expansion of `omega~` at an `m`-fold turning point in the variable
/// `w = (xi - xi_p)^{2/(m+2)}`: `omega~ = sum_{k >= -(m+2)} c_k w^k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalExpansion {
    pub multiplicity: usize,
    /// exponent of the first coefficient, `-(m+2)`
    pub k_min: i32,
    pub coeffs: Vec<C64>,
}

impl LocalExpansion {
    /// Coefficient of `w^k`.
    pub fn coeff(&self, k: i32) -> C64 {
        let i = k - self.k_min;
        if i < 0 {
            C64::default()
        } else {
            self.coeffs.get(i as usize).copied().unwrap_or_default()
        }
    }
    /// Coefficient of `(xi - xi_p)^{-2}`.
    pub fn leading(&self) -> C64 {
        self.coeffs[0]
    }
}

pub fn local_expansion(q: &Polynomial, tp: &TurningPoint, order: i32) -> Result<LocalExpansion> {
    let m = tp.multiplicity;
    let k_min = -((m + 2) as i32);
    if order < k_min {
        return Err(Error::InvalidInput("order below the leading exponent".into()));
    }
    let len = (order - k_min + 1) as usize;
    let n = len + 2;
    let t = q.taylor_at(tp.location);
    // g(h) = q(x_p + h) / h^m
    let tol = 1e-8 * q.scale().max(1e-300) * (1.0 + tp.location.norm()).powi(q.degree() as i32);
    for (k, tk) in t.iter().enumerate().take(m) {
        if tk.norm() > tol {
            return Err(Error::DegenerateExpansion(format!(
                "coefficient {k} of q at the turning point is {tk}, not a zero of multiplicity {m}"
            )));
        }
    }
    let mut g: Vec<C64> = t[m..].to_vec();
    g.resize(n, C64::default());
    let g0 = g[0];
    if g0.norm() == 0.0 {
        return Err(Error::DegenerateExpansion("vanishing leading local coefficient".into()));
    }
    let mf = m as f64;
    // xi - xi_p = h^{(m+2)/2} G(h), G = sum sqrt(g)_k h^k / (k + (m+2)/2)
    let sg = series::sqrt_with(&g, g0.sqrt(), n);
    let gg: Vec<C64> = sg.iter().enumerate().map(|(k, a)| a / (k as f64 + (mf + 2.0) / 2.0)).collect();
    let p = 2.0 / (mf + 2.0);
    let hh = series::pow_with(&gg, p, gg[0].powf(p), n);
    // w = h H(h)
    let mut w_of_h = vec![C64::default()];
    w_of_h.extend_from_slice(&hh[..n - 1]);
    let h_of_w = series::revert(&w_of_h, n);
    // omega~ = h^{-(m+2)} N(h) / (16 g^3)
    let dg = series::deriv(&g);
    let ddg = series::deriv(&dg);
    let hs = |a: &[C64], s: usize| -> Vec<C64> {
        let mut v = vec![C64::default(); s];
        v.extend_from_slice(a);
        v.truncate(n);
        v
    };
    let term1 = {
        let inner = series::add(
            &series::add(&series::scale(&g, c(mf * (mf - 1.0), 0.0)), &hs(&series::scale(&dg, c(2.0 * mf, 0.0)), 1), n),
            &hs(&ddg, 2),
            n,
        );
        series::scale(&series::mul(&g, &inner, n), c(4.0, 0.0))
    };
    let lin = series::add(&series::scale(&g, c(mf, 0.0)), &hs(&dg, 1), n);
    let term2 = series::scale(&series::mul(&lin, &lin, n), c(5.0, 0.0));
    let num = series::add(&term1, &series::scale(&term2, c(-1.0, 0.0)), n);
    let g3 = series::mul(&series::mul(&g, &g, n), &g, n);
    let hpow = series::pow_with(&hh, mf + 2.0, hh[0].powf(mf + 2.0), n);
    let f_h = series::div(&series::mul(&hpow, &num, n), &series::scale(&g3, c(16.0, 0.0)), n);
    let f_w = series::compose(&f_h, &h_of_w, n);
    Ok(LocalExpansion { multiplicity: m, k_min, coeffs: f_w[..len].to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_where_qr_stalls() {
        // this quartic once sent the unbounded complex Schur sweep into an endless loop
        let e = 1.349176176641781e-1;
        let p = [c(-e, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let r = polynomial_roots(&p);
        assert_eq!(r.len(), 4);
        for z in &r {
            assert!(series::eval(&p, *z).norm() < 1e-12, "{z}");
        }
        let a = aberth(&[c(-6.0, 0.0), c(11.0, 0.0), c(-6.0, 0.0), c(1.0, 0.0)]);
        let mut re: Vec<f64> = a.iter().map(|z| z.re).collect();
        re.sort_by(|x, y| x.total_cmp(y));
        for (k, x) in re.iter().enumerate() {
            assert!((x - (k + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_examples() {
        let v = Polynomial::from_real(&[0.0, 1.0]).unwrap();
        assert_eq!(eval_q(&v, C64::default(), c(4.0, 0.0)), c(4.0, 0.0));
        let h = Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap();
        assert!(h.eval(c(0.0, 1.0)).norm() < 1e-15);
        let a = Polynomial::from_real(&[0.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        let x = ((-1.0 + 13f64.sqrt()) / 2.0).sqrt();
        assert!(eval_q(&a, c(3.0, 0.0), c(x, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn roots_of_quartic() {
        let q = Polynomial::from_real(&[-3.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        let tps = turning_points(&q).unwrap();
        assert_eq!(tps.len(), 4);
        let a = ((-1.0 + 13f64.sqrt()) / 2.0).sqrt();
        let b = ((1.0 + 13f64.sqrt()) / 2.0).sqrt();
        let expect = [c(-a, 0.0), c(0.0, -b), c(0.0, b), c(a, 0.0)];
        for e in expect {
            assert!(tps.iter().any(|t| (t.location - e).norm() < 1e-12), "{e}");
        }
    }

    #[test]
    fn double_root_detected() {
        // (x-1)^2 (x+2)
        let q = Polynomial::from_real(&[2.0, -3.0, 0.0, 1.0]).unwrap();
        let tps = turning_points(&q).unwrap();
        assert_eq!(tps.len(), 2);
        let d = tps.iter().find(|t| t.multiplicity == 2).unwrap();
        assert!((d.location - c(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn omega_examples() {
        let lin = Polynomial::from_real(&[0.0, 1.0]).unwrap();
        assert!((omega(&lin, c(1.0, 0.0), None).unwrap() - c(-5.0 / 16.0, 0.0)).norm() < 1e-15);
        let h = Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap();
        assert!((omega(&h, C64::default(), None).unwrap() - c(0.5, 0.0)).norm() < 1e-15);
        assert!(omega(&h, c(1e6, 0.0), None).unwrap().norm() < 1e-17);
        assert!(matches!(omega(&lin, c(1e-9, 0.0), None), Err(Error::TurningPointProximity(_))));
    }

    #[test]
    fn leading_local_coefficients() {
        for m in 1..=3usize {
            let mut co = vec![0.0; m + 2];
            co[m] = 1.0;
            co[m + 1] = 0.7;
            let q = Polynomial::from_real(&co).unwrap();
            let tp = TurningPoint { location: C64::default(), multiplicity: m };
            let le = local_expansion(&q, &tp, 2).unwrap();
            let mf = m as f64;
            let expect = -mf * (mf + 4.0) / (4.0 * (mf + 2.0) * (mf + 2.0));
            assert!((le.leading() - c(expect, 0.0)).norm() < 1e-12, "m={m}: {}", le.leading());
        }
        let h = Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap();
        let tp = TurningPoint { location: c(0.0, 1.0), multiplicity: 1 };
        let le = local_expansion(&h, &tp, 3).unwrap();
        assert!((le.leading() - c(-5.0 / 36.0, 0.0)).norm() < 1e-12);
    }
}
