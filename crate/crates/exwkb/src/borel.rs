//! Borel transforms of the amplitude.
//!
//! With `chi = sum_n kappa_n (-1/(2 lambda))^n` the Borel series is
//! `chi~(s) = sum_n kappa_n s^n / n!` and `chi = 2 lambda int_{inf e^{i theta}}^0 e^{2 lambda s} chi~ ds`.
//! The alternative representation uses half-integer powers and the kernel `(2 lambda)^{3/2}`.
//! Closed forms are provided for the linear potential (alternative representation) and for the
//! logarithm of the harmonic-oscillator Joos function.

use crate::error::{Error, Result};
use crate::potential::polynomial_roots;
use crate::quad::{integrate, QuadOptions};
use crate::special::{dirichlet_eta, factorial};
use crate::wkb::WkbCoefficients;
use crate::{c, series, C64, I};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::cell::RefCell;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BorelSeries {
    /// `b_n = kappa_n / n!` in the sign convention of [`crate::wkb::chi_partial`]
    pub coefficients: Vec<C64>,
    pub anchor_point: C64,
    /// `+inf` when the series terminates
    pub radius_estimate: f64,
}

impl BorelSeries {
    pub fn eval(&self, s: C64) -> C64 {
        series::eval(&self.coefficients, s)
    }
}

pub fn borel_series(k: &WkbCoefficients) -> BorelSeries {
    borel_series_from(&k.values, k.xi)
}

pub fn borel_series_from(kappa: &[C64], anchor: C64) -> BorelSeries {
    let coefficients: Vec<C64> = kappa.iter().enumerate().map(|(n, v)| v / factorial(n)).collect();
    let radius_estimate = radius_estimate(&coefficients);
    BorelSeries { coefficients, anchor_point: anchor, radius_estimate }
}

/// Radius of convergence from the tail of `|b_n|`: least-squares fit of
/// `log|b_n| = c + a log n - n log R` over the upper half of the nonzero coefficients,
/// or a two-point ratio when fewer than four are available.
pub fn radius_estimate(b: &[C64]) -> f64 {
    let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = b
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, v)| v.norm() > 1e-250 && v.norm() > 1e-14 * scale * 1e-200)
        .map(|(n, v)| (n as f64, v.norm().ln()))
        .collect();
    if pts.len() < 2 {
        return f64::INFINITY;
    }
    let tail = &pts[pts.len() / 2..];
    if tail.len() < 4 {
        let (n1, l1) = pts[pts.len() - 2];
        let (n2, l2) = pts[pts.len() - 1];
        return ((l1 - l2) / (n2 - n1)).exp();
    }
    let mut a = DMatrix::<f64>::zeros(tail.len(), 3);
    let mut y = DVector::<f64>::zeros(tail.len());
    for (i, &(n, l)) in tail.iter().enumerate() {
        a[(i, 0)] = 1.0;
        a[(i, 1)] = n.ln();
        a[(i, 2)] = -n;
        y[i] = l;
    }
    match a.svd(true, true).solve(&y, 1e-12) {
        Ok(sol) => sol[2].exp(),
        Err(_) => f64::INFINITY,
    }
}

/// Anything that can be evaluated on the Borel plane along a Laplace ray.
pub trait BorelEvaluator {
    fn eval(&self, s: C64) -> Result<C64>;
}

impl BorelEvaluator for BorelSeries {
    fn eval(&self, s: C64) -> Result<C64> {
        Ok(BorelSeries::eval(self, s))
    }
}

/// Wraps a closure as an evaluator.
pub struct FnBorel<F>(pub F);

impl<F: Fn(C64) -> C64> BorelEvaluator for FnBorel<F> {
    fn eval(&self, s: C64) -> Result<C64> {
        Ok((self.0)(s))
    }
}

/// The closed-form alternative Borel function of the linear potential at fixed `xi`.
#[derive(Debug, Clone, Copy)]
pub struct AltLinear {
    pub xi: C64,
}

impl BorelEvaluator for AltLinear {
    fn eval(&self, s: C64) -> Result<C64> {
        alt_borel_linear(self.xi, s)
    }
}

/// `log* chi~_{1->3}` of the harmonic oscillator.
#[derive(Debug, Clone, Copy)]
pub struct JoosLogBorel;

impl BorelEvaluator for JoosLogBorel {
    fn eval(&self, s: C64) -> Result<C64> {
        joos_log_borel(s)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BorelSumOptions {
    /// minimal distance between the ray and a cataloged singularity
    pub clearance: f64,
    /// the ray is cut where `|e^{2 lambda s}|` falls below this
    pub cutoff: f64,
    pub rel_tol: f64,
}

impl Default for BorelSumOptions {
    fn default() -> Self {
        BorelSumOptions { clearance: 1e-6, cutoff: 1e-18, rel_tol: 1e-14 }
    }
}

fn ray_distance(p: C64, dir: C64) -> f64 {
    let proj = (p * dir.conj()).re;
    if proj <= 0.0 {
        p.norm()
    } else {
        (p - dir * proj).norm()
    }
}

fn admit_ray(lambda: C64, dir: C64, singularities: &[C64], skip_origin: bool, opts: &BorelSumOptions) -> Result<f64> {
    let a = -(lambda * dir).re;
    if !(a > 0.0) {
        return Err(Error::NonDecayingIntegrand(format!("Re(lambda e^(i theta)) = {:.3e}", -a)));
    }
    for &p in singularities {
        if skip_origin && p.norm() <= opts.clearance {
            continue;
        }
        if ray_distance(p, dir) < opts.clearance {
            return Err(Error::RayHitsSingularity(format!("{p} within {:.1e} of the ray", opts.clearance)));
        }
    }
    Ok(a)
}

/// `int_{inf dir}^0 e^{2 lambda s} g(s) ds`. With `sqrt_map` the radial variable is `t^2`,
/// which removes a square-root branch point at the origin.
fn ray_integral<G: Fn(C64) -> Result<C64>>(g: G, lambda: C64, dir: C64, a: f64, sqrt_map: bool, opts: &BorelSumOptions) -> Result<C64> {
    let r_max = (1.0 / opts.cutoff).ln() / (2.0 * a);
    let err: RefCell<Option<Error>> = RefCell::new(None);
    let mut f = |u: f64| -> C64 {
        let (rho, jac) = if sqrt_map { (u * u, 2.0 * u) } else { (u, 1.0) };
        let s = dir * rho;
        match g(s) {
            Ok(v) if v.re.is_finite() && v.im.is_finite() => (2.0 * lambda * s).exp() * v * dir * jac,
            Ok(_) => {
                err.borrow_mut().get_or_insert(Error::NonDecayingIntegrand(format!("non-finite integrand at {s}")));
                C64::default()
            }
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                C64::default()
            }
        }
    };
    let end = if sqrt_map { r_max.sqrt() } else { r_max };
    let mut h = if sqrt_map { (0.25 / a).sqrt().min(0.5) } else { (0.25 / a).min(0.5) };
    let mut lo = 0.0;
    let mut total = C64::default();
    let mut peak: f64 = 0.0;
    while lo < end {
        let hi = (lo + h).min(end);
        let qo = QuadOptions { abs_tol: 1e-17 * peak.max(1e-300), rel_tol: opts.rel_tol, max_panels: 2000 };
        let (v, _) = integrate(&mut f, lo, hi, qo);
        if let Some(e) = err.borrow_mut().take() {
            return Err(e);
        }
        total += v;
        peak = peak.max(total.norm()).max(v.norm());
        lo = hi;
        h *= 2.0;
    }
    Ok(-total)
}

/// `2 lambda int_{inf e^{i theta}}^0 e^{2 lambda s} f(s) ds`.
pub fn borel_sum<E: BorelEvaluator + ?Sized>(f: &E, lambda: C64, ray_angle: f64, singularities: &[C64]) -> Result<C64> {
    borel_sum_with(f, lambda, ray_angle, singularities, &BorelSumOptions::default())
}

pub fn borel_sum_with<E: BorelEvaluator + ?Sized>(
    f: &E,
    lambda: C64,
    ray_angle: f64,
    singularities: &[C64],
    opts: &BorelSumOptions,
) -> Result<C64> {
    let dir = C64::from_polar(1.0, ray_angle);
    let a = admit_ray(lambda, dir, singularities, false, opts)?;
    Ok(2.0 * lambda * ray_integral(|s| f.eval(s), lambda, dir, a, false, opts)?)
}

/// `(2 lambda)^{3/2} int_{inf e^{i theta}}^0 e^{2 lambda sigma} f(sigma) d sigma`, the inverse of the
/// alternative representation. The branch point at `sigma = 0` is part of the kernel.
pub fn alt_laplace<E: BorelEvaluator + ?Sized>(f: &E, lambda: C64, ray_angle: f64, singularities: &[C64]) -> Result<C64> {
    let opts = BorelSumOptions::default();
    let dir = C64::from_polar(1.0, ray_angle);
    let a = admit_ray(lambda, dir, singularities, true, &opts)?;
    let k = (2.0 * lambda).powf(1.5);
    Ok(k * ray_integral(|s| f.eval(s), lambda, dir, a, true, &opts)?)
}

/// The half-integer-power series `sum_n (-sigma)^{n+1/2} kappa^*_n / Gamma(n + 3/2)` with
/// `kappa^*_n = (-1)^n kappa_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AltBorelSeries {
    /// `kappa_n / Gamma(n + 3/2)`
    pub coefficients: Vec<C64>,
}

impl AltBorelSeries {
    /// Principal branch of `(-sigma)^{1/2}`, cut along `sigma > 0`.
    pub fn eval(&self, sigma: C64) -> C64 {
        (-sigma).sqrt() * series::eval(&self.coefficients, sigma)
    }
}

impl BorelEvaluator for AltBorelSeries {
    fn eval(&self, s: C64) -> Result<C64> {
        Ok(AltBorelSeries::eval(self, s))
    }
}

/// `Gamma(n + 3/2)` for `n = 0..len`.
fn gamma_half_table(len: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(len);
    let mut v = PI.sqrt() / 2.0;
    for n in 0..len {
        g.push(v);
        v *= n as f64 + 1.5;
    }
    g
}

pub fn alt_borel_series(k: &WkbCoefficients) -> AltBorelSeries {
    alt_borel_series_from(&k.values)
}

pub fn alt_borel_series_from(kappa: &[C64]) -> AltBorelSeries {
    let g = gamma_half_table(kappa.len());
    AltBorelSeries { coefficients: kappa.iter().zip(g).map(|(v, gv)| v / gv).collect() }
}

const ALT_PREFACTOR: f64 = 0.690_988_298_942_670_9; // sqrt(3 / (2 pi))

struct AltParts {
    a: C64,
    r: C64,
}

fn alt_pm(xi: C64, sigma: C64, p: &AltParts) -> (C64, C64) {
    let base = -3.0 * (sigma - 0.5 * xi) * p.a;
    let d = 3.0 * p.a * p.r;
    (base + d, base - d)
}

/// Two-cube-root closed form of the alternative Borel function of the linear potential,
/// principal branches throughout.
pub fn alt_borel_linear(xi: C64, sigma: C64) -> Result<C64> {
    let tol = 1e-14 * (1.0 + xi.norm());
    if sigma.norm() <= tol || (sigma - xi).norm() <= tol {
        return Err(Error::BranchPoint(format!("sigma = {sigma}")));
    }
    let parts = AltParts { a: (1.5 * xi).sqrt(), r: (sigma * (sigma - xi)).sqrt() };
    let (p, m) = alt_pm(xi, sigma, &parts);
    Ok(ALT_PREFACTOR * (p.cbrt() - m.cbrt()))
}

fn nearest(candidates: impl Iterator<Item = C64>, prev: C64) -> C64 {
    candidates.min_by(|x, y| (x - prev).norm().total_cmp(&(y - prev).norm())).unwrap()
}

/// Values of the alternative linear Borel function continued along a polyline, starting from
/// the principal branch at `path[0]`. Every root is followed continuously.
pub fn alt_borel_linear_along(xi: C64, path: &[C64]) -> Result<Vec<C64>> {
    if path.is_empty() {
        return Ok(Vec::new());
    }
    let tol = 1e-12 * (1.0 + xi.norm());
    let s0 = path[0];
    alt_borel_linear(xi, s0)?;
    let a = (1.5 * xi).sqrt();
    let mut r = (s0 * (s0 - xi)).sqrt();
    let (p0, m0) = alt_pm(xi, s0, &AltParts { a, r });
    let (mut cp, mut cm) = (p0.cbrt(), m0.cbrt());
    let w = C64::from_polar(1.0, 2.0 * PI / 3.0);
    let mut out = vec![ALT_PREFACTOR * (cp - cm)];
    for win in path.windows(2) {
        let (u, v) = (win[0], win[1]);
        let steps = 256usize;
        for k in 1..=steps {
            let s = u + (v - u) * (k as f64 / steps as f64);
            if s.norm() <= tol || (s - xi).norm() <= tol {
                return Err(Error::BranchPoint(format!("path meets sigma = {s}")));
            }
            let rr = (s * (s - xi)).sqrt();
            r = nearest([rr, -rr].into_iter(), r);
            let (p, m) = alt_pm(xi, s, &AltParts { a, r });
            let (pc, mc) = (p.cbrt(), m.cbrt());
            cp = nearest([pc, pc * w, pc * w * w].into_iter(), cp);
            cm = nearest([mc, mc * w, mc * w * w].into_iter(), cm);
        }
        out.push(ALT_PREFACTOR * (cp - cm));
    }
    Ok(out)
}

/// `|f(end) - f(start)|` after continuing once around the circle `|sigma - center| = radius`.
pub fn alt_monodromy_defect(xi: C64, center: C64, radius: f64) -> Result<f64> {
    let n = 64;
    let path: Vec<C64> = (0..=n).map(|k| center + C64::from_polar(radius, 2.0 * PI * k as f64 / n as f64)).collect();
    let v = alt_borel_linear_along(xi, &path)?;
    Ok((v[n] - v[0]).norm())
}

/// `chi` of the linear potential `q = x` from the Airy integral: the contour runs from
/// `inf e^{-2 pi i/3}` to `inf e^{2 pi i/3}` through the saddle `u_0 = -sqrt(z)`, `z = lambda^{2/3} x`,
/// and `x` is fixed by `xi = (2/3) x^{3/2}`.
pub fn airy_integral_chi(xi: C64, lambda: C64) -> Result<C64> {
    if xi.norm() == 0.0 || lambda.norm() == 0.0 {
        return Err(Error::InvalidInput("xi and lambda must be nonzero".into()));
    }
    let x = (1.5 * xi).powf(2.0 / 3.0);
    let z = lambda.powf(2.0 / 3.0) * x;
    let sz = z.sqrt();
    let qo = QuadOptions { abs_tol: 1e-300, rel_tol: 1e-14, max_panels: 4000 };
    let mut total = C64::default();
    for (sign, ang) in [(1.0, 2.0 * PI / 3.0), (-1.0, -2.0 * PI / 3.0)] {
        let e = C64::from_polar(1.0, ang);
        // f(u) - f(u_0) = sqrt(z) (t e)^2 - t^3 / 3
        let g = |t: f64| (sz * (t * e) * (t * e) - t * t * t / 3.0).exp() * e;
        let mut t_hi = 1.0;
        while (sz * (t_hi * e) * (t_hi * e) - t_hi.powi(3) / 3.0).re > -60.0 || t_hi < 1.0 {
            t_hi *= 1.5;
        }
        let (v, _) = integrate(g, 0.0, t_hi, qo);
        total += sign * v;
    }
    let ai_scaled = total / (2.0 * PI * I);
    Ok(2.0 * PI.sqrt() * z.powf(0.25) * ai_scaled)
}

/// `log* chi~_{1->3}(s) = (1/(2is)) (1/(2is) - 1/sin(2is)) = 1/(2s sinh 2s) - 1/(4 s^2)`.
pub fn joos_log_borel(s: C64) -> Result<C64> {
    if s.norm() < 0.25 {
        let t = joos_log_borel_taylor(16);
        let s2 = s * s;
        let mut acc = C64::default();
        for v in t.iter().rev() {
            acc = acc * s2 + v;
        }
        return Ok(acc);
    }
    let n = (2.0 * s.im / PI).round();
    if n != 0.0 && (s - c(0.0, n * PI / 2.0)).norm() < 1e-12 * (1.0 + s.norm()) {
        return Err(Error::PoleHit(format!("s = {s}")));
    }
    if s.re.abs() > 300.0 {
        return Ok(-1.0 / (4.0 * s * s));
    }
    Ok(1.0 / (2.0 * s * (2.0 * s).sinh()) - 1.0 / (4.0 * s * s))
}

/// Taylor coefficients of `log* chi~_{1->3}` in powers of `s^2`:
/// `f_m = -(1/2) (-1)^m (2/pi)^{2m+2} eta(2m+2)`.
pub fn joos_log_borel_taylor(m_max: usize) -> Vec<f64> {
    (0..m_max)
        .map(|m| {
            let sgn = if m % 2 == 0 { 1.0 } else { -1.0 };
            -0.5 * sgn * (2.0 / PI).powi(2 * m as i32 + 2) * dirichlet_eta(2.0 * m as f64 + 2.0)
        })
        .collect()
}

/// Residue of `log* chi~_{1->3}` at `s = i n pi / 2`, `n != 0`.
pub fn joos_log_borel_residue(n: i64) -> Result<C64> {
    if n == 0 {
        return Err(Error::InvalidInput("s = 0 is regular".into()));
    }
    let sgn = if n % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sgn / (4.0 * c(0.0, n as f64 * PI / 2.0)))
}

/// `kappa_0..kappa_n` of the Joos function, from the exact `log chi` coefficients
/// `l_{2m+1} = f_m (2m)!` in powers of `-1/(2 lambda)`.
pub fn joos_kappa(n: usize) -> Vec<C64> {
    let f = joos_log_borel_taylor(n / 2 + 1);
    let mut l = vec![C64::default(); n + 1];
    for (m, fm) in f.iter().enumerate() {
        let k = 2 * m + 1;
        if k <= n {
            l[k] = c(fm * factorial(2 * m), 0.0);
        }
    }
    series::exp(&l, n + 1)
}

/// `sum_{n>=1} (-1)^{n+1} w^n / n = log(1 + w)`, summed term by term when it converges fast.
fn pole_sum(w: C64) -> C64 {
    if w.norm() < 0.8 {
        let mut acc = C64::default();
        let mut p = w;
        let mut n = 1.0;
        while p.norm() / n > 1e-18 * (1.0 + acc.norm()) {
            acc += p / n;
            p *= -w;
            n += 1.0;
        }
        acc
    } else {
        (1.0 + w).ln()
    }
}

/// `log chi_{1->3}(lambda)` for `lambda = r e^{i phi}`, `|phi| <= pi`, by Laplace inversion of
/// [`joos_log_borel`]: `log chi = -int_{inf e^{i theta}}^0 e^{2 lambda s} log* chi~ ds` plus the pole
/// contributions swept when the ray is rotated off the negative axis.
pub fn joos_log_chi_polar(r: f64, phi: f64) -> Result<C64> {
    if !(r > 0.0) || phi.abs() > PI {
        return Err(Error::InvalidInput(format!("lambda = {r} e^(i {phi})")));
    }
    let lambda = C64::from_polar(r, phi);
    let (lo, hi) = (PI / 2.0 - phi, 1.5 * PI - phi);
    let poles = [-PI / 2.0, PI / 2.0, 1.5 * PI, 2.5 * PI];
    let score = |t: f64| poles.iter().map(|p| (t - p).abs()).fold((t - lo).min(hi - t), f64::min);
    let theta = (-6..=6)
        .map(|k| PI - phi + k as f64 * PI / 16.0)
        .filter(|&t| t > lo && t < hi)
        .max_by(|x, y| score(*x).total_cmp(&score(*y)))
        .unwrap_or(PI - phi);
    let opts = BorelSumOptions::default();
    let dir = C64::from_polar(1.0, theta);
    let a = admit_ray(lambda, dir, &[], false, &opts)?;
    let j = ray_integral(joos_log_borel, lambda, dir, a, false, &opts)?;
    let mut out = -j;
    if theta < PI / 2.0 {
        out += pole_sum((I * PI * lambda).exp());
    } else if theta > 1.5 * PI {
        out += pole_sum((-I * PI * lambda).exp());
    }
    Ok(out)
}

pub fn joos_log_chi(lambda: C64) -> Result<C64> {
    joos_log_chi_polar(lambda.norm(), lambda.arg())
}

/// The Joos function `chi_{1->3}(lambda)` on the principal sheet `|arg lambda| <= pi`.
pub fn joos_chi(lambda: C64) -> Result<C64> {
    Ok(joos_log_chi(lambda)?.exp())
}

pub fn joos_chi_polar(r: f64, phi: f64) -> Result<C64> {
    Ok(joos_log_chi_polar(r, phi)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JoosReport {
    pub lambda: C64,
    pub chi: C64,
    /// `chi(lambda e^{-i sigma pi})`
    pub chi_rotated: C64,
    /// `|chi(lambda) chi(lambda e^{-i sigma pi}) - (1 + e^{i pi sigma lambda})|`
    pub identity_defect: f64,
    pub small_lambda: f64,
    pub chi_small: C64,
    /// `|chi(small_lambda) - sqrt 2|`
    pub small_lambda_defect: f64,
}

pub fn joos_identities(lambda: C64) -> Result<JoosReport> {
    let phi = lambda.arg();
    if phi == 0.0 || phi.abs() >= PI {
        return Err(Error::InvalidInput("the functional identity needs 0 < |arg lambda| < pi".into()));
    }
    let sigma = phi.signum();
    let r = lambda.norm();
    let chi = joos_chi_polar(r, phi)?;
    let chi_rotated = joos_chi_polar(r, phi - sigma * PI)?;
    let rhs = 1.0 + (I * PI * sigma * lambda).exp();
    let small_lambda = 1e-7;
    let chi_small = joos_chi_polar(small_lambda, 0.0)?;
    Ok(JoosReport {
        lambda,
        chi,
        chi_rotated,
        identity_defect: (chi * chi_rotated - rhs).norm(),
        small_lambda,
        chi_small,
        small_lambda_defect: (chi_small - 2f64.sqrt()).norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularityEstimate {
    pub location: C64,
    /// in `[0, 1]`, from the stability of the pole between two approximant orders
    pub confidence: f64,
}

/// Numerator and denominator of the `[l/m]` Pade approximant, or `None` if the linear system
/// is unusable.
fn pade(b: &[C64], l: usize, m: usize) -> Option<(Vec<C64>, Vec<C64>)> {
    if b.len() < l + m + 1 {
        return None;
    }
    let coef = |k: isize| if k < 0 { C64::default() } else { b[k as usize] };
    let mut a = DMatrix::<C64>::zeros(m, m);
    let mut rhs = DVector::<C64>::zeros(m);
    for row in 0..m {
        let k = (l + 1 + row) as isize;
        for j in 1..=m {
            a[(row, j - 1)] = coef(k - j as isize);
        }
        rhs[row] = -coef(k);
    }
    let d = a.svd(true, true).solve(&rhs, 1e-13 * b.iter().map(|v| v.norm()).fold(0.0, f64::max)).ok()?;
    let mut den = vec![c(1.0, 0.0)];
    den.extend(d.iter().copied());
    let num: Vec<C64> = (0..=l).map(|k| (0..=m.min(k)).map(|j| den[j] * b[k - j]).sum()).collect();
    Some((num, den))
}

fn pade_poles(b: &[C64], l: usize) -> Vec<C64> {
    let Some((num, den)) = pade(b, l, l) else { return Vec::new() };
    polynomial_roots(&den)
        .into_iter()
        .filter(|p| {
            let pn = p.norm();
            let nscale: f64 = num.iter().enumerate().map(|(k, v)| v.norm() * pn.powi(k as i32)).sum();
            let dscale: f64 = den.iter().enumerate().map(|(k, v)| v.norm() * pn.powi(k as i32)).sum();
            // drop pole-zero doublets
            series::eval(&num, *p).norm() > 1e-7 * nscale
                && pn.is_finite()
                && dscale.is_finite()
        })
        .collect()
}

/// Nearest Borel-plane singularities from poles of diagonal Pade approximants, each tagged with
/// its stability against the approximant two orders lower. Sorted by modulus.
pub fn singularity_locate(b: &BorelSeries) -> Result<Vec<SingularityEstimate>> {
    let n = b.coefficients.len().saturating_sub(1);
    if n < 8 {
        return Err(Error::InsufficientOrder(format!("{n} < 8 coefficients beyond b_0")));
    }
    let l = n / 2;
    let hi = pade_poles(&b.coefficients, l);
    let lo = pade_poles(&b.coefficients, l - 2);
    let mut out: Vec<SingularityEstimate> = hi
        .into_iter()
        .map(|p| {
            let d = lo.iter().map(|q| (q - p).norm()).fold(f64::INFINITY, f64::min);
            let rel = d / p.norm().max(1e-300);
            let confidence = if rel == 0.0 { 1.0 } else { (-rel.log10() / 8.0).clamp(0.0, 1.0) };
            SingularityEstimate { location: p, confidence }
        })
        .filter(|e| e.confidence > 0.0)
        .collect();
    out.sort_by(|x, y| x.location.norm().total_cmp(&y.location.norm()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::stokes_graph;
    use crate::potential::Polynomial;
    use crate::special::{airy_ai, ln_gamma};
    use crate::wkb::{chi_partial, kappa_series, least_term_order};

    fn joos_exact(lambda: C64) -> C64 {
        let z = lambda / 2.0;
        ((2.0 * PI).sqrt().ln() + z * (z.ln() - 1.0) - ln_gamma(z + 0.5)).exp()
    }

    fn linear_kappa(xi: f64, n: usize) -> WkbCoefficients {
        let q = Polynomial::from_real(&[0.0, 1.0]).unwrap();
        let g = stokes_graph(&q).unwrap();
        let x = (1.5 * xi).powf(2.0 / 3.0);
        kappa_series(&q, &g, c(x, 0.0), n).unwrap()
    }

    #[test]
    fn trivial_series() {
        let b = borel_series_from(&[c(1.0, 0.0)], C64::default());
        assert!(b.radius_estimate.is_infinite());
        assert_eq!(b.eval(c(3.0, 1.0)), c(1.0, 0.0));
    }

    #[test]
    fn radius_of_geometric_and_linear_series() {
        let kappa: Vec<C64> = (0..20).map(|n| c(factorial(n) / 2f64.powi(n as i32), 0.0)).collect();
        assert!((borel_series_from(&kappa, C64::default()).radius_estimate - 2.0).abs() < 1e-8);
        let k = linear_kappa(1.0, 24);
        assert!((k.xi - 1.0).norm() < 1e-10, "{}", k.xi);
        let b = borel_series(&k);
        assert!((b.radius_estimate - 1.0).abs() < 0.1, "{}", b.radius_estimate);
    }

    #[test]
    fn joos_radius() {
        let b = borel_series_from(&joos_kappa(40), C64::default());
        assert!((b.radius_estimate - PI / 2.0).abs() < 0.1 * PI / 2.0, "{}", b.radius_estimate);
    }

    #[test]
    fn sum_of_elementary_functions() {
        let lam = c(2.0, 0.5);
        let one = borel_sum(&FnBorel(|_| c(1.0, 0.0)), lam, PI, &[]).unwrap();
        assert!((one - 1.0).norm() < 1e-13, "{one}");
        let a = c(0.7, -0.3);
        let e = borel_sum(&FnBorel(move |s: C64| (a * s).exp()), lam, PI, &[]).unwrap();
        assert!((e - 2.0 * lam / (2.0 * lam + a)).norm() < 1e-13);
    }

    #[test]
    fn ray_admission() {
        let f = FnBorel(|s: C64| 1.0 / (1.0 - s));
        let e = borel_sum(&f, c(1.0, 0.0), 0.2, &[]).unwrap_err();
        assert_eq!(e.kind(), "NonDecayingIntegrand");
        let e = borel_sum(&f, c(-1.0, 0.0), 0.0, &[c(1.0, 0.0)]).unwrap_err();
        assert_eq!(e.kind(), "RayHitsSingularity");
    }

    #[test]
    fn ray_invariance() {
        let f = FnBorel(|s: C64| 1.0 / (1.0 - s));
        let lam = c(3.0, 0.0);
        let a = borel_sum(&f, lam, PI, &[c(1.0, 0.0)]).unwrap();
        let b = borel_sum(&f, lam, 0.75 * PI, &[c(1.0, 0.0)]).unwrap();
        let cc = borel_sum(&f, lam, 1.3 * PI, &[c(1.0, 0.0)]).unwrap();
        assert!((a - b).norm() < 1e-9 && (a - cc).norm() < 1e-9, "{a} {b} {cc}");
    }

    #[test]
    fn round_trip_through_truncated_series() {
        let k = linear_kappa(1.0, 30);
        let lam = c(8.0, 0.0);
        let n0 = least_term_order(&k.values, lam);
        let trunc = borel_series_from(&k.values[..=n0], k.xi);
        let v = borel_sum(&trunc, lam, PI, &[]).unwrap();
        assert!((v - chi_partial(&k.values, lam, n0)).norm() < 1e-12);
        // against the exact amplitude, within the first omitted term
        let x = 1.5f64.powf(2.0 / 3.0);
        let z = lam.powf(2.0 / 3.0) * x;
        let exact = 2.0 * PI.sqrt() * z.powf(0.25) * (lam * k.xi).exp() * airy_ai(z);
        let omitted = k.values[n0 + 1].norm() / (2.0 * lam.norm()).powi(n0 as i32 + 1);
        assert!((v - exact).norm() < omitted, "{} vs {omitted}", (v - exact).norm());
    }

    #[test]
    fn airy_integral_matches_airy_function() {
        for &(xi, lam) in &[(1.0, 6.0), (0.5, 3.0), (2.0, 1.5)] {
            let x = (1.5f64 * xi).powf(2.0 / 3.0);
            let z = c(lam, 0.0).powf(2.0 / 3.0) * x;
            let exact = 2.0 * PI.sqrt() * z.powf(0.25) * (lam * xi).exp() * airy_ai(z);
            let v = airy_integral_chi(c(xi, 0.0), c(lam, 0.0)).unwrap();
            assert!((v / exact - 1.0).norm() < 1e-11, "{v} {exact}");
        }
    }

    #[test]
    fn alt_small_sigma() {
        let xi = c(1.0, 0.0);
        assert_eq!(alt_borel_linear(xi, C64::default()).unwrap_err().kind(), "BranchPoint");
        let s = c(-1e-10, 0.0);
        let v = alt_borel_linear(xi, s).unwrap();
        assert!(v.norm() < 1e-4);
        let lead = 2.0 * (-s).sqrt() / PI.sqrt();
        assert!((v / lead - 1.0).norm() < 1e-4, "{v} {lead}");
        let ser = alt_borel_series_from(&[c(1.0, 0.0)]);
        assert_eq!(ser.eval(C64::default()), C64::default());
    }

    #[test]
    fn alt_series_matches_closed_form_inside_disk() {
        let k = linear_kappa(1.0, 30);
        let ser = alt_borel_series(&k);
        for &s in &[c(-0.3, 0.0), c(0.2, 0.3), c(-0.1, -0.5), c(0.5, 0.05)] {
            let a = ser.eval(s);
            let b = alt_borel_linear(k.xi, s).unwrap();
            assert!((a - b).norm() < 1e-6, "{s}: {a} {b}");
        }
    }

    #[test]
    fn alt_laplace_matches_airy_integral() {
        let xi = c(1.0, 0.0);
        let lam = c(6.0, 0.0);
        let v = alt_laplace(&AltLinear { xi }, lam, PI, &[C64::default(), xi]).unwrap();
        let o = airy_integral_chi(xi, lam).unwrap();
        assert!((v - o).norm() < 1e-8 * o.norm(), "{v} {o}");
    }

    #[test]
    fn alt_branch_points_only_at_zero_and_xi() {
        let xi = c(1.0, 0.0);
        for k in 0..8 {
            let centre = C64::from_polar(0.5, PI * k as f64 / 4.0) + c(0.5, 0.0) * (k % 2) as f64;
            let d = alt_monodromy_defect(xi, centre + c(0.0, 0.2), 0.1).unwrap();
            assert!(d < 1e-8, "{centre}: {d}");
        }
        assert!(alt_monodromy_defect(xi, C64::default(), 0.3).unwrap() > 0.1);
        assert!(alt_monodromy_defect(xi, xi, 0.3).unwrap() > 0.1);
    }

    #[test]
    fn joos_log_borel_values() {
        assert!((joos_log_borel(C64::default()).unwrap() + c(1.0 / 6.0, 0.0)).norm() < 1e-15);
        let s = c(0.4, 0.9);
        let v = joos_log_borel(s).unwrap();
        assert!((v - joos_log_borel(-s).unwrap()).norm() < 1e-14);
        let closed = 1.0 / (2.0 * s * (2.0 * s).sinh()) - 1.0 / (4.0 * s * s);
        assert!((v - closed).norm() < 1e-14);
        // Taylor branch against the closed form near the switch radius
        let t = c(0.24, 0.05);
        let closed = 1.0 / (2.0 * t * (2.0 * t).sinh()) - 1.0 / (4.0 * t * t);
        assert!((joos_log_borel(t).unwrap() - closed).norm() < 1e-12);
        assert_eq!(joos_log_borel(c(0.0, PI / 2.0)).unwrap_err().kind(), "PoleHit");
        for n in [1i64, -1, 2, 3] {
            let p = c(0.0, n as f64 * PI / 2.0);
            let h = 1e-6;
            let approx = (joos_log_borel(p + h).unwrap() * h + joos_log_borel(p - h).unwrap() * (-h)) / 2.0;
            assert!((approx - joos_log_borel_residue(n).unwrap()).norm() < 1e-9);
        }
    }

    #[test]
    fn partial_fraction_form_with_alternating_sign() {
        for &s in &[c(0.0, 0.0), c(0.7, 0.2), c(1.5, -0.4)] {
            let mut acc = C64::default();
            let n_max = 20000;
            for n in 1..=n_max {
                let sgn = if n % 2 == 0 { 1.0 } else { -1.0 };
                acc += 0.5 * sgn / (s * s + (n as f64 * PI / 2.0).powi(2));
            }
            let tail = 2.0 / (PI * n_max as f64).powi(2);
            assert!((acc - joos_log_borel(s).unwrap()).norm() < tail, "{s}");
        }
    }

    #[test]
    fn joos_chi_matches_gamma_form() {
        for &lam in &[c(0.5, 0.0), c(3.0, 0.0), c(7.0, 0.0), c(2.0, 1.5), c(-1.0, 2.0), c(-2.0, -0.3)] {
            let v = joos_chi(lam).unwrap();
            let e = joos_exact(lam);
            assert!((v / e - 1.0).norm() < 1e-10, "{lam}: {v} {e}");
        }
        let v = joos_chi(c(4.0, 0.0)).unwrap();
        assert!(v.im.abs() < 1e-9 * v.re.abs());
    }

    #[test]
    fn joos_identities_hold() {
        for lam in [C64::from_polar(2.0, PI / 4.0), c(1.0, -2.0), c(-3.0, 0.5), c(0.3, 0.2), c(5.0, -1.0)] {
            let r = joos_identities(lam).unwrap();
            assert!(r.identity_defect < 1e-6, "{lam}: {}", r.identity_defect);
            assert!(r.small_lambda_defect < 1e-4, "{}", r.small_lambda_defect);
        }
    }

    #[test]
    fn joos_zeros_at_odd_integers() {
        // e^{-i pi l / 2} chi(l e^{-i pi}) is real and changes sign at l = 1, 3, 5
        let mut changes = Vec::new();
        let mut prev: Option<f64> = None;
        for k in 1..=60 {
            let l = 0.1 * k as f64 + 0.05;
            let v = (C64::from_polar(1.0, -PI * l / 2.0) * joos_chi_polar(l, -PI).unwrap()).re;
            if let Some(p) = prev {
                if p * v < 0.0 {
                    changes.push(l - 0.05);
                }
            }
            prev = Some(v);
        }
        assert_eq!(changes.len(), 3, "{changes:?}");
        for (c0, want) in changes.iter().zip([1.0, 3.0, 5.0]) {
            assert!((c0 - want).abs() < 0.051, "{changes:?}");
        }
    }

    #[test]
    fn pade_locates_poles() {
        let geo = BorelSeries { coefficients: vec![c(1.0, 0.0); 13], anchor_point: C64::default(), radius_estimate: 1.0 };
        let est = singularity_locate(&geo).unwrap();
        assert!((est[0].location - 1.0).norm() < 1e-6, "{est:?}");
        let short = BorelSeries { coefficients: vec![c(1.0, 0.0); 5], ..geo };
        assert_eq!(singularity_locate(&short).unwrap_err().kind(), "InsufficientOrder");
    }

    #[test]
    fn pade_on_joos_and_linear_series() {
        let b = borel_series_from(&joos_kappa(30), C64::default());
        let est = singularity_locate(&b).unwrap();
        assert!((est[0].location.norm() - PI / 2.0).abs() < 0.05, "{est:?}");
        assert!(est[0].location.re.abs() < 0.05);
        let k = linear_kappa(1.0, 24);
        let est = singularity_locate(&borel_series(&k)).unwrap();
        assert!((est[0].location - 1.0).norm() < 0.05, "{est:?}");
    }
}
