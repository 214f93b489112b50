//! Optimal truncation of Borel-summable series and its hyperasymptotic refinement.
//!
//! A source is a Borel function `b` paired as `V(lambda) = 2 lambda int_C e^{2 lambda s} b(s) ds`, with
//! `C` the steepest-descent ray from infinity to the origin, plus its singular points. At each
//! singular point `s_j` the source supplies a simple-pole residue and the jump `D_j(u)` of `b`
//! across the cut `s_j + u`, `u` pointing away from `C`. `D_j` is the value after one
//! anticlockwise turn around `s_j` minus the value before it.
//!
//! With `n` terms kept, the remainder splits over singularities as
//! `R_n = sum_j P_j int_C e^{2 lambda s} kappa_j(s) ds`, `P_j = -(n+1)! / ((2 lambda)^n s_j^n)`,
//! `kappa_j(s) = (-1)^{n+1} s_j^n (1/2 pi i) oint_{K_j} b(w) (w - s)^{-n-2} dw`, with `K_j`
//! running anticlockwise around the cut.
//! Expanding `D_j` in powers of `u` turns every term into a single Laplace integral
//! `G_k(s_j) = int_C e^{2 lambda s} (s_j - s)^{-k} ds` through
//! `int_0^inf u^m (a + u)^{-n-2} du = a^{m-n-1} m! (n-m)! / (n+1)!`.

use crate::borel::{joos_kappa, joos_log_borel, joos_log_borel_taylor, BorelEvaluator, BorelSeries};
use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, integrate, QuadOptions};
use crate::special::factorial;
use crate::{c, series, C64, I};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::cell::RefCell;
use std::f64::consts::PI;

/// A Borel function with the singularity data needed for hyperasymptotics.
pub trait HyperSource: BorelEvaluator {
    /// Singular points of `b` on its principal sheet, origin excluded.
    fn singularities(&self) -> Vec<C64>;

    /// `b_0..b_n`. Defaults to Cauchy differentiation on a circle of radius `0.5 |s_0|`.
    fn taylor(&self, n: usize) -> Result<Vec<C64>> {
        let s0 = nearest_singularity(&self.singularities())?;
        cauchy_taylor(self, n, 0.5 * s0.norm())
    }

    /// Residue of the simple-pole part of `b` at `s_j`.
    fn residue(&self, _s_j: C64) -> C64 {
        C64::default()
    }

    /// Jump of `b` across the cut at `s_j + u`.
    fn jump(&self, s_j: C64, _u: C64) -> Result<C64> {
        Err(Error::InvalidInput(format!("no discontinuity data at {s_j}")))
    }

    /// Taylor coefficients of the jump in powers of `u`.
    fn jump_taylor(&self, s_j: C64, _n: usize) -> Result<Vec<C64>> {
        Err(Error::InvalidInput(format!("no discontinuity data at {s_j}")))
    }
}

fn nearest_singularity(cat: &[C64]) -> Result<C64> {
    cat.iter()
        .copied()
        .min_by(|a, b| a.norm().total_cmp(&b.norm()))
        .ok_or(Error::EmptyCatalog)
}

/// `b_0..b_n` from samples of `b` on the circle `|s| = radius`.
pub fn cauchy_taylor<E: BorelEvaluator + ?Sized>(b: &E, n: usize, radius: f64) -> Result<Vec<C64>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!("radius {radius}")));
    }
    let m = 2 * (n + 1) + 32;
    let mut vals = Vec::with_capacity(m);
    for l in 0..m {
        vals.push(b.eval(C64::from_polar(radius, 2.0 * PI * l as f64 / m as f64))?);
    }
    Ok((0..=n)
        .map(|k| {
            let acc: C64 = vals
                .iter()
                .enumerate()
                .map(|(l, v)| v * C64::from_polar(1.0, -2.0 * PI * (k * l) as f64 / m as f64))
                .sum();
            acc / (m as f64 * radius.powi(k as i32))
        })
        .collect())
}

/// A plain series with a catalog. Carries no discontinuity data, so only `p = 0` applies.
#[derive(Debug, Clone)]
pub struct SeriesSource {
    pub series: BorelSeries,
    pub catalog: Vec<C64>,
}

impl BorelEvaluator for SeriesSource {
    fn eval(&self, s: C64) -> Result<C64> {
        Ok(self.series.eval(s))
    }
}

impl HyperSource for SeriesSource {
    fn singularities(&self) -> Vec<C64> {
        self.catalog.clone()
    }

    fn taylor(&self, n: usize) -> Result<Vec<C64>> {
        let mut b = self.series.coefficients.clone();
        b.resize(n + 1, C64::default());
        Ok(b)
    }
}

/// Jump Taylor data `d_{j,m}`, `m < terms`, recovered from late coefficients.
///
/// A jump `D_j(u) = sum_m d_{j,m} u^m` at `s_j` contributes
/// `-(1/2 pi i) sum_m d_{j,m} s_j^{m-n} m! (n-m-1)! / n!` to `b_n`. The fit is the least-squares
/// solution of these relations over `n` in `from..b.len()`.
pub fn fit_jumps(b: &[C64], catalog: &[C64], terms: usize, from: usize) -> Result<Vec<Vec<C64>>> {
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    let from = from.max(terms + 1);
    let rows = b.len().saturating_sub(from);
    let cols = catalog.len() * terms;
    if terms == 0 || rows < cols {
        return Err(Error::InvalidInput(format!("{rows} coefficients for {cols} jump unknowns")));
    }
    let mut a = DMatrix::<C64>::zeros(rows, cols);
    let mut y = DVector::<C64>::zeros(rows);
    let pref = -1.0 / (2.0 * PI * I);
    for (r, n) in (from..b.len()).enumerate() {
        let mut row_max = 0.0f64;
        for (j, s) in catalog.iter().enumerate() {
            for m in 0..terms {
                // m! (n-m-1)! / n! without overflow
                let mut w = 1.0 / n as f64;
                for k in 1..=m {
                    w *= k as f64 / (n - k) as f64;
                }
                let v = pref * w * s.powi(m as i32 - n as i32);
                row_max = row_max.max(v.norm());
                a[(r, j * terms + m)] = v;
            }
        }
        let scale = 1.0 / row_max.max(1e-300);
        for k in 0..cols {
            a[(r, k)] *= scale;
        }
        y[r] = b[n] * scale;
    }
    let norms: Vec<f64> = (0..cols).map(|k| a.column(k).norm().max(1e-300)).collect();
    for (k, nk) in norms.iter().enumerate() {
        a.column_mut(k).unscale_mut(*nk);
    }
    let x = a.svd(true, true).solve(&y, 1e-13).map_err(|e| Error::IllConditioned(e.to_string()))?;
    Ok((0..catalog.len()).map(|j| (0..terms).map(|m| x[j * terms + m] / norms[j * terms + m]).collect()).collect())
}

/// Taylor coefficients with jumps fitted from their own late terms.
pub struct FittedSource {
    pub coefficients: Vec<C64>,
    pub catalog: Vec<C64>,
    pub jumps: Vec<Vec<C64>>,
}

impl FittedSource {
    pub fn new(coefficients: Vec<C64>, catalog: Vec<C64>, terms: usize, from: usize) -> Result<Self> {
        let jumps = fit_jumps(&coefficients, &catalog, terms, from)?;
        Ok(FittedSource { coefficients, catalog, jumps })
    }

    fn index(&self, s_j: C64) -> Result<usize> {
        self.catalog
            .iter()
            .position(|s| (s - s_j).norm() <= 1e-9 * (1.0 + s_j.norm()))
            .ok_or_else(|| Error::InvalidInput(format!("{s_j} is not in the catalog")))
    }
}

impl BorelEvaluator for FittedSource {
    fn eval(&self, s: C64) -> Result<C64> {
        Ok(series::eval(&self.coefficients, s))
    }
}

impl HyperSource for FittedSource {
    fn singularities(&self) -> Vec<C64> {
        self.catalog.clone()
    }

    fn taylor(&self, n: usize) -> Result<Vec<C64>> {
        if n >= self.coefficients.len() {
            return Err(Error::InvalidInput(format!("order {n} beyond the {} known coefficients", self.coefficients.len())));
        }
        Ok(self.coefficients[..=n].to_vec())
    }

    fn jump(&self, s_j: C64, u: C64) -> Result<C64> {
        Ok(series::eval(&self.jumps[self.index(s_j)?], u))
    }

    fn jump_taylor(&self, s_j: C64, n: usize) -> Result<Vec<C64>> {
        let mut d = self.jumps[self.index(s_j)?].clone();
        d.resize(n + 1, C64::default());
        Ok(d)
    }
}

const JOOS_POLES: i64 = 8;

fn joos_points() -> Vec<C64> {
    (1..=JOOS_POLES).flat_map(|n| [c(0.0, n as f64 * PI / 2.0), c(0.0, -(n as f64) * PI / 2.0)]).collect()
}

fn joos_index(s_j: C64) -> Option<i64> {
    let n = (2.0 * s_j.im / PI).round();
    (n != 0.0 && (s_j - c(0.0, n * PI / 2.0)).norm() < 1e-9).then_some(n as i64)
}

/// `g(s) = int_0^s log* chi~_{1->3}`, whose Laplace transform in the `2 lambda` pairing is
/// `log chi_{1->3}`. Logarithmic branch points at `i n pi / 2` with jump `(-1)^n / n`.
#[derive(Debug, Clone, Copy, Default)]
pub struct JoosLogSource;

impl BorelEvaluator for JoosLogSource {
    fn eval(&self, s: C64) -> Result<C64> {
        if s.norm() < 0.8 {
            return Ok(series::eval(&self.taylor(60)?, s));
        }
        let pieces = ((s.norm() / 0.25).ceil() as usize).max(1);
        let (x, w) = gauss_legendre(20);
        let h = s / pieces as f64;
        let mut acc = C64::default();
        for p in 0..pieces {
            let mid = h * (p as f64 + 0.5);
            for (xi, wi) in x.iter().zip(&w) {
                acc += joos_log_borel(mid + h * (0.5 * xi))? * (0.5 * wi);
            }
        }
        Ok(acc * h)
    }
}

impl HyperSource for JoosLogSource {
    fn singularities(&self) -> Vec<C64> {
        joos_points()
    }

    fn taylor(&self, n: usize) -> Result<Vec<C64>> {
        let f = joos_log_borel_taylor(n / 2 + 1);
        let mut g = vec![C64::default(); n + 1];
        for (m, fm) in f.iter().enumerate() {
            if 2 * m + 1 <= n {
                g[2 * m + 1] = c(fm / (2 * m + 1) as f64, 0.0);
            }
        }
        Ok(g)
    }

    fn jump(&self, s_j: C64, _u: C64) -> Result<C64> {
        let n = joos_index(s_j).ok_or_else(|| Error::InvalidInput(format!("{s_j} is not a singular point")))?;
        let sgn = if n % 2 == 0 { 1.0 } else { -1.0 };
        Ok(c(sgn / n as f64, 0.0))
    }

    fn jump_taylor(&self, s_j: C64, n: usize) -> Result<Vec<C64>> {
        let mut d = vec![C64::default(); n + 1];
        d[0] = self.jump(s_j, C64::default())?;
        Ok(d)
    }
}

/// `chi~(s) = 1 - int_0^s H`, tabulated along one ray by solving
/// `H(s) = F(s) - (1/s) int_0^s u F(u) H(s - u) du` with `F = -log* chi~`.
#[derive(Debug, Clone)]
struct RayTable {
    dir: C64,
    h: f64,
    values: Vec<C64>,
}

impl RayTable {
    fn solve(dir: C64, n: usize, h: f64) -> Result<Vec<C64>> {
        let mut uf = Vec::with_capacity(n + 1);
        let mut f = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let s = dir * (k as f64 * h);
            let fv = -joos_log_borel(s)?;
            f.push(fv);
            uf.push(fv * (k as f64 * h));
        }
        let mut hv = vec![C64::default(); n + 1];
        hv[0] = f[0];
        for k in 1..=n {
            let mut acc = uf[k] * hv[0] * 0.5;
            for i in 1..k {
                acc += uf[i] * hv[k - i];
            }
            hv[k] = f[k] - dir * acc / k as f64;
        }
        let mut out = Vec::with_capacity(n + 1);
        let mut cum = C64::default();
        out.push(c(1.0, 0.0));
        for k in 1..=n {
            cum += (hv[k - 1] + hv[k]) * (0.5 * h);
            out.push(1.0 - dir * cum);
        }
        Ok(out)
    }

    fn new(dir: C64, r_max: f64) -> Result<Self> {
        let h = 4e-3;
        let n = (r_max / h).ceil() as usize + 4;
        let coarse = Self::solve(dir, n, h)?;
        let fine = Self::solve(dir, 2 * n, 0.5 * h)?;
        let values = coarse.iter().enumerate().map(|(k, v)| (4.0 * fine[2 * k] - v) / 3.0).collect();
        Ok(RayTable { dir, h, values })
    }

    fn reach(&self) -> f64 {
        self.h * (self.values.len() - 4) as f64
    }

    /// Four-point Lagrange interpolation at radius `r`.
    fn at(&self, r: f64) -> C64 {
        let x = r / self.h;
        let i0 = (x.floor() as usize).saturating_sub(1).min(self.values.len() - 4);
        let mut acc = C64::default();
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (x - (i0 + b) as f64) / (a as f64 - b as f64);
                }
            }
            acc += self.values[i0 + a] * w;
        }
        acc
    }
}

/// The Borel function `chi~_{1->3}` of the Joos function itself, `b_n = kappa_n / n!`.
/// Off the Taylor disk it is continued along rays through the convolution equation obeyed by
/// `chi = exp(log chi)`. At `s = +-i pi / 2` the jump is `-+chi~(u)`; the lateral Stokes factor
/// `1 + e^{+-i pi lambda}` leaves no jump at the farther points.
#[derive(Debug, Default)]
pub struct JoosChiSource {
    tables: RefCell<Vec<RayTable>>,
}

impl JoosChiSource {
    pub fn new() -> Self {
        Self::default()
    }

    fn sign(s_j: C64) -> Result<f64> {
        match joos_index(s_j) {
            Some(1) => Ok(-1.0),
            Some(-1) => Ok(1.0),
            Some(_) => Ok(0.0),
            None => Err(Error::InvalidInput(format!("{s_j} is not a singular point"))),
        }
    }

    fn on_ray(&self, s: C64) -> Result<C64> {
        let r = s.norm();
        let dir = s / r;
        if let Some(t) = self.tables.borrow().iter().find(|t| (t.dir - dir).norm() < 1e-13 && t.reach() >= r) {
            return Ok(t.at(r));
        }
        let t = RayTable::new(dir, r.max(24.0))?;
        let v = t.at(r);
        self.tables.borrow_mut().push(t);
        Ok(v)
    }
}

impl BorelEvaluator for JoosChiSource {
    fn eval(&self, s: C64) -> Result<C64> {
        if s.norm() < 0.8 {
            return Ok(series::eval(&self.taylor(70)?, s));
        }
        self.on_ray(s)
    }
}

impl HyperSource for JoosChiSource {
    fn singularities(&self) -> Vec<C64> {
        joos_points()
    }

    fn taylor(&self, n: usize) -> Result<Vec<C64>> {
        Ok(joos_kappa(n).iter().enumerate().map(|(k, v)| v / factorial(k)).collect())
    }

    fn jump(&self, s_j: C64, u: C64) -> Result<C64> {
        let sg = Self::sign(s_j)?;
        if sg == 0.0 {
            return Ok(C64::default());
        }
        Ok(sg * self.eval(u)?)
    }

    fn jump_taylor(&self, s_j: C64, n: usize) -> Result<Vec<C64>> {
        let sg = Self::sign(s_j)?;
        Ok(self.taylor(n)?.into_iter().map(|v| v * sg).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TruncationRule {
    /// `n_0 = floor(2 |lambda| |s_0|)`, the index of the least term
    LeastTerm,
    /// `n_0 = floor(|lambda| |s_0|)`
    IntegerPart,
}

impl TruncationRule {
    pub fn order(self, lambda: C64, s0: C64) -> usize {
        let x = lambda.norm() * s0.norm();
        match self {
            TruncationRule::LeastTerm => (2.0 * x).floor() as usize,
            TruncationRule::IntegerPart => x.floor() as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Truncation {
    pub n0: usize,
    pub s0: C64,
    pub partial_sum: C64,
    /// `|(n0+1)! b_{n0+1} / (2 lambda)^{n0+1}|`
    pub first_omitted: f64,
}

/// `sum_{k <= n} k! b_k (-1 / (2 lambda))^k`.
pub fn partial_sum(b: &[C64], lambda: C64, n: usize) -> C64 {
    let t = -1.0 / (2.0 * lambda);
    let mut acc = C64::default();
    let mut p = c(1.0, 0.0);
    for (k, bk) in b.iter().enumerate().take(n + 1) {
        acc += bk * p;
        p *= t * (k + 1) as f64;
    }
    acc
}

pub fn optimal_truncation<S: HyperSource + ?Sized>(b: &S, lambda: C64, rule: TruncationRule) -> Result<Truncation> {
    let s0 = nearest_singularity(&b.singularities())?;
    let n0 = rule.order(lambda, s0);
    if n0 == 0 {
        return Err(Error::LambdaTooSmall(format!("|lambda s0| = {:.3}", lambda.norm() * s0.norm())));
    }
    let coef = b.taylor(n0 + 1)?;
    let first_omitted = (coef[n0 + 1] * factorial(n0 + 1) / (2.0 * lambda).powi(n0 as i32 + 1)).norm();
    Ok(Truncation { n0, s0, partial_sum: partial_sum(&coef, lambda, n0), first_omitted })
}

/// Steepest-descent Laplace direction and the cut direction opposite to it.
fn directions(lambda: C64) -> (C64, C64) {
    let ray = C64::from_polar(1.0, PI - lambda.arg());
    (ray, -ray)
}

/// `G_k(w) = int_C e^{2 lambda s} (w - s)^{-k} ds`.
pub fn laplace_kernel(lambda: C64, w: C64, k: usize) -> Result<C64> {
    let (ray, _) = directions(lambda);
    let a = 2.0 * lambda.norm();
    let proj = (w * ray.conj()).re;
    let gap = if proj <= 0.0 { w.norm() } else { (w - ray * proj).norm() };
    if gap < 1e-12 * (1.0 + w.norm()) {
        return Err(Error::RayHitsSingularity(format!("{w}")));
    }
    let scale = gap.powi(-(k as i32)) / a;
    let qo = QuadOptions { abs_tol: 1e-16 * scale, rel_tol: 1e-13, max_panels: 4000 };
    let r_max = 80.0 / a;
    let mut lo = 0.0;
    let mut step = 1.0 / a;
    let mut acc = C64::default();
    while lo < r_max {
        let hi = (lo + step).min(r_max);
        let (v, _) = integrate(|r| (-a * r).exp() * (w - ray * r).powi(-(k as i32)), lo, hi, qo);
        acc += v;
        lo = hi;
        step *= 2.0;
    }
    Ok(-acc * ray)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KernelForm {
    /// `(-1)^{n+1} s_j^n (1/2 pi i) oint_{K_j} b(w) (w - s)^{-n-2} dw`
    Exact,
    /// The log-shifted form with `(1 + t/s_j)^{-n}` and two rational factors.
    Printed,
}

/// Upper end of the cut integration, where `(|s_j| / |s_j + u|)^{n+2}` is negligible.
fn cut_length(s_j: C64, n: usize) -> f64 {
    (s_j.norm() * 10f64.powf(24.0 / (n as f64 + 2.0)) + 2.0).min(80.0)
}

/// `(1/2 pi i) int_0^{L} f(t e^{i alpha}) e^{i alpha} dt`, split into doubling panels.
fn cut_integral<F: FnMut(C64) -> Result<C64>>(mut f: F, cut: C64, len: f64, scale: f64) -> Result<C64> {
    let err: RefCell<Option<Error>> = RefCell::new(None);
    let mut g = |t: f64| match f(cut * t) {
        Ok(v) if v.re.is_finite() && v.im.is_finite() => v * cut,
        Ok(_) => {
            err.borrow_mut().get_or_insert(Error::KernelSingularityHit(format!("non-finite integrand at t = {t}")));
            C64::default()
        }
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            C64::default()
        }
    };
    let qo = QuadOptions { abs_tol: 1e-17 * scale, rel_tol: 1e-12, max_panels: 2000 };
    let mut lo = 0.0;
    let mut step = 0.25;
    let mut acc = C64::default();
    while lo < len {
        let hi = (lo + step).min(len);
        let (v, _) = integrate(&mut g, lo, hi, qo);
        if let Some(e) = err.borrow_mut().take() {
            return Err(e);
        }
        acc += v;
        lo = hi;
        step *= 1.6;
    }
    Ok(acc / (2.0 * PI * I))
}

/// `kappa_j(s)` for the singular point `s_j`, truncation order `n0` and coupling `lambda`.
pub fn remainder_kernel<S: HyperSource + ?Sized>(
    b: &S,
    s_j: C64,
    n0: usize,
    lambda: C64,
    s: C64,
    form: KernelForm,
) -> Result<C64> {
    let (_, cut) = directions(lambda);
    let off = s - s_j;
    let along = (off * cut.conj()).re;
    let gap = if along <= 0.0 { off.norm() } else { (off - cut * along).norm() };
    if gap < 1e-10 * (1.0 + s_j.norm()) {
        return Err(Error::KernelSingularityHit(format!("s = {s} lies on the cut of {s_j}")));
    }
    let n = n0 as i32;
    let len = cut_length(s_j, n0);
    let r = b.residue(s_j);
    match form {
        KernelForm::Exact => {
            let w0 = s_j - s;
            let pole = r * w0.powi(-n - 2);
            let scale = b.jump(s_j, C64::default())?.norm().max(1e-300) * w0.norm().powi(-n - 2);
            let cut_part = cut_integral(|u| Ok(b.jump(s_j, u)? * (w0 + u).powi(-n - 2)), cut, len, scale)?;
            let sgn = if n0 % 2 == 0 { -1.0 } else { 1.0 };
            Ok(sgn * s_j.powi(n) * (pole + cut_part))
        }
        KernelForm::Printed => {
            let shift = n0 as f64 / lambda;
            let k = |t: C64| {
                let l = (1.0 + t / s_j).ln() * shift;
                (1.0 + t / s_j).powi(-n) / ((t + s_j + l - s) * (t + s_j + shift + l - s))
            };
            let k0 = k(C64::default());
            if !(k0.re.is_finite() && k0.im.is_finite()) {
                return Err(Error::KernelSingularityHit(format!("s = {s}")));
            }
            let scale = b.jump(s_j, C64::default())?.norm().max(1e-300) * k0.norm();
            let cut_part = cut_integral(|u| Ok(b.jump(s_j, u)? * k(u)), cut, len, scale)?;
            Ok(r * k0 + cut_part)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HyperOptions {
    pub rule: TruncationRule,
    /// singularities within `fan_out * |s_0|` are expanded
    pub fan_out: f64,
    /// keep the final integral terms, which makes the value exact
    pub retain_remainder: bool,
}

impl Default for HyperOptions {
    fn default() -> Self {
        HyperOptions { rule: TruncationRule::LeastTerm, fan_out: 2.0, retain_remainder: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationNode {
    pub generation: usize,
    /// generation of the parent node
    pub parent: Option<usize>,
    pub singularity: Option<C64>,
    pub n_trunc: usize,
    pub partial_sum: C64,
    /// `1` at the root, `-(n+1)! / ((2 lambda)^n s_j^n)` below it
    pub prefactor: C64,
    pub kernel: Option<KernelForm>,
    /// magnitudes of the kept terms followed by the first rejected one
    pub term_magnitudes: Vec<f64>,
    /// the retained integral term, when requested
    pub retained: Option<C64>,
    pub children: Vec<GenerationNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperResult {
    pub value: C64,
    pub tree: GenerationNode,
    pub error_estimate: f64,
}

fn first_generation<S: HyperSource + ?Sized>(
    b: &S,
    lambda: C64,
    n: usize,
    s_j: C64,
    retain: bool,
) -> Result<GenerationNode> {
    let (_, cut) = directions(lambda);
    let ni = n as i32;
    let prefactor = -factorial(n + 1) / ((2.0 * lambda).powi(ni) * s_j.powi(ni));
    let sgn = if n % 2 == 0 { -1.0 } else { 1.0 };
    // P_j (-1)^{n+1} s_j^n = (-1)^n (n+1)! / (2 lambda)^n
    let outer = prefactor * sgn * s_j.powi(ni);
    let pole = b.residue(s_j) * laplace_kernel(lambda, s_j, n + 2)?;
    let d = b.jump_taylor(s_j, n)?;
    let mut terms = Vec::with_capacity(n + 1);
    for (m, dm) in d.iter().enumerate() {
        let t = if dm.norm() == 0.0 {
            C64::default()
        } else {
            let w = factorial(m) * factorial(n - m) / factorial(n + 1);
            dm * w * laplace_kernel(lambda, s_j, n + 1 - m)? / (2.0 * PI * I)
        };
        terms.push(outer * t);
    }
    if terms.iter().any(|t| !t.norm().is_finite()) {
        return Err(Error::KernelSingularityHit(format!("non-finite term at {s_j}, order {n}")));
    }
    // truncate just before the least term
    let least = (1..=n)
        .min_by(|x, y| terms[*x].norm().total_cmp(&terms[*y].norm()))
        .unwrap_or(n);
    let n_j = least - 1;
    let mut partial = outer * pole;
    for t in &terms[..=n_j] {
        partial += t;
    }
    let mut mags: Vec<f64> = terms[..=n_j].iter().map(|t| t.norm()).collect();
    mags.push(terms[least].norm());
    let retained = if retain {
        let dk = d[..=n_j].to_vec();
        let scale = d[0].norm().max(1e-300) * s_j.norm().powi(-ni - 2) / lambda.norm();
        let len = cut_length(s_j, n);
        let v = cut_integral(
            |u| Ok((b.jump(s_j, u)? - series::eval(&dk, u)) * laplace_kernel(lambda, s_j + u, n + 2)?),
            cut,
            len,
            scale,
        )?;
        Some(outer * v)
    } else {
        None
    };
    Ok(GenerationNode {
        generation: 1,
        parent: Some(0),
        singularity: Some(s_j),
        n_trunc: n_j,
        partial_sum: partial,
        prefactor,
        kernel: Some(KernelForm::Exact),
        term_magnitudes: mags,
        retained,
        children: Vec::new(),
    })
}

/// The exact remainder `V - S_n` restricted to the singular point `s_j`.
pub fn remainder_part<S: HyperSource + ?Sized>(b: &S, lambda: C64, n: usize, s_j: C64) -> Result<C64> {
    let (_, cut) = directions(lambda);
    let ni = n as i32;
    let sgn = if n % 2 == 0 { 1.0 } else { -1.0 };
    let outer = sgn * factorial(n + 1) / (2.0 * lambda).powi(ni);
    let pole = b.residue(s_j) * laplace_kernel(lambda, s_j, n + 2)?;
    let scale = b.jump(s_j, C64::default())?.norm().max(1e-300) * s_j.norm().powi(-ni - 2) / lambda.norm();
    let len = cut_length(s_j, n);
    let v = cut_integral(|u| Ok(b.jump(s_j, u)? * laplace_kernel(lambda, s_j + u, n + 2)?), cut, len, scale)?;
    Ok(outer * (pole + v))
}

/// Optimal truncation followed by `generations` levels of re-expansion.
pub fn hyper_expand<S: HyperSource + ?Sized>(b: &S, lambda: C64, generations: usize, opts: &HyperOptions) -> Result<HyperResult> {
    if generations > 1 {
        return Err(Error::TreeBudgetExceeded(format!("{generations} generations requested, at most 1 is supported")));
    }
    let tr = optimal_truncation(b, lambda, opts.rule)?;
    hyper_expand_at(b, lambda, tr.n0, generations, opts)
}

/// `hyper_expand` with the root truncation order `n` given instead of chosen by `opts.rule`.
pub fn hyper_expand_at<S: HyperSource + ?Sized>(
    b: &S,
    lambda: C64,
    n: usize,
    generations: usize,
    opts: &HyperOptions,
) -> Result<HyperResult> {
    if generations > 1 {
        return Err(Error::TreeBudgetExceeded(format!("{generations} generations requested, at most 1 is supported")));
    }
    let s0 = nearest_singularity(&b.singularities())?;
    let coef = b.taylor(n + 1)?;
    let first_omitted = (coef[n + 1] * factorial(n + 1) / (2.0 * lambda).powi(n as i32 + 1)).norm();
    let tr = Truncation { n0: n, s0, partial_sum: partial_sum(&coef, lambda, n), first_omitted };
    let mut root_terms: Vec<f64> = Vec::with_capacity(n + 2);
    let mut p = c(1.0, 0.0);
    for (k, bk) in coef.iter().enumerate() {
        root_terms.push((bk * p).norm());
        p *= -((k + 1) as f64) / (2.0 * lambda);
    }
    let reach = opts.fan_out * tr.s0.norm() * (1.0 + 1e-9);
    let fan: Vec<C64> = b.singularities().into_iter().filter(|s| s.norm() <= reach).collect();
    let mut root = GenerationNode {
        generation: 0,
        parent: None,
        singularity: None,
        n_trunc: n,
        partial_sum: tr.partial_sum,
        prefactor: c(1.0, 0.0),
        kernel: None,
        term_magnitudes: root_terms,
        retained: None,
        children: Vec::new(),
    };
    let mut value = tr.partial_sum;
    if generations == 0 {
        if opts.retain_remainder {
            let mut r = C64::default();
            for &s_j in &fan {
                r += remainder_part(b, lambda, n, s_j)?;
            }
            root.retained = Some(r);
            value += r;
        }
        return Ok(HyperResult { value, tree: root, error_estimate: tr.first_omitted });
    }
    let mut err = 0.0;
    for &s_j in &fan {
        let node = first_generation(b, lambda, n, s_j, opts.retain_remainder)?;
        value += node.partial_sum + node.retained.unwrap_or_default();
        err += node.term_magnitudes.last().copied().unwrap_or(0.0);
        root.children.push(node);
    }
    Ok(HyperResult { value, tree: root, error_estimate: err })
}
