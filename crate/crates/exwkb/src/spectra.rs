//! Energy levels of even single-well potentials: the harmonic reference, the leading
//! quantization condition with a least-term truncated amplitude, its first exponentially small
//! correction, and a Hermite-basis diagonalization used as independent truth.
//!
//! Units follow `psi'' = lambda^2 (V - E) psi`, so `-psi''/lambda^2 + V psi = E psi` and the
//! harmonic levels of `V = x^2` are `(2n + 1) / lambda`.

use crate::borel::joos_chi_polar;
use crate::error::{Error, Result};
use crate::geometry::{loop_action, outward_branch, straight_action, tp_distances, ContourPath};
use crate::hyper::{fit_jumps, hyper_expand_at, partial_sum, FittedSource, HyperOptions, HyperSource, TruncationRule};
use crate::potential::{turning_points, Polynomial};
use crate::special::factorial;
use crate::topo::{phi0, phi_direct, taylor_at_origin, TopoOptions, XiPath};
use crate::wkb::kappa_along;
use crate::xipath::{ActionPath, PathOptions};
use crate::{c, C64, I};
use nalgebra::DMatrix;
use serde::Serialize;
use std::f64::consts::PI;

/// `chi_{1->3}(Lambda e^{i pi}) e^{i pi Lambda / 2}`, real for `Lambda > 0`, vanishing at the
/// harmonic levels `Lambda = 2n + 1`.
pub fn harmonic_amplitude(big_lambda: f64) -> Result<f64> {
    let v = joos_chi_polar(big_lambda, PI)? * C64::from_polar(1.0, 0.5 * PI * big_lambda);
    Ok(v.re)
}

/// The `n`-th level of `V = x^2` from the zeros of the resummed amplitude: `E = Lambda_n / lambda`.
pub fn harmonic_reference(lambda: f64, n: usize) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda = {lambda}")));
    }
    let h = 0.25;
    let mut found = 0usize;
    let mut a = h;
    let mut fa = harmonic_amplitude(a)?;
    while a < 4.0 * (n as f64 + 2.0) {
        let b = a + h;
        let fb = harmonic_amplitude(b)?;
        if fa == 0.0 || fa.signum() != fb.signum() {
            if found == n {
                let root = bisect(|x| harmonic_amplitude(x), a, b, 1e-14)?;
                return Ok(root / lambda);
            }
            found += 1;
        }
        a = b;
        fa = fb;
    }
    Err(Error::RootBracketingFailed(format!("level {n} not bracketed")))
}

fn bisect<F: Fn(f64) -> Result<f64>>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoRootInBracket(format!("[{a}, {b}]")));
    }
    while b - a > tol * (1.0 + a.abs()) {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

fn real_coeffs(v: &Polynomial) -> Result<Vec<f64>> {
    v.coeffs()
        .iter()
        .map(|c| if c.im.abs() <= 1e-14 * (1.0 + c.re.abs()) { Ok(c.re) } else { Err(Error::InvalidInput("complex potential".into())) })
        .collect()
}

/// `<0| H |0>` of the oscillator ground state with frequency `w`.
fn trial_energy(v: &[f64], lambda: f64, w: f64) -> f64 {
    let mut e = 0.5 * w;
    let mut moment = 1.0;
    for (k, c) in v.iter().enumerate() {
        if k % 2 == 1 {
            continue;
        }
        if k > 0 {
            moment *= (k - 1) as f64 / (2.0 * w);
        }
        e += lambda * lambda * c * moment;
    }
    e
}

fn basis_frequency(v: &[f64], lambda: f64) -> f64 {
    let (mut lo, mut hi) = ((1e-3f64).ln(), (1e4 * lambda.max(1.0)).ln());
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if trial_energy(v, lambda, a.exp()) < trial_energy(v, lambda, b.exp()) {
            hi = b;
        } else {
            lo = a;
        }
    }
    (0.5 * (lo + hi)).exp()
}

fn eigenvalues(v: &[f64], lambda: f64, n: usize) -> Vec<f64> {
    let w = basis_frequency(v, lambda);
    let m = n + v.len() + 2;
    let mut x = DMatrix::<f64>::zeros(m, m);
    for k in 0..m - 1 {
        let e = ((k + 1) as f64 / (2.0 * w)).sqrt();
        x[(k, k + 1)] = e;
        x[(k + 1, k)] = e;
    }
    let mut pot = DMatrix::<f64>::zeros(m, m);
    for c in v.iter().rev() {
        pot = &pot * &x;
        for k in 0..m {
            pot[(k, k)] += c;
        }
    }
    let x2 = &x * &x;
    let mut h = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let kin = if i == j { w * (2 * i + 1) as f64 } else { 0.0 } - w * w * x2[(i, j)];
            h[(i, j)] = kin + lambda * lambda * pot[(i, j)];
        }
    }
    let h = 0.5 * (&h + h.transpose());
    let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().map(|e| e / (lambda * lambda)).collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Lowest levels of `-psi''/lambda^2 + V psi = E psi` in an oscillator basis of `basis_size`
/// functions. Levels are returned while doubling the basis moves them by less than `1e-10`.
pub fn diagonalize_oracle(v: &Polynomial, lambda: f64, basis_size: usize) -> Result<Vec<f64>> {
    let c = real_coeffs(v)?;
    let d = v.degree();
    if d < 2 || d % 2 == 1 || !(c[d] > 0.0) {
        return Err(Error::NotConfining(format!("degree {d}, leading coefficient {}", c[d])));
    }
    if !(lambda > 0.0) || basis_size < 8 {
        return Err(Error::InvalidInput(format!("lambda = {lambda}, basis {basis_size}")));
    }
    let small = eigenvalues(&c, lambda, basis_size);
    let large = eigenvalues(&c, lambda, 2 * basis_size);
    let ok: Vec<f64> = small
        .iter()
        .zip(&large)
        .take_while(|(a, b)| (*a - *b).abs() < 1e-10 * a.abs().max(1.0))
        .map(|(a, _)| *a)
        .collect();
    if ok.is_empty() {
        return Err(Error::BasisNotConverged(format!("ground level moved by {:.2e}", (small[0] - large[0]).abs())));
    }
    Ok(ok)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Parity {
    Even,
    Odd,
}


impl Parity {
    pub fn of(n: usize) -> Parity {
        if n % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// `+1` for even levels, `-1` for odd ones.
    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Where the Taylor data of the amplitude's Borel function come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AmplitudeSource {
    /// Cauchy coefficients of `Phi^(0) + Phi^(2)` on a small circle around the origin
    Topological,
    /// the Riccati tower integrated along the connection path
    Riccati,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralOptions {
    pub rule: TruncationRule,
    pub amplitude: AmplitudeSource,
    /// quadrature tolerance; `d chi0 / dE` uses the step `quad_tol^{1/3} E0`
    pub quad_tol: f64,
    /// Riccati orders computed for the jump fit
    pub riccati_order: usize,
    /// first coefficient index entering the jump fit
    pub fit_from: usize,
    /// cap on the number of fitted jump coefficients per singular point
    pub fit_terms: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            rule: TruncationRule::LeastTerm,
            amplitude: AmplitudeSource::Topological,
            quad_tol: 1e-12,
            riccati_order: 30,
            fit_from: 10,
            fit_terms: 2,
        }
    }
}

fn check_even(v: &Polynomial) -> Result<Vec<f64>> {
    let c = real_coeffs(v)?;
    let d = v.degree();
    if d < 2 || d % 2 == 1 || !(c[d] > 0.0) {
        return Err(Error::NotConfining(format!("degree {d}, leading coefficient {}", c[d])));
    }
    if c.iter().skip(1).step_by(2).any(|x| *x != 0.0) {
        return Err(Error::InvalidInput("potential is not even".into()));
    }
    Ok(c)
}

/// Turning-point data of an even single well at one energy.
#[derive(Debug, Clone)]
struct Well {
    q: Polynomial,
    /// the positive real turning point
    a: f64,
    /// `int_{a}^{c} sqrt(q)` to the upper complex turning point nearest in action
    zeta_c: Option<C64>,
    /// `int_{a}^{-a} sqrt(q)`
    zeta_a: C64,
    /// connection path from the infinity of sector 1 to that of sector `deg/2 + 1`
    contour: ContourPath,
}

impl Well {
    fn new(v: &Polynomial, e: f64) -> Result<Well> {
        let q = v.shift_energy(c(e, 0.0));
        let tps: Vec<C64> = turning_points(&q)?.into_iter().map(|t| t.location).collect();
        let real: Vec<f64> = tps.iter().filter(|x| x.im.abs() <= 1e-9 * (1.0 + x.norm())).map(|x| x.re).collect();
        if real.len() != 2 || !(real[0] * real[1] < 0.0) {
            return Err(Error::InvalidInput(format!("E = {e} is not a single-well energy ({} real turning points)", real.len())));
        }
        let a = real[0].abs();
        let ar = c(a, 0.0);
        let zeta_a = straight_action(&q, ar, -ar)?;
        let mut upper: Option<(C64, C64)> = None;
        for t in tps.iter().filter(|x| x.im > 1e-9 * (1.0 + x.norm())) {
            let z = straight_action(&q, ar, *t)?;
            if upper.map_or(true, |(_, zb)| z.norm() < zb.norm()) {
                upper = Some((*t, z));
            }
        }
        let half = v.degree() / 2;
        let target = C64::from_polar(1.0, PI * half as f64 / (half as f64 + 1.0));
        let r = 1.5 * tps.iter().map(|x| x.norm()).fold(0.0, f64::max) + 0.5;
        let y_max = upper.map_or(2.0 * a, |(t, _)| t.im);
        let x0 = c(r, 0.0);
        let x1 = target * r;
        // left of the imaginary axis, below the upper turning point
        let w = y_max * c(-0.2, 0.65);
        let contour = ContourPath::from_infinity(c(1.0, 0.0), vec![x0, w, x1], outward_branch(&q, x0, c(1.0, 0.0)))
            .with_end_at_infinity(target);
        Ok(Well { q, a, zeta_c: upper.map(|(_, z)| z), zeta_a, contour })
    }

    /// `{zeta_c, -zeta_c, conj zeta_c, -conj zeta_c}`
    fn catalog(&self) -> Vec<C64> {
        match self.zeta_c {
            Some(z) => vec![z, -z, z.conj(), -z.conj()],
            None => Vec::new(),
        }
    }

    fn loop_action(&self) -> Result<C64> {
        loop_action(&self.q, c(self.a, 0.0), c(-self.a, 0.0))
    }

    /// `b_0..b_order` of the amplitude's Borel function, `b_n = kappa_n / n!`.
    fn borel_coefficients(&self, order: usize, src: AmplitudeSource) -> Result<Vec<C64>> {
        match src {
            AmplitudeSource::Topological => {
                let xp = XiPath::new(&self.q, &self.contour)?;
                let radius = 0.4 * tp_distances(&self.q)?.minimal;
                let o = TopoOptions::default();
                let mut b = taylor_at_origin(|s| Ok(phi0(&xp, s) + phi_direct(2, &xp, s, &o)?), radius, (2 * order + 8).max(48), order)?;
                b[0] = c(1.0, 0.0);
                Ok(b)
            }
            AmplitudeSource::Riccati => {
                let opts = PathOptions { jet_order: order + 4, gl_order: 24, tol: 3e-15, max_panels: 40_000 };
                let ap = ActionPath::new(&self.q, &self.contour, opts)?;
                let k = kappa_along(&ap, order)?;
                Ok(k.iter().enumerate().map(|(n, x)| x / factorial(n)).collect())
            }
        }
    }
}

/// `theta(E) = Re((lambda / 2i) oint sqrt(V - E))`, equal to `-pi (n + 1/2)` at the
/// Bohr-Sommerfeld levels.
fn theta(v: &Polynomial, lambda: f64, e: f64) -> Result<f64> {
    let w = Well::new(v, e)?;
    Ok((c(lambda, 0.0) / (2.0 * I) * w.loop_action()?).re)
}

/// Energy with `theta(E) = target`, `target < 0`.
fn solve_theta(v: &Polynomial, lambda: f64, target: f64) -> Result<f64> {
    let e_min = v.coeffs()[0].re;
    let mut hi = e_min + 1.0 / lambda;
    let mut steps = 0;
    while theta(v, lambda, hi)? > target {
        hi = e_min + 2.0 * (hi - e_min);
        steps += 1;
        if steps > 200 {
            return Err(Error::RootBracketingFailed(format!("theta = {target}")));
        }
    }
    let mut lo = e_min;
    while hi - lo > 1e-15 * hi.abs().max(1e-300) {
        let m = 0.5 * (lo + hi);
        if m == lo || m == hi {
            break;
        }
        if theta(v, lambda, m)? > target {
            lo = m;
        } else {
            hi = m;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `chi0` at energy `e`, truncated after `n0` terms.
fn chi0_at(v: &Polynomial, lambda: f64, e: f64, n0: usize, src: AmplitudeSource) -> Result<C64> {
    let b = Well::new(v, e)?.borel_coefficients(n0.max(1), src)?;
    Ok(partial_sum(&b, c(lambda, 0.0), n0))
}

/// Result of the leading quantization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeadingLevel {
    pub energy: f64,
    /// truncation order of `chi0`, fixed at the Bohr-Sommerfeld energy
    pub n0: usize,
    pub bohr_sommerfeld: f64,
    /// the real form had no sign change and the phase root was returned
    pub phase_root: bool,
}

fn check_level(lambda: f64, n: usize, parity: Parity) -> Result<()> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda = {lambda}")));
    }
    if Parity::of(n) != parity {
        return Err(Error::InvalidInput(format!("level {n} has parity {:?}", Parity::of(n))));
    }
    Ok(())
}

/// Root of `sin theta(E) +- Re chi0(E) = 0` next to the `n`-th Bohr-Sommerfeld level.
pub fn quantize_leading(v: &Polynomial, lambda: f64, n: usize, parity: Parity) -> Result<f64> {
    Ok(quantize_leading_with(v, lambda, n, parity, &SpectralOptions::default())?.energy)
}

pub fn quantize_leading_with(v: &Polynomial, lambda: f64, n: usize, parity: Parity, opts: &SpectralOptions) -> Result<LeadingLevel> {
    check_level(lambda, n, parity)?;
    check_even(v)?;
    let sg = parity.sign();
    let theta_c = -PI * (n as f64 + 0.5);
    let e_c = solve_theta(v, lambda, theta_c)?;
    let n0 = match Well::new(v, e_c)?.zeta_c {
        Some(z) => {
            let n0 = opts.rule.order(c(lambda, 0.0), z);
            if n0 == 0 {
                return Err(Error::LambdaTooSmall(format!("|lambda zeta_C| = {:.3}", lambda * z.norm())));
            }
            n0
        }
        None => 0,
    };
    let src = opts.amplitude;
    let f = |e: f64| -> Result<f64> { Ok(theta(v, lambda, e)?.sin() + sg * chi0_at(v, lambda, e, n0, src)?.re) };
    let chi_c = chi0_at(v, lambda, e_c, n0, src)?;
    let phi = chi_c.arg();
    let done = |energy, phase_root| Ok(LeadingLevel { energy, n0, bohr_sommerfeld: e_c, phase_root });
    let f_c = theta_c.sin() + sg * chi_c.re;
    if f_c == 0.0 || phi.abs() < 1e-13 {
        return done(e_c, false);
    }
    // the root sits at theta_c + phi; the real form changes sign between theta_c and theta_c + 2 phi
    for mult in [2.0, 4.0] {
        let e_f = solve_theta(v, lambda, theta_c + mult * phi)?;
        let f_f = f(e_f)?;
        if f_f.signum() != f_c.signum() {
            return done(illinois(&f, e_c, f_c, e_f, f_f)?, false);
        }
    }
    let h = |e: f64| -> Result<f64> {
        let t = theta(v, lambda, e)?;
        Ok((chi0_at(v, lambda, e, n0, src)? * C64::from_polar(1.0, -(t + sg * 0.5 * PI))).arg())
    };
    let e0 = solve_theta(v, lambda, theta_c)?;
    let e1 = solve_theta(v, lambda, theta_c + 2.0 * phi)?;
    let (h0, h1) = (h(e0)?, h(e1)?);
    if h0.signum() == h1.signum() {
        return Err(Error::NoRootInBracket(format!("level {n}: [{e0}, {e1}]")));
    }
    done(illinois(&h, e0, h0, e1, h1)?, true)
}

/// Bracketed secant with the Illinois modification.
fn illinois<F: Fn(f64) -> Result<f64>>(f: &F, mut a: f64, mut fa: f64, mut b: f64, mut fb: f64) -> Result<f64> {
    let mut side = 0;
    for _ in 0..80 {
        let x = (a * fb - b * fa) / (fb - fa);
        if (b - a).abs() <= 2e-16 * x.abs() || !x.is_finite() {
            return Ok(x);
        }
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fb.signum() {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= 1e-15 * b.abs() {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
    }
    Err(Error::NoRootInBracket(format!("secant stalled in [{a}, {b}]")))
}

/// The exponentially small part of an amplitude whose Borel function is known by its Taylor
/// coefficients `b` and the four-point catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialPart {
    /// first-generation re-expansion of the remainder after `n0` terms
    pub remainder: C64,
    /// the cut of `wrap` passed by the connection contour, truncated after `n1` terms
    pub wrapped: C64,
    pub fitted_terms: usize,
}

impl ExponentialPart {
    pub fn total(&self) -> C64 {
        self.remainder + self.wrapped
    }
}

/// `chi1` from Taylor data: jumps at the catalog points are fitted to the late coefficients,
/// the remainder after `n0` terms is re-expanded once, and the cut at `wrap` adds
/// `e^{2 lambda s_w} sum_{m <= n1} d_m (-1)^{m+1} m! / (2 lambda)^m`.
pub fn exponential_part(
    b: &[C64],
    catalog: &[C64],
    wrap: Option<C64>,
    lambda: f64,
    n0: usize,
    n1: usize,
    opts: &SpectralOptions,
) -> Result<ExponentialPart> {
    let terms = (n1 + 1).min(opts.fit_terms).max(1);
    // fit window: the strict reliability gate when it leaves two spare rows, else the loose one
    let rows = catalog.len() * terms + 2;
    let strict = reliable_len(b, 1e-6);
    let end = if strict >= opts.fit_from + rows { strict } else { reliable_len(b, 1e-5) };
    let from = opts.fit_from.min(end.saturating_sub(rows)).max(4);
    let jumps = fit_jumps(&b[..end], catalog, terms, from)?;
    let fs = FittedSource { coefficients: b.to_vec(), catalog: catalog.to_vec(), jumps };
    let l = c(lambda, 0.0);
    let hr = hyper_expand_at(&fs, l, n0, 1, &HyperOptions { rule: opts.rule, ..HyperOptions::default() })?;
    let remainder = hr.tree.children.iter().map(|ch| ch.partial_sum).sum();
    let wrapped = match wrap {
        Some(sw) => {
            let d = fs.jump_taylor(sw, terms - 1)?;
            let mut acc = C64::default();
            for (m, dm) in d.iter().enumerate().take(n1 + 1) {
                let sgn = if m % 2 == 0 { -1.0 } else { 1.0 };
                acc += dm * sgn * factorial(m) / (2.0 * lambda).powi(m as i32);
            }
            (2.0 * l * sw).exp() * acc
        }
        None => C64::default(),
    };
    Ok(ExponentialPart { remainder, wrapped, fitted_terms: terms })
}

/// Amplitude of the connection between the sectors around `+infinity` and `-infinity`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnharmonicAmplitude {
    pub chi0: C64,
    pub chi1: C64,
    pub n0: usize,
    pub n1: usize,
    pub zeta_c: Option<C64>,
    pub zeta_a: C64,
    pub catalog: Vec<C64>,
    /// modulus of the first term left out of `chi0`
    pub first_omitted: f64,
    pub parts: Option<ExponentialPart>,
}

/// `(chi0, chi1)` at energy `e` with the default options.
pub fn joos_anharmonic(v: &Polynomial, e: f64, lambda: f64) -> Result<(C64, C64)> {
    let r = joos_anharmonic_with(v, e, lambda, None, &SpectralOptions::default())?;
    Ok((r.chi0, r.chi1))
}

/// `n0` defaults to the truncation rule applied at `zeta_c`. Without complex turning points
/// the amplitude has no singular points and `chi1 = 0`.
pub fn joos_anharmonic_with(v: &Polynomial, e: f64, lambda: f64, n0: Option<usize>, opts: &SpectralOptions) -> Result<AnharmonicAmplitude> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda = {lambda}")));
    }
    check_even(v)?;
    let w = Well::new(v, e)?;
    let l = c(lambda, 0.0);
    let catalog = w.catalog();
    let Some(z) = w.zeta_c else {
        let b = w.borel_coefficients(1, opts.amplitude)?;
        return Ok(AnharmonicAmplitude { chi0: b[0], chi1: C64::default(), n0: 0, n1: 0, zeta_c: None, zeta_a: w.zeta_a, catalog, first_omitted: 0.0, parts: None });
    };
    let n0 = n0.unwrap_or_else(|| opts.rule.order(l, z));
    let n1 = opts.rule.order(l, w.zeta_a);
    let b0 = w.borel_coefficients(n0 + 1, opts.amplitude)?;
    let chi0 = partial_sum(&b0, l, n0);
    let first_omitted = (b0[n0 + 1] * factorial(n0 + 1) / (2.0 * lambda).powi(n0 as i32 + 1)).norm();
    let b = w.borel_coefficients(opts.riccati_order.max(n0 + 2), AmplitudeSource::Riccati)?;
    // the contour runs on the far side of the lower left catalog point
    let wrap = catalog.iter().copied().find(|s| s.re < 0.0 && s.im < 0.0);
    let parts = exponential_part(&b, &catalog, wrap, lambda, n0, n1, opts)?;
    Ok(AnharmonicAmplitude { chi0, chi1: parts.total(), n0, n1, zeta_c: Some(z), zeta_a: w.zeta_a, catalog, first_omitted, parts: Some(parts) })
}

/// Symmetric problems give coefficients whose phases follow a fixed pattern: `i^{-n} b_n` real
/// for an even well, `b_n` real for the Joos fixture. Coefficients count as reliable while the
/// off-pattern part stays below `tol` times the neighbouring magnitudes.
pub fn reliable_len(b: &[C64], tol: f64) -> usize {
    let run = |rot: C64| {
        let r: Vec<C64> = b.iter().enumerate().map(|(n, x)| x * rot.powi(-(n as i32))).collect();
        (0..r.len())
            .position(|n| {
                let env = r[n.saturating_sub(1)..(n + 2).min(r.len())].iter().map(|x| x.norm()).fold(0.0, f64::max);
                r[n].im.abs() > tol * env
            })
            .unwrap_or(r.len())
    };
    run(I).max(run(c(1.0, 0.0)))
}

/// Leading level, its first exponential correction and the data behind them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralResult {
    pub parity: Parity,
    pub level_index: usize,
    pub lambda: f64,
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "E1")]
    pub e1: f64,
    /// `oint sqrt(V - E0)` around the two real turning points
    pub loop_action: C64,
    #[serde(rename = "zeta_C")]
    pub zeta_c: Option<C64>,
    #[serde(rename = "zeta_A")]
    pub zeta_a: C64,
    pub n0: usize,
    pub n1: usize,
    pub chi0: C64,
    pub chi1: C64,
    pub bohr_sommerfeld: f64,
    pub phase_root: bool,
    pub options: SpectralOptions,
}

/// `E1 = -+ Re chi1 / (theta' cos theta +- Re chi0')` at the leading level.
pub fn exp_correction(v: &Polynomial, lambda: f64, n: usize, parity: Parity) -> Result<SpectralResult> {
    exp_correction_with(v, lambda, n, parity, &SpectralOptions::default())
}

pub fn exp_correction_with(v: &Polynomial, lambda: f64, n: usize, parity: Parity, opts: &SpectralOptions) -> Result<SpectralResult> {
    let lev = quantize_leading_with(v, lambda, n, parity, opts)?;
    let e0 = lev.energy;
    let amp = joos_anharmonic_with(v, e0, lambda, Some(lev.n0), opts)?;
    let w = Well::new(v, e0)?;
    let sg = parity.sign();
    let e1 = if amp.chi1 == C64::default() {
        0.0
    } else {
        let h = opts.quad_tol.cbrt() * e0.abs();
        let dtheta = (theta(v, lambda, e0 + h)? - theta(v, lambda, e0 - h)?) / (2.0 * h);
        let dchi = (chi0_at(v, lambda, e0 + h, lev.n0, opts.amplitude)? - chi0_at(v, lambda, e0 - h, lev.n0, opts.amplitude)?) / (2.0 * h);
        let den = theta(v, lambda, e0)?.cos() * dtheta + sg * dchi.re;
        if !(den.abs() > 1e-10 * dtheta.abs()) {
            return Err(Error::DenominatorNearZero(format!("{den:e} against theta' = {dtheta:e}")));
        }
        -sg * amp.chi1.re / den
    };
    Ok(SpectralResult {
        parity,
        level_index: n,
        lambda,
        e0,
        e1,
        loop_action: w.loop_action()?,
        zeta_c: amp.zeta_c,
        zeta_a: amp.zeta_a,
        n0: lev.n0,
        n1: amp.n1,
        chi0: amp.chi0,
        chi1: amp.chi1,
        bohr_sommerfeld: lev.bohr_sommerfeld,
        phase_root: lev.phase_root,
        options: *opts,
    })
}
