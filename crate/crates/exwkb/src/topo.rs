//! Topological expansion of the Borel function `chi~(xi, s)`.
//!
//! The amplitude splits into levels `chi^(l)` counted by the number of exponential factors
//! `exp(2 lambda (xi - t))` in the iterated Volterra solution. With `tau = -1/(2 lambda)`
//! and the operators
//!
//! * `R0 g = g + tau int_inf^xi omega~(t) exp(tau (Omega(xi) - Omega(t))) g(t) dt`,
//! * `R1 = R0 - 1`,
//! * `XR f = -tau int_inf^xi omega~(t) exp(2 lambda (xi - t)) exp(-tau (Omega(xi) - Omega(t))) f(t) dt`,
//!
//! the levels are `chi^(0) = R0 1`, `chi^(2p+1) = XR chi^(2p)` and `chi^(2p+2) = R1 chi^(2p+1)`.
//! Their Borel images `Phi^(l)(xi, s)` follow from `tau^k exp(tau A) <-> (2s)^k B_k(4 s A)`
//! with `B_k(z) = I_k(sqrt z) / z^{k/2}`; every `eta`-contour is the straight segment `[s, 0]`.
//!
//! Closed (direct) forms:
//!
//! * `Phi^(0) = B_0(4 s Omega(xi))`
//! * `Phi^(1) = int_{[s,0]} d eta omega~(xi - eta) 2 (s - eta) B_1(4 (s - eta) (2 Omega(xi - eta) - Omega(xi)))`
//! * `Phi^(2) = int_inf^xi d xi1 int_{[s,0]} d eta omega~(xi1) omega~(xi1 - eta) (2 (s - eta))^2
//!   B_2(4 (s - eta) (Omega(xi) - 2 Omega(xi1) + 2 Omega(xi1 - eta)))`
//! * `Phi^(3)` is the triple integral produced by `XR` acting on `Phi^(2)` (see [`phi_direct`]).

use serde::{Deserialize, Serialize};

use crate::borel::BorelEvaluator;
use crate::error::{Error, Result};
use crate::geometry::{tp_distances, ActionDistances, ContourPath};
use crate::potential::Polynomial;
use crate::quad::gauss_legendre;
use crate::special::bessel_b;
use crate::xipath::{navigate, ActionPath, JetNode, PathOptions};
use crate::C64;

/// Highest level with a closed-form evaluator.
pub const MAX_DIRECT_LEVEL: usize = 3;

#[derive(Debug, Clone, Copy)]
pub struct TopoOptions {
    /// Gauss-Legendre nodes per `eta`-segment
    pub eta_nodes: usize,
    /// Gauss-Legendre nodes on path extensions `xi -> xi - eta`
    pub ext_nodes: usize,
    /// samples per strip segment for the bound sups
    pub samples: usize,
    /// safety factor applied to sampled sups
    pub safety: f64,
    /// budget on integrand evaluations for one recurrent evaluation
    pub max_evals: f64,
}

impl Default for TopoOptions {
    fn default() -> Self {
        TopoOptions { eta_nodes: 16, ext_nodes: 16, samples: 64, safety: 2.0, max_evals: 5e8 }
    }
}

/// A `xi`-path from the infinity of the starting sector to the evaluation point (or to the
/// infinity of another sector, the Joos limit).
#[derive(Debug, Clone)]
pub struct XiPath {
    pub path: ActionPath,
}

impl XiPath {
    pub fn new(q: &Polynomial, contour: &ContourPath) -> Result<Self> {
        Ok(XiPath { path: ActionPath::new(q, contour, PathOptions::default())? })
    }

    pub fn from_action_path(path: ActionPath) -> Self {
        XiPath { path }
    }

    /// `Omega(xi)`, the integral of `omega~` from the starting infinity.
    pub fn omega(&self) -> C64 {
        self.path.omega_end
    }

    /// `omega~(xi)` (zero at an infinite end).
    pub fn omega_tilde(&self) -> C64 {
        self.path.end.as_ref().map(|e| e.omt).unwrap_or_default()
    }

    /// True when the path ends at infinity.
    pub fn is_limit(&self) -> bool {
        self.path.end.is_none()
    }

    pub fn q(&self) -> &Polynomial {
        &self.path.q
    }

    fn order(&self) -> usize {
        self.path.jet_order
    }

    /// `(omega~, Omega)` at `xi + d` for every shift in `ds`.
    fn end_row(&self, ds: &[C64]) -> Result<Vec<(C64, C64)>> {
        match &self.path.end {
            None => Ok(vec![(C64::default(), self.path.omega_end); ds.len()]),
            Some(e) => shifted_row(&self.path.q, self.order(), e, ds),
        }
    }

    /// Quadrature nodes on the straight `xi`-extension from the end point to `xi + shift`.
    fn extension(&self, shift: C64, n: usize) -> Result<Vec<JetNode>> {
        let end = match &self.path.end {
            Some(e) => e,
            None => return Ok(Vec::new()),
        };
        if shift.norm() == 0.0 {
            return Ok(Vec::new());
        }
        let (gx, gw) = gauss_legendre(n);
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let d = shift * (0.5 * (gx[k] + 1.0));
            let mut node = if d.norm() <= end.reach() { end.shifted(d)? } else { navigate(&self.path.q, end, d, self.order())? };
            node.w = shift * (0.5 * gw[k]);
            out.push(node);
        }
        Ok(out)
    }
}

/// `(omega~, Omega)` at `node.xi + d` for shifts ordered along one segment from the node.
fn shifted_row(q: &Polynomial, order: usize, node: &JetNode, ds: &[C64]) -> Result<Vec<(C64, C64)>> {
    let mut out = Vec::with_capacity(ds.len());
    let mut far: Option<(JetNode, C64)> = None;
    for &d in ds {
        if d.norm() <= node.reach() {
            out.push((node.omt_at(d)?, node.big_omega_at(d)?));
            continue;
        }
        if let Some((n, off)) = &far {
            if (d - off).norm() <= n.reach() {
                out.push((n.omt_at(d - off)?, n.big_omega_at(d - off)?));
                continue;
            }
        }
        let next = match &far {
            Some((n, off)) if (d - off).norm() < d.norm() => navigate(q, n, d - off, order)?,
            _ => navigate(q, node, d, order)?,
        };
        out.push((next.omt, next.big_omega));
        far = Some((next, d));
    }
    Ok(out)
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
fn gl01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|v| 0.5 * v).collect())
}

/// `Phi^(0)(xi, s) = I_0(sqrt(4 s Omega(xi)))`.
pub fn phi0(p: &XiPath, s: C64) -> C64 {
    bessel_b(0, 4.0 * s * p.omega())
}

fn phi1_direct(p: &XiPath, s: C64, o: &TopoOptions) -> Result<C64> {
    if s.norm() == 0.0 || p.is_limit() {
        return Ok(C64::default());
    }
    let (u, w) = gl01(o.eta_nodes);
    let ds: Vec<C64> = u.iter().map(|&t| -s * t).collect();
    let row = p.end_row(&ds)?;
    let om = p.omega();
    let mut acc = C64::default();
    for k in 0..u.len() {
        let v = s * (1.0 - u[k]);
        let (wt, big) = row[k];
        acc += w[k] * wt * 2.0 * v * bessel_b(1, 4.0 * v * (2.0 * big - om));
    }
    Ok(-s * acc)
}

fn phi2_direct(p: &XiPath, s: C64, o: &TopoOptions) -> Result<C64> {
    if s.norm() == 0.0 {
        return Ok(C64::default());
    }
    let (u, w) = gl01(o.eta_nodes);
    let ds: Vec<C64> = u.iter().map(|&t| -s * t).collect();
    let om = p.omega();
    let mut acc = C64::default();
    for node in &p.path.nodes {
        let row = shifted_row(p.q(), p.order(), node, &ds)?;
        let mut inner = C64::default();
        for k in 0..u.len() {
            let v = s * (1.0 - u[k]);
            let (wt, big) = row[k];
            let a = om - 2.0 * node.big_omega + 2.0 * big;
            inner += w[k] * wt * (4.0 * v * v) * bessel_b(2, 4.0 * v * a);
        }
        acc += node.w * node.omt * inner;
    }
    Ok(-s * acc)
}

/// `Phi^(3)(xi, s) = int_{[s,0]} d eta1 int_{[s - eta1, 0]} d eta' int_inf^{xi - eta1} d xi1
///   omega~(xi - eta1) omega~(xi1) omega~(xi1 - eta') (2m)^3 B_3(4 m A)` with
/// `m = s - eta1 - eta'` and `A = 2 Omega(xi - eta1) - Omega(xi) - 2 Omega(xi1) + 2 Omega(xi1 - eta')`.
fn phi3_direct(p: &XiPath, s: C64, o: &TopoOptions) -> Result<C64> {
    if s.norm() == 0.0 || p.is_limit() {
        return Ok(C64::default());
    }
    let (u, w) = gl01(o.eta_nodes);
    let ds: Vec<C64> = u.iter().map(|&t| -s * t).collect();
    let end_row = p.end_row(&ds)?;
    let om = p.omega();
    let mut acc = C64::default();
    for i in 0..u.len() {
        let eta1 = s * u[i];
        let a = s - eta1;
        let (wt1, om1) = end_row[i];
        let ext = p.extension(-eta1, o.ext_nodes)?;
        let ds2: Vec<C64> = u.iter().map(|&t| -a * t).collect();
        let mut inner = C64::default();
        for node in p.path.nodes.iter().chain(ext.iter()) {
            let row = shifted_row(p.q(), p.order(), node, &ds2)?;
            let mut sub = C64::default();
            for k in 0..u.len() {
                let m = a * (1.0 - u[k]);
                let (wt, big) = row[k];
                let aa = 2.0 * om1 - om - 2.0 * node.big_omega + 2.0 * big;
                sub += w[k] * wt * (8.0 * m * m * m) * bessel_b(3, 4.0 * m * aa);
            }
            inner += node.w * node.omt * sub;
        }
        acc += w[i] * wt1 * (-a) * inner;
    }
    Ok(-s * acc)
}

/// Closed-form level term for `level <= 3`.
pub fn phi_direct(level: usize, p: &XiPath, s: C64, o: &TopoOptions) -> Result<C64> {
    match level {
        0 => Ok(phi0(p, s)),
        1 => phi1_direct(p, s, o),
        2 => phi2_direct(p, s, o),
        3 => phi3_direct(p, s, o),
        _ => Err(Error::UnsupportedLevel(format!("no closed form for level {level}"))),
    }
}

/// `Phi^(1)` at a point with `Omega = om_p` from the odd recurrence applied to `Phi^(0)`;
/// `row` gives `(omega~, Omega)` at the shifted points `xi - eta1` for `eta1 = s u_i`.
fn xr_of_phi0(om_p: C64, row: &[(C64, C64)], s: C64, u: &[f64], w: &[f64]) -> C64 {
    let mut acc = C64::default();
    for i in 0..u.len() {
        let a = s * (1.0 - u[i]);
        let (wt, big) = row[i];
        let d = om_p - big;
        let mut inner = C64::default();
        for j in 0..u.len() {
            let up = a * u[j];
            inner += w[j] * bessel_b(0, 4.0 * up * big) * bessel_b(0, -4.0 * (a - up) * d);
        }
        acc += w[i] * wt * (-a) * inner;
    }
    s * acc
}

/// Level term through the recurrences
///
/// * odd: `Phi^(2p+1)(xi, s) = -int_{[s,0]} d eta1 omega~(xi - eta1) int_{[s - eta1, 0]} du
///   Phi^(2p)(xi - eta1, u) B_0(-4 (s - eta1 - u) (Omega(xi) - Omega(xi - eta1)))`
/// * even: `Phi^(2p+2)(xi, s) = -int_inf^xi d xi1 omega~(xi1) int_{[s,0]} du
///   B_0(4 (s - u) (Omega(xi) - Omega(xi1))) Phi^(2p+1)(xi1, u)`
///
/// starting from `Phi^(0)`. Levels above 2 are accepted only when the evaluation count fits
/// `max_evals` (or vanishes identically, as odd levels do in the Joos limit).
pub fn phi_recurrent(level: usize, p: &XiPath, s: C64, o: &TopoOptions) -> Result<C64> {
    if level == 0 {
        return Ok(phi0(p, s));
    }
    if s.norm() == 0.0 || (level % 2 == 1 && p.is_limit()) {
        return Ok(C64::default());
    }
    let m = o.eta_nodes as f64;
    let n = p.path.nodes.len() as f64;
    let cost = match level {
        1 => m * m,
        2 => n * m * m * m,
        3 => m * m * (n + o.ext_nodes as f64) * m * m * m,
        _ => f64::INFINITY,
    };
    if cost > o.max_evals {
        return Err(Error::BudgetExceeded(format!("recurrent level {level} needs about {cost:.2e} integrand evaluations")));
    }
    let (u, w) = gl01(o.eta_nodes);
    match level {
        1 => {
            let ds: Vec<C64> = u.iter().map(|&t| -s * t).collect();
            let row = p.end_row(&ds)?;
            Ok(xr_of_phi0(p.omega(), &row, s, &u, &w))
        }
        2 => {
            let om = p.omega();
            let mut acc = C64::default();
            for node in &p.path.nodes {
                // shifts -u_k u_i s for the inner level-1 evaluations at u = s u_k
                let mut inner = C64::default();
                for k in 0..u.len() {
                    let uk = s * u[k];
                    let ds: Vec<C64> = u.iter().map(|&t| -uk * t).collect();
                    let row = shifted_row(p.q(), p.order(), node, &ds)?;
                    let f1 = xr_of_phi0(node.big_omega, &row, uk, &u, &w);
                    inner += w[k] * bessel_b(0, 4.0 * (s - uk) * (om - node.big_omega)) * f1;
                }
                acc += node.w * node.omt * inner;
            }
            Ok(s * acc)
        }
        3 => {
            let ds: Vec<C64> = u.iter().map(|&t| -s * t).collect();
            let row = p.end_row(&ds)?;
            let om = p.omega();
            let mut acc = C64::default();
            for i in 0..u.len() {
                let eta1 = s * u[i];
                let a = s - eta1;
                let (wt, big) = row[i];
                let shifted = shifted_path(p, -eta1, o)?;
                let mut inner = C64::default();
                for j in 0..u.len() {
                    let up = a * u[j];
                    let f2 = phi_recurrent(2, &shifted, up, o)?;
                    inner += w[j] * f2 * bessel_b(0, -4.0 * (a - up) * (om - big));
                }
                acc += w[i] * wt * (-a) * inner;
            }
            Ok(s * acc)
        }
        _ => unreachable!(),
    }
}

/// The path extended along a straight `xi`-segment to `xi + shift`.
fn shifted_path(p: &XiPath, shift: C64, o: &TopoOptions) -> Result<XiPath> {
    let mut ap = p.path.clone();
    let ext = p.extension(shift, o.ext_nodes)?;
    if let Some(end) = &p.path.end {
        let new_end = if shift.norm() <= end.reach() { end.shifted(shift)? } else { navigate(&p.path.q, end, shift, p.order())? };
        ap.omega_end = new_end.big_omega;
        ap.end = Some(new_end);
        ap.nodes.extend(ext);
    }
    Ok(XiPath { path: ap })
}

/// Level term: closed form up to level 3.
pub fn phi(level: usize, p: &XiPath, s: C64, o: &TopoOptions) -> Result<C64> {
    phi_direct(level, p, s, o)
}

/// One level of the expansion as a reusable evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopoTerm {
    pub q: usize,
    /// quadrature dimension of the closed-form evaluator
    pub cost_estimate: usize,
}

impl TopoTerm {
    pub fn new(q: usize) -> Result<Self> {
        if q > MAX_DIRECT_LEVEL {
            return Err(Error::UnsupportedLevel(format!("level {q} above {MAX_DIRECT_LEVEL}")));
        }
        Ok(TopoTerm { q, cost_estimate: q })
    }

    pub fn eval(&self, p: &XiPath, s: C64, o: &TopoOptions) -> Result<C64> {
        phi_direct(self.q, p, s, o)
    }
}

/// Sampled strip quantities entering the convergence bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StripBounds {
    /// `Q(xi, s)`
    pub q: f64,
    /// `rho(xi, s)`
    pub rho: f64,
    /// `|omega|(xi, s)`
    pub omega_sup: f64,
}

/// `Q`, `rho` and `|omega|` over the strip between the path to `xi` and the path to `xi - s`.
pub fn strip_bounds(p: &XiPath, s: C64, o: &TopoOptions) -> Result<StripBounds> {
    let k = o.samples.max(2);
    let ds: Vec<C64> = (0..=k).map(|i| -s * (i as f64 / k as f64)).collect();
    let mut rho = 0.0;
    for node in &p.path.nodes {
        let row = shifted_row(p.q(), p.order(), node, &ds)?;
        let sup = row.iter().map(|r| r.0.norm()).fold(0.0, f64::max);
        rho += node.w.norm() * sup * o.safety;
    }
    let (qv, om_sup) = if p.is_limit() {
        (rho, 0.0)
    } else {
        // the extensions xi -> xi - eta1 and their own strips lie in xi - [0, 2] s
        let ds2: Vec<C64> = (0..=2 * k).map(|i| -s * (i as f64 / k as f64)).collect();
        let row = p.end_row(&ds2)?;
        let sup_ext = row.iter().map(|r| r.0.norm()).fold(0.0, f64::max) * o.safety;
        let sup_end = row[..=k].iter().map(|r| r.0.norm()).fold(0.0, f64::max) * o.safety;
        (rho + s.norm() * sup_ext, sup_end)
    };
    Ok(StripBounds { q: qv, rho, omega_sup: om_sup })
}

/// `ln` of the level bound: `|s|^{3p} Q^{2p} e^{2|s| rho} / ((3p)! p!)` for level `2p`,
/// `|s|^{3p+2} Q^{2p} |omega| e^{2|s| rho} / ((3p+2)! p!)` for level `2p + 1`.
fn ln_bound(level: usize, b: &StripBounds, r: f64) -> f64 {
    let p = level / 2;
    let ln_fact = |n: usize| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
    let ln_pow = |x: f64, e: usize| if e == 0 { 0.0 } else { e as f64 * x.ln() };
    let mut v = 2.0 * r * b.rho + ln_pow(b.q, 2 * p) - ln_fact(p);
    if level % 2 == 0 {
        v += ln_pow(r, 3 * p) - ln_fact(3 * p);
    } else {
        v += ln_pow(r, 3 * p + 2) - ln_fact(3 * p + 2) + b.omega_sup.ln();
    }
    v
}

fn bound_from(level: usize, b: &StripBounds, r: f64) -> f64 {
    let v = ln_bound(level, b, r);
    if v.is_nan() {
        0.0
    } else {
        v.exp()
    }
}

/// Upper bound on `|Phi^(level)(xi, s)|`.
pub fn convergence_bound(p: &XiPath, s: C64, level: usize, o: &TopoOptions) -> Result<f64> {
    if s.norm() == 0.0 {
        return Ok(if level == 0 { 1.0 } else { 0.0 });
    }
    let b = strip_bounds(p, s, o)?;
    Ok(bound_from(level, &b, s.norm()))
}

/// Sum of the bounds of all levels above `q_max`.
pub fn tail_bound(p: &XiPath, s: C64, q_max: usize, o: &TopoOptions) -> Result<f64> {
    if s.norm() == 0.0 {
        return Ok(0.0);
    }
    let b = strip_bounds(p, s, o)?;
    let r = s.norm();
    let mut total = 0.0;
    for level in (q_max + 1)..(q_max + 400) {
        let t = bound_from(level, &b, r);
        total += t;
        if level > q_max + 4 && t <= 1e-18 * total.max(1e-300) {
            break;
        }
    }
    Ok(total)
}

/// `sum_{l <= q_max} Phi^(l)(xi, s)` and the bound on the omitted levels.
pub fn chi_tilde(p: &XiPath, s: C64, q_max: usize, o: &TopoOptions) -> Result<(C64, f64)> {
    if q_max > MAX_DIRECT_LEVEL {
        return Err(Error::UnsupportedLevel(format!("q_max = {q_max} above {MAX_DIRECT_LEVEL}")));
    }
    let d = tp_distances(p.q())?.minimal;
    if s.norm() >= 0.5 * d {
        return Err(Error::OutsideRd2(format!("|s| = {:.4} not below d/2 = {:.4}", s.norm(), 0.5 * d)));
    }
    let mut v = C64::default();
    for l in 0..=q_max {
        v += phi_direct(l, p, s, o)?;
    }
    Ok((v, tail_bound(p, s, q_max, o)?))
}

/// `chi~` truncated at `q_max` levels, as a Borel evaluator.
pub struct TopoBorel {
    pub path: XiPath,
    pub q_max: usize,
    pub options: TopoOptions,
}

impl BorelEvaluator for TopoBorel {
    fn eval(&self, s: C64) -> Result<C64> {
        let mut v = C64::default();
        for l in 0..=self.q_max {
            v += phi_direct(l, &self.path, s, &self.options)?;
        }
        Ok(v)
    }
}

/// Taylor coefficients at `s = 0` by the discrete Cauchy formula on a circle.
pub fn taylor_at_origin<F: FnMut(C64) -> Result<C64>>(mut f: F, radius: f64, points: usize, max_order: usize) -> Result<Vec<C64>> {
    if 2 * max_order >= points {
        return Err(Error::InsufficientOrder(format!("{points} nodes alias order {max_order}")));
    }
    let vals: Vec<(C64, C64)> = (0..points)
        .map(|k| {
            let s = C64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / points as f64);
            f(s).map(|v| (s, v))
        })
        .collect::<Result<_>>()?;
    Ok((0..=max_order)
        .map(|n| vals.iter().map(|(s, v)| v * s.powi(-(n as i32))).sum::<C64>() / points as f64)
        .collect())
}

// ---------------------------------------------------------------------------------------
// singularity catalog

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mechanism {
    /// end-point mechanism
    EP,
    /// pinch mechanism
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plane {
    S,
    Xi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Winding {
    Clockwise,
    Anticlockwise,
}

/// One step of a sheet access list: wind once around `branch_point`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SheetStep {
    pub branch_point: C64,
    pub winding: Winding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub location: C64,
    pub plane: Plane,
    pub mechanism: Mechanism,
    /// empty for the first sheet
    pub sheet: Vec<SheetStep>,
    /// lowest level at which the entry appears
    pub level: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityCatalog {
    pub level: usize,
    /// evaluation point, measured from the first turning point image
    pub xi: C64,
    /// turning point images `zeta_k`
    pub zetas: Vec<C64>,
    pub entries: Vec<CatalogEntry>,
}

const LOC_TOL: f64 = 1e-9;

impl SingularityCatalog {
    fn push(&mut self, e: CatalogEntry) {
        let dup = self.entries.iter().any(|x| {
            x.plane == e.plane && (x.location - e.location).norm() < LOC_TOL && x.sheet.is_empty() == e.sheet.is_empty()
        });
        if !dup {
            self.entries.push(e);
        }
    }

    pub fn locations(&self, plane: Plane) -> Vec<C64> {
        let mut out: Vec<C64> = Vec::new();
        for e in self.entries.iter().filter(|e| e.plane == plane) {
            if !out.iter().any(|x| (x - e.location).norm() < LOC_TOL) {
                out.push(e.location);
            }
        }
        out
    }

    /// `s`-plane singularities on the first sheet.
    pub fn first_sheet_s(&self) -> Vec<C64> {
        let mut out: Vec<C64> = Vec::new();
        for e in self.entries.iter().filter(|e| e.plane == Plane::S && e.sheet.is_empty()) {
            if !out.iter().any(|x| (x - e.location).norm() < LOC_TOL) {
                out.push(e.location);
            }
        }
        out
    }

    /// All `s`-plane locations (every sheet), for ray admission and truncation rules.
    pub fn s_locations(&self) -> Vec<C64> {
        self.locations(Plane::S)
    }

    /// Location-set inclusion in both planes.
    pub fn is_subset_of(&self, other: &SingularityCatalog) -> bool {
        [Plane::S, Plane::Xi].iter().all(|&pl| {
            let theirs = other.locations(pl);
            self.locations(pl).iter().all(|a| theirs.iter().any(|b| (a - b).norm() < LOC_TOL))
        })
    }

    pub fn contains_s(&self, s: C64) -> bool {
        self.s_locations().iter().any(|x| (x - s).norm() < 1e-6 * (1.0 + s.norm()))
    }
}

/// Turning point images `zeta_k = zeta_{k0}` measured from the first turning point.
pub fn zetas_from(ad: &ActionDistances) -> Vec<C64> {
    (0..ad.turning_points.len()).map(|k| if k == 0 { C64::default() } else { ad.get(k, 0).unwrap_or_default() }).collect()
}

/// Singularity catalog of `Phi^(level)` at fixed `xi` (first two sheets).
///
/// Generic rules: level 0 has the `xi`-singularities `zeta_k` only and is entire in `s`;
/// level 1 adds the end-point singularities `s = xi - zeta_k`; level 2 adds the pinch
/// singularities `s = zeta_i - zeta_j` behind the cut from `xi - zeta_j` and the `xi`-plane
/// pinches `zeta_k + zeta_ij`, `k in {i, j}`. Quadratic potentials follow the ladder
/// `s = +-k zeta` of the harmonic case to any level.
pub fn predict_singularities(q: &Polynomial, ad: &ActionDistances, xi: C64, level: usize) -> Result<SingularityCatalog> {
    let zetas = zetas_from(ad);
    if q.degree() == 2 && zetas.len() == 2 {
        return Ok(harmonic_ladder(zetas, xi, level));
    }
    if level > 2 {
        return Err(Error::UnsupportedLevel(format!("generic catalog known up to level 2, got {level}")));
    }
    let mut cat = SingularityCatalog { level, xi, zetas: zetas.clone(), entries: Vec::new() };
    for (k, &z) in zetas.iter().enumerate() {
        cat.push(CatalogEntry { location: z, plane: Plane::Xi, mechanism: Mechanism::EP, sheet: vec![], level: 0, label: format!("xi = zeta_{k}") });
    }
    if level >= 1 {
        for (k, &z) in zetas.iter().enumerate() {
            cat.push(CatalogEntry { location: xi - z, plane: Plane::S, mechanism: Mechanism::EP, sheet: vec![], level: 1, label: format!("s = xi - zeta_{k}") });
        }
    }
    if level >= 2 {
        for (i, &zi) in zetas.iter().enumerate() {
            for (j, &zj) in zetas.iter().enumerate() {
                let step = SheetStep { branch_point: xi - zj, winding: Winding::Clockwise };
                cat.push(CatalogEntry {
                    location: zi - zj,
                    plane: Plane::S,
                    mechanism: Mechanism::P,
                    sheet: vec![step],
                    level: 2,
                    label: format!("s = zeta_{i} - zeta_{j}"),
                });
            }
        }
        for (i, &zi) in zetas.iter().enumerate() {
            for (j, &zj) in zetas.iter().enumerate() {
                if i == j {
                    continue;
                }
                for (k, zk) in [(i, zi), (j, zj)] {
                    cat.push(CatalogEntry {
                        location: zk + zi - zj,
                        plane: Plane::Xi,
                        mechanism: Mechanism::P,
                        sheet: vec![SheetStep { branch_point: zk, winding: Winding::Clockwise }],
                        level: 2,
                        label: format!("xi = zeta_{k} + zeta_{i} - zeta_{j}"),
                    });
                }
            }
        }
    }
    Ok(cat)
}

/// Harmonic ladder with `zeta_0 = 0`, `zeta_1 = zeta`.
fn harmonic_ladder(zetas: Vec<C64>, xi: C64, level: usize) -> SingularityCatalog {
    let z = zetas[1];
    let mut cat = SingularityCatalog { level, xi, zetas, entries: Vec::new() };
    for (k, loc) in [(0, C64::default()), (1, z)] {
        cat.push(CatalogEntry { location: loc, plane: Plane::Xi, mechanism: Mechanism::EP, sheet: vec![], level: 0, label: format!("xi = {k} zeta") });
    }
    for l in 1..=level {
        // end-point s-singularities xi - s = k zeta
        let (k_lo, k_hi): (i64, i64) = if l <= 2 {
            (0, 1)
        } else {
            let p = ((l - 1) / 2) as i64;
            (-(2 * p - 1), 2 * p)
        };
        for k in k_lo..=k_hi {
            cat.push(CatalogEntry {
                location: xi - z * k as f64,
                plane: Plane::S,
                mechanism: Mechanism::EP,
                sheet: vec![],
                level: l,
                label: format!("s = xi - ({k}) zeta"),
            });
        }
        if l >= 2 {
            let p = (l / 2) as i64;
            let behind = xi - z;
            cat.push(CatalogEntry {
                location: C64::default(),
                plane: Plane::S,
                mechanism: Mechanism::P,
                sheet: vec![SheetStep { branch_point: xi, winding: Winding::Clockwise }],
                level: l,
                label: "s = 0".into(),
            });
            for k in 1..=(2 * p - 1) {
                for sign in [1.0, -1.0] {
                    cat.push(CatalogEntry {
                        location: z * (sign * k as f64),
                        plane: Plane::S,
                        mechanism: Mechanism::P,
                        sheet: vec![SheetStep { branch_point: if sign > 0.0 { xi } else { behind }, winding: Winding::Clockwise }],
                        level: l,
                        label: format!("s = {}{k} zeta", if sign > 0.0 { "+" } else { "-" }),
                    });
                }
            }
            // xi-plane pinches k zeta, k = -(l-1) .. l
            for k in -((l as i64) - 1)..=(l as i64) {
                cat.push(CatalogEntry {
                    location: z * k as f64,
                    plane: Plane::Xi,
                    mechanism: Mechanism::P,
                    sheet: vec![SheetStep { branch_point: if k > 0 { z } else { C64::default() }, winding: Winding::Clockwise }],
                    level: l,
                    label: format!("xi = ({k}) zeta"),
                });
            }
        }
    }
    cat
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::borel::joos_kappa;
    use crate::c;
    use crate::special::factorial;

    fn harmonic() -> Polynomial {
        Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap()
    }

    fn joos_path() -> XiPath {
        let q = harmonic();
        let p = ContourPath::from_infinity(c(1.0, 0.0), vec![c(2.0, 0.0), c(-2.0, 0.0)], c(5f64.sqrt(), 0.0))
            .with_end_at_infinity(c(-1.0, 0.0));
        XiPath::new(&q, &p).unwrap()
    }

    fn harmonic_point(x: C64) -> XiPath {
        let q = harmonic();
        let p = ContourPath::from_infinity(c(1.0, 0.0), vec![c(3.0, 0.0), x], c(10f64.sqrt(), 0.0));
        XiPath::new(&q, &p).unwrap()
    }

    #[test]
    fn bessel_sum_rule() {
        // e^{tau a} e^{tau b} = e^{tau (a + b)}: convolution of B_0 kernels closes on -2u B_1
        let (a, b) = (c(0.7, 0.2), c(-0.3, 0.5));
        let u = c(-0.8, 0.3);
        for nu in 0..3usize {
            // tau^nu e^{tau a} * e^{tau b} has image -(2u)^{nu+1} B_{nu+1}(4u(a+b))
            let (x, w) = gl01(30);
            let mut conv = C64::default();
            for k in 0..x.len() {
                let v = u * x[k];
                let f = (2.0 * v).powu(nu as u32) * bessel_b(nu, 4.0 * v * a);
                conv += w[k] * f * bessel_b(0, 4.0 * (u - v) * b);
            }
            conv *= -u; // segment [u, 0]
            let rhs = -(2.0 * u).powu(nu as u32 + 1) * bessel_b(nu + 1, 4.0 * u * (a + b));
            assert!((conv - rhs).norm() < 1e-12, "nu = {nu}: {conv} vs {rhs}");
        }
    }

    #[test]
    fn phi0_values() {
        let q = Polynomial::from_real(&[0.0, 1.0]).unwrap();
        // xi = 1 for x = (3/2)^{2/3}
        let x = 1.5f64.powf(2.0 / 3.0);
        let p = XiPath::new(&q, &ContourPath::from_infinity(c(1.0, 0.0), vec![c(x, 0.0)], c(x.sqrt(), 0.0))).unwrap();
        assert!((p.omega() - c(5.0 / 36.0, 0.0)).norm() < 1e-12);
        assert_eq!(phi0(&p, C64::default()), c(1.0, 0.0));
        let v = phi0(&p, c(9.0 / 5.0, 0.0));
        assert!((v.re - 1.266_065_877_752_008_4).abs() < 1e-12, "{v}");
    }

    #[test]
    fn levels_vanish_at_origin() {
        let p = harmonic_point(c(0.8, 0.3));
        let o = TopoOptions::default();
        for l in 1..=3 {
            assert_eq!(phi_direct(l, &p, C64::default(), &o).unwrap(), C64::default());
            assert_eq!(phi_recurrent(l, &p, C64::default(), &o).unwrap(), C64::default());
        }
        assert_eq!(chi_tilde(&p, C64::default(), 2, &o).unwrap(), (c(1.0, 0.0), 0.0));
    }

    #[test]
    fn recurrence_matches_direct() {
        let o = TopoOptions { eta_nodes: 12, ..Default::default() };
        let pts = [(c(0.8, 0.3), c(-0.3, 0.1)), (c(1.5, -0.4), c(0.2, 0.25))];
        for (x, s) in pts {
            let p = harmonic_point(x);
            for l in 1..=2 {
                let d = phi_direct(l, &p, s, &o).unwrap();
                let r = phi_recurrent(l, &p, s, &o).unwrap();
                assert!((d - r).norm() < 1e-10 * (1.0 + d.norm()), "level {l}: {d} vs {r}");
            }
        }
    }

    #[test]
    fn level_three_recurrence_on_short_path() {
        // linear potential with a short path keeps the nested evaluation affordable
        let q = Polynomial::from_real(&[0.0, 1.0]).unwrap();
        let p = XiPath::from_action_path(
            ActionPath::new(
                &q,
                &ContourPath::from_infinity(c(1.0, 0.0), vec![c(2.0, 0.5)], C64::new(2.0, 0.5).sqrt()),
                PathOptions { tol: 1e-10, ..Default::default() },
            )
            .unwrap(),
        );
        let o = TopoOptions { eta_nodes: 8, ext_nodes: 8, max_evals: 1e10, ..Default::default() };
        let s = c(-0.3, 0.2);
        let d = phi_direct(3, &p, s, &o).unwrap();
        let r = phi_recurrent(3, &p, s, &o).unwrap();
        assert!(d.norm() > 0.0);
        assert!((d - r).norm() < 1e-8 * (1.0 + d.norm()), "{d} vs {r}");
    }

    #[test]
    fn odd_levels_vanish_in_joos_limit() {
        let p = joos_path();
        let o = TopoOptions::default();
        let s = c(-0.2, 0.1);
        assert_eq!(phi_direct(1, &p, s, &o).unwrap(), C64::default());
        assert_eq!(phi_direct(3, &p, s, &o).unwrap(), C64::default());
        // finite end points approaching the infinity of sector 3
        let mut last = f64::INFINITY;
        for r in [4.0, 8.0] {
            let q = harmonic();
            let pp = XiPath::new(&q, &ContourPath::from_infinity(c(1.0, 0.0), vec![c(2.0, 0.0), c(-r, 0.0)], c(5f64.sqrt(), 0.0))).unwrap();
            let v = phi_direct(1, &pp, s, &o).unwrap().norm() + phi_direct(3, &pp, s, &o).unwrap().norm();
            assert!(v < last);
            last = v;
        }
        assert!(last < 1e-4);
    }

    #[test]
    fn joos_limit_taylor_coefficients() {
        let p = joos_path();
        let o = TopoOptions::default();
        let sum = |s: C64| Ok(phi0(&p, s) + phi_direct(2, &p, s, &o)?);
        let t = taylor_at_origin(sum, 0.3, 32, 6).unwrap();
        let kappa = joos_kappa(6);
        for n in 0..=5 {
            let b = kappa[n] / factorial(n);
            assert!((t[n] - b).norm() < 1e-9, "order {n}: {} vs {}", t[n], b);
        }
        // the order-6 mismatch is the leading term of level 4: W^2/1440, W = int omega~^2
        let w_int = p.path.sum(|n| n.omt * n.omt);
        let miss = kappa[6] / factorial(6) - t[6];
        assert!((miss - w_int * w_int / 1440.0).norm() < 1e-9, "{miss} vs {}", w_int * w_int / 1440.0);
    }

    #[test]
    fn bounds_hold_on_grid() {
        let o = TopoOptions::default();
        for x in [c(0.5, 0.2), c(1.5, -0.3)] {
            let p = harmonic_point(x);
            for s in [c(-0.3, 0.0), c(0.1, 0.4)] {
                let b = strip_bounds(&p, s, &o).unwrap();
                for l in 0..=3 {
                    let v = phi_direct(l, &p, s, &o).unwrap().norm();
                    let bd = bound_from(l, &b, s.norm());
                    assert!(v <= bd, "level {l} at x = {x}, s = {s}: {v} > {bd}");
                }
            }
        }
    }

    #[test]
    fn bound_monotone_and_tail_decay() {
        let p = harmonic_point(c(1.0, 0.2));
        let o = TopoOptions::default();
        let dir = C64::from_polar(1.0, 2.5);
        let mut last = 0.0;
        for r in [0.05, 0.1, 0.2, 0.3] {
            let v = convergence_bound(&p, dir * r, 2, &o).unwrap();
            assert!(v > last);
            last = v;
        }
        let s = dir * 0.3;
        let t1 = tail_bound(&p, s, 1, &o).unwrap();
        let t2 = tail_bound(&p, s, 2, &o).unwrap();
        let t3 = tail_bound(&p, s, 3, &o).unwrap();
        assert!(t2 < t1 && t3 < t2);
        assert!(matches!(chi_tilde(&p, c(0.9, 0.0), 2, &o), Err(Error::OutsideRd2(_))));
    }

    #[test]
    fn catalog_rules() {
        let lin = Polynomial::from_real(&[0.0, 1.0]).unwrap();
        let ad = tp_distances(&lin).unwrap();
        let xi = c(1.3, 0.4);
        let c2 = predict_singularities(&lin, &ad, xi, 2).unwrap();
        assert_eq!(c2.first_sheet_s(), vec![xi]);
        assert!(c2.contains_s(C64::default()));

        let h = harmonic();
        let ad = tp_distances(&h).unwrap();
        let zeta = zetas_from(&ad)[1];
        assert!((zeta.norm() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let cats: Vec<_> = (0..=4).map(|l| predict_singularities(&h, &ad, xi, l).unwrap()).collect();
        for l in 0..4 {
            assert!(cats[l].is_subset_of(&cats[l + 1]), "level {l}");
        }
        assert!(cats[0].s_locations().is_empty());
        assert!(cats[1].entries.iter().all(|e| e.mechanism == Mechanism::EP));
        assert!(cats[2].contains_s(zeta) && cats[2].contains_s(-zeta));
        assert!(!cats[1].contains_s(zeta));
        let xi_p = cats[2].locations(Plane::Xi);
        for k in [-1.0, 0.0, 1.0, 2.0] {
            assert!(xi_p.iter().any(|x| (x - zeta * k).norm() < 1e-9));
        }

        let cubic = Polynomial::from_real(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        let ad = tp_distances(&cubic).unwrap();
        let g: Vec<_> = (0..=2).map(|l| predict_singularities(&cubic, &ad, xi, l).unwrap()).collect();
        assert!(g[0].is_subset_of(&g[1]) && g[1].is_subset_of(&g[2]));
        assert!(matches!(predict_singularities(&cubic, &ad, xi, 3), Err(Error::UnsupportedLevel(_))));
    }
}
