//! Semiclassical coefficients `kappa_n`, the asymptotic amplitude, fundamental solutions and the
//! connection decomposition.
//!
//! The tower is built from the Riccati form of the amplitude equation: with `tau = 1/(2 lambda)`,
//! `d log chi / d xi = sum_m y_m tau^m`, `y_1 = -omega~`, `y_{m+1} = y_m' + sum_{i+j=m} y_i y_j`.
//! Integrating each `y_m` from the sector's infinity gives `log chi`, and
//! `chi = sum_n kappa_n (-tau)^n`.

use crate::error::{Error, Result};
use crate::geometry::{canonical_path, outward_branch, ContourPath, StokesGraph};
use crate::ode::{propagate_segment, OdeOptions, OdeState};
use crate::potential::{polynomial_roots, turning_points, Polynomial};
use crate::series;
use crate::xipath::{build_jet, ActionPath, PathOptions};
use crate::C64;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WkbCoefficients {
    /// `kappa_0 .. kappa_N`, `kappa_0 = 1`
    pub values: Vec<C64>,
    pub point: C64,
    /// `xi(x_0, x)` on the branch reached along the canonical path
    pub xi: C64,
    pub sector: usize,
    pub order: usize,
}

/// Series `Y_1 .. Y_{m_max}` of the Riccati tower, given the `xi`-jet of `omega~`.
pub fn riccati_tower(jet: &[C64], m_max: usize) -> Vec<Vec<C64>> {
    let mut ys: Vec<Vec<C64>> = Vec::with_capacity(m_max);
    if m_max == 0 {
        return ys;
    }
    ys.push(jet.iter().map(|v| -v).collect());
    for m in 1..m_max {
        let len = ys[m - 1].len().saturating_sub(1);
        if len == 0 {
            break;
        }
        let mut next = series::deriv(&ys[m - 1]);
        next.truncate(len);
        // y_{m+1} = y_m' + sum_{i+j=m} y_i y_j, stored 0-based
        for i in 0..m.saturating_sub(1) {
            let j = m - 2 - i;
            let p = series::mul(&ys[i], &ys[j], len);
            for k in 0..len {
                next[k] += p[k];
            }
        }
        ys.push(next);
    }
    ys
}

/// Values `y_1 .. y_{m_max}` at the centre of the jet.
pub fn riccati_values(jet: &[C64], m_max: usize) -> Vec<C64> {
    riccati_tower(jet, m_max).iter().map(|y| y[0]).collect()
}

/// `kappa_0..kappa_N` at the end of an action path that starts at infinity.
pub fn kappa_along(path: &ActionPath, n: usize) -> Result<Vec<C64>> {
    if n == 0 {
        return Ok(vec![C64::new(1.0, 0.0)]);
    }
    if path.jet_order < n + 1 {
        return Err(Error::InvalidInput(format!("jet order {} too small for N = {n}", path.jet_order)));
    }
    let mut ell = vec![C64::default(); n + 1];
    for node in &path.nodes {
        let y = riccati_values(&node.jet, n);
        for m in 0..n {
            ell[m + 1] += y[m] * node.w;
        }
    }
    let a = series::exp(&ell, n + 1);
    Ok(a.iter().enumerate().map(|(k, v)| if k % 2 == 0 { *v } else { -v }).collect())
}

fn path_opts(n: usize) -> PathOptions {
    PathOptions { jet_order: (n + 2).max(12), ..PathOptions::default() }
}

/// `kappa` tower at `x`, reached canonically from sector 1.
pub fn kappa_series(q: &Polynomial, g: &StokesGraph, x: C64, n: usize) -> Result<WkbCoefficients> {
    kappa_series_in(q, g, 1, x, n)
}

pub fn kappa_series_in(q: &Polynomial, g: &StokesGraph, sector: usize, x: C64, n: usize) -> Result<WkbCoefficients> {
    let geo = path_geometry(q, g, sector, x)?;
    if n == 0 {
        return Ok(WkbCoefficients { values: vec![C64::new(1.0, 0.0)], point: x, xi: geo.xi, sector, order: 0 });
    }
    let ap = ActionPath::new(q, &geo.path, path_opts(n))?;
    let values = kappa_along(&ap, n)?;
    Ok(WkbCoefficients { values, point: x, xi: geo.xi, sector, order: n })
}

/// Partial sum `sum_n kappa_n (-1/(2 lambda))^n`.
pub fn chi_asymptotic(k: &WkbCoefficients, lambda: C64) -> C64 {
    chi_partial(&k.values, lambda, k.values.len() - 1)
}

pub fn chi_partial(kappa: &[C64], lambda: C64, upto: usize) -> C64 {
    let t = -0.5 / lambda;
    let mut s = C64::default();
    let mut p = C64::new(1.0, 0.0);
    for kv in kappa.iter().take(upto + 1) {
        s += kv * p;
        p *= t;
    }
    s
}

/// Index of the smallest term `|kappa_n / (2 lambda)^n|` (least-term truncation order).
pub fn least_term_order(kappa: &[C64], lambda: C64) -> usize {
    let t = 0.5 / lambda.norm();
    let mut best = 0;
    let mut bv = f64::INFINITY;
    let mut p = 1.0;
    for (n, kv) in kappa.iter().enumerate() {
        let v = kv.norm() * p;
        if n > 0 && v < bv {
            bv = v;
            best = n;
        }
        p *= t;
    }
    best
}

/// `sqrt(q)` and a continuous `q^{1/4}` tracked along a polyline.
pub fn track_roots(q: &Polynomial, vertices: &[C64], sq0: C64, r0: C64) -> (C64, C64) {
    let mut sq = sq0;
    let mut r = r0;
    for w in vertices.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut t = 0.0f64;
        let mut h = 1.0f64 / 64.0;
        while t < 1.0 {
            let tn = (t + h).min(1.0);
            let p = q.eval(a + (b - a) * tn).sqrt();
            let sn = if (p - sq).norm() <= (p + sq).norm() { p } else { -p };
            if sq.norm() > 0.0 && (sn / sq).arg().abs() > 0.1 && h > 1e-12 {
                h *= 0.5;
                continue;
            }
            let pr = sn.sqrt();
            r = if (pr - r).norm() <= (pr + r).norm() { pr } else { -pr };
            sq = sn;
            t = tn;
            h = (h * 1.5).min(1.0 / 16.0);
        }
    }
    (sq, r)
}

/// Logarithmic derivative `psi'/psi` of the WKB solution `q^{-1/4} e^{-lambda xi} chi` at `x`
/// with `sqrt(q(x)) = sq`, truncated at the least term.
pub fn wkb_log_derivative(q: &Polynomial, x: C64, sq: C64, lambda: C64, m_max: usize) -> Result<C64> {
    let (jet, _, _, _) = build_jet(q, x, sq, m_max + 2)?;
    let y = riccati_values(&jet, m_max);
    let tau = 0.5 / lambda;
    let mut s = C64::default();
    let mut tp = tau;
    let mut prev = f64::INFINITY;
    for v in y {
        let term = v * tp;
        if term.norm() > prev {
            break;
        }
        prev = term.norm();
        s += term;
        tp *= tau;
    }
    let qt = q.taylor_at(x);
    Ok(-qt[1] / (4.0 * qt[0]) - lambda * sq + sq * s)
}

/// Reference turning point for `xi(x_0, x)`: the first one in `turning_points` order.
pub fn reference_turning_point(q: &Polynomial) -> Result<C64> {
    Ok(turning_points(q)?[0].location)
}

/// `xi(x_0, x)` given `sqrt(q(x)) = sq`, along the straight segment from `x` to `x_0`.
pub fn xi_from_reference(q: &Polynomial, x: C64, sq: C64) -> Result<C64> {
    let x0 = reference_turning_point(q)?;
    if (x - x0).norm() < 1e-14 {
        return Ok(C64::default());
    }
    let route = crate::geometry::detour_route(q, &[x, x0])?;
    let back = crate::geometry::action_integral(q, &ContourPath::polyline(route, sq))?;
    Ok(-back)
}

/// `xi(x_0, x)` for a point `x` on the axis of `sector`: fixed through the axis point
/// `A = d (2 R + 1)` (`R` the root bound), then along the axis.
/// Also returns `sqrt(q(x))` and `q^{1/4}(x)`, the latter being the principal root at `A`
/// continued along the axis.
pub fn axis_xi(q: &Polynomial, g: &StokesGraph, sector: usize, x: C64) -> Result<(C64, C64, C64)> {
    let d = sector_dir(g, sector)?;
    let a = d * (2.0 * q.root_bound().max(1.0) + 1.0);
    let sa = outward_branch(q, a, d);
    let ra = sa.sqrt();
    let xa = xi_from_reference(q, a, sa)?;
    if (x - a).norm() < 1e-14 {
        return Ok((xa, sa, ra));
    }
    let v = crate::geometry::action_integral(q, &ContourPath::segment(a, x, sa))?;
    let (sx, rx) = track_roots(q, &[a, x], sa, ra);
    Ok((xa + v, sx, rx))
}

fn sector_dir(g: &StokesGraph, sector: usize) -> Result<C64> {
    g.sectors
        .iter()
        .find(|s| s.index == sector)
        .map(|s| s.center_dir())
        .ok_or_else(|| Error::InvalidInput(format!("no sector {sector}")))
}

/// `xi` at the end of a polyline starting at `verts[0]` where `xi = xi0`, `sqrt(q) = sq0`.
fn xi_along_route(q: &Polynomial, verts: &[C64], xi0: C64, sq0: C64) -> Result<C64> {
    let mut v: Vec<C64> = Vec::with_capacity(verts.len());
    for &p in verts {
        if v.last() != Some(&p) {
            v.push(p);
        }
    }
    if v.len() < 2 {
        return Ok(xi0);
    }
    Ok(xi0 + crate::geometry::action_integral(q, &ContourPath::polyline(v, sq0))?)
}

fn routed(q: &Polynomial, verts: Vec<C64>) -> Result<Vec<C64>> {
    let mut v = verts;
    v.dedup();
    crate::geometry::detour_route(q, &v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FundamentalValue {
    pub psi: C64,
    pub dpsi: C64,
    pub chi: C64,
    /// `xi(x_0, x)` on the tracked branch
    pub xi: C64,
    pub sqrt_q: C64,
    pub quarter_root: C64,
    /// `Re(lambda xi) > 0`, the solution is recessive along the canonical path
    pub recessive: bool,
    pub order: usize,
}

struct PathGeometry {
    path: ContourPath,
    sq: C64,
    r: C64,
    xi: C64,
}

fn path_geometry(q: &Polynomial, g: &StokesGraph, sector: usize, x: C64) -> Result<PathGeometry> {
    let path = canonical_path(g, sector, x)?;
    let (xb, sb, rb) = axis_xi(q, g, sector, path.first())?;
    let (sq, r) = track_roots(q, &path.vertices, sb, rb);
    let xi = xi_along_route(q, &path.vertices, xb, sb)?;
    Ok(PathGeometry { path, sq, r, xi })
}

/// `q^{-1/4} e^{-lambda xi(x_0,x)} chi^as` for the solution recessive in `sector`.
pub fn fundamental_solution(q: &Polynomial, g: &StokesGraph, x: C64, lambda: C64, n: usize) -> Result<FundamentalValue> {
    fundamental_solution_in(q, g, 1, x, lambda, n)
}

pub fn fundamental_solution_in(q: &Polynomial, g: &StokesGraph, sector: usize, x: C64, lambda: C64, n: usize) -> Result<FundamentalValue> {
    let geo = path_geometry(q, g, sector, x)?;
    let ap = ActionPath::new(q, &geo.path, path_opts(n))?;
    let kappa = kappa_along(&ap, n)?;
    let chi = chi_partial(&kappa, lambda, n);
    let psi = chi * (-lambda * geo.xi).exp() / geo.r;
    let l = wkb_log_derivative(q, x, geo.sq, lambda, n.max(2))?;
    Ok(FundamentalValue {
        psi,
        dpsi: psi * l,
        chi,
        xi: geo.xi,
        sqrt_q: geo.sq,
        quarter_root: geo.r,
        recessive: (lambda * geo.xi).re > 0.0,
        order: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeSolution {
    pub psi: C64,
    pub dpsi: C64,
    /// `psi q^{1/4} e^{lambda xi(x_0, x)}`
    pub chi: C64,
    pub xi: C64,
}

/// Smallest radius tried for far points: just outside every turning point.
fn inner_radius(q: &Polynomial) -> f64 {
    let r = polynomial_roots(q.coeffs()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    1.5 * r + 0.5
}

/// Integrate along a polyline in short pieces, renormalising the state after each piece.
/// Returns the final state and the log of the factor that was divided out.
fn propagate_scaled(q: &Polynomial, lambda: C64, st: OdeState, vertices: &[C64]) -> Result<(OdeState, f64)> {
    let opts = OdeOptions::default();
    let piece = 0.25;
    let mut cur = st;
    let mut log_scale = 0.0;
    for &v in vertices {
        let from = cur.x;
        let k = ((v - from).norm() / piece).ceil().max(1.0) as usize;
        for i in 1..=k {
            let target = if i == k { v } else { from + (v - from) * (i as f64 / k as f64) };
            if target != cur.x {
                cur = propagate_segment(q, lambda, cur, target, &opts)?;
            }
            let m = cur.psi.norm().max(cur.dpsi.norm() / (1.0 + lambda.norm()));
            if m > 0.0 && m.is_finite() {
                cur.psi /= m;
                cur.dpsi /= m;
                log_scale += m.ln();
            }
        }
    }
    Ok((cur, log_scale))
}

/// Far point on the sector axis with `Re(lambda xi) >= 45`, and the state of the recessive
/// solution there scaled by `e^{lambda xi}`: (state, sqrt q, q^{1/4}, xi).
fn far_start(q: &Polynomial, g: &StokesGraph, sector: usize, lambda: C64, min_rad: f64) -> Result<(OdeState, C64, C64, C64)> {
    let d = sector_dir(g, sector)?;
    let mut rad = inner_radius(q).max(min_rad);
    let (mut xf, mut geo);
    loop {
        xf = d * rad;
        geo = axis_xi(q, g, sector, xf)?;
        if (lambda * geo.0).re >= 45.0 || rad > 1e6 {
            break;
        }
        rad *= 1.25;
    }
    let (xi_f, sqf, rf) = geo;
    let m = 30;
    let ap = ActionPath::new(q, &ContourPath::from_infinity(d, vec![xf], sqf), PathOptions { jet_order: m + 2, ..PathOptions::default() })?;
    let kappa = kappa_along(&ap, m)?;
    let n_opt = least_term_order(&kappa, lambda);
    let chi = chi_partial(&kappa, lambda, n_opt);
    let psi = chi / rf;
    let l = wkb_log_derivative(q, xf, sqf, lambda, m)?;
    Ok((OdeState { x: xf, psi, dpsi: psi * l }, sqf, rf, xi_f))
}

/// The solution recessive in `sector`, integrated from far inside the sector to `x` along
/// `route` (the canonical path when `None`).
pub fn recessive_ode(q: &Polynomial, g: &StokesGraph, sector: usize, x: C64, lambda: C64, route: Option<&[C64]>) -> Result<OdeSolution> {
    let inner: Vec<C64> = match route {
        Some(v) => v.iter().copied().chain(std::iter::once(x)).collect(),
        None => canonical_path(g, sector, x)?.vertices,
    };
    let min_rad = 1.25 * inner.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let (st, sqf, rf, xif) = far_start(q, g, sector, lambda, min_rad)?;
    let verts: Vec<C64> = std::iter::once(st.x).chain(inner).collect();
    let verts = routed(q, verts)?;
    let (end, ls) = propagate_scaled(q, lambda, st, &verts[1..])?;
    let (_, r) = track_roots(q, &verts, sqf, rf);
    let xi = xi_along_route(q, &verts, xif, sqf)?;
    let f = (ls - lambda * xif).exp();
    Ok(OdeSolution { psi: end.psi * f, dpsi: end.dpsi * f, chi: end.psi * r * (ls + lambda * (xi - xif)).exp(), xi })
}

/// `chi_{from -> to}(lambda) = lim psi_from q^{1/4} e^{lambda xi}` at the infinity of `to`,
/// by Wronskians against the solution recessive in `to` and the dominant WKB solution there.
/// `route` lists intermediate vertices between the two sector axes.
pub fn joos_ode(q: &Polynomial, g: &StokesGraph, from: usize, to: usize, route: &[C64], lambda: C64) -> Result<C64> {
    let min_rad = 1.25 * route.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let (st, sqf, rf, xif) = far_start(q, g, from, lambda, min_rad)?;
    let d = sector_dir(g, to)?;
    let mut verts = vec![st.x];
    verts.extend_from_slice(route);
    let mut rad = inner_radius(q).max(min_rad);
    let (mut xe, mut sqe, mut re_, mut xie);
    loop {
        xe = d * rad;
        let mut v = verts.clone();
        v.push(xe);
        let v = routed(q, v)?;
        let (s, r) = track_roots(q, &v, sqf, rf);
        sqe = s;
        re_ = r;
        xie = xi_along_route(q, &v, xif, sqf)?;
        if (lambda * xie).re <= -45.0 || rad > 1e6 {
            break;
        }
        rad *= 1.25;
    }
    verts.push(xe);
    let verts = routed(q, verts)?;
    let (end, ls) = propagate_scaled(q, lambda, st, &verts[1..])?;
    let m = 30;
    // dominant solution normalised at the target infinity, same branch as the path
    let ap = ActionPath::new(q, &ContourPath::from_infinity(d, vec![xe], sqe), PathOptions { jet_order: m + 2, ..PathOptions::default() })?;
    let kappa = kappa_along(&ap, m)?;
    let chi_d = chi_partial(&kappa, lambda, least_term_order(&kappa, lambda));
    let dom = chi_d / re_;
    let l_dom = wkb_log_derivative(q, xe, sqe, lambda, m)?;
    let l_rec = wkb_log_derivative(q, xe, -sqe, lambda, m)?;
    let num = end.psi * l_rec - end.dpsi;
    let den = dom * l_rec - dom * l_dom;
    Ok(num / den * (ls + lambda * (xie - xif)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    pub sector_a: usize,
    pub alpha_a: C64,
    pub sector_b: usize,
    pub alpha_b: C64,
    pub residual: f64,
}

/// Least-squares coefficients of the sector-1 solution (reference integrator) in the basis of
/// WKB-built solutions, fitted on values and derivatives at `x_probe` and a second point
/// further out. The basis is the pair recessive in the probe's sector `k` and in `k - 1`
/// (or `k + 1` when `k - 1` is sector 1).
pub fn connection_decompose(q: &Polynomial, g: &StokesGraph, x_probe: C64, lambda: C64) -> Result<Decomposition> {
    let p = g.sectors.len();
    let k = crate::geometry::sector_of_angle(&g.sectors, x_probe.arg());
    let prev = if k == 1 { p } else { k - 1 };
    let basis = if k == 1 { (1, 2) } else if prev == 1 { (k, if k == p { 1 } else { k + 1 }) } else { (prev, k) };
    connection_decompose_basis(q, g, x_probe, lambda, 1, basis)
}

pub fn connection_decompose_basis(
    q: &Polynomial,
    g: &StokesGraph,
    x_probe: C64,
    lambda: C64,
    source: usize,
    basis: (usize, usize),
) -> Result<Decomposition> {
    let probes = [x_probe, x_probe * 1.25];
    let mut rows_a = Vec::new();
    let mut rows_b = Vec::new();
    let mut rhs = Vec::new();
    for &xp in &probes {
        let truth = source_solution(q, g, source, xp, lambda)?;
        let fa = wkb_optimal(q, g, basis.0, xp, lambda)?;
        let fb = wkb_optimal(q, g, basis.1, xp, lambda)?;
        rows_a.push(fa.psi);
        rows_b.push(fb.psi);
        rhs.push(truth.psi);
        rows_a.push(fa.dpsi);
        rows_b.push(fb.dpsi);
        rhs.push(truth.dpsi);
    }
    let nr = rhs.len();
    // row scaling
    let mut a = DMatrix::<C64>::zeros(nr, 2);
    let mut b = DVector::<C64>::zeros(nr);
    for i in 0..nr {
        let s = 1.0 / (rows_a[i].norm() + rows_b[i].norm() + rhs[i].norm()).max(1e-300);
        a[(i, 0)] = rows_a[i] * s;
        a[(i, 1)] = rows_b[i] * s;
        b[i] = rhs[i] * s;
    }
    // column scaling
    let c0 = a.column(0).norm().max(1e-300);
    let c1 = a.column(1).norm().max(1e-300);
    let mut an = a.clone();
    for i in 0..nr {
        an[(i, 0)] /= c0;
        an[(i, 1)] /= c1;
    }
    let svd = an.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if smin <= 1e-13 * smax {
        return Err(Error::IllConditioned(format!("basis solutions are parallel (cond {:.1e})", smax / smin.max(1e-300))));
    }
    let sol = svd.solve(&b, 1e-15).map_err(|e| Error::IllConditioned(e.to_string()))?;
    let res = (&an * &sol - &b).norm() / b.norm().max(1e-300);
    Ok(Decomposition { sector_a: basis.0, alpha_a: sol[0] / c0, sector_b: basis.1, alpha_b: sol[1] / c1, residual: res })
}

fn source_solution(q: &Polynomial, g: &StokesGraph, source: usize, x: C64, lambda: C64) -> Result<OdeSolution> {
    match recessive_ode(q, g, source, x, lambda, None) {
        Ok(s) => Ok(s),
        Err(_) => recessive_ode(q, g, source, x, lambda, Some(&[])),
    }
}

/// WKB solution of `sector` at `x`, truncated at its least term.
pub fn wkb_optimal(q: &Polynomial, g: &StokesGraph, sector: usize, x: C64, lambda: C64) -> Result<FundamentalValue> {
    let n_max = 30;
    let geo = path_geometry(q, g, sector, x)?;
    let ap = ActionPath::new(q, &geo.path, path_opts(n_max))?;
    let kappa = kappa_along(&ap, n_max)?;
    let n = least_term_order(&kappa, lambda);
    let chi = chi_partial(&kappa, lambda, n);
    let psi = chi * (-lambda * geo.xi).exp() / geo.r;
    let l = wkb_log_derivative(q, x, geo.sq, lambda, n_max)?;
    Ok(FundamentalValue { psi, dpsi: psi * l, chi, xi: geo.xi, sqrt_q: geo.sq, quarter_root: geo.r, recessive: (lambda * geo.xi).re > 0.0, order: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c;
    use crate::geometry::stokes_graph;

    #[test]
    fn linear_kappa_one() {
        let q = Polynomial::from_real(&[0.0, 1.0]).unwrap();
        let g = stokes_graph(&q).unwrap();
        let x = 1.5f64.powf(2.0 / 3.0);
        let k = kappa_series(&q, &g, c(x, 0.0), 3).unwrap();
        assert!((k.values[1] - c(5.0 / 36.0, 0.0)).norm() < 1e-12, "{:?}", k.values);
        let v = chi_asymptotic(&WkbCoefficients { values: k.values[..2].to_vec(), ..k.clone() }, c(10.0, 0.0));
        assert!((v - c(1.0 - 5.0 / 720.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn linear_kappa_tower_matches_airy_coefficients() {
        let q = Polynomial::from_real(&[0.0, 1.0]).unwrap();
        let g = stokes_graph(&q).unwrap();
        let xi = 1.0f64;
        let x = (1.5 * xi).powf(2.0 / 3.0);
        let k = kappa_series(&q, &g, c(x, 0.0), 8).unwrap();
        let mut ck = 1.0f64;
        for n in 0..=8 {
            let expect = ck * 2f64.powi(n as i32) / xi.powi(n as i32);
            assert!((k.values[n] / expect - 1.0).norm() < 1e-10, "n={n} {} vs {expect}", k.values[n]);
            let kk = n as f64;
            ck *= (6.0 * kk + 1.0) * (6.0 * kk + 5.0) / (72.0 * (kk + 1.0));
        }
    }

    #[test]
    fn ode_oracle_matches_airy() {
        let q = Polynomial::from_real(&[0.0, 1.0]).unwrap();
        let g = stokes_graph(&q).unwrap();
        let lambda = 3.0f64;
        let x = 2.0f64;
        let sol = recessive_ode(&q, &g, 1, c(x, 0.0), c(lambda, 0.0), None).unwrap();
        let ai = crate::special::airy_ai(c(lambda.powf(2.0 / 3.0) * x, 0.0));
        let psi = 2.0 * std::f64::consts::PI.sqrt() * lambda.powf(1.0 / 6.0) * ai;
        assert!((sol.psi / psi - 1.0).norm() < 1e-9, "{} {}", sol.psi, psi);
    }

    #[test]
    fn harmonic_joos_from_ode() {
        let q = Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap();
        let g = stokes_graph(&q).unwrap();
        for &lambda in &[2.0f64, 5.0] {
            let v = joos_ode(&q, &g, 1, 3, &[], c(lambda, 0.0)).unwrap();
            let z = lambda / 2.0;
            let exact = (2.0 * std::f64::consts::PI).sqrt() * (z / std::f64::consts::E).powf(z)
                / crate::special::gamma(c(0.5 + z, 0.0)).re;
            assert!((v - c(exact, 0.0)).norm() < 1e-9, "{lambda}: {v} vs {exact}");
        }
    }

    #[test]
    fn harmonic_connection_residual() {
        let q = Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap();
        let g = stokes_graph(&q).unwrap();
        let res: Vec<f64> = [3.0, 5.0, 8.0]
            .iter()
            .map(|&lam| connection_decompose(&q, &g, c(-1.2, 0.2), c(lam, 0.0)).unwrap().residual)
            .collect();
        assert!(res[1] < 1e-6, "{res:?}");
        assert!(res[0] > res[1] && res[1] > res[2], "{res:?}");
    }

    #[test]
    fn self_decomposition() {
        let q = Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap();
        let g = stokes_graph(&q).unwrap();
        let d = connection_decompose_basis(&q, &g, c(3.0, 0.2), c(5.0, 0.0), 1, (1, 2)).unwrap();
        assert!((d.alpha_a - 1.0).norm() < 1e-6, "{:?}", d);
    }

    #[test]
    fn linear_connection_equal_moduli() {
        let q = Polynomial::from_real(&[0.0, 1.0]).unwrap();
        let g = stokes_graph(&q).unwrap();
        let d = connection_decompose_basis(&q, &g, c(-4.0, 0.5), c(2.0, 0.0), 1, (2, 3)).unwrap();
        assert!((d.alpha_a.norm() - d.alpha_b.norm()).abs() < 1e-6 * d.alpha_a.norm(), "{:?}", d);
    }
}
