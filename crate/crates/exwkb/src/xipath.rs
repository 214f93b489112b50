//! Discretized action paths: Gauss-Legendre nodes along a contour, each carrying `xi`,
//! `omega~`, `Omega` and a Taylor jet of `omega~` in the action variable.
//!
//! The jets give `omega~(xi_i + d)` and `Omega(xi_i + d)` for shifts `|d|` inside the jet
//! radius; larger shifts are reached by stepwise re-expansion (`navigate`).

use crate::error::{Error, Result};
use crate::geometry::{ContourPath, TrackedPath};
use crate::potential::{omega_tilde_raw, Polynomial};
use crate::quad::{cumulative_matrix, gauss_legendre, gk15, integrate, QuadOptions};
use crate::series;
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct JetNode {
    pub x: C64,
    pub sq: C64,
    /// quadrature weight in `xi` (zero for end points)
    pub w: C64,
    /// `xi` relative to the path anchor
    pub xi: C64,
    pub omt: C64,
    pub big_omega: C64,
    /// Taylor coefficients of `omega~(xi + d)` in `d`
    pub jet: Vec<C64>,
    /// Taylor coefficients of `Omega(xi + d) - Omega(xi)`
    pub ojet: Vec<C64>,
    /// Taylor coefficients of `x(xi + d) - x`
    pub xjet: Vec<C64>,
    /// estimated convergence radius of the jets
    pub radius: f64,
}

/// Relative truncation error accepted for shifted jet evaluations.
pub const JET_TOL: f64 = 1e-13;

impl JetNode {
    /// Largest shift with `(|d|/radius)^order` below `JET_TOL`.
    pub fn reach(&self) -> f64 {
        self.radius * JET_TOL.powf(1.0 / self.jet.len() as f64)
    }

    fn check(&self, d: C64) -> Result<()> {
        if d.norm() > self.reach() {
            return Err(Error::StripObstructed(format!(
                "shift {:.3e} exceeds jet radius {:.3e} at x = {}",
                d.norm(),
                self.radius,
                self.x
            )));
        }
        Ok(())
    }

    pub fn omt_at(&self, d: C64) -> Result<C64> {
        self.check(d)?;
        Ok(series::eval(&self.jet, d))
    }

    pub fn big_omega_at(&self, d: C64) -> Result<C64> {
        self.check(d)?;
        Ok(self.big_omega + series::eval(&self.ojet, d))
    }

    pub fn x_at(&self, d: C64) -> Result<C64> {
        self.check(d)?;
        Ok(self.x + series::eval(&self.xjet, d))
    }

    /// Node re-centred at `xi + d` (jets shifted; radius reduced by `|d|`).
    pub fn shifted(&self, d: C64) -> Result<JetNode> {
        self.check(d)?;
        let jet = series::shift_poly(&self.jet, d);
        let ojet_full = series::shift_poly(&self.ojet, d);
        let xjet_full = series::shift_poly(&self.xjet, d);
        let mut ojet = ojet_full.clone();
        ojet[0] = C64::default();
        let mut xjet = xjet_full.clone();
        xjet[0] = C64::default();
        let x = self.x + xjet_full[0];
        let dx = series::eval(&series::deriv(&self.xjet), d);
        Ok(JetNode {
            x,
            sq: dx.inv(),
            w: C64::default(),
            xi: self.xi + d,
            omt: jet[0],
            big_omega: self.big_omega + ojet_full[0],
            jet,
            ojet,
            xjet,
            radius: self.radius - d.norm(),
        })
    }
}

/// Jets at a point `x` with `sqrt(q(x)) = sq`.
pub fn build_jet(q: &Polynomial, x: C64, sq: C64, order: usize) -> Result<(Vec<C64>, Vec<C64>, Vec<C64>, f64)> {
    let k = order.max(4);
    let qt = q.taylor_at(x);
    if qt[0].norm() == 0.0 {
        return Err(Error::TurningPointProximity(format!("jet requested at a turning point {x}")));
    }
    // xi - xi_i as a series in h = x - x_i, then invert
    let s = series::sqrt_with(&qt, sq, k + 1);
    let dxi = series::integ(&s);
    let h = series::revert(&dxi, k + 1);
    let q0 = series::compose(&qt, &h, k);
    let d1 = series::deriv(&qt);
    let d2 = series::deriv(&d1);
    let q1 = series::compose(&d1, &h, k);
    let q2 = series::compose(&d2, &h, k);
    let num = series::add(&series::scale(&series::mul(&q0, &q2, k), C64::new(4.0, 0.0)), &series::scale(&series::mul(&q1, &q1, k), C64::new(-5.0, 0.0)), k);
    let q3 = series::mul(&series::mul(&q0, &q0, k), &q0, k);
    let jet = series::scale(&series::div(&num, &q3, k), C64::new(1.0 / 16.0, 0.0));
    let mut ojet = series::integ(&jet);
    ojet.truncate(k);
    let mut xjet = h;
    xjet.truncate(k);
    let radius = jet_radius(&jet);
    Ok((jet, ojet, xjet, radius))
}

fn jet_radius(jet: &[C64]) -> f64 {
    let k = jet.len();
    let mut r = f64::INFINITY;
    for j in (k / 2).max(1)..k {
        let a = jet[j].norm();
        if a > 0.0 {
            r = r.min(a.powf(-1.0 / j as f64));
        }
    }
    r.min(1e8)
}

/// Build a node at `x` (no weight).
pub fn point_node(q: &Polynomial, x: C64, sq: C64, xi: C64, big_omega: C64, order: usize) -> Result<JetNode> {
    let (jet, ojet, xjet, radius) = build_jet(q, x, sq, order)?;
    Ok(JetNode { x, sq, w: C64::default(), xi, omt: jet[0], big_omega, jet, ojet, xjet, radius })
}

/// Move from `node` to `xi + delta` along the straight `xi`-segment by repeated re-expansion.
pub fn navigate(q: &Polynomial, node: &JetNode, delta: C64, order: usize) -> Result<JetNode> {
    let mut cur = node.clone();
    let mut left = delta;
    let mut guard = 0;
    while left.norm() > 0.0 {
        guard += 1;
        if guard > 10_000 {
            return Err(Error::StripObstructed("navigation stalled near a turning point image".into()));
        }
        let lim = cur.reach();
        let step = if left.norm() <= lim { left } else { left * (lim / left.norm()) };
        if step.norm() < 1e-14 * (1.0 + delta.norm()) && left.norm() > 1e-12 {
            return Err(Error::StripObstructed("navigation step underflow".into()));
        }
        let x_new = cur.x + series::eval(&cur.xjet, step);
        let dx = series::eval(&series::deriv(&cur.xjet), step);
        let sq_pred = dx.inv();
        let p = q.eval(x_new).sqrt();
        let sq = if (p - sq_pred).norm() <= (p + sq_pred).norm() { p } else { -p };
        let om = cur.big_omega + series::eval(&cur.ojet, step);
        cur = point_node(q, x_new, sq, cur.xi + step, om, order)?;
        left -= step;
    }
    Ok(cur)
}

#[derive(Debug, Clone, Copy)]
pub struct PathOptions {
    pub gl_order: usize,
    pub jet_order: usize,
    /// panel acceptance: GK error below `tol * scale * width`
    pub tol: f64,
    pub max_panels: usize,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions { gl_order: 16, jet_order: 40, tol: 1e-14, max_panels: 4000 }
    }
}

/// Action path discretized into jet nodes.
#[derive(Debug, Clone)]
pub struct ActionPath {
    pub q: Polynomial,
    pub nodes: Vec<JetNode>,
    /// end point data when the path ends at a finite point
    pub end: Option<JetNode>,
    /// `Omega` at the end of the path
    pub omega_end: C64,
    pub jet_order: usize,
    pub starts_at_infinity: bool,
}

impl ActionPath {
    pub fn new(q: &Polynomial, path: &ContourPath, opts: PathOptions) -> Result<Self> {
        let tp = TrackedPath::new(q, path)?;
        let n = opts.gl_order;
        let (gx, gw) = gauss_legendre(n);
        let smat = cumulative_matrix(n);
        let mut nodes: Vec<JetNode> = Vec::new();
        let mut omega_acc = C64::default();
        // xi of the first finite vertex is the anchor (xi = 0)
        let mut xi_acc = C64::default();
        for (piece, tr) in tp.pieces.iter() {
            let is_start_ray = matches!(piece, crate::geometry::Piece::StartRay { .. });
            let f_om = |t: f64| {
                let x = piece.x(t);
                omega_tilde_raw(q, x) * tr.sqrt_q(q, piece, t) * piece.dx(t)
            };
            let f_xi = |t: f64| tr.sqrt_q(q, piece, t) * piece.dx(t);
            let panels = adapt_panels(&f_om, &f_xi, !piece.is_infinite(), opts)?;
            // per panel cumulative values
            let mut piece_nodes: Vec<(f64, C64, C64, C64, C64)> = Vec::new(); // (t, w, om_cum, xi_cum, sq)
            let mut om_before = C64::default();
            let mut xi_before = C64::default();
            let mut xi_panel_totals = Vec::new();
            for &(a, b) in &panels {
                let hw = 0.5 * (b - a);
                let c0 = 0.5 * (a + b);
                let ts: Vec<f64> = gx.iter().map(|&u| c0 + hw * u).collect();
                let fo: Vec<C64> = ts.iter().map(|&t| f_om(t)).collect();
                let fx: Vec<C64> = ts.iter().map(|&t| f_xi(t)).collect();
                for i in 0..n {
                    let mut co = C64::default();
                    let mut cx = C64::default();
                    for j in 0..n {
                        co += fo[j] * smat[i][j];
                        cx += fx[j] * smat[i][j];
                    }
                    let w = fx[i] * gw[i] * hw;
                    piece_nodes.push((ts[i], w, om_before + co * hw, xi_before + cx * hw, tr.sqrt_q(q, piece, ts[i])));
                }
                let tot_o: C64 = fo.iter().zip(&gw).map(|(f, w)| f * w).sum::<C64>() * hw;
                let tot_x: C64 = fx.iter().zip(&gw).map(|(f, w)| f * w).sum::<C64>() * hw;
                om_before += tot_o;
                xi_before += tot_x;
                xi_panel_totals.push(tot_x);
            }
            if is_start_ray {
                // xi relative to the base (tau = 1): xi_node - xi_base = -(int_{t}^{1})
                let total_xi_after_first: C64 = xi_panel_totals.iter().skip(1).sum();
                let first_panel_end = panels[0].1;
                // the first panel contains infinity: integrate each node directly to its right end
                for pn in piece_nodes.iter_mut().take(n) {
                    let (v, _) = integrate(&f_xi, pn.0, first_panel_end, QuadOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_panels: 2000 });
                    pn.3 = -(v + total_xi_after_first);
                }
                let mut acc = C64::default();
                let mut idx = n;
                for (p, &(a, b)) in panels.iter().enumerate().skip(1) {
                    let hw = 0.5 * (b - a);
                    let c0 = 0.5 * (a + b);
                    let fx: Vec<C64> = gx.iter().map(|&u| f_xi(c0 + hw * u)).collect();
                    for i in 0..n {
                        let mut cx = C64::default();
                        for j in 0..n {
                            cx += fx[j] * smat[i][j];
                        }
                        piece_nodes[idx].3 = acc + cx * hw - total_xi_after_first;
                        idx += 1;
                    }
                    acc += xi_panel_totals[p];
                }
            }
            for (t, w, om_c, xi_c, sq) in piece_nodes {
                let x = piece.x(t);
                let (jet, ojet, xjet, radius) = build_jet(q, x, sq, opts.jet_order)?;
                let xi = if is_start_ray { xi_c } else { xi_acc + xi_c };
                nodes.push(JetNode { x, sq, w, xi, omt: jet[0], big_omega: omega_acc + om_c, jet, ojet, xjet, radius });
            }
            omega_acc += om_before;
            if !is_start_ray {
                xi_acc += xi_before;
            }
        }
        let end = if path.end_dir.is_none() {
            let x = path.last();
            let sq = tp.end_branch();
            Some(point_node(q, x, sq, xi_acc, omega_acc, opts.jet_order)?)
        } else {
            None
        };
        Ok(ActionPath {
            q: q.clone(),
            nodes,
            end,
            omega_end: omega_acc,
            jet_order: opts.jet_order,
            starts_at_infinity: path.start_dir.is_some(),
        })
    }

    pub fn xi_end(&self) -> Option<C64> {
        self.end.as_ref().map(|e| e.xi)
    }

    /// Integral of `f(node)` against the `xi` weights.
    pub fn sum<F: Fn(&JetNode) -> C64>(&self, f: F) -> C64 {
        self.nodes.iter().map(|n| f(n) * n.w).sum()
    }

    /// Gauss-Legendre nodes on the `xi`-extension from the end point to `xi_end + shift`.
    pub fn extension(&self, shift: C64, n: usize) -> Result<Vec<JetNode>> {
        let end = match &self.end {
            Some(e) => e,
            None => return Ok(Vec::new()),
        };
        if shift.norm() == 0.0 {
            return Ok(Vec::new());
        }
        let (gx, gw) = gauss_legendre(n);
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let u = 0.5 * (gx[k] + 1.0);
            let d = shift * u;
            let mut node = end.shifted(d)?;
            node.w = shift * (0.5 * gw[k]);
            out.push(node);
        }
        Ok(out)
    }

    /// `omega~` and `Omega` at `xi_end + d`; at an infinite end these are `0` and `Omega_end`.
    pub fn end_values(&self, d: C64) -> Result<(C64, C64)> {
        match &self.end {
            Some(e) => Ok((e.omt_at(d)?, e.big_omega_at(d)?)),
            None => Ok((C64::default(), self.omega_end)),
        }
    }
}

fn adapt_panels<F1: Fn(f64) -> C64, F2: Fn(f64) -> C64>(
    f1: &F1,
    f2: &F2,
    use_f2: bool,
    opts: PathOptions,
) -> Result<Vec<(f64, f64)>> {
    let init = 8;
    let mut panels: Vec<(f64, f64)> = (0..init).map(|k| (k as f64 / init as f64, (k + 1) as f64 / init as f64)).collect();
    let est = |a: f64, b: f64| {
        let (v1, e1) = gk15(&mut |t| f1(t), a, b);
        let (v2, e2) = if use_f2 { gk15(&mut |t| f2(t), a, b) } else { (C64::default(), 0.0) };
        (v1.norm(), e1, v2.norm(), e2)
    };
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for &(a, b) in &panels {
        let (v1, _, v2, _) = est(a, b);
        s1 += v1;
        s2 += v2;
    }
    let s1 = s1.max(1e-300);
    let s2 = s2.max(1e-300);
    let mut done = Vec::new();
    while let Some((a, b)) = panels.pop() {
        let (_, e1, _, e2) = est(a, b);
        let ok = e1 <= opts.tol * s1 * (b - a) + 1e-300 && (!use_f2 || e2 <= opts.tol * s2 * (b - a));
        if ok || b - a < 1e-10 {
            done.push((a, b));
        } else {
            let m = 0.5 * (a + b);
            panels.push((a, m));
            panels.push((m, b));
        }
        if done.len() + panels.len() > opts.max_panels {
            return Err(Error::BudgetExceeded("action path panel budget exceeded".into()));
        }
    }
    done.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(done)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c;

    #[test]
    fn linear_nodes_match_closed_forms() {
        let q = Polynomial::from_real(&[0.0, 1.0]).unwrap();
        let x = 2.0f64;
        let p = ContourPath::from_infinity(c(1.0, 0.0), vec![c(x, 0.0)], c(x.sqrt(), 0.0));
        let ap = ActionPath::new(&q, &p, PathOptions::default()).unwrap();
        let xi0 = 2.0 / 3.0 * x.powf(1.5);
        assert!((ap.omega_end - c(5.0 / (36.0 * xi0), 0.0)).norm() < 1e-13);
        for nd in ap.nodes.iter().step_by(37) {
            let xi_abs = 2.0 / 3.0 * nd.x.powf(1.5);
            // anchor is the end point
            assert!((nd.xi - (xi_abs - xi0)).norm() < 1e-9 * (1.0 + xi_abs.norm()), "{} {}", nd.xi, xi_abs - xi0);
            assert!((nd.big_omega - 5.0 / (36.0 * xi_abs)).norm() < 1e-12);
            assert!((nd.omt + 5.0 / (36.0 * xi_abs * xi_abs)).norm() < 1e-12);
        }
        let e = ap.end.as_ref().unwrap();
        let d = c(-0.2, 0.1);
        let xi = xi0 + d;
        assert!((e.omt_at(d).unwrap() + 5.0 / (36.0 * xi * xi)).norm() < 1e-12);
        assert!((e.big_omega_at(d).unwrap() - 5.0 / (36.0 * xi)).norm() < 1e-12);
        let nav = navigate(&q, e, c(-1.2, 0.3), 40).unwrap();
        let xi = xi0 + c(-1.2, 0.3);
        assert!((nav.big_omega - 5.0 / (36.0 * xi)).norm() < 1e-11);
    }

    #[test]
    fn harmonic_total_omega() {
        let q = Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap();
        let p = ContourPath::from_infinity(c(1.0, 0.0), vec![c(2.0, 0.0), c(-2.0, 0.0)], c(5f64.sqrt(), 0.0))
            .with_end_at_infinity(c(-1.0, 0.0));
        let ap = ActionPath::new(&q, &p, PathOptions::default()).unwrap();
        assert!((ap.omega_end - c(-1.0 / 6.0, 0.0)).norm() < 1e-13, "{}", ap.omega_end);
    }
}
