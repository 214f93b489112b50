//! Contours in the complex `x`-plane with continuous tracking of `sqrt(q)`, action integrals,
//! `Omega`, Stokes graphs, canonical paths and turning-point action distances.
//!
//! A path may start or end at infinity. Infinite legs are compactified by
//! `x = base + dir * s^2` with `s = tau/(1 - tau)`, so every integrand that decays at
//! infinity is integrated without truncation radius.

use crate::error::{Error, Result};
use crate::potential::{omega_tilde_raw, turning_points, Polynomial, TurningPoint};
use crate::quad::{integrate, QuadOptions};
use crate::{C64, I};
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Oriented piecewise-linear path, optionally starting and/or ending at infinity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourPath {
    pub vertices: Vec<C64>,
    /// value of `sqrt(q)` at the first vertex
    pub branch_seed: C64,
    /// unit direction of the incoming leg from infinity (path starts at infinity)
    pub start_dir: Option<C64>,
    /// unit direction of the outgoing leg to infinity (path ends at infinity)
    pub end_dir: Option<C64>,
}

impl ContourPath {
    pub fn segment(a: C64, b: C64, branch_seed: C64) -> Self {
        ContourPath { vertices: vec![a, b], branch_seed, start_dir: None, end_dir: None }
    }

    pub fn polyline(vertices: Vec<C64>, branch_seed: C64) -> Self {
        ContourPath { vertices, branch_seed, start_dir: None, end_dir: None }
    }

    /// Path from infinity along `dir` (pointing outward) into `vertices[0]`, then along the
    /// polyline.
    pub fn from_infinity(dir: C64, vertices: Vec<C64>, branch_seed: C64) -> Self {
        ContourPath { vertices, branch_seed, start_dir: Some(dir / dir.norm()), end_dir: None }
    }

    pub fn with_end_at_infinity(mut self, dir: C64) -> Self {
        self.end_dir = Some(dir / dir.norm());
        self
    }

    pub fn first(&self) -> C64 {
        self.vertices[0]
    }

    pub fn last(&self) -> C64 {
        *self.vertices.last().unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertices.is_empty() {
            return Err(Error::InvalidInput("path without vertices".into()));
        }
        if self.vertices.len() == 1 && self.start_dir.is_none() && self.end_dir.is_none() {
            return Err(Error::InvalidInput("degenerate path".into()));
        }
        for w in self.vertices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidInput("consecutive vertices coincide".into()));
            }
        }
        Ok(())
    }
}

/// One leg of a path, parametrized by `tau in [0, 1]` in path order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    /// from infinity into `base`; `dir` points outward
    StartRay { base: C64, dir: C64 },
    Segment { a: C64, b: C64, a_tp: bool, b_tp: bool },
    EndRay { base: C64, dir: C64 },
}

impl Piece {
    pub fn x(&self, t: f64) -> C64 {
        match *self {
            Piece::StartRay { base, dir } => {
                let s = (1.0 - t) / t;
                base + dir * s * s
            }
            Piece::EndRay { base, dir } => {
                let s = t / (1.0 - t);
                base + dir * s * s
            }
            Piece::Segment { a, b, a_tp, b_tp } => a + (b - a) * seg_map(t, a_tp, b_tp).0,
        }
    }

    pub fn dx(&self, t: f64) -> C64 {
        match *self {
            Piece::StartRay { dir, .. } => {
                let s = (1.0 - t) / t;
                -dir * 2.0 * s / (t * t)
            }
            Piece::EndRay { dir, .. } => {
                let s = t / (1.0 - t);
                dir * 2.0 * s / ((1.0 - t) * (1.0 - t))
            }
            Piece::Segment { a, b, a_tp, b_tp } => (b - a) * seg_map(t, a_tp, b_tp).1,
        }
    }

    pub fn is_infinite(&self) -> bool {
        !matches!(self, Piece::Segment { .. })
    }
}

fn seg_map(t: f64, a_tp: bool, b_tp: bool) -> (f64, f64) {
    match (a_tp, b_tp) {
        (false, false) => (t, 1.0),
        (true, false) => (t * t, 2.0 * t),
        (false, true) => {
            let u = 1.0 - t;
            (1.0 - u * u, 2.0 * u)
        }
        (true, true) => (t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t)),
    }
}

/// Samples of `sqrt(q)` along a piece; any `tau` takes the sign nearest its closest sample.
#[derive(Debug, Clone)]
pub struct BranchTracker {
    samples: Vec<(f64, C64)>,
}

const TAU_EDGE: f64 = 1e-6;

impl BranchTracker {
    /// Track from `tau0` (where `sqrt(q) = seed`) toward `tau1`.
    pub fn build(q: &Polynomial, piece: &Piece, tau0: f64, seed: C64, tau1: f64) -> Result<Self> {
        let mut samples = vec![(tau0, seed)];
        let dirn = if tau1 > tau0 { 1.0 } else { -1.0 };
        let end = if piece.is_infinite() {
            // the far end of a ray sits at tau=0 (start ray) or tau=1 (end ray)
            tau1.clamp(1e-7, 1.0 - 1e-7)
        } else {
            tau1.clamp(TAU_EDGE, 1.0 - TAU_EDGE)
        };
        let mut t = tau0;
        let mut s = seed;
        let mut h = 1.0 / 64.0;
        let mut guard = 0usize;
        while (end - t) * dirn > 0.0 {
            guard += 1;
            if guard > 200_000 {
                return Err(Error::BranchDiscontinuity("branch tracking did not finish".into()));
            }
            let mut tn = t + dirn * h;
            if (tn - end) * dirn > 0.0 {
                tn = end;
            }
            let qv = q.eval(piece.x(tn));
            let p = qv.sqrt();
            let cand = if (p - s).norm() <= (p + s).norm() { p } else { -p };
            let ang = if s.norm() > 0.0 && cand.norm() > 0.0 { (cand / s).arg().abs() } else { 0.0 };
            if ang > 0.25 && (tn - t).abs() > 1e-13 {
                h = 0.5 * (tn - t).abs();
                if h < 1e-13 {
                    return Err(Error::PathThroughTurningPoint(format!("near x = {}", piece.x(tn))));
                }
                continue;
            }
            if qv.norm() == 0.0 {
                if tn == end {
                    break;
                }
                return Err(Error::PathThroughTurningPoint(format!("at x = {}", piece.x(tn))));
            }
            samples.push((tn, cand));
            s = cand;
            t = tn;
            h = (h * 1.5).min(1.0 / 32.0);
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(BranchTracker { samples })
    }

    pub fn nearest(&self, t: f64) -> C64 {
        let i = self.samples.partition_point(|p| p.0 < t);
        let cand = [i.saturating_sub(1), i.min(self.samples.len() - 1)];
        let j = if (self.samples[cand[0]].0 - t).abs() <= (self.samples[cand[1]].0 - t).abs() {
            cand[0]
        } else {
            cand[1]
        };
        self.samples[j].1
    }

    /// `sqrt(q)` at parameter `t` on the tracked sheet.
    pub fn sqrt_q(&self, q: &Polynomial, piece: &Piece, t: f64) -> C64 {
        let p = q.eval(piece.x(t)).sqrt();
        let r = self.nearest(t);
        if (p - r).norm() <= (p + r).norm() {
            p
        } else {
            -p
        }
    }

    pub fn value_at_start(&self) -> C64 {
        self.samples[0].1
    }

    pub fn value_at_end(&self) -> C64 {
        self.samples.last().unwrap().1
    }
}

/// A path resolved into pieces with branch trackers.
#[derive(Debug, Clone)]
pub struct TrackedPath {
    pub q: Polynomial,
    pub pieces: Vec<(Piece, BranchTracker)>,
}

fn near_tp(tps: &[TurningPoint], x: C64) -> bool {
    tps.iter().any(|t| (t.location - x).norm() < 1e-10 * (1.0 + x.norm()))
}

impl TrackedPath {
    pub fn new(q: &Polynomial, path: &ContourPath) -> Result<Self> {
        path.validate()?;
        let tps = turning_points(q)?;
        let mut pieces = Vec::new();
        let vs = &path.vertices;
        if let Some(d) = path.start_dir {
            pieces.push(Piece::StartRay { base: vs[0], dir: d });
        }
        for w in vs.windows(2) {
            pieces.push(Piece::Segment { a: w[0], b: w[1], a_tp: near_tp(&tps, w[0]), b_tp: near_tp(&tps, w[1]) });
        }
        if let Some(d) = path.end_dir {
            pieces.push(Piece::EndRay { base: *vs.last().unwrap(), dir: d });
        }
        // avoid turning points in the interior of pieces
        for p in &pieces {
            if let Piece::Segment { a, b, .. } = *p {
                for tp in &tps {
                    let d = dist_point_segment(tp.location, a, b);
                    let at_end = (tp.location - a).norm() < 1e-10 * (1.0 + a.norm())
                        || (tp.location - b).norm() < 1e-10 * (1.0 + b.norm());
                    if !at_end && d < crate::potential::EXCLUSION_RADIUS {
                        return Err(Error::PathThroughTurningPoint(format!("{}", tp.location)));
                    }
                }
            }
        }
        let mut seed = path.branch_seed;
        let mut out = Vec::new();
        for p in pieces {
            let tr = match p {
                Piece::StartRay { .. } => BranchTracker::build(q, &p, 1.0 - 1e-12, seed, 0.0)?,
                _ => BranchTracker::build(q, &p, if near_tp(&tps, p.x(0.0)) { TAU_EDGE } else { 0.0 }, seed, 1.0)?,
            };
            seed = match p {
                Piece::StartRay { .. } => tr.value_at_end(),
                _ => tr.value_at_end(),
            };
            // for a start ray the sample at the base sits at tau -> 1, which is the last sample
            out.push((p, tr));
        }
        Ok(TrackedPath { q: q.clone(), pieces: out })
    }

    /// `sqrt(q)` at the final vertex.
    pub fn end_branch(&self) -> C64 {
        self.pieces.last().unwrap().1.value_at_end()
    }

    /// Integral of `f(x, sqrt q) dx` over the whole path.
    pub fn integrate<F: Fn(C64, C64) -> C64>(&self, f: F, opts: QuadOptions) -> (C64, f64) {
        let mut tot = C64::default();
        let mut err = 0.0;
        for (p, tr) in &self.pieces {
            let g = |t: f64| {
                let x = p.x(t);
                let s = tr.sqrt_q(&self.q, p, t);
                f(x, s) * p.dx(t)
            };
            let (v, e) = integrate(g, 0.0, 1.0, opts);
            tot += v;
            err += e;
        }
        (tot, err)
    }
}

pub fn dist_point_segment(p: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let t = ((p - a) * d.conj()).re / d.norm_sqr();
    let t = t.clamp(0.0, 1.0);
    (a + d * t - p).norm()
}

/// Insert detour vertices so that no segment interior passes within `1e-3` of a turning
/// point; detours go to the left of the travel direction.
pub fn detour_route(q: &Polynomial, vertices: &[C64]) -> Result<Vec<C64>> {
    let tps = turning_points(q)?;
    let mut out = vec![vertices[0]];
    for w in vertices.windows(2) {
        let mut stack = vec![(w[0], w[1], 0usize)];
        let mut pieces = Vec::new();
        while let Some((a, b, depth)) = stack.pop() {
            let len = (b - a).norm();
            let hit = tps.iter().find(|t| {
                let d = dist_point_segment(t.location, a, b);
                let near_end = (t.location - a).norm() < 1e-9 || (t.location - b).norm() < 1e-9;
                !near_end && d < 1e-3 * (1.0 + len)
            });
            match hit {
                Some(t) if depth < 8 => {
                    let others = tps
                        .iter()
                        .filter(|o| o.location != t.location)
                        .map(|o| (o.location - t.location).norm())
                        .fold(f64::INFINITY, f64::min);
                    let rho = 0.3 * (0.5 * len).min(others);
                    let nrm = I * (b - a) / len;
                    let p = t.location + nrm * rho;
                    stack.push((p, b, depth + 1));
                    stack.push((a, p, depth + 1));
                }
                _ => pieces.push(b),
            }
        }
        out.extend(pieces);
    }
    Ok(out)
}

fn quad_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_panels: 6000 }
}

/// `int_path sqrt(q) dx` with continuous branch tracking.
pub fn action_integral(q: &Polynomial, path: &ContourPath) -> Result<C64> {
    if path.start_dir.is_some() || path.end_dir.is_some() {
        return Err(Error::InvalidInput("action integral over an infinite path diverges".into()));
    }
    let tp = TrackedPath::new(q, path)?;
    Ok(tp.integrate(|_, s| s, quad_opts()).0)
}

/// `Omega = int omega~ dxi = int omega dx` along the path (from infinity when the path starts there).
pub fn big_omega(q: &Polynomial, path: &ContourPath) -> Result<C64> {
    let tp = TrackedPath::new(q, path)?;
    let (v, _) = tp.integrate(|x, s| omega_tilde_raw(q, x) * s, quad_opts());
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(Error::TailNotConvergent("non-finite Omega".into()));
    }
    Ok(v)
}

/// `omega~` at `x` (single valued in `x`).
pub fn omega_tilde(q: &Polynomial, x: C64) -> Result<C64> {
    crate::potential::omega_tilde(q, x)
}

/// `sqrt(q)` branch at a far point `x` such that `Re xi` grows outward along `dir`.
pub fn outward_branch(q: &Polynomial, x: C64, dir: C64) -> C64 {
    let p = q.eval(x).sqrt();
    if (p * dir).re >= 0.0 {
        p
    } else {
        -p
    }
}

// ---------------------------------------------------------------------------------------------
// Stokes graph

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value")]
pub enum LineEnd {
    /// escapes to infinity at the given asymptotic angle
    Infinity(f64),
    /// terminates on another turning point (index into `turning_points`)
    TurningPoint(usize),
    Capped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StokesLine {
    pub from_tp: usize,
    pub start_angle: f64,
    pub points: Vec<C64>,
    pub end: LineEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sector {
    /// 1-based, counterclockwise, sector 1 is the wedge whose centre is closest to angle 0
    pub index: usize,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl Sector {
    pub fn center(&self) -> f64 {
        0.5 * (self.theta_min + self.theta_max)
    }
    pub fn center_dir(&self) -> C64 {
        C64::from_polar(1.0, self.center())
    }
    pub fn contains(&self, theta: f64) -> bool {
        let mut t = theta;
        while t < self.theta_min {
            t += 2.0 * PI;
        }
        while t >= self.theta_min + 2.0 * PI {
            t -= 2.0 * PI;
        }
        t < self.theta_max
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StokesGraph {
    pub potential: Polynomial,
    pub turning_points: Vec<TurningPoint>,
    pub lines: Vec<StokesLine>,
    pub sectors: Vec<Sector>,
}

#[derive(Debug, Clone, Copy)]
pub struct StokesOptions {
    /// trace cap as a multiple of the root bound
    pub radius_factor: f64,
    pub max_steps: usize,
}

impl Default for StokesOptions {
    fn default() -> Self {
        StokesOptions { radius_factor: 4.0, max_steps: 200_000 }
    }
}

/// Asymptotic Stokes directions `theta_k = (pi/2 + k pi - arg sqrt(a)) * 2/(n+2)` in `[0, 2 pi)`.
pub fn asymptotic_stokes_angles(q: &Polynomial) -> Vec<f64> {
    let n = q.degree() as f64;
    let a_half = 0.5 * q.leading().arg();
    let mut th: Vec<f64> = (0..(q.degree() + 2))
        .map(|k| ((PI / 2.0 + k as f64 * PI - a_half) * 2.0 / (n + 2.0)).rem_euclid(2.0 * PI))
        .collect();
    th.sort_by(|a, b| a.total_cmp(b));
    th
}

pub fn sectors(q: &Polynomial) -> Vec<Sector> {
    let th = asymptotic_stokes_angles(q);
    let p = th.len();
    let mut wedges: Vec<(f64, f64)> = (0..p)
        .map(|k| {
            let lo = th[k];
            let hi = if k + 1 < p { th[k + 1] } else { th[0] + 2.0 * PI };
            (lo, hi)
        })
        .collect();
    // sector 1: centre closest to angle 0
    let dist0 = |w: &(f64, f64)| {
        let cc = (0.5 * (w.0 + w.1)).rem_euclid(2.0 * PI);
        cc.min(2.0 * PI - cc)
    };
    let first = (0..p).min_by(|&i, &j| dist0(&wedges[i]).total_cmp(&dist0(&wedges[j]))).unwrap();
    wedges.rotate_left(first);
    wedges
        .into_iter()
        .enumerate()
        .map(|(i, (lo, hi))| {
            // normalise so that sector 1 straddles 0 symmetrically when it does
            let (lo, hi) = if i == 0 && hi > 2.0 * PI - 1e-12 && lo > PI { (lo - 2.0 * PI, hi - 2.0 * PI) } else { (lo, hi) };
            Sector { index: i + 1, theta_min: lo, theta_max: hi }
        })
        .collect()
}

pub fn sector_of_angle(secs: &[Sector], theta: f64) -> usize {
    secs.iter().find(|s| s.contains(theta)).map(|s| s.index).unwrap_or(1)
}

pub fn stokes_graph(q: &Polynomial) -> Result<StokesGraph> {
    stokes_graph_with(q, &StokesOptions::default())
}

pub fn stokes_graph_with(q: &Polynomial, opts: &StokesOptions) -> Result<StokesGraph> {
    let tps = turning_points(q)?;
    let r_cap = opts.radius_factor * q.root_bound().max(1.0) + 2.0;
    let mut lines = Vec::new();
    for (i, tp) in tps.iter().enumerate() {
        let m = tp.multiplicity;
        let cm = q.taylor_at(tp.location)[m];
        let arg_sqrt_c = 0.5 * cm.arg();
        for k in 0..(m + 2) {
            let phi = (PI / 2.0 + k as f64 * PI - arg_sqrt_c) * 2.0 / (m as f64 + 2.0);
            let line = trace_stokes_line(q, &tps, i, phi, r_cap, opts.max_steps)?;
            lines.push(line);
        }
    }
    Ok(StokesGraph { potential: q.clone(), turning_points: tps, lines, sectors: sectors(q) })
}

fn trace_stokes_line(
    q: &Polynomial,
    tps: &[TurningPoint],
    i: usize,
    phi: f64,
    r_cap: f64,
    max_steps: usize,
) -> Result<StokesLine> {
    let x0 = tps[i].location;
    let others: Vec<C64> = tps.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, t)| t.location).collect();
    let sep = others.iter().map(|o| (o - x0).norm()).fold(f64::INFINITY, f64::min);
    let eps = (1e-3 * (1.0 + x0.norm())).min(0.01 * sep);
    let e0 = C64::from_polar(1.0, phi);
    let mut x = x0 + e0 * eps;
    let mut pts = vec![x0, x];
    let mut s = q.eval(x).sqrt();
    // choose the sign so that the field points along e0
    let field = |x: C64, s_ref: C64| -> (C64, C64) {
        let p = q.eval(x).sqrt();
        let sq = if (p - s_ref).norm() <= (p + s_ref).norm() { p } else { -p };
        (I * sq.conj() / sq.norm(), sq)
    };
    let (v0, _) = field(x, s);
    let sigma = if (v0 * e0.conj()).re >= 0.0 { 1.0 } else { -1.0 };
    let mut length = 0.0;
    let mut prev_d = f64::INFINITY;
    for _ in 0..max_steps {
        let d_other = others.iter().map(|o| (o - x).norm()).fold(f64::INFINITY, f64::min);
        let d_self = (x - x0).norm();
        let h = (0.01 * x.norm().max(0.2)).min(0.2 * d_other).min(0.5 * d_self.max(eps)).max(1e-9);
        // RK4 on dx/dl = sigma * i conj(sqrt q)/|sqrt q|
        let (k1, s1) = field(x, s);
        let (k2, _) = field(x + k1 * (0.5 * h * sigma), s1);
        let (k3, _) = field(x + k2 * (0.5 * h * sigma), s1);
        let (k4, s4) = field(x + k3 * (h * sigma), s1);
        let dx = (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h * sigma / 6.0);
        x += dx;
        s = s4;
        length += h;
        pts.push(x);
        if x.norm() > r_cap {
            return Ok(StokesLine { from_tp: i, start_angle: phi, points: pts, end: LineEnd::Infinity(x.arg()) });
        }
        // termination on another turning point
        for (j, t) in tps.iter().enumerate() {
            if j != i && (t.location - x).norm() < 1e-6 * (1.0 + t.location.norm()).max(1e-3) * 1e3 && d_other < prev_d {
                if (t.location - x).norm() < 2e-4 * (1.0 + sep) {
                    pts.push(t.location);
                    return Ok(StokesLine { from_tp: i, start_angle: phi, points: pts, end: LineEnd::TurningPoint(j) });
                }
            }
        }
        prev_d = d_other;
        if length > 200.0 * r_cap {
            return Ok(StokesLine { from_tp: i, start_angle: phi, points: pts, end: LineEnd::Capped });
        }
    }
    Err(Error::TraceStalled(format!("line from {} at angle {}", x0, phi)))
}

// ---------------------------------------------------------------------------------------------
// Canonical paths

/// Largest increase of `Re xi` between consecutive samples along the path (should be <= 0).
pub fn monotonicity_defect(q: &Polynomial, path: &ContourPath) -> Result<f64> {
    let tp = TrackedPath::new(q, path)?;
    let mut worst: f64 = f64::NEG_INFINITY;
    for (p, tr) in &tp.pieces {
        let n = 400;
        for k in 1..n {
            let t = k as f64 / n as f64;
            let s = tr.sqrt_q(q, p, t);
            let dre = (s * p.dx(t)).re / (1.0 + p.dx(t).norm() * s.norm());
            worst = worst.max(dre);
        }
    }
    Ok(worst)
}

fn near_stokes_line(g: &StokesGraph, x: C64) -> bool {
    let tol = 1e-8 * (1.0 + x.norm());
    g.lines.iter().any(|l| l.points.windows(2).any(|w| dist_point_segment(x, w[0], w[1]) < tol))
}

/// A path from the infinity of `from_sector` to `to` along which `Re xi` never increases.
pub fn canonical_path(g: &StokesGraph, from_sector: usize, to: C64) -> Result<ContourPath> {
    let q = &g.potential;
    let sec = g
        .sectors
        .iter()
        .find(|s| s.index == from_sector)
        .ok_or_else(|| Error::InvalidInput(format!("no sector {from_sector}")))?;
    if near_stokes_line(g, to) {
        return Err(Error::NoCanonicalPath(format!("target {to} lies on a Stokes line")));
    }
    for tp in &g.turning_points {
        if (tp.location - to).norm() < crate::potential::EXCLUSION_RADIUS {
            return Err(Error::NoCanonicalPath("target is a turning point".into()));
        }
    }
    let d = sec.center_dir();
    let r0 = 2.0 * q.root_bound().max(1.0) + to.norm();
    let base = d * r0;
    let seed = outward_branch(q, base, d);
    let mut candidates: Vec<Vec<C64>> = Vec::new();
    // straight in along the sector axis when the target lies on it
    if (to * d.conj()).im.abs() < 1e-12 * (1.0 + to.norm()) && (to * d.conj()).re > 0.0 {
        candidates.push(vec![to]);
    }
    candidates.push(vec![base, to]);
    let rb = q.root_bound().max(1.0);
    for &rad in &[0.5 * rb, rb, 1.5 * rb, 2.5 * rb] {
        for k in 0..16 {
            let w = C64::from_polar(rad, 2.0 * PI * k as f64 / 16.0);
            candidates.push(vec![base, w, to]);
        }
    }
    for verts in candidates {
        let first = verts[0];
        let seed_here = outward_branch(q, first * (1.0 + 1e-12), d);
        let path = ContourPath::from_infinity(d, verts.clone(), if verts.len() == 1 { seed_here } else { seed });
        if path.validate().is_err() {
            continue;
        }
        let ok = match monotonicity_defect(q, &path) {
            Ok(def) => def <= 1e-9,
            Err(_) => false,
        };
        if ok {
            return Ok(path);
        }
    }
    Err(Error::NoCanonicalPath(format!("target {to} not canonically reachable from sector {from_sector}")))
}

// ---------------------------------------------------------------------------------------------
// Action distances

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairDistance {
    pub i: usize,
    pub j: usize,
    pub zeta: C64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ActionDistances {
    /// `zeta_ij = int_{x_j}^{x_i} sqrt(q)` for every ordered pair `i != j`
    pub pairwise: Vec<PairDistance>,
    /// smallest nonzero `|zeta_ij|`, `+inf` when there is no pair
    pub minimal: f64,
    pub turning_points: Vec<TurningPoint>,
}

impl ActionDistances {
    pub fn get(&self, i: usize, j: usize) -> Option<C64> {
        self.pairwise.iter().find(|p| p.i == i && p.j == j).map(|p| p.zeta)
    }
}

/// Action between two points along the straight segment, with the principal branch of
/// `sqrt(q)` at the midpoint.
pub fn straight_action(q: &Polynomial, a: C64, b: C64) -> Result<C64> {
    let mid = 0.5 * (a + b);
    let smid = q.eval(mid).sqrt();
    let h1 = action_integral(q, &ContourPath::segment(mid, b, smid))?;
    let h0 = action_integral(q, &ContourPath::segment(mid, a, smid))?;
    Ok(h1 - h0)
}

pub fn tp_distances(q: &Polynomial) -> Result<ActionDistances> {
    let tps = turning_points(q)?;
    let mut table: BTreeMap<(usize, usize), C64> = BTreeMap::new();
    let mut minimal = f64::INFINITY;
    for i in 0..tps.len() {
        for j in (i + 1)..tps.len() {
            let z = straight_action(q, tps[j].location, tps[i].location)?;
            if z.norm() > 1e-12 {
                minimal = minimal.min(z.norm());
            }
            table.insert((i, j), z);
            table.insert((j, i), -z);
        }
    }
    let pairwise = table.into_iter().map(|((i, j), zeta)| PairDistance { i, j, zeta }).collect();
    Ok(ActionDistances { pairwise, minimal, turning_points: tps })
}

/// Action distances on a common sheet: `zeta_k = int_{x_ref}^{x_k} sqrt(q)` along straight
/// segments from `x_ref` with `sqrt(q(x_ref)) = seed`; `zeta_ij = zeta_i - zeta_j`.
pub fn action_distances_from(q: &Polynomial, x_ref: C64, seed: C64) -> Result<(Vec<C64>, ActionDistances)> {
    let tps = turning_points(q)?;
    let mut zeta = Vec::new();
    for tp in &tps {
        zeta.push(action_integral(q, &ContourPath::segment(x_ref, tp.location, seed))?);
    }
    let mut pairwise = Vec::new();
    let mut minimal = f64::INFINITY;
    for i in 0..tps.len() {
        for j in 0..tps.len() {
            if i != j {
                let z = zeta[i] - zeta[j];
                if z.norm() > 1e-12 {
                    minimal = minimal.min(z.norm());
                }
                pairwise.push(PairDistance { i, j, zeta: z });
            }
        }
    }
    Ok((zeta, ActionDistances { pairwise, minimal, turning_points: tps }))
}

/// `oint_K sqrt(q)` around the two turning points `a` and `b`: twice the straight action
/// from `a` to `b` (midpoint principal branch).
pub fn loop_action(q: &Polynomial, a: C64, b: C64) -> Result<C64> {
    Ok(2.0 * straight_action(q, a, b)?)
}

/// Helper for tests and diagnostics: `xi` difference between two points along a path given
/// by its vertices with a seed at the first vertex.
pub fn xi_along(q: &Polynomial, vertices: Vec<C64>, seed: C64) -> Result<C64> {
    action_integral(q, &ContourPath::polyline(vertices, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c;

    fn lin() -> Polynomial {
        Polynomial::from_real(&[0.0, 1.0]).unwrap()
    }
    fn harm() -> Polynomial {
        Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn action_examples() {
        let v = action_integral(&lin(), &ContourPath::segment(C64::default(), c(1.0, 0.0), C64::default())).unwrap();
        assert!((v - c(2.0 / 3.0, 0.0)).norm() < 1e-10, "{v}");
        let z = straight_action(&harm(), c(0.0, -1.0), c(0.0, 1.0)).unwrap();
        assert!((z - c(0.0, PI / 2.0)).norm() < 1e-10, "{z}");
    }

    #[test]
    fn omega_tail_linear() {
        // Omega(xi) = 5/(36 xi) with xi = (2/3) x^{3/2}
        let x = 2.0f64;
        let p = ContourPath::from_infinity(c(1.0, 0.0), vec![c(x, 0.0)], c(x.sqrt(), 0.0));
        let om = big_omega(&lin(), &p).unwrap();
        let xi = 2.0 / 3.0 * x.powf(1.5);
        assert!((om - c(5.0 / (36.0 * xi), 0.0)).norm() < 1e-12, "{om}");
    }

    #[test]
    fn sector_counts() {
        assert_eq!(sectors(&lin()).len(), 3);
        assert_eq!(sectors(&harm()).len(), 4);
        let s = sectors(&harm());
        assert!(s[0].contains(0.0));
        assert!(s[1].contains(PI / 2.0));
        assert!(s[2].contains(PI));
    }

    #[test]
    fn stokes_linear_has_three_lines() {
        let g = stokes_graph(&lin()).unwrap();
        assert_eq!(g.lines.len(), 3);
        let mut angs: Vec<f64> = g.lines.iter().map(|l| l.start_angle.rem_euclid(2.0 * PI)).collect();
        angs.sort_by(|a, b| a.total_cmp(b));
        assert!((angs[1] - angs[0] - 2.0 * PI / 3.0).abs() < 1e-12);
        for l in &g.lines {
            assert!(matches!(l.end, LineEnd::Infinity(_)));
        }
    }

    #[test]
    fn stokes_harmonic_connects_turning_points() {
        let g = stokes_graph(&harm()).unwrap();
        assert_eq!(g.sectors.len(), 4);
        assert!(g.lines.iter().any(|l| matches!(l.end, LineEnd::TurningPoint(_))));
    }

    #[test]
    fn canonical_harmonic_to_sector3() {
        let g = stokes_graph(&harm()).unwrap();
        let p = canonical_path(&g, 1, c(-3.0, 0.2)).unwrap();
        assert!(monotonicity_defect(&harm(), &p).unwrap() <= 1e-9);
    }
}
