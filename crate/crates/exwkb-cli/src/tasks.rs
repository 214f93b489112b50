//! Dispatch of a resolved configuration to the library.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use exwkb::borel::{airy_integral_chi, alt_laplace, borel_sum_with, joos_chi, joos_log_chi, AltLinear, BorelSumOptions, JoosLogBorel};
use exwkb::geometry::{canonical_path, stokes_graph, tp_distances};
use exwkb::hyper::{hyper_expand, HyperOptions, HyperSource, JoosChiSource, JoosLogSource};
use exwkb::spectra::{exp_correction_with, AmplitudeSource, Parity, SpectralOptions};
use exwkb::topo::{convergence_bound, phi, predict_singularities, TopoOptions, XiPath};
use exwkb::wkb::kappa_series;
use exwkb::C64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{orders_map, Amplitude, Energy, Num, Source, Task, TaskConfig};
use crate::Failure;

/// What a task produces: the result payload and the truncation orders it used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub result: Value,
    pub truncation_orders: BTreeMap<String, usize>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result serializes")
}

fn required(n: Option<Num>, name: &str) -> Result<C64, Failure> {
    n.map(Num::c64).ok_or_else(|| Failure::config(format!("{name} is required")))
}

/// Laplace ray of steepest descent for `e^{2 lambda s}`.
fn ray_angle(lambda: C64) -> f64 {
    PI - lambda.arg()
}

pub fn run(cfg: &TaskConfig) -> Result<Artifact, Failure> {
    match cfg.task {
        Task::Stokes => {
            let q = cfg.polynomial()?.shift_energy(C64::new(cfg.energy_value()?, 0.0));
            let g = stokes_graph(&q)?;
            Ok(Artifact { result: json!({ "p": g.sectors.len(), "graph": to_value(&g) }), truncation_orders: BTreeMap::new() })
        }
        Task::Kappa => {
            let q = cfg.polynomial()?.shift_energy(C64::new(cfg.energy_value()?, 0.0));
            let g = stokes_graph(&q)?;
            let k = kappa_series(&q, &g, required(cfg.point, "point")?, cfg.order)?;
            Ok(Artifact { result: to_value(&k), truncation_orders: orders_map([("kappa", cfg.order)]) })
        }
        Task::BorelSum => borel_task(cfg),
        Task::TopoEval => {
            let q = cfg.polynomial()?.shift_energy(C64::new(cfg.energy_value()?, 0.0));
            let g = stokes_graph(&q)?;
            let x = required(cfg.point, "point")?;
            let s = required(cfg.s, "s")?;
            let xp = XiPath::new(&q, &canonical_path(&g, 1, x)?)?;
            let o = TopoOptions::default();
            let mut levels = Vec::new();
            let mut sum = C64::default();
            for l in 0..=cfg.q_level {
                let v = phi(l, &xp, s, &o)?;
                sum += v;
                levels.push(json!({ "level": l, "value": to_value(&v), "bound": convergence_bound(&xp, s, l, &o)? }));
            }
            let result = json!({ "point": to_value(&x), "s": to_value(&s), "omega": to_value(&xp.omega()), "levels": levels, "sum": to_value(&sum) });
            Ok(Artifact { result, truncation_orders: orders_map([("q_level", cfg.q_level)]) })
        }
        Task::Catalog => {
            let q = cfg.polynomial()?.shift_energy(C64::new(cfg.energy_value()?, 0.0));
            let ad = tp_distances(&q)?;
            let cat = predict_singularities(&q, &ad, required(cfg.xi, "xi")?, cfg.q_level)?;
            Ok(Artifact { result: to_value(&cat), truncation_orders: orders_map([("q_level", cfg.q_level)]) })
        }
        Task::Hyper => {
            let lam = cfg.lambda()?;
            let opts = HyperOptions { retain_remainder: cfg.retain, ..HyperOptions::default() };
            let (hr, reference) = match cfg.source {
                Source::JoosChi => (hyper_expand(&JoosChiSource::new(), lam, cfg.generations, &opts)?, joos_chi(lam)?),
                Source::JoosLog => (hyper_expand(&JoosLogSource, lam, cfg.generations, &opts)?, joos_log_chi(lam)?),
                Source::AltLinear => return Err(Failure::config("hyper supports the sources joos-chi and joos-log")),
            };
            let mut orders = orders_map([("n0", hr.tree.n_trunc), ("generations", cfg.generations)]);
            if let Some(m) = hr.tree.children.iter().map(|ch| ch.n_trunc).max() {
                orders.insert("n1_max".to_string(), m);
            }
            let result = json!({
                "source": to_value(&cfg.source),
                "hyper": to_value(&hr),
                "reference": to_value(&reference),
                "abs_error": (hr.value - reference).norm(),
            });
            Ok(Artifact { result, truncation_orders: orders })
        }
        Task::Spectrum => {
            if matches!(cfg.energy, Some(Energy::Value(_))) {
                return Err(Failure::config("spectrum solves for the energy; use \"energy\": \"solve\""));
            }
            let v = cfg.polynomial()?;
            let lam = cfg.lambda()?;
            if lam.im != 0.0 || !(lam.re > 0.0) {
                return Err(Failure::config("spectrum needs a real positive lambda"));
            }
            let amplitude = match cfg.amplitude {
                Amplitude::Topological => AmplitudeSource::Topological,
                Amplitude::Riccati => AmplitudeSource::Riccati,
            };
            let opts = SpectralOptions { quad_tol: cfg.tolerances.quad, amplitude, ..SpectralOptions::default() };
            let r = exp_correction_with(&v, lam.re, cfg.level, Parity::of(cfg.level), &opts)?;
            Ok(Artifact { result: to_value(&r), truncation_orders: orders_map([("n0", r.n0), ("n1", r.n1)]) })
        }
    }
}

fn borel_task(cfg: &TaskConfig) -> Result<Artifact, Failure> {
    let lam = cfg.lambda()?;
    let angle = ray_angle(lam);
    let opts = BorelSumOptions { rel_tol: cfg.tolerances.quad.max(1e-15), ..BorelSumOptions::default() };
    let (value, reference) = match cfg.source {
        Source::JoosChi => {
            let src = JoosChiSource::new();
            (borel_sum_with(&src, lam, angle, &src.singularities(), &opts)?, joos_chi(lam)?)
        }
        Source::JoosLog => (borel_sum_with(&JoosLogBorel, lam, angle, &JoosLogSource.singularities(), &opts)?, joos_log_chi(lam)?),
        Source::AltLinear => {
            let xi = required(cfg.xi, "xi")?;
            (alt_laplace(&AltLinear { xi }, lam, angle, &[C64::default(), xi])?, airy_integral_chi(xi, lam)?)
        }
    };
    let result = json!({
        "source": to_value(&cfg.source),
        "ray_angle": angle,
        "value": to_value(&value),
        "reference": to_value(&reference),
        "abs_error": (value - reference).norm(),
    });
    Ok(Artifact { result, truncation_orders: BTreeMap::new() })
}
