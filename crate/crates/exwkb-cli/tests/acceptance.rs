//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line with what was measured;
//! the process exits non-zero when any criterion fails.

use std::error::Error;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};

use exwkb::borel::{airy_integral_chi, alt_laplace, alt_monodromy_defect, joos_chi, joos_identities, joos_kappa, joos_log_borel, AltLinear};
use exwkb::geometry::{stokes_graph, tp_distances, ContourPath};
use exwkb::hyper::{hyper_expand, HyperOptions, JoosChiSource};
use exwkb::potential::Polynomial;
use exwkb::special::factorial;
use exwkb::spectra::{diagonalize_oracle, exp_correction_with, Parity, SpectralOptions};
use exwkb::topo::{convergence_bound, phi0, phi_direct, phi_recurrent, predict_singularities, taylor_at_origin, zetas_from, TopoOptions, XiPath};
use exwkb::wkb::{connection_decompose, kappa_series};
use exwkb::C64;
use jsonschema::JSONSchema;
use rand::{Rng, SeedableRng};
use serde_json::Value;

type Res<T> = Result<T, Box<dyn Error>>;

// pinned tolerances
const KAPPA_REL: f64 = 1e-8;
const KAPPA_MAX_ORDER: usize = 8;
const AIRY_LAPLACE_REL: f64 = 1e-6;
const RING_DEFECT_MAX: f64 = 1e-8;
const BRANCH_DEFECT_MIN: f64 = 0.1;
const JOOS_LOG_ORIGIN_ABS: f64 = 1e-10;
const JOOS_IDENTITY_ABS: f64 = 1e-6;
const JOOS_SMALL_LAMBDA_ABS: f64 = 1e-4;
const TOPO_TAYLOR_ABS: f64 = 1e-6;
const TOPO_TAYLOR_MAX_ORDER: usize = 6;
const RECURRENCE_ABS: f64 = 1e-6;
const RECURRENCE_POINTS: usize = 10;
const SLOPE_REL_HYPER: f64 = 0.08;
const GENERATION_GAIN: f64 = 1e2;
const RETAINED_ABS: f64 = 1e-9;
const SPECTRUM_E0_REL: f64 = 1e-6;
const ORACLE_BASIS: usize = 200;
const SLOPE_REL_SPECTRUM: f64 = 0.10;
const CONNECTION_RESIDUAL: f64 = 1e-6;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

struct Outcome {
    pass: bool,
    measured: String,
}

fn outcome(pass: bool, measured: String) -> Res<Outcome> {
    Ok(Outcome { pass, measured })
}

fn harmonic() -> Polynomial {
    Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap()
}

/// xi-path from the infinity of sector 1 to x on the harmonic surface
fn harmonic_point(x: C64) -> Res<XiPath> {
    let p = ContourPath::from_infinity(c(1.0, 0.0), vec![c(3.0, 0.0), x], c(10f64.sqrt(), 0.0));
    Ok(XiPath::new(&harmonic(), &p)?)
}

/// xi-path from the infinity of sector 1 to that of sector 3
fn harmonic_limit_path() -> Res<XiPath> {
    let p = ContourPath::from_infinity(c(1.0, 0.0), vec![c(2.0, 0.0), c(-2.0, 0.0)], c(5f64.sqrt(), 0.0))
        .with_end_at_infinity(c(-1.0, 0.0));
    Ok(XiPath::new(&harmonic(), &p)?)
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn airy_kappa_tower() -> Res<Outcome> {
    let q = Polynomial::from_real(&[0.0, 1.0])?;
    let g = stokes_graph(&q)?;
    let mut worst: f64 = 0.0;
    for xi in [0.5f64, 1.0, 2.5] {
        let x = (1.5 * xi).powf(2.0 / 3.0);
        let k = kappa_series(&q, &g, c(x, 0.0), KAPPA_MAX_ORDER)?;
        let mut ck = 1.0f64;
        for n in 0..=KAPPA_MAX_ORDER {
            let expect = ck * 2f64.powi(n as i32) / xi.powi(n as i32);
            worst = worst.max((k.values[n] / expect - 1.0).norm());
            let kk = n as f64;
            ck *= (6.0 * kk + 1.0) * (6.0 * kk + 5.0) / (72.0 * (kk + 1.0));
        }
    }
    outcome(worst < KAPPA_REL, format!("max rel err {worst:.2e} for n <= {KAPPA_MAX_ORDER} (tol {KAPPA_REL:e})"))
}

fn closed_form_borel_linear() -> Res<Outcome> {
    let points = [
        (c(1.0, 0.0), 2.0),
        (c(1.0, 0.0), 6.0),
        (c(0.5, 0.0), 4.0),
        (c(0.5, 0.0), 10.0),
        (c(2.0, 0.0), 1.5),
        (c(2.0, 0.0), 5.0),
        (c(1.0, 0.3), 3.0),
        (c(1.5, -0.4), 4.0),
        (c(0.8, 0.2), 8.0),
        (c(3.0, 0.0), 2.5),
    ];
    let mut worst: f64 = 0.0;
    for (xi, lam) in points {
        let lam = c(lam, 0.0);
        let v = alt_laplace(&AltLinear { xi }, lam, PI, &[C64::default(), xi])?;
        let o = airy_integral_chi(xi, lam)?;
        worst = worst.max((v - o).norm() / o.norm());
    }
    let xi = c(1.0, 0.0);
    let mut ring: f64 = 0.0;
    for k in 0..8 {
        let centre = C64::from_polar(0.5, PI * k as f64 / 4.0) + c(0.5, 0.0) * (k % 2) as f64 + c(0.0, 0.2);
        ring = ring.max(alt_monodromy_defect(xi, centre, 0.1)?);
    }
    let at0 = alt_monodromy_defect(xi, C64::default(), 0.3)?;
    let at_xi = alt_monodromy_defect(xi, xi, 0.3)?;
    let pass = worst < AIRY_LAPLACE_REL && ring < RING_DEFECT_MAX && at0 > BRANCH_DEFECT_MIN && at_xi > BRANCH_DEFECT_MIN;
    outcome(
        pass,
        format!(
            "max rel err {worst:.2e} at 10 points (tol {AIRY_LAPLACE_REL:e}); ring defect {ring:.2e} (tol {RING_DEFECT_MAX:e}); defect at 0 {at0:.3}, at xi {at_xi:.3}"
        ),
    )
}

fn joos_fixture() -> Res<Outcome> {
    let origin = (joos_log_borel(C64::default())? + 1.0 / 6.0).norm();
    let near = (joos_log_borel(c(1e-6, 1e-6))? + 1.0 / 6.0).norm();
    let lim = origin.max(near);
    let mut ident: f64 = 0.0;
    let mut small: f64 = 0.0;
    for lam in [C64::from_polar(2.0, PI / 4.0), c(1.0, -2.0), c(-3.0, 0.5), c(0.3, 0.2), c(5.0, -1.0)] {
        let r = joos_identities(lam)?;
        ident = ident.max(r.identity_defect);
        small = small.max(r.small_lambda_defect);
    }
    let pass = lim < JOOS_LOG_ORIGIN_ABS && ident < JOOS_IDENTITY_ABS && small < JOOS_SMALL_LAMBDA_ABS;
    outcome(
        pass,
        format!(
            "|B(s->0) + 1/6| {lim:.2e} (tol {JOOS_LOG_ORIGIN_ABS:e}); identity defect {ident:.2e} (tol {JOOS_IDENTITY_ABS:e}); |chi(0) - sqrt2| {small:.2e} (tol {JOOS_SMALL_LAMBDA_ABS:e})"
        ),
    )
}

fn topological_consistency() -> Res<Outcome> {
    let p = harmonic_limit_path()?;
    let o = TopoOptions::default();
    let sum = |s: C64| Ok(phi0(&p, s) + phi_direct(2, &p, s, &o)?);
    let t = taylor_at_origin(sum, 0.3, 32, TOPO_TAYLOR_MAX_ORDER)?;
    let kappa = joos_kappa(TOPO_TAYLOR_MAX_ORDER);
    let errs: Vec<f64> = (0..=TOPO_TAYLOR_MAX_ORDER).map(|n| (t[n] - kappa[n] / factorial(n)).norm()).collect();
    let taylor = errs.iter().copied().fold(0.0, f64::max);

    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
    let o = TopoOptions { eta_nodes: 12, ..Default::default() };
    let mut rec: f64 = 0.0;
    for _ in 0..RECURRENCE_POINTS {
        let x = c(rng.gen_range(0.5..2.0), rng.gen_range(-0.5..0.5));
        let s = C64::from_polar(rng.gen_range(0.05..0.3), rng.gen_range(-PI..PI));
        let xp = harmonic_point(x)?;
        for l in 1..=2 {
            rec = rec.max((phi_direct(l, &xp, s, &o)? - phi_recurrent(l, &xp, s, &o)?).norm());
        }
    }
    let per_order: Vec<String> = errs.iter().map(|e| format!("{e:.1e}")).collect();
    outcome(
        taylor < TOPO_TAYLOR_ABS && rec < RECURRENCE_ABS,
        format!(
            "Taylor abs err by order [{}] (tol {TOPO_TAYLOR_ABS:e}); recurrence vs direct {rec:.2e} at {RECURRENCE_POINTS} points (tol {RECURRENCE_ABS:e})",
            per_order.join(", ")
        ),
    )
}

fn convergence_bounds() -> Res<Outcome> {
    let o = TopoOptions::default();
    let xs = [c(0.5, 0.2), c(1.0, 0.0), c(1.5, -0.3), c(2.0, 0.4), c(0.8, -0.5)];
    let ss = [c(-0.3, 0.0), c(0.1, 0.4), c(0.2, 0.0), c(-0.15, -0.25), c(0.0, 0.3)];
    let mut violations = 0;
    let mut tightest: f64 = 0.0;
    for x in xs {
        let p = harmonic_point(x)?;
        for s in ss {
            for l in 0..=3 {
                let v = phi_direct(l, &p, s, &o)?.norm();
                let b = convergence_bound(&p, s, l, &o)?;
                if v > b {
                    violations += 1;
                }
                tightest = tightest.max(v / b);
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations on 5x5 grid, levels 0..=3; max |Phi|/bound {tightest:.3}"))
}

fn singularity_hierarchy() -> Res<Outcome> {
    let xi = c(1.3, 0.4);
    let mut notes = Vec::new();
    let mut pass = true;

    let cubic = Polynomial::from_real(&[1.0, 0.0, 0.0, 1.0])?;
    let ad = tp_distances(&cubic)?;
    let g: Vec<_> = (0..=2).map(|l| predict_singularities(&cubic, &ad, xi, l)).collect::<Result<_, _>>()?;
    let generic = g[0].is_subset_of(&g[1]) && g[1].is_subset_of(&g[2]);
    pass &= generic;
    notes.push(format!("generic chain {generic}"));

    let h = harmonic();
    let ad = tp_distances(&h)?;
    let hc: Vec<_> = (0..=3).map(|l| predict_singularities(&h, &ad, xi, l)).collect::<Result<_, _>>()?;
    let ladder = (0..3).all(|l| hc[l].is_subset_of(&hc[l + 1]));
    pass &= ladder;
    notes.push(format!("harmonic chain {ladder}"));

    let lin = Polynomial::from_real(&[0.0, 1.0])?;
    let ad = tp_distances(&lin)?;
    let first = predict_singularities(&lin, &ad, xi, 2)?.first_sheet_s();
    let exact = first.len() == 1 && (first[0] - xi).norm() < 1e-12;
    pass &= exact;
    let listed: Vec<String> = first.iter().map(|z| format!("{z}")).collect();
    notes.push(format!("linear first sheet [{}] (xi = {xi})", listed.join(", ")));

    let zeta = zetas_from(&tp_distances(&h)?).into_iter().find(|z| z.norm() > 0.0).ok_or("no zeta")?;
    let both = hc[2].contains_s(zeta) && hc[2].contains_s(-zeta);
    pass &= both;
    notes.push(format!("harmonic q=2 contains both of zeta = {zeta} and its negative: {both}"));
    outcome(pass, notes.join("; "))
}

fn joos_hyperasymptotics() -> Res<Outcome> {
    let b = JoosChiSource::new();
    let base = HyperOptions::default();
    let mut pts = Vec::new();
    for lam in [4.0, 6.0, 8.0, 10.0] {
        let l = c(lam, 0.0);
        let err = (hyper_expand(&b, l, 0, &base)?.value - joos_chi(l)?).norm();
        pts.push((lam, err.ln()));
    }
    let fitted = -slope(&pts);
    let want = 2.0 * FRAC_PI_2;
    let slope_err = (fitted / want - 1.0).abs();

    let lam = c(6.0, 0.0);
    let truth = joos_chi(lam)?;
    let e0 = (hyper_expand(&b, lam, 0, &base)?.value - truth).norm();
    let e1 = (hyper_expand(&b, lam, 1, &base)?.value - truth).norm();
    let keep = HyperOptions { retain_remainder: true, ..Default::default() };
    let mut exact: f64 = 0.0;
    for p in [0, 1] {
        exact = exact.max((hyper_expand(&b, lam, p, &keep)?.value - truth).norm());
    }
    let pass = slope_err < SLOPE_REL_HYPER && e0 / e1 >= GENERATION_GAIN && exact < RETAINED_ABS;
    outcome(
        pass,
        format!(
            "p=0 log-error slope {fitted:.4} vs {want:.4} (rel {slope_err:.3}, tol {SLOPE_REL_HYPER}); p=1 gain {:.2e} (min {GENERATION_GAIN:e}); retained remainder err {exact:.2e} (tol {RETAINED_ABS:e})",
            e0 / e1
        ),
    )
}

fn anharmonic_spectrum() -> Res<Outcome> {
    let v = Polynomial::from_real(&[0.0, 0.0, 1.0, 0.0, 1.0])?;
    let opts = SpectralOptions::default();
    // self-convergence of the oracle (basis N against 2N at 1e-10) is enforced inside
    let oracle = diagonalize_oracle(&v, 10.0, ORACLE_BASIS)?[0];
    let mut rows = Vec::new();
    for lam in [8.0, 10.0, 12.0] {
        rows.push(exp_correction_with(&v, lam, 0, Parity::Even, &opts)?);
    }
    let r10 = &rows[1];
    let e0_rel = (r10.e0 - oracle).abs() / oracle;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.lambda, r.e1.abs().ln())).collect();
    let fitted = -slope(&pts);
    let want = 2.0 * r10.zeta_c.ok_or("no zeta_C at lambda = 10")?.norm();
    let slope_err = (fitted / want - 1.0).abs();
    let with_e1 = (r10.e0 + r10.e1 - oracle).abs() / oracle;
    outcome(
        e0_rel < SPECTRUM_E0_REL && slope_err < SLOPE_REL_SPECTRUM,
        format!(
            "|E0 - oracle|/oracle {e0_rel:.2e} (tol {SPECTRUM_E0_REL:e}; with E1 {with_e1:.2e}); |E1| slope {fitted:.4} vs 2|zeta_C(E0)| {want:.4} (rel {slope_err:.3}, tol {SLOPE_REL_SPECTRUM})"
        ),
    )
}

fn connection_decomposition() -> Res<Outcome> {
    let q = harmonic();
    let g = stokes_graph(&q)?;
    let d = connection_decompose(&q, &g, c(-1.2, 0.2), c(5.0, 0.0))?;
    outcome(d.residual < CONNECTION_RESIDUAL, format!("residual {:.2e} at lambda = 5 (tol {CONNECTION_RESIDUAL:e})", d.residual))
}

fn schema(name: &str) -> Res<JSONSchema> {
    let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name))?;
    Ok(JSONSchema::compile(&serde_json::from_str(&text)?).map_err(|e| e.to_string())?)
}

fn violations(s: &JSONSchema, v: &Value) -> Vec<String> {
    match s.validate(v) {
        Ok(()) => Vec::new(),
        Err(errs) => errs.map(|e| format!("{e} at {}", e.instance_path)).collect(),
    }
}

fn cli_determinism() -> Res<Outcome> {
    let results = schema("result.schema.json")?;
    let errors = schema("error.schema.json")?;
    let tmp = tempfile::tempdir()?;
    let runs: Vec<Vec<&str>> = vec![
        vec!["--task", "stokes", "--potential", "[0,1]", "--format", "csv"],
        vec!["--task", "kappa", "--potential", "[0,1]", "--point", "1.3", "--order", "6"],
        vec!["--task", "borel-sum", "--lambda", "[3,1]"],
        vec!["--task", "borel-sum", "--lambda", "4", "--source", "alt-linear", "--xi", "1"],
        vec!["--task", "topo-eval", "--potential", "[1,0,1]", "--point", "[0.8,0.3]", "--s", "[-0.3,0.1]"],
        vec!["--task", "catalog", "--potential", "[1,0,1]", "--xi", "[1,0]", "--format", "csv"],
        vec!["--task", "hyper", "--lambda", "6", "--format", "csv"],
        vec!["--task", "spectrum", "--potential", "[0,0,1,0,1]", "--lambda", "10", "--amplitude", "riccati"],
        vec!["--task", "hyper", "--lambda", "6", "--generations", "2"],
    ];
    let mut mismatched = Vec::new();
    let mut invalid = Vec::new();
    let mut checked = 0;
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let dir = tmp.path().join(format!("r{i}-{rep}"));
            let o = Command::new(env!("CARGO_BIN_EXE_exwkb")).arg("--out").arg(&dir).args(args).env_remove("EXWKB_CACHE_DIR").output()?;
            let mut files: Vec<(String, Vec<u8>)> = Vec::new();
            for e in fs::read_dir(&dir)? {
                let p = e?.path();
                files.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p)?));
            }
            files.sort();
            outputs.push((o.status.code(), o.stdout, o.stderr, files));
        }
        if outputs[0] != outputs[1] {
            mismatched.push(args[1].to_string());
        }
        for (name, bytes) in &outputs[0].3 {
            if !name.ends_with(".json") {
                continue;
            }
            let v: Value = serde_json::from_slice(bytes)?;
            let s = if name == "error.json" { &errors } else { &results };
            let bad = violations(s, &v);
            checked += 1;
            if !bad.is_empty() {
                invalid.push(format!("{} {name}: {bad:?}", args[1]));
            }
        }
    }
    outcome(
        mismatched.is_empty() && invalid.is_empty() && checked == runs.len(),
        format!("{} configurations run twice, mismatched {mismatched:?}; {checked} JSON documents validated, invalid {invalid:?}", runs.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Res<Outcome>); 10] = [
        ("Airy kappa tower", airy_kappa_tower),
        ("closed-form Borel transform, linear potential", closed_form_borel_linear),
        ("harmonic Joos fixture", joos_fixture),
        ("topological pipeline consistency", topological_consistency),
        ("convergence bounds", convergence_bounds),
        ("singularity hierarchy", singularity_hierarchy),
        ("hyperasymptotics on the Joos fixture", joos_hyperasymptotics),
        ("anharmonic spectrum", anharmonic_spectrum),
        ("connection decomposition", connection_decomposition),
        ("determinism and schemas", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (pass, measured) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(Ok(o)) => (o.pass, o.measured),
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failed += 1;
        }
        println!("{} criterion {}: {name}: {measured}", if pass { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
