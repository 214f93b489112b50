//! `exwkb`: runs one task from a JSON configuration and/or flags and writes the result with
//! its provenance block.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 unsupported level.

mod cache;
mod config;
mod plot;
mod tasks;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::cache::{Cache, Lookup};
use crate::config::{flag_value, Format, TaskConfig};
use crate::tasks::Artifact;

#[derive(Debug)]
pub enum Failure {
    Config { kind: &'static str, message: String },
    NotPlottable(String),
    Io(String),
    Numerical(exwkb::Error),
}

impl Failure {
    pub fn config(m: impl Into<String>) -> Failure {
        Failure::Config { kind: "ConfigInvalid", message: m.into() }
    }

    pub fn io(m: impl Into<String>) -> Failure {
        Failure::Io(m.into())
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Config { kind, .. } => kind,
            Failure::NotPlottable(_) => "NotPlottable",
            Failure::Io(_) => "OutputUnwritable",
            Failure::Numerical(e) => e.kind(),
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config { message, .. } => message.clone(),
            Failure::NotPlottable(t) => format!("task {t} has no plot data"),
            Failure::Io(m) => m.clone(),
            Failure::Numerical(e) => e.to_string(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config { .. } | Failure::NotPlottable(_) | Failure::Io(_) => 2,
            Failure::Numerical(exwkb::Error::UnsupportedLevel(_) | exwkb::Error::TreeBudgetExceeded(_)) => 4,
            Failure::Numerical(_) => 3,
        }
    }
}

impl From<exwkb::Error> for Failure {
    fn from(e: exwkb::Error) -> Self {
        Failure::Numerical(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "exwkb", version, about = "Exact WKB computations for polynomial potentials")]
struct Cli {
    /// JSON task configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// let the configuration file override flags
    #[arg(long)]
    config_wins: bool,
    /// stokes | kappa | borel-sum | topo-eval | catalog | hyper | spectrum
    #[arg(long)]
    task: Option<String>,
    /// coefficients of V, ascending, as JSON (`[0,0,1,0,1]`)
    #[arg(long, allow_hyphen_values = true)]
    potential: Option<String>,
    /// a number, or `solve`
    #[arg(long, allow_hyphen_values = true)]
    energy: Option<String>,
    /// a number or `[re,im]`
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// quadrature tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// output directory; the result goes to stdout without it
    #[arg(long)]
    out: Option<String>,
    /// json | csv
    #[arg(long)]
    format: Option<String>,
    /// level index for `spectrum`
    #[arg(long)]
    level: Option<u64>,
    /// evaluation point `x`, a number or `[re,im]`
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    /// number of WKB coefficients for `kappa`
    #[arg(long)]
    order: Option<u64>,
    /// hyperasymptotic generations
    #[arg(long)]
    generations: Option<u64>,
    /// joos-chi | joos-log | alt-linear
    #[arg(long)]
    source: Option<String>,
    /// highest topological level
    #[arg(long)]
    q_level: Option<u64>,
    /// Borel-plane point
    #[arg(long, allow_hyphen_values = true)]
    s: Option<String>,
    /// action coordinate for `catalog` and `alt-linear`
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<String>,
    /// topological | riccati
    #[arg(long)]
    amplitude: Option<String>,
    /// keep the integral terms of the hyperasymptotic expansion
    #[arg(long)]
    retain: bool,
}

impl Cli {
    fn flag_map(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("task", self.task.clone().map(Value::String));
        put("potential", self.potential.as_deref().map(flag_value));
        put("energy", self.energy.as_deref().map(flag_value));
        put("lambda", self.lambda.as_deref().map(flag_value));
        put("tolerances", self.tol.map(|t| json!({ "quad": t })));
        let mut out = Map::new();
        if let Some(p) = &self.out {
            out.insert("path".into(), Value::String(p.clone()));
        }
        if let Some(f) = &self.format {
            out.insert("format".into(), Value::String(f.clone()));
        }
        put("output", (!out.is_empty()).then_some(Value::Object(out)));
        put("level", self.level.map(Value::from));
        put("point", self.point.as_deref().map(flag_value));
        put("order", self.order.map(Value::from));
        put("generations", self.generations.map(Value::from));
        put("source", self.source.clone().map(Value::String));
        put("q_level", self.q_level.map(Value::from));
        put("s", self.s.as_deref().map(flag_value));
        put("xi", self.xi.as_deref().map(flag_value));
        put("amplitude", self.amplitude.clone().map(Value::String));
        put("retain", self.retain.then_some(Value::Bool(true)));
        m
    }
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    task: &'static str,
    config_key: &'a str,
    tolerances: &'a config::Tolerances,
    truncation_orders: &'a std::collections::BTreeMap<String, usize>,
}

fn load(cli: &Cli) -> Result<TaskConfig, Failure> {
    let file = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
            match serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", p.display())))? {
                Value::Object(m) => m,
                _ => return Err(Failure::config("configuration must be a JSON object")),
            }
        }
        None => Map::new(),
    };
    config::resolve(config::merge(file, cli.flag_map(), cli.config_wins))
}

fn compute(cfg: &TaskConfig, key: &str) -> Result<Artifact, Failure> {
    let Some(cache) = Cache::from_env() else {
        return tasks::run(cfg);
    };
    match cache.get(key) {
        Lookup::Hit(a) => return Ok(a),
        Lookup::Miss => {}
        Lookup::Corrupt(why) => eprintln!("warning: cache entry {key} is corrupt ({why}); recomputing"),
    }
    let a = tasks::run(cfg)?;
    if let Err(e) = cache.put(key, &a) {
        eprintln!("warning: cannot write cache entry {key}: {e}");
    }
    Ok(a)
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))?;
    let p = dir.join(name);
    fs::write(&p, bytes).map_err(|e| Failure::io(format!("{}: {e}", p.display())))
}

fn run(cfg: &TaskConfig) -> Result<(), Failure> {
    let key = cache::key(&cfg.canonical());
    let art = compute(cfg, &key)?;
    let csv = if cfg.output.format == Format::Csv { Some(plot::emit_plot_data(cfg.task, &art.result)?) } else { None };
    let prov = Provenance {
        tool: "exwkb",
        version: env!("CARGO_PKG_VERSION"),
        task: cfg.task.name(),
        config_key: &key,
        tolerances: &cfg.tolerances,
        truncation_orders: &art.truncation_orders,
    };
    let doc = pretty(&json!({ "provenance": prov, "result": art.result }));
    match &cfg.output.path {
        Some(dir) => {
            let dir = Path::new(dir);
            write(dir, "result.json", doc.as_bytes())?;
            for f in csv.iter().flatten() {
                write(dir, f.name, &f.render()?)?;
            }
        }
        None => print!("{doc}"),
    }
    Ok(())
}

fn report(f: &Failure, out: Option<&str>) -> ExitCode {
    let record = json!({ "error": { "kind": f.kind(), "message": f.message(), "exit_code": f.exit_code() } });
    eprintln!("{}", serde_json::to_string(&record).expect("error record serializes"));
    if let Some(dir) = out {
        let _ = write(Path::new(dir), "error.json", pretty(&record).as_bytes());
    }
    ExitCode::from(f.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(f) => return report(&f, cli.out.as_deref()),
    };
    match run(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(&f, cfg.output.path.as_deref()),
    }
}
