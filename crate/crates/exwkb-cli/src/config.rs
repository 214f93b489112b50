//! Task configuration: merging of file and flag sources, schema validation, defaults.

use std::collections::BTreeMap;

use exwkb::potential::Polynomial;
use exwkb::C64;
use jsonschema::JSONSchema;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::Failure;

pub const CONFIG_SCHEMA: &str = include_str!("../schemas/config.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Stokes,
    Kappa,
    BorelSum,
    TopoEval,
    Catalog,
    Hyper,
    Spectrum,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Stokes => "stokes",
            Task::Kappa => "kappa",
            Task::BorelSum => "borel-sum",
            Task::TopoEval => "topo-eval",
            Task::Catalog => "catalog",
            Task::Hyper => "hyper",
            Task::Spectrum => "spectrum",
        }
    }
}

/// A real number or an `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Real(f64),
    Pair([f64; 2]),
}

impl Num {
    pub fn c64(self) -> C64 {
        match self {
            Num::Real(x) => C64::new(x, 0.0),
            Num::Pair([a, b]) => C64::new(a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Energy {
    Value(f64),
    /// `"solve"`: the energy is an unknown of the task
    Keyword(Solve),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solve {
    Solve,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_quad")]
    pub quad: f64,
}

fn default_quad() -> f64 {
    1e-12
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { quad: default_quad() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    JoosChi,
    JoosLog,
    AltLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Amplitude {
    Topological,
    Riccati,
}

/// Fully resolved configuration. Everything except `output` enters the cache key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub task: Task,
    #[serde(default)]
    pub potential: Option<Vec<Num>>,
    /// absent means `0` for tasks on `V - E` and `"solve"` for `spectrum`
    #[serde(default)]
    pub energy: Option<Energy>,
    #[serde(default)]
    pub lambda: Option<Num>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing)]
    pub output: Output,
    #[serde(default)]
    pub level: usize,
    #[serde(default)]
    pub point: Option<Num>,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_generations")]
    pub generations: usize,
    #[serde(default = "default_source")]
    pub source: Source,
    #[serde(default = "default_q_level")]
    pub q_level: usize,
    #[serde(default)]
    pub s: Option<Num>,
    #[serde(default)]
    pub xi: Option<Num>,
    #[serde(default = "default_amplitude")]
    pub amplitude: Amplitude,
    #[serde(default)]
    pub retain: bool,
}

fn default_order() -> usize {
    8
}
fn default_generations() -> usize {
    1
}
fn default_source() -> Source {
    Source::JoosChi
}
fn default_q_level() -> usize {
    2
}
fn default_amplitude() -> Amplitude {
    Amplitude::Topological
}

impl TaskConfig {
    pub fn polynomial(&self) -> Result<Polynomial, Failure> {
        let p = self.potential.as_ref().ok_or_else(|| Failure::config("potential is required"))?;
        Polynomial::new(p.iter().map(|n| n.c64()).collect()).map_err(Failure::Numerical)
    }

    pub fn lambda(&self) -> Result<C64, Failure> {
        self.lambda.map(Num::c64).ok_or_else(|| Failure::config("lambda is required"))
    }

    pub fn energy_value(&self) -> Result<f64, Failure> {
        match self.energy {
            None => Ok(0.0),
            Some(Energy::Value(e)) => Ok(e),
            Some(Energy::Keyword(_)) => Err(Failure::config(format!("task {} needs a numeric energy", self.task.name()))),
        }
    }

    /// Canonical JSON of the numerical content.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }
}

/// Top-level keys of the flag map override the file map unless `file_wins`; `tolerances`
/// and `output` are merged key by key with the same rule.
pub fn merge(file: Map<String, Value>, flags: Map<String, Value>, file_wins: bool) -> Map<String, Value> {
    let (mut base, top) = if file_wins { (flags, file) } else { (file, flags) };
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Object(b)), Value::Object(t)) if k == "tolerances" || k == "output" => {
                for (kk, vv) in t {
                    b.insert(kk, vv);
                }
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    base
}

/// Validates against the shipped schema, then applies defaults.
pub fn resolve(raw: Map<String, Value>) -> Result<TaskConfig, Failure> {
    let schema: Value = serde_json::from_str(CONFIG_SCHEMA).expect("shipped schema parses");
    let compiled = JSONSchema::compile(&schema).expect("shipped schema compiles");
    let instance = Value::Object(raw);
    if let Err(errs) = compiled.validate(&instance) {
        let msgs: Vec<String> = errs.map(|e| format!("{} at '{}'", e, e.instance_path)).collect();
        return Err(Failure::config(msgs.join("; ")));
    }
    serde_json::from_value(instance).map_err(|e| Failure::config(e.to_string()))
}

/// Flag value as JSON when it parses, else as a string.
pub fn flag_value(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string()))
}

pub fn orders_map<I: IntoIterator<Item = (&'static str, usize)>>(it: I) -> BTreeMap<String, usize> {
    it.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn obj(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn flags_win_unless_config_wins() {
        let file = obj(json!({"task": "spectrum", "lambda": 8.0, "tolerances": {"quad": 1e-10}}));
        let flags = obj(json!({"lambda": 12.0, "tolerances": {"quad": 1e-9}}));
        let m = merge(file.clone(), flags.clone(), false);
        assert_eq!(m["lambda"], json!(12.0));
        assert_eq!(m["tolerances"]["quad"], json!(1e-9));
        let m = merge(file, flags, true);
        assert_eq!(m["lambda"], json!(8.0));
        assert_eq!(m["tolerances"]["quad"], json!(1e-10));
    }

    #[test]
    fn task_specific_requirements() {
        let ok = resolve(obj(json!({"task": "spectrum", "potential": [0, 0, 1, 0, 1], "lambda": 10, "energy": "solve"})));
        assert!(ok.is_ok(), "{ok:?}");
        let missing = resolve(obj(json!({"task": "kappa", "potential": [0, 1]})));
        assert!(matches!(missing, Err(Failure::Config { .. })));
        let unknown = resolve(obj(json!({"task": "stokes", "potential": [0, 1], "colour": 3})));
        assert!(matches!(unknown, Err(Failure::Config { .. })));
    }

    #[test]
    fn tolerance_enters_canonical_form() {
        let a = resolve(obj(json!({"task": "stokes", "potential": [0, 1]}))).unwrap();
        let b = resolve(obj(json!({"task": "stokes", "potential": [0, 1], "tolerances": {"quad": 1e-8}}))).unwrap();
        assert_ne!(a.canonical(), b.canonical());
        let c = resolve(obj(json!({"task": "stokes", "potential": [0, 1], "output": {"path": "x"}}))).unwrap();
        assert_eq!(a.canonical(), c.canonical());
    }
}
