//! CSV plot data extracted from task results. Numbers carry 17 significant digits.

use serde_json::Value;

use crate::config::Task;
use crate::Failure;

pub struct CsvFile {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvFile {
    pub fn render(&self) -> Result<Vec<u8>, Failure> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| Failure::io(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| Failure::io(e.to_string()))?;
        }
        w.into_inner().map_err(|e| Failure::io(e.to_string()))
    }
}

fn num(v: &Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:.16e}"),
        None => String::new(),
    }
}

fn pair(v: &Value) -> [String; 2] {
    [num(&v[0]), num(&v[1])]
}

fn array(v: &Value) -> &[Value] {
    v.as_array().map(Vec::as_slice).unwrap_or(&[])
}

pub fn emit_plot_data(task: Task, result: &Value) -> Result<Vec<CsvFile>, Failure> {
    match task {
        Task::Stokes => {
            let g = &result["graph"];
            let mut lines = CsvFile { name: "lines.csv", header: vec!["line", "from_tp", "sample", "re", "im", "end"], rows: Vec::new() };
            for (i, l) in array(&g["lines"]).iter().enumerate() {
                let end = l["end"]["kind"].as_str().unwrap_or("").to_string();
                for (k, p) in array(&l["points"]).iter().enumerate() {
                    let [re, im] = pair(p);
                    lines.rows.push(vec![i.to_string(), l["from_tp"].to_string(), k.to_string(), re, im, end.clone()]);
                }
            }
            let mut points = CsvFile { name: "points.csv", header: vec!["turning_point", "re", "im", "multiplicity"], rows: Vec::new() };
            for (i, t) in array(&g["turning_points"]).iter().enumerate() {
                let [re, im] = pair(&t["location"]);
                points.rows.push(vec![i.to_string(), re, im, t["multiplicity"].to_string()]);
            }
            Ok(vec![lines, points])
        }
        Task::Catalog => {
            let mut f = CsvFile {
                name: "singularities.csv",
                header: vec!["entry", "plane", "re", "im", "mechanism", "level", "sheet_depth", "label"],
                rows: Vec::new(),
            };
            for (i, e) in array(&result["entries"]).iter().enumerate() {
                let [re, im] = pair(&e["location"]);
                f.rows.push(vec![
                    i.to_string(),
                    e["plane"].as_str().unwrap_or("").to_string(),
                    re,
                    im,
                    e["mechanism"].as_str().unwrap_or("").to_string(),
                    e["level"].to_string(),
                    array(&e["sheet"]).len().to_string(),
                    e["label"].as_str().unwrap_or("").to_string(),
                ]);
            }
            Ok(vec![f])
        }
        Task::Hyper => {
            let mut f = CsvFile {
                name: "generations.csv",
                header: vec!["node", "generation", "singularity_re", "singularity_im", "n_trunc", "prefactor_re", "prefactor_im", "term", "magnitude"],
                rows: Vec::new(),
            };
            let root = &result["hyper"]["tree"];
            let mut nodes = vec![root];
            nodes.extend(array(&root["children"]));
            for (i, n) in nodes.iter().enumerate() {
                let [sr, si] = if n["singularity"].is_null() { [String::new(), String::new()] } else { pair(&n["singularity"]) };
                let [pr, pi] = pair(&n["prefactor"]);
                for (k, m) in array(&n["term_magnitudes"]).iter().enumerate() {
                    f.rows.push(vec![
                        i.to_string(),
                        n["generation"].to_string(),
                        sr.clone(),
                        si.clone(),
                        n["n_trunc"].to_string(),
                        pr.clone(),
                        pi.clone(),
                        k.to_string(),
                        num(m),
                    ]);
                }
            }
            Ok(vec![f])
        }
        other => Err(Failure::NotPlottable(other.name().to_string())),
    }
}
