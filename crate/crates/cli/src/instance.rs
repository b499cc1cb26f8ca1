//! Stylized instances and policies as CSV.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use slaforge_core::search::{Policy, PolicyClass};
use slaforge_core::{BoroughPolicy, CityPolicy, Grid, Instance};

use crate::error::{invalid, CliError, Result};
use crate::ingest::csv_field;

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let names: Vec<String> = r
        .headers()
        .map_err(|e| bad(path, 1, e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if names != header {
        return Err(bad(path, 1, format!("header must be `{}`", header.join(","))));
    }
    Ok(r)
}

fn bad(path: &Path, line: u64, reason: impl Into<String>) -> CliError {
    CliError::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn number(path: &Path, line: u64, s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .ok()
        .filter(|v: &f64| v.is_finite())
        .ok_or_else(|| bad(path, line, format!("{what} {s:?} is not a number")))
}

/// Names in first-appearance order plus their index.
#[derive(Default)]
struct Names {
    list: Vec<String>,
    index: HashMap<String, usize>,
}

impl Names {
    fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.list.push(name.to_string());
        self.index.insert(name.to_string(), self.list.len() - 1);
        self.list.len() - 1
    }
}

/// Reads `category,borough,lambda,risk`; every pair must appear exactly once.
pub fn read_instance(path: &Path, budget: f64, alpha: f64) -> Result<Instance> {
    let mut r = reader(path, &["category", "borough", "lambda", "risk"])?;
    let (mut cats, mut bors) = (Names::default(), Names::default());
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| bad(path, line, e.to_string()))?;
        let k = cats.intern(rec[0].trim());
        let b = bors.intern(rec[1].trim());
        rows.push((line, k, b, number(path, line, &rec[2], "lambda")?, number(path, line, &rec[3], "risk")?));
    }
    if rows.is_empty() {
        return Err(CliError::EmptyFile(path.to_path_buf()));
    }
    let (nk, nb) = (cats.list.len(), bors.list.len());
    let mut lambda = Grid::filled(nk, nb, None);
    let mut risk = Grid::filled(nk, nb, 0.0);
    for (line, k, b, l, rk) in rows {
        if lambda.at(k, b).is_some() {
            return Err(bad(path, line, "duplicate (category, borough) pair"));
        }
        lambda.set(k, b, Some(l));
        risk.set(k, b, rk);
    }
    if let Some(((k, b), _)) = lambda.iter().find(|(_, v)| v.is_none()) {
        return Err(CliError::Validation(format!(
            "{}: missing row for category {:?} in borough {:?}",
            path.display(),
            cats.list[k],
            bors.list[b]
        )));
    }
    let lambda = lambda.map(|v| v.expect("checked"));
    Instance::new(cats.list, bors.list, lambda, risk, budget, alpha).map_err(invalid)
}

pub fn write_instance(instance: &Instance) -> String {
    let mut out = String::from("category,borough,lambda,risk\n");
    for ((k, b), l) in instance.lambda().iter() {
        out.push_str(&format!(
            "{},{},{l},{}\n",
            csv_field(&instance.categories()[k]),
            csv_field(&instance.boroughs()[b]),
            instance.risk().at(k, b)
        ));
    }
    out
}

/// Reads a `kind,category,borough,value` policy against known names.
///
/// `budget` rows (category empty) give borough budget weights, `gps` rows GPS
/// weights and `target` rows target inspection fractions. A file with budget
/// rows is a borough-budget policy, otherwise a city-budget policy. Missing
/// GPS weights are 0 and missing targets 1.
pub fn read_policy(path: &Path, categories: &[String], boroughs: &[String]) -> Result<Policy> {
    let mut r = reader(path, &["kind", "category", "borough", "value"])?;
    let (nk, nb) = (categories.len(), boroughs.len());
    let find = |names: &[String], s: &str| names.iter().position(|n| n == s);
    let mut budget: Option<Vec<f64>> = None;
    let mut gps = Grid::filled(nk, nb, 0.0);
    let mut target = Grid::filled(nk, nb, 1.0);
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| bad(path, line, e.to_string()))?;
        rows += 1;
        let value = number(path, line, &rec[3], "value")?;
        let b = find(boroughs, rec[2].trim()).ok_or_else(|| bad(path, line, format!("unknown borough {:?}", &rec[2])))?;
        match rec[0].trim() {
            "budget" => budget.get_or_insert_with(|| vec![0.0; nb])[b] = value,
            kind @ ("gps" | "target") => {
                let k = find(categories, rec[1].trim())
                    .ok_or_else(|| bad(path, line, format!("unknown category {:?}", &rec[1])))?;
                if kind == "gps" {
                    gps.set(k, b, value);
                } else {
                    target.set(k, b, value);
                }
            }
            other => return Err(bad(path, line, format!("unknown kind {other:?}"))),
        }
    }
    if rows == 0 {
        return Err(CliError::EmptyFile(path.to_path_buf()));
    }
    match budget {
        Some(budget) => Ok(Policy::Borough(BoroughPolicy::new(budget, gps, target).map_err(invalid)?)),
        None => Ok(Policy::City(CityPolicy::new(gps, target).map_err(invalid)?)),
    }
}

pub fn write_policy(policy: &Policy, categories: &[String], boroughs: &[String]) -> String {
    let mut out = String::from("kind,category,borough,value\n");
    let (gps, target) = match policy {
        Policy::Borough(p) => {
            for (b, v) in p.budget_frac().iter().enumerate() {
                out.push_str(&format!("budget,,{},{v}\n", csv_field(&boroughs[b])));
            }
            (p.gps(), p.target_frac())
        }
        Policy::City(p) => (p.gps(), p.target_frac()),
    };
    for (kind, grid) in [("gps", gps), ("target", target)] {
        for ((k, b), v) in grid.iter() {
            out.push_str(&format!("{kind},{},{},{v}\n", csv_field(&categories[k]), csv_field(&boroughs[b])));
        }
    }
    out
}

pub fn class_name(class: PolicyClass) -> &'static str {
    match class {
        PolicyClass::BoroughBudget => "borough",
        PolicyClass::CityBudget => "city",
    }
}

/// One front policy per `policy_id,class,v0,v1,...` row, in the layout of the
/// class's parameter vector.
pub fn read_front(path: &Path, nk: usize, nb: usize) -> Result<Vec<(String, Policy)>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file);
    let header = r.headers().map_err(|e| bad(path, 1, e.to_string()))?.clone();
    if header.len() < 2 || &header[0] != "policy_id" || &header[1] != "class" {
        return Err(bad(path, 1, "header must start with `policy_id,class`"));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| bad(path, line, e.to_string()))?;
        let values = rec
            .iter()
            .skip(2)
            .filter(|s| !s.is_empty())
            .map(|s| number(path, line, s, "value"))
            .collect::<Result<Vec<f64>>>()?;
        let policy = match rec.get(1).map(str::trim) {
            Some("borough") => Policy::Borough(BoroughPolicy::from_vector(&values, nk, nb).map_err(|e| bad(path, line, e.to_string()))?),
            Some("city") => Policy::City(CityPolicy::from_vector(&values, nk, nb).map_err(|e| bad(path, line, e.to_string()))?),
            other => return Err(bad(path, line, format!("unknown class {other:?}"))),
        };
        out.push((rec[0].to_string(), policy));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn instance_round_trip() {
        let f = tmp("category,borough,lambda,risk\nH,Q,1,4\nH,B,1,1\n");
        let inst = read_instance(f.path(), 4.0, 1.0).unwrap();
        assert_eq!(inst.boroughs(), ["Q", "B"]);
        let g = tmp(&write_instance(&inst));
        assert_eq!(read_instance(g.path(), 4.0, 1.0).unwrap(), inst);
    }

    #[test]
    fn instance_needs_every_pair() {
        let f = tmp("category,borough,lambda,risk\nH,Q,1,4\nP,B,1,1\n");
        assert!(matches!(read_instance(f.path(), 4.0, 1.0), Err(CliError::Validation(_))));
        let f = tmp("category,borough,lambda,risk\nH,Q,1,4\nH,Q,1,1\n");
        assert!(matches!(read_instance(f.path(), 4.0, 1.0), Err(CliError::MalformedRow { line: 3, .. })));
        let f = tmp("category,borough,lambda,risk\nH,Q,3,4\n");
        assert!(matches!(read_instance(f.path(), 2.0, 1.0), Err(CliError::Validation(_))));
    }

    #[test]
    fn policy_round_trip() {
        let cats = vec!["H".to_string(), "P".to_string()];
        let bors = vec!["Q".to_string()];
        let f = tmp("kind,category,borough,value\nbudget,,Q,1\ngps,H,Q,3\ngps,P,Q,1\ntarget,P,Q,0.5\n");
        let p = read_policy(f.path(), &cats, &bors).unwrap();
        let Policy::Borough(bp) = &p else { panic!("borough policy expected") };
        assert_eq!(bp.gps().as_slice(), &[0.75, 0.25]);
        assert_eq!(bp.target_frac().as_slice(), &[1.0, 0.5]);
        let g = tmp(&write_policy(&p, &cats, &bors));
        assert_eq!(read_policy(g.path(), &cats, &bors).unwrap(), p);

        let city = tmp("kind,category,borough,value\ngps,H,Q,1\ngps,P,Q,1\n");
        assert!(matches!(read_policy(city.path(), &cats, &bors).unwrap(), Policy::City(_)));
        let wrong = tmp("kind,category,borough,value\ngps,X,Q,1\n");
        assert!(read_policy(wrong.path(), &cats, &bors).is_err());
    }
}
