//! CSV ingestion of incident and capacity traces.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use slaforge_core::{ArrivalTrace, CapacityTrace, IncidentRecord};

use crate::error::{invalid, CliError, Result};

pub const ARRIVAL_COLUMNS: [&str; 5] = ["date", "borough", "category", "region_id", "risk"];
pub const CAPACITY_COLUMNS: [&str; 2] = ["date", "inspections"];

/// How to reconcile arrival and capacity date ranges.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alignment {
    /// Keep only days covered by both traces.
    #[default]
    Intersect,
    /// Cover the union of both ranges, filling missing days with zeros.
    PadZero,
}

/// Arrivals with the calendar date of day 0 and any per-row risk values.
#[derive(Clone, Debug, PartialEq)]
pub struct DatedArrivals {
    pub start: NaiveDate,
    pub trace: ArrivalTrace,
    /// Mean of the `risk` column per (category, borough) index, where given.
    pub risk_means: HashMap<(usize, usize), f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatedCapacity {
    pub start: NaiveDate,
    pub daily: Vec<u32>,
}

/// Canonical orderings that override first-appearance order.
#[derive(Clone, Debug, Default)]
pub struct Ordering {
    pub categories: Option<Vec<String>>,
    pub boroughs: Option<Vec<String>>,
}

/// Calendar day of an ISO-8601 date or timestamp; time of day is dropped.
pub fn parse_day(value: &str) -> Option<NaiveDate> {
    let v = value.trim();
    if let Ok(d) = NaiveDate::parse_from_str(v, "%Y-%m-%d") {
        return Some(d);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(v) {
        return Some(t.date_naive());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(v, f).ok())
        .map(|t| t.date())
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file))
}

fn row_error(path: &Path, line: u64, reason: impl Into<String>) -> CliError {
    CliError::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn check_header(path: &Path, reader: &mut csv::Reader<File>, allowed: &[&str], required: usize) -> Result<usize> {
    let header = reader.headers().map_err(|e| row_error(path, 1, e.to_string()))?;
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let ok = names.len() >= required && names.len() <= allowed.len() && names.iter().zip(allowed).all(|(a, b)| a == b);
    if !ok {
        return Err(row_error(
            path,
            1,
            format!("header must be `{}` (trailing columns optional)", allowed.join(",")),
        ));
    }
    Ok(names.len())
}

fn index_of(names: &mut Vec<String>, lookup: &mut HashMap<String, usize>, name: &str, fixed: bool) -> Option<usize> {
    if let Some(&i) = lookup.get(name) {
        return Some(i);
    }
    if fixed {
        return None;
    }
    names.push(name.to_string());
    lookup.insert(name.to_string(), names.len() - 1);
    Some(names.len() - 1)
}

struct RawArrival {
    date: NaiveDate,
    category: usize,
    borough: usize,
    region: Option<u32>,
}

/// Reads `date,borough,category[,region_id[,risk]]` into a daily trace spanning
/// the first to the last reported day.
pub fn ingest_arrivals(path: &Path, ordering: &Ordering) -> Result<DatedArrivals> {
    let mut reader = open(path)?;
    let width = check_header(path, &mut reader, &ARRIVAL_COLUMNS, 3)?;

    let seeded = |given: &Option<Vec<String>>| {
        let names = given.clone().unwrap_or_default();
        let lookup: HashMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        (names, lookup, given.is_some())
    };
    let (mut categories, mut cat_lookup, cat_fixed) = seeded(&ordering.categories);
    let (mut boroughs, mut bor_lookup, bor_fixed) = seeded(&ordering.boroughs);
    let mut regions = Vec::new();
    let mut region_lookup = HashMap::new();
    let mut risk_sums: HashMap<(usize, usize), (f64, u64)> = HashMap::new();
    let mut rows = Vec::new();

    for (i, rec) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| row_error(path, line, e.to_string()))?;
        if rec.len() != width {
            return Err(row_error(path, line, format!("expected {width} fields, found {}", rec.len())));
        }
        let field = |j: usize| rec.get(j).unwrap_or("").trim();
        let date = parse_day(field(0)).ok_or_else(|| CliError::UnparseableDate {
            path: path.to_path_buf(),
            line,
            value: field(0).to_string(),
        })?;
        let (bname, cname) = (field(1), field(2));
        if bname.is_empty() || cname.is_empty() {
            return Err(row_error(path, line, "empty borough or category"));
        }
        let borough = index_of(&mut boroughs, &mut bor_lookup, bname, bor_fixed)
            .ok_or_else(|| row_error(path, line, format!("borough {bname:?} not in the configured list")))?;
        let category = index_of(&mut categories, &mut cat_lookup, cname, cat_fixed)
            .ok_or_else(|| row_error(path, line, format!("category {cname:?} not in the configured list")))?;
        let region = match field(3) {
            "" => None,
            name => Some(index_of(&mut regions, &mut region_lookup, name, false).expect("open list") as u32),
        };
        if width == 5 && !field(4).is_empty() {
            let r: f64 = field(4)
                .parse()
                .ok()
                .filter(|r: &f64| r.is_finite() && *r >= 0.0)
                .ok_or_else(|| row_error(path, line, format!("bad risk value {:?}", field(4))))?;
            let e = risk_sums.entry((category, borough)).or_default();
            e.0 += r;
            e.1 += 1;
        }
        rows.push(RawArrival {
            date,
            category,
            borough,
            region,
        });
    }
    let start = rows.iter().map(|r| r.date).min().ok_or_else(|| CliError::EmptyFile(path.to_path_buf()))?;
    let end = rows.iter().map(|r| r.date).max().expect("non-empty");
    let horizon = (end - start).num_days() as usize + 1;
    let records = rows
        .into_iter()
        .map(|r| IncidentRecord {
            day: (r.date - start).num_days() as u32,
            category: r.category,
            borough: r.borough,
            region: r.region,
        })
        .collect();
    let trace = ArrivalTrace::from_records(categories, boroughs, horizon, records, regions).map_err(invalid)?;
    Ok(DatedArrivals {
        start,
        trace,
        risk_means: risk_sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect(),
    })
}

/// Reads `date,inspections`; days missing inside the range count as zero.
pub fn ingest_capacity(path: &Path) -> Result<DatedCapacity> {
    let mut reader = open(path)?;
    check_header(path, &mut reader, &CAPACITY_COLUMNS, 2)?;
    let mut rows: Vec<(NaiveDate, u32)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| row_error(path, line, e.to_string()))?;
        if rec.len() != 2 {
            return Err(row_error(path, line, format!("expected 2 fields, found {}", rec.len())));
        }
        let raw_date = rec[0].trim();
        let date = parse_day(raw_date).ok_or_else(|| CliError::UnparseableDate {
            path: path.to_path_buf(),
            line,
            value: raw_date.to_string(),
        })?;
        let value: i64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| row_error(path, line, format!("inspections {:?} is not an integer", &rec[1])))?;
        if value < 0 {
            return Err(CliError::NegativeCapacity {
                path: path.to_path_buf(),
                line,
            });
        }
        let value = u32::try_from(value).map_err(|_| row_error(path, line, "inspection count too large"))?;
        rows.push((date, value));
    }
    let start = rows.iter().map(|r| r.0).min().ok_or_else(|| CliError::EmptyFile(path.to_path_buf()))?;
    let end = rows.iter().map(|r| r.0).max().expect("non-empty");
    let mut daily = vec![0u32; (end - start).num_days() as usize + 1];
    for (d, v) in rows {
        let slot = &mut daily[(d - start).num_days() as usize];
        *slot = slot.saturating_add(v);
    }
    Ok(DatedCapacity { start, daily })
}

/// Brings both traces onto one calendar range.
pub fn align(arrivals: &DatedArrivals, capacity: &DatedCapacity, rule: Alignment) -> Result<(ArrivalTrace, CapacityTrace, NaiveDate)> {
    let a_end = arrivals.start + chrono::Days::new(arrivals.trace.horizon() as u64 - 1);
    let c_end = capacity.start + chrono::Days::new(capacity.daily.len() as u64 - 1);
    let (start, end) = match rule {
        Alignment::Intersect => (arrivals.start.max(capacity.start), a_end.min(c_end)),
        Alignment::PadZero => (arrivals.start.min(capacity.start), a_end.max(c_end)),
    };
    if start > end {
        return Err(CliError::Validation(format!(
            "arrivals ({} to {a_end}) and capacity ({} to {c_end}) share no days",
            arrivals.start, capacity.start
        )));
    }
    let horizon = (end - start).num_days() as usize + 1;
    let trace = &arrivals.trace;
    let offset = (arrivals.start - start).num_days();
    let records: Vec<IncidentRecord> = trace
        .incidents()
        .into_iter()
        .filter_map(|r| {
            let day = i64::from(r.day) + offset;
            (0..horizon as i64).contains(&day).then_some(IncidentRecord { day: day as u32, ..r })
        })
        .collect();
    let aligned = ArrivalTrace::from_records(
        trace.categories().to_vec(),
        trace.boroughs().to_vec(),
        horizon,
        records,
        trace.regions().to_vec(),
    )
    .map_err(invalid)?;
    let cap_offset = (capacity.start - start).num_days();
    let daily = (0..horizon as i64)
        .map(|t| {
            let i = t - cap_offset;
            if (0..capacity.daily.len() as i64).contains(&i) {
                capacity.daily[i as usize]
            } else {
                0
            }
        })
        .collect();
    Ok((aligned, CapacityTrace::new(daily).map_err(invalid)?, start))
}

/// Writes one row per incident, in record order.
pub fn write_arrivals(path: &Path, trace: &ArrivalTrace, start: NaiveDate) -> Result<()> {
    let mut out = String::from("date,borough,category");
    let with_regions = !trace.regions().is_empty();
    if with_regions {
        out.push_str(",region_id");
    }
    out.push('\n');
    for r in trace.incidents() {
        let date = start + chrono::Days::new(u64::from(r.day));
        out.push_str(&format!(
            "{date},{},{}",
            csv_field(&trace.boroughs()[r.borough]),
            csv_field(&trace.categories()[r.category])
        ));
        if with_regions {
            out.push(',');
            if let Some(g) = r.region {
                out.push_str(&csv_field(&trace.regions()[g as usize]));
            }
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn write_capacity(path: &Path, capacity: &CapacityTrace, start: NaiveDate) -> Result<()> {
    let mut out = String::from("date,inspections\n");
    for (t, v) in capacity.daily().iter().enumerate() {
        out.push_str(&format!("{},{v}\n", start + chrono::Days::new(t as u64)));
    }
    write_file(path, out.as_bytes())
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(path, e))
}
