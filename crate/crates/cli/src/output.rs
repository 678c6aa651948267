use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use ofl_core::adversary::{Claim, RatioReport};
use ofl_core::fmt::g12;
use ofl_core::table::{Status, TableRow, CSV_HEADER, DESK_TIGHTNESS};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// JSON number for finite values, `"inf"`-style string otherwise.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(g12(v)))
}

pub fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn to_csv<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn table_csv(rows: &[TableRow]) -> Result<String> {
    to_csv(&CSV_HEADER, rows.iter().map(TableRow::csv_record))
}

pub fn emit(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(content.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// A ratio search summarised in the table layout.
pub fn report_row(r: &RatioReport) -> TableRow {
    let (objective, p) = r
        .objective
        .split_once(':')
        .map(|(f, p)| (f.to_string(), p.to_string()))
        .unwrap_or_else(|| (r.objective.clone(), String::new()));
    let p = match p.as_str() {
        "max" => "inf".into(),
        "min" => "-inf".into(),
        "geomean" => "0+".into(),
        _ => p,
    };
    let (claimed, status) = match r.claim {
        _ if r.falsified => (claim_text(r.claim), Status::Falsification),
        Claim::Bound(b) if r.worst_ratio >= b - DESK_TIGHTNESS => {
            (g12(b), Status::TightAtDeskScale)
        }
        Claim::Bound(b) => (g12(b), Status::BoundRespected),
        Claim::Conjecture(_) => (claim_text(r.claim), Status::Conjecture),
        Claim::Unbounded if r.unbounded => ("unbounded".into(), Status::UnboundedExhibited),
        Claim::Unbounded => ("unbounded".into(), Status::BoundRespected),
        Claim::Unclaimed => (String::new(), Status::Unclaimed),
    };
    let c = &r.search_config;
    TableRow {
        objective,
        p,
        mechanism_or_family: r.mechanism.clone(),
        claimed,
        found_or_verified: r.worst_ratio,
        method: format!(
            "search n={}..{} step={} restarts={} seed={} witness={:?}",
            c.n_min,
            c.n_max,
            g12(c.grid_step),
            c.restarts,
            c.seed,
            r.witness.locations()
        ),
        slack: r.slack,
        status,
    }
}

fn claim_text(c: Claim) -> String {
    match c {
        Claim::Bound(b) => g12(b),
        Claim::Conjecture(b) => format!("{} (conjectured)", g12(b)),
        Claim::Unbounded => "unbounded".into(),
        Claim::Unclaimed => String::new(),
    }
}
