//! MATPOWER `.m` case reader.
//!
//! Only the real-power tables are read: `mpc.baseMVA`, `mpc.bus`, `mpc.gen`,
//! `mpc.branch` and `mpc.gencost`. Generator units on the same bus are merged
//! into one generation plant; units with zero capacity (synchronous
//! condensers) and out-of-service rows are dropped.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Branch, Bus, CostCoeffs, Generator, Load, NetworkCase, Point};
use crate::error::{Error, Result};

/// A numeric row together with the source line it started on.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub line: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatpowerCase {
    pub name: Option<String>,
    pub base_mva: Option<f64>,
    pub bus: Option<Vec<Row>>,
    pub gen: Option<Vec<Row>>,
    pub branch: Option<Vec<Row>>,
    pub gencost: Option<Vec<Row>>,
}

/// Side table supplying what MATPOWER files do not carry.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CaseMetadata {
    #[serde(default)]
    pub name: Option<String>,
    /// Bus id to `[x, y]` in km.
    pub coordinates: BTreeMap<u32, [f64; 2]>,
    /// 1-based `mpc.branch` row numbers modelled as substations.
    #[serde(default)]
    pub substations: Vec<usize>,
}

impl CaseMetadata {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl MatpowerCase {
    /// Tokenize the tables without interpreting them.
    pub fn parse(text: &str) -> Result<Self> {
        let mut case = MatpowerCase::default();
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l)));

        while let Some((lineno, line)) = lines.next() {
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix("function") {
                if let Some((_, name)) = rest.split_once('=') {
                    case.name = Some(name.trim().trim_end_matches(';').to_string());
                }
                continue;
            }
            let Some(rest) = trimmed.strip_prefix("mpc.") else { continue };
            let Some((field, value)) = rest.split_once('=') else { continue };
            let field = field.trim();
            let value = value.trim();
            if value.starts_with('[') {
                let rows = parse_matrix(lineno, &value[1..], &mut lines)?;
                // cost rows may differ in length with the polynomial order
                if field != "gencost" {
                    require_rectangular(&rows)?;
                }
                let slot = match field {
                    "bus" => &mut case.bus,
                    "gen" => &mut case.gen,
                    "branch" => &mut case.branch,
                    "gencost" => &mut case.gencost,
                    _ => continue,
                };
                *slot = Some(rows);
            } else if field == "baseMVA" {
                let v = value.trim_end_matches(';').trim();
                let v = v
                    .parse::<f64>()
                    .map_err(|_| Error::parse(lineno, format!("baseMVA value `{v}` is not a number")))?;
                case.base_mva = Some(v);
            }
        }
        Ok(case)
    }

    pub fn to_case(&self, meta: &CaseMetadata) -> Result<NetworkCase> {
        let base_mva = self.base_mva.ok_or_else(|| missing("baseMVA"))?;
        let bus_rows = self.bus.as_ref().ok_or_else(|| missing("bus"))?;
        let gen_rows = self.gen.as_ref().ok_or_else(|| missing("gen"))?;
        let branch_rows = self.branch.as_ref().ok_or_else(|| missing("branch"))?;
        let cost_rows = self.gencost.as_ref().ok_or_else(|| missing("gencost"))?;

        let mut buses = Vec::with_capacity(bus_rows.len());
        let mut loads = Vec::new();
        for row in bus_rows {
            require_cols(row, 3, "bus")?;
            let id = as_id(row, 0)?;
            let [x, y] = *meta
                .coordinates
                .get(&id)
                .ok_or_else(|| Error::Validation(format!("missing coordinate for bus {id}")))?;
            buses.push(Bus { id, base_kv: row.values.get(9).copied().unwrap_or(0.0), location: Point::new(x, y) });
            let pd = row.values[2];
            if pd != 0.0 {
                loads.push(Load { bus: id, pd });
            }
        }

        if cost_rows.len() < gen_rows.len() {
            return Err(Error::Validation(format!(
                "mpc.gencost has {} rows but mpc.gen has {}",
                cost_rows.len(),
                gen_rows.len()
            )));
        }
        // (bus, units) in order of first appearance
        let mut plants: Vec<(u32, Vec<(f64, f64, CostCoeffs)>)> = Vec::new();
        for (row, cost_row) in gen_rows.iter().zip(cost_rows) {
            require_cols(row, 10, "gen")?;
            let bus = as_id(row, 0)?;
            let (status, pmax, pmin) = (row.values[7], row.values[8], row.values[9]);
            if status <= 0.0 || pmax <= 0.0 {
                continue;
            }
            let cost = parse_cost(cost_row)?;
            match plants.iter_mut().find(|(b, _)| *b == bus) {
                Some((_, units)) => units.push((pmin, pmax, cost)),
                None => plants.push((bus, vec![(pmin, pmax, cost)])),
            }
        }
        let generators = plants.into_iter().map(|(bus, units)| merge_units(bus, &units)).collect();

        let mut branches = Vec::with_capacity(branch_rows.len());
        let mut row_to_branch = vec![None; branch_rows.len()];
        for (i, row) in branch_rows.iter().enumerate() {
            require_cols(row, 6, "branch")?;
            if row.values.get(10).is_some_and(|&s| s <= 0.0) {
                continue;
            }
            row_to_branch[i] = Some(branches.len());
            branches.push(Branch {
                from: as_id(row, 0)?,
                to: as_id(row, 1)?,
                reactance: row.values[3],
                rate: row.values[5],
                is_substation: false,
            });
        }
        for &k in &meta.substations {
            let idx = k
                .checked_sub(1)
                .and_then(|r| row_to_branch.get(r).copied().flatten())
                .ok_or_else(|| Error::Validation(format!("substation refers to missing branch row {k}")))?;
            branches[idx].is_substation = true;
        }

        let name = meta.name.clone().or_else(|| self.name.clone()).unwrap_or_else(|| "case".into());
        NetworkCase::new(name, base_mva, buses, generators, loads, branches)
    }
}

/// Parse MATPOWER text plus its metadata table into a validated case.
pub fn parse_matpower(text: &str, meta: &CaseMetadata) -> Result<NetworkCase> {
    MatpowerCase::parse(text)?.to_case(meta)
}

fn missing(table: &str) -> Error {
    Error::Validation(format!("missing mpc.{table} table"))
}

fn strip_comment(line: &str) -> &str {
    line.split_once('%').map_or(line, |(code, _)| code)
}

fn parse_matrix<'a>(
    start_line: usize,
    first: &'a str,
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    let mut current = Row { line: start_line, values: Vec::new() };
    let mut chunk = (start_line, first);
    loop {
        let (lineno, text) = chunk;
        let (body, closed) = match text.split_once(']') {
            Some((body, _)) => (body, true),
            None => (text, false),
        };
        for (k, piece) in body.split(';').enumerate() {
            if k > 0 {
                finish_row(&mut rows, &mut current, lineno);
            }
            for tok in piece.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
                if current.values.is_empty() {
                    current.line = lineno;
                }
                let v = parse_number(tok).ok_or_else(|| Error::parse(lineno, format!("`{tok}` is not a number")))?;
                current.values.push(v);
            }
        }
        // newline also terminates a row
        finish_row(&mut rows, &mut current, lineno);
        if closed {
            break;
        }
        chunk = lines.next().ok_or_else(|| Error::parse(start_line, "matrix is not closed with `]`"))?;
    }
    Ok(rows)
}

fn require_rectangular(rows: &[Row]) -> Result<()> {
    if let Some(first) = rows.first() {
        let width = first.values.len();
        if let Some(bad) = rows.iter().find(|r| r.values.len() != width) {
            return Err(Error::parse(
                bad.line,
                format!("row has {} columns, expected {width}", bad.values.len()),
            ));
        }
    }
    Ok(())
}

fn finish_row(rows: &mut Vec<Row>, current: &mut Row, lineno: usize) {
    if !current.values.is_empty() {
        rows.push(std::mem::replace(current, Row { line: lineno, values: Vec::new() }));
    }
}

fn parse_number(tok: &str) -> Option<f64> {
    match tok {
        "Inf" | "inf" => Some(f64::INFINITY),
        "-Inf" | "-inf" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok().filter(|v: &f64| !v.is_nan()),
    }
}

fn require_cols(row: &Row, n: usize, table: &str) -> Result<()> {
    if row.values.len() < n {
        return Err(Error::parse(
            row.line,
            format!("mpc.{table} row has {} columns, need at least {n}", row.values.len()),
        ));
    }
    Ok(())
}

fn as_id(row: &Row, col: usize) -> Result<u32> {
    let v = row.values[col];
    if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(Error::parse(row.line, format!("bus number {v} is not a positive integer")))
    }
}

fn parse_cost(row: &Row) -> Result<CostCoeffs> {
    require_cols(row, 4, "gencost")?;
    let model = row.values[0];
    if model != 2.0 {
        return Err(Error::parse(row.line, format!("gencost model {model} unsupported, only polynomial (2)")));
    }
    let n = row.values[3];
    if !(n >= 1.0 && n <= 3.0 && n.fract() == 0.0) {
        return Err(Error::parse(row.line, format!("gencost polynomial order {n} unsupported (max 3 terms)")));
    }
    let n = n as usize;
    require_cols(row, 4 + n, "gencost")?;
    let c = &row.values[4..4 + n];
    let mut coeffs = [0.0; 3]; // constant, linear, quadratic
    for (k, &v) in c.iter().rev().enumerate() {
        coeffs[k] = v;
    }
    Ok(CostCoeffs { quadratic: coeffs[2], linear: coeffs[1], constant: coeffs[0] })
}

/// Merge units assuming output is shared in proportion to capacity, which
/// keeps the plant cost curve an exact quadratic.
fn merge_units(bus: u32, units: &[(f64, f64, CostCoeffs)]) -> Generator {
    let pg_max: f64 = units.iter().map(|u| u.1).sum();
    let pg_min: f64 = units.iter().map(|u| u.0).sum();
    let mut cost = CostCoeffs::default();
    for &(_, pmax, c) in units {
        let share = pmax / pg_max;
        cost.quadratic += c.quadratic * share * share;
        cost.linear += c.linear * share;
        cost.constant += c.constant;
    }
    Generator { bus, pg_min, pg_max, cost }
}
