use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use csv::StringRecord;

use super::{Controllable, DataError, Line, NetworkDataset};
use crate::matrix::Matrix;

struct Table {
    file: String,
    columns: Vec<usize>,
    rows: Vec<(u64, StringRecord)>,
}

impl Table {
    fn read(dir: &Path, file: &str, required: &[&str]) -> Result<Self, DataError> {
        let path = dir.join(file);
        let handle = File::open(&path).map_err(|e| DataError::Io {
            file: file.to_string(),
            msg: e.to_string(),
        })?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(handle);
        let parse_err = |line: u64, e: csv::Error| DataError::Parse {
            file: file.to_string(),
            line,
            msg: e.to_string(),
        };
        let headers = rdr.headers().map_err(|e| parse_err(1, e))?.clone();
        let mut columns = Vec::with_capacity(required.len());
        for name in required {
            let idx = headers.iter().position(|h| h == *name).ok_or_else(|| DataError::Schema {
                file: file.to_string(),
                msg: format!("missing column '{name}'"),
            })?;
            columns.push(idx);
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_err(line, e)
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        Ok(Self {
            file: file.to_string(),
            columns,
            rows,
        })
    }

    fn text<'a>(&self, rec: &'a StringRecord, col: usize) -> &'a str {
        rec.get(self.columns[col]).unwrap_or("")
    }

    fn number<T: std::str::FromStr>(&self, line: u64, rec: &StringRecord, col: usize) -> Result<T, DataError> {
        let raw = self.text(rec, col);
        raw.parse().map_err(|_| DataError::Parse {
            file: self.file.clone(),
            line,
            msg: format!("cannot parse '{raw}' as a number"),
        })
    }

    fn schema(&self, msg: String) -> DataError {
        DataError::Schema {
            file: self.file.clone(),
            msg,
        }
    }
}

/// Reads `id,t,mw` rows into a `raw_T × ids` matrix; every `(id, t)` must appear once.
fn read_profiles(
    table: &Table,
    ids: &mut Vec<String>,
    fixed_ids: bool,
    raw_t: usize,
) -> Result<Matrix<f64>, DataError> {
    let mut index: HashMap<String, usize> = ids.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    let mut cells: Vec<(usize, usize, f64, u64)> = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        let id = table.text(rec, 0).to_string();
        let t: usize = table.number(*line, rec, 1)?;
        let mw: f64 = table.number(*line, rec, 2)?;
        if t >= raw_t {
            return Err(table.schema(format!("line {line}: timepoint {t} beyond the {raw_t} flow timepoints")));
        }
        let col = match index.get(&id) {
            Some(&c) => c,
            None if fixed_ids => {
                ids.push(id.clone());
                index.insert(id, ids.len() - 1);
                ids.len() - 1
            }
            None => return Err(table.schema(format!("line {line}: unknown id '{id}'"))),
        };
        cells.push((t, col, mw, *line));
    }
    let mut m = Matrix::filled(raw_t, ids.len(), f64::NAN);
    for (t, col, mw, line) in cells {
        if !m[(t, col)].is_nan() {
            return Err(table.schema(format!("line {line}: duplicate entry for '{}' at t={t}", ids[col])));
        }
        m[(t, col)] = mw;
    }
    for t in 0..raw_t {
        for (c, id) in ids.iter().enumerate() {
            if m[(t, c)].is_nan() {
                return Err(table.schema(format!("no value for '{id}' at t={t}")));
            }
        }
    }
    Ok(m)
}

/// Reads `controllables.csv`, `controllable_profiles.csv`, `fixed_profiles.csv`,
/// `lines.csv` and `flows.csv` from `dir`. Timepoints are 0-based; the flow file
/// fixes their count.
pub fn load_network(dir: &Path) -> Result<NetworkDataset, DataError> {
    let ctab = Table::read(dir, "controllables.csv", &["id", "type", "min_mw", "max_mw"])?;
    let mut controllables = Vec::with_capacity(ctab.rows.len());
    for (line, rec) in &ctab.rows {
        let c = Controllable {
            id: ctab.text(rec, 0).to_string(),
            kind: ctab.text(rec, 1).to_string(),
            min_mw: ctab.number(*line, rec, 2)?,
            max_mw: ctab.number(*line, rec, 3)?,
        };
        if !(c.min_mw <= c.max_mw) {
            return Err(ctab.schema(format!(
                "line {line}: min_mw {} exceeds max_mw {} for '{}'",
                c.min_mw, c.max_mw, c.id
            )));
        }
        controllables.push(c);
    }

    let ltab = Table::read(dir, "lines.csv", &["id", "voltage_kv", "max_current_ka"])?;
    let mut lines = Vec::with_capacity(ltab.rows.len());
    for (line, rec) in &ltab.rows {
        lines.push(Line {
            id: ltab.text(rec, 0).to_string(),
            voltage_kv: ltab.number(*line, rec, 1)?,
            max_current_ka: ltab.number(*line, rec, 2)?,
        });
    }

    let ftab = Table::read(dir, "flows.csv", &["line_id", "t", "mw"])?;
    let mut raw_t = 0usize;
    for (line, rec) in &ftab.rows {
        raw_t = raw_t.max(ftab.number::<usize>(*line, rec, 1)? + 1);
    }
    let mut line_ids: Vec<String> = lines.iter().map(|l| l.id.clone()).collect();
    let flows = read_profiles(&ftab, &mut line_ids, false, raw_t)?;

    let mut ctrl_ids: Vec<String> = controllables.iter().map(|c| c.id.clone()).collect();
    let cptab = Table::read(dir, "controllable_profiles.csv", &["id", "t", "mw"])?;
    let controllable_profiles = read_profiles(&cptab, &mut ctrl_ids, false, raw_t)?;

    let fptab = Table::read(dir, "fixed_profiles.csv", &["id", "t", "mw"])?;
    let mut fixed_ids = Vec::new();
    let fixed_profiles = read_profiles(&fptab, &mut fixed_ids, true, raw_t)?;

    Ok(NetworkDataset {
        controllables,
        controllable_profiles,
        fixed_ids,
        fixed_profiles,
        lines,
        flows,
    })
}

fn io_err(file: &str) -> impl Fn(csv::Error) -> DataError + '_ {
    move |e| DataError::Io {
        file: file.to_string(),
        msg: e.to_string(),
    }
}

fn write_profiles(dir: &Path, file: &str, id_col: &str, ids: &[String], m: &Matrix<f64>) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(dir.join(file)).map_err(io_err(file))?;
    w.write_record([id_col, "t", "mw"]).map_err(io_err(file))?;
    for (c, id) in ids.iter().enumerate() {
        for t in 0..m.rows() {
            w.write_record([id.as_str(), &t.to_string(), &m[(t, c)].to_string()])
                .map_err(io_err(file))?;
        }
    }
    w.flush().map_err(|e| DataError::Io {
        file: file.to_string(),
        msg: e.to_string(),
    })
}

/// Writes the five CSV files read by [`load_network`].
pub fn write_network(ds: &NetworkDataset, dir: &Path) -> Result<(), DataError> {
    std::fs::create_dir_all(dir).map_err(|e| DataError::Io {
        file: dir.display().to_string(),
        msg: e.to_string(),
    })?;
    let file = "controllables.csv";
    let mut w = csv::Writer::from_path(dir.join(file)).map_err(io_err(file))?;
    w.write_record(["id", "type", "min_mw", "max_mw"]).map_err(io_err(file))?;
    for c in &ds.controllables {
        w.write_record([c.id.as_str(), &c.kind, &c.min_mw.to_string(), &c.max_mw.to_string()])
            .map_err(io_err(file))?;
    }
    drop(w);
    let file = "lines.csv";
    let mut w = csv::Writer::from_path(dir.join(file)).map_err(io_err(file))?;
    w.write_record(["id", "voltage_kv", "max_current_ka"]).map_err(io_err(file))?;
    for l in &ds.lines {
        w.write_record([l.id.as_str(), &l.voltage_kv.to_string(), &l.max_current_ka.to_string()])
            .map_err(io_err(file))?;
    }
    drop(w);
    let ctrl: Vec<String> = ds.controllables.iter().map(|c| c.id.clone()).collect();
    let lines: Vec<String> = ds.lines.iter().map(|l| l.id.clone()).collect();
    write_profiles(dir, "controllable_profiles.csv", "id", &ctrl, &ds.controllable_profiles)?;
    write_profiles(dir, "fixed_profiles.csv", "id", &ds.fixed_ids, &ds.fixed_profiles)?;
    write_profiles(dir, "flows.csv", "line_id", &lines, &ds.flows)
}
