//! Deterministic table emission. Floats are written with 17 significant
//! digits so every output file is byte-identical across runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::config::OutputFormat;
use crate::couplings::{CouplingMatrix, SweepRow};
use crate::crystal::Crystal;
use crate::dynamics::Evolution;
use crate::modes::ModeSpectrum;

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Cell {
    Index(usize),
    Float(f64),
}

impl Cell {
    fn csv(&self) -> String {
        match *self {
            Cell::Index(i) => i.to_string(),
            Cell::Float(v) if v.is_nan() => "NaN".to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
        }
    }

    fn json(&self) -> Value {
        match *self {
            Cell::Index(i) => Value::from(i),
            Cell::Float(v) => serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null),
        }
    }
}

/// A named table. Without a header it is written as a bare matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub header: Option<Vec<&'static str>>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(h) = &self.header {
            out.push_str(&h.join(","));
            out.push('\n');
        }
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| match &self.header {
                Some(h) => {
                    let obj: Map<String, Value> = h.iter().zip(row).map(|(k, c)| (k.to_string(), c.json())).collect();
                    Value::Object(obj)
                }
                None => Value::Array(row.iter().map(Cell::json).collect()),
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&Value::Array(rows)).expect("tables serialize");
        s.push('\n');
        s
    }

    pub fn write(&self, dir: &Path, format: OutputFormat) -> std::io::Result<PathBuf> {
        let (ext, body) = match format {
            OutputFormat::Csv => ("csv", self.to_csv()),
            OutputFormat::Json => ("json", self.to_json()),
        };
        let path = dir.join(format!("{}.{ext}", self.name));
        std::fs::write(&path, body)?;
        Ok(path)
    }
}

pub fn crystal_table(crystal: &Crystal) -> Table {
    Table {
        name: "crystal",
        header: Some(vec!["ion_index", "x_m", "y_m"]),
        rows: crystal
            .positions()
            .iter()
            .enumerate()
            .map(|(i, p)| vec![Cell::Index(i), Cell::Float(p[0]), Cell::Float(p[1])])
            .collect(),
    }
}

pub fn modes_table(spectrum: &ModeSpectrum) -> Table {
    Table {
        name: "modes",
        header: Some(vec!["mode_index", "omega_rad_s"]),
        rows: spectrum
            .frequencies()
            .iter()
            .enumerate()
            .map(|(m, w)| vec![Cell::Index(m), Cell::Float(*w)])
            .collect(),
    }
}

/// Row = ion, column = mode.
pub fn eigenvector_table(spectrum: &ModeSpectrum) -> Table {
    let b = spectrum.eigenvectors();
    Table {
        name: "modes_eigenvectors",
        header: None,
        rows: b
            .row_iter()
            .map(|row| row.iter().map(|v| Cell::Float(*v)).collect())
            .collect(),
    }
}

pub fn couplings_table(cm: &CouplingMatrix, spectrum: &ModeSpectrum) -> Table {
    Table {
        name: "couplings",
        header: Some(vec!["i", "j", "d_ij_m", "J_ij_rad_s"]),
        rows: cm
            .pairs()
            .map(|(i, j, v)| {
                vec![
                    Cell::Index(i),
                    Cell::Index(j),
                    Cell::Float(spectrum.distance(i, j)),
                    Cell::Float(v),
                ]
            })
            .collect(),
    }
}

/// Failed rows keep their detuning and carry NaN elsewhere.
pub fn sweep_table(rows: &[SweepRow]) -> Table {
    Table {
        name: "sweep",
        header: Some(vec!["detuning_hz", "jbar_rad_s", "a_fit", "fit_rms"]),
        rows: rows
            .iter()
            .map(|r| {
                let hz = r.detuning / std::f64::consts::TAU;
                let (jbar, a, rms) = match &r.result {
                    Ok(p) => match p.power_law {
                        Some(fit) => (p.jbar, fit.a, fit.fit_rms),
                        None => (p.jbar, f64::NAN, f64::NAN),
                    },
                    Err(_) => (f64::NAN, f64::NAN, f64::NAN),
                };
                vec![Cell::Float(hz), Cell::Float(jbar), Cell::Float(a), Cell::Float(rms)]
            })
            .collect(),
    }
}

pub fn dynamics_table(ev: &Evolution) -> Table {
    let mut rows = Vec::new();
    for (k, t) in ev.times.iter().enumerate() {
        for j in 0..ev.sx[k].len() {
            rows.push(vec![
                Cell::Float(*t),
                Cell::Index(j),
                Cell::Float(ev.sx[k][j]),
                Cell::Float(ev.sy[k][j]),
                Cell::Float(ev.sz[k][j]),
            ]);
        }
    }
    Table {
        name: "dynamics",
        header: Some(vec!["t_s", "spin_index", "sx", "sy", "sz"]),
        rows,
    }
}

pub fn precession_table(thetas: &[f64], rates: &[f64]) -> Table {
    Table {
        name: "precession",
        header: Some(vec!["theta_rad", "rate_rad_s"]),
        rows: thetas
            .iter()
            .zip(rates)
            .map(|(t, r)| vec![Cell::Float(*t), Cell::Float(*r)])
            .collect(),
    }
}
