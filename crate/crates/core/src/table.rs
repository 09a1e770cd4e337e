// Copyright 2026 The coherence-lab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Rectangular result tables, CSV output and gnuplot scripts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Extra `#` header lines, e.g. why a column holds NaN.
    pub notes: Vec<String>,
}

impl ResultTable {
    pub fn new(columns: Vec<String>) -> Self {
        ResultTable {
            columns,
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::domain(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn note(&mut self, text: impl Into<String>) {
        let t = text.into();
        if !self.notes.contains(&t) {
            self.notes.push(t);
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// CSV text; numbers use the shortest representation that parses back
    /// to the same `f64`.
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut s = String::new();
        for h in header {
            let _ = writeln!(s, "# {h}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "# note: {n}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|x| format!("{x}")).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    /// Parses the output of [`ResultTable::to_csv`]; header lines become
    /// notes only if they were notes.
    pub fn from_csv(text: &str) -> Result<ResultTable> {
        let mut notes = Vec::new();
        let mut lines = text.lines().filter(|l| {
            if let Some(n) = l.strip_prefix("# note: ") {
                notes.push(n.to_owned());
            }
            !l.starts_with('#') && !l.trim().is_empty()
        });
        let columns: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::domain("CSV has no column row"))?
            .split(',')
            .map(str::to_owned)
            .collect();
        let mut t = ResultTable::new(columns);
        for (n, l) in lines.enumerate() {
            let row = l
                .split(',')
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::domain(format!("CSV row {}: {e}", n + 1)))?;
            t.push(row)?;
        }
        t.notes = notes;
        Ok(t)
    }

    pub fn write_csv(&self, path: &Path, header: &[String]) -> Result<()> {
        write_file(path, &self.to_csv(header))
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_owned(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// How a table should be drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum PlotKind {
    /// One curve per y column against the x column.
    Lines { x: String, ys: Vec<String> },
    /// Colour map of `z` over `(x, y)`.
    Map { x: String, y: String, z: String },
}

fn col_index(table: &ResultTable, name: &str) -> Result<usize> {
    table
        .columns
        .iter()
        .position(|c| c == name)
        .map(|k| k + 1)
        .ok_or_else(|| Error::domain(format!("plot column `{name}` not in table")))
}

/// gnuplot script that reads `csv` (a path relative to the script).
pub fn gnuplot_script(table: &ResultTable, csv: &str, title: &str, kind: &PlotKind) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set datafile commentschars '#'");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set title '{title}'");
    match kind {
        PlotKind::Lines { x, ys } => {
            let xi = col_index(table, x)?;
            let _ = writeln!(s, "set xlabel '{x}'");
            let parts: Vec<String> = ys
                .iter()
                .map(|y| col_index(table, y).map(|yi| format!("'{csv}' using {xi}:{yi} with lines title '{y}'")))
                .collect::<Result<_>>()?;
            let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
        }
        PlotKind::Map { x, y, z } => {
            let (xi, yi, zi) = (col_index(table, x)?, col_index(table, y)?, col_index(table, z)?);
            let _ = writeln!(s, "set xlabel '{x}'");
            let _ = writeln!(s, "set ylabel '{y}'");
            let _ = writeln!(s, "set view map");
            let _ = writeln!(s, "set dgrid3d {},{}", distinct(table, yi - 1), distinct(table, xi - 1));
            let _ = writeln!(s, "splot '{csv}' using {xi}:{yi}:{zi} with pm3d title '{z}'");
        }
    }
    Ok(s)
}

fn distinct(table: &ResultTable, k: usize) -> usize {
    let mut v: Vec<f64> = table.rows.iter().map(|r| r[k]).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len().max(1)
}

/// Writes `<dir>/<stem>.csv` and, with `plot`, `<dir>/<stem>.gp`.
pub fn write_outputs(
    table: &ResultTable,
    dir: &Path,
    stem: &str,
    header: &[String],
    plot: Option<(&str, &PlotKind)>,
) -> Result<(PathBuf, Option<PathBuf>)> {
    let csv = dir.join(format!("{stem}.csv"));
    table.write_csv(&csv, header)?;
    let gp = match plot {
        Some((title, kind)) => {
            let path = dir.join(format!("{stem}.gp"));
            let script = gnuplot_script(table, &format!("{stem}.csv"), title, kind)?;
            write_file(&path, &script)?;
            Some(path)
        }
        None => None,
    };
    Ok((csv, gp))
}
