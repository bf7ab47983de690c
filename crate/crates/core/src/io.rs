//! CSV and JSON readers and writers. Every writer goes through a temporary
//! file in the target directory followed by a rename.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use crate::constraint::LinearConstraint;
use crate::error::{Error, Result};
use crate::oracle::GridDensity;
use crate::scenario::Trajectory;

/// Writes `path` atomically: `body` fills a temporary sibling which then
/// replaces the target.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(field: &str, row: usize, col: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        Error::Parse(format!(
            "row {row}, column {col}: cannot parse {field:?} as a number"
        ))
    })
}

/// Reads a numeric CSV with a header row. Returns the header and the
/// values as an `rows x columns` matrix.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::EmptyInput(format!(
            "{} has no header",
            path.display()
        )));
    }
    let cols = header.len();
    let mut flat = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        for (col, field) in record.iter().enumerate() {
            flat.push(parse_f64(field, rows + 1, col + 1)?);
        }
        rows += 1;
    }
    Ok((header, DMatrix::from_row_slice(rows, cols, &flat)))
}

/// Writes `matrix` as CSV under the given header.
pub fn write_matrix_csv(path: &Path, header: &[String], matrix: &DMatrix<f64>) -> Result<()> {
    if header.len() != matrix.ncols() {
        return Err(Error::DimensionMismatch {
            expected: matrix.ncols(),
            got: header.len(),
        });
    }
    refuse_non_finite(matrix)?;
    write_atomic(path, |w| {
        writeln!(w, "{}", header.join(","))?;
        let mut line = String::new();
        for row in matrix.row_iter() {
            line.clear();
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    line.push(',');
                }
                line.push_str(&format_f64(*v));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    })
}

fn refuse_non_finite(matrix: &DMatrix<f64>) -> Result<()> {
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            if !matrix[(i, j)].is_finite() {
                return Err(Error::RefusedNonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Column names `p1..pD`.
pub fn sample_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|k| format!("p{k}")).collect()
}

/// Writes one sample per row under the header `p1..pD`.
pub fn export_samples(samples: &DMatrix<f64>, path: &Path) -> Result<()> {
    write_matrix_csv(path, &sample_header(samples.ncols()), samples)
}

pub fn read_samples(path: &Path) -> Result<DMatrix<f64>> {
    Ok(read_matrix_csv(path)?.1)
}

/// Reads a `vehicle_id, t, speed` CSV. Rows of one vehicle must be
/// contiguous and ordered in time.
pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("{} lacks a {name:?} column", path.display())))
    };
    let (id_col, t_col, v_col) = (column("vehicle_id")?, column("t")?, column("speed")?);

    let mut out: Vec<Trajectory> = Vec::new();
    let mut current: Option<(String, Vec<f64>, Vec<f64>)> = None;
    let mut seen = std::collections::HashSet::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = |col: usize| record.get(col).unwrap_or("");
        let id = field(id_col).to_owned();
        let t = parse_f64(field(t_col), row + 1, t_col + 1)?;
        let v = parse_f64(field(v_col), row + 1, v_col + 1)?;
        match &mut current {
            Some((cur, times, speeds)) if *cur == id => {
                times.push(t);
                speeds.push(v);
            }
            _ => {
                if !seen.insert(id.clone()) {
                    return Err(Error::Parse(format!(
                        "rows of vehicle {id:?} are not contiguous (row {})",
                        row + 1
                    )));
                }
                if let Some((cur, times, speeds)) = current.take() {
                    out.push(Trajectory::new(cur, times, speeds)?);
                }
                current = Some((id, vec![t], vec![v]));
            }
        }
    }
    if let Some((cur, times, speeds)) = current {
        out.push(Trajectory::new(cur, times, speeds)?);
    }
    Ok(out)
}

pub fn write_trajectories(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "vehicle_id,t,speed")?;
        for traj in trajectories {
            for (t, v) in traj.times().iter().zip(traj.speeds()) {
                writeln!(w, "{},{},{}", traj.id(), format_f64(*t), format_f64(*v))?;
            }
        }
        Ok(())
    })
}

/// JSON form of a constraint `A x = b`, with `A` given as a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl ConstraintFile {
    pub fn to_constraint(&self) -> Result<LinearConstraint> {
        LinearConstraint::from_rows(&self.a, &self.b)
    }

    pub fn from_constraint(c: &LinearConstraint) -> Self {
        Self {
            a: c.a()
                .row_iter()
                .map(|r| r.iter().cloned().collect())
                .collect(),
            b: c.b().iter().cloned().collect(),
        }
    }
}

/// Parses a constraint from a JSON file path, an inline JSON object, or the
/// inline shorthand `[[a11,a12,...],...],[b1,...]`.
pub fn parse_constraint(arg: &str) -> Result<LinearConstraint> {
    let path = Path::new(arg);
    if path.is_file() {
        return read_json::<ConstraintFile>(path)?.to_constraint();
    }
    let text = arg.trim();
    let file: ConstraintFile = if text.starts_with('{') {
        serde_json::from_str(text)?
    } else {
        let (a, b): (Vec<Vec<f64>>, Vec<f64>) = serde_json::from_str(&format!("[{text}]"))
            .map_err(|e| {
                Error::Parse(format!(
                    "constraint {text:?} is neither a file nor `[[..]],[..]`: {e}"
                ))
            })?;
        ConstraintFile { a, b }
    };
    file.to_constraint()
}

/// Writes a tabulated density as `x,density`.
pub fn write_grid_density(path: &Path, density: &GridDensity) -> Result<()> {
    let m = DMatrix::from_fn(density.grid().len(), 2, |i, j| {
        if j == 0 {
            density.grid()[i]
        } else {
            density.values()[i]
        }
    });
    write_matrix_csv(path, &["x".to_owned(), "density".to_owned()], &m)
}

pub fn read_grid_density(path: &Path) -> Result<GridDensity> {
    let (header, m) = read_matrix_csv(path)?;
    if header.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: header.len(),
        });
    }
    let grid: Vec<f64> = m.column(0).iter().cloned().collect();
    let values: Vec<f64> = m.column(1).iter().cloned().collect();
    GridDensity::from_values(grid, &values)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}
