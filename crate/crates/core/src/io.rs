//! Plain CSV data files with a one-line header, numbers written with 17
//! significant digits so every file parses back to the same doubles.
//! Writes go to a temporary file in the target directory and are renamed
//! into place.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::constraints::FieldSpectrum;
use crate::dynamics::TimeGrid;
use crate::error::{Error, Result};
use crate::krotov::{ControlField, OptimizationRecord};

pub const PULSE_HEADER: [&str; 2] = ["t", "eps"];
pub const SPECTRUM_HEADER: [&str; 4] = ["omega", "re", "im", "abs2"];
pub const CONVERGENCE_HEADER: [&str; 6] = ["iter", "J_T", "J_a", "J", "delta_J", "monotone_flag"];

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[k]).collect()
    }
}

/// `{:.16e}`: one digit before the point and sixteen after.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_table(path: &Path, table: &CsvTable) -> Result<()> {
    write_formatted(path, table, &[])
}

/// Like [`write_table`], with the listed columns written as plain integers.
fn write_formatted(path: &Path, table: &CsvTable, integer_columns: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidInput(format!("{}: {e}", path.display()));
    w.write_record(&table.header).map_err(csv_err)?;
    for row in &table.rows {
        if row.len() != table.header.len() {
            return Err(Error::InvalidInput(format!(
                "{}: row of {} values under a header of {} columns",
                path.display(),
                row.len(),
                table.header.len()
            )));
        }
        let cells = row.iter().enumerate().map(|(k, &x)| {
            if integer_columns.contains(&k) {
                format!("{}", x as i64)
            } else {
                format_number(x)
            }
        });
        w.write_record(cells).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    write_atomic(path, &bytes)
}

pub fn read_table(path: &Path) -> Result<CsvTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_table(file, path)
}

fn parse_table(source: impl std::io::Read, path: &Path) -> Result<CsvTable> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        message,
    };
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header: Vec<String> = r
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(parse_err(1, "missing header line".into()));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            let message = match e.kind() {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    format!("expected {expected_len} fields, found {len}")
                }
                _ => e.to_string(),
            };
            parse_err(line, message)
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row = rec
            .iter()
            .enumerate()
            .map(|(k, field)| {
                field.parse::<f64>().map_err(|_| {
                    let column = header.get(k).map(String::as_str).unwrap_or("?");
                    parse_err(line, format!("column '{column}': cannot parse '{field}' as a number"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

fn expect_header(table: &CsvTable, expected: &[&str], path: &Path) -> Result<()> {
    if table.header != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header '{}', found '{}'", expected.join(","), table.header.join(",")),
        });
    }
    Ok(())
}

pub fn write_pulse(path: &Path, field: &ControlField) -> Result<()> {
    let mut table = CsvTable::new(&PULSE_HEADER);
    let grid = field.grid();
    table.rows = (0..grid.len()).map(|j| vec![grid.time(j), field.values()[j]]).collect();
    write_table(path, &table)
}

/// Reads a pulse and reconstructs its uniform grid from the first and last
/// sample times; the first time must be zero and every sample must sit on
/// the grid.
pub fn read_pulse(path: &Path) -> Result<ControlField> {
    let table = read_table(path)?;
    expect_header(&table, &PULSE_HEADER, path)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let n = table.rows.len();
    if n < 2 {
        return Err(parse_err(n + 1, format!("a pulse needs at least 2 samples, found {n}")));
    }
    if table.rows[0][0] != 0.0 {
        return Err(parse_err(2, format!("first sample must be at t = 0, found {}", table.rows[0][0])));
    }
    let grid = TimeGrid::new(table.rows[n - 1][0], n).map_err(|e| parse_err(n + 1, e.to_string()))?;
    for (j, row) in table.rows.iter().enumerate() {
        if (row[0] - grid.time(j)).abs() > 1e-9 * grid.duration() {
            return Err(parse_err(
                j + 2,
                format!("sample time {} is off the uniform grid (expected {})", row[0], grid.time(j)),
            ));
        }
        if !row[1].is_finite() {
            return Err(parse_err(j + 2, "field value is not finite".into()));
        }
    }
    ControlField::new(grid, table.column(1))
}

pub fn write_spectrum(path: &Path, spectrum: &FieldSpectrum) -> Result<()> {
    let mut table = CsvTable::new(&SPECTRUM_HEADER);
    table.rows = spectrum
        .frequencies
        .iter()
        .zip(&spectrum.amplitudes)
        .map(|(&w, a)| vec![w, a.re, a.im, a.norm_sqr()])
        .collect();
    write_table(path, &table)
}

pub fn read_spectrum(path: &Path) -> Result<FieldSpectrum> {
    let table = read_table(path)?;
    expect_header(&table, &SPECTRUM_HEADER, path)?;
    Ok(FieldSpectrum {
        frequencies: table.column(0),
        amplitudes: table.rows.iter().map(|r| C64::new(r[1], r[2])).collect(),
    })
}

/// `populations` has one row per time sample and one column per level.
pub fn write_populations(path: &Path, grid: &TimeGrid, labels: &[String], populations: &DMatrix<f64>) -> Result<()> {
    if populations.nrows() != grid.len() || populations.ncols() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "population matrix is {}x{}, expected {}x{}",
            populations.nrows(),
            populations.ncols(),
            grid.len(),
            labels.len()
        )));
    }
    let mut header = vec!["t".to_string()];
    header.extend(labels.iter().cloned());
    let rows = (0..grid.len())
        .map(|j| {
            let mut row = vec![grid.time(j)];
            row.extend(populations.row(j).iter());
            row
        })
        .collect();
    write_table(path, &CsvTable { header, rows })
}

/// Returns the level labels and the population matrix (rows = time).
pub fn read_populations(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let table = read_table(path)?;
    if table.header.first().map(String::as_str) != Some("t") || table.header.len() < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "expected header 't,<label>,...'".into(),
        });
    }
    let labels = table.header[1..].to_vec();
    let m = DMatrix::from_fn(table.rows.len(), labels.len(), |j, k| table.rows[j][k + 1]);
    Ok((labels, m))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub iteration: usize,
    pub j_t: f64,
    pub j_a: f64,
    pub j: f64,
    pub delta_j: f64,
    pub monotone: bool,
}

pub fn write_convergence(path: &Path, record: &OptimizationRecord) -> Result<()> {
    let mut table = CsvTable::new(&CONVERGENCE_HEADER);
    table.rows = record
        .iterations
        .iter()
        .map(|r| {
            vec![
                r.iteration as f64,
                r.j_t,
                r.j_a,
                r.j,
                r.delta_j,
                if r.monotone { 1.0 } else { 0.0 },
            ]
        })
        .collect();
    write_formatted(path, &table, &[0, 5])
}

pub fn read_convergence(path: &Path) -> Result<Vec<ConvergenceRow>> {
    let table = read_table(path)?;
    expect_header(&table, &CONVERGENCE_HEADER, path)?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let bad = |what: &str| Error::Parse {
                path: path.to_path_buf(),
                line: k + 2,
                message: format!("{what} must be a non-negative integer"),
            };
            if r[0] < 0.0 || r[0].fract() != 0.0 {
                return Err(bad("iter"));
            }
            if r[5] != 0.0 && r[5] != 1.0 {
                return Err(bad("monotone_flag (0 or 1)"));
            }
            Ok(ConvergenceRow {
                iteration: r[0] as usize,
                j_t: r[1],
                j_a: r[2],
                j: r[3],
                delta_j: r[4],
                monotone: r[5] == 1.0,
            })
        })
        .collect()
}

/// Contents of `summary.toml`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub converged: bool,
    pub final_error: f64,
    pub iterations: usize,
    pub monotonicity_violations: usize,
    pub max_refinement_passes: usize,
    pub wall_time_seconds: f64,
}

pub fn write_summary(path: &Path, summary: &RunSummary) -> Result<()> {
    let mut t = toml::Table::new();
    t.insert("converged".into(), summary.converged.into());
    t.insert("final_error".into(), summary.final_error.into());
    t.insert("iterations".into(), (summary.iterations as i64).into());
    t.insert(
        "monotonicity_violations".into(),
        (summary.monotonicity_violations as i64).into(),
    );
    t.insert("max_refinement_passes".into(), (summary.max_refinement_passes as i64).into());
    t.insert("wall_time_seconds".into(), summary.wall_time_seconds.into());
    let text = toml::to_string(&t).map_err(|e| Error::InvalidInput(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message,
    };
    let t: toml::Table = text.parse().map_err(|e: toml::de::Error| bad(e.to_string()))?;
    let int = |k: &str| {
        t.get(k)
            .and_then(toml::Value::as_integer)
            .filter(|&i| i >= 0)
            .map(|i| i as usize)
            .ok_or_else(|| bad(format!("missing or invalid '{k}'")))
    };
    let float = |k: &str| {
        t.get(k)
            .and_then(toml::Value::as_float)
            .ok_or_else(|| bad(format!("missing or invalid '{k}'")))
    };
    Ok(RunSummary {
        converged: t
            .get("converged")
            .and_then(toml::Value::as_bool)
            .ok_or_else(|| bad("missing or invalid 'converged'".into()))?,
        final_error: float("final_error")?,
        iterations: int("iterations")?,
        monotonicity_violations: int("monotonicity_violations")?,
        max_refinement_passes: int("max_refinement_passes")?,
        wall_time_seconds: float("wall_time_seconds")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::field_spectrum;
    use crate::krotov::IterationRecord;

    fn parse(text: &str) -> Result<CsvTable> {
        parse_table(text.as_bytes(), Path::new("mem.csv"))
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, f64::MAX, 5e-324, -0.0, 123456789.123456789] {
            let s = format_number(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_number(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn malformed_rows_report_their_line() {
        match parse("t,eps\n0,1\n1,2,3\n") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("expected 2 fields"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        match parse("t,eps\n0,1\n1,abc\n") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("'abc'"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = TimeGrid::new(7.3, 101).unwrap();
        let values: Vec<f64> = grid.times().iter().map(|t| (1.7 * t).sin() * 0.01 / 3.0).collect();
        let field = ControlField::new(grid, values).unwrap();

        let p = dir.path().join("pulse.csv");
        write_pulse(&p, &field).unwrap();
        let back = read_pulse(&p).unwrap();
        assert_eq!(back.grid(), field.grid());
        assert_eq!(back.values(), field.values());

        let spec = field_spectrum(field.values(), &grid);
        let s = dir.path().join("spectrum.csv");
        write_spectrum(&s, &spec).unwrap();
        assert_eq!(read_spectrum(&s).unwrap(), spec);

        let pops = DMatrix::from_fn(grid.len(), 2, |j, k| (j * 2 + k) as f64 / 7.0);
        let labels = vec!["a".to_string(), "b".to_string()];
        let q = dir.path().join("populations.csv");
        write_populations(&q, &grid, &labels, &pops).unwrap();
        assert_eq!(read_populations(&q).unwrap(), (labels, pops));

        let rec = OptimizationRecord {
            iterations: (0..3)
                .map(|i| IterationRecord {
                    iteration: i,
                    j_t: 0.1 * i as f64,
                    j_a: 1e-5 / 3.0,
                    j: 1.0 - 0.1 * i as f64,
                    delta_j: -0.1,
                    monotone: i != 1,
                    refinement_passes: 1,
                    update_norm: 0.0,
                    field: None,
                })
                .collect(),
            converged: false,
        };
        let c = dir.path().join("convergence.csv");
        write_convergence(&c, &rec).unwrap();
        let rows = read_convergence(&c).unwrap();
        assert_eq!(rows.len(), 3);
        for (row, r) in rows.iter().zip(&rec.iterations) {
            assert_eq!((row.iteration, row.j_t, row.j_a, row.j, row.monotone), (r.iteration, r.j_t, r.j_a, r.j, r.monotone));
        }

        let summary = RunSummary {
            converged: true,
            final_error: 9.1e-4,
            iterations: 42,
            monotonicity_violations: 0,
            max_refinement_passes: 3,
            wall_time_seconds: 1.25,
        };
        let m = dir.path().join("summary.toml");
        write_summary(&m, &summary).unwrap();
        assert_eq!(read_summary(&m).unwrap(), summary);
    }

    #[test]
    fn off_grid_pulse_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "t,eps\n0,0\n0.5,0\n0.7,0\n").unwrap();
        match read_pulse(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "time,eps\n0,0\n1,0\n").unwrap();
        assert!(matches!(read_pulse(&p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn atomic_write_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, b"a\n").unwrap();
        write_atomic(&p, b"b\n").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "b\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
