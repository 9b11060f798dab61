//! The two slices of the observed field the estimators read, and their CSV
//! form.
//!
//! `site_columns.csv` holds `X_{t_i}(ỹ_j)` for every `t_i`, one column per
//! thinned site; `time_rows.csv` holds full rows `X_{s_r}(y_j)`, `j = 1..=M`,
//! one line per thinned time. Both start with a `#` metadata line of
//! `key=value` pairs followed by a header naming the abscissae.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const SITE_COLUMNS_FILE: &str = "site_columns.csv";
pub const TIME_ROWS_FILE: &str = "time_rows.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct FieldObservations {
    pub time_steps: usize,
    pub space_steps: usize,
    pub horizon: f64,
    pub epsilon: f64,
    pub modes: usize,
    /// Thinned sites `ỹ_j`.
    pub sites: Vec<f64>,
    /// `site_columns[j][i] = X_{t_i}(ỹ_j)`, `i = 0..=N`.
    pub site_columns: Vec<Vec<f64>>,
    /// Spacing of thinned times in units of `T/N`.
    pub row_stride: usize,
    /// `time_rows[r][j-1] = X_{s_r}(j/M)`, `r = 0..=N2`.
    pub time_rows: Vec<Vec<f64>>,
}

impl FieldObservations {
    pub fn dt(&self) -> f64 {
        self.horizon / self.time_steps as f64
    }

    pub fn thinned_times(&self) -> usize {
        self.time_rows.len().saturating_sub(1)
    }

    fn metadata_line(&self, slice: &str) -> String {
        format!(
            "# slice={slice} time_steps={} space_steps={} horizon={} epsilon={} modes={} row_stride={}",
            self.time_steps, self.space_steps, self.horizon, self.epsilon, self.modes, self.row_stride
        )
    }

    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let path = dir.join(SITE_COLUMNS_FILE);
        let mut header = vec!["t".to_string()];
        header.extend(self.sites.iter().map(|y| y.to_string()));
        let rows = (0..=self.time_steps).map(|i| {
            let mut rec = vec![(i as f64 * self.dt()).to_string()];
            rec.extend(self.site_columns.iter().map(|c| c[i].to_string()));
            rec
        });
        write_table(&path, &self.metadata_line("site_columns"), header, rows)?;

        let path = dir.join(TIME_ROWS_FILE);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.space_steps).map(|j| (j as f64 / self.space_steps as f64).to_string()));
        let rows = self.time_rows.iter().enumerate().map(|(r, row)| {
            let mut rec = vec![((r * self.row_stride) as f64 * self.dt()).to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            rec
        });
        write_table(&path, &self.metadata_line("time_rows"), header, rows)
    }

    pub fn read_csv(dir: &Path) -> Result<Self> {
        let site_path = dir.join(SITE_COLUMNS_FILE);
        let (meta, header, body) = read_table(&site_path)?;
        let parse_err = |path: &Path, message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let get = |key: &str| -> Result<&str> {
            meta.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| parse_err(&site_path, format!("missing metadata key {key}")))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?
                .parse::<f64>()
                .map_err(|e| parse_err(&site_path, format!("bad value for {key}: {e}")))
        };
        let int = |key: &str| -> Result<usize> {
            get(key)?
                .parse::<usize>()
                .map_err(|e| parse_err(&site_path, format!("bad value for {key}: {e}")))
        };
        let time_steps = int("time_steps")?;
        let space_steps = int("space_steps")?;
        let horizon = num("horizon")?;
        let epsilon = num("epsilon")?;
        let modes = int("modes")?;
        let row_stride = int("row_stride")?;

        let sites = header[1..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| parse_err(&site_path, format!("bad site {s}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if body.len() != time_steps + 1 {
            return Err(parse_err(
                &site_path,
                format!("expected {} time points, found {}", time_steps + 1, body.len()),
            ));
        }
        let mut site_columns = vec![Vec::with_capacity(body.len()); sites.len()];
        for rec in &body {
            if rec.len() != sites.len() + 1 {
                return Err(parse_err(&site_path, "ragged row".into()));
            }
            for (col, v) in site_columns.iter_mut().zip(&rec[1..]) {
                col.push(*v);
            }
        }

        let rows_path = dir.join(TIME_ROWS_FILE);
        let (_, row_header, row_body) = read_table(&rows_path)?;
        if row_header.len() != space_steps + 1 {
            return Err(parse_err(&rows_path, format!("expected {space_steps} space columns")));
        }
        let time_rows = row_body
            .into_iter()
            .map(|rec| {
                if rec.len() == space_steps + 1 {
                    Ok(rec[1..].to_vec())
                } else {
                    Err(parse_err(&rows_path, "ragged row".into()))
                }
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            time_steps,
            space_steps,
            horizon,
            epsilon,
            modes,
            sites,
            site_columns,
            row_stride,
            time_rows,
        })
    }
}

fn write_table(
    path: &Path,
    metadata: &str,
    header: Vec<String>,
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(out, "{metadata}").map_err(io_err)?;
    let mut writer = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::io(path, e.into());
    writer.write_record(&header).map_err(csv_err)?;
    for rec in rows {
        writer.write_record(&rec).map_err(csv_err)?;
    }
    writer.flush().map_err(io_err)
}

type Table = (Vec<(String, String)>, Vec<String>, Vec<Vec<f64>>);

fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let meta_text = first.trim().strip_prefix('#').ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        message: "missing metadata line".into(),
    })?;
    let meta = meta_text
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();

    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut csv_reader = csv::Reader::from_reader(reader);
    let header = csv_reader
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut body = Vec::new();
    for rec in csv_reader.records() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let values = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| parse_err(format!("bad number {s}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        body.push(values);
    }
    Ok((meta, header, body))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FieldObservations {
        FieldObservations {
            time_steps: 4,
            space_steps: 3,
            horizon: 1.0,
            epsilon: 0.1,
            modes: 30,
            sites: vec![1.0 / 3.0, 2.0 / 3.0],
            site_columns: vec![vec![0.0, 0.1, -0.2, 1e-17, 0.3], vec![1.0, 2.0, 3.0, 4.0, 5.0 / 7.0]],
            row_stride: 2,
            time_rows: vec![vec![0.5, 0.25, 0.0], vec![0.1, f64::MIN_POSITIVE, 0.0], vec![1.0 / 3.0, -2.0, 0.0]],
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let obs = sample();
        obs.write_csv(dir.path()).unwrap();
        let back = FieldObservations::read_csv(dir.path()).unwrap();
        assert_eq!(back, obs);
    }

    #[test]
    fn missing_metadata_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        sample().write_csv(dir.path()).unwrap();
        let path = dir.path().join(SITE_COLUMNS_FILE);
        let text = std::fs::read_to_string(&path).unwrap();
        let stripped: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
        std::fs::write(&path, stripped).unwrap();
        assert!(matches!(FieldObservations::read_csv(dir.path()), Err(Error::Parse { .. })));
    }
}
