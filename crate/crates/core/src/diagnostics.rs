//! Comparison of standardized errors with a centred normal law: ECDF, Q-Q
//! pairs, a fixed 30-bin histogram and the two-sided Kolmogorov–Smirnov
//! distance. Nothing here rejects; the tables are for inspection.

use std::path::Path;

use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const HISTOGRAM_BINS: usize = 30;
/// Histogram half-width in units of the target standard deviation.
pub const HISTOGRAM_HALF_WIDTH: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EcdfPoint {
    pub x: f64,
    pub empirical: f64,
    pub normal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QqPoint {
    pub probability: f64,
    pub sample: f64,
    pub normal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `count / (n · width)`.
    pub density: f64,
    /// Target density at the bin centre.
    pub normal_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityDiagnostics {
    pub n: usize,
    pub variance: f64,
    pub sample_mean: f64,
    pub sample_variance: f64,
    pub ks_statistic: f64,
    /// All samples equal.
    pub degenerate: bool,
    /// Samples outside the histogram range, below and above.
    pub outside: [usize; 2],
    #[serde(skip)]
    pub ecdf: Vec<EcdfPoint>,
    #[serde(skip)]
    pub qq: Vec<QqPoint>,
    #[serde(skip)]
    pub histogram: Vec<HistogramBin>,
}

fn target(variance: f64) -> Result<Normal> {
    Normal::new(0.0, variance.sqrt()).map_err(|e| Error::domain(format!("invalid target variance {variance}: {e}")))
}

/// `sup_x |F_n(x) - Φ(x/σ)|` over sorted samples.
pub fn ks_statistic(sorted: &[f64], variance: f64) -> Result<f64> {
    let law = target(variance)?;
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = law.cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max))
}

pub fn normality_diagnostics(samples: &[f64], variance: f64) -> Result<NormalityDiagnostics> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::domain(format!("target variance must be positive, got {variance}")));
    }
    if samples.len() < 2 {
        return Err(Error::domain("normality diagnostics need at least two samples"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("samples must be finite"));
    }
    let law = target(variance)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let nf = n as f64;
    let mean = sorted.iter().sum::<f64>() / nf;
    let sample_variance = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);

    let ecdf = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| EcdfPoint {
            x,
            empirical: (i + 1) as f64 / nf,
            normal: law.cdf(x),
        })
        .collect();
    let qq = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let probability = (i as f64 + 0.5) / nf;
            QqPoint {
                probability,
                sample: x,
                normal: law.inverse_cdf(probability),
            }
        })
        .collect();

    let half = HISTOGRAM_HALF_WIDTH * variance.sqrt();
    let (lo, width) = (mean - half, 2.0 * half / HISTOGRAM_BINS as f64);
    let mut counts = [0usize; HISTOGRAM_BINS];
    let mut outside = [0usize; 2];
    for &x in &sorted {
        let pos = (x - lo) / width;
        if pos < 0.0 {
            outside[0] += 1;
        } else if pos >= HISTOGRAM_BINS as f64 {
            // the top edge belongs to the last bin
            if x <= mean + half {
                counts[HISTOGRAM_BINS - 1] += 1;
            } else {
                outside[1] += 1;
            }
        } else {
            counts[pos as usize] += 1;
        }
    }
    let histogram = counts
        .iter()
        .enumerate()
        .map(|(b, &count)| {
            let bin_lo = lo + b as f64 * width;
            HistogramBin {
                lo: bin_lo,
                hi: bin_lo + width,
                count,
                density: count as f64 / (nf * width),
                normal_density: law.pdf(bin_lo + 0.5 * width),
            }
        })
        .collect();

    Ok(NormalityDiagnostics {
        n,
        variance,
        sample_mean: mean,
        sample_variance,
        ks_statistic: ks_statistic(&sorted, variance)?,
        degenerate: sorted[0] == sorted[n - 1],
        outside,
        ecdf,
        qq,
        histogram,
    })
}

impl NormalityDiagnostics {
    /// Writes `ecdf_{name}.csv`, `qq_{name}.csv` and `hist_{name}.csv`.
    pub fn write_tables(&self, dir: &Path, name: &str) -> Result<()> {
        write_rows(&dir.join(format!("ecdf_{name}.csv")), &self.ecdf)?;
        write_rows(&dir.join(format!("qq_{name}.csv")), &self.qq)?;
        write_rows(&dir.join(format!("hist_{name}.csv")), &self.histogram)
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let err = |e: csv::Error| Error::io(path, e.into());
    let mut writer = csv::Writer::from_path(path).map_err(err)?;
    for row in rows {
        writer.serialize(row).map_err(err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
