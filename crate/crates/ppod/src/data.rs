//! Synthetic dataset generation and the CSV point format: one point per
//! row, numeric columns only.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Parameters for a clustered stream with planted isolated points.
#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub points: usize,
    pub dims: usize,
    pub clusters: usize,
    /// Isolated points injected at deterministic positions in the stream.
    pub outliers: usize,
    /// Cluster radius as a fraction of the coordinate span.
    pub spread: f64,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points == 0 || self.dims == 0 || self.clusters == 0 {
            bail!("points, dims, and clusters must all be positive");
        }
        if self.outliers >= self.points {
            bail!("more planted outliers than points");
        }
        if !(0.0..0.5).contains(&self.spread) || self.spread <= 0.0 {
            bail!("spread must lie in (0, 0.5)");
        }
        Ok(())
    }
}

/// Coordinate span of generated data; bounds in the run config should cover
/// this range.
pub const COORD_SPAN: f64 = 1000.0;

/// Generates `spec.points` rows. Cluster members are drawn round-robin from
/// cluster centres well inside the span; planted outliers sit far outside
/// every cluster, spaced evenly through the stream.
pub fn generate(spec: &DatasetSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let centres: Vec<Vec<f64>> = (0..spec.clusters)
        .map(|_| {
            (0..spec.dims)
                .map(|_| rng.gen_range(0.25 * COORD_SPAN..0.75 * COORD_SPAN))
                .collect()
        })
        .collect();
    let radius = spec.spread * COORD_SPAN;
    let outlier_every = if spec.outliers == 0 {
        usize::MAX
    } else {
        spec.points / spec.outliers
    };
    let mut rows = Vec::with_capacity(spec.points);
    for i in 0..spec.points {
        let planted = spec.outliers > 0 && i % outlier_every == outlier_every / 2;
        let row: Vec<f64> = if planted {
            // A corner point: far from the 0.25..0.75 band in every
            // dimension, alternating corners so outliers avoid each other.
            (0..spec.dims)
                .map(|d| {
                    let lo = (i / outlier_every + d) % 2 == 0;
                    if lo {
                        rng.gen_range(0.0..0.04 * COORD_SPAN)
                    } else {
                        rng.gen_range(0.96 * COORD_SPAN..COORD_SPAN)
                    }
                })
                .collect()
        } else {
            let c = &centres[i % centres.len()];
            c.iter()
                .map(|&m| (m + rng.gen_range(-radius..radius)).clamp(0.0, COORD_SPAN))
                .collect()
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn to_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:.6}");
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    fs::write(path, to_csv(rows)).with_context(|| format!("writing {}", path.display()))
}

pub fn parse_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("bad number on line {}", lineno + 1))?;
        if let Some(first) = rows.first() {
            let first: &Vec<f64> = first;
            if row.len() != first.len() {
                bail!("ragged row on line {}", lineno + 1);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("dataset is empty");
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_csv(&text)
}

/// Per-dimension (min, max) with a small margin so boundary points stay
/// strictly inside the normalisation range.
pub fn bounds(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let dims = rows[0].len();
    let mut lo = vec![f64::INFINITY; dims];
    let mut hi = vec![f64::NEG_INFINITY; dims];
    for row in rows {
        for (d, &v) in row.iter().enumerate() {
            lo[d] = lo[d].min(v);
            hi[d] = hi[d].max(v);
        }
    }
    for d in 0..dims {
        let span = (hi[d] - lo[d]).max(1e-9);
        lo[d] -= 0.001 * span;
        hi[d] += 0.001 * span;
    }
    (lo, hi)
}
