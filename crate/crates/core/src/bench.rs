//! Timing sweeps over generated scenarios.

use std::str::FromStr;
use std::time::Duration;

use serde::Serialize;

use crate::anomaly::{run_analysis, AnalysisOptions};
use crate::error::{Error, Result};
use crate::ingest::generate::{generate_scenario, GenerationParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Vary the PI count at a fixed entity count.
    Pis,
    /// Vary the entity count at a fixed PI count.
    Entities,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pis" => Ok(SweepAxis::Pis),
            "entities" => Ok(SweepAxis::Entities),
            _ => Err(Error::BadValue {
                what: "sweep axis",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchPoint {
    pub entities: usize,
    pub pis: usize,
    pub conflicting: usize,
    pub seed: u64,
    pub anomalies: usize,
    pub pre_computation_secs: f64,
    pub analysis_secs: f64,
}

impl BenchPoint {
    pub fn total(&self) -> Duration {
        Duration::from_secs_f64(self.pre_computation_secs + self.analysis_secs)
    }
}

/// Generates and analyses one scenario with `round(pis * ratio)` conflicting PIs.
pub fn run_point(
    entities: usize,
    pis: usize,
    conflict_ratio: f64,
    seed: u64,
    opts: &AnalysisOptions,
) -> Result<BenchPoint> {
    let conflicting = ((pis as f64) * conflict_ratio).round() as usize;
    let params = GenerationParams::new(pis - conflicting.min(pis), conflicting.min(pis), entities, seed);
    let sc = generate_scenario(&params)?;
    let a = run_analysis(&sc, opts)?;
    Ok(BenchPoint {
        entities,
        pis,
        conflicting,
        seed,
        anomalies: a.anomalies.len(),
        pre_computation_secs: a.stats.pre_computation_time.as_secs_f64(),
        analysis_secs: a.stats.analysis_time.as_secs_f64(),
    })
}

/// `reps` runs per point, seeds `seed, seed+1, ...`.
pub fn sweep(
    axis: SweepAxis,
    fixed: usize,
    points: &[usize],
    reps: usize,
    seed: u64,
    conflict_ratio: f64,
    opts: &AnalysisOptions,
) -> Result<Vec<BenchPoint>> {
    let mut out = Vec::new();
    for &n in points {
        let (entities, pis) = match axis {
            SweepAxis::Pis => (fixed, n),
            SweepAxis::Entities => (n, fixed),
        };
        for r in 0..reps as u64 {
            out.push(run_point(entities, pis, conflict_ratio, seed + r, opts)?);
        }
    }
    Ok(out)
}

/// Least-squares `y = a + b x + c x²`, returning `[a, b, c]` and R².
/// `None` with fewer than three distinct x values.
pub fn quadratic_fit(xs: &[f64], ys: &[f64]) -> Option<([f64; 3], f64)> {
    let mut distinct: Vec<f64> = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 || xs.len() != ys.len() {
        return None;
    }
    // Scale x to keep the normal equations well conditioned.
    let scale = distinct.last().copied().unwrap_or(1.0).abs().max(1.0);
    let mut m = [[0.0f64; 4]; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let x = x / scale;
        let row = [1.0, x, x * x];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            m[i][3] += row[i] * y;
        }
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        m.swap(col, pivot);
        if m[col][col].abs() < 1e-300 {
            return None;
        }
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for k in col..4 {
                    m[r][k] -= f * m[col][k];
                }
            }
        }
    }
    let c = [m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]];
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let x = x / scale;
        let f = c[0] + c[1] * x + c[2] * x * x;
        ss_res += (y - f).powi(2);
        ss_tot += (y - mean).powi(2);
    }
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(([c[0], c[1] / scale, c[2] / (scale * scale)], r2))
}
