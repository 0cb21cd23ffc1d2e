use serde::{Deserialize, Serialize};

use super::{AnalysisError, PcaProjection};
use crate::scenario::Observation;

pub const DEFAULT_BINS: usize = 30;
pub const DEFAULT_SMOOTHING: f64 = 1e-6;

/// Square histogram grid over a fixed box in the projected plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub bins: usize,
    /// `[x_min, x_max]` along the first component.
    pub x: [f64; 2],
    /// `[y_min, y_max]` along the second component.
    pub y: [f64; 2],
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn axis_bounds(mut values: Vec<f64>) -> [f64; 2] {
    values.sort_by(f64::total_cmp);
    let (lo, hi) = (quantile(&values, 0.01), quantile(&values, 0.99));
    if hi - lo > 1e-12 {
        [lo, hi]
    } else {
        [lo - 0.5, hi + 0.5]
    }
}

impl GridSpec {
    /// Box spanning the 1st to 99th percentile of the pooled points on each axis.
    pub fn from_points(points: &[[f64; 2]], bins: usize) -> Result<Self, AnalysisError> {
        if points.is_empty() || bins == 0 {
            return Err(AnalysisError::EmptyInput("grid needs points and at least one bin"));
        }
        Ok(Self {
            bins,
            x: axis_bounds(points.iter().map(|p| p[0]).collect()),
            y: axis_bounds(points.iter().map(|p| p[1]).collect()),
        })
    }

    fn index(range: [f64; 2], bins: usize, v: f64) -> usize {
        let t = (v - range[0]) / (range[1] - range[0]);
        ((t * bins as f64).floor().max(0.0) as usize).min(bins - 1)
    }

    /// Row-major bin index; points outside the box land in the edge bins.
    pub fn bin_of(&self, p: [f64; 2]) -> usize {
        Self::index(self.y, self.bins, p[1]) * self.bins + Self::index(self.x, self.bins, p[0])
    }

    pub fn cells(&self) -> usize {
        self.bins * self.bins
    }
}

/// Smoothed histogram density on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct StateDensity {
    pub grid: GridSpec,
    pub smoothing: f64,
    /// Row-major probabilities, `bins × bins`, summing to one.
    pub p: Vec<f64>,
}

impl StateDensity {
    pub fn from_points(points: &[[f64; 2]], grid: GridSpec, smoothing: f64) -> Result<Self, AnalysisError> {
        if points.is_empty() {
            return Err(AnalysisError::EmptyInput("density needs at least one point"));
        }
        let mut counts = vec![0.0; grid.cells()];
        for &p in points {
            counts[grid.bin_of(p)] += 1.0;
        }
        let n = points.len() as f64;
        let p = counts.iter().map(|c| c / n + smoothing).collect();
        Ok(Self { grid, smoothing, p: normalize(p) })
    }

    pub fn from_samples(
        samples: &[Observation],
        projection: &PcaProjection,
        grid: GridSpec,
        smoothing: f64,
    ) -> Result<Self, AnalysisError> {
        let pts: Vec<[f64; 2]> = samples.iter().map(|s| projection.project(s)).collect();
        Self::from_points(&pts, grid, smoothing)
    }

    fn check_grid(&self, other: &Self) -> Result<(), AnalysisError> {
        if self.grid != other.grid || self.p.len() != other.p.len() {
            return Err(AnalysisError::GridMismatch);
        }
        Ok(())
    }

    pub fn kl(&self, other: &Self) -> Result<f64, AnalysisError> {
        self.check_grid(other)?;
        kl_divergence(&self.p, &other.p)
    }

    pub fn js(&self, other: &Self) -> Result<f64, AnalysisError> {
        self.check_grid(other)?;
        js_divergence(&self.p, &other.p)
    }
}

pub fn normalize(mut p: Vec<f64>) -> Vec<f64> {
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    p
}

/// `Σ p ln(p/q)` in nats; bins with `p = 0` contribute nothing.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, AnalysisError> {
    if p.len() != q.len() {
        return Err(AnalysisError::GridMismatch);
    }
    Ok(p.iter().zip(q).map(|(&a, &b)| if a > 0.0 { a * (a / b).ln() } else { 0.0 }).sum())
}

/// `½KL(P‖M) + ½KL(Q‖M)` with `M = ½(P+Q)`, in nats.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64, AnalysisError> {
    if p.len() != q.len() {
        return Err(AnalysisError::GridMismatch);
    }
    // Summed pairwise in one expression so that swapping P and Q yields
    // bit-identical results.
    let total: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            let term = |x: f64| if x > 0.0 { x * (x / m).ln() } else { 0.0 };
            0.5 * (term(a) + term(b))
        })
        .sum();
    Ok(total.max(0.0))
}
