use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::scenario::{Observation, STATE_DIM};

/// Two leading principal axes of standardised observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct PcaProjection {
    pub mean: Observation,
    /// Per-dimension standard deviation used for standardisation (1 where constant).
    pub scale: Observation,
    pub components: [Observation; 2],
    /// Share of total standardised variance carried by each component.
    pub explained: [f64; 2],
}

impl PcaProjection {
    pub fn project(&self, x: &Observation) -> [f64; 2] {
        self.components.map(|c| (0..STATE_DIM).map(|i| (x[i] - self.mean[i]) / self.scale[i] * c[i]).sum())
    }
}

/// Eigen-decomposition of the covariance of per-dimension standardised
/// samples. Each component is signed so its largest-magnitude entry is positive.
pub fn fit_pca(samples: &[Observation]) -> Result<PcaProjection, AnalysisError> {
    let n = samples.len();
    if n < 3 {
        return Err(AnalysisError::EmptyInput("PCA needs at least three samples"));
    }
    let mut mean = [0.0; STATE_DIM];
    for s in samples {
        for i in 0..STATE_DIM {
            mean[i] += s[i];
        }
    }
    mean = mean.map(|m| m / n as f64);
    let mut scale = [0.0; STATE_DIM];
    for s in samples {
        for i in 0..STATE_DIM {
            scale[i] += (s[i] - mean[i]).powi(2);
        }
    }
    scale = scale.map(|v| {
        let sd = (v / (n - 1) as f64).sqrt();
        if sd > 1e-12 {
            sd
        } else {
            1.0
        }
    });

    let mut cov = DMatrix::<f64>::zeros(STATE_DIM, STATE_DIM);
    for s in samples {
        let z: Vec<f64> = (0..STATE_DIM).map(|i| (s[i] - mean[i]) / scale[i]).collect();
        for a in 0..STATE_DIM {
            for b in a..STATE_DIM {
                cov[(a, b)] += z[a] * z[b];
            }
        }
    }
    for a in 0..STATE_DIM {
        for b in a..STATE_DIM {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..STATE_DIM).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let (l1, l2) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    if !(total > 0.0) || !(l2 > 1e-12 * l1.max(1.0)) {
        return Err(AnalysisError::DegenerateCovariance);
    }

    let component = |k: usize| -> Observation {
        let col = eig.eigenvectors.column(order[k]);
        let mut c: Observation = std::array::from_fn(|i| col[i]);
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        let lead = c.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for v in &mut c {
            *v *= sign / norm;
        }
        c
    };
    Ok(PcaProjection { mean, scale, components: [component(0), component(1)], explained: [l1 / total, l2 / total] })
}
