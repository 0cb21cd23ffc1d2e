use serde::{Deserialize, Serialize};

use super::density::normalize;
use super::{js_divergence, AnalysisError};

/// Cap on DP-Means passes.
pub const MAX_ITERATIONS: usize = 200;

/// Elementwise average of the given densities, renormalised.
pub fn mean_density<'a>(members: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for m in members {
        if acc.is_empty() {
            acc = vec![0.0; m.len()];
        }
        for (a, &v) in acc.iter_mut().zip(m) {
            *a += v;
        }
        n += 1;
    }
    assert!(n > 0, "mean of no densities");
    for a in &mut acc {
        *a /= n as f64;
    }
    normalize(acc)
}

fn jsd(p: &[f64], q: &[f64]) -> f64 {
    js_divergence(p, q).expect("densities share one grid")
}

fn check_grid(densities: &[Vec<f64>]) -> Result<(), AnalysisError> {
    if densities.is_empty() {
        return Err(AnalysisError::EmptyInput("no densities"));
    }
    if densities.iter().any(|d| d.len() != densities[0].len()) {
        return Err(AnalysisError::GridMismatch);
    }
    Ok(())
}

/// Farthest-first traversal seeded with the global mean density: `k` times,
/// add the density farthest (by minimum JSD) from the chosen set. Returns the
/// distance found in the last round.
pub fn heuristic_lambda(densities: &[Vec<f64>], k: usize) -> Result<f64, AnalysisError> {
    check_grid(densities)?;
    if k == 0 || k > densities.len() {
        return Err(AnalysisError::EmptyInput("need 1 <= k <= number of densities"));
    }
    let global = mean_density(densities.iter().map(Vec::as_slice));
    let mut min_dist: Vec<f64> = densities.iter().map(|d| jsd(d, &global)).collect();
    let mut last = 0.0;
    for _ in 0..k {
        let (far, &dist) = min_dist
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, cur| if *cur.1 > *best.1 { cur } else { best });
        last = dist;
        for (i, d) in densities.iter().enumerate() {
            min_dist[i] = min_dist[i].min(jsd(d, &densities[far]));
        }
    }
    Ok(last)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub k: usize,
    /// Zero-based cluster index of each density.
    pub assignments: Vec<usize>,
    pub means: Vec<Vec<f64>>,
    pub lambda: f64,
    pub iterations: usize,
    /// `Σ JSD(ρ_i, μ_{z_i}) + λ·k` before the first pass and after each pass.
    pub objective: Vec<f64>,
    /// A pass would have raised the objective and was rolled back.
    pub stopped_on_increase: bool,
}

fn objective(densities: &[Vec<f64>], z: &[usize], means: &[Vec<f64>], lambda: f64) -> f64 {
    let d: f64 = densities.iter().zip(z).map(|(p, &c)| jsd(p, &means[c])).sum();
    d + lambda * means.len() as f64
}

/// Drop empty clusters, relabelling in order of first appearance of the
/// surviving indices, and recompute every mean.
fn recompute(densities: &[Vec<f64>], z: &mut [usize], k: usize) -> Vec<Vec<f64>> {
    let mut relabel = vec![usize::MAX; k];
    let mut next = 0;
    for c in 0..k {
        if z.contains(&c) {
            relabel[c] = next;
            next += 1;
        }
    }
    for c in z.iter_mut() {
        *c = relabel[*c];
    }
    (0..next)
        .map(|c| mean_density(densities.iter().zip(z.iter()).filter(|(_, &zi)| zi == c).map(|(d, _)| d.as_slice())))
        .collect()
}

/// Hard DP-Means clustering under JSD. All densities start in one cluster
/// at the global mean; each pass visits densities in order, spawning a new
/// cluster at any density farther than `λ` from every mean, then recomputes
/// means. Stops at a fixed point of the assignments or after
/// [`MAX_ITERATIONS`]. Ties go to the lowest cluster index.
pub fn dp_means(densities: &[Vec<f64>], lambda: f64) -> Result<ClusterResult, AnalysisError> {
    check_grid(densities)?;
    if !(lambda >= 0.0) {
        return Err(AnalysisError::EmptyInput("lambda must be non-negative"));
    }
    let mut z = vec![0usize; densities.len()];
    let mut means = vec![mean_density(densities.iter().map(Vec::as_slice))];
    let mut trace = vec![objective(densities, &z, &means, lambda)];
    let mut iterations = 0;
    let mut stopped_on_increase = false;

    while iterations < MAX_ITERATIONS {
        let mut new_z = z.clone();
        let mut new_means = means.clone();
        for (i, d) in densities.iter().enumerate() {
            let (best, dist) = new_means
                .iter()
                .enumerate()
                .map(|(c, m)| (c, jsd(d, m)))
                .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
            if dist > lambda {
                new_means.push(d.clone());
                new_z[i] = new_means.len() - 1;
            } else {
                new_z[i] = best;
            }
        }
        let k = new_means.len();
        let new_means = recompute(densities, &mut new_z, k);
        let obj = objective(densities, &new_z, &new_means, lambda);
        let prev = *trace.last().expect("initial objective");
        if obj > prev + 1e-12 * prev.abs().max(1.0) {
            stopped_on_increase = true;
            break;
        }
        iterations += 1;
        trace.push(obj);
        let fixed = new_z == z;
        z = new_z;
        means = new_means;
        if fixed {
            break;
        }
    }
    Ok(ClusterResult { k: means.len(), assignments: z, means, lambda, iterations, objective: trace, stopped_on_increase })
}
