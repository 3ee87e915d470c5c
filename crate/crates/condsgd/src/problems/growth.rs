//! Growth-condition diagnostic: fits E‖g‖² ≈ 2𝓛(F(x) − F★) + σ² over a set
//! of probe points and reports the slope 𝓛̂ and intercept σ̂².

use rand::RngCore;

use super::{Problem, ProblemError, Result};
use crate::linalg::{axpy, dot, sym_eigen};

/// Probe points x★ + t·v_max for the given scales, where v_max is the top
/// eigenvector of H. Along that direction the growth bound is tight, which
/// makes the slope identifiable.
pub fn probe_points_along_top_eigenvector(
    problem: &dyn Problem,
    scales: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let gt = problem
        .ground_truth()
        .ok_or_else(|| ProblemError::Ingest("probe generation needs ground truth".into()))?;
    let eigen = sym_eigen(&gt.h)?;
    let d = gt.dim();
    let top = d - 1; // eigenvalues ascending
    Ok(scales
        .iter()
        .map(|&t| {
            let mut x = gt.x_star.clone();
            let v: Vec<f64> = (0..d).map(|i| eigen.vectors[(i, top)]).collect();
            axpy(&mut x, t, &v);
            x
        })
        .collect())
}

/// Least-squares fit of the mean squared gradient norm against
/// 2(F(x) − F★) over the probe points. Returns (𝓛̂, σ̂²).
pub fn estimate_growth_constants(
    problem: &dyn Problem,
    probe_points: &[Vec<f64>],
    samples_per_point: usize,
    rng: &mut dyn RngCore,
) -> Result<(f64, f64)> {
    let gt = problem
        .ground_truth()
        .ok_or_else(|| ProblemError::Ingest("growth estimation needs F★".into()))?;
    let mut xs = Vec::with_capacity(probe_points.len());
    let mut ys = Vec::with_capacity(probe_points.len());
    for x in probe_points {
        let excess = problem.loss(x) - gt.f_star;
        let mut mean_sq = 0.0;
        for _ in 0..samples_per_point {
            let g = problem.gradient_sample(x, rng);
            mean_sq += dot(&g.value, &g.value) / samples_per_point as f64;
        }
        xs.push(2.0 * excess);
        ys.push(mean_sq);
    }

    let distinct = {
        let mut sorted = xs.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted.windows(2).filter(|w| (w[1] - w[0]).abs() > 1e-12).count() + 1
    };
    if distinct < 2 {
        return Err(ProblemError::DegenerateProbes);
    }

    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    Ok((slope, intercept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{GroundTruth, QuadraticProblem};
    use crate::Matrix64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_slope_and_intercept_recovered() {
        // H = I, Γ = I: E‖g‖² = ‖x − x★‖² + d = 2(F − F★)·1 + d
        let d = 3;
        let gt = GroundTruth::new(
            vec![0.0; d],
            Matrix64::identity(d),
            Matrix64::identity(d),
            0.0,
        )
        .unwrap();
        let p = QuadraticProblem::new(gt).unwrap();
        let probes = probe_points_along_top_eigenvector(&p, &[0.5, 1.0, 2.0, 4.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (slope, intercept) = estimate_growth_constants(&p, &probes, 10_000, &mut rng).unwrap();
        assert!((slope - 1.0).abs() < 0.1, "slope {slope}");
        assert!((intercept - d as f64).abs() < 0.1 * d as f64, "intercept {intercept}");
    }

    #[test]
    fn zero_noise_intercept_is_zero() {
        let d = 2;
        let gt = GroundTruth::new(
            vec![0.0; d],
            Matrix64::identity(d),
            Matrix64::zeros(d, d),
            0.0,
        )
        .unwrap();
        let p = QuadraticProblem::new(gt).unwrap();
        let probes = probe_points_along_top_eigenvector(&p, &[1.0, 2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (slope, intercept) = estimate_growth_constants(&p, &probes, 10, &mut rng).unwrap();
        assert!((slope - 1.0).abs() < 1e-8);
        assert!(intercept.abs() < 1e-8);
    }

    #[test]
    fn single_loss_level_is_rejected() {
        let d = 2;
        let gt = GroundTruth::new(
            vec![0.0; d],
            Matrix64::identity(d),
            Matrix64::identity(d),
            0.0,
        )
        .unwrap();
        let p = QuadraticProblem::new(gt).unwrap();
        // two probes at the same distance from x★ share one loss level
        let probes = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(matches!(
            estimate_growth_constants(&p, &probes, 10, &mut rng),
            Err(ProblemError::DegenerateProbes)
        ));
    }
}
