//! Weighted averaging of past Hessian estimates:
//! Φ_k = Σ_j ν_{j,k} H_j with ν_{j,k} ∝ exp(−η‖x_j − x_k‖₁).

use super::{OptimizerError, Result, Schedule, Weighting};
use crate::linalg::{l1_distance, Matrix};
use crate::scalar::{real, Real};

/// Ordered (x_j, H_j) pairs, optionally truncated to a sliding window.
/// Equal-weight runs do not need the history at all (the caller keeps a
/// running mean instead); this exists for the adaptive mode and for oracle
/// recomputation in tests.
#[derive(Debug, Clone)]
pub struct HessianHistory<R> {
    entries: Vec<(Vec<R>, Matrix<R>)>,
    window: Option<usize>,
}

impl<R: Real> HessianHistory<R> {
    pub fn new(window: Option<usize>) -> Self {
        Self {
            entries: Vec::new(),
            window,
        }
    }

    pub fn push(&mut self, x: Vec<R>, h: Matrix<R>) {
        self.entries.push((x, h));
        if let Some(w) = self.window {
            if self.entries.len() > w {
                let excess = self.entries.len() - w;
                self.entries.drain(..excess);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Vec<R>, Matrix<R>)] {
        &self.entries
    }

    /// Normalized weights of the stored entries relative to the current
    /// iterate. The exponent is max-shifted (smallest L1 distance subtracted)
    /// so large η·distance products cannot underflow every weight to zero.
    pub fn weights(&self, x_k: &[R], s: &Schedule) -> Result<Vec<R>> {
        if self.entries.is_empty() {
            return Err(OptimizerError::EmptyHistory);
        }
        let n = self.entries.len();
        match s.weighting {
            Weighting::Equal => Ok(vec![R::one() / real::<R>(n as f64); n]),
            Weighting::Adaptive => {
                let eta = real::<R>(s.eta);
                let dists: Vec<R> = self
                    .entries
                    .iter()
                    .map(|(xj, _)| l1_distance(xj, x_k))
                    .collect();
                let min = dists.iter().fold(R::infinity(), |m, &d| m.min(d));
                let mut weights: Vec<R> =
                    dists.iter().map(|&d| (-eta * (d - min)).exp()).collect();
                let total: R = weights.iter().copied().sum();
                for w in &mut weights {
                    *w /= total;
                }
                Ok(weights)
            }
        }
    }
}

/// Φ_k = Σ_j ν_{j,k} H_j, symmetrized. The naive O(k·d²) recomputation; the
/// run loop uses this for adaptive weights and a running mean for equal
/// weights.
pub fn weighted_phi<R: Real>(
    history: &HessianHistory<R>,
    x_k: &[R],
    s: &Schedule,
) -> Result<Matrix<R>> {
    let weights = history.weights(x_k, s)?;
    let d = history.entries()[0].1.rows();
    let mut phi: Matrix<R> = Matrix::zeros(d, d);
    // entries whose normalized weight is below 1e-18 contribute less than
    // ~1e-15 total mass combined; skipping them keeps the sum O(effective
    // support) instead of O(k)
    let cutoff = real::<R>(1e-18);
    for ((_, h), &w) in history.entries().iter().zip(&weights) {
        if w < cutoff {
            continue;
        }
        for i in 0..d {
            for j in 0..d {
                phi[(i, j)] += h[(i, j)] * w;
            }
        }
    }
    let half = real::<R>(0.5);
    Ok(Matrix::from_fn(d, d, |i, j| {
        (phi[(i, j)] + phi[(j, i)]) * half
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{GammaRule, Weighting};
    use crate::Matrix64;

    fn schedule(eta: f64, weighting: Weighting) -> Schedule {
        Schedule::new(1.0, 1.0, GammaRule::SqrtK, eta, weighting).unwrap()
    }

    #[test]
    fn empty_history_is_an_error() {
        let h = HessianHistory::<f64>::new(None);
        assert!(matches!(
            weighted_phi(&h, &[0.0], &schedule(1.0, Weighting::Adaptive)),
            Err(OptimizerError::EmptyHistory)
        ));
    }

    #[test]
    fn identical_positions_collapse_to_uniform() {
        let mut h = HessianHistory::new(None);
        let a = Matrix64::diagonal(&[2.0, 0.0]);
        let b = Matrix64::diagonal(&[0.0, 4.0]);
        h.push(vec![1.0, 1.0], a.clone());
        h.push(vec![1.0, 1.0], b.clone());
        let phi = weighted_phi(&h, &[1.0, 1.0], &schedule(5.0, Weighting::Adaptive)).unwrap();
        let mean = a.add(&b).unwrap().scale(0.5);
        assert!(phi.sub(&mean).unwrap().frobenius_norm() < 1e-15);
    }

    #[test]
    fn zero_eta_gives_uniform_weights() {
        let mut h = HessianHistory::new(None);
        h.push(vec![10.0], Matrix64::diagonal(&[1.0]));
        h.push(vec![-3.0], Matrix64::diagonal(&[5.0]));
        let phi = weighted_phi(&h, &[0.0], &schedule(0.0, Weighting::Adaptive)).unwrap();
        assert!((phi[(0, 0)] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn ln2_distance_by_hand() {
        // ‖x₀−x_k‖₁ = ln 2, ‖x₁−x_k‖₁ = 0, η = 1 → weights (1/3, 2/3)
        let mut h = HessianHistory::new(None);
        let a = Matrix64::diagonal(&[3.0, 3.0]);
        let b = Matrix64::diagonal(&[6.0, 6.0]);
        h.push(vec![2f64.ln(), 0.0], a.clone());
        h.push(vec![0.0, 0.0], b.clone());
        let phi = weighted_phi(&h, &[0.0, 0.0], &schedule(1.0, Weighting::Adaptive)).unwrap();
        // (A + 2B)/3
        let expect = a.add(&b.scale(2.0)).unwrap().scale(1.0 / 3.0);
        assert!(phi.sub(&expect).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn weights_normalize_and_stay_nonnegative() {
        let mut h = HessianHistory::new(None);
        for j in 0..20 {
            h.push(vec![j as f64 * 100.0], Matrix64::identity(1));
        }
        // huge η·distance products must not underflow to an all-zero sum
        let w = h.weights(&[1900.0], &schedule(50.0, Weighting::Adaptive)).unwrap();
        let sum: f64 = w.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
        assert!(w.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn window_truncates_oldest() {
        let mut h = HessianHistory::new(Some(3));
        for j in 0..10 {
            h.push(vec![j as f64], Matrix64::diagonal(&[j as f64]));
        }
        assert_eq!(h.len(), 3);
        assert_eq!(h.entries()[0].0, vec![7.0]);
    }
}
