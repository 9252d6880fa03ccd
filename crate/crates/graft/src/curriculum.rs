//! The teacher: a self-paced re-weighting of graph signals. Each signal's
//! weight minimizes `w * loss + G(w)` over [0, 1], where the regularizer
//! `G(w) = 0.5 * lambda2 * w^2 - (lambda1 + lambda2) * w` admits a closed
//! form: easy signals (loss <= lambda1) get full weight, hard signals
//! (loss >= lambda1 + lambda2) are excluded, and the thresholds grow
//! geometrically so harder signals join as training proceeds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current learning thresholds and their growth schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Growth ratio applied to both thresholds once per pass.
    pub xi: f64,
    pub step: u64,
}

impl CurriculumState {
    pub fn new(lambda1: f64, lambda2: f64, xi: f64) -> Result<Self> {
        if lambda1 <= 0.0 {
            return Err(Error::Param(format!("lambda1 must be positive, got {lambda1}")));
        }
        if lambda2 < 0.0 {
            return Err(Error::Param(format!("lambda2 must be non-negative, got {lambda2}")));
        }
        if xi <= 1.0 {
            return Err(Error::Param(format!("xi must exceed 1, got {xi}")));
        }
        Ok(CurriculumState { lambda1, lambda2, xi, step: 0 })
    }
}

/// Per-signal weights aligned to a batch, each in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SignalWeights {
    pub weights: Vec<f64>,
}

impl SignalWeights {
    pub fn mean(&self) -> f64 {
        if self.weights.is_empty() {
            return 0.0;
        }
        self.weights.iter().sum::<f64>() / self.weights.len() as f64
    }

    /// Fraction of signals with non-zero weight.
    pub fn active_fraction(&self) -> f64 {
        if self.weights.is_empty() {
            return 0.0;
        }
        self.weights.iter().filter(|&&w| w > 0.0).count() as f64 / self.weights.len() as f64
    }
}

/// The curriculum regularizer `G(w) = 0.5*lambda2*w^2 - (lambda1+lambda2)*w`.
pub fn regularizer(w: f64, lambda1: f64, lambda2: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Param(format!("weight must lie in [0,1], got {w}")));
    }
    if lambda1 <= 0.0 || lambda2 < 0.0 {
        return Err(Error::Param("lambda1 must be > 0 and lambda2 >= 0".into()));
    }
    Ok(0.5 * lambda2 * w * w - (lambda1 + lambda2) * w)
}

/// The minimizer of `w*loss + G(w)` over [0, 1]. With lambda2 = 0 this is
/// the hard indicator `loss <= lambda1`; otherwise the soft ramp
/// `min(max(0, 1 - (loss - lambda1)/lambda2), 1)`.
pub fn closed_form_weight(loss: f64, lambda1: f64, lambda2: f64) -> f64 {
    if lambda2 == 0.0 {
        if loss <= lambda1 {
            1.0
        } else {
            0.0
        }
    } else {
        (1.0 - (loss - lambda1) / lambda2).clamp(0.0, 1.0)
    }
}

/// Brute-force minimizer of `w*loss + G(w)` over the grid
/// {0, grid_step, 2*grid_step, ..., 1}. Verification oracle for
/// [`closed_form_weight`]; requires lambda2 > 0.
pub fn oracle_weight(loss: f64, lambda1: f64, lambda2: f64, grid_step: f64) -> Result<f64> {
    if grid_step <= 0.0 {
        return Err(Error::Param(format!("grid_step must be positive, got {grid_step}")));
    }
    if lambda2 <= 0.0 {
        return Err(Error::Param("oracle_weight requires lambda2 > 0".into()));
    }
    let steps = (1.0 / grid_step).round() as usize;
    let mut best_w = 0.0;
    let mut best_obj = f64::INFINITY;
    for k in 0..=steps {
        let w = (k as f64 * grid_step).min(1.0);
        let obj = w * loss + regularizer(w, lambda1, lambda2)?;
        if obj < best_obj {
            best_obj = obj;
            best_w = w;
        }
    }
    Ok(best_w)
}

/// Applies the closed form elementwise. Losses are snapshots: no gradient
/// flows from the weights back into the student objective.
pub fn weight_batch(losses: &[f64], state: &CurriculumState) -> Result<SignalWeights> {
    let bad: Vec<usize> =
        losses.iter().enumerate().filter(|(_, l)| !l.is_finite()).map(|(i, _)| i).collect();
    if !bad.is_empty() {
        return Err(Error::Numerical(format!("non-finite losses at signal indices {bad:?}")));
    }
    let weights =
        losses.iter().map(|&l| closed_form_weight(l, state.lambda1, state.lambda2)).collect();
    Ok(SignalWeights { weights })
}

/// Grows both thresholds by the ratio `xi` and advances the step counter.
pub fn schedule_step(state: &CurriculumState) -> CurriculumState {
    CurriculumState {
        lambda1: state.lambda1 * state.xi,
        lambda2: state.lambda2 * state.xi,
        xi: state.xi,
        step: state.step + 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn regularizer_at_zero_is_zero() {
        assert_eq!(regularizer(0.0, 0.2, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn regularizer_matches_formula() {
        // 0.5*1.0*1 - (0.2+1.0)*1 = -0.7
        assert!((regularizer(1.0, 0.2, 1.0).unwrap() - (-0.7)).abs() < 1e-12);
    }

    #[test]
    fn regularizer_is_convex_in_w() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..500 {
            let l1 = rng.gen_range(1e-3..2.0);
            let l2 = rng.gen_range(0.0..2.0);
            let a = rng.gen_range(0.0..1.0);
            let b = rng.gen_range(0.0..1.0);
            let mid = regularizer(0.5 * (a + b), l1, l2).unwrap();
            let avg = 0.5 * (regularizer(a, l1, l2).unwrap() + regularizer(b, l1, l2).unwrap());
            assert!(mid <= avg + 1e-12);
        }
    }

    #[test]
    fn regularizer_rejects_out_of_domain_weight() {
        assert!(regularizer(1.5, 0.2, 1.0).is_err());
        assert!(regularizer(-0.1, 0.2, 1.0).is_err());
    }

    #[test]
    fn closed_form_indicator_branch() {
        assert_eq!(closed_form_weight(0.1, 0.2, 0.0), 1.0);
        assert_eq!(closed_form_weight(0.3, 0.2, 0.0), 0.0);
    }

    #[test]
    fn closed_form_ramp_midpoint() {
        // (1 - (0.7-0.2)/1.0) = 0.5, confirmed against the grid oracle.
        let w = closed_form_weight(0.7, 0.2, 1.0);
        assert!((w - 0.5).abs() < 1e-12);
        let oracle = oracle_weight(0.7, 0.2, 1.0, 1e-4).unwrap();
        assert!((w - oracle).abs() <= 1e-4);
    }

    #[test]
    fn hard_signals_are_excluded() {
        assert_eq!(closed_form_weight(1.5, 0.2, 1.0), 0.0);
        assert_eq!(closed_form_weight(1.2, 0.2, 1.0), 0.0); // exactly lambda1+lambda2
    }

    #[test]
    fn oracle_easy_and_hard_endpoints() {
        assert_eq!(oracle_weight(0.1, 0.2, 1.0, 1e-3).unwrap(), 1.0);
        assert_eq!(oracle_weight(2.0, 0.2, 1.0, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn oracle_rejects_bad_grid() {
        assert!(oracle_weight(0.5, 0.2, 1.0, 0.0).is_err());
    }

    #[test]
    fn weight_batch_easiest_and_hardest() {
        let state = CurriculumState::new(0.2, 1.0, 1.1).unwrap();
        let all_easy = weight_batch(&[0.0, 0.0, 0.0], &state).unwrap();
        assert!(all_easy.weights.iter().all(|&w| w == 1.0));
        let all_hard = weight_batch(&[1.2, 5.0, 99.0], &state).unwrap();
        assert!(all_hard.weights.iter().all(|&w| w == 0.0));
        assert_eq!(all_hard.active_fraction(), 0.0);
    }

    #[test]
    fn weight_batch_reports_non_finite_indices() {
        let state = CurriculumState::new(0.2, 1.0, 1.1).unwrap();
        let err = weight_batch(&[0.1, f64::NAN, 0.3, f64::INFINITY], &state).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('1') && msg.contains('3'), "{msg}");
    }

    #[test]
    fn weights_non_increasing_in_loss() {
        let state = CurriculumState::new(0.3, 0.8, 1.1).unwrap();
        let losses: Vec<f64> = (0..100).map(|i| i as f64 * 0.02).collect();
        let w = weight_batch(&losses, &state).unwrap();
        for pair in w.weights.windows(2) {
            assert!(pair[0] >= pair[1]);
        }
    }

    #[test]
    fn schedule_multiplies_both_thresholds() {
        let s0 = CurriculumState::new(0.2, 1.0, 1.1).unwrap();
        let s1 = schedule_step(&s0);
        assert!((s1.lambda1 - 0.22).abs() < 1e-12);
        assert!((s1.lambda2 - 1.1).abs() < 1e-12);
        assert_eq!(s1.step, 1);
        assert_eq!(s1.xi, s0.xi);
    }

    #[test]
    fn schedule_near_unit_ratio_barely_moves() {
        let s0 = CurriculumState::new(0.2, 1.0, 1.0 + 1e-12).unwrap();
        let s1 = schedule_step(&s0);
        assert!(s1.lambda1 >= s0.lambda1);
        assert!((s1.lambda1 - s0.lambda1).abs() < 1e-11);
    }

    #[test]
    fn repeated_schedule_is_geometric() {
        let mut s = CurriculumState::new(0.2, 1.0, 1.1).unwrap();
        for _ in 0..30 {
            s = schedule_step(&s);
        }
        let expected = 0.2 * 1.1f64.powi(30);
        assert!((s.lambda1 - expected).abs() / expected < 1e-9);
    }
}
