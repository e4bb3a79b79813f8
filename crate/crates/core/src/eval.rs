//! Accuracy-vs-budget curves and their normalized area.
//!
//! The area statistic is the trapezoid integral of adversarial accuracy
//! over the budget range, divided by the maximum budget, so it lives in
//! [0,1] and equals 1 only for a perfectly robust classifier.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AccuracyCurve {
    pub points: Vec<CurvePoint>,
    pub test_size: usize,
    #[serde(default)]
    pub model_tag: String,
    #[serde(default)]
    pub attack_tag: String,
}

impl AccuracyCurve {
    /// Budgets must start at 0 and increase strictly; accuracies in [0,1].
    pub fn new(points: Vec<CurvePoint>, test_size: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("curve has no points".into()));
        }
        if points[0].epsilon != 0.0 {
            return Err(Error::InvalidInput("curve must start at epsilon 0".into()));
        }
        for pair in points.windows(2) {
            if !(pair[1].epsilon > pair[0].epsilon) {
                return Err(Error::InvalidInput("budgets must increase strictly".into()));
            }
        }
        for p in &points {
            if !p.epsilon.is_finite() || !(0.0..=1.0).contains(&p.accuracy) {
                return Err(Error::InvalidInput(format!(
                    "invalid curve point ({}, {})",
                    p.epsilon, p.accuracy
                )));
            }
        }
        Ok(AccuracyCurve {
            points,
            test_size,
            model_tag: String::new(),
            attack_tag: String::new(),
        })
    }

    pub fn with_tags(mut self, model_tag: &str, attack_tag: &str) -> Self {
        self.model_tag = model_tag.into();
        self.attack_tag = attack_tag.into();
        self
    }

    pub fn clean_accuracy(&self) -> f64 {
        self.points[0].accuracy
    }

    fn accuracy_at(&self, epsilon: f64) -> Option<f64> {
        let last = self.points.last().unwrap();
        if epsilon > last.epsilon {
            return None;
        }
        for pair in self.points.windows(2) {
            if epsilon <= pair[1].epsilon {
                let t = (epsilon - pair[0].epsilon) / (pair[1].epsilon - pair[0].epsilon);
                return Some(pair[0].accuracy + t * (pair[1].accuracy - pair[0].accuracy));
            }
        }
        Some(last.accuracy)
    }
}

/// Curve from per-budget bounded attack outcomes. A sample counts as
/// accurate at budget eps only if it is clean-correct and the attack at
/// that budget failed.
pub fn curve_from_bounded_sweep(
    clean_correct: &[bool],
    sweeps: &[(f64, Vec<bool>)],
) -> Result<AccuracyCurve> {
    let n = clean_correct.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty test set".into()));
    }
    let clean_acc = clean_correct.iter().filter(|&&c| c).count() as f64 / n as f64;
    let mut points = vec![CurvePoint { epsilon: 0.0, accuracy: clean_acc }];
    for (eps, successes) in sweeps {
        if successes.len() != n {
            return Err(Error::InvalidInput(format!(
                "sweep at epsilon {eps} covers {} samples, test set has {n}",
                successes.len()
            )));
        }
        if *eps == 0.0 {
            continue;
        }
        let correct = clean_correct
            .iter()
            .zip(successes)
            .filter(|(&c, &s)| c && !s)
            .count();
        points.push(CurvePoint { epsilon: *eps, accuracy: correct as f64 / n as f64 });
    }
    AccuracyCurve::new(points, n)
}

/// Curve from per-sample minimal perturbation sizes evaluated on a budget
/// grid. Infinite sizes mean the attack never succeeded. Clean-incorrect
/// samples count as 0 at every budget.
pub fn curve_from_min_perturbations(
    clean_correct: &[bool],
    min_sizes: &[f64],
    grid: &[f64],
) -> Result<AccuracyCurve> {
    let n = clean_correct.len();
    if n == 0 || min_sizes.len() != n {
        return Err(Error::InvalidInput("size list must match test set".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &eps in grid {
        let correct = clean_correct
            .iter()
            .zip(min_sizes)
            .filter(|(&c, &s)| c && s > eps)
            .count();
        points.push(CurvePoint { epsilon: eps, accuracy: correct as f64 / n as f64 });
    }
    AccuracyCurve::new(points, n)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuacReport {
    pub auac: f64,
    pub epsilon_max: f64,
    pub clean_accuracy: f64,
    pub grid: Vec<f64>,
    pub held_last: bool,
    /// Integration rule identifier; only the trapezoid rule is implemented.
    pub rule: String,
}

/// Normalized area under the accuracy curve on [0, epsilon_max].
///
/// If the curve stops short of epsilon_max the last accuracy is held
/// constant when `hold_last` is set, otherwise this is an error. A curve
/// extending past epsilon_max is cut with linear interpolation.
pub fn auac(curve: &AccuracyCurve, epsilon_max: f64, hold_last: bool) -> Result<AuacReport> {
    if !(epsilon_max > 0.0) {
        return Err(Error::InvalidInput("epsilon_max must be positive".into()));
    }
    let mut pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| p.epsilon < epsilon_max)
        .map(|p| (p.epsilon, p.accuracy))
        .collect();
    let mut held_last = false;
    match curve.accuracy_at(epsilon_max) {
        Some(acc) => pts.push((epsilon_max, acc)),
        None => {
            if !hold_last {
                return Err(Error::InvalidInput(format!(
                    "curve ends at {} before epsilon_max {epsilon_max}; \
                     pass hold_last to extend it",
                    curve.points.last().unwrap().epsilon
                )));
            }
            held_last = true;
            pts.push((epsilon_max, curve.points.last().unwrap().accuracy));
        }
    }
    let mut area = 0.0;
    for pair in pts.windows(2) {
        area += 0.5 * (pair[0].1 + pair[1].1) * (pair[1].0 - pair[0].0);
    }
    Ok(AuacReport {
        auac: area / epsilon_max,
        epsilon_max,
        clean_accuracy: curve.clean_accuracy(),
        grid: curve.points.iter().map(|p| p.epsilon).collect(),
        held_last,
        rule: "trapezoid".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn curve(pts: &[(f64, f64)]) -> AccuracyCurve {
        AccuracyCurve::new(
            pts.iter().map(|&(e, a)| CurvePoint { epsilon: e, accuracy: a }).collect(),
            100,
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(AccuracyCurve::new(vec![], 10).is_err());
        assert!(AccuracyCurve::new(
            vec![CurvePoint { epsilon: 0.1, accuracy: 0.5 }],
            10
        )
        .is_err());
        assert!(curve_from_min_perturbations(&[true], &[0.5], &[0.0, 0.1, 0.1]).is_err());
    }

    #[test]
    fn two_segment_oracle() {
        // Acc 1.0 on [0, 0.5] then linear down to 0 at 1.0: area = 0.5 + 0.25.
        let c = curve(&[(0.0, 1.0), (0.5, 1.0), (1.0, 0.0)]);
        let r = auac(&c, 1.0, false).unwrap();
        assert_relative_eq!(r.auac, 0.75, max_relative = 1e-12);
    }

    #[test]
    fn perfect_curve_scores_one() {
        let c = curve(&[(0.0, 1.0), (1.0, 1.0)]);
        assert_relative_eq!(auac(&c, 1.0, false).unwrap().auac, 1.0);
    }

    #[test]
    fn interpolates_when_grid_overshoots() {
        let c = curve(&[(0.0, 1.0), (2.0, 0.0)]);
        // On [0,1] the curve falls linearly 1.0 -> 0.5; area 0.75.
        let r = auac(&c, 1.0, false).unwrap();
        assert_relative_eq!(r.auac, 0.75, max_relative = 1e-12);
        assert!(!r.held_last);
    }

    #[test]
    fn hold_last_extends_short_curves() {
        let c = curve(&[(0.0, 1.0), (0.5, 0.5)]);
        assert!(auac(&c, 1.0, false).is_err());
        let r = auac(&c, 1.0, true).unwrap();
        // Trapezoid on [0,0.5] = 0.375, held 0.5 on [0.5,1] = 0.25.
        assert_relative_eq!(r.auac, 0.625, max_relative = 1e-12);
        assert!(r.held_last);
    }

    #[test]
    fn dominance_is_preserved() {
        let hi = curve(&[(0.0, 0.9), (0.5, 0.8), (1.0, 0.6)]);
        let lo = curve(&[(0.0, 0.9), (0.5, 0.5), (1.0, 0.1)]);
        assert!(auac(&hi, 1.0, false).unwrap().auac > auac(&lo, 1.0, false).unwrap().auac);
    }

    #[test]
    fn bounded_sweep_counts_clean_errors_as_zero() {
        let clean = [true, true, false, true];
        let sweeps = vec![
            (0.1, vec![false, true, false, false]),
            (0.2, vec![true, true, false, false]),
        ];
        let c = curve_from_bounded_sweep(&clean, &sweeps).unwrap();
        assert_eq!(c.points[0].accuracy, 0.75);
        assert_eq!(c.points[1].accuracy, 0.5);
        assert_eq!(c.points[2].accuracy, 0.25);
    }

    #[test]
    fn min_perturbation_curve_is_strict_threshold() {
        let clean = [true, true, true, false];
        let sizes = [0.1, 0.2, f64::INFINITY, 0.05];
        let c = curve_from_min_perturbations(&clean, &sizes, &[0.0, 0.1, 0.3]).unwrap();
        // size > eps counts: at 0 all three clean-correct, at 0.1 two
        // (strict), at 0.3 only the unbroken one.
        assert_eq!(c.points[0].accuracy, 0.75);
        assert_eq!(c.points[1].accuracy, 0.5);
        assert_eq!(c.points[2].accuracy, 0.25);
    }

    #[test]
    fn curves_from_both_styles_agree_on_shared_grid() {
        // Bounded success at eps iff min size <= eps, for monotone attacks.
        let clean = [true; 5];
        let sizes = [0.05, 0.15, 0.25, 0.35, f64::INFINITY];
        let grid = [0.0, 0.1, 0.2, 0.3, 0.4];
        let from_sizes = curve_from_min_perturbations(&clean, &sizes, &grid).unwrap();
        let sweeps: Vec<(f64, Vec<bool>)> = grid[1..]
            .iter()
            .map(|&e| (e, sizes.iter().map(|&s| s <= e).collect()))
            .collect();
        let from_sweep = curve_from_bounded_sweep(&clean, &sweeps).unwrap();
        for (a, b) in from_sizes.points.iter().zip(&from_sweep.points) {
            assert_eq!(a.accuracy, b.accuracy);
        }
    }
}
