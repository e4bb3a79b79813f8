//! Weighted point clouds in R^d and pairwise squared-distance matrices.

use crate::error::{Error, Result};

/// A discrete probability measure: `n` support points in R^d with
/// nonnegative weights summing to 1.
///
/// Atoms with weight below 1e-12 are dropped at construction and the
/// remaining weights renormalized, so every stored weight is strictly
/// positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

const ATOM_EPS: f64 = 1e-12;

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("measure needs at least one point".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::InvalidInput("points must have dimension >= 1".into()));
        }
        for p in &points {
            if p.len() != d {
                return Err(Error::InvalidInput(format!(
                    "points mix dimensions {} and {}",
                    d,
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite point coordinate".into()));
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, expected 1")));
        }
        // Drop near-zero atoms, then renormalize.
        let mut kept_points = Vec::with_capacity(points.len());
        let mut kept_weights = Vec::with_capacity(weights.len());
        for (p, w) in points.into_iter().zip(weights) {
            if w >= ATOM_EPS {
                kept_points.push(p);
                kept_weights.push(w);
            }
        }
        if kept_points.is_empty() {
            return Err(Error::InvalidInput("all atoms have negligible weight".into()));
        }
        let kept_total: f64 = kept_weights.iter().sum();
        for w in &mut kept_weights {
            *w /= kept_total;
        }
        Ok(Self { points: kept_points, weights: kept_weights })
    }

    /// Uniform measure on the given points.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidInput("measure needs at least one point".into()));
        }
        let w = vec![1.0 / n as f64; n];
        Self::new(points, w)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees n >= 1
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        let w0 = 1.0 / self.len() as f64;
        self.weights.iter().all(|w| (w - w0).abs() <= 1e-12)
    }
}

/// Pairwise squared Euclidean distances, row-major n x m.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl CostMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Squared Euclidean distance matrix between the supports of `a` and `b`.
pub fn cost_matrix(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<CostMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let (n, m) = (a.len(), b.len());
    let rows = crate::par::map_indexed(n, |i| {
        let mut row = Vec::with_capacity(m);
        for j in 0..m {
            row.push(sq_dist(&a.points()[i], &b.points()[j]));
        }
        row
    });
    let mut entries = Vec::with_capacity(n * m);
    for row in rows {
        entries.extend(row);
    }
    Ok(CostMatrix { entries, rows: n, cols: m })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirac(p: Vec<f64>) -> DiscreteMeasure {
        DiscreteMeasure::new(vec![p], vec![1.0]).unwrap()
    }

    #[test]
    fn self_distance_is_zero() {
        let a = dirac(vec![0.0, 0.0]);
        let c = cost_matrix(&a, &a).unwrap();
        assert_eq!(c.get(0, 0), 0.0);
    }

    #[test]
    fn three_four_five() {
        let a = dirac(vec![0.0, 0.0]);
        let b = dirac(vec![3.0, 4.0]);
        let c = cost_matrix(&a, &b).unwrap();
        assert_eq!(c.get(0, 0), 25.0);
    }

    #[test]
    fn hand_expansion() {
        let a = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let b = dirac(vec![0.0, 1.0]);
        let c = cost_matrix(&a, &b).unwrap();
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(1, 0), 2.0);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let a = dirac(vec![0.0]);
        let b = dirac(vec![0.0, 1.0]);
        assert!(cost_matrix(&a, &b).is_err());
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(DiscreteMeasure::new(vec![vec![0.0]], vec![0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![1.5, -0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![vec![f64::NAN]], vec![1.0]).is_err());
    }

    #[test]
    fn drops_negligible_atoms() {
        let m = DiscreteMeasure::new(
            vec![vec![0.0], vec![1.0]],
            vec![1.0 - 1e-13, 1e-13],
        )
        .unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.weights()[0], 1.0);
    }
}
