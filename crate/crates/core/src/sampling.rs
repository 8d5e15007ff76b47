//! Reproducible stratified Monte Carlo over axis-aligned space-time windows.
//!
//! The window is cut into equal cells; each cell draws its points from its
//! own ChaCha stream, so results depend only on the seed and the cell layout,
//! never on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::AxisBox;
use crate::error::{Error, Result};

/// Monte Carlo estimate with its one-sigma standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.value - target).abs() <= sigmas * self.std_error
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratifiedSampler {
    /// Space-time window, spatial axes first.
    pub window: AxisBox,
    pub cells_per_axis: Vec<usize>,
    pub per_cell: usize,
    pub seed: u64,
}

/// A sample point with its cell index.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePoint {
    pub x: Vec<f64>,
    pub t: f64,
    pub cell: usize,
}

impl StratifiedSampler {
    /// Splits `budget` points over roughly `cells` equal cells.
    pub fn with_budget(window: AxisBox, budget: usize, cells: usize, seed: u64) -> Result<StratifiedSampler> {
        let d = window.lo.len();
        let per_axis = ((cells.max(1) as f64).powf(1.0 / d as f64).floor() as usize).max(1);
        let count = per_axis.pow(d as u32);
        let s = StratifiedSampler { window, cells_per_axis: vec![per_axis; d], per_cell: (budget / count).max(2), seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.window.lo.len();
        if d < 2 || self.window.hi.len() != d || self.cells_per_axis.len() != d {
            return Err(Error::invalid("sampler window and cell layout need matching dimensions >= 2"));
        }
        if self.window.lo.iter().zip(&self.window.hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::invalid("sampler window must be finite and nonempty"));
        }
        if self.cells_per_axis.contains(&0) || self.per_cell < 2 {
            return Err(Error::invalid("sampler needs >= 1 cell per axis and >= 2 points per cell"));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_axis.iter().product()
    }

    pub fn total(&self) -> usize {
        self.cell_count() * self.per_cell
    }

    pub fn cell_volume(&self) -> f64 {
        self.window.volume() / self.cell_count() as f64
    }

    pub fn cell(&self, index: usize) -> AxisBox {
        let d = self.cells_per_axis.len();
        let mut lo = vec![0.0; d];
        let mut hi = vec![0.0; d];
        let mut rest = index;
        for k in (0..d).rev() {
            let m = self.cells_per_axis[k];
            let i = rest % m;
            rest /= m;
            let w = (self.window.hi[k] - self.window.lo[k]) / m as f64;
            lo[k] = self.window.lo[k] + i as f64 * w;
            hi[k] = if i + 1 == m { self.window.hi[k] } else { self.window.lo[k] + (i + 1) as f64 * w };
        }
        AxisBox { lo, hi }
    }

    /// The points of one cell, from that cell's own stream.
    pub fn cell_points(&self, index: usize) -> Vec<SamplePoint> {
        let b = self.cell(index);
        let d = b.lo.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        (0..self.per_cell)
            .map(|_| {
                let v: Vec<f64> = (0..d).map(|k| b.lo[k] + rng.random::<f64>() * (b.hi[k] - b.lo[k])).collect();
                SamplePoint { t: v[d - 1], x: v[..d - 1].to_vec(), cell: index }
            })
            .collect()
    }

    /// All points, cell by cell.
    pub fn points(&self) -> Vec<SamplePoint> {
        (0..self.cell_count()).into_par_iter().map(|c| self.cell_points(c)).collect::<Vec<_>>().concat()
    }

    /// Stratified integral of `values` (one per point of [`Self::points`]);
    /// points outside the integration set should carry 0.
    pub fn integrate(&self, values: &[f64]) -> Estimate {
        assert_eq!(values.len(), self.total());
        let vol = self.cell_volume();
        let n = self.per_cell as f64;
        let (mut total, mut var) = (0.0, 0.0);
        for chunk in values.chunks(self.per_cell) {
            let mean = chunk.iter().sum::<f64>() / n;
            let ss = chunk.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            total += vol * mean;
            var += vol * vol * ss / n;
        }
        Estimate { value: total, std_error: var.sqrt() }
    }

    /// Measures of the classes produced by `classify` (`None` for points
    /// outside every class).
    pub fn class_measures<F>(&self, classes: usize, classify: F) -> Vec<Estimate>
    where
        F: Fn(&[f64], f64) -> Option<usize> + Sync,
    {
        let per_cell: Vec<Vec<usize>> = (0..self.cell_count())
            .into_par_iter()
            .map(|c| {
                let mut hits = vec![0usize; classes];
                for p in self.cell_points(c) {
                    if let Some(k) = classify(&p.x, p.t) {
                        hits[k] += 1;
                    }
                }
                hits
            })
            .collect();
        let vol = self.cell_volume();
        let n = self.per_cell as f64;
        (0..classes)
            .map(|k| {
                let (mut total, mut var) = (0.0, 0.0);
                for hits in &per_cell {
                    let frac = hits[k] as f64 / n;
                    total += vol * frac;
                    var += vol * vol * frac * (1.0 - frac) / (n - 1.0);
                }
                Estimate { value: total, std_error: var.sqrt() }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> AxisBox {
        AxisBox::new(vec![-1.0, 0.0], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn cells_tile_the_window() {
        let s = StratifiedSampler { window: unit(), cells_per_axis: vec![3, 4], per_cell: 5, seed: 1 };
        let total: f64 = (0..s.cell_count()).map(|c| s.cell(c).volume()).sum();
        assert!((total - 2.0).abs() < 1e-12);
        for c in 0..s.cell_count() {
            let b = s.cell(c);
            for p in s.cell_points(c) {
                assert!(b.lo[0] <= p.x[0] && p.x[0] <= b.hi[0] && b.lo[1] <= p.t && p.t <= b.hi[1]);
            }
        }
    }

    #[test]
    fn reproducible_and_seed_dependent() {
        let a = StratifiedSampler::with_budget(unit(), 1000, 16, 3).unwrap();
        let b = StratifiedSampler::with_budget(unit(), 1000, 16, 3).unwrap();
        let c = StratifiedSampler::with_budget(unit(), 1000, 16, 4).unwrap();
        assert_eq!(a.points(), b.points());
        assert_ne!(a.points(), c.points());
    }

    #[test]
    fn integrates_polynomials_within_error() {
        let s = StratifiedSampler::with_budget(unit(), 40_000, 64, 11).unwrap();
        let vals: Vec<f64> = s.points().iter().map(|p| p.x[0] * p.x[0] + p.t).collect();
        let e = s.integrate(&vals);
        // ∫∫ x^2 + t over (-1,1) x (0,1) = 2/3 + 1
        assert!(e.within(5.0 / 3.0, 4.0), "{e:?}");
        assert!(e.std_error < 5e-3);
        let m = s.class_measures(2, |x, t| Some(usize::from(x[0] + t > 0.5)));
        assert!((m[0].value + m[1].value - 2.0).abs() < 1e-12);
        // the complement {x + t <= 1/2} has area ∫ (3/2 - t) dt = 1
        assert!(m[1].within(1.0, 4.0), "{:?}", m[1]);
    }
}
