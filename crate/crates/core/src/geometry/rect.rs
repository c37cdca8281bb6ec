use serde::{Deserialize, Serialize};

use super::GeometryError;

/// An axis-aligned box inside the unit cube `[0, 1]^d`.
///
/// Cells are half-open: a point `x` belongs to the rect iff
/// `low[i] <= x[i] < high[i]` for every axis, except that a face at
/// exactly `1.0` is closed so a family of rects can tile all of
/// `[0, 1]^d` without gaps or double coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl Rect {
    /// Builds a rect, rejecting empty, inverted, non-finite, or
    /// out-of-cube intervals.
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self, GeometryError> {
        if low.len() != high.len() || low.is_empty() {
            return Err(GeometryError::DimMismatch {
                expected: low.len().max(1),
                got: high.len(),
            });
        }
        for dim in 0..low.len() {
            let (lo, hi) = (low[dim], high[dim]);
            if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi > 1.0 {
                return Err(GeometryError::OutOfCube { dim, low: lo, high: hi });
            }
            if lo >= hi {
                return Err(GeometryError::EmptyInterval { dim, low: lo, high: hi });
            }
        }
        Ok(Rect { low, high })
    }

    /// The whole unit cube.
    pub fn unit(dims: usize) -> Self {
        assert!(dims >= 1, "rects need at least one dimension");
        Rect {
            low: vec![0.0; dims],
            high: vec![1.0; dims],
        }
    }

    pub fn dims(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn volume(&self) -> f64 {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(lo, hi)| hi - lo)
            .product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    /// Membership under the half-open convention (closed top face at 1.0).
    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dims());
        self.low.iter().zip(&self.high).zip(x).all(|((lo, hi), xi)| {
            let upper_ok = if *hi == 1.0 { *xi <= 1.0 } else { *xi < *hi };
            *xi >= *lo && upper_ok
        })
    }

    /// Intersection with positive volume, or `None` when the rects only
    /// touch or are disjoint. Zero-volume slivers are never produced.
    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        debug_assert_eq!(self.dims(), other.dims());
        let mut low = Vec::with_capacity(self.dims());
        let mut high = Vec::with_capacity(self.dims());
        for dim in 0..self.dims() {
            let lo = self.low[dim].max(other.low[dim]);
            let hi = self.high[dim].min(other.high[dim]);
            if lo >= hi {
                return None;
            }
            low.push(lo);
            high.push(hi);
        }
        Some(Rect { low, high })
    }

    /// Translates the rect by `delta` and clips the result to the unit
    /// cube. Returns `None` when nothing with positive volume remains.
    pub fn shift_clip(&self, delta: &[f64]) -> Option<Rect> {
        debug_assert_eq!(delta.len(), self.dims());
        let mut low = Vec::with_capacity(self.dims());
        let mut high = Vec::with_capacity(self.dims());
        for dim in 0..self.dims() {
            let lo = (self.low[dim] + delta[dim]).max(0.0);
            let hi = (self.high[dim] + delta[dim]).min(1.0);
            if lo >= hi {
                return None;
            }
            low.push(lo);
            high.push(hi);
        }
        Some(Rect { low, high })
    }

    /// True when `other` lies entirely inside `self`.
    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.low
            .iter()
            .zip(&self.high)
            .zip(other.low.iter().zip(&other.high))
            .all(|((slo, shi), (olo, ohi))| slo <= olo && ohi <= shi)
    }

    /// True when the interiors are disjoint (touching faces count as
    /// disjoint).
    pub fn disjoint(&self, other: &Rect) -> bool {
        (0..self.dims())
            .any(|dim| self.high[dim] <= other.low[dim] || other.high[dim] <= self.low[dim])
    }

    pub(crate) fn with_bound(&self, dim: usize, at: f64, take_low: bool) -> Rect {
        let mut r = self.clone();
        if take_low {
            r.high[dim] = at;
        } else {
            r.low[dim] = at;
        }
        r
    }

    pub(crate) fn check_point(x: &[f64]) -> Result<(), GeometryError> {
        for (dim, &xi) in x.iter().enumerate() {
            if !xi.is_finite() || !(0.0..=1.0).contains(&xi) {
                return Err(GeometryError::PointOutOfDomain { dim, value: xi });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_intervals() {
        assert!(Rect::new(vec![0.0], vec![0.0]).is_err());
        assert!(Rect::new(vec![0.5], vec![0.2]).is_err());
        assert!(Rect::new(vec![-0.1], vec![0.5]).is_err());
        assert!(Rect::new(vec![0.0], vec![1.1]).is_err());
        assert!(Rect::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(Rect::new(vec![0.0], vec![f64::NAN]).is_err());
    }

    #[test]
    fn membership_is_half_open_with_closed_top() {
        let r = Rect::new(vec![0.2, 0.0], vec![0.6, 1.0]).unwrap();
        assert!(r.contains(&[0.2, 0.0]));
        assert!(!r.contains(&[0.6, 0.0]));
        assert!(r.contains(&[0.3, 1.0]));
        let top = Rect::new(vec![0.5], vec![1.0]).unwrap();
        assert!(top.contains(&[1.0]));
    }

    #[test]
    fn shift_clip_identity_and_clipping() {
        let r = Rect::new(vec![0.2, 0.2], vec![0.4, 0.4]).unwrap();
        assert_eq!(r.shift_clip(&[0.0, 0.0]).unwrap(), r);

        let shifted = r.shift_clip(&[-0.3, 0.0]).unwrap();
        assert_eq!(shifted.low(), &[0.0, 0.2]);
        let hi = shifted.high();
        assert!((hi[0] - 0.1).abs() < 1e-15 && hi[1] == 0.4);

        assert!(r.shift_clip(&[-0.5, 0.0]).is_none());
    }

    #[test]
    fn zero_volume_intersections_are_discarded() {
        let a = Rect::new(vec![0.0], vec![0.5]).unwrap();
        let b = Rect::new(vec![0.5], vec![1.0]).unwrap();
        assert!(a.intersection(&b).is_none());
        assert!(a.disjoint(&b));
    }
}
