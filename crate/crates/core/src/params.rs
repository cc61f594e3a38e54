//! Parameter points, domain boxes and structured parameter grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the model's parameter domain (dimensionless couplings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    coords: Vec<f64>,
}

impl ParameterPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config(format!(
                "parameter coordinates must be finite, got {coords:?}"
            )));
        }
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

impl std::ops::Index<usize> for ParameterPoint {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

impl std::fmt::Display for ParameterPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl From<&[f64]> for ParameterPoint {
    fn from(coords: &[f64]) -> Self {
        Self::new(coords.to_vec()).expect("finite coordinates")
    }
}

impl<const D: usize> From<[f64; D]> for ParameterPoint {
    fn from(coords: [f64; D]) -> Self {
        Self::new(coords.to_vec()).expect("finite coordinates")
    }
}

/// Axis-aligned bounding box of the admissible parameter domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                context: "domain box bounds",
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::Config(format!(
                "domain box requires lo <= hi per axis, got lo={lo:?} hi={hi:?}"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Containment with a tiny relative slack so grid endpoints generated by
    /// floating-point arithmetic are not rejected.
    pub fn contains(&self, p: &ParameterPoint) -> bool {
        p.dim() == self.dim()
            && p.coords().iter().enumerate().all(|(i, &c)| {
                let slack = 1e-12 * (1.0 + self.hi[i].abs().max(self.lo[i].abs()));
                c >= self.lo[i] - slack && c <= self.hi[i] + slack
            })
    }

    pub fn check_contains(&self, p: &ParameterPoint) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutsideDomain {
                point: p.coords().to_vec(),
                lo: self.lo.clone(),
                hi: self.hi.clone(),
            })
        }
    }
}

/// Cartesian-product grid of parameter points.
///
/// Iteration order is row-major over the axes: the first axis varies slowest,
/// the last axis fastest. Points are unique by construction (each axis holds
/// strictly increasing values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    axes: Vec<Vec<f64>>,
    domain: DomainBox,
}

impl ParameterGrid {
    /// Grid with `counts[i]` uniformly spaced values per axis, endpoints
    /// included (a single count places the point at the axis midpoint).
    pub fn uniform(domain: &DomainBox, counts: &[usize]) -> Result<Self> {
        if counts.len() != domain.dim() {
            return Err(Error::DimensionMismatch {
                context: "grid axis counts",
                expected: domain.dim(),
                found: counts.len(),
            });
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::Config("grid axis counts must be positive".into()));
        }
        let axes = counts
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let (lo, hi) = (domain.lo[i], domain.hi[i]);
                if n == 1 {
                    vec![0.5 * (lo + hi)]
                } else {
                    (0..n)
                        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                        .collect()
                }
            })
            .collect();
        Self::from_axes(axes, domain.clone())
    }

    pub fn from_axes(axes: Vec<Vec<f64>>, domain: DomainBox) -> Result<Self> {
        if axes.len() != domain.dim() {
            return Err(Error::DimensionMismatch {
                context: "grid axes",
                expected: domain.dim(),
                found: axes.len(),
            });
        }
        for (i, axis) in axes.iter().enumerate() {
            if axis.is_empty() {
                return Err(Error::Config(format!("grid axis {i} is empty")));
            }
            if axis.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Config(format!(
                    "grid axis {i} must be strictly increasing: {axis:?}"
                )));
            }
            for &v in axis {
                let p = ParameterPoint::new(vec![v])?;
                let _ = p;
                let slack = 1e-12 * (1.0 + domain.hi[i].abs().max(domain.lo[i].abs()));
                if v < domain.lo[i] - slack || v > domain.hi[i] + slack {
                    return Err(Error::Config(format!(
                        "grid axis {i} value {v} lies outside the domain [{}, {}]",
                        domain.lo[i], domain.hi[i]
                    )));
                }
            }
        }
        Ok(Self { axes, domain })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The `index`-th point in row-major order.
    pub fn point(&self, index: usize) -> ParameterPoint {
        assert!(index < self.len(), "grid index out of range");
        let mut rem = index;
        let mut coords = vec![0.0; self.dim()];
        for (i, axis) in self.axes.iter().enumerate().rev() {
            coords[i] = axis[rem % axis.len()];
            rem /= axis.len();
        }
        ParameterPoint { coords }
    }

    pub fn iter(&self) -> impl Iterator<Item = ParameterPoint> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    /// Index of the grid point exactly matching `p` (bitwise coordinate
    /// equality), if any.
    pub fn index_of(&self, p: &ParameterPoint) -> Option<usize> {
        if p.dim() != self.dim() {
            return None;
        }
        let mut index = 0;
        for (i, axis) in self.axes.iter().enumerate() {
            let pos = axis.iter().position(|&v| v == p[i])?;
            index = index * axis.len() + pos;
        }
        Some(index)
    }

    /// Index of the grid point closest to `p` in the Euclidean sense.
    pub fn nearest_index(&self, p: &ParameterPoint) -> usize {
        let mut index = 0;
        for (i, axis) in self.axes.iter().enumerate() {
            let pos = axis
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (*a - p[i]).abs().partial_cmp(&(*b - p[i]).abs()).unwrap()
                })
                .map(|(k, _)| k)
                .unwrap();
            index = index * axis.len() + pos;
        }
        index
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_coords() {
        assert!(ParameterPoint::new(vec![0.0, f64::NAN]).is_err());
        assert!(ParameterPoint::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn grid_row_major_order() {
        let domain = DomainBox::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let grid = ParameterGrid::uniform(&domain, &[2, 3]).unwrap();
        assert_eq!(grid.len(), 6);
        let pts: Vec<_> = grid.iter().map(|p| (p[0], p[1])).collect();
        assert_eq!(
            pts,
            vec![
                (0.0, 0.0),
                (0.0, 1.0),
                (0.0, 2.0),
                (1.0, 0.0),
                (1.0, 1.0),
                (1.0, 2.0)
            ]
        );
    }

    #[test]
    fn grid_points_unique_and_inside() {
        let domain = DomainBox::new(vec![0.0, 0.5], vec![5.0, 4.0]).unwrap();
        let grid = ParameterGrid::uniform(&domain, &[7, 5]).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for p in grid.iter() {
            assert!(domain.contains(&p));
            assert!(seen.insert(format!("{:?}", p.coords())), "duplicate point");
        }
        assert_eq!(seen.len(), grid.len());
    }

    #[test]
    fn index_round_trip() {
        let domain = DomainBox::new(vec![0.0, 0.0, 0.01], vec![2.0, 2.0, 0.1]).unwrap();
        let grid = ParameterGrid::uniform(&domain, &[4, 3, 5]).unwrap();
        for i in [0, 1, 17, grid.len() - 1] {
            assert_eq!(grid.index_of(&grid.point(i)), Some(i));
        }
        assert_eq!(grid.nearest_index(&grid.point(23)), 23);
    }

    #[test]
    fn single_count_axis_uses_midpoint() {
        let domain = DomainBox::new(vec![1.0], vec![3.0]).unwrap();
        let grid = ParameterGrid::uniform(&domain, &[1]).unwrap();
        assert_eq!(grid.point(0).coords(), &[2.0]);
    }
}
