use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite real vector: a state, an action encoding, or a joined state-action pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter(
                "point must have dimension >= 1".into(),
            ));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
        Ok(Point(coords))
    }

    /// Standard basis vector `e_index` in `dim` dimensions.
    pub fn one_hot(index: usize, dim: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidParameter(format!(
                "one-hot index {index} out of range for dimension {dim}"
            )));
        }
        let mut coords = vec![0.0; dim];
        coords[index] = 1.0;
        Ok(Point(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Concatenation `[self, other]`, used to join a state with its action.
    pub fn join(&self, other: &Point) -> Point {
        let mut coords = Vec::with_capacity(self.dim() + other.dim());
        coords.extend_from_slice(&self.0);
        coords.extend_from_slice(&other.0);
        Point(coords)
    }

    /// Index of the hot coordinate if this is a one-hot point.
    pub fn one_hot_index(&self) -> Option<usize> {
        let mut hot = None;
        for (i, &c) in self.0.iter().enumerate() {
            if c == 1.0 {
                if hot.is_some() {
                    return None;
                }
                hot = Some(i);
            } else if c != 0.0 {
                return None;
            }
        }
        hot
    }

    /// Exact bit pattern of the coordinates; equal keys mean identical points.
    pub fn key(&self) -> Vec<u64> {
        self.0.iter().map(|c| c.to_bits()).collect()
    }

    pub fn sq_distance(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Point::new(coords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(Point::new(vec![0.0, f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
        assert!(Point::new(vec![]).is_err());
    }

    #[test]
    fn one_hot_roundtrip() {
        let p = Point::one_hot(2, 4).unwrap();
        assert_eq!(p.coords(), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(p.one_hot_index(), Some(2));
        assert_eq!(Point::new(vec![0.5, 0.5]).unwrap().one_hot_index(), None);
        assert!(Point::one_hot(4, 4).is_err());
    }

    #[test]
    fn join_concatenates() {
        let s = Point::one_hot(0, 2).unwrap();
        let a = Point::one_hot(1, 3).unwrap();
        assert_eq!(s.join(&a).coords(), &[1.0, 0.0, 0.0, 1.0, 0.0]);
    }
}
