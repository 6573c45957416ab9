use serde::{Deserialize, Serialize};

use crate::geom::{DirectionSet, Point};

/// Which ranges an approximation must respect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RangeFamily {
    /// Axis-parallel boxes in `dim` dimensions.
    Rect { dim: usize },
    /// Convex ranges whose faces are normal to a fixed direction set.
    KOriented { dirs: DirectionSet },
}

impl RangeFamily {
    pub fn rect(dim: usize) -> Self {
        RangeFamily::Rect { dim }
    }

    pub fn k_oriented(dirs: DirectionSet) -> Self {
        RangeFamily::KOriented { dirs }
    }

    pub fn dim(&self) -> usize {
        match self {
            RangeFamily::Rect { dim } => *dim,
            RangeFamily::KOriented { dirs } => dirs.dim(),
        }
    }

    /// Face normals of the family; the coordinate axes for boxes.
    pub fn directions(&self) -> DirectionSet {
        match self {
            RangeFamily::Rect { dim } => DirectionSet::axes(*dim),
            RangeFamily::KOriented { dirs } => dirs.clone(),
        }
    }

    /// Number of directions k.
    pub fn k(&self) -> usize {
        match self {
            RangeFamily::Rect { dim } => *dim,
            RangeFamily::KOriented { dirs } => dirs.len(),
        }
    }

    /// Projections of `p` onto every family direction. A range of the family
    /// is exactly a box in these coordinates.
    pub fn project(&self, p: &Point) -> Vec<f64> {
        match self {
            RangeFamily::Rect { .. } => p.coords().to_vec(),
            RangeFamily::KOriented { dirs } => dirs.iter().map(|d| p.dot(d)).collect(),
        }
    }
}
