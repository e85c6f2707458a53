//! Labeled point clouds: parallel position / color / label arrays.

use thiserror::Error;

use crate::class::UNLABELED;
use crate::geom::{Aabb, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum CloudError {
    #[error("array length mismatch: {positions} positions, {other} {what}")]
    LengthMismatch {
        positions: usize,
        other: usize,
        what: &'static str,
    },
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledPointCloud {
    pub positions: Vec<Vec3>,
    pub colors: Option<Vec<[u8; 3]>>,
    /// Class id per point; [`UNLABELED`] when unknown.
    pub semantic: Vec<u8>,
    /// Instance id per point; 0 when the point belongs to no object.
    pub instance: Vec<u32>,
}

impl LabeledPointCloud {
    pub fn new() -> Self {
        Self::default()
    }

    /// A cloud of unlabeled points.
    pub fn unlabeled(positions: Vec<Vec3>, colors: Option<Vec<[u8; 3]>>) -> Self {
        let n = positions.len();
        LabeledPointCloud {
            positions,
            colors,
            semantic: vec![UNLABELED; n],
            instance: vec![0; n],
        }
    }

    pub fn with_capacity(n: usize, colored: bool) -> Self {
        LabeledPointCloud {
            positions: Vec::with_capacity(n),
            colors: colored.then(|| Vec::with_capacity(n)),
            semantic: Vec::with_capacity(n),
            instance: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn push(&mut self, p: Vec3, color: Option<[u8; 3]>, semantic: u8, instance: u32) {
        self.positions.push(p);
        if let Some(colors) = self.colors.as_mut() {
            colors.push(color.unwrap_or([0, 0, 0]));
        }
        self.semantic.push(semantic);
        self.instance.push(instance);
    }

    pub fn validate(&self) -> Result<(), CloudError> {
        let n = self.positions.len();
        let check = |len: usize, what: &'static str| {
            if len != n {
                Err(CloudError::LengthMismatch {
                    positions: n,
                    other: len,
                    what,
                })
            } else {
                Ok(())
            }
        };
        check(self.semantic.len(), "semantic labels")?;
        check(self.instance.len(), "instance labels")?;
        if let Some(c) = &self.colors {
            check(c.len(), "colors")?;
        }
        if let Some(i) = self.positions.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(CloudError::NonFinite(i));
        }
        Ok(())
    }

    /// New cloud with the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> LabeledPointCloud {
        LabeledPointCloud {
            positions: indices.iter().map(|&i| self.positions[i]).collect(),
            colors: self
                .colors
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
            semantic: indices.iter().map(|&i| self.semantic[i]).collect(),
            instance: indices.iter().map(|&i| self.instance[i]).collect(),
        }
    }

    pub fn extend(&mut self, other: &LabeledPointCloud) {
        match (&mut self.colors, &other.colors) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            (Some(a), None) => a.extend(std::iter::repeat_n([0, 0, 0], other.len())),
            (None, Some(b)) if self.positions.is_empty() => self.colors = Some(b.clone()),
            _ => {}
        }
        self.positions.extend_from_slice(&other.positions);
        self.semantic.extend_from_slice(&other.semantic);
        self.instance.extend_from_slice(&other.instance);
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.positions.iter())
    }

    pub fn unlabeled_count(&self) -> usize {
        self.semantic.iter().filter(|&&s| s == UNLABELED).count()
    }
}
