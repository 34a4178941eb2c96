//! Flat parameter vectors, masks and group partitions.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};

/// A named tensor inside the flat parameter vector, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorShape {
    pub name: String,
    pub dims: Vec<usize>,
}

impl TensorShape {
    pub fn new(name: impl Into<String>, dims: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            dims,
        }
    }

    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Model weights as one flat vector plus the directory that maps it back to
/// named tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamState {
    values: Vec<f64>,
    shapes: Vec<TensorShape>,
    prunable: Vec<bool>,
}

impl ParamState {
    /// Builds a parameter state where every 2-D tensor is prunable and every
    /// other tensor (biases, scalars) is not.
    pub fn new(values: Vec<f64>, shapes: Vec<TensorShape>) -> Result<Self> {
        let mut prunable = Vec::with_capacity(values.len());
        for shape in &shapes {
            prunable.extend(core::iter::repeat_n(shape.dims.len() == 2, shape.numel()));
        }
        Self::with_prunable(values, shapes, prunable)
    }

    pub fn with_prunable(
        values: Vec<f64>,
        shapes: Vec<TensorShape>,
        prunable: Vec<bool>,
    ) -> Result<Self> {
        let total: usize = shapes.iter().map(TensorShape::numel).sum();
        Error::check_len("parameter shapes", values.len(), total)?;
        Error::check_len("prunable flags", values.len(), prunable.len())?;
        Ok(Self {
            values,
            shapes,
            prunable,
        })
    }

    /// A single `1 × d` weight tensor; every entry is prunable.
    pub fn dense(values: Vec<f64>) -> Self {
        let d = values.len();
        Self {
            shapes: vec![TensorShape::new("theta", vec![1, d])],
            prunable: vec![true; d],
            values,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn shapes(&self) -> &[TensorShape] {
        &self.shapes
    }

    pub fn prunable(&self) -> &[bool] {
        &self.prunable
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn prunable_count(&self) -> usize {
        self.prunable.iter().filter(|&&p| p).count()
    }

    pub fn prunable_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.prunable[j]).collect()
    }

    /// Same metadata, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Error::check_len("parameter values", self.len(), values.len())?;
        Ok(Self {
            values,
            shapes: self.shapes.clone(),
            prunable: self.prunable.clone(),
        })
    }

    /// Flat index range of every tensor, in directory order.
    pub fn tensor_ranges(&self) -> Vec<(&TensorShape, Range<usize>)> {
        let mut offset = 0;
        self.shapes
            .iter()
            .map(|s| {
                let r = offset..offset + s.numel();
                offset = r.end;
                (s, r)
            })
            .collect()
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.tensor_ranges()
            .into_iter()
            .find(|(s, _)| s.name == name)
            .map(|(_, r)| &self.values[r])
    }
}

/// Retention indicator over the flat vector. `true` keeps the entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    bits: Vec<bool>,
}

impl Mask {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn ones(len: usize) -> Self {
        Self {
            bits: vec![true; len],
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            bits: vec![false; len],
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Number of positions where the two masks disagree.
    pub fn hamming(&self, other: &Mask) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }

    pub fn get(&self, j: usize) -> bool {
        self.bits[j]
    }
}

/// Zeroes every entry whose mask bit is cleared. Kept entries are copied
/// bit-for-bit.
pub fn apply_mask(params: &ParamState, mask: &Mask) -> Result<ParamState> {
    Error::check_len("mask", params.len(), mask.len())?;
    if let Some(j) = (0..params.len()).find(|&j| !params.prunable[j] && !mask.bits[j]) {
        return Err(Error::Mask(format!("entry {j} is not prunable but is masked out")));
    }
    let values = params
        .values
        .iter()
        .zip(&mask.bits)
        .map(|(&v, &keep)| if keep { v } else { 0.0 })
        .collect();
    params.with_values(values)
}

/// Disjoint, non-empty index groups whose union is the prunable set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
}

impl GroupPartition {
    pub fn new(groups: Vec<Vec<usize>>, prunable: &[bool]) -> Result<Self> {
        let d = prunable.len();
        let mut seen = vec![false; d];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::Partition(format!("group {g} is empty")));
            }
            for &j in members {
                if j >= d {
                    return Err(Error::Partition(format!(
                        "group {g} holds index {j}, beyond {d} parameters"
                    )));
                }
                if seen[j] {
                    return Err(Error::Partition(format!("index {j} appears in two groups")));
                }
                if !prunable[j] {
                    return Err(Error::Partition(format!(
                        "group {g} holds non-prunable index {j}"
                    )));
                }
                seen[j] = true;
            }
        }
        if let Some(j) = (0..d).find(|&j| prunable[j] && !seen[j]) {
            return Err(Error::Partition(format!(
                "prunable index {j} belongs to no group"
            )));
        }
        Ok(Self { groups })
    }

    /// One group per prunable entry, in index order.
    pub fn singletons(params: &ParamState) -> Self {
        Self {
            groups: params.prunable_indices().into_iter().map(|j| vec![j]).collect(),
        }
    }

    /// One group per column of every prunable matrix.
    pub fn columns(params: &ParamState) -> Result<Self> {
        Self::matrix_slices(params, true)
    }

    /// One group per row of every prunable matrix.
    pub fn rows(params: &ParamState) -> Result<Self> {
        Self::matrix_slices(params, false)
    }

    fn matrix_slices(params: &ParamState, by_column: bool) -> Result<Self> {
        let mut groups = Vec::new();
        for (shape, range) in params.tensor_ranges() {
            if !params.prunable[range.clone()].iter().all(|&p| p) {
                continue;
            }
            if shape.dims.len() != 2 {
                return Err(Error::Partition(format!(
                    "prunable tensor {} is not a matrix",
                    shape.name
                )));
            }
            let (rows, cols) = (shape.dims[0], shape.dims[1]);
            if by_column {
                for c in 0..cols {
                    groups.push((0..rows).map(|r| range.start + r * cols + c).collect());
                }
            } else {
                for r in 0..rows {
                    groups.push((0..cols).map(|c| range.start + r * cols + c).collect());
                }
            }
        }
        Self::new(groups, params.prunable())
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Expands a per-group keep vector into an entry mask. Indices outside every
/// group are kept.
pub fn expand_group_mask(group_mask: &[bool], partition: &GroupPartition, d: usize) -> Result<Mask> {
    Error::check_len("group mask", partition.len(), group_mask.len())?;
    let mut bits = vec![true; d];
    for (members, &keep) in partition.groups.iter().zip(group_mask) {
        for &j in members {
            if j >= d {
                return Err(Error::Partition(format!(
                    "index {j} is out of range for {d} parameters"
                )));
            }
            bits[j] = keep;
        }
    }
    Ok(Mask::from_bits(bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn masking_zeroes_cleared_entries() {
        let p = ParamState::dense(vec![1.5, -2.0, 0.3]);
        let m = Mask::from_bits(vec![true, false, true]);
        assert_eq!(apply_mask(&p, &m).unwrap().values(), &[1.5, 0.0, 0.3]);
    }

    #[test]
    fn all_ones_mask_is_identity() {
        let p = ParamState::dense(vec![0.1, -7.25, 3.0e-300, 42.0]);
        assert_eq!(apply_mask(&p, &Mask::ones(4)).unwrap(), p);
    }

    #[test]
    fn zero_vector_is_a_fixed_point() {
        let p = ParamState::dense(vec![0.0, 0.0]);
        assert_eq!(apply_mask(&p, &Mask::zeros(2)).unwrap().values(), &[0.0, 0.0]);
    }

    #[test]
    fn mask_length_mismatch() {
        let p = ParamState::dense(vec![1.0, 2.0]);
        assert!(matches!(
            apply_mask(&p, &Mask::ones(3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn masking_a_bias_is_rejected() {
        let shapes = vec![TensorShape::new("w", vec![1, 2]), TensorShape::new("b", vec![1])];
        let p = ParamState::new(vec![1.0, 2.0, 3.0], shapes).unwrap();
        assert_eq!(p.prunable(), &[true, true, false]);
        let m = Mask::from_bits(vec![true, true, false]);
        assert!(matches!(apply_mask(&p, &m), Err(Error::Mask(_))));
    }

    #[test]
    fn shape_total_must_match() {
        let shapes = vec![TensorShape::new("w", vec![2, 2])];
        assert!(ParamState::new(vec![0.0; 3], shapes).is_err());
    }

    #[test]
    fn group_expansion_by_membership() {
        let prunable = vec![true; 3];
        let part = GroupPartition::new(vec![vec![0, 1], vec![2]], &prunable).unwrap();
        let m = expand_group_mask(&[true, false], &part, 3).unwrap();
        assert_eq!(m.bits(), &[true, true, false]);
        let all = expand_group_mask(&[true, true], &part, 3).unwrap();
        assert_eq!(all.bits(), &[true, true, true]);
    }

    #[test]
    fn group_expansion_fills_non_prunable_with_ones() {
        let prunable = vec![true, false, true];
        let part = GroupPartition::new(vec![vec![2], vec![0]], &prunable).unwrap();
        let m = expand_group_mask(&[false, true], &part, 3).unwrap();
        assert_eq!(m.bits(), &[true, true, false]);
    }

    #[test]
    fn expansion_out_of_range_is_a_partition_error() {
        let part = GroupPartition::new(vec![vec![0, 1, 2], vec![3]], &[true; 4]).unwrap();
        assert!(matches!(
            expand_group_mask(&[true, false], &part, 2),
            Err(Error::Partition(_))
        ));
    }

    #[test]
    fn partition_validation() {
        let p = [true, true, false];
        assert!(GroupPartition::new(vec![vec![0], vec![]], &p).is_err());
        assert!(GroupPartition::new(vec![vec![0, 1], vec![1]], &p).is_err());
        assert!(GroupPartition::new(vec![vec![0]], &p).is_err());
        assert!(GroupPartition::new(vec![vec![0, 1, 2]], &p).is_err());
        assert!(GroupPartition::new(vec![vec![1, 0]], &p).is_ok());
    }

    #[test]
    fn column_and_row_groups() {
        let shapes = vec![TensorShape::new("w", vec![2, 3]), TensorShape::new("b", vec![2])];
        let p = ParamState::new(vec![0.0; 8], shapes).unwrap();
        let cols = GroupPartition::columns(&p).unwrap();
        assert_eq!(cols.groups(), &[vec![0, 3], vec![1, 4], vec![2, 5]]);
        let rows = GroupPartition::rows(&p).unwrap();
        assert_eq!(rows.groups(), &[vec![0, 1, 2], vec![3, 4, 5]]);
    }

    proptest! {
        #[test]
        fn masking_is_idempotent(vals in prop::collection::vec(-1e6f64..1e6, 1..64), seed in any::<u64>()) {
            let bits: Vec<bool> = (0..vals.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
            let p = ParamState::dense(vals);
            let m = Mask::from_bits(bits);
            let once = apply_mask(&p, &m).unwrap();
            let twice = apply_mask(&once, &m).unwrap();
            prop_assert_eq!(&once, &twice);
            for (j, (&a, &b)) in p.values().iter().zip(once.values()).enumerate() {
                if m.get(j) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                } else {
                    prop_assert_eq!(b.to_bits(), 0.0f64.to_bits());
                }
            }
        }

        #[test]
        fn expanded_masks_are_constant_within_groups(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
            let p = ParamState::new(vec![0.0; rows * cols], vec![TensorShape::new("w", vec![rows, cols])]).unwrap();
            let part = GroupPartition::columns(&p).unwrap();
            let gm: Vec<bool> = (0..part.len()).map(|g| (seed >> g) & 1 == 1).collect();
            let m = expand_group_mask(&gm, &part, p.len()).unwrap();
            for (g, members) in part.groups().iter().enumerate() {
                for &j in members {
                    prop_assert_eq!(m.get(j), gm[g]);
                }
            }
        }
    }
}
