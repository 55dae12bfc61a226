//! Sparse bag-of-features vectors.

use std::collections::BTreeMap;

/// A sparse vector with strictly increasing indices and no explicit zeros.
///
/// Values are occurrence counts when produced by feature extraction, but the
/// type also carries real-valued weights (e.g. point-wise contribution
/// vectors). The logical dimension is whatever vocabulary the indices refer
/// to; it is not stored here.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn empty() -> Self {
        SparseVector::default()
    }

    /// Builds from arbitrary (index, value) pairs: sorts, sums duplicate
    /// indices, and drops exact zeros.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, v) in pairs {
            *acc.entry(i).or_insert(0.0) += v;
        }
        SparseVector {
            entries: acc.into_iter().filter(|&(_, v)| v != 0.0).collect(),
        }
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (u32, u32)>) -> Self {
        Self::from_pairs(counts.into_iter().map(|(i, c)| (i, f64::from(c))))
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_index(&self) -> Option<u32> {
        self.entries.last().map(|&(i, _)| i)
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }

    /// Sum of all values (for count vectors: total label occurrences).
    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum()
    }

    /// Inner product by merge over the two sorted entry lists.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (self.entries.iter(), other.entries.iter());
        let (mut x, mut y) = (a.next(), b.next());
        let mut acc = 0.0;
        while let (Some(&(i, u)), Some(&(j, v))) = (x, y) {
            match i.cmp(&j) {
                std::cmp::Ordering::Less => x = a.next(),
                std::cmp::Ordering::Greater => y = b.next(),
                std::cmp::Ordering::Equal => {
                    acc += u * v;
                    x = a.next();
                    y = b.next();
                }
            }
        }
        acc
    }

    /// Inner product against a dense weight vector; indices beyond its length
    /// contribute zero. Cost is linear in the number of nonzeros.
    pub fn dot_dense(&self, weights: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, v)| weights.get(i as usize).copied().unwrap_or(0.0) * v)
            .sum()
    }
}

impl FromIterator<(u32, f64)> for SparseVector {
    fn from_iter<T: IntoIterator<Item = (u32, f64)>>(iter: T) -> Self {
        Self::from_pairs(iter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_pairs_sorts_merges_and_drops_zeros() {
        let v = SparseVector::from_pairs([(5, 1.0), (2, 2.0), (5, 3.0), (7, 0.0)]);
        assert_eq!(v.entries(), &[(2, 2.0), (5, 4.0)]);
    }

    #[test]
    fn dot_matches_dense_computation() {
        let a = SparseVector::from_pairs([(0, 1.0), (3, 2.0), (9, -1.5)]);
        let b = SparseVector::from_pairs([(3, 4.0), (9, 2.0), (11, 7.0)]);
        assert_eq!(a.dot(&b), 2.0 * 4.0 + (-1.5) * 2.0);
        assert_eq!(a.dot(&b), b.dot(&a));
        assert_eq!(a.dot(&SparseVector::empty()), 0.0);
    }

    #[test]
    fn dot_dense_ignores_out_of_range_indices() {
        let v = SparseVector::from_pairs([(0, 2.0), (4, 3.0)]);
        assert_eq!(v.dot_dense(&[1.0, 0.0]), 2.0);
    }

    #[test]
    fn get_returns_zero_for_absent_indices() {
        let v = SparseVector::from_counts([(1, 2), (4, 1)]);
        assert_eq!(v.get(1), 2.0);
        assert_eq!(v.get(2), 0.0);
        assert_eq!(v.max_index(), Some(4));
    }
}
