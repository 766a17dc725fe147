//! Multi-view datasets and stratified partitioning.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::types::OrdinalLabel;

/// Dense row-major `rows × cols` matrix of features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Aligned per-view features sharing one label vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    view_names: Vec<String>,
    views: Vec<FeatureMatrix>,
    labels: Vec<OrdinalLabel>,
    ids: Vec<u64>,
    classes: usize,
}

impl MultiViewDataset {
    pub fn new(
        view_names: Vec<String>,
        views: Vec<FeatureMatrix>,
        labels: Vec<OrdinalLabel>,
        ids: Vec<u64>,
        classes: usize,
    ) -> Result<Self> {
        if view_names.len() != views.len() {
            return Err(Error::LengthMismatch {
                expected: view_names.len(),
                actual: views.len(),
            });
        }
        if views.is_empty() {
            return Err(Error::Empty("views"));
        }
        if classes < 2 {
            return Err(invalid("classes", "need at least two ordinal classes"));
        }
        for view in &views {
            if view.rows() != labels.len() {
                return Err(Error::LengthMismatch {
                    expected: labels.len(),
                    actual: view.rows(),
                });
            }
        }
        if ids.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: labels.len(),
                actual: ids.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|l| l.0 >= classes) {
            return Err(Error::LabelOutOfRange {
                label: bad.0,
                classes,
            });
        }
        Ok(Self {
            view_names,
            views,
            labels,
            ids,
            classes,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[OrdinalLabel] {
        &self.labels
    }

    /// Sample identifiers; duplicated after resampling.
    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn view_names(&self) -> &[String] {
        &self.view_names
    }

    pub fn view(&self, name: &str) -> Result<&FeatureMatrix> {
        self.view_names
            .iter()
            .position(|v| v == name)
            .map(|i| &self.views[i])
            .ok_or_else(|| Error::MissingView(name.to_string()))
    }

    pub fn view_at(&self, index: usize) -> &FeatureMatrix {
        &self.views[index]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        class_counts(&self.labels, self.classes)
    }

    /// Rows at `indices`, in the given order, across every view.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            view_names: self.view_names.clone(),
            views: self.views.iter().map(|v| v.select(indices)).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i]).collect(),
            classes: self.classes,
        }
    }

    /// Keeps only the named views, in the given order.
    pub fn select_views(&self, names: &[&str]) -> Result<Self> {
        let mut views = Vec::with_capacity(names.len());
        for name in names {
            views.push(self.view(name)?.clone());
        }
        Self::new(
            names.iter().map(|s| s.to_string()).collect(),
            views,
            self.labels.clone(),
            self.ids.clone(),
            self.classes,
        )
    }
}

pub fn class_counts(labels: &[OrdinalLabel], classes: usize) -> Vec<usize> {
    let mut counts = vec![0; classes];
    for l in labels {
        counts[l.0] += 1;
    }
    counts
}

/// Train/test row indices, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class test counts for a stratified holdout.
///
/// The overall test size is `round(N · fraction)`. Each class first gets
/// `floor(n_c · fraction)`; leftover slots go to the largest fractional
/// remainders, ties to the smaller class and then the lower index. Every class
/// keeps at least one sample on each side.
pub fn stratified_test_counts(counts: &[usize], test_fraction: f64) -> Result<Vec<usize>> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(invalid("test_fraction", "must lie in (0, 1)"));
    }
    for (class, &count) in counts.iter().enumerate() {
        if count < 2 {
            return Err(Error::ClassTooSmall {
                class,
                count,
                needed: 2,
            });
        }
    }
    let total: usize = counts.iter().sum();
    let target = (total as f64 * test_fraction).round() as usize;
    let exact: Vec<f64> = counts.iter().map(|&c| c as f64 * test_fraction).collect();
    // Guard against 20.400000000000002-style noise before flooring.
    let mut alloc: Vec<usize> = exact.iter().map(|&e| (e + 1e-9).floor() as usize).collect();
    let remainder: Vec<f64> = exact
        .iter()
        .zip(&alloc)
        .map(|(&e, &a)| (e - a as f64).max(0.0))
        .collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (remainder[a], remainder[b]);
        if (ra - rb).abs() > 1e-9 {
            rb.partial_cmp(&ra).unwrap()
        } else {
            counts[a].cmp(&counts[b]).then(a.cmp(&b))
        }
    });
    let assigned: usize = alloc.iter().sum();
    for &class in order.iter().take(target.saturating_sub(assigned)) {
        alloc[class] += 1;
    }
    for (a, &c) in alloc.iter_mut().zip(counts) {
        *a = (*a).clamp(1, c - 1);
    }
    Ok(alloc)
}

/// Stratified holdout over labels; deterministic for a given seed.
pub fn stratified_split_indices(
    labels: &[OrdinalLabel],
    classes: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<SplitIndices> {
    let by_class = indices_by_class(labels, classes);
    let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let test_counts = stratified_test_counts(&counts, test_fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (mut members, n_test) in by_class.into_iter().zip(test_counts) {
        members.shuffle(&mut rng);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Stratified train/test partition of a multi-view dataset.
pub fn stratified_split(
    data: &MultiViewDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(MultiViewDataset, MultiViewDataset)> {
    let split = stratified_split_indices(data.labels(), data.classes(), test_fraction, seed)?;
    Ok((data.subset(&split.train), data.subset(&split.test)))
}

/// Row indices of a per-class bootstrap: position `i` is replaced by a
/// uniformly drawn member of its own class.
pub fn stratified_resample_indices(
    labels: &[OrdinalLabel],
    classes: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if labels.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let by_class = indices_by_class(labels, classes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labels
        .iter()
        .map(|l| {
            let members = &by_class[l.0];
            if members.is_empty() {
                return Err(Error::ClassTooSmall {
                    class: l.0,
                    count: 0,
                    needed: 1,
                });
            }
            Ok(members[rng.random_range(0..members.len())])
        })
        .collect()
}

/// Per-class sampling with replacement; the class histogram is preserved.
pub fn stratified_resample(data: &MultiViewDataset, seed: u64) -> Result<MultiViewDataset> {
    let indices = stratified_resample_indices(data.labels(), data.classes(), seed)?;
    Ok(data.subset(&indices))
}

/// Stratified k-fold assignment. Returns the validation indices of each fold.
///
/// Rows that share a group id (for example bootstrap copies of one sample)
/// always land in the same fold.
pub fn stratified_folds(
    labels: &[OrdinalLabel],
    groups: &[u64],
    classes: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(invalid("folds", "need at least two folds"));
    }
    if groups.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: groups.len(),
        });
    }
    for (class, count) in class_counts(labels, classes).into_iter().enumerate() {
        if count > 0 && count < folds {
            return Err(Error::ClassTooSmall {
                class,
                count,
                needed: folds,
            });
        }
    }
    // group -> rows, bucketed by class; BTreeMap keeps iteration deterministic.
    let mut class_groups: Vec<BTreeMap<u64, Vec<usize>>> = vec![BTreeMap::new(); classes];
    for (i, (l, g)) in labels.iter().zip(groups).enumerate() {
        class_groups[l.0].entry(*g).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut cursor = 0;
    for groups_of_class in class_groups {
        let mut members: Vec<Vec<usize>> = groups_of_class.into_values().collect();
        members.shuffle(&mut rng);
        for rows in members {
            out[cursor % folds].extend(rows);
            cursor += 1;
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}

/// Complement of `held_out` in `0..n`.
pub fn complement(n: usize, held_out: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in held_out {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

fn indices_by_class(labels: &[OrdinalLabel], classes: usize) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); classes];
    for (i, l) in labels.iter().enumerate() {
        by_class[l.0].push(i);
    }
    by_class
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::labels;
    use proptest::prelude::*;

    fn toy(counts: &[usize]) -> MultiViewDataset {
        let mut y = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            y.extend(std::iter::repeat_n(c, n));
        }
        let n = y.len();
        let features = FeatureMatrix::new(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        MultiViewDataset::new(
            vec!["crown".into()],
            vec![features],
            labels(&y),
            (0..n as u64).collect(),
            counts.len(),
        )
        .unwrap()
    }

    #[test]
    fn table_two_holdout_counts() {
        let data = toy(&[40, 102, 106, 47]);
        let (train, test) = stratified_split(&data, 0.2, 7).unwrap();
        assert_eq!(test.class_counts(), vec![8, 20, 21, 10]);
        assert_eq!(train.class_counts(), vec![32, 82, 85, 37]);
    }

    #[test]
    fn half_split_of_pairs() {
        let data = toy(&[2, 2]);
        let (train, test) = stratified_split(&data, 0.5, 1).unwrap();
        assert_eq!(test.class_counts(), vec![1, 1]);
        assert_eq!(train.class_counts(), vec![1, 1]);
    }

    #[test]
    fn split_is_deterministic() {
        let data = toy(&[10, 20, 15]);
        let a = stratified_split_indices(data.labels(), 3, 0.2, 42).unwrap();
        let b = stratified_split_indices(data.labels(), 3, 0.2, 42).unwrap();
        assert_eq!(a, b);
        let c = stratified_split_indices(data.labels(), 3, 0.2, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_rejects_singleton_class() {
        let data = toy(&[1, 5]);
        assert!(matches!(
            stratified_split(&data, 0.2, 0),
            Err(Error::ClassTooSmall { class: 0, .. })
        ));
        assert!(stratified_split(&toy(&[5, 5]), 1.0, 0).is_err());
    }

    #[test]
    fn resample_single_sample_class_repeats() {
        let data = toy(&[1, 6]);
        let r = stratified_resample(&data, 3).unwrap();
        assert_eq!(r.class_counts(), vec![1, 6]);
        assert_eq!(r.ids()[0], 0);
    }

    #[test]
    fn resample_seeds_differ() {
        let data = toy(&[50, 50]);
        let a = stratified_resample_indices(data.labels(), 2, 1).unwrap();
        let b = stratified_resample_indices(data.labels(), 2, 2).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, stratified_resample_indices(data.labels(), 2, 1).unwrap());
    }

    #[test]
    fn folds_keep_groups_together() {
        let y = labels(&[0, 0, 0, 0, 1, 1, 1, 1, 1, 1]);
        let groups = [1, 1, 2, 3, 4, 4, 5, 6, 7, 8];
        let folds = stratified_folds(&y, &groups, 2, 3, 9).unwrap();
        let mut seen: Vec<usize> = folds.concat();
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
        let fold_of = |i: usize| folds.iter().position(|f| f.contains(&i)).unwrap();
        assert_eq!(fold_of(0), fold_of(1));
        assert_eq!(fold_of(4), fold_of(5));
    }

    #[test]
    fn folds_reject_small_class() {
        let y = labels(&[0, 0, 1, 1, 1]);
        assert!(matches!(
            stratified_folds(&y, &[0, 1, 2, 3, 4], 2, 3, 0),
            Err(Error::ClassTooSmall { class: 0, .. })
        ));
    }

    proptest! {
        #[test]
        fn split_partitions_exactly(counts in prop::collection::vec(2usize..60, 2..6), frac in 0.05f64..0.95, seed in any::<u64>()) {
            let data = toy(&counts);
            let s = stratified_split_indices(data.labels(), counts.len(), frac, seed).unwrap();
            let mut all = [s.train.clone(), s.test.clone()].concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..data.len()).collect::<Vec<_>>());
            let test_counts = class_counts(&s.test.iter().map(|&i| data.labels()[i]).collect::<Vec<_>>(), counts.len());
            for (t, &c) in test_counts.iter().zip(&counts) {
                let want = c as f64 * frac;
                prop_assert!((*t as f64 - want).abs() <= 1.0 + 1e-9, "class count {} test {} want {}", c, t, want);
            }
        }

        #[test]
        fn resample_preserves_histogram(counts in prop::collection::vec(1usize..40, 2..6), seed in any::<u64>()) {
            let data = toy(&counts);
            let r = stratified_resample(&data, seed).unwrap();
            prop_assert_eq!(r.class_counts(), counts);
        }
    }
}
