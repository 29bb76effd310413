use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Classes whose skewness ratio falls below this are tail classes.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 0.30;

/// Per-class counts of a labeled split and the derived skew statistics.
///
/// The skewness ratio of a class is its count divided by the mean per-class
/// count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCatalog {
    pub num_classes: usize,
    pub names: Vec<String>,
    pub counts: Vec<usize>,
    pub proportions: Vec<f64>,
    pub skewness_ratios: Vec<f64>,
    pub tail_classes: Vec<usize>,
    pub tail_threshold: f64,
}

impl ClassCatalog {
    pub fn from_counts(
        names: Vec<String>,
        counts: Vec<usize>,
        tail_threshold: f64,
    ) -> Result<Self> {
        if names.len() != counts.len() {
            return Err(Error::invalid("class names and counts differ in length"));
        }
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::invalid(
                "cannot build a class catalog from an empty dataset",
            ));
        }
        let c = counts.len();
        let proportions: Vec<f64> = counts.iter().map(|&n| n as f64 / total as f64).collect();
        let mean = total as f64 / c as f64;
        let skewness_ratios: Vec<f64> = counts.iter().map(|&n| n as f64 / mean).collect();
        let tail_classes = skewness_ratios
            .iter()
            .enumerate()
            .filter(|(_, &s)| s < tail_threshold)
            .map(|(k, _)| k)
            .collect();
        Ok(ClassCatalog {
            num_classes: c,
            names,
            counts,
            proportions,
            skewness_ratios,
            tail_classes,
            tail_threshold,
        })
    }

    pub fn is_tail(&self, class: usize) -> bool {
        self.tail_classes.contains(&class)
    }
}

pub fn compute_catalog(dataset: &Dataset, tail_threshold: f64) -> Result<ClassCatalog> {
    if dataset.is_empty() {
        return Err(Error::invalid(
            "cannot build a class catalog from an empty dataset",
        ));
    }
    let mut counts = vec![0usize; dataset.num_classes()];
    for e in dataset.examples() {
        let l = e
            .label
            .ok_or_else(|| Error::invalid(format!("example {} is unlabeled", e.id)))?;
        counts[l] += 1;
    }
    ClassCatalog::from_counts(dataset.class_names().to_vec(), counts, tail_threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::default_class_names;

    #[test]
    fn coco_shaped_counts_flag_three_tail_classes() {
        // 11 classes, total 11000, mean 1000: car 50, chair 140, bottle 230
        let counts = vec![50, 1400, 1000, 140, 230, 1380, 1380, 1380, 1380, 1380, 1280];
        let names: Vec<String> = [
            "car", "person", "dog", "chair", "bottle", "cat", "bus", "cup", "book", "bird", "horse",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let cat = ClassCatalog::from_counts(names, counts, DEFAULT_TAIL_THRESHOLD).unwrap();
        assert!((cat.skewness_ratios[0] - 0.05).abs() < 1e-12);
        assert!((cat.skewness_ratios[3] - 0.14).abs() < 1e-12);
        assert!((cat.skewness_ratios[4] - 0.23).abs() < 1e-12);
        assert_eq!(cat.tail_classes, vec![0, 3, 4]);
    }

    #[test]
    fn balanced_counts_have_no_tail() {
        let cat = ClassCatalog::from_counts(default_class_names(5), vec![7; 5], 0.3).unwrap();
        assert!(cat.skewness_ratios.iter().all(|&s| s == 1.0));
        assert!(cat.tail_classes.is_empty());
    }

    #[test]
    fn single_dominant_class() {
        let cat =
            ClassCatalog::from_counts(default_class_names(4), vec![0, 12, 0, 0], 0.3).unwrap();
        assert_eq!(cat.skewness_ratios, vec![0.0, 4.0, 0.0, 0.0]);
        assert_eq!(cat.tail_classes, vec![0, 2, 3]);
    }

    #[test]
    fn empty_is_rejected() {
        assert!(ClassCatalog::from_counts(default_class_names(2), vec![0, 0], 0.3).is_err());
    }
}
