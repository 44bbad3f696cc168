use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::RetrievalError;
use crate::seed;

/// Train/validation/test proportions, normalized on use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 55.0, validation: 5.0, test: 10.0 }
    }
}

impl SplitRatios {
    pub fn normalized(&self) -> Result<[f64; 3], RetrievalError> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(RetrievalError::Ratios(format!("{parts:?} has a negative or non-finite part")));
        }
        let total: f64 = parts.iter().sum();
        if total <= 0.0 {
            return Err(RetrievalError::Ratios("ratios sum to zero".into()));
        }
        Ok(parts.map(|p| p / total))
    }

    /// Largest-remainder apportionment of `n` items; ties go to the
    /// earlier split.
    pub fn sizes(&self, n: usize) -> Result<[usize; 3], RetrievalError> {
        let fr = self.normalized()?;
        let exact = fr.map(|f| f * n as f64);
        let mut sizes = exact.map(|x| (x + 1e-9).floor() as usize);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| (exact[b] - sizes[b] as f64).total_cmp(&(exact[a] - sizes[a] as f64)).then(a.cmp(&b)));
        let mut left = n - sizes.iter().sum::<usize>();
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            sizes[i] += 1;
            left -= 1;
        }
        Ok(sizes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    /// Which split an id went to: 0 train, 1 validation, 2 test.
    pub fn part_of(&self, id: &str) -> Option<usize> {
        [&self.train, &self.validation, &self.test].iter().position(|p| p.iter().any(|x| x == id))
    }
}

/// Shuffles anchor ids with `seed` and cuts them by `ratios`. Ids are
/// deduplicated and sorted first, so the input order does not matter.
/// Generated targets are assigned later by following their anchor.
pub fn split_dataset(anchors: &[String], ratios: &SplitRatios, seed: u64) -> Result<DatasetSplit, RetrievalError> {
    let mut ids = anchors.to_vec();
    ids.sort();
    ids.dedup();
    ids.shuffle(&mut seed::rng(seed));
    let [a, b, _] = ratios.sizes(ids.len())?;
    let test = ids.split_off(a + b);
    let validation = ids.split_off(a);
    let mut split = DatasetSplit { train: ids, validation, test };
    for part in [&mut split.train, &mut split.validation, &mut split.test] {
        part.sort();
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("a{i:04}")).collect()
    }

    #[test]
    fn seventy_anchors_default_ratios() {
        let s = split_dataset(&ids(70), &SplitRatios::default(), 3).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (55, 5, 10));
    }

    #[test]
    fn partition_and_determinism() {
        for n in [0, 1, 2, 13, 99, 140] {
            let input = ids(n);
            let s = split_dataset(&input, &SplitRatios::default(), 9).unwrap();
            let all: Vec<&String> = s.train.iter().chain(&s.validation).chain(&s.test).collect();
            assert_eq!(all.len(), n);
            let uniq: HashSet<&String> = all.iter().copied().collect();
            assert_eq!(uniq.len(), n);
            assert_eq!(s, split_dataset(&input, &SplitRatios::default(), 9).unwrap());
            let mut rev = input.clone();
            rev.reverse();
            assert_eq!(s, split_dataset(&rev, &SplitRatios::default(), 9).unwrap());
        }
    }

    #[test]
    fn sizes_sum_and_stay_close() {
        let r = SplitRatios { train: 0.7, validation: 0.1, test: 0.2 };
        for n in 0..300 {
            let s = r.sizes(n).unwrap();
            assert_eq!(s.iter().sum::<usize>(), n);
            for (size, f) in s.iter().zip(r.normalized().unwrap()) {
                assert!((*size as f64 - f * n as f64).abs() < 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn bad_ratios() {
        assert!(SplitRatios { train: -1.0, validation: 1.0, test: 1.0 }.sizes(3).is_err());
        assert!(SplitRatios { train: 0.0, validation: 0.0, test: 0.0 }.sizes(3).is_err());
    }
}
