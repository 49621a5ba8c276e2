use rand::seq::SliceRandom;
use trajplan_diffmath::seeded_rng;

use crate::TrainError;

/// RNG stream of the train/validation shuffle.
pub const SPLIT_STREAM: u64 = 0x5171;

/// Shuffles `items` with `seed` and cuts them at `round(ratio · n)`.
/// Relative order inside each part follows the shuffle.
pub fn split_dataset<T: Clone>(items: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>), TrainError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(TrainError::Config(vec![format!("split ratio {ratio} outside (0, 1)")]));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut seeded_rng(seed, SPLIT_STREAM));
    let n_train = (ratio * items.len() as f64).round() as usize;
    let pick = |ix: &[usize]| ix.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn eight_two() {
        let items: Vec<u32> = (0..10).collect();
        let (a, b) = split_dataset(&items, 0.8, 3).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let sa: BTreeSet<_> = a.iter().collect();
        assert!(b.iter().all(|x| !sa.contains(x)));
        let all: BTreeSet<_> = a.iter().chain(&b).copied().collect();
        assert_eq!(all, items.iter().copied().collect());
    }

    #[test]
    fn same_seed_same_split() {
        let items: Vec<u32> = (0..50).collect();
        assert_eq!(split_dataset(&items, 0.8, 9).unwrap(), split_dataset(&items, 0.8, 9).unwrap());
        assert_ne!(split_dataset(&items, 0.8, 9).unwrap(), split_dataset(&items, 0.8, 10).unwrap());
    }

    #[test]
    fn ratio_bounds() {
        for r in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(split_dataset(&[1, 2, 3], r, 0).is_err());
        }
    }
}
