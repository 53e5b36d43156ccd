use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded shuffle followed by round-robin dealing: fold sizes differ by at
/// most one, and the same `(n, k, seed)` always yields the same assignment.
pub fn assign_folds(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut folds = vec![0; n];
    for (pos, &idx) in order.iter().enumerate() {
        folds[idx] = pos % k.max(1);
    }
    folds
}

/// Splits row indices into (train, test) for the given fold.
pub fn split(assignments: &[usize], fold: usize) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, &f) in assignments.iter().enumerate() {
        if f == fold {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn balanced_partition(n in 1usize..200, k in 1usize..12, seed in any::<u64>()) {
            let a = assign_folds(n, k, seed);
            let mut sizes = vec![0usize; k];
            for &f in &a {
                prop_assert!(f < k);
                sizes[f] += 1;
            }
            let max = *sizes.iter().max().unwrap();
            let min = *sizes.iter().min().unwrap();
            prop_assert!(max - min <= 1);
            prop_assert_eq!(a, assign_folds(n, k, seed));
        }
    }
}
