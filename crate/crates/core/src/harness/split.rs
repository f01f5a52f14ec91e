use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Shuffled index split: `ratio` is the training fraction and the test set
/// gets `floor((1 − ratio) · n)` samples.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("split ratio {ratio} outside (0, 1)")));
    }
    let n_test = ((1.0 - ratio) * n as f64 + 1e-9).floor() as usize;
    if n > 0 && n_test == 0 {
        log::warn!("split of {n} samples at ratio {ratio} leaves the test set empty");
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = idx.split_off(n - n_test);
    Ok((idx, test))
}

/// [`split_indices`] applied to a slice.
pub fn split<T: Clone>(items: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let (tr, te) = split_indices(items.len(), ratio, seed)?;
    Ok((
        tr.into_iter().map(|i| items[i].clone()).collect(),
        te.into_iter().map(|i| items[i].clone()).collect(),
    ))
}
