#![allow(dead_code)]

use chebdea::dea::Panel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform [0, 1) entries, each zeroed with probability `zero_share`.
pub fn random_panel(rng: &mut ChaCha8Rng, n: usize, r: usize, s: usize, zero_share: f64) -> Panel {
    let mut draw = |k: usize| -> Vec<f64> {
        (0..k)
            .map(|_| if rng.random::<f64>() < zero_share { 0.0 } else { rng.random::<f64>() })
            .collect()
    };
    let inputs = (0..n).map(|_| draw(r)).collect();
    let outputs = (0..n).map(|_| draw(s)).collect();
    Panel::from_rows(inputs, outputs).unwrap()
}

/// Entries uniform on [0.1, 1.1).
pub fn positive_panel(rng: &mut ChaCha8Rng, n: usize, r: usize, s: usize) -> Panel {
    let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| 0.1 + rng.random::<f64>()).collect() };
    let inputs = (0..n).map(|_| draw(r)).collect();
    let outputs = (0..n).map(|_| draw(s)).collect();
    Panel::from_rows(inputs, outputs).unwrap()
}

/// A random panel with dimensions drawn from the given ranges.
pub fn random_shape(rng: &mut ChaCha8Rng, max_n: usize, max_r: usize, max_s: usize, zero_share: f64) -> Panel {
    let n = rng.random_range(1..=max_n);
    let r = rng.random_range(1..=max_r);
    let s = rng.random_range(1..=max_s);
    random_panel(rng, n, r, s, zero_share)
}

/// Indices split into `k` random groups, every group non-empty when `n >= k`.
pub fn random_partition(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<String> {
    let mut labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    labels.into_iter().map(|l| format!("G{}", l)).collect()
}
