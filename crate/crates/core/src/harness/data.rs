//! Synthetic binary datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::models::BitState;

/// Two clusters around complementary prototypes (first half on, second
/// half on), each bit flipped independently with probability `noise`.
pub fn two_cluster_data(visible: usize, count: usize, noise: f64, seed: u64) -> Vec<BitState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let cluster = k % 2;
            let bits = (0..visible)
                .map(|i| {
                    let on = u8::from((i < visible / 2) == (cluster == 0));
                    if rng.random::<f64>() < noise {
                        1 - on
                    } else {
                        on
                    }
                })
                .collect();
            BitState::from_bits(bits).expect("binary")
        })
        .collect()
}
