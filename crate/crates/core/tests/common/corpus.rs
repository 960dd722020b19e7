use memword_core::process::{rng_from_seed, sample_explicit};
use memword_core::ExplicitChain;
use rand::Rng;

/// Mix of iid, skewed Markov, and nearly periodic sequences.
pub fn corpus(count: usize, seed: u64) -> Vec<Vec<u32>> {
    let mut rng = rng_from_seed(seed);
    let markov = ExplicitChain::new(
        2,
        2,
        vec![
            vec![0.95, 0.05],
            vec![0.3, 0.7],
            vec![0.1, 0.9],
            vec![0.6, 0.4],
        ],
    )
    .unwrap();
    (0..count)
        .map(|i| {
            let len = rng.random_range(1..=200);
            let alphabet = rng.random_range(2..=3u32);
            match i % 3 {
                0 => (0..len).map(|_| rng.random_range(0..alphabet)).collect(),
                1 => sample_explicit(&markov, len, rng.random()).into_inner(),
                _ => {
                    let period = rng.random_range(2..=5);
                    let pattern: Vec<u32> =
                        (0..period).map(|_| rng.random_range(0..alphabet)).collect();
                    (0..len)
                        .map(|t| {
                            if rng.random_bool(0.05) {
                                rng.random_range(0..alphabet)
                            } else {
                                pattern[t % period]
                            }
                        })
                        .collect()
                }
            }
        })
        .collect()
}
