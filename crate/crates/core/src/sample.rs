//! Random inputs for property sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::potential::ProbVector;
use crate::ratio::WeightVector;

/// The generator for stream `stream` of a seeded batch. Streams of one seed
/// are independent.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `k` uniforms in `(0, 1]`, sorted non-increasing.
pub fn random_monotone_p(k: usize, rng: &mut impl Rng) -> Result<ProbVector> {
    let mut p: Vec<f64> = (0..k).map(|_| 1.0 - rng.random::<f64>()).collect();
    p.sort_by(|a, b| b.total_cmp(a));
    ProbVector::new(p)
}

/// `k` uniforms in `(0, 1]` in draw order.
pub fn random_p(k: usize, rng: &mut impl Rng) -> Result<ProbVector> {
    ProbVector::new((0..k).map(|_| 1.0 - rng.random::<f64>()).collect())
}

/// `k` weights log-uniform on `[1, max]`, sorted ascending.
pub fn random_weights(k: usize, max: f64, rng: &mut impl Rng) -> Result<WeightVector> {
    let span = max.ln();
    let mut beta: Vec<f64> = (0..k).map(|_| (rng.random::<f64>() * span).exp()).collect();
    beta.sort_by(f64::total_cmp);
    WeightVector::from_sorted(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    #[test]
    fn shapes() {
        let mut rng = stream_rng(1, 0);
        for k in 1..6 {
            let p = random_monotone_p(k, &mut rng).unwrap();
            assert!(p.is_monotone());
            assert!(p.as_slice().iter().all(|x| *x > 0.0 && *x <= 1.0));
            let b = random_weights(k, 1e3, &mut rng).unwrap();
            assert!(b.as_slice().windows(2).all(|w| w[0] <= w[1]));
            assert!(b.as_slice().iter().all(|x| (1.0..=1e3).contains(x)));
        }
    }
}
