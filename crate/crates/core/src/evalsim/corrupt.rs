//! Seeded corruption of registered stacks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::stack::FrameStack;

/// Replaces each observed pixel, independently with probability `p`, by 0
/// or 1 with equal odds. Unobserved pixels are untouched. Deterministic
/// under the seed.
pub fn add_salt_pepper(stack: &FrameStack, p: f64, seed: u64) -> Result<FrameStack> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!(
            "corruption probability must lie in [0, 1], got {p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = stack.data().clone();
    let mask = stack.mask();
    // fixed column-major traversal so the draw sequence is reproducible
    for j in 0..data.ncols() {
        for i in 0..data.nrows() {
            if mask[(i, j)] == 1.0 && rng.random_bool(p) {
                data[(i, j)] = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
            }
        }
    }
    stack.with_data(data)
}

/// Adds i.i.d. zero-mean Gaussian noise to the observed pixels, with the
/// variance set so the observed signal-to-noise ratio equals `snr_db`.
/// Values are not clamped, so the realized SNR is unbiased.
pub fn add_gaussian_snr(stack: &FrameStack, snr_db: f64, seed: u64) -> Result<FrameStack> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidConfig(format!("SNR must be finite, got {snr_db}")));
    }
    let mask = stack.mask();
    let mut power = 0.0;
    let mut observed = 0.0;
    for (v, m) in stack.data().iter().zip(mask.iter()) {
        if *m == 1.0 {
            power += v * v;
            observed += 1.0;
        }
    }
    if observed == 0.0 || power == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let sigma = (power / observed / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = stack.data().clone();
    for j in 0..data.ncols() {
        for i in 0..data.nrows() {
            if mask[(i, j)] == 1.0 {
                let n: f64 = rng.sample(StandardNormal);
                data[(i, j)] += sigma * n;
            }
        }
    }
    stack.with_data(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn test_stack(rows: usize, cols: usize) -> FrameStack {
        let m = (rows as f64).sqrt() as usize;
        let n = rows / m;
        assert_eq!(m * n, rows);
        let data = DMatrix::from_fn(rows, cols, |i, j| {
            0.15 + 0.7 * (((i * 31 + j * 17) % 97) as f64 / 97.0)
        });
        let mask = DMatrix::from_element(rows, cols, 1.0);
        FrameStack::new(m, n, data, mask).unwrap()
    }

    #[test]
    fn zero_probability_is_identity() {
        let stack = test_stack(100, 5);
        let out = add_salt_pepper(&stack, 0.0, 3).unwrap();
        assert_eq!(out.data(), stack.data());
    }

    #[test]
    fn full_probability_saturates_every_pixel() {
        let stack = test_stack(100, 5);
        let out = add_salt_pepper(&stack, 1.0, 3).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn corruption_rate_concentrates() {
        // 10^5 pixels at p = 0.2: corrupted fraction within 0.2 +- 0.01
        let stack = test_stack(10_000, 10);
        let out = add_salt_pepper(&stack, 0.2, 11).unwrap();
        let changed = stack
            .data()
            .iter()
            .zip(out.data().iter())
            .filter(|(a, b)| a != b)
            .count();
        let fraction = changed as f64 / 100_000.0;
        // the test data avoids {0, 1}, so every replacement is visible
        assert!(
            (fraction - 0.2).abs() < 0.01,
            "corrupted fraction {fraction}"
        );
    }

    #[test]
    fn unobserved_pixels_survive_corruption() {
        let data = DMatrix::from_element(16, 4, 0.5);
        let mask = DMatrix::from_fn(16, 4, |i, _| f64::from(i % 2 == 0));
        let stack = FrameStack::new(4, 4, data, mask.clone()).unwrap();
        let out = add_salt_pepper(&stack, 1.0, 9).unwrap();
        for j in 0..4 {
            for i in 0..16 {
                if mask[(i, j)] == 0.0 {
                    assert_eq!(out.data()[(i, j)], 0.0);
                } else {
                    assert!(out.data()[(i, j)] == 0.0 || out.data()[(i, j)] == 1.0);
                }
            }
        }
    }

    #[test]
    fn high_snr_perturbs_negligibly() {
        let stack = test_stack(100, 4);
        let out = add_gaussian_snr(&stack, 100.0, 5).unwrap();
        let max_dev = (out.data() - stack.data()).abs().max();
        assert!(max_dev < 1e-3, "max deviation {max_dev}");
    }

    #[test]
    fn realized_snr_matches_target() {
        let stack = test_stack(10_000, 10);
        for &target in &[10.0, 20.0] {
            let out = add_gaussian_snr(&stack, target, 17).unwrap();
            let signal: f64 = stack.data().iter().map(|v| v * v).sum();
            let noise: f64 = (out.data() - stack.data()).iter().map(|v| v * v).sum();
            let realized = 10.0 * (signal / noise).log10();
            assert!(
                (realized - target).abs() < 0.2,
                "target {target} dB, realized {realized} dB"
            );
        }
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let stack = test_stack(64, 6);
        let a = add_gaussian_snr(&stack, 15.0, 123).unwrap();
        let b = add_gaussian_snr(&stack, 15.0, 123).unwrap();
        assert_eq!(a.data(), b.data());
        let c = add_salt_pepper(&stack, 0.4, 77).unwrap();
        let d = add_salt_pepper(&stack, 0.4, 77).unwrap();
        assert_eq!(c.data(), d.data());
    }

    #[test]
    fn zero_signal_is_rejected() {
        let stack = FrameStack::new(2, 2, DMatrix::zeros(4, 3), DMatrix::from_element(4, 3, 1.0))
            .unwrap();
        assert!(matches!(
            add_gaussian_snr(&stack, 20.0, 0),
            Err(Error::ZeroSignal)
        ));
    }
}
