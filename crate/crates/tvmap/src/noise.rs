//! Seeded measurement noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use tvmap_core::prox::KlParams;
use tvmap_core::LinearMap;

use crate::error::{Error, Result};

/// Zero photon counts are replaced by this before taking the logarithm.
pub const ZERO_COUNT_CLAMP: f64 = 0.1;

/// `x + sigma g` for real data; for complex (interleaved) data each entry
/// gets `sigma (g1 + i g2) / sqrt 2`, so the total variance per entry is
/// `sigma^2` either way.
pub fn add_gaussian(x: &[f64], sigma: f64, seed: u64, complex: bool) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::config("noise level must be nonnegative"));
    }
    if complex && !x.len().is_multiple_of(2) {
        return Err(Error::format("interleaved complex data has odd length"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = if complex {
        sigma / std::f64::consts::SQRT_2
    } else {
        sigma
    };
    Ok(x.iter()
        .map(|&v| {
            let g: f64 = StandardNormal.sample(&mut rng);
            v + s * g
        })
        .collect())
}

/// Draws counts `N ~ Pois(N0 exp(-mu Ax))` per detector bin and returns the
/// log-transformed measurement `-log(N / N0) / mu`.
///
/// Returns the data and the number of bins whose count was zero.
pub fn ct_poisson_log(op: &dyn LinearMap, x_true: &[f64], kl: KlParams, seed: u64) -> Result<(Vec<f64>, usize)> {
    if x_true.len() != op.domain_len() {
        return Err(Error::format("image does not match the projector"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut zeros = 0;
    let z = op
        .forward(x_true)
        .into_iter()
        .map(|ax| {
            let rate = kl.n0 * (-kl.mu * ax).exp();
            let mut n = if rate > 0.0 {
                Poisson::new(rate)
                    .map_err(|e| Error::format(format!("bad Poisson rate {rate}: {e}")))?
                    .sample(&mut rng)
            } else {
                0.0
            };
            if n == 0.0 {
                zeros += 1;
                n = ZERO_COUNT_CLAMP;
            }
            Ok(-(n / kl.n0).ln() / kl.mu)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((z, zeros))
}
