use crate::error::{shape_mismatch, Error, Result};
use crate::numerics::{RandomStream, Tensor};

/// Means below this use Knuth's multiplication sampler; above, a rounded normal
/// approximation.
pub const POISSON_EXACT_LIMIT: f64 = 30.0;

/// Shot-noise level and the stream that realizes it.
#[derive(Clone, Debug)]
pub struct NoiseConfig {
    /// Noise level α ≥ 0; zero disables noise.
    pub alpha: f64,
    /// Factor converting magnitudes to photon-count units before sampling (see
    /// [`crate::measurement::MeasurementOperator::count_scale`]). With 1 the
    /// model is applied to the magnitudes as given.
    pub count_scale: f64,
    pub stream: RandomStream,
}

impl NoiseConfig {
    pub fn new(alpha: f64, count_scale: f64, stream: RandomStream) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise level {alpha} must be >= 0")));
        }
        if !(count_scale > 0.0 && count_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "count scale {count_scale} must be positive"
            )));
        }
        Ok(NoiseConfig {
            alpha,
            count_scale,
            stream,
        })
    }
}

/// Poisson draw with the given mean.
pub fn sample_poisson(mean: f64, stream: &mut RandomStream) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < POISSON_EXACT_LIMIT {
        let limit = (-mean).exp();
        let mut k = 0u64;
        let mut p = 1.0;
        loop {
            p *= stream.uniform();
            if p <= limit {
                return k;
            }
            k += 1;
        }
    }
    let draw = mean + mean.sqrt() * stream.standard_normal();
    draw.round().max(0.0) as u64
}

/// `ŷ = (α/c)·√s` with `s ~ Poisson(c²y²/α²)` elementwise, where `c` is the
/// config's count scale; `α = 0` returns `y` unchanged.
pub fn shot_noise(y: &Tensor, config: &mut NoiseConfig) -> Result<Tensor> {
    if let Some(&bad) = y.data().iter().find(|&&v| v < 0.0) {
        return Err(Error::NegativeMagnitude(bad));
    }
    if config.alpha == 0.0 {
        return Ok(y.clone());
    }
    let a = config.alpha / config.count_scale;
    let out = y
        .data()
        .iter()
        .map(|&v| {
            let s = sample_poisson((v / a) * (v / a), &mut config.stream);
            a * (s as f64).sqrt()
        })
        .collect();
    Tensor::new(y.shape(), out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnrReport {
    pub mu_magn: f64,
    pub sigma_noise: f64,
    pub snr: f64,
}

/// Mean true magnitude over the population standard deviation of `ŷ − y`.
pub fn snr(y: &Tensor, noisy: &Tensor) -> Result<SnrReport> {
    if y.shape() != noisy.shape() {
        return Err(shape_mismatch(y.shape(), noisy.shape()));
    }
    let n = y.len() as f64;
    let mu_magn = y.mean();
    let diff: Vec<f64> = noisy.data().iter().zip(y.data()).map(|(a, b)| a - b).collect();
    let dm = diff.iter().sum::<f64>() / n;
    let sigma_noise = (diff.iter().map(|d| (d - dm) * (d - dm)).sum::<f64>() / n).sqrt();
    if sigma_noise == 0.0 {
        return Err(Error::Noiseless);
    }
    Ok(SnrReport {
        mu_magn,
        sigma_noise,
        snr: mu_magn / sigma_noise,
    })
}
