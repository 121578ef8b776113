use ndarray::Array2;
use rand::Rng;

use crate::autodiff::{ParamId, Tape, Var};
use crate::error::{Error, Result};
use crate::rng;

/// Standard Gumbel sample `−ln(−ln U)` with `U` uniform on `(0, 1)`.
pub fn gumbel_sample<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    -(-u.ln()).ln()
}

/// `softmax((ln α + g) / λ)`.
pub fn gumbel_weights(alpha: &[f64], temperature: f64, noise: &[f64]) -> Result<Vec<f64>> {
    if alpha.len() != noise.len() || alpha.is_empty() {
        return Err(Error::Invalid(format!("{} logits with {} noise values", alpha.len(), noise.len())));
    }
    if let Some(bad) = alpha.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::Invalid(format!("architecture weight {bad} is not positive")));
    }
    if !(temperature > 0.0) {
        return Err(Error::Invalid(format!("temperature {temperature} is not positive")));
    }
    let z: Vec<f64> = alpha.iter().zip(noise).map(|(a, g)| (a.ln() + g) / temperature).collect();
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    Ok(e.into_iter().map(|v| v / s).collect())
}

/// Where the Gumbel perturbation of each mixed choice comes from.
#[derive(Debug, Clone)]
pub enum NoiseSource {
    /// `G = 0`.
    Off,
    /// Fresh draws on every forward pass.
    Sampled(rng::Rng),
    /// The same draw for a given parameter on every forward pass.
    Frozen(u64),
}

impl NoiseSource {
    pub fn sampled(seed: u64) -> Self {
        Self::Sampled(rng::rng(seed))
    }

    /// `1 × k` noise row for the architecture parameter `id`.
    pub fn draw(&mut self, id: ParamId, k: usize) -> Array2<f64> {
        match self {
            Self::Off => Array2::zeros((1, k)),
            Self::Sampled(r) => Array2::from_shape_fn((1, k), |_| gumbel_sample(r)),
            Self::Frozen(seed) => {
                let mut r = rng::rng(rng::derive(*seed, id.index() as u64));
                Array2::from_shape_fn((1, k), |_| gumbel_sample(&mut r))
            }
        }
    }
}

/// Tape version over a logit row `θ = ln α`.
pub fn gumbel_softmax<'t>(theta: Var<'t>, noise: Array2<f64>, temperature: f64) -> Result<Var<'t>> {
    if !(temperature > 0.0) {
        return Err(Error::Invalid(format!("temperature {temperature} is not positive")));
    }
    let tape: &'t Tape = theta.tape();
    theta.add(tape.constant(noise))?.scale(1.0 / temperature)?.softmax_row()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_logits_without_noise_are_uniform() {
        for t in [0.01, 1.0, 50.0] {
            let w = gumbel_weights(&[2.0; 4], t, &[0.0; 4]).unwrap();
            assert!(w.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn unit_temperature_normalizes_alpha() {
        let w = gumbel_weights(&[0.7, 0.3], 1.0, &[0.0, 0.0]).unwrap();
        assert!((w[0] - 0.7).abs() < 1e-15 && (w[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn non_positive_logit_rejected() {
        assert!(gumbel_weights(&[1.0, 0.0], 1.0, &[0.0, 0.0]).is_err());
        assert!(gumbel_weights(&[1.0, -2.0], 1.0, &[0.0, 0.0]).is_err());
        assert!(gumbel_weights(&[1.0, 1.0], 0.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn frozen_noise_repeats() {
        let mut a = NoiseSource::Frozen(3);
        let id = ParamId(4);
        assert_eq!(a.draw(id, 5), a.draw(id, 5));
        assert_ne!(a.draw(id, 5), a.draw(ParamId(5), 5));
        let mut s = NoiseSource::sampled(3);
        assert_ne!(s.draw(id, 5), s.draw(id, 5));
    }
}
