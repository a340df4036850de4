//! Central finite-difference verification of [`MlpParams::backward`].

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::net::mlp::{Activation, MlpParams, OutputTransform};
use crate::net::rng::{SeedStreams, Stream};

pub const FD_STEP: f64 = 1e-5;
/// Below this magnitude the absolute difference is used instead of the relative one.
pub const ABS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Number of partial derivatives compared (parameters plus inputs).
    pub checked: usize,
}

fn mismatch(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    let diff = (analytic - numeric).abs();
    if scale < ABS_FLOOR {
        diff
    } else {
        diff / scale
    }
}

fn objective(params: &MlpParams, input: &[f64], probe: &[f64]) -> Result<f64> {
    let out = params.predict(input, 1)?;
    Ok(out.iter().zip(probe).map(|(y, p)| y * p).sum())
}

/// Compares every analytic partial derivative of `probe . f(input)` (with
/// respect to parameters and inputs) against central differences.
pub fn gradient_check(params: &MlpParams, input: &[f64], probe: &[f64]) -> Result<GradCheckReport> {
    if probe.len() != params.output_dim() {
        return Err(Error::ShapeMismatch(format!(
            "probe has {} entries, network outputs {}",
            probe.len(),
            params.output_dim()
        )));
    }
    let cache = params.forward(input, 1)?;
    let (grads, input_grad) = params.backward(&cache, probe)?;

    let mut worst: f64 = 0.0;
    let mut work = params.clone();
    for i in 0..params.num_params() {
        let orig = params.values()[i];
        work.values_mut()[i] = orig + FD_STEP;
        let plus = objective(&work, input, probe)?;
        work.values_mut()[i] = orig - FD_STEP;
        let minus = objective(&work, input, probe)?;
        work.values_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        worst = worst.max(mismatch(grads.values()[i], numeric));
    }
    let mut x = input.to_vec();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + FD_STEP;
        let plus = objective(params, &x, probe)?;
        x[i] = orig - FD_STEP;
        let minus = objective(params, &x, probe)?;
        x[i] = orig;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        worst = worst.max(mismatch(input_grad[i], numeric));
    }
    Ok(GradCheckReport {
        max_relative_error: worst,
        checked: params.num_params() + input.len(),
    })
}

/// Gradient-checks `count` networks (Xavier weights, uniform biases) of random depth, width,
/// activation and output transform, each at a random input and probe. Returns
/// the worst result.
pub fn random_gradient_checks(count: usize, seed: u64) -> Result<GradCheckReport> {
    let mut rng = SeedStreams::new(seed).stream(Stream::Aux);
    let mut worst = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
    };
    for _ in 0..count {
        let critic = rng.random_bool(0.5);
        let mut sizes = vec![if critic { 2 } else { 1 }];
        for _ in 0..rng.random_range(1..=3) {
            sizes.push(rng.random_range(1..=24));
        }
        sizes.push(1);
        let act = if rng.random_bool(0.5) { Activation::Relu } else { Activation::Tanh };
        let out = if critic {
            OutputTransform::Identity
        } else {
            OutputTransform::ScaledTanh { limit: 0.1 }
        };
        let mut net = MlpParams::init_xavier(&sizes, act, out, &mut rng)?;
        // Nonzero biases keep pre-activations of dead units off the relu kink.
        let biases: Vec<usize> = net.layers().flat_map(|l| l.bias..l.bias + l.fan_out).collect();
        for k in biases {
            net.values_mut()[k] = rng.random_range(-0.5..=0.5);
        }
        let input: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let probe = [rng.random_range(-1.0..=1.0)];
        let r = gradient_check(&net, &input, &probe)?;
        worst.max_relative_error = worst.max_relative_error.max(r.max_relative_error);
        worst.checked += r.checked;
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_is_exact() {
        let net = MlpParams::zeros(&[2, 4, 1], Activation::Relu, OutputTransform::Identity).unwrap();
        let r = gradient_check(&net, &[0.3, 0.05], &[1.0]).unwrap();
        assert_eq!(r.max_relative_error, 0.0);
    }

    #[test]
    fn fresh_critic() {
        let mut rng = SeedStreams::new(5).stream(Stream::Init);
        let net = MlpParams::init_xavier(&[2, 64, 64, 1], Activation::Relu, OutputTransform::Identity, &mut rng)
            .unwrap();
        let r = gradient_check(&net, &[0.4, -0.03], &[1.0]).unwrap();
        assert!(r.max_relative_error <= 1e-4, "{r:?}");
    }

    #[test]
    fn fresh_actor() {
        let mut rng = SeedStreams::new(6).stream(Stream::Init);
        let net = MlpParams::init_xavier(
            &[1, 64, 64, 1],
            Activation::Relu,
            OutputTransform::ScaledTanh { limit: 0.1 },
            &mut rng,
        )
        .unwrap();
        let r = gradient_check(&net, &[0.7], &[1.0]).unwrap();
        assert!(r.max_relative_error <= 1e-4, "{r:?}");
    }

    #[test]
    fn random_networks() {
        let r = random_gradient_checks(20, 1).unwrap();
        assert!(r.max_relative_error <= 1e-4, "{r:?}");
        assert!(r.checked > 20);
    }

    #[test]
    fn probe_shape_checked() {
        let net = MlpParams::zeros(&[1, 1], Activation::Relu, OutputTransform::Identity).unwrap();
        assert!(gradient_check(&net, &[0.1], &[1.0, 2.0]).is_err());
    }
}
