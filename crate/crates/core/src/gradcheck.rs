//! Finite-difference verification of analytic gradients.

use crate::error::Result;
use crate::nn::Mlp;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / f64::max(1e-8, analytic.abs() + numeric.abs())
}

/// Compares the network's analytic parameter gradients against central finite
/// differences of `loss` and returns the maximum relative error.
///
/// `loss` maps the network output to `(value, d value / d output)`; only the
/// value is used on the numeric path, so a wrong gradient in either `loss` or
/// the backward pass shows up as a large return value.
pub fn gradient_check<L>(mlp: &mut Mlp, input: &[f64], loss: &L) -> Result<f64>
where
    L: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (out, cache) = mlp.forward(input)?;
    let (_, d_out) = loss(&out);
    let (grads, _) = mlp.backward(&cache, &d_out)?;

    let mut max_err = 0.0f64;
    let shapes: Vec<usize> = mlp.params().iter().map(|t| t.len()).collect();
    for (ti, len) in shapes.into_iter().enumerate() {
        for k in 0..len {
            mlp.nudge_param(ti, k, FD_STEP);
            let plus = loss(&mlp.forward(input)?.0).0;
            mlp.nudge_param(ti, k, -2.0 * FD_STEP);
            let minus = loss(&mlp.forward(input)?.0).0;
            mlp.nudge_param(ti, k, FD_STEP);

            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let analytic = grads.tensors[ti].data()[k];
            max_err = max_err.max(rel_error(analytic, numeric));
        }
    }
    Ok(max_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, DenseLayer};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quadratic_loss(target: Vec<f64>) -> impl Fn(&[f64]) -> (f64, Vec<f64>) {
        move |out: &[f64]| {
            let v = out
                .iter()
                .zip(&target)
                .map(|(y, t)| 0.5 * (y - t) * (y - t))
                .sum::<f64>();
            let grad = out.iter().zip(&target).map(|(y, t)| y - t).collect();
            (v, grad)
        }
    }

    #[test]
    fn linear_model_quadratic_loss_is_near_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mlp = Mlp::from_layers(vec![DenseLayer::new(3, 2, Activation::Identity, &mut rng)]).unwrap();
        let err = gradient_check(&mut mlp, &[0.4, -0.8, 1.5], &quadratic_loss(vec![0.1, -0.2])).unwrap();
        assert!(err < 1e-8, "max rel error {err}");
    }

    #[test]
    fn two_hidden_layer_tanh_mlp() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut mlp = Mlp::network(&[3, 64, 64, 2], &mut rng);
        let err = gradient_check(&mut mlp, &[0.2, -0.5, 0.9], &quadratic_loss(vec![0.3, 0.7])).unwrap();
        assert!(err < 1e-4, "max rel error {err}");
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut mlp = Mlp::network(&[2, 8, 1], &mut rng);
        // deliberately wrong upstream gradient (1.5x) with a correct loss value
        let bad_loss = |out: &[f64]| {
            let v = 0.5 * out[0] * out[0];
            (v, vec![1.5 * out[0]])
        };
        let err = gradient_check(&mut mlp, &[0.6, -0.3], &bad_loss).unwrap();
        assert!(err > 1e-2, "corruption not detected: {err}");
    }
}
