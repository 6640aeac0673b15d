//! Helpers shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ventbench::latent::MlpWeights;

/// Which units are switched on, layer by layer.
fn activation_pattern(net: &MlpWeights, x: &[f64]) -> Vec<bool> {
    net.forward_trace(x)
        .unwrap()
        .activations
        .iter()
        .skip(1)
        .flatten()
        .map(|v| *v > 0.0)
        .collect()
}

/// Result of comparing analytic and finite-difference gradients.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    /// Worst per-draw relative error `|g - fd| / max(|g|, |fd|)` over all draws.
    pub max_rel_error: f64,
    /// Coordinates skipped because the perturbation crossed a rectifier kink.
    pub skipped: usize,
    pub checked: usize,
}

/// Checks `d(u · f(x)) / d(params, x)` against central differences with step
/// `h` on `draws` random networks, inputs and upstream vectors.
pub fn gradient_check(sizes: &[usize], draws: usize, h: f64, seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let (mut skipped, mut checked) = (0, 0);
    for _ in 0..draws {
        let mut net = MlpWeights::init(sizes, &mut rng);
        for p in net.params_mut() {
            *p += rng.random_range(-0.2..0.2);
        }
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(0.0..1.0)).collect();
        let up: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (g, dx) = net.gradient(&x, &up).unwrap();
        let loss = |n: &MlpWeights, x: &[f64]| -> f64 {
            n.forward(x).unwrap().iter().zip(&up).map(|(a, b)| a * b).sum()
        };

        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for i in 0..net.num_params() {
            let mut plus = net.clone();
            plus.params_mut()[i] += h;
            let mut minus = net.clone();
            minus.params_mut()[i] -= h;
            if activation_pattern(&plus, &x) != activation_pattern(&minus, &x) {
                skipped += 1;
                continue;
            }
            analytic.push(g[i]);
            numeric.push((loss(&plus, &x) - loss(&minus, &x)) / (2.0 * h));
        }
        for j in 0..x.len() {
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            if activation_pattern(&net, &xp) != activation_pattern(&net, &xm) {
                skipped += 1;
                continue;
            }
            analytic.push(dx[j]);
            numeric.push((loss(&net, &xp) - loss(&net, &xm)) / (2.0 * h));
        }
        checked += analytic.len();
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = na.max(nn);
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    GradCheck {
        max_rel_error: worst,
        skipped,
        checked,
    }
}
