//! Dense feed-forward networks over a flat parameter slice.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Scale of the initial parameter distribution N(0, INIT_STD^2). Small
/// enough that freshly initialized policies are near-uniform.
pub const INIT_STD: f64 = 0.2;

/// SELU self-normalizing constants.
pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Selu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Selu => {
                if x > 0.0 {
                    SELU_LAMBDA * x
                } else {
                    SELU_LAMBDA * SELU_ALPHA * (x.exp() - 1.0)
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative as a function of the pre-activation value.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Selu => {
                if x > 0.0 {
                    SELU_LAMBDA
                } else {
                    SELU_LAMBDA * SELU_ALPHA * x.exp()
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Draw `n` parameters from the initialization distribution.
pub fn init_params(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    (0..n).map(|_| normal.sample(rng)).collect()
}

/// Shape and activation schedule of a dense network. Parameters are packed
/// `[W1, b1, W2, b2, ...]` with each `W` stored row-major (`out x in`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub dims: Vec<usize>,
    pub acts: Vec<Activation>,
}

/// Forward-pass intermediates needed by the backward pass: the input and
/// every pre-activation vector.
#[derive(Debug, Clone)]
pub struct MlpCache {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("non-empty network")
    }
}

impl MlpSpec {
    /// `dims` lists layer widths input-first; `acts` has one entry per layer.
    pub fn new(dims: Vec<usize>, acts: Vec<Activation>) -> Self {
        assert!(dims.len() >= 2, "network needs input and output dims");
        assert_eq!(dims.len(), acts.len() + 1, "one activation per layer");
        assert!(dims.iter().all(|&d| d > 0), "zero-width layer");
        MlpSpec { dims, acts }
    }

    /// Uniform-width body with `depth` hidden layers and a linear readout.
    pub fn trunk(input: usize, width: usize, depth: usize, output: usize) -> Self {
        let mut dims = vec![input];
        dims.extend(std::iter::repeat(width).take(depth));
        dims.push(output);
        let mut acts = vec![Activation::Selu; depth];
        acts.push(Activation::Identity);
        MlpSpec::new(dims, acts)
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.dims
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        self.forward_cached(params, x).0
    }

    /// Forward pass that retains intermediates for `backward`.
    pub fn forward_cached(&self, params: &[f64], x: &[f64]) -> (Vec<f64>, MlpCache) {
        assert_eq!(params.len(), self.param_count(), "parameter buffer size");
        assert_eq!(x.len(), self.input_dim(), "input dimension");
        let mut cache = MlpCache {
            input: x.to_vec(),
            pre: Vec::with_capacity(self.acts.len()),
            post: Vec::with_capacity(self.acts.len()),
        };
        let mut offset = 0;
        let mut cur = x.to_vec();
        for (l, act) in self.acts.iter().enumerate() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = &params[offset..offset + n_in * n_out];
            let b = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let mut pre = vec![0.0; n_out];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut acc = b[o];
                for (wi, xi) in row.iter().zip(&cur) {
                    acc += wi * xi;
                }
                pre[o] = acc;
            }
            let post: Vec<f64> = pre.iter().map(|&p| act.apply(p)).collect();
            cache.pre.push(pre);
            cur = post.clone();
            cache.post.push(post);
        }
        (cur, cache)
    }

    /// Backpropagate `d_out` through the network, adding parameter
    /// gradients into `grad` (same packing as `params`) and returning the
    /// gradient with respect to the input.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &MlpCache,
        d_out: &[f64],
        grad: &mut [f64],
    ) -> Vec<f64> {
        assert_eq!(grad.len(), self.param_count(), "gradient buffer size");
        assert_eq!(d_out.len(), self.output_dim(), "output gradient dimension");
        // Per-layer parameter offsets, walked backwards.
        let mut offsets = Vec::with_capacity(self.acts.len());
        let mut offset = 0;
        for l in 0..self.acts.len() {
            offsets.push(offset);
            offset += self.dims[l] * self.dims[l + 1] + self.dims[l + 1];
        }
        let mut delta = d_out.to_vec();
        for l in (0..self.acts.len()).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let off = offsets[l];
            let pre = &cache.pre[l];
            let below: &[f64] = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            // through the activation
            for o in 0..n_out {
                delta[o] *= self.acts[l].derivative(pre[o]);
            }
            let (gw, gb) = {
                let seg = &mut grad[off..off + n_in * n_out + n_out];
                seg.split_at_mut(n_in * n_out)
            };
            for o in 0..n_out {
                let d = delta[o];
                gb[o] += d;
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                for (g, &x) in row.iter_mut().zip(below) {
                    *g += d * x;
                }
            }
            // gradient wrt the layer input
            let w = &params[off..off + n_in * n_out];
            let mut next = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                let row = &w[o * n_in..(o + 1) * n_in];
                for (nx, &wi) in next.iter_mut().zip(row) {
                    *nx += d * wi;
                }
            }
            delta = next;
        }
        delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngutil::{derive_stream, StreamKind};

    #[test]
    fn selu_matches_closed_form() {
        assert_eq!(Activation::Selu.apply(2.0), SELU_LAMBDA * 2.0);
        let x = -1.5f64;
        let expect = SELU_LAMBDA * SELU_ALPHA * (x.exp() - 1.0);
        assert!((Activation::Selu.apply(x) - expect).abs() < 1e-15);
        assert_eq!(Activation::Selu.derivative(3.0), SELU_LAMBDA);
        assert!((Activation::Selu.derivative(x) - SELU_LAMBDA * SELU_ALPHA * x.exp()).abs() < 1e-15);
    }

    #[test]
    fn activation_derivatives_match_finite_differences() {
        let h = 1e-6;
        for act in [Activation::Identity, Activation::Selu, Activation::Tanh] {
            for &x in &[-2.0, -0.3, 0.1, 1.7] {
                let fd = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
                assert!(
                    (act.derivative(x) - fd).abs() < 1e-8,
                    "{act:?} at {x}: {} vs {fd}",
                    act.derivative(x)
                );
            }
        }
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let spec = MlpSpec::trunk(3, 8, 2, 2);
        let params = vec![0.0; spec.param_count()];
        let y = spec.forward(&params, &[1.0, -2.0, 0.5]);
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn single_linear_layer_is_affine() {
        // one layer, identity activation: y = Wx + b
        let spec = MlpSpec::new(vec![2, 2], vec![Activation::Identity]);
        let params = vec![1.0, 2.0, 3.0, 4.0, 10.0, 20.0]; // W rows (1,2),(3,4); b (10,20)
        let y = spec.forward(&params, &[1.0, 1.0]);
        assert_eq!(y, vec![13.0, 27.0]);
    }

    #[test]
    fn param_count_matches_packing() {
        let spec = MlpSpec::trunk(5, 7, 3, 2);
        // (5*7+7) + (7*7+7)*2 + (7*2+2)
        assert_eq!(spec.param_count(), 42 + 56 * 2 + 16);
    }

    #[test]
    fn init_params_have_requested_spread() {
        let mut rng = derive_stream(31, StreamKind::Init, 0, 0);
        let params = init_params(40_000, &mut rng);
        let mean = params.iter().sum::<f64>() / params.len() as f64;
        let std = (params.iter().map(|p| (p - mean).powi(2)).sum::<f64>()
            / params.len() as f64)
            .sqrt();
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((0.19..=0.21).contains(&std), "std {std}");
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = derive_stream(32, StreamKind::Init, 1, 0);
        let spec = MlpSpec::new(
            vec![4, 6, 5, 3],
            vec![Activation::Tanh, Activation::Selu, Activation::Identity],
        );
        let params = init_params(spec.param_count(), &mut rng);
        let x = vec![0.3, -0.8, 1.2, 0.05];
        // scalar objective: weighted sum of outputs
        let w_out = [0.7, -1.3, 0.4];
        let value = |p: &[f64]| -> f64 {
            spec.forward(p, &x)
                .iter()
                .zip(&w_out)
                .map(|(y, w)| y * w)
                .sum()
        };
        let (_, cache) = spec.forward_cached(&params, &x);
        let mut grad = vec![0.0; spec.param_count()];
        spec.backward(&params, &cache, &w_out, &mut grad);
        let h = 1e-6;
        let mut checked = 0;
        for i in (0..params.len()).step_by(7) {
            let mut plus = params.clone();
            plus[i] += h;
            let mut minus = params.clone();
            minus[i] -= h;
            let fd = (value(&plus) - value(&minus)) / (2.0 * h);
            let rel = (grad[i] - fd).abs() / (1e-8 + fd.abs().max(grad[i].abs()));
            assert!(rel < 1e-4, "param {i}: analytic {} vs fd {fd}", grad[i]);
            checked += 1;
        }
        assert!(checked > 10);
    }

    #[test]
    fn backward_input_gradient_matches_finite_differences() {
        let mut rng = derive_stream(33, StreamKind::Init, 2, 0);
        let spec = MlpSpec::trunk(3, 5, 2, 2);
        let params = init_params(spec.param_count(), &mut rng);
        let x = vec![0.2, -0.4, 0.9];
        let w_out = [1.0, -0.5];
        let (_, cache) = spec.forward_cached(&params, &x);
        let mut grad = vec![0.0; spec.param_count()];
        let dx = spec.backward(&params, &cache, &w_out, &mut grad);
        let h = 1e-6;
        for i in 0..x.len() {
            let mut plus = x.clone();
            plus[i] += h;
            let mut minus = x.clone();
            minus[i] -= h;
            let f = |xx: &[f64]| -> f64 {
                spec.forward(&params, xx)
                    .iter()
                    .zip(&w_out)
                    .map(|(y, w)| y * w)
                    .sum()
            };
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            assert!((dx[i] - fd).abs() < 1e-6, "input {i}: {} vs {fd}", dx[i]);
        }
    }

    #[test]
    fn gradients_accumulate_across_calls() {
        let mut rng = derive_stream(34, StreamKind::Init, 3, 0);
        let spec = MlpSpec::trunk(2, 4, 1, 1);
        let params = init_params(spec.param_count(), &mut rng);
        let x = vec![0.5, -0.5];
        let (_, cache) = spec.forward_cached(&params, &x);
        let mut once = vec![0.0; spec.param_count()];
        spec.backward(&params, &cache, &[1.0], &mut once);
        let mut twice = vec![0.0; spec.param_count()];
        spec.backward(&params, &cache, &[1.0], &mut twice);
        spec.backward(&params, &cache, &[1.0], &mut twice);
        for (a, b) in once.iter().zip(&twice) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }
}
