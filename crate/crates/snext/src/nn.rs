//! Small multilayer perceptron with a flattened weight vector.
//!
//! Hidden layers use tanh, the output is a scalar linear unit. Parameters
//! are flattened layer by layer, weight matrix row-major then bias vector.
//! The per-sample weight Jacobian is computed by reverse-mode
//! backpropagation and is the building block of the linearized surrogate.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Fully connected tanh network with scalar output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpArchitecture {
    input_dim: usize,
    hidden: Vec<usize>,
}

impl MlpArchitecture {
    pub fn new(input_dim: usize, hidden: impl Into<Vec<usize>>) -> Result<Self> {
        let hidden = hidden.into();
        if input_dim == 0 {
            return Err(Error::Dimension {
                expected: 1,
                actual: 0,
            });
        }
        if hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        Ok(Self { input_dim, hidden })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    /// Layer sizes including input and scalar output.
    fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(self.input_dim);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(1);
        sizes
    }

    /// Total parameter count: sum over layers of `(fan_in + 1) * fan_out`.
    pub fn param_count(&self) -> usize {
        self.layer_sizes()
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    /// Splits a flat weight vector into per-layer `(weights, bias)` pairs.
    pub fn unflatten(&self, w: &DVector<f64>) -> Result<Vec<(DMatrix<f64>, DVector<f64>)>> {
        if w.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                actual: w.len(),
            });
        }
        let sizes = self.layer_sizes();
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        let mut offset = 0;
        for win in sizes.windows(2) {
            let (fan_in, fan_out) = (win[0], win[1]);
            let mat = DMatrix::from_fn(fan_out, fan_in, |r, c| w[offset + r * fan_in + c]);
            offset += fan_out * fan_in;
            let bias = DVector::from_fn(fan_out, |r, _| w[offset + r]);
            offset += fan_out;
            layers.push((mat, bias));
        }
        Ok(layers)
    }

    /// Inverse of [`unflatten`](Self::unflatten); exact round-trip.
    pub fn flatten(&self, layers: &[(DMatrix<f64>, DVector<f64>)]) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (mat, bias) in layers {
            for r in 0..mat.nrows() {
                for c in 0..mat.ncols() {
                    out.push(mat[(r, c)]);
                }
            }
            out.extend(bias.iter().copied());
        }
        DVector::from_vec(out)
    }

    /// Seeded initialization, uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`
    /// per layer.
    pub fn init_weights(&self, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(self.param_count());
        for win in self.layer_sizes().windows(2) {
            let (fan_in, fan_out) = (win[0], win[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..(fan_in + 1) * fan_out {
                out.push(rng.gen_range(-bound..=bound));
            }
        }
        DVector::from_vec(out)
    }

    /// Network output `g(w, x)`.
    pub fn forward(&self, w: &DVector<f64>, x: &DVector<f64>) -> Result<f64> {
        Ok(self.forward_trace(w, x)?.output)
    }

    /// Gradient of the scalar output with respect to the flat weight vector.
    pub fn weight_jacobian(&self, w: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.forward_trace(w, x)?.backward())
    }

    /// Output and weight Jacobian in one pass over the activations.
    pub fn forward_with_jacobian(
        &self,
        w: &DVector<f64>,
        x: &DVector<f64>,
    ) -> Result<(f64, DVector<f64>)> {
        let trace = self.forward_trace(w, x)?;
        let out = trace.output;
        Ok((out, trace.backward()))
    }

    fn forward_trace(&self, w: &DVector<f64>, x: &DVector<f64>) -> Result<Trace> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        let layers = self.unflatten(w)?;
        let depth = layers.len();
        let mut activations = Vec::with_capacity(depth + 1);
        activations.push(x.clone());
        for (l, (mat, bias)) in layers.iter().enumerate() {
            let z = mat * activations.last().unwrap() + bias;
            let a = if l + 1 < depth { z.map(f64::tanh) } else { z };
            activations.push(a);
        }
        let output = activations.last().unwrap()[0];
        Ok(Trace {
            layers,
            activations,
            output,
            param_count: self.param_count(),
        })
    }

    /// Linearizes the network around `w` for every sample in the batch.
    pub fn linearize_batch(
        &self,
        w: &DVector<f64>,
        batch: &[(DVector<f64>, f64)],
    ) -> Result<Vec<SampleLinearization>> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        batch
            .iter()
            .map(|(x, y)| {
                let (value, jac) = self.forward_with_jacobian(w, x)?;
                Ok(SampleLinearization::new(w, value, jac, *y))
            })
            .collect()
    }
}

struct Trace {
    layers: Vec<(DMatrix<f64>, DVector<f64>)>,
    activations: Vec<DVector<f64>>,
    output: f64,
    param_count: usize,
}

impl Trace {
    /// Reverse-mode accumulation of d output / d weights.
    fn backward(&self) -> DVector<f64> {
        let depth = self.layers.len();
        let mut grad = DVector::zeros(self.param_count);
        // delta[l] = d output / d z_l, starting from the linear output unit.
        let mut delta = DVector::from_element(1, 1.0);
        // Offsets of each layer's block in the flat vector.
        let mut offsets = Vec::with_capacity(depth);
        let mut off = 0;
        for (mat, bias) in &self.layers {
            offsets.push(off);
            off += mat.nrows() * mat.ncols() + bias.len();
        }
        for l in (0..depth).rev() {
            let (mat, _) = &self.layers[l];
            let input = &self.activations[l];
            let base = offsets[l];
            let fan_in = mat.ncols();
            for r in 0..mat.nrows() {
                for c in 0..fan_in {
                    grad[base + r * fan_in + c] = delta[r] * input[c];
                }
                grad[base + mat.nrows() * fan_in + r] = delta[r];
            }
            if l > 0 {
                let upstream = mat.transpose() * &delta;
                let a = &self.activations[l];
                delta = DVector::from_fn(upstream.len(), |i, _| upstream[i] * (1.0 - a[i] * a[i]));
            }
        }
        grad
    }
}

/// First-order model of one training sample around a base weight vector.
#[derive(Debug, Clone)]
pub struct SampleLinearization {
    /// `g(w_t, x)` at the base point.
    pub base_value: f64,
    /// `J = d g / d w` at the base point.
    pub jacobian: DVector<f64>,
    /// Intercept of the linear model, `g(w_t, x) - J^T w_t`.
    pub intercept: f64,
    /// `r = y - g(w_t, x) + J^T w_t`, the target of the linear model.
    pub residual_target: f64,
}

impl SampleLinearization {
    pub fn new(base: &DVector<f64>, base_value: f64, jacobian: DVector<f64>, target: f64) -> Self {
        let j_dot_base = jacobian.dot(base);
        Self {
            base_value,
            intercept: base_value - j_dot_base,
            residual_target: target - base_value + j_dot_base,
            jacobian,
        }
    }

    /// The linearized network output at `w`.
    pub fn linear_value(&self, w: &DVector<f64>) -> f64 {
        self.intercept + self.jacobian.dot(w)
    }
}


#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
    }

    /// Independent straightforward re-implementation of the same arithmetic
    /// over plain slices, used as a duplicate-arithmetic oracle.
    fn naive_forward(input_dim: usize, hidden: &[usize], w: &[f64], x: &[f64]) -> f64 {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut act: Vec<f64> = x.to_vec();
        let mut off = 0;
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let mut next = vec![0.0; fan_out];
            for r in 0..fan_out {
                let mut z = 0.0;
                for c in 0..fan_in {
                    z += w[off + r * fan_in + c] * act[c];
                }
                z += w[off + fan_out * fan_in + r];
                next[r] = if l + 2 < sizes.len() { z.tanh() } else { z };
            }
            off += (fan_in + 1) * fan_out;
            act = next;
        }
        act[0]
    }

    #[test]
    fn param_count_matches_formula() {
        let arch = MlpArchitecture::new(13, vec![30, 30]).unwrap();
        assert_eq!(arch.param_count(), 14 * 30 + 31 * 30 + 31);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let arch = MlpArchitecture::new(4, vec![5, 3]).unwrap();
        let w = DVector::zeros(arch.param_count());
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        assert_eq!(arch.forward(&w, &x).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_linear_layer() {
        // No hidden layers: g(w, x) = a*x + b with w = (a, b).
        let arch = MlpArchitecture::new(1, Vec::new()).unwrap();
        let w = DVector::from_vec(vec![2.0, -0.5]);
        let x = DVector::from_vec(vec![3.0]);
        assert_eq!(arch.forward(&w, &x).unwrap(), 2.0 * 3.0 - 0.5);
        let j = arch.weight_jacobian(&w, &x).unwrap();
        assert_eq!(j, DVector::from_vec(vec![3.0, 1.0]));
    }

    #[test]
    fn forward_matches_duplicate_arithmetic_oracle() {
        let arch = MlpArchitecture::new(13, vec![30, 30]).unwrap();
        let w = arch.init_weights(11);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let x = random_vec(&mut rng, 13);
            let fast = arch.forward(&w, &x).unwrap();
            let slow = naive_forward(13, &[30, 30], w.as_slice(), x.as_slice());
            assert!((fast - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let arch = MlpArchitecture::new(3, vec![6, 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for draw in 0..20 {
            let w = arch.init_weights(draw);
            let x = random_vec(&mut rng, 3);
            let jac = arch.weight_jacobian(&w, &x).unwrap();
            let fd = finite_difference_gradient(
                |wv| arch.forward(wv, &x).unwrap(),
                &w,
                1e-6,
            );
            let err = max_relative_error(&jac, &fd);
            assert!(err < 1e-5, "draw {draw}: max relative error {err}");
        }
    }

    #[test]
    fn zero_input_zeros_first_layer_weight_gradient() {
        let arch = MlpArchitecture::new(3, vec![4]).unwrap();
        let w = arch.init_weights(2);
        let x = DVector::zeros(3);
        let jac = arch.weight_jacobian(&w, &x).unwrap();
        // First-layer weight entries see zero input; biases do not.
        for r in 0..4 {
            for c in 0..3 {
                assert_eq!(jac[r * 3 + c], 0.0);
            }
        }
        let fd = finite_difference_gradient(|wv| arch.forward(wv, &x).unwrap(), &w, 1e-6);
        assert!(max_relative_error(&jac, &fd) < 1e-5);
    }

    #[test]
    fn linearization_anchors_at_base_point() {
        let arch = MlpArchitecture::new(2, vec![5]).unwrap();
        let w = arch.init_weights(9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let batch: Vec<(DVector<f64>, f64)> = (0..4)
            .map(|_| (random_vec(&mut rng, 2), rng.gen_range(-1.0..1.0)))
            .collect();
        let lins = arch.linearize_batch(&w, &batch).unwrap();
        for (lin, (x, y)) in lins.iter().zip(&batch) {
            let g = arch.forward(&w, x).unwrap();
            assert_eq!(lin.base_value, g);
            assert!((lin.linear_value(&w) - g).abs() < 1e-12);
            assert!((lin.residual_target - (y - g + lin.jacobian.dot(&w))).abs() < 1e-12);
        }
    }

    #[test]
    fn linearization_of_linear_network_is_the_network() {
        let arch = MlpArchitecture::new(2, Vec::new()).unwrap();
        let w = DVector::from_vec(vec![1.5, -2.0, 0.25]);
        let batch = vec![(DVector::from_vec(vec![0.3, 0.7]), 1.0)];
        let lins = arch.linearize_batch(&w, &batch).unwrap();
        let other = DVector::from_vec(vec![-1.0, 4.0, 2.0]);
        let lin_val = lins[0].linear_value(&other);
        let true_val = arch.forward(&other, &batch[0].0).unwrap();
        assert!((lin_val - true_val).abs() < 1e-12);
    }

    #[test]
    fn linearized_loss_gradient_matches_true_gradient_at_base() {
        // F2 consistency: at the base point, the gradient of the linearized
        // squared loss equals the gradient of the true squared loss.
        let arch = MlpArchitecture::new(3, vec![4, 4]).unwrap();
        let w = arch.init_weights(31);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let x = random_vec(&mut rng, 3);
        let y = 0.7;
        let (g, jac) = arch.forward_with_jacobian(&w, &x).unwrap();
        let true_grad = &jac * (2.0 * (g - y));
        let lin = &arch.linearize_batch(&w, &[(x, y)]).unwrap()[0];
        let lin_grad = &lin.jacobian * (2.0 * (lin.linear_value(&w) - y));
        assert!((true_grad - lin_grad).abs().max() < 1e-12);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let arch = MlpArchitecture::new(2, vec![3]).unwrap();
        let w = arch.init_weights(0);
        assert!(matches!(
            arch.linearize_batch(&w, &[]),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let arch = MlpArchitecture::new(2, vec![3]).unwrap();
        let w = arch.init_weights(0);
        let x = DVector::zeros(5);
        assert!(matches!(
            arch.forward(&w, &x),
            Err(Error::Dimension { .. })
        ));
    }

    proptest! {
        #[test]
        fn flatten_unflatten_round_trip(seed in 0u64..1000) {
            let arch = MlpArchitecture::new(3, vec![4, 2]).unwrap();
            let w = arch.init_weights(seed);
            let layers = arch.unflatten(&w).unwrap();
            let back = arch.flatten(&layers);
            prop_assert_eq!(w, back);
        }
    }
}
