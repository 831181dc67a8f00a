//! Dense feed-forward binary classifier trained from scratch.
//!
//! Hidden layers use ReLU, the output head is a 2-unit softmax, and
//! training is plain mini-batch gradient descent on cross-entropy. The
//! attacks require exact input gradients, so forward and backward passes
//! are implemented directly rather than through an autodiff framework.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Architecture and optimization settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Layer widths from input D to the fixed 2-unit output.
    pub layer_sizes: Vec<usize>,
    pub learning_rate: f64,
    /// Zero is allowed and leaves the parameters untouched.
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl MlpConfig {
    /// Default architecture for `d` input features.
    pub fn for_input_dim(d: usize) -> MlpConfig {
        MlpConfig {
            layer_sizes: vec![d, 64, 32, 2],
            learning_rate: 0.05,
            epochs: 150,
            batch_size: 32,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Param(
                "layer_sizes must contain at least input and output".into(),
            ));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Param("layer sizes must be positive".into()));
        }
        if *self.layer_sizes.last().unwrap() != 2 {
            return Err(Error::Param(
                "output layer must have exactly 2 units".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Param("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Param("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch training trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub final_accuracy: f64,
    /// Mean loss over the training set after each epoch.
    pub epoch_losses: Vec<f64>,
}

/// The classifier. Weights are row-major `(out, in)` per layer.
#[derive(Debug, Clone)]
pub struct Mlp {
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    config: MlpConfig,
}

/// Forward pass intermediates needed by backpropagation.
struct ForwardCache {
    /// Pre-activations z_l, one per layer.
    pre: Vec<Array1<f64>>,
    /// Post-activations: act[0] is the input, act[l] = relu(z_{l-1}).
    act: Vec<Array1<f64>>,
}

fn relu(z: &Array1<f64>) -> Array1<f64> {
    z.mapv(|v| v.max(0.0))
}

/// Subgradient 0 at the kink (z = 0).
fn relu_prime(z: &Array1<f64>) -> Array1<f64> {
    z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 })
}

fn softmax2(logits: &Array1<f64>) -> (f64, f64) {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let z = e0 + e1;
    (e0 / z, e1 / z)
}

fn check_finite(x: ArrayView1<f64>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("model input".into()));
    }
    Ok(())
}

/// On-disk encoding; nested `Vec`s round-trip `f64` bit-exactly through
/// serde_json's shortest-representation float formatting.
#[derive(Serialize, Deserialize)]
struct SavedMlp {
    format_version: u32,
    config: MlpConfig,
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
}

const MODEL_FORMAT_VERSION: u32 = 1;

impl Mlp {
    /// Fresh network: weights uniform in `±1/sqrt(fan_in)`, biases zero,
    /// deterministic in `config.seed`.
    pub fn init(config: MlpConfig) -> Result<Mlp> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in config.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-bound..bound));
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Mlp {
            weights,
            biases,
            config,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.config.layer_sizes[0]
    }

    pub fn n_parameters(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    fn n_layers(&self) -> usize {
        self.weights.len()
    }

    fn check_input(&self, x: ArrayView1<f64>) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        check_finite(x)
    }

    fn forward_cache(&self, x: ArrayView1<f64>) -> ForwardCache {
        let n = self.n_layers();
        let mut pre = Vec::with_capacity(n);
        let mut act = Vec::with_capacity(n);
        act.push(x.to_owned());
        for l in 0..n {
            let z = self.weights[l].dot(&act[l]) + &self.biases[l];
            if l + 1 < n {
                act.push(relu(&z));
            }
            pre.push(z);
        }
        ForwardCache { pre, act }
    }

    /// Raw output logits (length 2).
    pub fn logits(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_input(x)?;
        let cache = self.forward_cache(x);
        Ok(cache.pre.last().unwrap().clone())
    }

    /// Smallest |pre-activation| over the hidden layers: the margin to
    /// the nearest kink, where the network is not differentiable. Useful
    /// for rejecting inputs before finite-difference gradient checks.
    /// Infinity when the network has no hidden layer.
    pub fn kink_margin(&self, x: ArrayView1<f64>) -> Result<f64> {
        self.check_input(x)?;
        let cache = self.forward_cache(x);
        Ok(cache.pre[..self.n_layers() - 1]
            .iter()
            .flat_map(|z| z.iter())
            .fold(f64::INFINITY, |m, &z| m.min(z.abs())))
    }

    /// Class probabilities `(p0, p1)`; always sums to 1.
    pub fn forward(&self, x: ArrayView1<f64>) -> Result<(f64, f64)> {
        Ok(softmax2(&self.logits(x)?))
    }

    /// Hard label; the tie at p0 = p1 breaks toward 0.
    pub fn predict(&self, x: ArrayView1<f64>) -> Result<u8> {
        let (p0, p1) = self.forward(x)?;
        Ok(u8::from(p1 > p0))
    }

    /// Cross-entropy toward class `t`, computed as logsumexp(z) - z_t for
    /// numerical stability.
    pub fn loss(&self, x: ArrayView1<f64>, t: u8) -> Result<f64> {
        if t > 1 {
            return Err(Error::Param(format!("label must be 0 or 1, got {t}")));
        }
        let z = self.logits(x)?;
        let m = z[0].max(z[1]);
        let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
        Ok(lse - z[t as usize])
    }

    /// Backpropagate a gradient at the logits down to the input coordinates.
    fn backprop_to_input(&self, cache: &ForwardCache, logit_grad: Array1<f64>) -> Array1<f64> {
        let mut delta = logit_grad;
        for l in (0..self.n_layers()).rev() {
            let grad_act = self.weights[l].t().dot(&delta);
            if l == 0 {
                return grad_act;
            }
            delta = &grad_act * &relu_prime(&cache.pre[l - 1]);
        }
        unreachable!("network has at least one layer");
    }

    /// Exact gradient of the cross-entropy loss toward `t` with respect to
    /// the input.
    pub fn input_gradient(&self, x: ArrayView1<f64>, t: u8) -> Result<Array1<f64>> {
        if t > 1 {
            return Err(Error::Param(format!("label must be 0 or 1, got {t}")));
        }
        self.check_input(x)?;
        let cache = self.forward_cache(x);
        let (p0, p1) = softmax2(cache.pre.last().unwrap());
        // dL/dz = softmax(z) - onehot(t)
        let mut logit_grad = Array1::from_vec(vec![p0, p1]);
        logit_grad[t as usize] -= 1.0;
        Ok(self.backprop_to_input(&cache, logit_grad))
    }

    /// Logit margin `z_t - z_s` and its exact input gradient.
    pub fn logit_margin_gradient(
        &self,
        x: ArrayView1<f64>,
        s: u8,
        t: u8,
    ) -> Result<(f64, Array1<f64>)> {
        if s > 1 || t > 1 {
            return Err(Error::Param("labels must be 0 or 1".into()));
        }
        if s == t {
            return Err(Error::Param("source and target labels must differ".into()));
        }
        self.check_input(x)?;
        let cache = self.forward_cache(x);
        let z = cache.pre.last().unwrap();
        let margin = z[t as usize] - z[s as usize];
        let mut logit_grad = Array1::zeros(2);
        logit_grad[t as usize] = 1.0;
        logit_grad[s as usize] = -1.0;
        let grad = self.backprop_to_input(&cache, logit_grad);
        Ok((margin, grad))
    }

    /// Parameter gradients for one sample, accumulated into `grads`.
    fn accumulate_param_grads(
        &self,
        cache: &ForwardCache,
        logit_grad: Array1<f64>,
        grad_w: &mut [Array2<f64>],
        grad_b: &mut [Array1<f64>],
    ) {
        let mut delta = logit_grad;
        for l in (0..self.n_layers()).rev() {
            let outer = delta
                .view()
                .insert_axis(Axis(1))
                .dot(&cache.act[l].view().insert_axis(Axis(0)));
            grad_w[l] += &outer;
            grad_b[l] += &delta;
            if l > 0 {
                let grad_act = self.weights[l].t().dot(&delta);
                delta = &grad_act * &relu_prime(&cache.pre[l - 1]);
            }
        }
    }

    /// Mean loss over a dataset.
    pub fn mean_loss(&self, data: &Dataset) -> Result<f64> {
        let mut total = 0.0;
        for (row, &label) in data.x.rows().into_iter().zip(data.y.iter()) {
            total += self.loss(row, label)?;
        }
        Ok(total / data.n_rows() as f64)
    }

    /// Fraction of rows whose prediction matches the label.
    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let mut hits = 0usize;
        for (row, &label) in data.x.rows().into_iter().zip(data.y.iter()) {
            if self.predict(row)? == label {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.n_rows() as f64)
    }

    /// Mini-batch gradient descent on cross-entropy. Deterministic: the
    /// shuffle order is drawn from a stream of `config.seed` separate from
    /// the one used by `init`.
    pub fn train(&mut self, data: &Dataset) -> Result<TrainReport> {
        if data.n_rows() == 0 {
            return Err(Error::Data("training set is empty".into()));
        }
        if data.n_features() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                actual: data.n_features(),
            });
        }
        let has_zero = data.y.iter().any(|&l| l == 0);
        let has_one = data.y.iter().any(|&l| l == 1);
        if !(has_zero && has_one) {
            return Err(Error::Data(
                "training set contains a single class; need both labels".into(),
            ));
        }

        let initial_loss = self.mean_loss(data)?;
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        shuffle_rng.set_stream(1);

        let n = data.n_rows();
        let mut order: Vec<usize> = (0..n).collect();
        let mut epoch_losses = Vec::with_capacity(self.config.epochs);

        for _ in 0..self.config.epochs {
            use rand::seq::SliceRandom;
            order.shuffle(&mut shuffle_rng);
            for batch in order.chunks(self.config.batch_size) {
                self.train_batch(data, batch)?;
            }
            epoch_losses.push(self.mean_loss(data)?);
        }

        let final_loss = epoch_losses.last().copied().unwrap_or(initial_loss);
        let final_accuracy = self.accuracy(data)?;
        if self
            .weights
            .iter()
            .any(|w| w.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite("model parameters after training".into()));
        }
        Ok(TrainReport {
            initial_loss,
            final_loss,
            final_accuracy,
            epoch_losses,
        })
    }

    fn train_batch(&mut self, data: &Dataset, batch: &[usize]) -> Result<()> {
        let mut grad_w: Vec<Array2<f64>> = self
            .weights
            .iter()
            .map(|w| Array2::zeros(w.dim()))
            .collect();
        let mut grad_b: Vec<Array1<f64>> =
            self.biases.iter().map(|b| Array1::zeros(b.len())).collect();
        for &i in batch {
            let x = data.x.row(i);
            check_finite(x)?;
            let cache = self.forward_cache(x);
            let (p0, p1) = softmax2(cache.pre.last().unwrap());
            let mut logit_grad = Array1::from_vec(vec![p0, p1]);
            logit_grad[data.y[i] as usize] -= 1.0;
            self.accumulate_param_grads(&cache, logit_grad, &mut grad_w, &mut grad_b);
        }
        let step = self.config.learning_rate / batch.len() as f64;
        for l in 0..self.n_layers() {
            self.weights[l].scaled_add(-step, &grad_w[l]);
            self.biases[l].scaled_add(-step, &grad_b[l]);
        }
        Ok(())
    }

    /// Persist parameters as JSON; the encoding round-trips bit-exactly.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let saved = SavedMlp {
            format_version: MODEL_FORMAT_VERSION,
            config: self.config.clone(),
            weights: self
                .weights
                .iter()
                .map(|w| w.rows().into_iter().map(|r| r.to_vec()).collect())
                .collect(),
            biases: self.biases.iter().map(|b| b.to_vec()).collect(),
        };
        let text = serde_json::to_string_pretty(&saved)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Mlp> {
        let text = std::fs::read_to_string(path)?;
        let saved: SavedMlp = serde_json::from_str(&text)?;
        if saved.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Data(format!(
                "unsupported model format version {}",
                saved.format_version
            )));
        }
        saved.config.validate()?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (l, pair) in saved.config.layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let rows = saved
                .weights
                .get(l)
                .ok_or_else(|| Error::Data(format!("missing weights for layer {l}")))?;
            if rows.len() != fan_out || rows.iter().any(|r| r.len() != fan_in) {
                return Err(Error::Data(format!("layer {l} weight shape mismatch")));
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            weights.push(
                Array2::from_shape_vec((fan_out, fan_in), flat)
                    .map_err(|e| Error::Data(format!("layer {l}: {e}")))?,
            );
            let b = saved
                .biases
                .get(l)
                .ok_or_else(|| Error::Data(format!("missing biases for layer {l}")))?;
            if b.len() != fan_out {
                return Err(Error::Data(format!("layer {l} bias shape mismatch")));
            }
            biases.push(Array1::from_vec(b.clone()));
        }
        Ok(Mlp {
            weights,
            biases,
            config: saved.config,
        })
    }

    /// Hand-built network for tests and linear-victim oracles.
    pub fn from_parameters(
        config: MlpConfig,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Mlp> {
        config.validate()?;
        if weights.len() != config.layer_sizes.len() - 1 || biases.len() != weights.len() {
            return Err(Error::Param("parameter count does not match layers".into()));
        }
        for (l, pair) in config.layer_sizes.windows(2).enumerate() {
            if weights[l].dim() != (pair[1], pair[0]) || biases[l].len() != pair[1] {
                return Err(Error::Param(format!("layer {l} shape mismatch")));
            }
        }
        Ok(Mlp {
            weights,
            biases,
            config,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};
    use approx::assert_relative_eq;
    use ndarray::array;

    fn zero_net(sizes: Vec<usize>) -> Mlp {
        let config = MlpConfig {
            layer_sizes: sizes.clone(),
            learning_rate: 0.05,
            epochs: 1,
            batch_size: 4,
            seed: 0,
        };
        let weights = sizes
            .windows(2)
            .map(|p| Array2::zeros((p[1], p[0])))
            .collect();
        let biases = sizes.windows(2).map(|p| Array1::zeros(p[1])).collect();
        Mlp::from_parameters(config, weights, biases).unwrap()
    }

    /// Single linear layer with the two logit rows set to +w and -w, so the
    /// decision boundary is the hyperplane w.x + b = 0 (class 1 positive).
    fn linear_victim(w: &[f64], b: f64) -> Mlp {
        let d = w.len();
        let config = MlpConfig {
            layer_sizes: vec![d, 2],
            learning_rate: 0.05,
            epochs: 1,
            batch_size: 4,
            seed: 0,
        };
        let mut rows = Array2::zeros((2, d));
        for (j, &wj) in w.iter().enumerate() {
            rows[[0, j]] = -wj;
            rows[[1, j]] = wj;
        }
        let biases = vec![Array1::from_vec(vec![-b, b])];
        Mlp::from_parameters(config, vec![rows], biases).unwrap()
    }

    fn random_net(rng: &mut ChaCha8Rng, d: usize) -> Mlp {
        let hidden1 = rng.random_range(4..10);
        let hidden2 = rng.random_range(3..8);
        let config = MlpConfig {
            layer_sizes: vec![d, hidden1, hidden2, 2],
            learning_rate: 0.05,
            epochs: 1,
            batch_size: 4,
            seed: rng.random_range(0..u64::MAX / 2),
        };
        Mlp::init(config).unwrap()
    }

    /// Draw an input whose hidden pre-activations stay well away from the
    /// ReLU kink, so central finite differences are valid.
    fn kink_safe_input(mlp: &Mlp, rng: &mut ChaCha8Rng) -> Array1<f64> {
        'outer: for _ in 0..200 {
            let x = Array1::from_shape_fn(mlp.input_dim(), |_| rng.random_range(-1.0..1.0));
            let cache = mlp.forward_cache(x.view());
            for z in &cache.pre[..cache.pre.len() - 1] {
                if z.iter().any(|v| v.abs() < 1e-3) {
                    continue 'outer;
                }
            }
            return x;
        }
        panic!("no kink-safe input found");
    }

    fn fd_loss_gradient(mlp: &Mlp, x: &Array1<f64>, t: u8, h: f64) -> Array1<f64> {
        Array1::from_shape_fn(x.len(), |j| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            (mlp.loss(xp.view(), t).unwrap() - mlp.loss(xm.view(), t).unwrap()) / (2.0 * h)
        })
    }

    fn max_rel_err(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(&p, &q)| (p - q).abs() / p.abs().max(q.abs()).max(1e-8))
            .fold(0.0, f64::max)
    }

    #[test]
    fn init_is_deterministic() {
        let config = MlpConfig::for_input_dim(5);
        let a = Mlp::init(config.clone()).unwrap();
        let b = Mlp::init(config).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.biases, b.biases);
    }

    #[test]
    fn parameter_count_2_8_2() {
        let config = MlpConfig {
            layer_sizes: vec![2, 8, 2],
            learning_rate: 0.05,
            epochs: 1,
            batch_size: 4,
            seed: 0,
        };
        let mlp = Mlp::init(config).unwrap();
        assert_eq!(mlp.n_parameters(), 42);
    }

    #[test]
    fn invalid_configs_error() {
        let mut config = MlpConfig::for_input_dim(2);
        config.layer_sizes = vec![2, 0, 2];
        assert!(Mlp::init(config).is_err());
        let mut config = MlpConfig::for_input_dim(2);
        config.layer_sizes = vec![2, 8, 3];
        assert!(Mlp::init(config).is_err());
        let mut config = MlpConfig::for_input_dim(2);
        config.learning_rate = 0.0;
        assert!(Mlp::init(config).is_err());
    }

    #[test]
    fn zero_network_is_symmetric() {
        let mlp = zero_net(vec![3, 4, 2]);
        let (p0, p1) = mlp.forward(array![0.2, -0.4, 0.9].view()).unwrap();
        assert_relative_eq!(p0, 0.5, epsilon = 1e-12);
        assert_relative_eq!(p1, 0.5, epsilon = 1e-12);
        // tie breaks toward label 0
        assert_eq!(mlp.predict(array![0.2, -0.4, 0.9].view()).unwrap(), 0);
        // constant output means zero input gradient
        let g = mlp
            .input_gradient(array![0.2, -0.4, 0.9].view(), 1)
            .unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let mlp = random_net(&mut rng, 4);
            let x = Array1::from_shape_fn(4, |_| rng.random_range(-2.0..2.0));
            let (p0, p1) = mlp.forward(x.view()).unwrap();
            assert!(p0 > 0.0 && p0 < 1.0);
            assert!(p1 > 0.0 && p1 < 1.0);
            assert_relative_eq!(p0 + p1, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn hand_built_softmax_value() {
        // logit rows (1,-1) and (-1,1) on x = (1,0) give logits (1,-1)
        let mlp = linear_victim(&[-1.0, 1.0], 0.0);
        let (p0, p1) = mlp.forward(array![1.0, 0.0].view()).unwrap();
        let e2 = (2.0_f64).exp();
        assert_relative_eq!(p0, e2 / (e2 + 1.0), epsilon = 1e-12);
        assert_relative_eq!(p1, 1.0 / (e2 + 1.0), epsilon = 1e-12);
    }

    #[test]
    fn predict_is_argmax() {
        // bias-only network produces fixed probabilities
        let config = MlpConfig {
            layer_sizes: vec![2, 2],
            learning_rate: 0.05,
            epochs: 1,
            batch_size: 4,
            seed: 0,
        };
        let win = Array1::from_vec(vec![0.0, (7.0_f64 / 3.0).ln()]);
        let mlp = Mlp::from_parameters(
            config.clone(),
            vec![Array2::zeros((2, 2))],
            vec![win.clone()],
        )
        .unwrap();
        let (p0, p1) = mlp.forward(array![0.3, 0.4].view()).unwrap();
        assert_relative_eq!(p0, 0.3, epsilon = 1e-12);
        assert_relative_eq!(p1, 0.7, epsilon = 1e-12);
        assert_eq!(mlp.predict(array![0.3, 0.4].view()).unwrap(), 1);

        let flipped = Mlp::from_parameters(
            config,
            vec![Array2::zeros((2, 2))],
            vec![Array1::from_vec(vec![(7.0_f64 / 3.0).ln(), 0.0])],
        )
        .unwrap();
        assert_eq!(flipped.predict(array![0.3, 0.4].view()).unwrap(), 0);
    }

    #[test]
    fn non_finite_input_rejected() {
        let mlp = zero_net(vec![2, 2]);
        assert!(mlp.forward(array![f64::NAN, 0.0].view()).is_err());
        assert!(mlp.forward(array![0.0, f64::INFINITY].view()).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..10 {
            let mlp = random_net(&mut rng, 3);
            let x = kink_safe_input(&mlp, &mut rng);
            let t = (trial % 2) as u8;
            let analytic = mlp.input_gradient(x.view(), t).unwrap();
            let numeric = fd_loss_gradient(&mlp, &x, t, 1e-5);
            let err = max_rel_err(&analytic, &numeric);
            assert!(err < 1e-4, "trial {trial}: max relative error {err}");
        }
    }

    #[test]
    fn gradients_toward_opposite_targets_are_antiparallel() {
        // dL/dz toward t=1 is p0*(1,-1) and toward t=0 is -p1*(1,-1), so the
        // input gradients are antiparallel with magnitude ratio p1/p0; they
        // are exact negatives only on the decision boundary.
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..10 {
            let mlp = random_net(&mut rng, 3);
            let x = Array1::from_shape_fn(3, |_| rng.random_range(-1.0..1.0));
            let g1 = mlp.input_gradient(x.view(), 1).unwrap();
            let g0 = mlp.input_gradient(x.view(), 0).unwrap();
            let (p0, p1) = mlp.forward(x.view()).unwrap();
            for (a, b) in g0.iter().zip(g1.iter()) {
                assert_relative_eq!(*a, -(p1 / p0) * b, epsilon = 1e-10, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn margin_gradient_linear_case() {
        // logit rows chosen so that z1 - z0 = 2x1 - x2 + 0.5
        let config = MlpConfig {
            layer_sizes: vec![2, 2],
            learning_rate: 0.05,
            epochs: 1,
            batch_size: 4,
            seed: 0,
        };
        let rows = array![[-1.0, 0.5], [1.0, -0.5]];
        let biases = vec![array![-0.25, 0.25]];
        let mlp = Mlp::from_parameters(config, vec![rows], biases).unwrap();
        for x in [array![0.0, 0.0], array![1.0, 2.0], array![-3.0, 0.7]] {
            let (margin, grad) = mlp.logit_margin_gradient(x.view(), 0, 1).unwrap();
            assert_relative_eq!(margin, 2.0 * x[0] - x[1] + 0.5, epsilon = 1e-12);
            assert_relative_eq!(grad[0], 2.0, epsilon = 1e-12);
            assert_relative_eq!(grad[1], -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn margin_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let mlp = random_net(&mut rng, 3);
            let x = kink_safe_input(&mlp, &mut rng);
            let (_, analytic) = mlp.logit_margin_gradient(x.view(), 0, 1).unwrap();
            let h = 1e-5;
            let numeric = Array1::from_shape_fn(3, |j| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let (mp, _) = mlp.logit_margin_gradient(xp.view(), 0, 1).unwrap();
                let (mm, _) = mlp.logit_margin_gradient(xm.view(), 0, 1).unwrap();
                (mp - mm) / (2.0 * h)
            });
            assert!(max_rel_err(&analytic, &numeric) < 1e-4);
        }
    }

    #[test]
    fn margin_rejects_equal_labels() {
        let mlp = zero_net(vec![2, 2]);
        assert!(mlp
            .logit_margin_gradient(array![0.0, 0.0].view(), 1, 1)
            .is_err());
    }

    #[test]
    fn dead_relu_region_has_zero_gradient() {
        // hidden pre-activations forced negative for inputs in [0,1]^2
        let config = MlpConfig {
            layer_sizes: vec![2, 3, 2],
            learning_rate: 0.05,
            epochs: 1,
            batch_size: 4,
            seed: 0,
        };
        let w1 = array![[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]];
        let b1 = array![-100.0, -100.0, -100.0];
        let w2 = Array2::from_shape_fn((2, 3), |(i, j)| (i + j) as f64);
        let b2 = array![0.3, -0.3];
        let mlp = Mlp::from_parameters(config, vec![w1, w2], vec![b1, b2]).unwrap();
        let g = mlp.input_gradient(array![0.5, 0.5].view(), 1).unwrap();
        assert!(g.iter().all(|&v| v == 0.0), "gradient {g:?}");
    }

    #[test]
    fn training_fits_separable_data() {
        let spec = SyntheticSpec {
            separations: vec![4.0, 4.0],
            noise: vec![1.0, 1.0],
        };
        let data = generate_synthetic(&spec, 500, 3).unwrap();
        let mut config = MlpConfig::for_input_dim(2);
        config.epochs = 100;
        config.seed = 5;
        let mut mlp = Mlp::init(config).unwrap();
        let report = mlp.train(&data).unwrap();
        assert!(
            report.final_accuracy >= 0.95,
            "accuracy {}",
            report.final_accuracy
        );
        assert!(report.final_loss < report.initial_loss);
        assert_eq!(report.epoch_losses.len(), 100);
    }

    #[test]
    fn zero_epochs_is_identity() {
        let spec = SyntheticSpec {
            separations: vec![2.0, 2.0],
            noise: vec![1.0, 1.0],
        };
        let data = generate_synthetic(&spec, 50, 3).unwrap();
        let mut config = MlpConfig::for_input_dim(2);
        config.epochs = 0;
        let mut mlp = Mlp::init(config).unwrap();
        let before = mlp.weights.clone();
        let report = mlp.train(&data).unwrap();
        assert_eq!(mlp.weights, before);
        assert_eq!(report.initial_loss, report.final_loss);
        assert!(report.epoch_losses.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let spec = SyntheticSpec {
            separations: vec![2.0, 1.0],
            noise: vec![1.0, 1.0],
        };
        let data = generate_synthetic(&spec, 200, 3).unwrap();
        let mut config = MlpConfig::for_input_dim(2);
        config.epochs = 20;
        config.seed = 11;
        let mut a = Mlp::init(config.clone()).unwrap();
        a.train(&data).unwrap();
        let mut b = Mlp::init(config).unwrap();
        b.train(&data).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.biases, b.biases);
    }

    #[test]
    fn single_class_training_errors() {
        use crate::data::{ColumnScale, FeatureKind, FeatureMeta};
        let data = Dataset {
            features: vec![
                FeatureMeta {
                    name: "a".into(),
                    kind: FeatureKind::Continuous,
                    observed_min: 0.0,
                    observed_max: 1.0,
                },
                FeatureMeta {
                    name: "b".into(),
                    kind: FeatureKind::Continuous,
                    observed_min: 0.0,
                    observed_max: 1.0,
                },
            ],
            x: Array2::zeros((10, 2)),
            y: Array1::zeros(10),
            scaling: vec![
                ColumnScale {
                    offset: 0.0,
                    scale: 1.0
                };
                2
            ],
        };
        let mut mlp = Mlp::init(MlpConfig::for_input_dim(2)).unwrap();
        assert!(mlp.train(&data).is_err());
    }

    #[test]
    fn save_load_roundtrip_is_bit_exact() {
        let spec = SyntheticSpec {
            separations: vec![2.0, 1.0],
            noise: vec![1.0, 1.0],
        };
        let data = generate_synthetic(&spec, 100, 3).unwrap();
        let mut config = MlpConfig::for_input_dim(2);
        config.epochs = 5;
        let mut mlp = Mlp::init(config).unwrap();
        mlp.train(&data).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        mlp.save(&path).unwrap();
        let loaded = Mlp::load(&path).unwrap();
        assert_eq!(mlp.weights, loaded.weights);
        assert_eq!(mlp.biases, loaded.biases);
    }

    #[test]
    fn load_rejects_malformed_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let bad = r#"{"format_version":1,"config":{"layer_sizes":[2,2],"learning_rate":0.05,"epochs":1,"batch_size":4,"seed":0},"weights":[[[1.0,2.0]]],"biases":[[0.0,0.0]]}"#;
        std::fs::write(&path, bad).unwrap();
        assert!(Mlp::load(&path).is_err());
    }
}
