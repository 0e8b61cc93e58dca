//! Fully-connected network with relu or linear activations per layer.
//!
//! Weights are stored row-major (`out x in`) in flat vectors, one per layer.
//! Forward passes record every pre- and post-activation in a [`ForwardCache`]
//! so the backward pass needs no recomputation; the `_into` variants reuse
//! caller-owned buffers because agents run hundreds of passes per
//! environment step.

use super::MathError;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Activation applied after a layer's affine transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Linear => z,
        }
    }

    /// Derivative with respect to the pre-activation. The relu subgradient
    /// at exactly zero is taken as zero.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Static shape of an MLP: layer sizes plus one activation per layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpSpec {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
}

impl MlpSpec {
    /// Builds a spec from explicit layer sizes (input first) and one
    /// activation per affine layer.
    pub fn new(sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self, MathError> {
        if sizes.len() < 2 {
            return Err(MathError::InvalidSpec(format!(
                "need at least input and output sizes, got {:?}",
                sizes
            )));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(MathError::InvalidSpec(format!(
                "zero-width layer in {:?}",
                sizes
            )));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(MathError::InvalidSpec(format!(
                "{} layers but {} activations",
                sizes.len() - 1,
                activations.len()
            )));
        }
        Ok(Self { sizes, activations })
    }

    /// Conventional shape: relu on every hidden layer, linear output.
    pub fn relu_hidden(input: usize, hidden: &[usize], output: usize) -> Result<Self, MathError> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        let mut activations = vec![Activation::Relu; hidden.len()];
        activations.push(Activation::Linear);
        Self::new(sizes, activations)
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("spec has at least two sizes")
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// (fan_in, fan_out) of layer `l`.
    pub fn layer_dims(&self, l: usize) -> (usize, usize) {
        (self.sizes[l], self.sizes[l + 1])
    }

    /// Total number of scalar parameters (weights plus biases).
    pub fn num_coords(&self) -> usize {
        (0..self.num_layers())
            .map(|l| {
                let (fi, fo) = self.layer_dims(l);
                fo * fi + fo
            })
            .sum()
    }
}

/// Trainable parameters of an MLP. Layer `l` holds a flat row-major
/// `out x in` weight matrix and an `out` bias vector.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl MlpParams {
    /// Uniform initialization on `[-1/sqrt(fan_in), +1/sqrt(fan_in)]` for
    /// weights, zero biases, drawn from a ChaCha8 stream seeded with `seed`.
    pub fn init(spec: &MlpSpec, seed: u64) -> Self {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(spec.num_layers());
        let mut biases = Vec::with_capacity(spec.num_layers());
        for l in 0..spec.num_layers() {
            let (fan_in, fan_out) = spec.layer_dims(l);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = (0..fan_out * fan_in)
                .map(|_| rng.random_range(-bound..=bound))
                .collect();
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Self { weights, biases }
    }

    /// Builds params from raw per-layer tensors, validating shapes.
    pub fn from_raw(
        spec: &MlpSpec,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self, MathError> {
        if weights.len() != spec.num_layers() || biases.len() != spec.num_layers() {
            return Err(MathError::ShapeMismatch {
                context: "MlpParams::from_raw layer count",
                expected: spec.num_layers(),
                got: weights.len().min(biases.len()),
            });
        }
        for l in 0..spec.num_layers() {
            let (fan_in, fan_out) = spec.layer_dims(l);
            if weights[l].len() != fan_out * fan_in {
                return Err(MathError::ShapeMismatch {
                    context: "MlpParams::from_raw weights",
                    expected: fan_out * fan_in,
                    got: weights[l].len(),
                });
            }
            if biases[l].len() != fan_out {
                return Err(MathError::ShapeMismatch {
                    context: "MlpParams::from_raw biases",
                    expected: fan_out,
                    got: biases[l].len(),
                });
            }
        }
        Ok(Self { weights, biases })
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        &self.weights[l]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        &self.biases[l]
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// Mutable access to a single scalar by flat index. Coordinates are
    /// ordered layer by layer, weights before biases; used by the finite
    /// difference oracle.
    pub fn coord_mut(&mut self, mut idx: usize) -> &mut f64 {
        for l in 0..self.weights.len() {
            if idx < self.weights[l].len() {
                return &mut self.weights[l][idx];
            }
            idx -= self.weights[l].len();
            if idx < self.biases[l].len() {
                return &mut self.biases[l][idx];
            }
            idx -= self.biases[l].len();
        }
        panic!("coordinate index out of range");
    }

    pub fn num_coords(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    /// `self += scale * grads`, erroring if any updated value is non-finite.
    pub fn add_scaled(&mut self, grads: &Gradients, scale: f64) -> Result<(), MathError> {
        if !scale.is_finite() {
            return Err(MathError::NonFinite {
                context: "parameter update scale",
            });
        }
        for l in 0..self.weights.len() {
            assert_eq!(
                self.weights[l].len(),
                grads.weights[l].len(),
                "gradient shape must match parameters"
            );
            for (p, g) in self.weights[l].iter_mut().zip(&grads.weights[l]) {
                *p += scale * g;
                if !p.is_finite() {
                    return Err(MathError::NonFinite {
                        context: "updated weight",
                    });
                }
            }
            for (p, g) in self.biases[l].iter_mut().zip(&grads.biases[l]) {
                *p += scale * g;
                if !p.is_finite() {
                    return Err(MathError::NonFinite {
                        context: "updated bias",
                    });
                }
            }
        }
        Ok(())
    }
}

/// Gradient accumulator with the same shape tree as [`MlpParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub(crate) weights: Vec<Vec<f64>>,
    pub(crate) biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros(spec: &MlpSpec) -> Self {
        let mut weights = Vec::with_capacity(spec.num_layers());
        let mut biases = Vec::with_capacity(spec.num_layers());
        for l in 0..spec.num_layers() {
            let (fan_in, fan_out) = spec.layer_dims(l);
            weights.push(vec![0.0; fan_out * fan_in]);
            biases.push(vec![0.0; fan_out]);
        }
        Self { weights, biases }
    }

    pub fn clear(&mut self) {
        for w in &mut self.weights {
            w.fill(0.0);
        }
        for b in &mut self.biases {
            b.fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for v in w {
                *v *= factor;
            }
        }
        for b in &mut self.biases {
            for v in b {
                *v *= factor;
            }
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            assert_eq!(a.len(), b.len(), "gradient shapes must match");
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            assert_eq!(a.len(), b.len(), "gradient shapes must match");
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        &self.weights[l]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        &self.biases[l]
    }

    /// Flat view in the same coordinate order as [`MlpParams::coord_mut`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in 0..self.weights.len() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Buffers recorded by a forward pass: the input and every layer's pre- and
/// post-activation, plus two delta buffers reused by the backward pass.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl ForwardCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Network output of the most recent forward pass.
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("cache written by forward pass")
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }

    fn resize_for(&mut self, spec: &MlpSpec) {
        if self.pre.len() != spec.num_layers() {
            self.pre = (0..spec.num_layers())
                .map(|l| vec![0.0; spec.layer_dims(l).1])
                .collect();
            self.post = self.pre.clone();
        }
        // Delta buffers hold both fan-out and fan-in vectors, so they must
        // span the widest layer including the input.
        let widest = (0..spec.num_layers())
            .map(|l| spec.layer_dims(l).1)
            .max()
            .unwrap_or(0)
            .max(spec.input_dim());
        if self.delta.len() < widest {
            self.delta.resize(widest, 0.0);
            self.delta_next.resize(widest, 0.0);
        }
    }
}

/// Dot product with a fixed four-way accumulation order. The manual unroll
/// lets the compiler vectorize without reassociating, so results are
/// bit-reproducible across builds.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut chunks_a = a.chunks_exact(4);
    let mut chunks_b = b.chunks_exact(4);
    for (ca, cb) in chunks_a.by_ref().zip(chunks_b.by_ref()) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in chunks_a.remainder().iter().zip(chunks_b.remainder()) {
        sum += x * y;
    }
    sum
}

/// Runs the network forward, filling `cache` with everything the backward
/// pass needs. Returns an error if `input` does not match the spec.
pub fn forward_into(
    spec: &MlpSpec,
    params: &MlpParams,
    input: &[f64],
    cache: &mut ForwardCache,
) -> Result<(), MathError> {
    if input.len() != spec.input_dim() {
        return Err(MathError::ShapeMismatch {
            context: "mlp forward input",
            expected: spec.input_dim(),
            got: input.len(),
        });
    }
    assert_eq!(
        params.num_layers(),
        spec.num_layers(),
        "params must match spec"
    );
    cache.resize_for(spec);
    cache.input.clear();
    cache.input.extend_from_slice(input);
    for l in 0..spec.num_layers() {
        let (fan_in, fan_out) = spec.layer_dims(l);
        let w = &params.weights[l];
        let b = &params.biases[l];
        let act = spec.activations[l];
        // Split borrows: the input of layer l is the previous post buffer.
        let (done, rest) = cache.post.split_at_mut(l);
        let x: &[f64] = if l == 0 { &cache.input } else { &done[l - 1] };
        let pre = &mut cache.pre[l];
        let post = &mut rest[0];
        for r in 0..fan_out {
            let z = dot(&w[r * fan_in..(r + 1) * fan_in], x) + b[r];
            pre[r] = z;
            post[r] = act.apply(z);
        }
    }
    Ok(())
}

/// Allocation-per-call convenience wrapper around [`forward_into`].
pub fn forward(
    spec: &MlpSpec,
    params: &MlpParams,
    input: &[f64],
) -> Result<(Vec<f64>, ForwardCache), MathError> {
    let mut cache = ForwardCache::new();
    forward_into(spec, params, input, &mut cache)?;
    Ok((cache.output().to_vec(), cache))
}

fn check_output_grad(spec: &MlpSpec, output_grad: &[f64]) -> Result<(), MathError> {
    if output_grad.len() != spec.output_dim() {
        return Err(MathError::ShapeMismatch {
            context: "mlp backward output gradient",
            expected: spec.output_dim(),
            got: output_grad.len(),
        });
    }
    Ok(())
}

/// Backpropagates `output_grad` through the cached forward pass,
/// accumulating into `grads` and (optionally) writing the gradient with
/// respect to the network input.
pub fn backward_into(
    spec: &MlpSpec,
    params: &MlpParams,
    cache: &mut ForwardCache,
    output_grad: &[f64],
    grads: &mut Gradients,
    mut input_grad: Option<&mut Vec<f64>>,
) -> Result<(), MathError> {
    check_output_grad(spec, output_grad)?;
    assert_eq!(
        cache.input.len(),
        spec.input_dim(),
        "cache must come from a forward pass of the same spec"
    );
    let layers = spec.num_layers();
    cache.delta[..output_grad.len()].copy_from_slice(output_grad);
    for l in (0..layers).rev() {
        let (fan_in, fan_out) = spec.layer_dims(l);
        let act = spec.activations[l];
        // delta currently holds dL/d(post[l]); fold in the activation.
        for r in 0..fan_out {
            cache.delta[r] *= act.derivative(cache.pre[l][r]);
        }
        let x: &[f64] = if l == 0 {
            &cache.input
        } else {
            &cache.post[l - 1]
        };
        let gw = &mut grads.weights[l];
        let gb = &mut grads.biases[l];
        for r in 0..fan_out {
            let d = cache.delta[r];
            gb[r] += d;
            let row = &mut gw[r * fan_in..(r + 1) * fan_in];
            for (g, xi) in row.iter_mut().zip(x) {
                *g += d * xi;
            }
        }
        let need_input = l > 0 || input_grad.is_some();
        if need_input {
            cache.delta_next[..fan_in].fill(0.0);
            let w = &params.weights[l];
            for r in 0..fan_out {
                let d = cache.delta[r];
                let row = &w[r * fan_in..(r + 1) * fan_in];
                for (acc, wi) in cache.delta_next[..fan_in].iter_mut().zip(row) {
                    *acc += d * wi;
                }
            }
            std::mem::swap(&mut cache.delta, &mut cache.delta_next);
        }
    }
    if let Some(ig) = input_grad.as_deref_mut() {
        ig.clear();
        ig.extend_from_slice(&cache.delta[..spec.input_dim()]);
    }
    Ok(())
}

/// Like [`backward_into`] but computes only the input gradient, skipping
/// parameter-gradient accumulation. Used where a loss is differentiated
/// through a frozen network.
pub fn backward_input_into(
    spec: &MlpSpec,
    params: &MlpParams,
    cache: &mut ForwardCache,
    output_grad: &[f64],
    input_grad: &mut Vec<f64>,
) -> Result<(), MathError> {
    check_output_grad(spec, output_grad)?;
    let layers = spec.num_layers();
    cache.delta[..output_grad.len()].copy_from_slice(output_grad);
    for l in (0..layers).rev() {
        let (fan_in, fan_out) = spec.layer_dims(l);
        let act = spec.activations[l];
        for r in 0..fan_out {
            cache.delta[r] *= act.derivative(cache.pre[l][r]);
        }
        cache.delta_next[..fan_in].fill(0.0);
        let w = &params.weights[l];
        for r in 0..fan_out {
            let d = cache.delta[r];
            let row = &w[r * fan_in..(r + 1) * fan_in];
            for (acc, wi) in cache.delta_next[..fan_in].iter_mut().zip(row) {
                *acc += d * wi;
            }
        }
        std::mem::swap(&mut cache.delta, &mut cache.delta_next);
    }
    input_grad.clear();
    input_grad.extend_from_slice(&cache.delta[..spec.input_dim()]);
    Ok(())
}

/// Allocation-per-call convenience wrapper around [`backward_into`].
pub fn backward(
    spec: &MlpSpec,
    params: &MlpParams,
    cache: &mut ForwardCache,
    output_grad: &[f64],
) -> Result<(Vec<f64>, Gradients), MathError> {
    let mut grads = Gradients::zeros(spec);
    let mut input_grad = Vec::new();
    backward_into(spec, params, cache, output_grad, &mut grads, Some(&mut input_grad))?;
    Ok((input_grad, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relu_layer_spec(input: usize, output: usize) -> MlpSpec {
        MlpSpec::new(vec![input, output], vec![Activation::Relu]).unwrap()
    }

    #[test]
    fn forward_matches_hand_computation() {
        // W = [[1,2],[3,4]], b = [0.5,-0.5], x = [1,1]:
        // pre = [1+2+0.5, 3+4-0.5] = [3.5, 6.5], relu keeps both.
        let spec = relu_layer_spec(2, 2);
        let params = MlpParams::from_raw(
            &spec,
            vec![vec![1.0, 2.0, 3.0, 4.0]],
            vec![vec![0.5, -0.5]],
        )
        .unwrap();
        let (out, _) = forward(&spec, &params, &[1.0, 1.0]).unwrap();
        assert_eq!(out, vec![3.5, 6.5]);
    }

    #[test]
    fn backward_single_linear_layer() {
        // W = [[2]], x = [3], upstream 1 -> input grad 2, weight grad 3.
        let spec = MlpSpec::new(vec![1, 1], vec![Activation::Linear]).unwrap();
        let params = MlpParams::from_raw(&spec, vec![vec![2.0]], vec![vec![0.0]]).unwrap();
        let (_, mut cache) = forward(&spec, &params, &[3.0]).unwrap();
        let (input_grad, grads) = backward(&spec, &params, &mut cache, &[1.0]).unwrap();
        assert_eq!(input_grad, vec![2.0]);
        assert_eq!(grads.weights(0), &[3.0]);
        assert_eq!(grads.biases(0), &[1.0]);
    }

    #[test]
    fn backward_two_layer_with_inactive_relu() {
        // Layer 1: W = [[1,-1],[2,0.5]], b = [0,-2], relu.
        // Layer 2: W = [[1,1]], b = [0.25], linear. Input x = [1,2].
        // pre1 = [-1, 1] -> post1 = [0, 1]; out = 1.25.
        // Upstream 1: gW2 = [0,1], gb2 = [1]; relu kills unit 0, so
        // gW1 = [[0,0],[1,2]], gb1 = [0,1], gx = [2, 0.5].
        let spec = MlpSpec::new(
            vec![2, 2, 1],
            vec![Activation::Relu, Activation::Linear],
        )
        .unwrap();
        let params = MlpParams::from_raw(
            &spec,
            vec![vec![1.0, -1.0, 2.0, 0.5], vec![1.0, 1.0]],
            vec![vec![0.0, -2.0], vec![0.25]],
        )
        .unwrap();
        let (out, mut cache) = forward(&spec, &params, &[1.0, 2.0]).unwrap();
        assert_eq!(out, vec![1.25]);
        let (input_grad, grads) = backward(&spec, &params, &mut cache, &[1.0]).unwrap();
        assert_eq!(grads.weights(1), &[0.0, 1.0]);
        assert_eq!(grads.biases(1), &[1.0]);
        assert_eq!(grads.weights(0), &[0.0, 0.0, 1.0, 2.0]);
        assert_eq!(grads.biases(0), &[0.0, 1.0]);
        assert_eq!(input_grad, vec![2.0, 0.5]);
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let spec = relu_layer_spec(1, 1);
        let params = MlpParams::from_raw(&spec, vec![vec![1.0]], vec![vec![-1.0]]).unwrap();
        let (out, mut cache) = forward(&spec, &params, &[1.0]).unwrap();
        assert_eq!(out, vec![0.0]);
        let (input_grad, grads) = backward(&spec, &params, &mut cache, &[1.0]).unwrap();
        assert_eq!(input_grad, vec![0.0]);
        assert_eq!(grads.weights(0), &[0.0]);
    }

    #[test]
    fn init_respects_fan_in_bound_and_zero_biases() {
        let spec = MlpSpec::relu_hidden(100, &[50], 10).unwrap();
        let params = MlpParams::init(&spec, 7);
        let bound0 = 1.0 / (100f64).sqrt();
        assert!(params.weights(0).iter().all(|w| w.abs() <= bound0));
        let bound1 = 1.0 / (50f64).sqrt();
        assert!(params.weights(1).iter().all(|w| w.abs() <= bound1));
        assert!(params.biases(0).iter().all(|&b| b == 0.0));
        assert!(params.biases(1).iter().all(|&b| b == 0.0));
        // Same seed reproduces, different seed differs.
        assert_eq!(params, MlpParams::init(&spec, 7));
        assert_ne!(params, MlpParams::init(&spec, 8));
        // Mean of U[-bound, bound] over 5000 draws should be well inside
        // 4 sigma = 4 * bound / sqrt(3 * n).
        let mean: f64 =
            params.weights(0).iter().sum::<f64>() / params.weights(0).len() as f64;
        let sigma = bound0 / (3.0 * params.weights(0).len() as f64).sqrt();
        assert!(mean.abs() < 4.0 * sigma, "mean {mean} vs sigma {sigma}");
    }

    #[test]
    fn forward_rejects_wrong_input_length() {
        let spec = relu_layer_spec(2, 2);
        let params = MlpParams::init(&spec, 0);
        assert!(matches!(
            forward(&spec, &params, &[1.0]),
            Err(MathError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn backward_input_only_matches_full_backward() {
        let spec = MlpSpec::relu_hidden(3, &[8, 8], 2).unwrap();
        let params = MlpParams::init(&spec, 42);
        let input = [0.3, -0.7, 1.1];
        let (_, mut cache) = forward(&spec, &params, &input).unwrap();
        let (full_input_grad, _) =
            backward(&spec, &params, &mut cache, &[1.0, -2.0]).unwrap();
        forward_into(&spec, &params, &input, &mut cache).unwrap();
        let mut only = Vec::new();
        backward_input_into(&spec, &params, &mut cache, &[1.0, -2.0], &mut only).unwrap();
        assert_eq!(full_input_grad, only);
    }

    #[test]
    fn coord_indexing_covers_all_parameters() {
        let spec = MlpSpec::relu_hidden(2, &[3], 2).unwrap();
        let mut params = MlpParams::init(&spec, 1);
        let n = params.num_coords();
        assert_eq!(n, spec.num_coords());
        assert_eq!(n, 2 * 3 + 3 + 3 * 2 + 2);
        for i in 0..n {
            *params.coord_mut(i) = i as f64;
        }
        let mut seen: Vec<f64> = Vec::new();
        for l in 0..params.num_layers() {
            seen.extend_from_slice(params.weights(l));
            seen.extend_from_slice(params.biases(l));
        }
        let expect: Vec<f64> = (0..n).map(|i| i as f64).collect();
        assert_eq!(seen, expect);
    }
}
