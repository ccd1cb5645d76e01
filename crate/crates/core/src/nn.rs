//! Dense feed-forward networks with a scalar output, tanh hidden layers and
//! exact reverse-mode gradients.

use rand::Rng;

use crate::{Error, Result};

/// Activation applied to the scalar output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputHead {
    Linear,
    /// `-log(1 + e^z)`, strictly negative.
    NegSoftplus,
    /// `log(1 + e^z)`, strictly positive.
    PosSoftplus,
}

impl OutputHead {
    pub fn name(self) -> &'static str {
        match self {
            OutputHead::Linear => "linear",
            OutputHead::NegSoftplus => "neg_softplus",
            OutputHead::PosSoftplus => "pos_softplus",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "linear" => Some(OutputHead::Linear),
            "neg_softplus" => Some(OutputHead::NegSoftplus),
            "pos_softplus" => Some(OutputHead::PosSoftplus),
            _ => None,
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            OutputHead::Linear => z,
            OutputHead::NegSoftplus => -softplus(z),
            OutputHead::PosSoftplus => softplus(z),
        }
    }

    /// `apply(low + width) − apply(low)`, evaluated without subtracting
    /// nearly equal outputs.
    pub fn difference(self, low: f64, width: f64) -> f64 {
        let sp = (sigmoid(low) * width.exp_m1()).ln_1p();
        match self {
            OutputHead::Linear => width,
            OutputHead::NegSoftplus => -sp,
            OutputHead::PosSoftplus => sp,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            OutputHead::Linear => 1.0,
            OutputHead::NegSoftplus => -sigmoid(z),
            OutputHead::PosSoftplus => sigmoid(z),
        }
    }
}

pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer; `weights` is row-major `(outputs × inputs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.biases) {
            out.push(b + dot(row, input));
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four independent accumulators keep the loop pipelined
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = 4 * i;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Per-parameter partial derivatives, laid out exactly like an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<Dense>,
}

impl GradientSet {
    pub fn zero(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.biases.fill(0.0);
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases))
            .map(|g| g * g)
            .sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|g| *g *= factor);
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases))
            .all(|g| g.is_finite())
    }
}

/// Scales a group of gradient sets so their joint L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut GradientSet], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g.norm_sq()).sum::<f64>().sqrt();
    if norm > max_norm {
        let factor = max_norm / norm;
        for g in grads.iter_mut() {
            g.scale(factor);
        }
    }
    norm
}

fn flatten(layers: &[Dense]) -> Vec<f64> {
    let mut out = Vec::with_capacity(layers.iter().map(Dense::param_count).sum());
    for l in layers {
        out.extend_from_slice(&l.weights);
        out.extend_from_slice(&l.biases);
    }
    out
}

/// Activations from one forward pass: the input followed by each hidden
/// layer's tanh output, plus the pre-activation of the scalar output.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
    z_out: f64,
    scratch: Vec<f64>,
}

impl ForwardCache {
    pub fn output_preactivation(&self) -> f64 {
        self.z_out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    head: OutputHead,
}

impl Mlp {
    /// Weights uniform in ±1/√fan_in, biases zero. The last entry of
    /// `layer_sizes` must be 1.
    pub fn new<R: Rng + ?Sized>(layer_sizes: &[usize], head: OutputHead, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, head)?;
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(layer_sizes: &[usize], head: OutputHead) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidParam(format!("bad layer sizes {layer_sizes:?}")));
        }
        if *layer_sizes.last().unwrap() != 1 {
            return Err(Error::InvalidParam("network output must be scalar".into()));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|w| Dense::zeros(w[0], w[1]))
            .collect();
        Ok(Self { layers, head })
    }

    pub fn from_layers(layers: Vec<Dense>, head: OutputHead) -> Result<Self> {
        let consistent = !layers.is_empty()
            && layers.windows(2).all(|w| w[0].outputs == w[1].inputs)
            && layers.last().is_some_and(|l| l.outputs == 1)
            && layers
                .iter()
                .all(|l| l.weights.len() == l.inputs * l.outputs && l.biases.len() == l.outputs);
        if !consistent {
            return Err(Error::ShapeMismatch);
        }
        Ok(Self { layers, head })
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn head(&self) -> OutputHead {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// All parameters, layer by layer: weights (row-major) then biases.
    pub fn flat_params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::ShapeMismatch);
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, tail) = tail.split_at(l.biases.len());
            l.biases.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    /// Parameter `index` in [`Self::flat_params`] order.
    pub fn param_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        for l in &mut self.layers {
            let nw = l.weights.len();
            if index < nw {
                return Some(&mut l.weights[index]);
            }
            index -= nw;
            if index < l.biases.len() {
                return Some(&mut l.biases[index]);
            }
            index -= l.biases.len();
        }
        None
    }

    pub fn zero_gradients(&self) -> GradientSet {
        GradientSet {
            layers: self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        let mut cache = ForwardCache::default();
        self.forward_cached(input, &mut cache)
    }

    /// Forward pass that keeps the activations needed by [`Self::backward`].
    pub fn forward_cached(&self, input: &[f64], cache: &mut ForwardCache) -> Result<f64> {
        if input.len() != self.input_dim() {
            return Err(Error::InputLength {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let n = self.layers.len();
        cache.activations.resize_with(n, Vec::new);
        cache.activations[0].clear();
        cache.activations[0].extend_from_slice(input);
        for (l, layer) in self.layers[..n - 1].iter().enumerate() {
            let (done, rest) = cache.activations.split_at_mut(l + 1);
            layer.forward(&done[l], &mut rest[0]);
            rest[0].iter_mut().for_each(|h| *h = h.tanh());
        }
        let last = &self.layers[n - 1];
        cache.z_out = last.biases[0] + dot(&last.weights, &cache.activations[n - 1]);
        Ok(self.head.apply(cache.z_out))
    }

    /// Accumulates `d_output * ∂output/∂θ` into `grads` for the input that
    /// produced `cache`, and returns `d_output * ∂output/∂input` when asked.
    pub fn backward(
        &self,
        cache: &mut ForwardCache,
        d_output: f64,
        grads: &mut GradientSet,
        want_input_grad: bool,
    ) -> Option<Vec<f64>> {
        let n = self.layers.len();
        let mut delta = std::mem::take(&mut cache.scratch);
        delta.clear();
        delta.push(d_output * self.head.derivative(cache.z_out));
        let mut next = Vec::new();
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let g = &mut grads.layers[l];
            let input = &cache.activations[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, x) in row.iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            if l == 0 && !want_input_grad {
                break;
            }
            next.clear();
            next.resize(layer.inputs, 0.0);
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (acc, w) in next.iter_mut().zip(row) {
                    *acc += d * w;
                }
            }
            if l > 0 {
                // through tanh: d/dz = 1 - h²
                for (acc, h) in next.iter_mut().zip(input) {
                    *acc *= 1.0 - h * h;
                }
            }
            std::mem::swap(&mut delta, &mut next);
        }
        let input_grad = want_input_grad.then(|| delta.clone());
        cache.scratch = delta;
        input_grad
    }

    /// Gradients of the output at `input` with respect to every parameter
    /// and the input.
    pub fn gradients(&self, input: &[f64]) -> Result<(GradientSet, Vec<f64>)> {
        let mut cache = ForwardCache::default();
        self.forward_cached(input, &mut cache)?;
        let mut grads = self.zero_gradients();
        let d_input = self.backward(&mut cache, 1.0, &mut grads, true).expect("requested");
        Ok((grads, d_input))
    }

    /// `p <- p - alpha * g`. Non-finite gradients are rejected and leave the
    /// network untouched.
    pub fn sgd_step(&mut self, grads: &GradientSet, alpha: f64) -> Result<()> {
        if grads.layers.len() != self.layers.len()
            || grads
                .layers
                .iter()
                .zip(&self.layers)
                .any(|(g, l)| g.weights.len() != l.weights.len() || g.biases.len() != l.biases.len())
        {
            return Err(Error::ShapeMismatch);
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite { what: "gradient".into() });
        }
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (p, d) in layer.weights.iter_mut().zip(&g.weights) {
                *p -= alpha * d;
            }
            for (p, d) in layer.biases.iter_mut().zip(&g.biases) {
                *p -= alpha * d;
            }
        }
        Ok(())
    }
}

/// Relative error used by the gradient checks; zero when both sides are
/// below 1e-12 in magnitude.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-12 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Output preactivation at `p − h` and the spread `z(p + h) − z(p − h)`
/// for one perturbed coordinate `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub low: f64,
    pub width: f64,
}

impl Spread {
    /// Central difference of the network output.
    pub fn slope(self, head: OutputHead, h: f64) -> f64 {
        head.difference(self.low, self.width) / (2.0 * h)
    }
}

/// tanh(a + d) − tanh(a)
fn tanh_step(a: f64, d: f64) -> f64 {
    d.sinh() / ((a + d).cosh() * a.cosh())
}

/// tanh(a + d) − tanh(a − d)
fn tanh_spread(a: f64, d: f64) -> f64 {
    (2.0 * d).sinh() / ((a + d).cosh() * (a - d).cosh())
}

/// Central spreads of the output preactivation for every parameter (flat
/// order) and every input of a one-hidden-layer network. Only the hidden
/// units a coordinate touches are re-evaluated and their change is formed
/// directly, so tiny partials keep full relative precision.
pub fn central_spreads(net: &Mlp, input: &[f64], h: f64) -> Result<(Vec<Spread>, Vec<Spread>)> {
    let [hidden, out] = net.layers() else {
        return Err(Error::InvalidParam("central spreads need exactly one hidden layer".into()));
    };
    if input.len() != hidden.inputs {
        return Err(Error::InputLength {
            expected: hidden.inputs,
            got: input.len(),
        });
    }
    let mut pre = Vec::new();
    hidden.forward(input, &mut pre);
    let act: Vec<f64> = pre.iter().map(|a| a.tanh()).collect();
    let w2 = &out.weights;
    let z = out.biases[0] + dot(w2, &act);

    let mut params = Vec::with_capacity(net.param_count());
    for (j, &a) in pre.iter().enumerate() {
        for &x in input {
            let d = h * x;
            params.push(Spread {
                low: z + w2[j] * tanh_step(a, -d),
                width: w2[j] * tanh_spread(a, d),
            });
        }
    }
    for (j, &a) in pre.iter().enumerate() {
        params.push(Spread {
            low: z + w2[j] * tanh_step(a, -h),
            width: w2[j] * tanh_spread(a, h),
        });
    }
    for &t in &act {
        params.push(Spread {
            low: z - h * t,
            width: 2.0 * h * t,
        });
    }
    params.push(Spread { low: z - h, width: 2.0 * h });

    let inputs = (0..hidden.inputs)
        .map(|i| {
            let (mut low, mut width) = (z, 0.0);
            for (j, &a) in pre.iter().enumerate() {
                let d = h * hidden.weights[j * hidden.inputs + i];
                low += w2[j] * tanh_step(a, -d);
                width += w2[j] * tanh_spread(a, d);
            }
            Spread { low, width }
        })
        .collect();
    Ok((params, inputs))
}

/// Plain central differences `(f(p+h) − f(p−h)) / 2h` of the output for
/// every parameter and input, from full forward passes.
pub fn naive_differences(net: &Mlp, input: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut probe = net.clone();
    let mut params = Vec::with_capacity(net.param_count());
    for i in 0..net.param_count() {
        let base = *probe.param_mut(i).ok_or(Error::ShapeMismatch)?;
        *probe.param_mut(i).expect("index checked") = base + h;
        let plus = probe.forward(input)?;
        *probe.param_mut(i).expect("index checked") = base - h;
        let minus = probe.forward(input)?;
        *probe.param_mut(i).expect("index checked") = base;
        params.push((plus - minus) / (2.0 * h));
    }
    let mut x = input.to_vec();
    let mut inputs = Vec::with_capacity(input.len());
    for i in 0..input.len() {
        x[i] = input[i] + h;
        let plus = net.forward(&x)?;
        x[i] = input[i] - h;
        let minus = net.forward(&x)?;
        x[i] = input[i];
        inputs.push((plus - minus) / (2.0 * h));
    }
    Ok((params, inputs))
}

/// Central differences of the output for every parameter and input: the
/// cancellation-free form for one hidden layer, plain forward passes
/// otherwise.
pub fn central_differences(net: &Mlp, input: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if net.layers().len() != 2 {
        return naive_differences(net, input, h);
    }
    let (params, inputs) = central_spreads(net, input, h)?;
    let slope = |s: &Spread| s.slope(net.head(), h);
    Ok((params.iter().map(slope).collect(), inputs.iter().map(slope).collect()))
}

/// Compares analytic parameter and input gradients with central
/// differences `(f(p+h) - f(p-h)) / 2h` (see [`central_differences`]) over
/// `trials` random inputs drawn from [-2, 2]. Returns the worst relative
/// error seen.
pub fn gradient_check<R: Rng + ?Sized>(net: &Mlp, trials: usize, h: f64, rng: &mut R) -> Result<f64> {
    gradient_check_with(net, trials, h, rng, |g| g)
}

/// [`gradient_check`] with a hook that may alter the analytic gradients
/// before comparison, for verifying the check itself.
pub fn gradient_check_with<R, F>(net: &Mlp, trials: usize, h: f64, rng: &mut R, mut tamper: F) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(Vec<f64>) -> Vec<f64>,
{
    if !(1e-7..=1e-4).contains(&h) {
        return Err(Error::InvalidParam(format!("finite-difference step {h} outside [1e-7, 1e-4]")));
    }
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let input: Vec<f64> = (0..net.input_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (grads, d_input) = net.gradients(&input)?;
        let analytic = tamper(grads.flat());
        let (numeric, numeric_input) = central_differences(net, &input, h)?;
        for (a, n) in analytic.iter().zip(&numeric).chain(d_input.iter().zip(&numeric_input)) {
            worst = worst.max(relative_error(*a, *n));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{stream_rng, Stream};
    use proptest::prelude::*;
    use rand::Rng;

    fn rng() -> rand_chacha::ChaCha8Rng {
        stream_rng(11, Stream::Diagnostics)
    }

    fn biased_net(sizes: &[usize], head: OutputHead, r: &mut rand_chacha::ChaCha8Rng) -> Mlp {
        let mut net = Mlp::new(sizes, head, r).unwrap();
        for l in net.layers_mut() {
            l.biases.iter_mut().for_each(|b| *b = r.random_range(-0.5..0.5));
        }
        net
    }

    #[test]
    fn spreads_agree_with_plain_differences() {
        let mut r = rng();
        for head in [OutputHead::Linear, OutputHead::NegSoftplus, OutputHead::PosSoftplus] {
            let net = biased_net(&[8, 30, 1], head, &mut r);
            let x: Vec<f64> = (0..8).map(|_| r.random_range(-2.0..2.0)).collect();
            let (sp, si) = central_differences(&net, &x, 1e-5).unwrap();
            let (np, ni) = naive_differences(&net, &x, 1e-5).unwrap();
            for (a, b) in sp.iter().zip(&np).chain(si.iter().zip(&ni)) {
                // plain differencing carries about 1e-11 of rounding noise
                assert!((a - b).abs() < 1e-9, "{head:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn spreads_resolve_tiny_partials() {
        let mut r = rng();
        for head in [OutputHead::Linear, OutputHead::NegSoftplus, OutputHead::PosSoftplus] {
            let net = biased_net(&[8, 100, 1], head, &mut r);
            let x: Vec<f64> = (0..8).map(|_| r.random_range(-2.0..2.0)).collect();
            let (grads, d_input) = net.gradients(&x).unwrap();
            let (sp, si) = central_differences(&net, &x, 1e-5).unwrap();
            for (a, n) in grads.flat().iter().zip(&sp).chain(d_input.iter().zip(&si)) {
                assert!(relative_error(*a, *n) < 1e-8, "{head:?}: {a} vs {n}");
            }
        }
    }

    #[test]
    fn head_difference_matches_direct_form() {
        for head in [OutputHead::Linear, OutputHead::NegSoftplus, OutputHead::PosSoftplus] {
            for (low, width) in [(-3.0, 0.5), (0.2, -0.7), (4.0, 1.5), (-30.0, 2.0)] {
                let direct = head.apply(low + width) - head.apply(low);
                assert!((head.difference(low, width) - direct).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn deeper_nets_fall_back_to_plain_differences() {
        let mut r = rng();
        let net = biased_net(&[3, 5, 4, 1], OutputHead::PosSoftplus, &mut r);
        assert!(central_spreads(&net, &[0.1, 0.2, 0.3], 1e-5).is_err());
        let x = [0.1, -0.4, 0.9];
        assert_eq!(central_differences(&net, &x, 1e-5).unwrap(), naive_differences(&net, &x, 1e-5).unwrap());
    }

    #[test]
    fn zero_network_outputs() {
        let lin = Mlp::zeros(&[8, 100, 1], OutputHead::Linear).unwrap();
        assert_eq!(lin.forward(&[0.3; 8]).unwrap(), 0.0);
        let neg = Mlp::zeros(&[8, 100, 1], OutputHead::NegSoftplus).unwrap();
        assert!((neg.forward(&[1.0; 8]).unwrap() + std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn single_affine_layer() {
        let layer = Dense {
            inputs: 1,
            outputs: 1,
            weights: vec![2.0],
            biases: vec![1.0],
        };
        let net = Mlp::from_layers(vec![layer], OutputHead::Linear).unwrap();
        assert_eq!(net.forward(&[0.5]).unwrap(), 2.0);
        let (g, dx) = net.gradients(&[0.5]).unwrap();
        assert_eq!(g.layers[0].weights, vec![0.5]);
        assert_eq!(g.layers[0].biases, vec![1.0]);
        assert_eq!(dx, vec![2.0]);
    }

    #[test]
    fn input_length_checked() {
        let net = Mlp::zeros(&[8, 4, 1], OutputHead::Linear).unwrap();
        assert!(matches!(net.forward(&[0.0; 7]), Err(Error::InputLength { expected: 8, got: 7 })));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = Mlp::new(&[8, 16, 1], OutputHead::PosSoftplus, &mut rng()).unwrap();
        let mut cache = ForwardCache::default();
        net.forward_cached(&[0.5; 8], &mut cache).unwrap();
        let mut grads = net.zero_gradients();
        let dx = net.backward(&mut cache, 0.0, &mut grads, true).unwrap();
        assert_eq!(grads.norm_sq(), 0.0);
        assert!(dx.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn gradients_match_finite_differences_for_every_head() {
        let mut rng = rng();
        for head in [OutputHead::Linear, OutputHead::NegSoftplus, OutputHead::PosSoftplus] {
            let net = Mlp::new(&[8, 100, 1], head, &mut rng).unwrap();
            let err = gradient_check(&net, 3, 1e-5, &mut rng).unwrap();
            assert!(err < 1e-5, "{head:?}: {err}");
        }
        let deep = Mlp::new(&[5, 7, 6, 1], OutputHead::NegSoftplus, &mut rng).unwrap();
        assert!(gradient_check(&deep, 5, 1e-5, &mut rng).unwrap() < 1e-5);
    }

    #[test]
    fn zero_network_checks_clean() {
        let net = Mlp::zeros(&[8, 10, 1], OutputHead::Linear).unwrap();
        // only the output bias and the hidden-to-output weights see signal
        let err = gradient_check(&net, 2, 1e-5, &mut rng()).unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let mut rng = rng();
        let net = Mlp::new(&[8, 20, 1], OutputHead::NegSoftplus, &mut rng).unwrap();
        let err = gradient_check_with(&net, 2, 1e-5, &mut rng, |g| g.into_iter().map(|x| x * 1.01).collect()).unwrap();
        assert!(err > 1e-5);
    }

    #[test]
    fn step_size_bounds() {
        let net = Mlp::zeros(&[2, 2, 1], OutputHead::Linear).unwrap();
        assert!(gradient_check(&net, 1, 1e-3, &mut rng()).is_err());
    }

    #[test]
    fn sgd_arithmetic_and_rejections() {
        let layer = Dense {
            inputs: 1,
            outputs: 1,
            weights: vec![1.0],
            biases: vec![0.0],
        };
        let mut net = Mlp::from_layers(vec![layer], OutputHead::Linear).unwrap();
        let mut g = net.zero_gradients();
        let before = net.clone();
        net.sgd_step(&g, 0.01).unwrap();
        assert_eq!(net, before);
        g.layers[0].weights[0] = 0.5;
        net.sgd_step(&g, 0.01).unwrap();
        assert_eq!(net.layers()[0].weights[0], 0.995);
        g.layers[0].weights[0] = f64::NAN;
        assert!(matches!(net.sgd_step(&g, 0.01), Err(Error::NonFinite { .. })));
        assert_eq!(net.layers()[0].weights[0], 0.995);
    }

    #[test]
    fn global_norm_clip() {
        let net = Mlp::zeros(&[1, 1], OutputHead::Linear).unwrap();
        let mut a = net.zero_gradients();
        let mut b = net.zero_gradients();
        a.layers[0].weights[0] = 60.0;
        b.layers[0].weights[0] = 80.0;
        let norm = clip_global_norm(&mut [&mut a, &mut b], 10.0);
        assert_eq!(norm, 100.0);
        let clipped = (a.norm_sq() + b.norm_sq()).sqrt();
        assert!((clipped - 10.0).abs() < 1e-12);
        assert!((a.layers[0].weights[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn init_outputs_are_moderate() {
        let mut rng = rng();
        for head in [OutputHead::Linear, OutputHead::NegSoftplus, OutputHead::PosSoftplus] {
            let net = Mlp::new(&[8, 150, 1], head, &mut rng).unwrap();
            for _ in 0..200 {
                let x: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
                assert!(net.forward(&x).unwrap().abs() <= 5.0);
            }
        }
    }

    #[test]
    fn flat_params_round_trip() {
        let mut net = Mlp::new(&[3, 4, 1], OutputHead::Linear, &mut rng()).unwrap();
        let p = net.flat_params();
        assert_eq!(p.len(), 3 * 4 + 4 + 4 + 1);
        let mut other = Mlp::zeros(&[3, 4, 1], OutputHead::Linear).unwrap();
        other.set_flat_params(&p).unwrap();
        assert_eq!(other, net);
        assert!(net.set_flat_params(&p[1..]).is_err());
    }

    proptest! {
        #[test]
        fn softplus_heads_have_strict_sign(z in -700.0f64..700.0) {
            prop_assert!(OutputHead::NegSoftplus.apply(z) < 0.0);
            prop_assert!(OutputHead::PosSoftplus.apply(z) > 0.0);
        }

        #[test]
        fn update_is_deterministic(seed in 0u64..1000, alpha in 0.0f64..0.1) {
            let mut r = stream_rng(seed, Stream::Init);
            let net = Mlp::new(&[4, 6, 1], OutputHead::Linear, &mut r).unwrap();
            let (g, _) = net.gradients(&[0.1, -0.2, 0.3, 0.4]).unwrap();
            let mut a = net.clone();
            let mut b = net.clone();
            a.sgd_step(&g, alpha).unwrap();
            b.sgd_step(&g, alpha).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
