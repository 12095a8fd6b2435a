//! Small fully connected networks with hand-written backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{CheckpointError, Section};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum OutputActivation {
    Linear,
    /// `lo + (hi - lo)·(tanh(z) + 1)/2`, elementwise.
    BoundedTanh {
        lo: f64,
        hi: f64,
    },
}

impl OutputActivation {
    fn apply(&self, z: f64) -> f64 {
        match *self {
            Self::Linear => z,
            Self::BoundedTanh { lo, hi } => (lo + (hi - lo) * 0.5 * (z.tanh() + 1.0)).clamp(lo, hi),
        }
    }

    fn derivative(&self, z: f64) -> f64 {
        match *self {
            Self::Linear => 1.0,
            Self::BoundedTanh { lo, hi } => {
                let t = z.tanh();
                0.5 * (hi - lo) * (1.0 - t * t)
            }
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Linear => None,
            Self::BoundedTanh { lo, hi } => Some((lo, hi)),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum HiddenActivation {
    #[default]
    Relu,
    /// `max(z, slope·z)`; keeps a gradient through negative pre-activations.
    LeakyRelu { slope: f64 },
}

impl HiddenActivation {
    fn apply(&self, z: f64) -> f64 {
        match *self {
            Self::Relu => z.max(0.0),
            Self::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
        }
    }

    fn derivative(&self, z: f64) -> f64 {
        match *self {
            _ if z > 0.0 => 1.0,
            Self::Relu => 0.0,
            Self::LeakyRelu { slope } => slope,
        }
    }
}

/// Weights are stored row-major, `outputs × inputs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], biases: vec![0.0; outputs] }
    }

    /// Uniform in `±1/√fan_in`.
    pub fn uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut d = Self::zeros(inputs, outputs);
        for w in d.weights.iter_mut().chain(d.biases.iter_mut()) {
            *w = rng.random_range(-bound..=bound);
        }
        d
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.biases)
                .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b),
        );
    }
}

/// Per-layer inputs and pre-activations recorded by a forward pass.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub hidden: HiddenActivation,
    pub output: OutputActivation,
}

impl Mlp {
    /// Hidden layers use ReLU; the last layer uses `output`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], output: OutputActivation, rng: &mut R) -> Self {
        assert!(widths.len() >= 2 && widths.iter().all(|&w| w > 0), "bad layer widths {widths:?}");
        let layers = widths.windows(2).map(|w| Dense::uniform(w[0], w[1], rng)).collect();
        Self { layers, hidden: HiddenActivation::Relu, output }
    }

    pub fn zeros(widths: &[usize], output: OutputActivation) -> Self {
        let layers = widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Self { layers, hidden: HiddenActivation::Relu, output }
    }

    pub fn with_hidden(mut self, hidden: HiddenActivation) -> Self {
        self.hidden = hidden;
        self
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(|l| l.outputs));
        w
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut a = x.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&a, &mut z);
            if i == last {
                a = z.iter().map(|&v| self.output.apply(v)).collect();
            } else {
                a = z.iter().map(|&v| self.hidden.apply(v)).collect();
            }
        }
        a
    }

    pub fn forward_trace(&self, x: &[f64]) -> Trace {
        let mut trace = Trace::default();
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.affine(&a, &mut z);
            let next = if i == last {
                z.iter().map(|&v| self.output.apply(v)).collect()
            } else {
                z.iter().map(|&v| self.hidden.apply(v)).collect()
            };
            trace.inputs.push(std::mem::replace(&mut a, next));
            trace.pre.push(z);
        }
        trace.output = a;
        trace
    }

    /// Backpropagates `d_out = ∂L/∂output`, accumulating parameter
    /// gradients into `grad` and returning `∂L/∂input`.
    pub fn backward(&self, trace: &Trace, d_out: &[f64], grad: &mut MlpGrad) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut delta: Vec<f64> =
            trace.pre[last].iter().zip(d_out).map(|(&z, &g)| g * self.output.derivative(z)).collect();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &trace.inputs[i];
            let g = &mut grad.layers[i];
            for (o, &d) in delta.iter().enumerate() {
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (w, &x) in row.iter_mut().zip(input) {
                    *w += d * x;
                }
            }
            let mut d_in = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (acc, &w) in d_in.iter_mut().zip(row) {
                    *acc += d * w;
                }
            }
            if i > 0 {
                for (v, &z) in d_in.iter_mut().zip(&trace.pre[i - 1]) {
                    *v *= self.hidden.derivative(z);
                }
            }
            delta = d_in;
        }
        delta
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Flattened parameters, layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.biases);
        }
        p
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + n]);
            off += n;
            let n = l.biases.len();
            l.biases.copy_from_slice(&params[off..off + n]);
            off += n;
        }
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn clear_biases(&mut self) {
        self.layers.iter_mut().for_each(|l| l.biases.fill(0.0));
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    /// `self ← tau·online + (1 − tau)·self`.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) {
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            for (tw, ow) in t.weights.iter_mut().chain(t.biases.iter_mut()).zip(o.weights.iter().chain(&o.biases)) {
                *tw = tau * ow + (1.0 - tau) * *tw;
            }
        }
    }

    pub fn to_section(&self, name: &str) -> Section {
        let mut s = Section::new(name);
        s.push_usizes("widths", &self.widths());
        match self.hidden {
            HiddenActivation::Relu => s.push_str("hidden", "relu"),
            HiddenActivation::LeakyRelu { slope } => {
                s.push_str("hidden", "leaky_relu");
                s.push_f64("slope", slope);
            }
        }
        match self.output {
            OutputActivation::Linear => s.push_str("output", "linear"),
            OutputActivation::BoundedTanh { lo, hi } => {
                s.push_str("output", "bounded_tanh");
                s.push_floats("bounds", &[lo, hi]);
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            s.push_floats(&format!("w{i}"), &l.weights);
            s.push_floats(&format!("b{i}"), &l.biases);
        }
        s
    }

    pub fn from_section(s: &Section) -> Result<Self, CheckpointError> {
        let widths = s.usizes("widths")?;
        if widths.len() < 2 || widths.contains(&0) {
            return Err(s.bad("widths", format!("invalid layer widths {widths:?}")));
        }
        let output = match s.str("output")? {
            "linear" => OutputActivation::Linear,
            "bounded_tanh" => {
                let b = s.floats_len("bounds", 2)?;
                OutputActivation::BoundedTanh { lo: b[0], hi: b[1] }
            }
            other => return Err(s.bad("output", format!("unknown activation `{other}`"))),
        };
        let hidden = match s.str("hidden")? {
            "relu" => HiddenActivation::Relu,
            "leaky_relu" => HiddenActivation::LeakyRelu { slope: s.f64("slope")? },
            other => return Err(s.bad("hidden", format!("unknown activation `{other}`"))),
        };
        let mut mlp = Mlp::zeros(&widths, output).with_hidden(hidden);
        for (i, l) in mlp.layers.iter_mut().enumerate() {
            l.weights = s.floats_len(&format!("w{i}"), l.weights.len())?;
            l.biases = s.floats_len(&format!("b{i}"), l.biases.len())?;
        }
        Ok(mlp)
    }
}

/// Gradient buffers shaped like an [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrad {
    pub layers: Vec<Dense>,
}

impl MlpGrad {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self { layers: mlp.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect() }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases).copied()).collect()
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|v| *v *= k);
        }
    }

    pub fn norm(&self) -> f64 {
        self.flat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let m = Mlp::zeros(&[4, 3, 2], OutputActivation::Linear);
        assert_eq!(m.forward(&[1.0, -2.0, 3.0, 4.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn hand_computed_two_two_one() {
        // h = relu([[1, 0], [0.5, -1]]·x + [0, 0.1]); y = [2, -3]·h + 0.5
        let mut m = Mlp::zeros(&[2, 2, 1], OutputActivation::Linear);
        m.layers[0].weights = vec![1.0, 0.0, 0.5, -1.0];
        m.layers[0].biases = vec![0.0, 0.1];
        m.layers[1].weights = vec![2.0, -3.0];
        m.layers[1].biases = vec![0.5];
        // x = (0.4, 0.1): h = (0.4, relu(0.2 - 0.1 + 0.1)) = (0.4, 0.2); y = 0.8 - 0.6 + 0.5
        assert!((m.forward(&[0.4, 0.1])[0] - 0.7).abs() < 1e-15);
        // x = (-1, 2): h = (0, relu(-0.5 - 2 + 0.1)) = (0, 0); y = 0.5
        assert_eq!(m.forward(&[-1.0, 2.0])[0], 0.5);
    }

    #[test]
    fn bounded_head_stays_in_range_at_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Mlp::new(&[3, 3, 2], OutputActivation::BoundedTanh { lo: 0.0, hi: 0.5 }, &mut rng);
        for x in [[1e6, -1e6, 1e6], [-1e6, 1e6, -1e6], [0.0; 3], [1e300, -1e300, 0.0]] {
            for y in m.forward(&x) {
                assert!((0.0..=0.5).contains(&y), "{y}");
            }
        }
    }

    #[test]
    fn trace_matches_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = Mlp::new(&[5, 5, 5, 5, 2, 1], OutputActivation::Linear, &mut rng);
        let x = [0.1, -0.3, 0.7, 0.2, -0.9];
        assert_eq!(m.forward_trace(&x).output(), m.forward(&x).as_slice());
    }

    #[test]
    fn soft_update_with_unit_tau_copies() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let online = Mlp::new(&[2, 3, 1], OutputActivation::Linear, &mut rng);
        let mut target = Mlp::new(&[2, 3, 1], OutputActivation::Linear, &mut rng);
        target.soft_update_from(&online, 1.0);
        assert_eq!(target, online);
    }

    #[test]
    fn section_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = Mlp::new(&[6, 3, 6], OutputActivation::BoundedTanh { lo: -1.0, hi: 1.0 }, &mut rng);
        let back = Mlp::from_section(&m.to_section("actor")).unwrap();
        assert_eq!(back, m);
        let m = m.with_hidden(HiddenActivation::LeakyRelu { slope: 0.01 });
        let back = Mlp::from_section(&m.to_section("actor")).unwrap();
        assert_eq!(back, m);
    }
}
