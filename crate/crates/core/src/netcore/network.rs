use serde::{Deserialize, Serialize};

use super::NetError;
use crate::numkit::{Mat, RandomSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Softplus,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Softplus => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Softplus),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Softplus => softplus(z),
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Softplus => sigmoid(z),
        }
    }
}

/// `ln(1 + eᶻ)` in the overflow-safe form `max(z, 0) + ln(1 + e^{−|z|})`.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Mat,
    biases: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(weights: Mat, biases: Vec<f64>, activation: Activation) -> Result<Self, NetError> {
        if biases.len() != weights.rows() {
            return Err(NetError::DimensionMismatch {
                expected: weights.rows(),
                actual: biases.len(),
            });
        }
        if weights.check_finite().is_err() || biases.iter().any(|b| !b.is_finite()) {
            return Err(NetError::NonFinite("layer parameters".into()));
        }
        Ok(Self {
            weights,
            biases,
            activation,
        })
    }

    pub fn weights(&self) -> &Mat {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    fn pre_activation(&self, input: &[f64]) -> Vec<f64> {
        (0..self.outputs())
            .map(|i| crate::numkit::dot(self.weights.row(i), input) + self.biases[i])
            .collect()
    }

    pub(crate) fn params_mut(&mut self) -> (&mut Mat, &mut [f64]) {
        (&mut self.weights, &mut self.biases)
    }
}

/// Which scalar of the network output is tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    #[default]
    SoftmaxProbability,
    Logit,
}

/// Quantity of interest: one class score of the network output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QoiSpec {
    pub class_index: usize,
    pub score_kind: ScoreKind,
}

impl QoiSpec {
    pub fn new(net: &DenseNetwork, class_index: usize, score_kind: ScoreKind) -> Result<Self, NetError> {
        if class_index >= net.output_dim() {
            return Err(NetError::InvalidClass {
                class: class_index,
                classes: net.output_dim(),
            });
        }
        Ok(Self {
            class_index,
            score_kind,
        })
    }

    /// Tracks the class the network predicts at `x0`.
    pub fn predicted_at(net: &DenseNetwork, x0: &[f64], score_kind: ScoreKind) -> Result<Self, NetError> {
        let class_index = net.predict(x0)?;
        Ok(Self {
            class_index,
            score_kind,
        })
    }
}

/// Intermediate values of one forward pass, kept for backpropagation.
pub(crate) struct Trace {
    /// Input to each layer; `inputs[0]` is the network input.
    pub inputs: Vec<Vec<f64>>,
    pub pre_activations: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layers: Vec<Layer>,
}

impl DenseNetwork {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NetError> {
        let last = layers.last().ok_or(NetError::NoLayers)?;
        if last.activation != Activation::Identity {
            return Err(NetError::FinalActivation);
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].inputs() != pair[0].outputs() {
                return Err(NetError::LayerChain {
                    layer: i + 1,
                    expected: pair[1].inputs(),
                    actual: pair[0].outputs(),
                });
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-uniform initialization: weights in `±√(6/(fan_in+fan_out))`,
    /// zero biases, softplus hidden layers and identity output.
    pub fn random(sizes: &[usize], rng: &mut RandomSource) -> Result<Self, NetError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NetError::InvalidArchitecture(format!(
                "layer sizes {sizes:?} need at least input and output, all non-zero"
            )));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (i, pair) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out).map(|_| rng.uniform(-limit, limit)).collect();
            let weights =
                Mat::from_row_major(fan_out, fan_in, data).map_err(|e| NetError::InvalidArchitecture(e.to_string()))?;
            let activation = if i + 2 == sizes.len() {
                Activation::Identity
            } else {
                Activation::Softplus
            };
            layers.push(Layer::new(weights, vec![0.0; fan_out], activation)?);
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NetError> {
        if x.len() != self.input_dim() {
            return Err(NetError::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NetError::NonFinite("network input".into()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        for layer in &self.layers {
            a = layer
                .pre_activation(&a)
                .into_iter()
                .map(|z| layer.activation.apply(z))
                .collect();
        }
        Ok(a)
    }

    pub(crate) fn forward_trace(&self, x: &[f64]) -> Result<Trace, NetError> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        for layer in &self.layers {
            let z = layer.pre_activation(&a);
            let next = z.iter().map(|&v| layer.activation.apply(v)).collect();
            inputs.push(std::mem::replace(&mut a, next));
            pre_activations.push(z);
        }
        Ok(Trace {
            inputs,
            pre_activations,
            logits: a,
        })
    }

    /// Backpropagates `output_grad` (∂L/∂logits) to the input. When
    /// `param_grads` is given, parameter gradients are accumulated into it.
    pub(crate) fn backward(
        &self,
        trace: &Trace,
        output_grad: &[f64],
        mut param_grads: Option<&mut [(Mat, Vec<f64>)]>,
    ) -> Vec<f64> {
        let mut delta_a = output_grad.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let delta_z: Vec<f64> = delta_a
                .iter()
                .zip(&trace.pre_activations[l])
                .map(|(d, &z)| d * layer.activation.derivative(z))
                .collect();
            if let Some(grads) = param_grads.as_deref_mut() {
                let (gw, gb) = &mut grads[l];
                for (i, &dz) in delta_z.iter().enumerate() {
                    gb[i] += dz;
                    for (g, &input) in gw.row_mut(i).iter_mut().zip(&trace.inputs[l]) {
                        *g += dz * input;
                    }
                }
            }
            delta_a = layer
                .weights
                .matvec_transposed(&delta_z)
                .expect("layer shapes are validated at construction");
        }
        delta_a
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize, NetError> {
        let logits = self.forward(x)?;
        Ok(argmax(&logits))
    }

    pub fn qoi(&self, x: &[f64], spec: &QoiSpec) -> Result<f64, NetError> {
        self.check_class(spec)?;
        let logits = self.forward(x)?;
        Ok(score(&logits, spec))
    }

    /// Value and input-gradient of the quantity of interest.
    pub fn qoi_and_grad(&self, x: &[f64], spec: &QoiSpec) -> Result<(f64, Vec<f64>), NetError> {
        self.check_class(spec)?;
        let trace = self.forward_trace(x)?;
        let k = spec.class_index;
        let mut seed = vec![0.0; self.output_dim()];
        let value = match spec.score_kind {
            ScoreKind::Logit => {
                seed[k] = 1.0;
                trace.logits[k]
            }
            ScoreKind::SoftmaxProbability => {
                // ∂p_k/∂z_j = p_k (δ_kj − p_j)
                let p = softmax(&trace.logits);
                for (j, s) in seed.iter_mut().enumerate() {
                    *s = -p[k] * p[j];
                }
                seed[k] += p[k];
                p[k]
            }
        };
        let grad = self.backward(&trace, &seed, None);
        Ok((value, grad))
    }

    pub fn grad_qoi(&self, x: &[f64], spec: &QoiSpec) -> Result<Vec<f64>, NetError> {
        self.qoi_and_grad(x, spec).map(|(_, g)| g)
    }

    fn check_class(&self, spec: &QoiSpec) -> Result<(), NetError> {
        if spec.class_index >= self.output_dim() {
            return Err(NetError::InvalidClass {
                class: spec.class_index,
                classes: self.output_dim(),
            });
        }
        Ok(())
    }
}

fn score(logits: &[f64], spec: &QoiSpec) -> f64 {
    match spec.score_kind {
        ScoreKind::Logit => logits[spec.class_index],
        ScoreKind::SoftmaxProbability => softmax(logits)[spec.class_index],
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &v)| if v > best.1 { (i, v) } else { best },
        )
        .0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(weights: Mat, biases: Vec<f64>, activation: Activation) -> DenseNetwork {
        DenseNetwork {
            layers: vec![Layer::new(weights, biases, activation).unwrap()],
        }
    }

    #[test]
    fn identity_layer_is_identity_map() {
        let net = DenseNetwork::new(vec![
            Layer::new(Mat::identity(3), vec![0.0; 3], Activation::Identity).unwrap()
        ])
        .unwrap();
        assert_eq!(net.forward(&[1.5, -2.0, 0.25]).unwrap(), vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn zero_softplus_layer_gives_ln2() {
        // Bypasses the final-identity rule to probe the activation alone.
        let net = single(Mat::zeros(4, 2), vec![0.0; 4], Activation::Softplus);
        for v in net.forward(&[3.0, -7.0]).unwrap() {
            assert_eq!(v, std::f64::consts::LN_2);
        }
    }

    #[test]
    fn softplus_is_overflow_safe() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert!((softplus(1.0) - (1.0 + 1f64.exp()).ln()).abs() < 1e-15);
    }

    #[test]
    fn two_two_two_hand_trace() {
        let w1 = Mat::from_rows(&[vec![1.0, -1.0], vec![0.5, 2.0]]).unwrap();
        let w2 = Mat::from_rows(&[vec![2.0, 0.0], vec![-1.0, 1.0]]).unwrap();
        let net = DenseNetwork::new(vec![
            Layer::new(w1, vec![0.0, 1.0], Activation::Softplus).unwrap(),
            Layer::new(w2, vec![0.5, -0.5], Activation::Identity).unwrap(),
        ])
        .unwrap();
        // x = (1, 2): z1 = (1−2, 0.5+4+1) = (−1, 5.5)
        let h0 = (1.0 + (-1f64).exp()).ln();
        let h1 = (1.0 + 5.5f64.exp()).ln();
        let expected = [2.0 * h0 + 0.5, -h0 + h1 - 0.5];
        let out = net.forward(&[1.0, 2.0]).unwrap();
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e).abs() < 1e-14, "{o} vs {e}");
        }
    }

    #[test]
    fn construction_rules() {
        let l1 = Layer::new(Mat::zeros(3, 2), vec![0.0; 3], Activation::Softplus).unwrap();
        let bad = Layer::new(Mat::zeros(1, 4), vec![0.0], Activation::Identity).unwrap();
        assert!(matches!(
            DenseNetwork::new(vec![l1.clone(), bad]),
            Err(NetError::LayerChain { layer: 1, .. })
        ));
        assert!(matches!(DenseNetwork::new(vec![l1]), Err(NetError::FinalActivation)));
        assert!(matches!(DenseNetwork::new(vec![]), Err(NetError::NoLayers)));
        assert!(Layer::new(Mat::zeros(2, 2), vec![0.0], Activation::Identity).is_err());
    }

    #[test]
    fn softmax_closed_forms() {
        let net = DenseNetwork::new(vec![Layer::new(
            Mat::zeros(2, 1),
            vec![0.0, 3f64.ln()],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        let p1 = net
            .qoi(
                &[0.0],
                &QoiSpec {
                    class_index: 1,
                    score_kind: ScoreKind::SoftmaxProbability,
                },
            )
            .unwrap();
        assert!((p1 - 0.75).abs() < 1e-15);
        let eq = DenseNetwork::new(vec![
            Layer::new(Mat::zeros(2, 1), vec![1.0, 1.0], Activation::Identity).unwrap()
        ])
        .unwrap();
        assert_eq!(
            eq.qoi(
                &[4.0],
                &QoiSpec {
                    class_index: 0,
                    score_kind: ScoreKind::SoftmaxProbability
                }
            )
            .unwrap(),
            0.5
        );
    }

    #[test]
    fn logit_kind_reads_forward_output() {
        let mut rng = RandomSource::new(5);
        let net = DenseNetwork::random(&[4, 6, 3], &mut rng).unwrap();
        let x = rng.gaussian(4);
        let logits = net.forward(&x).unwrap();
        for k in 0..3 {
            let q = net
                .qoi(
                    &x,
                    &QoiSpec {
                        class_index: k,
                        score_kind: ScoreKind::Logit,
                    },
                )
                .unwrap();
            assert_eq!(q, logits[k]);
        }
    }

    #[test]
    fn linear_map_gradient_is_weight_row() {
        let a = Mat::from_rows(&[vec![1.0, 2.0, 3.0], vec![-4.0, 0.5, 6.0]]).unwrap();
        let net = DenseNetwork::new(vec![Layer::new(a.clone(), vec![0.0; 2], Activation::Identity).unwrap()]).unwrap();
        for k in 0..2 {
            let g = net
                .grad_qoi(
                    &[0.3, -0.1, 2.0],
                    &QoiSpec {
                        class_index: k,
                        score_kind: ScoreKind::Logit,
                    },
                )
                .unwrap();
            assert_eq!(g, a.row(k));
        }
    }

    #[test]
    fn equal_logit_softmax_gradient() {
        // Logits share the same value at x but have distinct slopes.
        let w = Mat::from_rows(&[vec![1.0, -2.0], vec![3.0, 0.5]]).unwrap();
        let net = DenseNetwork::new(vec![Layer::new(w.clone(), vec![0.0; 2], Activation::Identity).unwrap()]).unwrap();
        let g = net
            .grad_qoi(
                &[0.0, 0.0],
                &QoiSpec {
                    class_index: 0,
                    score_kind: ScoreKind::SoftmaxProbability,
                },
            )
            .unwrap();
        for j in 0..2 {
            let expected = 0.25 * (w[(0, j)] - w[(1, j)]);
            assert!((g[j] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn errors_for_bad_inputs() {
        let net = DenseNetwork::random(&[3, 2], &mut RandomSource::new(0)).unwrap();
        assert!(matches!(
            net.forward(&[1.0]),
            Err(NetError::DimensionMismatch { expected: 3, actual: 1 })
        ));
        assert!(matches!(
            QoiSpec::new(&net, 2, ScoreKind::Logit),
            Err(NetError::InvalidClass { class: 2, classes: 2 })
        ));
        assert!(net.forward(&[f64::NAN, 0.0, 0.0]).is_err());
    }
}
