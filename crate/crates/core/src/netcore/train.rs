use serde::{Deserialize, Serialize};

use super::network::{argmax, softmax};
use super::{Dataset, DenseNetwork, NetError};
use crate::numkit::{Mat, RandomSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Hidden layer widths; input and output sizes come from the data.
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: DenseNetwork,
    pub train_accuracy: f64,
    /// Mean cross-entropy over each epoch, measured before each batch update.
    pub epoch_losses: Vec<f64>,
}

/// Mini-batch SGD on softmax cross-entropy.
///
/// Stream 0 of `seed` initializes weights and stream 1 shuffles batches, so the
/// result is a pure function of `(data, config)`.
pub fn train_sgd(data: &Dataset, config: &TrainConfig) -> Result<TrainOutcome, NetError> {
    if data.is_empty() {
        return Err(NetError::InvalidDataset("empty training set".into()));
    }
    if config.batch_size == 0 || !(config.learning_rate > 0.0) {
        return Err(NetError::InvalidArchitecture(
            "batch size must be positive and learning rate > 0".into(),
        ));
    }
    let mut sizes = vec![data.dim()];
    sizes.extend(&config.hidden);
    sizes.push(data.num_classes());
    let base = RandomSource::new(config.seed);
    let mut net = DenseNetwork::random(&sizes, &mut base.derive(0))?;
    let mut shuffler = base.derive(1);

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        shuffler.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads: Vec<(Mat, Vec<f64>)> = net
                .layers()
                .iter()
                .map(|l| (Mat::zeros(l.outputs(), l.inputs()), vec![0.0; l.outputs()]))
                .collect();
            for &i in batch {
                let trace = net.forward_trace(&data.inputs()[i])?;
                let mut delta = softmax(&trace.logits);
                let label = data.labels()[i];
                loss_sum -= delta[label].max(f64::MIN_POSITIVE).ln();
                delta[label] -= 1.0;
                net.backward(&trace, &delta, Some(&mut grads));
            }
            let step = config.learning_rate / batch.len() as f64;
            for (layer, (gw, gb)) in net.layers_mut().iter_mut().zip(&grads) {
                let (w, b) = layer.params_mut();
                for i in 0..w.rows() {
                    for (wv, g) in w.row_mut(i).iter_mut().zip(gw.row(i)) {
                        *wv -= step * g;
                    }
                }
                for (bv, g) in b.iter_mut().zip(gb) {
                    *bv -= step * g;
                }
            }
        }
        let loss = loss_sum / data.len() as f64;
        let params_finite = net
            .layers()
            .iter()
            .all(|l| l.weights().check_finite().is_ok() && l.biases().iter().all(|b| b.is_finite()));
        if !loss.is_finite() || !params_finite {
            return Err(NetError::Divergence { epoch, loss });
        }
        log::debug!("epoch {epoch}: loss {loss:.6}");
        epoch_losses.push(loss);
    }
    let train_accuracy = accuracy(&net, data)?;
    Ok(TrainOutcome {
        network: net,
        train_accuracy,
        epoch_losses,
    })
}

/// Fraction of samples whose arg-max logit equals the label.
pub fn accuracy(net: &DenseNetwork, data: &Dataset) -> Result<f64, NetError> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (x, &y) in data.inputs().iter().zip(data.labels()) {
        if argmax(&net.forward(x)?) == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
