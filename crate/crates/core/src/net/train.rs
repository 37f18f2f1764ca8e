use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{dual_loss, Activation, LossWeights, SpeakerNet, DEFAULT_HIDDEN};
use crate::dataset::{mean_rgb, sample_reference, Partition, SampleStore, Triple};
use crate::embeddings::{embed_modifier, EmbeddedModifier, EmbeddingTable, OovPolicy};
use crate::error::{Error, Result};
use crate::seeds;

/// Which way a net maps colors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// (reference, modifier) to target.
    Speaker,
    /// (target, modifier) back to reference.
    Listener,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "speaker" => Ok(Direction::Speaker),
            "listener" => Ok(Direction::Listener),
            other => Err(Error::input(format!("unknown direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Examples per gradient step; values at or above the example count give
    /// full-batch training.
    pub batch_size: usize,
    pub seed: u64,
    pub loss_weights: LossWeights,
    pub optimizer: Optimizer,
    pub hidden: usize,
    pub activation: Activation,
    /// Reference samples drawn per training triple.
    pub examples_per_triple: usize,
    /// Survey draws averaged into each sample.
    pub draws_per_example: usize,
    pub oov_policy: OovPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            learning_rate: 1e-3,
            batch_size: 32,
            seed: 0,
            loss_weights: LossWeights::default(),
            optimizer: Optimizer::default(),
            hidden: DEFAULT_HIDDEN,
            activation: Activation::Identity,
            examples_per_triple: 10,
            draws_per_example: 100,
            oov_policy: OovPolicy::Zero,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::input("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::input("learning rate must be positive"));
        }
        if self.batch_size == 0 || self.examples_per_triple == 0 || self.draws_per_example == 0 {
            return Err(Error::input("batch size and sample counts must be positive"));
        }
        let w = self.loss_weights;
        if !(w.cosine >= 0.0 && w.mse >= 0.0 && w.cosine + w.mse > 0.0) {
            return Err(Error::input(
                "loss weights must be non-negative with a positive sum",
            ));
        }
        if self.hidden == 0 {
            return Err(Error::input("hidden size must be positive"));
        }
        Ok(())
    }
}

/// The triples to train on and where their colors come from.
#[derive(Debug, Clone, Copy)]
pub struct TrainingView<'a> {
    pub triples: &'a [&'a Triple],
    pub samples: &'a SampleStore,
    /// Partition to draw colors from; `None` uses every vector.
    pub partition: Option<Partition>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: SpeakerNet,
    /// Mean loss over all examples, one entry per epoch.
    pub loss_trace: Vec<f64>,
}

struct Example {
    input: [f64; 3],
    target: [f64; 3],
    modifier: usize,
}

fn build_examples(
    view: &TrainingView<'_>,
    table: &EmbeddingTable,
    direction: Direction,
    cfg: &TrainConfig,
    rng: &mut seeds::Rng,
) -> Result<(Vec<Example>, Vec<EmbeddedModifier>)> {
    let mut examples = Vec::new();
    let mut modifiers = Vec::with_capacity(view.triples.len());
    for (idx, triple) in view.triples.iter().enumerate() {
        modifiers.push(embed_modifier(table, &triple.modifier, cfg.oov_policy)?);
        let (source, dest) = match direction {
            Direction::Speaker => (&triple.ref_label, &triple.target_label),
            Direction::Listener => (&triple.target_label, &triple.ref_label),
        };
        let dest_mean = mean_rgb(view.samples.get(dest)?, view.partition)?.to_unit();
        let inputs = sample_reference(
            view.samples.get(source)?,
            view.partition,
            cfg.examples_per_triple,
            cfg.draws_per_example,
            rng,
        )?;
        examples.extend(inputs.into_iter().map(|c| Example {
            input: c.to_unit(),
            target: dest_mean,
            modifier: idx,
        }));
    }
    Ok((examples, modifiers))
}

enum OptimizerState {
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
        m: Vec<f64>,
        v: Vec<f64>,
        t: i32,
    },
    Sgd,
}

impl OptimizerState {
    fn new(opt: Optimizer, n: usize) -> Self {
        match opt {
            Optimizer::Adam { beta1, beta2, eps } => OptimizerState::Adam {
                beta1,
                beta2,
                eps,
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
            Optimizer::Sgd => OptimizerState::Sgd,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        match self {
            OptimizerState::Adam {
                beta1,
                beta2,
                eps,
                m,
                v,
                t,
            } => {
                *t += 1;
                let bc1 = 1.0 - beta1.powi(*t);
                let bc2 = 1.0 - beta2.powi(*t);
                for i in 0..params.len() {
                    m[i] = *beta1 * m[i] + (1.0 - *beta1) * grad[i];
                    v[i] = *beta2 * v[i] + (1.0 - *beta2) * grad[i] * grad[i];
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + *eps);
                }
            }
            OptimizerState::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
        }
    }
}

/// Trains a fresh net on `view`. The example set (reference samples per
/// triple) is drawn once up front; each epoch shuffles it and takes
/// mini-batch steps. Everything is driven by `cfg.seed`.
pub fn train(
    view: &TrainingView<'_>,
    table: &EmbeddingTable,
    direction: Direction,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if view.triples.is_empty() {
        return Err(Error::input("training view has no triples"));
    }
    let mut rng = seeds::rng(cfg.seed);
    let mut net = SpeakerNet::glorot(table.dim(), cfg.hidden, cfg.activation, &mut rng)?;
    let (examples, modifiers) = build_examples(view, table, direction, cfg, &mut rng)?;

    let n_params = net.count_params();
    let mut optimizer = OptimizerState::new(cfg.optimizer, n_params);
    let mut grad = vec![0.0; n_params];
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let batch_size = cfg.batch_size.min(examples.len());
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                let ex = &examples[i];
                let trace = net.forward_trace(ex.input, modifiers[ex.modifier].values());
                let (loss, d_out) = dual_loss(ex.target, ex.input, trace.output, cfg.loss_weights);
                batch_loss += loss;
                net.backward(&trace, d_out, scale, &mut grad);
            }
            if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            epoch_loss += batch_loss;
            optimizer.step(net.params_mut(), &grad, cfg.learning_rate);
        }
        loss_trace.push(epoch_loss / examples.len() as f64);
    }
    if net.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFiniteLoss {
            epoch: cfg.epochs - 1,
            batch: 0,
        });
    }
    Ok(TrainOutcome { net, loss_trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorspace::Rgb;
    use crate::dataset::{LabelSamples, TripleRole};

    fn identity_fixture() -> (Vec<Triple>, SampleStore, EmbeddingTable) {
        let mut samples = SampleStore::new();
        samples.insert(LabelSamples::new("teal", vec![Rgb::new(40.0, 160.0, 150.0)]));
        samples.insert(LabelSamples::new("plain teal", vec![Rgb::new(40.0, 160.0, 150.0)]));
        let mut table = EmbeddingTable::new(3).unwrap();
        table.insert("plain", vec![0.2, -0.4, 0.1]).unwrap();
        let triples = vec![Triple::new("teal", "plain", "plain teal", TripleRole::Train).unwrap()];
        (triples, samples, table)
    }

    fn quick_config() -> TrainConfig {
        TrainConfig {
            epochs: 300,
            learning_rate: 1e-2,
            examples_per_triple: 4,
            draws_per_example: 5,
            seed: 17,
            ..Default::default()
        }
    }

    #[test]
    fn learns_identity_case() {
        let (triples, samples, table) = identity_fixture();
        let refs: Vec<&Triple> = triples.iter().collect();
        let view = TrainingView { triples: &refs, samples: &samples, partition: None };
        for direction in [Direction::Speaker, Direction::Listener] {
            let out = train(&view, &table, direction, &quick_config()).unwrap();
            let last = *out.loss_trace.last().unwrap();
            assert!(last < 1e-3, "{direction:?}: {last}");
            assert!(out.loss_trace.iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (triples, samples, table) = identity_fixture();
        let refs: Vec<&Triple> = triples.iter().collect();
        let view = TrainingView { triples: &refs, samples: &samples, partition: None };
        let cfg = TrainConfig { epochs: 20, ..quick_config() };
        let a = train(&view, &table, Direction::Speaker, &cfg).unwrap();
        let b = train(&view, &table, Direction::Speaker, &cfg).unwrap();
        let bits = |n: &SpeakerNet| n.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.net), bits(&b.net));
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn rejects_bad_configs_and_empty_views() {
        let (_, samples, table) = identity_fixture();
        let view = TrainingView { triples: &[], samples: &samples, partition: None };
        assert!(train(&view, &table, Direction::Speaker, &TrainConfig::default()).is_err());
        for cfg in [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { loss_weights: LossWeights { cosine: 0.0, mse: 0.0 }, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn diverging_training_reports_epoch() {
        let (triples, samples, table) = identity_fixture();
        let refs: Vec<&Triple> = triples.iter().collect();
        let view = TrainingView { triples: &refs, samples: &samples, partition: None };
        let cfg = TrainConfig {
            optimizer: Optimizer::Sgd,
            learning_rate: 1e6,
            epochs: 200,
            ..quick_config()
        };
        let err = train(&view, &table, Direction::Speaker, &cfg).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { .. }), "{err}");
        assert!(err.is_numerical());
    }
}
