//! Encoder-decoder forward passes on a tape.
//!
//! Every LSTM step consumes `[value ; element emb ; group emb (; parent emb) ; h]`.
//! The decoder starts from the encoder's final state and the last observed
//! value, then feeds back its own predictions.

use serde::{Deserialize, Serialize};

use super::config::{KernConfig, RegressionLoss};
use super::params::{BoundParams, KernParams};
use crate::dataio::TrendSample;
use crate::error::{Error, Result};
use crate::knowledge::FeatureIds;
use crate::numcore::{Tape, Tensor, Var};

/// Feature ids of a batch, one column per feature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureBatch {
    pub element_ids: Vec<usize>,
    pub group_ids: Vec<usize>,
    pub parent_ids: Option<Vec<usize>>,
}

impl FeatureBatch {
    pub fn from_ids<'a>(ids: impl IntoIterator<Item = &'a FeatureIds>) -> Result<Self> {
        let ids: Vec<&FeatureIds> = ids.into_iter().collect();
        let with_parent = ids.first().is_some_and(|f| f.parent().is_some());
        if ids.iter().any(|f| f.parent().is_some() != with_parent) {
            return Err(Error::Invalid("mixed feature id widths in one batch".into()));
        }
        Ok(Self {
            element_ids: ids.iter().map(|f| f.element()).collect(),
            group_ids: ids.iter().map(|f| f.group()).collect(),
            parent_ids: with_parent.then(|| ids.iter().map(|f| f.parent().expect("checked")).collect()),
        })
    }

    pub fn len(&self) -> usize {
        self.element_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.element_ids.is_empty()
    }
}

/// Input windows plus their features.
#[derive(Clone, Debug)]
pub struct EncoderInput {
    pub inputs: Tensor,
    pub features: FeatureBatch,
}

impl EncoderInput {
    pub fn new(inputs: &[&[f64]], features: FeatureBatch) -> Result<Self> {
        if inputs.len() != features.len() || inputs.is_empty() {
            return Err(Error::Invalid(format!(
                "{} input windows but {} feature rows",
                inputs.len(),
                features.len()
            )));
        }
        let rows: Vec<Vec<f64>> = inputs.iter().map(|r| r.to_vec()).collect();
        Ok(Self {
            inputs: Tensor::from_rows(&rows)?,
            features,
        })
    }

    pub fn from_samples(samples: &[&TrendSample], features: &[FeatureIds]) -> Result<Self> {
        let inputs: Vec<&[f64]> = samples.iter().map(|s| s.input.as_slice()).collect();
        Self::new(&inputs, FeatureBatch::from_ids(features)?)
    }

    pub fn batch_size(&self) -> usize {
        self.inputs.rows()
    }
}

#[derive(Clone, Debug)]
pub struct Batch {
    pub encoder: EncoderInput,
    pub targets: Tensor,
}

impl Batch {
    pub fn from_samples(samples: &[&TrendSample], features: &[FeatureIds]) -> Result<Self> {
        let encoder = EncoderInput::from_samples(samples, features)?;
        let targets: Vec<Vec<f64>> = samples.iter().map(|s| s.target.clone()).collect();
        Ok(Self {
            encoder,
            targets: Tensor::from_rows(&targets)?,
        })
    }
}

/// Encoder passes for the positive and negative of each anchor in a batch.
#[derive(Clone, Debug)]
pub struct TripletBatch {
    pub positive: EncoderInput,
    pub negative: EncoderInput,
}

/// Final encoder state of one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub predictions: Vec<f64>,
}

/// Loss terms of one batch, recorded on the tape.
#[derive(Clone, Copy, Debug)]
pub struct LossParts {
    pub total: Var,
    pub regression: Var,
    pub triplet: Option<Var>,
    pub forecast: Var,
}

/// Shared per-step embedding block `[B, k * feat_size]`.
pub fn embed(tape: &mut Tape, bound: &BoundParams, features: &FeatureBatch) -> Result<Var> {
    let mut parts = vec![
        tape.gather(bound.element_embedding, &features.element_ids)?,
        tape.gather(bound.group_embedding, &features.group_ids)?,
    ];
    match (bound.parent_embedding, &features.parent_ids) {
        (Some(table), Some(ids)) => parts.push(tape.gather(table, ids)?),
        (None, _) => {}
        (Some(_), None) => {
            return Err(Error::Config(
                "external knowledge is on but the batch carries no parent ids".into(),
            ))
        }
    }
    tape.concat(&parts)
}

/// One LSTM step; returns `(h, c)`.
pub fn lstm_step(
    tape: &mut Tape,
    weight: Var,
    bias: Var,
    x: Var,
    state: (Var, Var),
    hidden: usize,
) -> Result<(Var, Var)> {
    let (h, c) = state;
    let z = tape.concat(&[x, h])?;
    let pre = tape.matmul(z, weight)?;
    let gates = tape.add_row(pre, bias)?;
    let i = tape.slice(gates, 0, hidden)?;
    let i = tape.sigmoid(i)?;
    let f = tape.slice(gates, hidden, hidden)?;
    let f = tape.sigmoid(f)?;
    let g = tape.slice(gates, 2 * hidden, hidden)?;
    let g = tape.tanh(g)?;
    let o = tape.slice(gates, 3 * hidden, hidden)?;
    let o = tape.sigmoid(o)?;
    let keep = tape.mul(f, c)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let squashed = tape.tanh(c)?;
    let h = tape.mul(o, squashed)?;
    Ok((h, c))
}

/// Runs the encoder over `inputs` (`[B, input_len]`) and returns `(h_T, c_T)`.
pub fn encode_on_tape(tape: &mut Tape, bound: &BoundParams, inputs: Var, emb: Var, hidden: usize) -> Result<(Var, Var)> {
    let (batch, steps) = (tape.value(inputs).rows(), tape.value(inputs).cols());
    let h0 = tape.constant(Tensor::zeros(&[batch, hidden]));
    let c0 = tape.constant(Tensor::zeros(&[batch, hidden]));
    let mut state = (h0, c0);
    for t in 0..steps {
        let value = tape.slice(inputs, t, 1)?;
        let x = tape.concat(&[value, emb])?;
        state = lstm_step(tape, bound.encoder_weight, bound.encoder_bias, x, state, hidden)?;
    }
    Ok(state)
}

/// Autoregressive decoder; returns predictions `[B, output_len]`.
pub fn decode_on_tape(
    tape: &mut Tape,
    bound: &BoundParams,
    state: (Var, Var),
    last_value: Var,
    emb: Var,
    output_len: usize,
    hidden: usize,
) -> Result<Var> {
    let mut state = state;
    let mut prev = last_value;
    let mut preds = Vec::with_capacity(output_len);
    for _ in 0..output_len {
        let x = tape.concat(&[prev, emb])?;
        state = lstm_step(tape, bound.decoder_weight, bound.decoder_bias, x, state, hidden)?;
        let proj = tape.matmul(state.0, bound.output_weight)?;
        let pred = tape.add_row(proj, bound.output_bias)?;
        preds.push(pred);
        prev = pred;
    }
    tape.concat(&preds)
}

/// Mean absolute (or squared) error over every horizon step of every sample.
pub fn regression_loss(tape: &mut Tape, forecast: Var, target: Var, kind: RegressionLoss) -> Result<Var> {
    let diff = tape.sub(forecast, target)?;
    let err = match kind {
        RegressionLoss::Mae => tape.abs(diff)?,
        RegressionLoss::Mse => tape.square(diff)?,
    };
    tape.mean(err)
}

/// Hinge on l2-normalized hidden states:
/// `mean(max(0, d(k, p) - d(k, q) + margin))`.
pub fn triplet_loss(tape: &mut Tape, anchor: Var, positive: Var, negative: Var, margin: f64) -> Result<Var> {
    let k = tape.l2_normalize(anchor)?;
    let p = tape.l2_normalize(positive)?;
    let q = tape.l2_normalize(negative)?;
    let d_pos = tape.distance(k, p)?;
    let d_neg = tape.distance(k, q)?;
    let gap = tape.sub(d_pos, d_neg)?;
    let shifted = tape.add_scalar(gap, margin)?;
    let hinge = tape.relu(shifted)?;
    tape.mean(hinge)
}

/// A configuration together with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernModel {
    pub config: KernConfig,
    pub params: KernParams,
}

impl KernModel {
    pub fn new(config: KernConfig, params: KernParams) -> Result<Self> {
        config.validate()?;
        params.check(&config)?;
        Ok(Self { config, params })
    }

    fn check_input_len(&self, len: usize) -> Result<()> {
        if len != self.config.input_len {
            return Err(Error::Invalid(format!(
                "input window has length {len}, model expects {}",
                self.config.input_len
            )));
        }
        Ok(())
    }

    fn single_features(&self, features: &FeatureIds) -> Result<FeatureBatch> {
        if features.as_slice().len() != self.config.feature_count() {
            return Err(Error::Config(format!(
                "model expects {} feature ids, got {}",
                self.config.feature_count(),
                features.as_slice().len()
            )));
        }
        FeatureBatch::from_ids([features])
    }

    pub fn encode(&self, input: &[f64], features: &FeatureIds) -> Result<EncodedState> {
        self.check_input_len(input.len())?;
        let fb = self.single_features(features)?;
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let emb = embed(&mut tape, &bound, &fb)?;
        let x = tape.constant(Tensor::matrix(1, input.len(), input.to_vec())?);
        let (h, c) = encode_on_tape(&mut tape, &bound, x, emb, self.params.hidden_size())?;
        Ok(EncodedState {
            hidden: tape.value(h).data().to_vec(),
            cell: tape.value(c).data().to_vec(),
        })
    }

    pub fn decode(
        &self,
        state: &EncodedState,
        last_input_value: f64,
        features: &FeatureIds,
        output_len: usize,
    ) -> Result<Forecast> {
        let hidden = self.params.hidden_size();
        if state.hidden.len() != hidden || state.cell.len() != hidden {
            return Err(Error::Invalid(format!(
                "encoded state has width {}/{}, model hidden size is {hidden}",
                state.hidden.len(),
                state.cell.len()
            )));
        }
        let fb = self.single_features(features)?;
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let emb = embed(&mut tape, &bound, &fb)?;
        let h = tape.constant(Tensor::matrix(1, hidden, state.hidden.clone())?);
        let c = tape.constant(Tensor::matrix(1, hidden, state.cell.clone())?);
        let last = tape.constant(Tensor::matrix(1, 1, vec![last_input_value])?);
        let out = decode_on_tape(&mut tape, &bound, (h, c), last, emb, output_len, hidden)?;
        Ok(Forecast {
            predictions: tape.value(out).data().to_vec(),
        })
    }

    /// Forecasts for a batch of windows, `[B][output_len]`.
    pub fn forecast(&self, input: &EncoderInput) -> Result<Vec<Vec<f64>>> {
        self.check_input_len(input.inputs.cols())?;
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let out = self.forward(&mut tape, &bound, input)?;
        Ok(tape.value(out).to_rows())
    }

    /// Records the full forecast of `input` on `tape`.
    pub fn forward(&self, tape: &mut Tape, bound: &BoundParams, input: &EncoderInput) -> Result<Var> {
        let hidden = self.params.hidden_size();
        let emb = embed(tape, bound, &input.features)?;
        let x = tape.constant(input.inputs.clone());
        let state = encode_on_tape(tape, bound, x, emb, hidden)?;
        let last = tape.slice(x, input.inputs.cols() - 1, 1)?;
        decode_on_tape(tape, bound, state, last, emb, self.config.output_len, hidden)
    }

    /// Final encoder hidden state for every row of `input`.
    pub fn hidden_on_tape(&self, tape: &mut Tape, bound: &BoundParams, input: &EncoderInput) -> Result<Var> {
        let emb = embed(tape, bound, &input.features)?;
        let x = tape.constant(input.inputs.clone());
        Ok(encode_on_tape(tape, bound, x, emb, self.params.hidden_size())?.0)
    }

    /// Regression loss plus `triplet_lambda` times the triplet loss when internal
    /// knowledge is on.
    pub fn total_loss(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        batch: &Batch,
        triplets: Option<&TripletBatch>,
    ) -> Result<LossParts> {
        let cfg = &self.config;
        self.check_input_len(batch.encoder.inputs.cols())?;
        if batch.targets.cols() != cfg.output_len || batch.targets.rows() != batch.encoder.batch_size() {
            return Err(Error::Shape {
                op: "total_loss",
                lhs: batch.targets.shape().to_vec(),
                rhs: vec![batch.encoder.batch_size(), cfg.output_len],
            });
        }

        let hidden = self.params.hidden_size();
        let emb = embed(tape, bound, &batch.encoder.features)?;
        let x = tape.constant(batch.encoder.inputs.clone());
        let state = encode_on_tape(tape, bound, x, emb, hidden)?;
        let last = tape.slice(x, cfg.input_len - 1, 1)?;
        let forecast = decode_on_tape(tape, bound, state, last, emb, cfg.output_len, hidden)?;
        let target = tape.constant(batch.targets.clone());
        let regression = regression_loss(tape, forecast, target, cfg.regression_loss)?;

        if !cfg.int_kg {
            return Ok(LossParts {
                total: regression,
                regression,
                triplet: None,
                forecast,
            });
        }
        let trip = triplets.ok_or_else(|| Error::Config("int_kg is on but no triplets were supplied".into()))?;
        let b = batch.encoder.batch_size();
        if trip.positive.batch_size() != b || trip.negative.batch_size() != b {
            return Err(Error::Config(format!(
                "int_kg needs one triplet per anchor: batch {b}, positives {}, negatives {}",
                trip.positive.batch_size(),
                trip.negative.batch_size()
            )));
        }
        let h_p = self.hidden_on_tape(tape, bound, &trip.positive)?;
        let h_q = self.hidden_on_tape(tape, bound, &trip.negative)?;
        let triplet = triplet_loss(tape, state.0, h_p, h_q, cfg.margin)?;
        let weighted = tape.scale(triplet, cfg.triplet_lambda)?;
        let total = tape.add(regression, weighted)?;
        Ok(LossParts {
            total,
            regression,
            triplet: Some(triplet),
            forecast,
        })
    }
}
