use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{KernConfig, VocabSizes};
use crate::error::{Error, Result};
use crate::numcore::{Tape, Tensor, Var};

/// One LSTM layer. `weight` maps `[x_t ; h_{t-1}]` to the four gate
/// pre-activations laid out as `[input | forget | candidate | output]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmWeights {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LstmWeights {
    pub fn hidden_size(&self) -> usize {
        self.bias.len() / 4
    }

    pub fn input_size(&self) -> usize {
        self.weight.shape()[0] - self.hidden_size()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernParams {
    pub element_embedding: Tensor,
    pub group_embedding: Tensor,
    pub parent_embedding: Option<Tensor>,
    pub encoder: LstmWeights,
    pub decoder: LstmWeights,
    pub output_weight: Tensor,
    pub output_bias: Tensor,
}

/// Parameters recorded on a tape for one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct BoundParams {
    pub element_embedding: Var,
    pub group_embedding: Var,
    pub parent_embedding: Option<Var>,
    pub encoder_weight: Var,
    pub encoder_bias: Var,
    pub decoder_weight: Var,
    pub decoder_bias: Var,
    pub output_weight: Var,
    pub output_bias: Var,
}

impl BoundParams {
    /// Leaves in [`KernParams::tensors`] order.
    pub fn vars(&self) -> Vec<Var> {
        let mut v = vec![self.element_embedding, self.group_embedding];
        v.extend(self.parent_embedding);
        v.extend([
            self.encoder_weight,
            self.encoder_bias,
            self.decoder_weight,
            self.decoder_bias,
            self.output_weight,
            self.output_bias,
        ]);
        v
    }
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-a..=a)).collect();
    Tensor::from_parts(vec![rows, cols], data)
}

fn lstm_bias(hidden: usize) -> Tensor {
    let mut b = Tensor::zeros(&[4 * hidden]);
    b.data_mut()[hidden..2 * hidden].fill(1.0);
    b
}

impl KernParams {
    /// Glorot-uniform weights, zero biases except forget gates at 1.
    pub fn init(config: &KernConfig, vocab: VocabSizes, seed: u64) -> Result<Self> {
        config.validate()?;
        if vocab.element == 0 || vocab.group == 0 {
            return Err(Error::Config("vocabulary sizes must be >= 1".into()));
        }
        if config.ext_kg != vocab.category.is_some() {
            return Err(Error::Config(
                "a category vocabulary is required exactly when ext_kg is on".into(),
            ));
        }
        if vocab.category == Some(0) {
            return Err(Error::Config("category vocabulary must be >= 1".into()));
        }

        let (f, h, d) = (config.feat_size, config.rnn_hidden_size, config.input_dim());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let element_embedding = glorot(&mut rng, vocab.element, f);
        let group_embedding = glorot(&mut rng, vocab.group, f);
        let parent_embedding = vocab.category.map(|c| glorot(&mut rng, c, f));
        let encoder = LstmWeights {
            weight: glorot(&mut rng, d + h, 4 * h),
            bias: lstm_bias(h),
        };
        let decoder = LstmWeights {
            weight: glorot(&mut rng, d + h, 4 * h),
            bias: lstm_bias(h),
        };
        let output_weight = glorot(&mut rng, h, 1);
        Ok(Self {
            element_embedding,
            group_embedding,
            parent_embedding,
            encoder,
            decoder,
            output_weight,
            output_bias: Tensor::zeros(&[1]),
        })
    }

    pub fn vocab(&self) -> VocabSizes {
        VocabSizes {
            element: self.element_embedding.shape()[0],
            group: self.group_embedding.shape()[0],
            category: self.parent_embedding.as_ref().map(|t| t.shape()[0]),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.encoder.hidden_size()
    }

    /// Checks every shape against `config`.
    pub fn check(&self, config: &KernConfig) -> Result<()> {
        let (f, h, d) = (config.feat_size, config.rnn_hidden_size, config.input_dim());
        let expect = |name: &str, t: &Tensor, shape: &[usize]| {
            if t.shape() == shape {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "parameter {name} has shape {:?}, config implies {shape:?}",
                    t.shape()
                )))
            }
        };
        let vocab = self.vocab();
        expect("element_embedding", &self.element_embedding, &[vocab.element, f])?;
        expect("group_embedding", &self.group_embedding, &[vocab.group, f])?;
        match (&self.parent_embedding, config.ext_kg) {
            (Some(t), true) => expect("parent_embedding", t, &[t.shape()[0], f])?,
            (None, false) => {}
            _ => return Err(Error::Config("parent embedding present iff ext_kg".into())),
        }
        for (name, l) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            expect(name, &l.weight, &[d + h, 4 * h])?;
            expect(name, &l.bias, &[4 * h])?;
        }
        expect("output_weight", &self.output_weight, &[h, 1])?;
        expect("output_bias", &self.output_bias, &[1])?;
        if self.tensors().iter().any(|(_, t)| !t.is_finite()) {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(())
    }

    /// Named tensors in a fixed order shared with [`BoundParams::vars`].
    pub fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        let mut v = vec![
            ("element_embedding", &self.element_embedding),
            ("group_embedding", &self.group_embedding),
        ];
        if let Some(p) = &self.parent_embedding {
            v.push(("parent_embedding", p));
        }
        v.extend([
            ("encoder.weight", &self.encoder.weight),
            ("encoder.bias", &self.encoder.bias),
            ("decoder.weight", &self.decoder.weight),
            ("decoder.bias", &self.decoder.bias),
            ("output.weight", &self.output_weight),
            ("output.bias", &self.output_bias),
        ]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![&mut self.element_embedding, &mut self.group_embedding];
        if let Some(p) = &mut self.parent_embedding {
            v.push(p);
        }
        v.extend([
            &mut self.encoder.weight,
            &mut self.encoder.bias,
            &mut self.decoder.weight,
            &mut self.decoder.bias,
            &mut self.output_weight,
            &mut self.output_bias,
        ]);
        v
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        BoundParams {
            element_embedding: tape.param(self.element_embedding.clone()),
            group_embedding: tape.param(self.group_embedding.clone()),
            parent_embedding: self.parent_embedding.as_ref().map(|p| tape.param(p.clone())),
            encoder_weight: tape.param(self.encoder.weight.clone()),
            encoder_bias: tape.param(self.encoder.bias.clone()),
            decoder_weight: tape.param(self.decoder.weight.clone()),
            decoder_bias: tape.param(self.decoder.bias.clone()),
            output_weight: tape.param(self.output_weight.clone()),
            output_bias: tape.param(self.output_bias.clone()),
        }
    }
}
