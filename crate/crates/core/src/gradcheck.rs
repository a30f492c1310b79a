//! Central finite-difference checks of the tape's gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataio::{make_samples, SyntheticSpec};
use crate::error::Result;
use crate::knowledge::{build_feature_ids, Taxonomy};
use crate::model::{Batch, EncoderInput, KernConfig, KernModel, KernParams, TripletBatch, VocabSizes};
use crate::numcore::{Tape, Tensor, Var};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Denominator floor of the relative error, so gradients that are zero up to
/// round-off compare by absolute difference.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < TOLERANCE
    }
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares `backward` against central differences for every entry of every
/// input of the scalar function `f`.
pub fn check_function<F>(name: &str, inputs: &[Tensor], f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.param(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut probe = inputs.to_vec();
    let mut max_rel_error = 0.0f64;
    let mut checked = 0;
    for (k, var) in vars.iter().enumerate() {
        let analytic = grads.get(*var);
        for i in 0..inputs[k].len() {
            let orig = inputs[k].data()[i];
            probe[k].data_mut()[i] = orig + STEP;
            let plus = eval(&probe)?;
            probe[k].data_mut()[i] = orig - STEP;
            let minus = eval(&probe)?;
            probe[k].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * STEP);
            max_rel_error = max_rel_error.max(rel_error(analytic.data()[i], numeric));
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        name: name.to_string(),
        checked,
        max_rel_error,
    })
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("shape")
}

/// Random values bounded away from zero, to stay clear of the kinks of abs and relu.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let t = random(rng, shape);
    t.map(|x| if x >= 0.0 { x + 0.05 } else { x - 0.05 })
}

type PrimitiveCase = (&'static str, fn(&mut ChaCha8Rng) -> Vec<Tensor>, fn(&mut Tape, &[Var]) -> Result<Var>);

/// Weighted sum, so every output entry gets a distinct upstream gradient.
fn weighted(tape: &mut Tape, v: Var) -> Result<Var> {
    let shape = tape.value(v).shape().to_vec();
    let n = tape.value(v).len();
    let w = Tensor::new(shape, (0..n).map(|i| 0.3 + 0.17 * i as f64).collect())?;
    let w = tape.constant(w);
    let prod = tape.mul(v, w)?;
    tape.sum(prod)
}

fn primitive_cases() -> Vec<PrimitiveCase> {
    vec![
        ("matmul", |r| vec![random(r, &[3, 4]), random(r, &[4, 2])], |t, v| {
            let o = t.matmul(v[0], v[1])?;
            weighted(t, o)
        }),
        ("add", |r| vec![random(r, &[2, 3]), random(r, &[2, 3])], |t, v| {
            let o = t.add(v[0], v[1])?;
            weighted(t, o)
        }),
        ("add_row", |r| vec![random(r, &[3, 4]), random(r, &[4])], |t, v| {
            let o = t.add_row(v[0], v[1])?;
            weighted(t, o)
        }),
        ("sub", |r| vec![random(r, &[2, 3]), random(r, &[2, 3])], |t, v| {
            let o = t.sub(v[0], v[1])?;
            weighted(t, o)
        }),
        ("mul", |r| vec![random(r, &[2, 3]), random(r, &[2, 3])], |t, v| {
            let o = t.mul(v[0], v[1])?;
            weighted(t, o)
        }),
        ("scale", |r| vec![random(r, &[5])], |t, v| {
            let o = t.scale(v[0], -1.7)?;
            weighted(t, o)
        }),
        ("add_scalar", |r| vec![random(r, &[5])], |t, v| {
            let o = t.add_scalar(v[0], 0.4)?;
            let o = t.square(o)?;
            t.sum(o)
        }),
        ("concat", |r| vec![random(r, &[2, 1]), random(r, &[2, 3])], |t, v| {
            let o = t.concat(&[v[0], v[1]])?;
            weighted(t, o)
        }),
        ("slice", |r| vec![random(r, &[3, 5])], |t, v| {
            let o = t.slice(v[0], 1, 3)?;
            weighted(t, o)
        }),
        ("sigmoid", |r| vec![random(r, &[2, 4])], |t, v| {
            let o = t.sigmoid(v[0])?;
            weighted(t, o)
        }),
        ("tanh", |r| vec![random(r, &[2, 4])], |t, v| {
            let o = t.tanh(v[0])?;
            weighted(t, o)
        }),
        ("relu", |r| vec![away_from_zero(r, &[2, 4])], |t, v| {
            let o = t.relu(v[0])?;
            weighted(t, o)
        }),
        ("square", |r| vec![random(r, &[2, 4])], |t, v| {
            let o = t.square(v[0])?;
            weighted(t, o)
        }),
        ("abs", |r| vec![away_from_zero(r, &[2, 4])], |t, v| {
            let o = t.abs(v[0])?;
            weighted(t, o)
        }),
        ("mean", |r| vec![random(r, &[3, 3])], |t, v| {
            let o = t.square(v[0])?;
            t.mean(o)
        }),
        ("sum", |r| vec![random(r, &[3, 3])], |t, v| {
            let o = t.tanh(v[0])?;
            t.sum(o)
        }),
        ("distance", |r| vec![random(r, &[3, 4]), random(r, &[3, 4])], |t, v| {
            let o = t.distance(v[0], v[1])?;
            weighted(t, o)
        }),
        ("gather", |r| vec![random(r, &[4, 3])], |t, v| {
            let o = t.gather(v[0], &[2, 0, 2, 3])?;
            weighted(t, o)
        }),
        ("l2_normalize", |r| vec![away_from_zero(r, &[3, 4])], |t, v| {
            let o = t.l2_normalize(v[0])?;
            weighted(t, o)
        }),
    ]
}

/// Every primitive, `trials` random inputs each.
pub fn primitive_suite(seed: u64, trials: usize) -> Result<Vec<GradCheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();
    for (name, make, f) in primitive_cases() {
        let mut worst = GradCheckReport {
            name: name.to_string(),
            checked: 0,
            max_rel_error: 0.0,
        };
        for _ in 0..trials {
            let inputs = make(&mut rng);
            let r = check_function(name, &inputs, f)?;
            worst.checked += r.checked;
            worst.max_rel_error = worst.max_rel_error.max(r.max_rel_error);
        }
        reports.push(worst);
    }
    Ok(reports)
}

/// Gradient of the full training loss (H=4, feat_size=2, batch of 2, both
/// knowledge sources on) against every parameter.
pub fn model_suite(seed: u64) -> Result<GradCheckReport> {
    let config = KernConfig {
        input_len: 6,
        output_len: 3,
        ext_kg: true,
        int_kg: true,
        triplet_lambda: 0.5,
        sample_range: 1,
        feat_size: 2,
        rnn_hidden_size: 4,
        margin: 0.5,
        seed,
        ..KernConfig::default()
    };
    let dataset = SyntheticSpec::new(2, 3, 12, seed).generate()?;
    let taxonomy = Taxonomy::modulo(dataset.element_vocab_size, 2)?;
    let (train, _) = make_samples(&dataset, config.input_len, config.output_len)?;
    let pick = |i: usize| train.get(i % train.len());
    let per_series = train.len() / dataset.series.len();
    let (anchors, positives, negatives) = (
        [pick(0), pick(per_series + 1)],
        [pick(2 * per_series), pick(3 * per_series + 2)],
        [pick(4 * per_series + 1), pick(5 * per_series)],
    );
    let feats = |s: &[&crate::dataio::TrendSample; 2]| -> Result<Vec<_>> {
        s.iter().map(|x| build_feature_ids(x, Some(&taxonomy), true)).collect()
    };
    let batch = Batch::from_samples(&anchors, &feats(&anchors)?)?;
    let triplets = TripletBatch {
        positive: EncoderInput::from_samples(&positives, &feats(&positives)?)?,
        negative: EncoderInput::from_samples(&negatives, &feats(&negatives)?)?,
    };

    let vocab = VocabSizes {
        element: dataset.element_vocab_size,
        group: dataset.group_vocab_size,
        category: Some(taxonomy.category_vocab_size()),
    };
    let params = KernParams::init(&config, vocab, seed)?;
    let template = KernModel::new(config, params.clone())?;
    let inputs: Vec<Tensor> = params.tensors().into_iter().map(|(_, t)| t.clone()).collect();

    check_function("model.total_loss", &inputs, |tape, vars| {
        let bound = crate::model::BoundParams {
            element_embedding: vars[0],
            group_embedding: vars[1],
            parent_embedding: Some(vars[2]),
            encoder_weight: vars[3],
            encoder_bias: vars[4],
            decoder_weight: vars[5],
            decoder_bias: vars[6],
            output_weight: vars[7],
            output_bias: vars[8],
        };
        Ok(template.total_loss(tape, &bound, &batch, Some(&triplets))?.total)
    })
}

/// Primitive suite (20 trials each) followed by the model check.
pub fn run_all(seed: u64) -> Result<Vec<GradCheckReport>> {
    let mut reports = primitive_suite(seed, 20)?;
    reports.push(model_suite(seed)?);
    Ok(reports)
}
