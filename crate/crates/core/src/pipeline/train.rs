use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::MetricsReport;
use crate::dataio::{make_samples, Dataset, SampleSet, TrendSample};
use crate::error::{Error, Result};
use crate::knowledge::{
    build_feature_ids, rank_neighbors_to_depth, sample_triplet, triplet_rng, FeatureIds, Metric, Taxonomy,
    TripletIndex,
};
use crate::model::{Batch, Checkpoint, EncoderInput, KernConfig, KernModel, KernParams, TripletBatch, VocabSizes};
use crate::numcore::{clip_grad_norm, AdamState, LrSchedule, Tensor};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
/// Forecast batch size used for evaluation.
const EVAL_CHUNK: usize = 256;
const SHUFFLE_STREAM: u64 = 0x5348_5546_464c_4521;

/// Optimisation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub lr: f64,
    pub lr_decay: bool,
    pub lr_decay_interval: usize,
    pub lr_decay_gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Max global gradient norm; off unless set.
    #[serde(default)]
    pub grad_clip: Option<f64>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            lr: 0.001,
            lr_decay: true,
            lr_decay_interval: 10,
            lr_decay_gamma: 0.1,
            epochs: 15,
            batch_size: 400,
            grad_clip: None,
        }
    }
}

impl TrainSettings {
    pub fn schedule(&self) -> Result<LrSchedule> {
        LrSchedule::new(self.lr, self.lr_decay_interval, self.lr_decay_gamma, self.lr_decay)
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule()?;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(format!(
                "epoch and batch_size must be >= 1 (got {}, {})",
                self.epochs, self.batch_size
            )));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("grad_clip must be > 0, got {c}")));
            }
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub test_mae: f64,
    pub test_mape: f64,
    pub saved: bool,
}

/// How often the knowledge code paths ran.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathCounters {
    pub taxonomy_lookups: usize,
    pub neighbor_rankings: usize,
    pub triplet_draws: usize,
}

/// Mutable state of a running training job.
pub struct TrainState {
    pub epoch: usize,
    pub adam: AdamState,
    pub best_mae: f64,
    pub shuffle_rng: ChaCha8Rng,
    pub batch_size: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest test MAE.
    pub best: Checkpoint,
    pub best_report: MetricsReport,
    /// Parameters after the last epoch.
    pub last: KernModel,
    pub log: Vec<EpochRecord>,
    pub counters: PathCounters,
}

/// Windowed samples with their feature ids.
pub struct PreparedSplit {
    pub samples: SampleSet,
    pub features: Vec<FeatureIds>,
}

pub struct Prepared {
    pub train: PreparedSplit,
    pub test: PreparedSplit,
}

/// Windows `dataset` and builds feature ids for both splits.
pub fn prepare(
    config: &KernConfig,
    dataset: &Dataset,
    taxonomy: Option<&Taxonomy>,
    counters: &mut PathCounters,
) -> Result<Prepared> {
    config.validate()?;
    let taxonomy = if config.ext_kg {
        let t = taxonomy.ok_or_else(|| Error::Config("ext_kg is on but no taxonomy was given".into()))?;
        t.check_covers(dataset)?;
        Some(t)
    } else {
        None
    };
    let (train, test) = make_samples(dataset, config.input_len, config.output_len)?;
    let mut features = |set: &SampleSet| -> Result<Vec<FeatureIds>> {
        if taxonomy.is_some() {
            counters.taxonomy_lookups += set.len();
        }
        set.samples().iter().map(|s| build_feature_ids(s, taxonomy, config.ext_kg)).collect()
    };
    let train_features = features(&train)?;
    let test_features = features(&test)?;
    Ok(Prepared {
        train: PreparedSplit {
            samples: train,
            features: train_features,
        },
        test: PreparedSplit {
            samples: test,
            features: test_features,
        },
    })
}

/// Embedding table sizes implied by the dataset and taxonomy.
pub fn vocab_for(config: &KernConfig, dataset: &Dataset, taxonomy: Option<&Taxonomy>) -> Result<VocabSizes> {
    let category = if config.ext_kg {
        let t = taxonomy.ok_or_else(|| Error::Config("ext_kg is on but no taxonomy was given".into()))?;
        Some(t.category_vocab_size())
    } else {
        None
    };
    Ok(VocabSizes {
        element: dataset.element_vocab_size,
        group: dataset.group_vocab_size,
        category,
    })
}

/// Forecasts for every sample of `split`, in sample order.
pub fn predict(model: &KernModel, split: &PreparedSplit) -> Result<Vec<Vec<f64>>> {
    let samples = split.samples.samples();
    let mut out = Vec::with_capacity(samples.len());
    for (chunk, feats) in samples.chunks(EVAL_CHUNK).zip(split.features.chunks(EVAL_CHUNK)) {
        let refs: Vec<&TrendSample> = chunk.iter().collect();
        out.extend(model.forecast(&EncoderInput::from_samples(&refs, feats)?)?);
    }
    Ok(out)
}

pub fn evaluate_split(model: &KernModel, split: &PreparedSplit) -> Result<MetricsReport> {
    let predictions = predict(model, split)?;
    let targets: Vec<Vec<f64>> = split.samples.samples().iter().map(|s| s.target.clone()).collect();
    MetricsReport::compute(&predictions, &targets, &model.config)
}

/// Test-set metrics of a checkpoint. Parameters are not modified.
pub fn evaluate(checkpoint: &Checkpoint, dataset: &Dataset, taxonomy: Option<&Taxonomy>) -> Result<MetricsReport> {
    checkpoint.check_compatible(dataset, taxonomy)?;
    let model = checkpoint.model()?;
    let prepared = prepare(&model.config, dataset, taxonomy, &mut PathCounters::default())?;
    evaluate_split(&model, &prepared.test)
}

/// Metrics of `model` on the training windows of `dataset`.
pub fn evaluate_train(model: &KernModel, dataset: &Dataset, taxonomy: Option<&Taxonomy>) -> Result<MetricsReport> {
    let prepared = prepare(&model.config, dataset, taxonomy, &mut PathCounters::default())?;
    evaluate_split(model, &prepared.train)
}

/// MAE of repeating the last observed value over the horizon.
pub fn naive_last_value_mae(samples: &SampleSet) -> Result<f64> {
    let preds: Vec<Vec<f64>> = samples
        .samples()
        .iter()
        .map(|s| vec![*s.input.last().expect("non-empty window"); s.target.len()])
        .collect();
    let targets: Vec<Vec<f64>> = samples.samples().iter().map(|s| s.target.clone()).collect();
    super::metrics::mae(&preds, &targets)
}

fn annotate(err: Error, epoch: usize, batch: usize) -> Error {
    match err {
        Error::NonFinite(what) => Error::NonFinite(format!("{what} (epoch {epoch}, batch {batch})")),
        other => other,
    }
}

/// Positions of `p` and `q` for every anchor position, drawn for `epoch`.
fn draw_triplets(
    index: &TripletIndex,
    train: &SampleSet,
    config: &KernConfig,
    epoch: usize,
    counters: &mut PathCounters,
) -> Result<Vec<(usize, usize)>> {
    train
        .samples()
        .iter()
        .map(|s| {
            let mut rng = triplet_rng(config.seed, epoch, s.sample_id);
            let t = sample_triplet(index, s.sample_id, config.sample_range, &mut rng)?;
            counters.triplet_draws += 1;
            let pos = |id| train.position_of(id).expect("ranked ids come from the train set");
            Ok((pos(t.positive), pos(t.negative)))
        })
        .collect()
}

struct LogSink {
    dir: std::path::PathBuf,
    log: BufWriter<File>,
}

impl LogSink {
    fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(TRAIN_LOG_FILE);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            log: BufWriter::new(file),
        })
    }

    fn record(&mut self, r: &EpochRecord) -> Result<()> {
        let path = self.dir.join(TRAIN_LOG_FILE);
        let line = serde_json::to_string(r).expect("record serialize");
        writeln!(self.log, "{line}")
            .and_then(|_| self.log.flush())
            .map_err(|e| Error::io(&path, e))
    }
}

/// Trains from a fresh initialisation seeded by `config.seed`.
///
/// With `out_dir`, the training log is written line by line and the
/// checkpoint file is replaced whenever the test MAE improves.
pub fn train(
    config: &KernConfig,
    settings: &TrainSettings,
    dataset: &Dataset,
    taxonomy: Option<&Taxonomy>,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    settings.validate()?;
    let schedule = settings.schedule()?;
    let mut counters = PathCounters::default();
    let prepared = prepare(config, dataset, taxonomy, &mut counters)?;
    let (train_set, test_set) = (&prepared.train, &prepared.test);

    let params = KernParams::init(config, vocab_for(config, dataset, taxonomy)?, config.seed)?;
    let mut model = KernModel::new(config.clone(), params)?;

    let index = if config.int_kg {
        counters.neighbor_rankings += 1;
        Some(rank_neighbors_to_depth(
            &train_set.samples,
            Metric::Euclidean,
            Some(2 * config.sample_range),
        )?)
    } else {
        None
    };

    let mut sink = out_dir.map(LogSink::open).transpose()?;
    let mut state = TrainState {
        epoch: 0,
        adam: AdamState::new(model.params.tensors().into_iter().map(|(_, t)| t), settings.lr),
        best_mae: f64::INFINITY,
        shuffle_rng: ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM),
        batch_size: settings.batch_size,
    };
    let mut order: Vec<usize> = (0..train_set.samples.len()).collect();
    let mut log = Vec::with_capacity(settings.epochs);
    let mut best: Option<(Checkpoint, MetricsReport)> = None;

    for epoch in 1..=settings.epochs {
        state.epoch = epoch;
        let lr = schedule.lr_at_epoch(epoch);
        state.adam.lr = lr;
        order.shuffle(&mut state.shuffle_rng);
        let triplets = match &index {
            Some(index) => Some(draw_triplets(index, &train_set.samples, config, epoch, &mut counters)?),
            None => None,
        };

        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(state.batch_size).enumerate() {
            let gather = |positions: &mut dyn Iterator<Item = usize>| {
                let mut samples = Vec::new();
                let mut feats = Vec::new();
                for p in positions {
                    samples.push(train_set.samples.get(p));
                    feats.push(train_set.features[p].clone());
                }
                (samples, feats)
            };
            let (samples, feats) = gather(&mut chunk.iter().copied());
            let batch = Batch::from_samples(&samples, &feats)?;
            let trip = match &triplets {
                Some(t) => {
                    let (ps, pf) = gather(&mut chunk.iter().map(|&i| t[i].0));
                    let (qs, qf) = gather(&mut chunk.iter().map(|&i| t[i].1));
                    Some(TripletBatch {
                        positive: EncoderInput::from_samples(&ps, &pf)?,
                        negative: EncoderInput::from_samples(&qs, &qf)?,
                    })
                }
                None => None,
            };

            let mut tape = crate::numcore::Tape::new();
            let bound = model.params.bind(&mut tape);
            let parts = model
                .total_loss(&mut tape, &bound, &batch, trip.as_ref())
                .map_err(|e| annotate(e, epoch, b))?;
            let loss = tape.value(parts.total).item();
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss (epoch {epoch}, batch {b})")));
            }
            let mut grads = tape.backward(parts.total).map_err(|e| annotate(e, epoch, b))?;
            let mut grads: Vec<Tensor> = bound.vars().into_iter().map(|v| grads.take(v)).collect();
            if let Some(max_norm) = settings.grad_clip {
                clip_grad_norm(&mut grads, max_norm);
            }
            state
                .adam
                .step(&mut model.params.tensors_mut(), &grads)
                .map_err(|e| annotate(e, epoch, b))?;
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / order.len() as f64;

        let report = evaluate_split(&model, test_set)?;
        let saved = report.mae < state.best_mae;
        if saved {
            state.best_mae = report.mae;
            let ck = Checkpoint::new(&model, epoch, report.mae);
            if let Some(dir) = out_dir {
                ck.save(dir.join(CHECKPOINT_FILE))?;
            }
            best = Some((ck, report.clone()));
        }
        let record = EpochRecord {
            epoch,
            lr,
            train_loss,
            test_mae: report.mae,
            test_mape: report.mape,
            saved,
        };
        log::info!(
            "epoch {epoch}: lr {lr:e}, train loss {train_loss:.6}, test MAE {:.6}, MAPE {:.3}{}",
            report.mae,
            report.mape,
            if saved { " (saved)" } else { "" }
        );
        if let Some(s) = sink.as_mut() {
            s.record(&record)?;
        }
        log.push(record);
    }

    let (best, best_report) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        best,
        best_report,
        last: model,
        log,
        counters,
    })
}

/// Reads a training log written by [`train`].
pub fn read_train_log(path: impl AsRef<Path>) -> Result<Vec<EpochRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                context: path.display().to_string(),
                location: format!("line {}", i + 1),
                message: e.to_string(),
            })
        })
        .collect()
}
