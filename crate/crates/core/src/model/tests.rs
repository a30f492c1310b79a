use super::*;
use crate::dataio::TrendSample;
use crate::knowledge::{build_feature_ids, FeatureIds, Taxonomy};
use crate::numcore::{Tape, Tensor};

fn sample(input: Vec<f64>, target: Vec<f64>, element: usize, group: usize) -> TrendSample {
    TrendSample {
        sample_id: 0,
        series_id: 0,
        group_id: group,
        element_id: element,
        window_start: 0,
        input,
        target,
    }
}

fn small_config(ext_kg: bool, int_kg: bool) -> KernConfig {
    KernConfig {
        input_len: 5,
        output_len: 4,
        ext_kg,
        int_kg,
        triplet_lambda: 0.002,
        sample_range: 1,
        feat_size: 3,
        rnn_hidden_size: 6,
        margin: 0.5,
        seed: 3,
        ..KernConfig::default()
    }
}

fn vocab(ext: bool) -> VocabSizes {
    VocabSizes {
        element: 4,
        group: 2,
        category: ext.then_some(2),
    }
}

fn model(ext_kg: bool, int_kg: bool) -> KernModel {
    let c = small_config(ext_kg, int_kg);
    let p = KernParams::init(&c, vocab(ext_kg), 9).unwrap();
    KernModel::new(c, p).unwrap()
}

fn zeroed(mut m: KernModel) -> KernModel {
    for t in m.params.tensors_mut() {
        t.data_mut().fill(0.0);
    }
    m
}

fn ids(s: &TrendSample, ext: bool) -> FeatureIds {
    let tax = Taxonomy::modulo(4, 2).unwrap();
    build_feature_ids(s, Some(&tax), ext).unwrap()
}

#[test]
fn zero_weights_give_zero_state_and_bias_forecast() {
    let mut m = zeroed(model(true, false));
    m.params.output_bias.data_mut()[0] = 0.37;
    let s = sample(vec![0.1, 0.5, 0.9, 0.3, 0.2], vec![0.0; 4], 1, 1);
    let f = ids(&s, true);
    let state = m.encode(&s.input, &f).unwrap();
    assert!(state.hidden.iter().chain(&state.cell).all(|&x| x == 0.0));
    let fc = m.decode(&state, 0.2, &f, 4).unwrap();
    assert_eq!(fc.predictions, vec![0.37; 4]);
}

#[test]
fn hidden_size_follows_config() {
    let c = KernConfig {
        input_len: 8,
        ext_kg: false,
        ..KernConfig::default()
    };
    let p = KernParams::init(&c, vocab(false), 0).unwrap();
    let m = KernModel::new(c, p).unwrap();
    let s = sample(vec![0.1; 8], vec![], 0, 0);
    let st = m.encode(&s.input, &ids(&s, false)).unwrap();
    assert_eq!(st.hidden.len(), 50);
    assert_eq!(st.cell.len(), 50);
}

#[test]
fn single_step_matches_hand_lstm() {
    // H = 1, feat_size = 1, no parent: step input [value, e, g], weight rows [value, e, g, h].
    let c = KernConfig {
        input_len: 1,
        output_len: 1,
        ext_kg: false,
        int_kg: false,
        feat_size: 1,
        rnn_hidden_size: 1,
        ..KernConfig::default()
    };
    let v = VocabSizes {
        element: 1,
        group: 1,
        category: None,
    };
    let mut p = KernParams::init(&c, v, 0).unwrap();
    p.element_embedding = Tensor::matrix(1, 1, vec![0.3]).unwrap();
    p.group_embedding = Tensor::matrix(1, 1, vec![-0.2]).unwrap();
    #[rustfmt::skip]
    let w = vec![
        0.5, -0.4, 0.25, 0.1,
        0.2, 0.3, -0.6, 0.7,
        -0.1, 0.05, 0.4, -0.3,
        0.9, 0.9, 0.9, 0.9,
    ];
    p.encoder.weight = Tensor::matrix(4, 4, w.clone()).unwrap();
    p.encoder.bias = Tensor::vector(vec![0.01, 1.0, -0.02, 0.03]);
    let m = KernModel::new(c, p).unwrap();
    let s = sample(vec![0.8], vec![0.0], 0, 0);
    let st = m.encode(&s.input, &ids(&s, false)).unwrap();

    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let z = [0.8, 0.3, -0.2, 0.0];
    let pre = |j: usize| z.iter().enumerate().map(|(r, zr)| zr * w[r * 4 + j]).sum::<f64>();
    let i = sig(pre(0) + 0.01);
    let _f = sig(pre(1) + 1.0);
    let g = (pre(2) - 0.02).tanh();
    let o = sig(pre(3) + 0.03);
    let c_t = i * g; // c_0 = 0 removes the forget term
    let h_t = o * c_t.tanh();
    assert!((st.cell[0] - c_t).abs() < 1e-12);
    assert!((st.hidden[0] - h_t).abs() < 1e-12);
}

#[test]
fn forecast_length_and_causal_prefix() {
    let m = model(true, false);
    let s = sample(vec![0.1, 0.5, 0.9, 0.3, 0.2], vec![0.0; 4], 2, 1);
    let f = ids(&s, true);
    let st = m.encode(&s.input, &f).unwrap();
    let short = m.decode(&st, 0.2, &f, 12).unwrap();
    assert_eq!(short.predictions.len(), 12);
    let long = m.decode(&st, 0.2, &f, 20).unwrap();
    assert_eq!(&long.predictions[..12], &short.predictions[..]);
}

#[test]
fn batched_forecast_matches_single_sample_path() {
    let m = model(true, false);
    let a = sample(vec![0.1, 0.5, 0.9, 0.3, 0.2], vec![0.0; 4], 2, 1);
    let b = sample(vec![0.4, 0.4, 0.1, 0.0, 0.6], vec![0.0; 4], 3, 0);
    let feats = [ids(&a, true), ids(&b, true)];
    let batch = EncoderInput::from_samples(&[&a, &b], &feats).unwrap();
    let rows = m.forecast(&batch).unwrap();
    for (s, (f, row)) in [&a, &b].iter().zip(feats.iter().zip(&rows)) {
        let st = m.encode(&s.input, f).unwrap();
        let single = m.decode(&st, *s.input.last().unwrap(), f, 4).unwrap();
        for (x, y) in single.predictions.iter().zip(row) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}

#[test]
fn wrong_input_length_is_an_error() {
    let m = model(false, false);
    let s = sample(vec![0.1; 4], vec![], 0, 0);
    assert!(m.encode(&s.input, &ids(&s, false)).is_err());
    // Feature width must match ext_kg.
    let s = sample(vec![0.1; 5], vec![], 0, 0);
    assert!(m.encode(&s.input, &ids(&s, true)).is_err());
}

fn scalar_of(f: impl FnOnce(&mut Tape) -> crate::numcore::Var) -> f64 {
    let mut tape = Tape::new();
    let v = f(&mut tape);
    tape.value(v).item()
}

#[test]
fn regression_loss_hand_values() {
    let mae = |pred: Vec<Vec<f64>>, target: Vec<Vec<f64>>| {
        scalar_of(|t| {
            let p = t.constant(Tensor::from_rows(&pred).unwrap());
            let q = t.constant(Tensor::from_rows(&target).unwrap());
            regression_loss(t, p, q, RegressionLoss::Mae).unwrap()
        })
    };
    assert!((mae(vec![vec![0.2, 0.4]], vec![vec![0.1, 0.2]]) - 0.15).abs() < 1e-15);
    assert_eq!(mae(vec![vec![0.2, 0.4]], vec![vec![0.2, 0.4]]), 0.0);
    let two = mae(vec![vec![0.1, 0.1], vec![0.3, 0.3]], vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
    assert!((two - 0.2).abs() < 1e-15);
}

/// Unit vectors whose chord distances to `(1, 0)` are `d_pos` and `d_neg`.
fn triplet_value(d_pos: f64, d_neg: f64, margin: f64) -> f64 {
    let at = |d: f64| {
        let theta = 2.0 * (d / 2.0).asin();
        vec![theta.cos(), theta.sin()]
    };
    scalar_of(|t| {
        let k = t.constant(Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap());
        let p = t.constant(Tensor::matrix(1, 2, at(d_pos)).unwrap());
        let q = t.constant(Tensor::matrix(1, 2, at(d_neg)).unwrap());
        triplet_loss(t, k, p, q, margin).unwrap()
    })
}

#[test]
fn triplet_hinge_values() {
    assert!(triplet_value(0.2, 0.5, 0.3).abs() < 1e-12);
    assert!((triplet_value(0.2, 0.5, 0.5) - 0.2).abs() < 1e-12);
    // Identical positive and negative: loss is exactly the margin.
    let v = scalar_of(|t| {
        let k = t.constant(Tensor::matrix(2, 3, vec![0.3, -1.0, 2.0, 5.0, 0.1, 0.1]).unwrap());
        let p = t.constant(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0]).unwrap());
        let q = t.constant(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0]).unwrap());
        triplet_loss(t, k, p, q, 0.7).unwrap()
    });
    assert!((v - 0.7).abs() < 1e-15);
    // Bounded by margin + 2 on unit vectors.
    assert!(triplet_value(2.0, 0.0, 0.5) <= 2.5 + 1e-12);
    let mut tape = Tape::new();
    let z = tape.constant(Tensor::zeros(&[1, 2]));
    let one = tape.constant(Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap());
    assert!(triplet_loss(&mut tape, z, one, one, 0.5).is_err());
}

fn toy_batch(ext: bool) -> (Batch, TripletBatch) {
    let s = |x: f64, e: usize, g: usize| {
        sample(
            (0..5).map(|i| x + 0.05 * i as f64).collect(),
            (0..4).map(|i| x - 0.02 * i as f64).collect(),
            e,
            g,
        )
    };
    let (a, b) = (s(0.2, 0, 0), s(0.5, 1, 1));
    let (p1, p2) = (s(0.25, 2, 0), s(0.45, 3, 1));
    let (q1, q2) = (s(0.9, 3, 1), s(0.05, 0, 1));
    let f = |x: &[&TrendSample]| x.iter().map(|s| ids(s, ext)).collect::<Vec<_>>();
    let batch = Batch::from_samples(&[&a, &b], &f(&[&a, &b])).unwrap();
    let trip = TripletBatch {
        positive: EncoderInput::from_samples(&[&p1, &p2], &f(&[&p1, &p2])).unwrap(),
        negative: EncoderInput::from_samples(&[&q1, &q2], &f(&[&q1, &q2])).unwrap(),
    };
    (batch, trip)
}

#[test]
fn total_loss_ablation_identities() {
    let (batch, trip) = toy_batch(true);

    let m = model(true, false);
    let mut tape = Tape::new();
    let bound = m.params.bind(&mut tape);
    let parts = m.total_loss(&mut tape, &bound, &batch, None).unwrap();
    assert_eq!(parts.total, parts.regression);
    assert!(parts.triplet.is_none());

    let mut m = model(true, true);
    m.config.triplet_lambda = 0.0;
    let mut tape = Tape::new();
    let bound = m.params.bind(&mut tape);
    let parts = m.total_loss(&mut tape, &bound, &batch, Some(&trip)).unwrap();
    assert_eq!(tape.value(parts.total).item(), tape.value(parts.regression).item());

    m.config.triplet_lambda = 0.002;
    let mut tape = Tape::new();
    let bound = m.params.bind(&mut tape);
    let parts = m.total_loss(&mut tape, &bound, &batch, Some(&trip)).unwrap();
    let reg = tape.value(parts.regression).item();
    let tri = tape.value(parts.triplet.unwrap()).item();
    assert!((tape.value(parts.total).item() - (reg + 0.002 * tri)).abs() < 1e-15);
    assert!(tape.value(parts.total).item() >= 0.0);
    assert!(tri <= m.config.margin + 2.0);

    // Linear combination on plain numbers.
    let v = scalar_of(|t| {
        let r = t.constant(Tensor::scalar(0.1));
        let q = t.constant(Tensor::scalar(0.5));
        let w = t.scale(q, 0.002).unwrap();
        t.add(r, w).unwrap()
    });
    assert!((v - 0.101).abs() < 1e-15);

    // int_kg without triplets is an error.
    let mut tape = Tape::new();
    let bound = m.params.bind(&mut tape);
    assert!(m.total_loss(&mut tape, &bound, &batch, None).is_err());
}

#[test]
fn forecast_ignores_targets() {
    let m = model(true, true);
    let (mut batch, trip) = toy_batch(true);
    let run = |b: &Batch| {
        let mut tape = Tape::new();
        let bound = m.params.bind(&mut tape);
        let parts = m.total_loss(&mut tape, &bound, b, Some(&trip)).unwrap();
        tape.value(parts.forecast).clone()
    };
    let before = run(&batch);
    batch.targets.data_mut().iter_mut().for_each(|x| *x += 0.3);
    assert_eq!(run(&batch), before);
}

#[test]
fn without_external_knowledge_parent_ids_are_ignored() {
    let m = model(false, false);
    assert!(m.params.parent_embedding.is_none());
    let s = sample(vec![0.1, 0.5, 0.9, 0.3, 0.2], vec![0.0; 4], 2, 1);
    let plain = FeatureBatch::from_ids([&ids(&s, false)]).unwrap();
    let mut with_parent = FeatureBatch::from_ids([&ids(&s, true)]).unwrap();
    assert!(with_parent.parent_ids.is_some());
    let a = m
        .forecast(&EncoderInput::new(&[s.input.as_slice()], plain).unwrap())
        .unwrap();
    with_parent.parent_ids = Some(vec![1]);
    let b = m
        .forecast(&EncoderInput::new(&[s.input.as_slice()], with_parent).unwrap())
        .unwrap();
    assert_eq!(a, b);
}

#[test]
fn end_to_end_gradient_check() {
    let report = crate::gradcheck::model_suite(1).unwrap();
    assert!(report.checked > 100);
    assert!(report.passed(), "max rel error {}", report.max_rel_error);
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let m = model(true, true);
    let ck = Checkpoint::new(&m, 3, 0.0123456789);
    let back = Checkpoint::from_json(&ck.to_json(), "inline").unwrap();
    assert_eq!(back, ck);
    for ((_, a), (_, b)) in back.params.tensors().iter().zip(ck.params.tensors()) {
        let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
    assert_eq!(back.model().unwrap(), m);
}

#[test]
fn checkpoint_vocab_mismatch() {
    use crate::dataio::generate_synthetic;
    let m = model(false, false);
    let ck = Checkpoint::new(&m, 1, 0.1);
    let ok = generate_synthetic(2, 4, 20, 0).unwrap();
    assert!(ck.check_compatible(&ok, None).is_ok());
    let bad = generate_synthetic(2, 5, 20, 0).unwrap();
    let err = ck.check_compatible(&bad, None).unwrap_err();
    assert!(err.to_string().contains("mismatch"));
}
