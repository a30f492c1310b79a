//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use trendkern::dataio::{load_dataset, make_samples, DatasetFormat, SampleSet, SyntheticSpec};
use trendkern::gradcheck;
use trendkern::knowledge::{rank_neighbors, sample_triplet, triplet_rng, Metric, Taxonomy};
use trendkern::model::KernConfig;
use trendkern::pipeline::{self, mae, mape, DatasetId, DatasetSource, RowStatus, TrainSettings, Variant, MAPE_EPSILON};

// Tolerances and budgets.
const GRAD_TOLERANCE: f64 = 1e-4;
const GRAD_BUDGET: Duration = Duration::from_secs(30);
const WINDOW_BUDGET: Duration = Duration::from_secs(5);
const TRIPLET_BUDGET: Duration = Duration::from_secs(30);
const CHI2_SIGNIFICANCE: f64 = 0.01;
const METRIC_TOLERANCE: f64 = 1e-12;
const OVERFIT_MAE: f64 = 0.005;
const OVERFIT_BUDGET: Duration = Duration::from_secs(5 * 60);
const SKILL_RATIO: f64 = 0.7;
const ABLATION_SLACK: f64 = 0.10;
const SKILL_BUDGET: Duration = Duration::from_secs(15 * 60);
const GEOSTYLE_MAE: (f64, f64) = (0.0120, 0.0145);
const GEOSTYLE_MAPE: (f64, f64) = (13.5, 16.5);
const GEOSTYLE_ABLATION_SLACK: f64 = 0.0005;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within(elapsed: Duration, budget: Duration) -> bool {
    elapsed < budget
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

// 1 -------------------------------------------------------------------------

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let reports = match gradcheck::run_all(7) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("suite errored: {e}")),
    };
    let elapsed = start.elapsed();
    let worst = reports
        .iter()
        .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
        .expect("non-empty");
    let has_model = reports.iter().any(|r| r.name == "model.total_loss");
    let ok = reports.iter().all(|r| r.max_rel_error < GRAD_TOLERANCE) && has_model && within(elapsed, GRAD_BUDGET);
    verdict(
        ok,
        format!(
            "{} checks, worst {} at {:.2e} (< {GRAD_TOLERANCE:e}), {elapsed:.1?} (< {GRAD_BUDGET:?})",
            reports.len(),
            worst.name,
            worst.max_rel_error
        ),
    )
}

// 2 -------------------------------------------------------------------------

fn windowing_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut problems = Vec::new();
    for trial in 0..10 {
        let input_len = rng.random_range(1..30);
        let output_len = rng.random_range(1..15);
        let length = rng.random_range(input_len + output_len + 1..input_len + output_len + 80);
        let (groups, elements) = (rng.random_range(1..4), rng.random_range(1..6));
        let d = SyntheticSpec::new(groups, elements, length, trial).generate().expect("generate");
        let (train, test) = make_samples(&d, input_len, output_len).expect("windowable");
        let expected: usize = d.series.iter().map(|s| s.values.len() - input_len - output_len + 1).sum();
        if train.len() + test.len() != expected {
            problems.push(format!("trial {trial}: {} windows, formula {expected}", train.len() + test.len()));
        }
        let mut seen = BTreeMap::new();
        for s in test.samples() {
            *seen.entry(s.series_id).or_insert(0) += 1;
            if s.window_start != length - input_len - output_len {
                problems.push(format!("trial {trial}: test window of series {} is not last", s.series_id));
            }
        }
        if seen.len() != d.series.len() || seen.values().any(|&c| c != 1) {
            problems.push(format!("trial {trial}: test windows per series {seen:?}"));
        }
    }
    let elapsed = start.elapsed();
    let ok = problems.is_empty() && within(elapsed, WINDOW_BUDGET);
    verdict(
        ok,
        if problems.is_empty() {
            format!("10 datasets match the window-count formula, {elapsed:.1?} (< {WINDOW_BUDGET:?})")
        } else {
            problems.join("; ")
        },
    )
}

// 3 -------------------------------------------------------------------------

fn brute_force_ranking(set: &SampleSet, anchor: usize) -> Vec<(usize, f64)> {
    let k = set.get(anchor);
    let mut all: Vec<(usize, f64)> = set
        .samples()
        .iter()
        .filter(|s| s.series_id != k.series_id)
        .map(|s| {
            let d = k.input.iter().zip(&s.input).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            (s.sample_id, d)
        })
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all
}

fn triplet_oracle() -> Outcome {
    let start = Instant::now();
    // 10 series x 20 windows = 200 training samples.
    let d = SyntheticSpec::new(2, 5, 36, 3).generate().expect("generate");
    let (train, _) = make_samples(&d, 12, 4).expect("windows");
    if train.len() != 200 {
        return Outcome::Fail(format!("expected 200 samples, got {}", train.len()));
    }
    let index = match rank_neighbors(&train, Metric::Euclidean) {
        Ok(i) => i,
        Err(e) => return Outcome::Fail(format!("rank_neighbors errored: {e}")),
    };
    for pos in 0..train.len() {
        let id = train.get(pos).sample_id;
        let got: Vec<(usize, f64)> = index
            .ranked(id)
            .expect("anchor")
            .iter()
            .map(|n| (n.sample_id, n.distance))
            .collect();
        if got != brute_force_ranking(&train, pos) {
            return Outcome::Fail(format!("ranking of anchor {id} differs from the brute-force sort"));
        }
    }

    const R: usize = 50;
    const DRAWS: usize = 10_000;
    let mut counts = [0usize; R];
    for draw in 0..DRAWS {
        let anchor = train.get(draw % train.len()).sample_id;
        let mut rng = triplet_rng(11, draw / train.len() + 1, anchor);
        let t = match sample_triplet(&index, anchor, R, &mut rng) {
            Ok(t) => t,
            Err(e) => return Outcome::Fail(format!("sample_triplet errored: {e}")),
        };
        let ranked = index.ranked(anchor).expect("anchor");
        let rank_of = |id: usize| ranked.iter().position(|n| n.sample_id == id).expect("ranked");
        let (rp, rq) = (rank_of(t.positive), rank_of(t.negative));
        let dist = |id: usize| Metric::Euclidean.distance(&train.by_id(anchor).unwrap().input, &train.by_id(id).unwrap().input);
        if dist(t.positive) > dist(t.negative) {
            return Outcome::Fail(format!("draw {draw}: distance(k,p) > distance(k,q)"));
        }
        if rp >= R || !(R..2 * R).contains(&rq) {
            return Outcome::Fail(format!("draw {draw}: ranks ({rp}, {rq}) outside the pools"));
        }
        counts[rp] += 1;
    }
    let expected = DRAWS as f64 / R as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p_value = 1.0 - ChiSquared::new((R - 1) as f64).expect("dof").cdf(chi2);
    let elapsed = start.elapsed();
    let ok = p_value > CHI2_SIGNIFICANCE && within(elapsed, TRIPLET_BUDGET);
    verdict(
        ok,
        format!(
            "ranking matches brute force on 200 samples; chi2 = {chi2:.1} (p = {p_value:.3} > {CHI2_SIGNIFICANCE}); \
             d(k,p) <= d(k,q) for all {DRAWS} draws; {elapsed:.1?} (< {TRIPLET_BUDGET:?})"
        ),
    )
}

// 4 -------------------------------------------------------------------------

fn oracle_mae(p: &[Vec<f64>], t: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut count = 0.0;
    for i in 0..p.len() {
        for j in 0..p[i].len() {
            total += (p[i][j] - t[i][j]).abs();
            count += 1.0;
        }
    }
    total / count
}

fn oracle_mape(p: &[Vec<f64>], t: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut count = 0.0;
    for i in 0..p.len() {
        for j in 0..p[i].len() {
            if t[i][j].abs() > 1e-6 {
                total += ((p[i][j] - t[i][j]) / t[i][j]).abs();
                count += 1.0;
            }
        }
    }
    100.0 * total / count
}

fn metric_values() -> Outcome {
    let p = vec![vec![0.2, 0.4]];
    let t = vec![vec![0.1, 0.2]];
    let hand_mae = mae(&p, &t).expect("mae");
    let hand_mape = mape(&p, &t, MAPE_EPSILON).expect("mape").value;
    let mut ok = (hand_mae - 0.15).abs() < METRIC_TOLERANCE && hand_mape == 100.0;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (rows, cols) = (rng.random_range(1..20), rng.random_range(1..30));
        let mut gen = |zero_frac: f64| -> Vec<Vec<f64>> {
            (0..rows)
                .map(|_| {
                    (0..cols)
                        .map(|_| if rng.random_bool(zero_frac) { 0.0 } else { rng.random_range(0.0..1.0) })
                        .collect()
                })
                .collect()
        };
        let preds = gen(0.0);
        let targets = gen(0.05);
        let m = mae(&preds, &targets).expect("mae");
        worst = worst.max((m - oracle_mae(&preds, &targets)).abs());
        match mape(&preds, &targets, MAPE_EPSILON) {
            Ok(x) => worst = worst.max((x.value - oracle_mape(&preds, &targets)).abs()),
            Err(_) => ok = targets.iter().flatten().all(|v| *v == 0.0) && ok,
        }
    }
    ok &= worst <= METRIC_TOLERANCE;
    verdict(
        ok,
        format!(
            "mae = {hand_mae}, mape = {hand_mape}; max deviation from scalar oracle over 100 batches {worst:.1e} \
             (<= {METRIC_TOLERANCE:e})"
        ),
    )
}

// 5 -------------------------------------------------------------------------

fn overfit() -> Outcome {
    let start = Instant::now();
    let d = SyntheticSpec::new(4, 8, 104, 5).generate().expect("generate");
    let config = KernConfig {
        input_len: 26,
        output_len: 13,
        ext_kg: false,
        int_kg: false,
        seed: 5,
        ..KernConfig::default()
    };
    let settings = TrainSettings {
        lr: 0.003,
        lr_decay: true,
        lr_decay_interval: 100,
        lr_decay_gamma: 0.3,
        epochs: 200,
        batch_size: 32,
        grad_clip: None,
    };
    let out = match pipeline::train(&config, &settings, &d, None, None) {
        Ok(o) => o,
        Err(e) => return Outcome::Fail(format!("training errored: {e}")),
    };
    let train_mae = pipeline::evaluate_train(&out.last, &d, None).expect("evaluate").mae;
    let elapsed = start.elapsed();
    verdict(
        train_mae < OVERFIT_MAE && within(elapsed, OVERFIT_BUDGET),
        format!(
            "KERN-IE final train MAE {train_mae:.5} (< {OVERFIT_MAE}), {elapsed:.0?} (< {OVERFIT_BUDGET:?}) single-threaded"
        ),
    )
}

// 6 -------------------------------------------------------------------------

fn forecasting_skill() -> Outcome {
    let start = Instant::now();
    const CATEGORIES: usize = 4;
    let d = SyntheticSpec::new(10, 20, 80, 6)
        .with_phase_categories(CATEGORIES)
        .generate()
        .expect("generate");
    let taxonomy = Taxonomy::modulo(d.element_vocab_size, CATEGORIES).expect("taxonomy");
    let base = KernConfig {
        input_len: 26,
        output_len: 13,
        triplet_lambda: 0.002,
        sample_range: 50,
        seed: 6,
        ..KernConfig::default()
    };
    let settings = TrainSettings {
        lr: 0.003,
        lr_decay: true,
        lr_decay_interval: 10,
        lr_decay_gamma: 0.3,
        epochs: 15,
        batch_size: 64,
        grad_clip: None,
    };
    let (_, test) = make_samples(&d, base.input_len, base.output_len).expect("windows");
    let naive = pipeline::naive_last_value_mae(&test).expect("naive");

    let run = |variant: Variant| -> Result<f64, String> {
        let (ext_kg, int_kg) = variant.flags();
        let config = KernConfig { ext_kg, int_kg, ..base.clone() };
        pipeline::train(&config, &settings, &d, Some(&taxonomy), None)
            .map(|o| o.best_report.mae)
            .map_err(|e| format!("{variant} errored: {e}"))
    };
    let (kern, ie) = match (run(Variant::Kern), run(Variant::KernIe)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Outcome::Fail(e),
    };
    let elapsed = start.elapsed();
    let ok = kern <= SKILL_RATIO * naive && kern <= ie * (1.0 + ABLATION_SLACK) && within(elapsed, SKILL_BUDGET);
    verdict(
        ok,
        format!(
            "KERN test MAE {kern:.5} vs naive {naive:.5} (ratio {:.3} <= {SKILL_RATIO}); KERN-IE {ie:.5} \
             (KERN/KERN-IE {:.3} <= {}); {elapsed:.0?} (< {SKILL_BUDGET:?})",
            kern / naive,
            kern / ie,
            1.0 + ABLATION_SLACK
        ),
    )
}

// 7 -------------------------------------------------------------------------

fn trendkern(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_trendkern"))
        .args(args)
        .output()
        .expect("spawn trendkern")
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let p = |name: &str| dir.path().join(name).display().to_string();
    let gen = trendkern(&[
        "gen-synthetic", "--groups", "3", "--elements", "6", "--length", "60", "--output", &p("data.json"),
        "--taxonomy", &p("tax.txt"), "--categories", "3", "--seed", "9", "--quiet",
    ]);
    if !gen.status.success() {
        return Outcome::Fail(format!("gen-synthetic failed: {}", String::from_utf8_lossy(&gen.stderr)));
    }
    let config = "dataset_profile: synthetic\ndataset_path: data.json\ntaxonomy_path: tax.txt\n\
                  epoch: 3\nbatch_size: 64\nrnn_hidden_size: 16\nsample_range: 50\nseed: 21\n";
    std::fs::write(dir.path().join("run.yaml"), config).expect("write config");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let o = trendkern(&["train", &p("run.yaml"), "--out-dir", &p(run), "--quiet"]);
        if !o.status.success() {
            return Outcome::Fail(format!("train {run} failed: {}", String::from_utf8_lossy(&o.stderr)));
        }
        let read = |f: &str| std::fs::read(dir.path().join(run).join(f)).unwrap_or_default();
        outputs.push((read(pipeline::TRAIN_LOG_FILE), read(pipeline::CHECKPOINT_FILE)));
    }
    let logs_equal = outputs[0].0 == outputs[1].0 && !outputs[0].0.is_empty();
    let ck_equal = outputs[0].1 == outputs[1].1 && !outputs[0].1.is_empty();
    verdict(
        logs_equal && ck_equal,
        format!(
            "two `train` runs (KERN, seed 21): log identical = {logs_equal} ({} bytes), checkpoint identical = \
             {ck_equal} ({} bytes)",
            outputs[0].0.len(),
            outputs[0].1.len()
        ),
    )
}

// 8 -------------------------------------------------------------------------

fn geostyle() -> Outcome {
    let data = workspace_root().join("data/geostyle.csv");
    let tax = workspace_root().join("data/geostyle.taxonomy");
    if !data.exists() {
        return Outcome::Skip(format!("{} not present", data.display()));
    }
    let dataset = match load_dataset(&data, DatasetFormat::GeoStyleRaw) {
        Ok(d) => d,
        Err(e) => return Outcome::Fail(format!("could not load GeoStyle: {e}")),
    };
    let taxonomy = match Taxonomy::load(&tax) {
        Ok(t) => t,
        Err(e) => return Outcome::Fail(format!("KERN needs a taxonomy at {}: {e}", tax.display())),
    };
    let (base, settings) = {
        let cfg = trendkern::cli::ExperimentConfig::for_profile(trendkern::cli::DatasetProfile::GeoStyle);
        (cfg.model, cfg.train)
    };
    let specs: Vec<_> = pipeline::paper_specs(DatasetId::GeoStyle, &base)
        .into_iter()
        .filter(|s| matches!(s.label, Variant::Kern | Variant::KernI))
        .collect();
    let mut sources = BTreeMap::new();
    sources.insert(
        DatasetId::GeoStyle,
        DatasetSource {
            base,
            settings,
            data: Ok((dataset, Some(taxonomy))),
            out_dir: None,
        },
    );
    let table = pipeline::reproduce(&specs, &sources);
    let result = |v: Variant| {
        table.rows.iter().find(|r| r.spec.label == v).and_then(|r| match r.result {
            RowStatus::Completed { mae, mape, .. } => Some((mae, mape)),
            _ => None,
        })
    };
    let (Some((kern_mae, kern_mape)), Some((kern_i_mae, _))) = (result(Variant::Kern), result(Variant::KernI)) else {
        return Outcome::Fail(format!("training failed:\n{}", table.render_text()));
    };
    let in_range = |x: f64, (lo, hi): (f64, f64)| (lo..=hi).contains(&x);
    let ordering = kern_mae <= kern_i_mae + GEOSTYLE_ABLATION_SLACK;
    verdict(
        in_range(kern_mae, GEOSTYLE_MAE) && in_range(kern_mape, GEOSTYLE_MAPE) && ordering,
        format!(
            "KERN MAE {kern_mae:.4} in {GEOSTYLE_MAE:?}, MAPE {kern_mape:.2} in {GEOSTYLE_MAPE:?}; \
             KERN-I MAE {kern_i_mae:.4} (KERN <= KERN-I + {GEOSTYLE_ABLATION_SLACK})"
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("gradient suite", gradient_suite),
        ("windowing oracle", windowing_oracle),
        ("triplet sampler oracle", triplet_oracle),
        ("metric hand values", metric_values),
        ("overfit convergence", overfit),
        ("forecasting skill", forecasting_skill),
        ("determinism", determinism),
        ("GeoStyle reproduction", geostyle),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &n.to_string() || name.contains(f.as_str())) {
            continue;
        }
        let (tag, detail) = match run() {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} criterion {n} ({name}): {detail}");
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
