use std::cmp::Ordering;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::SampleSet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub sample_id: usize,
    pub distance: f64,
}

/// Per-anchor neighbor rankings over the input windows of a sample set.
///
/// Samples from the anchor's own series are never eligible. Rankings are
/// ordered by (distance, sample_id). With a depth limit only the first
/// `depth` neighbors are kept, which equals the prefix of the full ranking.
#[derive(Clone, Debug)]
pub struct TripletIndex {
    pub metric: Metric,
    anchors: Vec<usize>,
    ranked: Vec<Vec<Neighbor>>,
    position: HashMap<usize, usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

fn by_distance_then_id(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.distance
        .partial_cmp(&b.distance)
        .unwrap_or(Ordering::Equal)
        .then(a.sample_id.cmp(&b.sample_id))
}

impl TripletIndex {
    pub fn anchors(&self) -> &[usize] {
        &self.anchors
    }

    /// Ranked neighbors of `anchor` (a sample id), nearest first.
    pub fn ranked(&self, anchor: usize) -> Option<&[Neighbor]> {
        self.position.get(&anchor).map(|&p| self.ranked[p].as_slice())
    }

    /// Shortest ranked list across anchors.
    pub fn min_depth(&self) -> usize {
        self.ranked.iter().map(Vec::len).min().unwrap_or(0)
    }
}

pub fn rank_neighbors(samples: &SampleSet, metric: Metric) -> Result<TripletIndex> {
    rank_neighbors_to_depth(samples, metric, None)
}

/// As [`rank_neighbors`], keeping at most `depth` neighbors per anchor.
pub fn rank_neighbors_to_depth(samples: &SampleSet, metric: Metric, depth: Option<usize>) -> Result<TripletIndex> {
    let all = samples.samples();
    if let Some(len) = samples.input_len() {
        if all.iter().any(|s| s.input.len() != len) {
            return Err(Error::Triplet("samples have different input lengths".into()));
        }
    }

    let ranked: Vec<Vec<Neighbor>> = all
        .par_iter()
        .map(|anchor| {
            let mut pool: Vec<Neighbor> = all
                .iter()
                .filter(|s| s.series_id != anchor.series_id)
                .map(|s| Neighbor {
                    sample_id: s.sample_id,
                    distance: metric.distance(&anchor.input, &s.input),
                })
                .collect();
            match depth {
                Some(d) if d < pool.len() => {
                    pool.select_nth_unstable_by(d, by_distance_then_id);
                    pool.truncate(d);
                }
                _ => {}
            }
            pool.sort_unstable_by(by_distance_then_id);
            pool
        })
        .collect();

    if let Some(p) = ranked.iter().position(|r| r.len() < 2) {
        return Err(Error::Triplet(format!(
            "sample {} has {} eligible neighbors; triplets need at least 3 samples from distinct series",
            all[p].sample_id,
            ranked[p].len()
        )));
    }

    let anchors: Vec<usize> = all.iter().map(|s| s.sample_id).collect();
    let position = anchors.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    Ok(TripletIndex {
        metric,
        anchors,
        ranked,
        position,
    })
}

/// Draws `p` uniformly from ranks `1..=R` and `q` from ranks `R+1..=2R`.
pub fn sample_triplet<G: Rng + ?Sized>(
    index: &TripletIndex,
    anchor: usize,
    sample_range: usize,
    rng: &mut G,
) -> Result<Triplet> {
    if sample_range == 0 {
        return Err(Error::Triplet("sample_range must be >= 1".into()));
    }
    let ranked = index
        .ranked(anchor)
        .ok_or_else(|| Error::Triplet(format!("sample {anchor} is not an anchor of this index")))?;
    if ranked.len() < 2 * sample_range {
        return Err(Error::Triplet(format!(
            "sample {anchor} has {} ranked neighbors but sample_range {sample_range} needs {}; \
             choose a smaller sample_range (e.g. one of 50, 100, 500, 1000 that fits)",
            ranked.len(),
            2 * sample_range
        )));
    }
    let p = rng.random_range(0..sample_range);
    let q = rng.random_range(sample_range..2 * sample_range);
    Ok(Triplet {
        anchor,
        positive: ranked[p].sample_id,
        negative: ranked[q].sample_id,
    })
}

/// Generator for one anchor's draw in one epoch, independent of thread layout.
pub fn triplet_rng(seed: u64, epoch: usize, anchor: usize) -> ChaCha8Rng {
    let mut x = seed ^ 0x9E37_79B9_7F4A_7C15;
    for v in [epoch as u64, anchor as u64] {
        x = splitmix64(x ^ v.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    }
    ChaCha8Rng::seed_from_u64(x)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
