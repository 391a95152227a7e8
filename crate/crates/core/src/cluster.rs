//! Two-party distributed k-means (k = 2) with label exchange over
//! buffered-entanglement links.
//!
//! Both parties hold the full dataset and the same initial centroids. In
//! every iteration each labels half of the points, then sends those labels
//! to the other party: two labels per stored pair while pairs last, one
//! classical bit per transmission afterwards. Received labels overwrite the
//! local copy verbatim and each party recomputes its centroids from its own
//! view. The halves swap between iterations.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::buffers::EprRecord;
use crate::error::Error;
use crate::link::{encode_for_send, receive_and_decode};
use crate::qcore::{NoiseParams, Symbol};
use crate::rng::{self, stream};

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<Point>,
    pub truth: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    /// Must be even; each party labels half per iteration.
    pub n_points: usize,
    pub centers: [Point; 2],
    pub std: f64,
    pub initial_centroids: [Point; 2],
    pub max_iters: usize,
    pub pairs_per_iteration: usize,
    pub memory_capacity: usize,
    pub noise: NoiseParams,
    pub processing_gap_ns: u64,
    pub generation_stagger_ns: u64,
    pub channel_delay_ns: u64,
    /// Stop once both parties' centroids move less than this. `None` always
    /// runs `max_iters`.
    pub convergence_tol: Option<f64>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            n_points: 500,
            centers: [[-1.0, 0.0], [1.0, 0.0]],
            std: 0.1,
            initial_centroids: [[-0.5, 0.0], [0.5, 0.0]],
            max_iters: 10,
            pairs_per_iteration: 0,
            memory_capacity: 500,
            noise: NoiseParams::perfect(),
            processing_gap_ns: 1_000_000,
            generation_stagger_ns: 10,
            channel_delay_ns: 100,
            convergence_tol: None,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n_points < 2 || !self.n_points.is_multiple_of(2) {
            return fail("n_points must be a positive even number");
        }
        if !(self.std >= 0.0 && self.std.is_finite()) {
            return fail("std must be finite and non-negative");
        }
        if self.max_iters == 0 {
            return fail("max_iters must be positive");
        }
        if self.convergence_tol.is_some_and(|t| !(t >= 0.0)) {
            return fail("convergence_tol must be non-negative");
        }
        Ok(())
    }

    /// Pairs actually available per direction per iteration.
    pub fn effective_pairs(&self) -> usize {
        self.pairs_per_iteration.min(self.memory_capacity)
    }
}

/// `n/2` Gaussian points around each center, shuffled.
pub fn generate_dataset(config: &ClusterConfig, seed: u64) -> Dataset {
    let mut rng = rng::rng_for(seed, stream::DATASET, 0);
    let mut tagged: Vec<(Point, u8)> = Vec::with_capacity(config.n_points);
    let per_center = config.n_points / 2;
    for (label, center) in config.centers.iter().enumerate() {
        for _ in 0..per_center {
            let p = if config.std == 0.0 {
                *center
            } else {
                let n = Normal::new(0.0, config.std).expect("validated std");
                [center[0] + n.sample(&mut rng), center[1] + n.sample(&mut rng)]
            };
            tagged.push((p, label as u8));
        }
    }
    tagged.shuffle(&mut rng);
    Dataset { points: tagged.iter().map(|t| t.0).collect(), truth: tagged.iter().map(|t| t.1).collect() }
}

fn dist2(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1])
}

/// Nearest-centroid labels for `indices`; ties go to centroid 0.
pub fn kmeans_iteration(points: &[Point], centroids: &[Point; 2], indices: &[usize]) -> Vec<u8> {
    indices.iter().map(|&i| u8::from(dist2(&points[i], &centroids[1]) < dist2(&points[i], &centroids[0]))).collect()
}

/// Mean of each label class; an empty class keeps its previous centroid.
pub fn update_centroids(points: &[Point], labels: &[u8], previous: &[Point; 2]) -> [Point; 2] {
    let mut sum = [[0.0; 2]; 2];
    let mut count = [0usize; 2];
    for (p, &l) in points.iter().zip(labels) {
        let k = usize::from(l);
        sum[k][0] += p[0];
        sum[k][1] += p[1];
        count[k] += 1;
    }
    let mut out = *previous;
    for k in 0..2 {
        if count[k] > 0 {
            out[k] = [sum[k][0] / count[k] as f64, sum[k][1] / count[k] as f64];
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exchange {
    pub received: Vec<u8>,
    pub transmissions: u64,
    pub assisted_chunks: u64,
}

/// Sends `labels` with up to `pairs` superdense chunks, the rest as plain bits.
///
/// `pair_ages[j]` is the storage time of the pair used for chunk `j`; both
/// halves age by that amount before the receiver measures.
pub fn exchange_labels<R: rand::Rng + ?Sized>(
    labels: &[u8],
    pair_ages: &[u64],
    noise: &NoiseParams,
    rng: &mut R,
) -> Exchange {
    let m = labels.len();
    let chunks = pair_ages.len().min(m.div_ceil(2));
    let mut received = Vec::with_capacity(m);
    for (j, &age) in pair_ages.iter().take(chunks).enumerate() {
        let high = labels[2 * j] != 0;
        let low = labels.get(2 * j + 1).is_some_and(|&l| l != 0);
        let record = EprRecord::fresh(j as u64, 0);
        let qubit = encode_for_send(record, Symbol::from_bits(high, low), age, noise);
        let symbol = receive_and_decode(&qubit, age, noise, rng);
        received.push(u8::from(symbol.high()));
        if 2 * j + 1 < m {
            received.push(u8::from(symbol.low()));
        }
    }
    let covered = received.len();
    received.extend_from_slice(&labels[covered..]);
    Exchange { received, transmissions: (chunks + (m - covered)) as u64, assisted_chunks: chunks as u64 }
}

/// Ages of the pairs used for each chunk: pair `i` of `n` is generated at
/// `start - gap - (n - i) * stagger`, consumed newest first, chunk `j` sent at
/// `start + j * stagger`.
pub fn pair_ages(config: &ClusterConfig) -> Vec<u64> {
    let n = config.effective_pairs() as u64;
    (0..n)
        .map(|j| {
            let i = n - 1 - j;
            config.processing_gap_ns + (n - i) * config.generation_stagger_ns + j * config.generation_stagger_ns
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub iteration: usize,
    pub transmissions: u64,
    pub assisted_chunks: u64,
    /// Received labels differing from what was sent, both directions.
    pub label_errors: u64,
    pub centroids: [[Point; 2]; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRun {
    pub total_transmissions: u64,
    pub f1: f64,
    /// Both final label vectors were all zeros, so F1 is 0 by convention.
    pub degenerate_f1: bool,
    pub labels: [Vec<u8>; 2],
    pub iterations: Vec<IterationTrace>,
}

/// Full two-party protocol on a fresh dataset for `seed`.
pub fn run_distributed_kmeans(config: &ClusterConfig, seed: u64) -> Result<ClusterRun, Error> {
    config.validate()?;
    let data = generate_dataset(config, seed);
    Ok(run_on_dataset(config, &data, seed))
}

pub fn run_on_dataset(config: &ClusterConfig, data: &Dataset, seed: u64) -> ClusterRun {
    let n = data.points.len();
    let half = n / 2;
    let sets: [Vec<usize>; 2] = [(0..half).collect(), (half..n).collect()];
    let mut labels = [alloc::vec![0u8; n], alloc::vec![0u8; n]];
    let mut centroids = [config.initial_centroids; 2];
    let ages = pair_ages(config);
    let mut iterations = Vec::new();
    let mut total = 0;

    for it in 0..config.max_iters {
        let own = |party: usize| &sets[(party + it) % 2];
        let partial: [Vec<u8>; 2] = [0, 1].map(|p| kmeans_iteration(&data.points, &centroids[p], own(p)));
        let mut trace = IterationTrace {
            iteration: it,
            transmissions: 0,
            assisted_chunks: 0,
            label_errors: 0,
            centroids: [[[0.0; 2]; 2]; 2],
        };
        for sender in 0..2 {
            let receiver = 1 - sender;
            let mut rng = rng::rng_for(seed, stream::MEASUREMENT, (it * 2 + sender) as u64);
            let ex = exchange_labels(&partial[sender], &ages, &config.noise, &mut rng);
            trace.transmissions += ex.transmissions;
            trace.assisted_chunks += ex.assisted_chunks;
            trace.label_errors += ex.received.iter().zip(&partial[sender]).filter(|(a, b)| a != b).count() as u64;
            for (k, &idx) in own(sender).iter().enumerate() {
                labels[sender][idx] = partial[sender][k];
                labels[receiver][idx] = ex.received[k];
            }
        }
        let before = centroids;
        for p in 0..2 {
            centroids[p] = update_centroids(&data.points, &labels[p], &centroids[p]);
        }
        trace.centroids = centroids;
        total += trace.transmissions;
        iterations.push(trace);
        if let Some(tol) = config.convergence_tol {
            let moved = (0..2)
                .flat_map(|p| (0..2).map(move |k| (p, k)))
                .map(|(p, k)| libm::sqrt(dist2(&before[p][k], &centroids[p][k])))
                .fold(0.0, f64::max);
            if moved < tol {
                break;
            }
        }
    }

    let (f1, degenerate_f1) = f1_with_flag(&labels[0], &labels[1]);
    ClusterRun { total_transmissions: total, f1, degenerate_f1, labels, iterations }
}

/// F1 of `b` against reference `a` with label 1 as the positive class.
pub fn f1_score(a: &[u8], b: &[u8]) -> f64 {
    f1_with_flag(a, b).0
}

fn f1_with_flag(a: &[u8], b: &[u8]) -> (f64, bool) {
    assert_eq!(a.len(), b.len(), "label vectors differ in length");
    assert!(!a.is_empty(), "label vectors are empty");
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&x, &y) in a.iter().zip(b) {
        match (x != 0, y != 0) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return (0.0, fp == 0 && fn_ == 0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    (2.0 * precision * recall / (precision + recall), false)
}
