//! Sweep expansion, seeded parallel execution and aggregation.
//!
//! Each run's seed is `derive_seed(master_seed, fnv1a(key), seed_index)`
//! where `key` names the traffic-defining coordinates of the point
//! (`"p2p|r=0.25|L=4"`, `"network|r=0.25|L=4"`, `"cluster"`). Noise, policy
//! and buffer size are left out of the key so that curves being compared see
//! identical traffic, and adding sweep values never changes existing seeds.

use gewi_core::cluster::{run_distributed_kmeans, ClusterConfig};
use gewi_core::link::{run_link, LinkConfig, RunMetrics, TransmissionRecord};
use gewi_core::network::{run_network, NetworkMetrics, Topology};
use gewi_core::qcore::NoiseParams;
use gewi_core::rng::derive_seed;
use rayon::prelude::*;

use crate::config::{
    ClusterScenario, LinkSweep, NetworkScenario, NoiseSetting, P2pScenario, Policy, Scenario, ScenarioConfig,
    ScenarioKind,
};
use crate::error::Result;

/// Sample mean and standard deviation (n − 1 denominator, 0 for one sample).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, std }
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(key: &str) -> u64 {
    key.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn run_seed(master_seed: u64, key: &str, seed_index: usize) -> u64 {
    derive_seed(master_seed, fnv1a(key), seed_index as u64)
}

/// One curve of a point-to-point or network sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSeries {
    /// `None` for the entanglement-free baseline.
    pub noise: Option<NoiseSetting>,
    pub policy: Option<Policy>,
    pub ebuf_capacity: usize,
    pub buffer_bits: usize,
}

impl LinkSeries {
    pub fn is_classical(&self) -> bool {
        self.noise.is_none()
    }

    pub fn label(&self) -> String {
        match (&self.noise, &self.policy) {
            (Some(n), Some(p)) => format!("{} {} E={} L={}", n.label, p.name(), self.ebuf_capacity, self.buffer_bits),
            _ => format!("classical L={}", self.buffer_bits),
        }
    }

    pub fn noise_label(&self) -> &str {
        self.noise.as_ref().map_or("classical", |n| n.label.as_str())
    }

    pub fn policy_name(&self) -> &str {
        self.policy.as_ref().map_or("none", |p| p.name())
    }

    fn noise_params(&self) -> NoiseParams {
        self.noise.as_ref().map_or(NoiseParams::perfect(), |n| n.params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPoint {
    pub series: usize,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSummary {
    pub point: usize,
    pub runs: usize,
    pub error: Stat,
    pub throughput: Stat,
    pub delivered: Stat,
}

#[derive(Debug, Clone)]
pub struct P2pRun {
    pub point: usize,
    pub seed_index: usize,
    pub seed: u64,
    pub metrics: RunMetrics,
    /// Kept for the first seed of each point when tracing is enabled.
    pub trace: Option<Vec<TransmissionRecord>>,
}

#[derive(Debug, Clone)]
pub struct NetworkRunRow {
    pub point: usize,
    pub seed_index: usize,
    pub seed: u64,
    pub metrics: NetworkMetrics,
}

#[derive(Debug, Clone)]
pub struct LinkResults<R> {
    pub series: Vec<LinkSeries>,
    pub points: Vec<LinkPoint>,
    pub runs: Vec<R>,
    pub summary: Vec<LinkSummary>,
}

impl<R> LinkResults<R> {
    /// Summary rows of one series, in r order.
    pub fn series_summary(&self, series: usize) -> impl Iterator<Item = (f64, &LinkSummary)> {
        self.summary.iter().filter(move |s| self.points[s.point].series == series).map(|s| (self.points[s.point].r, s))
    }

    pub fn find_series(&self, label: &str) -> Option<usize> {
        self.series.iter().position(|s| s.label() == label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPoint {
    pub noise: NoiseSetting,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRunRow {
    pub point: usize,
    pub seed_index: usize,
    pub seed: u64,
    pub transmissions: u64,
    pub f1: f64,
    pub degenerate_f1: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterSummary {
    pub point: usize,
    pub runs: usize,
    pub f1: Stat,
    pub transmissions: Stat,
}

#[derive(Debug, Clone)]
pub struct ClusterResults {
    pub points: Vec<ClusterPoint>,
    pub runs: Vec<ClusterRunRow>,
    pub summary: Vec<ClusterSummary>,
}

#[derive(Debug, Clone)]
pub enum SweepResults {
    P2p(LinkResults<P2pRun>),
    Network(LinkResults<NetworkRunRow>),
    Cluster(ClusterResults),
}

/// Runs every point × seed of the scenario. Output order depends only on
/// the configuration, never on thread scheduling.
pub fn run_sweep(config: &ScenarioConfig) -> Result<SweepResults> {
    match config.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            pool.install(|| run_sweep_here(config))
        }
        None => run_sweep_here(config),
    }
}

fn run_sweep_here(config: &ScenarioConfig) -> Result<SweepResults> {
    Ok(match &config.scenario {
        Scenario::PointToPoint(p) => SweepResults::P2p(run_p2p(config, p)?),
        Scenario::Network(n) => SweepResults::Network(run_net(config, n)?),
        Scenario::Clustering(c) => SweepResults::Cluster(run_cluster(config, c)?),
    })
}

pub fn expand_link_sweep(sweep: &LinkSweep) -> (Vec<LinkSeries>, Vec<LinkPoint>) {
    let mut series = Vec::new();
    for &l in &sweep.buffer_bits {
        for noise in &sweep.noise {
            for &policy in &sweep.policies {
                for &e in &sweep.ebuf_capacity {
                    series.push(LinkSeries {
                        noise: Some(noise.clone()),
                        policy: Some(policy),
                        ebuf_capacity: e,
                        buffer_bits: l,
                    });
                }
            }
        }
    }
    if sweep.classical_baseline {
        for &l in &sweep.buffer_bits {
            series.push(LinkSeries { noise: None, policy: None, ebuf_capacity: 0, buffer_bits: l });
        }
    }
    let points = (0..series.len()).flat_map(|s| sweep.r.iter().map(move |&r| LinkPoint { series: s, r })).collect();
    (series, points)
}

fn point_key(kind: ScenarioKind, point: &LinkPoint, series: &LinkSeries) -> String {
    format!("{kind}|r={}|L={}", point.r, series.buffer_bits)
}

pub fn link_config_for(base: &LinkConfig, series: &LinkSeries, r: f64) -> LinkConfig {
    let policy = series.policy.unwrap_or(Policy::parse("filo").expect("known policy"));
    LinkConfig {
        arrival_prob: r,
        noise: series.noise_params(),
        overflow: policy.overflow,
        consume: policy.consume,
        ebuf_capacity: series.ebuf_capacity,
        buffer_bits: series.buffer_bits,
        ..base.clone()
    }
}

pub fn topology_for(base: &Topology, series: &LinkSeries, r: f64) -> Topology {
    let policy = series.policy.unwrap_or(Policy::parse("filo").expect("known policy"));
    let mut t = Topology { arrival_prob: r, source_buffer_bits: series.buffer_bits, ..base.clone() };
    for l in &mut t.links {
        l.params.ebuf_capacity = series.ebuf_capacity;
        l.params.noise = series.noise_params();
        l.params.overflow = policy.overflow;
        l.params.consume = policy.consume;
    }
    t
}

fn jobs(points: usize, seeds: usize) -> Vec<(usize, usize)> {
    (0..points).flat_map(|p| (0..seeds).map(move |s| (p, s))).collect()
}

fn summarize_link<R>(
    points: usize,
    runs: &[R],
    point_of: impl Fn(&R) -> usize,
    values: impl Fn(&R) -> (f64, f64, f64),
) -> Vec<LinkSummary> {
    (0..points)
        .map(|p| {
            let v: Vec<(f64, f64, f64)> = runs.iter().filter(|r| point_of(r) == p).map(&values).collect();
            LinkSummary {
                point: p,
                runs: v.len(),
                error: Stat::of(&v.iter().map(|x| x.0).collect::<Vec<_>>()),
                throughput: Stat::of(&v.iter().map(|x| x.1).collect::<Vec<_>>()),
                delivered: Stat::of(&v.iter().map(|x| x.2).collect::<Vec<_>>()),
            }
        })
        .collect()
}

fn run_p2p(config: &ScenarioConfig, scenario: &P2pScenario) -> Result<LinkResults<P2pRun>> {
    let (series, points) = expand_link_sweep(&scenario.sweep);
    for p in &points {
        link_config_for(&scenario.base, &series[p.series], p.r).validate()?;
    }
    let runs: Vec<P2pRun> = jobs(points.len(), config.seeds_per_point)
        .into_par_iter()
        .map(|(pi, si)| {
            let point = &points[pi];
            let s = &series[point.series];
            let seed = run_seed(config.master_seed, &point_key(ScenarioKind::P2p, point, s), si);
            let run = run_link(&link_config_for(&scenario.base, s, point.r), seed).expect("validated above");
            let trace = (scenario.trace && si == 0).then_some(run.trace);
            P2pRun { point: pi, seed_index: si, seed, metrics: run.metrics, trace }
        })
        .collect();
    let summary = summarize_link(
        points.len(),
        &runs,
        |r| r.point,
        |r| (r.metrics.message_error_rate(), r.metrics.throughput(), r.metrics.summary.delivered as f64),
    );
    Ok(LinkResults { series, points, runs, summary })
}

fn run_net(config: &ScenarioConfig, scenario: &NetworkScenario) -> Result<LinkResults<NetworkRunRow>> {
    let (series, points) = expand_link_sweep(&scenario.sweep);
    for p in &points {
        topology_for(&scenario.base, &series[p.series], p.r).validate()?;
    }
    let runs: Vec<NetworkRunRow> = jobs(points.len(), config.seeds_per_point)
        .into_par_iter()
        .map(|(pi, si)| {
            let point = &points[pi];
            let s = &series[point.series];
            let seed = run_seed(config.master_seed, &point_key(ScenarioKind::Network, point, s), si);
            let run = run_network(&topology_for(&scenario.base, s, point.r), seed).expect("validated above");
            NetworkRunRow { point: pi, seed_index: si, seed, metrics: run.metrics }
        })
        .collect();
    let summary = summarize_link(
        points.len(),
        &runs,
        |r| r.point,
        |r| (r.metrics.message_error_rate(), r.metrics.throughput(), r.metrics.summary.delivered as f64),
    );
    Ok(LinkResults { series, points, runs, summary })
}

pub fn cluster_config_for(base: &ClusterConfig, point: &ClusterPoint) -> ClusterConfig {
    ClusterConfig { pairs_per_iteration: point.pairs, noise: point.noise.params, ..base.clone() }
}

fn run_cluster(config: &ScenarioConfig, scenario: &ClusterScenario) -> Result<ClusterResults> {
    let points: Vec<ClusterPoint> = scenario
        .noise
        .iter()
        .flat_map(|n| scenario.pairs.iter().map(move |&pairs| ClusterPoint { noise: n.clone(), pairs }))
        .collect();
    for p in &points {
        cluster_config_for(&scenario.base, p).validate()?;
    }
    let runs: Vec<ClusterRunRow> = jobs(points.len(), config.seeds_per_point)
        .into_par_iter()
        .map(|(pi, si)| {
            let seed = run_seed(config.master_seed, "cluster", si);
            let run = run_distributed_kmeans(&cluster_config_for(&scenario.base, &points[pi]), seed)
                .expect("validated above");
            ClusterRunRow {
                point: pi,
                seed_index: si,
                seed,
                transmissions: run.total_transmissions,
                f1: run.f1,
                degenerate_f1: run.degenerate_f1,
                iterations: run.iterations.len(),
            }
        })
        .collect();
    let summary = (0..points.len())
        .map(|p| {
            let rows: Vec<&ClusterRunRow> = runs.iter().filter(|r| r.point == p).collect();
            ClusterSummary {
                point: p,
                runs: rows.len(),
                f1: Stat::of(&rows.iter().map(|r| r.f1).collect::<Vec<_>>()),
                transmissions: Stat::of(&rows.iter().map(|r| r.transmissions as f64).collect::<Vec<_>>()),
            }
        })
        .collect();
    Ok(ClusterResults { points, runs, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_values() {
        assert_eq!(Stat::of(&[]), Stat::default());
        assert_eq!(Stat::of(&[3.0]), Stat { mean: 3.0, std: 0.0 });
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a("a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a("foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn seeds_ignore_policy_and_noise() {
        let base = LinkSeries { noise: None, policy: None, ebuf_capacity: 0, buffer_bits: 4 };
        let other = LinkSeries {
            noise: Some(NoiseSetting::preset("11/10").unwrap()),
            policy: Some(Policy::parse("fifo").unwrap()),
            ebuf_capacity: 10,
            buffer_bits: 4,
        };
        let p = LinkPoint { series: 0, r: 0.25 };
        assert_eq!(point_key(ScenarioKind::P2p, &p, &base), point_key(ScenarioKind::P2p, &p, &other));
        assert_eq!(point_key(ScenarioKind::P2p, &p, &base), "p2p|r=0.25|L=4");
    }

    #[test]
    fn sweep_shape() {
        let mut c = ScenarioConfig::defaults(ScenarioKind::P2p);
        let Scenario::PointToPoint(p) = &mut c.scenario else { panic!() };
        p.sweep.r = (1..=10).map(|i| i as f64 / 10.0).collect();
        p.sweep.classical_baseline = false;
        let (series, points) = expand_link_sweep(&p.sweep);
        assert_eq!(series.len(), 3);
        assert_eq!(points.len() * c.seeds_per_point, 300);
        assert_eq!(jobs(points.len(), c.seeds_per_point).len(), 300);
    }
}
