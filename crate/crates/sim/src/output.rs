//! CSV exports. File names carry the schema version; a column change bumps it.

use std::fs;
use std::path::{Path, PathBuf};

use gewi_core::link::Mode;
use serde::Serialize;

use crate::config::{Scenario, ScenarioConfig};
use crate::error::{Result, SimError};
use crate::plot;
use crate::sweep::{ClusterResults, LinkResults, LinkSeries, NetworkRunRow, P2pRun, SweepResults};

pub const SCHEMA_VERSION: &str = "v1";

/// Builds a row struct whose first columns describe the series.
macro_rules! series_row {
    ($ty:ident, $s:expr, { $($field:ident: $value:expr),* $(,)? }) => {{
        let s: &LinkSeries = $s;
        $ty {
            series: s.label(),
            noise: s.noise_label(),
            t1_ns: s.noise.as_ref().map(|n| n.params.t1()),
            t2_ns: s.noise.as_ref().map(|n| n.params.t2()),
            policy: s.policy_name(),
            ebuf_capacity: s.ebuf_capacity,
            buffer_bits: s.buffer_bits,
            $($field: $value),*
        }
    }};
}

#[derive(Serialize)]
struct P2pRunRow<'a> {
    series: String,
    noise: &'a str,
    t1_ns: Option<f64>,
    t2_ns: Option<f64>,
    policy: &'a str,
    ebuf_capacity: usize,
    buffer_bits: usize,
    r: f64,
    seed_index: usize,
    seed: u64,
    offered: u64,
    accepted: u64,
    dropped: u64,
    delivered: u64,
    errored: u64,
    message_error_rate: f64,
    throughput_bits_per_tick: f64,
    throughput_bits_per_sec: f64,
    assisted_messages: u64,
    plain_messages: u64,
    pairs_generated: u64,
    pairs_consumed: u64,
    pairs_evicted: u64,
    pairs_rejected: u64,
    pairs_remaining: u64,
}

#[derive(Serialize)]
struct NetworkRunCsv<'a> {
    series: String,
    noise: &'a str,
    t1_ns: Option<f64>,
    t2_ns: Option<f64>,
    policy: &'a str,
    ebuf_capacity: usize,
    buffer_bits: usize,
    r: f64,
    seed_index: usize,
    seed: u64,
    offered: u64,
    accepted: u64,
    dropped: u64,
    relay_drops: u64,
    delivered: u64,
    errored: u64,
    message_error_rate: f64,
    throughput_bits_per_tick: f64,
    throughput_bits_per_sec: f64,
    assisted_uses: u64,
    plain_uses: u64,
}

#[derive(Serialize)]
struct NetworkLinkCsv<'a> {
    series: String,
    r: f64,
    seed_index: usize,
    link: usize,
    from: &'a str,
    to: &'a str,
    assisted_uses: u64,
    plain_uses: u64,
    pairs_generated: u64,
    pairs_consumed: u64,
    pairs_evicted: u64,
    pairs_rejected: u64,
    pairs_remaining: u64,
}

#[derive(Serialize)]
struct LinkSummaryCsv<'a> {
    series: String,
    noise: &'a str,
    t1_ns: Option<f64>,
    t2_ns: Option<f64>,
    policy: &'a str,
    ebuf_capacity: usize,
    buffer_bits: usize,
    r: f64,
    runs: usize,
    error_mean: f64,
    error_std: f64,
    throughput_mean: f64,
    throughput_std: f64,
    delivered_mean: f64,
}

#[derive(Serialize)]
struct TraceCsv<'a> {
    series: String,
    r: f64,
    seed: u64,
    seq: u64,
    send_tick: u64,
    arrival_time_ns: u64,
    mode: &'a str,
    pair_ids: String,
    sender_ages_ns: String,
    receiver_ages_ns: String,
    error: bool,
}

#[derive(Serialize)]
struct ClusterRunCsv<'a> {
    noise: &'a str,
    t1_ns: f64,
    t2_ns: f64,
    pairs_per_iteration: usize,
    seed_index: usize,
    seed: u64,
    transmissions: u64,
    f1: f64,
    f1_degenerate: bool,
    iterations: usize,
}

#[derive(Serialize)]
struct ClusterSummaryCsv<'a> {
    noise: &'a str,
    t1_ns: f64,
    t2_ns: f64,
    pairs_per_iteration: usize,
    runs: usize,
    f1_mean: f64,
    f1_std: f64,
    transmissions_mean: f64,
    transmissions_std: f64,
}

fn file_name(stem: &str) -> String {
    format!("{stem}.{SCHEMA_VERSION}.csv")
}

fn write_rows<T: Serialize>(dir: &Path, stem: &str, rows: impl IntoIterator<Item = T>) -> Result<PathBuf> {
    let path = dir.join(file_name(stem));
    let file = fs::File::create(&path).map_err(|source| SimError::Io { path: path.clone(), source })?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| SimError::Io { path: path.clone(), source })?;
    Ok(path)
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

/// Writes every CSV for the results, plus SVG charts when `plots` is set.
/// Returns the paths written, in a fixed order.
pub fn emit_outputs(config: &ScenarioConfig, results: &SweepResults, dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| SimError::Io { path: dir.into(), source })?;
    let mut written = Vec::new();
    match results {
        SweepResults::P2p(res) => {
            written.push(write_p2p_runs(dir, res)?);
            written.push(write_link_summary(dir, "p2p_summary", res)?);
            if res.runs.iter().any(|r| r.trace.is_some()) {
                written.push(write_trace(dir, res)?);
            }
            if plots {
                written.extend(plot::link_plots(dir, "p2p", "Point-to-point", res)?);
            }
        }
        SweepResults::Network(res) => {
            let Scenario::Network(scenario) = &config.scenario else {
                return Err(SimError::Config("network results need a network scenario".into()));
            };
            written.push(write_network_runs(dir, res)?);
            written.push(write_network_links(dir, res, &scenario.base)?);
            written.push(write_link_summary(dir, "network_summary", res)?);
            if plots {
                written.extend(plot::link_plots(dir, "network", "Diamond network", res)?);
            }
        }
        SweepResults::Cluster(res) => {
            written.extend(write_cluster(dir, res)?);
            if plots {
                written.push(plot::cluster_plot(dir, res)?);
            }
        }
    }
    Ok(written)
}

fn write_p2p_runs(dir: &Path, res: &LinkResults<P2pRun>) -> Result<PathBuf> {
    write_rows(
        dir,
        "p2p_runs",
        res.runs.iter().map(|run| {
            let point = &res.points[run.point];
            let m = &run.metrics;
            series_row!(P2pRunRow, &res.series[point.series], {
                r: point.r,
                seed_index: run.seed_index,
                seed: run.seed,
                offered: m.offered,
                accepted: m.accepted,
                dropped: m.dropped,
                delivered: m.summary.delivered,
                errored: m.summary.errored,
                message_error_rate: m.summary.message_error_rate,
                throughput_bits_per_tick: m.summary.throughput_bits_per_tick,
                throughput_bits_per_sec: m.summary.throughput_bits_per_sec,
                assisted_messages: m.assisted_messages,
                plain_messages: m.plain_messages,
                pairs_generated: m.pairs_generated,
                pairs_consumed: m.pairs_consumed,
                pairs_evicted: m.pairs_evicted,
                pairs_rejected: m.pairs_rejected,
                pairs_remaining: m.pairs_remaining,
            })
        }),
    )
}

fn write_trace(dir: &Path, res: &LinkResults<P2pRun>) -> Result<PathBuf> {
    let rows = res.runs.iter().filter_map(|run| run.trace.as_ref().map(|t| (run, t))).flat_map(|(run, trace)| {
        let point = &res.points[run.point];
        let label = res.series[point.series].label();
        trace.iter().map(move |rec| TraceCsv {
            series: label.clone(),
            r: point.r,
            seed: run.seed,
            seq: rec.seq,
            send_tick: rec.send_tick,
            arrival_time_ns: rec.arrival_time,
            mode: match rec.mode() {
                Some(Mode::Assisted) => "assisted",
                Some(Mode::Plain) => "plain",
                None => "mixed",
            },
            pair_ids: join(&rec.pair_ids),
            sender_ages_ns: join(&rec.sender_ages),
            receiver_ages_ns: join(&rec.receiver_ages),
            error: rec.is_error(),
        })
    });
    write_rows(dir, "p2p_trace", rows)
}

fn write_link_summary<R>(dir: &Path, stem: &str, res: &LinkResults<R>) -> Result<PathBuf> {
    write_rows(
        dir,
        stem,
        res.summary.iter().map(|s| {
            let point = &res.points[s.point];
            series_row!(LinkSummaryCsv, &res.series[point.series], {
                r: point.r,
                runs: s.runs,
                error_mean: s.error.mean,
                error_std: s.error.std,
                throughput_mean: s.throughput.mean,
                throughput_std: s.throughput.std,
                delivered_mean: s.delivered.mean,
            })
        }),
    )
}

fn write_network_runs(dir: &Path, res: &LinkResults<NetworkRunRow>) -> Result<PathBuf> {
    write_rows(
        dir,
        "network_runs",
        res.runs.iter().map(|run| {
            let point = &res.points[run.point];
            let m = &run.metrics;
            series_row!(NetworkRunCsv, &res.series[point.series], {
                r: point.r,
                seed_index: run.seed_index,
                seed: run.seed,
                offered: m.offered,
                accepted: m.accepted,
                dropped: m.dropped,
                relay_drops: m.relay_drops,
                delivered: m.summary.delivered,
                errored: m.summary.errored,
                message_error_rate: m.summary.message_error_rate,
                throughput_bits_per_tick: m.summary.throughput_bits_per_tick,
                throughput_bits_per_sec: m.summary.throughput_bits_per_sec,
                assisted_uses: m.per_link.iter().map(|l| l.assisted_uses).sum(),
                plain_uses: m.per_link.iter().map(|l| l.plain_uses).sum(),
            })
        }),
    )
}

fn write_network_links(
    dir: &Path,
    res: &LinkResults<NetworkRunRow>,
    topo: &gewi_core::network::Topology,
) -> Result<PathBuf> {
    let rows = res.runs.iter().flat_map(|run| {
        let point = &res.points[run.point];
        let label = res.series[point.series].label();
        run.metrics.per_link.iter().enumerate().map(move |(i, l)| {
            let spec = &topo.links[i];
            NetworkLinkCsv {
                series: label.clone(),
                r: point.r,
                seed_index: run.seed_index,
                link: i,
                from: &topo.nodes[spec.from].name,
                to: &topo.nodes[spec.to].name,
                assisted_uses: l.assisted_uses,
                plain_uses: l.plain_uses,
                pairs_generated: l.pairs_generated,
                pairs_consumed: l.pairs_consumed,
                pairs_evicted: l.pairs_evicted,
                pairs_rejected: l.pairs_rejected,
                pairs_remaining: l.pairs_remaining,
            }
        })
    });
    write_rows(dir, "network_links", rows)
}

fn write_cluster(dir: &Path, res: &ClusterResults) -> Result<Vec<PathBuf>> {
    let runs = write_rows(
        dir,
        "cluster_runs",
        res.runs.iter().map(|run| {
            let p = &res.points[run.point];
            ClusterRunCsv {
                noise: &p.noise.label,
                t1_ns: p.noise.params.t1(),
                t2_ns: p.noise.params.t2(),
                pairs_per_iteration: p.pairs,
                seed_index: run.seed_index,
                seed: run.seed,
                transmissions: run.transmissions,
                f1: run.f1,
                f1_degenerate: run.degenerate_f1,
                iterations: run.iterations,
            }
        }),
    )?;
    let summary = write_rows(
        dir,
        "cluster_summary",
        res.summary.iter().map(|s| {
            let p = &res.points[s.point];
            ClusterSummaryCsv {
                noise: &p.noise.label,
                t1_ns: p.noise.params.t1(),
                t2_ns: p.noise.params.t2(),
                pairs_per_iteration: p.pairs,
                runs: s.runs,
                f1_mean: s.f1.mean,
                f1_std: s.f1.std,
                transmissions_mean: s.transmissions.mean,
                transmissions_std: s.transmissions.std,
            }
        }),
    )?;
    Ok(vec![runs, summary])
}
