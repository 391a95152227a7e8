//! Scenario files.
//!
//! A scenario is a TOML document. Every key is optional except `scenario`;
//! unknown keys are rejected. See `docs/config.md` for the schema.

use std::fmt;
use std::path::{Path, PathBuf};

use gewi_core::buffers::{ConsumePolicy, OverflowPolicy};
use gewi_core::cluster::ClusterConfig;
use gewi_core::link::LinkConfig;
use gewi_core::network::{LinkParams, LinkSpec, NodeSpec, Role, Topology};
use gewi_core::qcore::NoiseParams;
use serde::Deserialize;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    P2p,
    Network,
    Cluster,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::P2p => "p2p",
            ScenarioKind::Network => "network",
            ScenarioKind::Cluster => "cluster",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A labelled memory model.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSetting {
    pub label: String,
    pub params: NoiseParams,
}

impl NoiseSetting {
    pub const PRESETS: [(&'static str, f64, f64); 5] = [
        ("11/10", 11.0, 10.0),
        ("110/100", 110.0, 100.0),
        ("1100/1000", 1100.0, 1000.0),
        ("1ms", 1e6, 1e6),
        ("10ms", 1e7, 1e7),
    ];

    pub fn preset(name: &str) -> Result<Self> {
        if name == "perfect" {
            return Ok(Self { label: name.into(), params: NoiseParams::perfect() });
        }
        let (_, t1, t2) = Self::PRESETS.iter().find(|(n, _, _)| *n == name).ok_or_else(|| {
            SimError::Config(format!("unknown noise preset {name:?}; known: perfect, {}", Self::preset_names()))
        })?;
        Ok(Self { label: name.into(), params: NoiseParams::new(*t1, *t2)? })
    }

    pub fn custom(t1_ns: f64, t2_ns: f64) -> Result<Self> {
        let params = NoiseParams::new(t1_ns, t2_ns)?;
        Ok(Self { label: format!("{t1_ns}/{t2_ns}"), params })
    }

    fn preset_names() -> String {
        Self::PRESETS.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")
    }
}

/// Overflow and consumption policy pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Policy {
    pub overflow: OverflowPolicy,
    pub consume: ConsumePolicy,
}

impl Policy {
    pub fn parse(name: &str) -> Result<Self> {
        let (overflow, consume) = match name {
            "filo" => (OverflowPolicy::DropNew, ConsumePolicy::Filo),
            "fifo" => (OverflowPolicy::DropNew, ConsumePolicy::Fifo),
            "filo-replace" => (OverflowPolicy::ReplaceOldest, ConsumePolicy::Filo),
            "fifo-replace" => (OverflowPolicy::ReplaceOldest, ConsumePolicy::Fifo),
            _ => {
                return Err(SimError::Config(format!(
                    "unknown policy {name:?}; known: filo, fifo, filo-replace, fifo-replace"
                )))
            }
        };
        Ok(Self { overflow, consume })
    }

    pub fn name(&self) -> &'static str {
        match (self.overflow, self.consume) {
            (OverflowPolicy::DropNew, ConsumePolicy::Filo) => "filo",
            (OverflowPolicy::DropNew, ConsumePolicy::Fifo) => "fifo",
            (OverflowPolicy::ReplaceOldest, ConsumePolicy::Filo) => "filo-replace",
            (OverflowPolicy::ReplaceOldest, ConsumePolicy::Fifo) => "fifo-replace",
        }
    }
}

/// Axes of a point-to-point or network sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSweep {
    pub r: Vec<f64>,
    pub noise: Vec<NoiseSetting>,
    pub policies: Vec<Policy>,
    pub ebuf_capacity: Vec<usize>,
    pub buffer_bits: Vec<usize>,
    /// Also run every `(r, L)` with no entanglement.
    pub classical_baseline: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct P2pScenario {
    pub base: LinkConfig,
    pub sweep: LinkSweep,
    /// Export per-message traces for the first seed of each point.
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScenario {
    /// Graph and traffic; per-link noise, capacity and policy come from the sweep.
    pub base: Topology,
    pub sweep: LinkSweep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterScenario {
    pub base: ClusterConfig,
    pub pairs: Vec<usize>,
    pub noise: Vec<NoiseSetting>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    PointToPoint(P2pScenario),
    Network(NetworkScenario),
    Clustering(ClusterScenario),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub master_seed: u64,
    pub seeds_per_point: usize,
    /// Worker threads; `None` uses all cores.
    pub workers: Option<usize>,
    pub output_dir: PathBuf,
    pub scenario: Scenario,
}

impl ScenarioConfig {
    pub fn kind(&self) -> ScenarioKind {
        match self.scenario {
            Scenario::PointToPoint(_) => ScenarioKind::P2p,
            Scenario::Network(_) => ScenarioKind::Network,
            Scenario::Clustering(_) => ScenarioKind::Cluster,
        }
    }

    /// Built-in defaults for a scenario kind.
    pub fn defaults(kind: ScenarioKind) -> Self {
        let text = format!("scenario = \"{kind}\"");
        parse_config(&text, "<defaults>").expect("defaults are valid")
    }

    /// Number of sweep points, without baseline duplication.
    pub fn point_count(&self) -> usize {
        match &self.scenario {
            Scenario::PointToPoint(p) => link_point_count(&p.sweep),
            Scenario::Network(n) => link_point_count(&n.sweep),
            Scenario::Clustering(c) => c.pairs.len() * c.noise.len(),
        }
    }

    pub fn set_total_ticks(&mut self, ticks: u64) {
        match &mut self.scenario {
            Scenario::PointToPoint(p) => p.base.total_ticks = ticks,
            Scenario::Network(n) => n.base.total_ticks = ticks,
            Scenario::Clustering(_) => {}
        }
    }
}

fn link_point_count(s: &LinkSweep) -> usize {
    let quantum = s.noise.len() * s.policies.len() * s.ebuf_capacity.len();
    let baseline = usize::from(s.classical_baseline);
    s.r.len() * s.buffer_bits.len() * (quantum + baseline)
}

/// `0.05, 0.10, ..., 1.00` without accumulated rounding.
pub fn default_r_axis() -> Vec<f64> {
    (1..=20).map(|i| (i * 5) as f64 / 100.0).collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: ScenarioKind,
    master_seed: Option<u64>,
    seeds_per_point: Option<usize>,
    workers: Option<usize>,
    output_dir: Option<PathBuf>,
    link: Option<RawLink>,
    network: Option<RawNetwork>,
    cluster: Option<RawCluster>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    tick_period_ns: Option<u64>,
    channel_delay_ns: Option<u64>,
    qubits_per_tick: Option<u32>,
    job_bits: Option<usize>,
    pairs_per_idle_tick: Option<u32>,
    total_ticks: Option<u64>,
    prefill: Option<bool>,
    trace: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    relay_buffer_bits: Option<usize>,
    nodes: Option<Vec<RawNode>>,
    links: Option<Vec<RawNetLink>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    name: String,
    role: RawRole,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawRole {
    Source,
    Relay,
    Sink,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetLink {
    from: String,
    to: String,
    channel_delay_ns: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCluster {
    n_points: Option<usize>,
    std: Option<f64>,
    max_iters: Option<usize>,
    memory_capacity: Option<usize>,
    processing_gap_ns: Option<u64>,
    generation_stagger_ns: Option<u64>,
    channel_delay_ns: Option<u64>,
    convergence_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawNoise {
    Preset(String),
    Custom { t1_ns: f64, t2_ns: f64 },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    r: Option<Vec<f64>>,
    noise: Option<Vec<RawNoise>>,
    policies: Option<Vec<String>>,
    ebuf_capacity: Option<Vec<usize>>,
    buffer_bits: Option<Vec<usize>>,
    classical_baseline: Option<bool>,
    pairs: Option<Vec<usize>>,
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Io { path: path.into(), source })?;
    parse_config(&text, &path.display().to_string())
}

/// Parses and validates a scenario document. `origin` names it in errors.
pub fn parse_config(text: &str, origin: &str) -> Result<ScenarioConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| SimError::Parse { path: origin.into(), message: e.to_string() })?;
    resolve(raw)
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(SimError::Config(msg.into()))
}

fn non_empty<T>(axis: Option<Vec<T>>, name: &str, default: impl FnOnce() -> Vec<T>) -> Result<Vec<T>> {
    match axis {
        Some(v) if v.is_empty() => config_err(format!("sweep axis `{name}` is empty")),
        Some(v) => Ok(v),
        None => Ok(default()),
    }
}

fn resolve_noise(axis: Option<Vec<RawNoise>>, default: &[&str]) -> Result<Vec<NoiseSetting>> {
    let raw = non_empty(axis, "noise", || default.iter().map(|s| RawNoise::Preset((*s).into())).collect())?;
    raw.into_iter()
        .map(|n| match n {
            RawNoise::Preset(name) => NoiseSetting::preset(&name),
            RawNoise::Custom { t1_ns, t2_ns } => NoiseSetting::custom(t1_ns, t2_ns),
        })
        .collect()
}

fn reject_section(present: bool, section: &str, kind: ScenarioKind) -> Result<()> {
    if present {
        return config_err(format!("section [{section}] does not apply to a {kind} scenario"));
    }
    Ok(())
}

fn resolve(raw: RawConfig) -> Result<ScenarioConfig> {
    let kind = raw.scenario;
    let seeds_default = if kind == ScenarioKind::Cluster { 200 } else { 10 };
    let seeds_per_point = raw.seeds_per_point.unwrap_or(seeds_default);
    if seeds_per_point == 0 {
        return config_err("seeds_per_point must be >= 1");
    }
    if raw.workers == Some(0) {
        return config_err("workers must be >= 1 when given");
    }
    let sweep = raw.sweep.unwrap_or_default();

    let scenario = match kind {
        ScenarioKind::P2p | ScenarioKind::Network => {
            reject_section(raw.cluster.is_some(), "cluster", kind)?;
            if sweep.pairs.is_some() {
                return config_err(format!("sweep.pairs does not apply to a {kind} scenario"));
            }
            let link = raw.link.unwrap_or_default();
            let axes = resolve_link_sweep(sweep)?;
            let defaults = LinkConfig::default();
            let base = LinkConfig {
                tick_period_ns: link.tick_period_ns.unwrap_or(defaults.tick_period_ns),
                channel_delay_ns: link.channel_delay_ns.unwrap_or(defaults.channel_delay_ns),
                job_bits: link.job_bits.unwrap_or(defaults.job_bits),
                pairs_per_idle_tick: link.pairs_per_idle_tick.unwrap_or(defaults.pairs_per_idle_tick),
                total_ticks: link.total_ticks.unwrap_or(1_000_000),
                prefill: link.prefill.unwrap_or(false),
                ..defaults
            };
            if kind == ScenarioKind::P2p {
                reject_section(raw.network.is_some(), "network", kind)?;
                let base = LinkConfig { qubits_per_tick: link.qubits_per_tick.unwrap_or(2), ..base };
                for &l in &axes.buffer_bits {
                    LinkConfig { buffer_bits: l, ..base.clone() }.validate()?;
                }
                Scenario::PointToPoint(P2pScenario { base, sweep: axes, trace: link.trace.unwrap_or(false) })
            } else {
                if link.prefill.is_some() || link.trace.is_some() {
                    return config_err("link.prefill and link.trace apply to p2p scenarios only");
                }
                let topo = resolve_topology(raw.network.unwrap_or_default(), &base, link.qubits_per_tick.unwrap_or(1))?;
                for &l in &axes.buffer_bits {
                    Topology { source_buffer_bits: l, ..topo.clone() }.validate()?;
                }
                Scenario::Network(NetworkScenario { base: topo, sweep: axes })
            }
        }
        ScenarioKind::Cluster => {
            reject_section(raw.link.is_some(), "link", kind)?;
            reject_section(raw.network.is_some(), "network", kind)?;
            if sweep.r.is_some()
                || sweep.policies.is_some()
                || sweep.ebuf_capacity.is_some()
                || sweep.buffer_bits.is_some()
                || sweep.classical_baseline.is_some()
            {
                return config_err("a cluster sweep accepts only `pairs` and `noise`");
            }
            let c = raw.cluster.unwrap_or_default();
            let d = ClusterConfig::default();
            let base = ClusterConfig {
                n_points: c.n_points.unwrap_or(d.n_points),
                std: c.std.unwrap_or(d.std),
                max_iters: c.max_iters.unwrap_or(d.max_iters),
                memory_capacity: c.memory_capacity.unwrap_or(d.memory_capacity),
                processing_gap_ns: c.processing_gap_ns.unwrap_or(d.processing_gap_ns),
                generation_stagger_ns: c.generation_stagger_ns.unwrap_or(d.generation_stagger_ns),
                channel_delay_ns: c.channel_delay_ns.unwrap_or(d.channel_delay_ns),
                convergence_tol: c.convergence_tol.or(d.convergence_tol),
                ..d
            };
            base.validate()?;
            let pairs = non_empty(sweep.pairs, "pairs", || vec![0, 25, 50, 75, 100, 125])?;
            let noise = resolve_noise(sweep.noise, &["1ms", "10ms", "1100/1000"])?;
            Scenario::Clustering(ClusterScenario { base, pairs, noise })
        }
    };

    Ok(ScenarioConfig {
        master_seed: raw.master_seed.unwrap_or(1),
        seeds_per_point,
        workers: raw.workers,
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        scenario,
    })
}

fn resolve_link_sweep(s: RawSweep) -> Result<LinkSweep> {
    let r = non_empty(s.r, "r", default_r_axis)?;
    if let Some(bad) = r.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return config_err(format!("sweep.r value {bad} outside [0, 1]"));
    }
    let policies = non_empty(s.policies, "policies", || vec!["filo".into()])?
        .iter()
        .map(|p| Policy::parse(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(LinkSweep {
        r,
        noise: resolve_noise(s.noise, &["11/10", "110/100", "1100/1000"])?,
        policies,
        ebuf_capacity: non_empty(s.ebuf_capacity, "ebuf_capacity", || vec![200])?,
        buffer_bits: non_empty(s.buffer_bits, "buffer_bits", || vec![4])?,
        classical_baseline: s.classical_baseline.unwrap_or(true),
    })
}

fn resolve_topology(raw: RawNetwork, link: &LinkConfig, qubits_per_tick: u32) -> Result<Topology> {
    let params = LinkParams {
        channel_delay_ns: link.channel_delay_ns,
        pairs_per_idle_tick: link.pairs_per_idle_tick,
        ..LinkParams::default()
    };
    let mut topo = Topology::diamond(params.clone());
    match (raw.nodes, raw.links) {
        (None, None) => {}
        (Some(nodes), Some(links)) => {
            let index = |name: &str| {
                nodes
                    .iter()
                    .position(|n| n.name == name)
                    .ok_or_else(|| SimError::Config(format!("link endpoint {name:?} is not a declared node")))
            };
            let mut specs = Vec::with_capacity(links.len());
            for l in &links {
                specs.push(LinkSpec {
                    from: index(&l.from)?,
                    to: index(&l.to)?,
                    params: LinkParams {
                        channel_delay_ns: l.channel_delay_ns.unwrap_or(link.channel_delay_ns),
                        ..params.clone()
                    },
                });
            }
            for (i, n) in nodes.iter().enumerate() {
                if nodes[..i].iter().any(|m| m.name == n.name) {
                    return config_err(format!("duplicate node name {:?}", n.name));
                }
            }
            topo.nodes = nodes
                .into_iter()
                .map(|n| NodeSpec {
                    name: n.name,
                    role: match n.role {
                        RawRole::Source => Role::Source,
                        RawRole::Relay => Role::Relay,
                        RawRole::Sink => Role::Sink,
                    },
                })
                .collect();
            topo.links = specs;
        }
        _ => return config_err("network.nodes and network.links must be given together"),
    }
    topo.tick_period_ns = link.tick_period_ns;
    topo.qubits_per_tick = qubits_per_tick;
    topo.job_bits = link.job_bits;
    topo.source_buffer_bits = link.job_bits;
    topo.relay_buffer_bits = raw.relay_buffer_bits.unwrap_or(64 * link.job_bits);
    topo.total_ticks = link.total_ticks;
    topo.validate()?;
    Ok(topo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_p2p_defaults() {
        let c = parse_config("scenario = \"p2p\"", "t").unwrap();
        let Scenario::PointToPoint(p) = &c.scenario else { panic!() };
        assert_eq!(p.base.tick_period_ns, 10);
        assert_eq!(p.base.channel_delay_ns, 5000);
        assert_eq!((p.base.job_bits, p.sweep.buffer_bits.clone()), (4, vec![4]));
        assert_eq!(p.sweep.ebuf_capacity, vec![200]);
        assert_eq!(p.sweep.r.len(), 20);
        assert_eq!(p.sweep.r[2], 0.15);
        assert_eq!(c.seeds_per_point, 10);
    }

    #[test]
    fn rejects_t2_above_twice_t1() {
        let err =
            parse_config("scenario = \"p2p\"\n[sweep]\nnoise = [{ t1_ns = 10.0, t2_ns = 30.0 }]", "t").unwrap_err();
        assert!(matches!(err, SimError::Config(ref m) if m.contains("2*T1")), "{err}");
    }

    #[test]
    fn rejects_empty_axis() {
        let err = parse_config("scenario = \"p2p\"\n[sweep]\nr = []", "t").unwrap_err();
        assert!(err.to_string().contains("`r` is empty"));
    }

    #[test]
    fn rejects_unknown_keys_with_location() {
        let err = parse_config("scenario = \"p2p\"\n[link]\ntick = 3\n", "cfg.toml").unwrap_err();
        assert_eq!(err.class(), "parse");
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("tick"), "{msg}");
    }

    #[test]
    fn rejects_foreign_sections() {
        assert!(parse_config("scenario = \"cluster\"\n[link]\njob_bits = 4", "t").is_err());
        assert!(parse_config("scenario = \"p2p\"\n[network]\nrelay_buffer_bits = 8", "t").is_err());
        assert!(parse_config("scenario = \"p2p\"\n[sweep]\npairs = [1]", "t").is_err());
    }

    #[test]
    fn custom_network_topology() {
        let text = r#"
scenario = "network"
[network]
nodes = [{ name = "s", role = "source" }, { name = "m", role = "relay" }, { name = "d", role = "sink" }]
links = [{ from = "s", to = "m" }, { from = "m", to = "d", channel_delay_ns = 100 }]
"#;
        let c = parse_config(text, "t").unwrap();
        let Scenario::Network(n) = &c.scenario else { panic!() };
        assert_eq!(n.base.links.len(), 2);
        assert_eq!(n.base.links[1].params.channel_delay_ns, 100);
        assert_eq!(n.base.qubits_per_tick, 1);
        assert_eq!(n.base.relay_buffer_bits, 256);

        let cyclic =
            text.replace("{ from = \"m\", to = \"d\", channel_delay_ns = 100 }", "{ from = \"m\", to = \"s\" }");
        assert!(parse_config(&cyclic, "t").is_err());
    }

    #[test]
    fn cluster_defaults() {
        let c = ScenarioConfig::defaults(ScenarioKind::Cluster);
        let Scenario::Clustering(s) = &c.scenario else { panic!() };
        assert_eq!(c.seeds_per_point, 200);
        assert_eq!(s.base.n_points, 500);
        assert_eq!(s.noise.iter().map(|n| n.label.as_str()).collect::<Vec<_>>(), ["1ms", "10ms", "1100/1000"]);
        assert_eq!(c.point_count(), 18);
    }

    #[test]
    fn policies_and_presets() {
        for name in ["filo", "fifo", "filo-replace", "fifo-replace"] {
            assert_eq!(Policy::parse(name).unwrap().name(), name);
        }
        assert!(Policy::parse("lifo").is_err());
        assert!(NoiseSetting::preset("perfect").unwrap().params.is_perfect());
        assert!(NoiseSetting::preset("5ns").is_err());
    }
}
