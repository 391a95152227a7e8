use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use gewi_sim::config::parse_config;
use gewi_sim::sweep::SweepResults;
use gewi_sim::{emit_outputs, run_sweep, ScenarioConfig};

const P2P: &str = r#"
scenario = "p2p"
master_seed = 42
seeds_per_point = 3
[link]
total_ticks = 4000
trace = true
[sweep]
r = [0.2, 0.6]
noise = ["perfect", "110/100"]
policies = ["filo", "fifo-replace"]
"#;

const NETWORK: &str = r#"
scenario = "network"
seeds_per_point = 2
[link]
total_ticks = 3000
[sweep]
r = [0.3, 0.9]
noise = ["1100/1000"]
ebuf_capacity = [1, 200]
"#;

const CLUSTER: &str = r#"
scenario = "cluster"
seeds_per_point = 4
[sweep]
pairs = [0, 60, 125]
noise = ["10ms", "1100/1000"]
"#;

fn config(text: &str) -> ScenarioConfig {
    parse_config(text, "test").unwrap()
}

fn emit(cfg: &ScenarioConfig, dir: &Path) -> Vec<String> {
    let results = run_sweep(cfg).unwrap();
    emit_outputs(cfg, &results, dir, true)
        .unwrap()
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_owned()
}

#[test]
fn golden_headers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        emit(&config(P2P), d),
        ["p2p_runs.v1.csv", "p2p_summary.v1.csv", "p2p_trace.v1.csv", "p2p_throughput.svg", "p2p_error.svg"]
    );
    assert_eq!(
        header(&d.join("p2p_runs.v1.csv")),
        "series,noise,t1_ns,t2_ns,policy,ebuf_capacity,buffer_bits,r,seed_index,seed,offered,accepted,dropped,\
delivered,errored,message_error_rate,throughput_bits_per_tick,throughput_bits_per_sec,assisted_messages,\
plain_messages,pairs_generated,pairs_consumed,pairs_evicted,pairs_rejected,pairs_remaining"
    );
    assert_eq!(
        header(&d.join("p2p_summary.v1.csv")),
        "series,noise,t1_ns,t2_ns,policy,ebuf_capacity,buffer_bits,r,runs,error_mean,error_std,throughput_mean,\
throughput_std,delivered_mean"
    );
    assert_eq!(
        header(&d.join("p2p_trace.v1.csv")),
        "series,r,seed,seq,send_tick,arrival_time_ns,mode,pair_ids,sender_ages_ns,receiver_ages_ns,error"
    );

    assert_eq!(
        emit(&config(NETWORK), d),
        [
            "network_runs.v1.csv",
            "network_links.v1.csv",
            "network_summary.v1.csv",
            "network_throughput.svg",
            "network_error.svg"
        ]
    );
    assert_eq!(
        header(&d.join("network_runs.v1.csv")),
        "series,noise,t1_ns,t2_ns,policy,ebuf_capacity,buffer_bits,r,seed_index,seed,offered,accepted,dropped,\
relay_drops,delivered,errored,message_error_rate,throughput_bits_per_tick,throughput_bits_per_sec,assisted_uses,\
plain_uses"
    );
    assert_eq!(
        header(&d.join("network_links.v1.csv")),
        "series,r,seed_index,link,from,to,assisted_uses,plain_uses,pairs_generated,pairs_consumed,pairs_evicted,\
pairs_rejected,pairs_remaining"
    );
    assert_eq!(header(&d.join("network_summary.v1.csv")), header(&d.join("p2p_summary.v1.csv")));

    assert_eq!(emit(&config(CLUSTER), d), ["cluster_runs.v1.csv", "cluster_summary.v1.csv", "cluster.svg"]);
    assert_eq!(
        header(&d.join("cluster_runs.v1.csv")),
        "noise,t1_ns,t2_ns,pairs_per_iteration,seed_index,seed,transmissions,f1,f1_degenerate,iterations"
    );
    assert_eq!(
        header(&d.join("cluster_summary.v1.csv")),
        "noise,t1_ns,t2_ns,pairs_per_iteration,runs,f1_mean,f1_std,transmissions_mean,transmissions_std"
    );
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    for text in [P2P, NETWORK, CLUSTER] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut one = config(text);
        one.workers = Some(1);
        let mut four = config(text);
        four.workers = Some(4);
        emit(&one, a.path());
        emit(&four, b.path());
        let (x, y) = (dir_bytes(a.path()), dir_bytes(b.path()));
        assert!(!x.is_empty());
        assert_eq!(x, y);
    }
}

#[test]
fn master_seed_changes_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut other = config(P2P);
    other.master_seed = 43;
    emit(&config(P2P), a.path());
    emit(&other, b.path());
    assert_ne!(dir_bytes(a.path())["p2p_runs.v1.csv"], dir_bytes(b.path())["p2p_runs.v1.csv"]);
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let head = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_owned).collect()).collect();
    (head, rows)
}

fn col(head: &[String], name: &str) -> usize {
    head.iter().position(|h| h == name).unwrap()
}

#[test]
fn summary_means_match_run_rows() {
    let dir = tempfile::tempdir().unwrap();
    emit(&config(P2P), dir.path());
    let (rh, runs) = read_csv(&dir.path().join("p2p_runs.v1.csv"));
    let (sh, summary) = read_csv(&dir.path().join("p2p_summary.v1.csv"));
    assert_eq!(summary.len(), 2 * (2 * 2 + 1));
    for row in &summary {
        let key = (&row[col(&sh, "series")], &row[col(&sh, "r")]);
        let matching: Vec<&Vec<String>> =
            runs.iter().filter(|r| (&r[col(&rh, "series")], &r[col(&rh, "r")]) == key).collect();
        assert_eq!(matching.len().to_string(), row[col(&sh, "runs")]);
        for (run_col, mean_col) in
            [("message_error_rate", "error_mean"), ("throughput_bits_per_tick", "throughput_mean")]
        {
            let values: Vec<f64> = matching.iter().map(|r| r[col(&rh, run_col)].parse().unwrap()).collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let reported: f64 = row[col(&sh, mean_col)].parse().unwrap();
            assert!((mean - reported).abs() <= 1e-12 * mean.abs().max(1.0), "{key:?} {mean_col}");
        }
    }

    emit(&config(CLUSTER), dir.path());
    let (rh, runs) = read_csv(&dir.path().join("cluster_runs.v1.csv"));
    let (sh, summary) = read_csv(&dir.path().join("cluster_summary.v1.csv"));
    for row in &summary {
        let key = (&row[col(&sh, "noise")], &row[col(&sh, "pairs_per_iteration")]);
        let f1: Vec<f64> = runs
            .iter()
            .filter(|r| (&r[col(&rh, "noise")], &r[col(&rh, "pairs_per_iteration")]) == key)
            .map(|r| r[col(&rh, "f1")].parse().unwrap())
            .collect();
        assert_eq!(f1.len(), 4);
        let mean = f1.iter().sum::<f64>() / 4.0;
        let reported: f64 = row[col(&sh, "f1_mean")].parse().unwrap();
        assert!((mean - reported).abs() <= 1e-12);
    }
}

#[test]
fn single_point_gives_one_row() {
    let text = "scenario = \"p2p\"\nseeds_per_point = 1\n[link]\ntotal_ticks = 500\n[sweep]\nr = [0.5]\nnoise = [\"perfect\"]\nclassical_baseline = false\n";
    let dir = tempfile::tempdir().unwrap();
    emit(&config(text), dir.path());
    for file in ["p2p_runs.v1.csv", "p2p_summary.v1.csv"] {
        assert_eq!(fs::read_to_string(dir.path().join(file)).unwrap().lines().count(), 2);
    }
}

#[test]
fn perfect_memory_has_no_errors() {
    let text = "scenario = \"p2p\"\nseeds_per_point = 4\n[link]\ntotal_ticks = 5000\n[sweep]\nr = [0.3, 1.0]\nnoise = [\"perfect\"]\n";
    let SweepResults::P2p(res) = run_sweep(&config(text)).unwrap() else { panic!() };
    assert!(res.summary.iter().all(|s| s.error.mean == 0.0));
}

#[test]
fn plots_carry_baseline_and_secondary_axis() {
    let dir = tempfile::tempdir().unwrap();
    emit(&config(P2P), dir.path());
    for svg in ["p2p_throughput.svg", "p2p_error.svg"] {
        let text = fs::read_to_string(dir.path().join(svg)).unwrap();
        assert!(text.contains("classical L=4"));
        assert!(text.contains("110/100 fifo-replace E=200 L=4"));
    }
    emit(&config(CLUSTER), dir.path());
    let text = fs::read_to_string(dir.path().join("cluster.svg")).unwrap();
    assert!(text.contains("mean total transmissions") && text.contains("mean F1"));
}

fn gewi(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gewi")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    };

    let good = write("good.toml", CLUSTER);
    let out = gewi(&["validate", &good]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("6 points x 4 seeds"));

    let bad_syntax = write("syntax.toml", "scenario = \"p2p\"\n[link\n");
    let out = gewi(&["validate", &bad_syntax]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[parse]"));

    let bad_noise = write("noise.toml", "scenario = \"p2p\"\n[sweep]\nnoise = [{ t1_ns = 10.0, t2_ns = 30.0 }]\n");
    let out = gewi(&["validate", &bad_noise]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("T2"));

    let out = gewi(&["p2p", "--config", &good]);
    assert_eq!(out.status.code(), Some(3), "scenario kind mismatch");

    let out = gewi(&["validate", &dir.path().join("missing.toml").to_string_lossy()]);
    assert_eq!(out.status.code(), Some(4));

    let out_dir = dir.path().join("run");
    let small = write(
        "small.toml",
        "scenario = \"cluster\"\nseeds_per_point = 2\n[sweep]\npairs = [0, 125]\nnoise = [\"10ms\"]\n",
    );
    let out = gewi(&["cluster", "-c", &small, "--out", &out_dir.to_string_lossy(), "--seed", "9", "--no-plots"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("cluster_summary.v1.csv").exists());
    assert!(!out_dir.join("cluster.svg").exists());
}

#[test]
fn shipped_scenarios_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        gewi_sim::load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert_eq!(seen, 3);
}
